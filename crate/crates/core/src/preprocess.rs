//! Image decoding and preparation of network inputs.
//!
//! The pipeline is decode → replicate grayscale to three channels → bilinear
//! resize to 224×224 → per-channel normalisation into a `1×3×H×W` tensor.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::class::Class;
use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("unsupported image container (expected PNG, JPEG or binary PGM)")]
    Unsupported,
    #[error("corrupt image stream: {0}")]
    Corrupt(String),
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    Channels(usize),
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error("invalid preprocessing config: {0}")]
    Config(String),
}

/// 8-bit pixels, row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Invalid(format!("empty image {}x{}", width, height)));
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::Channels(channels));
        }
        if width * height * channels != data.len() {
            return Err(ImageError::Invalid(format!(
                "{}x{}x{} needs {} bytes, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }
}

/// Decodes PNG, JPEG or binary PGM (`P5`). 16-bit samples keep their high
/// byte.
pub fn decode(bytes: &[u8]) -> Result<RawImage, ImageError> {
    if bytes.starts_with(b"P5") {
        return decode_pgm(bytes);
    }
    let format = if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        image::ImageFormat::Png
    } else if bytes.starts_with(&[0xFF, 0xD8]) {
        image::ImageFormat::Jpeg
    } else {
        return Err(ImageError::Unsupported);
    };
    let img = image::load_from_memory_with_format(bytes, format).map_err(|e| match e {
        image::ImageError::Unsupported(_) => ImageError::Unsupported,
        other => ImageError::Corrupt(other.to_string()),
    })?;
    from_dynamic(img)
}

fn from_dynamic(img: image::DynamicImage) -> Result<RawImage, ImageError> {
    use image::DynamicImage as D;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let high = |v: &[u16]| v.iter().map(|&x| (x >> 8) as u8).collect::<Vec<u8>>();
    match img {
        D::ImageLuma8(b) => RawImage::new(w, h, 1, b.into_raw()),
        D::ImageLumaA8(b) => RawImage::new(w, h, 1, b.into_raw().chunks_exact(2).map(|p| p[0]).collect()),
        D::ImageRgb8(b) => RawImage::new(w, h, 3, b.into_raw()),
        D::ImageRgba8(b) => RawImage::new(w, h, 3, strip_alpha(&b.into_raw())),
        D::ImageLuma16(b) => RawImage::new(w, h, 1, high(&b.into_raw())),
        D::ImageLumaA16(b) => {
            let raw = b.into_raw();
            RawImage::new(w, h, 1, raw.chunks_exact(2).map(|p| (p[0] >> 8) as u8).collect())
        }
        D::ImageRgb16(b) => RawImage::new(w, h, 3, high(&b.into_raw())),
        D::ImageRgba16(b) => {
            let raw = high(&b.into_raw());
            RawImage::new(w, h, 3, strip_alpha(&raw))
        }
        other => RawImage::new(w, h, 3, other.to_rgb8().into_raw()),
    }
}

fn strip_alpha(rgba: &[u8]) -> Vec<u8> {
    rgba.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect()
}

fn decode_pgm(bytes: &[u8]) -> Result<RawImage, ImageError> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // Whitespace and `#` comments may separate header fields.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(ImageError::Corrupt("PGM header truncated".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::Corrupt("PGM header field is not a number".into()))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(ImageError::Corrupt("PGM header not terminated".into()));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(ImageError::Corrupt(format!("PGM maxval {} out of range", maxval)));
    }
    let wide = maxval > 255;
    let n = width * height;
    let need = if wide { 2 * n } else { n };
    let body = &bytes[pos..];
    if body.len() < need {
        return Err(ImageError::Corrupt(format!(
            "PGM body has {} bytes, need {}",
            body.len(),
            need
        )));
    }
    // Big-endian 16-bit samples: the high byte comes first.
    let data = if wide {
        body[..need].chunks_exact(2).map(|p| p[0]).collect()
    } else {
        body[..need].to_vec()
    };
    RawImage::new(width, height, 1, data)
}

/// Binary PGM for single-channel images.
pub fn encode_pgm(img: &RawImage) -> Result<Vec<u8>, ImageError> {
    if img.channels != 1 {
        return Err(ImageError::Channels(img.channels));
    }
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    Ok(out)
}

/// Replicates a single channel into three; three-channel input is returned
/// unchanged.
pub fn to_three_channel(img: &RawImage) -> Result<RawImage, ImageError> {
    match img.channels {
        3 => Ok(img.clone()),
        1 => {
            let data = img.data.iter().flat_map(|&v| [v, v, v]).collect();
            RawImage::new(img.width, img.height, 3, data)
        }
        c => Err(ImageError::Channels(c)),
    }
}

/// Source sample position for output index `i` with half-pixel centres:
/// `(i + 0.5)·scale − 0.5`, clamped to `[0, src − 1]`.
fn source_coord(i: usize, src: usize, dst: usize) -> (usize, usize, f64) {
    let scale = src as f64 / dst as f64;
    let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
    let lo = s.floor() as usize;
    let hi = (lo + 1).min(src - 1);
    (lo, hi, s - lo as f64)
}

/// Bilinear resize with half-pixel centre alignment, rounding each channel
/// value to the nearest integer.
pub fn resize_bilinear(img: &RawImage, width: usize, height: usize) -> Result<RawImage, ImageError> {
    if width == 0 || height == 0 {
        return Err(ImageError::Invalid(format!("target {}x{} is empty", width, height)));
    }
    let c = img.channels;
    let xs: Vec<_> = (0..width).map(|x| source_coord(x, img.width, width)).collect();
    let mut out = Vec::with_capacity(width * height * c);
    for y in 0..height {
        let (y0, y1, fy) = source_coord(y, img.height, height);
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let p = |x: usize, y: usize| img.data[(y * img.width + x) * c + ch] as f64;
                let top = (1.0 - fx) * p(x0, y0) + fx * p(x1, y0);
                let bottom = (1.0 - fx) * p(x0, y1) + fx * p(x1, y1);
                let v = (1.0 - fy) * top + fy * bottom;
                out.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RawImage::new(width, height, c, out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    target_size: usize,
    mean: [f32; 3],
    std: [f32; 3],
    replicate_grayscale: bool,
}

impl PreprocessConfig {
    pub const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
    pub const IMAGENET_STD: [f32; 3] = [0.229, 0.224, 0.225];

    pub fn new(
        target_size: usize,
        mean: [f32; 3],
        std: [f32; 3],
        replicate_grayscale: bool,
    ) -> Result<Self, ImageError> {
        if target_size == 0 {
            return Err(ImageError::Config("target size must be at least 1".into()));
        }
        if std.iter().any(|&s| !(s > 0.0)) {
            return Err(ImageError::Config(format!("std components must be positive, got {:?}", std)));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(ImageError::Config(format!("mean must be finite, got {:?}", mean)));
        }
        Ok(Self {
            target_size,
            mean,
            std,
            replicate_grayscale,
        })
    }

    pub fn target_size(&self) -> usize {
        self.target_size
    }

    pub fn mean(&self) -> [f32; 3] {
        self.mean
    }

    pub fn std(&self) -> [f32; 3] {
        self.std
    }

    pub fn replicate_grayscale(&self) -> bool {
        self.replicate_grayscale
    }
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            target_size: 224,
            mean: Self::IMAGENET_MEAN,
            std: Self::IMAGENET_STD,
            replicate_grayscale: true,
        }
    }
}

/// `(pixel/255 − mean[c]) / std[c]` into a planar `1×3×H×W` tensor.
pub fn normalize(img: &RawImage, cfg: &PreprocessConfig) -> Result<Tensor, ImageError> {
    if img.channels != 3 {
        return Err(ImageError::Channels(img.channels));
    }
    let (w, h) = (img.width, img.height);
    let mut data = vec![0.0f32; 3 * w * h];
    for c in 0..3 {
        let (m, s) = (cfg.mean[c] as f64, cfg.std[c] as f64);
        let plane = &mut data[c * w * h..(c + 1) * w * h];
        for (i, v) in plane.iter_mut().enumerate() {
            let p = img.data[i * 3 + c] as f64;
            *v = ((p / 255.0 - m) / s) as f32;
        }
    }
    Tensor::new(vec![1, 3, h, w], data).map_err(|e| ImageError::Invalid(e.to_string()))
}

/// The full chain from encoded bytes to a network input.
pub fn preprocess(bytes: &[u8], cfg: &PreprocessConfig) -> Result<Tensor, ImageError> {
    let img = decode(bytes)?;
    let img = if img.channels == 1 && cfg.replicate_grayscale {
        to_three_channel(&img)?
    } else {
        img
    };
    let img = resize_bilinear(&img, cfg.target_size, cfg.target_size)?;
    normalize(&img, cfg)
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("manifest header must be `path,label`, got {0:?}")]
    Header(Vec<String>),
    #[error("manifest line {line}: {message}")]
    Row { line: u64, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// The path as written in the manifest; used as the sample id.
    pub id: String,
    /// `id` resolved against the manifest's directory.
    pub path: PathBuf,
    pub label: Class,
}

/// Parses a `path,label` CSV. Relative paths resolve against `base_dir`.
pub fn parse_manifest<R: Read>(reader: R, base_dir: &Path) -> Result<Vec<ManifestEntry>, ManifestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| ManifestError::Row {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header != ["path", "label"] {
        return Err(ManifestError::Header(header));
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| ManifestError::Row {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(ManifestError::Row {
                line,
                message: "empty path".into(),
            });
        }
        let label = record[1].parse::<Class>().map_err(|e| ManifestError::Row {
            line,
            message: e.to_string(),
        })?;
        out.push(ManifestEntry {
            path: base_dir.join(&id),
            id,
            label,
        });
    }
    Ok(out)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>, ManifestError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_manifest(file, path.parent().unwrap_or(Path::new("")))
}
