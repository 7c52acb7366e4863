use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use cxr_core::preprocess::PreprocessConfig;
use cxr_core::svm::{KernelSpec, SvmParams};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelName {
    Linear,
    Quadratic,
    Cubic,
}

impl KernelName {
    pub const ALL: [KernelName; 3] = [KernelName::Linear, KernelName::Quadratic, KernelName::Cubic];

    pub fn as_str(self) -> &'static str {
        match self {
            KernelName::Linear => "linear",
            KernelName::Quadratic => "quadratic",
            KernelName::Cubic => "cubic",
        }
    }

    /// Row label in the results table.
    pub fn method(self) -> &'static str {
        match self {
            KernelName::Linear => "SVM-Linear",
            KernelName::Quadratic => "SVM-Quadratic",
            KernelName::Cubic => "SVM-Cubic",
        }
    }

    pub fn spec(self, scale: f64, offset: f64) -> Result<KernelSpec, CliError> {
        let spec = match self {
            KernelName::Linear => Ok(KernelSpec::linear()),
            KernelName::Quadratic => KernelSpec::quadratic(scale, offset),
            KernelName::Cubic => KernelSpec::cubic(scale, offset),
        };
        spec.map_err(|e| CliError::Usage(e.to_string()))
    }
}

impl fmt::Display for KernelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelName {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KernelName::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| CliError::Usage(format!("unknown kernel {s:?} (expected linear, quadratic or cubic)")))
    }
}

/// Values given on the command line; each one overrides the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub weights: Option<String>,
    pub features: Option<PathBuf>,
    pub kernels: Vec<String>,
    pub c: Option<f64>,
    pub scale: Option<f64>,
    pub offset: Option<f64>,
    pub folds: Option<usize>,
    pub repeats: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub batch_size: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum KernelList {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    manifest: Option<PathBuf>,
    weights: Option<String>,
    features: Option<PathBuf>,
    kernel: Option<KernelList>,
    c: Option<f64>,
    scale: Option<f64>,
    offset: Option<f64>,
    folds: Option<usize>,
    repeats: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
    batch_size: Option<usize>,
    mean: Option<[f32; 3]>,
    std: Option<[f32; 3]>,
}

/// Where the network weights come from.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightsSource {
    File(PathBuf),
    /// Seeded random weights (`random:<seed>`), for smoke runs only.
    Random(u64),
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub manifest: Option<PathBuf>,
    pub weights: Option<WeightsSource>,
    pub features: PathBuf,
    pub kernels: Vec<KernelName>,
    pub c: f64,
    /// Polynomial kernel scale; `None` means the feature dimension.
    pub scale: Option<f64>,
    pub offset: f64,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub batch_size: usize,
    pub preprocess: PreprocessConfig,
}

fn parse_kernels(items: &[String]) -> Result<Vec<KernelName>, CliError> {
    let mut out = Vec::new();
    for item in items {
        for part in item.split(',').filter(|p| !p.trim().is_empty()) {
            let k: KernelName = part.parse()?;
            if !out.contains(&k) {
                out.push(k);
            }
        }
    }
    Ok(out)
}

fn parse_weights(s: &str, base: &Path) -> Result<WeightsSource, CliError> {
    match s.strip_prefix("random:") {
        Some(seed) => seed
            .parse()
            .map(WeightsSource::Random)
            .map_err(|_| CliError::Usage(format!("bad random weights seed {seed:?}"))),
        None => Ok(WeightsSource::File(base.join(s))),
    }
}

impl PipelineConfig {
    /// Reads the optional `key = value` file, then applies `o` on top.
    /// Relative paths in the file resolve against the file's directory.
    pub fn resolve(o: &Overrides) -> Result<Self, CliError> {
        let (file, base) = match &o.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
                let file: FileConfig = toml::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
                (file, path.parent().unwrap_or(Path::new("")).to_path_buf())
            }
            None => (FileConfig::default(), PathBuf::new()),
        };
        let rel = |p: Option<PathBuf>| p.map(|p| base.join(p));

        let kernels = if !o.kernels.is_empty() {
            parse_kernels(&o.kernels)?
        } else {
            match file.kernel {
                Some(KernelList::One(s)) => parse_kernels(&[s])?,
                Some(KernelList::Many(v)) => parse_kernels(&v)?,
                None => KernelName::ALL.to_vec(),
            }
        };
        let weights = match (&o.weights, &file.weights) {
            (Some(s), _) => Some(parse_weights(s, Path::new(""))?),
            (None, Some(s)) => Some(parse_weights(s, &base)?),
            (None, None) => None,
        };
        let out = o.out.clone().or(rel(file.out)).unwrap_or_else(|| PathBuf::from("out"));
        let features = o
            .features
            .clone()
            .or(rel(file.features))
            .unwrap_or_else(|| out.join("features.csv"));
        let preprocess = PreprocessConfig::new(
            224,
            file.mean.unwrap_or(PreprocessConfig::IMAGENET_MEAN),
            file.std.unwrap_or(PreprocessConfig::IMAGENET_STD),
            true,
        )
        .map_err(|e| CliError::Usage(e.to_string()))?;

        let cfg = PipelineConfig {
            manifest: o.manifest.clone().or(rel(file.manifest)),
            weights,
            features,
            kernels,
            c: o.c.or(file.c).unwrap_or(1.0),
            scale: o.scale.or(file.scale),
            offset: o.offset.or(file.offset).unwrap_or(1.0),
            folds: o.folds.or(file.folds).unwrap_or(5),
            repeats: o.repeats.or(file.repeats).unwrap_or(10),
            seed: o.seed.or(file.seed).unwrap_or(0),
            out,
            threads: o.threads.or(file.threads),
            batch_size: o.batch_size.or(file.batch_size).unwrap_or(8),
            preprocess,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |m: String| Err(CliError::Usage(m));
        if self.folds < 2 {
            return fail(format!("--folds must be at least 2, got {}", self.folds));
        }
        if self.repeats < 1 {
            return fail("--repeats must be at least 1".into());
        }
        if self.kernels.is_empty() {
            return fail("kernel list is empty".into());
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return fail(format!("--c must be positive, got {}", self.c));
        }
        if self.batch_size == 0 {
            return fail("--batch-size must be at least 1".into());
        }
        if self.threads == Some(0) {
            return fail("--threads must be at least 1".into());
        }
        Ok(())
    }

    pub fn svm_params(&self) -> SvmParams {
        SvmParams {
            c: self.c,
            ..SvmParams::default()
        }
    }

    pub fn kernel_spec(&self, kernel: KernelName, dim: usize) -> Result<KernelSpec, CliError> {
        kernel.spec(self.scale.unwrap_or(dim as f64), self.offset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = PipelineConfig::resolve(&Overrides::default()).unwrap();
        assert_eq!(cfg.kernels, KernelName::ALL.to_vec());
        assert_eq!((cfg.folds, cfg.repeats, cfg.seed, cfg.c), (5, 10, 0, 1.0));
        assert_eq!(cfg.features, PathBuf::from("out/features.csv"));
        assert_eq!(cfg.kernel_spec(KernelName::Cubic, 1000).unwrap().scale(), 1000.0);
    }

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(
            &path,
            "manifest = \"data/m.csv\"\nkernel = \"quadratic,cubic\"\nfolds = 4\nseed = 9\nweights = \"w.rnw\"\n",
        )
        .unwrap();
        let mut o = Overrides {
            config: Some(path),
            ..Overrides::default()
        };
        let cfg = PipelineConfig::resolve(&o).unwrap();
        assert_eq!(cfg.manifest, Some(dir.path().join("data/m.csv")));
        assert_eq!(cfg.weights, Some(WeightsSource::File(dir.path().join("w.rnw"))));
        assert_eq!(cfg.kernels, vec![KernelName::Quadratic, KernelName::Cubic]);
        assert_eq!((cfg.folds, cfg.seed), (4, 9));

        o.folds = Some(3);
        o.kernels = vec!["linear".into()];
        o.weights = Some("random:5".into());
        let cfg = PipelineConfig::resolve(&o).unwrap();
        assert_eq!((cfg.folds, cfg.kernels.clone()), (3, vec![KernelName::Linear]));
        assert_eq!(cfg.weights, Some(WeightsSource::Random(5)));
    }

    #[test]
    fn invalid_settings_are_usage_errors() {
        for o in [
            Overrides {
                folds: Some(1),
                ..Overrides::default()
            },
            Overrides {
                repeats: Some(0),
                ..Overrides::default()
            },
            Overrides {
                kernels: vec!["rbf".into()],
                ..Overrides::default()
            },
            Overrides {
                kernels: vec![",".into()],
                ..Overrides::default()
            },
        ] {
            assert_eq!(PipelineConfig::resolve(&o).unwrap_err().exit_code(), 2);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        fs::write(&path, "colour = \"blue\"\n").unwrap();
        let o = Overrides {
            config: Some(path),
            ..Overrides::default()
        };
        assert_eq!(PipelineConfig::resolve(&o).unwrap_err().exit_code(), 2);
    }
}
