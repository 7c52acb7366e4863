//! The `RNW1` named-tensor container.
//!
//! Little-endian, no alignment padding:
//!
//! ```text
//! "RNW1"                      4 bytes magic
//! u32                         tensor count
//! per tensor:
//!   u16                       name length
//!   [u8; len]                 ASCII name
//!   u8                        rank
//!   [u32; rank]               extents
//!   [f32; product(extents)]   values
//! ```

use std::collections::HashSet;
use std::io::{self, Write};

use thiserror::Error;

use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"RNW1";

#[derive(Debug, Error)]
pub enum RnwError {
    #[error("bad magic {0:?}: not an RNW1 file")]
    BadMagic(Vec<u8>),
    #[error("file truncated while reading {0}")]
    Truncated(String),
    #[error("{0} trailing bytes after the last tensor")]
    TrailingBytes(usize),
    #[error("tensor name is not ASCII: {0:?}")]
    InvalidName(String),
    #[error("tensor {name}: {reason}")]
    InvalidTensor { name: String, reason: String },
    #[error("duplicate tensor: {0}")]
    DuplicateTensor(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &dyn Fn() -> String) -> Result<&'a [u8], RnwError> {
        if self.bytes.len() - self.pos < n {
            return Err(RnwError::Truncated(what()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &dyn Fn() -> String) -> Result<u8, RnwError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &dyn Fn() -> String) -> Result<u16, RnwError> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &dyn Fn() -> String) -> Result<u32, RnwError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parses a complete container, preserving tensor order.
pub fn read_tensors(bytes: &[u8]) -> Result<Vec<(String, Tensor)>, RnwError> {
    if bytes.len() < 4 {
        return Err(RnwError::Truncated("magic".into()));
    }
    if bytes[..4] != MAGIC {
        return Err(RnwError::BadMagic(bytes[..4].to_vec()));
    }
    let mut r = Reader { bytes, pos: 4 };
    let count = r.u32(&|| "tensor count".into())? as usize;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count.min(4096));
    for index in 0..count {
        let name_len = r.u16(&|| format!("name length of tensor #{}", index))? as usize;
        let raw = r.take(name_len, &|| format!("name of tensor #{}", index))?;
        let name = String::from_utf8_lossy(raw).into_owned();
        if !raw.is_ascii() {
            return Err(RnwError::InvalidName(name));
        }
        let ctx = |part: &str| {
            let name = name.clone();
            let part = part.to_string();
            move || format!("{} of tensor {}", part, name)
        };
        let rank = r.u8(&ctx("rank"))? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32(&ctx("dims"))? as usize);
        }
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| RnwError::InvalidTensor {
                name: name.clone(),
                reason: format!("extents {:?} overflow", dims),
            })?;
        let raw = r.take(len, &ctx("data"))?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let tensor = Tensor::new(dims, data).map_err(|e| RnwError::InvalidTensor {
            name: name.clone(),
            reason: e.to_string(),
        })?;
        if !seen.insert(name.clone()) {
            return Err(RnwError::DuplicateTensor(name));
        }
        out.push((name, tensor));
    }
    if r.pos != bytes.len() {
        return Err(RnwError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(out)
}

pub fn write_tensors<'a, W, I>(mut w: W, tensors: I) -> Result<(), RnwError>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a Tensor)>,
    I::IntoIter: ExactSizeIterator,
{
    let tensors = tensors.into_iter();
    w.write_all(&MAGIC)?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, t) in tensors {
        if !name.is_ascii() || name.len() > u16::MAX as usize {
            return Err(RnwError::InvalidName(name.to_string()));
        }
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&[t.rank() as u8])?;
        for &d in t.dims() {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.len() * 4);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<(String, Tensor)> {
        vec![
            ("a.weight".into(), Tensor::new(vec![2, 3], (0..6).map(|i| i as f32 - 2.5).collect()).unwrap()),
            ("b".into(), Tensor::new(vec![1], vec![f32::MIN_POSITIVE]).unwrap()),
        ]
    }

    fn encode(t: &[(String, Tensor)]) -> Vec<u8> {
        let mut buf = Vec::new();
        write_tensors(&mut buf, t.iter().map(|(n, t)| (n.as_str(), t))).unwrap();
        buf
    }

    #[test]
    fn layout_is_exact() {
        let t = vec![("xy".to_string(), Tensor::new(vec![1], vec![1.0]).unwrap())];
        let buf = encode(&t);
        let mut expected = b"RNW1".to_vec();
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&2u16.to_le_bytes());
        expected.extend_from_slice(b"xy");
        expected.push(1);
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        assert_eq!(buf, expected);
    }

    #[test]
    fn round_trip() {
        let t = sample();
        assert_eq!(read_tensors(&encode(&t)).unwrap(), t);
    }

    #[test]
    fn bad_magic() {
        let mut buf = encode(&sample());
        buf[..4].copy_from_slice(b"XXXX");
        assert!(matches!(read_tensors(&buf), Err(RnwError::BadMagic(_))));
    }

    #[test]
    fn truncation_names_the_tensor() {
        let buf = encode(&sample());
        let err = read_tensors(&buf[..buf.len() - 1]).unwrap_err();
        assert!(matches!(err, RnwError::Truncated(ref s) if s.contains("tensor b")), "{}", err);
        assert!(matches!(read_tensors(&buf[..2]), Err(RnwError::Truncated(_))));
    }

    #[test]
    fn trailing_and_duplicate() {
        let mut buf = encode(&sample());
        buf.push(0);
        assert!(matches!(read_tensors(&buf), Err(RnwError::TrailingBytes(1))));

        let t = sample();
        let dup = vec![t[1].clone(), t[1].clone()];
        assert!(matches!(read_tensors(&encode(&dup)), Err(RnwError::DuplicateTensor(_))));
    }
}
