use serde::{Deserialize, Serialize};

use super::{dot, Result, SvmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Poly,
}

/// `K(x, z) = x·z` for linear, `(x·z/scale + offset)^degree` for poly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernelSpec")]
pub struct KernelSpec {
    kind: KernelKind,
    degree: u32,
    scale: f64,
    offset: f64,
}

#[derive(Deserialize)]
struct RawKernelSpec {
    kind: KernelKind,
    degree: u32,
    scale: f64,
    offset: f64,
}

impl TryFrom<RawKernelSpec> for KernelSpec {
    type Error = SvmError;

    fn try_from(r: RawKernelSpec) -> Result<Self> {
        match r.kind {
            KernelKind::Linear => Ok(Self::linear()),
            KernelKind::Poly => Self::poly(r.degree, r.scale, r.offset),
        }
    }
}

impl KernelSpec {
    pub fn linear() -> Self {
        Self {
            kind: KernelKind::Linear,
            degree: 1,
            scale: 1.0,
            offset: 0.0,
        }
    }

    pub fn poly(degree: u32, scale: f64, offset: f64) -> Result<Self> {
        if degree != 2 && degree != 3 {
            return Err(SvmError::Kernel(format!("polynomial degree must be 2 or 3, got {}", degree)));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(SvmError::Kernel(format!("scale must be positive, got {}", scale)));
        }
        if !(offset >= 0.0) || !offset.is_finite() {
            return Err(SvmError::Kernel(format!("offset must be non-negative, got {}", offset)));
        }
        Ok(Self {
            kind: KernelKind::Poly,
            degree,
            scale,
            offset,
        })
    }

    pub fn quadratic(scale: f64, offset: f64) -> Result<Self> {
        Self::poly(2, scale, offset)
    }

    pub fn cubic(scale: f64, offset: f64) -> Result<Self> {
        Self::poly(3, scale, offset)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn name(&self) -> &'static str {
        match (self.kind, self.degree) {
            (KernelKind::Linear, _) => "linear",
            (KernelKind::Poly, 2) => "quadratic",
            _ => "cubic",
        }
    }

    /// Kernel value from a precomputed inner product.
    pub fn from_dot(&self, xz: f64) -> f64 {
        match self.kind {
            KernelKind::Linear => xz,
            KernelKind::Poly => (xz / self.scale + self.offset).powi(self.degree as i32),
        }
    }

    pub fn eval(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        if x.len() != z.len() {
            return Err(SvmError::Dimension {
                expected: x.len(),
                got: z.len(),
            });
        }
        Ok(self.from_dot(dot(x, z)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_values() {
        let (x, z) = ([1.0, 2.0], [3.0, 4.0]);
        assert_eq!(KernelSpec::linear().eval(&x, &z).unwrap(), 11.0);
        assert_eq!(KernelSpec::quadratic(1.0, 1.0).unwrap().eval(&x, &z).unwrap(), 144.0);
        assert_eq!(KernelSpec::cubic(1.0, 1.0).unwrap().eval(&x, &z).unwrap(), 1728.0);
        assert_eq!(KernelSpec::quadratic(2.0, 0.5).unwrap().eval(&x, &z).unwrap(), 36.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            KernelSpec::linear().eval(&[1.0], &[1.0, 2.0]),
            Err(SvmError::Dimension { .. })
        ));
    }

    #[test]
    fn parameter_validation() {
        assert!(KernelSpec::poly(4, 1.0, 1.0).is_err());
        assert!(KernelSpec::poly(2, 0.0, 1.0).is_err());
        assert!(KernelSpec::poly(2, 1.0, -0.1).is_err());
        let bad = r#"{"kind":"poly","degree":5,"scale":1.0,"offset":1.0}"#;
        assert!(serde_json::from_str::<KernelSpec>(bad).is_err());
    }

    #[test]
    fn json_round_trip() {
        let k = KernelSpec::cubic(1000.0, 1.0).unwrap();
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(s, r#"{"kind":"poly","degree":3,"scale":1000.0,"offset":1.0}"#);
        assert_eq!(serde_json::from_str::<KernelSpec>(&s).unwrap(), k);
        assert_eq!(k.name(), "cubic");
    }
}
