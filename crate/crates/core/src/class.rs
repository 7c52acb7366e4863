use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The three diagnostic classes, in their fixed index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Class {
    #[serde(rename = "Covid-19")]
    Covid19,
    Normal,
    #[serde(rename = "Viral Pneumonia")]
    ViralPneumonia,
}

impl Class {
    pub const ALL: [Class; 3] = [Class::Covid19, Class::Normal, Class::ViralPneumonia];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Class> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Class::Covid19 => "Covid-19",
            Class::Normal => "Normal",
            Class::ViralPneumonia => "Viral Pneumonia",
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown class label {0:?} (expected Covid-19, Normal or Viral Pneumonia)")]
pub struct UnknownClass(pub String);

impl FromStr for Class {
    type Err = UnknownClass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| UnknownClass(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_order_and_names() {
        for (i, c) in Class::ALL.into_iter().enumerate() {
            assert_eq!(c.index(), i);
            assert_eq!(Class::from_index(i), Some(c));
            assert_eq!(c.name().parse::<Class>().unwrap(), c);
        }
        assert_eq!(Class::from_index(3), None);
        assert!("covid".parse::<Class>().is_err());
    }
}
