use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::CoagError;

/// The three solvable coagulation kernels `2`, `x + y` and `xy`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    #[serde(rename = "const")]
    Constant,
    #[serde(rename = "add")]
    Additive,
    #[serde(rename = "mult")]
    Multiplicative,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::Constant, KernelKind::Additive, KernelKind::Multiplicative];

    /// Homogeneity degree.
    pub fn gamma(self) -> u32 {
        match self {
            KernelKind::Constant => 0,
            KernelKind::Additive => 1,
            KernelKind::Multiplicative => 2,
        }
    }

    /// The constant `k` in the self-similar time change `dt/dtau = k^{-1} s^{1-gamma}`.
    pub fn k_constant(self) -> f64 {
        match self {
            KernelKind::Additive => 2.0,
            _ => 1.0,
        }
    }

    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            KernelKind::Constant => 2.0,
            KernelKind::Additive => x + y,
            KernelKind::Multiplicative => x * y,
        }
    }

    pub fn class(self) -> AdmissibleClass {
        AdmissibleClass::of(self)
    }

    /// Open/closed range of `kappa` for which the contraction theorem applies.
    pub fn theorem_kappa_range(self) -> (f64, f64) {
        match self {
            KernelKind::Constant => (1.0, 2.0),
            _ => (2.0, 3.0),
        }
    }

    pub fn kappa_in_theorem_range(self, kappa: f64) -> bool {
        let (lo, hi) = self.theorem_kappa_range();
        match self {
            KernelKind::Constant => kappa > lo && kappa <= hi,
            _ => kappa > lo && kappa < hi,
        }
    }

    /// Decay exponent of the contraction theorem for this kernel.
    pub fn theorem_rate(self, kappa: f64) -> f64 {
        match self {
            KernelKind::Constant => kappa - 1.0,
            _ => 0.5 * (kappa - 2.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Constant => "const",
            KernelKind::Additive => "add",
            KernelKind::Multiplicative => "mult",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = CoagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "const" | "constant" => Ok(KernelKind::Constant),
            "add" | "additive" => Ok(KernelKind::Additive),
            "mult" | "multiplicative" => Ok(KernelKind::Multiplicative),
            other => Err(CoagError::UnknownName(format!("kernel '{other}'"))),
        }
    }
}

/// Normalization class: the two moments fixed to one and the moment that must be finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AdmissibleClass {
    pub kernel: KernelKind,
    pub required_moments: (usize, usize),
    pub finiteness_moment: usize,
}

impl AdmissibleClass {
    pub fn of(kernel: KernelKind) -> Self {
        let (required_moments, finiteness_moment) = match kernel {
            KernelKind::Constant => ((0, 1), 2),
            KernelKind::Additive => ((1, 2), 3),
            KernelKind::Multiplicative => ((2, 3), 4),
        };
        AdmissibleClass { kernel, required_moments, finiteness_moment }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_determine_constants() {
        let got: Vec<_> = KernelKind::ALL.iter().map(|k| (k.gamma(), k.k_constant())).collect();
        assert_eq!(got, vec![(0, 1.0), (1, 2.0), (2, 1.0)]);
        assert_eq!(KernelKind::Additive.class().required_moments, (1, 2));
        assert_eq!(KernelKind::Multiplicative.class().finiteness_moment, 4);
    }

    #[test]
    fn parse_and_display_round_trip() {
        for k in KernelKind::ALL {
            assert_eq!(k.to_string().parse::<KernelKind>().unwrap(), k);
        }
        assert!("brownian".parse::<KernelKind>().is_err());
    }

    #[test]
    fn theorem_ranges() {
        assert!(KernelKind::Constant.kappa_in_theorem_range(2.0));
        assert!(!KernelKind::Constant.kappa_in_theorem_range(1.0));
        assert!(!KernelKind::Additive.kappa_in_theorem_range(3.0));
        assert_eq!(KernelKind::Additive.theorem_rate(2.5), 0.25);
    }
}
