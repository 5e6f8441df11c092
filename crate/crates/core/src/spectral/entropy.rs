//! Entropy functionals of an occupation spectrum, in nats.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{OccupationSpectrum, SpectralError};

/// Orders this close to 1 are evaluated as von Neumann entropy.
const VON_NEUMANN_WINDOW: f64 = 1e-6;

/// Rényi order `α ∈ (0, ∞]`; `α = 1` is the von Neumann entropy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RenyiOrder {
    Finite(f64),
    Infinite,
}

impl RenyiOrder {
    pub const VON_NEUMANN: RenyiOrder = RenyiOrder::Finite(1.0);

    pub fn new(alpha: f64) -> Result<Self, SpectralError> {
        if alpha == f64::INFINITY {
            Ok(Self::Infinite)
        } else if alpha > 0.0 && alpha.is_finite() {
            Ok(Self::Finite(alpha))
        } else {
            Err(SpectralError::InvalidAlpha(alpha))
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Self::Finite(a) => a,
            Self::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for RenyiOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(a) => write!(f, "{a}"),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for RenyiOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Self::Infinite),
            other => {
                let a: f64 = other.parse().map_err(|_| format!("not a Rényi order: {s:?}"))?;
                Self::new(a).map_err(|e| e.to_string())
            }
        }
    }
}

impl Serialize for RenyiOrder {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Finite(a) => s.serialize_f64(*a),
            Self::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for RenyiOrder {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(a) => Self::new(a).map_err(serde::de::Error::custom),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// `h(x) = -x ln x - (1-x) ln(1-x)`, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.ln() - (1.0 - x) * (-x).ln_1p()
}

/// `h_α(x) = ln(x^α + (1-x)^α) / (1 - α)`; `h_∞(x) = -ln max(x, 1-x)`.
pub fn renyi_binary(alpha: RenyiOrder, x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    match alpha {
        RenyiOrder::Infinite => -x.max(1.0 - x).ln(),
        RenyiOrder::Finite(a) if (a - 1.0).abs() < VON_NEUMANN_WINDOW => binary_entropy(x),
        RenyiOrder::Finite(a) => (x.powf(a) + (1.0 - x).powf(a)).ln() / (1.0 - a),
    }
}

pub fn von_neumann_entropy(occ: &OccupationSpectrum) -> f64 {
    occ.values().iter().map(|&x| binary_entropy(x)).sum()
}

pub fn renyi_entropy(occ: &OccupationSpectrum, alpha: RenyiOrder) -> Result<f64, SpectralError> {
    if let RenyiOrder::Finite(a) = alpha {
        if !(a > 0.0 && a.is_finite()) {
            return Err(SpectralError::InvalidAlpha(a));
        }
    }
    Ok(occ.values().iter().map(|&x| renyi_binary(alpha, x)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    fn occ(v: &[f64]) -> OccupationSpectrum {
        OccupationSpectrum::from_raw(v.to_vec()).unwrap()
    }

    #[test]
    fn von_neumann_examples() {
        assert_eq!(von_neumann_entropy(&occ(&[0.0, 1.0, 1.0, 0.0])), 0.0);
        assert_abs_diff_eq!(von_neumann_entropy(&occ(&[0.5])), LN_2, epsilon = 1e-15);
        let h_quarter = -0.25 * 0.25f64.ln() - 0.75 * 0.75f64.ln();
        assert_abs_diff_eq!(h_quarter, 0.562_335_144_618_625, epsilon = 1e-12);
        assert_abs_diff_eq!(
            von_neumann_entropy(&occ(&[0.5, 0.25])),
            LN_2 + h_quarter,
            epsilon = 1e-14
        );
    }

    #[test]
    fn renyi_examples() {
        let half = occ(&[0.5]);
        let two = renyi_entropy(&half, RenyiOrder::new(2.0).unwrap()).unwrap();
        assert_abs_diff_eq!(two, LN_2, epsilon = 1e-15);
        let inf = renyi_entropy(&half, RenyiOrder::Infinite).unwrap();
        assert_abs_diff_eq!(inf, LN_2, epsilon = 1e-15);
        assert_eq!(
            renyi_entropy(&half, RenyiOrder::Finite(0.0)),
            Err(SpectralError::InvalidAlpha(0.0))
        );
        assert_eq!(RenyiOrder::new(-1.0), Err(SpectralError::InvalidAlpha(-1.0)));
    }

    #[test]
    fn renyi_routes_to_von_neumann_near_one() {
        let o = occ(&[0.1, 0.37, 0.8]);
        let vn = von_neumann_entropy(&o);
        assert_eq!(renyi_entropy(&o, RenyiOrder::Finite(1.0 + 5e-7)).unwrap(), vn);
        for a in [1.0 - 1.1e-6, 1.0 + 1.1e-6] {
            let s = renyi_entropy(&o, RenyiOrder::Finite(a)).unwrap();
            assert_abs_diff_eq!(s, vn, epsilon = 1e-6);
        }
    }

    #[test]
    fn order_parsing_and_serde() {
        assert_eq!("inf".parse::<RenyiOrder>().unwrap(), RenyiOrder::Infinite);
        assert_eq!("2".parse::<RenyiOrder>().unwrap(), RenyiOrder::Finite(2.0));
        assert!("0".parse::<RenyiOrder>().is_err());
        assert_eq!(serde_json::to_string(&RenyiOrder::Infinite).unwrap(), "\"inf\"");
        let a: RenyiOrder = serde_json::from_str("1.5").unwrap();
        assert_eq!(a, RenyiOrder::Finite(1.5));
        assert!(serde_json::from_str::<RenyiOrder>("-2").is_err());
    }
}
