//! On-site disorder families.
//!
//! Every family lives on `[0, ∞)` (or `[0, δ]`), is parameterized by a single
//! scale `δ > 0`, and is sampled by inverse CDF so that a stream of raw
//! uniforms maps to the same potential on every platform. Families are
//! registered by their serialized name (`"uniform"`, `"exponential"`,
//! `"half-cauchy"`) and looked up at runtime from configs and CLI flags.

use std::f64::consts::{FRAC_2_PI, PI};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::quadrature::{self, QuadratureError, Tolerance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DisorderError {
    #[error("disorder parameter must be positive and finite, got {0}")]
    InvalidDelta(f64),
    #[error("unknown disorder family {0:?} (known: uniform, exponential, half-cauchy)")]
    UnknownFamily(String),
    #[error("family {family} does not admit a finite shift divergence F(t): {reason}")]
    UnsupportedFamily { family: &'static str, reason: &'static str },
    #[error("shift must be nonnegative and finite, got {0}")]
    InvalidShift(f64),
    #[error("quadrature of J(t) failed: {0}")]
    QuadratureDivergence(#[from] QuadratureError),
    #[error("F(t) = 0: the variance bound degenerates to 0/0")]
    ZeroGap,
}

/// Anything that turns a uniform draw on `[0, 1)` into a site potential.
pub trait PotentialLaw: Sync {
    fn quantile(&self, u: f64) -> f64;
    fn label(&self) -> String;
}

pub fn sample_site<L: PotentialLaw + ?Sized, R: Rng + ?Sized>(law: &L, rng: &mut R) -> f64 {
    law.quantile(rng.random::<f64>())
}

/// The clean chain, `V ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPotential;

impl PotentialLaw for ZeroPotential {
    fn quantile(&self, _u: f64) -> f64 {
        0.0
    }
    fn label(&self) -> String {
        "zero".into()
    }
}

/// A one-parameter family of on-site densities.
pub trait DisorderFamily: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn pdf(&self, delta: f64, v: f64) -> f64;
    /// `P(V > v)`.
    fn survival(&self, delta: f64, v: f64) -> f64;
    fn quantile(&self, delta: f64, u: f64) -> f64;
    /// Right end of the support, `None` when unbounded.
    fn support_end(&self, delta: f64) -> Option<f64>;
    /// `F(t)` in closed form, `None` when the family has no finite value for `t > 0`.
    fn fisher_gap_closed_form(&self, delta: f64, t: f64) -> Option<f64>;
    /// Why `F(t)` is unavailable, for families where it is.
    fn fisher_gap_unavailable(&self) -> Option<&'static str> {
        None
    }
}

#[derive(Debug)]
pub struct Uniform;

impl DisorderFamily for Uniform {
    fn name(&self) -> &'static str {
        "uniform"
    }
    fn pdf(&self, delta: f64, v: f64) -> f64 {
        if (0.0..=delta).contains(&v) {
            1.0 / delta
        } else {
            0.0
        }
    }
    fn survival(&self, delta: f64, v: f64) -> f64 {
        ((delta - v) / delta).clamp(0.0, 1.0)
    }
    fn quantile(&self, delta: f64, u: f64) -> f64 {
        delta * u
    }
    fn support_end(&self, delta: f64) -> Option<f64> {
        Some(delta)
    }
    fn fisher_gap_closed_form(&self, _delta: f64, t: f64) -> Option<f64> {
        (t == 0.0).then_some(0.0)
    }
    fn fisher_gap_unavailable(&self) -> Option<&'static str> {
        Some("compact support: the shifted density leaves the support, J(t) = ∞ for t > 0")
    }
}

#[derive(Debug)]
pub struct Exponential;

impl DisorderFamily for Exponential {
    fn name(&self) -> &'static str {
        "exponential"
    }
    fn pdf(&self, delta: f64, v: f64) -> f64 {
        if v < 0.0 {
            0.0
        } else {
            (-v / delta).exp() / delta
        }
    }
    fn survival(&self, delta: f64, v: f64) -> f64 {
        if v <= 0.0 {
            1.0
        } else {
            (-v / delta).exp()
        }
    }
    fn quantile(&self, delta: f64, u: f64) -> f64 {
        -delta * (-u).ln_1p()
    }
    fn support_end(&self, _delta: f64) -> Option<f64> {
        None
    }
    fn fisher_gap_closed_form(&self, delta: f64, t: f64) -> Option<f64> {
        // J(t) = e^{t/δ} exactly.
        Some((t / delta).exp_m1())
    }
}

#[derive(Debug)]
pub struct HalfCauchy;

impl DisorderFamily for HalfCauchy {
    fn name(&self) -> &'static str {
        "half-cauchy"
    }
    fn pdf(&self, delta: f64, v: f64) -> f64 {
        if v < 0.0 {
            0.0
        } else {
            FRAC_2_PI * delta / (v * v + delta * delta)
        }
    }
    fn survival(&self, delta: f64, v: f64) -> f64 {
        if v <= 0.0 {
            1.0
        } else {
            FRAC_2_PI * (delta / v).atan()
        }
    }
    fn quantile(&self, delta: f64, u: f64) -> f64 {
        delta * (0.5 * PI * u).tan()
    }
    fn support_end(&self, _delta: f64) -> Option<f64> {
        None
    }
    fn fisher_gap_closed_form(&self, delta: f64, t: f64) -> Option<f64> {
        Some(2.0 * t / (PI * delta) + t * t / (2.0 * delta * delta))
    }
}

static FAMILIES: [&dyn DisorderFamily; 3] = [&Uniform, &Exponential, &HalfCauchy];

/// All registered families, in registration order.
pub fn families() -> &'static [&'static dyn DisorderFamily] {
    &FAMILIES
}

pub fn lookup(name: &str) -> Result<&'static dyn DisorderFamily, DisorderError> {
    families()
        .iter()
        .copied()
        .find(|f| f.name() == name)
        .ok_or_else(|| DisorderError::UnknownFamily(name.to_string()))
}

/// A disorder family together with its scale `δ`.
#[derive(Clone, Copy)]
pub struct DisorderSpec {
    family: &'static dyn DisorderFamily,
    delta: f64,
}

impl DisorderSpec {
    pub fn new(family: &str, delta: f64) -> Result<Self, DisorderError> {
        Self::with_family(lookup(family)?, delta)
    }

    pub fn with_family(family: &'static dyn DisorderFamily, delta: f64) -> Result<Self, DisorderError> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(DisorderError::InvalidDelta(delta));
        }
        Ok(Self { family, delta })
    }

    pub fn family(&self) -> &'static dyn DisorderFamily {
        self.family
    }

    pub fn family_name(&self) -> &'static str {
        self.family.name()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn pdf(&self, v: f64) -> f64 {
        self.family.pdf(self.delta, v)
    }

    pub fn survival(&self, v: f64) -> f64 {
        self.family.survival(self.delta, v)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_site(self, rng)
    }
}

impl PotentialLaw for DisorderSpec {
    fn quantile(&self, u: f64) -> f64 {
        self.family.quantile(self.delta, u)
    }
    fn label(&self) -> String {
        format!("{}(δ={})", self.family.name(), self.delta)
    }
}

impl fmt::Debug for DisorderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DisorderSpec")
            .field("family", &self.family.name())
            .field("delta", &self.delta)
            .finish()
    }
}

impl PartialEq for DisorderSpec {
    fn eq(&self, other: &Self) -> bool {
        self.family.name() == other.family.name() && self.delta == other.delta
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRepr {
    family: String,
    delta: f64,
}

impl Serialize for DisorderSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SpecRepr {
            family: self.family.name().to_string(),
            delta: self.delta,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DisorderSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = SpecRepr::deserialize(d)?;
        DisorderSpec::new(&repr.family, repr.delta).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapMethod {
    ClosedForm,
    Quadrature,
}

/// `F(t) = ∫ f(v-t)² / f(v) dv - 1`, the χ²-divergence between the density and
/// its shift by `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherGap {
    pub t: f64,
    pub value: f64,
    pub method: GapMethod,
}

fn check_shift(t: f64) -> Result<(), DisorderError> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(DisorderError::InvalidShift(t))
    }
}

fn unsupported(spec: &DisorderSpec) -> DisorderError {
    DisorderError::UnsupportedFamily {
        family: spec.family_name(),
        reason: spec
            .family
            .fisher_gap_unavailable()
            .unwrap_or("no closed form registered"),
    }
}

pub fn fisher_gap(spec: &DisorderSpec, t: f64) -> Result<FisherGap, DisorderError> {
    check_shift(t)?;
    let value = spec
        .family
        .fisher_gap_closed_form(spec.delta, t)
        .ok_or_else(|| unsupported(spec))?;
    Ok(FisherGap {
        t,
        value,
        method: GapMethod::ClosedForm,
    })
}

/// `J(t) = ∫_t^∞ f(v-t)² / f(v) dv` by adaptive quadrature on
/// `[t, t + 50δ]` plus the mapped tail beyond.
pub fn shift_overlap_quadrature(spec: &DisorderSpec, t: f64) -> Result<f64, DisorderError> {
    check_shift(t)?;
    // With a bounded support f(v) vanishes on (end, end + t] while f(v - t) does not.
    if t > 0.0 && spec.family.support_end(spec.delta).is_some() {
        return Err(unsupported(spec));
    }
    let integrand = |v: f64| {
        let shifted = spec.pdf(v - t);
        if shifted == 0.0 {
            0.0
        } else {
            shifted * shifted / spec.pdf(v)
        }
    };
    let tol = Tolerance {
        abs: 0.0,
        rel: 1e-11,
        max_intervals: 20_000,
    };
    let split = t + 50.0 * spec.delta;
    let upper = spec.family.support_end(spec.delta).map_or(split, |e| e.min(split));
    let body = quadrature::integrate(integrand, t, upper, tol)?;
    let tail = if spec.family.support_end(spec.delta).is_none() {
        quadrature::integrate_to_infinity(integrand, split, tol)?.value
    } else {
        0.0
    };
    Ok(body.value + tail)
}

pub fn fisher_gap_quadrature(spec: &DisorderSpec, t: f64) -> Result<FisherGap, DisorderError> {
    let j = shift_overlap_quadrature(spec, t)?;
    Ok(FisherGap {
        t,
        value: (j - 1.0).max(0.0),
        method: GapMethod::Quadrature,
    })
}

/// Hammersley–Chapman–Robbins lower bound on `Var{φ(ξ)}` from the means of
/// `φ(ξ)` and `φ(ξ + t)`.
pub fn hcr_bound(mean_phi: f64, mean_phi_shifted: f64, gap: &FisherGap) -> Result<f64, DisorderError> {
    if gap.value <= 0.0 {
        return Err(DisorderError::ZeroGap);
    }
    let d = mean_phi - mean_phi_shifted;
    Ok(d * d / gap.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn spec(name: &str, delta: f64) -> DisorderSpec {
        DisorderSpec::new(name, delta).unwrap()
    }

    #[test]
    fn pdf_examples() {
        assert_eq!(spec("exponential", 1.0).pdf(0.0), 1.0);
        assert_eq!(spec("uniform", 1.0).pdf(2.0), 0.0);
        assert_relative_eq!(spec("half-cauchy", 1.0).pdf(0.0), 2.0 / PI, max_relative = 1e-15);
        for f in families() {
            assert_eq!(f.pdf(1.0, -0.1), 0.0);
        }
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(spec("uniform", 2.0).quantile(0.5), 1.0);
        let u = 1.0 - (-1.0f64).exp();
        assert_relative_eq!(spec("exponential", 1.0).quantile(u), 1.0, max_relative = 1e-14);
        assert_relative_eq!(spec("half-cauchy", 3.0).quantile(0.5), 3.0, max_relative = 1e-14);
    }

    #[test]
    fn exponential_sample_mean() {
        let s = spec("exponential", 1.0);
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mean = (0..n).map(|_| s.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn registry_round_trip() {
        for f in families() {
            assert_eq!(lookup(f.name()).unwrap().name(), f.name());
        }
        assert_eq!(
            lookup("cauchy").unwrap_err(),
            DisorderError::UnknownFamily("cauchy".into())
        );
        assert!(matches!(
            DisorderSpec::new("uniform", 0.0),
            Err(DisorderError::InvalidDelta(_))
        ));
        assert!(matches!(
            DisorderSpec::new("uniform", f64::NAN),
            Err(DisorderError::InvalidDelta(_))
        ));
    }

    #[test]
    fn serde_uses_lowercase_names() {
        let s = spec("half-cauchy", 0.7);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"family":"half-cauchy","delta":0.7}"#);
        let back: DisorderSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<DisorderSpec>(r#"{"family":"gauss","delta":1}"#).is_err());
    }

    #[test]
    fn fisher_gap_examples() {
        assert_eq!(fisher_gap(&spec("exponential", 1.0), 0.0).unwrap().value, 0.0);
        assert_relative_eq!(
            fisher_gap(&spec("exponential", 1.0), 1.0).unwrap().value,
            std::f64::consts::E - 1.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            fisher_gap(&spec("half-cauchy", 1.0), 1.0).unwrap().value,
            2.0 / PI + 0.5,
            max_relative = 1e-14
        );
    }

    #[test]
    fn quadrature_oracle_matches_examples() {
        let e = fisher_gap_quadrature(&spec("exponential", 1.0), 1.0).unwrap();
        assert_relative_eq!(e.value, 1.718_281_828_459_045, max_relative = 1e-9);
        let c = fisher_gap_quadrature(&spec("half-cauchy", 1.0), 1.0).unwrap();
        assert_relative_eq!(c.value, 1.136_619_772_367_581_4, max_relative = 1e-9);
        assert_eq!(c.method, GapMethod::Quadrature);
    }

    #[test]
    fn uniform_is_rejected_for_positive_shift() {
        let u = spec("uniform", 1.0);
        assert_eq!(fisher_gap(&u, 0.0).unwrap().value, 0.0);
        assert!(matches!(
            fisher_gap(&u, 0.5),
            Err(DisorderError::UnsupportedFamily { family: "uniform", .. })
        ));
        assert!(matches!(
            fisher_gap_quadrature(&u, 0.5),
            Err(DisorderError::UnsupportedFamily { .. })
        ));
        assert!(matches!(
            fisher_gap(&spec("exponential", 1.0), -1.0),
            Err(DisorderError::InvalidShift(_))
        ));
    }

    #[test]
    fn hcr_bound_examples() {
        let gap = fisher_gap(&spec("exponential", 1.0), 1.0).unwrap();
        assert_eq!(hcr_bound(0.5, 0.5, &gap).unwrap(), 0.0);
        let e1 = (-1.0f64).exp();
        let b = hcr_bound(0.5, e1 / 2.0, &gap).unwrap();
        let expected = (1.0 - e1).powi(2) / (4.0 * (std::f64::consts::E - 1.0));
        assert_relative_eq!(b, expected, max_relative = 1e-14);
        assert!((b - 0.05813).abs() < 1e-5);
        assert!(b <= 1.0 / 12.0);
        let zero = FisherGap {
            t: 0.0,
            value: 0.0,
            method: GapMethod::ClosedForm,
        };
        assert_eq!(hcr_bound(0.5, 0.4, &zero), Err(DisorderError::ZeroGap));
    }
}
