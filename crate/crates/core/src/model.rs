//! Chain parameters, the periodic boundary force and model validation.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default harmonic truncation of the force spectrum.
pub const DEFAULT_L_MAX: u32 = 8;

const HERMITIAN_TOL: f64 = 1e-12;

/// Physical and scaling parameters of the chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    /// Number of sites minus one; sites are labelled `0..=n`.
    pub n: usize,
    /// Flip rate and bath coupling.
    pub gamma: f64,
    /// Pinning frequency.
    pub omega0: f64,
    /// Bath temperature.
    pub t_minus: f64,
    /// Base period of the force.
    pub theta: f64,
    /// Amplitude exponent.
    pub a: f64,
    /// Period exponent.
    pub b: f64,
}

impl ChainParams {
    /// Unit parameters in the `(a, b) = (-1/2, 0)` regime.
    pub fn standard(n: usize) -> Self {
        ChainParams { n, gamma: 1.0, omega0: 1.0, t_minus: 1.0, theta: 1.0, a: -0.5, b: 0.0 }
    }

    pub fn with_n(self, n: usize) -> Self {
        ChainParams { n, ..self }
    }

    pub fn sites(&self) -> usize {
        self.n + 1
    }

    /// Period of the force acting on a chain of this length, `n^b θ`.
    pub fn theta_n(&self) -> f64 {
        (self.n as f64).powf(self.b) * self.theta
    }

    /// Force amplitude `n^a`.
    pub fn amplitude(&self) -> f64 {
        (self.n as f64).powf(self.a)
    }

    /// `b - a = 1/2`, `a <= 0`, `b >= 0`.
    pub fn in_scaling_regime(&self) -> bool {
        ((self.b - self.a) - 0.5).abs() < 1e-12 && self.a <= 0.0 && self.b >= 0.0
    }
}

/// Fourier coefficients of the 1-periodic force profile.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ForceSpec {
    coeffs: BTreeMap<i64, Complex64>,
}

impl ForceSpec {
    pub fn zero() -> Self {
        ForceSpec::default()
    }

    /// `amplitude · cos(2πt)`, i.e. coefficients `amplitude/2` at `ℓ = ±1`.
    pub fn cosine(amplitude: f64) -> Self {
        let half = Complex64::new(0.5 * amplitude, 0.0);
        ForceSpec::from_pairs([(1, half), (-1, half)])
    }

    pub fn from_pairs<I: IntoIterator<Item = (i64, Complex64)>>(pairs: I) -> Self {
        let mut coeffs = BTreeMap::new();
        for (ell, c) in pairs {
            *coeffs.entry(ell).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        ForceSpec { coeffs }
    }

    /// Coefficient `𝓕̃(ℓ)`; zero off the support.
    pub fn coeff(&self, ell: i64) -> Complex64 {
        self.coeffs.get(&ell).copied().unwrap_or_default()
    }

    /// Nonzero harmonics in increasing order, `ℓ = 0` excluded.
    pub fn support(&self) -> Vec<i64> {
        self.coeffs.iter().filter(|(&l, c)| l != 0 && c.norm() > 0.0).map(|(&l, _)| l).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.coeffs.iter().map(|(&l, &c)| (l, c))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.values().all(|c| c.norm() == 0.0)
    }

    pub fn max_harmonic(&self) -> u64 {
        self.support().iter().map(|l| l.unsigned_abs()).max().unwrap_or(0)
    }

    /// `Σ_ℓ |𝓕̃(ℓ)|²`, the mean square of the profile.
    pub fn power(&self) -> f64 {
        self.support().iter().map(|&l| self.coeff(l).norm_sqr()).sum()
    }

    /// Complex reconstruction `Σ_ℓ 𝓕̃(ℓ) e^{2πiℓs}` of the 1-periodic profile.
    pub fn profile(&self, s: f64) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(&l, &c)| c * Complex64::from_polar(1.0, 2.0 * PI * l as f64 * s))
            .sum()
    }
}

/// What a caller intends to do with the model; selects the constraints checked.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Requirements {
    /// A nonzero force is required.
    pub driven: bool,
    /// Asymptotic comparisons are requested; the scaling regime must hold.
    pub asymptotic: bool,
}

/// A single violated constraint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Violation {
    SiteCount,
    NonPositive { field: &'static str, value: f64 },
    Negative { field: &'static str, value: f64 },
    NonFinite { field: &'static str },
    ZeroMean { value: [f64; 2] },
    ZeroForce,
    NonHermitian { ell: i64 },
    HarmonicOutOfRange { ell: i64, l_max: u32 },
    ScalingViolation { a: f64, b: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SiteCount => write!(f, "n must be at least 1"),
            Violation::NonPositive { field, value } => write!(f, "{field} = {value} must be > 0"),
            Violation::Negative { field, value } => write!(f, "{field} = {value} must be >= 0"),
            Violation::NonFinite { field } => write!(f, "{field} is not finite"),
            Violation::ZeroMean { value } => {
                write!(f, "force has a nonzero mean coefficient {}{:+}i", value[0], value[1])
            }
            Violation::ZeroForce => write!(f, "all force coefficients vanish on a driven run"),
            Violation::NonHermitian { ell } => {
                write!(f, "coefficients at ±{ell} are not complex conjugates")
            }
            Violation::HarmonicOutOfRange { ell, l_max } => {
                write!(f, "harmonic {ell} exceeds l_max = {l_max}")
            }
            Violation::ScalingViolation { a, b } => {
                write!(f, "(a, b) = ({a}, {b}) violates b - a = 1/2, a <= 0, b >= 0")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl ModelError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ModelError::Invalid(v) => v,
            _ => &[],
        }
    }
}

/// A validated model. Immutable; shareable across threads.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    params: ChainParams,
    force: ForceSpec,
    l_max: u32,
}

impl Model {
    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn force(&self) -> &ForceSpec {
        &self.force
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    /// Same force and constants on a chain with `n` sites minus one.
    pub fn with_n(&self, n: usize) -> Result<Model, ModelError> {
        validate_with(self.params.with_n(n), self.force.clone(), self.l_max, Requirements::default())
    }

    /// Same chain with the force switched off.
    pub fn undriven(&self) -> Model {
        Model { force: ForceSpec::zero(), ..self.clone() }
    }
}

/// Checks every constraint and returns the model, or the full list of violations.
pub fn validate(params: ChainParams, force: ForceSpec, req: Requirements) -> Result<Model, ModelError> {
    validate_with(params, force, DEFAULT_L_MAX, req)
}

pub fn validate_with(
    params: ChainParams,
    force: ForceSpec,
    l_max: u32,
    req: Requirements,
) -> Result<Model, ModelError> {
    let mut v = Vec::new();
    if params.n < 1 {
        v.push(Violation::SiteCount);
    }
    for (field, value) in [
        ("gamma", params.gamma),
        ("omega0", params.omega0),
        ("t_minus", params.t_minus),
        ("theta", params.theta),
        ("a", params.a),
        ("b", params.b),
    ] {
        if !value.is_finite() {
            v.push(Violation::NonFinite { field });
        }
    }
    for (field, value) in [("gamma", params.gamma), ("omega0", params.omega0), ("theta", params.theta)] {
        if value.is_finite() && value <= 0.0 {
            v.push(Violation::NonPositive { field, value });
        }
    }
    if params.t_minus < 0.0 {
        v.push(Violation::Negative { field: "t_minus", value: params.t_minus });
    }
    let c0 = force.coeff(0);
    if c0.norm() > 0.0 {
        v.push(Violation::ZeroMean { value: [c0.re, c0.im] });
    }
    for (ell, c) in force.iter() {
        if !(c.re.is_finite() && c.im.is_finite()) {
            v.push(Violation::NonFinite { field: "force" });
        }
        if ell.unsigned_abs() > l_max as u64 && c.norm() > 0.0 {
            v.push(Violation::HarmonicOutOfRange { ell, l_max });
        }
        if ell > 0 || (ell < 0 && force.coeff(-ell) == Complex64::default()) {
            let mirror = force.coeff(-ell);
            let scale = c.norm().max(mirror.norm()).max(1.0);
            if (c - mirror.conj()).norm() > HERMITIAN_TOL * scale {
                v.push(Violation::NonHermitian { ell: ell.abs() });
            }
        }
    }
    if req.driven && force.power() == 0.0 {
        v.push(Violation::ZeroForce);
    }
    if req.asymptotic && !params.in_scaling_regime() {
        v.push(Violation::ScalingViolation { a: params.a, b: params.b });
    }
    if v.is_empty() {
        Ok(Model { params, force, l_max })
    } else {
        Err(ModelError::Invalid(v))
    }
}

/// Boundary force `𝓕_n(t) = n^a Σ_ℓ 𝓕̃(ℓ) e^{2πiℓt/θ_n}`.
pub fn force_value(model: &Model, t: f64) -> f64 {
    let p = model.params();
    p.amplitude() * model.force().profile(t / p.theta_n()).re
}

/// File representation of a model: flat keys, force as `[ℓ, re, im]` triples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n: usize,
    pub gamma: f64,
    pub omega0: f64,
    pub t_minus: f64,
    pub theta: f64,
    pub a: f64,
    pub b: f64,
    pub force: Vec<(i64, f64, f64)>,
    #[serde(default = "default_l_max")]
    pub l_max: u32,
}

fn default_l_max() -> u32 {
    DEFAULT_L_MAX
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n: 16,
            gamma: 1.0,
            omega0: 1.0,
            t_minus: 1.0,
            theta: 1.0,
            a: -0.5,
            b: 0.0,
            force: vec![(-1, 0.5, 0.0), (1, 0.5, 0.0)],
            l_max: DEFAULT_L_MAX,
        }
    }
}

impl ChainConfig {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn params(&self) -> ChainParams {
        ChainParams {
            n: self.n,
            gamma: self.gamma,
            omega0: self.omega0,
            t_minus: self.t_minus,
            theta: self.theta,
            a: self.a,
            b: self.b,
        }
    }

    pub fn force_spec(&self) -> ForceSpec {
        ForceSpec::from_pairs(self.force.iter().map(|&(l, re, im)| (l, Complex64::new(re, im))))
    }

    pub fn build(&self, req: Requirements) -> Result<Model, ModelError> {
        validate_with(self.params(), self.force_spec(), self.l_max, req)
    }
}

impl From<&Model> for ChainConfig {
    fn from(m: &Model) -> Self {
        let p = m.params();
        ChainConfig {
            n: p.n,
            gamma: p.gamma,
            omega0: p.omega0,
            t_minus: p.t_minus,
            theta: p.theta,
            a: p.a,
            b: p.b,
            force: m.force().iter().map(|(l, c)| (l, c.re, c.im)).collect(),
            l_max: m.l_max(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard() -> Model {
        validate(ChainParams::standard(16), ForceSpec::cosine(1.0), Requirements { driven: true, asymptotic: true })
            .unwrap()
    }

    #[test]
    fn standard_model_is_valid() {
        let m = standard();
        assert_eq!(m.force().support(), vec![-1, 1]);
        assert_eq!(m.params().theta_n(), 1.0);
        assert!((m.params().amplitude() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn nonzero_mean_is_rejected() {
        let f = ForceSpec::from_pairs([
            (0, Complex64::new(0.3, 0.0)),
            (1, Complex64::new(0.5, 0.0)),
            (-1, Complex64::new(0.5, 0.0)),
        ]);
        let err = validate(ChainParams::standard(16), f, Requirements::default()).unwrap_err();
        assert!(matches!(err.violations(), [Violation::ZeroMean { .. }]));
    }

    #[test]
    fn scaling_violation_only_when_asymptotics_requested() {
        let p = ChainParams { a: 0.0, b: 0.0, ..ChainParams::standard(16) };
        assert!(validate(p, ForceSpec::cosine(1.0), Requirements::default()).is_ok());
        let err = validate(p, ForceSpec::cosine(1.0), Requirements { driven: true, asymptotic: true }).unwrap_err();
        assert!(matches!(err.violations(), [Violation::ScalingViolation { .. }]));
    }

    #[test]
    fn non_hermitian_and_zero_force() {
        let f = ForceSpec::from_pairs([(2, Complex64::new(0.5, 0.1)), (-2, Complex64::new(0.5, 0.1))]);
        let err = validate(ChainParams::standard(4), f, Requirements::default()).unwrap_err();
        assert_eq!(err.violations(), &[Violation::NonHermitian { ell: 2 }]);
        let err = validate(ChainParams::standard(4), ForceSpec::zero(), Requirements { driven: true, asymptotic: false })
            .unwrap_err();
        assert_eq!(err.violations(), &[Violation::ZeroForce]);
    }

    #[test]
    fn every_violation_is_reported() {
        let p = ChainParams { n: 0, gamma: 0.0, omega0: -1.0, t_minus: -1.0, ..ChainParams::standard(1) };
        let err = validate(p, ForceSpec::cosine(1.0), Requirements::default()).unwrap_err();
        assert_eq!(err.violations().len(), 4);
    }

    #[test]
    fn harmonic_above_l_max_is_rejected() {
        let c = Complex64::new(0.1, 0.0);
        let f = ForceSpec::from_pairs([(9, c), (-9, c)]);
        assert!(validate(ChainParams::standard(4), f.clone(), Requirements::default()).is_err());
        assert!(validate_with(ChainParams::standard(4), f, 9, Requirements::default()).is_ok());
    }

    #[test]
    fn cosine_force_value() {
        let p = ChainParams { n: 1, a: 0.0, b: 0.0, theta: 2.0, ..ChainParams::standard(1) };
        let m = validate(p, ForceSpec::cosine(1.0), Requirements::default()).unwrap();
        for k in 0..50 {
            let t = 0.137 * k as f64;
            assert!((force_value(&m, t) - (2.0 * PI * t / 2.0).cos()).abs() < 1e-13);
        }
        let z = m.undriven();
        assert_eq!(force_value(&z, 0.3), 0.0);
    }

    #[test]
    fn force_has_zero_period_mean() {
        let m = standard();
        let k = 512;
        let th = m.params().theta_n();
        let mean: f64 = (0..k).map(|i| force_value(&m, th * i as f64 / k as f64)).sum::<f64>() / k as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn config_round_trip() {
        let cfg = ChainConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"force\":[[-1,0.5,0.0],[1,0.5,0.0]]"));
        let back = ChainConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
        let m = back.build(Requirements { driven: true, asymptotic: true }).unwrap();
        assert_eq!(ChainConfig::from(&m), cfg);
        let minimal = r#"{"n":8,"gamma":1,"omega0":1,"t_minus":0,"theta":1,"a":-0.5,"b":0,"force":[[1,0.5,0],[-1,0.5,0]]}"#;
        assert_eq!(ChainConfig::from_json(minimal).unwrap().l_max, DEFAULT_L_MAX);
    }
}
