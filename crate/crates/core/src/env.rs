//! Site distributions, i.i.d. tagged environments and the column-correlated
//! counterexample environment.
//!
//! Environments are lazy: the value at a site is recomputed from
//! `(seed, x)` on every query, so revisits are consistent and nothing is
//! stored. All environment types are immutable and `Sync`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{Color, Environment, LatticeError, Point, SiteRef, TransitionVector, MAX_DIM, SIMPLEX_TOL};
use crate::rng::site_uniform;

const COLOR_STREAM: u64 = 0;
const ATOM_STREAM: u64 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("no uniform below epsilon within {scan_cap} sites above {x}")]
    ScanCapExceeded { x: Point, scan_cap: u64 },
    #[error("epsilon must lie in (0, 1/2), got {0}")]
    InvalidEpsilon(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// One weighted support point of a finite mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureAtom {
    pub weight: f64,
    pub vector: TransitionVector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mixture {
    atoms: Vec<MixtureAtom>,
    cumulative: Vec<f64>,
}

impl Mixture {
    pub fn new(atoms: Vec<MixtureAtom>) -> Result<Self, EnvError> {
        let Some(first) = atoms.first() else {
            return Err(EnvError::InvalidMixture("no atoms".into()));
        };
        let dim = first.vector.dim();
        let mut total = 0.0;
        let mut cumulative = Vec::with_capacity(atoms.len());
        for atom in &atoms {
            if !(atom.weight > 0.0) || !atom.weight.is_finite() {
                return Err(EnvError::InvalidMixture(format!("weight {} is not positive", atom.weight)));
            }
            if atom.vector.dim() != dim {
                return Err(EnvError::DimensionMismatch { expected: dim, got: atom.vector.dim() });
            }
            total += atom.weight;
            cumulative.push(total);
        }
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(EnvError::InvalidMixture(format!("weights sum to {total}")));
        }
        Ok(Mixture { atoms, cumulative })
    }

    pub fn atoms(&self) -> &[MixtureAtom] {
        &self.atoms
    }
}

/// Law of the transition vector at one site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub enum SiteDistribution {
    Dirac(TransitionVector),
    FiniteMixture(Mixture),
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawDistribution {
    Dirac(TransitionVector),
    Mixture(Vec<MixtureAtom>),
}

impl TryFrom<RawDistribution> for SiteDistribution {
    type Error = EnvError;

    fn try_from(raw: RawDistribution) -> Result<Self, EnvError> {
        match raw {
            RawDistribution::Dirac(v) => Ok(SiteDistribution::Dirac(v)),
            RawDistribution::Mixture(atoms) => Ok(SiteDistribution::FiniteMixture(Mixture::new(atoms)?)),
        }
    }
}

impl From<SiteDistribution> for RawDistribution {
    fn from(d: SiteDistribution) -> Self {
        match d {
            SiteDistribution::Dirac(v) => RawDistribution::Dirac(v),
            SiteDistribution::FiniteMixture(m) => RawDistribution::Mixture(m.atoms),
        }
    }
}

impl SiteDistribution {
    pub fn dirac(probs: Vec<f64>) -> Result<Self, EnvError> {
        Ok(SiteDistribution::Dirac(TransitionVector::new(probs)?))
    }

    pub fn mixture(atoms: Vec<(f64, Vec<f64>)>) -> Result<Self, EnvError> {
        let atoms = atoms
            .into_iter()
            .map(|(weight, probs)| Ok(MixtureAtom { weight, vector: TransitionVector::new(probs)? }))
            .collect::<Result<Vec<_>, EnvError>>()?;
        Ok(SiteDistribution::FiniteMixture(Mixture::new(atoms)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            SiteDistribution::Dirac(v) => v.dim(),
            SiteDistribution::FiniteMixture(m) => m.atoms[0].vector.dim(),
        }
    }

    /// Support atoms with their weights.
    pub fn atoms(&self) -> Vec<(f64, &TransitionVector)> {
        match self {
            SiteDistribution::Dirac(v) => vec![(1.0, v)],
            SiteDistribution::FiniteMixture(m) => m.atoms.iter().map(|a| (a.weight, &a.vector)).collect(),
        }
    }

    /// Atom selected by a uniform `u` in [0, 1).
    #[inline]
    pub fn sample(&self, u: f64) -> &TransitionVector {
        match self {
            SiteDistribution::Dirac(v) => v,
            SiteDistribution::FiniteMixture(m) => {
                let i = m.cumulative.iter().position(|&c| u < c).unwrap_or(m.atoms.len() - 1);
                &m.atoms[i].vector
            }
        }
    }

    /// `E[f(xi)]` over the support.
    pub fn expect(&self, mut f: impl FnMut(&TransitionVector) -> f64) -> f64 {
        self.atoms().into_iter().map(|(w, v)| w * f(v)).sum()
    }

    pub fn mean_drift(&self, u: &[f64]) -> f64 {
        self.expect(|v| v.drift(u))
    }
}

/// Full description of an i.i.d. two-class law.
///
/// `eta` and `theta` are one-based direction labels in `1..=2d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub d: usize,
    pub p: f64,
    pub mu_b: SiteDistribution,
    pub mu_r: SiteDistribution,
    pub kappa: f64,
    pub eta: usize,
    pub theta: usize,
}

impl ModelSpec {
    /// Two-vertex model with Dirac site laws.
    pub fn two_vertex(
        p: f64,
        b: [f64; 4],
        r: [f64; 4],
        kappa: f64,
        eta: usize,
        theta: usize,
    ) -> Result<Self, EnvError> {
        Ok(ModelSpec {
            d: 2,
            p,
            mu_b: SiteDistribution::dirac(b.to_vec())?,
            mu_r: SiteDistribution::dirac(r.to_vec())?,
            kappa,
            eta,
            theta,
        })
    }

    /// Kalikow's example: strong rightward drift at blue sites, a mild
    /// leftward drift at rare red sites.
    pub fn kalikow() -> Self {
        ModelSpec::two_vertex(0.999, [0.4995, 0.25, 0.0005, 0.25], [0.2495, 0.25, 0.2505, 0.25], 0.0005, 3, 4)
            .expect("constant model is valid")
    }

    /// Blue `(0.3, 0.25, 0.2, 0.25)`, red `(delta, 0.25, 0.5 - delta, 0.25)`.
    pub fn rare_anomaly(delta: f64, p: f64) -> Result<Self, EnvError> {
        let eta = if delta < 0.25 { 3 } else { 1 };
        ModelSpec::two_vertex(p, blue_vector_array(), red_vector_array(delta), 0.2, eta, 4)
    }

    pub fn blue_probability(&self) -> f64 {
        self.p
    }

    /// Largest constant for which both ellipticity assumptions hold.
    pub fn inferred_kappa(&self) -> f64 {
        let blue = self.mu_b.atoms().iter().map(|(_, v)| v.min_entry()).fold(f64::INFINITY, f64::min);
        let red = if self.direction_labels_in_range() {
            self.mu_r
                .atoms()
                .iter()
                .map(|(_, v)| v.probs()[self.eta - 1].min(v.probs()[self.theta - 1]))
                .fold(f64::INFINITY, f64::min)
        } else {
            f64::NAN
        };
        blue.min(red)
    }

    fn direction_labels_in_range(&self) -> bool {
        let n = 2 * self.d;
        (1..=n).contains(&self.eta) && (1..=n).contains(&self.theta)
    }
}

pub(crate) fn blue_vector_array() -> [f64; 4] {
    [0.3, 0.25, 0.2, 0.25]
}

pub(crate) fn red_vector_array(delta: f64) -> [f64; 4] {
    [delta, 0.25, 0.5 - delta, 0.25]
}

/// One violated model assumption.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Dimension { d: usize },
    BlueProbability { p: f64 },
    Kappa { kappa: f64 },
    DirectionLabel { label: usize },
    DirectionsNotOrthogonal { eta: usize, theta: usize },
    VectorDimension { class: Color, atom: usize, dim: usize },
    BlueNotUniformlyElliptic { atom: usize, min_entry: f64, kappa: f64 },
    RedNotTwoDirectionElliptic { atom: usize, direction: usize, entry: f64, kappa: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dimension { d } => write!(f, "dimension {d} outside 2..={MAX_DIM}"),
            Violation::BlueProbability { p } => write!(f, "blue probability {p} outside (0,1)"),
            Violation::Kappa { kappa } => write!(f, "kappa {kappa} outside (0, 1/2]"),
            Violation::DirectionLabel { label } => write!(f, "direction label {label} outside 1..=2d"),
            Violation::DirectionsNotOrthogonal { eta, theta } => {
                write!(f, "|eta - theta| = |{eta} - {theta}| must not be 0 or d")
            }
            Violation::VectorDimension { class, atom, dim } => {
                write!(f, "{class:?} atom {atom} has dimension {dim}")
            }
            Violation::BlueNotUniformlyElliptic { atom, min_entry, kappa } => {
                write!(f, "blue atom {atom} has entry {min_entry} < kappa = {kappa}")
            }
            Violation::RedNotTwoDirectionElliptic { atom, direction, entry, kappa } => {
                write!(f, "red atom {atom} has e_{direction} entry {entry} < kappa = {kappa}")
            }
        }
    }
}

/// Whether the single-infinite-class condition is taken as given.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ConnectivityStatus {
    /// `p` exceeds the supplied site-percolation threshold estimate.
    AssumedAbovePercolation {
        threshold: f64,
    },
    BelowPercolationEstimate {
        threshold: f64,
    },
    NoThresholdSupplied,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// `1 - 1/(2d)`: above it red S-paths of length k decay by a union bound.
    pub union_bound_threshold: f64,
    pub exceeds_union_bound_threshold: bool,
    pub connectivity: ConnectivityStatus,
    pub inferred_kappa: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every structural and ellipticity assumption of a [`ModelSpec`].
///
/// Never fails: violations are collected in the report.
pub fn validate_model(spec: &ModelSpec, percolation_threshold: Option<f64>) -> ValidationReport {
    let mut violations = Vec::new();
    let d = spec.d;
    if !(2..=MAX_DIM).contains(&d) {
        violations.push(Violation::Dimension { d });
    }
    if !(spec.p > 0.0 && spec.p < 1.0) {
        violations.push(Violation::BlueProbability { p: spec.p });
    }
    if !(spec.kappa > 0.0 && spec.kappa <= 0.5) {
        violations.push(Violation::Kappa { kappa: spec.kappa });
    }
    let mut labels_ok = true;
    for label in [spec.eta, spec.theta] {
        if !(1..=2 * d).contains(&label) {
            violations.push(Violation::DirectionLabel { label });
            labels_ok = false;
        }
    }
    if labels_ok {
        let gap = spec.eta.abs_diff(spec.theta);
        if gap == 0 || gap == d {
            violations.push(Violation::DirectionsNotOrthogonal { eta: spec.eta, theta: spec.theta });
        }
    }
    for (class, dist) in [(Color::Blue, &spec.mu_b), (Color::Red, &spec.mu_r)] {
        for (atom, (_, v)) in dist.atoms().into_iter().enumerate() {
            if v.dim() != d {
                violations.push(Violation::VectorDimension { class, atom, dim: v.dim() });
                continue;
            }
            match class {
                Color::Blue => {
                    let min_entry = v.min_entry();
                    if min_entry < spec.kappa {
                        violations.push(Violation::BlueNotUniformlyElliptic { atom, min_entry, kappa: spec.kappa });
                    }
                }
                Color::Red if labels_ok => {
                    for direction in [spec.eta, spec.theta] {
                        let entry = v.probs()[direction - 1];
                        if entry < spec.kappa {
                            violations.push(Violation::RedNotTwoDirectionElliptic {
                                atom,
                                direction,
                                entry,
                                kappa: spec.kappa,
                            });
                        }
                    }
                }
                Color::Red => {}
            }
        }
    }
    let union_bound_threshold = 1.0 - 1.0 / (2.0 * d as f64);
    let connectivity = match percolation_threshold {
        Some(threshold) if spec.p > threshold => ConnectivityStatus::AssumedAbovePercolation { threshold },
        Some(threshold) => ConnectivityStatus::BelowPercolationEstimate { threshold },
        None => ConnectivityStatus::NoThresholdSupplied,
    };
    ValidationReport {
        violations,
        union_bound_threshold,
        exceeds_union_bound_threshold: spec.p > union_bound_threshold,
        connectivity,
        inferred_kappa: spec.inferred_kappa(),
    }
}

/// Lazily generated i.i.d. tagged environment.
#[derive(Clone, Debug)]
pub struct TaggedEnvironment {
    spec: Arc<ModelSpec>,
    seed: u64,
}

impl TaggedEnvironment {
    pub fn new(spec: Arc<ModelSpec>, seed: u64) -> Self {
        TaggedEnvironment { spec, seed }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        TaggedEnvironment { spec: Arc::clone(&self.spec), seed }
    }

    /// The pair `(color, transition vector)` at `x`.
    #[inline]
    pub fn sample_site(&self, x: &Point) -> (Color, &TransitionVector) {
        let u = site_uniform(self.seed, x, COLOR_STREAM);
        if u < self.spec.p {
            (Color::Blue, self.atom(&self.spec.mu_b, x))
        } else {
            (Color::Red, self.atom(&self.spec.mu_r, x))
        }
    }

    #[inline]
    fn atom<'a>(&self, mu: &'a SiteDistribution, x: &Point) -> &'a TransitionVector {
        match mu {
            SiteDistribution::Dirac(v) => v,
            mixture => mixture.sample(site_uniform(self.seed, x, ATOM_STREAM)),
        }
    }
}

impl Environment for TaggedEnvironment {
    fn dim(&self) -> usize {
        self.spec.d
    }

    #[inline]
    fn site(&self, x: &Point) -> Result<Option<SiteRef<'_>>, EnvError> {
        let (color, probs) = self.sample_site(x);
        Ok(Some(SiteRef { color, probs }))
    }
}

/// Single-class i.i.d. environment (every site blue), any dimension.
#[derive(Clone, Debug)]
pub struct IidEnvironment {
    mu: Arc<SiteDistribution>,
    seed: u64,
}

impl IidEnvironment {
    pub fn new(mu: Arc<SiteDistribution>, seed: u64) -> Self {
        IidEnvironment { mu, seed }
    }

    pub fn homogeneous(vector: TransitionVector) -> Self {
        IidEnvironment { mu: Arc::new(SiteDistribution::Dirac(vector)), seed: 0 }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        IidEnvironment { mu: Arc::clone(&self.mu), seed }
    }
}

impl Environment for IidEnvironment {
    fn dim(&self) -> usize {
        self.mu.dim()
    }

    #[inline]
    fn site(&self, x: &Point) -> Result<Option<SiteRef<'_>>, EnvError> {
        let probs = match &*self.mu {
            SiteDistribution::Dirac(v) => v,
            mixture => mixture.sample(site_uniform(self.seed, x, ATOM_STREAM)),
        };
        Ok(Some(SiteRef { color: Color::Blue, probs }))
    }
}

/// A base environment with a finite set of sites replaced.
#[derive(Clone, Debug)]
pub struct OverrideEnvironment<E> {
    base: E,
    sites: HashMap<Point, (Color, TransitionVector)>,
}

impl<E: Environment> OverrideEnvironment<E> {
    pub fn new(base: E) -> Self {
        OverrideEnvironment { base, sites: HashMap::new() }
    }

    pub fn set(&mut self, x: Point, color: Color, vector: TransitionVector) {
        self.sites.insert(x, (color, vector));
    }

    pub fn base(&self) -> &E {
        &self.base
    }

    pub fn overrides(&self) -> &HashMap<Point, (Color, TransitionVector)> {
        &self.sites
    }
}

impl<E: Environment> Environment for OverrideEnvironment<E> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    #[inline]
    fn site(&self, x: &Point) -> Result<Option<SiteRef<'_>>, EnvError> {
        if let Some((color, probs)) = self.sites.get(x) {
            return Ok(Some(SiteRef { color: *color, probs }));
        }
        self.base.site(x)
    }
}

/// JSON form of the counterexample environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleConfig {
    pub epsilon: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_cap: Option<u64>,
}

/// Non-i.i.d. environment on Z^2 whose colors are constant on vertical
/// runs: a site is red iff the first uniform below `epsilon` at or above it
/// in its column is also below `epsilon^2`.
#[derive(Clone, Debug)]
pub struct CounterexampleEnv {
    epsilon: f64,
    delta: f64,
    seed: u64,
    scan_cap: u64,
    blue: TransitionVector,
    red: TransitionVector,
    injected: HashMap<Point, f64>,
}

impl CounterexampleEnv {
    pub fn new(epsilon: f64, seed: u64, scan_cap: Option<u64>) -> Result<Self, EnvError> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(EnvError::InvalidEpsilon(epsilon));
        }
        let delta = epsilon * epsilon;
        Ok(CounterexampleEnv {
            epsilon,
            delta,
            seed,
            scan_cap: scan_cap.unwrap_or_else(|| (50.0 / epsilon).ceil() as u64),
            blue: TransitionVector::new(blue_vector_array().to_vec())?,
            red: TransitionVector::new(red_vector_array(delta).to_vec())?,
            injected: HashMap::new(),
        })
    }

    pub fn from_config(cfg: &CounterexampleConfig) -> Result<Self, EnvError> {
        CounterexampleEnv::new(cfg.epsilon, cfg.seed, cfg.scan_cap)
    }

    /// Pins the uniform at `x` (used to hand-trace the coloring rule).
    pub fn inject_uniform(&mut self, x: Point, u: f64) {
        self.injected.insert(x, u);
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        CounterexampleEnv { seed, ..self.clone() }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn scan_cap(&self) -> u64 {
        self.scan_cap
    }

    pub fn blue_vector(&self) -> &TransitionVector {
        &self.blue
    }

    pub fn red_vector(&self) -> &TransitionVector {
        &self.red
    }

    #[inline]
    pub fn uniform(&self, x: &Point) -> f64 {
        if !self.injected.is_empty() {
            if let Some(&u) = self.injected.get(x) {
                return u;
            }
        }
        site_uniform(self.seed, x, COLOR_STREAM)
    }

    /// `x*`: the lowest site at or above `x` in its column with `U < epsilon`.
    pub fn anchor(&self, x: &Point) -> Result<Point, EnvError> {
        let mut z = *x;
        for _ in 0..self.scan_cap {
            if self.uniform(&z) < self.epsilon {
                return Ok(z);
            }
            z = z.step(crate::lattice::Direction(1));
        }
        Err(EnvError::ScanCapExceeded { x: *x, scan_cap: self.scan_cap })
    }

    pub fn counterexample_site(&self, x: &Point) -> Result<(Color, &TransitionVector), EnvError> {
        let anchor = self.anchor(x)?;
        if self.uniform(&anchor) < self.delta {
            Ok((Color::Red, &self.red))
        } else {
            Ok((Color::Blue, &self.blue))
        }
    }
}

impl Environment for CounterexampleEnv {
    fn dim(&self) -> usize {
        2
    }

    #[inline]
    fn site(&self, x: &Point) -> Result<Option<SiteRef<'_>>, EnvError> {
        let (color, probs) = self.counterexample_site(x)?;
        Ok(Some(SiteRef { color, probs }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tv(v: &[f64]) -> TransitionVector {
        TransitionVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn dirac_sites_return_their_atom() {
        let spec = Arc::new(ModelSpec::kalikow());
        let env = TaggedEnvironment::new(Arc::clone(&spec), 3);
        for i in -20..20 {
            let x = Point::new(&[i, 2 * i + 1]);
            let (color, v) = env.sample_site(&x);
            match color {
                Color::Blue => assert_eq!(v.probs(), &[0.4995, 0.25, 0.0005, 0.25]),
                Color::Red => assert_eq!(v.probs(), &[0.2495, 0.25, 0.2505, 0.25]),
            }
        }
    }

    #[test]
    fn p_one_is_all_blue() {
        let mut spec = ModelSpec::kalikow();
        spec.p = 1.0;
        let env = TaggedEnvironment::new(Arc::new(spec), 9);
        for i in 0..10_000 {
            assert_eq!(env.sample_site(&Point::new(&[i, -i])).0, Color::Blue);
        }
    }

    #[test]
    fn queries_are_order_independent() {
        let env = TaggedEnvironment::new(Arc::new(ModelSpec::rare_anomaly(0.1, 0.5).unwrap()), 17);
        let pts: Vec<Point> = (0..200).map(|i| Point::new(&[i % 13 - 6, i / 13 - 7])).collect();
        let forward: Vec<Color> = pts.iter().map(|x| env.sample_site(x).0).collect();
        let backward: Vec<Color> = pts.iter().rev().map(|x| env.sample_site(x).0).collect();
        assert!(forward.iter().eq(backward.iter().rev()));
    }

    #[test]
    fn validate_kalikow() {
        let report = validate_model(&ModelSpec::kalikow(), None);
        assert!(report.is_valid(), "{:?}", report.violations);
        assert!((report.inferred_kappa - 0.0005).abs() < 1e-15);
        assert!(report.exceeds_union_bound_threshold);
        assert_eq!(report.connectivity, ConnectivityStatus::NoThresholdSupplied);
    }

    #[test]
    fn validate_rejects_parallel_directions() {
        let mut spec = ModelSpec::kalikow();
        spec.eta = 1;
        spec.theta = 1;
        let report = validate_model(&spec, None);
        assert!(report.violations.contains(&Violation::DirectionsNotOrthogonal { eta: 1, theta: 1 }));
        spec.eta = 2;
        spec.theta = 4;
        let report = validate_model(&spec, None);
        assert!(report.violations.contains(&Violation::DirectionsNotOrthogonal { eta: 2, theta: 4 }));
    }

    #[test]
    fn validate_rare_anomaly_with_zero_delta() {
        let spec = ModelSpec::rare_anomaly(0.0, 0.999).unwrap();
        let report = validate_model(&spec, Some(15.0 / 16.0));
        assert!(report.is_valid(), "{:?}", report.violations);
        assert_eq!((spec.eta, spec.theta), (3, 4));
        assert!((report.inferred_kappa - 0.2).abs() < 1e-15);
        assert_eq!(report.connectivity, ConnectivityStatus::AssumedAbovePercolation { threshold: 15.0 / 16.0 });
    }

    #[test]
    fn validate_flags_ellipticity() {
        let mut spec = ModelSpec::rare_anomaly(0.1, 0.9).unwrap();
        spec.kappa = 0.26;
        let report = validate_model(&spec, None);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::BlueNotUniformlyElliptic { .. })));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::RedNotTwoDirectionElliptic { direction: 4, .. })));
        spec.p = 1.5;
        assert!(validate_model(&spec, None).violations.contains(&Violation::BlueProbability { p: 1.5 }));
    }

    #[test]
    fn mixture_rejects_bad_weights() {
        assert!(SiteDistribution::mixture(vec![(0.5, vec![0.25; 4]), (0.4, vec![0.25; 4])]).is_err());
        assert!(SiteDistribution::mixture(vec![(1.5, vec![0.25; 4]), (-0.5, vec![0.25; 4])]).is_err());
        assert!(SiteDistribution::mixture(vec![(0.5, vec![0.25; 4]), (0.5, vec![0.5; 2])]).is_err());
    }

    #[test]
    fn model_spec_json_shape() {
        let json = r#"{"d":2,"p":0.999,"mu_b":{"dirac":[0.4995,0.25,0.0005,0.25]},
            "mu_r":{"dirac":[0.2495,0.25,0.2505,0.25]},"kappa":0.0005,"eta":3,"theta":4}"#;
        let spec: ModelSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec, ModelSpec::kalikow());
        let mixed = r#"{"d":2,"p":0.5,"mu_b":{"mixture":[{"weight":0.5,"vector":[0.25,0.25,0.25,0.25]},
            {"weight":0.5,"vector":[0.4,0.2,0.2,0.2]}]},"mu_r":{"dirac":[0.1,0.4,0.1,0.4]},
            "kappa":0.1,"eta":2,"theta":3}"#;
        let spec: ModelSpec = serde_json::from_str(mixed).unwrap();
        let back: ModelSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, back);
        let bad = r#"{"d":2,"p":0.5,"mu_b":{"dirac":[0.5,0.5,0.5,0.5]},"mu_r":{"dirac":[0.25,0.25,0.25,0.25]},
            "kappa":0.1,"eta":3,"theta":4}"#;
        assert!(serde_json::from_str::<ModelSpec>(bad).is_err());
    }

    #[test]
    fn counterexample_hand_trace() {
        let mut env = CounterexampleEnv::new(0.05, 1, None).unwrap();
        env.inject_uniform(Point::new(&[0, 0]), 0.9);
        env.inject_uniform(Point::new(&[0, 1]), 0.0003);
        assert_eq!(env.anchor(&Point::new(&[0, 0])).unwrap(), Point::new(&[0, 1]));
        let (color, v) = env.counterexample_site(&Point::new(&[0, 0])).unwrap();
        assert_eq!(color, Color::Red);
        assert!((v.probs()[0] - 0.0025).abs() < 1e-15);
        assert!((v.probs()[2] - 0.4975).abs() < 1e-15);

        let mut env = CounterexampleEnv::new(0.05, 1, None).unwrap();
        env.inject_uniform(Point::new(&[0, 0]), 0.04);
        assert_eq!(env.anchor(&Point::new(&[0, 0])).unwrap(), Point::new(&[0, 0]));
        assert_eq!(env.counterexample_site(&Point::new(&[0, 0])).unwrap().0, Color::Blue);
    }

    #[test]
    fn counterexample_column_shares_anchor_color() {
        let mut env = CounterexampleEnv::new(0.1, 4, None).unwrap();
        // anchor at height 5 with U in [eps^2, eps): everything from 0..=5 is blue
        for h in 0..5 {
            env.inject_uniform(Point::new(&[2, h]), 0.5);
        }
        env.inject_uniform(Point::new(&[2, 5]), 0.05);
        for h in 0..=5 {
            let x = Point::new(&[2, h]);
            assert_eq!(env.anchor(&x).unwrap(), Point::new(&[2, 5]));
            assert_eq!(env.counterexample_site(&x).unwrap().0, Color::Blue);
        }
    }

    #[test]
    fn counterexample_scan_cap() {
        let mut env = CounterexampleEnv::new(0.1, 4, Some(3)).unwrap();
        for h in 0..3 {
            env.inject_uniform(Point::new(&[0, h]), 0.9);
        }
        assert!(matches!(
            env.counterexample_site(&Point::new(&[0, 0])),
            Err(EnvError::ScanCapExceeded { scan_cap: 3, .. })
        ));
        assert_eq!(CounterexampleEnv::new(0.05, 0, None).unwrap().scan_cap(), 1000);
        assert!(CounterexampleEnv::new(0.5, 0, None).is_err());
    }

    #[test]
    fn override_replaces_single_site() {
        let base = IidEnvironment::homogeneous(tv(&[0.25; 4]));
        let mut env = OverrideEnvironment::new(base);
        env.set(Point::new(&[1, 1]), Color::Red, tv(&[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(env.color(&Point::new(&[1, 1])).unwrap(), Some(Color::Red));
        assert_eq!(env.color(&Point::new(&[1, 0])).unwrap(), Some(Color::Blue));
    }
}
