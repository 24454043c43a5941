//! Closed-form velocity bounds and drift formulas.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvError, ModelSpec, SiteDistribution};
use crate::lattice::TransitionVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("r_{index} = 0, M is undefined")]
    DivisionDomain { index: usize },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("epsilon = {0} is outside (0, 1)")]
    EpsilonOutOfRange(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("atom {0} has a zero component")]
    DegenerateSupport(usize),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Two-vertex model on Z^2: blue vector `b` with probability `p`, red `r`
/// otherwise, in the order right, up, left, down.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoVertexParams {
    pub p: f64,
    pub b: TransitionVector,
    pub r: TransitionVector,
}

impl TwoVertexParams {
    pub fn new(p: f64, b: [f64; 4], r: [f64; 4]) -> Result<Self, BoundsError> {
        let params = TwoVertexParams {
            p,
            b: TransitionVector::new(b.to_vec()).map_err(EnvError::from)?,
            r: TransitionVector::new(r.to_vec()).map_err(EnvError::from)?,
        };
        params.check_shape()?;
        Ok(params)
    }

    pub fn kalikow() -> Self {
        TwoVertexParams::new(0.999, [0.4995, 0.25, 0.0005, 0.25], [0.2495, 0.25, 0.2505, 0.25]).unwrap()
    }

    /// Extracts the parameters of a two-dimensional model with Dirac laws.
    pub fn from_spec(spec: &ModelSpec) -> Result<Self, BoundsError> {
        let (SiteDistribution::Dirac(b), SiteDistribution::Dirac(r)) = (&spec.mu_b, &spec.mu_r) else {
            return Err(BoundsError::InvalidParameter("two-vertex bounds need Dirac site laws".into()));
        };
        let params = TwoVertexParams { p: spec.p, b: b.clone(), r: r.clone() };
        params.check_shape()?;
        Ok(params)
    }

    fn check_shape(&self) -> Result<(), BoundsError> {
        if self.b.dim() != 2 || self.r.dim() != 2 {
            return Err(BoundsError::InvalidParameter("two-vertex vectors have 4 entries".into()));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(BoundsError::InvalidParameter(format!("p = {} outside (0,1)", self.p)));
        }
        Ok(())
    }

    fn b(&self, i: usize) -> f64 {
        self.b.probs()[i - 1]
    }

    fn r(&self, i: usize) -> f64 {
        self.r.probs()[i - 1]
    }

    fn check_drifts(&self) -> Result<(), BoundsError> {
        if self.b(1) <= self.b(3) {
            return Err(BoundsError::HypothesisViolated(format!("b_1 = {} <= b_3 = {}", self.b(1), self.b(3))));
        }
        if self.r(3) <= self.r(1) {
            return Err(BoundsError::HypothesisViolated(format!("r_3 = {} <= r_1 = {}", self.r(3), self.r(1))));
        }
        Ok(())
    }
}

/// `M = max_i b_i / r_i`.
pub fn kalikow_m(b: &TransitionVector, r: &TransitionVector) -> Result<f64, BoundsError> {
    let mut m = f64::NEG_INFINITY;
    for (i, (bi, ri)) in b.probs().iter().zip(r.probs()).enumerate() {
        if *ri == 0.0 {
            return Err(BoundsError::DivisionDomain { index: i + 1 });
        }
        m = m.max(bi / ri);
    }
    Ok(m)
}

/// `M`, or `+inf` when some `r_i` vanishes.
fn m_extended(b: &TransitionVector, r: &TransitionVector) -> f64 {
    kalikow_m(b, r).unwrap_or(f64::INFINITY)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Criterion {
    pub holds: bool,
    pub lhs: f64,
    pub m: f64,
}

/// `p(b_1 - b_3) / ((1-p)(r_3 - r_1)) > M`. Never holds when `M` is infinite.
pub fn kalikow_criterion(params: &TwoVertexParams) -> Result<Criterion, BoundsError> {
    params.check_drifts()?;
    let p = params.p;
    let lhs = p * (params.b(1) - params.b(3)) / ((1.0 - p) * (params.r(3) - params.r(1)));
    let m = m_extended(&params.b, &params.r);
    Ok(Criterion { holds: m.is_finite() && lhs > m, lhs, m })
}

/// `(lower, upper)` bounds on the velocity along `e_1`.
///
/// With infinite `M` the lower bound is its limit `-(r_3 - r_1)`.
pub fn velocity_bounds(params: &TwoVertexParams) -> Result<(f64, f64), BoundsError> {
    params.check_drifts()?;
    let p = params.p;
    let a = params.b(1) - params.b(3);
    let c = params.r(3) - params.r(1);
    let m = m_extended(&params.b, &params.r);
    let lower = if m.is_finite() { (p * a - (1.0 - p) * m * c) / (p + (1.0 - p) * m) } else { -c };
    let upper = a / (1.0 + (1.0 - p) * (a + c));
    Ok((lower, upper))
}

/// Everything the two-vertex closed forms say about one parameter set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub m: f64,
    pub lhs: f64,
    pub criterion_holds: bool,
    pub lower: f64,
    pub upper: f64,
    /// `p / ((1-p) M)`.
    pub alpha: f64,
    pub annealed_drift: f64,
}

pub fn bound_report(params: &TwoVertexParams) -> Result<BoundReport, BoundsError> {
    let c = kalikow_criterion(params)?;
    let (lower, upper) = velocity_bounds(params)?;
    let p = params.p;
    Ok(BoundReport {
        m: c.m,
        lhs: c.lhs,
        criterion_holds: c.holds,
        lower,
        upper,
        alpha: p / ((1.0 - p) * c.m),
        annealed_drift: p * params.b.drift(&[1.0, 0.0]) + (1.0 - p) * params.r.drift(&[1.0, 0.0]),
    })
}

fn check_kappa_d(kappa: f64, d: usize) -> Result<(), BoundsError> {
    if !(kappa > 0.0 && kappa <= 0.5) {
        return Err(BoundsError::InvalidParameter(format!("kappa = {kappa} outside (0, 1/2]")));
    }
    if d < 2 {
        return Err(BoundsError::InvalidParameter(format!("d = {d} < 2")));
    }
    Ok(())
}

/// `p* = 1 - kappa^6 eps / (13 d)`.
pub fn p_star(epsilon: f64, kappa: f64, d: usize) -> Result<f64, BoundsError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(BoundsError::EpsilonOutOfRange(epsilon));
    }
    check_kappa_d(kappa, d)?;
    Ok(1.0 - kappa.powi(6) * epsilon / (13.0 * d as f64))
}

/// Inverse of [`p_star`]: `eps = 13 d (1-p) / kappa^6`.
pub fn epsilon_for_p(p: f64, kappa: f64, d: usize) -> Result<f64, BoundsError> {
    check_kappa_d(kappa, d)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(BoundsError::InvalidParameter(format!("p = {p} outside (0,1)")));
    }
    let eps = 13.0 * d as f64 * (1.0 - p) / kappa.powi(6);
    if eps >= 1.0 {
        return Err(BoundsError::EpsilonOutOfRange(eps));
    }
    Ok(eps)
}

/// Threshold report. The closed form does not involve the blue drift
/// `v1b`, although the general existence statement allows the threshold to
/// depend on it; `depends_on_v1b` records that this formula ignores it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PStarReport {
    pub epsilon: f64,
    pub kappa: f64,
    pub d: usize,
    pub p_star: f64,
    pub depends_on_v1b: bool,
    /// `v1b - epsilon`, when `v1b` was supplied.
    pub guaranteed_speed: Option<f64>,
}

pub fn p_star_report(epsilon: f64, kappa: f64, d: usize, v1b: Option<f64>) -> Result<PStarReport, BoundsError> {
    Ok(PStarReport {
        epsilon,
        kappa,
        d,
        p_star: p_star(epsilon, kappa, d)?,
        depends_on_v1b: false,
        guaranteed_speed: v1b.map(|v| v - epsilon),
    })
}

/// `alpha/(alpha+1) v1b + 1/(alpha+1) v1r`; `alpha = inf` gives `v1b`.
pub fn prop_bound_velocity(alpha: f64, v1b: f64, v1r: f64) -> f64 {
    if alpha.is_infinite() {
        return v1b;
    }
    alpha / (alpha + 1.0) * v1b + 1.0 / (alpha + 1.0) * v1r
}

/// `(2 - eps) / eps`.
pub fn perturbation_alpha(epsilon: f64) -> f64 {
    (2.0 - epsilon) / epsilon
}

/// Limiting velocity of a one-dimensional walk in an i.i.d. environment,
/// from the moments of `rho = omega(-e_1) / omega(e_1)`.
pub fn solomon_velocity_1d(mu: &SiteDistribution) -> Result<f64, BoundsError> {
    if mu.dim() != 1 {
        return Err(BoundsError::InvalidParameter(format!("dimension {} is not 1", mu.dim())));
    }
    for (i, (_, v)) in mu.atoms().into_iter().enumerate() {
        if v.probs().contains(&0.0) {
            return Err(BoundsError::DegenerateSupport(i));
        }
    }
    let rho = |v: &TransitionVector| v.probs()[1] / v.probs()[0];
    let e_log = mu.expect(|v| rho(v).ln());
    let e_rho = mu.expect(rho);
    let e_inv = mu.expect(|v| 1.0 / rho(v));
    Ok(if e_log < 0.0 && e_rho < 1.0 {
        (1.0 - e_rho) / (1.0 + e_rho)
    } else if e_log > 0.0 && e_inv < 1.0 {
        -(1.0 - e_inv) / (1.0 + e_inv)
    } else {
        0.0
    })
}

/// `sum_i xi(e_i) e_i . u`.
pub fn drift(xi: &TransitionVector, u: &[f64]) -> f64 {
    xi.drift(u)
}

/// `(xi_i - xi_{d+i})_{i=1..d}`.
pub fn v_of_xi(xi: &TransitionVector) -> Vec<f64> {
    xi.drift_vector()
}

/// `p E_b[drift] + (1-p) E_r[drift]`.
pub fn annealed_drift(spec: &ModelSpec, u: &[f64]) -> f64 {
    spec.p * spec.mu_b.mean_drift(u) + (1.0 - spec.p) * spec.mu_r.mean_drift(u)
}
