//! Exact computations on finite windows.
//!
//! Quenched quantities come from iterating the occupation-probability vector
//! (absorbing boundary). Annealed quantities have two independent exact
//! routes: enumeration of every coloring and atom assignment of the relevant
//! sites, and expansion over walk paths with the environment expectation
//! factorized per distinct site.

use serde::Serialize;
use thiserror::Error;

use crate::env::{EnvError, ModelSpec};
use crate::lattice::{Color, Direction, Environment, Point, SiteRef, TransitionVector};

/// Upper limit on enumerated terms.
pub const FEASIBILITY_LIMIT: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{0} lies outside the window")]
    OutOfWindow(Point),
    #[error("enumeration needs {terms} terms, limit is {limit}")]
    FeasibilityExceeded { terms: f64, limit: u64 },
    #[error("empty or inverted window")]
    EmptyWindow,
    #[error("hitting iteration did not converge after {0} sweeps")]
    NotConverged(usize),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Box `lo..=hi` with an explicit site table. Walks leaving it are killed.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteWindow {
    lo: Point,
    hi: Point,
    sites: Vec<(Color, TransitionVector)>,
}

impl FiniteWindow {
    pub fn from_fn(
        lo: Point,
        hi: Point,
        mut f: impl FnMut(&Point) -> (Color, TransitionVector),
    ) -> Result<Self, OracleError> {
        if lo.dim() != hi.dim() || (0..lo.dim()).any(|a| lo.get(a) > hi.get(a)) {
            return Err(OracleError::EmptyWindow);
        }
        let mut w = FiniteWindow { lo, hi, sites: Vec::new() };
        let n = w.len();
        let mut sites = Vec::with_capacity(n);
        for i in 0..n {
            sites.push(f(&w.point(i)));
        }
        w.sites = sites;
        Ok(w)
    }

    /// Copies the box `lo..=hi` out of a (lazy) environment.
    pub fn from_environment<E: Environment + ?Sized>(env: &E, lo: Point, hi: Point) -> Result<Self, OracleError> {
        let mut err = None;
        let w = FiniteWindow::from_fn(lo, hi, |x| match env.site(x) {
            Ok(Some(s)) => (s.color, s.probs.clone()),
            Ok(None) => {
                err.get_or_insert(OracleError::OutOfWindow(*x));
                (Color::Blue, TransitionVector::uniform(x.dim()))
            }
            Err(e) => {
                err.get_or_insert(e.into());
                (Color::Blue, TransitionVector::uniform(x.dim()))
            }
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(w),
        }
    }

    /// Box of radius `radius` around `center`.
    pub fn around(
        center: Point,
        radius: i64,
        f: impl FnMut(&Point) -> (Color, TransitionVector),
    ) -> Result<Self, OracleError> {
        let d = center.dim();
        let r = Point::new(&vec![radius; d]);
        FiniteWindow::from_fn(center.sub(&r), center.add(&r), f)
    }

    pub fn lo(&self) -> Point {
        self.lo
    }

    pub fn hi(&self) -> Point {
        self.hi
    }

    pub fn len(&self) -> usize {
        (0..self.lo.dim()).map(|a| (self.hi.get(a) - self.lo.get(a) + 1) as usize).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, x: &Point) -> Option<usize> {
        if x.dim() != self.lo.dim() {
            return None;
        }
        let mut idx = 0usize;
        for a in 0..x.dim() {
            let (lo, hi) = (self.lo.get(a), self.hi.get(a));
            let c = x.get(a);
            if c < lo || c > hi {
                return None;
            }
            idx = idx * (hi - lo + 1) as usize + (c - lo) as usize;
        }
        Some(idx)
    }

    pub fn point(&self, mut idx: usize) -> Point {
        let d = self.lo.dim();
        let mut coords = vec![0i64; d];
        for a in (0..d).rev() {
            let width = (self.hi.get(a) - self.lo.get(a) + 1) as usize;
            coords[a] = self.lo.get(a) + (idx % width) as i64;
            idx /= width;
        }
        Point::new(&coords)
    }

    pub fn set(&mut self, x: &Point, color: Color, vector: TransitionVector) -> Result<(), OracleError> {
        let i = self.index(x).ok_or(OracleError::OutOfWindow(*x))?;
        self.sites[i] = (color, vector);
        Ok(())
    }

    pub fn entry(&self, x: &Point) -> Option<&(Color, TransitionVector)> {
        self.index(x).map(|i| &self.sites[i])
    }

    fn require(&self, x: &Point) -> Result<usize, OracleError> {
        self.index(x).ok_or(OracleError::OutOfWindow(*x))
    }

    /// Neighbor index table: `nbr[i * 2d + k]` is the index of site `i`
    /// stepped along direction `k`, or `usize::MAX` if that leaves the box.
    fn neighbors(&self) -> Vec<usize> {
        let d = self.lo.dim();
        let mut nbr = Vec::with_capacity(self.len() * 2 * d);
        for i in 0..self.len() {
            let x = self.point(i);
            for dir in Direction::all(d) {
                nbr.push(self.index(&x.step(dir)).unwrap_or(usize::MAX));
            }
        }
        nbr
    }
}

impl Environment for FiniteWindow {
    fn dim(&self) -> usize {
        self.lo.dim()
    }

    fn site(&self, x: &Point) -> Result<Option<SiteRef<'_>>, EnvError> {
        Ok(self.entry(x).map(|(color, probs)| SiteRef { color: *color, probs }))
    }
}

/// Result of iterating the occupation vector for `T` steps.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupationDp {
    /// `E[N_x^T]` indexed like the window.
    pub expected: Vec<f64>,
    /// Mass killed at the boundary by time `T`.
    pub absorbed: f64,
    /// `max_t |sum_x P(X_t = x) + absorbed_t - 1|`.
    pub max_conservation_error: f64,
}

/// `E[N_x^T]` for every site `x` of the window.
pub fn expected_local_times(window: &FiniteWindow, start: &Point, t: u64) -> Result<OccupationDp, OracleError> {
    let s = window.require(start)?;
    let n = window.len();
    let d = window.dim();
    let nbr = window.neighbors();
    let mut cur = vec![0.0; n];
    let mut next = vec![0.0; n];
    cur[s] = 1.0;
    let mut expected = cur.clone();
    let mut absorbed = 0.0;
    let mut max_err: f64 = 0.0;
    for _ in 0..t {
        next.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let m = cur[i];
            if m == 0.0 {
                continue;
            }
            let probs = window.sites[i].1.probs();
            for k in 0..2 * d {
                let q = m * probs[k];
                match nbr[i * 2 * d + k] {
                    usize::MAX => absorbed += q,
                    j => next[j] += q,
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        let live: f64 = cur.iter().sum();
        max_err = max_err.max((live + absorbed - 1.0).abs());
        for (e, c) in expected.iter_mut().zip(&cur) {
            *e += c;
        }
    }
    Ok(OccupationDp { expected, absorbed, max_conservation_error: max_err })
}

/// `E[N_x^T] = sum_{t <= T} P(X_t = x)` for the walk started at `start`.
pub fn exact_local_time(window: &FiniteWindow, start: &Point, x: &Point, t: u64) -> Result<f64, OracleError> {
    let xi = window.require(x)?;
    Ok(expected_local_times(window, start, t)?.expected[xi])
}

/// Maximum sweeps of the hitting iteration.
pub const HITTING_MAX_SWEEPS: usize = 1_000_000;

/// `P^from(H_target < H~_taboo)`, where `H~` is the first visit at a time
/// `>= 1` and leaving the window counts as failure. Returns 1 when
/// `from == target`.
///
/// Solved by Gauss-Seidel value iteration from zero, which increases
/// monotonically to the minimal solution; stops when a sweep changes no
/// value by more than 1e-13.
pub fn exact_hitting(
    window: &FiniteWindow,
    from: &Point,
    target: &Point,
    taboo: Option<&Point>,
) -> Result<f64, OracleError> {
    let f = window.require(from)?;
    let tg = window.require(target)?;
    let tb = taboo.map(|p| window.require(p)).transpose()?;
    if f == tg {
        return Ok(1.0);
    }
    let n = window.len();
    let d = window.dim();
    let nbr = window.neighbors();
    let mut h = vec![0.0; n];
    h[tg] = 1.0;
    let value = |h: &[f64], i: usize| -> f64 {
        let probs = window.sites[i].1.probs();
        (0..2 * d)
            .map(|k| match nbr[i * 2 * d + k] {
                usize::MAX => 0.0,
                j => probs[k] * h[j],
            })
            .sum()
    };
    let mut converged = false;
    for _ in 0..HITTING_MAX_SWEEPS {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            if i == tg || Some(i) == tb {
                continue;
            }
            let v = value(&h, i);
            delta = delta.max((v - h[i]).abs());
            h[i] = v;
        }
        if delta <= 1e-13 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(OracleError::NotConverged(HITTING_MAX_SWEEPS));
    }
    // taboo sites hold 0; the start may itself be the taboo, so take one
    // explicit first step from it
    Ok(value(&h, f))
}

/// Annealed local time split by the color of `x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnnealedLocalTime {
    pub total: f64,
    pub blue: f64,
    pub red: f64,
}

/// Every `(color, atom)` a site can take, with its probability.
fn site_options(spec: &ModelSpec) -> Vec<(f64, Color, &TransitionVector)> {
    let mut out = Vec::new();
    for (w, v) in spec.mu_b.atoms() {
        out.push((spec.p * w, Color::Blue, v));
    }
    for (w, v) in spec.mu_r.atoms() {
        out.push(((1.0 - spec.p) * w, Color::Red, v));
    }
    out
}

/// `E^0[N_x^T]` and its blue/red split by exhaustive enumeration over the
/// window `lo..=hi`.
///
/// Only sites the walk can step from before time `T`, plus `x` itself,
/// are enumerated; the rest of the window is filled with an arbitrary blue
/// atom since it cannot influence the result.
pub fn exact_annealed_local_time(
    spec: &ModelSpec,
    lo: Point,
    hi: Point,
    start: &Point,
    x: &Point,
    t: u64,
) -> Result<AnnealedLocalTime, OracleError> {
    let options = site_options(spec);
    let filler = spec.mu_b.atoms()[0].1.clone();
    let mut window = FiniteWindow::from_fn(lo, hi, |_| (Color::Blue, filler.clone()))?;
    window.require(start)?;
    let xi = window.require(x)?;
    let mut relevant: Vec<usize> =
        (0..window.len()).filter(|&i| window.point(i).l1_distance(start) < t as i64).collect();
    if !relevant.contains(&xi) {
        relevant.push(xi);
    }
    let terms = (options.len() as f64).powi(relevant.len() as i32);
    if terms > FEASIBILITY_LIMIT as f64 {
        return Err(OracleError::FeasibilityExceeded { terms, limit: FEASIBILITY_LIMIT });
    }
    let mut acc = AnnealedLocalTime { total: 0.0, blue: 0.0, red: 0.0 };
    let mut digits = vec![0usize; relevant.len()];
    loop {
        let mut prob = 1.0;
        for (slot, &i) in relevant.iter().enumerate() {
            let (w, c, v) = options[digits[slot]];
            prob *= w;
            window.sites[i] = (c, v.clone());
        }
        if prob > 0.0 {
            let n = expected_local_times(&window, start, t)?.expected[xi];
            acc.total += prob * n;
            match window.sites[xi].0 {
                Color::Blue => acc.blue += prob * n,
                Color::Red => acc.red += prob * n,
            }
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == digits.len() {
                return Ok(acc);
            }
            digits[k] += 1;
            if digits[k] < options.len() {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}

/// Per-time annealed occupation `a_t = E^0[1{X_t = x}]`, split by the color
/// of `x`, for `t = 0..=t_max`, by summing over all nearest-neighbor paths.
pub fn annealed_occupation_by_paths(spec: &ModelSpec, start: &Point, x: &Point, t_max: u64) -> Vec<AnnealedLocalTime> {
    let d = spec.d;
    let options = site_options(spec);
    let mut out = vec![AnnealedLocalTime { total: 0.0, blue: 0.0, red: 0.0 }; t_max as usize + 1];
    // visited sites with their step counts per direction
    let mut sites: Vec<(Point, [u32; 2 * crate::lattice::MAX_DIM])> = Vec::new();
    let mut ctx = PathCtx { options: &options, d, x: *x, t_max, out: &mut out };
    ctx.dfs(*start, 0, &mut sites);
    out
}

struct PathCtx<'a, 'b> {
    options: &'a [(f64, Color, &'b TransitionVector)],
    d: usize,
    x: Point,
    t_max: u64,
    out: &'a mut [AnnealedLocalTime],
}

impl PathCtx<'_, '_> {
    fn dfs(&mut self, pos: Point, t: u64, sites: &mut Vec<(Point, [u32; 2 * crate::lattice::MAX_DIM])>) {
        if pos == self.x {
            let (blue, red) = self.weight(sites);
            let cell = &mut self.out[t as usize];
            cell.blue += blue;
            cell.red += red;
            cell.total += blue + red;
        }
        if t == self.t_max {
            return;
        }
        // the path must still be able to come back to x
        let remaining = self.t_max - t;
        if pos.l1_distance(&self.x) as u64 > remaining {
            return;
        }
        let slot = match sites.iter().position(|(p, _)| *p == pos) {
            Some(s) => s,
            None => {
                sites.push((pos, [0; 2 * crate::lattice::MAX_DIM]));
                sites.len() - 1
            }
        };
        for dir in Direction::all(self.d) {
            sites[slot].1[dir.0] += 1;
            self.dfs(pos.step(dir), t + 1, sites);
            sites[slot].1[dir.0] -= 1;
        }
        if sites[slot].1.iter().all(|&c| c == 0) && slot == sites.len() - 1 {
            sites.pop();
        }
    }

    /// Expected path weight times `1{x blue}` and times `1{x red}`.
    fn weight(&self, sites: &[(Point, [u32; 2 * crate::lattice::MAX_DIM])]) -> (f64, f64) {
        let mut rest = 1.0;
        let mut at_x: Option<&[u32]> = None;
        for (p, counts) in sites {
            if *p == self.x {
                at_x = Some(&counts[..]);
                continue;
            }
            rest *= self.options.iter().map(|(w, _, v)| w * monomial(v, counts, self.d)).sum::<f64>();
            if rest == 0.0 {
                return (0.0, 0.0);
            }
        }
        let zero = [0u32; 2 * crate::lattice::MAX_DIM];
        let counts = at_x.unwrap_or(&zero);
        let (mut blue, mut red) = (0.0, 0.0);
        for (w, c, v) in self.options {
            let m = w * monomial(v, counts, self.d);
            match c {
                Color::Blue => blue += m,
                Color::Red => red += m,
            }
        }
        (rest * blue, rest * red)
    }
}

fn monomial(v: &TransitionVector, counts: &[u32], d: usize) -> f64 {
    (0..2 * d).filter(|&k| counts[k] > 0).map(|k| v.probs()[k].powi(counts[k] as i32)).product()
}

/// Annealed `E^0[N_x^T]` by path expansion; agrees with
/// [`exact_annealed_local_time`] on a window of radius `>= T`.
pub fn exact_annealed_local_time_paths(spec: &ModelSpec, start: &Point, x: &Point, t: u64) -> AnnealedLocalTime {
    let a = annealed_occupation_by_paths(spec, start, x, t);
    a.iter().fold(AnnealedLocalTime { total: 0.0, blue: 0.0, red: 0.0 }, |acc, c| AnnealedLocalTime {
        total: acc.total + c.total,
        blue: acc.blue + c.blue,
        red: acc.red + c.red,
    })
}

/// Blue's/Red's functions under geometric truncation, truncated at `k_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeometricMixture {
    pub rho: f64,
    pub k_max: u64,
    /// `sum_{k <= k_max} P(tau = k) E^0[N_x^k 1{x blue}]`, a lower bound.
    pub blue_lower: f64,
    /// Same for red.
    pub red_lower: f64,
    /// `sum_{k > k_max} P(tau = k)(k + 1) = (1-rho)^K (K + 1 + 1/rho)`,
    /// bounding the omitted part of either function.
    pub tail_bound: f64,
}

impl GeometricMixture {
    /// Certifies `red <= c * blue` for the untruncated functions.
    pub fn certifies_ratio(&self, c: f64) -> bool {
        self.red_lower + self.tail_bound <= c * self.blue_lower
    }
}

/// Exact geometric-truncation mixture via the path expansion.
pub fn geometric_mixture(spec: &ModelSpec, start: &Point, x: &Point, rho: f64, k_max: u64) -> GeometricMixture {
    let a = annealed_occupation_by_paths(spec, start, x, k_max);
    let (mut blue_lower, mut red_lower) = (0.0, 0.0);
    let (mut cum_blue, mut cum_red) = (0.0, 0.0);
    for k in 0..=k_max {
        cum_blue += a[k as usize].blue;
        cum_red += a[k as usize].red;
        if k >= 1 {
            let w = rho * (1.0 - rho).powi(k as i32 - 1);
            blue_lower += w * cum_blue;
            red_lower += w * cum_red;
        }
    }
    let kf = k_max as f64;
    let tail_bound = (1.0 - rho).powi(k_max as i32) * (kf + 1.0 + 1.0 / rho);
    GeometricMixture { rho, k_max, blue_lower, red_lower, tail_bound }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tv(v: &[f64]) -> TransitionVector {
        TransitionVector::new(v.to_vec()).unwrap()
    }

    fn homogeneous(v: &[f64], radius: i64) -> FiniteWindow {
        FiniteWindow::around(Point::origin(2), radius, |_| (Color::Blue, tv(v))).unwrap()
    }

    #[test]
    fn index_roundtrip() {
        let w = FiniteWindow::from_fn(Point::new(&[-2, 1]), Point::new(&[3, 4]), |_| (Color::Blue, tv(&[0.25; 4])))
            .unwrap();
        assert_eq!(w.len(), 24);
        for i in 0..w.len() {
            assert_eq!(w.index(&w.point(i)), Some(i));
        }
        assert_eq!(w.index(&Point::new(&[4, 1])), None);
    }

    #[test]
    fn local_time_hand_values() {
        let w = homogeneous(&[0.3, 0.25, 0.2, 0.25], 3);
        let o = Point::origin(2);
        assert_eq!(exact_local_time(&w, &o, &o, 0).unwrap(), 1.0);
        assert_eq!(exact_local_time(&w, &o, &Point::new(&[1, 0]), 0).unwrap(), 0.0);
        assert!((exact_local_time(&w, &o, &o, 2).unwrap() - 1.245).abs() < 1e-15);
        let w = homogeneous(&[0.25; 4], 3);
        assert!((exact_local_time(&w, &o, &o, 2).unwrap() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn absorbing_boundary_conserves_mass() {
        let w = homogeneous(&[0.4, 0.3, 0.1, 0.2], 2);
        let dp = expected_local_times(&w, &Point::origin(2), 40).unwrap();
        assert!(dp.absorbed > 0.5);
        assert!(dp.max_conservation_error < 1e-12);
        assert!((dp.expected.iter().sum::<f64>() <= 41.0));
    }

    #[test]
    fn hitting_one_step_lower_bound_and_conventions() {
        let w = homogeneous(&[0.3, 0.25, 0.2, 0.25], 3);
        let o = Point::origin(2);
        let b = Point::new(&[1, 0]);
        let h = exact_hitting(&w, &o, &b, Some(&o)).unwrap();
        assert!((0.3..1.0).contains(&h));
        assert_eq!(exact_hitting(&w, &o, &o, Some(&o)).unwrap(), 1.0);
        assert!(matches!(exact_hitting(&w, &o, &Point::new(&[9, 9]), None), Err(OracleError::OutOfWindow(_))));
    }

    #[test]
    fn hitting_one_dimensional_gambler() {
        // drifted 1-d walk on {-5..5} killed outside: P^0(hit 5 before leaving)
        let w = FiniteWindow::from_fn(Point::new(&[-5]), Point::new(&[5]), |_| (Color::Blue, tv(&[0.6, 0.4]))).unwrap();
        let h = exact_hitting(&w, &Point::new(&[0]), &Point::new(&[5]), None).unwrap();
        // absorbing at -6 and 5: ruin formula with r = q/p
        let r: f64 = 0.4 / 0.6;
        let expect = (1.0 - r.powi(6)) / (1.0 - r.powi(11));
        assert!((h - expect).abs() < 1e-11, "{h} vs {expect}");
    }

    #[test]
    fn annealed_trivial_cases() {
        let spec = ModelSpec::kalikow();
        let o = Point::origin(2);
        let (lo, hi) = (Point::new(&[-2, -2]), Point::new(&[2, 2]));
        let a = exact_annealed_local_time(&spec, lo, hi, &o, &o, 0).unwrap();
        assert!((a.total - 1.0).abs() < 1e-15);
        assert!((a.red - 0.001).abs() < 1e-15);
        let e1 = Point::new(&[1, 0]);
        let a = exact_annealed_local_time(&spec, lo, hi, &o, &e1, 1).unwrap();
        assert!((a.total - (0.999 * 0.4995 + 0.001 * 0.2495)).abs() < 1e-15);
    }

    #[test]
    fn annealed_routes_agree() {
        let spec = ModelSpec::rare_anomaly(0.1, 0.7).unwrap();
        let o = Point::origin(2);
        for (x, t) in [(Point::new(&[0, 0]), 3), (Point::new(&[1, 1]), 3), (Point::new(&[-1, 0]), 2)] {
            let r = t as i64;
            let e = exact_annealed_local_time(&spec, Point::new(&[-r, -r]), Point::new(&[r, r]), &o, &x, t).unwrap();
            let p = exact_annealed_local_time_paths(&spec, &o, &x, t);
            assert!((e.total - p.total).abs() < 1e-13, "{e:?} {p:?}");
            assert!((e.blue - p.blue).abs() < 1e-13);
            assert!((e.red - p.red).abs() < 1e-13);
        }
    }

    #[test]
    fn annealed_enumeration_guard() {
        let spec = ModelSpec::kalikow();
        let o = Point::origin(2);
        let r = Point::new(&[6, 6]);
        assert!(matches!(
            exact_annealed_local_time(&spec, o.sub(&r), r, &o, &o, 6),
            Err(OracleError::FeasibilityExceeded { .. })
        ));
    }

    #[test]
    fn geometric_tail_formula() {
        let m = geometric_mixture(&ModelSpec::kalikow(), &Point::origin(2), &Point::origin(2), 0.9, 12);
        let direct: f64 = (13..2000).map(|k| 0.9 * 0.1f64.powi(k - 1) * (k as f64 + 1.0)).sum();
        assert!((m.tail_bound - direct).abs() < 1e-20);
    }
}
