//! Walks driven by explicit uniform streams and the coupling of two walks in
//! environments that differ at a single site `y`.
//!
//! `X2` runs in `omega2` from the stream `U`. `X3` copies `X2` until `X2`
//! sits at `y`; there `X3` instead runs an excursion in `omega3` from `y`,
//! driven by the stream `V`, until it hits the site `X2` steps to next. It
//! then resumes copying `X2`. Both walks are censored at `T` steps.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cluster::StepSet;
use crate::env::EnvError;
use crate::lattice::{next_position, Color, Direction, Environment, Point, SiteRef, TransitionVector};
use crate::oracle::{exact_hitting, FiniteWindow, OracleError};
use crate::rng::{derive_seed, replicate_rng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CouplingError {
    #[error("site {0} of y + S is red")]
    PreconditionViolated(Point),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Walk `phi^a(env, U)`: steps by inverse CDF from the given uniforms until
/// `stop(n, X_n)` holds, the uniforms run out, `max_steps` is reached or the
/// walk leaves the environment. Returns the positions and whether `stop`
/// fired.
pub fn uniform_walk_map<E, U, S>(
    env: &E,
    a: Point,
    uniforms: U,
    mut stop: S,
    max_steps: u64,
) -> Result<(Vec<Point>, bool), EnvError>
where
    E: Environment + ?Sized,
    U: IntoIterator<Item = f64>,
    S: FnMut(usize, &Point) -> bool,
{
    let mut path = vec![a];
    let mut x = a;
    if stop(0, &x) {
        return Ok((path, true));
    }
    for u in uniforms.into_iter().take(max_steps as usize) {
        match next_position(env, &x, u)? {
            Some(y) => x = y,
            None => break,
        }
        path.push(x);
        if stop(path.len() - 1, &x) {
            return Ok((path, true));
        }
    }
    Ok((path, false))
}

/// Two environments equal to `base` except at `y`.
#[derive(Clone, Debug)]
pub struct CoupledPair<E> {
    base: E,
    y: Point,
    site2: (Color, TransitionVector),
    site3: (Color, TransitionVector),
}

/// One side of a [`CoupledPair`].
#[derive(Clone, Copy, Debug)]
pub struct PairView<'a, E> {
    base: &'a E,
    y: Point,
    site: &'a (Color, TransitionVector),
}

impl<E: Environment> Environment for PairView<'_, E> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    #[inline]
    fn site(&self, x: &Point) -> Result<Option<SiteRef<'_>>, EnvError> {
        if *x == self.y {
            return Ok(Some(SiteRef { color: self.site.0, probs: &self.site.1 }));
        }
        self.base.site(x)
    }
}

impl<E: Environment> CoupledPair<E> {
    /// `omega2` has `(Blue, blue)` at `y`, `omega3` has `(Red, red)`.
    pub fn new(base: E, y: Point, blue: TransitionVector, red: TransitionVector) -> Self {
        CoupledPair { base, y, site2: (Color::Blue, blue), site3: (Color::Red, red) }
    }

    /// Pair with arbitrary tagged values at `y`.
    pub fn with_sites(base: E, y: Point, site2: (Color, TransitionVector), site3: (Color, TransitionVector)) -> Self {
        CoupledPair { base, y, site2, site3 }
    }

    pub fn y(&self) -> Point {
        self.y
    }

    pub fn base(&self) -> &E {
        &self.base
    }

    pub fn omega2(&self) -> PairView<'_, E> {
        PairView { base: &self.base, y: self.y, site: &self.site2 }
    }

    pub fn omega3(&self) -> PairView<'_, E> {
        PairView { base: &self.base, y: self.y, site: &self.site3 }
    }
}

/// One excursion of `X3` away from the shared path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Excursion {
    /// Index `n` of `X2` with `X2_n = y`.
    pub decouple_time: u64,
    /// `X2_{n+1}`.
    pub target: Point,
    /// Steps taken by the excursion walk (`b_k`), counting to the horizon
    /// when unfinished.
    pub length: u64,
    pub completed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingTrace {
    pub path2: Vec<Point>,
    pub path3: Vec<Point>,
    pub excursions: Vec<Excursion>,
    /// The last excursion was cut off by the horizon.
    pub censored: bool,
}

impl CouplingTrace {
    pub fn decouple_times(&self) -> Vec<u64> {
        self.excursions.iter().map(|e| e.decouple_time).collect()
    }

    pub fn local_time2(&self, x: &Point) -> u64 {
        self.path2.iter().filter(|p| *p == x).count() as u64
    }

    pub fn local_time3(&self, x: &Point) -> u64 {
        self.path3.iter().filter(|p| *p == x).count() as u64
    }
}

/// Builds `X2` and `X3` to horizon `t` from the uniform streams `u` and `v`.
pub fn run_coupled_with<E, R1, R2>(
    pair: &CoupledPair<E>,
    t: u64,
    u: &mut R1,
    v: &mut R2,
) -> Result<CouplingTrace, EnvError>
where
    E: Environment,
    R1: Rng + ?Sized,
    R2: Rng + ?Sized,
{
    let omega2 = pair.omega2();
    let omega3 = pair.omega3();
    let y = pair.y;
    let start = Point::origin(pair.base.dim());
    let (path2, _) = uniform_walk_map(&omega2, start, std::iter::repeat_with(|| u.random::<f64>()), |_, _| false, t)?;
    let len = t as usize + 1;
    let mut path3 = Vec::with_capacity(len);
    path3.push(start);
    let mut excursions = Vec::new();
    let mut censored = false;
    // identical environments never decouple
    let differs = pair.site2 != pair.site3;
    let mut n = 0usize;
    while path3.len() < len && n + 1 < path2.len() {
        if differs && path2[n] == y {
            let target = path2[n + 1];
            let budget = (len - path3.len()) as u64;
            let (ex, hit) = uniform_walk_map(
                &omega3,
                y,
                std::iter::repeat_with(|| v.random::<f64>()),
                |_, x| *x == target,
                budget,
            )?;
            excursions.push(Excursion { decouple_time: n as u64, target, length: ex.len() as u64 - 1, completed: hit });
            path3.extend_from_slice(&ex[1..]);
            if !hit {
                censored = true;
                break;
            }
        } else {
            path3.push(path2[n + 1]);
        }
        n += 1;
    }
    Ok(CouplingTrace { path2, path3, excursions, censored })
}

/// [`run_coupled_with`] with `U` and `V` drawn from independent ChaCha8
/// streams keyed by `(seed, replicate)`.
pub fn run_coupled<E: Environment>(
    pair: &CoupledPair<E>,
    t: u64,
    seed: u64,
    replicate: u64,
) -> Result<CouplingTrace, EnvError> {
    let mut u = replicate_rng(derive_seed(seed, 0), replicate);
    let mut v = replicate_rng(derive_seed(seed, 1), replicate);
    run_coupled_with(pair, t, &mut u, &mut v)
}

/// Per-replicate digest of a coupling run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CouplingSample {
    pub replicate: u64,
    pub decouple_count: u64,
    pub total_excursion_steps: u64,
    /// `N_x^T` of `X2` at each tracked site.
    pub n2: Vec<u64>,
    /// `N_x^T` of `X3` at each tracked site.
    pub n3: Vec<u64>,
    pub displacement2: Point,
    pub displacement3: Point,
    pub censored: bool,
    pub excursions: Vec<Excursion>,
}

/// Runs `n` coupled replicates; `pair_for(r)` supplies the pair of
/// replicate `r` (fresh environments give the annealed comparison).
pub fn coupled_replicates<E, F>(
    pair_for: F,
    t: u64,
    n: u64,
    seed: u64,
    sites: &[Point],
) -> Result<Vec<CouplingSample>, EnvError>
where
    E: Environment,
    F: Fn(u64) -> CoupledPair<E> + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|r| {
            let pair = pair_for(r);
            let trace = run_coupled(&pair, t, seed, r)?;
            let origin = Point::origin(pair.base.dim());
            Ok(CouplingSample {
                replicate: r,
                decouple_count: trace.excursions.len() as u64,
                total_excursion_steps: trace.excursions.iter().map(|e| e.length).sum(),
                n2: sites.iter().map(|x| trace.local_time2(x)).collect(),
                n3: sites.iter().map(|x| trace.local_time3(x)).collect(),
                displacement2: trace.path2.last().unwrap().sub(&origin),
                displacement3: trace.path3.last().unwrap().sub(&origin),
                censored: trace.censored,
                excursions: trace.excursions,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExcursionStats {
    pub count: u64,
    pub completed: u64,
    pub censored: u64,
    /// Mean length of completed excursions.
    pub mean_length: f64,
    pub max_length: u64,
    pub failure_rate: f64,
    /// Completed-excursion lengths and their frequencies.
    pub histogram: BTreeMap<u64, u64>,
}

pub fn excursion_length_stats<'a>(excursions: impl IntoIterator<Item = &'a Excursion>) -> ExcursionStats {
    let mut histogram = BTreeMap::new();
    let (mut count, mut completed, mut total, mut max_length) = (0u64, 0u64, 0u64, 0u64);
    for e in excursions {
        count += 1;
        max_length = max_length.max(e.length);
        if e.completed {
            completed += 1;
            total += e.length;
            *histogram.entry(e.length).or_insert(0) += 1;
        }
    }
    let censored = count - completed;
    ExcursionStats {
        count,
        completed,
        censored,
        mean_length: if completed > 0 { total as f64 / completed as f64 } else { 0.0 },
        max_length,
        failure_rate: if count > 0 { censored as f64 / count as f64 } else { 0.0 },
        histogram,
    }
}

/// Detour from `y` to one neighbor.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetourEntry {
    pub target: Point,
    pub path: Vec<Point>,
    /// Product of transition probabilities along `path`.
    pub path_probability: f64,
    /// `P^y(H_target < H~_y)` on the window.
    pub hitting_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetourReport {
    pub y: Point,
    pub kappa: f64,
    pub entries: Vec<DetourEntry>,
    pub min_path_probability: f64,
    pub min_hitting_probability: f64,
}

impl DetourReport {
    /// Every path product and hitting probability is at least `kappa^5`.
    pub fn passes(&self) -> bool {
        let k5 = self.kappa.powi(5);
        self.min_path_probability >= k5 && self.min_hitting_probability >= k5
    }
}

/// Explicit detour from `y` to `y + e_i` in canonical labels (`k = i - 1`),
/// mapped through the step set's relabeling.
pub fn detour_path(y: &Point, steps: &StepSet, k: usize) -> Vec<Point> {
    let d = steps.d;
    let e = |c: usize| steps.relabel[c];
    let (eta, theta, up) = (2 * d - 2, 2 * d - 1, d - 1);
    if k == eta || k == theta {
        return vec![*y, y.step(e(k))];
    }
    let a = y.step(e(eta));
    let b = a.step(e(up));
    let c = y.step(e(up));
    if k == up {
        return vec![*y, a, b, c];
    }
    let f = c.step(e(k));
    vec![*y, a, b, c, f, y.step(e(k))]
}

/// Checks the detour lower bounds at `y` in `env`, which should be the
/// environment where `y` is red. Requires every site of `y + S` to be blue.
/// Hitting probabilities are computed on the box of radius `radius`
/// around `y`.
pub fn detour_probability_check<E: Environment + ?Sized>(
    env: &E,
    y: &Point,
    steps: &StepSet,
    kappa: f64,
    radius: i64,
) -> Result<DetourReport, CouplingError> {
    for s in &steps.steps {
        let z = y.add(s);
        if env.color(&z)? == Some(Color::Red) {
            return Err(CouplingError::PreconditionViolated(z));
        }
    }
    let r = Point::new(&vec![radius; y.dim()]);
    let window = FiniteWindow::from_environment(env, y.sub(&r), y.add(&r))?;
    let mut entries = Vec::new();
    for k in 0..2 * steps.d {
        let path = detour_path(y, steps, k);
        let mut prob = 1.0;
        for w in path.windows(2) {
            let dir = Direction::all(steps.d).find(|&dir| w[0].step(dir) == w[1]).expect("unit step");
            let site = env.site(&w[0])?.expect("detour stays in the domain");
            prob *= site.probs.prob(dir);
        }
        let target = *path.last().unwrap();
        let hitting_probability = exact_hitting(&window, y, &target, Some(y))?;
        entries.push(DetourEntry { target, path, path_probability: prob, hitting_probability });
    }
    let min_path_probability = entries.iter().map(|e| e.path_probability).fold(f64::INFINITY, f64::min);
    let min_hitting_probability = entries.iter().map(|e| e.hitting_probability).fold(f64::INFINITY, f64::min);
    Ok(DetourReport { y: *y, kappa, entries, min_path_probability, min_hitting_probability })
}
