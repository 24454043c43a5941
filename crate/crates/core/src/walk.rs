//! Quenched walk simulation, velocity estimation and annealed Blue's/Red's
//! function estimators under fixed or geometric truncation.
//!
//! Every replicate owns a ChaCha8 stream keyed by `(seed, replicate)`, and
//! annealed estimators draw the replicate's environment from
//! `derive_seed(seed, replicate)`. Results are collected in replicate order,
//! so they do not depend on the rayon thread count.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::Serialize;

use crate::env::{EnvError, ModelSpec, TaggedEnvironment};
use crate::lattice::{next_position, Color, Environment, Point};
use crate::rng::{derive_seed, replicate_rng};
use crate::stats::{batch_means, summarize, Summary};

/// A simulated trajectory summarized by its local times and first hits.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkRecord {
    pub start: Point,
    pub end: Point,
    /// Number of steps actually taken.
    pub steps: u64,
    /// `N_x^T`: visits to `x` among positions `0..=steps`.
    pub local_times: HashMap<Point, u64>,
    /// `H_x`: first time the walk is at `x`.
    pub first_hits: HashMap<Point, u64>,
    pub displacement: Point,
    /// Set when the walk stepped out of the environment's domain before `T`.
    pub killed: bool,
}

impl WalkRecord {
    pub fn from_positions(positions: &[Point], killed: bool) -> Self {
        assert!(!positions.is_empty());
        let mut local_times = HashMap::new();
        let mut first_hits = HashMap::new();
        for (n, x) in positions.iter().enumerate() {
            *local_times.entry(*x).or_insert(0) += 1;
            first_hits.entry(*x).or_insert(n as u64);
        }
        let start = positions[0];
        let end = *positions.last().unwrap();
        WalkRecord {
            start,
            end,
            steps: positions.len() as u64 - 1,
            local_times,
            first_hits,
            displacement: end.sub(&start),
            killed,
        }
    }

    pub fn local_time(&self, x: &Point) -> u64 {
        self.local_times.get(x).copied().unwrap_or(0)
    }
}

/// Positions `X_0..X_T` of one quenched walk. Stops early (and reports
/// `killed`) if the walk steps off the environment's domain.
pub fn trajectory<E: Environment + ?Sized, R: Rng + ?Sized>(
    env: &E,
    start: Point,
    t: u64,
    rng: &mut R,
) -> Result<(Vec<Point>, bool), EnvError> {
    let mut path = Vec::with_capacity(t as usize + 1);
    let mut x = start;
    path.push(x);
    for _ in 0..t {
        match next_position(env, &x, rng.random::<f64>())? {
            Some(y) => x = y,
            None => return Ok((path, true)),
        }
        path.push(x);
    }
    Ok((path, false))
}

pub fn run_walk<E: Environment + ?Sized, R: Rng + ?Sized>(
    env: &E,
    start: Point,
    t: u64,
    rng: &mut R,
) -> Result<WalkRecord, EnvError> {
    let (path, killed) = trajectory(env, start, t, rng)?;
    Ok(WalkRecord::from_positions(&path, killed))
}

/// `#{1 <= k <= T : X_k not in {X_0..X_{k-1}}}`.
pub fn fresh_site_fraction(record: &WalkRecord) -> u64 {
    record.first_hits.len() as u64 - 1
}

/// Geometric horizon `tau` on `{1, 2, ...}` with mean `1/rho`.
#[derive(Clone, Copy, Debug)]
pub struct GeometricTruncation {
    rho: f64,
    dist: Geometric,
}

impl GeometricTruncation {
    pub fn new(rho: f64) -> Result<Self, rand_distr::GeoError> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(rand_distr::GeoError::InvalidProbability);
        }
        Ok(GeometricTruncation { rho, dist: Geometric::new(rho)? })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// One-step survival probability.
    pub fn gamma(&self) -> f64 {
        1.0 - self.rho
    }

    pub fn mean(&self) -> f64 {
        1.0 / self.rho
    }

    pub fn pmf(&self, k: u64) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.rho * (1.0 - self.rho).powi((k - 1) as i32)
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        // rand_distr counts failures before the first success
        self.dist.sample(rng) + 1
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Truncation {
    Fixed(u64),
    Geometric(GeometricTruncation),
}

impl Truncation {
    fn horizon<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            Truncation::Fixed(t) => *t,
            Truncation::Geometric(g) => g.sample(rng),
        }
    }
}

/// Outcome of one velocity replicate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VelocitySample {
    pub replicate: u64,
    pub steps: u64,
    pub displacement: Point,
    /// `X_T . u / T`.
    pub velocity: f64,
    pub fresh: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VelocityEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_walks: u64,
    pub t: u64,
    pub seed: u64,
    pub samples: Vec<VelocitySample>,
}

/// Estimates `E[X_T . u] / T` from `n_walks` walks started at the origin.
///
/// `family(r)` supplies the environment for replicate `r`: return a fresh
/// environment per replicate for annealed sampling, or the same one for
/// quenched sampling. `track_fresh` additionally counts fresh sites, which
/// costs a hash set per walk.
pub fn empirical_velocity<E, F>(
    family: F,
    u: &[f64],
    t: u64,
    n_walks: u64,
    seed: u64,
    track_fresh: bool,
) -> Result<VelocityEstimate, EnvError>
where
    E: Environment,
    F: Fn(u64) -> E + Sync,
{
    assert!(t >= 1 && n_walks >= 1);
    let samples = (0..n_walks)
        .into_par_iter()
        .map(|r| {
            let env = family(r);
            let mut rng = replicate_rng(seed, r);
            let start = Point::origin(env.dim());
            let mut x = start;
            let mut seen = track_fresh.then(|| {
                let mut s = std::collections::HashSet::with_capacity(1024);
                s.insert(x);
                s
            });
            let mut steps = 0;
            for _ in 0..t {
                match next_position(&env, &x, rng.random::<f64>())? {
                    Some(y) => x = y,
                    None => break,
                }
                steps += 1;
                if let Some(s) = seen.as_mut() {
                    s.insert(x);
                }
            }
            let displacement = x.sub(&start);
            Ok(VelocitySample {
                replicate: r,
                steps,
                displacement,
                velocity: displacement.dot(u) / t as f64,
                fresh: seen.map(|s| s.len() as u64 - 1),
            })
        })
        .collect::<Result<Vec<_>, EnvError>>()?;
    let v: Vec<f64> = samples.iter().map(|s| s.velocity).collect();
    let s = summarize(&v);
    Ok(VelocityEstimate { mean: s.mean, stderr: s.stderr, n_walks, t, seed, samples })
}

/// Annealed velocity for a tagged model: replicate `r` uses the environment
/// seeded by `derive_seed(seed, r)`.
pub fn annealed_velocity(
    spec: &Arc<ModelSpec>,
    u: &[f64],
    t: u64,
    n_walks: u64,
    seed: u64,
) -> Result<VelocityEstimate, EnvError> {
    let base = TaggedEnvironment::new(Arc::clone(spec), seed);
    empirical_velocity(|r| base.with_seed(derive_seed(seed, r)), u, t, n_walks, seed, false)
}

/// Monte Carlo Blue's and Red's functions at one site.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GreensEstimate {
    pub site: Point,
    pub blue_mass: f64,
    pub red_mass: f64,
    pub blue_stderr: f64,
    pub red_stderr: f64,
    pub total_stderr: f64,
    pub n_replicates: u64,
}

/// Nonzero contribution `N_x^T` of one replicate at one site.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Contribution {
    pub replicate: u64,
    pub color: Color,
    pub count: u64,
}

/// Raw output of [`greens_functions`]: per-site sparse contributions.
#[derive(Clone, Debug, PartialEq)]
pub struct GreensRun {
    pub sites: Vec<Point>,
    pub n_replicates: u64,
    /// Horizon (`T` or the drawn `tau`) of every replicate.
    pub horizons: Vec<u64>,
    pub contributions: Vec<Vec<Contribution>>,
}

impl GreensRun {
    fn dense(&self, site: usize, f: impl Fn(&Contribution) -> f64) -> Vec<f64> {
        let mut v = vec![0.0; self.n_replicates as usize];
        for c in &self.contributions[site] {
            v[c.replicate as usize] += f(c);
        }
        v
    }

    pub fn estimate(&self, site: usize) -> GreensEstimate {
        let blue = summarize(&self.dense(site, |c| if c.color == Color::Blue { c.count as f64 } else { 0.0 }));
        let red = summarize(&self.dense(site, |c| if c.color == Color::Red { c.count as f64 } else { 0.0 }));
        let total = summarize(&self.dense(site, |c| c.count as f64));
        GreensEstimate {
            site: self.sites[site],
            blue_mass: blue.mean,
            red_mass: red.mean,
            blue_stderr: blue.stderr,
            red_stderr: red.stderr,
            total_stderr: total.stderr,
            n_replicates: self.n_replicates,
        }
    }

    /// Batch-means summary of per-replicate `red - c * blue`; the inequality
    /// `red <= c * blue` is supported when `mean <= 5 * stderr`.
    pub fn excess(&self, site: usize, c: f64, batches: usize) -> Summary {
        let v = self.dense(site, |x| match x.color {
            Color::Red => x.count as f64,
            Color::Blue => -c * x.count as f64,
        });
        batch_means(&v, batches)
    }

    /// Red-to-blue ratio with a batch-means delta-method stderr.
    pub fn ratio(&self, site: usize, batches: usize) -> (f64, f64) {
        let red = self.dense(site, |c| if c.color == Color::Red { c.count as f64 } else { 0.0 });
        let blue = self.dense(site, |c| if c.color == Color::Blue { c.count as f64 } else { 0.0 });
        crate::stats::batch_ratio(&red, &blue, batches)
    }
}

/// Annealed estimates of `E^0[N_x^T 1{x blue}]` and `E^0[N_x^T 1{x red}]`
/// for every site in `sites`, from `n_replicates` walks started at the
/// origin, each in its own environment.
pub fn greens_functions(
    spec: &Arc<ModelSpec>,
    sites: &[Point],
    truncation: Truncation,
    n_replicates: u64,
    seed: u64,
) -> Result<GreensRun, EnvError> {
    assert!(n_replicates >= 1);
    let base = TaggedEnvironment::new(Arc::clone(spec), seed);
    let per_rep = (0..n_replicates)
        .into_par_iter()
        .map(|r| {
            let env = base.with_seed(derive_seed(seed, r));
            let mut rng = replicate_rng(seed, r);
            let horizon = truncation.horizon(&mut rng);
            let mut counts = vec![0u64; sites.len()];
            let mut x = Point::origin(spec.d);
            let mut tally = |x: &Point| {
                for (i, s) in sites.iter().enumerate() {
                    if s == x {
                        counts[i] += 1;
                    }
                }
            };
            tally(&x);
            for _ in 0..horizon {
                x = next_position(&env, &x, rng.random::<f64>())?.expect("tagged environments are total");
                tally(&x);
            }
            let mut out = Vec::new();
            for (i, &count) in counts.iter().enumerate() {
                if count > 0 {
                    let color = env.sample_site(&sites[i]).0;
                    out.push((i, Contribution { replicate: r, color, count }));
                }
            }
            Ok((horizon, out))
        })
        .collect::<Result<Vec<_>, EnvError>>()?;
    let mut contributions = vec![Vec::new(); sites.len()];
    let mut horizons = Vec::with_capacity(per_rep.len());
    for (h, out) in per_rep {
        horizons.push(h);
        for (i, c) in out {
            contributions[i].push(c);
        }
    }
    Ok(GreensRun { sites: sites.to_vec(), n_replicates, horizons, contributions })
}
