//! Directed red clusters generated by the step set `S`, their boundaries,
//! and exhaustive enumeration of the finite sets such clusters can take.

use std::collections::{HashSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::env::EnvError;
use crate::lattice::{Color, Direction, Environment, Point, MAX_DIM};

/// Default cap on live-environment cluster sizes.
pub const DEFAULT_SIZE_CAP: usize = 10_000;
/// Largest number of sets an enumeration level may hold.
pub const ANIMAL_LIMIT: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("dimension {0} outside 2..={MAX_DIM}")]
    InvalidDimension(usize),
    #[error("direction labels eta = {eta}, theta = {theta} are not orthogonal labels in 1..=2d")]
    InvalidDirections { eta: usize, theta: usize },
    #[error("{0} is not reachable from the origin by S-steps inside the set")]
    NotSConnected(Point),
    #[error("enumeration level {n} exceeds {limit} sets")]
    FeasibilityExceeded { n: usize, limit: usize },
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// The `2d` cluster steps, after relabeling axes so the two red-elliptic
/// directions play the roles of `e_{2d-1}` and `e_{2d}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepSet {
    pub d: usize,
    pub eta: usize,
    pub theta: usize,
    pub steps: Vec<Point>,
    /// `relabel[k]` is the actual direction playing canonical `e_{k+1}`.
    pub relabel: Vec<Direction>,
}

/// Canonical step set with `eta = 2d - 1`, `theta = 2d`.
pub fn step_set(d: usize) -> Result<StepSet, ClusterError> {
    StepSet::for_directions(d, 2 * d - 1, 2 * d)
}

impl StepSet {
    pub fn for_directions(d: usize, eta: usize, theta: usize) -> Result<Self, ClusterError> {
        if !(2..=MAX_DIM).contains(&d) {
            return Err(ClusterError::InvalidDimension(d));
        }
        let bad = || ClusterError::InvalidDirections { eta, theta };
        if !(1..=2 * d).contains(&eta) || !(1..=2 * d).contains(&theta) {
            return Err(bad());
        }
        let (de, dt) = (Direction::from_label(eta), Direction::from_label(theta));
        if de.axis(d) == dt.axis(d) {
            return Err(bad());
        }
        // canonical +e_{d-1} and +e_d are the reverses of e_eta and e_theta
        let mut positive = vec![Direction(0); d];
        positive[d - 2] = de.opposite(d);
        positive[d - 1] = dt.opposite(d);
        let mut free = (0..d).filter(|&a| a != de.axis(d) && a != dt.axis(d));
        for slot in positive.iter_mut().take(d - 2) {
            *slot = Direction(free.next().expect("d - 2 free axes"));
        }
        let relabel: Vec<Direction> =
            (0..2 * d).map(|k| if k < d { positive[k] } else { positive[k - d].opposite(d) }).collect();
        let unit = |k: usize| Point::unit(d, relabel[k]);
        let up = unit(d - 1);
        let mut steps = vec![unit(2 * d - 2), up];
        for k in 0..2 * d {
            if k != d - 1 && k != 2 * d - 1 {
                steps.push(up.add(&unit(k)));
            }
        }
        Ok(StepSet { d, eta, theta, steps, relabel })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Actual direction playing canonical `e_d`.
    pub fn up(&self) -> Direction {
        self.relabel[self.d - 1]
    }

    /// Actual direction playing canonical `e_{2d-1}`.
    pub fn eta_direction(&self) -> Direction {
        self.relabel[2 * self.d - 2]
    }

    /// Ordering key `(y . e_d, y . e_{2d-1})` in canonical labels.
    pub fn priority(&self, y: &Point) -> (i64, i64) {
        (y.dot_dir(self.up()), y.dot_dir(self.eta_direction()))
    }

    /// The member of `c` maximizing [`StepSet::priority`].
    pub fn max_site(&self, c: &[Point]) -> Option<Point> {
        c.iter().copied().max_by_key(|y| self.priority(y))
    }

    /// `(C + S) \ C`, sorted.
    pub fn boundary(&self, c: &[Point]) -> Vec<Point> {
        let members: HashSet<Point> = c.iter().copied().collect();
        let mut b: Vec<Point> = c
            .iter()
            .flat_map(|z| self.steps.iter().map(move |s| z.add(s)))
            .filter(|w| !members.contains(w))
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        b.sort();
        b
    }

    /// Members of `c` reachable from `origin` using steps of `S` inside `c`.
    pub fn reachable_within(&self, origin: &Point, c: &[Point]) -> HashSet<Point> {
        let members: HashSet<Point> = c.iter().copied().collect();
        let mut seen = HashSet::new();
        if !members.contains(origin) {
            return seen;
        }
        let mut queue = VecDeque::from([*origin]);
        seen.insert(*origin);
        while let Some(z) = queue.pop_front() {
            for s in &self.steps {
                let w = z.add(s);
                if members.contains(&w) && seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen
    }
}

/// The directed red cluster `C_x` of a site.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterResult {
    pub origin: Point,
    /// Sorted members; empty when `x` is blue.
    pub members: Vec<Point>,
    /// Sorted `(C + S) \ C`.
    pub boundary: Vec<Point>,
    /// Set when growth stopped at the size cap.
    pub truncated: bool,
    /// One-based labels of the actual directions playing canonical `e_1..e_{2d}`.
    pub relabel: Vec<usize>,
}

fn is_red<E: Environment + ?Sized>(env: &E, x: &Point) -> Result<bool, EnvError> {
    // sites outside the environment's domain count as blue
    Ok(env.color(x)? == Some(Color::Red))
}

/// Breadth-first closure of `x` over red sites along `S`.
pub fn compute_cluster<E: Environment + ?Sized>(
    env: &E,
    x: &Point,
    steps: &StepSet,
    size_cap: usize,
) -> Result<ClusterResult, EnvError> {
    assert!(size_cap >= 1);
    let relabel = steps.relabel.iter().map(|d| d.label()).collect();
    if !is_red(env, x)? {
        return Ok(ClusterResult { origin: *x, members: vec![], boundary: vec![], truncated: false, relabel });
    }
    let mut members = HashSet::from([*x]);
    let mut queue = VecDeque::from([*x]);
    let mut truncated = false;
    'grow: while let Some(z) = queue.pop_front() {
        for s in &steps.steps {
            let w = z.add(s);
            if members.contains(&w) || !is_red(env, &w)? {
                continue;
            }
            if members.len() == size_cap {
                truncated = true;
                break 'grow;
            }
            members.insert(w);
            queue.push_back(w);
        }
    }
    let mut members: Vec<Point> = members.into_iter().collect();
    members.sort();
    let boundary = steps.boundary(&members);
    Ok(ClusterResult { origin: *x, members, boundary, truncated, relabel })
}

/// Whether every site of `c` is red and every site of `(C + S) \ C` is blue,
/// i.e. whether `C_origin = c`.
pub fn characterize_event<E: Environment + ?Sized>(
    env: &E,
    origin: &Point,
    c: &[Point],
    steps: &StepSet,
) -> Result<bool, ClusterError> {
    let reach = steps.reachable_within(origin, c);
    if let Some(z) = c.iter().find(|z| !reach.contains(z)) {
        return Err(ClusterError::NotSConnected(*z));
    }
    if c.is_empty() {
        return Err(ClusterError::NotSConnected(*origin));
    }
    for z in c {
        if !is_red(env, z)? {
            return Ok(false);
        }
    }
    for z in steps.boundary(c) {
        if is_red(env, &z)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// All `n`-sets containing the origin whose members are reachable from the
/// origin by `S`-steps inside the set. Each set is sorted; the list is in
/// lexicographic order.
pub fn enumerate_animals(steps: &StepSet, n: usize) -> Result<Vec<Vec<Point>>, ClusterError> {
    assert!(n >= 1);
    let mut level = vec![vec![Point::origin(steps.d)]];
    for size in 2..=n {
        let mut next: Vec<Vec<Point>> = Vec::new();
        for set in &level {
            for z in set {
                for s in &steps.steps {
                    let w = z.add(s);
                    if let Err(pos) = set.binary_search(&w) {
                        let mut grown = Vec::with_capacity(size);
                        grown.extend_from_slice(&set[..pos]);
                        grown.push(w);
                        grown.extend_from_slice(&set[pos..]);
                        next.push(grown);
                    }
                }
            }
            if next.len() > 2 * ANIMAL_LIMIT {
                return Err(ClusterError::FeasibilityExceeded { n: size, limit: ANIMAL_LIMIT });
            }
        }
        next.sort_unstable();
        next.dedup();
        if next.len() > ANIMAL_LIMIT {
            return Err(ClusterError::FeasibilityExceeded { n: size, limit: ANIMAL_LIMIT });
        }
        level = next;
    }
    Ok(level)
}

/// `count(n)` for `n = 1..=n_max`.
pub fn animal_counts(steps: &StepSet, n_max: usize) -> Result<Vec<u64>, ClusterError> {
    (1..=n_max).map(|n| enumerate_animals(steps, n).map(|v| v.len() as u64)).collect()
}

/// `|(C + S) \ C| <= 2d |C|`.
pub fn boundary_size_bound_check(c: &[Point], steps: &StepSet) -> bool {
    steps.boundary(c).len() <= 2 * steps.d * c.len()
}
