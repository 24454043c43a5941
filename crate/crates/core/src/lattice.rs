//! Lattice points, nearest-neighbor directions and transition vectors on Z^d.
//!
//! Directions follow the convention `e_1, ..., e_{2d}` with `e_{i+d} = -e_i`.
//! Internally a [`Direction`] stores the zero-based index, so `Direction(0)`
//! is `e_1` and `Direction(d)` is `e_{d+1} = -e_1`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 6;

/// Absolute tolerance for simplex sums.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("dimension {0} outside 1..={MAX_DIM}")]
    InvalidDimension(usize),
    #[error("transition vector has odd or zero length {0}")]
    BadLength(usize),
    #[error("transition vector entry {index} is {value} (must be a finite non-negative number)")]
    NegativeEntry { index: usize, value: f64 },
    #[error("transition vector sums to {0}, expected 1")]
    NotNormalized(f64),
}

/// A point of Z^d with `d <= MAX_DIM`.
///
/// Unused trailing coordinates are kept at zero so derived equality, ordering
/// and hashing only depend on the active coordinates.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    dim: u8,
    coords: [i64; MAX_DIM],
}

impl Point {
    pub fn origin(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} unsupported");
        Point { dim: dim as u8, coords: [0; MAX_DIM] }
    }

    pub fn new(coords: &[i64]) -> Self {
        let mut p = Point::origin(coords.len());
        p.coords[..coords.len()].copy_from_slice(coords);
        p
    }

    /// The unit vector `e_{dir+1}` in dimension `dim`.
    pub fn unit(dim: usize, dir: Direction) -> Self {
        Point::origin(dim).step(dir)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn get(&self, axis: usize) -> i64 {
        self.coords[axis]
    }

    #[inline]
    pub fn step(&self, dir: Direction) -> Self {
        let d = self.dim as usize;
        let mut p = *self;
        let axis = dir.axis(d);
        p.coords[axis] += dir.sign(d);
        p
    }

    pub fn add(&self, other: &Point) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut p = *self;
        for (a, b) in p.coords.iter_mut().zip(other.coords.iter()) {
            *a += *b;
        }
        p
    }

    pub fn sub(&self, other: &Point) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut p = *self;
        for (a, b) in p.coords.iter_mut().zip(other.coords.iter()) {
            *a -= *b;
        }
        p
    }

    pub fn l1_norm(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).sum()
    }

    pub fn l1_distance(&self, other: &Point) -> i64 {
        self.sub(other).l1_norm()
    }

    /// Inner product with a real vector of length `dim`.
    pub fn dot(&self, u: &[f64]) -> f64 {
        self.coords().iter().zip(u).map(|(&c, &w)| c as f64 * w).sum()
    }

    /// Inner product with the unit vector of a direction.
    pub fn dot_dir(&self, dir: Direction) -> i64 {
        let d = self.dim();
        self.coords[dir.axis(d)] * dir.sign(d)
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(serde::de::Error::custom(format!(
                "point must have 1..={MAX_DIM} coordinates, got {}",
                v.len()
            )));
        }
        Ok(Point::new(&v))
    }
}

/// Nearest-neighbor direction, stored as the zero-based index of `e_1..e_{2d}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Direction(pub usize);

impl Direction {
    /// Direction from the one-based label `i` of `e_i`.
    pub fn from_label(label: usize) -> Self {
        assert!(label >= 1, "direction labels start at 1");
        Direction(label - 1)
    }

    pub fn label(self) -> usize {
        self.0 + 1
    }

    #[inline]
    pub fn axis(self, dim: usize) -> usize {
        self.0 % dim
    }

    #[inline]
    pub fn sign(self, dim: usize) -> i64 {
        if self.0 < dim {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn opposite(self, dim: usize) -> Self {
        Direction((self.0 + dim) % (2 * dim))
    }

    /// The positive direction along `axis`, times `sign`.
    pub fn along(axis: usize, sign: i64, dim: usize) -> Self {
        if sign >= 0 {
            Direction(axis)
        } else {
            Direction(axis + dim)
        }
    }

    pub fn all(dim: usize) -> impl Iterator<Item = Direction> {
        (0..2 * dim).map(Direction)
    }
}

/// Site class of a tagged environment.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Blue,
    Red,
}

/// Probability vector over the `2d` nearest-neighbor steps.
#[derive(Clone, PartialEq, Debug)]
pub struct TransitionVector {
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl TransitionVector {
    pub fn new(probs: Vec<f64>) -> Result<Self, LatticeError> {
        let n = probs.len();
        if n == 0 || !n.is_multiple_of(2) || n / 2 > MAX_DIM {
            return Err(LatticeError::BadLength(n));
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(LatticeError::NegativeEntry { index, value });
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(LatticeError::NotNormalized(total));
        }
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(TransitionVector { probs, cdf })
    }

    /// The vector with all `2d` entries equal to `1/(2d)`.
    pub fn uniform(dim: usize) -> Self {
        let n = 2 * dim;
        TransitionVector::new(vec![1.0 / n as f64; n]).expect("uniform vector is valid")
    }

    pub fn dim(&self) -> usize {
        self.probs.len() / 2
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn prob(&self, dir: Direction) -> f64 {
        self.probs[dir.0]
    }

    /// Inverse-CDF step over the fixed order `e_1..e_{2d}`: the smallest `i`
    /// with `u < F_i`. A `u` beyond the rounded total falls back to the last
    /// direction carrying positive mass.
    #[inline]
    pub fn step_for_uniform(&self, u: f64) -> Direction {
        for (i, &c) in self.cdf.iter().enumerate() {
            if u < c {
                return Direction(i);
            }
        }
        let last = self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        Direction(last)
    }

    pub fn min_entry(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Quenched drift `sum_i xi(e_i) e_i . u`.
    pub fn drift(&self, u: &[f64]) -> f64 {
        let d = self.dim();
        Direction::all(d).map(|dir| self.prob(dir) * dir.sign(d) as f64 * u[dir.axis(d)]).sum()
    }

    /// Local drift vector `(xi_i - xi_{d+i})_{i=1..d}`.
    pub fn drift_vector(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|i| self.probs[i] - self.probs[i + d]).collect()
    }
}

impl Serialize for TransitionVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.probs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for TransitionVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        TransitionVector::new(v).map_err(serde::de::Error::custom)
    }
}

/// Borrowed view of one site of an environment.
#[derive(Clone, Copy, Debug)]
pub struct SiteRef<'a> {
    pub color: Color,
    pub probs: &'a TransitionVector,
}

/// A (tagged) environment on Z^d.
///
/// `Ok(None)` marks a site outside the environment's domain; a walk entering
/// such a site is killed. `Err` is reserved for environments whose lazy
/// construction can fail.
pub trait Environment: Sync {
    fn dim(&self) -> usize;

    fn site(&self, x: &Point) -> Result<Option<SiteRef<'_>>, crate::env::EnvError>;

    fn color(&self, x: &Point) -> Result<Option<Color>, crate::env::EnvError> {
        Ok(self.site(x)?.map(|s| s.color))
    }
}

impl<E: Environment + ?Sized> Environment for &E {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn site(&self, x: &Point) -> Result<Option<SiteRef<'_>>, crate::env::EnvError> {
        (**self).site(x)
    }
}

/// One step of the quenched chain: the next position, or `None` if the walk
/// is killed at `x` (site outside the environment).
#[inline]
pub fn next_position<E: Environment + ?Sized>(
    env: &E,
    x: &Point,
    u: f64,
) -> Result<Option<Point>, crate::env::EnvError> {
    Ok(env.site(x)?.map(|s| x.step(s.probs.step_for_uniform(u))))
}
