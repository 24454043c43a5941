//! Random walks in i.i.d. two-class (blue/red) random environments on Z^d.
//!
//! The crate covers lazy seeded environments ([`env`]), quenched walk
//! simulation and annealed estimators ([`walk`]), directed red clusters
//! ([`cluster`]), the single-site three-walk coupling ([`coupling`]),
//! closed-form velocity bounds ([`bounds`]) and exact finite-window
//! computations ([`oracle`]) used to cross-check everything else.

pub mod bounds;
pub mod cluster;
pub mod coupling;
pub mod env;
pub mod lattice;
pub mod oracle;
pub mod rng;
pub mod stats;
pub mod walk;

pub use env::{CounterexampleEnv, EnvError, ModelSpec, SiteDistribution, TaggedEnvironment};
pub use lattice::{Color, Direction, Environment, Point, TransitionVector};
