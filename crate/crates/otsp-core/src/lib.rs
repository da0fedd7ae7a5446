//! Solver library for the ordered traveling salesperson problem (OTSP):
//! metric TSP where prescribed vertices must appear on the tour in a given
//! cyclic order, plus the extension to independent precedence chains.
//!
//! The pipeline solves an exact LP relaxation built from per-leg stroll
//! polytopes with lazy cut separation, decomposes each fractional stroll
//! into a convex combination of connecting trees, samples or
//! deterministically selects one tree per leg, connects leftover vertices,
//! corrects parity with a minimum join, and shortcuts the resulting
//! Eulerian multigraph to an order-respecting tour. All polyhedral
//! arithmetic is exact rational, so the certified ratio bounds are sound.

pub mod decompose;
pub mod error;
pub mod instance;
pub mod lp;
pub mod maxflow;
pub mod rat;

pub use error::{Error, Result};
pub use instance::format::Document;
pub use instance::{
    generate, generate_chains, ChainInstance, CostMatrix, GenKind, Instance, OrderConstraint, Tour,
};
pub use rat::Rat;
