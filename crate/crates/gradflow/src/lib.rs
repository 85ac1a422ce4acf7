//! Decide, for a polynomial germ `f: R^n -> R` with a critical point at the
//! origin, whether the gradient flow `x' = grad f(x)` has infinitely many
//! trajectories converging to the origin, and whether the stable set has
//! non-empty interior.
//!
//! The decision procedure combines certified topological invariants of the
//! regions `{f < 0}` / `{f >= 0}` on small spheres and of the corresponding
//! regions of the initial form on the unit sphere (component counts, Euler
//! characteristics, first Betti numbers), algebraic invariants (quadratic
//! signature, local topological degree, Milnor number), a fixed ladder of
//! sufficient criteria, and an advisory numerical trajectory census.
//!
//! Entry points: [`pipeline::run_pipeline`] for the full analysis, or the
//! per-stage modules ([`poly`], [`mesh`], [`region`], [`degree`], [`milnor`],
//! [`criteria`], [`flow`]) for individual invariants.

pub mod criteria;
pub mod critical;
pub mod degree;
pub mod flow;
pub mod interval;
pub mod mesh;
pub mod milnor;
pub mod parse;
pub mod pipeline;
pub mod plots;
pub mod poly;
pub mod region;
pub mod report;

pub use pipeline::{run_pipeline, PipelineError};
pub use poly::{
    compose, quadratic_signature, InitialForm, PolyMapGerm, Polynomial, QuadraticSignature,
};
pub use report::{Report, RunConfig};
