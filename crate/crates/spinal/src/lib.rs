//! Spinal-structured branching trees: simulation, spine recovery, and the
//! identifiability criterion.
//!
//! A spinal-structured tree is a Galton-Watson tree with a hidden
//! distinguished lineage: normal nodes reproduce with a birth law `mu`,
//! spine nodes with the tilted law `nu ∝ f·mu`, and each spine node passes
//! the marker to one uniformly chosen child. Observing the tree only up to a
//! horizon `h`, with the marks erased, the questions are which nodes can be
//! typed anyway, which surviving branch is the spine, and how well `mu`, `f`,
//! and `nu` can be read back out.
//!
//! The crate is organized along that pipeline:
//!
//! - [`prob`]: laws on `{0..N}`, tilt weights, counting measures, KL and
//!   Bhattacharyya divergences.
//! - [`tree`]: tree storage, simulators, observation windows, flat and JSON
//!   serialization.
//! - [`spine`]: observed heights, forced-type identification, and the
//!   candidate branches that reach the horizon.
//! - [`estimate`]: the branch selector (maximum KL surprise against the
//!   size-biased law) and the downstream estimators for `mu`, `f`, `nu`.
//! - [`divergence`]: the constrained KL program whose value decides whether
//!   the spine stays recoverable as `h` grows.
//! - [`experiment`]: a deterministic Monte-Carlo harness emitting error
//!   curves as CSV/SVG.
//!
//! The `examples/` directory exercises each stage end to end; the `spinal`
//! binary exposes the same operations as subcommands.

pub mod divergence;
pub mod estimate;
pub mod experiment;
pub mod prob;
pub mod spine;
pub mod tree;

pub use divergence::{criterion, min_divergence, solve, CriterionReport, DivergenceReport};
pub use estimate::{run_pipeline, EstimateBundle};
pub use experiment::{run_experiment, run_to_files, ExperimentConfig};
pub use prob::{Distribution, TransformFn};
pub use spine::{identify, SpineReport};
pub use tree::{simulate_gw, simulate_sst, ObservedTree, Tree};
