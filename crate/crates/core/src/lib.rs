//! Random split trees.
//!
//! Simulation of the ball-insertion process that generates a split tree
//! (binary and m-ary search trees, tries, ...), the constants governing its
//! depth (`mu`, `sigma2`, `c`), numerical solvers for the associated renewal
//! equations, and the per-build and cross-replication statistics used to
//! check the limit laws at desk scale.

pub mod branching;
pub mod distributions;
mod error;
pub mod experiment;
pub mod families;
pub mod numeric;
pub mod renewal;
pub mod statistics;
pub mod tree;

pub use distributions::{AnalyticConstants, ConstantsMethod, SplitVectorSource};
pub use error::{Error, Result};
pub use families::FamilySpec;
pub use tree::{BuildMode, SplitParams, Tree, Vertex, VertexId};
