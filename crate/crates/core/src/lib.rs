//! Regularity-conforming neural networks for elliptic transmission problems.
//!
//! The crate builds scalar fields whose architecture encodes the known
//! regularity of the solution: `|phi|`-weighted terms reproduce normal-gradient
//! jumps across material interfaces, and `eta(r) r^lambda phi(x/r)` units
//! reproduce power singularities at re-entrant corners and material vertices.
//! Fields are trained with strong-form (PINNs-style) or H^1-fit losses whose
//! spatial derivatives come from second-order jets on a reverse-mode tape.

// `!(x >= y)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod architectures;
pub mod autodiff;
pub mod checkpoint;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod network;
pub mod optimizer;
pub mod problems;

pub use architectures::{Field, FieldKind, SideSpec};
pub use checkpoint::{load as load_checkpoint, save as save_checkpoint};
pub use autodiff::{JetOrder, ParamStore, SpatialJet, Tape, Var};
pub use error::{Error, Result};
pub use geometry::{Cutoff, Point, Rng};
pub use losses::{Batch, Evaluate, ExactSolution, Loss, LossKind, LossValue, LossWeights};
pub use metrics::{ErrorReport, GridSpec};
pub use optimizer::{Adam, LrSchedule};
pub use network::{Activation, Mlp};
pub use problems::{Problem, ProblemKind, SturmLiouvilleSolution};
