//! Jets of spatial derivatives recorded on a reverse-mode tape.
//!
//! Forward evaluation propagates (value, gradient, second derivatives) of every
//! intermediate field through the chain rule; the tape then differentiates any
//! scalar built from those components with respect to the trainable parameters.

mod check;
mod jet;
mod params;
mod tape;

pub use check::{fd_check, FdReport};
pub use jet::{sign0, JetOrder, SpatialJet, MIN_RADIUS};
pub use params::{ParamBlock, ParamId, ParamStore};
pub use tape::{Tape, Var};
