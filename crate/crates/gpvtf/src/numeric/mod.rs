//! Matrix arithmetic, dense layer primitives, and the Adam update rule.

mod adam;
mod dense;
mod matrix;

pub use adam::{AdamState, StackAdam};
pub use dense::{xavier_init, Activation, Dense, DenseStack, LayerGrads};
pub use matrix::{sq_dist, Matrix};
