//! Dense arrays, differentiable layers, loss primitives and Adam.
//!
//! Every layer caches what its backward pass needs and accumulates parameter
//! gradients into its [`ParamSlot`]s. Correctness of the hand-written rules is
//! established by [`grad_check`] against central finite differences.

mod activations;
mod adam;
mod affine;
mod array;
mod conv;
mod gradcheck;
pub mod losses;
mod lstm;
mod param;

pub use activations::{log_softmax, sigmoid, softmax, tanh};
pub use adam::{adam_step, AdamHyper};
pub use affine::{affine, Affine};
pub use array::Array2;
pub use conv::TemporalConv;
pub use gradcheck::{grad_check, relative_error, GradReport, SlotCheck, REL_ERROR_FLOOR};
pub use lstm::{BiLstm, BiLstmTrace, Lstm, LstmStepCache, LstmTrace};
pub use param::{ParamSlot, Parameterized};
