// Validation is written as `!(x > 0.0)` so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod examples;
pub mod fit;
pub mod forms;
pub mod gelfand;
pub mod io;
pub mod linalg;
pub mod propagator;
pub mod properties;
pub mod quadrature;

mod par;

pub use error::{Error, Result};
pub use forms::{check_dini, Descriptors, DiniReport, Modulus, NonautonomousForm};
pub use gelfand::{GelfandTriple, Space};
pub use propagator::{propagate, Propagator, PropagatorEval, Subdivision};

#[cfg(test)]
pub(crate) mod testutil;
