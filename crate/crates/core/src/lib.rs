// `!(a < b)` is used on purpose throughout so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bode;
pub mod dobmodels;
pub mod error;
pub mod poly;
pub mod quad;
pub mod rootlocus;
pub mod simulate;
pub mod xfer;

pub use bode::{BodeOptions, BodeReport};
pub use dobmodels::{DobParams, LoopFamily};
pub use error::{Error, Result};
pub use poly::Polynomial;
pub use xfer::{Domain, FrequencyResponse, LoopSet, RationalTF};
