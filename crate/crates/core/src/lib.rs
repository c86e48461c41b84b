//! Analytics over tweets that share YouTube videos.
// Guards such as `!(x > 0.0)` are written that way on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accounts;
pub mod cluster;
pub mod error;
pub mod ingest;
pub mod lags;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod popularity;
pub mod profiles;
pub mod regression;
pub mod reports;
pub mod stats;
pub mod synth;
pub mod videometrics;

pub use error::{Error, Result};
