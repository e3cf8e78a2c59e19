#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cli;
pub mod config;
pub mod error;
pub mod montecarlo;
pub mod optimizer;
pub mod oracle;
pub mod outage;
pub mod par;
pub mod quad;
pub mod specfun;
pub mod thz_channel;

pub use error::{Error, Result};
