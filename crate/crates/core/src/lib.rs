pub mod agent;
pub mod baselines;
pub mod error;
pub mod market;
pub mod meta;
pub mod nn;
pub mod rewards;
pub mod scenarios;
pub mod simcore;

pub use error::{Error, Result};
