//! Survey-weighted imputation methods and a Monte Carlo benchmark harness.

pub mod classical;
pub mod data;
pub mod design;
pub mod error;
pub mod harness;
pub mod imputer;
pub mod linalg;
pub mod nonresponse;
pub mod popgen;
pub mod rng;
pub mod svr;
pub mod trees;

pub use data::{RespondentData, Rows};
pub use error::{Error, Result};
