pub mod cli;
pub mod detect;
pub mod error;
pub mod kalman;
pub mod model;
pub mod noiseless;
pub mod obsv;
pub mod pbsat;
pub mod search;

pub use error::{Error, Result};

/// Version tag carried by every JSON and CSV artifact.
pub const SCHEMA_VERSION: u32 = 1;
