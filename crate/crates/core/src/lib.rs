pub mod circuit;
pub mod clickstats;
pub mod engine;
pub mod error;
pub mod rfcal;
pub mod thermal;

pub use error::{Error, Result};
