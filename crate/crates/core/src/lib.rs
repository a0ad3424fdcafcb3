pub mod analysis;
pub mod ensembles;
pub mod error;
pub mod experiment;
pub mod fidelity;
pub mod linalg;
pub mod spacing;

pub use error::{Error, Result};
