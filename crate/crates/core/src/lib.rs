//! Class balancing for tabular intrusion-detection data and the classifiers,
//! metrics and tests used to measure its effect.

pub mod balance;
pub mod classifiers;
pub mod ctgan;
pub mod data;
pub mod error;
pub mod eval;
pub mod gmm;
pub mod hash;

pub use data::{ClassLabel, FeatureTable};
pub use error::{Error, Result};
