pub mod align;
pub mod augcodec;
pub mod cli;
pub mod corpus;
pub mod autodiff;
pub mod error;
pub mod flatfile;
pub mod masking;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
