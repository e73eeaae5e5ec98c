pub mod baselines;
pub mod boolean;
pub mod error;
pub mod experiments;
pub mod latent_data;
pub mod linalg;
pub mod network;
pub mod quadrature;
pub mod rng;
pub mod theory;
pub mod training;

pub use error::{Error, Result};
