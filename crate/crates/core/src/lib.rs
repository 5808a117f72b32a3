//! Variational autoencoders for top-n recommendation from implicit feedback:
//! a multinomial model over whole histories, a pairwise ranking model, and a
//! recurrent sequential model, with the data preparation and temporal
//! fold-in/fold-out evaluation needed to compare them.

pub mod autodiff;
mod error;

pub use error::{Error, Result};
pub mod artifact;
pub mod data;
pub mod eval;
pub mod models;
