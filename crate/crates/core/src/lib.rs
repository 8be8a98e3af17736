//! Non-Markovian quantum Otto cycle on a single bosonic mode coupled to
//! Lorentzian baths.

pub mod error;
pub mod green;
pub mod noise;
pub mod plot;
pub mod quad;
pub mod spectral;
pub mod sweep;
pub mod thermo;
pub mod validate;

pub use error::{Error, Result};
