//! Normal waves of shielded waveguides with a piecewise-constant dielectric
//! filling, computed from a quartic matrix pencil assembled with linear
//! finite elements, together with analytic reference spectra and discrete
//! checks of the structure of the pencil.

pub mod analysis;
pub mod assembly;
pub mod config;
pub mod eigensolver;
pub mod error;
pub mod mesh;
pub mod oracle;
pub mod output;
pub mod pencil;
pub mod pipeline;
pub mod spaces;

pub use error::{Error, Result};
