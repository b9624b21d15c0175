pub mod error;
pub mod quad;
pub mod settings;
pub mod spectral;
pub mod specfun;
pub mod surface;
pub mod tau;
pub mod varcheck;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use settings::Tolerances;
