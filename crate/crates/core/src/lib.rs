pub mod bound_state;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod modulation;
pub mod smoothness;
pub mod spectral;
pub mod walk;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
