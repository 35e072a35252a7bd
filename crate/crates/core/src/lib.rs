pub mod error;
pub mod bogokernel;
pub mod fock;
pub mod grid;
pub mod hartree;
pub mod linalg;
pub mod oracle;
pub mod propagate;
pub mod quadgen;
pub mod scattering;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
