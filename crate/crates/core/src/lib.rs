pub mod energy;
pub mod error;
pub mod export;
pub mod guidance;
pub mod mesh;
pub mod odeco;
pub mod solver;
pub mod theory;

pub use error::{Error, ErrorKind, Result};
