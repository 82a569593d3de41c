//! Numerical study of the tangency locus of the Hénon family near a = 0.

pub mod bottcher;
pub mod error;
pub mod escape;
pub mod henon;
pub mod jet;
pub mod locus;
pub mod par;
pub mod poly;
pub mod topology;
pub mod verify;

pub use error::{Error, Result};
pub use jet::{Jet, C64};
