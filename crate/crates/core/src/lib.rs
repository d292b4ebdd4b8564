//! Helmholtz transmission between periodic half-planes whose joint structure along
//! the interface is quasiperiodic, solved by lifting to a periodic problem in one
//! more dimension.

pub mod cli;
pub mod error;
pub mod fem2d;
pub mod halfguide;
pub mod linalg;
pub mod media;
pub mod oracle3d;
pub mod quasi2d;
pub mod reference;
pub mod transmission;

pub use error::{Error, Result};
