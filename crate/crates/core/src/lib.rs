#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod linalg;
pub mod optim;
pub mod polytope;
pub mod model;
pub mod reach;
pub mod certify;
pub mod runtime;
pub mod synth;

pub use error::{Error, Result};
