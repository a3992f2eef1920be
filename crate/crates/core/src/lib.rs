#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod error;
pub mod experiments;
pub mod fk;
pub mod gradients;
pub mod info;
pub mod io;
pub mod losses;
pub mod observables;
pub mod optimize;
pub mod potentials;
pub mod quadrature;
pub mod rng;
pub mod sde;

pub use error::{Error, Result};
