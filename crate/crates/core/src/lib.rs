//! Z-critical Kähler and connection operators on model geometries, with
//! numerical verification of the associated moment-map identities.

pub mod bundle;
pub mod charge;
pub mod error;
pub mod kgeom;
pub mod moment;
pub mod zkahler;

pub use error::{Error, Result};
