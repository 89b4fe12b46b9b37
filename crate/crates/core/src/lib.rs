//! Numerical laboratory for isoparametric hypersurfaces in spheres.
//!
//! Families are built from their Cartan-Münzner polynomials ([`family`]); the
//! remaining modules sample their level sets, compute shape operators and focal
//! data, and count critical points of spherical distance functions.

pub mod cartan_orbit;
pub mod error;
pub mod export;
pub mod family;
pub mod focal;
pub mod level_set;
pub mod morse;
mod numeric;
pub mod polynomial;
pub mod shape;
pub mod sphere;

pub use error::{Error, Result};
pub use numeric::derive_seed;
