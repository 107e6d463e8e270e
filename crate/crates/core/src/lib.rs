//! Conical energies and quantitative rectifiability diagnostics for finite
//! weighted point clouds.
//!
//! Every numeric routine is generic over the scalar type through [`Real`];
//! the `*64` / `*32` aliases fix the precision.

pub mod corona;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod measure;
pub mod scalar;
pub mod sio;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{Cone, Plane};
pub use measure::DiscreteMeasure;
pub use scalar::Real;

pub type Plane64 = Plane<f64>;
pub type Plane32 = Plane<f32>;
pub type Cone64 = Cone<f64>;
pub type Measure64 = DiscreteMeasure<f64>;
pub type Measure32 = DiscreteMeasure<f32>;
