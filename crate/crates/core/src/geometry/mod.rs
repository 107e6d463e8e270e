//! Planes, cones, projections and Grassmannian sampling.

mod cone;
mod plane;

pub use cone::{in_cone, in_cone_diff, Cone};
pub use plane::{dist_to_affine_plane, plane_metric, sample_grassmannian, Plane};

use serde::{Deserialize, Serialize};

/// Open ball B(center, radius).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball<T> {
    pub center: Vec<T>,
    pub radius: T,
}

impl<T> Ball<T> {
    pub fn new(center: Vec<T>, radius: T) -> Self {
        Self { center, radius }
    }
}
