//! Numerical core for weak inverse anisotropic mean curvature flow.
//!
//! The flow is approximated through the Finsler p-Laplacian: the exterior
//! p-capacitary potential `v_p` of an obstacle is computed by convex energy
//! minimization on a uniform grid, and `u_p = (1 − p) log v_p` converges to
//! the weak flow as `p → 1⁺`. Everything here is `no_std` with `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod contour;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod flow;
pub mod grid;
pub mod math;
pub mod mesh;
pub mod norm;
pub mod small;
pub mod solver;
pub mod stencil;
pub mod wulff;

pub use error::{Error, Result};
pub use field::{FieldMeaning, ScalarField};
pub use grid::{Grid2, Grid3, GridDomain, NodeKind, Obstacle, Polygon};
pub use mesh::BoundaryFit;
pub use norm::{CustomNorm, MinkowskiNorm, NormKind, PolarMode, PolarNorm};
pub use solver::{OuterBc, SolveReport, SolverConfig};
pub use wulff::{Contour, Facet, WulffShape};
