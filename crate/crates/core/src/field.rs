//! Nodal fields on a [`Grid2`].

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::Grid2;

/// What a field's values stand for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldMeaning {
    /// The p-capacitary potential `v_p`, equal to 1 on the obstacle.
    Potential,
    /// `u_p = (1 − p) log v_p`, the approximate arrival time of the flow.
    ArrivalTime,
    /// An approximation of the `p → 1` limit of the arrival time.
    LimitArrivalTime,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid2,
    pub values: Vec<f64>,
    pub meaning: FieldMeaning,
}

impl ScalarField {
    pub fn new(grid: Grid2, values: Vec<f64>, meaning: FieldMeaning) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        Ok(Self { grid, values, meaning })
    }

    pub fn from_fn(grid: Grid2, meaning: FieldMeaning, f: impl FnMut([f64; 2]) -> f64) -> Self {
        Self { grid, values: grid.sample(f), meaning }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Bilinear interpolation; points outside the box are clamped.
    pub fn interpolate(&self, x: [f64; 2]) -> f64 {
        let g = &self.grid;
        let fx = ((x[0] - g.origin[0]) / g.h).clamp(0.0, (g.nx - 1) as f64);
        let fy = ((x[1] - g.origin[1]) / g.h).clamp(0.0, (g.ny - 1) as f64);
        let i = (libm::floor(fx) as usize).min(g.nx - 2);
        let j = (libm::floor(fy) as usize).min(g.ny - 2);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let v = |a, b| self.at(a, b);
        (1.0 - tx) * (1.0 - ty) * v(i, j)
            + tx * (1.0 - ty) * v(i + 1, j)
            + (1.0 - tx) * ty * v(i, j + 1)
            + tx * ty * v(i + 1, j + 1)
    }
}
