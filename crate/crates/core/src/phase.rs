use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point `x = (p, q)` in `2d`-dimensional phase space.
///
/// Stored contiguously as `[p_1..p_d, q_1..q_d]`; this is also the layout
/// used on disk and by the network evaluation kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PhasePoint {
    coords: Vec<f64>,
}

impl PhasePoint {
    pub fn new(p: &[f64], q: &[f64]) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                got: q.len(),
            });
        }
        let mut coords = Vec::with_capacity(2 * p.len());
        coords.extend_from_slice(p);
        coords.extend_from_slice(q);
        Self::from_vec(coords)
    }

    /// Builds a point from `[p, q]` coordinates. The length must be even and
    /// non-zero and every entry finite.
    pub fn from_vec(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.len() % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "phase point needs an even, non-zero number of coordinates, got {}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "phase point coordinate is not finite: {bad}"
            )));
        }
        Ok(Self { coords })
    }

    /// Convenience constructor for the one-degree-of-freedom systems.
    pub fn from_pq(p: f64, q: f64) -> Self {
        Self { coords: vec![p, q] }
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!(coords.len() % 2 == 0 && !coords.is_empty());
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn p(&self) -> &[f64] {
        &self.coords[..self.dim()]
    }

    pub fn q(&self) -> &[f64] {
        &self.coords[self.dim()..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|v| v.is_finite())
    }

    /// `‖self − other‖∞`.
    pub fn max_abs_diff(&self, other: &PhasePoint) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for PhasePoint {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Self::from_vec(coords)
    }
}

impl From<PhasePoint> for Vec<f64> {
    fn from(x: PhasePoint) -> Self {
        x.coords
    }
}

/// Largest ∞-norm distance between two equally long trajectories.
pub fn max_trajectory_error(a: &[PhasePoint], b: &[PhasePoint]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.max_abs_diff(y))
        .fold(0.0, f64::max)
}
