//! Uniform hyper-rectangular grid over a bounded workspace: flat cell
//! indexing, centroid reference points, the decomposition diameter, and exact
//! ball-cell intersection queries.

use crate::linalg::norm;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DecompositionError {
    #[error("workspace axis {axis}: lower {lower} must be strictly below upper {upper}")]
    EmptyAxis { axis: usize, lower: f64, upper: f64 },
    #[error("axis {axis}: cells_per_axis must be positive")]
    ZeroCells { axis: usize },
    #[error("lower/upper/cells_per_axis lengths disagree: {0}, {1}, {2}")]
    DimensionMismatch(usize, usize, usize),
    #[error("workspace coordinates must be finite")]
    NonFinite,
    #[error("total cell count overflows")]
    TooManyCells,
    #[error("cell index {index} out of range for {count} cells")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("point coordinate {value} on axis {axis} lies outside the workspace [{lower}, {upper}]")]
    PointOutsideWorkspace {
        axis: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("point has {got} coordinates, workspace has {expected}")]
    PointDimension { got: usize, expected: usize },
}

/// A uniform grid decomposition of the box [lower, upper]. Flat cell indices
/// run row-major with axis 0 fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells_per_axis: Vec<usize>,
    cell_side: Vec<f64>,
}

impl Decomposition {
    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        cells_per_axis: Vec<usize>,
    ) -> Result<Self, DecompositionError> {
        if lower.len() != upper.len() || lower.len() != cells_per_axis.len() {
            return Err(DecompositionError::DimensionMismatch(
                lower.len(),
                upper.len(),
                cells_per_axis.len(),
            ));
        }
        if lower.iter().chain(&upper).any(|v| !v.is_finite()) {
            return Err(DecompositionError::NonFinite);
        }
        let mut total: usize = 1;
        for (axis, ((&lo, &hi), &k)) in lower.iter().zip(&upper).zip(&cells_per_axis).enumerate() {
            if !(lo < hi) {
                return Err(DecompositionError::EmptyAxis {
                    axis,
                    lower: lo,
                    upper: hi,
                });
            }
            if k == 0 {
                return Err(DecompositionError::ZeroCells { axis });
            }
            total = total
                .checked_mul(k)
                .ok_or(DecompositionError::TooManyCells)?;
        }
        let cell_side = lower
            .iter()
            .zip(&upper)
            .zip(&cells_per_axis)
            .map(|((&lo, &hi), &k)| (hi - lo) / k as f64)
            .collect();
        Ok(Decomposition {
            lower,
            upper,
            cells_per_axis,
            cell_side,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells_per_axis
    }

    pub fn cell_side(&self) -> &[f64] {
        &self.cell_side
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_axis.iter().product()
    }

    /// Decomposition diameter: every cell fits in a closed ball of this
    /// diameter, and for a box the minimal such diameter is its diagonal.
    pub fn d_max(&self) -> f64 {
        norm(&self.cell_side)
    }

    fn check_index(&self, l: usize) -> Result<(), DecompositionError> {
        if l >= self.cell_count() {
            Err(DecompositionError::IndexOutOfRange {
                index: l,
                count: self.cell_count(),
            })
        } else {
            Ok(())
        }
    }

    pub fn axis_coords(&self, l: usize) -> Result<Vec<usize>, DecompositionError> {
        self.check_index(l)?;
        let mut rest = l;
        let coords = self
            .cells_per_axis
            .iter()
            .map(|&k| {
                let c = rest % k;
                rest /= k;
                c
            })
            .collect();
        Ok(coords)
    }

    pub fn flat_index(&self, coords: &[usize]) -> Result<usize, DecompositionError> {
        if coords.len() != self.dim() {
            return Err(DecompositionError::PointDimension {
                got: coords.len(),
                expected: self.dim(),
            });
        }
        let mut flat = 0usize;
        for (&c, &k) in coords.iter().zip(&self.cells_per_axis).rev() {
            if c >= k {
                return Err(DecompositionError::IndexOutOfRange {
                    index: c,
                    count: k,
                });
            }
            flat = flat * k + c;
        }
        Ok(flat)
    }

    /// Closed bounding box [lo, hi] of cell l.
    pub fn cell_bounds(&self, l: usize) -> Result<(Vec<f64>, Vec<f64>), DecompositionError> {
        let coords = self.axis_coords(l)?;
        let lo: Vec<f64> = coords
            .iter()
            .zip(&self.lower)
            .zip(&self.cell_side)
            .map(|((&c, &lower), &side)| lower + c as f64 * side)
            .collect();
        let hi: Vec<f64> = lo.iter().zip(&self.cell_side).map(|(&a, &s)| a + s).collect();
        Ok((lo, hi))
    }

    /// Cell centroid; its distance to any point of the cell is at most
    /// d_max / 2, which is what the feedback design requires of reference
    /// points.
    pub fn reference_point(&self, l: usize) -> Result<Vec<f64>, DecompositionError> {
        let (lo, hi) = self.cell_bounds(l)?;
        Ok(lo.iter().zip(&hi).map(|(&a, &b)| 0.5 * (a + b)).collect())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((&v, &lo), &hi)| v >= lo && v <= hi)
    }

    /// Cell membership with the half-open convention [lo, lo + side) per
    /// axis; the top workspace boundary maps into the last cell.
    pub fn locate(&self, x: &[f64]) -> Result<usize, DecompositionError> {
        if x.len() != self.dim() {
            return Err(DecompositionError::PointDimension {
                got: x.len(),
                expected: self.dim(),
            });
        }
        let mut coords = Vec::with_capacity(self.dim());
        for (axis, &v) in x.iter().enumerate() {
            let (lo, hi) = (self.lower[axis], self.upper[axis]);
            if !(v >= lo && v <= hi) {
                return Err(DecompositionError::PointOutsideWorkspace {
                    axis,
                    value: v,
                    lower: lo,
                    upper: hi,
                });
            }
            let k = self.cells_per_axis[axis];
            let idx = (((v - lo) / self.cell_side[axis]).floor() as usize).min(k - 1);
            coords.push(idx);
        }
        self.flat_index(&coords)
    }

    /// Squared distance from point c to the closed box of cell coords
    /// (per-axis clamped offsets).
    fn box_dist_sq(&self, coords: &[usize], c: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (axis, &ci) in coords.iter().enumerate() {
            let lo = self.lower[axis] + ci as f64 * self.cell_side[axis];
            let hi = lo + self.cell_side[axis];
            let v = c[axis];
            let off = if v < lo {
                lo - v
            } else if v > hi {
                v - hi
            } else {
                0.0
            };
            acc += off * off;
        }
        acc
    }

    /// Exactly the cells whose closed box has min-distance <= r from c
    /// (i.e. cells meeting the closed ball B(c; r)). Sorted ascending.
    pub fn cells_intersecting_ball(&self, c: &[f64], r: f64) -> Vec<usize> {
        assert_eq!(c.len(), self.dim(), "ball center dimension mismatch");
        assert!(r >= 0.0, "ball radius must be non-negative");
        // candidate window per axis, widened by one cell so the exact
        // clamped-distance test is the only arbiter near tangency
        let mut lo_idx = Vec::with_capacity(self.dim());
        let mut hi_idx = Vec::with_capacity(self.dim());
        for axis in 0..self.dim() {
            let k = self.cells_per_axis[axis] as isize;
            let side = self.cell_side[axis];
            let lo_f = ((c[axis] - r - self.lower[axis]) / side).floor() as isize - 1;
            let hi_f = ((c[axis] + r - self.lower[axis]) / side).floor() as isize + 1;
            if hi_f < 0 || lo_f > k - 1 {
                return Vec::new();
            }
            lo_idx.push(lo_f.max(0) as usize);
            hi_idx.push(hi_f.min(k - 1) as usize);
        }
        let r_sq = r * r;
        let mut out = Vec::new();
        let mut coords = lo_idx.clone();
        loop {
            if self.box_dist_sq(&coords, c) <= r_sq {
                out.push(self.flat_index(&coords).expect("coords in range"));
            }
            // odometer increment over the candidate window
            let mut axis = 0;
            loop {
                if axis == self.dim() {
                    out.sort_unstable();
                    return out;
                }
                if coords[axis] < hi_idx[axis] {
                    coords[axis] += 1;
                    break;
                }
                coords[axis] = lo_idx[axis];
                axis += 1;
            }
        }
    }

    /// True when the closed ball B(c; r) is not fully contained in the
    /// workspace box, i.e. part of the reachable set falls outside the
    /// decomposed region.
    pub fn ball_exits_workspace(&self, c: &[f64], r: f64) -> bool {
        c.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .any(|((&v, &lo), &hi)| v - r < lo || v + r > hi)
    }
}
