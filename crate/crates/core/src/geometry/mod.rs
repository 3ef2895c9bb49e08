//! Grids, interpolation hypercubes and the braid dissection.
//!
//! Grid points are stored as an anchor plus integer offsets scaled by `eta`,
//! so every lattice relation (neighbors, hypercube corners, extra corners) is
//! decided in exact integer arithmetic. Floating point only enters when a
//! point is turned into coordinates.

mod braid;
mod cube;
mod grid;

pub use braid::{
    braid_simplices, locate_simplex, simplex_vertices, sort_permutation, SimplexId,
    DEFAULT_DIMENSION_CAP,
};
pub use cube::{extra_corners, interpolation_hypercubes, ExtraCornerSet, Hypercube};
pub use grid::{build_eta_grid, EtaGrid, GridFile};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hexfloat::hex_vec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("eta must be positive, got {0}")]
    NonPositiveEta(f64),
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("grid points do not cover the domain with closed eta-balls")]
    CoverageInfeasible,
    #[error("grid point {0:?} lies outside the domain")]
    PointOutsideDomain(Vec<i64>),
    #[error("extra corner {0:?} has no grid point within eta")]
    OrphanCorner(Vec<i64>),
    #[error("dimension {n} exceeds the configured cap {cap}")]
    DimensionTooLarge { n: usize, cap: usize },
    #[error("point {0:?} is outside every interpolation hypercube")]
    OutsideDomain(Vec<f64>),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Axis-aligned box `[lower, upper]` with non-empty interior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr", into = "BoxRepr")]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BoxRepr {
    #[serde(with = "hex_vec")]
    lower: Vec<f64>,
    #[serde(with = "hex_vec")]
    upper: Vec<f64>,
}

impl TryFrom<BoxRepr> for BoxDomain {
    type Error = GeometryError;
    fn try_from(r: BoxRepr) -> Result<Self, Self::Error> {
        BoxDomain::new(r.lower, r.upper)
    }
}

impl From<BoxDomain> for BoxRepr {
    fn from(b: BoxDomain) -> Self {
        BoxRepr {
            lower: b.lower,
            upper: b.upper,
        }
    }
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        if lower.is_empty() {
            return Err(GeometryError::InvalidBox("zero-dimensional box".into()));
        }
        if lower.len() != upper.len() {
            return Err(GeometryError::InvalidBox(format!(
                "bound lengths differ ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(GeometryError::InvalidBox(format!(
                    "axis {i}: need finite lower < upper, got [{l}, {u}]"
                )));
            }
        }
        Ok(BoxDomain { lower, upper })
    }

    /// The box `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self, GeometryError> {
        BoxDomain::new(vec![lo; n], vec![hi; n])
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

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn extent(&self) -> f64 {
        extent(self)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_within(x, 0.0)
    }

    pub fn contains_within(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
    }

    /// Cartesian product `self × other`, e.g. `X × U`.
    pub fn product(&self, other: &BoxDomain) -> BoxDomain {
        let mut lower = self.lower.clone();
        lower.extend_from_slice(&other.lower);
        let mut upper = self.upper.clone();
        upper.extend_from_slice(&other.upper);
        BoxDomain { lower, upper }
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    /// Regular lattice with `per_axis` points per coordinate, endpoints included.
    pub fn lattice(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let per_axis = per_axis.max(1);
        let axes: Vec<Vec<f64>> = (0..self.dim())
            .map(|i| {
                if per_axis == 1 {
                    vec![0.5 * (self.lower[i] + self.upper[i])]
                } else {
                    (0..per_axis)
                        .map(|k| {
                            self.lower[i]
                                + self.width(i) * k as f64 / (per_axis - 1) as f64
                        })
                        .collect()
                }
            })
            .collect();
        cartesian(&axes)
    }
}

/// Largest axis width of the box.
pub fn extent(b: &BoxDomain) -> f64 {
    (0..b.dim()).map(|i| b.width(i)).fold(0.0, f64::max)
}

/// Max-norm distance.
pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn cartesian<T: Clone>(axes: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for v in axis {
                let mut p = prefix.clone();
                p.push(v.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extent_examples() {
        assert_eq!(BoxDomain::cube(2, 0.0, 1.0).unwrap().extent(), 1.0);
        assert_eq!(
            BoxDomain::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap().extent(),
            2.0
        );
        assert_eq!(BoxDomain::cube(3, -1.0, 1.0).unwrap().extent(), 2.0);
    }

    #[test]
    fn box_rejects_empty_interior() {
        assert!(BoxDomain::new(vec![0.0], vec![0.0]).is_err());
        assert!(BoxDomain::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(BoxDomain::new(vec![], vec![]).is_err());
        assert!(BoxDomain::new(vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn product_and_lattice() {
        let x = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let u = BoxDomain::cube(1, -2.0, 2.0).unwrap();
        let xu = x.product(&u);
        assert_eq!(xu.dim(), 3);
        assert_eq!(xu.extent(), 4.0);
        let pts = x.lattice(3);
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], vec![-1.0, -1.0]);
        assert_eq!(pts[8], vec![1.0, 1.0]);
    }

    #[test]
    fn box_json_round_trip() {
        let b = BoxDomain::new(vec![0.1, -3.0], vec![0.7, 2.5]).unwrap();
        let text = serde_json::to_string(&b).unwrap();
        let back: BoxDomain = serde_json::from_str(&text).unwrap();
        assert_eq!(b, back);
        let bad = r#"{"lower":["0x1p+0"],"upper":["0x0p+0"]}"#;
        assert!(serde_json::from_str::<BoxDomain>(bad).is_err());
    }
}
