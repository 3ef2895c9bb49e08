use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{cartesian, BoxDomain, GeometryError};
use crate::hexfloat::{hex_f64, hex_vec};

/// Lattice points `anchor + eta * k` (integer `k`) whose closed sup-norm
/// balls of radius `eta` cover the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaGrid {
    eta: f64,
    anchor: Vec<f64>,
    offsets: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
    domain: BoxDomain,
}

/// On-disk form of an [`EtaGrid`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    #[serde(with = "hex_f64")]
    pub eta: f64,
    #[serde(with = "hex_vec")]
    pub anchor: Vec<f64>,
    pub dimension: usize,
    pub offsets: Vec<Vec<i64>>,
    pub domain: BoxDomain,
}

/// Builds the deterministic grid for a box: per axis `k = ceil(width/eta)`
/// points at spacing `eta`, centered in the axis.
pub fn build_eta_grid(domain: &BoxDomain, eta: f64) -> Result<EtaGrid, GeometryError> {
    if !eta.is_finite() || eta <= 0.0 {
        return Err(GeometryError::NonPositiveEta(eta));
    }
    let n = domain.dim();
    let mut anchor = Vec::with_capacity(n);
    let mut axes = Vec::with_capacity(n);
    for i in 0..n {
        let width = domain.width(i);
        let count = (width / eta).ceil().max(1.0);
        if count > 1e7 {
            return Err(GeometryError::InvalidBox(format!(
                "axis {i} would need {count} grid points"
            )));
        }
        let count = count as i64;
        let span = (count - 1) as f64 * eta;
        anchor.push(domain.lower()[i] + 0.5 * (width - span).max(0.0));
        axes.push((0..count).collect::<Vec<i64>>());
    }
    let offsets = cartesian(&axes);
    let grid = EtaGrid::assemble(domain.clone(), eta, anchor, offsets);
    if !grid.covers() {
        return Err(GeometryError::CoverageInfeasible);
    }
    Ok(grid)
}

impl EtaGrid {
    fn assemble(domain: BoxDomain, eta: f64, anchor: Vec<f64>, mut offsets: Vec<Vec<i64>>) -> Self {
        offsets.sort();
        offsets.dedup();
        let index = offsets
            .iter()
            .enumerate()
            .map(|(i, o)| (o.clone(), i))
            .collect();
        EtaGrid {
            eta,
            anchor,
            offsets,
            index,
            domain,
        }
    }

    /// Validating constructor for grids read from files or built by hand.
    pub fn from_parts(
        domain: BoxDomain,
        eta: f64,
        anchor: Vec<f64>,
        offsets: Vec<Vec<i64>>,
    ) -> Result<Self, GeometryError> {
        if !eta.is_finite() || eta <= 0.0 {
            return Err(GeometryError::NonPositiveEta(eta));
        }
        let n = domain.dim();
        if anchor.len() != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                got: anchor.len(),
            });
        }
        if anchor.iter().any(|a| !a.is_finite()) {
            return Err(GeometryError::InvalidBox("non-finite anchor".into()));
        }
        if let Some(bad) = offsets.iter().find(|o| o.len() != n) {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        // keep coordinates well inside the exactly representable integer range
        if offsets.iter().flatten().any(|k| k.unsigned_abs() > 1 << 40) {
            return Err(GeometryError::InvalidBox("grid offset out of range".into()));
        }
        let grid = EtaGrid::assemble(domain, eta, anchor, offsets);
        let tol = 1e-12 * (1.0 + grid.domain.extent());
        for o in &grid.offsets {
            if !grid.domain.contains_within(&grid.point_at(o), tol) {
                return Err(GeometryError::PointOutsideDomain(o.clone()));
            }
        }
        if grid.offsets.is_empty() || !grid.covers() {
            return Err(GeometryError::CoverageInfeasible);
        }
        Ok(grid)
    }

    pub fn dimension(&self) -> usize {
        self.anchor.len()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Integer offsets of the grid points, sorted lexicographically.
    pub fn offsets(&self) -> &[Vec<i64>] {
        &self.offsets
    }

    pub fn index_of(&self, offset: &[i64]) -> Option<usize> {
        self.index.get(offset).copied()
    }

    pub fn contains_offset(&self, offset: &[i64]) -> bool {
        self.index.contains_key(offset)
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.point_at(&self.offsets[i])
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Coordinates of any lattice offset, on the grid or not.
    pub fn point_at(&self, offset: &[i64]) -> Vec<f64> {
        self.anchor
            .iter()
            .zip(offset)
            .map(|(a, k)| a + self.eta * *k as f64)
            .collect()
    }

    /// Lattice coordinates `(x - anchor) / eta`.
    pub fn to_lattice(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.anchor)
            .map(|(v, a)| (v - a) / self.eta)
            .collect()
    }

    /// Exact covering test. Every ball boundary lies on a plane
    /// `anchor + j * eta`, so the domain splits into lattice cells and a cell
    /// `[j, j+1]` is covered iff some grid offset lies in `{j, j+1}^n`.
    pub fn covers(&self) -> bool {
        let n = self.dimension();
        let mut axes = Vec::with_capacity(n);
        for i in 0..n {
            let lo = ((self.domain.lower()[i] - self.anchor[i]) / self.eta).floor() as i64;
            let hi = ((self.domain.upper()[i] - self.anchor[i]) / self.eta).ceil() as i64 - 1;
            let hi = hi.max(lo);
            if hi - lo > 1 << 24 {
                return false;
            }
            axes.push((lo..=hi).collect::<Vec<i64>>());
        }
        cartesian(&axes).iter().all(|cell| {
            (0..1usize << n).any(|mask| {
                let probe: Vec<i64> = cell
                    .iter()
                    .enumerate()
                    .map(|(i, j)| j + ((mask >> i) & 1) as i64)
                    .collect();
                self.index.contains_key(&probe)
            })
        })
    }

    /// True when some grid point lies within closed sup-distance `eta` of `x`.
    pub fn ball_covers(&self, x: &[f64]) -> bool {
        let t = self.to_lattice(x);
        let axes: Vec<Vec<i64>> = t
            .iter()
            .map(|v| {
                let f = v.floor() as i64;
                vec![f - 1, f, f + 1, f + 2]
            })
            .collect();
        cartesian(&axes).iter().any(|o| {
            self.contains_offset(o)
                && o.iter().zip(&t).all(|(k, v)| (*k as f64 - v).abs() <= 1.0 + 1e-12)
        })
    }

    pub fn to_file(&self) -> GridFile {
        GridFile {
            eta: self.eta,
            anchor: self.anchor.clone(),
            dimension: self.dimension(),
            offsets: self.offsets.clone(),
            domain: self.domain.clone(),
        }
    }

    pub fn from_file(file: GridFile) -> Result<Self, GeometryError> {
        if file.dimension != file.domain.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: file.domain.dim(),
                got: file.dimension,
            });
        }
        EtaGrid::from_parts(file.domain, file.eta, file.anchor, file.offsets)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("grid serializes")
    }

    /// Parses and re-validates a grid file.
    pub fn from_json(text: &str) -> Result<Self, GridParseError> {
        let file: GridFile = serde_json::from_str(text)?;
        Ok(EtaGrid::from_file(file)?)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GridParseError {
    #[error("grid schema: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("grid invariant: {0}")]
    Invariant(#[from] GeometryError),
}
