//! Continuous piecewise-affine interpolation of a controller over the
//! braid-dissected interpolation hypercubes of an eta-grid.
//!
//! The interpolant is parameterized only by its values `omega` on the grid.
//! Corners of interpolation hypercubes that are not grid points take the
//! minimum of `omega` over grid points within sup-distance `eta`. Each braid
//! simplex then carries the unique affine function through its `n + 1`
//! corner values; shared faces see identical corner values, which makes the
//! result continuous across simplexes and hypercubes.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    braid_simplices, interpolation_hypercubes, EtaGrid, ExtraCornerSet, GeometryError,
    GridFile, Hypercube, SimplexId, DEFAULT_DIMENSION_CAP,
};
use crate::hexfloat::{hex_f64, hex_vec, hex_vecs};
use crate::linalg;
use crate::sizing;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CpwaError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("oracle failed at {point:?}: {reason}")]
    OracleFailure { point: Vec<f64>, reason: String },
    #[error("singular interpolation system on simplex {0:?}")]
    SingularSystem(SimplexId),
    #[error("lipschitz budget exceeded: {value} > {bound} on simplex {simplex:?}, output {output}")]
    BudgetExceeded {
        value: f64,
        bound: f64,
        simplex: SimplexId,
        output: usize,
    },
    #[error("discontinuity {jump} > {tol} at {point:?}")]
    DiscontinuityDetected { jump: f64, tol: f64, point: Vec<f64> },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("interpolant schema: {0}")]
    Schema(String),
    #[error("interpolant invariant: {0}")]
    InvariantViolation(String),
}

/// Grid values of each output: `values[j][i]` is output `j` at grid point `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaVector {
    values: Vec<Vec<f64>>,
}

impl OmegaVector {
    pub fn new(values: Vec<Vec<f64>>, grid_len: usize) -> Result<Self, CpwaError> {
        if values.is_empty() {
            return Err(CpwaError::ShapeMismatch("no outputs".into()));
        }
        for (j, row) in values.iter().enumerate() {
            if row.len() != grid_len {
                return Err(CpwaError::ShapeMismatch(format!(
                    "output {j} has {} values for {grid_len} grid points",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(CpwaError::ShapeMismatch(format!(
                    "output {j} holds non-finite value {v}"
                )));
            }
        }
        Ok(OmegaVector { values })
    }

    pub fn outputs(&self) -> usize {
        self.values.len()
    }

    pub fn output(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    pub fn at(&self, grid_index: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[grid_index]).collect()
    }
}

/// Samples `oracle` at every grid point.
pub fn sample_controller<F>(oracle: F, grid: &EtaGrid, m: usize) -> Result<OmegaVector, CpwaError>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    try_sample_controller(|x| Ok(oracle(x)), grid, m)
}

/// Like [`sample_controller`] for oracles that can fail.
pub fn try_sample_controller<F>(mut oracle: F, grid: &EtaGrid, m: usize) -> Result<OmegaVector, CpwaError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, String>,
{
    let mut values = vec![Vec::with_capacity(grid.len()); m];
    for i in 0..grid.len() {
        let x = grid.point(i);
        let u = oracle(&x).map_err(|reason| CpwaError::OracleFailure {
            point: x.clone(),
            reason,
        })?;
        if u.len() != m {
            return Err(CpwaError::OracleFailure {
                point: x,
                reason: format!("expected {m} outputs, got {}", u.len()),
            });
        }
        if let Some(v) = u.iter().find(|v| !v.is_finite()) {
            return Err(CpwaError::OracleFailure {
                point: x,
                reason: format!("non-finite output {v}"),
            });
        }
        for (row, v) in values.iter_mut().zip(u) {
            row.push(v);
        }
    }
    OmegaVector::new(values, grid.len())
}

/// Values assigned to extra corners, per output.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExtraCornerValues {
    values: BTreeMap<Vec<i64>, Vec<f64>>,
}

impl ExtraCornerValues {
    pub fn from_map(values: BTreeMap<Vec<i64>, Vec<f64>>) -> Self {
        ExtraCornerValues { values }
    }

    pub fn get(&self, offset: &[i64]) -> Option<&[f64]> {
        self.values.get(offset).map(|v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i64>, &Vec<f64>)> {
        self.values.iter()
    }
}

/// Each extra corner takes, per output, the minimum of `omega` over its
/// grid neighbors.
pub fn extend_extra_corners(
    omega: &OmegaVector,
    extras: &ExtraCornerSet,
) -> Result<ExtraCornerValues, CpwaError> {
    let mut values = BTreeMap::new();
    for (corner, neighbors) in extras.iter() {
        if neighbors.is_empty() {
            return Err(GeometryError::OrphanCorner(corner.clone()).into());
        }
        let v: Vec<f64> = (0..omega.outputs())
            .map(|j| {
                neighbors
                    .iter()
                    .map(|&i| omega.output(j)[i])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        values.insert(corner.clone(), v);
    }
    Ok(ExtraCornerValues { values })
}

/// Affine function `w . x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    #[serde(with = "hex_vec")]
    pub w: Vec<f64>,
    #[serde(with = "hex_f64")]
    pub b: f64,
}

/// Hashable identity of an affine piece after rounding to `1e-12`.
pub type PieceKey = Vec<i128>;

impl AffinePiece {
    pub fn constant(n: usize, c: f64) -> Self {
        AffinePiece { w: vec![0.0; n], b: c }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b
    }

    /// Lipschitz constant w.r.t. the max-norm on inputs: `sum |w_i|`.
    pub fn dual_norm(&self) -> f64 {
        self.w.iter().map(|v| v.abs()).sum()
    }

    pub fn key(&self) -> PieceKey {
        self.w
            .iter()
            .chain(std::iter::once(&self.b))
            .map(|v| (v * 1e12).round() as i128)
            .collect()
    }
}

/// Fits the affine function through `n + 1` points by solving
/// `[v_t^T 1] [w; b] = value_t`.
pub fn fit_affine(vertices: &[Vec<f64>], values: &[f64]) -> Option<AffinePiece> {
    let n = vertices.first()?.len();
    if vertices.len() != n + 1 || values.len() != n + 1 {
        return None;
    }
    let a: Vec<Vec<f64>> = vertices
        .iter()
        .map(|v| {
            let mut row = v.clone();
            row.push(1.0);
            row
        })
        .collect();
    let sol = linalg::solve(&a, values)?;
    let piece = AffinePiece {
        w: sol[..n].to_vec(),
        b: sol[n],
    };
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let ok = vertices
        .iter()
        .zip(values)
        .all(|(v, y)| (piece.eval(v) - y).abs() <= 1e-9 * scale);
    ok.then_some(piece)
}

/// Affine piece of `simplex` on `grid` interpolating `corner_values`, given in
/// the vertex order of [`SimplexId::vertex_offsets`].
pub fn affine_piece(
    grid: &EtaGrid,
    simplex: &SimplexId,
    corner_values: &[f64],
) -> Result<AffinePiece, CpwaError> {
    let vertices: Vec<Vec<f64>> = simplex
        .vertex_offsets()
        .iter()
        .map(|o| grid.point_at(o))
        .collect();
    fit_affine(&vertices, corner_values).ok_or_else(|| CpwaError::SingularSystem(simplex.clone()))
}

/// How extra-corner values were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtraCornerRule {
    /// Minimum over grid neighbors (the parameterized construction).
    MinOfNeighbors,
    /// Supplied by the caller.
    Explicit,
}

/// Metric report shared by the audits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub metric: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
    pub seed: Option<u64>,
    pub probes: usize,
    pub detail: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CpwaInterpolant {
    grid: EtaGrid,
    cubes: Vec<Hypercube>,
    cube_index: HashMap<Vec<i64>, usize>,
    perms: Vec<Vec<usize>>,
    perm_index: HashMap<Vec<usize>, usize>,
    omega: OmegaVector,
    extras: ExtraCornerSet,
    extra_values: ExtraCornerValues,
    rule: ExtraCornerRule,
    // pieces[j][cube * n! + perm]
    pieces: Vec<Vec<AffinePiece>>,
    k_cont: f64,
}

impl CpwaInterpolant {
    /// Builds the parameterized interpolant with min-rule extra corners.
    pub fn build(grid: EtaGrid, omega: OmegaVector, k_cont: f64) -> Result<Self, CpwaError> {
        let cubes = interpolation_hypercubes(&grid);
        let extras = ExtraCornerSet::from_hypercubes(&grid, &cubes)?;
        let extra_values = extend_extra_corners(&omega, &extras)?;
        Self::assemble(grid, cubes, extras, omega, extra_values, ExtraCornerRule::MinOfNeighbors, k_cont)
    }

    /// Builds with caller-supplied extra-corner values (one entry per extra
    /// corner, `m` values each).
    pub fn build_with_extra_values(
        grid: EtaGrid,
        omega: OmegaVector,
        extra_values: ExtraCornerValues,
        k_cont: f64,
    ) -> Result<Self, CpwaError> {
        let cubes = interpolation_hypercubes(&grid);
        let extras = ExtraCornerSet::from_hypercubes(&grid, &cubes)?;
        for (c, _) in extras.iter() {
            match extra_values.get(c) {
                Some(v) if v.len() == omega.outputs() && v.iter().all(|x| x.is_finite()) => {}
                _ => {
                    return Err(CpwaError::ShapeMismatch(format!(
                        "missing or malformed value for extra corner {c:?}"
                    )))
                }
            }
        }
        if extra_values.len() != extras.len() {
            return Err(CpwaError::ShapeMismatch(format!(
                "{} extra-corner values for {} extra corners",
                extra_values.len(),
                extras.len()
            )));
        }
        Self::assemble(grid, cubes, extras, omega, extra_values, ExtraCornerRule::Explicit, k_cont)
    }

    /// Samples `oracle` at grid points and at extra corners alike. An affine
    /// oracle is then reproduced exactly on the whole hypercube union.
    pub fn build_from_oracle_everywhere<F>(grid: EtaGrid, oracle: F, m: usize, k_cont: f64) -> Result<Self, CpwaError>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let omega = sample_controller(&oracle, &grid, m)?;
        let cubes = interpolation_hypercubes(&grid);
        let extras = ExtraCornerSet::from_hypercubes(&grid, &cubes)?;
        let values = extras
            .iter()
            .map(|(c, _)| (c.clone(), oracle(&grid.point_at(c))))
            .collect();
        Self::build_with_extra_values(grid, omega, ExtraCornerValues::from_map(values), k_cont)
    }

    fn assemble(
        grid: EtaGrid,
        cubes: Vec<Hypercube>,
        extras: ExtraCornerSet,
        omega: OmegaVector,
        extra_values: ExtraCornerValues,
        rule: ExtraCornerRule,
        k_cont: f64,
    ) -> Result<Self, CpwaError> {
        if omega.values.iter().any(|r| r.len() != grid.len()) {
            return Err(CpwaError::ShapeMismatch("omega length differs from grid".into()));
        }
        if !k_cont.is_finite() || k_cont <= 0.0 {
            return Err(CpwaError::ShapeMismatch(format!("K_cont must be positive, got {k_cont}")));
        }
        let n = grid.dimension();
        let perms = braid_simplices(n, DEFAULT_DIMENSION_CAP)?;
        let perm_index = perms.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        let cube_index = cubes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.origin().to_vec(), i))
            .collect();
        let mut interp = CpwaInterpolant {
            grid,
            cubes,
            cube_index,
            perms,
            perm_index,
            omega,
            extras,
            extra_values,
            rule,
            pieces: Vec::new(),
            k_cont,
        };
        interp.pieces = interp.solve_pieces()?;
        Ok(interp)
    }

    fn solve_pieces(&self) -> Result<Vec<Vec<AffinePiece>>, CpwaError> {
        let m = self.omega.outputs();
        let total = self.cubes.len() * self.perms.len();
        let mut pieces = vec![Vec::with_capacity(total); m];
        for cube in &self.cubes {
            for sigma in &self.perms {
                let simplex = SimplexId {
                    cube: cube.origin().to_vec(),
                    sigma: sigma.clone(),
                };
                let offsets = simplex.vertex_offsets();
                for (j, out) in pieces.iter_mut().enumerate() {
                    let values: Vec<f64> = offsets
                        .iter()
                        .map(|o| {
                            self.corner_value(o, j).ok_or_else(|| {
                                CpwaError::InvariantViolation(format!("corner {o:?} has no value"))
                            })
                        })
                        .collect::<Result<_, _>>()?;
                    out.push(affine_piece(&self.grid, &simplex, &values)?);
                }
            }
        }
        Ok(pieces)
    }

    pub fn grid(&self) -> &EtaGrid {
        &self.grid
    }

    pub fn hypercubes(&self) -> &[Hypercube] {
        &self.cubes
    }

    pub fn omega(&self) -> &OmegaVector {
        &self.omega
    }

    pub fn extra_corners(&self) -> &ExtraCornerSet {
        &self.extras
    }

    pub fn extra_values(&self) -> &ExtraCornerValues {
        &self.extra_values
    }

    pub fn rule(&self) -> ExtraCornerRule {
        self.rule
    }

    pub fn k_cont(&self) -> f64 {
        self.k_cont
    }

    pub fn input_dim(&self) -> usize {
        self.grid.dimension()
    }

    pub fn outputs(&self) -> usize {
        self.omega.outputs()
    }

    /// Interpolation datum at a lattice offset (grid point or extra corner).
    pub fn corner_value(&self, offset: &[i64], j: usize) -> Option<f64> {
        match self.grid.index_of(offset) {
            Some(i) => Some(self.omega.output(j)[i]),
            None => self.extra_values.get(offset).map(|v| v[j]),
        }
    }

    pub fn simplex_count(&self) -> usize {
        self.cubes.len() * self.perms.len()
    }

    pub fn simplex(&self, idx: usize) -> SimplexId {
        let np = self.perms.len();
        SimplexId {
            cube: self.cubes[idx / np].origin().to_vec(),
            sigma: self.perms[idx % np].clone(),
        }
    }

    pub fn simplex_index(&self, s: &SimplexId) -> Option<usize> {
        let c = self.cube_index.get(&s.cube)?;
        let p = self.perm_index.get(&s.sigma)?;
        Some(c * self.perms.len() + p)
    }

    pub fn pieces(&self, j: usize) -> &[AffinePiece] {
        &self.pieces[j]
    }

    /// World coordinates of a simplex's vertices.
    pub fn simplex_vertices_world(&self, idx: usize) -> Vec<Vec<f64>> {
        self.simplex(idx)
            .vertex_offsets()
            .iter()
            .map(|o| self.grid.point_at(o))
            .collect()
    }

    /// Index of the simplex holding `x` under the lexicographic tie rule.
    pub fn locate(&self, x: &[f64]) -> Result<usize, CpwaError> {
        let s = crate::geometry::locate_simplex(x, &self.grid)?;
        self.simplex_index(&s)
            .ok_or_else(|| GeometryError::OutsideDomain(x.to_vec()).into())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, CpwaError> {
        let idx = self.locate(x)?;
        Ok(self.pieces.iter().map(|p| p[idx].eval(x)).collect())
    }

    pub fn eval_output(&self, x: &[f64], j: usize) -> Result<f64, CpwaError> {
        let idx = self.locate(x)?;
        Ok(self.pieces[j][idx].eval(x))
    }

    /// Distinct affine pieces per output.
    pub fn region_count(&self) -> Vec<usize> {
        self.pieces
            .iter()
            .map(|ps| {
                let mut keys: Vec<PieceKey> = ps.iter().map(AffinePiece::key).collect();
                keys.sort();
                keys.dedup();
                keys.len()
            })
            .collect()
    }

    /// Worst-case region count `n! * ceil(ext / eta + 2)^n` for this grid.
    pub fn region_bound(&self) -> BigUint {
        sizing::controller_size(
            self.grid.dimension(),
            self.grid.domain().extent(),
            self.grid.eta(),
        )
        .expect("grid parameters are valid")
    }

    /// Largest piece gradient dual norm, against `3 K_cont`.
    pub fn lipschitz_audit(&self) -> Result<AuditReport, CpwaError> {
        let (value, output, idx) = self.max_gradient_norm();
        let bound = 3.0 * self.k_cont;
        if value > bound + 1e-9 {
            return Err(CpwaError::BudgetExceeded {
                value,
                bound,
                simplex: self.simplex(idx),
                output,
            });
        }
        Ok(AuditReport {
            metric: "lipschitz".into(),
            value,
            bound,
            pass: true,
            seed: None,
            probes: self.simplex_count(),
            detail: Some(format!("max sum|w_i| over {} pieces per output", self.simplex_count())),
        })
    }

    /// `(max dual norm, output, simplex index)`.
    pub fn max_gradient_norm(&self) -> (f64, usize, usize) {
        let mut best = (0.0, 0, 0);
        for (j, ps) in self.pieces.iter().enumerate() {
            for (i, p) in ps.iter().enumerate() {
                let v = p.dual_norm();
                if v > best.0 {
                    best = (v, j, i);
                }
            }
        }
        best
    }

    /// Samples every simplex facet and compares all pieces whose simplexes
    /// contain the sample. Returns the largest disagreement.
    pub fn continuity_audit(&self, samples_per_face: usize, tol: f64, seed: u64) -> Result<AuditReport, CpwaError> {
        let n = self.input_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples: Vec<Vec<f64>> = Vec::new();
        for idx in 0..self.simplex_count() {
            let verts = self.simplex(idx).vertex_offsets();
            for drop in 0..=n {
                let facet: Vec<Vec<f64>> = verts
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != drop)
                    .map(|(_, v)| v.iter().map(|&c| c as f64).collect())
                    .collect();
                for s in 0..=samples_per_face {
                    let mut weights: Vec<f64> = if s == 0 {
                        vec![1.0; facet.len()]
                    } else {
                        (0..facet.len()).map(|_| rng.gen_range(0.0..1.0)).collect()
                    };
                    let total: f64 = weights.iter().sum();
                    weights.iter_mut().for_each(|w| *w /= total);
                    let t: Vec<f64> = (0..n)
                        .map(|i| facet.iter().zip(&weights).map(|(v, w)| v[i] * w).sum())
                        .collect();
                    samples.push(t);
                }
            }
        }
        let eta = self.grid.eta();
        let anchor = self.grid.anchor().to_vec();
        let results: Vec<(f64, Vec<f64>)> = samples
            .par_iter()
            .map(|t| {
                let x: Vec<f64> = t.iter().zip(&anchor).map(|(v, a)| a + eta * v).collect();
                (self.jump_at(t, &x), x)
            })
            .collect();
        let (jump, at) = results
            .into_iter()
            .fold((0.0, Vec::new()), |best, r| if r.0 > best.0 { r } else { best });
        if jump > tol {
            return Err(CpwaError::DiscontinuityDetected { jump, tol, point: at });
        }
        Ok(AuditReport {
            metric: "continuity".into(),
            value: jump,
            bound: tol,
            pass: true,
            seed: Some(seed),
            probes: samples.len(),
            detail: Some(format!("{samples_per_face} random samples + centroid per facet")),
        })
    }

    fn jump_at(&self, t: &[f64], x: &[f64]) -> f64 {
        const MEMBER_TOL: f64 = 1e-9;
        let axes: Vec<Vec<i64>> = t
            .iter()
            .map(|v| {
                let r = v.round();
                if (v - r).abs() <= MEMBER_TOL {
                    vec![r as i64 - 1, r as i64]
                } else {
                    vec![v.floor() as i64]
                }
            })
            .collect();
        let mut lo = vec![f64::INFINITY; self.outputs()];
        let mut hi = vec![f64::NEG_INFINITY; self.outputs()];
        for origin in crate::geometry::cartesian(&axes) {
            let Some(&ci) = self.cube_index.get(&origin) else {
                continue;
            };
            for (pi, sigma) in self.perms.iter().enumerate() {
                let s = SimplexId {
                    cube: origin.clone(),
                    sigma: sigma.clone(),
                };
                if !s.contains_lattice(t, MEMBER_TOL) {
                    continue;
                }
                let idx = ci * self.perms.len() + pi;
                for j in 0..self.outputs() {
                    let v = self.pieces[j][idx].eval(x);
                    lo[j] = lo[j].min(v);
                    hi[j] = hi[j].max(v);
                }
            }
        }
        lo.iter()
            .zip(&hi)
            .map(|(a, b)| if b >= a { b - a } else { 0.0 })
            .fold(0.0, f64::max)
    }

    /// Sup over `probes` of `|interp(x) - oracle(x)|_inf`, against `mu`.
    pub fn approximation_audit<F>(&self, oracle: F, probes: &[Vec<f64>], mu: f64, seed: Option<u64>) -> Result<AuditReport, CpwaError>
    where
        F: Fn(&[f64]) -> Vec<f64> + Sync,
    {
        let errs: Vec<f64> = probes
            .par_iter()
            .map(|x| {
                let got = self.eval(x)?;
                let want = oracle(x);
                Ok(got
                    .iter()
                    .zip(&want)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max))
            })
            .collect::<Result<_, CpwaError>>()?;
        let value = errs.into_iter().fold(0.0, f64::max);
        Ok(AuditReport {
            metric: "approximation".into(),
            value,
            bound: mu,
            pass: value <= mu,
            seed,
            probes: probes.len(),
            detail: None,
        })
    }

    pub fn to_file(&self) -> InterpolantFile {
        InterpolantFile {
            grid: self.grid.to_file(),
            omega: self.omega.values.clone(),
            extra_corners: self
                .extra_values
                .iter()
                .map(|(o, v)| ExtraCornerEntry {
                    offset: o.clone(),
                    values: v.clone(),
                })
                .collect(),
            extra_rule: self.rule,
            k_cont: self.k_cont,
        }
    }

    pub fn from_file(file: InterpolantFile) -> Result<Self, CpwaError> {
        let grid = EtaGrid::from_file(file.grid)?;
        let omega = OmegaVector::new(file.omega, grid.len())
            .map_err(|e| CpwaError::InvariantViolation(e.to_string()))?;
        let mut map = BTreeMap::new();
        for e in file.extra_corners {
            if map.insert(e.offset.clone(), e.values).is_some() {
                return Err(CpwaError::InvariantViolation(format!(
                    "duplicate extra corner {:?}",
                    e.offset
                )));
            }
        }
        let explicit = ExtraCornerValues::from_map(map);
        let interp = Self::build_with_extra_values(grid, omega, explicit, file.k_cont)
            .map_err(|e| match e {
                CpwaError::ShapeMismatch(s) => CpwaError::InvariantViolation(s),
                other => other,
            })?;
        if file.extra_rule == ExtraCornerRule::MinOfNeighbors {
            let expected = extend_extra_corners(&interp.omega, &interp.extras)?;
            if expected != interp.extra_values {
                return Err(CpwaError::InvariantViolation(
                    "extra-corner values do not follow the min rule".into(),
                ));
            }
        }
        Ok(CpwaInterpolant {
            rule: file.extra_rule,
            ..interp
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("interpolant serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CpwaError> {
        let file: InterpolantFile =
            serde_json::from_str(text).map_err(|e| CpwaError::Schema(e.to_string()))?;
        Self::from_file(file)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraCornerEntry {
    pub offset: Vec<i64>,
    #[serde(with = "hex_vec")]
    pub values: Vec<f64>,
}

/// On-disk form of a [`CpwaInterpolant`]. Pieces are re-solved on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpolantFile {
    pub grid: GridFile,
    #[serde(with = "hex_vecs")]
    pub omega: Vec<Vec<f64>>,
    pub extra_corners: Vec<ExtraCornerEntry>,
    pub extra_rule: ExtraCornerRule,
    #[serde(with = "hex_f64")]
    pub k_cont: f64,
}
