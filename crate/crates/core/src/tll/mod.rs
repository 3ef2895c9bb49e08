//! Two-level lattice (TLL) networks.
//!
//! A scalar TLL holds a bank of affine functions `l_1..l_N` and selector sets
//! `S_1..S_M`; it computes `max_j min_{i in S_j} l_i(x)`. Compiling a CPWA
//! interpolant yields one selector set per simplex: the bank members that
//! dominate the simplex's active piece at every simplex vertex. Because both
//! sides are affine on the simplex, the vertex check is exact, and the
//! max-of-mins reproduces the interpolant on the whole hypercube union.

mod expand;

pub use expand::{ExpandedNetwork, LinearForm, ReluLayer};

use std::collections::HashMap;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpwa::{AffinePiece, AuditReport, CpwaInterpolant, PieceKey};
use crate::hexfloat::hex_f64;

/// Slack on the vertex dominance check.
pub const DOMINANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TllError {
    #[error("selector set for region {region} is empty")]
    EmptySelector { region: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bank size {n_bank} of output {output} exceeds bound {bound}")]
    BoundViolated {
        output: usize,
        n_bank: usize,
        bound: String,
    },
    #[error("network schema: {0}")]
    SchemaError(String),
    #[error("network invariant: {0}")]
    InvariantViolation(String),
}

/// One output of a TLL network.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarTll {
    bank: Vec<AffinePiece>,
    selectors: Vec<Vec<usize>>,
    // Pruned copy of `selectors` used by `eval`: duplicates and supersets of
    // other sets never win the outer max, so dropping them is exact.
    plan: Vec<Vec<usize>>,
}

impl ScalarTll {
    /// Validates and assembles a scalar network over `R^n`.
    pub fn new(n: usize, bank: Vec<AffinePiece>, selectors: Vec<Vec<usize>>) -> Result<Self, TllError> {
        if bank.is_empty() {
            return Err(TllError::InvariantViolation("empty bank".into()));
        }
        if selectors.is_empty() {
            return Err(TllError::InvariantViolation("no selector sets".into()));
        }
        for (i, p) in bank.iter().enumerate() {
            if p.w.len() != n {
                return Err(TllError::InvariantViolation(format!(
                    "bank entry {i} has {} weights, expected {n}",
                    p.w.len()
                )));
            }
            if !p.b.is_finite() || p.w.iter().any(|v| !v.is_finite()) {
                return Err(TllError::InvariantViolation(format!("bank entry {i} is not finite")));
            }
        }
        for (j, s) in selectors.iter().enumerate() {
            if s.is_empty() {
                return Err(TllError::EmptySelector { region: j });
            }
            if let Some(&bad) = s.iter().find(|&&i| i >= bank.len()) {
                return Err(TllError::InvariantViolation(format!(
                    "selector {j} references index {bad} but the bank has {} entries",
                    bank.len()
                )));
            }
            let mut sorted = s.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != s.len() {
                return Err(TllError::InvariantViolation(format!("selector {j} repeats an index")));
            }
        }
        let plan = prune_selectors(&selectors, bank.len());
        Ok(ScalarTll { bank, selectors, plan })
    }

    pub fn bank(&self) -> &[AffinePiece] {
        &self.bank
    }

    pub fn selectors(&self) -> &[Vec<usize>] {
        &self.selectors
    }

    /// `N`: number of affine functions.
    pub fn bank_size(&self) -> usize {
        self.bank.len()
    }

    /// `M`: number of selector sets.
    pub fn selector_count(&self) -> usize {
        self.selectors.len()
    }

    /// Number of selector sets actually visited during evaluation.
    pub fn pruned_selector_count(&self) -> usize {
        self.plan.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let vals: Vec<f64> = self.bank.iter().map(|p| p.eval(x)).collect();
        self.plan
            .iter()
            .map(|s| s.iter().map(|&i| vals[i]).fold(f64::INFINITY, f64::min))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Reference evaluation over every selector set, without pruning.
    pub fn eval_unpruned(&self, x: &[f64]) -> f64 {
        let vals: Vec<f64> = self.bank.iter().map(|p| p.eval(x)).collect();
        self.selectors
            .iter()
            .map(|s| s.iter().map(|&i| vals[i]).fold(f64::INFINITY, f64::min))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_gradient_norm(&self) -> f64 {
        self.bank.iter().map(AffinePiece::dual_norm).fold(0.0, f64::max)
    }
}

fn prune_selectors(selectors: &[Vec<usize>], n_bank: usize) -> Vec<Vec<usize>> {
    let mut sets: Vec<Vec<usize>> = selectors
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.sort_unstable();
            s
        })
        .collect();
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    sets.dedup();
    let words = n_bank.div_ceil(64);
    let to_bits = |s: &[usize]| {
        let mut bits = vec![0u64; words];
        for &i in s {
            bits[i / 64] |= 1 << (i % 64);
        }
        bits
    };
    let mut kept: Vec<(Vec<usize>, Vec<u64>)> = Vec::new();
    for s in sets {
        let bits = to_bits(&s);
        let dominated = kept
            .iter()
            .any(|(_, k)| k.iter().zip(&bits).all(|(a, b)| a & !b == 0));
        if !dominated {
            kept.push((s, bits));
        }
    }
    kept.into_iter().map(|(s, _)| s).collect()
}

/// Where a compiled network came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    #[serde(with = "hex_f64")]
    pub eta: f64,
    #[serde(rename = "K_cont", with = "hex_f64")]
    pub k_cont: f64,
    #[serde(rename = "bound_N")]
    pub bound_n: String,
}

/// Parallel composition of scalar TLLs sharing an input space.
#[derive(Debug, Clone, PartialEq)]
pub struct TllNetwork {
    n: usize,
    outputs: Vec<ScalarTll>,
    provenance: Option<Provenance>,
}

impl TllNetwork {
    pub fn single(n: usize, net: ScalarTll) -> Self {
        TllNetwork {
            n,
            outputs: vec![net],
            provenance: None,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.n
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.len()
    }

    pub fn outputs(&self) -> &[ScalarTll] {
        &self.outputs
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = Some(p);
        self
    }

    /// Total on `R^n`.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.outputs.iter().map(|o| o.eval(x)).collect()
    }

    pub fn max_gradient_norm(&self) -> f64 {
        self.outputs
            .iter()
            .map(ScalarTll::max_gradient_norm)
            .fold(0.0, f64::max)
    }

    pub fn to_file(&self) -> NetworkFile {
        NetworkFile {
            n: self.n,
            m: self.outputs.len(),
            outputs: self
                .outputs
                .iter()
                .map(|o| OutputFile {
                    bank: o.bank.clone(),
                    selectors: o.selectors.clone(),
                })
                .collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn from_file(f: NetworkFile) -> Result<Self, TllError> {
        if f.n == 0 {
            return Err(TllError::InvariantViolation("input dimension is zero".into()));
        }
        if f.m != f.outputs.len() || f.m == 0 {
            return Err(TllError::InvariantViolation(format!(
                "m = {} but {} outputs are present",
                f.m,
                f.outputs.len()
            )));
        }
        if let Some(p) = &f.provenance {
            if p.bound_n.parse::<BigUint>().is_err() {
                return Err(TllError::InvariantViolation(format!("bound_N {:?} is not an integer", p.bound_n)));
            }
        }
        let outputs = f
            .outputs
            .into_iter()
            .map(|o| ScalarTll::new(f.n, o.bank, o.selectors))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| match e {
                TllError::EmptySelector { region } => {
                    TllError::InvariantViolation(format!("selector {region} is empty"))
                }
                other => other,
            })?;
        Ok(TllNetwork {
            n: f.n,
            outputs,
            provenance: f.provenance,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TllError> {
        let f: NetworkFile = serde_json::from_str(text).map_err(|e| TllError::SchemaError(e.to_string()))?;
        Self::from_file(f)
    }

    /// Dense ReLU realization built from pairwise min/max gadgets.
    pub fn expand(&self) -> ExpandedNetwork {
        expand::materialize(self)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputFile {
    pub bank: Vec<AffinePiece>,
    pub selectors: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub n: usize,
    pub m: usize,
    pub outputs: Vec<OutputFile>,
    pub provenance: Option<Provenance>,
}

/// Builds a scalar TLL from regions given as `(piece, vertices)`, where the
/// piece is active on the convex hull of the vertices.
pub fn compile_regions(
    n: usize,
    regions: &[(AffinePiece, Vec<Vec<f64>>)],
) -> Result<ScalarTll, TllError> {
    let mut bank: Vec<AffinePiece> = Vec::new();
    let mut index: HashMap<PieceKey, usize> = HashMap::new();
    let mut active = Vec::with_capacity(regions.len());
    for (piece, _) in regions {
        if piece.w.len() != n {
            return Err(TllError::DimensionMismatch {
                expected: n,
                got: piece.w.len(),
            });
        }
        let k = piece.key();
        let id = *index.entry(k).or_insert_with(|| {
            bank.push(piece.clone());
            bank.len() - 1
        });
        active.push(id);
    }
    let mut selectors = Vec::with_capacity(regions.len());
    for (j, ((_, verts), &act)) in regions.iter().zip(&active).enumerate() {
        let act_vals: Vec<f64> = verts.iter().map(|v| bank[act].eval(v)).collect();
        let set: Vec<usize> = (0..bank.len())
            .filter(|&i| {
                verts
                    .iter()
                    .zip(&act_vals)
                    .all(|(v, a)| bank[i].eval(v) >= a - DOMINANCE_TOL)
            })
            .collect();
        if set.is_empty() {
            return Err(TllError::EmptySelector { region: j });
        }
        selectors.push(set);
    }
    ScalarTll::new(n, bank, selectors)
}

/// Compiles output `j` of an interpolant.
pub fn compile_scalar_tll(interp: &CpwaInterpolant, j: usize) -> Result<ScalarTll, TllError> {
    if j >= interp.outputs() {
        return Err(TllError::DimensionMismatch {
            expected: interp.outputs(),
            got: j,
        });
    }
    let pieces = interp.pieces(j);
    let regions: Vec<(AffinePiece, Vec<Vec<f64>>)> = (0..interp.simplex_count())
        .map(|s| (pieces[s].clone(), interp.simplex_vertices_world(s)))
        .collect();
    compile_regions(interp.input_dim(), &regions)
}

/// Stacks single-output networks into one network.
pub fn parallel_compose(nets: Vec<TllNetwork>) -> Result<TllNetwork, TllError> {
    let first = nets
        .first()
        .ok_or_else(|| TllError::InvariantViolation("nothing to compose".into()))?;
    let n = first.n;
    let provenance = first.provenance.clone();
    let mut outputs = Vec::new();
    for net in nets {
        if net.n != n {
            return Err(TllError::DimensionMismatch {
                expected: n,
                got: net.n,
            });
        }
        outputs.extend(net.outputs);
    }
    Ok(TllNetwork {
        n,
        outputs,
        provenance,
    })
}

/// Compiles every output (in parallel) and composes them.
pub fn compile_tll(interp: &CpwaInterpolant) -> Result<TllNetwork, TllError> {
    let n = interp.input_dim();
    let scalars = (0..interp.outputs())
        .into_par_iter()
        .map(|j| compile_scalar_tll(interp, j).map(|s| TllNetwork::single(n, s)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(parallel_compose(scalars)?.with_provenance(Provenance {
        eta: interp.grid().eta(),
        k_cont: interp.k_cont(),
        bound_n: interp.region_bound().to_string(),
    }))
}

pub fn eval_tll(net: &TllNetwork, x: &[f64]) -> Vec<f64> {
    net.eval(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputArch {
    #[serde(rename = "N")]
    pub n_bank: usize,
    #[serde(rename = "M")]
    pub m_sets: usize,
    pub min_depth: usize,
    pub max_depth: usize,
}

/// Size summary of a network and of its ReLU realization. The layer shapes
/// are those of this crate's gadget expansion and are implementation-defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchDescriptor {
    pub per_output: Vec<OutputArch>,
    pub bound_n: String,
    /// `[n, hidden widths.., m]`.
    pub layer_shapes: Vec<usize>,
    pub total_neurons: usize,
    pub implementation_defined: bool,
}

pub fn arch_descriptor(net: &TllNetwork, bound: &BigUint) -> Result<ArchDescriptor, TllError> {
    for (j, o) in net.outputs.iter().enumerate() {
        if BigUint::from(o.bank_size()) > *bound {
            return Err(TllError::BoundViolated {
                output: j,
                n_bank: o.bank_size(),
                bound: bound.to_string(),
            });
        }
    }
    let widths = expand::hidden_widths(net);
    let mut layer_shapes = vec![net.n];
    layer_shapes.extend(&widths);
    layer_shapes.push(net.output_dim());
    Ok(ArchDescriptor {
        per_output: net
            .outputs
            .iter()
            .map(|o| OutputArch {
                n_bank: o.bank_size(),
                m_sets: o.selector_count(),
                min_depth: expand::tree_depth(o.selectors.iter().map(Vec::len).max().unwrap_or(1)),
                max_depth: expand::tree_depth(o.selector_count()),
            })
            .collect(),
        bound_n: bound.to_string(),
        total_neurons: widths.iter().sum(),
        layer_shapes,
        implementation_defined: true,
    })
}

/// Sup over `probes` of `|tll(x) - cpwa(x)|_inf`, against `tol`.
pub fn equivalence_audit(
    net: &TllNetwork,
    interp: &CpwaInterpolant,
    probes: &[Vec<f64>],
    tol: f64,
    seed: Option<u64>,
) -> Result<AuditReport, crate::cpwa::CpwaError> {
    let diffs: Vec<f64> = probes
        .par_iter()
        .map(|x| {
            let want = interp.eval(x)?;
            Ok(net
                .eval(x)
                .iter()
                .zip(&want)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<_, crate::cpwa::CpwaError>>()?;
    let value = diffs.into_iter().fold(0.0, f64::max);
    Ok(AuditReport {
        metric: "tll-equivalence".into(),
        value,
        bound: tol,
        pass: value <= tol,
        seed,
        probes: probes.len(),
        detail: None,
    })
}

/// Largest two-point quotient `|f(x) - f(y)|_inf / |x - y|_inf` over random
/// pairs in `[-radius, radius]^n`, against the bank's max dual norm.
pub fn lipschitz_quotient_audit(net: &TllNetwork, pairs: usize, radius: f64, seed: u64) -> AuditReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = net.input_dim();
    let pts: Vec<(Vec<f64>, Vec<f64>)> = (0..pairs)
        .map(|_| {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-radius..=radius)).collect();
            // Mix near and far pairs.
            let scale = if rng.gen_bool(0.5) { radius } else { 1e-3 * radius };
            let y: Vec<f64> = x.iter().map(|v| v + rng.gen_range(-scale..=scale)).collect();
            (x, y)
        })
        .collect();
    let value = pts
        .par_iter()
        .map(|(x, y)| {
            let d = crate::geometry::sup_distance(x, y);
            if d == 0.0 {
                return 0.0;
            }
            let fx = net.eval(x);
            let fy = net.eval(y);
            crate::geometry::sup_distance(&fx, &fy) / d
        })
        .reduce(|| 0.0, f64::max);
    let bound = net.max_gradient_norm();
    AuditReport {
        metric: "tll-lipschitz".into(),
        value,
        bound,
        pass: value <= bound + 1e-9,
        seed: Some(seed),
        probes: pairs,
        detail: Some(format!("pairs drawn in [-{radius}, {radius}]^{n}")),
    }
}
