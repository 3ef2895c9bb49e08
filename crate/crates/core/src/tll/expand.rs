//! ReLU realization of a TLL network through 2-input gadgets:
//!
//! * `min(a, b) = relu(b) - relu(-b) - relu(b - a)`
//! * `max(a, b) = relu(b) - relu(-b) + relu(a - b)`
//! * pass-through `v = relu(v) - relu(-v)`
//!
//! Each selector set is reduced by a balanced min tree, then the set minima
//! by a balanced max tree. Every tree level is one hidden layer; outputs that
//! finish early are carried by pass-through pairs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TllNetwork;
use crate::hexfloat::{hex_f64, hex_vec};

/// Sparse affine form over the previous layer (or the inputs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearForm {
    pub idx: Vec<usize>,
    #[serde(with = "hex_vec")]
    pub coef: Vec<f64>,
    #[serde(with = "hex_f64")]
    pub bias: f64,
}

impl LinearForm {
    fn combine(parts: &[(f64, &LinearForm)]) -> Self {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        let mut bias = 0.0;
        for (s, f) in parts {
            for (i, c) in f.idx.iter().zip(&f.coef) {
                *acc.entry(*i).or_insert(0.0) += s * c;
            }
            bias += s * f.bias;
        }
        acc.retain(|_, c| *c != 0.0);
        LinearForm {
            idx: acc.keys().copied().collect(),
            coef: acc.values().copied().collect(),
            bias,
        }
    }

    pub fn eval(&self, input: &[f64]) -> f64 {
        self.idx
            .iter()
            .zip(&self.coef)
            .map(|(i, c)| c * input[*i])
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReluLayer {
    pub rows: Vec<LinearForm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpandedNetwork {
    pub input_dim: usize,
    pub hidden: Vec<ReluLayer>,
    pub output: Vec<LinearForm>,
}

impl ExpandedNetwork {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for layer in &self.hidden {
            cur = layer.rows.iter().map(|r| r.eval(&cur).max(0.0)).collect();
        }
        self.output.iter().map(|r| r.eval(&cur)).collect()
    }

    pub fn widths(&self) -> Vec<usize> {
        self.hidden.iter().map(|l| l.rows.len()).collect()
    }
}

/// `ceil(log2 s)` levels to reduce `s` values pairwise.
pub fn tree_depth(s: usize) -> usize {
    let mut depth = 0;
    let mut k = s.max(1);
    while k > 1 {
        k = k.div_ceil(2);
        depth += 1;
    }
    depth
}

enum Stage<T> {
    Min(Vec<Vec<T>>),
    Max(Vec<T>),
    Done(T),
}

impl<T> Stage<T> {
    // Advance through stages that need no layer.
    fn settle(self) -> Self {
        match self {
            Stage::Min(groups) if groups.iter().all(|g| g.len() == 1) => {
                Stage::Max(groups.into_iter().flatten().collect()).settle()
            }
            Stage::Max(mut v) if v.len() == 1 => Stage::Done(v.pop().unwrap()),
            s => s,
        }
    }

    fn done(&self) -> bool {
        matches!(self, Stage::Done(_))
    }
}

fn gadget_neurons(s: usize) -> usize {
    (s / 2) * 3 + (s % 2) * 2
}

/// Hidden-layer widths of the gadget realization, computed from set sizes.
pub fn hidden_widths(net: &TllNetwork) -> Vec<usize> {
    let mut stages: Vec<Stage<()>> = net
        .outputs()
        .iter()
        .map(|o| Stage::Min(o.selectors().iter().map(|s| vec![(); s.len()]).collect()).settle())
        .collect();
    let mut widths = Vec::new();
    while !stages.iter().all(Stage::done) {
        let mut width = 0;
        stages = stages
            .into_iter()
            .map(|s| {
                match s {
                    Stage::Min(groups) => {
                        width += groups.iter().map(|g| gadget_neurons(g.len())).sum::<usize>();
                        Stage::Min(groups.iter().map(|g| vec![(); g.len().div_ceil(2)]).collect())
                    }
                    Stage::Max(v) => {
                        width += gadget_neurons(v.len());
                        Stage::Max(vec![(); v.len().div_ceil(2)])
                    }
                    Stage::Done(()) => {
                        width += 2;
                        Stage::Done(())
                    }
                }
                .settle()
            })
            .collect();
        widths.push(width);
    }
    widths
}

#[derive(Clone, Copy)]
enum Op {
    Min,
    Max,
}

fn reduce(values: &[LinearForm], op: Op, rows: &mut Vec<LinearForm>) -> Vec<LinearForm> {
    let mut out = Vec::with_capacity(values.len().div_ceil(2));
    for chunk in values.chunks(2) {
        let base = rows.len();
        match chunk {
            [a, b] => {
                let (diff, sign) = match op {
                    Op::Min => (LinearForm::combine(&[(1.0, b), (-1.0, a)]), -1.0),
                    Op::Max => (LinearForm::combine(&[(1.0, a), (-1.0, b)]), 1.0),
                };
                rows.push(diff);
                rows.push(b.clone());
                rows.push(LinearForm::combine(&[(-1.0, b)]));
                out.push(LinearForm {
                    idx: vec![base, base + 1, base + 2],
                    coef: vec![sign, 1.0, -1.0],
                    bias: 0.0,
                });
            }
            [v] => out.push(pass(v, rows)),
            _ => unreachable!(),
        }
    }
    out
}

fn pass(v: &LinearForm, rows: &mut Vec<LinearForm>) -> LinearForm {
    let base = rows.len();
    rows.push(v.clone());
    rows.push(LinearForm::combine(&[(-1.0, v)]));
    LinearForm {
        idx: vec![base, base + 1],
        coef: vec![1.0, -1.0],
        bias: 0.0,
    }
}

pub(super) fn materialize(net: &TllNetwork) -> ExpandedNetwork {
    let n = net.input_dim();
    let mut stages: Vec<Stage<LinearForm>> = net
        .outputs()
        .iter()
        .map(|o| {
            let forms: Vec<LinearForm> = o
                .bank()
                .iter()
                .map(|p| LinearForm {
                    idx: (0..n).collect(),
                    coef: p.w.clone(),
                    bias: p.b,
                })
                .collect();
            Stage::Min(
                o.selectors()
                    .iter()
                    .map(|s| s.iter().map(|&i| forms[i].clone()).collect())
                    .collect(),
            )
            .settle()
        })
        .collect();
    let mut hidden = Vec::new();
    while !stages.iter().all(Stage::done) {
        let mut rows = Vec::new();
        stages = stages
            .into_iter()
            .map(|s| {
                match s {
                    Stage::Min(groups) => {
                        Stage::Min(groups.iter().map(|g| reduce(g, Op::Min, &mut rows)).collect())
                    }
                    Stage::Max(v) => Stage::Max(reduce(&v, Op::Max, &mut rows)),
                    Stage::Done(v) => Stage::Done(pass(&v, &mut rows)),
                }
                .settle()
            })
            .collect();
        hidden.push(ReluLayer { rows });
    }
    let output = stages
        .into_iter()
        .map(|s| match s {
            Stage::Done(v) => v,
            _ => unreachable!("all stages finished"),
        })
        .collect();
    ExpandedNetwork {
        input_dim: n,
        hidden,
        output,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpwa::AffinePiece;
    use crate::tll::ScalarTll;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn depths() {
        assert_eq!(tree_depth(1), 0);
        assert_eq!(tree_depth(2), 1);
        assert_eq!(tree_depth(3), 2);
        assert_eq!(tree_depth(4), 2);
        assert_eq!(tree_depth(5), 3);
    }

    #[test]
    fn expansion_matches_lattice_and_widths() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut nets = Vec::new();
        for sets in [vec![vec![0, 1, 2], vec![1], vec![2, 3]], vec![vec![0]], vec![vec![0, 1]]] {
            let k = sets.iter().flatten().max().unwrap() + 1;
            let bank = (0..k)
                .map(|_| AffinePiece {
                    w: vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
                    b: rng.gen_range(-1.0..1.0),
                })
                .collect();
            nets.push(TllNetwork::single(2, ScalarTll::new(2, bank, sets).unwrap()));
        }
        let net = crate::tll::parallel_compose(nets).unwrap();
        let ex = net.expand();
        assert_eq!(ex.widths(), hidden_widths(&net));
        for _ in 0..500 {
            let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let a = net.eval(&x);
            let b = ex.eval(&x);
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).abs() < 1e-12, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn constant_has_no_hidden_layer() {
        let net = TllNetwork::single(
            1,
            ScalarTll::new(1, vec![AffinePiece::constant(1, 3.0)], vec![vec![0]]).unwrap(),
        );
        assert!(hidden_widths(&net).is_empty());
        assert_eq!(net.expand().eval(&[9.0]), vec![3.0]);
    }
}
