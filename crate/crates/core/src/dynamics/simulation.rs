use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{perturb, FiniteTransitionSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimulationMode {
    Ordinary { gate: Option<f64> },
    Ads { delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRelation {
    pub mode: SimulationMode,
    pub pairs: BTreeSet<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SimulationOutcome {
    /// Every left state is related.
    Total(SimulationRelation),
    /// `left_state` has no partner in the greatest relation.
    Counterexample {
        left_state: usize,
        relation: SimulationRelation,
    },
}

impl SimulationOutcome {
    pub fn is_total(&self) -> bool {
        matches!(self, SimulationOutcome::Total(_))
    }

    pub fn relation(&self) -> &SimulationRelation {
        match self {
            SimulationOutcome::Total(r) => r,
            SimulationOutcome::Counterexample { relation, .. } => relation,
        }
    }
}

// Removes pairs violating transfer until stable. `matches(la, lb)` decides
// which right transitions may answer a left one.
fn refine<F>(
    a: &FiniteTransitionSystem,
    b: &FiniteTransitionSystem,
    mut rel: Vec<Vec<bool>>,
    matches: F,
) -> Vec<Vec<bool>>
where
    F: Fn(&str, &str) -> bool,
{
    let sa = a.successors();
    let sb = b.successors();
    loop {
        let mut changed = false;
        for x in 0..a.state_count() {
            for y in 0..b.state_count() {
                if !rel[x][y] {
                    continue;
                }
                let ok = sa[x].iter().all(|(lu, xp)| {
                    sb[y]
                        .iter()
                        .any(|(lv, yp)| matches(lu, lv) && rel[*xp][*yp])
                });
                if !ok {
                    rel[x][y] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            return rel;
        }
    }
}

fn to_pairs(rel: &[Vec<bool>]) -> BTreeSet<(usize, usize)> {
    rel.iter()
        .enumerate()
        .flat_map(|(x, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, r)| **r)
                .map(move |(y, _)| (x, y))
        })
        .collect()
}

fn outcome(a: &FiniteTransitionSystem, relation: SimulationRelation) -> SimulationOutcome {
    let related: BTreeSet<usize> = relation.pairs.iter().map(|(x, _)| *x).collect();
    match (0..a.state_count()).find(|x| !related.contains(x)) {
        None => SimulationOutcome::Total(relation),
        Some(left_state) => SimulationOutcome::Counterexample { left_state, relation },
    }
}

/// Greatest label-matched simulation of `a` by `b`, starting from all pairs
/// (or those within `gate` when given).
pub fn greatest_simulation(
    a: &FiniteTransitionSystem,
    b: &FiniteTransitionSystem,
    gate: Option<f64>,
) -> BTreeSet<(usize, usize)> {
    let seed = (0..a.state_count())
        .map(|x| {
            (0..b.state_count())
                .map(|y| gate.is_none_or(|g| super::sup_distance_between(a, x, b, y) <= g))
                .collect()
        })
        .collect();
    to_pairs(&refine(a, b, seed, |l, r| l == r))
}

pub fn check_simulation(
    a: &FiniteTransitionSystem,
    b: &FiniteTransitionSystem,
    gate: Option<f64>,
) -> SimulationOutcome {
    let pairs = greatest_simulation(a, b, gate);
    outcome(
        a,
        SimulationRelation {
            mode: SimulationMode::Ordinary { gate },
            pairs,
        },
    )
}

/// Greatest relation with pair distance `<= delta` that transfers the
/// `delta`-perturbed transitions of `a` to transitions of `b`, ignoring labels.
pub fn greatest_ads_relation(
    a: &FiniteTransitionSystem,
    b: &FiniteTransitionSystem,
    delta: f64,
) -> BTreeSet<(usize, usize)> {
    let ap = perturb(a, delta);
    let seed = (0..a.state_count())
        .map(|x| {
            (0..b.state_count())
                .map(|y| super::sup_distance_between(a, x, b, y) <= delta)
                .collect()
        })
        .collect();
    to_pairs(&refine(&ap, b, seed, |_, _| true))
}

pub fn check_ads(a: &FiniteTransitionSystem, b: &FiniteTransitionSystem, delta: f64) -> SimulationOutcome {
    let pairs = greatest_ads_relation(a, b, delta);
    outcome(
        a,
        SimulationRelation {
            mode: SimulationMode::Ads { delta },
            pairs,
        },
    )
}

/// Whether `rel` is a (gated) label-matched simulation.
pub fn is_simulation(
    a: &FiniteTransitionSystem,
    b: &FiniteTransitionSystem,
    rel: &BTreeSet<(usize, usize)>,
) -> bool {
    let sb = b.successors();
    rel.iter().all(|&(x, y)| {
        a.successors()[x].iter().all(|(lu, xp)| {
            sb[y]
                .iter()
                .any(|(lv, yp)| lu == lv && rel.contains(&(*xp, *yp)))
        })
    })
}

/// Whether `rel` meets the distance and transfer conditions of an ADS
/// relation (totality is checked separately).
pub fn is_ads_relation(
    a: &FiniteTransitionSystem,
    b: &FiniteTransitionSystem,
    delta: f64,
    rel: &BTreeSet<(usize, usize)>,
) -> bool {
    let ap = perturb(a, delta);
    let sa = ap.successors();
    let sb = b.successors();
    rel.iter().all(|&(x, y)| {
        super::sup_distance_between(a, x, b, y) <= delta
            && sa[x]
                .iter()
                .all(|(_, xp)| sb[y].iter().any(|(_, yp)| rel.contains(&(*xp, *yp))))
    })
}
