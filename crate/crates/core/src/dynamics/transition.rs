use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{integrate_closed_loop, ControlSystemModel, DynamicsError};
use crate::geometry::sup_distance;
use crate::hexfloat::hex_vec;

/// Finite labeled transition system whose states carry coordinates in a
/// max-norm metric space.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FiniteTransitionSystem {
    states: Vec<Vec<f64>>,
    transitions: BTreeSet<(usize, String, usize)>,
}

impl FiniteTransitionSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_state(&mut self, coords: Vec<f64>) -> usize {
        self.states.push(coords);
        self.states.len() - 1
    }

    /// Adds `src --label--> dst`; both must be listed states.
    pub fn add_transition(&mut self, src: usize, label: impl Into<String>, dst: usize) -> Result<(), DynamicsError> {
        if src >= self.states.len() || dst >= self.states.len() {
            return Err(DynamicsError::InvariantViolation(format!(
                "transition {src} -> {dst} references an unlisted state ({} states)",
                self.states.len()
            )));
        }
        self.transitions.insert((src, label.into(), dst));
        Ok(())
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn coords(&self, s: usize) -> &[f64] {
        &self.states[s]
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn transitions(&self) -> &BTreeSet<(usize, String, usize)> {
        &self.transitions
    }

    /// Outgoing `(label, dst)` lists indexed by source.
    pub fn successors(&self) -> Vec<Vec<(&str, usize)>> {
        let mut out = vec![Vec::new(); self.states.len()];
        for (s, l, d) in &self.transitions {
            out[*s].push((l.as_str(), *d));
        }
        out
    }

    pub fn labels(&self) -> BTreeSet<&str> {
        self.transitions.iter().map(|(_, l, _)| l.as_str()).collect()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        sup_distance(&self.states[a], &self.states[b])
    }

    /// At most one transition per `(state, label)`.
    pub fn is_deterministic(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.transitions.iter().all(|(s, l, _)| seen.insert((*s, l.clone())))
    }

    /// Nearest listed state within `tol`, lowest index on ties.
    pub fn nearest_state(&self, x: &[f64], tol: f64) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (i, s) in self.states.iter().enumerate() {
            let d = sup_distance(s, x);
            if d <= tol && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| i)
    }

    /// Copy with every label replaced by `label`.
    pub fn unify_labels(&self, label: &str) -> Self {
        FiniteTransitionSystem {
            states: self.states.clone(),
            transitions: self
                .transitions
                .iter()
                .map(|(s, _, d)| (*s, label.to_string(), *d))
                .collect(),
        }
    }

    pub fn to_file(&self) -> TransitionSystemFile {
        TransitionSystemFile {
            states: self
                .states
                .iter()
                .enumerate()
                .map(|(i, c)| StateEntry {
                    id: i as u64,
                    coords: c.clone(),
                })
                .collect(),
            transitions: self
                .transitions
                .iter()
                .map(|(s, l, d)| TransitionEntry {
                    src: *s as u64,
                    label: l.clone(),
                    dst: *d as u64,
                })
                .collect(),
        }
    }

    /// State ids may be arbitrary unique integers; they are renumbered in
    /// file order.
    pub fn from_file(f: TransitionSystemFile) -> Result<Self, DynamicsError> {
        let mut ts = FiniteTransitionSystem::new();
        let mut ids = HashMap::new();
        let dim = f.states.first().map(|s| s.coords.len());
        for s in f.states {
            if Some(s.coords.len()) != dim || s.coords.is_empty() {
                return Err(DynamicsError::InvariantViolation(format!(
                    "state {} has {} coordinates, expected {}",
                    s.id,
                    s.coords.len(),
                    dim.unwrap_or(0)
                )));
            }
            if s.coords.iter().any(|v| !v.is_finite()) {
                return Err(DynamicsError::InvariantViolation(format!("state {} is not finite", s.id)));
            }
            let idx = ts.add_state(s.coords);
            if ids.insert(s.id, idx).is_some() {
                return Err(DynamicsError::InvariantViolation(format!("duplicate state id {}", s.id)));
            }
        }
        for t in f.transitions {
            let (Some(&s), Some(&d)) = (ids.get(&t.src), ids.get(&t.dst)) else {
                return Err(DynamicsError::InvariantViolation(format!(
                    "transition {} -> {} references an unknown state",
                    t.src, t.dst
                )));
            };
            ts.add_transition(s, t.label, d)?;
        }
        Ok(ts)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("transition system serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DynamicsError> {
        let f: TransitionSystemFile =
            serde_json::from_str(text).map_err(|e| DynamicsError::Schema(e.to_string()))?;
        Self::from_file(f)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateEntry {
    pub id: u64,
    #[serde(with = "hex_vec")]
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub src: u64,
    pub label: String,
    pub dst: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSystemFile {
    pub states: Vec<StateEntry>,
    pub transitions: Vec<TransitionEntry>,
}

/// Finite sample of the tau-sampled embedding of the closed loop.
///
/// Samples closer than `snap_tol` to an earlier sample are merged. Each
/// distinct sample gets one transition labeled by its control segment; its
/// endpoint snaps to the nearest listed state within `snap_tol` or is appended.
pub fn embed_tau_sampled<C>(
    model: &ControlSystemModel,
    controller: C,
    samples: &[Vec<f64>],
    tau: f64,
    step: f64,
    snap_tol: f64,
) -> Result<FiniteTransitionSystem, DynamicsError>
where
    C: Fn(&[f64]) -> Vec<f64>,
{
    let mut ts = FiniteTransitionSystem::new();
    let mut sources = Vec::new();
    for x in samples {
        if x.len() != model.n {
            return Err(DynamicsError::DimensionMismatch {
                expected: model.n,
                got: x.len(),
            });
        }
        if ts.nearest_state(x, snap_tol).is_none() {
            sources.push(ts.add_state(x.clone()));
        }
    }
    for s in sources {
        let x0 = ts.coords(s).to_vec();
        let tr = integrate_closed_loop(model, &controller, &x0, tau, step)?;
        let end = tr.endpoint();
        let dst = match ts.nearest_state(end, snap_tol) {
            Some(d) => d,
            None => ts.add_state(end.to_vec()),
        };
        ts.add_transition(s, tr.label(), dst)?;
    }
    Ok(ts)
}

/// Widens every transition target to all listed states within `delta` of it.
pub fn perturb(ts: &FiniteTransitionSystem, delta: f64) -> FiniteTransitionSystem {
    let mut out = ts.clone();
    for (s, l, d) in &ts.transitions {
        for t in 0..ts.state_count() {
            if ts.distance(*d, t) <= delta {
                out.transitions.insert((*s, l.clone(), t));
            }
        }
    }
    out
}
