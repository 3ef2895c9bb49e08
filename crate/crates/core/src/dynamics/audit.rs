use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{integrate_closed_loop, ControlSystemModel, DynamicsError, Trajectory};
use crate::geometry::{sup_distance, BoxDomain};
use crate::sizing;

/// Slack for integrator error when comparing deviations to bounds.
pub const INTEGRATOR_TOL: f64 = 1e-7;

const MAX_LISTED_VIOLATIONS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub kind: String,
    pub delta: f64,
    pub tau: f64,
    pub edge_probes: usize,
    pub interior_probes: usize,
    pub edge_violations: usize,
    pub interior_violations: usize,
    /// First few offending start states.
    pub examples: Vec<Vec<f64>>,
    pub note: Option<String>,
    pub pass: bool,
}

fn boundary_distance(b: &BoxDomain, x: &[f64]) -> f64 {
    (0..b.dim())
        .map(|i| (x[i] - b.lower()[i]).min(b.upper()[i] - x[i]))
        .fold(f64::INFINITY, f64::min)
}

fn in_inner(b: &BoxDomain, x: &[f64], delta: f64) -> bool {
    (0..b.dim()).all(|i| x[i] >= b.lower()[i] + delta && x[i] <= b.upper()[i] - delta)
}

/// Sampling audit of delta,tau positive invariance on the box `X`.
///
/// Probes are a `density`-per-axis lattice plus every boundary lattice point
/// pushed inward by `0`, `delta/2` and `delta (1 - 1e-9)`. Starts within
/// `delta` of the boundary must end in the inner box after `tau`; starts in
/// the inner box must stay there at every integration node.
pub fn check_delta_tau_invariance<C>(
    model: &ControlSystemModel,
    controller: C,
    delta: f64,
    tau: f64,
    step: f64,
    density: usize,
) -> Result<InvarianceReport, DynamicsError>
where
    C: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let b = &model.x;
    let min_width = (0..b.dim()).map(|i| b.width(i)).fold(f64::INFINITY, f64::min);
    let mut report = InvarianceReport {
        kind: "sampling audit".into(),
        delta,
        tau,
        edge_probes: 0,
        interior_probes: 0,
        edge_violations: 0,
        interior_violations: 0,
        examples: Vec::new(),
        note: None,
        pass: false,
    };
    if delta >= min_width / 2.0 {
        report.note = Some(format!(
            "EdgeConsumesDomain: delta {delta} >= half the narrowest width {}",
            min_width / 2.0
        ));
        return Ok(report);
    }
    let mut probes = b.lattice(density.max(2));
    let mut pushed = Vec::new();
    for p in &probes {
        for i in 0..b.dim() {
            let inward = if p[i] == b.lower()[i] {
                1.0
            } else if p[i] == b.upper()[i] {
                -1.0
            } else {
                continue;
            };
            for off in [delta / 2.0, delta * (1.0 - 1e-9)] {
                let mut q = p.clone();
                q[i] += inward * off;
                pushed.push(q);
            }
        }
    }
    probes.extend(pushed);

    let results: Vec<(bool, bool)> = probes
        .par_iter()
        .map(|x0| {
            let edge = boundary_distance(b, x0) < delta;
            let tr = integrate_closed_loop(model, &controller, x0, tau, step)?;
            let ok = if edge {
                in_inner(b, tr.endpoint(), delta)
            } else {
                tr.states.iter().all(|s| in_inner(b, s, delta))
            };
            Ok((edge, ok))
        })
        .collect::<Result<_, DynamicsError>>()?;
    for (x0, (edge, ok)) in probes.iter().zip(results) {
        if edge {
            report.edge_probes += 1;
        } else {
            report.interior_probes += 1;
        }
        if !ok {
            if edge {
                report.edge_violations += 1;
            } else {
                report.interior_violations += 1;
            }
            if report.examples.len() < MAX_LISTED_VIOLATIONS {
                report.examples.push(x0.clone());
            }
        }
    }
    report.pass = report.edge_violations == 0 && report.interior_violations == 0;
    Ok(report)
}

/// `sup_x |f(x) - g(x)|_inf` over `points`.
pub fn measure_sup_error<F, G>(f: F, g: G, points: &[Vec<f64>]) -> f64
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    points
        .par_iter()
        .map(|x| sup_distance(&f(x), &g(x)))
        .reduce(|| 0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub probes: usize,
    pub tau: f64,
    pub step: f64,
    pub max_deviation: f64,
    pub worst_probe: Vec<f64>,
    /// Controller gap measured at every RK stage state of both loops.
    pub mu_visited: f64,
    /// `max(mu_floor, mu_visited)`, the value fed to the bound.
    pub mu_used: f64,
    pub k_lip: f64,
    pub gronwall_bound: f64,
    pub delta: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
}

fn run_pair<A, B>(
    a: A,
    b: B,
    probes: &[Vec<f64>],
) -> Result<Vec<(Trajectory, Trajectory)>, DynamicsError>
where
    A: Fn(&Vec<f64>) -> Result<Trajectory, DynamicsError> + Sync,
    B: Fn(&Vec<f64>) -> Result<Trajectory, DynamicsError> + Sync,
{
    probes.par_iter().map(|x0| Ok((a(x0)?, b(x0)?))).collect()
}

fn worst(runs: &[(Trajectory, Trajectory)], probes: &[Vec<f64>]) -> (f64, Vec<f64>) {
    runs.iter()
        .zip(probes)
        .map(|((a, b), x0)| (sup_distance(a.endpoint(), b.endpoint()), x0.clone()))
        .fold((0.0, Vec::new()), |best, c| if c.0 > best.0 || best.1.is_empty() { c } else { best })
}

/// Endpoint gap between the `psi` and `upsilon` closed loops, compared with
/// `min(delta, K_u mu tau e^{(K_x + K_u k_lip) tau})`.
///
/// `mu` is the larger of `mu_floor` and the controller gap at every point
/// where either loop evaluated its controller; `k_lip` is a Lipschitz
/// constant of one of the two controllers.
#[allow(clippy::too_many_arguments)]
pub fn deviation_audit<P, U>(
    model: &ControlSystemModel,
    psi: P,
    upsilon: U,
    tau: f64,
    step: f64,
    probes: &[Vec<f64>],
    mu_floor: f64,
    k_lip: f64,
    delta: Option<f64>,
) -> Result<DeviationReport, DynamicsError>
where
    P: Fn(&[f64]) -> Vec<f64> + Sync,
    U: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let runs = run_pair(
        |x0| integrate_closed_loop(model, &psi, x0, tau, step),
        |x0| integrate_closed_loop(model, &upsilon, x0, tau, step),
        probes,
    )?;
    let visited: Vec<Vec<f64>> = runs
        .iter()
        .flat_map(|(a, b)| a.visited().chain(b.visited()).cloned())
        .collect();
    let mu_visited = measure_sup_error(&psi, &upsilon, &visited);
    let mu_used = mu_floor.max(mu_visited);
    let bound = sizing::gronwall_bound(mu_used, model.k_x, model.k_u, k_lip, tau)?;
    let threshold = delta.map_or(bound, |d| d.min(bound));
    let (max_deviation, worst_probe) = worst(&runs, probes);
    Ok(DeviationReport {
        probes: probes.len(),
        tau,
        step: runs.first().map_or(step, |r| r.0.step),
        max_deviation,
        worst_probe,
        mu_visited,
        mu_used,
        k_lip,
        gronwall_bound: bound,
        delta,
        threshold,
        pass: max_deviation <= threshold + INTEGRATOR_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SysidReport {
    pub probes: usize,
    pub tau: f64,
    pub step: f64,
    pub max_deviation: f64,
    pub worst_probe: Vec<f64>,
    /// Vector-field gap at every visited (state, control) pair.
    pub mu_visited: f64,
    pub mu_used: f64,
    pub k_cont: f64,
    pub budget: f64,
    pub pass: bool,
}

/// Endpoint gap between closed loops under the true field and a surrogate,
/// compared with `K_u mu tau e^{(K_x + K_u k_cont) tau}` where `mu` is the
/// larger of `mu_floor` and the field gap at every visited stage pair.
#[allow(clippy::too_many_arguments)]
pub fn sysid_deviation_audit<P>(
    truth: &ControlSystemModel,
    surrogate: &ControlSystemModel,
    psi: P,
    tau: f64,
    step: f64,
    probes: &[Vec<f64>],
    mu_floor: f64,
    k_cont: f64,
) -> Result<SysidReport, DynamicsError>
where
    P: Fn(&[f64]) -> Vec<f64> + Sync,
{
    if truth.n != surrogate.n || truth.m != surrogate.m {
        return Err(DynamicsError::DimensionMismatch {
            expected: truth.n + truth.m,
            got: surrogate.n + surrogate.m,
        });
    }
    let runs = run_pair(
        |x0| integrate_closed_loop(truth, &psi, x0, tau, step),
        |x0| integrate_closed_loop(surrogate, &psi, x0, tau, step),
        probes,
    )?;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = runs
        .iter()
        .flat_map(|(a, b)| a.visited_pairs().chain(b.visited_pairs()))
        .map(|(x, u)| (x.clone(), u.clone()))
        .collect();
    let mu_visited = pairs
        .par_iter()
        .map(|(x, u)| sup_distance(&truth.eval(x, u), &surrogate.eval(x, u)))
        .reduce(|| 0.0, f64::max);
    let mu_used = mu_floor.max(mu_visited);
    let budget = sizing::sysid_budget(mu_used, truth.k_x, truth.k_u, k_cont, tau)?;
    let (max_deviation, worst_probe) = worst(&runs, probes);
    Ok(SysidReport {
        probes: probes.len(),
        tau,
        step: runs.first().map_or(step, |r| r.0.step),
        max_deviation,
        worst_probe,
        mu_visited,
        mu_used,
        k_cont,
        budget,
        pass: max_deviation <= budget + INTEGRATOR_TOL,
    })
}
