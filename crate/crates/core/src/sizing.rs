//! Closed-form budgets: controller error `mu` from `(delta, tau)`, grid
//! spacing `eta` from `mu`, network sizes, and Grönwall deviation bounds.
//!
//! All inequalities in the underlying results are strict. Each bound here is
//! returned as its closed-form boundary value; a caller who needs a strictly
//! feasible value shrinks it by [`STRICT_MARGIN`] (see [`strictly_below`]).

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative margin used to step strictly inside a strict inequality.
pub const STRICT_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SizingError {
    #[error("budget field {field} must be {requirement}, got {value}")]
    NonPositiveBudget {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("dimension must be at least 1")]
    ZeroDimension,
}

/// Multiplier on `K_u * K_cont` in the controller-budget exponent.
///
/// `Two` reproduces the printed architecture theorem; `Three` follows from
/// chaining the Grönwall lemma with the interpolant's `3 K_cont` Lipschitz
/// constant and is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(try_from = "u8", into = "u8")]
pub enum ExponentMultiplier {
    Two,
    #[default]
    Three,
}

impl ExponentMultiplier {
    pub fn value(self) -> f64 {
        match self {
            ExponentMultiplier::Two => 2.0,
            ExponentMultiplier::Three => 3.0,
        }
    }
}

impl TryFrom<u8> for ExponentMultiplier {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            2 => Ok(ExponentMultiplier::Two),
            3 => Ok(ExponentMultiplier::Three),
            other => Err(format!("exponent multiplier must be 2 or 3, got {other}")),
        }
    }
}

impl From<ExponentMultiplier> for u8 {
    fn from(c: ExponentMultiplier) -> u8 {
        match c {
            ExponentMultiplier::Two => 2,
            ExponentMultiplier::Three => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecBudget {
    pub k_x: f64,
    pub k_u: f64,
    pub k_cont: f64,
    pub tau: f64,
    pub delta: f64,
    #[serde(default)]
    pub exponent_multiplier: ExponentMultiplier,
}

impl SpecBudget {
    pub fn validate(&self) -> Result<(), SizingError> {
        nonneg("k_x", self.k_x)?;
        nonneg("k_u", self.k_u)?;
        positive("k_cont", self.k_cont)?;
        positive("tau", self.tau)?;
        positive("delta", self.delta)?;
        Ok(())
    }
}

fn positive(field: &'static str, value: f64) -> Result<(), SizingError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SizingError::NonPositiveBudget {
            field,
            requirement: "finite and > 0",
            value,
        })
    }
}

fn nonneg(field: &'static str, value: f64) -> Result<(), SizingError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SizingError::NonPositiveBudget {
            field,
            requirement: "finite and >= 0",
            value,
        })
    }
}

/// Boundary value `mu*` of `K_u mu tau e^{(K_x + c K_u K_cont) tau} < delta`.
/// Every `mu < mu*` is admissible. `K_u = 0` yields `+inf`.
pub fn mu_max(budget: &SpecBudget) -> Result<f64, SizingError> {
    budget.validate()?;
    if budget.k_u == 0.0 {
        log::warn!("k_u = 0: controller error cannot perturb the dynamics, mu is unbounded");
        return Ok(f64::INFINITY);
    }
    let c = budget.exponent_multiplier.value();
    let rate = budget.k_x + c * budget.k_u * budget.k_cont;
    Ok(budget.delta / (budget.k_u * budget.tau * (rate * budget.tau).exp()))
}

/// Largest admissible grid spacing `mu / (3 K_cont)`.
pub fn eta_max(mu: f64, k_cont: f64) -> Result<f64, SizingError> {
    positive("mu", mu).or_else(|e| if mu == f64::INFINITY { Ok(()) } else { Err(e) })?;
    positive("k_cont", k_cont)?;
    Ok(mu / (3.0 * k_cont))
}

/// `value * (1 - STRICT_MARGIN)`, a point strictly inside a strict bound.
pub fn strictly_below(value: f64) -> f64 {
    value * (1.0 - STRICT_MARGIN)
}

fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::from(1u32), |acc, k| acc * BigUint::from(k))
}

/// Number of interpolation hypercubes per axis, `ceil(ext / eta + 2)`.
pub fn cubes_per_axis(ext: f64, eta: f64) -> Result<u64, SizingError> {
    positive("eta", eta)?;
    nonneg("ext", ext)?;
    let per_axis = (ext / eta + 2.0).ceil();
    if per_axis > u64::MAX as f64 {
        return Err(SizingError::NonPositiveBudget {
            field: "eta",
            requirement: "large enough for a finite grid",
            value: eta,
        });
    }
    Ok(per_axis as u64)
}

/// Upper bound on interpolation hypercubes, `ceil(ext / eta + 2)^n`.
pub fn hypercube_bound(n: usize, ext: f64, eta: f64) -> Result<BigUint, SizingError> {
    if n == 0 {
        return Err(SizingError::ZeroDimension);
    }
    Ok(BigUint::from(cubes_per_axis(ext, eta)?).pow(n as u32))
}

/// Controller network size `n! * ceil(ext / eta + 2)^n`.
pub fn controller_size(n: usize, ext: f64, eta: f64) -> Result<BigUint, SizingError> {
    Ok(factorial(n) * hypercube_bound(n, ext, eta)?)
}

/// Identification network size `(n+m)! * ceil(ext / eta + 2)^(n+m)`, where
/// `ext` is the extent of `X × U`.
pub fn sysid_size(n: usize, m: usize, ext_xu: f64, eta: f64) -> Result<BigUint, SizingError> {
    controller_size(n + m, ext_xu, eta)
}

/// Boundary value of the identification budget
/// `K_u mu tau e^{(K_x + K_u K_cont) tau}`; admissible `delta` must exceed it.
pub fn sysid_budget(mu: f64, k_x: f64, k_u: f64, k_cont: f64, tau: f64) -> Result<f64, SizingError> {
    nonneg("mu", mu)?;
    nonneg("k_x", k_x)?;
    nonneg("k_u", k_u)?;
    nonneg("k_cont", k_cont)?;
    nonneg("tau", tau)?;
    Ok(k_u * mu * tau * ((k_x + k_u * k_cont) * tau).exp())
}

/// Recommended `delta` for identification: the budget inflated by `margin`.
pub fn sysid_delta(bound: f64, margin: f64) -> f64 {
    bound * (1.0 + margin)
}

/// Grönwall bound `K_u mu tau e^{(K_x + K_u K_lip) tau}` on the endpoint gap
/// between closed loops whose controllers differ by at most `mu`.
pub fn gronwall_bound(mu: f64, k_x: f64, k_u: f64, k_lip: f64, tau: f64) -> Result<f64, SizingError> {
    nonneg("mu", mu)?;
    nonneg("k_x", k_x)?;
    nonneg("k_u", k_u)?;
    nonneg("k_lip", k_lip)?;
    nonneg("tau", tau)?;
    Ok(k_u * mu * tau * ((k_x + k_u * k_lip) * tau).exp())
}

/// An exact integer together with its nearest `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactCount {
    pub exact: String,
    pub approx: f64,
}

impl From<&BigUint> for ExactCount {
    fn from(v: &BigUint) -> Self {
        ExactCount {
            exact: v.to_string(),
            approx: v.to_f64().unwrap_or(f64::INFINITY),
        }
    }
}

/// One formula evaluation in a sizing report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaStep {
    pub quantity: String,
    pub formula: String,
    pub value: f64,
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizingResult {
    pub budget: SpecBudget,
    pub state_dim: usize,
    pub control_dim: usize,
    pub ext_x: f64,
    /// `None` when `mu` is unbounded (`K_u = 0`).
    pub mu_max: Option<f64>,
    pub eta: f64,
    pub eta_overridden: bool,
    pub hypercube_bound: ExactCount,
    pub n_control: ExactCount,
    pub ext_xu: Option<f64>,
    pub n_sysid: Option<ExactCount>,
    pub audit: Vec<FormulaStep>,
}

/// Runs the whole chain `mu_max -> eta_max -> sizes`.
///
/// `eta_override` replaces the derived spacing (it must not exceed it unless
/// `mu` is unbounded). `ext_xu` enables the identification size.
pub fn size_all(
    budget: &SpecBudget,
    state_dim: usize,
    control_dim: usize,
    ext_x: f64,
    ext_xu: Option<f64>,
    eta_override: Option<f64>,
) -> Result<SizingResult, SizingError> {
    if state_dim == 0 {
        return Err(SizingError::ZeroDimension);
    }
    let mu = mu_max(budget)?;
    let c = u8::from(budget.exponent_multiplier);
    let mut audit = vec![FormulaStep {
        quantity: "mu_max".into(),
        formula: format!(
            "delta / (K_u * tau * exp((K_x + {c} * K_u * K_cont) * tau)), strict upper bound"
        ),
        value: mu,
        strict: true,
    }];
    let derived_eta = eta_max(mu, budget.k_cont)?;
    audit.push(FormulaStep {
        quantity: "eta_max".into(),
        formula: "mu_max / (3 * K_cont)".into(),
        value: derived_eta,
        strict: false,
    });
    let eta = match eta_override {
        Some(e) => {
            positive("eta", e)?;
            if e > derived_eta {
                log::warn!("eta override {e} exceeds the derived bound {derived_eta}");
            }
            e
        }
        None => derived_eta,
    };
    if !eta.is_finite() {
        return Err(SizingError::NonPositiveBudget {
            field: "eta",
            requirement: "finite (supply an override when K_u = 0)",
            value: eta,
        });
    }
    let cubes = hypercube_bound(state_dim, ext_x, eta)?;
    audit.push(FormulaStep {
        quantity: "hypercube_bound".into(),
        formula: "ceil(ext(X) / eta + 2)^n".into(),
        value: cubes.to_f64().unwrap_or(f64::INFINITY),
        strict: false,
    });
    let n_control = controller_size(state_dim, ext_x, eta)?;
    audit.push(FormulaStep {
        quantity: "N_control".into(),
        formula: "n! * ceil(ext(X) / eta + 2)^n".into(),
        value: n_control.to_f64().unwrap_or(f64::INFINITY),
        strict: false,
    });
    let n_sysid = match ext_xu {
        Some(ext) => {
            let v = sysid_size(state_dim, control_dim, ext, eta)?;
            audit.push(FormulaStep {
                quantity: "N_sysid".into(),
                formula: "(n+m)! * ceil(ext(X x U) / eta + 2)^(n+m)".into(),
                value: v.to_f64().unwrap_or(f64::INFINITY),
                strict: false,
            });
            Some(ExactCount::from(&v))
        }
        None => None,
    };
    Ok(SizingResult {
        budget: *budget,
        state_dim,
        control_dim,
        ext_x,
        mu_max: mu.is_finite().then_some(mu),
        eta,
        eta_overridden: eta_override.is_some(),
        hypercube_bound: ExactCount::from(&cubes),
        n_control: ExactCount::from(&n_control),
        ext_xu,
        n_sysid,
        audit,
    })
}

/// Evaluates `mu_max` over candidate `tau` values and returns the maximizer
/// with every evaluation.
pub fn sweep_tau(budget: &SpecBudget, taus: &[f64]) -> Result<(f64, Vec<(f64, f64)>), SizingError> {
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        let b = SpecBudget { tau, ..*budget };
        rows.push((tau, mu_max(&b)?));
    }
    let best = rows
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(t, _)| t)
        .ok_or(SizingError::NonPositiveBudget {
            field: "taus",
            requirement: "non-empty",
            value: 0.0,
        })?;
    Ok((best, rows))
}
