use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{sup_distance, BoxDomain};

/// `f(x, u) -> dx/dt`.
pub type VectorField = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// A control system `dx/dt = f(x, u)` on `X x U` with declared Lipschitz
/// constants (max-norm) in `x` and in `u`.
#[derive(Clone)]
pub struct ControlSystemModel {
    pub name: String,
    pub n: usize,
    pub m: usize,
    field: VectorField,
    pub x: BoxDomain,
    pub u: BoxDomain,
    pub k_x: f64,
    pub k_u: f64,
}

impl fmt::Debug for ControlSystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlSystemModel")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("x", &self.x)
            .field("u", &self.u)
            .field("k_x", &self.k_x)
            .field("k_u", &self.k_u)
            .finish()
    }
}

impl ControlSystemModel {
    pub fn new(
        name: impl Into<String>,
        field: VectorField,
        x: BoxDomain,
        u: BoxDomain,
        k_x: f64,
        k_u: f64,
    ) -> Self {
        ControlSystemModel {
            name: name.into(),
            n: x.dim(),
            m: u.dim(),
            field,
            x,
            u,
            k_x,
            k_u,
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        (self.field)(x, u)
    }

    /// Same domains and constants, different vector field (e.g. a learned
    /// surrogate).
    pub fn with_field(&self, name: impl Into<String>, field: VectorField) -> Self {
        ControlSystemModel {
            name: name.into(),
            field,
            ..self.clone()
        }
    }

    /// `X x U`.
    pub fn state_control_box(&self) -> BoxDomain {
        self.x.product(&self.u)
    }
}

/// Damped pendulum `x1' = x2, x2' = -sin x1 - 0.5 x2 + u` on `[-1,1]^2 x [-2,2]`.
///
/// Jacobian rows in `x` are `(0, 1)` and `(-cos x1, -0.5)`, so the max-norm
/// constant is `max(1, 1 + 0.5) = 1.5`; the `u` column is `(0, 1)`.
pub fn pendulum() -> ControlSystemModel {
    ControlSystemModel::new(
        "pendulum",
        Arc::new(|x: &[f64], u: &[f64]| vec![x[1], -x[0].sin() - 0.5 * x[1] + u[0]]),
        BoxDomain::cube(2, -1.0, 1.0).unwrap(),
        BoxDomain::cube(1, -2.0, 2.0).unwrap(),
        1.5,
        1.0,
    )
}

/// Controlled Van der Pol oscillator with damping 1 on `[-1,1]^2 x [-1,1]`.
///
/// Second Jacobian row: `|-2 x1 x2 - 1| + |1 - x1^2| <= 3 + 1`.
pub fn van_der_pol() -> ControlSystemModel {
    ControlSystemModel::new(
        "van_der_pol",
        Arc::new(|x: &[f64], u: &[f64]| vec![x[1], (1.0 - x[0] * x[0]) * x[1] - x[0] + u[0]]),
        BoxDomain::cube(2, -1.0, 1.0).unwrap(),
        BoxDomain::cube(1, -1.0, 1.0).unwrap(),
        4.0,
        1.0,
    )
}

/// Scalar `x' = a x + b u` on `[-1,1] x [-1,1]`.
pub fn linear(a: f64, b: f64) -> ControlSystemModel {
    ControlSystemModel::new(
        "linear",
        Arc::new(move |x: &[f64], u: &[f64]| vec![a * x[0] + b * u[0]]),
        BoxDomain::cube(1, -1.0, 1.0).unwrap(),
        BoxDomain::cube(1, -1.0, 1.0).unwrap(),
        a.abs(),
        b.abs(),
    )
}

/// Exact flow of `x' = a x + b u` under a constant `u`.
pub fn linear_flow(a: f64, b: f64, x0: f64, u: f64, t: f64) -> f64 {
    if a == 0.0 {
        x0 + b * u * t
    } else {
        let e = (a * t).exp();
        e * x0 + b * u / a * (e - 1.0)
    }
}

pub fn builtin_models() -> Vec<ControlSystemModel> {
    vec![pendulum(), van_der_pol(), linear(-1.0, 1.0)]
}

pub fn builtin_model(name: &str) -> Option<ControlSystemModel> {
    builtin_models().into_iter().find(|m| m.name == name)
}

/// Rounding allowance for difference quotients over pairs `1e-3` apart.
const FD_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzSampleReport {
    pub model: String,
    pub pairs: usize,
    pub seed: u64,
    pub k_x_declared: f64,
    pub k_x_measured: f64,
    pub k_u_declared: f64,
    pub k_u_measured: f64,
    pub pass: bool,
}

/// Largest quotients `|f(x,u) - f(x',u)| / |x - x'|` and
/// `|f(x,u) - f(x,u')| / |u - u'|` over random pairs in `X x U`.
pub fn lipschitz_sample_audit(model: &ControlSystemModel, pairs: usize, seed: u64) -> LipschitzSampleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |b: &BoxDomain, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..b.dim())
            .map(|i| rng.gen_range(b.lower()[i]..=b.upper()[i]))
            .collect()
    };
    let mut kx: f64 = 0.0;
    let mut ku: f64 = 0.0;
    for k in 0..pairs {
        let x = draw(&model.x, &mut rng);
        let u = draw(&model.u, &mut rng);
        // Half of the pairs are close together, where the local slope is attained.
        let (x2, u2) = if k % 2 == 0 {
            (draw(&model.x, &mut rng), draw(&model.u, &mut rng))
        } else {
            let nudge = |v: &[f64], b: &BoxDomain, rng: &mut ChaCha8Rng| -> Vec<f64> {
                v.iter()
                    .enumerate()
                    .map(|(i, c)| (c + rng.gen_range(-1e-3..1e-3)).clamp(b.lower()[i], b.upper()[i]))
                    .collect()
            };
            (nudge(&x, &model.x, &mut rng), nudge(&u, &model.u, &mut rng))
        };
        let f = model.eval(&x, &u);
        let dx = sup_distance(&x, &x2);
        if dx > 0.0 {
            kx = kx.max(sup_distance(&f, &model.eval(&x2, &u)) / dx);
        }
        let du = sup_distance(&u, &u2);
        if du > 0.0 {
            ku = ku.max(sup_distance(&f, &model.eval(&x, &u2)) / du);
        }
    }
    LipschitzSampleReport {
        model: model.name.clone(),
        pairs,
        seed,
        k_x_declared: model.k_x,
        k_x_measured: kx,
        k_u_declared: model.k_u,
        k_u_measured: ku,
        pass: kx <= model.k_x * (1.0 + FD_SLACK) + FD_SLACK && ku <= model.k_u * (1.0 + FD_SLACK) + FD_SLACK,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog() {
        let names: Vec<String> = builtin_models().into_iter().map(|m| m.name).collect();
        assert_eq!(names, ["pendulum", "van_der_pol", "linear"]);
        let lin = builtin_model("linear").unwrap();
        assert_eq!((lin.k_x, lin.k_u), (1.0, 1.0));
        assert_eq!(pendulum().k_x, 1.5);
        assert!(builtin_model("nope").is_none());
    }

    #[test]
    fn declared_constants_hold_on_samples() {
        for m in builtin_models() {
            let r = lipschitz_sample_audit(&m, 100_000, 17);
            assert!(r.pass, "{r:?}");
            // the sampled slope should come close to the declared constant
            assert!(r.k_u_measured > 0.9 * m.k_u, "{r:?}");
        }
    }

    #[test]
    fn linear_flow_matches_ode() {
        // d/dt of the flow equals the field
        let (a, b, x0, u) = (-0.7, 2.0, 0.3, -0.4);
        let t = 0.8;
        let h = 1e-6;
        let d = (linear_flow(a, b, x0, u, t + h) - linear_flow(a, b, x0, u, t - h)) / (2.0 * h);
        assert!((d - (a * linear_flow(a, b, x0, u, t) + b * u)).abs() < 1e-8);
        assert_eq!(linear_flow(0.0, 1.0, 1.0, 2.0, 0.5), 2.0);
    }
}
