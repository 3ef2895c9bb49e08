use sha2::{Digest, Sha256};

use super::{ControlSystemModel, DynamicsError};

/// A fixed-step RK4 solution of the closed loop.
///
/// `stage_states[k]` and `stage_controls[k]` hold the four RK stage points of
/// step `k` and the controls applied there.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub step: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stage_states: Vec<[Vec<f64>; 4]>,
    pub stage_controls: Vec<[Vec<f64>; 4]>,
}

impl Trajectory {
    pub fn endpoint(&self) -> &[f64] {
        self.states.last().expect("trajectory holds x0")
    }

    /// Every point at which the controller was evaluated.
    pub fn visited(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.stage_states.iter().flat_map(|s| s.iter())
    }

    /// Controls paired with the stage states they were applied at.
    pub fn visited_pairs(&self) -> impl Iterator<Item = (&Vec<f64>, &Vec<f64>)> {
        self.stage_states
            .iter()
            .zip(&self.stage_controls)
            .flat_map(|(s, c)| s.iter().zip(c.iter()))
    }

    /// Canonical label of the applied control segment.
    pub fn label(&self) -> String {
        control_label(self.stage_controls.iter().flat_map(|c| c.iter()))
    }
}

/// Hashes controls rounded to `1e-9` into a short opaque label.
pub fn control_label<'a>(controls: impl Iterator<Item = &'a Vec<f64>>) -> String {
    let mut h = Sha256::new();
    for u in controls {
        for v in u {
            let q = (v * 1e9).round() as i64;
            h.update(q.to_le_bytes());
        }
        h.update([0xff]);
    }
    let digest = h.finalize();
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    format!("u:{hex}")
}

/// Integrates `x' = f(x, controller(x))` from `x0` over `[0, tau]` with
/// classical RK4. The step is shrunk so that it divides `tau` exactly.
pub fn integrate_closed_loop<C>(
    model: &ControlSystemModel,
    controller: C,
    x0: &[f64],
    tau: f64,
    step: f64,
) -> Result<Trajectory, DynamicsError>
where
    C: Fn(&[f64]) -> Vec<f64>,
{
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(DynamicsError::StepInvalid(format!("horizon {tau} must be finite and >= 0")));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(DynamicsError::StepInvalid(format!("step {step} must be finite and > 0")));
    }
    if x0.len() != model.n {
        return Err(DynamicsError::DimensionMismatch {
            expected: model.n,
            got: x0.len(),
        });
    }
    let steps = (tau / step - 1e-9).ceil().max(if tau > 0.0 { 1.0 } else { 0.0 }) as usize;
    let h = if steps == 0 { step } else { tau / steps as f64 };

    let closed = |x: &[f64]| -> Result<(Vec<f64>, Vec<f64>), DynamicsError> {
        let u = controller(x);
        if u.len() != model.m {
            return Err(DynamicsError::DimensionMismatch {
                expected: model.m,
                got: u.len(),
            });
        }
        let dx = model.eval(x, &u);
        Ok((dx, u))
    };
    let axpy = |x: &[f64], a: f64, k: &[f64]| -> Vec<f64> { x.iter().zip(k).map(|(x, k)| x + a * k).collect() };

    let mut times = vec![0.0];
    let mut states = vec![x0.to_vec()];
    let mut stage_states = Vec::with_capacity(steps);
    let mut stage_controls = Vec::with_capacity(steps);
    let mut x = x0.to_vec();
    for k in 0..steps {
        let s1 = x.clone();
        let (k1, u1) = closed(&s1)?;
        let s2 = axpy(&x, 0.5 * h, &k1);
        let (k2, u2) = closed(&s2)?;
        let s3 = axpy(&x, 0.5 * h, &k2);
        let (k3, u3) = closed(&s3)?;
        let s4 = axpy(&x, h, &k3);
        let (k4, u4) = closed(&s4)?;
        x = (0..x.len())
            .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        let t = (k + 1) as f64 * h;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::NonFiniteState { time: t, state: x });
        }
        times.push(t);
        states.push(x.clone());
        stage_states.push([s1, s2, s3, s4]);
        stage_controls.push([u1, u2, u3, u4]);
    }
    Ok(Trajectory {
        step: h,
        times,
        states,
        stage_states,
        stage_controls,
    })
}

#[cfg(test)]
mod tests {
    use super::super::model::{linear, pendulum};
    use super::*;
    use crate::geometry::BoxDomain;
    use std::sync::Arc;

    #[test]
    fn zero_field_stays_put() {
        let m = ControlSystemModel::new(
            "zero",
            Arc::new(|_: &[f64], _: &[f64]| vec![0.0, 0.0]),
            BoxDomain::cube(2, -1.0, 1.0).unwrap(),
            BoxDomain::cube(1, -1.0, 1.0).unwrap(),
            0.0,
            0.0,
        );
        let tr = integrate_closed_loop(&m, |_| vec![0.3], &[0.2, -0.4], 1.0, 0.1).unwrap();
        assert_eq!(tr.endpoint(), &[0.2, -0.4]);
        assert_eq!(tr.states.len(), 11);
    }

    #[test]
    fn decay_matches_exponential() {
        let m = linear(-1.0, 1.0);
        let tr = integrate_closed_loop(&m, |_| vec![0.0], &[0.8], 1.0, 0.01).unwrap();
        let want = 0.8 * (-1.0f64).exp();
        assert!((tr.endpoint()[0] - want).abs() < 1e-9);
    }

    #[test]
    fn step_adjusted_down() {
        let m = linear(-1.0, 1.0);
        let tr = integrate_closed_loop(&m, |_| vec![0.0], &[0.5], 1.0, 0.3).unwrap();
        assert_eq!(tr.states.len(), 5);
        assert!((tr.step - 0.25).abs() < 1e-15);
        assert!((tr.times.last().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs() {
        let m = linear(-1.0, 1.0);
        for step in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                integrate_closed_loop(&m, |_| vec![0.0], &[0.5], 1.0, step),
                Err(DynamicsError::StepInvalid(_))
            ));
        }
        let blow = linear(1.0, 0.0);
        let err = integrate_closed_loop(&blow, |_| vec![0.0], &[1.0], 1e4, 1.0);
        assert!(matches!(err, Err(DynamicsError::NonFiniteState { .. })));
    }

    #[test]
    fn pendulum_fine_step_reference() {
        let m = pendulum();
        let psi = |x: &[f64]| vec![-(x[0] + x[1]).tanh()];
        let coarse = integrate_closed_loop(&m, psi, &[0.7, -0.3], 0.5, 0.5 / 100.0).unwrap();
        let fine = integrate_closed_loop(&m, psi, &[0.7, -0.3], 0.5, 0.5 / 1000.0).unwrap();
        let gap = crate::geometry::sup_distance(coarse.endpoint(), fine.endpoint());
        assert!(gap < 1e-8, "{gap}");
    }

    #[test]
    fn labels_depend_on_controls_only() {
        let m = linear(-1.0, 1.0);
        let a = integrate_closed_loop(&m, |_| vec![0.5], &[0.1], 0.2, 0.1).unwrap();
        let b = integrate_closed_loop(&m, |_| vec![0.5], &[-0.7], 0.2, 0.1).unwrap();
        let c = integrate_closed_loop(&m, |_| vec![0.25], &[0.1], 0.2, 0.1).unwrap();
        assert_eq!(a.label(), b.label());
        assert_ne!(a.label(), c.label());
        assert!(a.label().starts_with("u:"));
    }
}
