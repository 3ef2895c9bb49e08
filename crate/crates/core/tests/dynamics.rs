use std::collections::BTreeSet;

use proptest::prelude::*;
use tllsize::cpwa::CpwaInterpolant;
use tllsize::dynamics::{
    builtin_model, check_ads, check_simulation, deviation_audit, embed_tau_sampled, greatest_ads_relation,
    greatest_simulation, integrate_closed_loop, is_ads_relation, is_simulation, linear_flow, perturb,
    FiniteTransitionSystem,
};
use tllsize::geometry::{build_eta_grid, BoxDomain};
use tllsize::tll::compile_tll;

fn arb_system(max_states: usize) -> impl Strategy<Value = FiniteTransitionSystem> {
    (2..=max_states).prop_flat_map(|n| {
        (
            // distinct coordinates: a permutation of 0..n scaled and jittered
            Just(n),
            prop::collection::vec(0.0f64..0.4, n),
            prop::collection::vec((0..n, 0..2usize, 0..n), 0..=2 * n),
        )
            .prop_map(|(n, jitter, edges)| {
                let mut ts = FiniteTransitionSystem::new();
                for (i, j) in jitter.iter().enumerate().take(n) {
                    ts.add_state(vec![i as f64 + j]);
                }
                for (s, l, d) in edges {
                    ts.add_transition(s, ["a", "b"][l], d).unwrap();
                }
                ts
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// RK4 against the closed-form flow of `x' = a x + u` under constant `u`,
    /// and against RK4's own closed form: the offset from the equilibrium
    /// `-u/a` is multiplied by `1 + z + z^2/2 + z^3/6 + z^4/24`, `z = a h`,
    /// every step.
    #[test]
    fn rk4_matches_linear_flow(a in prop_oneof![-2.0f64..-0.01, 0.01f64..2.0], x0 in -1.0f64..1.0, u in -1.0f64..1.0, tau in 0.05f64..1.0) {
        let model = tllsize::dynamics::ControlSystemModel::new(
            "lin",
            std::sync::Arc::new(move |x: &[f64], u: &[f64]| vec![a * x[0] + u[0]]),
            BoxDomain::cube(1, -1.0, 1.0).unwrap(),
            BoxDomain::cube(1, -1.0, 1.0).unwrap(),
            a.abs(),
            1.0,
        );
        let tr = integrate_closed_loop(&model, |_: &[f64]| vec![u], &[x0], tau, tau / 100.0).unwrap();
        let exact = linear_flow(a, 1.0, x0, u, tau);
        // global error is O(h^4); with h <= 0.01 and |a| <= 2 it stays far below 1e-7
        prop_assert!((tr.endpoint()[0] - exact).abs() <= 1e-7);
        let z = a * tr.step;
        let gain = 1.0 + z + z * z / 2.0 + z * z * z / 6.0 + z * z * z * z / 24.0;
        let steps = tr.times.len() as i32 - 1;
        let rk = -u / a + (x0 + u / a) * gain.powi(steps);
        prop_assert!((tr.endpoint()[0] - rk).abs() <= 1e-12 * (1.0 + (u / a).abs()), "{} vs {rk}", tr.endpoint()[0]);
        prop_assert!((tr.times.last().unwrap() - tau).abs() <= 1e-12);
    }

    /// A wider gate seeds more pairs, so the greatest simulation can only grow.
    #[test]
    fn simulation_grows_with_gate(a in arb_system(5), b in arb_system(5), g1 in 0.0f64..3.0, extra in 0.0f64..3.0) {
        let small = greatest_simulation(&a, &b, Some(g1));
        let large = greatest_simulation(&a, &b, Some(g1 + extra));
        let free = greatest_simulation(&a, &b, None);
        prop_assert!(small.is_subset(&large));
        prop_assert!(large.is_subset(&free));
        prop_assert!(is_simulation(&a, &b, &small));
        prop_assert!(is_simulation(&a, &b, &free));
    }

    /// The computed ADS relation satisfies its defining conditions, and no
    /// excluded pair within `delta` can be added back on its own.
    #[test]
    fn ads_relation_is_valid_and_maximal(a in arb_system(4), b in arb_system(4), delta in 0.0f64..1.5) {
        let rel = greatest_ads_relation(&a, &b, delta);
        prop_assert!(is_ads_relation(&a, &b, delta, &rel));
        for x in 0..a.state_count() {
            for y in 0..b.state_count() {
                if rel.contains(&(x, y)) {
                    continue;
                }
                let mut bigger = rel.clone();
                bigger.insert((x, y));
                prop_assert!(!is_ads_relation(&a, &b, delta, &bigger));
            }
        }
        prop_assert_eq!(check_ads(&a, &b, delta).is_total(), (0..a.state_count()).all(|x| rel.iter().any(|p| p.0 == x)));
    }

    /// Perturbation only adds transitions, more for larger radii, and none at
    /// radius zero when coordinates are distinct.
    #[test]
    fn perturbation_is_monotone(a in arb_system(5), d1 in 0.0f64..2.0, extra in 0.0f64..2.0) {
        let p0 = perturb(&a, 0.0);
        prop_assert_eq!(p0.transitions(), a.transitions());
        let p1 = perturb(&a, d1);
        let p2 = perturb(&a, d1 + extra);
        prop_assert!(a.transitions().is_subset(p1.transitions()));
        prop_assert!(p1.transitions().is_subset(p2.transitions()));
    }

    #[test]
    fn transition_system_json_round_trip(a in arb_system(6)) {
        let back = FiniteTransitionSystem::from_json(&a.to_json()).unwrap();
        prop_assert_eq!(back.transitions(), a.transitions());
        prop_assert_eq!(back.states(), a.states());
    }
}

/// Samples every `0.01` on `[-1, 1]`.
fn lattice_states() -> Vec<Vec<f64>> {
    (0..=200).map(|i| vec![-1.0 + 0.01 * i as f64]).collect()
}

/// Closed loop `x' = -x + u` with `psi(x) = -0.5 x` and its network copy:
/// the abstractions coincide, the Grönwall audit passes, and shifting the
/// controller by 1 breaks the zero-disturbance simulation.
#[test]
fn linear_chain_from_controller_to_abstraction() {
    let model = builtin_model("linear").unwrap();
    let psi = |x: &[f64]| vec![-0.5 * x[0]];
    let (k, tau, delta): (f64, f64, f64) = (0.5, 0.2, 0.1);
    let mu = delta / (tau * ((1.0 + 3.0 * k) * tau).exp());
    let grid = build_eta_grid(&model.x, mu / (3.0 * k)).unwrap();
    // an affine controller is reproduced exactly when every corner is sampled
    let interp = CpwaInterpolant::build_from_oracle_everywhere(grid, psi, 1, k).unwrap();
    let net = compile_tll(&interp).unwrap();
    let upsilon = |x: &[f64]| net.eval(x);

    let step = tau / 100.0;
    let states = lattice_states();
    let snap = 0.005;
    let ts_psi = embed_tau_sampled(&model, psi, &states, tau, step, snap).unwrap();
    let ts_net = embed_tau_sampled(&model, upsilon, &states, tau, step, snap).unwrap();
    assert_eq!(ts_psi.state_count(), 201, "contracting loop stays on the lattice");
    assert!(check_ads(&ts_net, &ts_psi, 0.0).is_total());
    assert!(check_simulation(&ts_net, &ts_psi, Some(0.0)).is_total());

    let probes: Vec<Vec<f64>> = (0..=40).map(|i| vec![-1.0 + 0.05 * i as f64]).collect();
    let r = deviation_audit(&model, psi, upsilon, tau, step, &probes, 0.0, 3.0 * k, Some(delta)).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.mu_visited <= 1e-12);

    let shifted = |x: &[f64]| vec![-0.5 * x[0] + 1.0];
    let ts_bad = embed_tau_sampled(&model, shifted, &states, tau, step, snap).unwrap();
    match check_ads(&ts_bad, &ts_psi, 0.0) {
        tllsize::dynamics::SimulationOutcome::Counterexample { left_state, .. } => {
            assert!(ts_bad.coords(left_state)[0] >= -1.0);
        }
        other => panic!("shifted controller should not be simulated: {other:?}"),
    }
    let r = deviation_audit(&model, psi, shifted, tau, step, &probes, 0.0, 3.0 * k, Some(delta)).unwrap();
    assert!(!r.pass);
}

#[test]
fn embedding_is_deterministic_per_state() {
    let model = builtin_model("pendulum").unwrap();
    let samples = model.x.lattice(5);
    let ts = embed_tau_sampled(&model, |x: &[f64]| vec![-(x[0] + x[1]).tanh()], &samples, 0.1, 0.01, 1e-6).unwrap();
    assert!(ts.is_deterministic());
    let sources: BTreeSet<usize> = ts.transitions().iter().map(|t| t.0).collect();
    assert_eq!(sources.len(), samples.len());
}
