//! Properties of the CPWA interpolant and its TLL compilation, checked
//! against brute-force oracles.

use proptest::prelude::*;
use tllsize::cpwa::{sample_controller, CpwaInterpolant};
use tllsize::geometry::{braid_simplices, build_eta_grid, interpolation_hypercubes, BoxDomain, SimplexId};
use tllsize::tll::{compile_tll, TllNetwork};

/// `max_p min_q (a . x + b)` with `|a|_1 <= k`, which is `k`-Lipschitz in
/// the max-norm.
#[derive(Debug, Clone)]
struct Lattice {
    groups: Vec<Vec<(Vec<f64>, f64)>>,
}

impl Lattice {
    fn eval(&self, x: &[f64]) -> f64 {
        self.groups
            .iter()
            .map(|g| {
                g.iter()
                    .map(|(a, b)| a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + b)
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn arb_lattice(n: usize, k: f64) -> impl Strategy<Value = Lattice> {
    let piece = (prop::collection::vec(-1.0f64..1.0, n), -1.0f64..1.0).prop_map(move |(raw, b)| {
        let l1: f64 = raw.iter().map(|v| v.abs()).sum::<f64>().max(1e-9);
        (raw.iter().map(|v| v * k / l1).collect(), b)
    });
    prop::collection::vec(prop::collection::vec(piece, 1..=3), 1..=3).prop_map(|groups| Lattice { groups })
}

fn arb_case() -> impl Strategy<Value = (Lattice, BoxDomain, f64)> {
    (1usize..=2).prop_flat_map(|n| {
        (
            arb_lattice(n, 1.0),
            prop::collection::vec((-1.0f64..0.0, 0.4f64..1.2), n),
            0.2f64..0.5,
        )
            .prop_map(|(ctrl, axes, eta)| {
                let lo: Vec<f64> = axes.iter().map(|a| a.0).collect();
                let hi: Vec<f64> = axes.iter().map(|a| a.0 + a.1).collect();
                (ctrl, BoxDomain::new(lo, hi).unwrap(), eta)
            })
    })
}

fn build(ctrl: &Lattice, b: &BoxDomain, eta: f64) -> CpwaInterpolant {
    let grid = build_eta_grid(b, eta).unwrap();
    let om = sample_controller(|x| vec![ctrl.eval(x)], &grid, 1).unwrap();
    CpwaInterpolant::build(grid, om, 1.0).unwrap()
}

fn at(b: &BoxDomain, unit: &[f64]) -> Vec<f64> {
    (0..b.dim()).map(|i| b.lower()[i] + unit[i] * b.width(i)).collect()
}

fn units(count: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 2), count)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The interpolant reproduces the samples at every grid point.
    #[test]
    fn interpolates_grid_values((ctrl, b, eta) in arb_case()) {
        let interp = build(&ctrl, &b, eta);
        for p in interp.grid().points() {
            let got = interp.eval(&p).unwrap()[0];
            prop_assert!((got - ctrl.eval(&p)).abs() <= 1e-12, "{p:?}: {got} vs {}", ctrl.eval(&p));
        }
    }

    /// Every piece whose simplex contains `x` gives the same value.
    #[test]
    fn pieces_agree_where_simplexes_meet((ctrl, b, eta) in arb_case(), us in units(30)) {
        let interp = build(&ctrl, &b, eta);
        let g = interp.grid();
        let n = g.dimension();
        let perms = braid_simplices(n, 6).unwrap();
        let cubes = interpolation_hypercubes(g);
        for u in &us {
            // snap one coordinate onto a lattice plane so the point sits on a facet
            let mut x = at(&b, u);
            let t0 = g.to_lattice(&x);
            x[0] = g.anchor()[0] + t0[0].round() * g.eta();
            if !b.contains(&x) {
                continue;
            }
            let t = g.to_lattice(&x);
            let values: Vec<f64> = cubes
                .iter()
                .flat_map(|c| perms.iter().map(move |p| SimplexId { cube: c.origin().to_vec(), sigma: p.clone() }))
                .filter(|s| s.contains_lattice(&t, 1e-9))
                .map(|s| interp.pieces(0)[interp.simplex_index(&s).unwrap()].eval(&x))
                .collect();
            prop_assert!(!values.is_empty());
            let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - values.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!(spread <= 1e-9, "pieces disagree by {spread} at {x:?}");
        }
    }

    /// Inside a simplex the value is a convex combination of its vertex values.
    #[test]
    fn bounded_by_vertex_values((ctrl, b, eta) in arb_case(), us in units(30)) {
        let interp = build(&ctrl, &b, eta);
        for u in &us {
            let x = at(&b, u);
            let idx = interp.locate(&x).unwrap();
            let s = interp.simplex(idx);
            let vals: Vec<f64> = s.vertex_offsets().iter().map(|o| interp.corner_value(o, 0).unwrap()).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let v = interp.eval(&x).unwrap()[0];
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "{v} outside [{lo}, {hi}]");
        }
    }

    /// Region count and gradient norms stay within their bounds.
    #[test]
    fn regions_and_lipschitz_within_bounds((ctrl, b, eta) in arb_case()) {
        let interp = build(&ctrl, &b, eta);
        let bound: u64 = interp.region_bound().to_string().parse().unwrap();
        prop_assert!(interp.region_count()[0] as u64 <= bound);
        prop_assert!(interp.region_count()[0] <= interp.simplex_count());
        let r = interp.lipschitz_audit().unwrap();
        prop_assert!(r.value <= 3.0 + 1e-9);
    }

    /// The compiled network, its JSON round trip and its ReLU expansion all
    /// evaluate to the interpolant.
    #[test]
    fn compiled_network_matches((ctrl, b, eta) in arb_case(), us in units(40)) {
        let interp = build(&ctrl, &b, eta);
        let net = compile_tll(&interp).unwrap();
        let back = TllNetwork::from_json(&net.to_json()).unwrap();
        let expanded = net.expand();
        for u in &us {
            let x = at(&b, u);
            let want = interp.eval(&x).unwrap()[0];
            let got = net.eval(&x)[0];
            prop_assert!((got - want).abs() <= 1e-9, "tll {got} vs cpwa {want} at {x:?}");
            prop_assert_eq!(back.eval(&x)[0].to_bits(), got.to_bits());
            prop_assert!((expanded.eval(&x)[0] - got).abs() <= 1e-9);
        }
        prop_assert!(net.outputs()[0].bank_size() <= interp.region_count()[0]);
    }
}

#[test]
fn interpolant_json_round_trip_is_exact() {
    let ctrl = Lattice {
        groups: vec![vec![(vec![0.4, -0.3], 0.1), (vec![-0.2, 0.5], -0.2)], vec![(vec![0.1, 0.1], -0.5)]],
    };
    let b = BoxDomain::new(vec![-0.7, -0.2], vec![0.4, 0.9]).unwrap();
    let interp = build(&ctrl, &b, 0.3);
    let back = CpwaInterpolant::from_json(&interp.to_json()).unwrap();
    assert_eq!(back.to_json(), interp.to_json());
    for x in b.lattice(9) {
        assert_eq!(back.eval(&x).unwrap(), interp.eval(&x).unwrap());
    }
}
