use proptest::prelude::*;
use tllsize::geometry::{
    braid_simplices, build_eta_grid, interpolation_hypercubes, locate_simplex, sup_distance, BoxDomain, EtaGrid,
    SimplexId,
};

fn arb_grid() -> impl Strategy<Value = (BoxDomain, f64)> {
    (1usize..=3)
        .prop_flat_map(|n| {
            (
                prop::collection::vec((-2.0f64..2.0, 0.3f64..1.5), n),
                0.15f64..0.6,
            )
        })
        .prop_map(|(axes, eta)| {
            let lo: Vec<f64> = axes.iter().map(|a| a.0).collect();
            let hi: Vec<f64> = axes.iter().map(|a| a.0 + a.1).collect();
            (BoxDomain::new(lo, hi).unwrap(), eta)
        })
}

fn point_in(b: &BoxDomain, unit: &[f64]) -> Vec<f64> {
    (0..b.dim())
        .map(|i| b.lower()[i] + unit[i] * b.width(i))
        .collect()
}

fn per_axis_counts(g: &EtaGrid) -> Vec<i64> {
    (0..g.dimension())
        .map(|i| {
            let (lo, hi) = g
                .offsets()
                .iter()
                .fold((i64::MAX, i64::MIN), |(l, h), o| (l.min(o[i]), h.max(o[i])));
            hi - lo + 1
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Brute-force nearest grid point is within `eta` of every sampled point.
    #[test]
    fn grid_covers_box((b, eta) in arb_grid(), units in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 3), 20)) {
        let g = build_eta_grid(&b, eta).unwrap();
        let pts = g.points();
        for p in &pts {
            prop_assert!(b.contains_within(p, 1e-12), "grid point {p:?} outside");
        }
        for u in &units {
            let x = point_in(&b, u);
            let nearest = pts.iter().map(|p| sup_distance(p, &x)).fold(f64::INFINITY, f64::min);
            prop_assert!(nearest <= eta * (1.0 + 1e-12), "{x:?} is {nearest} from the grid");
            prop_assert!(g.ball_covers(&x));
        }
    }

    /// One cube per lowest corner in `{lo-1, .., hi}` on each axis.
    #[test]
    fn hypercube_count((b, eta) in arb_grid()) {
        let g = build_eta_grid(&b, eta).unwrap();
        let cubes = interpolation_hypercubes(&g);
        let want: i64 = per_axis_counts(&g).iter().map(|k| k + 1).product();
        prop_assert_eq!(cubes.len() as i64, want);
        for c in &cubes {
            prop_assert_eq!(c.corners().len(), 1 << g.dimension());
        }
    }

    /// The located simplex contains the point, and a brute-force scan over
    /// every simplex of every cube agrees that some simplex does.
    #[test]
    fn locate_matches_brute_force((b, eta) in arb_grid(), units in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 3), 10)) {
        let g = build_eta_grid(&b, eta).unwrap();
        let n = g.dimension();
        let cubes = interpolation_hypercubes(&g);
        let perms = braid_simplices(n, 6).unwrap();
        for u in &units {
            let x = point_in(&b, u);
            let t = g.to_lattice(&x);
            let s = locate_simplex(&x, &g).unwrap();
            prop_assert!(s.contains_lattice(&t, 1e-9), "{s:?} misses {t:?}");
            let hits = cubes
                .iter()
                .flat_map(|c| perms.iter().map(move |p| SimplexId { cube: c.origin().to_vec(), sigma: p.clone() }))
                .filter(|s| s.contains_lattice(&t, 1e-9))
                .count();
            prop_assert!(hits >= 1);
        }
    }
}

#[test]
fn grid_json_round_trip() {
    let b = BoxDomain::new(vec![-0.3, 0.1], vec![0.9, 0.65]).unwrap();
    let g = build_eta_grid(&b, 0.2).unwrap();
    let back = EtaGrid::from_json(&g.to_json()).unwrap();
    assert_eq!(back.points(), g.points());
    assert_eq!(back.eta().to_bits(), g.eta().to_bits());
    assert!(EtaGrid::from_json("{\"eta\": 1}").is_err());
}

#[test]
fn braid_has_n_factorial_distinct_simplices() {
    for n in 1..=4 {
        let perms = braid_simplices(n, 6).unwrap();
        let fact: usize = (1..=n).product();
        assert_eq!(perms.len(), fact);
        let mut sorted = perms.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), fact);
    }
}
