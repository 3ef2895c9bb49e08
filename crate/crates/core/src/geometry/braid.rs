use itertools::Itertools;

use super::{cartesian, EtaGrid, GeometryError};

/// Default upper bound on the dissected dimension (`n!` simplexes per cube).
pub const DEFAULT_DIMENSION_CAP: usize = 6;

/// One simplex of the braid dissection of one interpolation hypercube.
///
/// `sigma` is a 0-based permutation; the simplex is the set of points whose
/// cube-normalized coordinates satisfy `y[sigma[0]] <= ... <= y[sigma[n-1]]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SimplexId {
    pub cube: Vec<i64>,
    pub sigma: Vec<usize>,
}

impl SimplexId {
    /// Vertex offsets on the lattice, in threshold order.
    pub fn vertex_offsets(&self) -> Vec<Vec<i64>> {
        simplex_vertices(&self.sigma)
            .into_iter()
            .map(|v| {
                self.cube
                    .iter()
                    .zip(v)
                    .map(|(o, b)| o + b as i64)
                    .collect()
            })
            .collect()
    }

    /// Membership of a point given in lattice coordinates, up to `tol`.
    pub fn contains_lattice(&self, t: &[f64], tol: f64) -> bool {
        let y: Vec<f64> = t
            .iter()
            .zip(&self.cube)
            .map(|(v, o)| v - *o as f64)
            .collect();
        if y.iter().any(|v| *v < -tol || *v > 1.0 + tol) {
            return false;
        }
        self.sigma
            .windows(2)
            .all(|w| y[w[0]] <= y[w[1]] + tol)
    }
}

/// All `n!` permutations in lexicographic order.
pub fn braid_simplices(n: usize, cap: usize) -> Result<Vec<Vec<usize>>, GeometryError> {
    if n > cap {
        return Err(GeometryError::DimensionTooLarge { n, cap });
    }
    if n == 0 {
        return Err(GeometryError::DimensionMismatch { expected: 1, got: 0 });
    }
    Ok((0..n).permutations(n).collect())
}

/// Unit-cube vertices of the simplex for `sigma`: `v_0 = 0` and `v_t` sets the
/// last `t` coordinates of `sigma` to one.
pub fn simplex_vertices(sigma: &[usize]) -> Vec<Vec<u8>> {
    let n = sigma.len();
    let mut v = vec![0u8; n];
    let mut out = Vec::with_capacity(n + 1);
    out.push(v.clone());
    for &axis in sigma.iter().rev() {
        v[axis] = 1;
        out.push(v.clone());
    }
    out
}

/// Ascending argsort; equal values keep ascending index order.
pub fn sort_permutation(y: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
    idx
}

fn cube_exists(grid: &EtaGrid, origin: &[i64]) -> bool {
    let n = origin.len();
    (0..1usize << n).any(|mask| {
        let c: Vec<i64> = origin
            .iter()
            .enumerate()
            .map(|(i, o)| o + ((mask >> i) & 1) as i64)
            .collect();
        grid.contains_offset(&c)
    })
}

const BOUNDARY_TOL: f64 = 1e-12;

/// Finds the hypercube and simplex containing `x`. Points on shared cube
/// faces go to the lexicographically smallest origin.
pub fn locate_simplex(x: &[f64], grid: &EtaGrid) -> Result<SimplexId, GeometryError> {
    locate_with_local(x, grid).map(|(s, _)| s)
}

pub(crate) fn locate_with_local(
    x: &[f64],
    grid: &EtaGrid,
) -> Result<(SimplexId, Vec<f64>), GeometryError> {
    let n = grid.dimension();
    if x.len() != n {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::OutsideDomain(x.to_vec()));
    }
    let t = grid.to_lattice(x);
    let candidates: Vec<Vec<i64>> = t
        .iter()
        .map(|&v| {
            let r = v.round();
            if (v - r).abs() <= BOUNDARY_TOL * v.abs().max(1.0) {
                vec![r as i64 - 1, r as i64]
            } else {
                vec![v.floor() as i64]
            }
        })
        .collect();
    let origin = cartesian(&candidates)
        .into_iter()
        .find(|o| cube_exists(grid, o))
        .ok_or_else(|| GeometryError::OutsideDomain(x.to_vec()))?;
    let local: Vec<f64> = t
        .iter()
        .zip(&origin)
        .map(|(v, o)| (v - *o as f64).clamp(0.0, 1.0))
        .collect();
    let sigma = sort_permutation(&local);
    Ok((SimplexId { cube: origin, sigma }, local))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_eta_grid, BoxDomain};
    use crate::linalg::determinant;

    fn factorial(n: usize) -> usize {
        (1..=n).product()
    }

    #[test]
    fn simplex_counts() {
        assert_eq!(braid_simplices(1, 6).unwrap().len(), 1);
        assert_eq!(braid_simplices(2, 6).unwrap().len(), 2);
        assert_eq!(braid_simplices(3, 6).unwrap().len(), 6);
        assert_eq!(
            braid_simplices(7, 6),
            Err(GeometryError::DimensionTooLarge { n: 7, cap: 6 })
        );
    }

    #[test]
    fn vertex_examples() {
        assert_eq!(
            simplex_vertices(&[0, 1]),
            vec![vec![0, 0], vec![0, 1], vec![1, 1]]
        );
        assert_eq!(
            simplex_vertices(&[2, 1, 0]),
            vec![vec![0, 0, 0], vec![1, 0, 0], vec![1, 1, 0], vec![1, 1, 1]]
        );
        for sigma in braid_simplices(4, 6).unwrap() {
            let v = simplex_vertices(&sigma);
            assert_eq!(v[0], vec![0; 4]);
            assert_eq!(v[4], vec![1; 4]);
        }
    }

    #[test]
    fn volumes_partition_unit_cube() {
        for n in 1..=4 {
            let mut total = 0.0;
            for sigma in braid_simplices(n, 6).unwrap() {
                let v = simplex_vertices(&sigma);
                let m: Vec<Vec<f64>> = (1..=n)
                    .map(|t| (0..n).map(|i| (v[t][i] as f64) - (v[0][i] as f64)).collect())
                    .collect();
                let vol = determinant(&m).abs() / factorial(n) as f64;
                assert!((vol - 1.0 / factorial(n) as f64).abs() < 1e-12);
                total += vol;
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn argsort_examples() {
        assert_eq!(sort_permutation(&[0.3, 0.8]), vec![0, 1]);
        assert_eq!(sort_permutation(&[0.5, 0.5]), vec![0, 1]);
        assert_eq!(sort_permutation(&[0.9, 0.1, 0.5]), vec![1, 2, 0]);
    }

    #[test]
    fn locate_interior_and_ties() {
        let g = build_eta_grid(&BoxDomain::cube(2, 0.0, 1.0).unwrap(), 0.5).unwrap();
        // grid points 0.25, 0.75 per axis; cube origin 0 spans [0.25, 0.75]
        let s = locate_simplex(&[0.25 + 0.15, 0.25 + 0.4], &g).unwrap();
        assert_eq!(s.cube, vec![0, 0]);
        assert_eq!(s.sigma, vec![0, 1]);
        let s = locate_simplex(&[0.25 + 0.4, 0.25 + 0.15], &g).unwrap();
        assert_eq!(s.sigma, vec![1, 0]);
        // on the shared face x = 0.75 the smaller origin wins
        let s = locate_simplex(&[0.75, 0.5], &g).unwrap();
        assert_eq!(s.cube, vec![0, 0]);
        // exact grid point at the lowest corner of the union
        let s = locate_simplex(&[-0.25, -0.25], &g).unwrap();
        assert_eq!(s.cube, vec![-1, -1]);
    }

    #[test]
    fn outside_is_an_error() {
        let g = build_eta_grid(&BoxDomain::cube(2, 0.0, 1.0).unwrap(), 0.5).unwrap();
        assert!(matches!(
            locate_simplex(&[2.0, 0.5], &g),
            Err(GeometryError::OutsideDomain(_))
        ));
        assert!(locate_simplex(&[f64::NAN, 0.5], &g).is_err());
    }

    #[test]
    fn located_simplex_contains_point() {
        use rand::{Rng, SeedableRng};
        let domain = BoxDomain::cube(3, -1.0, 1.0).unwrap();
        let g = build_eta_grid(&domain, 0.3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.1..1.1)).collect();
            let s = locate_simplex(&x, &g).unwrap();
            assert!(s.contains_lattice(&g.to_lattice(&x), 1e-12));
        }
    }

    #[test]
    fn opposing_faces_translate() {
        // facets of the dissection on {y_i = 1} shifted by -e_i equal those on {y_i = 0}
        for n in 1..=4 {
            for axis in 0..n {
                let mut low = Vec::new();
                let mut high = Vec::new();
                for sigma in braid_simplices(n, 6).unwrap() {
                    let v = simplex_vertices(&sigma);
                    let on = |val: u8| -> Vec<Vec<u8>> {
                        let mut f: Vec<Vec<u8>> =
                            v.iter().filter(|p| p[axis] == val).cloned().collect();
                        f.sort();
                        f
                    };
                    let f0 = on(0);
                    if f0.len() == n {
                        low.push(f0);
                    }
                    let f1: Vec<Vec<u8>> = on(1)
                        .into_iter()
                        .map(|mut p| {
                            p[axis] = 0;
                            p
                        })
                        .collect();
                    if f1.len() == n {
                        let mut f1 = f1;
                        f1.sort();
                        high.push(f1);
                    }
                }
                low.sort();
                high.sort();
                assert_eq!(low.len(), factorial(n - 1));
                assert_eq!(low, high, "n={n} axis={axis}");
            }
        }
    }
}
