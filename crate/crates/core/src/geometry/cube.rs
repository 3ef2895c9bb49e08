use std::collections::BTreeMap;

use super::{cartesian, EtaGrid, GeometryError};

/// Edge-`eta` hypercube spanned from a grid point in the directions `rho`.
///
/// Hypercubes are identified by their lowest corner (`origin`); `base` and
/// `rho` record one grid point and sign vector that generate it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Hypercube {
    origin: Vec<i64>,
    base: Vec<i64>,
    rho: Vec<i8>,
}

impl Hypercube {
    pub fn from_base(base: Vec<i64>, rho: Vec<i8>) -> Self {
        debug_assert_eq!(base.len(), rho.len());
        let origin = base
            .iter()
            .zip(&rho)
            .map(|(b, r)| if *r < 0 { b - 1 } else { *b })
            .collect();
        Hypercube { origin, base, rho }
    }

    pub fn from_origin(origin: Vec<i64>) -> Self {
        let rho = vec![1; origin.len()];
        Hypercube {
            base: origin.clone(),
            origin,
            rho,
        }
    }

    pub fn origin(&self) -> &[i64] {
        &self.origin
    }

    pub fn base(&self) -> &[i64] {
        &self.base
    }

    pub fn rho(&self) -> &[i8] {
        &self.rho
    }

    pub fn dimension(&self) -> usize {
        self.origin.len()
    }

    /// All `2^n` corners `base + sum_{i in Z} rho_i e_i`, as lattice offsets.
    pub fn corners(&self) -> Vec<Vec<i64>> {
        let n = self.dimension();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|i| self.base[i] + ((mask >> i) & 1) as i64 * self.rho[i] as i64)
                    .collect()
            })
            .collect()
    }
}

/// Deduplicated interpolation hypercubes of a grid, sorted by origin.
pub fn interpolation_hypercubes(grid: &EtaGrid) -> Vec<Hypercube> {
    let n = grid.dimension();
    let mut cubes: BTreeMap<Vec<i64>, Hypercube> = BTreeMap::new();
    for base in grid.offsets() {
        for mask in 0..1usize << n {
            let rho: Vec<i8> = (0..n)
                .map(|i| if (mask >> i) & 1 == 1 { -1 } else { 1 })
                .collect();
            let cube = Hypercube::from_base(base.clone(), rho);
            cubes.entry(cube.origin.clone()).or_insert(cube);
        }
    }
    cubes.into_values().collect()
}

/// Hypercube corners that are not grid points, each with the grid points
/// within closed sup-distance `eta` of it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExtraCornerSet {
    corners: BTreeMap<Vec<i64>, Vec<usize>>,
}

pub fn extra_corners(grid: &EtaGrid) -> Result<ExtraCornerSet, GeometryError> {
    ExtraCornerSet::from_hypercubes(grid, &interpolation_hypercubes(grid))
}

impl ExtraCornerSet {
    pub fn from_hypercubes(grid: &EtaGrid, cubes: &[Hypercube]) -> Result<Self, GeometryError> {
        let n = grid.dimension();
        let steps: Vec<Vec<i64>> = cartesian(&vec![vec![-1i64, 0, 1]; n]);
        let mut corners = BTreeMap::new();
        for cube in cubes {
            for c in cube.corners() {
                if grid.contains_offset(&c) || corners.contains_key(&c) {
                    continue;
                }
                let mut neighbors: Vec<usize> = steps
                    .iter()
                    .filter_map(|s| {
                        let o: Vec<i64> = c.iter().zip(s).map(|(a, b)| a + b).collect();
                        grid.index_of(&o)
                    })
                    .collect();
                if neighbors.is_empty() {
                    return Err(GeometryError::OrphanCorner(c));
                }
                neighbors.sort_unstable();
                corners.insert(c, neighbors);
            }
        }
        Ok(ExtraCornerSet { corners })
    }

    pub fn len(&self) -> usize {
        self.corners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corners.is_empty()
    }

    pub fn contains(&self, offset: &[i64]) -> bool {
        self.corners.contains_key(offset)
    }

    pub fn neighbors(&self, offset: &[i64]) -> Option<&[usize]> {
        self.corners.get(offset).map(|v| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i64>, &Vec<usize>)> {
        self.corners.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_eta_grid, BoxDomain};

    fn grid_1d() -> EtaGrid {
        build_eta_grid(&BoxDomain::cube(1, 0.0, 1.0).unwrap(), 0.5).unwrap()
    }

    #[test]
    fn corners_match_definition() {
        let c = Hypercube::from_base(vec![2, 5], vec![-1, 1]);
        assert_eq!(c.origin(), &[1, 5]);
        let mut corners = c.corners();
        corners.sort();
        assert_eq!(corners, vec![vec![1, 5], vec![1, 6], vec![2, 5], vec![2, 6]]);
    }

    #[test]
    fn one_d_hypercubes() {
        let g = grid_1d();
        let cubes = interpolation_hypercubes(&g);
        let spans: Vec<(f64, f64)> = cubes
            .iter()
            .map(|c| {
                let lo = g.point_at(c.origin())[0];
                (lo, lo + g.eta())
            })
            .collect();
        assert_eq!(spans, vec![(-0.25, 0.25), (0.25, 0.75), (0.75, 1.25)]);
        assert!(cubes.len() <= 4);
    }

    #[test]
    fn single_point_grid_has_two_intervals() {
        let g = build_eta_grid(&BoxDomain::cube(1, 0.0, 1.0).unwrap(), 1.0).unwrap();
        assert_eq!(interpolation_hypercubes(&g).len(), 2);
    }

    #[test]
    fn count_bound_two_d() {
        // ceil(2 / 0.25 + 2)^2 = 100
        let domain = BoxDomain::cube(2, 0.0, 2.0).unwrap();
        let g = build_eta_grid(&domain, 0.25).unwrap();
        let cubes = interpolation_hypercubes(&g);
        let bound = ((domain.extent() / 0.25) + 2.0).ceil() as usize;
        assert_eq!(bound * bound, 100);
        assert!(cubes.len() <= 100);
        assert_eq!(cubes.len(), 81);
    }

    #[test]
    fn one_d_extra_corners() {
        let g = grid_1d();
        let extras = extra_corners(&g).unwrap();
        let got: Vec<(f64, Vec<f64>)> = extras
            .iter()
            .map(|(c, nb)| (g.point_at(c)[0], nb.iter().map(|&i| g.point(i)[0]).collect()))
            .collect();
        assert_eq!(got, vec![(-0.25, vec![0.25]), (1.25, vec![0.75])]);
    }

    #[test]
    fn interior_only_cubes_have_no_extras() {
        let g = build_eta_grid(&BoxDomain::cube(2, 0.0, 1.0).unwrap(), 0.25).unwrap();
        let inner = vec![Hypercube::from_origin(vec![0, 0]), Hypercube::from_origin(vec![1, 2])];
        assert!(ExtraCornerSet::from_hypercubes(&g, &inner).unwrap().is_empty());
    }

    #[test]
    fn far_corner_is_orphan() {
        let g = grid_1d();
        let bogus = vec![Hypercube::from_origin(vec![10])];
        assert_eq!(
            ExtraCornerSet::from_hypercubes(&g, &bogus),
            Err(GeometryError::OrphanCorner(vec![10]))
        );
    }

    #[test]
    fn faces_are_shared_by_exactly_two_or_on_boundary() {
        let g = build_eta_grid(&BoxDomain::new(vec![0.0, 0.0], vec![1.0, 0.6]).unwrap(), 0.25)
            .unwrap();
        let cubes = interpolation_hypercubes(&g);
        let set: std::collections::BTreeSet<Vec<i64>> =
            cubes.iter().map(|c| c.origin().to_vec()).collect();
        let lo: Vec<i64> = (0..2).map(|i| set.iter().map(|o| o[i]).min().unwrap()).collect();
        let hi: Vec<i64> = (0..2).map(|i| set.iter().map(|o| o[i]).max().unwrap()).collect();
        for c in &cubes {
            for axis in 0..2 {
                for dir in [-1i64, 1] {
                    let mut nb = c.origin().to_vec();
                    nb[axis] += dir;
                    let on_boundary = (dir < 0 && c.origin()[axis] == lo[axis])
                        || (dir > 0 && c.origin()[axis] == hi[axis]);
                    assert_eq!(set.contains(&nb), !on_boundary);
                }
            }
        }
    }
}
