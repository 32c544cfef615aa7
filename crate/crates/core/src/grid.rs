//! Uniform hash grids for neighbor queries.
//!
//! The solver keeps two grids per step: a short-range grid sized by the
//! largest collision-check diameter, and a long-range grid sized by the
//! anticipatory query radius. Both are rebuilt from scratch every step;
//! at the scales this solver targets, rebuild cost is negligible and the
//! resulting layout is canonical (cell lists hold ascending agent indices),
//! which keeps accumulation order fixed regardless of thread count.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};

use crate::math::Vec2;
use crate::parallel;

/// Multiply-xor hasher for packed cell keys. The default SipHash is
/// needlessly slow for the millions of cell lookups a dense step makes.
#[derive(Default)]
pub struct CellHasher(u64);

impl Hasher for CellHasher {
    fn finish(&self) -> u64 {
        self.0
    }
    fn write(&mut self, _: &[u8]) {
        unreachable!("cell keys hash via write_u64");
    }
    fn write_u64(&mut self, key: u64) {
        let h = key.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        self.0 = h ^ (h >> 29);
    }
}

type CellMap = HashMap<u64, Vec<u32>, BuildHasherDefault<CellHasher>>;

#[inline]
fn pack(cx: i32, cy: i32) -> u64 {
    ((cx as u32 as u64) << 32) | cy as u32 as u64
}

/// Uniform grid over 2D space mapping integer cells to the agents inside.
pub struct HashGrid {
    cell_size: f64,
    cells: CellMap,
}

impl HashGrid {
    /// Cell coordinate by floor division; a point exactly on a boundary
    /// belongs to the higher-index cell.
    #[inline]
    pub fn cell_of(&self, p: Vec2) -> (i32, i32) {
        (
            (p.x / self.cell_size).floor() as i32,
            (p.y / self.cell_size).floor() as i32,
        )
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Build a grid over `positions`. Cell coordinates are computed in
    /// parallel; the bucket fill is a sequential pass in agent order so
    /// every cell list is ascending by construction.
    pub fn build(positions: &[Vec2], cell_size: f64) -> HashGrid {
        assert!(cell_size > 0.0, "cell_size must be positive");
        let inv = 1.0 / cell_size;
        let keys = parallel::map_collect(positions.len(), |i| {
            let p = positions[i];
            debug_assert!(p.is_finite());
            pack((p.x * inv).floor() as i32, (p.y * inv).floor() as i32)
        });
        let mut cells = CellMap::with_capacity_and_hasher(
            positions.len() / 2 + 1,
            BuildHasherDefault::default(),
        );
        for (i, &key) in keys.iter().enumerate() {
            cells.entry(key).or_default().push(i as u32);
        }
        HashGrid { cell_size, cells }
    }

    /// Exact neighbor query: all `j != i` with `|x_j - x_i| <= radius`,
    /// ascending. Scans however many cell rings the radius requires, so it
    /// is exact for any radius.
    pub fn query(&self, positions: &[Vec2], i: usize, radius: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.query_into(positions, i, radius, &mut out);
        out
    }

    /// `query` writing into a caller-owned buffer (cleared first).
    pub fn query_into(&self, positions: &[Vec2], i: usize, radius: f64, out: &mut Vec<u32>) {
        out.clear();
        let p = positions[i];
        let r2 = radius * radius;
        let inv = 1.0 / self.cell_size;
        let cx_lo = ((p.x - radius) * inv).floor() as i32;
        let cx_hi = ((p.x + radius) * inv).floor() as i32;
        let cy_lo = ((p.y - radius) * inv).floor() as i32;
        let cy_hi = ((p.y + radius) * inv).floor() as i32;
        for cx in cx_lo..=cx_hi {
            for cy in cy_lo..=cy_hi {
                if let Some(list) = self.cells.get(&pack(cx, cy)) {
                    for &j in list {
                        if j as usize != i && (positions[j as usize] - p).norm_sq() <= r2 {
                            out.push(j);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
    }

    /// Agents in the cell containing `p` (used by membership tests).
    pub fn cell_members(&self, p: Vec2) -> &[u32] {
        let (cx, cy) = self.cell_of(p);
        self.cells
            .get(&pack(cx, cy))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }
}

/// Reference all-pairs scan; the oracle the grid is tested against.
pub fn brute_force_neighbors(positions: &[Vec2], i: usize, radius: f64) -> Vec<u32> {
    let p = positions[i];
    let r2 = radius * radius;
    (0..positions.len())
        .filter(|&j| j != i && (positions[j] - p).norm_sq() <= r2)
        .map(|j| j as u32)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{hash3, uniform};
    use proptest::prelude::*;

    fn random_positions(seed: u64, n: usize, extent: f64) -> Vec<Vec2> {
        (0..n)
            .map(|i| {
                Vec2::new(
                    uniform(hash3(seed, i as u64, 0), -extent, extent),
                    uniform(hash3(seed, i as u64, 1), -extent, extent),
                )
            })
            .collect()
    }

    #[test]
    fn single_agent_in_origin_cell() {
        let pos = vec![Vec2::new(0.0, 0.0)];
        let g = HashGrid::build(&pos, 2.0);
        assert_eq!(g.cell_of(pos[0]), (0, 0));
        assert_eq!(g.cell_members(pos[0]), &[0]);
    }

    #[test]
    fn floor_division_cells() {
        let pos = vec![Vec2::new(0.0, 0.0), Vec2::new(3.0, 0.0)];
        let g = HashGrid::build(&pos, 2.0);
        assert_eq!(g.cell_of(pos[0]), (0, 0));
        assert_eq!(g.cell_of(pos[1]), (1, 0));
        assert_eq!(g.cell_of(Vec2::new(-0.1, -3.0)), (-1, -2));
        // Boundary points belong to the higher-index cell.
        assert_eq!(g.cell_of(Vec2::new(2.0, 4.0)), (1, 2));
    }

    #[test]
    fn every_agent_findable_via_own_cell() {
        let pos = random_positions(7, 500, 50.0);
        let g = HashGrid::build(&pos, 3.0);
        for (i, &p) in pos.iter().enumerate() {
            assert!(
                g.cell_members(p).contains(&(i as u32)),
                "agent {i} missing from its cell"
            );
        }
    }

    #[test]
    fn query_examples() {
        let lone = vec![Vec2::new(1.0, 1.0)];
        let g = HashGrid::build(&lone, 2.0);
        assert!(g.query(&lone, 0, 5.0).is_empty());

        let pos = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(5.0, 0.0),
        ];
        let g = HashGrid::build(&pos, 2.0);
        assert_eq!(g.query(&pos, 0, 2.0), vec![1]);
    }

    #[test]
    fn query_matches_brute_force_on_random_scene() {
        let pos = random_positions(42, 500, 30.0);
        let g = HashGrid::build(&pos, 2.5);
        for i in 0..pos.len() {
            for radius in [0.5, 2.5, 5.0] {
                assert_eq!(
                    g.query(&pos, i, radius),
                    brute_force_neighbors(&pos, i, radius),
                    "mismatch at agent {i} radius {radius}"
                );
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn query_exact_vs_brute(
            seed in 0u64..1000,
            n in 1usize..80,
            cell in 0.5f64..4.0,
            radius in 0.01f64..8.0,
        ) {
            let pos = random_positions(seed, n, 10.0);
            let g = HashGrid::build(&pos, cell);
            for i in 0..n {
                let got = g.query(&pos, i, radius);
                prop_assert_eq!(&got, &brute_force_neighbors(&pos, i, radius));
                prop_assert!(got.windows(2).all(|w| w[0] < w[1]), "not ascending");
                prop_assert!(!got.contains(&(i as u32)), "self in result");
            }
        }
    }
}
