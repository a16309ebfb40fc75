//! Uniform grid binning over point sets.
//!
//! Avoids the O(n^2) distance sweep when collecting pairs within a fixed
//! radius: points are hashed into cells of side `cell_size` and only the
//! 3^d neighboring cells are scanned per point.

use std::collections::HashMap;

use crate::covariance::Location;
use crate::error::{Error, Result};

pub struct SpatialIndex<'a> {
    locs: &'a [Location],
    cell_size: f64,
    mins: Vec<f64>,
    cells: HashMap<u64, Vec<usize>>,
}

impl<'a> SpatialIndex<'a> {
    pub fn build(locs: &'a [Location], cell_size: f64) -> Result<Self> {
        if locs.is_empty() {
            return Err(Error::dim("at least one location required"));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::param(format!("cell size must be positive, got {cell_size}")));
        }
        let d = locs[0].dim();
        if locs.iter().any(|l| l.dim() != d) {
            return Err(Error::dim("locations have mixed dimensions"));
        }
        let mut mins = vec![f64::INFINITY; d];
        for l in locs {
            for (k, &c) in l.coords().iter().enumerate() {
                mins[k] = mins[k].min(c);
            }
        }
        let mut cells: HashMap<u64, Vec<usize>> = HashMap::new();
        let mut cell = vec![0i64; d];
        for (i, l) in locs.iter().enumerate() {
            cell_of(l, &mins, cell_size, &mut cell);
            cells.entry(cell_key(&cell)).or_default().push(i);
        }
        Ok(SpatialIndex { locs, cell_size, mins, cells })
    }

    /// Visits every unordered pair `(i, j)` with `i > j` and distance
    /// `r <= radius`, in a deterministic order. Requires
    /// `radius <= cell_size` so that one ring of neighboring cells suffices.
    pub fn for_each_pair_within<F: FnMut(usize, usize, f64)>(&self, radius: f64, mut f: F) {
        assert!(
            radius <= self.cell_size * (1.0 + 1e-12),
            "query radius {radius} exceeds cell size {}",
            self.cell_size
        );
        let d = self.locs[0].dim();
        let mut cell = vec![0i64; d];
        let mut probe = vec![0i64; d];
        let mut offset = vec![-1i64; d];
        for (i, l) in self.locs.iter().enumerate() {
            cell_of(l, &self.mins, self.cell_size, &mut cell);
            // odometer over {-1, 0, 1}^d
            offset.iter_mut().for_each(|o| *o = -1);
            loop {
                for k in 0..d {
                    probe[k] = cell[k] + offset[k];
                }
                if let Some(pts) = self.cells.get(&cell_key(&probe)) {
                    for &j in pts {
                        if j < i {
                            let r = l.distance(&self.locs[j]);
                            if r <= radius {
                                f(i, j, r);
                            }
                        }
                    }
                }
                let mut k = 0;
                while k < d {
                    offset[k] += 1;
                    if offset[k] <= 1 {
                        break;
                    }
                    offset[k] = -1;
                    k += 1;
                }
                if k == d {
                    break;
                }
            }
        }
    }

    /// Number of neighbors within `radius` (inclusive) for every point.
    pub fn counts_within(&self, radius: f64) -> Vec<usize> {
        let mut counts = vec![0usize; self.locs.len()];
        self.for_each_pair_within(radius, |i, j, _| {
            counts[i] += 1;
            counts[j] += 1;
        });
        counts
    }
}

fn cell_of(l: &Location, mins: &[f64], cell_size: f64, out: &mut [i64]) {
    for (k, &c) in l.coords().iter().enumerate() {
        out[k] = ((c - mins[k]) / cell_size).floor() as i64;
    }
}

/// Deterministic cell encoding. Collisions only merge candidate lists; the
/// exact distance check keeps the result correct either way.
fn cell_key(cell: &[i64]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for (k, &c) in cell.iter().enumerate() {
        let mixed = splitmix64((c as u64) ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        h = (h ^ mixed).wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha20Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Location> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Location::xy(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
            .collect()
    }

    #[test]
    fn pairs_match_brute_force() {
        for seed in 0..5 {
            let pts = random_points(300, seed);
            let radius = 0.11;
            let index = SpatialIndex::build(&pts, radius).unwrap();
            let mut got: Vec<(usize, usize)> = Vec::new();
            index.for_each_pair_within(radius, |i, j, r| {
                assert!(r <= radius);
                got.push((i.max(j), i.min(j)));
            });
            got.sort_unstable();
            let mut want: Vec<(usize, usize)> = Vec::new();
            for i in 0..pts.len() {
                for j in 0..i {
                    if pts[i].distance(&pts[j]) <= radius {
                        want.push((i, j));
                    }
                }
            }
            want.sort_unstable();
            assert_eq!(got, want, "seed {seed}");
        }
    }

    #[test]
    fn counts_match_brute_force() {
        let pts = random_points(500, 9);
        let radius = 0.08;
        let index = SpatialIndex::build(&pts, radius).unwrap();
        let counts = index.counts_within(radius);
        for i in 0..pts.len() {
            let want = (0..pts.len())
                .filter(|&j| j != i && pts[i].distance(&pts[j]) <= radius)
                .count();
            assert_eq!(counts[i], want, "point {i}");
        }
    }

    #[test]
    fn duplicate_points_pair_up() {
        let pts = vec![Location::xy(0.5, 0.5), Location::xy(0.5, 0.5)];
        let index = SpatialIndex::build(&pts, 0.1).unwrap();
        let mut pairs = 0;
        index.for_each_pair_within(0.1, |_, _, r| {
            assert_eq!(r, 0.0);
            pairs += 1;
        });
        assert_eq!(pairs, 1);
    }

    #[test]
    fn one_dimensional_points_work() {
        let pts: Vec<Location> =
            (0..10).map(|i| Location::new(vec![i as f64 * 0.1]).unwrap()).collect();
        let index = SpatialIndex::build(&pts, 0.15).unwrap();
        let counts = index.counts_within(0.15);
        // interior points see one neighbor on each side
        assert_eq!(counts[5], 2);
        assert_eq!(counts[0], 1);
    }
}
