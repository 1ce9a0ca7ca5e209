//! Radius neighbor search over uniform spatial bins.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::geometry::Vec2;
use crate::scalar::Real;

/// Uniform hash grid with square cells.
#[derive(Debug, Clone)]
pub struct SpatialBins<T> {
    cell: T,
    bins: HashMap<(i64, i64), Vec<usize>>,
    points: Vec<Vec2<T>>,
}

impl<T: Real> SpatialBins<T> {
    pub fn new(points: &[Vec2<T>], cell: T) -> Result<Self> {
        if !(cell > T::zero()) || !cell.is_finite() {
            return Err(param("cell", format!("must be positive, got {cell}")));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let mut bins: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            bins.entry(Self::key_with(cell, *p)).or_default().push(i);
        }
        Ok(Self {
            cell,
            bins,
            points: points.to_vec(),
        })
    }

    fn key_with(cell: T, p: Vec2<T>) -> (i64, i64) {
        let kx = (p.x / cell).floor().to_i64().unwrap_or(0);
        let ky = (p.y / cell).floor().to_i64().unwrap_or(0);
        (kx, ky)
    }

    pub fn points(&self) -> &[Vec2<T>] {
        &self.points
    }

    /// Indices with `|p_j - q| <= r`, ascending.
    pub fn within(&self, q: Vec2<T>, r: T) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(q, r, |j, _| out.push(j));
        out.sort_unstable();
        out
    }

    /// Calls `f(j, dist_sq)` for every point within `r` of `q`, in bin order.
    pub fn for_each_within<F: FnMut(usize, T)>(&self, q: Vec2<T>, r: T, mut f: F) {
        let r2 = r * r;
        let reach = (r / self.cell).ceil().to_i64().unwrap_or(1).max(1);
        let (cx, cy) = Self::key_with(self.cell, q);
        for kx in (cx - reach)..=(cx + reach) {
            for ky in (cy - reach)..=(cy + reach) {
                if let Some(ids) = self.bins.get(&(kx, ky)) {
                    for &j in ids {
                        let d2 = (self.points[j] - q).norm_sq();
                        if d2 <= r2 {
                            f(j, d2);
                        }
                    }
                }
            }
        }
    }

    /// The `k` nearest points to `q`, closest first, ties broken by index.
    pub fn k_nearest(&self, q: Vec2<T>, k: usize) -> Vec<(usize, T)> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let mut r = self.cell;
        loop {
            let mut found: Vec<(usize, T)> = Vec::new();
            self.for_each_within(q, r, |j, d2| found.push((j, d2)));
            if found.len() >= k || found.len() == self.points.len() {
                found.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
                found.truncate(k);
                return found.into_iter().map(|(j, d2)| (j, d2.sqrt())).collect();
            }
            r = r + r;
        }
    }
}

/// Radius graph over agent positions. Self is excluded from every list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct NeighborIndex<T> {
    pub radius: T,
    pub adjacency: Vec<Vec<usize>>,
    pub degrees: Vec<usize>,
}

impl<T: Real> NeighborIndex<T> {
    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }
}

/// Builds the symmetric radius graph: `j` is a neighbor of `i` iff
/// `0 < |r_j - r_i| <= radius` or the two agents coincide (`j != i`).
pub fn build_neighbor_index<T: Real>(positions: &[Vec2<T>], radius: T) -> Result<NeighborIndex<T>> {
    if !(radius > T::zero()) || !radius.is_finite() {
        return Err(param("radius", format!("must be positive, got {radius}")));
    }
    let bins = SpatialBins::new(positions, radius)?;
    let adjacency: Vec<Vec<usize>> = positions
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut nb = Vec::new();
            bins.for_each_within(p, radius, |j, _| {
                if j != i {
                    nb.push(j)
                }
            });
            nb.sort_unstable();
            nb
        })
        .collect();
    let degrees = adjacency.iter().map(Vec::len).collect();
    Ok(NeighborIndex {
        radius,
        adjacency,
        degrees,
    })
}

/// 1D variant over scalar positions.
pub fn build_neighbor_index_1d<T: Real>(positions: &[T], radius: T) -> Result<NeighborIndex<T>> {
    let pts: Vec<Vec2<T>> = positions.iter().map(|&x| Vec2::new(x, T::zero())).collect();
    build_neighbor_index(&pts, radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(points: &[Vec2<f64>], r: f64) -> Vec<Vec<usize>> {
        (0..points.len())
            .map(|i| {
                (0..points.len())
                    .filter(|&j| j != i && points[i].dist(points[j]) <= r)
                    .collect()
            })
            .collect()
    }

    #[test]
    fn three_points_on_a_line() {
        let idx = build_neighbor_index_1d(&[0.0, 0.5, 2.0], 1.0).unwrap();
        assert_eq!(idx.adjacency, vec![vec![1], vec![0], vec![]]);
        assert_eq!(idx.degrees, vec![1, 1, 0]);
    }

    #[test]
    fn single_point_has_no_neighbors() {
        let idx = build_neighbor_index(&[Vec2::new(3.0, -1.0)], 0.2).unwrap();
        assert_eq!(idx.adjacency, vec![Vec::<usize>::new()]);
    }

    #[test]
    fn uniform_line_interior_degree_two() {
        let h = 0.01;
        let xs: Vec<f64> = (0..100).map(|i| i as f64 * h).collect();
        let idx = build_neighbor_index_1d(&xs, 1.5 * h).unwrap();
        let pts: Vec<_> = xs.iter().map(|&x| Vec2::new(x, 0.0)).collect();
        assert_eq!(idx.adjacency, brute(&pts, 1.5 * h));
        assert!(idx.degrees[1..99].iter().all(|&d| d == 2));
        assert_eq!(idx.degrees[0], 1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_neighbor_index(&[Vec2::new(0.0, 0.0)], 0.0).is_err());
        assert!(matches!(
            build_neighbor_index(&[Vec2::new(f64::NAN, 0.0)], 1.0),
            Err(Error::NonFinite(0))
        ));
    }

    #[test]
    fn k_nearest_orders_by_distance() {
        let pts: Vec<_> = (0..10).map(|i| Vec2::new(i as f64, 0.0)).collect();
        let bins = SpatialBins::new(&pts, 0.5).unwrap();
        let nn = bins.k_nearest(Vec2::new(3.2, 0.0), 3);
        let ids: Vec<_> = nn.iter().map(|p| p.0).collect();
        assert_eq!(ids, vec![3, 4, 2]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..500),
            r in 0.01f64..0.5,
        ) {
            let pts: Vec<_> = pts.into_iter().map(|(x, y)| Vec2::new(x, y)).collect();
            let idx = build_neighbor_index(&pts, r).unwrap();
            prop_assert_eq!(&idx.adjacency, &brute(&pts, r));
            for (i, nb) in idx.adjacency.iter().enumerate() {
                prop_assert_eq!(idx.degrees[i], nb.len());
                for &j in nb {
                    prop_assert!(idx.adjacency[j].binary_search(&i).is_ok());
                }
            }
        }
    }
}
