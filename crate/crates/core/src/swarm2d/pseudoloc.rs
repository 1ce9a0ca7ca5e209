use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::neighbors::NeighborIndex;
use crate::scalar::{count, lit, Real};

/// `sum_{j in N_i} (R_j - R_i) / d_j`.
fn bracket<T: Real>(r: &[Vec2<T>], index: &NeighborIndex<T>, i: usize) -> Vec2<T> {
    let mut acc = Vec2::zero();
    for &j in index.neighbors(i) {
        acc += (r[j] - r[i]) / count::<T>(index.degrees[j]);
    }
    acc
}

/// `0.9 min(1, 1 / max_i sum_{j in N_i} 1/d_j)` over agents without a fixed
/// value. Keeps every round a convex combination.
pub fn relaxation<T: Real>(index: &NeighborIndex<T>, fixed: &[bool]) -> T {
    let mut worst = T::zero();
    for i in 0..index.len() {
        if fixed.get(i).copied().unwrap_or(false) {
            continue;
        }
        let s: T = index
            .neighbors(i)
            .iter()
            .map(|&j| T::one() / count::<T>(index.degrees[j]))
            .sum();
        worst = worst.max(s);
    }
    let base = if worst > T::one() {
        T::one() / worst
    } else {
        T::one()
    };
    base * lit(0.9)
}

fn check_inputs<T: Real>(
    r: &[Vec2<T>],
    index: &NeighborIndex<T>,
    xi: &[Option<Vec2<T>>],
) -> Result<()> {
    if r.len() != index.len() || xi.len() != r.len() {
        return Err(Error::Input(format!(
            "pseudo-coordinates ({}), neighbor index ({}) and boundary values ({}) differ in length",
            r.len(),
            index.len(),
            xi.len()
        )));
    }
    Ok(())
}

/// One synchronous round. Agents with `xi[i] = Some(v)` take `v`; the others
/// move by `omega` times the weighted neighbor differences. Isolated free
/// agents keep their value and are counted in the second return value.
pub fn pseudoloc_step_2d<T: Real>(
    r: &[Vec2<T>],
    index: &NeighborIndex<T>,
    xi: &[Option<Vec2<T>>],
    omega: T,
) -> Result<(Vec<Vec2<T>>, usize)> {
    check_inputs(r, index, xi)?;
    let mut isolated = 0;
    let next = (0..r.len())
        .map(|i| match xi[i] {
            Some(v) => v,
            None if index.degrees[i] == 0 => {
                isolated += 1;
                r[i]
            }
            None => r[i] + bracket(r, index, i) * omega,
        })
        .collect();
    Ok((next, isolated))
}

/// Largest weighted neighbor difference over free agents, together with the
/// largest mismatch on fixed agents.
pub fn pseudoloc_residual_2d<T: Real>(
    r: &[Vec2<T>],
    index: &NeighborIndex<T>,
    xi: &[Option<Vec2<T>>],
) -> Result<T> {
    check_inputs(r, index, xi)?;
    let mut worst = T::zero();
    for i in 0..r.len() {
        let e = match xi[i] {
            Some(v) => (v - r[i]).norm(),
            None => bracket(r, index, i).norm(),
        };
        worst = worst.max(e);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Pseudoloc2DRun<T> {
    pub r: Vec<Vec2<T>>,
    pub rounds: usize,
    pub converged: bool,
    pub residual: T,
    pub omega: T,
    pub isolated: usize,
    /// `(round, residual)` every `trace_stride` rounds.
    pub trace: Vec<(usize, T)>,
}

/// Repeats [`pseudoloc_step_2d`] until the residual drops below `tolerance`
/// or `max_rounds` rounds have run. `omega = None` uses [`relaxation`].
pub fn run_pseudoloc_2d<T: Real>(
    r0: &[Vec2<T>],
    index: &NeighborIndex<T>,
    xi: &[Option<Vec2<T>>],
    omega: Option<T>,
    max_rounds: usize,
    tolerance: T,
    trace_stride: usize,
) -> Result<Pseudoloc2DRun<T>> {
    check_inputs(r0, index, xi)?;
    let fixed: Vec<bool> = xi.iter().map(Option::is_some).collect();
    let omega = omega.unwrap_or_else(|| relaxation(index, &fixed));
    let mut r = r0.to_vec();
    let mut residual = pseudoloc_residual_2d(&r, index, xi)?;
    let mut isolated = 0;
    let mut trace = Vec::new();
    let mut rounds = 0;
    while rounds < max_rounds && residual >= tolerance {
        let (next, iso) = pseudoloc_step_2d(&r, index, xi, omega)?;
        r = next;
        isolated = iso;
        rounds += 1;
        residual = pseudoloc_residual_2d(&r, index, xi)?;
        if trace_stride > 0 && rounds % trace_stride == 0 {
            trace.push((rounds, residual));
        }
    }
    Ok(Pseudoloc2DRun {
        r,
        rounds,
        converged: residual < tolerance,
        residual,
        omega,
        isolated,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighbors::build_neighbor_index;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn line_index() -> NeighborIndex<f64> {
        // 0 - 1 - 2 with 1 in the middle
        build_neighbor_index(
            &[
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(2.0, 0.0),
            ],
            1.1,
        )
        .unwrap()
    }

    #[test]
    fn constant_is_fixed_point() {
        let pts: Vec<Vec2<f64>> = (0..30)
            .map(|k| Vec2::new((k % 6) as f64, (k / 6) as f64))
            .collect();
        let index = build_neighbor_index(&pts, 1.5).unwrap();
        let c = Vec2::new(0.3, -0.7);
        let xi: Vec<Option<Vec2<f64>>> = (0..30)
            .map(|k| if k % 6 == 0 { Some(c) } else { None })
            .collect();
        let (next, iso) = pseudoloc_step_2d(&vec![c; 30], &index, &xi, 0.5).unwrap();
        assert_eq!(iso, 0);
        assert!(next.iter().all(|v| *v == c));
    }

    #[test]
    fn two_neighbors_of_degree_one() {
        let index = line_index();
        assert_eq!(index.degrees, vec![1, 2, 1]);
        let r = [
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
        ];
        let xi = [Some(r[0]), None, Some(r[2])];
        let (next, _) = pseudoloc_step_2d(&r, &index, &xi, 0.5).unwrap();
        assert_relative_eq!(next[1].x, 1.0, epsilon = 1e-15);
        assert_eq!(next[0], r[0]);
        assert_eq!(next[2], r[2]);
    }

    #[test]
    fn isolated_agent_is_held() {
        let index = build_neighbor_index(
            &[
                Vec2::new(0.0, 0.0),
                Vec2::new(5.0, 0.0),
                Vec2::new(5.5, 0.0),
            ],
            1.0,
        )
        .unwrap();
        let r = [
            Vec2::new(0.2, 0.1),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 0.0),
        ];
        let (next, iso) = pseudoloc_step_2d(&r, &index, &[None, None, Some(r[2])], 0.5).unwrap();
        assert_eq!(iso, 1);
        assert_eq!(next[0], r[0]);
    }

    #[test]
    fn relaxation_for_uniform_degree() {
        let index = line_index();
        // middle agent: 1/1 + 1/1 = 2
        assert_relative_eq!(relaxation(&index, &[true, false, true]), 0.45);
        assert_relative_eq!(relaxation(&index, &[true, true, true]), 0.9);
    }

    #[test]
    fn grid_converges_to_weighted_harmonic_solution() {
        // oracle: Gauss-Seidel sweeps on sum_j (R_j - R_i) / d_j = 0 with the
        // same boundary data, neighbors found by brute force
        let m = 12;
        let pts: Vec<Vec2<f64>> = (0..m * m)
            .map(|k| Vec2::new((k % m) as f64, (k / m) as f64))
            .collect();
        let index = build_neighbor_index(&pts, 1.01).unwrap();
        let f = |p: Vec2<f64>| Vec2::new(0.5 * p.x + 0.1 * p.y, -0.2 * p.x * p.y + p.y);
        let xi: Vec<Option<Vec2<f64>>> = pts
            .iter()
            .map(|p| {
                let edge =
                    p.x == 0.0 || p.y == 0.0 || p.x == (m - 1) as f64 || p.y == (m - 1) as f64;
                edge.then(|| f(*p))
            })
            .collect();
        let run = run_pseudoloc_2d(
            &vec![Vec2::zero(); m * m],
            &index,
            &xi,
            None,
            50_000,
            1e-12,
            0,
        )
        .unwrap();
        assert!(run.converged);

        let nbrs: Vec<Vec<usize>> = (0..pts.len())
            .map(|i| {
                (0..pts.len())
                    .filter(|&j| j != i && pts[i].dist(pts[j]) <= 1.01)
                    .collect()
            })
            .collect();
        let mut u: Vec<Vec2<f64>> = xi.iter().map(|x| x.unwrap_or(Vec2::zero())).collect();
        for _ in 0..5000 {
            for i in 0..u.len() {
                if xi[i].is_some() {
                    continue;
                }
                let (mut s, mut w) = (Vec2::zero(), 0.0);
                for &j in &nbrs[i] {
                    let wj = 1.0 / nbrs[j].len() as f64;
                    s += u[j] * wj;
                    w += wj;
                }
                u[i] = s / w;
            }
        }
        for (a, b) in run.r.iter().zip(&u) {
            assert!(a.dist(*b) < 1e-9, "{a:?} {b:?}");
        }
    }

    proptest! {
        #[test]
        fn discrete_maximum_principle(
            seed_pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 10..80),
            vals in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 80),
            fixed_mask in prop::collection::vec(any::<bool>(), 80),
        ) {
            let pts: Vec<Vec2<f64>> = seed_pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
            let n = pts.len();
            let index = build_neighbor_index(&pts, 0.3).unwrap();
            let r: Vec<Vec2<f64>> = (0..n).map(|k| Vec2::new(vals[k].0, vals[k].1)).collect();
            let xi: Vec<Option<Vec2<f64>>> = (0..n)
                .map(|k| fixed_mask[k].then(|| Vec2::new(vals[79 - k].0, vals[79 - k].1)))
                .collect();
            let fixed: Vec<bool> = xi.iter().map(Option::is_some).collect();
            let omega = relaxation(&index, &fixed);
            let (next, _) = pseudoloc_step_2d(&r, &index, &xi, omega).unwrap();
            let all: Vec<Vec2<f64>> = r.iter().copied().chain(xi.iter().flatten().copied()).collect();
            let (lx, hx) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.x), a.1.max(p.x)));
            let (ly, hy) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.y), a.1.max(p.y)));
            for (k, p) in next.iter().enumerate() {
                if xi[k].is_none() {
                    prop_assert!(p.x >= lx - 1e-12 && p.x <= hx + 1e-12);
                    prop_assert!(p.y >= ly - 1e-12 && p.y <= hy + 1e-12);
                }
            }
        }
    }
}
