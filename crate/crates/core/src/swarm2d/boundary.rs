use serde::{Deserialize, Serialize};

use crate::density::BoundaryDensity;
use crate::error::{Error, Result};
use crate::geometry::{project_to_segment, ClosedCurve, Vec2};
use crate::pseudoloc1d::{run_pseudoloc_1d, PseudolocParams1D};
use crate::scalar::{lit, Real};

/// Per-boundary-agent parametrization and localized coordinates, indexed in
/// chain order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BoundaryChainState<T> {
    pub gamma: Vec<T>,
    pub est_positions: Vec<Vec2<T>>,
    pub tangents: Vec<Vec2<T>>,
    pub normals: Vec<Vec2<T>>,
}

/// Boundary values on the unit circle centered `(1, 0)`:
/// `xi(gamma) = (1 - cos 2 pi gamma, sin 2 pi gamma)`.
pub fn boundary_target_map<T: Real>(gamma: T) -> Vec2<T> {
    let a = lit::<T>(2.0) * T::pi() * gamma;
    Vec2::new(T::one() - a.cos(), a.sin())
}

/// Unit tangents along the chain. At a vertex the tangent is the normalized
/// sum of the incoming and outgoing edge directions.
pub fn chain_tangents<T: Real>(chain: &[Vec2<T>]) -> Result<Vec<Vec2<T>>> {
    let n = chain.len();
    if n < 3 {
        return Err(Error::Input(
            "boundary chain needs at least 3 agents".into(),
        ));
    }
    (0..n)
        .map(|i| {
            let prev = chain[(i + n - 1) % n];
            let next = chain[(i + 1) % n];
            let din = (chain[i] - prev).normalized().ok_or_else(|| {
                Error::Degenerate(format!("agents {} and {i} coincide", (i + n - 1) % n))
            })?;
            let dout = (next - chain[i]).normalized().ok_or_else(|| {
                Error::Degenerate(format!("agents {i} and {} coincide", (i + 1) % n))
            })?;
            Ok((din + dout).normalized().unwrap_or(dout))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BoundaryLocalization<T> {
    /// Coordinates relative to agent 0, in chain order.
    pub positions: Vec<Vec2<T>>,
    /// Position reached after walking the full loop back to agent 0.
    pub closure_residual: T,
}

/// Trapezoid integration of `s / q` in `gamma`:
/// `x_i = (dgamma / 2) sum_{k < i} (s_k / q_k + s_{k+1} / q_{k+1})`, `x_0 = 0`.
pub fn localize_boundary<T: Real>(
    q: &BoundaryDensity<T>,
    tangents: &[Vec2<T>],
) -> Result<BoundaryLocalization<T>> {
    let n = q.values.len();
    if n < 3 || tangents.len() != n {
        return Err(Error::Input(
            "boundary density and tangents must cover the same chain".into(),
        ));
    }
    if let Some(k) = q.values.iter().position(|&v| !(v > T::zero())) {
        return Err(Error::Input(format!(
            "boundary density at agent {k} is not positive"
        )));
    }
    let half = q.gamma_spacing / lit(2.0);
    let term = |k: usize| tangents[k] / q.values[k];
    let mut positions = Vec::with_capacity(n);
    let mut x = Vec2::zero();
    positions.push(x);
    for k in 0..n {
        x += (term(k) + term((k + 1) % n)) * half;
        if k + 1 < n {
            positions.push(x);
        }
    }
    Ok(BoundaryLocalization {
        positions,
        closure_residual: x.norm(),
    })
}

/// Pseudo-arclength parameters of the chain from the 1D pseudo-localization
/// run on the chain opened at agent 0 (node `N_b` is agent 0 again, `gamma = 1`).
pub fn boundary_gammas<T: Real>(n_b: usize, tolerance: T) -> Result<Vec<T>> {
    if n_b < 3 {
        return Err(Error::Input(
            "boundary chain needs at least 3 agents".into(),
        ));
    }
    let mut params = PseudolocParams1D::<T>::for_agents(n_b + 1);
    params.tolerance = tolerance;
    let run = run_pseudoloc_1d(&vec![T::zero(); n_b + 1], T::zero(), &params, 0)?;
    if !run.converged {
        return Err(Error::NotConverged {
            iterations: run.iterations,
            residual: f64::NAN,
        });
    }
    let mut g = run.x;
    g.truncate(n_b);
    g[0] = T::zero();
    Ok(g)
}

/// Re-indexes `target` so that vertex 0 is its point nearest to `anchor` and
/// its orientation matches `counter_clockwise`, then returns that curve with
/// the targets `r*(gamma_i)`.
pub fn assign_boundary_targets<T: Real>(
    gammas: &[T],
    target: &ClosedCurve<T>,
    anchor: Vec2<T>,
    counter_clockwise: bool,
) -> Result<(ClosedCurve<T>, Vec<Vec2<T>>)> {
    if !(target.length() > T::zero()) {
        return Err(Error::Degenerate(
            "target boundary has zero perimeter".into(),
        ));
    }
    let v = target.vertices();
    let n = v.len();
    let mut best = (0usize, v[0], T::infinity());
    for k in 0..n {
        let (a, b) = target.segment(k);
        let (_, p) = project_to_segment(anchor, a, b);
        let d = p.dist(anchor);
        if d < best.2 {
            best = (k, p, d);
        }
    }
    let (k, q, _) = best;
    let tol = target.length() * lit(1e-12);
    let mut ring: Vec<Vec2<T>> = Vec::with_capacity(n + 1);
    ring.push(q);
    for s in 1..=n {
        let p = v[(k + s) % n];
        if p.dist(*ring.last().unwrap()) > tol && (s < n || p.dist(q) > tol) {
            ring.push(p);
        }
    }
    if target.is_counter_clockwise() != counter_clockwise {
        ring[1..].reverse();
    }
    let anchored = ClosedCurve::new(ring)?;
    let targets = gammas.iter().map(|&g| anchored.point_at(g)).collect();
    Ok((anchored, targets))
}
