use serde::{Deserialize, Serialize};

use super::boundary::BoundaryChainState;
use super::gradient::{GradientContext, GradientMethodTag, JacobianEstimate};
use crate::density::{edge_corrected_2d, estimate_density_2d};
use crate::error::{param, Error, Result};
use crate::geometry::{ClosedCurve, Vec2};
use crate::neighbors::{build_neighbor_index, NeighborIndex};
use crate::scalar::{count, lit, median, Real};
use crate::state::Swarm2D;
use crate::targets::PStarField2D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Stage1Params<T> {
    pub dt: T,
    /// Communication radius.
    pub radius: T,
    /// Flat-kernel width of the density estimate.
    pub kernel_width: T,
    /// Shift of the perturbed disks in the gradient estimate.
    pub offset: T,
    /// Density floor as a fraction of the median density.
    pub density_floor: T,
    /// Interior speed cap as a fraction of `radius / dt`.
    pub speed_cap: T,
    /// Distance inside the boundary at which escaped agents are put back,
    /// as a fraction of `radius`.
    pub inset: T,
    /// Divide interior densities by the share of their kernel disk inside
    /// the boundary chain.
    pub edge_correction: bool,
}

impl<T: Real> Stage1Params<T> {
    pub fn new(dt: T, radius: T) -> Self {
        Self {
            dt,
            radius,
            kernel_width: radius,
            offset: radius / lit(2.0),
            density_floor: lit(0.1),
            speed_cap: lit(0.1),
            inset: lit(0.02),
            edge_correction: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero() && self.dt < T::one()) {
            return Err(param(
                "dt",
                format!("Stage-1 step must lie in (0, 1), got {}", self.dt),
            ));
        }
        if !(self.radius > T::zero() && self.offset > T::zero() && self.kernel_width > T::zero()) {
            return Err(param(
                "radius",
                "radius, kernel width and offset must be positive",
            ));
        }
        Ok(())
    }
}

/// Boundary shape-control state, indexed in chain order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Stage1State<T> {
    /// `r*(gamma_k)` in world coordinates.
    pub targets: Vec<Vec2<T>>,
    /// `e_k = r_k - r*_k` as each agent estimates it.
    pub errors: Vec<Vec2<T>>,
    pub velocities: Vec<Vec2<T>>,
    /// World position of the localization frame origin (agent 0 at the start).
    pub origin: Vec2<T>,
}

impl<T: Real> Stage1State<T> {
    pub fn new(targets: Vec<Vec2<T>>, origin: Vec2<T>) -> Self {
        let n = targets.len();
        Self {
            targets,
            errors: vec![Vec2::zero(); n],
            velocities: vec![Vec2::zero(); n],
            origin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct StepReport<T> {
    pub gradient_fallbacks: usize,
    pub capped: usize,
    pub contained: usize,
    pub isolated: usize,
    /// Viscosity actually applied (Stage 3).
    pub viscosity: T,
    pub density: Vec<T>,
    /// `p*(R_i)` (Stage 3).
    pub target: Vec<T>,
}

/// Mirrors agents in `ids` that left `boundary` back inside across the nearest
/// boundary point, plus `inset`, and removes the outward part of their
/// velocity. The mirrored depth is capped at `max_depth`; a plain projection
/// would stack nearby escapees on one point.
pub fn contain<T: Real>(
    positions: &mut [Vec2<T>],
    velocities: &mut [Vec2<T>],
    ids: &[usize],
    boundary: &ClosedCurve<T>,
    inset: T,
    max_depth: T,
) -> usize {
    let center = boundary.centroid();
    let mut moved = 0;
    for &i in ids {
        let p = positions[i];
        if boundary.contains(p) {
            continue;
        }
        let (_, q, _) = boundary.nearest(p);
        let inward = (q - p)
            .normalized()
            .or_else(|| (center - q).normalized())
            .unwrap_or(Vec2::zero());
        positions[i] = q + inward * (inset + p.dist(q).min(max_depth));
        let vn = velocities[i].dot(inward);
        if vn < T::zero() {
            velocities[i] -= inward * vn;
        }
        moved += 1;
    }
    moved
}

/// One Stage-1 step. Interior agents follow `-grad rho / rho` from the
/// meanshift estimate; boundary agents run `v <- v + dt (-e - v)` on their
/// dead-reckoned position estimates, which then advance by `v dt`.
pub fn stage1_step<T: Real>(
    swarm: &mut Swarm2D<T>,
    chain: &mut BoundaryChainState<T>,
    state: &mut Stage1State<T>,
    params: &Stage1Params<T>,
) -> Result<StepReport<T>> {
    params.validate()?;
    let nb = swarm.boundary_order.len();
    if chain.est_positions.len() != nb || state.targets.len() != nb {
        return Err(Error::Input(
            "boundary state does not match the swarm's chain".into(),
        ));
    }
    let index = build_neighbor_index(&swarm.positions, params.radius)?;
    let est = estimate_density_2d(&swarm.positions, params.kernel_width)?;
    let rho = if params.edge_correction {
        edge_corrected_2d(&swarm.positions, &est, &swarm.boundary_curve()?, lit(0.25))
    } else {
        est.values
    };
    let ctx = GradientContext::new(&swarm.positions, &index, params.offset)?;
    let grad = ctx.meanshift(&rho)?;
    let floor = median(&rho) * params.density_floor;
    let vmax = params.speed_cap * params.radius / params.dt;
    let mut v = vec![Vec2::zero(); swarm.len()];
    let mut capped = 0;
    for i in 0..swarm.len() {
        if swarm.is_boundary(i) {
            continue;
        }
        let mut u = -grad.values[i] / rho[i].max(floor);
        let s = u.norm();
        if s > vmax {
            u = u * (vmax / s);
            capped += 1;
        }
        v[i] = u;
    }
    for (k, &id) in swarm.boundary_order.iter().enumerate() {
        let e = chain.est_positions[k] - (state.targets[k] - state.origin);
        let w = state.velocities[k] + (-e - state.velocities[k]) * params.dt;
        state.errors[k] = e;
        state.velocities[k] = w;
        chain.est_positions[k] += w * params.dt;
        v[id] = w;
    }
    swarm.integrate(&v, params.dt)?;
    let interior = swarm.interior_ids();
    let boundary = swarm.boundary_curve()?;
    let contained = contain(
        &mut swarm.positions,
        &mut swarm.velocities,
        &interior,
        &boundary,
        params.inset * params.radius,
        params.radius / lit(2.0),
    );
    Ok(StepReport {
        gradient_fallbacks: grad.flagged_count(),
        capped,
        contained,
        isolated: index.degrees.iter().filter(|&&d| d == 0).count(),
        viscosity: T::zero(),
        density: rho,
        target: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Stage3Params<T> {
    pub dt: T,
    pub radius: T,
    pub kernel_width: T,
    pub offset: T,
    /// Coefficient of the velocity Laplacian; `None` drops the term.
    pub viscosity: Option<T>,
    pub method: GradientMethodTag,
    pub inset: T,
}

impl<T: Real> Stage3Params<T> {
    pub fn new(dt: T, radius: T) -> Self {
        Self {
            dt,
            radius,
            kernel_width: radius,
            offset: radius / lit(2.0),
            viscosity: Some(T::one()),
            method: GradientMethodTag::Jacobian,
            inset: lit(0.02),
        }
    }
}

/// Graph Laplacian `(8/r^2) sum_j (v_j - v_i) / d_j`, which matches the
/// continuum Laplacian for uniformly filled disks of radius `r`.
fn velocity_laplacian<T: Real>(v: &[Vec2<T>], index: &NeighborIndex<T>, i: usize) -> Vec2<T> {
    let r = index.radius;
    let mut acc = Vec2::zero();
    for &j in index.neighbors(i) {
        acc += (v[j] - v[i]) / count::<T>(index.degrees[j]);
    }
    acc * (lit::<T>(8.0) / (r * r))
}

/// One Stage-3 step:
/// `v <- v + dt (-rho grad(rho - p*(R)) + nu Lap v - v)` for interior agents,
/// positions advance by `v dt`, pseudo-coordinates by `J v dt`. Boundary
/// agents stay put. `nu` is reduced where needed to keep the explicit
/// viscous update stable.
pub fn stage3_step<T: Real>(
    swarm: &mut Swarm2D<T>,
    pstar: &PStarField2D<T>,
    jac: &JacobianEstimate<T>,
    boundary: &ClosedCurve<T>,
    params: &Stage3Params<T>,
) -> Result<StepReport<T>> {
    if !(params.dt > T::zero()) {
        return Err(param("dt", "must be positive"));
    }
    let n = swarm.len();
    if jac.j.len() != n {
        return Err(Error::Input("Jacobian does not cover the swarm".into()));
    }
    let index = build_neighbor_index(&swarm.positions, params.radius)?;
    let rho = estimate_density_2d(&swarm.positions, params.kernel_width)?;
    let target: Vec<T> = swarm.pseudo.iter().map(|&r| pstar.eval(r)).collect();
    let f: Vec<T> = rho
        .values
        .iter()
        .zip(&target)
        .map(|(a, b)| *a - *b)
        .collect();
    let ctx = GradientContext::new(&swarm.positions, &index, params.offset)?;
    let grad = match params.method {
        GradientMethodTag::Jacobian => ctx.via_jacobian(&f, &swarm.pseudo, jac)?,
        GradientMethodTag::Meanshift => ctx.meanshift(&f)?,
    };
    let interior = swarm.interior_ids();
    let nu = match params.viscosity {
        Some(nu) if nu > T::zero() => {
            let smax = interior
                .iter()
                .map(|&i| {
                    index
                        .neighbors(i)
                        .iter()
                        .map(|&j| T::one() / count::<T>(index.degrees[j]))
                        .sum::<T>()
                })
                .fold(T::zero(), T::max);
            let limit = lit::<T>(0.9) * params.radius * params.radius
                / (lit::<T>(8.0) * params.dt * smax.max(T::one()));
            nu.min(limit)
        }
        _ => T::zero(),
    };
    let old = swarm.velocities.clone();
    let mut v = vec![Vec2::zero(); n];
    for &i in &interior {
        let mut acc = -grad.values[i] * rho.values[i] - old[i];
        if nu > T::zero() {
            acc += velocity_laplacian(&old, &index, i) * nu;
        }
        v[i] = old[i] + acc * params.dt;
    }
    swarm.integrate(&v, params.dt)?;
    for &i in &interior {
        if !jac.singular[i] {
            swarm.pseudo[i] += jac.j[i].mul_vec(v[i]) * params.dt;
        }
    }
    let contained = contain(
        &mut swarm.positions,
        &mut swarm.velocities,
        &interior,
        boundary,
        params.inset * params.radius,
        params.radius / lit(2.0),
    );
    Ok(StepReport {
        gradient_fallbacks: grad.flagged_count(),
        capped: 0,
        contained,
        isolated: index.degrees.iter().filter(|&&d| d == 0).count(),
        viscosity: nu,
        density: rho.values,
        target,
    })
}

/// `(1/2 sum w (rho_i - p*_i)^2, 1/2 sum w |v_i|^2)`.
pub fn stage3_energy_terms<T: Real>(
    rho: &[T],
    target: &[T],
    velocities: &[Vec2<T>],
    weight: T,
) -> (T, T) {
    let half = lit::<T>(0.5);
    let pot: T = rho
        .iter()
        .zip(target)
        .map(|(a, b)| (*a - *b) * (*a - *b))
        .sum();
    let kin: T = velocities.iter().map(|v| v.norm_sq()).sum();
    (half * weight * pot, half * weight * kin)
}
