use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::boundary::{
    assign_boundary_targets, boundary_gammas, boundary_target_map, chain_tangents,
    localize_boundary, BoundaryChainState,
};
use super::control::{
    stage1_step, stage3_energy_terms, stage3_step, Stage1Params, Stage1State, Stage3Params,
};
use super::gradient::{GradientContext, GradientMethodTag, JacobianEstimate};
use super::pseudoloc::run_pseudoloc_2d;
use crate::config::{GradientMethod, Initial2D, SimConfig, TwoDConfig};
use crate::density::{estimate_boundary_density, estimate_density_2d};
use crate::error::{param, Error, Result};
use crate::geometry::{ClosedCurve, Vec2};
use crate::grid::Treatment;
use crate::neighbors::build_neighbor_index;
use crate::oracle::hausdorff_distance;
use crate::scalar::{count, lit, Real};
use crate::state::Swarm2D;
use crate::targets::{
    anchored_circle, build_pstar_2d, hex_points_inside, kernel_average, solve_harmonic_map,
    HarmonicMapField, PStarField2D, PowerLawDisk, SampleRule,
};

/// Vertices used for the target and initial boundary polygons.
const SHAPE_VERTICES: usize = 720;

/// Default communication radius in units of the initial lattice spacing.
/// About 30 neighbors per interior agent.
pub const RADIUS_PER_SPACING: f64 = 3.0;

/// Default flat-kernel width in units of the initial lattice spacing.
pub const KERNEL_PER_SPACING: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct InitialSwarm<T> {
    pub swarm: Swarm2D<T>,
    /// Lattice spacing of the interior fill.
    pub spacing: T,
    /// Shape the swarm fills.
    pub shape: ClosedCurve<T>,
}

fn vec2<T: Real>(a: [f64; 2]) -> Vec2<T> {
    Vec2::new(lit(a[0]), lit(a[1]))
}

/// Fills `shape` with exactly `n` agents: a boundary ring spaced about `s`
/// along `shape` (starting at its vertex 0, in its vertex order) and a
/// hexagonal lattice of spacing `s` inside. `s` is the largest spacing that
/// yields at least `n` agents; surplus interior points are dropped at random.
pub fn fill_shape<T: Real>(shape: &ClosedCurve<T>, n: usize, seed: u64) -> Result<InitialSwarm<T>> {
    if n < 10 {
        return Err(param(
            "agents",
            format!("need at least 10 agents in 2D, got {n}"),
        ));
    }
    let len = shape.length();
    let ring = |s: T| (len / s).round().to_usize().unwrap_or(0).max(3);
    let total = |s: T| ring(s) + hex_points_inside(shape, s, s / lit(2.0)).len();
    let area = shape.signed_area().abs();
    let mut lo = (area / count::<T>(n)).sqrt() * lit(0.3);
    let mut hi = (area / count::<T>(n)).sqrt() * lit(3.0);
    if total(lo) < n {
        return Err(Error::Domain(
            "cannot fit the requested agents into the shape".into(),
        ));
    }
    for _ in 0..60 {
        let mid = (lo + hi) / lit(2.0);
        if total(mid) >= n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = lo;
    let nb = ring(s);
    let mut interior = hex_points_inside(shape, s, s / lit(2.0));
    let excess = nb + interior.len() - n;
    if excess > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut drop = sample(&mut rng, interior.len(), excess).into_vec();
        drop.sort_unstable_by(|a, b| b.cmp(a));
        for k in drop {
            interior.remove(k);
        }
    }
    let mut positions = shape.resample(nb, T::zero());
    positions.extend(interior);
    let swarm = Swarm2D::new(positions, (0..nb).collect())?;
    Ok(InitialSwarm {
        swarm,
        spacing: s,
        shape: shape.clone(),
    })
}

/// `n` agents filling the disk, boundary chain starting at its leftmost point.
pub fn hex_disk_swarm<T: Real>(
    center: Vec2<T>,
    radius: T,
    n: usize,
    clockwise: bool,
    seed: u64,
) -> Result<InitialSwarm<T>> {
    let shape = ClosedCurve::circle(center, radius, SHAPE_VERTICES, T::pi(), clockwise)?;
    fill_shape(&shape, n, seed)
}

pub fn build_initial_swarm<T: Real>(
    cfg: &TwoDConfig,
    n: usize,
    seed: u64,
) -> Result<InitialSwarm<T>> {
    match &cfg.initial {
        Initial2D::TargetDisk => hex_disk_swarm(
            vec2(cfg.target_center),
            lit(cfg.target_radius),
            n,
            cfg.clockwise,
            seed,
        ),
        Initial2D::Ellipse {
            center,
            semi_x,
            semi_y,
        } => {
            if !(*semi_x > 0.0 && *semi_y > 0.0) {
                return Err(param("initial", "ellipse semi-axes must be positive"));
            }
            let shape = ClosedCurve::ellipse(
                vec2(*center),
                lit(*semi_x),
                lit(*semi_y),
                SHAPE_VERTICES,
                T::pi(),
                cfg.clockwise,
            )?;
            fill_shape(&shape, n, seed)
        }
    }
}

/// Target domain, its harmonic map and the compiled `p*`.
#[derive(Debug, Clone)]
pub struct TargetSetup<T> {
    /// Target boundary with vertex 0 at the anchor, oriented like the chain.
    pub curve: ClosedCurve<T>,
    pub rho_star: PowerLawDisk<T>,
    pub map: HarmonicMapField<T>,
    pub pstar: PStarField2D<T>,
}

impl<T: Real> TargetSetup<T> {
    pub fn build(
        cfg: &TwoDConfig,
        anchor: Vec2<T>,
        clockwise: bool,
        kernel_width: T,
        harmonic_tol: T,
    ) -> Result<Self> {
        let center = vec2(cfg.target_center);
        let radius = lit(cfg.target_radius);
        let circle = anchored_circle(center, radius, SHAPE_VERTICES, anchor, clockwise)?;
        let (curve, _) = assign_boundary_targets(&[], &circle, anchor, !clockwise)?;
        let rho_star =
            PowerLawDisk::new(center, radius, vec2(cfg.rho_center), lit(cfg.rho_exponent))?;
        let map = solve_harmonic_map(
            &curve,
            lit(cfg.grid_step),
            harmonic_tol,
            Treatment::ShortleyWeller,
        )?;
        let rule = if cfg.kernel_matched_pstar {
            SampleRule::KernelMatched(kernel_width)
        } else {
            SampleRule::Pointwise
        };
        let pstar = build_pstar_2d(|p| rho_star.density(p), &map, cfg.pstar_samples, rule)?;
        Ok(Self {
            curve,
            rho_star,
            map,
            pstar,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Stage1Metrics<T> {
    pub iter: usize,
    pub t: T,
    pub hausdorff: T,
    /// Largest `|r_k - r*_k|` over the boundary chain, true positions.
    pub max_boundary_error: T,
    pub gradient_fallbacks: usize,
    pub capped: usize,
    pub contained: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Stage2Metrics<T> {
    pub round: usize,
    pub residual: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Stage3Metrics<T> {
    pub iter: usize,
    pub t: T,
    /// `sum_i |rho_i - p*(R_i)|^2 |M*| / N`.
    pub e_rho: T,
    pub energy: T,
    pub kinetic: T,
    pub gradient_fallbacks: usize,
    pub contained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Snapshot2D<T> {
    /// 0 before Stage 1, then the stage the state belongs to.
    pub stage: u8,
    pub iter: usize,
    pub positions: Vec<Vec2<T>>,
    pub pseudo: Vec<Vec2<T>>,
    pub velocities: Vec<Vec2<T>>,
}

impl<T: Real> Snapshot2D<T> {
    fn of(swarm: &Swarm2D<T>, stage: u8, iter: usize) -> Self {
        Self {
            stage,
            iter,
            positions: swarm.positions.clone(),
            pseudo: swarm.pseudo.clone(),
            velocities: swarm.velocities.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallbackCounts {
    pub gradient: usize,
    pub singular_jacobian: usize,
    pub isolated_pseudoloc: usize,
    pub capped: usize,
    pub contained: usize,
}

#[derive(Debug, Clone)]
pub struct SelfOrg2DRun<T> {
    pub swarm: Swarm2D<T>,
    pub chain: BoundaryChainState<T>,
    pub stage1_state: Stage1State<T>,
    pub target: TargetSetup<T>,
    pub jacobian: JacobianEstimate<T>,
    pub radius: T,
    pub kernel_width: T,
    /// Lattice spacing of a fill of the target with the same agent count.
    pub spacing: T,
    pub closure_residual: T,
    pub pseudoloc_rounds: usize,
    pub pseudoloc_converged: bool,
    pub pseudoloc_omega: T,
    pub stage1: Vec<Stage1Metrics<T>>,
    pub stage2: Vec<Stage2Metrics<T>>,
    pub stage3: Vec<Stage3Metrics<T>>,
    pub snapshots: Vec<Snapshot2D<T>>,
    pub fallbacks: FallbackCounts,
    /// `sum_i |rho_i - rho*_d(r_i)|^2 |M*| / N` against the kernel-averaged
    /// true target at the agents' real positions, at the start and end of Stage 3.
    pub e_true_start: T,
    pub e_true_end: T,
}

impl<T: Real> SelfOrg2DRun<T> {
    pub fn final_hausdorff(&self) -> Option<T> {
        self.stage1.last().map(|m| m.hausdorff)
    }
}

fn boundary_metrics<T: Real>(
    swarm: &Swarm2D<T>,
    state: &Stage1State<T>,
    target: &ClosedCurve<T>,
    resolution: T,
) -> Result<(T, T)> {
    let curve = swarm.boundary_curve()?;
    let dh = hausdorff_distance(&curve, target, resolution)?;
    let worst = swarm
        .boundary_positions()
        .iter()
        .zip(&state.targets)
        .map(|(p, t)| p.dist(*t))
        .fold(T::zero(), T::max);
    Ok((dh, worst))
}

/// `(e_rho, potential, kinetic)` of the current state.
fn stage3_state_error<T: Real>(
    swarm: &Swarm2D<T>,
    pstar: &PStarField2D<T>,
    kernel_width: T,
    weight: T,
) -> Result<(T, T, T)> {
    let rho = estimate_density_2d(&swarm.positions, kernel_width)?;
    let target: Vec<T> = swarm.pseudo.iter().map(|&r| pstar.eval(r)).collect();
    let (pot, kin) = stage3_energy_terms(&rho.values, &target, &swarm.velocities, weight);
    Ok((pot + pot, pot, kin))
}

fn true_error<T: Real>(
    swarm: &Swarm2D<T>,
    target: &TargetSetup<T>,
    kernel_width: T,
    weight: T,
) -> Result<T> {
    let rho = estimate_density_2d(&swarm.positions, kernel_width)?;
    let f = |p: Vec2<T>| target.rho_star.density(p);
    Ok(swarm
        .positions
        .iter()
        .zip(&rho.values)
        .map(|(&p, &r)| {
            let t = kernel_average(&f, &target.curve, p, kernel_width);
            (r - t) * (r - t) * weight
        })
        .sum())
}

/// `(radius, kernel_width)` from the config or the lattice spacing.
fn resolve_widths<T: Real>(cfg: &SimConfig, spacing: T) -> Result<(T, T)> {
    let r = cfg
        .radius
        .map(lit)
        .unwrap_or(spacing * lit(RADIUS_PER_SPACING));
    let d = cfg
        .kernel_width
        .map(lit)
        .unwrap_or(spacing * lit(KERNEL_PER_SPACING));
    if !(r > T::zero()) {
        return Err(param("radius", "must be positive"));
    }
    if !(d > T::zero()) {
        return Err(param("kernel_width", "must be positive"));
    }
    Ok((r, d))
}

/// Boundary localization, `k1` Stage-1 steps, `k2` Stage-2 rounds and `k`
/// Stage-3 steps.
pub fn run_selforg_2d<T: Real>(cfg: &SimConfig) -> Result<SelfOrg2DRun<T>> {
    cfg.validate()?;
    let two = &cfg.two_d;
    let n = cfg.agent_count();
    let init = build_initial_swarm::<T>(two, n, cfg.seed)?;
    let mut swarm = init.swarm;
    // widths follow the spacing the swarm will have once it fills the target
    let target_area = T::pi() * lit::<T>(two.target_radius) * lit::<T>(two.target_radius);
    let spacing = init.spacing * (target_area / init.shape.signed_area().abs()).sqrt();
    let (radius, kernel_width) = resolve_widths(cfg, spacing)?;
    let dt3: T = lit(cfg.dt.unwrap_or(0.005));
    let resolution: T = lit(two.hausdorff_resolution);
    let mut snapshots = vec![Snapshot2D::of(&swarm, 0, 0)];
    let mut fallbacks = FallbackCounts::default();

    // boundary localization
    let chain_pts = swarm.boundary_positions();
    let nb = chain_pts.len();
    let q = estimate_boundary_density(&chain_pts)?;
    let tangents = chain_tangents(&chain_pts)?;
    let loc = localize_boundary(&q, &tangents)?;
    let gamma = boundary_gammas(nb, lit::<T>(cfg.tolerances.pseudoloc))?;
    let ccw = ClosedCurve::new(chain_pts.clone())?.is_counter_clockwise();
    let normals = tangents
        .iter()
        .map(|t| if ccw { -t.perp() } else { t.perp() })
        .collect();
    let mut chain = BoundaryChainState {
        gamma: gamma.clone(),
        est_positions: loc.positions,
        tangents,
        normals,
    };
    let origin = chain_pts[0];
    let target = TargetSetup::build(
        two,
        origin,
        !ccw,
        kernel_width,
        lit(cfg.tolerances.harmonic),
    )?;
    let (_, targets) = assign_boundary_targets(&gamma, &target.curve, origin, ccw)?;
    let mut state = Stage1State::new(targets, origin);

    // Stage 1
    let mut p1 = Stage1Params::new(lit::<T>(two.stage1_dt), radius);
    p1.kernel_width = kernel_width * lit(two.stage1_kernel_scale);
    p1.speed_cap = lit(two.stage1_speed_cap);
    let stride = two.metrics_stride.max(1);
    let mut stage1 = Vec::new();
    let record1 = |it: usize,
                   sw: &Swarm2D<T>,
                   st: &Stage1State<T>,
                   rep: (usize, usize, usize)|
     -> Result<Stage1Metrics<T>> {
        let (dh, worst) = boundary_metrics(sw, st, &target.curve, resolution)?;
        Ok(Stage1Metrics {
            iter: it,
            t: p1.dt * count(it),
            hausdorff: dh,
            max_boundary_error: worst,
            gradient_fallbacks: rep.0,
            capped: rep.1,
            contained: rep.2,
        })
    };
    stage1.push(record1(0, &swarm, &state, (0, 0, 0))?);
    for it in 1..=cfg.iterations.k1 {
        let rep = stage1_step(&mut swarm, &mut chain, &mut state, &p1)?;
        fallbacks.gradient += rep.gradient_fallbacks;
        fallbacks.capped += rep.capped;
        fallbacks.contained += rep.contained;
        if it % stride == 0 || it == cfg.iterations.k1 {
            stage1.push(record1(
                it,
                &swarm,
                &state,
                (rep.gradient_fallbacks, rep.capped, rep.contained),
            )?);
        }
        if two.snapshot_stride > 0 && it % two.snapshot_stride == 0 {
            snapshots.push(Snapshot2D::of(&swarm, 1, it));
        }
    }
    snapshots.push(Snapshot2D::of(&swarm, 1, cfg.iterations.k1));

    // Stage 2
    let index = build_neighbor_index(&swarm.positions, radius)?;
    let mut xi = vec![None; n];
    for (k, &id) in swarm.boundary_order.iter().enumerate() {
        xi[id] = Some(boundary_target_map(gamma[k]));
    }
    let r0: Vec<Vec2<T>> = xi
        .iter()
        .map(|x| x.unwrap_or(Vec2::new(T::one(), T::zero())))
        .collect();
    let run2 = run_pseudoloc_2d(
        &r0,
        &index,
        &xi,
        None,
        cfg.iterations.k2,
        lit(cfg.tolerances.pseudoloc),
        stride,
    )?;
    fallbacks.isolated_pseudoloc = run2.isolated;
    let mut stage2: Vec<Stage2Metrics<T>> = run2
        .trace
        .iter()
        .map(|&(round, residual)| Stage2Metrics { round, residual })
        .collect();
    if stage2.last().map(|m| m.round) != Some(run2.rounds) {
        stage2.push(Stage2Metrics {
            round: run2.rounds,
            residual: run2.residual,
        });
    }
    swarm.pseudo = run2.r;
    for v in swarm.velocities.iter_mut() {
        *v = Vec2::zero();
    }
    let ctx = GradientContext::new(&swarm.positions, &index, radius / lit(2.0))?;
    let jacobian = ctx.jacobian(&swarm.pseudo)?;
    fallbacks.singular_jacobian = jacobian.singular_count();
    snapshots.push(Snapshot2D::of(&swarm, 2, run2.rounds));

    // Stage 3
    let mut p3 = Stage3Params::new(dt3, radius);
    p3.kernel_width = kernel_width;
    p3.viscosity = two.viscosity.then(|| lit(two.viscosity_coefficient));
    p3.method = match two.gradient {
        GradientMethod::Jacobian => GradientMethodTag::Jacobian,
        GradientMethod::Meanshift => GradientMethodTag::Meanshift,
    };
    let boundary = swarm.boundary_curve()?;
    let weight = target.rho_star.area() / count::<T>(n);
    let mut stage3 = Vec::new();
    let record3 = |it: usize, sw: &Swarm2D<T>, rep: (usize, usize)| -> Result<Stage3Metrics<T>> {
        let (e, pot, kin) = stage3_state_error(sw, &target.pstar, kernel_width, weight)?;
        Ok(Stage3Metrics {
            iter: it,
            t: dt3 * count(it),
            e_rho: e,
            energy: pot + kin,
            kinetic: kin,
            gradient_fallbacks: rep.0,
            contained: rep.1,
        })
    };
    let e_true_start = true_error(&swarm, &target, kernel_width, weight)?;
    stage3.push(record3(0, &swarm, (0, 0))?);
    for it in 1..=cfg.iterations.k {
        let rep = stage3_step(&mut swarm, &target.pstar, &jacobian, &boundary, &p3)?;
        fallbacks.gradient += rep.gradient_fallbacks;
        fallbacks.contained += rep.contained;
        if it % stride == 0 || it == cfg.iterations.k {
            stage3.push(record3(
                it,
                &swarm,
                (rep.gradient_fallbacks, rep.contained),
            )?);
        }
        if two.snapshot_stride > 0 && it % two.snapshot_stride == 0 {
            snapshots.push(Snapshot2D::of(&swarm, 3, it));
        }
    }
    let e_true_end = true_error(&swarm, &target, kernel_width, weight)?;
    snapshots.push(Snapshot2D::of(&swarm, 3, cfg.iterations.k));

    Ok(SelfOrg2DRun {
        swarm,
        chain,
        stage1_state: state,
        target,
        jacobian,
        radius,
        kernel_width,
        spacing,
        closure_residual: loc.closure_residual,
        pseudoloc_rounds: run2.rounds,
        pseudoloc_converged: run2.converged,
        pseudoloc_omega: run2.omega,
        stage1,
        stage2,
        stage3,
        snapshots,
        fallbacks,
        e_true_start,
        e_true_end,
    })
}
