//! Continuum reference solvers and diagnostics used to validate the agent
//! simulations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{OracleCheck, OracleConfig};
use crate::density::estimate_density_2d;
use crate::error::{param, Error, Result};
use crate::geometry::{ClosedCurve, Vec2};
use crate::grid::{GridDomain, Treatment};
use crate::scalar::{count, lit, Real};
use crate::state::Swarm2D;
use crate::swarm2d::stage3_energy_terms;
use crate::targets::{PStarField2D, SineProfile};

/// First zero of `J_0`, squared: the lowest Dirichlet eigenvalue of the unit disk.
pub const BESSEL_J01_SQUARED: f64 = 5.783_185_962_946_784;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CdfReference<T> {
    pub theta: Vec<T>,
    /// `theta` at the last sample, i.e. the total mass.
    pub total: T,
}

/// Cumulative trapezoid integral of `rho` over the sorted sample points `x`,
/// starting at 0.
pub fn cdf_reference<T: Real>(x: &[T], rho: &[T]) -> Result<CdfReference<T>> {
    if x.len() != rho.len() || x.len() < 2 {
        return Err(Error::Input(
            "need matching sample points and densities, at least 2".into(),
        ));
    }
    if let Some(k) = rho.iter().position(|&r| !(r > T::zero())) {
        return Err(Error::Input(format!("density sample {k} is not positive")));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input(
            "sample points must be strictly increasing".into(),
        ));
    }
    let half = lit::<T>(0.5);
    let mut theta = Vec::with_capacity(x.len());
    let mut acc = T::zero();
    theta.push(acc);
    for k in 1..x.len() {
        acc += (x[k] - x[k - 1]) * (rho[k] + rho[k - 1]) * half;
        theta.push(acc);
    }
    Ok(CdfReference { theta, total: acc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PdeRun1D<T> {
    pub x: Vec<T>,
    pub alpha: T,
    pub beta: T,
    pub t: T,
    pub steps: usize,
    pub dt: T,
    /// Discrete steady state: the normalized CDF of `rho`.
    pub theta: Vec<T>,
    /// `V` before the first step and after every `stride` steps.
    pub lyapunov: Vec<T>,
    /// Largest single-step increase of `V` (negative when strictly decreasing).
    pub max_lyapunov_increase: T,
}

/// Discrete `V = 1/2 int rho w^2 + 1/2 int (w_x)^2 / rho` for `w = X - Theta`.
pub fn pde_lyapunov<T: Real>(w: &[T], rho: &[T], h: T) -> T {
    let n = w.len();
    let half = lit::<T>(0.5);
    let mut mass = T::zero();
    for i in 0..n {
        let wt = if i == 0 || i == n - 1 { h * half } else { h };
        mass += wt * rho[i] * w[i] * w[i];
    }
    let mut grad = T::zero();
    for i in 0..n - 1 {
        let dw = w[i + 1] - w[i];
        grad += dw * dw / (h * (rho[i] + rho[i + 1]) * half);
    }
    half * (mass + grad)
}

/// Explicit finite differences for `X_t = (1/rho) (X_x / rho)_x` on a
/// uniform grid over `[0, length]` with `rho` given at the nodes, and
/// boundary values following `alpha' = -alpha`, `beta' = 1 - beta`.
/// `dt = None` takes 90% of the stability bound `min(rho)^2 h^2 / 2`.
pub fn solve_pseudoloc_pde_1d<T: Real>(
    rho: &[T],
    length: T,
    x0: &[T],
    alpha0: T,
    beta0: T,
    t_end: T,
    dt: Option<T>,
    stride: usize,
) -> Result<PdeRun1D<T>> {
    let n = rho.len();
    if n < 3 || x0.len() != n {
        return Err(Error::Input(
            "need at least 3 nodes and matching initial data".into(),
        ));
    }
    if !(length > T::zero()) {
        return Err(param("length", "must be positive"));
    }
    let h = length / count(n - 1);
    let xs: Vec<T> = (0..n).map(|i| h * count(i)).collect();
    let cdf = cdf_reference(&xs, rho)?;
    let theta: Vec<T> = cdf.theta.iter().map(|&v| v / cdf.total).collect();
    let rmin = rho.iter().copied().fold(T::infinity(), T::min);
    let bound = rmin * rmin * h * h / lit(2.0);
    let dt = dt.unwrap_or(bound * lit(0.9));
    if !(dt > T::zero()) || dt > bound {
        return Err(Error::Cfl {
            dt: dt.as_f64(),
            required: bound.as_f64(),
        });
    }
    let half = lit::<T>(0.5);
    let inv_mid: Vec<T> = (0..n - 1)
        .map(|i| T::one() / ((rho[i] + rho[i + 1]) * half))
        .collect();
    let mut x = x0.to_vec();
    x[0] = alpha0;
    x[n - 1] = beta0;
    let (mut alpha, mut beta) = (alpha0, beta0);
    let steps = (t_end / dt).ceil().to_usize().unwrap_or(0);
    let stride = stride.max(1);
    let v_of = |x: &[T]| {
        let w: Vec<T> = x.iter().zip(&theta).map(|(a, b)| *a - *b).collect();
        pde_lyapunov(&w, rho, h)
    };
    let mut v_prev = v_of(&x);
    let mut lyapunov = vec![v_prev];
    let mut worst = T::neg_infinity();
    let mut next = x.clone();
    let c = dt / (h * h);
    for s in 1..=steps {
        for i in 1..n - 1 {
            let flux = (x[i + 1] - x[i]) * inv_mid[i] - (x[i] - x[i - 1]) * inv_mid[i - 1];
            next[i] = x[i] + c * flux / rho[i];
        }
        alpha = alpha - dt * alpha;
        beta = beta + dt * (T::one() - beta);
        next[0] = alpha;
        next[n - 1] = beta;
        std::mem::swap(&mut x, &mut next);
        let v = v_of(&x);
        worst = worst.max(v - v_prev);
        v_prev = v;
        if s % stride == 0 || s == steps {
            lyapunov.push(v);
        }
    }
    Ok(PdeRun1D {
        x,
        alpha,
        beta,
        t: dt * count(steps),
        steps,
        dt,
        theta,
        lyapunov,
        max_lyapunov_increase: worst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HeatFlowRun<T> {
    pub u: Vec<Vec2<T>>,
    pub t: T,
    pub steps: usize,
    pub dt: T,
    /// `(t, max |u - u_harmonic|)` after every step, starting at `t = 0`.
    pub errors: Vec<(T, T)>,
    /// Dirichlet energy after every step, starting at `t = 0`.
    pub energies: Vec<T>,
    /// Least-squares decay rate of the error over the fit window.
    pub rate: Option<T>,
    pub fit_points: usize,
}

/// Window of errors used for the exponential fit.
pub const FIT_WINDOW: (f64, f64) = (1e-6, 1e-2);

/// Explicit heat flow `u_t = Lap u` for both components with the Dirichlet
/// data `bv`, from `u0`, until `t_end` or the error against `reference`
/// falls below the fit window. `dt = None` takes `0.2 h^2`.
pub fn solve_heat_flow_disk<T: Real>(
    domain: &GridDomain<T>,
    bv: &[[Vec2<T>; 4]],
    u0: &[Vec2<T>],
    reference: &[Vec2<T>],
    t_end: T,
    dt: Option<T>,
) -> Result<HeatFlowRun<T>> {
    if u0.len() != domain.len() || reference.len() != domain.len() || bv.len() != domain.len() {
        return Err(Error::Input("field lengths do not match the grid".into()));
    }
    let h2 = domain.h * domain.h;
    let smax = (0..domain.len())
        .map(|k| domain.weights(k).iter().copied().sum::<T>())
        .fold(T::zero(), T::max);
    let bound = h2 / smax;
    let dt = dt.unwrap_or(h2 * lit(0.2));
    if !(dt > T::zero()) || dt > bound {
        return Err(Error::Cfl {
            dt: dt.as_f64(),
            required: bound.as_f64(),
        });
    }
    let err = |u: &[Vec2<T>]| {
        u.iter()
            .zip(reference)
            .map(|(a, b)| (a.x - b.x).abs().max((a.y - b.y).abs()))
            .fold(T::zero(), T::max)
    };
    let stop = lit::<T>(FIT_WINDOW.0) * lit(0.1);
    let mut u = u0.to_vec();
    let mut errors = vec![(T::zero(), err(&u))];
    let mut energies = vec![domain.dirichlet_energy(&u, bv)];
    let max_steps = (t_end / dt).ceil().to_usize().unwrap_or(0);
    let mut steps = 0;
    while steps < max_steps {
        let lap = domain.laplacian(&u, bv);
        for (v, l) in u.iter_mut().zip(lap) {
            *v += l * dt;
        }
        steps += 1;
        let e = err(&u);
        errors.push((dt * count(steps), e));
        energies.push(domain.dirichlet_energy(&u, bv));
        if e < stop {
            break;
        }
    }
    let (rate, fit_points) = fit_decay_rate(&errors, lit(FIT_WINDOW.0), lit(FIT_WINDOW.1));
    Ok(HeatFlowRun {
        u,
        t: dt * count(steps),
        steps,
        dt,
        errors,
        energies,
        rate,
        fit_points,
    })
}

/// Least-squares slope of `-ln e` against `t` over samples with `e` in `[lo, hi]`.
pub fn fit_decay_rate<T: Real>(series: &[(T, T)], lo: T, hi: T) -> (Option<T>, usize) {
    let pts: Vec<(T, T)> = series
        .iter()
        .filter(|(_, e)| *e >= lo && *e <= hi)
        .map(|&(t, e)| (t, e.ln()))
        .collect();
    let m = pts.len();
    if m < 2 {
        return (None, m);
    }
    let mt = pts.iter().map(|p| p.0).sum::<T>() / count(m);
    let my = pts.iter().map(|p| p.1).sum::<T>() / count(m);
    let sxy: T = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: T = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    if !(sxx > T::zero()) {
        return (None, m);
    }
    (Some(-sxy / sxx), m)
}

/// `E = 1/2 sum w (rho_i - p*(R_i))^2 + 1/2 sum w |v_i|^2`, `w = area / N`,
/// with `rho` the flat-kernel estimate of width `kernel_width`.
pub fn stage3_energy<T: Real>(
    swarm: &Swarm2D<T>,
    pstar: &PStarField2D<T>,
    kernel_width: T,
    area: T,
) -> Result<T> {
    let rho = estimate_density_2d(&swarm.positions, kernel_width)?;
    let target: Vec<T> = swarm.pseudo.iter().map(|&r| pstar.eval(r)).collect();
    let w = area / count::<T>(swarm.len().max(1));
    let (pot, kin) = stage3_energy_terms(&rho.values, &target, &swarm.velocities, w);
    Ok(pot + kin)
}

/// Symmetric Hausdorff distance between two closed polylines. Each curve is
/// sampled at spacing at most `resolution` (plus its vertices) and measured
/// exactly against the other polyline.
pub fn hausdorff_distance<T: Real>(
    a: &ClosedCurve<T>,
    b: &ClosedCurve<T>,
    resolution: T,
) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input("empty curve".into()));
    }
    if !(resolution > T::zero()) {
        return Err(param("resolution", "must be positive"));
    }
    let one_way = |from: &ClosedCurve<T>, to: &ClosedCurve<T>| {
        let n = (from.length() / resolution)
            .ceil()
            .to_usize()
            .unwrap_or(1)
            .max(1);
        from.resample(n, T::zero())
            .into_iter()
            .chain(from.vertices().iter().copied())
            .map(|p| to.distance(p))
            .fold(T::zero(), T::max)
    };
    Ok(one_way(a, b).max(one_way(b, a)))
}

/// Outcome of one oracle check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub check: String,
    pub passed: bool,
    pub measured: BTreeMap<String, f64>,
    pub thresholds: BTreeMap<String, f64>,
}

impl OracleReport {
    fn new(check: OracleCheck) -> Self {
        Self {
            check: check.name().to_string(),
            passed: true,
            measured: BTreeMap::new(),
            thresholds: BTreeMap::new(),
        }
    }

    /// Records `value <= limit` under `name`.
    fn at_most(&mut self, name: &str, value: f64, limit: f64) {
        self.measured.insert(name.to_string(), value);
        self.thresholds.insert(name.to_string(), limit);
        self.passed &= value <= limit;
    }

    fn note(&mut self, name: &str, value: f64) {
        self.measured.insert(name.to_string(), value);
    }
}

pub fn run_check(check: OracleCheck, cfg: &OracleConfig) -> Result<OracleReport> {
    let mut rep = OracleReport::new(check);
    match check {
        OracleCheck::CheckCdf => check_cdf(&mut rep)?,
        OracleCheck::CheckPde1d => check_pde1d(&mut rep, cfg)?,
        OracleCheck::CheckHeatflow => check_heatflow(&mut rep, cfg)?,
        OracleCheck::CheckHausdorff => check_hausdorff(&mut rep)?,
    }
    Ok(rep)
}

fn check_cdf(rep: &mut OracleReport) -> Result<()> {
    let m = 10_000;
    let s = SineProfile::<f64>::for_agents(1000);
    let l = std::f64::consts::FRAC_PI_2;
    let xs: Vec<f64> = (0..m).map(|k| l * k as f64 / (m - 1) as f64).collect();
    let rho: Vec<f64> = xs.iter().map(|&x| s.density(x)).collect();
    let cdf = cdf_reference(&xs, &rho)?;
    let err = xs
        .iter()
        .zip(&cdf.theta)
        .map(|(&x, &t)| (t - s.cdf(x)).abs())
        .fold(0.0, f64::max);
    rep.at_most("max_abs_error_vs_analytic", err, 1e-6);
    rep.at_most("total_mass_error", (cdf.total - 1.0).abs(), 1e-6);
    let increasing = cdf.theta.windows(2).all(|w| w[1] > w[0]);
    rep.at_most(
        "non_increasing_steps",
        if increasing { 0.0 } else { 1.0 },
        0.0,
    );
    Ok(())
}

fn check_pde1d(rep: &mut OracleReport, cfg: &OracleConfig) -> Result<()> {
    let n = cfg.pde_cells.max(2) + 1;
    let rho = vec![1.0f64; n];
    let run = solve_pseudoloc_pde_1d(&rho, 1.0, &vec![0.0; n], 0.0, 0.0, 15.0, None, 1000)?;
    let err = run
        .x
        .iter()
        .enumerate()
        .map(|(i, v)| (v - i as f64 / (n - 1) as f64).abs())
        .fold(0.0, f64::max);
    rep.at_most("max_abs_error_vs_linear", err, 1e-4);
    let v0 = run.lyapunov[0];
    rep.at_most(
        "max_lyapunov_step_increase",
        run.max_lyapunov_increase,
        1e-14 * v0,
    );
    rep.note("steps", run.steps as f64);
    // the steady state does not move
    let s = SineProfile::<f64>::for_agents(1000);
    let l = std::f64::consts::FRAC_PI_2;
    let rho: Vec<f64> = (0..n)
        .map(|i| s.density(l * i as f64 / (n - 1) as f64))
        .collect();
    let theta = solve_pseudoloc_pde_1d(&rho, l, &vec![0.0; n], 0.0, 1.0, 0.0, None, 1)?.theta;
    let still = solve_pseudoloc_pde_1d(&rho, l, &theta, 0.0, 1.0, 0.0, None, 1)?;
    let one = solve_pseudoloc_pde_1d(&rho, l, &theta, 0.0, 1.0, still.dt, Some(still.dt), 1)?;
    let drift = one
        .x
        .iter()
        .zip(&theta)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    rep.at_most("steady_state_step_drift", drift, 1e-10);
    Ok(())
}

/// Unit disk centered `(1, 0)` on a staircase grid with identity boundary data.
pub fn heatflow_disk_setup<T: Real>(h: T) -> Result<(GridDomain<T>, Vec<[Vec2<T>; 4]>)> {
    let disk = ClosedCurve::circle(
        Vec2::new(T::one(), T::zero()),
        T::one(),
        1440,
        T::zero(),
        false,
    )?;
    let domain = GridDomain::from_curve(&disk, h, Treatment::Staircase)?;
    let bv = domain.boundary_values(|_, p| p);
    Ok((domain, bv))
}

fn check_heatflow(rep: &mut OracleReport, cfg: &OracleConfig) -> Result<()> {
    let (domain, bv) = heatflow_disk_setup(cfg.heat_grid_step)?;
    let mut reference = vec![Vec2::new(1.0, 0.0); domain.len()];
    domain.solve_laplace(&mut reference, &bv, 1e-13, 1_000_000, None)?;
    let run = solve_heat_flow_disk(
        &domain,
        &bv,
        &vec![Vec2::zero(); domain.len()],
        &reference,
        10.0,
        None,
    )?;
    let rate = run
        .rate
        .ok_or_else(|| Error::Domain("error never entered the fit window".into()))?;
    let rel = (rate - BESSEL_J01_SQUARED).abs() / BESSEL_J01_SQUARED;
    rep.note("rate", rate);
    rep.note("fit_points", run.fit_points as f64);
    rep.at_most("rate_relative_error", rel, 0.1);
    let rise = run
        .energies
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    rep.at_most("max_energy_step_increase", rise, 1e-12 * run.energies[0]);
    Ok(())
}

fn check_hausdorff(rep: &mut OracleReport) -> Result<()> {
    let res = 1e-3;
    let c = |x: f64, r: f64| ClosedCurve::circle(Vec2::new(x, 0.0), r, 2000, 0.0, false);
    let d = hausdorff_distance(&c(0.0, 0.5)?, &c(0.0, 0.6)?, res)?;
    rep.at_most("concentric_error", (d - 0.1).abs(), 2.0 * res);
    let d = hausdorff_distance(&c(0.0, 1.0)?, &c(0.3, 1.0)?, res)?;
    rep.at_most("translated_error", (d - 0.3).abs(), 2.0 * res);
    let d = hausdorff_distance(&c(0.0, 1.0)?, &c(0.0, 1.0)?, res)?;
    rep.at_most("identical", d, 1e-12);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn uniform_cdf_is_identity() {
        let xs: Vec<f64> = (0..11).map(|k| k as f64 / 10.0).collect();
        let c = cdf_reference(&xs, &[1.0; 11]).unwrap();
        for (x, t) in xs.iter().zip(&c.theta) {
            assert_relative_eq!(x, t, epsilon = 1e-15);
        }
        assert!(cdf_reference(&xs, &[0.0; 11]).is_err());
    }

    #[test]
    fn sine_cdf_matches_antiderivative() {
        let mut rep = OracleReport::new(OracleCheck::CheckCdf);
        check_cdf(&mut rep).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn pde_relaxes_to_linear_profile_with_decreasing_lyapunov() {
        let mut rep = OracleReport::new(OracleCheck::CheckPde1d);
        check_pde1d(&mut rep, &OracleConfig::default()).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn pde_refuses_unstable_step() {
        let rho = vec![1.0; 11];
        let e = solve_pseudoloc_pde_1d(&rho, 1.0, &vec![0.0; 11], 0.0, 0.0, 1.0, Some(0.01), 1)
            .unwrap_err();
        match e {
            Error::Cfl { required, .. } => assert_relative_eq!(required, 0.005, epsilon = 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pde_lyapunov_monotone_for_varying_density() {
        let n = 41;
        let rho: Vec<f64> = (0..n)
            .map(|i| 0.5 + (i as f64 / 6.0).sin().powi(2))
            .collect();
        let x0: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64 / 5.0).collect();
        let run = solve_pseudoloc_pde_1d(&rho, 2.0, &x0, 0.3, -0.2, 3.0, None, 1).unwrap();
        assert!(
            run.max_lyapunov_increase <= 0.0,
            "{}",
            run.max_lyapunov_increase
        );
    }

    #[test]
    fn heat_flow_refuses_unstable_step() {
        let (domain, bv) = heatflow_disk_setup(0.1f64).unwrap();
        let u = vec![Vec2::zero(); domain.len()];
        assert!(matches!(
            solve_heat_flow_disk(&domain, &bv, &u, &u, 1.0, Some(0.003)),
            Err(Error::Cfl { .. })
        ));
    }

    #[test]
    fn harmonic_start_is_stationary() {
        let (domain, bv) = heatflow_disk_setup(1.0f64 / 16.0).unwrap();
        let u = domain.positions();
        let run = solve_heat_flow_disk(&domain, &bv, &u, &u, 0.05, None).unwrap();
        assert!(run.errors.iter().all(|e| e.1 < 1e-12));
    }

    #[test]
    fn coarse_heat_flow_rate_and_energy() {
        let (domain, bv) = heatflow_disk_setup(1.0f64 / 24.0).unwrap();
        let reference = domain.positions();
        let run = solve_heat_flow_disk(
            &domain,
            &bv,
            &vec![Vec2::zero(); domain.len()],
            &reference,
            10.0,
            None,
        )
        .unwrap();
        let rate = run.rate.unwrap();
        assert!(
            (rate - BESSEL_J01_SQUARED).abs() < 0.15 * BESSEL_J01_SQUARED,
            "{rate}"
        );
        assert!(run
            .energies
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn decay_fit_recovers_exponent() {
        let series: Vec<(f64, f64)> = (0..200)
            .map(|k| (k as f64 * 0.05, 0.5 * (-3.0 * k as f64 * 0.05).exp()))
            .collect();
        let (r, m) = fit_decay_rate(&series, 1e-6, 1e-2);
        assert_relative_eq!(r.unwrap(), 3.0, epsilon = 1e-9);
        assert!(m > 10);
    }

    #[test]
    fn hausdorff_examples() {
        let mut rep = OracleReport::new(OracleCheck::CheckHausdorff);
        check_hausdorff(&mut rep).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn energy_quadratic_form() {
        let pts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(0.5, 0.5),
        ];
        let mut sw = Swarm2D::new(pts, vec![0, 1, 2, 3]).unwrap();
        sw.pseudo = sw.positions.clone();
        let rho = estimate_density_2d(&sw.positions, 0.2).unwrap();
        let pstar = PStarField2D::from_samples(
            sw.pseudo
                .iter()
                .copied()
                .zip(rho.values.iter().copied())
                .collect(),
        )
        .unwrap();
        let e0 = stage3_energy(&sw, &pstar, 0.2, 1.0).unwrap();
        assert!(e0 < 1e-25, "{e0}");
        sw.velocities[4] = Vec2::new(0.3, 0.4);
        sw.velocities[1] = Vec2::new(0.0, -0.5);
        let e1 = stage3_energy(&sw, &pstar, 0.2, 1.0).unwrap();
        // two agents with |v| = 0.5, weight 1/5
        assert_relative_eq!(e1, 0.5 * 2.0 * 0.2 * 0.25, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn cdf_strictly_increasing(rho in prop::collection::vec(1e-3f64..10.0, 2..50)) {
            let xs: Vec<f64> = (0..rho.len()).map(|k| k as f64 * 0.1).collect();
            let c = cdf_reference(&xs, &rho).unwrap();
            prop_assert!(c.theta.windows(2).all(|w| w[1] > w[0]));
        }

        #[test]
        fn hausdorff_symmetric_and_translation_bounded(dx in -0.5f64..0.5, dy in -0.5f64..0.5) {
            let a = ClosedCurve::circle(Vec2::new(0.0, 0.0), 1.0, 200, 0.0, false).unwrap();
            let b = ClosedCurve::circle(Vec2::new(dx, dy), 1.0, 200, 0.3, true).unwrap();
            let d1 = hausdorff_distance(&a, &b, 0.01).unwrap();
            let d2 = hausdorff_distance(&b, &a, 0.01).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-12);
            let shift = (dx * dx + dy * dy).sqrt();
            // polygon sag is below 1.3e-4 for 200 vertices
            prop_assert!((d1 - shift).abs() < 0.01 + 2e-4);
        }
    }
}
