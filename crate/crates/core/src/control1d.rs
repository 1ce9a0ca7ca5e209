//! 1D distributed velocity law and the self-organization loop.

use serde::{Deserialize, Serialize};

use crate::config::{Initial1D, PseudoInit, SimConfig};
use crate::density::{edge_corrected_1d, estimate_density_1d, trapezoid, DensityEstimate};
use crate::error::{param, Error, Result};
use crate::pseudoloc1d::{pseudoloc_step_into, ramp};
use crate::scalar::{count, lit, Real};
use crate::state::Swarm1D;
use crate::targets::{build_pstar_1d, PStarTable1D, SineProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct VelocityProfile1D<T> {
    pub v: Vec<T>,
    /// Boundary gain `kappa = 1/(2 eps)`.
    pub kappa: T,
}

/// Left-to-right velocity recurrence: `v_0 = 0` and
/// `v_i = v_{i-1} + (rho_i - p*_i)/(2 kappa rho_i)
///       - 2 kappa / (rho_i (rho_i + p*_i)) * slope_i * (X_{i-1} - 2 X_i + X_{i+1})`.
/// The last agent sees an odd reflection about `X_{N-1}`, so its curvature
/// term vanishes.
pub fn velocity_profile_1d<T: Real>(
    rho: &[T],
    x: &[T],
    pstar: &PStarTable1D<T>,
    epsilon: T,
) -> Result<VelocityProfile1D<T>> {
    let n = x.len();
    if n < 3 {
        return Err(Error::Input(format!("need at least 3 agents, got {n}")));
    }
    if rho.len() != n {
        return Err(Error::Input(
            "density and pseudo-coordinate lengths differ".into(),
        ));
    }
    if let Some(i) = rho.iter().position(|&r| !(r > T::zero())) {
        return Err(Error::Input(format!(
            "density at agent {i} is not positive"
        )));
    }
    let kappa = T::one() / (lit::<T>(2.0) * epsilon);
    let two = lit::<T>(2.0);
    let ps: Vec<T> = x.iter().map(|&xi| pstar.eval(xi)).collect();
    let mut v = vec![T::zero(); n];
    for i in 1..n {
        let drift = (rho[i] - ps[i]) / (two * kappa * rho[i]);
        let curvature = if i + 1 < n {
            let span = x[i + 1] - x[i - 1];
            let slope = if span != T::zero() {
                (ps[i + 1] - ps[i - 1]) / span
            } else {
                T::zero()
            };
            two * kappa / (rho[i] * (rho[i] + ps[i])) * slope * (x[i - 1] - two * x[i] + x[i + 1])
        } else {
            T::zero()
        };
        v[i] = v[i - 1] + drift - curvature;
    }
    Ok(VelocityProfile1D { v, kappa })
}

/// Cumulative trapezoid integral of `rho - rho*` from the leftmost agent.
pub fn ideal_velocity_profile<T: Real>(positions: &[T], rho: &[T], rho_star: &[T]) -> Vec<T> {
    let half = lit::<T>(0.5);
    let mut out = Vec::with_capacity(positions.len());
    let mut acc = T::zero();
    for i in 0..positions.len() {
        if i > 0 {
            let a = rho[i - 1] - rho_star[i - 1];
            let b = rho[i] - rho_star[i];
            acc += (positions[i] - positions[i - 1]) * (a + b) * half;
        }
        out.push(acc);
    }
    out
}

/// `int |rho - rho*(x L*/L)|^2 dx` by the trapezoid rule over agent positions.
pub fn density_error_1d<T: Real, F: Fn(T) -> T>(
    positions: &[T],
    rho: &[T],
    rho_star: F,
    target_length: T,
) -> T {
    let l = *positions.last().unwrap();
    let scale = if l > T::zero() {
        target_length / l
    } else {
        T::one()
    };
    let sq: Vec<T> = positions
        .iter()
        .zip(rho)
        .map(|(&x, &r)| {
            let d = r - rho_star(x * scale);
            d * d
        })
        .collect();
    trapezoid(positions, &sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SelfOrg1DParams<T> {
    pub dt: T,
    pub kernel_width: T,
    pub epsilon: T,
    pub max_halvings: usize,
    /// Feed the velocity law window-corrected densities near the two ends.
    pub edge_correction: bool,
}

/// One iteration: a pseudo-localization round, a density estimate, the
/// velocity law and an adaptive Euler step. Returns the step taken and the
/// density estimate used.
pub fn selforg_1d_step<T: Real>(
    swarm: &mut Swarm1D<T>,
    pstar: &PStarTable1D<T>,
    params: &SelfOrg1DParams<T>,
    scratch: &mut Vec<T>,
) -> Result<(T, DensityEstimate<T>)> {
    scratch.resize(swarm.len(), T::zero());
    swarm.beta = pseudoloc_step_into(&swarm.pseudo, swarm.beta, params.epsilon, scratch)?;
    std::mem::swap(&mut swarm.pseudo, scratch);
    let rho = estimate_density_1d(&swarm.positions, params.kernel_width)?;
    let v = if params.edge_correction {
        let corrected = edge_corrected_1d(&swarm.positions, &rho);
        velocity_profile_1d(&corrected, &swarm.pseudo, pstar, params.epsilon)?
    } else {
        velocity_profile_1d(&rho.values, &swarm.pseudo, pstar, params.epsilon)?
    };
    let h = swarm.integrate_adaptive(&v.v, params.dt, params.max_halvings)?;
    Ok((h, rho))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Metrics1D<T> {
    pub iter: usize,
    pub t: T,
    pub e_density: T,
    pub max_x_residual: T,
    pub length: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Snapshot1D<T> {
    pub iter: usize,
    pub positions: Vec<T>,
    pub density: Vec<T>,
    pub target: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SelfOrg1DRun<T> {
    pub swarm: Swarm1D<T>,
    pub pstar: PStarTable1D<T>,
    pub params: SelfOrg1DParams<T>,
    pub metrics: Vec<Metrics1D<T>>,
    pub snapshots: Vec<Snapshot1D<T>>,
    /// Number of steps whose `dt` had to be halved.
    pub halved_steps: usize,
}

/// Places `n` agents at the quantiles `i/(n-1)` of `density` on `[0, length]`.
pub fn inverse_cdf_positions<T: Real, F: Fn(T) -> T>(
    density: F,
    length: T,
    n: usize,
) -> Result<Vec<T>> {
    let m = (64 * n).max(1000);
    let table = build_pstar_1d(density, length, m)?;
    let total = table.total();
    let den = count::<T>(n - 1);
    Ok((0..n)
        .map(|i| table.inverse_cdf(count::<T>(i) / den * total))
        .collect())
}

/// Initial positions described by the config.
pub fn initial_positions_1d<T: Real>(
    cfg: &SimConfig,
    profile: &SineProfile<T>,
    length: T,
) -> Result<Vec<T>> {
    let n = cfg.agent_count();
    match cfg.one_d.initial {
        Initial1D::Uniform { length: l } => {
            let l = lit::<T>(l);
            Ok((0..n).map(|i| count::<T>(i) * l / count(n - 1)).collect())
        }
        Initial1D::Clustered {
            length: l,
            center,
            width,
        } => {
            let (c, w) = (lit::<T>(center), lit::<T>(width));
            let floor = lit::<T>(1e-3);
            inverse_cdf_positions(
                |x: T| {
                    let z = (x - c) / w;
                    (-(z * z) / lit(2.0)).exp() + floor
                },
                lit(l),
                n,
            )
        }
        Initial1D::Target => inverse_cdf_positions(|x| profile.density(x), length, n),
    }
}

/// Runs the 1D self-organization loop described by `cfg`.
pub fn run_selforg_1d<T: Real>(cfg: &SimConfig) -> Result<SelfOrg1DRun<T>> {
    cfg.validate()?;
    let n = cfg.agent_count();
    let length = lit::<T>(cfg.one_d.length);
    let mut profile = SineProfile::<T>::for_agents(n);
    if let Some(a) = cfg.one_d.a {
        profile.a = lit(a);
    }
    if let Some(b) = cfg.one_d.b {
        profile.b = lit(b);
    }
    let m = (cfg.one_d.length / cfg.one_d.table_step).round() as usize + 1;
    let pstar = build_pstar_1d(|x| profile.density(x), length, m.max(2))?;
    let epsilon = T::one() / count(n - 1);
    let params = SelfOrg1DParams {
        dt: cfg.dt.map(lit).unwrap_or(epsilon * epsilon / lit(3.0)),
        kernel_width: cfg
            .kernel_width
            .map(lit)
            .unwrap_or(lit::<T>(4.0) * length / count(n)),
        epsilon,
        max_halvings: cfg.tolerances.max_dt_halvings,
        edge_correction: cfg.one_d.edge_correction,
    };
    if !(params.dt > T::zero()) {
        return Err(param("dt", "must be positive"));
    }
    let mut swarm = Swarm1D::new(initial_positions_1d(cfg, &profile, length)?)?;
    if cfg.one_d.pseudo_init == PseudoInit::Ramp {
        swarm.set_pseudo_ramp();
    }
    let reference = ramp::<T>(n);
    let stride = cfg.one_d.metrics_stride;
    let k_total = cfg.iterations.k;
    let mut metrics = Vec::new();
    let mut snapshots = Vec::new();
    let mut t = T::zero();
    let mut halved = 0usize;
    let mut scratch = Vec::new();

    let record = |iter: usize, t: T, swarm: &Swarm1D<T>, rho: &[T]| Metrics1D {
        iter,
        t,
        e_density: density_error_1d(&swarm.positions, rho, |x| profile.density(x), length),
        max_x_residual: swarm
            .pseudo
            .iter()
            .zip(&reference)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max),
        length: swarm.extent(),
    };
    let snapshot = |iter: usize, swarm: &Swarm1D<T>, rho: &[T]| {
        let scale = length / swarm.extent();
        Snapshot1D {
            iter,
            positions: swarm.positions.clone(),
            density: rho.to_vec(),
            target: swarm
                .positions
                .iter()
                .map(|&x| profile.density(x * scale))
                .collect(),
        }
    };

    for iter in 0..k_total {
        let before = if iter % stride == 0 || cfg.one_d.snapshot_iters.contains(&iter) {
            Some(estimate_density_1d(&swarm.positions, params.kernel_width)?)
        } else {
            None
        };
        if let Some(rho) = &before {
            if iter % stride == 0 {
                metrics.push(record(iter, t, &swarm, &rho.values));
            }
            if cfg.one_d.snapshot_iters.contains(&iter) {
                snapshots.push(snapshot(iter, &swarm, &rho.values));
            }
        }
        let (h, _) = selforg_1d_step(&mut swarm, &pstar, &params, &mut scratch)?;
        if h < params.dt {
            halved += 1;
        }
        t += h;
    }
    let rho = estimate_density_1d(&swarm.positions, params.kernel_width)?;
    metrics.push(record(k_total, t, &swarm, &rho.values));
    snapshots.push(snapshot(k_total, &swarm, &rho.values));
    Ok(SelfOrg1DRun {
        swarm,
        pstar,
        params,
        metrics,
        snapshots,
        halved_steps: halved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentKind;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn uniform_table() -> PStarTable1D<f64> {
        build_pstar_1d(|_| 1.0, 1.0, 101).unwrap()
    }

    #[test]
    fn equilibrium_gives_zero_velocity() {
        let n = 50;
        let v = velocity_profile_1d(&vec![1.0; n], &ramp::<f64>(n), &uniform_table(), 1.0 / 49.0)
            .unwrap();
        assert!(v.v.iter().all(|&x| x.abs() < 1e-14));
        let s = SineProfile::<f64>::for_agents(n);
        let table = build_pstar_1d(|x| s.density(x), std::f64::consts::FRAC_PI_2, 2001).unwrap();
        let x = ramp::<f64>(n);
        let rho: Vec<f64> = x.iter().map(|&xi| table.eval(xi)).collect();
        let v = velocity_profile_1d(&rho, &x, &table, 1.0 / 49.0).unwrap();
        assert!(v.v.iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn three_agent_hand_arithmetic() {
        let v =
            velocity_profile_1d(&[1.0, 2.0, 1.0], &[0.0, 0.5, 1.0], &uniform_table(), 0.5).unwrap();
        assert_eq!(v.kappa, 1.0);
        assert_relative_eq!(v.v[1], 0.25);
        // last agent: drift (1 - 1)/(2 * 1) = 0
        assert_relative_eq!(v.v[2], 0.25);
        assert_eq!(v.v[0], 0.0);
    }

    #[test]
    fn degenerate_stencil_and_bad_density() {
        let x = [0.0, 0.3, 0.0, 1.0];
        let v = velocity_profile_1d(&[1.0; 4], &x, &uniform_table(), 1.0 / 3.0).unwrap();
        assert!(v.v.iter().all(|x| x.is_finite()));
        assert!(
            velocity_profile_1d(&[1.0, 0.0, 1.0], &[0.0, 0.5, 1.0], &uniform_table(), 0.5).is_err()
        );
    }

    #[test]
    fn ideal_profile_examples() {
        let xs: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let v = ideal_velocity_profile(&xs, &[2.0; 11], &[2.0; 11]);
        assert!(v.iter().all(|&x| x == 0.0));
        let v = ideal_velocity_profile(&xs, &[1.5; 11], &[1.0; 11]);
        for (x, vi) in xs.iter().zip(&v) {
            assert_relative_eq!(*vi, 0.5 * x, epsilon = 1e-14);
        }
    }

    #[test]
    fn ideal_profile_sine_against_antiderivative() {
        let n = 1000;
        let s = SineProfile::<f64>::for_agents(n);
        let l = std::f64::consts::FRAC_PI_2;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 * l / (n - 1) as f64).collect();
        let rho = vec![1.0 / l; n];
        let star: Vec<f64> = xs.iter().map(|&x| s.density(x)).collect();
        let v = ideal_velocity_profile(&xs, &rho, &star);
        for (x, vi) in xs.iter().zip(&v) {
            let exact = x / l - s.cdf(*x);
            assert!((vi - exact).abs() < 1e-3);
        }
    }

    #[test]
    fn frozen_localization_matches_ideal_profile() {
        // X at the empirical CDF, p* o X equal to rho* at the rescaled positions
        let n = 400;
        let s = SineProfile::<f64>::for_agents(n);
        let l = std::f64::consts::FRAC_PI_2;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 * l / (n - 1) as f64).collect();
        let rho = vec![1.0 / l; n];
        let eps = 1.0 / (n - 1) as f64;
        // uniform swarm: theta = x / L, so p*(theta) = rho*(theta L)
        let table = PStarTable1D {
            knots: (0..=4000)
                .map(|k| (k as f64 / 4000.0, s.density(k as f64 / 4000.0 * l)))
                .collect(),
            step: l / 4000.0,
        };
        let x = ramp::<f64>(n);
        let v = velocity_profile_1d(&rho, &x, &table, eps).unwrap();
        let star: Vec<f64> = xs.iter().map(|&x| s.density(x)).collect();
        let ideal = ideal_velocity_profile(&xs, &rho, &star);
        // the recurrence integrates (rho - p*)/rho in theta = rho dx
        for i in (0..n).step_by(37) {
            assert!(
                (v.v[i] - ideal[i]).abs() < 5.0 * eps,
                "i={i} {} vs {}",
                v.v[i],
                ideal[i]
            );
        }
    }

    #[test]
    fn equilibrium_persists() {
        let mut cfg = SimConfig::new(ExperimentKind::SelfOrg1d, 200);
        cfg.one_d.initial = Initial1D::Target;
        cfg.iterations.k = 100;
        cfg.dt = Some(1e-3);
        cfg.one_d.metrics_stride = 10;
        let run = run_selforg_1d::<f64>(&cfg).unwrap();
        let e0 = run.metrics[0].e_density;
        for m in &run.metrics {
            assert!(m.e_density < 2.0 * e0 + 1e-3, "{} vs {}", m.e_density, e0);
        }
    }

    proptest! {
        #[test]
        fn first_velocity_is_zero(
            rho in prop::collection::vec(0.1f64..5.0, 3..40),
            noise in prop::collection::vec(-0.01f64..0.01, 40),
        ) {
            let n = rho.len();
            let mut x = ramp::<f64>(n);
            for i in 1..n { x[i] += noise[i]; }
            let v = velocity_profile_1d(&rho, &x, &uniform_table(), 1.0 / (n - 1) as f64).unwrap();
            prop_assert_eq!(v.v[0], 0.0);
            prop_assert!(v.v.iter().all(|x| x.is_finite()));
        }

        #[test]
        fn order_preserved_along_trajectory(seed in 0u64..1000) {
            let mut cfg = SimConfig::new(ExperimentKind::SelfOrg1d, 60);
            cfg.iterations.k = 200;
            cfg.dt = Some(1e-4 + (seed % 7) as f64 * 8e-4);
            let run = run_selforg_1d::<f64>(&cfg).unwrap();
            prop_assert!(run.swarm.positions.windows(2).all(|w| w[1] > w[0]));
            prop_assert_eq!(run.swarm.positions[0], 0.0);
        }
    }
}
