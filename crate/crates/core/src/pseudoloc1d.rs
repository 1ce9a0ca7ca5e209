//! Synchronous 1D pseudo-localization on the line graph of ordered agents.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::scalar::{count, lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PseudolocParams1D<T> {
    /// Pseudo-coordinate spacing, `1/(N-1)` by default.
    pub epsilon: T,
    pub max_iters: usize,
    /// Stop once `max |X(t+1) - X(t)|` falls below this.
    pub tolerance: T,
}

impl<T: Real> PseudolocParams1D<T> {
    pub fn for_agents(n: usize) -> Self {
        Self {
            epsilon: T::one() / count(n.max(2) - 1),
            max_iters: 50 * n * n,
            tolerance: lit(1e-9),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > T::zero() && self.epsilon < T::one()) {
            return Err(param(
                "epsilon",
                format!("must lie in (0, 1), got {}", self.epsilon),
            ));
        }
        if !(self.tolerance > T::zero()) {
            return Err(param("tolerance", "must be positive"));
        }
        Ok(())
    }
}

/// Boundary value update of the rightmost agent:
/// `beta' = ((2 - eps)/3) beta + 2 eps / 3 + X_{N-2} / 3`.
#[inline]
pub fn boundary_update<T: Real>(beta: T, x_left: T, epsilon: T) -> T {
    let three = lit::<T>(3.0);
    let two = lit::<T>(2.0);
    (two - epsilon) / three * beta + two * epsilon / three + x_left / three
}

/// One synchronous round. Returns `(X', beta')` with `X'_0 = 0`,
/// interior three-point averages and `X'_{N-1} = beta'`.
pub fn pseudoloc_step_1d<T: Real>(
    x: &[T],
    beta: T,
    params: &PseudolocParams1D<T>,
) -> Result<(Vec<T>, T)> {
    let mut out = vec![T::zero(); x.len()];
    let beta = pseudoloc_step_into(x, beta, params.epsilon, &mut out)?;
    Ok((out, beta))
}

/// Allocation-free form of [`pseudoloc_step_1d`] writing into `out`.
pub fn pseudoloc_step_into<T: Real>(x: &[T], beta: T, epsilon: T, out: &mut [T]) -> Result<T> {
    let n = x.len();
    if n < 3 {
        return Err(Error::Input(format!("need at least 3 agents, got {n}")));
    }
    if out.len() != n {
        return Err(Error::Input("output buffer has wrong length".into()));
    }
    let third = T::one() / lit(3.0);
    out[0] = T::zero();
    for i in 1..n - 1 {
        out[i] = (x[i - 1] + x[i] + x[i + 1]) * third;
    }
    let b = boundary_update(beta, x[n - 2], epsilon);
    out[n - 1] = b;
    Ok(b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PseudolocRun1D<T> {
    pub x: Vec<T>,
    pub beta: T,
    pub iterations: usize,
    pub converged: bool,
    /// `(iteration, max change, max |X - ramp|)` every `trace_stride` rounds.
    pub trace: Vec<(usize, T, T)>,
}

/// Iterates until the max change drops below `params.tolerance` or
/// `params.max_iters` rounds have run. `trace_stride = 0` disables the trace.
pub fn run_pseudoloc_1d<T: Real>(
    x0: &[T],
    beta0: T,
    params: &PseudolocParams1D<T>,
    trace_stride: usize,
) -> Result<PseudolocRun1D<T>> {
    params.validate()?;
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut next = vec![T::zero(); n];
    let mut beta = beta0;
    let mut trace = Vec::new();
    let ramp_err = |x: &[T]| {
        let den = count::<T>(n - 1);
        x.iter()
            .enumerate()
            .map(|(i, &v)| (v - count::<T>(i) / den).abs())
            .fold(T::zero(), T::max)
    };
    for it in 1..=params.max_iters {
        beta = pseudoloc_step_into(&x, beta, params.epsilon, &mut next)?;
        let change = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max);
        std::mem::swap(&mut x, &mut next);
        if trace_stride > 0 && it % trace_stride == 0 {
            trace.push((it, change, ramp_err(&x)));
        }
        if change < params.tolerance {
            return Ok(PseudolocRun1D {
                x,
                beta,
                iterations: it,
                converged: true,
                trace,
            });
        }
    }
    Ok(PseudolocRun1D {
        x,
        beta,
        iterations: params.max_iters,
        converged: false,
        trace,
    })
}

pub fn ramp<T: Real>(n: usize) -> Vec<T> {
    let den = count::<T>(n.max(2) - 1);
    (0..n).map(|i| count::<T>(i) / den).collect()
}
