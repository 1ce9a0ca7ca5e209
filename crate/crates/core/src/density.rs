//! Flat-kernel density estimates at agent locations and along the boundary chain.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::geometry::{ClosedCurve, Vec2};
use crate::neighbors::SpatialBins;
use crate::scalar::{count, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DensityEstimate<T> {
    pub values: Vec<T>,
    pub kernel_width: T,
    /// Weight of a single agent inside the window.
    pub normalization: T,
}

fn check_width<T: Real>(d: T) -> Result<()> {
    if d > T::zero() && d.is_finite() {
        Ok(())
    } else {
        Err(param("kernel_width", format!("must be positive, got {d}")))
    }
}

/// Rescales a flat 1D estimate by `2d / |[x_i - d, x_i + d] ∩ [x_0, x_{N-1}]|`
/// so agents near either end divide their count by the part of the window
/// the swarm actually covers. Interior values are unchanged.
pub fn edge_corrected_1d<T: Real>(positions: &[T], est: &DensityEstimate<T>) -> Vec<T> {
    let (Some(&lo), Some(&hi)) = (positions.first(), positions.last()) else {
        return Vec::new();
    };
    let d = est.kernel_width;
    let full = d + d;
    positions
        .iter()
        .zip(&est.values)
        .map(|(&x, &v)| {
            if x - d >= lo && x + d <= hi {
                return v;
            }
            let covered = (x + d).min(hi) - (x - d).max(lo);
            if covered > T::zero() {
                v * full / covered
            } else {
                v
            }
        })
        .collect()
}

/// Share of the kernel disk of radius `d` on the inner side of a straight
/// edge at signed distance `s` (positive inside).
pub fn disk_share_inside<T: Real>(s: T, d: T) -> T {
    let h = s.abs().min(d);
    let cap = d * d * (h / d).acos() - h * (d * d - h * h).max(T::zero()).sqrt();
    let cut = cap / (T::pi() * d * d);
    if s >= T::zero() {
        T::one() - cut
    } else {
        cut
    }
}

/// Rescales a flat 2D estimate by the share of each kernel disk inside
/// `domain`, treating the nearby boundary as straight. Shares below `floor`
/// are clamped.
pub fn edge_corrected_2d<T: Real>(
    positions: &[Vec2<T>],
    est: &DensityEstimate<T>,
    domain: &ClosedCurve<T>,
    floor: T,
) -> Vec<T> {
    let d = est.kernel_width;
    positions
        .iter()
        .zip(&est.values)
        .map(|(&p, &v)| {
            let dist = domain.distance(p);
            if dist >= d && domain.contains(p) {
                return v;
            }
            let s = if domain.contains(p) { dist } else { -dist };
            v / disk_share_inside(s, d).max(floor)
        })
        .collect()
}

/// `values[i] = (# agents with |x_j - x_i| <= d) / (2 N d)`; positions must be sorted.
pub fn estimate_density_1d<T: Real>(positions: &[T], d: T) -> Result<DensityEstimate<T>> {
    check_width(d)?;
    if let Some(i) = positions.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    if let Some(i) = positions.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::OrderInversion {
            left: i,
            right: i + 1,
        });
    }
    let n = positions.len();
    let c = T::one() / (count::<T>(2 * n.max(1)) * d);
    let mut values = Vec::with_capacity(n);
    let (mut lo, mut hi) = (0usize, 0usize);
    for i in 0..n {
        let x = positions[i];
        while x - positions[lo] > d {
            lo += 1;
        }
        if hi < i {
            hi = i;
        }
        while hi + 1 < n && positions[hi + 1] - x <= d {
            hi += 1;
        }
        values.push(count::<T>(hi - lo + 1) * c);
    }
    Ok(DensityEstimate {
        values,
        kernel_width: d,
        normalization: c,
    })
}

/// `values[i] = (# agents with |r_j - r_i| <= d) / (N pi d^2)`.
pub fn estimate_density_2d<T: Real>(positions: &[Vec2<T>], d: T) -> Result<DensityEstimate<T>> {
    check_width(d)?;
    let n = positions.len();
    let c = T::one() / (count::<T>(n.max(1)) * T::pi() * d * d);
    let bins = SpatialBins::new(positions, d)?;
    let values = positions
        .iter()
        .map(|&p| {
            let mut k = 0usize;
            bins.for_each_within(p, d, |_, _| k += 1);
            count::<T>(k) * c
        })
        .collect();
    Ok(DensityEstimate {
        values,
        kernel_width: d,
        normalization: c,
    })
}

/// Density of agents along the boundary chain, per unit arclength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BoundaryDensity<T> {
    pub values: Vec<T>,
    /// Local arclength share `d_i` of each agent.
    pub spacing: Vec<T>,
    pub gamma_spacing: T,
}

/// `q_i = 1 / (N_b d_i)` with `d_i` the mean of the two adjacent chain segments.
pub fn estimate_boundary_density<T: Real>(chain: &[Vec2<T>]) -> Result<BoundaryDensity<T>> {
    let nb = chain.len();
    if nb < 3 {
        return Err(Error::Input(format!(
            "boundary chain needs at least 3 agents, got {nb}"
        )));
    }
    if let Some(i) = chain.iter().position(|p| !p.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let seg: Vec<T> = (0..nb)
        .map(|i| chain[i].dist(chain[(i + 1) % nb]))
        .collect();
    if let Some(i) = seg.iter().position(|&s| s <= T::zero()) {
        return Err(Error::Degenerate(format!(
            "zero-length boundary segment after agent {i}"
        )));
    }
    let two = T::one() + T::one();
    let spacing: Vec<T> = (0..nb)
        .map(|i| (seg[(i + nb - 1) % nb] + seg[i]) / two)
        .collect();
    let nbt = count::<T>(nb);
    let values = spacing.iter().map(|&d| T::one() / (nbt * d)).collect();
    Ok(BoundaryDensity {
        values,
        spacing,
        gamma_spacing: T::one() / nbt,
    })
}

/// Trapezoid integral of `values` over sorted `positions`.
pub fn trapezoid<T: Real>(positions: &[T], values: &[T]) -> T {
    let half = T::one() / (T::one() + T::one());
    positions
        .windows(2)
        .zip(values.windows(2))
        .map(|(x, v)| (x[1] - x[0]) * (v[0] + v[1]) * half)
        .sum()
}
