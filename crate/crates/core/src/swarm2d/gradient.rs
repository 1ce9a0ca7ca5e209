use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat2, Vec2};
use crate::neighbors::{NeighborIndex, SpatialBins};
use crate::scalar::{count, lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethodTag {
    Jacobian,
    Meanshift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GradientEstimate<T> {
    pub values: Vec<Vec2<T>>,
    /// Estimator that produced each value.
    pub method: Vec<GradientMethodTag>,
    /// Set where the requested estimator fell back or an offset disk was empty.
    pub flagged: Vec<bool>,
}

impl<T: Real> GradientEstimate<T> {
    pub fn flagged_count(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct JacobianEstimate<T> {
    /// `J[i]` has rows `psi_1, psi_2` and columns `x, y`.
    pub j: Vec<Mat2<T>>,
    pub singular: Vec<bool>,
}

impl<T: Real> JacobianEstimate<T> {
    pub fn singular_count(&self) -> usize {
        self.singular.iter().filter(|&&s| s).count()
    }
}

/// Neighborhood sums over the communication disk and its shifts along the
/// global axes.
pub struct GradientContext<'a, T> {
    positions: &'a [Vec2<T>],
    index: &'a NeighborIndex<T>,
    bins: SpatialBins<T>,
    pub offset: T,
    /// Pairs with `|psi_j - psi_i| < pair_floor * max_j |psi_j - psi_i|` (per
    /// component) are left out of the pseudo-coordinate difference quotients.
    pub pair_floor: T,
    /// `J` counts as singular when `|det J| <= det_floor * max|J_kl|^2`.
    pub det_floor: T,
}

impl<'a, T: Real> GradientContext<'a, T> {
    /// `offset` is the shift of the perturbed disks; half the radius is typical.
    pub fn new(positions: &'a [Vec2<T>], index: &'a NeighborIndex<T>, offset: T) -> Result<Self> {
        if positions.len() != index.len() {
            return Err(Error::Input(
                "positions and neighbor index differ in length".into(),
            ));
        }
        if !(offset > T::zero()) {
            return Err(crate::error::param("offset", "must be positive"));
        }
        Ok(Self {
            positions,
            index,
            bins: SpatialBins::new(positions, index.radius)?,
            offset,
            pair_floor: lit(0.3),
            det_floor: lit(1e-6),
        })
    }

    fn axes(&self) -> [Vec2<T>; 2] {
        [
            Vec2::new(self.offset, T::zero()),
            Vec2::new(T::zero(), self.offset),
        ]
    }

    /// Plain mean of `f` over agents within the radius of `c`.
    fn disk_mean(&self, c: Vec2<T>, f: &[T]) -> Option<T> {
        let (mut s, mut k) = (T::zero(), 0usize);
        self.bins.for_each_within(c, self.index.radius, |j, _| {
            s += f[j];
            k += 1;
        });
        (k > 0).then(|| s / count(k))
    }

    /// `sum (1/d_j) psi_j / sum (1/d_j)` over agents within the radius of `c`.
    fn weighted_mean(&self, c: Vec2<T>, psi: &[Vec2<T>]) -> Option<Vec2<T>> {
        let mut s = Vec2::zero();
        let mut w = T::zero();
        self.bins.for_each_within(c, self.index.radius, |j, _| {
            let wj = T::one() / count::<T>(self.index.degrees[j].max(1));
            s += psi[j] * wj;
            w += wj;
        });
        (w > T::zero()).then(|| s / w)
    }

    fn meanshift_at(&self, i: usize, f: &[T]) -> (Vec2<T>, bool) {
        let p = self.positions[i];
        let m0 = self.disk_mean(p, f).unwrap_or(f[i]);
        let mut g = [T::zero(); 2];
        let mut flag = false;
        for (k, e) in self.axes().into_iter().enumerate() {
            match self.disk_mean(p + e, f) {
                Some(m) => g[k] = (m - m0) / self.offset,
                None => flag = true,
            }
        }
        (Vec2::new(g[0], g[1]), flag)
    }

    /// Forward differences of neighborhood means of `f` over disks shifted
    /// by `offset` along x and y.
    pub fn meanshift(&self, f: &[T]) -> Result<GradientEstimate<T>> {
        self.check_len(f.len())?;
        let n = f.len();
        let mut out = GradientEstimate {
            values: Vec::with_capacity(n),
            method: vec![GradientMethodTag::Meanshift; n],
            flagged: Vec::with_capacity(n),
        };
        for i in 0..n {
            let (g, flag) = self.meanshift_at(i, f);
            out.values.push(g);
            out.flagged.push(flag);
        }
        Ok(out)
    }

    /// Jacobian of the pseudo-coordinates from weighted neighborhood
    /// averages over the shifted disks.
    pub fn jacobian(&self, psi: &[Vec2<T>]) -> Result<JacobianEstimate<T>> {
        self.check_len(psi.len())?;
        let n = psi.len();
        let mut j = Vec::with_capacity(n);
        let mut singular = Vec::with_capacity(n);
        for i in 0..n {
            let p = self.positions[i];
            let m0 = self.weighted_mean(p, psi).unwrap_or(psi[i]);
            let [ex, ey] = self.axes();
            let col = |e: Vec2<T>| {
                self.weighted_mean(p + e, psi)
                    .map(|m| (m - m0) / self.offset)
            };
            match (col(ex), col(ey)) {
                (Some(cx), Some(cy)) => {
                    let m = Mat2::from_columns(cx, cy);
                    let scale = m.max_abs();
                    singular.push(!(m.det().abs() > self.det_floor * scale * scale));
                    j.push(m);
                }
                _ => {
                    j.push(Mat2::zero());
                    singular.push(true);
                }
            }
        }
        Ok(JacobianEstimate { j, singular })
    }

    /// Difference quotients of `f` against each pseudo-coordinate over the
    /// neighbors, mapped back to space by `J^T`. Agents with a singular `J`
    /// or no usable pairs fall back to [`Self::meanshift`].
    pub fn via_jacobian(
        &self,
        f: &[T],
        psi: &[Vec2<T>],
        jac: &JacobianEstimate<T>,
    ) -> Result<GradientEstimate<T>> {
        self.check_len(f.len())?;
        self.check_len(psi.len())?;
        self.check_len(jac.j.len())?;
        let n = f.len();
        let mut out = GradientEstimate {
            values: Vec::with_capacity(n),
            method: Vec::with_capacity(n),
            flagged: Vec::with_capacity(n),
        };
        for i in 0..n {
            let bar = if jac.singular[i] {
                None
            } else {
                self.pseudo_gradient(i, f, psi)
            };
            match bar {
                Some(b) => {
                    out.values.push(jac.j[i].transpose().mul_vec(b));
                    out.method.push(GradientMethodTag::Jacobian);
                    out.flagged.push(false);
                }
                None => {
                    let (g, _) = self.meanshift_at(i, f);
                    out.values.push(g);
                    out.method.push(GradientMethodTag::Meanshift);
                    out.flagged.push(true);
                }
            }
        }
        Ok(out)
    }

    /// `(df/dpsi_1, df/dpsi_2)` at agent `i`, `None` if a component has no
    /// usable pair.
    pub fn pseudo_gradient(&self, i: usize, f: &[T], psi: &[Vec2<T>]) -> Option<Vec2<T>> {
        let nb = self.index.neighbors(i);
        if nb.is_empty() {
            return None;
        }
        let comp = |v: Vec2<T>, k: usize| if k == 0 { v.x } else { v.y };
        let mut g = [T::zero(); 2];
        for (k, gk) in g.iter_mut().enumerate() {
            let spread = nb
                .iter()
                .map(|&j| comp(psi[j] - psi[i], k).abs())
                .fold(T::zero(), T::max);
            let floor = spread * self.pair_floor;
            let (mut s, mut used) = (T::zero(), 0usize);
            for &j in nb {
                let dpsi = comp(psi[j] - psi[i], k);
                if dpsi.abs() > floor && dpsi != T::zero() {
                    s += (f[j] - f[i]) / dpsi;
                    used += 1;
                }
            }
            if used == 0 {
                return None;
            }
            *gk = s / count(used);
        }
        Some(Vec2::new(g[0], g[1]))
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.positions.len() {
            return Err(Error::Input(format!(
                "field has {n} values for {} agents",
                self.positions.len()
            )));
        }
        Ok(())
    }
}
