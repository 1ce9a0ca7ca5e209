//! Swarm state containers and explicit Euler integration.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::geometry::{ClosedCurve, Vec2};
use crate::scalar::{lit, Real};

/// Ordered agents on a line. Index 0 is the leftmost agent and stays at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Swarm1D<T> {
    pub positions: Vec<T>,
    /// Pseudo-coordinates `X_i`.
    pub pseudo: Vec<T>,
    pub velocities: Vec<T>,
    /// Boundary pseudo-coordinate held by the rightmost agent.
    pub beta: T,
}

impl<T: Real> Swarm1D<T> {
    /// Builds a swarm at rest with `X = 0`, `beta = 0`.
    /// Positions are shifted so that the leftmost agent sits at 0.
    pub fn new(positions: Vec<T>) -> Result<Self> {
        if positions.len() < 3 {
            return Err(Error::Input(format!(
                "need at least 3 agents, got {}",
                positions.len()
            )));
        }
        if let Some(i) = positions.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if let Some(i) = positions.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::OrderInversion {
                left: i,
                right: i + 1,
            });
        }
        let x0 = positions[0];
        let positions: Vec<T> = positions.into_iter().map(|x| x - x0).collect();
        let n = positions.len();
        Ok(Self {
            positions,
            pseudo: vec![T::zero(); n],
            velocities: vec![T::zero(); n],
            beta: T::zero(),
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Current support length `L(t)`.
    pub fn extent(&self) -> T {
        *self.positions.last().unwrap_or(&T::zero())
    }

    /// Sets `X_i = i/(N-1)` and `beta = 1`.
    pub fn set_pseudo_ramp(&mut self) {
        let n = self.len();
        let eps = T::one() / T::from_usize_lossy(n - 1);
        for (i, x) in self.pseudo.iter_mut().enumerate() {
            *x = T::from_usize_lossy(i) * eps;
        }
        self.beta = T::one();
    }

    /// Explicit Euler step `x += v dt`. The step is atomic: on order
    /// inversion nothing changes and the offending pair is reported.
    pub fn integrate(&mut self, velocities: &[T], dt: T) -> Result<()> {
        check_dt(dt)?;
        if velocities.len() != self.len() {
            return Err(Error::Input(format!(
                "velocity length {} does not match {} agents",
                velocities.len(),
                self.len()
            )));
        }
        if let Some(i) = velocities.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let next: Vec<T> = self
            .positions
            .iter()
            .zip(velocities)
            .map(|(&x, &v)| x + v * dt)
            .collect();
        if let Some(i) = next.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::OrderInversion {
                left: i,
                right: i + 1,
            });
        }
        let x0 = next[0];
        for (p, x) in self.positions.iter_mut().zip(next) {
            *p = x - x0;
        }
        self.velocities.copy_from_slice(velocities);
        Ok(())
    }

    /// Euler step that halves `dt` on order inversion, at most `max_halvings`
    /// times. Returns the step actually taken.
    pub fn integrate_adaptive(
        &mut self,
        velocities: &[T],
        dt: T,
        max_halvings: usize,
    ) -> Result<T> {
        let mut h = dt;
        for _ in 0..=max_halvings {
            match self.integrate(velocities, h) {
                Ok(()) => return Ok(h),
                Err(Error::OrderInversion { .. }) => h = h / lit(2.0),
                Err(e) => return Err(e),
            }
        }
        Err(Error::Degenerate(format!(
            "order inversion persists after {max_halvings} halvings of dt = {dt}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Boundary,
    Interior,
}

/// Planar swarm with an identified boundary chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Swarm2D<T> {
    pub positions: Vec<Vec2<T>>,
    /// Pseudo-coordinates `R_i = (X_i, Y_i)`.
    pub pseudo: Vec<Vec2<T>>,
    pub velocities: Vec<Vec2<T>>,
    /// Agent ids along the boundary, cyclic.
    pub boundary_order: Vec<usize>,
    pub roles: Vec<Role>,
}

impl<T: Real> Swarm2D<T> {
    pub fn new(positions: Vec<Vec2<T>>, boundary_order: Vec<usize>) -> Result<Self> {
        let n = positions.len();
        if let Some(i) = positions.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if boundary_order.len() < 3 {
            return Err(Error::Input(
                "boundary chain needs at least 3 agents".into(),
            ));
        }
        let mut roles = vec![Role::Interior; n];
        for &id in &boundary_order {
            if id >= n {
                return Err(Error::Input(format!("boundary id {id} out of range")));
            }
            if roles[id] == Role::Boundary {
                return Err(Error::Input(format!(
                    "agent {id} repeated in boundary chain"
                )));
            }
            roles[id] = Role::Boundary;
        }
        let chain: Vec<Vec2<T>> = boundary_order.iter().map(|&i| positions[i]).collect();
        let curve = ClosedCurve::new(chain)?;
        if !curve.is_simple() {
            return Err(Error::Degenerate("boundary chain self-intersects".into()));
        }
        Ok(Self {
            pseudo: vec![Vec2::zero(); n],
            velocities: vec![Vec2::zero(); n],
            positions,
            boundary_order,
            roles,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.roles[i] == Role::Boundary
    }

    pub fn interior_ids(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_boundary(i)).collect()
    }

    pub fn boundary_positions(&self) -> Vec<Vec2<T>> {
        self.boundary_order
            .iter()
            .map(|&i| self.positions[i])
            .collect()
    }

    pub fn boundary_curve(&self) -> Result<ClosedCurve<T>> {
        ClosedCurve::new(self.boundary_positions())
    }

    /// Explicit Euler step `r += v dt`; stores `v` as the current velocity.
    pub fn integrate(&mut self, velocities: &[Vec2<T>], dt: T) -> Result<()> {
        check_dt(dt)?;
        if velocities.len() != self.len() {
            return Err(Error::Input(format!(
                "velocity length {} does not match {} agents",
                velocities.len(),
                self.len()
            )));
        }
        if let Some(i) = velocities.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        for ((p, v), &u) in self
            .positions
            .iter_mut()
            .zip(&mut self.velocities)
            .zip(velocities)
        {
            *p += u * dt;
            *v = u;
        }
        Ok(())
    }
}

fn check_dt<T: Real>(dt: T) -> Result<()> {
    if dt > T::zero() && dt.is_finite() {
        Ok(())
    } else {
        Err(param(
            "dt",
            format!("must be positive and finite, got {dt}"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn euler_arithmetic() {
        let mut s = Swarm1D::new(vec![0.0, 1.0, 2.0]).unwrap();
        s.integrate(&[0.0, 1.0, 1.0], 0.5).unwrap();
        assert_eq!(s.positions, vec![0.0, 1.5, 2.5]);
    }

    #[test]
    fn inversion_rejected_and_state_kept() {
        let mut s = Swarm1D::new(vec![0.0, 0.1, 0.5]).unwrap();
        let before = s.clone();
        let err = s.integrate(&[0.0, -1.0, 0.0], 0.2).unwrap_err();
        assert_eq!(err, Error::OrderInversion { left: 0, right: 1 });
        assert_eq!(s, before);
        let h = s.integrate_adaptive(&[0.0, -1.0, 0.0], 0.2, 8).unwrap();
        assert!(h < 0.1);
        assert!(s.positions[1] > 0.0);
    }

    #[test]
    fn origin_follows_leftmost_agent() {
        let mut s = Swarm1D::new(vec![2.0, 3.0, 5.0]).unwrap();
        assert_eq!(s.positions, vec![0.0, 1.0, 3.0]);
        s.integrate(&[1.0, 0.0, 0.0], 0.5).unwrap();
        assert_eq!(s.positions, vec![0.0, 0.5, 2.5]);
    }

    #[test]
    fn swarm2d_validation() {
        let pts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(0.5, 0.5),
        ];
        let s = Swarm2D::new(pts.clone(), vec![0, 1, 2, 3]).unwrap();
        assert_eq!(s.interior_ids(), vec![4]);
        assert!(Swarm2D::new(pts.clone(), vec![0, 1, 1, 3]).is_err());
        assert!(Swarm2D::new(pts.clone(), vec![0, 2, 1, 3]).is_err());
        assert!(Swarm2D::new(pts, vec![0, 1]).is_err());
    }

    proptest! {
        #[test]
        fn zero_velocity_is_identity(
            gaps in prop::collection::vec(0.001f64..1.0, 2..50),
            dt in 1e-6f64..10.0,
        ) {
            let mut xs = vec![0.0];
            for g in gaps { let last = *xs.last().unwrap(); xs.push(last + g); }
            let mut s = Swarm1D::new(xs.clone()).unwrap();
            s.integrate(&vec![0.0; xs.len()], dt).unwrap();
            prop_assert_eq!(&s.positions, &xs);

            let pts: Vec<_> = (0..xs.len()).map(|i| {
                let a = i as f64 * std::f64::consts::TAU / xs.len() as f64;
                Vec2::new(a.cos(), a.sin())
            }).collect();
            let mut s2 = Swarm2D::new(pts.clone(), (0..pts.len()).collect()).unwrap();
            s2.integrate(&vec![Vec2::zero(); pts.len()], dt).unwrap();
            prop_assert_eq!(&s2.positions, &pts);
        }
    }
}
