//! Planar vectors, 2x2 matrices and closed polygonal curves.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{count, lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    #[inline]
    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    /// Counter-clockwise rotation by a quarter turn.
    #[inline]
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn dist(self, other: Self) -> T {
        (self - other).norm()
    }

    pub fn cast<U: Real>(self) -> Vec2<U> {
        Vec2::new(lit(self.x.as_f64()), lit(self.y.as_f64()))
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Real> Mul<T> for Vec2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: T) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

impl<T: Real> Div<T> for Vec2<T> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: T) -> Self {
        Self::new(self.x / rhs, self.y / rhs)
    }
}

impl<T: Real> Neg for Vec2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Real> AddAssign for Vec2<T> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl<T: Real> SubAssign for Vec2<T> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl<T: Real> std::iter::Sum for Vec2<T> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| a + b)
    }
}

/// Row-major 2x2 matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Mat2<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

impl<T: Real> Mat2<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Self { a, b, c, d }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::one())
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    /// Matrix whose columns are `c0` and `c1`.
    pub fn from_columns(c0: Vec2<T>, c1: Vec2<T>) -> Self {
        Self::new(c0.x, c1.x, c0.y, c1.y)
    }

    pub fn det(&self) -> T {
        self.a * self.d - self.b * self.c
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.a, self.c, self.b, self.d)
    }

    pub fn mul_vec(&self, v: Vec2<T>) -> Vec2<T> {
        Vec2::new(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)
    }

    pub fn max_abs(&self) -> T {
        self.a
            .abs()
            .max(self.b.abs())
            .max(self.c.abs())
            .max(self.d.abs())
    }
}

/// Cumulative arclengths `s_i` of a closed polyline and its perimeter `l`.
///
/// `s[0] == 0` and `s[i]` is the length travelled from vertex 0 to vertex `i`.
pub fn polyline_arclengths<T: Real>(chain: &[Vec2<T>]) -> Result<(Vec<T>, T)> {
    if chain.len() < 3 {
        return Err(Error::Input(format!(
            "closed chain needs at least 3 points, got {}",
            chain.len()
        )));
    }
    if let Some(i) = chain.iter().position(|p| !p.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let n = chain.len();
    let mut s = Vec::with_capacity(n);
    let mut acc = T::zero();
    for i in 0..n {
        s.push(acc);
        let len = chain[i].dist(chain[(i + 1) % n]);
        if len <= T::zero() {
            return Err(Error::Degenerate(format!(
                "points {} and {} coincide",
                i,
                (i + 1) % n
            )));
        }
        acc += len;
    }
    Ok((s, acc))
}

/// Closed polygonal curve with an arclength parametrization `gamma in [0, 1)`
/// starting at vertex 0 and following vertex order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ClosedCurve<T> {
    vertices: Vec<Vec2<T>>,
    arclengths: Vec<T>,
    length: T,
}

impl<T: Real> ClosedCurve<T> {
    pub fn new(vertices: Vec<Vec2<T>>) -> Result<Self> {
        let (arclengths, length) = polyline_arclengths(&vertices)?;
        Ok(Self {
            vertices,
            arclengths,
            length,
        })
    }

    /// Regular `n`-gon inscribed in a circle. Vertex 0 sits at `start_angle`;
    /// subsequent vertices go counter-clockwise unless `clockwise`.
    pub fn circle(
        center: Vec2<T>,
        radius: T,
        n: usize,
        start_angle: T,
        clockwise: bool,
    ) -> Result<Self> {
        Self::ellipse(center, radius, radius, n, start_angle, clockwise)
    }

    pub fn ellipse(
        center: Vec2<T>,
        semi_x: T,
        semi_y: T,
        n: usize,
        start_angle: T,
        clockwise: bool,
    ) -> Result<Self> {
        if n < 3 {
            return Err(Error::Input("polygon needs at least 3 vertices".into()));
        }
        let sign = if clockwise { -T::one() } else { T::one() };
        let step = lit::<T>(2.0) * T::pi() / count(n);
        let vertices = (0..n)
            .map(|k| {
                let a = start_angle + sign * step * count(k);
                Vec2::new(center.x + semi_x * a.cos(), center.y + semi_y * a.sin())
            })
            .collect();
        Self::new(vertices)
    }

    pub fn vertices(&self) -> &[Vec2<T>] {
        &self.vertices
    }

    pub fn arclengths(&self) -> &[T] {
        &self.arclengths
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    #[inline]
    pub fn segment(&self, k: usize) -> (Vec2<T>, Vec2<T>) {
        let n = self.vertices.len();
        (self.vertices[k], self.vertices[(k + 1) % n])
    }

    /// Shoelace area; positive for counter-clockwise vertex order.
    pub fn signed_area(&self) -> T {
        let n = self.vertices.len();
        let twice: T = (0..n)
            .map(|i| self.vertices[i].cross(self.vertices[(i + 1) % n]))
            .sum();
        twice / lit(2.0)
    }

    pub fn is_counter_clockwise(&self) -> bool {
        self.signed_area() > T::zero()
    }

    pub fn centroid(&self) -> Vec2<T> {
        let n = self.vertices.len();
        let mut acc = Vec2::zero();
        let mut a2 = T::zero();
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let w = p.cross(q);
            a2 += w;
            acc += (p + q) * w;
        }
        acc / (lit::<T>(3.0) * a2)
    }

    fn gamma_on_segment(&self, k: usize, t: T) -> T {
        let (a, b) = self.segment(k);
        let g = (self.arclengths[k] + t * a.dist(b)) / self.length;
        if g >= T::one() {
            g - T::one()
        } else {
            g
        }
    }

    /// Point at arclength fraction `gamma` (taken modulo 1).
    pub fn point_at(&self, gamma: T) -> Vec2<T> {
        let mut g = gamma - gamma.floor();
        if g >= T::one() {
            g = T::zero();
        }
        let s = g * self.length;
        // last vertex whose arclength <= s
        let k = match self
            .arclengths
            .binary_search_by(|v| v.partial_cmp(&s).unwrap_or(std::cmp::Ordering::Less))
        {
            Ok(k) => k,
            Err(k) => k.saturating_sub(1),
        };
        let (a, b) = self.segment(k);
        let seg = a.dist(b);
        let t = ((s - self.arclengths[k]) / seg)
            .max(T::zero())
            .min(T::one());
        a + (b - a) * t
    }

    /// Closest point on the curve to `p`: `(gamma, point, distance)`.
    pub fn nearest(&self, p: Vec2<T>) -> (T, Vec2<T>, T) {
        let mut best = (T::zero(), self.vertices[0], T::infinity());
        for k in 0..self.vertices.len() {
            let (a, b) = self.segment(k);
            let (t, q) = project_to_segment(p, a, b);
            let d = p.dist(q);
            if d < best.2 {
                best = (self.gamma_on_segment(k, t), q, d);
            }
        }
        best
    }

    pub fn distance(&self, p: Vec2<T>) -> T {
        self.nearest(p).2
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, p: Vec2<T>) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let vi = self.vertices[i];
            let vj = self.vertices[j];
            if (vi.y > p.y) != (vj.y > p.y) {
                let x_cross = vj.x + (p.y - vj.y) * (vi.x - vj.x) / (vi.y - vj.y);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// First intersection of the segment `a -> b` with the curve, as the
    /// fraction `t in [0, 1]` along `a -> b` and the curve parameter `gamma`.
    pub fn first_crossing(&self, a: Vec2<T>, b: Vec2<T>) -> Option<(T, T)> {
        let mut best: Option<(T, T)> = None;
        for k in 0..self.vertices.len() {
            let (p, q) = self.segment(k);
            if let Some((t, u)) = segment_intersection(a, b, p, q) {
                if best.map_or(true, |(bt, _)| t < bt) {
                    best = Some((t, self.gamma_on_segment(k, u)));
                }
            }
        }
        best
    }

    /// True when no two non-adjacent edges intersect.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let (a, b) = self.segment(i);
            for j in (i + 1)..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (c, d) = self.segment(j);
                if segment_intersection(a, b, c, d).is_some() {
                    return false;
                }
            }
        }
        true
    }

    /// Resamples the curve at `n` points equally spaced in arclength,
    /// starting at `gamma0`.
    pub fn resample(&self, n: usize, gamma0: T) -> Vec<Vec2<T>> {
        (0..n)
            .map(|k| self.point_at(gamma0 + count::<T>(k) / count::<T>(n)))
            .collect()
    }
}

/// Orthogonal projection of `p` onto segment `a b`: `(t, point)`.
pub fn project_to_segment<T: Real>(p: Vec2<T>, a: Vec2<T>, b: Vec2<T>) -> (T, Vec2<T>) {
    let ab = b - a;
    let len2 = ab.norm_sq();
    if len2 <= T::zero() {
        return (T::zero(), a);
    }
    let t = ((p - a).dot(ab) / len2).max(T::zero()).min(T::one());
    (t, a + ab * t)
}

pub fn point_segment_distance<T: Real>(p: Vec2<T>, a: Vec2<T>, b: Vec2<T>) -> T {
    p.dist(project_to_segment(p, a, b).1)
}

/// Intersection of segments `a b` and `c d` as fractions `(t, u)` along each.
/// Parallel or disjoint segments return `None`.
pub fn segment_intersection<T: Real>(
    a: Vec2<T>,
    b: Vec2<T>,
    c: Vec2<T>,
    d: Vec2<T>,
) -> Option<(T, T)> {
    let r = b - a;
    let s = d - c;
    let denom = r.cross(s);
    if denom == T::zero() {
        return None;
    }
    let ac = c - a;
    let t = ac.cross(s) / denom;
    let u = ac.cross(r) / denom;
    let (zero, one) = (T::zero(), T::one());
    if t >= zero && t <= one && u >= zero && u <= one {
        Some((t, u))
    } else {
        None
    }
}
