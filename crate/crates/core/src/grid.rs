//! Cartesian grids restricted to a planar domain, with Dirichlet links to the
//! boundary, a red-black SOR Laplace solver and scattered evaluation.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::geometry::{ClosedCurve, Vec2};
use crate::neighbors::SpatialBins;
use crate::scalar::{count, lit, Real};

/// How a grid line leaving the domain is closed off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Treatment {
    /// Cut the stencil at the exact crossing with the boundary curve.
    ShortleyWeller,
    /// Use the first outside node as a boundary node.
    Staircase,
}

/// Neighbor of an unknown along one grid direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Link<T> {
    Node(usize),
    /// Dirichlet point at distance `theta * h` with curve parameter `gamma`.
    Boundary {
        theta: T,
        gamma: T,
        point: Vec2<T>,
    },
}

const DIRS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

#[derive(Debug, Clone)]
pub struct GridDomain<T> {
    pub origin: Vec2<T>,
    pub h: T,
    pub nx: usize,
    pub ny: usize,
    pub treatment: Treatment,
    /// Unknown index of each lattice node, `None` outside.
    node_of: Vec<Option<usize>>,
    /// Lattice coordinates of each unknown.
    cells: Vec<(usize, usize)>,
    links: Vec<[Link<T>; 4]>,
}

impl<T: Real> GridDomain<T> {
    /// Nodes strictly inside `curve` on a lattice of spacing `h`.
    pub fn from_curve(curve: &ClosedCurve<T>, h: T, treatment: Treatment) -> Result<Self> {
        if !(h > T::zero()) {
            return Err(param("h", "grid step must be positive"));
        }
        let (lo, hi) = bounds(curve.vertices());
        let pad = h + h;
        let origin = Vec2::new(lo.x - pad, lo.y - pad);
        let nx = ((hi.x - lo.x + pad + pad) / h)
            .ceil()
            .to_usize()
            .unwrap_or(0)
            + 1;
        let ny = ((hi.y - lo.y + pad + pad) / h)
            .ceil()
            .to_usize()
            .unwrap_or(0)
            + 1;
        let mut mask = vec![false; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let p = origin + Vec2::new(count::<T>(i) * h, count::<T>(j) * h);
                mask[j * nx + i] = curve.contains(p) && curve.distance(p) > h * lit(1e-9);
            }
        }
        Self::from_mask(origin, h, nx, ny, &mask, curve, treatment)
    }

    /// Domain given by a node mask; boundary data is looked up on `curve`.
    pub fn from_mask(
        origin: Vec2<T>,
        h: T,
        nx: usize,
        ny: usize,
        mask: &[bool],
        curve: &ClosedCurve<T>,
        treatment: Treatment,
    ) -> Result<Self> {
        if mask.len() != nx * ny {
            return Err(Error::Input("mask size does not match grid".into()));
        }
        check_simply_connected(nx, ny, mask)?;
        let mut node_of = vec![None; nx * ny];
        let mut cells = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if mask[j * nx + i] {
                    node_of[j * nx + i] = Some(cells.len());
                    cells.push((i, j));
                }
            }
        }
        let pos = |i: i64, j: i64| {
            origin + Vec2::new(count::<T>(i as usize) * h, count::<T>(j as usize) * h)
        };
        let mut links = Vec::with_capacity(cells.len());
        for &(i, j) in &cells {
            let p = pos(i as i64, j as i64);
            let mut ln = [Link::Node(0); 4];
            for (d, &(dx, dy)) in DIRS.iter().enumerate() {
                let (qi, qj) = (i as i64 + dx, j as i64 + dy);
                let inside = qi >= 0
                    && qj >= 0
                    && (qi as usize) < nx
                    && (qj as usize) < ny
                    && node_of[qj as usize * nx + qi as usize].is_some();
                ln[d] = if inside {
                    Link::Node(node_of[qj as usize * nx + qi as usize].unwrap())
                } else {
                    let q = p + Vec2::new(lit::<T>(dx as f64), lit(dy as f64)) * h;
                    match treatment {
                        Treatment::Staircase => {
                            let (gamma, _, _) = curve.nearest(q);
                            Link::Boundary {
                                theta: T::one(),
                                gamma,
                                point: q,
                            }
                        }
                        Treatment::ShortleyWeller => {
                            let (t, gamma) = curve.first_crossing(p, q).unwrap_or_else(|| {
                                let (g, _, _) = curve.nearest(q);
                                (T::one(), g)
                            });
                            let theta = t.max(lit(1e-6));
                            Link::Boundary {
                                theta,
                                gamma,
                                point: p + (q - p) * theta,
                            }
                        }
                    }
                };
            }
            links.push(ln);
        }
        if cells.is_empty() {
            return Err(Error::Domain("no grid nodes inside the domain".into()));
        }
        Ok(Self {
            origin,
            h,
            nx,
            ny,
            treatment,
            node_of,
            cells,
            links,
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn links(&self, k: usize) -> &[Link<T>; 4] {
        &self.links[k]
    }

    pub fn node_position(&self, k: usize) -> Vec2<T> {
        let (i, j) = self.cells[k];
        self.origin + Vec2::new(count::<T>(i) * self.h, count::<T>(j) * self.h)
    }

    pub fn node_at(&self, i: usize, j: usize) -> Option<usize> {
        if i < self.nx && j < self.ny {
            self.node_of[j * self.nx + i]
        } else {
            None
        }
    }

    pub fn positions(&self) -> Vec<Vec2<T>> {
        (0..self.len()).map(|k| self.node_position(k)).collect()
    }

    /// Stencil weights `a_k` (scaled by `h^2`) for the four links of node `k`.
    pub fn weights(&self, k: usize) -> [T; 4] {
        let th = |l: &Link<T>| match *l {
            Link::Node(_) => T::one(),
            Link::Boundary { theta, .. } => theta,
        };
        let ln = &self.links[k];
        let two = lit::<T>(2.0);
        let (e, w, n, s) = (th(&ln[0]), th(&ln[1]), th(&ln[2]), th(&ln[3]));
        [
            two / (e * (e + w)),
            two / (w * (e + w)),
            two / (n * (n + s)),
            two / (s * (n + s)),
        ]
    }

    /// Dirichlet values for every boundary link, in link order.
    pub fn boundary_values<F>(&self, mut g: F) -> Vec<[Vec2<T>; 4]>
    where
        F: FnMut(T, Vec2<T>) -> Vec2<T>,
    {
        self.links
            .iter()
            .map(|ln| {
                let mut out = [Vec2::zero(); 4];
                for (d, l) in ln.iter().enumerate() {
                    if let Link::Boundary { gamma, point, .. } = *l {
                        out[d] = g(gamma, point);
                    }
                }
                out
            })
            .collect()
    }

    #[inline]
    fn neighbor_value(&self, u: &[Vec2<T>], bv: &[[Vec2<T>; 4]], k: usize, d: usize) -> Vec2<T> {
        match self.links[k][d] {
            Link::Node(m) => u[m],
            Link::Boundary { .. } => bv[k][d],
        }
    }

    /// Discrete Laplacian `sum_k a_k (u_k - u_P) / h^2` at every node.
    pub fn laplacian(&self, u: &[Vec2<T>], bv: &[[Vec2<T>; 4]]) -> Vec<Vec2<T>> {
        let h2 = self.h * self.h;
        (0..self.len())
            .map(|k| {
                let a = self.weights(k);
                let mut acc = Vec2::zero();
                for d in 0..4 {
                    acc += (self.neighbor_value(u, bv, k, d) - u[k]) * a[d];
                }
                acc / h2
            })
            .collect()
    }

    /// Normalized residual `sum a_k (u_k - u_P) / sum a_k`, max over nodes and components.
    pub fn residual(&self, u: &[Vec2<T>], bv: &[[Vec2<T>; 4]]) -> T {
        let mut worst = T::zero();
        for k in 0..self.len() {
            let r = self.local_update(u, bv, k) - u[k];
            worst = worst.max(r.x.abs()).max(r.y.abs());
        }
        worst
    }

    #[inline]
    fn local_update(&self, u: &[Vec2<T>], bv: &[[Vec2<T>; 4]], k: usize) -> Vec2<T> {
        let a = self.weights(k);
        let mut num = Vec2::zero();
        let mut den = T::zero();
        for d in 0..4 {
            num += self.neighbor_value(u, bv, k, d) * a[d];
            den += a[d];
        }
        num / den
    }

    /// Discrete Dirichlet energy `sum over stencil edges |u_p - u_q|^2 / theta`
    /// (the `h^2` factors of gradient and area cancel). Each interior edge is
    /// counted once.
    pub fn dirichlet_energy(&self, u: &[Vec2<T>], bv: &[[Vec2<T>; 4]]) -> T {
        let mut e = T::zero();
        for k in 0..self.len() {
            for d in 0..4 {
                match self.links[k][d] {
                    Link::Node(m) => {
                        if m > k {
                            e += (u[m] - u[k]).norm_sq();
                        }
                    }
                    Link::Boundary { theta, .. } => e += (bv[k][d] - u[k]).norm_sq() / theta,
                }
            }
        }
        e
    }

    /// Red-black SOR for the Laplace equation with Dirichlet data `bv`,
    /// starting from `u`. Stops when the normalized residual drops below `tol`.
    pub fn solve_laplace(
        &self,
        u: &mut [Vec2<T>],
        bv: &[[Vec2<T>; 4]],
        tol: T,
        max_iters: usize,
        omega: Option<T>,
    ) -> Result<SolveStats> {
        if u.len() != self.len() {
            return Err(Error::Input("initial guess has wrong length".into()));
        }
        let omega = omega.unwrap_or_else(|| self.default_omega());
        let colors: [Vec<usize>; 2] = {
            let mut c = [Vec::new(), Vec::new()];
            for (k, &(i, j)) in self.cells.iter().enumerate() {
                c[(i + j) % 2].push(k);
            }
            c
        };
        let mut residual = self.residual(u, bv);
        let mut it = 0;
        while residual > tol && it < max_iters {
            for set in &colors {
                for &k in set {
                    let target = self.local_update(u, bv, k);
                    u[k] = u[k] + (target - u[k]) * omega;
                }
            }
            it += 1;
            if it % 10 == 0 || it == max_iters {
                residual = self.residual(u, bv);
            }
        }
        if residual > tol {
            return Err(Error::NotConverged {
                iterations: it,
                residual: residual.as_f64(),
            });
        }
        Ok(SolveStats {
            iterations: it,
            residual: residual.as_f64(),
        })
    }

    fn default_omega(&self) -> T {
        let span = count::<T>(self.nx.max(self.ny));
        let two = lit::<T>(2.0);
        two / (T::one() + (T::pi() / span).sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

fn bounds<T: Real>(pts: &[Vec2<T>]) -> (Vec2<T>, Vec2<T>) {
    let mut lo = pts[0];
    let mut hi = pts[0];
    for p in pts {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    (lo, hi)
}

/// Inside nodes must be 4-connected and the outside (padded by one ring)
/// 8-connected; otherwise the domain has a hole or several pieces.
fn check_simply_connected(nx: usize, ny: usize, mask: &[bool]) -> Result<()> {
    let inside_total = mask.iter().filter(|&&m| m).count();
    if inside_total == 0 {
        return Err(Error::Domain("empty domain mask".into()));
    }
    let start = mask.iter().position(|&m| m).unwrap();
    let seen = flood(
        nx,
        ny,
        start,
        |i| mask[i],
        &[(1, 0), (-1, 0), (0, 1), (0, -1)],
    );
    if seen != inside_total {
        return Err(Error::Domain("domain mask is not connected".into()));
    }
    // padded outside region
    let (px, py) = (nx + 2, ny + 2);
    let outside = |idx: usize| {
        let (i, j) = (idx % px, idx / px);
        if i == 0 || j == 0 || i == px - 1 || j == py - 1 {
            true
        } else {
            !mask[(j - 1) * nx + (i - 1)]
        }
    };
    let outside_total = (0..px * py).filter(|&k| outside(k)).count();
    let eight = [
        (1, 0),
        (-1, 0),
        (0, 1),
        (0, -1),
        (1, 1),
        (1, -1),
        (-1, 1),
        (-1, -1),
    ];
    if flood(px, py, 0, outside, &eight) != outside_total {
        return Err(Error::Domain("domain mask has holes".into()));
    }
    Ok(())
}

fn flood<F: Fn(usize) -> bool>(
    nx: usize,
    ny: usize,
    start: usize,
    member: F,
    steps: &[(i64, i64)],
) -> usize {
    let mut seen = vec![false; nx * ny];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut n = 0;
    while let Some(k) = queue.pop_front() {
        n += 1;
        let (i, j) = ((k % nx) as i64, (k / nx) as i64);
        for &(dx, dy) in steps {
            let (a, b) = (i + dx, j + dy);
            if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                continue;
            }
            let m = b as usize * nx + a as usize;
            if !seen[m] && member(m) {
                seen[m] = true;
                queue.push_back(m);
            }
        }
    }
    n
}

/// Vector field on a grid domain plus its boundary samples, evaluable anywhere
/// near the domain by local weighted linear least squares.
#[derive(Debug, Clone)]
pub struct GridField<T> {
    pub domain: GridDomain<T>,
    pub values: Vec<Vec2<T>>,
    sample_points: Vec<Vec2<T>>,
    sample_values: Vec<Vec2<T>>,
    bins: SpatialBins<T>,
}

impl<T: Real> GridField<T> {
    pub fn new(domain: GridDomain<T>, values: Vec<Vec2<T>>, bv: &[[Vec2<T>; 4]]) -> Result<Self> {
        let mut sample_points = domain.positions();
        let mut sample_values = values.clone();
        for k in 0..domain.len() {
            for d in 0..4 {
                if let Link::Boundary { point, .. } = domain.links(k)[d] {
                    sample_points.push(point);
                    sample_values.push(bv[k][d]);
                }
            }
        }
        let bins = SpatialBins::new(&sample_points, domain.h)?;
        Ok(Self {
            domain,
            values,
            sample_points,
            sample_values,
            bins,
        })
    }

    /// Weighted affine fit over the samples within `2.5 h` of `p`
    /// (widened until at least three non-collinear samples are found).
    pub fn eval(&self, p: Vec2<T>) -> Vec2<T> {
        let h = self.domain.h;
        let mut r = h * lit(2.5);
        for _ in 0..8 {
            let mut ids = Vec::new();
            self.bins.for_each_within(p, r, |j, _| ids.push(j));
            ids.sort_unstable();
            if let Some(v) = self.fit(p, &ids, h) {
                return v;
            }
            r = r + r;
        }
        let (j, _) = self.bins.k_nearest(p, 1)[0];
        self.sample_values[j]
    }

    fn fit(&self, p: Vec2<T>, ids: &[usize], h: T) -> Option<Vec2<T>> {
        if ids.len() < 3 {
            return None;
        }
        let eps = h * h * lit(1e-2);
        // normal equations for c0 + c1 dx + c2 dy, scaled by h
        let mut m = [[T::zero(); 3]; 3];
        let mut bx = [T::zero(); 3];
        let mut by = [T::zero(); 3];
        for &j in ids {
            let d = (self.sample_points[j] - p) / h;
            let w = T::one() / (d.norm_sq() * h * h + eps);
            let phi = [T::one(), d.x, d.y];
            for a in 0..3 {
                for b in 0..3 {
                    m[a][b] += w * phi[a] * phi[b];
                }
                bx[a] += w * phi[a] * self.sample_values[j].x;
                by[a] += w * phi[a] * self.sample_values[j].y;
            }
        }
        let cx = solve3(m, bx)?;
        let cy = solve3(m, by)?;
        Some(Vec2::new(cx[0], cy[0]))
    }
}

/// Gaussian elimination with partial pivoting; `None` when nearly singular.
fn solve3<T: Real>(mut m: [[T; 3]; 3], mut b: [T; 3]) -> Option<[T; 3]> {
    let scale = m.iter().flatten().fold(T::zero(), |a, v| a.max(v.abs()));
    for c in 0..3 {
        let piv = (c..3).max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap())?;
        if m[piv][c].abs() <= scale * lit(1e-10) {
            return None;
        }
        m.swap(c, piv);
        b.swap(c, piv);
        for r in (c + 1)..3 {
            let f = m[r][c] / m[c][c];
            for k in c..3 {
                m[r][k] = m[r][k] - f * m[c][k];
            }
            b[r] = b[r] - f * b[c];
        }
    }
    let mut x = [T::zero(); 3];
    for c in (0..3).rev() {
        let mut s = b[c];
        for k in (c + 1)..3 {
            s -= m[c][k] * x[k];
        }
        x[c] = s / m[c][c];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(h: f64, t: Treatment) -> (ClosedCurve<f64>, GridDomain<f64>) {
        let c = ClosedCurve::circle(Vec2::new(0.0, 0.0), 1.0, 720, 0.0, false).unwrap();
        let g = GridDomain::from_curve(&c, h, t).unwrap();
        (c, g)
    }

    #[test]
    fn affine_data_is_reproduced_exactly_by_cut_stencil() {
        let (_, g) = disk(0.1, Treatment::ShortleyWeller);
        let f = |p: Vec2<f64>| Vec2::new(2.0 * p.x - 0.5 * p.y + 1.0, 3.0 * p.y);
        let bv = g.boundary_values(|_, p| f(p));
        let mut u = vec![Vec2::zero(); g.len()];
        g.solve_laplace(&mut u, &bv, 1e-12, 100_000, None).unwrap();
        for k in 0..g.len() {
            assert!((u[k] - f(g.node_position(k))).norm() < 1e-9);
        }
        let field = GridField::new(g, u, &bv).unwrap();
        let q = Vec2::new(0.93, -0.2);
        assert!((field.eval(q) - f(q)).norm() < 1e-9);
    }

    #[test]
    fn second_order_for_curved_harmonic_data() {
        // u = e^x cos y is harmonic
        let f = |p: Vec2<f64>| Vec2::new(p.x.exp() * p.y.cos(), p.x * p.x - p.y * p.y);
        let err = |h: f64| {
            let (_, g) = disk(h, Treatment::ShortleyWeller);
            let bv = g.boundary_values(|_, p| f(p));
            let mut u = vec![Vec2::zero(); g.len()];
            g.solve_laplace(&mut u, &bv, 1e-13, 200_000, None).unwrap();
            (0..g.len())
                .map(|k| (u[k] - f(g.node_position(k))).norm())
                .fold(0.0, f64::max)
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 3.0, "refinement ratio {ratio}");
    }

    #[test]
    fn staircase_solution_minimizes_energy() {
        let (c, g) = disk(0.1, Treatment::Staircase);
        let bv = g.boundary_values(|gamma, _| c.point_at(gamma));
        let mut u = vec![Vec2::zero(); g.len()];
        g.solve_laplace(&mut u, &bv, 1e-12, 100_000, None).unwrap();
        let e0 = g.dirichlet_energy(&u, &bv);
        let mut state = 12345u64;
        for _ in 0..100 {
            let mut v = u.clone();
            for x in v.iter_mut() {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                let r = ((state >> 33) as f64 / (1u64 << 31) as f64) - 0.5;
                x.x += 1e-3 * r;
            }
            assert!(g.dirichlet_energy(&v, &bv) >= e0);
        }
    }

    #[test]
    fn constants_are_harmonic() {
        let (_, g) = disk(0.2, Treatment::ShortleyWeller);
        let bv = g.boundary_values(|_, _| Vec2::new(1.0, 0.0));
        let mut u = vec![Vec2::new(0.3, 0.7); g.len()];
        g.solve_laplace(&mut u, &bv, 1e-12, 10_000, None).unwrap();
        assert!(u.iter().all(|v| (*v - Vec2::new(1.0, 0.0)).norm() < 1e-10));
    }

    #[test]
    fn mask_with_hole_is_rejected() {
        let c = ClosedCurve::circle(Vec2::new(0.0, 0.0), 1.0, 64, 0.0, false).unwrap();
        let n = 7;
        let mut mask = vec![false; n * n];
        for j in 1..6 {
            for i in 1..6 {
                mask[j * n + i] = true;
            }
        }
        let ok = GridDomain::from_mask(
            Vec2::new(0.0, 0.0),
            0.1,
            n,
            n,
            &mask,
            &c,
            Treatment::Staircase,
        );
        assert!(ok.is_ok());
        mask[3 * n + 3] = false;
        let err = GridDomain::from_mask(
            Vec2::new(0.0, 0.0),
            0.1,
            n,
            n,
            &mask,
            &c,
            Treatment::Staircase,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        let mut split = vec![false; n * n];
        split[n + 1] = true;
        split[5 * n + 5] = true;
        assert!(GridDomain::from_mask(
            Vec2::new(0.0, 0.0),
            0.1,
            n,
            n,
            &split,
            &c,
            Treatment::Staircase
        )
        .is_err());
    }
}
