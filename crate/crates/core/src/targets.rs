//! Target densities compiled into pseudo-coordinate space.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::geometry::{ClosedCurve, Vec2};
use crate::grid::{GridDomain, GridField, SolveStats, Treatment};
use crate::neighbors::SpatialBins;
use crate::scalar::{count, lit, Real};
use crate::swarm2d::boundary_target_map;

/// Target density as a function of the pseudo-coordinate `theta in [0, 1]`,
/// tabulated by the trapezoid CDF of `rho*` on an equispaced grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PStarTable1D<T> {
    /// `(theta_k, rho*_k)` with `theta` nondecreasing.
    pub knots: Vec<(T, T)>,
    /// Spatial step between knots; knot `k` sits at `x = k * step`.
    pub step: T,
}

pub fn build_pstar_1d<T: Real, F: Fn(T) -> T>(
    rho_star: F,
    length: T,
    m: usize,
) -> Result<PStarTable1D<T>> {
    if m < 2 {
        return Err(param("m", format!("need at least 2 samples, got {m}")));
    }
    if !(length > T::zero()) {
        return Err(param("length", "must be positive"));
    }
    let step = length / count(m - 1);
    let half = lit::<T>(0.5);
    let mut knots = Vec::with_capacity(m);
    let mut theta = T::zero();
    let mut prev = T::zero();
    for k in 0..m {
        let rho = rho_star(count::<T>(k) * step);
        if !(rho > T::zero()) || !rho.is_finite() {
            return Err(Error::Input(format!(
                "target density not positive at sample {k}: {rho}"
            )));
        }
        if k > 0 {
            theta += (prev + rho) * step * half;
        }
        knots.push((theta, rho));
        prev = rho;
    }
    Ok(PStarTable1D { knots, step })
}

impl<T: Real> PStarTable1D<T> {
    fn bracket(&self, theta: T) -> (usize, T) {
        let n = self.knots.len();
        let k = self
            .knots
            .partition_point(|&(t, _)| t <= theta)
            .clamp(1, n - 1);
        let (t0, _) = self.knots[k - 1];
        let (t1, _) = self.knots[k];
        let w = if t1 > t0 {
            (theta - t0) / (t1 - t0)
        } else {
            T::zero()
        };
        (k, w.max(T::zero()).min(T::one()))
    }

    /// Piecewise-linear `p*(X)`, clamped to the table ends outside `[0, 1]`.
    pub fn eval(&self, x: T) -> T {
        let last = *self.knots.last().unwrap();
        if x <= T::zero() {
            return self.knots[0].1;
        }
        if x >= T::one() || x >= last.0 {
            return last.1;
        }
        let (k, w) = self.bracket(x);
        self.knots[k - 1].1 * (T::one() - w) + self.knots[k].1 * w
    }

    /// Position whose tabulated CDF equals `theta` (inverse-CDF placement).
    pub fn inverse_cdf(&self, theta: T) -> T {
        let last = *self.knots.last().unwrap();
        if theta <= T::zero() {
            return T::zero();
        }
        if theta >= last.0 {
            return count::<T>(self.knots.len() - 1) * self.step;
        }
        let (k, w) = self.bracket(theta);
        (count::<T>(k - 1) + w) * self.step
    }

    /// Total tabulated mass `theta*_m`.
    pub fn total(&self) -> T {
        self.knots.last().unwrap().0
    }

    pub fn length(&self) -> T {
        count::<T>(self.knots.len() - 1) * self.step
    }
}

/// `rho*(x) = a sin x + b` normalized on `[0, length]` when `a`, `b` follow
/// the agent-count rule `a = 1 - pi/(2N)`, `b = 1/N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SineProfile<T> {
    pub a: T,
    pub b: T,
}

impl<T: Real> SineProfile<T> {
    pub fn for_agents(n: usize) -> Self {
        let nt = count::<T>(n);
        Self {
            a: T::one() - T::pi() / (lit::<T>(2.0) * nt),
            b: T::one() / nt,
        }
    }

    pub fn density(&self, x: T) -> T {
        self.a * x.sin() + self.b
    }

    pub fn cdf(&self, x: T) -> T {
        self.a * (T::one() - x.cos()) + self.b * x
    }
}

/// Harmonic map of a planar domain onto the disk of radius 1 centered `(1, 0)`.
#[derive(Debug, Clone)]
pub struct HarmonicMapField<T> {
    pub field: GridField<T>,
    pub stats: SolveStats,
    /// Target boundary, re-indexed so that `gamma = 0` is the anchor.
    pub boundary: ClosedCurve<T>,
}

impl<T: Real> HarmonicMapField<T> {
    pub fn eval(&self, p: Vec2<T>) -> Vec2<T> {
        self.field.eval(p)
    }

    pub fn psi1(&self) -> Vec<T> {
        self.field.values.iter().map(|v| v.x).collect()
    }

    pub fn psi2(&self) -> Vec<T> {
        self.field.values.iter().map(|v| v.y).collect()
    }
}

/// Solves the Laplace equation for both components of the map with boundary
/// data `xi(gamma)`, `gamma` being arclength fraction along `boundary` from its
/// vertex 0 in vertex order.
pub fn solve_harmonic_map<T: Real>(
    boundary: &ClosedCurve<T>,
    h: T,
    tol: T,
    treatment: Treatment,
) -> Result<HarmonicMapField<T>> {
    let domain = GridDomain::from_curve(boundary, h, treatment)?;
    let bv = domain.boundary_values(|gamma, _| boundary_target_map(gamma));
    let mut u = vec![Vec2::new(T::one(), T::zero()); domain.len()];
    let max_iters = 50 * domain.nx.max(domain.ny) * domain.nx.max(domain.ny);
    let stats = domain.solve_laplace(&mut u, &bv, tol, max_iters.max(1000), None)?;
    Ok(HarmonicMapField {
        field: GridField::new(domain, u, &bv)?,
        stats,
        boundary: boundary.clone(),
    })
}

/// Circle polygon re-indexed so that vertex 0 is the point nearest to `anchor`
/// and the vertex order runs clockwise when `clockwise`.
pub fn anchored_circle<T: Real>(
    center: Vec2<T>,
    radius: T,
    n: usize,
    anchor: Vec2<T>,
    clockwise: bool,
) -> Result<ClosedCurve<T>> {
    let d = anchor - center;
    let start = if d.norm() > T::zero() {
        d.y.atan2(d.x)
    } else {
        T::pi()
    };
    ClosedCurve::circle(center, radius, n, start, clockwise)
}

/// Scattered samples `(Psi*(r_k), rho_k)` over the unit disk centered `(1, 0)`,
/// interpolated by inverse-distance weighting over the 8 nearest samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PStarField2D<T> {
    pub samples: Vec<(Vec2<T>, T)>,
    #[serde(skip)]
    bins: Option<SpatialBins<T>>,
}

pub const IDW_NEIGHBORS: usize = 8;

impl<T: Real> PStarField2D<T> {
    pub fn from_samples(samples: Vec<(Vec2<T>, T)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Input("no samples for p*".into()));
        }
        if let Some(k) = samples
            .iter()
            .position(|s| !(s.1 > T::zero()) || !s.0.is_finite())
        {
            return Err(Error::Input(format!(
                "sample {k} is not a positive finite value"
            )));
        }
        let mut f = Self {
            samples,
            bins: None,
        };
        f.reindex()?;
        Ok(f)
    }

    /// Rebuilds the search structure, e.g. after deserialization.
    pub fn reindex(&mut self) -> Result<()> {
        let pts: Vec<Vec2<T>> = self.samples.iter().map(|s| s.0).collect();
        let cell = lit::<T>(2.0) / count::<T>(self.samples.len()).sqrt().max(T::one());
        self.bins = Some(SpatialBins::new(&pts, cell)?);
        Ok(())
    }

    pub fn eval(&self, r: Vec2<T>) -> T {
        let c = Vec2::new(T::one(), T::zero());
        let d = r - c;
        let q = if d.norm() > T::one() {
            c + d / d.norm()
        } else {
            r
        };
        let bins = self.bins.as_ref().expect("p* field not indexed");
        let nn = bins.k_nearest(q, IDW_NEIGHBORS);
        if nn[0].1 == T::zero() {
            return self.samples[nn[0].0].1;
        }
        let mut num = T::zero();
        let mut den = T::zero();
        for (j, dist) in nn {
            let w = T::one() / (dist * dist);
            num += w * self.samples[j].1;
            den += w;
        }
        num / den
    }
}

/// Hexagonal lattice points with spacing `s` strictly inside `curve`.
pub fn hex_points_inside<T: Real>(curve: &ClosedCurve<T>, s: T, margin: T) -> Vec<Vec2<T>> {
    let v = curve.vertices();
    let (mut lo, mut hi) = (v[0], v[0]);
    for p in v {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let row = s * lit::<T>(3.0).sqrt() / lit(2.0);
    let rows = ((hi.y - lo.y) / row).ceil().to_usize().unwrap_or(0) + 1;
    let cols = ((hi.x - lo.x) / s).ceil().to_usize().unwrap_or(0) + 2;
    let mid = (lo + hi) / lit(2.0);
    let mut out = Vec::new();
    let half_rows = rows as i64 / 2 + 1;
    let half_cols = cols as i64 / 2 + 1;
    for j in -half_rows..=half_rows {
        let shift = if j.rem_euclid(2) == 1 {
            s / lit(2.0)
        } else {
            T::zero()
        };
        for i in -half_cols..=half_cols {
            let p = Vec2::new(
                mid.x + lit::<T>(i as f64) * s + shift,
                mid.y + lit::<T>(j as f64) * row,
            );
            if curve.contains(p) && curve.distance(p) > margin {
                out.push(p);
            }
        }
    }
    out
}

/// Average of `f` over the part of the disk `B_d(p)` inside `domain`, divided
/// by the full disk area: what a flat kernel of width `d` reports for an
/// ideal continuum distribution `f`.
pub fn kernel_average<T: Real, F: Fn(Vec2<T>) -> T>(
    f: &F,
    domain: &ClosedCurve<T>,
    p: Vec2<T>,
    d: T,
) -> T {
    const RINGS: usize = 16;
    const SECTORS: usize = 48;
    let mut acc = T::zero();
    let dr = d / count(RINGS);
    let dphi = lit::<T>(2.0) * T::pi() / count(SECTORS);
    let near_edge = domain.distance(p) < d;
    for a in 0..RINGS {
        let r = (count::<T>(a) + lit(0.5)) * dr;
        for b in 0..SECTORS {
            // stagger alternate rings to avoid radial alignment
            let phi = (count::<T>(b) + if a % 2 == 0 { lit(0.25) } else { lit(0.75) }) * dphi;
            let q = p + Vec2::new(phi.cos(), phi.sin()) * r;
            if !near_edge || domain.contains(q) {
                acc += f(q) * r * dr * dphi;
            }
        }
    }
    acc / (T::pi() * d * d)
}

/// `rho*(r) = |r - s|^(-2 p) / Z` on a disk, normalized to unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PowerLawDisk<T> {
    pub center: Vec2<T>,
    pub radius: T,
    pub singular: Vec2<T>,
    pub exponent: T,
    pub z: T,
}

impl<T: Real> PowerLawDisk<T> {
    /// Computes the normalization exactly along rays from the singular point.
    pub fn new(center: Vec2<T>, radius: T, singular: Vec2<T>, exponent: T) -> Result<Self> {
        if (singular - center).norm() >= radius {
            return Err(Error::Input(
                "singular point must lie inside the disk".into(),
            ));
        }
        let power = lit::<T>(2.0) - lit::<T>(2.0) * exponent;
        if !(power > T::zero()) {
            return Err(param("exponent", "density not integrable"));
        }
        let rays = 20_000;
        let dphi = lit::<T>(2.0) * T::pi() / count(rays);
        let w = singular - center;
        let mut z = T::zero();
        for k in 0..rays {
            let phi = (count::<T>(k) + lit(0.5)) * dphi;
            let u = Vec2::new(phi.cos(), phi.sin());
            // |w + t u| = radius
            let b = w.dot(u);
            let c = w.norm_sq() - radius * radius;
            let t = -b + (b * b - c).sqrt();
            z += t.powf(power) / power * dphi;
        }
        Ok(Self {
            center,
            radius,
            singular,
            exponent,
            z,
        })
    }

    pub fn density(&self, p: Vec2<T>) -> T {
        (p - self.singular).norm_sq().powf(-self.exponent) / self.z
    }

    pub fn area(&self) -> T {
        T::pi() * self.radius * self.radius
    }
}

/// How `p*` samples are taken from `rho*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleRule<T> {
    Pointwise,
    /// Flat-kernel average of width `d` clipped to the target domain.
    KernelMatched(T),
}

/// Samples `rho*` on a hexagonal lattice of about `m` points inside the
/// target, plus points on its boundary, and pairs them with `Psi*`.
pub fn build_pstar_2d<T: Real, F: Fn(Vec2<T>) -> T>(
    rho_star: F,
    map: &HarmonicMapField<T>,
    m: usize,
    rule: SampleRule<T>,
) -> Result<PStarField2D<T>> {
    let curve = &map.boundary;
    let area = curve.signed_area().abs();
    if !(area > T::zero()) {
        return Err(Error::Domain("target domain has zero area".into()));
    }
    let spacing = (area * lit(2.0) / (lit::<T>(3.0).sqrt() * count(m.max(1)))).sqrt();
    let mut pts: Vec<(Vec2<T>, Vec2<T>)> = hex_points_inside(curve, spacing, spacing * lit(0.25))
        .into_iter()
        .map(|p| (p, map.eval(p)))
        .collect();
    if pts.is_empty() {
        return Err(Error::Domain("no samples inside the target domain".into()));
    }
    let nb = (curve.length() / spacing)
        .ceil()
        .to_usize()
        .unwrap_or(3)
        .max(3);
    for k in 0..nb {
        let gamma = count::<T>(k) / count(nb);
        pts.push((curve.point_at(gamma), boundary_target_map(gamma)));
    }
    let samples = pts
        .into_iter()
        .map(|(r, psi)| {
            let v = match rule {
                SampleRule::Pointwise => rho_star(r),
                SampleRule::KernelMatched(d) => kernel_average(&rho_star, curve, r, d),
            };
            (psi, v)
        })
        .collect();
    PStarField2D::from_samples(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn uniform_table_is_identity_cdf() {
        let t = build_pstar_1d(|_| 1.0, 1.0, 11).unwrap();
        for (k, &(th, rho)) in t.knots.iter().enumerate() {
            assert_relative_eq!(th, k as f64 / 10.0, epsilon = 1e-15);
            assert_eq!(rho, 1.0);
        }
        assert_eq!(t.eval(0.37), 1.0);
        let t2 = build_pstar_1d(|_| 2.0, 0.5, 11).unwrap();
        for (k, &(th, _)) in t2.knots.iter().enumerate() {
            assert_relative_eq!(th, 2.0 * k as f64 * 0.05, epsilon = 1e-15);
        }
        assert_eq!(t2.eval(0.5), 2.0);
    }

    #[test]
    fn sine_table_against_analytic_cdf() {
        let n = 10_000;
        let s = SineProfile::<f64>::for_agents(n);
        let l = std::f64::consts::FRAC_PI_2;
        assert_relative_eq!(s.cdf(l), 1.0, epsilon = 1e-14);
        let t = build_pstar_1d(|x| s.density(x), l, 1000).unwrap();
        assert!((t.total() - 1.0).abs() < 1e-4);
        for &(th, _) in t.knots.iter().step_by(97) {
            let x = t.inverse_cdf(th);
            assert!((s.cdf(x) - th).abs() < 1e-6);
        }
        assert_eq!(t.eval(0.0), s.b);
        assert_eq!(t.eval(1.2), t.knots.last().unwrap().1);
        assert_eq!(t.eval(-0.5), s.b);
    }

    #[test]
    fn nonpositive_density_rejected() {
        assert!(build_pstar_1d(|x: f64| x - 0.5, 1.0, 11).is_err());
        assert!(build_pstar_1d(|_: f64| 1.0, 1.0, 1).is_err());
    }

    fn disk_map(h: f64) -> HarmonicMapField<f64> {
        let c = anchored_circle(Vec2::new(0.6, 0.0), 0.5, 1024, Vec2::new(0.1, 0.0), true).unwrap();
        solve_harmonic_map(&c, h, 1e-10, Treatment::ShortleyWeller).unwrap()
    }

    #[test]
    fn disk_map_is_affine() {
        let h = 1.0 / 32.0;
        let map = disk_map(h);
        let dom = &map.field.domain;
        let mut worst: f64 = 0.0;
        for k in 0..dom.len() {
            let p = dom.node_position(k);
            let exact = Vec2::new(2.0 * (p.x - 0.6) + 1.0, 2.0 * p.y);
            worst = worst.max((map.field.values[k] - exact).norm());
        }
        // polygonal boundary sag of the 1024-gon dominates
        assert!(worst < 5.0 * h * h, "max error {worst}");
        for v in &map.field.values {
            assert!((*v - Vec2::new(1.0, 0.0)).norm() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn square_map_stays_inside_disk() {
        let sq = ClosedCurve::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
        ])
        .unwrap();
        let map = solve_harmonic_map(&sq, 0.05, 1e-10, Treatment::ShortleyWeller).unwrap();
        for v in &map.field.values {
            assert!((*v - Vec2::new(1.0, 0.0)).norm() < 1.0);
        }
    }

    #[test]
    fn normalization_of_power_law() {
        let t = PowerLawDisk::new(Vec2::new(0.6, 0.0), 0.5, Vec2::new(0.4, 0.0), 0.3).unwrap();
        // midpoint quadrature on a fine polar grid about the disk center
        let (nr, nphi) = (800, 800);
        let mut mass = 0.0;
        for a in 0..nr {
            let r = (a as f64 + 0.5) * 0.5 / nr as f64;
            for b in 0..nphi {
                let phi = (b as f64 + 0.5) * std::f64::consts::TAU / nphi as f64;
                let p = Vec2::new(0.6 + r * phi.cos(), r * phi.sin());
                mass +=
                    t.density(p) * r * (0.5 / nr as f64) * (std::f64::consts::TAU / nphi as f64);
            }
        }
        assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
    }

    #[test]
    fn pstar_field_examples() {
        let map = disk_map(1.0 / 32.0);
        let area = std::f64::consts::PI * 0.25;
        let flat = build_pstar_2d(|_| 1.0 / area, &map, 500, SampleRule::Pointwise).unwrap();
        for q in [
            Vec2::new(1.0, 0.0),
            Vec2::new(1.5, 0.3),
            Vec2::new(2.5, 0.0),
        ] {
            assert_relative_eq!(flat.eval(q), 1.0 / area, max_relative = 1e-12);
        }
        let t = PowerLawDisk::new(Vec2::new(0.6, 0.0), 0.5, Vec2::new(0.4, 0.0), 0.3).unwrap();
        let f = build_pstar_2d(|p| t.density(p), &map, 4000, SampleRule::Pointwise).unwrap();
        let at_center = f.eval(Vec2::new(1.0, 0.0));
        let exact = t.density(Vec2::new(0.6, 0.0));
        assert!((at_center - exact).abs() / exact < 0.02);
        let (psi, rho) = f.samples[17];
        assert_eq!(f.eval(psi), rho);
    }

    #[test]
    fn kernel_average_halves_at_straight_edge() {
        let sq = ClosedCurve::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap();
        let inner = kernel_average(&|_| 1.0f64, &sq, Vec2::new(0.5, 0.5), 0.1);
        let edge = kernel_average(&|_| 1.0f64, &sq, Vec2::new(0.5, 0.0), 0.1);
        assert_relative_eq!(inner, 1.0, epsilon = 1e-3);
        assert!((edge - 0.5).abs() < 0.02);
    }

    proptest! {
        #[test]
        fn theta_knots_nondecreasing(c in prop::collection::vec(0.01f64..5.0, 4), m in 2usize..200) {
            let rho = |x: f64| c[0] + c[1] * (c[2] * x).sin().abs() + c[3] * x;
            let t = build_pstar_1d(rho, 1.0, m).unwrap();
            prop_assert_eq!(t.knots[0].0, 0.0);
            for w in t.knots.windows(2) {
                prop_assert!(w[1].0 > w[0].0);
            }
        }
    }
}
