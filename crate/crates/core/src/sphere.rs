//! The two-sphere as the complex projective line.
//!
//! A point is stored as a normalized homogeneous pair `[z, w]`. Chart 0 is
//! `ζ = z/w` (missing only `∞ = [1, 0]`), chart ∞ is `ξ = w/z`. The
//! embedding into ℝ³ is the inverse stereographic projection with
//! `[0, 1]` at the north pole `(0, 0, 1)` and `∞` at the south pole, so the
//! height `Z` equals `(1 - |ζ|²)/(1 + |ζ|²)`.

use crate::conventions::conventions;
use crate::error::{Error, Result};
use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type Vec3 = [f64; 3];

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// One of the two standard affine charts; also names the closed hemisphere
/// where that chart coordinate has modulus at most one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chart {
    Zero,
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjPoint {
    z: C,
    w: C,
}

impl ProjPoint {
    pub fn new(z: C, w: C) -> Result<Self> {
        let n2 = z.norm_sqr() + w.norm_sqr();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::Invalid(format!("homogeneous pair [{z}, {w}]")));
        }
        Ok(Self::normalize(z, w, n2))
    }

    fn normalize(z: C, w: C, n2: f64) -> Self {
        let inv = 1.0 / n2.sqrt();
        let lead = if z != C::new(0.0, 0.0) { z } else { w };
        let phase = lead.conj() / lead.norm();
        ProjPoint {
            z: z * phase * inv,
            w: w * phase * inv,
        }
    }

    pub fn from_chart0(zeta: C) -> Self {
        Self::normalize(zeta, C::new(1.0, 0.0), zeta.norm_sqr() + 1.0)
    }

    pub fn from_chart_inf(xi: C) -> Self {
        Self::normalize(C::new(1.0, 0.0), xi, xi.norm_sqr() + 1.0)
    }

    pub fn from_chart(chart: Chart, c: C) -> Self {
        match chart {
            Chart::Zero => Self::from_chart0(c),
            Chart::Infinity => Self::from_chart_inf(c),
        }
    }

    pub fn infinity() -> Self {
        Self::from_chart_inf(C::new(0.0, 0.0))
    }

    pub fn origin() -> Self {
        Self::from_chart0(C::new(0.0, 0.0))
    }

    pub fn z(&self) -> C {
        self.z
    }

    pub fn w(&self) -> C {
        self.w
    }

    pub fn chart0(&self) -> Option<C> {
        (self.w.norm_sqr() > 0.0).then(|| self.z / self.w)
    }

    pub fn chart_inf(&self) -> Option<C> {
        (self.z.norm_sqr() > 0.0).then(|| self.w / self.z)
    }

    pub fn chart_coord(&self, chart: Chart) -> Option<C> {
        match chart {
            Chart::Zero => self.chart0(),
            Chart::Infinity => self.chart_inf(),
        }
    }

    /// The hemisphere containing the point (ties go to chart 0) and its
    /// coordinate there, which has modulus at most one.
    pub fn hemisphere_coord(&self) -> (Chart, C) {
        if self.z.norm_sqr() <= self.w.norm_sqr() {
            (Chart::Zero, self.z / self.w)
        } else {
            (Chart::Infinity, self.w / self.z)
        }
    }

    pub fn to_unit_vector(&self) -> Vec3 {
        let xy = 2.0 * self.z * self.w.conj();
        [xy.re, xy.im, self.w.norm_sqr() - self.z.norm_sqr()]
    }

    pub fn from_unit_vector(v: Vec3) -> Self {
        let n = norm(v);
        let (x, y, zc) = (v[0] / n, v[1] / n, v[2] / n);
        if zc > -0.5 {
            let w = ((1.0 + zc) / 2.0).sqrt();
            let z = C::new(x, y) / (2.0 * w);
            Self::normalize(z, C::new(w, 0.0), z.norm_sqr() + w * w)
        } else {
            let z = ((1.0 - zc) / 2.0).sqrt();
            let w = C::new(x, -y) / (2.0 * z);
            Self::normalize(C::new(z, 0.0), w, z * z + w.norm_sqr())
        }
    }

    /// Height `Z` of the point; `1` at `[0,1]`, `-1` at `∞`.
    pub fn height(&self) -> f64 {
        self.w.norm_sqr() - self.z.norm_sqr()
    }

    /// Chordal (straight-line) distance on the unit sphere.
    pub fn chordal_distance(&self, other: &ProjPoint) -> f64 {
        2.0 * bracket(self, other).norm()
    }

    /// Great-circle distance on the unit sphere.
    pub fn angular_distance(&self, other: &ProjPoint) -> f64 {
        let c = self.chordal_distance(other).min(2.0);
        2.0 * (c / 2.0).asin()
    }

    pub fn antipode(&self) -> ProjPoint {
        Self::normalize(-self.w.conj(), self.z.conj(), 1.0)
    }

    /// The swap `[z, w] ↦ [w, z]`, an isometry exchanging the two charts.
    pub fn swap(&self) -> ProjPoint {
        Self::normalize(self.w, self.z, 1.0)
    }

    pub fn approx_eq(&self, other: &ProjPoint, tol: f64) -> bool {
        self.chordal_distance(other) <= tol
    }

    /// Rotation by `angle` radians about the axis through `0` and `∞`
    /// (counterclockwise in chart 0).
    pub fn rotate_about_poles(&self, angle: f64) -> ProjPoint {
        let ph = C::from_polar(1.0, angle);
        Self::normalize(self.z * ph, self.w, 1.0)
    }
}

/// `z_a w_b - z_b w_a`, the determinant that vanishes iff the points coincide.
pub fn bracket(a: &ProjPoint, b: &ProjPoint) -> C {
    a.z * b.w - b.z * a.w
}

fn check_distinct(points: &[&ProjPoint]) -> Result<()> {
    let eps = conventions().eps_pt;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if points[i].chordal_distance(points[j]) < eps {
                return Err(Error::DegenerateConfiguration(i, j));
            }
        }
    }
    Ok(())
}

/// Cross-ratio normalized so that `(∞, 0, 1, u) ↦ u`.
pub fn cross_ratio(x1: &ProjPoint, x2: &ProjPoint, x3: &ProjPoint, x4: &ProjPoint) -> Result<C> {
    check_distinct(&[x1, x2, x3, x4])?;
    Ok(cross_ratio_unchecked(x1, x2, x3, x4))
}

#[inline]
pub fn cross_ratio_unchecked(x1: &ProjPoint, x2: &ProjPoint, x3: &ProjPoint, x4: &ProjPoint) -> C {
    (bracket(x1, x3) * bracket(x2, x4)) / (bracket(x2, x3) * bracket(x1, x4))
}

/// Coordinates of the projection `X_n(ℂP¹) → X_{n-3}(ℂ ∖ {0,1})`:
/// `(cr(x1,x2,x3,x4), …, cr(x1,x2,x3,xn))`.
pub fn moduli_projection(x: &[ProjPoint]) -> Result<Vec<C>> {
    if x.len() < 4 {
        return Err(Error::Invalid(format!("moduli projection needs n >= 4, got {}", x.len())));
    }
    let refs: Vec<&ProjPoint> = x.iter().collect();
    check_distinct(&refs)?;
    Ok(moduli_projection_unchecked(x))
}

pub(crate) fn moduli_projection_unchecked(x: &[ProjPoint]) -> Vec<C> {
    x[3..]
        .iter()
        .map(|y| cross_ratio_unchecked(&x[0], &x[1], &x[2], y))
        .collect()
}

/// Fractional-linear map `[z, w] ↦ [a z + b w, c z + d w]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobius {
    pub a: C,
    pub b: C,
    pub c: C,
    pub d: C,
}

impl Mobius {
    pub fn new(a: C, b: C, c: C, d: C) -> Result<Self> {
        let det = a * d - b * c;
        if det.norm() < 1e-12 {
            return Err(Error::Invalid("singular Möbius matrix".into()));
        }
        Ok(Mobius { a, b, c, d })
    }

    pub fn apply(&self, p: &ProjPoint) -> ProjPoint {
        let z = self.a * p.z + self.b * p.w;
        let w = self.c * p.z + self.d * p.w;
        ProjPoint::normalize(z, w, z.norm_sqr() + w.norm_sqr())
    }

    pub fn compose(&self, inner: &Mobius) -> Mobius {
        Mobius {
            a: self.a * inner.a + self.b * inner.c,
            b: self.a * inner.b + self.b * inner.d,
            c: self.c * inner.a + self.d * inner.c,
            d: self.c * inner.b + self.d * inner.d,
        }
    }
}

/// Unit-sphere great-circle arc between two non-antipodal points.
#[derive(Debug, Clone, Copy)]
pub struct Geodesic {
    a: ProjPoint,
    b: ProjPoint,
    va: Vec3,
    vb: Vec3,
    angle: f64,
}

impl Geodesic {
    pub fn new(a: &ProjPoint, b: &ProjPoint) -> Result<Self> {
        if b.chordal_distance(&a.antipode()) < conventions().eps_anti {
            return Err(Error::AntipodalPair);
        }
        let va = a.to_unit_vector();
        let vb = b.to_unit_vector();
        let angle = a.angular_distance(b);
        Ok(Geodesic { a: *a, b: *b, va, vb, angle })
    }

    pub fn length(&self) -> f64 {
        self.angle * conventions().sphere_radius
    }

    pub fn at(&self, s: f64) -> ProjPoint {
        if s <= 0.0 || self.angle == 0.0 {
            return self.a;
        }
        if s >= 1.0 {
            return self.b;
        }
        let v = if self.angle < 1e-8 {
            add(scale(self.va, 1.0 - s), scale(self.vb, s))
        } else {
            let sn = self.angle.sin();
            add(
                scale(self.va, ((1.0 - s) * self.angle).sin() / sn),
                scale(self.vb, (s * self.angle).sin() / sn),
            )
        };
        ProjPoint::from_unit_vector(v)
    }
}

/// The minimal great-circle arc from `a` to `b`, sampled at `samples`
/// equally spaced parameters (endpoints included).
pub fn geodesic_path(a: &ProjPoint, b: &ProjPoint, samples: usize) -> Result<Vec<ProjPoint>> {
    if samples < 2 {
        return Err(Error::Invalid("a sampled path needs at least two samples".into()));
    }
    let g = Geodesic::new(a, b)?;
    let last = (samples - 1) as f64;
    Ok((0..samples).map(|k| g.at(k as f64 / last)).collect())
}

/// Sum of great-circle distances between consecutive samples.
pub fn path_length(points: &[ProjPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| w[0].angular_distance(&w[1]))
        .sum::<f64>()
        * conventions().sphere_radius
}

/// Density of the normalized spherical measure in either chart coordinate.
pub fn chart_measure_density(zeta: C) -> f64 {
    let s = 1.0 + zeta.norm_sqr();
    conventions().chart_density_constant / (s * s)
}

/// Measure of the chart-0 disk `{|ζ| ≤ r}`.
pub fn cap_measure(r: f64) -> f64 {
    if r.is_infinite() {
        return 1.0;
    }
    r * r / (1.0 + r * r)
}

/// `u = 1 - 2 a(r)`, equal to the height of the circle `|ζ| = r`.
pub fn height_of_radius(r: f64) -> f64 {
    if r.is_infinite() {
        return -1.0;
    }
    1.0 - 2.0 * cap_measure(r)
}

/// Inverse of [`height_of_radius`]; `u = -1` maps to `+∞`.
pub fn radius_of_height(u: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&u) {
        return Err(Error::DomainError(u));
    }
    if u == -1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(((1.0 - u) / (1.0 + u)).sqrt())
}

/// Point drawn from the normalized spherical measure (height uniform on
/// [-1, 1], longitude uniform).
pub fn sample_uniform<R: rand::Rng + ?Sized>(rng: &mut R) -> ProjPoint {
    let zc: f64 = rng.random_range(-1.0..1.0);
    let lon: f64 = rng.random_range(0.0..(2.0 * PI));
    let rho = (1.0 - zc * zc).max(0.0).sqrt();
    ProjPoint::from_unit_vector([rho * lon.cos(), rho * lon.sin(), zc])
}

/// Chart velocity of a point; `v` is `dζ/dt` in the named chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector {
    pub base: ProjPoint,
    pub v: C,
    pub chart: Chart,
}

impl TangentVector {
    pub fn new(base: ProjPoint, v: C, chart: Chart) -> Result<Self> {
        if base.chart_coord(chart).is_none() {
            return Err(Error::Invalid("base point outside the chart".into()));
        }
        Ok(TangentVector { base, v, chart })
    }

    /// `(1 + |ζ|²)^{-1} |v|`; on the unit sphere the speed is twice this.
    pub fn spherical_norm(&self) -> f64 {
        let zeta = self.base.chart_coord(self.chart).unwrap_or_default();
        self.v.norm() / (1.0 + zeta.norm_sqr())
    }

    pub fn unit_sphere_speed(&self) -> f64 {
        2.0 * self.spherical_norm()
    }

    pub fn to_ambient(&self) -> Vec3 {
        ambient_velocity(&self.base, self.v, self.chart)
    }

    pub fn from_ambient(base: ProjPoint, x: Vec3, chart: Chart) -> Result<Self> {
        if base.chart_coord(chart).is_none() {
            return Err(Error::Invalid("base point outside the chart".into()));
        }
        Ok(TangentVector { base, v: chart_velocity(&base, x, chart), chart })
    }

    /// Velocity of the same motion in homogeneous coordinates, using the
    /// representative `(ζ, 1)` or `(1, ξ)` of the chart.
    pub fn homogeneous(&self) -> ((C, C), (C, C)) {
        let one = C::new(1.0, 0.0);
        let zero = C::new(0.0, 0.0);
        let c = self.base.chart_coord(self.chart).unwrap_or_default();
        match self.chart {
            Chart::Zero => ((c, one), (self.v, zero)),
            Chart::Infinity => ((one, c), (zero, self.v)),
        }
    }
}

/// `dζ/dt` in `chart` for the ambient velocity `x` at `p`.
pub fn chart_velocity(p: &ProjPoint, x: Vec3, chart: Chart) -> C {
    let v = p.to_unit_vector();
    match chart {
        Chart::Zero => {
            let d = 1.0 + v[2];
            C::new(x[0], x[1]) / d - C::new(v[0], v[1]) * x[2] / (d * d)
        }
        Chart::Infinity => {
            let d = 1.0 - v[2];
            C::new(x[0], -x[1]) / d + C::new(v[0], -v[1]) * x[2] / (d * d)
        }
    }
}

/// Ambient velocity on the unit sphere for chart velocity `dc` at `p`.
pub fn ambient_velocity(p: &ProjPoint, dc: C, chart: Chart) -> Vec3 {
    let c = p.chart_coord(chart).unwrap_or_default();
    let s = 1.0 + c.norm_sqr();
    let ds = 2.0 * (c.conj() * dc).re;
    match chart {
        Chart::Zero => {
            let dxy = 2.0 * dc / s - 2.0 * c * ds / (s * s);
            [dxy.re, dxy.im, -2.0 * ds / (s * s)]
        }
        Chart::Infinity => {
            let dxy = 2.0 * dc.conj() / s - 2.0 * c.conj() * ds / (s * s);
            [dxy.re, dxy.im, 2.0 * ds / (s * s)]
        }
    }
}

/// A rotation of the sphere by a 3×3 orthogonal matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub m: [[f64; 3]; 3],
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] }
    }

    /// Rotation by `angle` about the unit `axis` (Rodrigues).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = norm(axis);
        let [x, y, z] = scale(axis, 1.0 / n);
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Rotation {
            m: [
                [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
                [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
                [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
            ],
        }
    }

    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        let axis = sample_uniform(rng).to_unit_vector();
        let angle = rng.random_range(0.0..(2.0 * PI));
        Self::from_axis_angle(axis, angle)
    }

    pub fn apply_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.m;
        [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
    }

    pub fn inverse(&self) -> Self {
        let m = &self.m;
        Rotation {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    pub fn apply(&self, p: &ProjPoint) -> ProjPoint {
        ProjPoint::from_unit_vector(self.apply_vec(p.to_unit_vector()))
    }
}
