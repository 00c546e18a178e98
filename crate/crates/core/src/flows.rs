//! Time-dependent area-preserving flows on the sphere.
//!
//! Time is physical: a flow is the isotopy `φ_t`, `t ∈ [0, duration]`, and
//! the diffeomorphism it represents is `φ_duration`. Rotational flows are
//! the maps `f_{t,ω}(ζ) = e^{2πi t ω(|ζ|)} ζ` of chart 0 and are evaluated in
//! closed form. Hamiltonian flows are sampled on a latitude-longitude grid
//! and integrated with fixed-step RK4 in whichever chart keeps `|ζ| ≤ 1`.

use crate::conventions::conventions;
use crate::error::{Error, Result};
use crate::quad;
use crate::sphere::{
    add, chart_velocity, cross, dot, norm, radius_of_height, scale, sub, Chart, ProjPoint,
    Rotation, Vec3,
};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    PiecewiseConstant,
    PiecewiseLinear,
    /// C¹ cubic blending `3s² - 2s³` between consecutive breakpoints.
    SmoothBump,
}

/// Rotation rate `ω` in turns per unit time, as a function of the chart-0
/// radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum RadialProfile {
    /// Values at increasing radii, constant below the first and above the
    /// last breakpoint. Piecewise-constant profiles take `values[i]` on
    /// `[breakpoints[i], breakpoints[i+1])`.
    Tabulated {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
        interpolation: Interpolation,
    },
    /// `ω̃(u) = Σ c_k u^k` in the height variable.
    HeightPolynomial { coefficients: Vec<f64> },
}

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

fn smoothstep_deriv(s: f64) -> f64 {
    if !(0.0..=1.0).contains(&s) {
        return 0.0;
    }
    6.0 * s * (1.0 - s)
}

impl RadialProfile {
    pub fn constant(c: f64) -> Self {
        RadialProfile::Tabulated {
            breakpoints: vec![0.0],
            values: vec![c],
            interpolation: Interpolation::PiecewiseConstant,
        }
    }

    /// `ω̃(u) = u`.
    pub fn height() -> Self {
        RadialProfile::HeightPolynomial { coefficients: vec![0.0, 1.0] }
    }

    pub fn steps(breakpoints: Vec<f64>, values: Vec<f64>) -> Self {
        RadialProfile::Tabulated { breakpoints, values, interpolation: Interpolation::PiecewiseConstant }
    }

    /// Smooth bump of the given height supported on `[r0, r1]`.
    pub fn bump(r0: f64, r1: f64, height: f64) -> Self {
        RadialProfile::Tabulated {
            breakpoints: vec![r0, 0.5 * (r0 + r1), r1],
            values: vec![0.0, height, 0.0],
            interpolation: Interpolation::SmoothBump,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RadialProfile::Tabulated { breakpoints, values, .. } => {
                if breakpoints.is_empty() || breakpoints.len() != values.len() {
                    return Err(Error::Invalid("profile needs matching, nonempty breakpoints and values".into()));
                }
                if breakpoints[0] < 0.0 || breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Invalid("profile breakpoints must be nonnegative and increasing".into()));
                }
                if breakpoints.iter().chain(values).any(|v| !v.is_finite()) {
                    return Err(Error::Invalid("profile entries must be finite".into()));
                }
            }
            RadialProfile::HeightPolynomial { coefficients } => {
                if coefficients.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Invalid("polynomial coefficients must be finite".into()));
                }
            }
        }
        Ok(())
    }

    /// `ω(r)`; `r = ∞` gives the value at the fixed point `∞`.
    pub fn omega(&self, r: f64) -> f64 {
        match self {
            RadialProfile::Tabulated { breakpoints: b, values: v, interpolation } => {
                let k = b.partition_point(|&x| x <= r);
                if k == 0 {
                    return v[0];
                }
                if k == b.len() {
                    return v[k - 1];
                }
                let (r0, r1) = (b[k - 1], b[k]);
                let s = (r - r0) / (r1 - r0);
                match interpolation {
                    Interpolation::PiecewiseConstant => v[k - 1],
                    Interpolation::PiecewiseLinear => v[k - 1] + (v[k] - v[k - 1]) * s,
                    Interpolation::SmoothBump => v[k - 1] + (v[k] - v[k - 1]) * smoothstep(s),
                }
            }
            RadialProfile::HeightPolynomial { coefficients } => {
                let u = crate::sphere::height_of_radius(r);
                coefficients.iter().rev().fold(0.0, |acc, c| acc * u + c)
            }
        }
    }

    /// `ω̃(u) = ω(r(u))` on `[-1, 1]`.
    pub fn omega_tilde(&self, u: f64) -> Result<f64> {
        let r = radius_of_height(u)?;
        if let RadialProfile::HeightPolynomial { coefficients } = self {
            return Ok(coefficients.iter().rev().fold(0.0, |acc, c| acc * u + c));
        }
        Ok(self.omega(r))
    }

    /// `dω/dr`, zero across the jumps of a piecewise-constant profile.
    pub fn omega_deriv(&self, r: f64) -> f64 {
        match self {
            RadialProfile::Tabulated { breakpoints: b, values: v, interpolation } => {
                let k = b.partition_point(|&x| x <= r);
                if k == 0 || k == b.len() {
                    return 0.0;
                }
                let (r0, r1) = (b[k - 1], b[k]);
                let s = (r - r0) / (r1 - r0);
                match interpolation {
                    Interpolation::PiecewiseConstant => 0.0,
                    Interpolation::PiecewiseLinear => (v[k] - v[k - 1]) / (r1 - r0),
                    Interpolation::SmoothBump => (v[k] - v[k - 1]) * smoothstep_deriv(s) / (r1 - r0),
                }
            }
            RadialProfile::HeightPolynomial { coefficients } => {
                let u = crate::sphere::height_of_radius(r);
                let dp = coefficients
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (k, c)| acc * u + k as f64 * c);
                let s = 1.0 + r * r;
                dp * (-4.0 * r / (s * s))
            }
        }
    }

    /// Heights of the breakpoints plus the endpoints ±1, ascending. These
    /// are where `ω̃` may fail to be smooth.
    pub fn height_breaks(&self) -> Vec<f64> {
        let mut out = vec![-1.0, 1.0];
        if let RadialProfile::Tabulated { breakpoints, .. } = self {
            out.extend(breakpoints.iter().map(|&r| crate::sphere::height_of_radius(r)));
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        out
    }

    /// Smallest closed radial interval outside of which `ω` vanishes, or
    /// `None` if it does not vanish near `∞`.
    pub fn radial_support(&self) -> Option<(f64, f64)> {
        match self {
            RadialProfile::Tabulated { breakpoints: b, values: v, .. } => {
                if *v.last().unwrap() != 0.0 {
                    return None;
                }
                let first = v.iter().position(|&x| x != 0.0)?;
                let last = v.iter().rposition(|&x| x != 0.0)?;
                let lo = if first == 0 { 0.0 } else { b[first - 1] };
                Some((lo, b[last + 1]))
            }
            RadialProfile::HeightPolynomial { coefficients } => {
                coefficients.iter().all(|&c| c == 0.0).then_some((0.0, 0.0))
            }
        }
    }

    pub fn negated(&self) -> Self {
        match self {
            RadialProfile::Tabulated { breakpoints, values, interpolation } => RadialProfile::Tabulated {
                breakpoints: breakpoints.clone(),
                values: values.iter().map(|v| -v).collect(),
                interpolation: *interpolation,
            },
            RadialProfile::HeightPolynomial { coefficients } => RadialProfile::HeightPolynomial {
                coefficients: coefficients.iter().map(|v| -v).collect(),
            },
        }
    }
}

/// `ω ↦ ω̃`, the profile as a function of the height `u = 1 - 2a(r)`.
pub fn profile_transform(profile: &RadialProfile) -> impl Fn(f64) -> Result<f64> + '_ {
    move |u| profile.omega_tilde(u)
}

/// A scalar field on a cell-centered latitude-longitude grid.
///
/// Row `i` sits at colatitude `(i + 1/2)π/n_lat` (row 0 next to the north
/// pole `Z = 1`), column `j` at longitude `2πj/n_lon`. Values are stored
/// row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub time: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianGrid {
    pub n_lat: usize,
    pub n_lon: usize,
    /// Keyframes at increasing times, linearly interpolated and held
    /// constant outside their range.
    pub keyframes: Vec<Keyframe>,
}

const STENCIL: usize = 6;

fn lagrange_weights(x: f64, nodes: &[f64; STENCIL], w: &mut [f64; STENCIL], dw: &mut [f64; STENCIL]) {
    for a in 0..STENCIL {
        let mut denom = 1.0;
        let mut num = 1.0;
        let mut dnum = 0.0;
        for b in 0..STENCIL {
            if b == a {
                continue;
            }
            denom *= nodes[a] - nodes[b];
            dnum = dnum * (x - nodes[b]) + num;
            num *= x - nodes[b];
        }
        w[a] = num / denom;
        dw[a] = dnum / denom;
    }
}

impl HamiltonianGrid {
    /// Samples `f(t, p)` on the grid at each of the given times.
    pub fn from_fn<F: Fn(f64, Vec3) -> f64>(n_lat: usize, n_lon: usize, times: &[f64], f: F) -> Self {
        let keyframes = times
            .iter()
            .map(|&t| {
                let mut values = Vec::with_capacity(n_lat * n_lon);
                for i in 0..n_lat {
                    let th = (i as f64 + 0.5) * PI / n_lat as f64;
                    for j in 0..n_lon {
                        let ph = 2.0 * PI * j as f64 / n_lon as f64;
                        values.push(f(t, [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]));
                    }
                }
                Keyframe { time: t, values }
            })
            .collect();
        HamiltonianGrid { n_lat, n_lon, keyframes }
    }

    /// A random smooth Hamiltonian: a few Gaussian bumps with moving
    /// centers, sampled at `frames` keyframes over `[0, duration]`.
    pub fn random(seed: u64, n_lat: usize, n_lon: usize, frames: usize, duration: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bumps: Vec<(Vec3, Vec3, f64, f64)> = (0..3)
            .map(|_| {
                let a = crate::sphere::sample_uniform(&mut rng).to_unit_vector();
                let b = crate::sphere::sample_uniform(&mut rng).to_unit_vector();
                let amp = rng.random_range(-1.0..1.0);
                let width = rng.random_range(0.6..1.4);
                (a, b, amp, width)
            })
            .collect();
        let times: Vec<f64> = (0..frames.max(1))
            .map(|k| if frames <= 1 { 0.0 } else { duration * k as f64 / (frames - 1) as f64 })
            .collect();
        Self::from_fn(n_lat, n_lon, &times, |t, p| {
            let s = if duration > 0.0 { t / duration } else { 0.0 };
            bumps
                .iter()
                .map(|(a, b, amp, width)| {
                    let c = add(scale(*a, 1.0 - s), scale(*b, s));
                    let c = scale(c, 1.0 / norm(c).max(1e-12));
                    let d2 = norm(sub(p, c)).powi(2);
                    amp * (-d2 / (width * width)).exp()
                })
                .sum()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_lat < STENCIL || self.n_lon < STENCIL || self.n_lon % 2 != 0 {
            return Err(Error::Invalid(format!(
                "grid must have at least {STENCIL} rows and an even number (>= {STENCIL}) of columns"
            )));
        }
        if self.keyframes.is_empty() {
            return Err(Error::Invalid("Hamiltonian needs at least one keyframe".into()));
        }
        if self.keyframes.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return Err(Error::Invalid("keyframe times must increase".into()));
        }
        for k in &self.keyframes {
            if k.values.len() != self.n_lat * self.n_lon || k.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid("keyframe has wrong size or non-finite values".into()));
            }
        }
        Ok(())
    }

    fn cell(&self, values: &[f64], row: isize, col: isize) -> f64 {
        let (n_lat, n_lon) = (self.n_lat as isize, self.n_lon as isize);
        let (r, shift) = if row < 0 {
            (-1 - row, n_lon / 2)
        } else if row >= n_lat {
            (2 * n_lat - 1 - row, n_lon / 2)
        } else {
            (row, 0)
        };
        let c = (col + shift).rem_euclid(n_lon);
        values[(r * n_lon + c) as usize]
    }

    /// Value and partial derivatives `(H, ∂_θ H, ∂_φ H)` of one keyframe's
    /// interpolant, blended to the pole value inside the first half row.
    fn eval_frame(&self, values: &[f64], th: f64, ph: f64) -> (f64, f64, f64) {
        let h = PI / self.n_lat as f64;
        let g = 2.0 * PI / self.n_lon as f64;
        let xr = th / h - 0.5;
        let i0 = xr.floor() as isize - (STENCIL as isize / 2 - 1);
        let xc = ph / g;
        let j0 = xc.floor() as isize - (STENCIL as isize / 2 - 1);
        let mut rn = [0.0; STENCIL];
        let mut cn = [0.0; STENCIL];
        for a in 0..STENCIL {
            rn[a] = (i0 + a as isize) as f64;
            cn[a] = (j0 + a as isize) as f64;
        }
        let (mut wr, mut dwr, mut wc, mut dwc) = ([0.0; STENCIL], [0.0; STENCIL], [0.0; STENCIL], [0.0; STENCIL]);
        lagrange_weights(xr, &rn, &mut wr, &mut dwr);
        lagrange_weights(xc, &cn, &mut wc, &mut dwc);
        let (mut v, mut dth, mut dph) = (0.0, 0.0, 0.0);
        for a in 0..STENCIL {
            let mut row_v = 0.0;
            let mut row_d = 0.0;
            for b in 0..STENCIL {
                let x = self.cell(values, i0 + a as isize, j0 + b as isize);
                row_v += wc[b] * x;
                row_d += dwc[b] * x;
            }
            v += wr[a] * row_v;
            dth += dwr[a] * row_v;
            dph += wr[a] * row_d;
        }
        dth /= h;
        dph /= g;
        let dist = th.min(PI - th);
        let chi = 1.0 - smoothstep((dist - 0.5 * h) / (1.5 * h));
        if chi > 0.0 {
            let pole = self.pole_value(values, th < PI / 2.0);
            let dchi = -smoothstep_deriv((dist - 0.5 * h) / (1.5 * h)) / (1.5 * h) * if th < PI / 2.0 { 1.0 } else { -1.0 };
            let vb = chi * pole + (1.0 - chi) * v;
            let dthb = dchi * (pole - v) + (1.0 - chi) * dth;
            return (vb, dthb, (1.0 - chi) * dph);
        }
        (v, dth, dph)
    }

    fn pole_value(&self, values: &[f64], north: bool) -> f64 {
        let n_lon = self.n_lon;
        let row_mean = |r: usize| values[r * n_lon..(r + 1) * n_lon].iter().sum::<f64>() / n_lon as f64;
        // Symmetric ghost rows make the row-mean profile even about the pole.
        let m: Vec<f64> = (0..STENCIL / 2)
            .map(|k| row_mean(if north { k } else { self.n_lat - 1 - k }))
            .collect();
        // Even Lagrange interpolation at the pole from rows ±1/2, ±3/2, ±5/2.
        (150.0 * m[0] - 25.0 * m[1] + 3.0 * m[2]) / 128.0
    }

    fn frame_weights(&self, t: f64) -> (usize, usize, f64) {
        let k = &self.keyframes;
        let i = k.partition_point(|f| f.time <= t);
        if i == 0 {
            return (0, 0, 0.0);
        }
        if i == k.len() {
            return (i - 1, i - 1, 0.0);
        }
        let s = (t - k[i - 1].time) / (k[i].time - k[i - 1].time);
        (i - 1, i, s)
    }

    pub fn value(&self, p: Vec3, t: f64) -> f64 {
        let (th, ph) = angles(p);
        let (a, b, s) = self.frame_weights(t);
        let va = self.eval_frame(&self.keyframes[a].values, th, ph).0;
        if s == 0.0 {
            return va;
        }
        let vb = self.eval_frame(&self.keyframes[b].values, th, ph).0;
        va + s * (vb - va)
    }

    /// Symplectic gradient `∇H × p` on the unit sphere.
    pub fn field(&self, p: Vec3, t: f64) -> Vec3 {
        let (th, ph) = angles(p);
        let (a, b, s) = self.frame_weights(t);
        let (_, mut dth, mut dph) = self.eval_frame(&self.keyframes[a].values, th, ph);
        if s != 0.0 {
            let (_, dthb, dphb) = self.eval_frame(&self.keyframes[b].values, th, ph);
            dth += s * (dthb - dth);
            dph += s * (dphb - dph);
        }
        let (st, ct) = th.sin_cos();
        let (sp, cp) = ph.sin_cos();
        let e_th = [ct * cp, ct * sp, -st];
        let e_ph = [-sp, cp, 0.0];
        let ph_term = if st > 1e-300 { dph / st } else { 0.0 };
        add(scale(e_ph, -dth), scale(e_th, ph_term))
    }

    fn negated_reversed(&self, duration: f64) -> Self {
        let mut keyframes: Vec<Keyframe> = self
            .keyframes
            .iter()
            .map(|k| Keyframe { time: duration - k.time, values: k.values.iter().map(|v| -v).collect() })
            .collect();
        keyframes.reverse();
        HamiltonianGrid { n_lat: self.n_lat, n_lon: self.n_lon, keyframes }
    }
}

fn angles(p: Vec3) -> (f64, f64) {
    let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
    let th = rho.atan2(p[2]);
    let ph = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
    (th, ph)
}

/// An isotopy `{φ_t}` of area-preserving maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlowSpec {
    Rotational { profile: RadialProfile, duration: f64 },
    Hamiltonian { grid: HamiltonianGrid, duration: f64 },
    /// `R φ_t R⁻¹`.
    Conjugated { rotation: Rotation, flow: Box<FlowSpec> },
    /// Concatenation: each flow runs after the previous one has finished.
    Sequence { flows: Vec<FlowSpec> },
    /// `φ_{T g(t/T)}` with `g(s) = 3s² - 2s³`.
    Reparametrized { flow: Box<FlowSpec> },
}

impl FlowSpec {
    pub fn identity() -> Self {
        FlowSpec::Rotational { profile: RadialProfile::constant(0.0), duration: 1.0 }
    }

    pub fn rotational(profile: RadialProfile, duration: f64) -> Self {
        FlowSpec::Rotational { profile, duration }
    }

    pub fn duration(&self) -> f64 {
        match self {
            FlowSpec::Rotational { duration, .. } | FlowSpec::Hamiltonian { duration, .. } => *duration,
            FlowSpec::Conjugated { flow, .. } | FlowSpec::Reparametrized { flow } => flow.duration(),
            FlowSpec::Sequence { flows } => flows.iter().map(|f| f.duration()).sum(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FlowSpec::Rotational { profile, duration } => {
                check_duration(*duration)?;
                profile.validate()
            }
            FlowSpec::Hamiltonian { grid, duration } => {
                check_duration(*duration)?;
                grid.validate()
            }
            FlowSpec::Conjugated { rotation, flow } => {
                let m = &rotation.m;
                for i in 0..3 {
                    for j in 0..3 {
                        let d = dot(m[i], m[j]) - if i == j { 1.0 } else { 0.0 };
                        if d.abs() > 1e-9 {
                            return Err(Error::Invalid("conjugating matrix is not orthogonal".into()));
                        }
                    }
                }
                if dot(cross(m[0], m[1]), m[2]) < 0.0 {
                    return Err(Error::Invalid("conjugating matrix reverses orientation".into()));
                }
                flow.validate()
            }
            FlowSpec::Sequence { flows } => {
                if flows.is_empty() {
                    return Err(Error::Invalid("empty flow sequence".into()));
                }
                flows.iter().try_for_each(|f| f.validate())
            }
            FlowSpec::Reparametrized { flow } => flow.validate(),
        }
    }

    /// True when positions are available in closed form.
    pub fn is_exact(&self) -> bool {
        match self {
            FlowSpec::Rotational { .. } => true,
            FlowSpec::Hamiltonian { .. } => false,
            FlowSpec::Conjugated { flow, .. } | FlowSpec::Reparametrized { flow } => flow.is_exact(),
            FlowSpec::Sequence { flows } => flows.iter().all(|f| f.is_exact()),
        }
    }

    /// The same flow run for `factor` times as long (autonomous flows only
    /// in spirit; for time-dependent flows the keyframes are stretched).
    pub fn scaled_duration(&self, factor: f64) -> FlowSpec {
        match self {
            FlowSpec::Rotational { profile, duration } => {
                FlowSpec::Rotational { profile: profile.clone(), duration: duration * factor }
            }
            FlowSpec::Hamiltonian { grid, duration } => {
                let mut g = grid.clone();
                for k in &mut g.keyframes {
                    k.time *= factor;
                }
                FlowSpec::Hamiltonian { grid: g, duration: duration * factor }
            }
            FlowSpec::Conjugated { rotation, flow } => {
                FlowSpec::Conjugated { rotation: *rotation, flow: Box::new(flow.scaled_duration(factor)) }
            }
            FlowSpec::Sequence { flows } => FlowSpec::Sequence {
                flows: flows.iter().map(|f| f.scaled_duration(factor)).collect(),
            },
            FlowSpec::Reparametrized { flow } => {
                FlowSpec::Reparametrized { flow: Box::new(flow.scaled_duration(factor)) }
            }
        }
    }

    /// The reversed isotopy `t ↦ φ_{T-t} φ_T⁻¹`, ending at `φ_T⁻¹`.
    pub fn inverse(&self) -> FlowSpec {
        match self {
            FlowSpec::Rotational { profile, duration } => {
                FlowSpec::Rotational { profile: profile.negated(), duration: *duration }
            }
            FlowSpec::Hamiltonian { grid, duration } => {
                FlowSpec::Hamiltonian { grid: grid.negated_reversed(*duration), duration: *duration }
            }
            FlowSpec::Conjugated { rotation, flow } => {
                FlowSpec::Conjugated { rotation: *rotation, flow: Box::new(flow.inverse()) }
            }
            FlowSpec::Sequence { flows } => FlowSpec::Sequence {
                flows: flows.iter().rev().map(|f| f.inverse()).collect(),
            },
            FlowSpec::Reparametrized { flow } => FlowSpec::Reparametrized { flow: Box::new(flow.inverse()) },
        }
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("flow serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Ambient velocity `X_t(p)` on the unit sphere.
    pub fn velocity(&self, p: &ProjPoint, t: f64) -> Vec3 {
        match self {
            FlowSpec::Rotational { profile, .. } => {
                let r = p.chart0().map(|z| z.norm()).unwrap_or(f64::INFINITY);
                let w = 2.0 * PI * profile.omega(r);
                let v = p.to_unit_vector();
                scale(cross([0.0, 0.0, 1.0], v), w)
            }
            FlowSpec::Hamiltonian { grid, .. } => grid.field(p.to_unit_vector(), t),
            FlowSpec::Conjugated { rotation, flow } => {
                let q = rotation.inverse().apply(p);
                rotation.apply_vec(flow.velocity(&q, t))
            }
            FlowSpec::Sequence { flows } => {
                let (k, local) = locate(flows, t);
                flows[k].velocity(p, local)
            }
            FlowSpec::Reparametrized { flow } => {
                let d = flow.duration();
                if d <= 0.0 {
                    return [0.0; 3];
                }
                let s = (t / d).clamp(0.0, 1.0);
                scale(flow.velocity(p, d * smoothstep(s)), smoothstep_deriv(s))
            }
        }
    }

    /// `φ_{t1} φ_{t0}⁻¹ (p)` for `t0 ≤ t1`; `dt` is used only where the flow
    /// has to be integrated.
    pub fn advance(&self, p: &ProjPoint, t0: f64, t1: f64, dt: f64) -> Result<ProjPoint> {
        if t1 == t0 {
            return Ok(*p);
        }
        match self {
            FlowSpec::Rotational { profile, .. } => {
                let r = p.chart0().map(|z| z.norm()).unwrap_or(f64::INFINITY);
                Ok(p.rotate_about_poles(2.0 * PI * profile.omega(r) * (t1 - t0)))
            }
            FlowSpec::Hamiltonian { .. } => rk4(self, p, t0, t1, dt),
            FlowSpec::Conjugated { rotation, flow } => {
                let q = flow.advance(&rotation.inverse().apply(p), t0, t1, dt)?;
                Ok(rotation.apply(&q))
            }
            FlowSpec::Sequence { flows } => {
                let mut q = *p;
                let mut start = 0.0;
                for f in flows {
                    let end = start + f.duration();
                    let a = t0.max(start);
                    let b = t1.min(end);
                    if b > a || (b == a && f.duration() == 0.0 && a == t0) {
                        q = f.advance(&q, a - start, b - start, dt)?;
                    }
                    start = end;
                }
                Ok(q)
            }
            FlowSpec::Reparametrized { flow } => {
                let d = flow.duration();
                let g = |t: f64| d * smoothstep((t / d).clamp(0.0, 1.0));
                flow.advance(p, g(t0), g(t1), dt)
            }
        }
    }

    /// `φ_t(p)`.
    pub fn position(&self, p: &ProjPoint, t: f64, dt: f64) -> Result<ProjPoint> {
        self.advance(p, 0.0, t, dt)
    }

    /// The time-`duration` map.
    pub fn apply(&self, p: &ProjPoint) -> Result<ProjPoint> {
        self.advance(p, 0.0, self.duration(), default_dt(self))
    }
}

fn check_duration(d: f64) -> Result<()> {
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::Invalid(format!("duration {d} must be finite and nonnegative")));
    }
    Ok(())
}

fn locate(flows: &[FlowSpec], t: f64) -> (usize, f64) {
    let mut start = 0.0;
    for (k, f) in flows.iter().enumerate() {
        let end = start + f.duration();
        if t < end || k + 1 == flows.len() {
            return (k, t - start);
        }
        start = end;
    }
    (0, t)
}

/// Default integration step: `integrator_dt` times the duration.
pub fn default_dt(flow: &FlowSpec) -> f64 {
    (conventions().integrator_dt * flow.duration()).max(1e-9)
}

fn chart_field(flow: &FlowSpec, chart: Chart, c: C, t: f64) -> C {
    let p = ProjPoint::from_chart(chart, c);
    chart_velocity(&p, flow.velocity(&p, t), chart)
}

fn rk4(flow: &FlowSpec, p: &ProjPoint, t0: f64, t1: f64, dt: f64) -> Result<ProjPoint> {
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!("integration step {dt} must be positive")));
    }
    let steps = ((t1 - t0) / dt).ceil().max(1.0) as usize;
    let h = (t1 - t0) / steps as f64;
    let tol = conventions().integrator_step_tolerance;
    let mut q = *p;
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let (chart, c) = q.hemisphere_coord();
        let k1 = chart_field(flow, chart, c, t);
        let k2 = chart_field(flow, chart, c + k1 * (h / 2.0), t + h / 2.0);
        let k3 = chart_field(flow, chart, c + k2 * (h / 2.0), t + h / 2.0);
        let k4 = chart_field(flow, chart, c + k3 * h, t + h);
        let step = (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0);
        // Disagreement between the stage slopes estimates the local error.
        let err = ((k1 - k2 - k3 + k4) * (h / 6.0)).norm();
        if !step.re.is_finite() || !step.im.is_finite() || step.norm() > tol || err > tol {
            return Err(Error::IntegrationBlowup(t));
        }
        q = ProjPoint::from_chart(chart, c + step);
    }
    Ok(q)
}

/// `evolve(flow, p, t0, t1, dt)`: positions at `t0, t0 + dt, …, t1`.
pub fn evolve(flow: &FlowSpec, p: &ProjPoint, t0: f64, t1: f64, dt: f64) -> Result<Vec<ProjPoint>> {
    if !(dt > 0.0) || t1 < t0 {
        return Err(Error::Invalid("evolve needs dt > 0 and t1 >= t0".into()));
    }
    let steps = ((t1 - t0) / dt - 1e-12).ceil().max(0.0) as usize;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(*p);
    let mut q = *p;
    for k in 0..steps {
        let a = t0 + k as f64 * dt;
        let b = (t0 + (k + 1) as f64 * dt).min(t1);
        q = flow.advance(&q, a, b, dt)?;
        out.push(q);
    }
    Ok(out)
}

/// Positions of one point along the whole isotopy, queryable at any time.
#[derive(Debug, Clone)]
pub enum Trajectory {
    Exact { flow: FlowSpec, start: ProjPoint, dt: f64 },
    /// Dense samples with velocities, read back by cubic Hermite
    /// interpolation on the unit sphere.
    Dense { times: Vec<f64>, points: Vec<Vec3>, velocities: Vec<Vec3> },
}

impl Trajectory {
    pub fn new(flow: &FlowSpec, start: &ProjPoint, dt: f64) -> Result<Self> {
        if flow.is_exact() {
            return Ok(Trajectory::Exact { flow: flow.clone(), start: *start, dt });
        }
        let samples = evolve(flow, start, 0.0, flow.duration(), dt)?;
        let times: Vec<f64> = (0..samples.len()).map(|k| (k as f64 * dt).min(flow.duration())).collect();
        let velocities = samples.iter().zip(&times).map(|(p, &t)| flow.velocity(p, t)).collect();
        let points = samples.iter().map(|p| p.to_unit_vector()).collect();
        Ok(Trajectory::Dense { times, points, velocities })
    }

    pub fn at(&self, t: f64) -> Result<ProjPoint> {
        match self {
            Trajectory::Exact { flow, start, dt } => flow.position(start, t, *dt),
            Trajectory::Dense { times, points, velocities } => {
                let k = times.partition_point(|&x| x <= t).clamp(1, times.len().max(2) - 1);
                if times.len() < 2 {
                    return Ok(ProjPoint::from_unit_vector(points[0]));
                }
                let (a, b) = (k - 1, k);
                let h = times[b] - times[a];
                if h <= 0.0 {
                    return Ok(ProjPoint::from_unit_vector(points[b]));
                }
                let s = ((t - times[a]) / h).clamp(0.0, 1.0);
                let (s2, s3) = (s * s, s * s * s);
                let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
                let h10 = s3 - 2.0 * s2 + s;
                let h01 = -2.0 * s3 + 3.0 * s2;
                let h11 = s3 - s2;
                let v = add(
                    add(scale(points[a], h00), scale(velocities[a], h10 * h)),
                    add(scale(points[b], h01), scale(velocities[b], h11 * h)),
                );
                Ok(ProjPoint::from_unit_vector(v))
            }
        }
    }
}

/// Estimate of `l_p` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// `l_p = ∫_0^T (∫ |X_t|^p dμ)^{1/p} dt`, midpoint rule in time and Monte
/// Carlo in space with one set of spatial samples shared by all times.
pub fn lp_length(flow: &FlowSpec, p: f64, t_steps: usize, mc_samples: usize, seed: u64) -> Result<LengthEstimate> {
    if !(p >= 1.0) {
        return Err(Error::Invalid(format!("l_p needs p >= 1, got {p}")));
    }
    if t_steps == 0 || mc_samples == 0 {
        return Err(Error::Invalid("l_p needs positive step and sample counts".into()));
    }
    flow.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<ProjPoint> = (0..mc_samples).map(|_| crate::sphere::sample_uniform(&mut rng)).collect();
    let big_t = flow.duration();
    let h = big_t / t_steps as f64;
    let mut speeds = vec![0.0; mc_samples];
    let mut contrib = vec![0.0; mc_samples];
    let mut total = 0.0;
    for k in 0..t_steps {
        let t = (k as f64 + 0.5) * h;
        for (s, x) in speeds.iter_mut().zip(&xs) {
            *s = norm(flow.velocity(x, t)).powf(p);
        }
        let mean = speeds.iter().sum::<f64>() / mc_samples as f64;
        if mean <= 0.0 {
            continue;
        }
        let root = mean.powf(1.0 / p);
        total += h * root;
        let slope = h * root / (p * mean);
        for (c, s) in contrib.iter_mut().zip(&speeds) {
            *c += slope * s;
        }
    }
    let m = contrib.iter().sum::<f64>() / mc_samples as f64;
    let var = contrib.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (mc_samples.max(2) - 1) as f64;
    Ok(LengthEstimate { value: total, stderr: (var / mc_samples as f64).sqrt() })
}

/// `l_1` of a rotational flow by radial quadrature in the height variable:
/// `T ∫_{-1}^{1} 2π |ω̃(u)| √(1-u²) du/2`.
pub fn rotational_l1(profile: &RadialProfile, duration: f64) -> f64 {
    let f = |u: f64| {
        let w = profile.omega_tilde(u.clamp(-1.0, 1.0)).unwrap_or(0.0);
        PI * w.abs() * (1.0 - u * u).max(0.0).sqrt()
    };
    duration * quad::integrate_pieces(f, &profile.height_breaks(), 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{sample_uniform, Geodesic};

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn height_grid(n: usize) -> FlowSpec {
        FlowSpec::Hamiltonian {
            grid: HamiltonianGrid::from_fn(n, 2 * n, &[0.0], |_, p| p[2]),
            duration: 1.0,
        }
    }

    #[test]
    fn identity_flow_is_constant() {
        let p = ProjPoint::from_chart0(c(0.3, 0.8));
        let traj = evolve(&FlowSpec::identity(), &p, 0.0, 1.0, 0.1).unwrap();
        assert_eq!(traj.len(), 11);
        assert!(traj.iter().all(|q| q.approx_eq(&p, 1e-15)));
    }

    #[test]
    fn constant_rotation_closed_form() {
        let flow = FlowSpec::rotational(RadialProfile::constant(0.3), 1.0);
        for z in [c(0.2, 0.1), c(-1.5, 2.0), c(7.0, -0.3)] {
            let q = flow.apply(&ProjPoint::from_chart0(z)).unwrap().chart0().unwrap();
            let want = z * C::from_polar(1.0, 2.0 * PI * 0.3);
            assert!((q - want).norm() < 1e-12 * (1.0 + z.norm()));
            assert!((q.norm() - z.norm()).abs() < 1e-12 * (1.0 + z.norm()));
        }
        assert!(flow.apply(&ProjPoint::infinity()).unwrap().approx_eq(&ProjPoint::infinity(), 0.0));
    }

    #[test]
    fn height_hamiltonian_is_rigid_rotation() {
        let flow = height_grid(64);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 50 {
            let p = sample_uniform(&mut rng);
            if p.height().abs() > 0.97 {
                continue;
            }
            let q = flow.position(&p, 1.0, 1e-3).unwrap();
            assert!(q.approx_eq(&p.rotate_about_poles(1.0), 1e-6), "{}", q.chordal_distance(&p.rotate_about_poles(1.0)));
            checked += 1;
        }
    }

    #[test]
    fn flow_property_splits_time() {
        let flow = FlowSpec::Hamiltonian { grid: HamiltonianGrid::random(3, 24, 48, 3, 1.0), duration: 1.0 };
        let p = ProjPoint::from_chart0(c(0.4, -0.9));
        let whole = flow.advance(&p, 0.0, 1.0, 1e-3).unwrap();
        let half = flow.advance(&p, 0.0, 0.4, 1e-3).unwrap();
        let rest = flow.advance(&half, 0.4, 1.0, 1e-3).unwrap();
        assert!(whole.approx_eq(&rest, 1e-9));
    }

    #[test]
    fn hamiltonian_inverse_returns_points() {
        let flow = FlowSpec::Hamiltonian { grid: HamiltonianGrid::random(5, 24, 48, 4, 1.5), duration: 1.5 };
        let inv = flow.inverse();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let p = sample_uniform(&mut rng);
            let back = inv.apply(&flow.apply(&p).unwrap()).unwrap();
            assert!(back.approx_eq(&p, 1e-8));
        }
    }

    #[test]
    fn disjoint_rotations_commute() {
        let a = FlowSpec::rotational(RadialProfile::bump(0.5, 1.0, 1.3), 1.0);
        let b = FlowSpec::rotational(RadialProfile::bump(1.2, 2.0, -0.7), 1.0);
        let ab = FlowSpec::Sequence { flows: vec![a.clone(), b.clone()] };
        let ba = FlowSpec::Sequence { flows: vec![b, a] };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let p = sample_uniform(&mut rng);
            assert!(ab.apply(&p).unwrap().approx_eq(&ba.apply(&p).unwrap(), 1e-10));
        }
    }

    /// Spherical area enclosed by a closed polygon, as the sum of signed
    /// triangle areas from its centroid direction.
    fn polygon_area(pts: &[Vec3]) -> f64 {
        let mut o = [0.0; 3];
        for p in pts {
            o = add(o, *p);
        }
        let o = scale(o, 1.0 / norm(o));
        let mut total = 0.0;
        for k in 0..pts.len() {
            let a = pts[k];
            let b = pts[(k + 1) % pts.len()];
            let num = dot(o, cross(a, b));
            let den = 1.0 + dot(o, a) + dot(a, b) + dot(b, o);
            total += 2.0 * num.atan2(den);
        }
        total
    }

    #[test]
    fn hamiltonian_grid_preserves_cap_area() {
        let flow = FlowSpec::Hamiltonian { grid: HamiltonianGrid::random(7, 32, 64, 3, 1.0), duration: 1.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..3 {
            let center = sample_uniform(&mut rng).to_unit_vector();
            let radius: f64 = rng.random_range(0.3..0.9);
            let rot = Rotation::from_axis_angle(cross([0.0, 0.0, 1.0], center), [0.0, 0.0, 1.0f64].iter().zip(&center).map(|(a, b)| a * b).sum::<f64>().acos());
            let boundary: Vec<Vec3> = (0..4000)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / 4000.0;
                    rot.apply_vec([radius.sin() * a.cos(), radius.sin() * a.sin(), radius.cos()])
                })
                .collect();
            let moved: Vec<Vec3> = boundary
                .iter()
                .map(|v| flow.apply(&ProjPoint::from_unit_vector(*v)).unwrap().to_unit_vector())
                .collect();
            let before = polygon_area(&boundary);
            let after = polygon_area(&moved);
            assert!(((after - before) / before).abs() < 1e-4, "{before} -> {after}");
        }
    }

    #[test]
    fn flow_spec_json_round_trip_is_exact() {
        let flows = vec![
            FlowSpec::rotational(RadialProfile::height(), 1.0 / 3.0),
            FlowSpec::rotational(RadialProfile::steps(vec![0.0, 0.7, 1.9], vec![0.1, -0.3, 0.0]), 2.0),
            FlowSpec::Conjugated {
                rotation: Rotation::from_axis_angle([0.3, 0.1, 0.9], 0.77),
                flow: Box::new(FlowSpec::Hamiltonian { grid: HamiltonianGrid::random(1, 6, 8, 2, 0.5), duration: 0.5 }),
            },
        ];
        for f in flows {
            let s = serde_json::to_string(&f).unwrap();
            let back: FlowSpec = serde_json::from_str(&s).unwrap();
            assert_eq!(back, f);
            assert_eq!(back.hash(), f.hash());
        }
    }

    #[test]
    fn profile_transform_round_trip() {
        let prof = RadialProfile::Tabulated {
            breakpoints: vec![0.2, 0.9, 1.7],
            values: vec![0.5, -1.0, 0.25],
            interpolation: Interpolation::PiecewiseLinear,
        };
        let f = profile_transform(&prof);
        for r in [0.0, 0.1, 0.5, 1.0, 1.3, 3.0] {
            let u = crate::sphere::height_of_radius(r);
            assert!((f(u).unwrap() - prof.omega(r)).abs() < 1e-12);
        }
        assert!(f(1.5).is_err());
        assert_eq!(crate::sphere::height_of_radius(1.0), 0.0);
        let constant = RadialProfile::constant(0.4);
        for u in [-1.0, -0.3, 0.0, 0.8, 1.0] {
            assert_eq!(constant.omega_tilde(u).unwrap(), 0.4);
        }
        let h = RadialProfile::height();
        for u in [-1.0, -0.3, 0.0, 0.8, 1.0] {
            assert!((h.omega_tilde(u).unwrap() - u).abs() < 1e-15);
        }
    }

    #[test]
    fn profile_derivative_matches_difference_quotient() {
        for prof in [RadialProfile::bump(0.5, 1.5, 2.0), RadialProfile::height()] {
            for r in [0.6, 0.9, 1.2] {
                let fd = (prof.omega(r + 1e-6) - prof.omega(r - 1e-6)) / 2e-6;
                assert!((fd - prof.omega_deriv(r)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rotational_l1_matches_monte_carlo() {
        let prof = RadialProfile::steps(vec![0.0, 0.8, 2.0], vec![1.0, -0.5, 0.0]);
        let flow = FlowSpec::rotational(prof.clone(), 1.5);
        let est = lp_length(&flow, 1.0, 4, 200_000, 9).unwrap();
        let exact = rotational_l1(&prof, 1.5);
        assert!((est.value - exact).abs() < 3.0 * est.stderr, "{} vs {exact} ± {}", est.value, est.stderr);
        assert_eq!(lp_length(&FlowSpec::identity(), 2.0, 4, 100, 1).unwrap().value, 0.0);
    }

    #[test]
    fn lp_is_reparametrization_invariant() {
        let base = FlowSpec::Hamiltonian { grid: HamiltonianGrid::random(21, 16, 32, 3, 1.0), duration: 1.0 };
        let re = FlowSpec::Reparametrized { flow: Box::new(base.clone()) };
        let a = lp_length(&base, 2.0, 400, 2000, 4).unwrap().value;
        let b = lp_length(&re, 2.0, 400, 2000, 4).unwrap().value;
        assert!(((a - b) / a).abs() < 1e-3, "{a} vs {b}");
    }

    #[test]
    fn dense_trajectory_interpolates_integrator() {
        let flow = FlowSpec::Hamiltonian { grid: HamiltonianGrid::random(8, 24, 48, 3, 1.0), duration: 1.0 };
        let p = ProjPoint::from_chart0(c(0.2, 0.5));
        let traj = Trajectory::new(&flow, &p, 1e-2).unwrap();
        for t in [0.123, 0.5, 0.871] {
            let direct = flow.position(&p, t, 1e-3).unwrap();
            assert!(traj.at(t).unwrap().approx_eq(&direct, 1e-6));
        }
        let g = Geodesic::new(&p, &traj.at(1.0).unwrap()).unwrap();
        assert!(g.length() < PI);
    }
}
