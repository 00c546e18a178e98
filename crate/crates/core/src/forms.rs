//! Logarithmic 1-forms on `X_{n-3}(ℂ ∖ {0,1})` and their pullbacks to
//! `X_n(ℂP¹)` under the cross-ratio projection.
//!
//! `θ_ν = (1/2π) Im α_ν` with `α` one of `du_i/u_i`, `d(u_i - 1)/(u_i - 1)`,
//! `d(u_i - u_j)/(u_i - u_j)`. Pullbacks are evaluated two ways: by the chain
//! rule through the chart-0 cross-ratio, and as a sum of six logarithmic
//! derivatives of brackets in hemisphere charts. Each checks the other.

use crate::config::{basepoint, sample_configuration_with, short_path, Configuration, PathSystem, ShortPath};
use crate::conventions::conventions;
use crate::error::{Error, Result};
use crate::flows::FlowSpec;
use crate::gg::QMEstimate;
use crate::mc;
use crate::quad::integrate_pieces;
use crate::sphere::{chart_velocity, Chart, ProjPoint, Vec3};
use num_complex::Complex64 as C;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Index `ν` of a form; coordinates are numbered from 1 as `u_1 … u_{n-3}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormIndex {
    AtZero(usize),
    AtOne(usize),
    /// `i < j`; the form is symmetric in the pair.
    Pair(usize, usize),
}

impl FormIndex {
    /// The index set `I` for `X_n`, `n ≥ 4`.
    pub fn all(n: usize) -> Vec<FormIndex> {
        let k = n.saturating_sub(3);
        let mut out: Vec<FormIndex> = (1..=k).map(FormIndex::AtZero).collect();
        out.extend((1..=k).map(FormIndex::AtOne));
        for i in 1..=k {
            for j in (i + 1)..=k {
                out.push(FormIndex::Pair(i, j));
            }
        }
        out
    }

    pub fn validate(self, k: usize) -> Result<()> {
        let ok = match self {
            FormIndex::AtZero(i) | FormIndex::AtOne(i) => (1..=k).contains(&i),
            FormIndex::Pair(i, j) => i != j && (1..=k).contains(&i) && (1..=k).contains(&j),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("form index {self:?} out of range for {k} coordinates")))
        }
    }

    /// The function whose logarithmic derivative is `α_ν`, and its
    /// derivative along `v`.
    fn log_target(self, u: &[C], v: &[C]) -> (C, C) {
        let one = C::new(1.0, 0.0);
        match self {
            FormIndex::AtZero(i) => (u[i - 1], v[i - 1]),
            FormIndex::AtOne(i) => (u[i - 1] - one, v[i - 1]),
            FormIndex::Pair(i, j) => (u[i - 1] - u[j - 1], v[i - 1] - v[j - 1]),
        }
    }
}

fn check_denominator(h: C) -> Result<()> {
    let eps = conventions().eps_planar;
    if !(h.norm() >= eps) {
        return Err(Error::SingularPoint(h.norm()));
    }
    Ok(())
}

/// `θ_ν(u)(v) = (1/2π) Im α_ν(v)`.
pub fn theta_eval(nu: FormIndex, u: &[C], v: &[C]) -> Result<f64> {
    nu.validate(u.len())?;
    if v.len() != u.len() {
        return Err(Error::Invalid("tangent vector has the wrong dimension".into()));
    }
    let (h, dh) = nu.log_target(u, v);
    check_denominator(h)?;
    Ok((dh / h).im / (2.0 * PI))
}

/// Pullback `θ̃_ν` at `x` along chart-0 velocities `zdot`, by the chain rule
/// through `u_k = cr(ζ_1, ζ_2, ζ_3, ζ_{k+3})`.
pub fn pullback_chart0(nu: FormIndex, zeta: &[C], zdot: &[C]) -> Result<f64> {
    let n = zeta.len();
    if n < 4 || zdot.len() != n {
        return Err(Error::Invalid(format!("pullback needs n >= 4 matching points and velocities, got {n}")));
    }
    let (z1, z2, z3) = (zeta[0], zeta[1], zeta[2]);
    let (d1, d2, d3) = (zdot[0], zdot[1], zdot[2]);
    for (a, b) in [(z1, z3), (z2, z3)] {
        check_denominator(a - b)?;
    }
    let mut u = Vec::with_capacity(n - 3);
    let mut du = Vec::with_capacity(n - 3);
    for k in 3..n {
        let (y, dy) = (zeta[k], zdot[k]);
        check_denominator(z1 - y)?;
        check_denominator(z2 - y)?;
        let num = (z1 - z3) * (z2 - y);
        let den = (z2 - z3) * (z1 - y);
        let dnum = (d1 - d3) * (z2 - y) + (z1 - z3) * (d2 - dy);
        let dden = (d2 - d3) * (z1 - y) + (z2 - z3) * (d1 - dy);
        u.push(num / den);
        du.push((dnum * den - num * dden) / (den * den));
    }
    theta_eval(nu, &u, &du)
}

/// Chain-rule pullback with ambient velocities; every point must lie in
/// chart 0.
pub fn pullback_eval(nu: FormIndex, x: &[ProjPoint], xdot: &[Vec3]) -> Result<f64> {
    let mut zeta = Vec::with_capacity(x.len());
    let mut zdot = Vec::with_capacity(x.len());
    for (p, v) in x.iter().zip(xdot) {
        let z = p.chart0().ok_or(Error::SingularPoint(0.0))?;
        zeta.push(z);
        zdot.push(chart_velocity(p, *v, Chart::Zero));
    }
    pullback_chart0(nu, &zeta, &zdot)
}

/// The same pullback as a signed sum of six bracket log-derivatives, each
/// point written in the hemisphere chart that contains it.
pub fn pullback_eval_hemispheres(nu: FormIndex, x: &[ProjPoint], xdot: &[Vec3]) -> Result<f64> {
    let n = x.len();
    if n < 4 || xdot.len() != n {
        return Err(Error::Invalid("pullback needs n >= 4 matching points and velocities".into()));
    }
    nu.validate(n - 3)?;
    let one = C::new(1.0, 0.0);
    let zero = C::new(0.0, 0.0);
    // Homogeneous representative and its velocity.
    let reps: Vec<((C, C), (C, C))> = x
        .iter()
        .zip(xdot)
        .map(|(p, v)| {
            let (chart, c) = p.hemisphere_coord();
            let dc = chart_velocity(p, *v, chart);
            match chart {
                Chart::Zero => ((c, one), (dc, zero)),
                Chart::Infinity => ((one, c), (zero, dc)),
            }
        })
        .collect();
    let dlog = |a: usize, b: usize| -> Result<C> {
        let ((za, wa), (dza, dwa)) = reps[a];
        let ((zb, wb), (dzb, dwb)) = reps[b];
        let l = za * wb - zb * wa;
        check_denominator(l)?;
        Ok((dza * wb + za * dwb - dzb * wa - zb * dwa) / l)
    };
    let y = |k: usize| k + 2;
    let terms: Vec<(usize, usize, f64)> = match nu {
        FormIndex::AtZero(k) => vec![(0, 2, 1.0), (1, y(k), 1.0), (1, 2, -1.0), (0, y(k), -1.0)],
        FormIndex::AtOne(k) => vec![(0, 1, 1.0), (2, y(k), 1.0), (1, 2, -1.0), (0, y(k), -1.0)],
        FormIndex::Pair(i, j) => vec![
            (0, 2, 1.0),
            (0, 1, 1.0),
            (y(j), y(i), 1.0),
            (1, 2, -1.0),
            (0, y(i), -1.0),
            (0, y(j), -1.0),
        ],
    };
    let mut s = C::new(0.0, 0.0);
    for (a, b, sign) in terms {
        s += dlog(a, b)? * sign;
    }
    Ok(s.im / (2.0 * PI))
}

/// `∫_a^b |g(s)| ds` by midpoint sums, bisecting wherever `|g|` varies by
/// more than the configured fraction across a panel or the one- and
/// two-point midpoint sums disagree; accepted panels are Richardson
/// corrected.
pub fn abs_integral<F: Fn(f64) -> Result<f64>>(g: F, a: f64, b: f64) -> Result<f64> {
    const PANELS: usize = 32;
    const MAX_DEPTH: u32 = 30;
    const ABS_TOL: f64 = 1e-9;
    let tol = conventions().form_relative_variation;
    let density = ABS_TOL / (b - a).abs().max(f64::MIN_POSITIVE);
    fn panel<F: Fn(f64) -> Result<f64>>(g: &F, a: f64, b: f64, mid: f64, depth: u32, tol: f64, density: f64) -> Result<f64> {
        let h = b - a;
        let l = g(a + 0.25 * h)?.abs();
        let r = g(a + 0.75 * h)?.abs();
        let one = h * mid;
        let two = 0.5 * h * (l + r);
        let hi = l.max(r).max(mid);
        let lo = l.min(r).min(mid);
        let smooth = hi - lo <= tol * hi && (two - one).abs() <= density * h.abs() + 1e-6 * two.abs();
        if depth >= MAX_DEPTH || smooth || hi * h.abs() < 1e-16 {
            return Ok(two + (two - one) / 3.0);
        }
        let c = a + 0.5 * h;
        Ok(panel(g, a, c, l, depth + 1, tol, density)? + panel(g, c, b, r, depth + 1, tol, density)?)
    }
    let h = (b - a) / PANELS as f64;
    let mut total = 0.0;
    for k in 0..PANELS {
        let (pa, pb) = (a + k as f64 * h, a + (k + 1) as f64 * h);
        let mid = g(0.5 * (pa + pb))?.abs();
        total += panel(&g, pa, pb, mid, 0, tol, density)?;
    }
    Ok(total)
}

/// Signed `∫_a^b g(s) ds` on the same refinement rule (used for winding
/// numbers).
pub fn signed_integral<F: Fn(f64) -> Result<f64>>(g: F, a: f64, b: f64) -> Result<f64> {
    let pos = abs_integral(|s| Ok(g(s)?.max(0.0)), a, b)?;
    let neg = abs_integral(|s| Ok(g(s)?.min(0.0)), a, b)?;
    Ok(pos - neg)
}

/// `∫_γ |θ_ν|` for a path `s ↦ (γ(s), γ'(s))`, `s ∈ [0, 1]`, in
/// `X_{n-3}(ℂ ∖ {0,1})`.
pub fn abs_path_integral<P: Fn(f64) -> (Vec<C>, Vec<C>)>(nu: FormIndex, path: P) -> Result<f64> {
    abs_integral(
        |s| {
            let (u, v) = path(s);
            theta_eval(nu, &u, &v)
        },
        0.0,
        1.0,
    )
}

/// `∫_{γ'(x)} |θ̃_ν|` along the affine short path from `q` to `x`. The
/// integrand is a sum of six terms `Im(h'/h)/2π` with `h` affine in the
/// path parameter, so the value is at most `6 · π/2π = 3`.
pub fn short_path_form_bound_from(q: &Configuration, x: &Configuration, nu: FormIndex) -> Result<f64> {
    let segs = match short_path(PathSystem::Affine, q, x)? {
        ShortPath::Affine(s) => s,
        ShortPath::Geodesic(_) => unreachable!("affine system requested"),
    };
    let vel: Vec<C> = segs.iter().map(|(a, b)| b - a).collect();
    abs_integral(
        |s| {
            let z: Vec<C> = segs.iter().map(|(a, b)| a + (b - a) * s).collect();
            pullback_chart0(nu, &z, &vel)
        },
        0.0,
        1.0,
    )
}

/// Short-path bound with the standard basepoint for `x.n()` points.
pub fn short_path_form_bound(x: &Configuration, nu: FormIndex) -> Result<f64> {
    short_path_form_bound_from(&basepoint(x.n(), 0), x, nu)
}

/// `∫_{X_n} ∫_{λ(x, φ)} |θ̃_ν| dμ^{⊗n}`. The flow part is sampled in `(t, x)`
/// jointly: since `φ_t` preserves `μ`, it equals `T · E|θ̃_ν(x)(X_t(x))|`.
/// Both short paths contribute `E ∫_{γ'(x)} |θ̃_ν|` by the same invariance.
pub fn average_form_action(flow: &FlowSpec, n: usize, nu: FormIndex, samples: usize, seed: u64, workers: usize) -> Result<QMEstimate> {
    flow.validate()?;
    nu.validate(n.saturating_sub(3))?;
    let q = basepoint(n, 0);
    let duration = flow.duration();
    let values = mc::run(samples, seed, workers, |_, rng| {
        let mut redraws = 0u64;
        loop {
            let (x, _) = sample_configuration_with(rng, n)?;
            let t = rng.random_range(0.0..duration.max(f64::MIN_POSITIVE));
            let attempt = (|| -> Result<f64> {
                let v: Vec<Vec3> = x.points().iter().map(|p| flow.velocity(p, t)).collect();
                let flow_part = duration * pullback_eval_hemispheres(nu, x.points(), &v)?.abs();
                let paths = 2.0 * short_path_form_bound_from(&q, &x, nu)?;
                Ok(flow_part + paths)
            })();
            match attempt {
                Ok(v) => return Ok((v, redraws)),
                Err(Error::SingularPoint(_)) | Err(Error::NegligibleSetHit(_)) if redraws < 1000 => redraws += 1,
                Err(e) => return Err(e),
            }
        }
    })?;
    let v: Vec<f64> = values.iter().map(|x| x.0).collect();
    let s = mc::summarize(&v);
    Ok(QMEstimate {
        mean: s.mean,
        stderr: s.stderr,
        n_samples: s.n,
        seed,
        n_points: n,
        resamples: values.iter().map(|x| x.1).sum(),
    })
}

/// `∫_𝔻 dm(b)/|a - b|` for `a` in the closed unit disk, in polar
/// coordinates about `a` where the radial integral is exact.
pub fn disk_kernel_integral(a: C) -> f64 {
    let ra = a.norm_sqr();
    let reach = |phi: f64| {
        // Distance from a to the unit circle along direction phi.
        let d = C::from_polar(1.0, phi);
        let p = (a * d.conj()).re;
        -p + (p * p + 1.0 - ra).max(0.0).sqrt()
    };
    // Kinks where the chord through a is tangent to the circle.
    let t = a.arg().rem_euclid(2.0 * PI);
    let mut breaks = vec![0.0, 2.0 * PI, (t + 0.5 * PI).rem_euclid(2.0 * PI), (t + 1.5 * PI).rem_euclid(2.0 * PI)];
    breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    integrate_pieces(reach, &breaks, 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::sample_configuration;
    use crate::flows::RadialProfile;
    use crate::sphere::{ambient_velocity, Rotation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tangents(rng: &mut ChaCha8Rng, x: &[ProjPoint]) -> Vec<Vec3> {
        x.iter()
            .map(|p| {
                let v = p.to_unit_vector();
                let w = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let d = crate::sphere::dot(v, w);
                crate::sphere::sub(w, crate::sphere::scale(v, d))
            })
            .collect()
    }

    #[test]
    fn index_set_sizes() {
        assert_eq!(FormIndex::all(4).len(), 2);
        assert_eq!(FormIndex::all(6).len(), 9);
        assert!(FormIndex::Pair(2, 2).validate(3).is_err());
    }

    #[test]
    fn circle_winds_once() {
        for r in [0.1, 0.5, 3.0] {
            let path = |s: f64| {
                let u = C::from_polar(r, 2.0 * PI * s);
                (vec![u], vec![C::i() * u * 2.0 * PI])
            };
            let v = abs_path_integral(FormIndex::AtZero(1), path).unwrap();
            assert!((v - 1.0).abs() < 1e-8, "{v}");
            let unit = theta_eval(FormIndex::AtZero(1), &[C::from_polar(r, 0.3)], &[C::i() * C::from_polar(r, 0.3)]).unwrap();
            assert!((unit - 1.0 / (2.0 * PI)).abs() < 1e-15);
        }
    }

    #[test]
    fn pair_form_ignores_translation() {
        let u = [C::new(0.3, 0.2), C::new(-1.0, 0.5)];
        let w = C::new(0.7, -0.1);
        assert_eq!(theta_eval(FormIndex::Pair(1, 2), &u, &[w, w]).unwrap(), 0.0);
        assert!(matches!(theta_eval(FormIndex::AtOne(1), &[C::new(1.0, 0.0)], &[w]), Err(Error::SingularPoint(_))));
    }

    #[test]
    fn theta_matches_argument_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let u: Vec<C> = (0..3).map(|_| C::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
            let v: Vec<C> = (0..3).map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            for nu in FormIndex::all(6) {
                let h = 1e-6;
                let arg = |s: f64| {
                    let p: Vec<C> = u.iter().zip(&v).map(|(a, b)| a + b * s).collect();
                    nu.log_target(&p, &v).0.arg()
                };
                let mut d = arg(h) - arg(-h);
                if d > PI {
                    d -= 2.0 * PI;
                } else if d < -PI {
                    d += 2.0 * PI;
                }
                let fd = d / (2.0 * h) / (2.0 * PI);
                let th = theta_eval(nu, &u, &v).unwrap();
                assert!((fd - th).abs() < 1e-6 * (1.0 + th.abs()), "{nu:?} {fd} {th}");
            }
        }
    }

    #[test]
    fn segment_subtends_at_most_half_turn() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let a = C::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let b = C::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let v = abs_path_integral(FormIndex::AtZero(1), |s| (vec![a + (b - a) * s], vec![b - a])).unwrap();
            let exact = (b / a).arg().abs() / (2.0 * PI);
            assert!(v <= 0.5 + 1e-9);
            assert!((v - exact).abs() < 1e-6, "{v} {exact}");
        }
    }

    #[test]
    fn reversal_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let c: Vec<C> = (0..4).map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let path = |s: f64| {
                let u = c[0] + c[1] * s + c[2] * s * s + C::new(0.0, 0.5) * (7.0 * s).sin();
                let du = c[1] + c[2] * 2.0 * s + C::new(0.0, 3.5) * (7.0 * s).cos();
                (vec![u + 2.5, u - 2.5], vec![du, du * c[3]])
            };
            for nu in [FormIndex::AtZero(1), FormIndex::AtOne(2), FormIndex::Pair(1, 2)] {
                let f = abs_path_integral(nu, path).unwrap();
                let r = abs_path_integral(nu, |s| {
                    let (u, v) = path(1.0 - s);
                    (u, v.iter().map(|x| -x).collect())
                })
                .unwrap();
                assert!((f - r).abs() < 1e-10, "{f} {r}");
            }
        }
    }

    #[test]
    fn winding_is_quantized_and_bounded_by_abs() {
        // u(s) = 0.5 + 0.8 e^{2πi·3s} + 0.1 e^{2πi·7s} winds around both 0 and 1.
        let path = |s: f64| {
            let e3 = C::from_polar(1.0, 2.0 * PI * 3.0 * s);
            let e7 = C::from_polar(1.0, 2.0 * PI * 7.0 * s);
            let u = 0.5 + 0.8 * e3 + 0.1 * e7;
            let du = C::i() * 2.0 * PI * (2.4 * e3 + 0.7 * e7);
            (vec![u], vec![du])
        };
        for nu in [FormIndex::AtZero(1), FormIndex::AtOne(1)] {
            let signed = signed_integral(
                |s| {
                    let (u, v) = path(s);
                    theta_eval(nu, &u, &v)
                },
                0.0,
                1.0,
            )
            .unwrap();
            assert!((signed - signed.round()).abs() < 1e-6, "{signed}");
            assert_eq!(signed.round(), 3.0);
            assert!(signed.abs() <= abs_path_integral(nu, path).unwrap() + 1e-9);
        }
    }

    #[test]
    fn two_pullback_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut checked = 0;
        for _ in 0..10_000 {
            let n = rng.random_range(4..7);
            let (x, _) = sample_configuration_with(&mut rng, n).unwrap();
            let v = random_tangents(&mut rng, x.points());
            for nu in FormIndex::all(n) {
                let (Ok(a), Ok(b)) = (pullback_eval(nu, x.points(), &v), pullback_eval_hemispheres(nu, x.points(), &v)) else {
                    continue;
                };
                let scale = 1.0 + a.abs();
                assert!((a - b).abs() < 1e-8 * scale, "{nu:?}: {a} vs {b}");
                checked += 1;
            }
        }
        assert!(checked > 30_000);
    }

    #[test]
    fn mobius_directions_are_killed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let x = sample_configuration(5, rng.random()).unwrap();
            let axis = Rotation::random(&mut rng);
            let w = axis.apply_vec([0.0, 0.0, 1.0]);
            let v: Vec<Vec3> = x.points().iter().map(|p| crate::sphere::cross(w, p.to_unit_vector())).collect();
            for nu in FormIndex::all(5) {
                assert!(pullback_eval_hemispheres(nu, x.points(), &v).unwrap().abs() < 1e-9);
            }
            // Dilation about 0 is Möbius too.
            let v: Vec<Vec3> = x.points().iter().map(|p| ambient_velocity(p, p.chart0().unwrap(), Chart::Zero)).collect();
            for nu in FormIndex::all(5) {
                assert!(pullback_eval(nu, x.points(), &v).unwrap().abs() < 1e-9);
            }
        }
    }

    #[test]
    fn chain_rule_matches_cross_ratio_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let profile = RadialProfile::HeightPolynomial { coefficients: vec![0.2, 1.0, -0.5] };
        let flow = FlowSpec::rotational(profile, 1.0);
        for _ in 0..100 {
            let x = sample_configuration(4, rng.random()).unwrap();
            let t = rng.random_range(0.0..1.0);
            let v: Vec<Vec3> = x.points().iter().map(|p| flow.velocity(p, t)).collect();
            let h = 1e-6;
            let u_at = |dt: f64| -> C {
                let p: Vec<ProjPoint> = x.points().iter().map(|p| flow.advance(p, t, t + dt, 1e-3).unwrap()).collect();
                crate::sphere::moduli_projection(&p).unwrap()[0]
            };
            let (up, um) = (u_at(h), u_at(-h));
            let u0 = crate::sphere::moduli_projection(x.points()).unwrap()[0];
            let fd = ((up / u0).ln() - (um / u0).ln()).im / (2.0 * h) / (2.0 * PI);
            let th = pullback_eval(FormIndex::AtZero(1), x.points(), &v).unwrap();
            assert!((fd - th).abs() < 1e-6 * (1.0 + th.abs()), "{fd} {th}");
        }
    }

    #[test]
    fn short_path_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = basepoint(5, 0);
        assert_eq!(short_path_form_bound_from(&q, &q, FormIndex::AtZero(1)).unwrap(), 0.0);
        let mut worst: f64 = 0.0;
        for _ in 0..300 {
            let (x, _) = sample_configuration_with(&mut rng, 5).unwrap();
            for nu in FormIndex::all(5) {
                if let Ok(v) = short_path_form_bound(&x, nu) {
                    worst = worst.max(v);
                }
            }
        }
        assert!(worst <= 3.0 + 1e-3 && worst > 0.3, "{worst}");
    }

    #[test]
    fn near_diagonal_configurations_stay_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let (x, _) = sample_configuration_with(&mut rng, 5).unwrap();
            let mut pts = x.points().to_vec();
            let z = pts[0].chart0().unwrap();
            pts[3] = ProjPoint::from_chart0(z + C::from_polar(2e-4, rng.random_range(0.0..6.0)));
            let Ok(x) = Configuration::new(pts) else { continue };
            for nu in FormIndex::all(5) {
                if let Ok(v) = short_path_form_bound(&x, nu) {
                    assert!(v <= 3.0 + 1e-3, "{v}");
                }
            }
        }
    }

    #[test]
    fn kernel_is_uniformly_bounded() {
        assert!((disk_kernel_integral(C::new(0.0, 0.0)) - 2.0 * PI).abs() < 1e-9);
        for k in 0..=20 {
            let a = C::from_polar(k as f64 / 20.0, 0.7 * k as f64);
            let v = disk_kernel_integral(a);
            assert!(v <= 8.0 * PI && v >= 4.0 - 1e-9, "{v}");
        }
        // On the boundary the integral is 4.
        assert!((disk_kernel_integral(C::new(1.0, 0.0)) - 4.0).abs() < 1e-8);
    }

    #[test]
    fn identity_flow_action_is_short_paths_only() {
        let e = average_form_action(&FlowSpec::identity(), 4, FormIndex::AtZero(1), 300, 1, 1).unwrap();
        assert!(e.mean <= 6.0 && e.mean > 0.0);
    }

    #[test]
    fn hemisphere_products_partition_the_average() {
        // E|θ̃(x)(v)| = Σ_ε 2^{-n} E[· | x ∈ H_ε] with rotations as tangents.
        let n = 4;
        let nu = FormIndex::AtOne(1);
        let flow = FlowSpec::rotational(RadialProfile::HeightPolynomial { coefficients: vec![0.0, 1.0] }, 1.0);
        let value = |x: &[ProjPoint]| -> f64 {
            let v: Vec<Vec3> = x.iter().map(|p| flow.velocity(p, 0.0)).collect();
            pullback_eval_hemispheres(nu, x, &v).map(|t| t.abs()).unwrap_or(0.0)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let total: Vec<f64> = (0..8000).map(|_| value(sample_configuration_with(&mut rng, n).unwrap().0.points())).collect();
        let whole = mc::summarize(&total);
        let mut split = 0.0;
        let mut var = 0.0;
        for eps in 0..(1u32 << n) {
            let vals: Vec<f64> = (0..1000)
                .map(|_| {
                    let pts: Vec<ProjPoint> = (0..n)
                        .map(|a| {
                            let p = crate::sphere::sample_uniform(&mut rng);
                            let north = p.height() >= 0.0;
                            if north == (eps >> a & 1 == 0) { p } else { p.antipode() }
                        })
                        .collect();
                    value(&pts)
                })
                .collect();
            let s = mc::summarize(&vals);
            split += s.mean / (1u32 << n) as f64;
            var += (s.stderr / (1u32 << n) as f64).powi(2);
        }
        let err = (var + whole.stderr.powi(2)).sqrt();
        assert!((split - whole.mean).abs() < 4.0 * err, "{split} {} {err}", whole.mean);
    }
}
