//! The end-to-end acceptance checks, shared by `sphere-qm verify` and the
//! `acceptance` integration test. Each check returns a report line; none of
//! them panics on failure.

use crate::braids::{extract_braid, planarize, BraidWord};
use crate::config::{basepoint, sample_configuration_with, trace_loop, PathSystem};
use crate::error::{Error, Result};
use crate::flows::{lp_length, rotational_l1, FlowSpec, HamiltonianGrid, RadialProfile};
use crate::forms::{short_path_form_bound, FormIndex};
use crate::gg::{
    average_word_norm, build_embedding, embedding_phi_estimates, gg_estimate, qm_defect_probe, sign_qm_closed_form,
    BaseInvariant, EstimateOptions,
};
use crate::invariants::{closure_signature, goeritz_signature, s_quasimorphism, Shading};
use crate::mc::sample_rng;
use crate::sphere::{cross_ratio_unchecked, moduli_projection, sample_uniform, Mobius, ProjPoint};
use num_complex::Complex64 as C;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

/// Sample sizes: `Full` is the stated suite, `Quick` a smaller one with the
/// same tolerances in units of standard error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Full,
    Quick,
}

impl Scale {
    fn pick(self, full: usize, quick: usize) -> usize {
        match self {
            Scale::Full => full,
            Scale::Quick => quick,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:>2} {} ({:.1}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

/// Seed used by `sphere-qm verify` and the integration test.
pub const DEFAULT_SEED: u64 = 1;

pub const NAMES: [&str; 10] = [
    "closed-form Sign4 reproduction",
    "linearity in t",
    "short-path bound",
    "co-area identity",
    "signature oracle equivalence",
    "linear word-norm growth",
    "embedding validation",
    "cross-ratio identities",
    "quasimorphism structure",
    "Jensen ordering of lengths",
];

/// Runs criterion `id` (1-based).
pub fn run_criterion(id: u32, scale: Scale, seed: u64) -> CriterionReport {
    let start = Instant::now();
    let outcome = match id {
        1 => closed_form_reproduction(scale, seed),
        2 => linearity_in_time(scale, seed),
        3 => short_path_bound(scale, seed),
        4 => co_area_identity(scale, seed),
        5 => signature_oracle(scale),
        6 => word_norm_growth(scale, seed),
        7 => embedding_validation(scale, seed),
        8 => cross_ratio_identities(scale, seed),
        9 => quasimorphism_structure(scale, seed),
        10 => jensen_ordering(scale, seed),
        _ => Err(Error::Invalid(format!("no criterion {id}"))),
    };
    let (passed, detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionReport {
        id,
        name: NAMES.get(id as usize - 1).copied().unwrap_or("unknown").to_string(),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_all(scale: Scale, seed: u64) -> Vec<CriterionReport> {
    (1..=10).map(|id| run_criterion(id, scale, seed)).collect()
}

type Outcome = Result<(bool, String)>;

/// The homogenized estimator used for every `Sign` comparison.
pub fn sign_options(power: u32) -> EstimateOptions {
    EstimateOptions { power, cancel_offset: true, ..Default::default() }
}

/// Time multiplier of the homogenized estimator at unit duration.
pub const SIGN_POWER: u32 = 16;

pub fn u_profile() -> RadialProfile {
    RadialProfile::HeightPolynomial { coefficients: vec![0.0, 1.0] }
}

pub fn two_step_profile() -> RadialProfile {
    RadialProfile::steps(vec![0.0, 1.0, 2.0], vec![1.0, -1.0, 0.0])
}

fn closed_form_reproduction(scale: Scale, seed: u64) -> Outcome {
    let samples = scale.pick(10_000, 2_000);
    let start = Instant::now();
    let cases = [("u", u_profile()), ("two-step", two_step_profile()), ("constant", RadialProfile::constant(0.5))];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, profile) in cases {
        let exact = sign_qm_closed_form(&profile, 2)?;
        let flow = FlowSpec::rotational(profile, 1.0);
        let e = gg_estimate(&flow, BaseInvariant::SRaw, 4, samples, seed, &sign_options(SIGN_POWER))?;
        let z = e.z_score(exact);
        ok &= z.abs() <= 3.0;
        parts.push(format!("{name}: {:.4}±{:.4} vs {:.4} (z={z:+.2})", e.mean, e.stderr, exact));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs <= 900.0;
    Ok((ok, format!("{}; {secs:.0}s", parts.join("; "))))
}

fn linearity_in_time(scale: Scale, seed: u64) -> Outcome {
    let samples = scale.pick(4_000, 1_000);
    let profile = u_profile();
    let exact = sign_qm_closed_form(&profile, 2)?;
    let mut pts = Vec::new();
    for (k, t) in [1.0f64, 2.0, 4.0, 8.0].into_iter().enumerate() {
        let flow = FlowSpec::rotational(profile.clone(), t);
        let e = gg_estimate(&flow, BaseInvariant::SRaw, 4, samples, seed.wrapping_add(k as u64), &sign_options(SIGN_POWER))?;
        pts.push((t, e.mean, e.stderr));
    }
    // Weighted least squares through the origin.
    let sw: f64 = pts.iter().map(|(t, _, s)| t * t / (s * s)).sum();
    let slope = pts.iter().map(|(t, y, s)| t * y / (s * s)).sum::<f64>() / sw;
    let slope_err = sw.recip().sqrt();
    let mut ok = (slope - exact).abs() <= 3.0 * slope_err;
    let mut parts = vec![format!("slope {slope:.4}±{slope_err:.4} vs {exact:.4}")];
    for (t, y, s) in &pts {
        let r = y - slope * t;
        let err = (s * s + (t * slope_err).powi(2)).sqrt();
        ok &= r.abs() <= 3.0 * err;
        parts.push(format!("t={t}: {y:.4}±{s:.4}"));
    }
    Ok((ok, parts.join("; ")))
}

fn short_path_bound(scale: Scale, seed: u64) -> Outcome {
    let configs = scale.pick(10_000, 2_000);
    let start = Instant::now();
    let mut rng = sample_rng(seed, 3);
    let n = 5;
    let mut worst: f64 = 0.0;
    let mut redrawn = 0;
    let mut done = 0;
    // A configuration whose short path meets a singular point lies in the
    // negligible set and is redrawn as a whole.
    while done < configs {
        let (x, _) = sample_configuration_with(&mut rng, n)?;
        let mut values = Vec::new();
        for nu in FormIndex::all(n) {
            match short_path_form_bound(&x, nu) {
                Ok(v) => values.push(v),
                Err(e) if e.is_resample() || matches!(e, Error::SingularPoint(_)) => break,
                Err(e) => return Err(e),
            }
        }
        if values.len() < FormIndex::all(n).len() {
            redrawn += 1;
            continue;
        }
        worst = values.into_iter().fold(worst, f64::max);
        done += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst <= 3.0 + 1e-3 && secs <= 120.0;
    Ok((ok, format!("max {worst:.4} over {configs} configurations x {} forms ({redrawn} redrawn); {secs:.0}s", FormIndex::all(n).len())))
}

fn co_area_identity(scale: Scale, seed: u64) -> Outcome {
    let loops = scale.pick(100, 30);
    let directions = 2048;
    let n = 5;
    let flow = FlowSpec::rotational(u_profile(), 2.0);
    let q = basepoint(n, 0);
    let mut rng = sample_rng(seed, 4);
    let mut worst: f64 = 0.0;
    let mut traced = 0;
    while traced < loops {
        let (x, _) = sample_configuration_with(&mut rng, n)?;
        let lp = match trace_loop(&flow, &x, &q, PathSystem::Geodesic, 1e-3) {
            Ok(lp) => lp,
            Err(e) if e.is_resample() => continue,
            Err(e) => return Err(e),
        };
        let planar = planarize(&lp)?;
        let m = planar.strands();
        let mut sum = vec![vec![0.0; m]; m];
        let mut used = 0usize;
        let offset: f64 = rng.random();
        for k in 0..directions {
            let theta = 2.0 * PI * (k as f64 + offset) / directions as f64;
            match extract_braid(&planar, theta) {
                Ok(d) => {
                    let c = d.crossing_counts(m);
                    for i in 0..m {
                        for j in 0..m {
                            sum[i][j] += c[i][j] as f64;
                        }
                    }
                    used += 1;
                }
                Err(Error::NonGenericDirection(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let avg = sum[i][j] / used as f64;
                let exact = planar.abs_winding(i, j);
                let rel = if exact == 0.0 { avg } else { (avg - exact).abs() / exact };
                worst = worst.max(rel);
            }
        }
        traced += 1;
    }
    Ok((worst <= 0.02, format!("max relative deviation {worst:.4} over {loops} loops, {directions} directions each")))
}

/// Compares the Seifert and Goeritz signatures on every word up to
/// `max_len` letters on 2 and 3 strands; returns the number of words.
pub fn exhaustive_signature_check(max_len: usize) -> std::result::Result<usize, BraidWord> {
    let mut count = 0;
    for m in 2..=3usize {
        let alphabet: Vec<i32> = (1..m as i32).flat_map(|g| [g, -g]).collect();
        let k = alphabet.len();
        for len in 0..=max_len {
            for mut code in 0..k.pow(len as u32) {
                let letters = (0..len)
                    .map(|_| {
                        let a = alphabet[code % k];
                        code /= k;
                        a
                    })
                    .collect();
                let w = BraidWord::new(m, letters).expect("valid letters");
                let s = closure_signature(&w);
                if s != goeritz_signature(&w, Shading::OddGaps) || s != goeritz_signature(&w, Shading::EvenGaps) {
                    return Err(w);
                }
                count += 1;
            }
        }
    }
    Ok(count)
}

fn signature_oracle(_scale: Scale) -> Outcome {
    let anchors = [("2: 1 1 1", -2), ("2: 1 1", -1), ("2: 1", 0)];
    let mut ok = true;
    for (w, want) in anchors {
        let b: BraidWord = w.parse()?;
        ok &= closure_signature(&b) == want && goeritz_signature(&b, Shading::OddGaps) == want;
    }
    match exhaustive_signature_check(8) {
        Ok(n) => Ok((ok, format!("{n} words agree; trefoil -2, Hopf -1, unknot 0 {}", if ok { "hold" } else { "FAILED" }))),
        Err(w) => Ok((false, format!("mismatch on {w}"))),
    }
}

fn word_norm_growth(scale: Scale, seed: u64) -> Outcome {
    let samples = scale.pick(2_000, 400);
    let profile = u_profile();
    let c = 4.0;
    let opts = EstimateOptions::default();
    let run = |offset: u64| -> Result<Vec<(f64, f64, f64, f64)>> {
        (1..=20u64)
            .map(|t| {
                let flow = FlowSpec::rotational(profile.clone(), t as f64);
                let w = average_word_norm(&flow, 4, samples, seed.wrapping_add(offset + t), c, &opts)?;
                Ok((t as f64, rotational_l1(&profile, t as f64), w.mean, w.stderr))
            })
            .collect()
    };
    let pts = run(0)?;
    // Affine fit W' = A l1 + B, raised to an upper envelope.
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.2).sum::<f64>() / n;
    let a = pts.iter().map(|p| (p.1 - mx) * (p.2 - my)).sum::<f64>() / pts.iter().map(|p| (p.1 - mx).powi(2)).sum::<f64>();
    let b = my - a * mx + pts.iter().map(|p| p.2 - my - a * (p.1 - mx)).fold(f64::NEG_INFINITY, f64::max);
    let margin_ok = a.is_finite() && a >= 0.0 && pts.iter().all(|p| a * p.1 + b - p.2 >= -1e-9);

    let raw: Vec<(f64, f64, f64)> = pts.iter().map(|p| (p.0, p.2 / p.1, p.3 / p.1)).collect();
    let (raw_slope, raw_err) = weighted_slope(&raw);

    // The return short path leaves a bounded offset B, so W'/l1 ≈ A + B/l1
    // falls even for exactly linear growth. Take B from an independent run
    // and test the offset-free ratio for a trend in either direction.
    let calib: Vec<(f64, f64, f64)> = run(1000)?.iter().map(|p| (p.1, p.2, p.3)).collect();
    let (_, b_hat, b_err) = weighted_line(&calib);
    let net: Vec<(f64, f64, f64)> = pts.iter().map(|p| (p.0, (p.2 - b_hat) / p.1, p.3 / p.1)).collect();
    let (net_slope, net_stat) = weighted_slope(&net);
    let inv: Vec<(f64, f64, f64)> = pts.iter().map(|p| (p.0, 1.0 / p.1, p.3 / p.1)).collect();
    let net_err = net_stat.hypot(b_err * weighted_slope(&inv).0);

    let ok = margin_ok && raw_slope <= 2.0 * raw_err && net_slope.abs() <= 2.0 * net_err;
    Ok((
        ok,
        format!(
            "W' <= {a:.3} l1 + {b:.3}; raw ratio {:.3} -> {:.3} trend {raw_slope:+.5}±{raw_err:.5}; \
             offset {b_hat:.3}±{b_err:.3}, net ratio {:.3} -> {:.3} trend {net_slope:+.5}±{net_err:.5}",
            raw[0].1,
            raw[raw.len() - 1].1,
            net[0].1,
            net[net.len() - 1].1
        ),
    ))
}

/// Weighted least-squares line `y = a x + b`; returns `(a, b, stderr of b)`.
fn weighted_line(pts: &[(f64, f64, f64)]) -> (f64, f64, f64) {
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, e) in pts {
        let w = 1.0 / (e * e).max(1e-300);
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = s * sxx - sx * sx;
    ((s * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det, (sxx / det).sqrt())
}

/// Weighted least-squares slope of `y` against `x` with standard errors.
fn weighted_slope(pts: &[(f64, f64, f64)]) -> (f64, f64) {
    let w: Vec<f64> = pts.iter().map(|p| 1.0 / (p.2 * p.2).max(1e-300)).collect();
    let sw: f64 = w.iter().sum();
    let mx = pts.iter().zip(&w).map(|(p, w)| w * p.0).sum::<f64>() / sw;
    let my = pts.iter().zip(&w).map(|(p, w)| w * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().zip(&w).map(|(p, w)| w * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().zip(&w).map(|(p, w)| w * (p.0 - mx) * (p.1 - my)).sum();
    (sxy / sxx, sxx.recip().sqrt())
}

fn embedding_validation(scale: Scale, seed: u64) -> Outcome {
    let samples = scale.pick(10_000, 2_000);
    let spec = build_embedding(2, seed)?;
    let mut ok = spec.condition < 1e6;
    let mut parts = vec![format!("cond {:.1}", spec.condition)];
    for j in 0..spec.d {
        let est = embedding_phi_estimates(&spec, j, 1.0, samples, seed.wrapping_add(j as u64), &sign_options(SIGN_POWER))?;
        for (i, e) in est.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            ok &= e.z_score(target).abs() <= 3.0;
            parts.push(format!("Phi{}(f{}) = {:.3}±{:.3}", i + 1, j + 1, e.mean, e.stderr));
        }
    }
    Ok((ok, parts.join("; ")))
}

fn cross_ratio_identities(scale: Scale, seed: u64) -> Outcome {
    let tuples = scale.pick(10_000, 10_000);
    let mut rng = sample_rng(seed, 8);
    let mut worst_id: f64 = 0.0;
    let mut worst_mob: f64 = 0.0;
    let one = C::new(1.0, 0.0);
    for _ in 0..tuples {
        let x: Vec<ProjPoint> = (0..5).map(|_| sample_uniform(&mut rng)).collect();
        let l = |a: usize, b: usize| crate::sphere::bracket(&x[a], &x[b]);
        let cr = |a, b, c, d| cross_ratio_unchecked(&x[a], &x[b], &x[c], &x[d]);
        // cr - 1 = l12 l34 / (l23 l14).
        let lhs = cr(0, 1, 2, 3) - one;
        let rhs = l(0, 1) * l(2, 3) / (l(1, 2) * l(0, 3));
        worst_id = worst_id.max((lhs - rhs).norm() / (1.0 + lhs.norm()));
        // cr(x1,x2,x3,x4) - cr(x1,x2,x3,x5) = l13 l12 l54 / (l23 l14 l15).
        let lhs = cr(0, 1, 2, 3) - cr(0, 1, 2, 4);
        let rhs = l(0, 2) * l(0, 1) * l(4, 3) / (l(1, 2) * l(0, 3) * l(0, 4));
        worst_id = worst_id.max((lhs - rhs).norm() / (1.0 + lhs.norm()));
        let m = loop {
            let c = |r: &mut rand_chacha::ChaCha8Rng| C::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
            if let Ok(m) = Mobius::new(c(&mut rng), c(&mut rng), c(&mut rng), c(&mut rng)) {
                break m;
            }
        };
        let y: Vec<ProjPoint> = x.iter().map(|p| m.apply(p)).collect();
        let (Ok(a), Ok(b)) = (moduli_projection(&x), moduli_projection(&y)) else { continue };
        for (u, v) in a.iter().zip(&b) {
            worst_mob = worst_mob.max((u - v).norm() / (1.0 + u.norm()));
        }
    }
    let ok = worst_id <= 1e-10 && worst_mob <= 1e-8;
    Ok((ok, format!("identities {worst_id:.1e}, Mobius invariance {worst_mob:.1e} over {tuples} tuples")))
}

fn quasimorphism_structure(scale: Scale, seed: u64) -> Outcome {
    let samples = scale.pick(2_000, 500);
    let phi = FlowSpec::rotational(u_profile(), 1.0);
    let psi = FlowSpec::rotational(RadialProfile::bump(1.0, 1.5, 1.0), 1.0);
    let report = qm_defect_probe(BaseInvariant::SRaw, 4, &[(phi, psi)], samples, seed, &sign_options(SIGN_POWER))?;
    let e = report.entries[0];
    let additive = e.defect.abs() <= 3.0 * e.stderr;
    let depth = crate::conventions::conventions().homogenization_depth;
    let mut center = 0.0f64;
    for m in 2..=6 {
        center = center.max(s_quasimorphism(&BraidWord::full_twist(m), depth)?.value.abs());
    }
    let mut rng = sample_rng(seed, 9);
    // Two or three points leave at most the two fixed strands 0 and 1, so
    // every class is a pure 2-strand word or trivial.
    let mut small: f64 = 0.0;
    for _ in 0..200 {
        let len = rng.random_range(0..12usize);
        let w = BraidWord::new(2, (0..len).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect())?;
        let w = if w.is_pure() { w } else { w.concat(&"2: 1".parse()?)? };
        small = small.max(s_quasimorphism(&w, depth)?.value.abs());
        small = small.max(s_quasimorphism(&BraidWord::identity(1), depth)?.value.abs());
    }
    let ok = additive && center <= 1e-9 && small <= 1e-9;
    Ok((
        ok,
        format!(
            "defect {:.4}±{:.4} (product {:.4}, parts {:.4} + {:.4}); max |s(Δ²)| {center:.1e}; max |s| on 1-2 strands {small:.1e}",
            e.defect, e.stderr, e.product, e.first, e.second
        ),
    ))
}

fn jensen_ordering(scale: Scale, seed: u64) -> Outcome {
    let flows = 20;
    let mc = scale.pick(2_000, 500);
    let mut ok = true;
    let mut worst = f64::INFINITY;
    for k in 0..flows {
        let grid = HamiltonianGrid::random(seed.wrapping_add(k), 12, 24, 4, 1.0);
        let flow = FlowSpec::Hamiltonian { grid, duration: 1.0 };
        let l1 = lp_length(&flow, 1.0, 40, mc, seed + k)?;
        for p in [1.5, 2.0, 3.0] {
            let lp = lp_length(&flow, p, 40, mc, seed + k)?;
            let err = (l1.stderr.powi(2) + lp.stderr.powi(2)).sqrt();
            ok &= l1.value <= lp.value + 3.0 * err;
            worst = worst.min(lp.value - l1.value);
        }
    }
    Ok((ok, format!("{flows} random flows; min l_p - l_1 = {worst:.3e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_enumeration_counts() {
        // 2 strands: 2^0 + … + 2^3 = 15; 3 strands: 4^0 + … + 4^3 = 85.
        assert_eq!(exhaustive_signature_check(3).unwrap(), 100);
    }

    #[test]
    fn quick_cheap_criteria_pass() {
        for id in [5, 8] {
            let r = run_criterion(id, Scale::Quick, 1);
            assert!(r.passed, "{r}");
        }
    }
}
