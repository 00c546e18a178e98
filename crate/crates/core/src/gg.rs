//! The averaging construction: braids of configurations carried by a flow,
//! Monte Carlo averages of braid invariants, the closed form for rotational
//! flows, and the embedding of `ℝ^d`.

use crate::braids::{choose_direction, extract_braid, planarize, BraidWord};
use crate::config::{basepoint, sample_configuration_with, trace_loop, Configuration, PathSystem};
use crate::conventions::conventions;
use crate::error::{Error, Result};
use crate::flows::{default_dt, lp_length, FlowSpec, RadialProfile};
use crate::invariants::{closure_signature, s_quasimorphism, s_raw};
use crate::mc;
use crate::quad::integrate_pieces;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Braid invariant averaged over configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseInvariant {
    /// Homogenized `s̄` of the braid (powers up to the homogenization depth).
    SBar,
    /// `sign − (sign̄(Δ²)/lk(Δ²)) lk`, bounded distance from `s̄`.
    SRaw,
    /// Signature of the closure.
    Signature,
    /// Exponent sum.
    Lk,
}

impl BaseInvariant {
    pub fn evaluate(self, w: &BraidWord) -> Result<f64> {
        match self {
            BaseInvariant::SBar => Ok(s_quasimorphism(w, conventions().homogenization_depth)?.value),
            BaseInvariant::SRaw => s_raw(w),
            BaseInvariant::Signature => Ok(closure_signature(w) as f64),
            BaseInvariant::Lk => Ok(w.exponent_sum() as f64),
        }
    }
}

/// Knobs shared by the configuration-space estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub path_system: PathSystem,
    /// Integration step for non-exact flows; `None` uses the default.
    pub dt: Option<f64>,
    /// Evaluate on `φ^k` and divide by `k`: the time-homogenized value.
    pub power: u32,
    /// Use `(r(φ^{2k}) - r(φ^k))/k` on the same configuration, which
    /// cancels the offset of `r(φ^k)` that is constant in `k`.
    pub cancel_offset: bool,
    pub workers: usize,
    /// Seed of the basepoint configuration `q`.
    pub basepoint_seed: u64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions { path_system: PathSystem::Geodesic, dt: None, power: 1, cancel_offset: false, workers: 0, basepoint_seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QMEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub n_points: usize,
    /// Configurations redrawn after landing in the negligible set.
    pub resamples: u64,
}

impl QMEstimate {
    fn from_values(values: &[(f64, u64)], seed: u64, n_points: usize) -> Self {
        let v: Vec<f64> = values.iter().map(|x| x.0).collect();
        let s = mc::summarize(&v);
        QMEstimate {
            mean: s.mean,
            stderr: s.stderr,
            n_samples: s.n,
            seed,
            n_points,
            resamples: values.iter().map(|x| x.1).sum(),
        }
    }

    /// `EstimateUnstable` when the error bar exceeds the value.
    pub fn require_stable(self) -> Result<Self> {
        if self.stderr > self.mean.abs() {
            return Err(Error::EstimateUnstable { mean: self.mean, stderr: self.stderr });
        }
        Ok(self)
    }

    /// Number of standard errors separating the estimate from `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.stderr.max(1e-300)
    }
}

/// `φ^k` as a flow: the duration scaled for autonomous rotations, otherwise
/// `k` copies in sequence.
pub fn flow_power(flow: &FlowSpec, k: u32) -> FlowSpec {
    match flow {
        FlowSpec::Rotational { .. } => flow.scaled_duration(k as f64),
        _ if k == 1 => flow.clone(),
        _ => FlowSpec::Sequence { flows: vec![flow.clone(); k as usize] },
    }
}

const MAX_REDRAWS: u64 = 1000;

/// Redraws `x ~ μ^{⊗n}` until `f(x)` succeeds; returns the value and the
/// number of redraws.
pub fn with_redraws<R: Rng + ?Sized, T>(
    rng: &mut R,
    n: usize,
    mut f: impl FnMut(&Configuration, &mut R) -> Result<T>,
) -> Result<(T, u64)> {
    let mut redraws = 0;
    loop {
        let (x, _) = sample_configuration_with(rng, n)?;
        match f(&x, rng) {
            Ok(v) => return Ok((v, redraws)),
            Err(e) if e.is_resample() => {
                redraws += 1;
                if redraws >= MAX_REDRAWS {
                    return Err(Error::SamplerStuck(redraws));
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// The pure braid of `λ(x, φ)` read in a random generic direction.
pub fn loop_braid<R: Rng + ?Sized>(
    flow: &FlowSpec,
    x: &Configuration,
    q: &Configuration,
    system: PathSystem,
    dt: f64,
    rng: &mut R,
) -> Result<BraidWord> {
    let lp = trace_loop(flow, x, q, system, dt)?;
    let planar = planarize(&lp)?;
    for _ in 0..conventions().direction_retry_budget {
        let theta = rng.random_range(0.0..2.0 * PI);
        match extract_braid(&planar, theta) {
            Ok(d) => {
                if !d.word.is_pure() {
                    return Err(Error::Invalid(format!("closed loop produced a non-pure braid {}", d.word)));
                }
                return Ok(d.word);
            }
            Err(Error::NonGenericDirection(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::DirectionSearchExhausted(conventions().direction_retry_budget))
}

fn check_points(n: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::Invalid(format!("need at least 4 points, got {n}")));
    }
    Ok(())
}

/// `Φ(φ) = ∫ r([λ(x, φ)]) dμ^{⊗n}` estimated by Monte Carlo. With
/// `opts.power = k > 1` the value is `Φ(φ^k)/k`.
pub fn gg_estimate(
    flow: &FlowSpec,
    base: BaseInvariant,
    n: usize,
    samples: usize,
    seed: u64,
    opts: &EstimateOptions,
) -> Result<QMEstimate> {
    check_points(n)?;
    flow.validate()?;
    if opts.power == 0 {
        return Err(Error::Invalid("power must be positive".into()));
    }
    let f = flow_power(flow, opts.power);
    let dt = opts.dt.unwrap_or_else(|| default_dt(flow));
    let f2 = opts.cancel_offset.then(|| flow_power(flow, 2 * opts.power));
    let q = basepoint(n, opts.basepoint_seed);
    let k = opts.power as f64;
    let values = mc::run(samples, seed, opts.workers, |_, rng| {
        with_redraws(rng, n, |x, rng| {
            let v = base.evaluate(&loop_braid(&f, x, &q, opts.path_system, dt, rng)?)?;
            match &f2 {
                Some(f2) => Ok((base.evaluate(&loop_braid(f2, x, &q, opts.path_system, dt, rng)?)? - v) / k),
                None => Ok(v / k),
            }
        })
    })?;
    Ok(QMEstimate::from_values(&values, seed, n))
}

/// `(n/2) ∫_{-1}^{1} (u^{2n-1} - u) ω̃(u) du`: the homogenized `Sign_{2n}`
/// of the rotation `f_ω`.
pub fn sign_qm_closed_form(profile: &RadialProfile, n: usize) -> Result<f64> {
    profile.validate()?;
    if n < 2 {
        return Err(Error::Invalid(format!("closed form needs n >= 2, got {n}")));
    }
    let e = 2 * n as i32 - 1;
    let breaks = profile.height_breaks();
    let f = |u: f64| (u.powi(e) - u) * profile.omega_tilde(u.clamp(-1.0, 1.0)).unwrap_or(f64::NAN);
    Ok(0.5 * n as f64 * integrate_pieces(f, &breaks, conventions().closed_form_abs_tol))
}

/// `W'(φ)`: average length of the reduced word read from `λ(x, φ)` in a
/// verified direction (affine short paths).
pub fn average_word_norm(flow: &FlowSpec, n: usize, samples: usize, seed: u64, c: f64, opts: &EstimateOptions) -> Result<QMEstimate> {
    check_points(n)?;
    flow.validate()?;
    let dt = opts.dt.unwrap_or_else(|| default_dt(flow));
    let q = basepoint(n, opts.basepoint_seed);
    let values = mc::run(samples, seed, opts.workers, |_, rng| {
        with_redraws(rng, n, |x, rng| {
            let lp = trace_loop(flow, x, &q, PathSystem::Affine, dt)?;
            let (_, d) = choose_direction(&planarize(&lp)?, c, rng)?;
            Ok(d.word.free_reduce().len() as f64)
        })
    })?;
    Ok(QMEstimate::from_values(&values, seed, n))
}

/// `W'` together with `l_1` of the same flow, for ratio reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WordNormReport {
    pub word_norm: QMEstimate,
    pub l1: f64,
    pub l1_stderr: f64,
}

pub fn word_norm_report(flow: &FlowSpec, n: usize, samples: usize, seed: u64, c: f64, opts: &EstimateOptions) -> Result<WordNormReport> {
    let word_norm = average_word_norm(flow, n, samples, seed, c, opts)?;
    let l = lp_length(flow, 1.0, 200, 2000, seed)?;
    Ok(WordNormReport { word_norm, l1: l.value, l1_stderr: l.stderr })
}

/// Data of the embedding `ℝ^d → 𝒢`: bump profiles on disjoint annuli and
/// the combinations `Φ_i = Σ_k c_ik Sign_{2k+4}` dual to them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub d: usize,
    pub profiles: Vec<RadialProfile>,
    /// `matrix[k][j]` is the homogenized `Sign_{2k+4}` of `f_{ω_j}`.
    pub matrix: Vec<Vec<f64>>,
    /// Inverse of `matrix`, so that `Φ_i(f_{ω_j}) = δ_ij`.
    pub coefficients: Vec<Vec<f64>>,
    /// 1-norm condition number of `matrix`.
    pub condition: f64,
    pub seed: u64,
}

const EMBEDDING_RETRIES: u32 = 16;
const MAX_CONDITION: f64 = 1e6;

/// Annuli `r ∈ [k, k + 1/2]`, bump heights 1 (jittered on retries).
pub fn build_embedding(d: usize, seed: u64) -> Result<EmbeddingSpec> {
    if d == 0 {
        return Err(Error::Invalid("embedding dimension must be positive".into()));
    }
    let mut rng = mc::sample_rng(seed, 0);
    for attempt in 0..EMBEDDING_RETRIES {
        let profiles: Vec<RadialProfile> = (1..=d)
            .map(|k| {
                let h = if attempt == 0 { 1.0 } else { 1.0 + rng.random_range(-0.25..0.25) };
                RadialProfile::bump(k as f64, k as f64 + 0.5, h)
            })
            .collect();
        let matrix = (0..d)
            .map(|k| profiles.iter().map(|p| sign_qm_closed_form(p, k + 2)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let Some(coefficients) = invert(&matrix) else { continue };
        let condition = norm1(&matrix) * norm1(&coefficients);
        if condition.is_finite() && condition < MAX_CONDITION {
            return Ok(EmbeddingSpec { d, profiles, matrix, coefficients, condition, seed });
        }
    }
    Err(Error::SingularMatrix(EMBEDDING_RETRIES))
}

impl EmbeddingSpec {
    /// `f_{t,ω_j}`.
    pub fn flow(&self, j: usize, t: f64) -> FlowSpec {
        FlowSpec::rotational(self.profiles[j].clone(), t)
    }

    /// `(Φ_1, …, Φ_d)` from the `Sign_4 … Sign_{2d+2}` values.
    pub fn phi(&self, signs: &[f64]) -> Vec<f64> {
        if self.d == 1 {
            return vec![signs[0] / self.matrix[0][0]];
        }
        self.coefficients.iter().map(|row| row.iter().zip(signs).map(|(c, s)| c * s).sum()).collect()
    }

    /// Standard errors of [`EmbeddingSpec::phi`] for independent inputs.
    pub fn phi_stderr(&self, stderrs: &[f64]) -> Vec<f64> {
        self.coefficients
            .iter()
            .map(|row| row.iter().zip(stderrs).map(|(c, s)| (c * s).powi(2)).sum::<f64>().sqrt())
            .collect()
    }
}

fn norm1(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    (0..n).map(|j| (0..n).map(|i| m[i][j].abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Gauss–Jordan inverse with partial pivoting; `None` when singular.
fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().partial_cmp(&a[y][c].abs()).unwrap())?;
        if a[p][c].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(c, p);
        let piv = a[c][c];
        for v in a[c].iter_mut() {
            *v /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                if f != 0.0 {
                    for k in 0..2 * n {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Per-configuration values of `base` on the sub-configurations formed by
/// the first `ns[r]` points of one sample of `max(ns)` points. The
/// basepoint is likewise the restriction of one basepoint, so the columns
/// are positively correlated and linear combinations of them have smaller
/// error than independent estimates.
pub fn nested_values(
    flow: &FlowSpec,
    base: BaseInvariant,
    ns: &[usize],
    samples: usize,
    seed: u64,
    opts: &EstimateOptions,
) -> Result<Vec<Vec<f64>>> {
    let n_max = *ns.iter().max().ok_or_else(|| Error::Invalid("no point counts given".into()))?;
    ns.iter().try_for_each(|&n| check_points(n))?;
    flow.validate()?;
    let f = flow_power(flow, opts.power);
    let f2 = opts.cancel_offset.then(|| flow_power(flow, 2 * opts.power));
    let dt = opts.dt.unwrap_or_else(|| default_dt(flow));
    let q_full = basepoint(n_max, opts.basepoint_seed);
    let qs: Vec<Configuration> = ns.iter().map(|&n| Configuration::unchecked(q_full.points()[..n].to_vec())).collect();
    let k = opts.power as f64;
    let rows = mc::run(samples, seed, opts.workers, |_, rng| {
        with_redraws(rng, n_max, |x, rng| {
            let mut row = Vec::with_capacity(ns.len());
            for (&n, q) in ns.iter().zip(&qs) {
                let sub = Configuration::unchecked(x.points()[..n].to_vec());
                let v = base.evaluate(&loop_braid(&f, &sub, q, opts.path_system, dt, rng)?)?;
                row.push(match &f2 {
                    Some(f2) => (base.evaluate(&loop_braid(f2, &sub, q, opts.path_system, dt, rng)?)? - v) / k,
                    None => v / k,
                });
            }
            Ok(row)
        })
    })?;
    Ok(rows.into_iter().map(|r| r.0).collect())
}

/// MC estimates of `Φ_i(f_{t,ω_j})` for every `i`, from paired
/// `Sign_4 … Sign_{2d+2}` values on nested configurations.
pub fn embedding_phi_estimates(
    spec: &EmbeddingSpec,
    j: usize,
    t: f64,
    samples: usize,
    seed: u64,
    opts: &EstimateOptions,
) -> Result<Vec<QMEstimate>> {
    let ns: Vec<usize> = (0..spec.d).map(|r| 2 * r + 4).collect();
    let rows = nested_values(&spec.flow(j, t), BaseInvariant::SRaw, &ns, samples, seed, opts)?;
    Ok((0..spec.d)
        .map(|i| {
            let v: Vec<f64> = rows.iter().map(|row| spec.phi(row)[i]).collect();
            let s = mc::summarize(&v);
            QMEstimate { mean: s.mean, stderr: s.stderr, n_samples: s.n, seed, n_points: *ns.last().unwrap(), resamples: 0 }
        })
        .collect())
}

/// `Φ(φψ) - Φ(φ) - Φ(ψ)` for one pair, with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectEntry {
    pub product: f64,
    pub first: f64,
    pub second: f64,
    pub defect: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub entries: Vec<DefectEntry>,
    pub max_abs_defect: f64,
}

/// Empirical quasimorphism defect over pairs of flows. The product `φψ`
/// runs `ψ` first. The three estimates use independent seeds.
pub fn qm_defect_probe(
    base: BaseInvariant,
    n: usize,
    pairs: &[(FlowSpec, FlowSpec)],
    samples: usize,
    seed: u64,
    opts: &EstimateOptions,
) -> Result<DefectReport> {
    let mut entries = Vec::with_capacity(pairs.len());
    for (k, (phi, psi)) in pairs.iter().enumerate() {
        let s = seed.wrapping_add(3 * k as u64);
        let product = FlowSpec::Sequence { flows: vec![psi.clone(), phi.clone()] };
        let ab = gg_estimate(&product, base, n, samples, s, opts)?;
        let a = gg_estimate(phi, base, n, samples, s + 1, opts)?;
        let b = gg_estimate(psi, base, n, samples, s + 2, opts)?;
        entries.push(DefectEntry {
            product: ab.mean,
            first: a.mean,
            second: b.mean,
            defect: ab.mean - a.mean - b.mean,
            stderr: (ab.stderr.powi(2) + a.stderr.powi(2) + b.stderr.powi(2)).sqrt(),
        });
    }
    let max_abs_defect = entries.iter().map(|e| e.defect.abs()).fold(0.0, f64::max);
    Ok(DefectReport { entries, max_abs_defect })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u_profile() -> RadialProfile {
        RadialProfile::HeightPolynomial { coefficients: vec![0.0, 1.0] }
    }

    #[test]
    fn closed_form_values() {
        assert!((sign_qm_closed_form(&u_profile(), 2).unwrap() + 4.0 / 15.0).abs() < 1e-12);
        for n in 2..5 {
            assert!(sign_qm_closed_form(&RadialProfile::constant(0.7), n).unwrap().abs() < 1e-12);
        }
        // ω̃ = u² is even, so the odd integrand vanishes; ω̃ = u³ at n = 3:
        // (3/2)(2/9 - 2/5) = -4/15.
        let cubic = RadialProfile::HeightPolynomial { coefficients: vec![0.0, 0.0, 0.0, 1.0] };
        assert!((sign_qm_closed_form(&cubic, 3).unwrap() + 4.0 / 15.0).abs() < 1e-12);
        let steps = RadialProfile::steps(vec![0.0, 1.0, 2.0], vec![1.0, -1.0, 0.0]);
        let v = sign_qm_closed_form(&steps, 2).unwrap();
        // Piecewise exact: ∫(u³-u) over [0,1] is -1/4, over [-3/5,0] is 1/4 - (3/5)^2/2 + (3/5)^4/4.
        let a = |u: f64| u.powi(4) / 4.0 - u * u / 2.0;
        let exact = 1.0 * (a(1.0) - a(0.0)) - (a(0.0) - a(-0.6));
        assert!((v - exact).abs() < 1e-12, "{v} {exact}");
    }

    #[test]
    fn closed_form_scales_with_time() {
        let p = u_profile();
        let scaled = RadialProfile::HeightPolynomial { coefficients: vec![0.0, 3.0] };
        assert!((sign_qm_closed_form(&scaled, 2).unwrap() - 3.0 * sign_qm_closed_form(&p, 2).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn embedding_inverts_its_matrix() {
        for d in 1..4 {
            let e = build_embedding(d, 3).unwrap();
            assert!(e.condition < 1e6);
            for i in 0..d {
                for j in 0..d {
                    let v: f64 = (0..d).map(|k| e.coefficients[i][k] * e.matrix[k][j]).sum();
                    assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
                }
            }
            for w in e.profiles.windows(2) {
                let (a, b) = (w[0].radial_support().unwrap(), w[1].radial_support().unwrap());
                assert!(a.1 < b.0);
            }
        }
        let e = build_embedding(1, 0).unwrap();
        assert!(e.matrix[0][0] != 0.0);
        assert_eq!(e.phi(&[e.matrix[0][0]]), vec![1.0]);
    }

    #[test]
    fn identity_flow_averages_vanish() {
        let opts = EstimateOptions { workers: 1, ..Default::default() };
        for base in [BaseInvariant::Lk, BaseInvariant::SRaw, BaseInvariant::Signature] {
            let e = gg_estimate(&FlowSpec::identity(), base, 4, 200, 5, &opts).unwrap();
            assert!(e.mean.abs() <= 3.0 * e.stderr + 1e-12, "{base:?} {e:?}");
        }
    }

    #[test]
    fn estimates_do_not_depend_on_worker_count() {
        let flow = FlowSpec::rotational(u_profile(), 1.0);
        let a = gg_estimate(&flow, BaseInvariant::SRaw, 4, 60, 2, &EstimateOptions { workers: 1, ..Default::default() }).unwrap();
        let b = gg_estimate(&flow, BaseInvariant::SRaw, 4, 60, 2, &EstimateOptions { workers: 3, ..Default::default() }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rotational_lk_matches_pairwise_rotation_average() {
        // Under a rotation the bracket l_ab winds at the rate of whichever of
        // x_a, x_b is farther from 0. lk is the signed sum of bracket windings
        // (+l13 +l24 -l23 -l14 and +l12 +l34 -l23 -l14), and exchangeable
        // points give every bracket the same mean, so the average is 0.
        let flow = FlowSpec::rotational(u_profile(), 1.0);
        let opts = EstimateOptions { power: 4, cancel_offset: true, workers: 1, ..Default::default() };
        let e = gg_estimate(&flow, BaseInvariant::Lk, 4, 400, 3, &opts).unwrap();
        assert!(e.mean.abs() <= 3.0 * e.stderr + 1e-9, "{e:?}");
    }
}
