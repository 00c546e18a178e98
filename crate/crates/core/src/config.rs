//! Configurations of `n` distinct points, short paths from a basepoint, and
//! the based loops `λ(x, φ) = γ(x) # {φ_t x} # γ(φ_T x)⁻¹`.
//!
//! A loop is parametrized by `τ ∈ [0, 1]`: the first third runs the short
//! path from `q` to `x`, the middle third the flow over `[0, T]`, the last
//! third the short path from `y = φ_T x` back to `q`. Samples are refined
//! adaptively until the planar image of every step is small compared with
//! the distance between the strands involved (see [`step_is_fine`]).

use crate::conventions::conventions;
use crate::error::{Error, Result};
use crate::flows::{FlowSpec, Trajectory};
use crate::sphere::{moduli_projection_unchecked, sample_uniform, Geodesic, ProjPoint};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

const MAX_REJECTIONS: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    points: Vec<ProjPoint>,
    min_sep: f64,
}

fn min_separation(points: &[ProjPoint]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            m = m.min(points[i].chordal_distance(&points[j]));
        }
    }
    m
}

impl Configuration {
    /// Builds a configuration; points closer than `eps_pt` are rejected.
    pub fn new(points: Vec<ProjPoint>) -> Result<Self> {
        let eps = conventions().eps_pt;
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i].chordal_distance(&points[j]) < eps {
                    return Err(Error::DegenerateConfiguration(i, j));
                }
            }
        }
        let min_sep = min_separation(&points);
        Ok(Configuration { points, min_sep })
    }

    pub(crate) fn unchecked(points: Vec<ProjPoint>) -> Self {
        let min_sep = min_separation(&points);
        Configuration { points, min_sep }
    }

    pub fn points(&self) -> &[ProjPoint] {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn min_sep(&self) -> f64 {
        self.min_sep
    }

    /// Cross-ratio coordinates followed by the constant strands 0 and 1.
    pub fn planar(&self) -> Vec<C> {
        planar_coords(&self.points)
    }
}

pub(crate) fn planar_coords(points: &[ProjPoint]) -> Vec<C> {
    let mut u = moduli_projection_unchecked(points);
    u.push(C::new(0.0, 0.0));
    u.push(C::new(1.0, 0.0));
    u
}

/// Draws an i.i.d. μ-distributed configuration with pairwise chordal
/// distance at least `eps_conf`, returning it with the rejection count.
pub fn sample_configuration_with<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<(Configuration, u64)> {
    if n < 4 {
        return Err(Error::Invalid(format!("configurations need n >= 4, got {n}")));
    }
    let eps = conventions().eps_conf;
    for rejected in 0..MAX_REJECTIONS {
        let points: Vec<ProjPoint> = (0..n).map(|_| sample_uniform(rng)).collect();
        let c = Configuration::unchecked(points);
        if c.min_sep >= eps {
            return Ok((c, rejected));
        }
    }
    Err(Error::SamplerStuck(MAX_REJECTIONS))
}

pub fn sample_configuration(n: usize, seed: u64) -> Result<Configuration> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_configuration_with(&mut rng, n)?.0)
}

/// Quasi-uniform basepoint: a Fibonacci spiral on the sphere, rotated and
/// jittered by the seed so it avoids symmetric coincidences.
pub fn basepoint(n: usize, seed: u64) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ba5e);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let rot = crate::sphere::Rotation::random(&mut rng);
    let points = (0..n)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64 + rng.random_range(-0.05..0.05) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let a = golden * k as f64 + rng.random_range(-0.05..0.05);
            rot.apply(&ProjPoint::from_unit_vector([rho * a.cos(), rho * a.sin(), z]))
        })
        .collect();
    Configuration::unchecked(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathSystem {
    /// Coordinate-wise minimal great-circle arcs.
    Geodesic,
    /// Coordinate-wise straight segments in chart 0.
    Affine,
}

/// A path from `q` to `x` in `X_n`, evaluated at any parameter in `[0, 1]`.
#[derive(Debug, Clone)]
pub enum ShortPath {
    Geodesic(Vec<Geodesic>),
    Affine(Vec<(C, C)>),
}

impl ShortPath {
    pub fn at(&self, s: f64) -> Vec<ProjPoint> {
        match self {
            ShortPath::Geodesic(arcs) => arcs.iter().map(|g| g.at(s)).collect(),
            ShortPath::Affine(segs) => {
                segs.iter().map(|(a, b)| ProjPoint::from_chart0(*a + (*b - *a) * s)).collect()
            }
        }
    }
}

/// `γ(x)` or `γ′(x)`: the short path from `q` to `x`.
pub fn short_path(system: PathSystem, q: &Configuration, x: &Configuration) -> Result<ShortPath> {
    if q.n() != x.n() {
        return Err(Error::Invalid("basepoint and configuration differ in size".into()));
    }
    let floor = conventions().eps_conf / 2.0;
    match system {
        PathSystem::Geodesic => {
            let arcs = q
                .points
                .iter()
                .zip(&x.points)
                .map(|(a, b)| Geodesic::new(a, b))
                .collect::<Result<Vec<_>>>()
                .map_err(|_| Error::NegligibleSetHit("antipodal short-path endpoints".into()))?;
            Ok(ShortPath::Geodesic(arcs))
        }
        PathSystem::Affine => {
            let mut segs = Vec::with_capacity(q.n());
            for (a, b) in q.points.iter().zip(&x.points) {
                match (a.chart0(), b.chart0()) {
                    (Some(za), Some(zb)) => segs.push((za, zb)),
                    _ => return Err(Error::NegligibleSetHit("point at infinity on an affine path".into())),
                }
            }
            // Closest approach of each pair of segments at equal parameter.
            for i in 0..segs.len() {
                for j in (i + 1)..segs.len() {
                    let d0 = segs[i].0 - segs[j].0;
                    let d1 = segs[i].1 - segs[j].1;
                    let e = d1 - d0;
                    let s = if e.norm_sqr() > 0.0 { (-(d0 * e.conj()).re / e.norm_sqr()).clamp(0.0, 1.0) } else { 0.0 };
                    let zi = segs[i].0 + (segs[i].1 - segs[i].0) * s;
                    let zj = segs[j].0 + (segs[j].1 - segs[j].0) * s;
                    if ProjPoint::from_chart0(zi).chordal_distance(&ProjPoint::from_chart0(zj)) < floor {
                        return Err(Error::NegligibleSetHit(format!("affine segments {i} and {j} collide")));
                    }
                }
            }
            Ok(ShortPath::Affine(segs))
        }
    }
}

/// A closed sampled loop in `X_n` based at `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Loop {
    pub params: Vec<f64>,
    pub samples: Vec<Configuration>,
    pub basepoint: Configuration,
    pub path_system: PathSystem,
    pub closed: bool,
}

impl Loop {
    pub fn n(&self) -> usize {
        self.basepoint.n()
    }

    /// The same loop run backwards.
    pub fn reversed(&self) -> Loop {
        Loop {
            params: self.params.iter().rev().map(|t| 1.0 - t).collect(),
            samples: self.samples.iter().rev().cloned().collect(),
            basepoint: self.basepoint.clone(),
            path_system: self.path_system,
            closed: self.closed,
        }
    }

    /// Applies a map to every point of every sample and of the basepoint.
    pub fn map_points<F: Fn(&ProjPoint) -> ProjPoint>(&self, f: F) -> Loop {
        let m = |c: &Configuration| Configuration::unchecked(c.points.iter().map(&f).collect());
        Loop {
            params: self.params.clone(),
            samples: self.samples.iter().map(m).collect(),
            basepoint: m(&self.basepoint),
            path_system: self.path_system,
            closed: self.closed,
        }
    }

    /// Concatenation of two loops with the same basepoint.
    pub fn concat(&self, other: &Loop) -> Loop {
        let mut params: Vec<f64> = self.params.iter().map(|t| 0.5 * t).collect();
        params.extend(other.params.iter().skip(1).map(|t| 0.5 + 0.5 * t));
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().skip(1).cloned());
        Loop { params, samples, basepoint: self.basepoint.clone(), path_system: self.path_system, closed: true }
    }
}

/// Acceptance test for a loop step between consecutive samples: every
/// planar strand difference moves by at most `loop_relative_step` of its
/// size, and every sphere point moves at most `loop_max_sphere_step`.
pub fn step_is_fine(a: &[ProjPoint], pa: &[C], b: &[ProjPoint], pb: &[C]) -> bool {
    let cv = conventions();
    if a.iter().zip(b).any(|(p, q)| p.chordal_distance(q) > cv.loop_max_sphere_step) {
        return false;
    }
    let m = pa.len();
    for i in 0..m {
        for j in (i + 1)..m {
            let da = pa[i] - pa[j];
            let db = pb[i] - pb[j];
            if (db - da).norm() > cv.loop_relative_step * da.norm().min(db.norm()) {
                return false;
            }
        }
    }
    true
}

struct Tracer<'a> {
    sp_x: ShortPath,
    sp_y: ShortPath,
    trajs: Vec<Trajectory>,
    duration: f64,
    q: &'a Configuration,
}

impl Tracer<'_> {
    fn points(&self, tau: f64) -> Result<Vec<ProjPoint>> {
        if tau <= 0.0 || tau >= 1.0 {
            return Ok(self.q.points.clone());
        }
        if tau < 1.0 / 3.0 {
            return Ok(self.sp_x.at(3.0 * tau));
        }
        if tau <= 2.0 / 3.0 {
            let t = ((3.0 * tau - 1.0) * self.duration).clamp(0.0, self.duration);
            return self.trajs.iter().map(|tr| tr.at(t)).collect();
        }
        Ok(self.sp_y.at(3.0 - 3.0 * tau))
    }
}

/// `λ(x, φ)`: short path to `x`, the flow, and the short path from `φ_T x`
/// back, refined until [`step_is_fine`] holds everywhere.
pub fn trace_loop(flow: &FlowSpec, x: &Configuration, q: &Configuration, system: PathSystem, dt: f64) -> Result<Loop> {
    let cv = conventions();
    let floor = cv.eps_conf / 2.0;
    let trajs = x
        .points
        .iter()
        .map(|p| Trajectory::new(flow, p, dt))
        .collect::<Result<Vec<_>>>()?;
    let duration = flow.duration();
    let y_points = trajs.iter().map(|tr| tr.at(duration)).collect::<Result<Vec<_>>>()?;
    let y = Configuration::unchecked(y_points);
    if y.min_sep < floor {
        return Err(Error::DiagonalCrossing(y.min_sep));
    }
    let sp_x = short_path(system, q, x)?;
    let sp_y = short_path(system, q, &y)?;
    let tracer = Tracer { sp_x, sp_y, trajs, duration, q };

    let speed = x
        .points
        .iter()
        .map(|p| crate::sphere::norm(flow.velocity(p, 0.0)))
        .fold(0.0, f64::max);
    let flow_pieces = ((duration * speed / cv.loop_max_sphere_step).ceil() as usize).clamp(8, 1 << 22);
    let mut seeds: Vec<f64> = (0..=8).map(|k| k as f64 / 24.0).collect();
    seeds.extend((1..=flow_pieces).map(|k| 1.0 / 3.0 + k as f64 / (3.0 * flow_pieces as f64)));
    seeds.extend((1..=8).map(|k| 2.0 / 3.0 + k as f64 / 24.0));

    let mut params = Vec::with_capacity(seeds.len() * 2);
    let mut samples = Vec::with_capacity(seeds.len() * 2);
    let mut prev_pts = tracer.points(0.0)?;
    let mut prev_planar = planar_coords(&prev_pts);
    params.push(0.0);
    samples.push(Configuration::unchecked(prev_pts.clone()));
    let mut prev_tau = 0.0;
    for &target in &seeds[1..] {
        // Depth-first bisection of [prev_tau, target].
        let mut stack = vec![(target, 0u32)];
        while let Some(&(tau, depth)) = stack.last() {
            let pts = tracer.points(tau)?;
            let planar = planar_coords(&pts);
            let c = Configuration::unchecked(pts);
            if c.min_sep < floor {
                return Err(if (1.0 / 3.0..=2.0 / 3.0).contains(&tau) {
                    Error::DiagonalCrossing(c.min_sep)
                } else {
                    Error::NegligibleSetHit("short path passes near the diagonal".into())
                });
            }
            if step_is_fine(&prev_pts, &prev_planar, &c.points, &planar) {
                stack.pop();
                params.push(tau);
                prev_pts = c.points.clone();
                prev_planar = planar;
                samples.push(c);
                prev_tau = tau;
            } else {
                if depth >= cv.loop_max_refinements {
                    let m = planar.len();
                    let mut worst = (0, 1, f64::INFINITY);
                    for i in 0..m {
                        for j in (i + 1)..m {
                            let d = (planar[i] - planar[j]).norm();
                            if d < worst.2 {
                                worst = (i, j, d);
                            }
                        }
                    }
                    return Err(Error::NumericalDiagonal(worst.0, worst.1));
                }
                stack.push((0.5 * (prev_tau + tau), depth + 1));
            }
        }
    }
    // The final sample is q itself, so the loop closes exactly.
    Ok(Loop { params, samples, basepoint: q.clone(), path_system: system, closed: true })
}

const CACHE_MAGIC: &[u8; 8] = b"SQMLOOP\0";
const CACHE_VERSION: u32 = 1;

/// Directory-backed store of traced loops. Records carry a versioned
/// header; the file name is a hash of the key.
#[derive(Debug, Clone)]
pub struct LoopCache {
    dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub flow_hash: String,
    pub seed: u64,
    pub n: usize,
    pub dt_bits: u64,
    pub system: PathSystem,
}

impl CacheKey {
    pub fn new(flow: &FlowSpec, seed: u64, n: usize, dt: f64, system: PathSystem) -> Self {
        CacheKey { flow_hash: flow.hash(), seed, n, dt_bits: dt.to_bits(), system }
    }

    fn file_name(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.flow_hash.as_bytes());
        h.update(self.seed.to_le_bytes());
        h.update((self.n as u64).to_le_bytes());
        h.update(self.dt_bits.to_le_bytes());
        h.update([self.system as u8]);
        format!("{}.loop", hex::encode(h.finalize()))
    }
}

pub const CACHE_ENV: &str = "SPHERE_QM_CACHE";

impl LoopCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(LoopCache { dir })
    }

    /// The cache named by the environment, if any.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_ENV).and_then(|d| LoopCache::new(PathBuf::from(d)).ok())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn get(&self, key: &CacheKey) -> Result<Option<Loop>> {
        let path = self.dir.join(key.file_name());
        match std::fs::File::open(&path) {
            Ok(f) => read_loop(std::io::BufReader::new(f), key).map(Some),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn put(&self, key: &CacheKey, lp: &Loop) -> Result<()> {
        let path = self.dir.join(key.file_name());
        let tmp = path.with_extension("tmp");
        let mut w = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
        write_loop(&mut w, key, lp)?;
        w.flush()?;
        drop(w);
        std::fs::rename(tmp, path)?;
        Ok(())
    }
}

fn write_point<W: Write>(w: &mut W, p: &ProjPoint) -> std::io::Result<()> {
    for v in [p.z().re, p.z().im, p.w().re, p.w().im] {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

fn read_point<R: Read>(r: &mut R) -> Result<ProjPoint> {
    let mut v = [0.0; 4];
    for x in &mut v {
        *x = r.read_f64::<LittleEndian>()?;
    }
    ProjPoint::new(C::new(v[0], v[1]), C::new(v[2], v[3]))
}

fn write_loop<W: Write>(w: &mut W, key: &CacheKey, lp: &Loop) -> Result<()> {
    w.write_all(CACHE_MAGIC)?;
    w.write_u32::<LittleEndian>(CACHE_VERSION)?;
    w.write_u32::<LittleEndian>(lp.n() as u32)?;
    w.write_u8(lp.path_system as u8)?;
    let hash = hex::decode(&key.flow_hash).map_err(|e| Error::Parse(e.to_string()))?;
    w.write_all(&hash)?;
    w.write_u64::<LittleEndian>(key.seed)?;
    w.write_u64::<LittleEndian>(key.dt_bits)?;
    w.write_u64::<LittleEndian>(lp.samples.len() as u64)?;
    for p in lp.basepoint.points() {
        write_point(w, p)?;
    }
    for (t, c) in lp.params.iter().zip(&lp.samples) {
        w.write_f64::<LittleEndian>(*t)?;
        for p in c.points() {
            write_point(w, p)?;
        }
    }
    Ok(())
}

fn read_loop<R: Read>(mut r: R, key: &CacheKey) -> Result<Loop> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(Error::Parse("not a loop cache record".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != CACHE_VERSION {
        return Err(Error::Parse(format!("loop cache version {version}, expected {CACHE_VERSION}")));
    }
    let n = r.read_u32::<LittleEndian>()? as usize;
    let system = match r.read_u8()? {
        0 => PathSystem::Geodesic,
        1 => PathSystem::Affine,
        s => return Err(Error::Parse(format!("unknown path system tag {s}"))),
    };
    let mut hash = [0u8; 32];
    r.read_exact(&mut hash)?;
    let seed = r.read_u64::<LittleEndian>()?;
    let dt_bits = r.read_u64::<LittleEndian>()?;
    if hex::encode(hash) != key.flow_hash || seed != key.seed || dt_bits != key.dt_bits || n != key.n || system != key.system {
        return Err(Error::Parse("loop cache record does not match its key".into()));
    }
    let count = r.read_u64::<LittleEndian>()? as usize;
    let base = (0..n).map(|_| read_point(&mut r)).collect::<Result<Vec<_>>>()?;
    let mut params = Vec::with_capacity(count);
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        params.push(r.read_f64::<LittleEndian>()?);
        let pts = (0..n).map(|_| read_point(&mut r)).collect::<Result<Vec<_>>>()?;
        samples.push(Configuration::unchecked(pts));
    }
    Ok(Loop { params, samples, basepoint: Configuration::unchecked(base), path_system: system, closed: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::RadialProfile;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn sampled_configurations_are_valid_and_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = 100_000;
        let mut north = [0usize; 4];
        let mut rejected = 0;
        for _ in 0..draws {
            let (cfg, r) = sample_configuration_with(&mut rng, 4).unwrap();
            rejected += r;
            assert!(cfg.min_sep() >= conventions().eps_conf);
            for (k, p) in cfg.points().iter().enumerate() {
                north[k] += (p.height() > 0.0) as usize;
            }
        }
        let sigma = (0.25 / draws as f64).sqrt();
        for k in north {
            assert!((k as f64 / draws as f64 - 0.5).abs() < 3.0 * sigma);
        }
        assert!((rejected as f64) < 0.01 * draws as f64);
    }

    #[test]
    fn near_diagonal_measure_is_small() {
        // Brute-force estimate of the rejected fraction: P(min_sep < eps) for
        // four i.i.d. uniform points is about 6 · eps²/4.
        let eps: f64 = conventions().eps_conf;
        let predicted = 6.0 * eps * eps / 4.0;
        assert!(predicted < 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let big = 0.05;
        let trials = 200_000;
        let hits = (0..trials)
            .filter(|_| {
                let pts: Vec<_> = (0..4).map(|_| sample_uniform(&mut rng)).collect();
                min_separation(&pts) < big
            })
            .count();
        let frac = hits as f64 / trials as f64;
        let want = 6.0 * big * big / 4.0;
        assert!((frac - want).abs() < 0.1 * want, "{frac} vs {want}");
    }

    #[test]
    fn sampling_is_deterministic() {
        assert_eq!(sample_configuration(5, 77).unwrap(), sample_configuration(5, 77).unwrap());
        assert!(sample_configuration(3, 1).is_err());
    }

    #[test]
    fn short_path_constant_and_affine_midpoint() {
        let q = basepoint(4, 3);
        for system in [PathSystem::Geodesic, PathSystem::Affine] {
            let sp = short_path(system, &q, &q).unwrap();
            for s in [0.0, 0.3, 1.0] {
                for (a, b) in sp.at(s).iter().zip(q.points()) {
                    assert!(a.approx_eq(b, 1e-12));
                }
            }
        }
        let x = Configuration::new(vec![
            ProjPoint::from_chart0(c(1.0, 1.0)),
            ProjPoint::from_chart0(c(-2.0, 0.5)),
            ProjPoint::from_chart0(c(0.0, -1.0)),
            ProjPoint::from_chart0(c(3.0, 0.0)),
        ])
        .unwrap();
        let sp = short_path(PathSystem::Affine, &q, &x).unwrap();
        for (k, p) in sp.at(0.5).iter().enumerate() {
            let mid = 0.5 * (q.points()[k].chart0().unwrap() + x.points()[k].chart0().unwrap());
            assert!((p.chart0().unwrap() - mid).norm() < 1e-14);
        }
    }

    #[test]
    fn symmetric_crossing_segments_are_rejected() {
        let q = Configuration::new(vec![
            ProjPoint::from_chart0(c(-1.0, 0.0)),
            ProjPoint::from_chart0(c(1.0, 0.0)),
            ProjPoint::from_chart0(c(0.0, 3.0)),
            ProjPoint::from_chart0(c(0.0, -3.0)),
        ])
        .unwrap();
        let x = Configuration::new(vec![
            ProjPoint::from_chart0(c(1.0, 0.0)),
            ProjPoint::from_chart0(c(-1.0, 0.0)),
            ProjPoint::from_chart0(c(0.5, 3.0)),
            ProjPoint::from_chart0(c(0.5, -3.0)),
        ])
        .unwrap();
        assert!(matches!(short_path(PathSystem::Affine, &q, &x), Err(Error::NegligibleSetHit(_))));
    }

    #[test]
    fn loops_close_and_respect_separation() {
        let flow = FlowSpec::rotational(RadialProfile::height(), 1.0);
        let q = basepoint(5, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut traced = 0;
        while traced < 1000 {
            let (x, _) = sample_configuration_with(&mut rng, 5).unwrap();
            let system = if traced % 2 == 0 { PathSystem::Geodesic } else { PathSystem::Affine };
            let lp = match trace_loop(&flow, &x, &q, system, 1e-3) {
                Ok(lp) => lp,
                Err(e) if e.is_resample() => continue,
                Err(e) => panic!("{e}"),
            };
            let first = &lp.samples[0];
            let last = lp.samples.last().unwrap();
            for (a, b) in first.points().iter().zip(last.points()) {
                assert!(a.approx_eq(b, 1e-9));
            }
            assert!(lp.samples.iter().all(|s| s.min_sep() >= conventions().eps_conf / 2.0));
            assert!(lp.params.windows(2).all(|w| w[1] > w[0]));
            traced += 1;
        }
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = LoopCache::new(dir.path()).unwrap();
        let flow = FlowSpec::rotational(RadialProfile::height(), 0.5);
        let q = basepoint(4, 1);
        let x = sample_configuration(4, 8).unwrap();
        let lp = trace_loop(&flow, &x, &q, PathSystem::Geodesic, 1e-3).unwrap();
        let key = CacheKey::new(&flow, 8, 4, 1e-3, PathSystem::Geodesic);
        assert!(cache.get(&key).unwrap().is_none());
        cache.put(&key, &lp).unwrap();
        let back = cache.get(&key).unwrap().unwrap();
        assert_eq!(back.params, lp.params);
        for (a, b) in back.samples.iter().zip(&lp.samples) {
            for (p, q) in a.points().iter().zip(b.points()) {
                assert!(p.approx_eq(q, 1e-15));
            }
        }
        let other = CacheKey { seed: 9, ..key };
        assert!(cache.get(&other).unwrap().is_none());
    }
}
