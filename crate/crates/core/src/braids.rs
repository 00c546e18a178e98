//! Braid words and their extraction from planar loops.
//!
//! A planar loop is projected to the line `s = Im(p e^{-iθ})`; strands are
//! ordered by `s` and a letter is recorded each time two neighbours swap.
//! The strand with larger depth `h = Re(p e^{-iθ})` passes over. The letter
//! at positions `k, k+1` is `σ_k` when the strand moving up from position
//! `k` is the over-strand and `σ_k⁻¹` otherwise, so two points turning
//! counterclockwise about each other once read `σ_1²`.

use crate::config::{planar_coords, Loop};
use crate::conventions::conventions;
use crate::error::{Error, Result};
use num_complex::Complex64 as C;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// A word in the Artin generators of `B_m`; letter `±i` is `σ_i^{±1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BraidWord {
    strands: usize,
    letters: Vec<i32>,
}

impl BraidWord {
    pub fn new(strands: usize, letters: Vec<i32>) -> Result<Self> {
        if strands < 2 && !letters.is_empty() {
            return Err(Error::Invalid("a nonempty braid word needs at least two strands".into()));
        }
        if strands == 0 {
            return Err(Error::Invalid("braid needs at least one strand".into()));
        }
        if let Some(bad) = letters.iter().find(|&&l| l == 0 || l.unsigned_abs() as usize >= strands) {
            return Err(Error::Invalid(format!("letter {bad} out of range for {strands} strands")));
        }
        Ok(BraidWord { strands, letters })
    }

    pub fn identity(strands: usize) -> Self {
        BraidWord { strands, letters: Vec::new() }
    }

    /// `(σ_1 ⋯ σ_{m-1})^m`, the positive generator of the center.
    pub fn full_twist(strands: usize) -> Self {
        let row: Vec<i32> = (1..strands as i32).collect();
        let letters = row.iter().cycle().take(row.len() * strands).copied().collect();
        BraidWord { strands, letters }
    }

    pub fn strands(&self) -> usize {
        self.strands
    }

    pub fn letters(&self) -> &[i32] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn exponent_sum(&self) -> i64 {
        self.letters.iter().map(|l| l.signum() as i64).sum()
    }

    /// Cancels adjacent `σ_i σ_i⁻¹` pairs until none remain.
    pub fn free_reduce(&self) -> BraidWord {
        let mut out: Vec<i32> = Vec::with_capacity(self.letters.len());
        for &l in &self.letters {
            if out.last() == Some(&-l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        BraidWord { strands: self.strands, letters: out }
    }

    pub fn inverse(&self) -> BraidWord {
        BraidWord { strands: self.strands, letters: self.letters.iter().rev().map(|l| -l).collect() }
    }

    pub fn concat(&self, other: &BraidWord) -> Result<BraidWord> {
        if self.strands != other.strands {
            return Err(Error::Invalid("cannot multiply braids on different strand counts".into()));
        }
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Ok(BraidWord { strands: self.strands, letters })
    }

    pub fn pow(&self, k: usize) -> BraidWord {
        let letters = self.letters.iter().copied().cycle().take(self.letters.len() * k).collect();
        BraidWord { strands: self.strands, letters }
    }

    /// The same word viewed on more strands.
    pub fn with_strands(&self, strands: usize) -> Result<BraidWord> {
        BraidWord::new(strands, self.letters.clone())
    }

    /// `perm[k]` is the final position of the strand that starts at `k`.
    pub fn permutation(&self) -> Vec<usize> {
        let mut at: Vec<usize> = (0..self.strands).collect();
        for &l in &self.letters {
            let k = l.unsigned_abs() as usize - 1;
            at.swap(k, k + 1);
        }
        let mut perm = vec![0; self.strands];
        for (pos, &strand) in at.iter().enumerate() {
            perm[strand] = pos;
        }
        perm
    }

    pub fn is_pure(&self) -> bool {
        self.permutation().iter().enumerate().all(|(i, &p)| i == p)
    }
}

impl fmt::Display for BraidWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.strands)?;
        for l in &self.letters {
            write!(f, " {l}")?;
        }
        Ok(())
    }
}

impl FromStr for BraidWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, tail) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("braid word {s:?} lacks 'strands:'")))?;
        let strands = head.trim().parse().map_err(|_| Error::Parse(format!("bad strand count {head:?}")))?;
        let letters = tail
            .split_whitespace()
            .map(|t| t.parse::<i32>().map_err(|_| Error::Parse(format!("bad letter {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        BraidWord::new(strands, letters)
    }
}

/// A closed piecewise-linear loop of `m` labelled points in the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarLoop {
    pub params: Vec<f64>,
    pub points: Vec<Vec<C>>,
}

impl PlanarLoop {
    pub fn new(params: Vec<f64>, points: Vec<Vec<C>>) -> Result<Self> {
        if points.len() < 2 || params.len() != points.len() {
            return Err(Error::Invalid("planar loop needs at least two samples with parameters".into()));
        }
        let m = points[0].len();
        if points.iter().any(|p| p.len() != m) {
            return Err(Error::Invalid("planar samples differ in strand count".into()));
        }
        Ok(PlanarLoop { params, points })
    }

    /// Uniform parameters on `[0, 1]`.
    pub fn from_points(points: Vec<Vec<C>>) -> Result<Self> {
        let n = points.len().max(2) - 1;
        let params = (0..points.len()).map(|k| k as f64 / n as f64).collect();
        Self::new(params, points)
    }

    pub fn strands(&self) -> usize {
        self.points[0].len()
    }

    pub fn reversed(&self) -> PlanarLoop {
        PlanarLoop {
            params: self.params.iter().rev().map(|t| 1.0 - t).collect(),
            points: self.points.iter().rev().cloned().collect(),
        }
    }

    /// `∫|θ'_ij|`: total variation of `arg(p_i - p_j)` over `2π`, exact for
    /// the piecewise-linear path.
    pub fn abs_winding(&self, i: usize, j: usize) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                let a = w[0][i] - w[0][j];
                let b = w[1][i] - w[1][j];
                (b / a).arg().abs()
            })
            .sum::<f64>()
            / (2.0 * PI)
    }

    /// Signed winding of strand `i` around strand `j`.
    pub fn winding(&self, i: usize, j: usize) -> f64 {
        self.points
            .windows(2)
            .map(|w| ((w[1][i] - w[1][j]) / (w[0][i] - w[0][j])).arg())
            .sum::<f64>()
            / (2.0 * PI)
    }
}

/// The image of a loop under `π_c`, with constant strands at 0 and 1
/// appended: strands `u_1, …, u_{n-3}, 0, 1`.
pub fn planarize(lp: &Loop) -> Result<PlanarLoop> {
    let eps = conventions().eps_planar;
    let mut points = Vec::with_capacity(lp.samples.len());
    for s in &lp.samples {
        let u = planar_coords(s.points());
        for i in 0..u.len() {
            for j in (i + 1)..u.len() {
                if (u[i] - u[j]).norm() < eps {
                    return Err(Error::NumericalDiagonal(i, j));
                }
            }
        }
        points.push(u);
    }
    PlanarLoop::new(lp.params.clone(), points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub t: f64,
    /// Strand labels, `(over, under)`.
    pub strands: (usize, usize),
    pub sign: i32,
    pub over: usize,
    /// Generator index (1-based position of the lower of the two slots).
    pub position: usize,
}

/// The diagram of a planar loop in direction `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagram {
    pub word: BraidWord,
    pub events: Vec<CrossingEvent>,
}

impl Diagram {
    /// CSV dump of the crossing events.
    pub fn events_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "over", "under", "position", "sign"]).map_err(|e| Error::Io(e.to_string()))?;
        for e in &self.events {
            w.write_record([
                e.t.to_string(),
                e.strands.0.to_string(),
                e.strands.1.to_string(),
                e.position.to_string(),
                e.sign.to_string(),
            ])
            .map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn crossing_counts(&self, m: usize) -> Vec<Vec<u32>> {
        let mut n = vec![vec![0; m]; m];
        for e in &self.events {
            n[e.strands.0][e.strands.1] += 1;
        }
        n
    }
}

/// Reads the braid word of `planar` in direction `theta`.
pub fn extract_braid(planar: &PlanarLoop, theta: f64) -> Result<Diagram> {
    let cv = conventions();
    let m = planar.strands();
    let rot = C::from_polar(1.0, -theta);
    let screen = |p: &Vec<C>| -> Vec<(f64, f64)> {
        p.iter()
            .map(|z| {
                let w = z * rot;
                (w.im, w.re)
            })
            .collect()
    };
    let mut cur = screen(&planar.points[0]);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| cur[a].0.partial_cmp(&cur[b].0).unwrap());
    let mut pos = vec![0usize; m];
    for (k, &s) in order.iter().enumerate() {
        pos[s] = k;
    }
    let scale = planar.points[0].iter().map(|z| z.norm()).fold(1.0, f64::max);
    for k in 1..m {
        if cur[order[k]].0 - cur[order[k - 1]].0 < 1e-12 * scale {
            return Err(Error::NonGenericDirection(theta));
        }
    }
    let mut letters = Vec::new();
    let mut events = Vec::new();
    let mut pending: Vec<(f64, usize, usize, f64)> = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for k in 1..planar.points.len() {
        let next = screen(&planar.points[k]);
        let (t0, t1) = (planar.params[k - 1], planar.params[k]);
        pending.clear();
        for i in 0..m {
            for j in (i + 1)..m {
                let d0 = cur[i].0 - cur[j].0;
                let d1 = next[i].0 - next[j].0;
                if d1 == 0.0 {
                    return Err(Error::NonGenericDirection(theta));
                }
                if (d0 > 0.0) == (d1 > 0.0) {
                    continue;
                }
                let lam = d0 / (d0 - d1);
                // Transversality: angle between the relative motion and the
                // screen normal at the crossing.
                let a = planar.points[k - 1][i] - planar.points[k - 1][j];
                let b = planar.points[k][i] - planar.points[k][j];
                let d = a + (b - a) * lam;
                let v = b - a;
                let sin = (v.im * d.re - v.re * d.im).abs() / (v.norm() * d.norm());
                if !(sin >= cv.genericity_min_sin_angle) {
                    return Err(Error::NonGenericDirection(theta));
                }
                pending.push((lam, i, j, d.re * rot.re - d.im * rot.im));
            }
        }
        pending.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for &(lam, i, j, depth_diff) in &pending {
            let t = t0 + lam * (t1 - t0);
            if t - last_t < cv.genericity_min_dt {
                return Err(Error::NonGenericDirection(theta));
            }
            last_t = t;
            let (lo, hi) = if pos[i] < pos[j] { (i, j) } else { (j, i) };
            if pos[hi] != pos[lo] + 1 {
                return Err(Error::NonGenericDirection(theta));
            }
            // depth_diff = h_i - h_j at the crossing.
            let over = if depth_diff > 0.0 { i } else { j };
            let under = if over == i { j } else { i };
            let position = pos[lo] + 1;
            let sign = if over == lo { 1 } else { -1 };
            letters.push(sign * position as i32);
            events.push(CrossingEvent { t, strands: (over, under), sign, over, position });
            pos.swap(lo, hi);
            order.swap(position - 1, position);
        }
        cur = next;
    }
    Ok(Diagram { word: BraidWord { strands: m, letters }, events })
}

/// `n_ij(θ)`: how often strand `i` passes over strand `j`.
pub fn crossing_counts(planar: &PlanarLoop, theta: f64) -> Result<Vec<Vec<u32>>> {
    Ok(extract_braid(planar, theta)?.crossing_counts(planar.strands()))
}

/// A direction with a generic diagram in which `n_ij(θ) ≤ C ∫|θ'_ij|` for
/// every ordered pair, drawn uniformly with verification.
pub fn choose_direction<R: Rng + ?Sized>(planar: &PlanarLoop, c: f64, rng: &mut R) -> Result<(f64, Diagram)> {
    let m = planar.strands() as f64;
    if !(c > m * (m - 1.0) / 2.0) {
        return Err(Error::Invalid(format!("direction constant {c} must exceed m(m-1)/2 = {}", m * (m - 1.0) / 2.0)));
    }
    let mm = planar.strands();
    let mut budget_cap = vec![vec![0.0; mm]; mm];
    for i in 0..mm {
        for j in 0..mm {
            if i != j {
                budget_cap[i][j] = c * planar.abs_winding(i, j);
            }
        }
    }
    let budget = conventions().direction_retry_budget;
    for _ in 0..budget {
        let theta = rng.random_range(0.0..2.0 * PI);
        let diagram = match extract_braid(planar, theta) {
            Ok(d) => d,
            Err(Error::NonGenericDirection(_)) => continue,
            Err(e) => return Err(e),
        };
        let n = diagram.crossing_counts(mm);
        let ok = (0..mm).all(|i| (0..mm).all(|j| i == j || n[i][j] as f64 <= budget_cap[i][j] + 1e-9));
        if ok {
            return Ok((theta, diagram));
        }
    }
    Err(Error::DirectionSearchExhausted(budget))
}

/// Length of the freely reduced word read from the loop in a verified
/// direction; an upper bound for the word norm of its class.
pub fn word_norm_bound<R: Rng + ?Sized>(lp: &Loop, c: f64, rng: &mut R) -> Result<usize> {
    let planar = planarize(lp)?;
    let (_, d) = choose_direction(&planar, c, rng)?;
    Ok(d.word.free_reduce().len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{basepoint, sample_configuration_with, trace_loop, PathSystem};
    use crate::flows::{FlowSpec, RadialProfile};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn orbit_loop(turns: f64, samples: usize) -> PlanarLoop {
        let pts = (0..=samples)
            .map(|k| {
                let a = 2.0 * PI * turns * k as f64 / samples as f64 + 0.3;
                let z = C::from_polar(1.0, a);
                vec![z, -z]
            })
            .collect();
        PlanarLoop::from_points(pts).unwrap()
    }

    #[test]
    fn text_format_round_trip() {
        let w: BraidWord = "4: 1 -2 3".parse().unwrap();
        assert_eq!(w.strands(), 4);
        assert_eq!(w.letters(), &[1, -2, 3]);
        assert_eq!(w.to_string(), "4: 1 -2 3");
        assert_eq!("3:".parse::<BraidWord>().unwrap(), BraidWord::identity(3));
        assert!("3: 3".parse::<BraidWord>().is_err());
        assert!("x".parse::<BraidWord>().is_err());
    }

    #[test]
    fn full_twist_exponent_sum_and_purity() {
        for m in 2..7 {
            let d = BraidWord::full_twist(m);
            assert_eq!(d.exponent_sum(), (m * (m - 1)) as i64);
            assert!(d.is_pure());
        }
        assert!(!BraidWord::new(3, vec![1]).unwrap().is_pure());
    }

    #[test]
    fn free_reduction_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let letters: Vec<i32> = (0..rng.random_range(0..20))
                .map(|_| rng.random_range(1..4) * if rng.random_bool(0.5) { 1 } else { -1 })
                .collect();
            let w = BraidWord::new(4, letters).unwrap();
            let r = w.free_reduce();
            assert!(r.len() <= w.len());
            assert_eq!(r.free_reduce(), r);
            assert_eq!(r.permutation(), w.permutation());
            assert!(w.concat(&w.inverse()).unwrap().free_reduce().is_empty());
        }
    }

    #[test]
    fn counterclockwise_orbit_reads_sigma_one_squared() {
        let planar = orbit_loop(1.0, 400);
        let d = extract_braid(&planar, 0.0).unwrap();
        assert_eq!(d.word.to_string(), "2: 1 1");
        let n = d.crossing_counts(2);
        assert_eq!(n[0][1] + n[1][0], 2);
        assert!((planar.abs_winding(0, 1) - 1.0).abs() < 1e-12);
        let back = extract_braid(&orbit_loop(-1.0, 400), 0.7).unwrap();
        assert_eq!(back.word.to_string(), "2: -1 -1");
    }

    #[test]
    fn constant_loop_reads_empty_word() {
        let pts = vec![vec![C::new(0.0, 0.0), C::new(1.0, 0.2), C::new(-1.0, 0.5)]; 5];
        let planar = PlanarLoop::from_points(pts).unwrap();
        assert!(extract_braid(&planar, 0.1).unwrap().word.is_empty());
    }

    #[test]
    fn sigma_one_sigma_two_inverse_from_motions() {
        // θ = 0: screen Im p, depth Re p. Strands start at heights 0, 1, 2.
        // Strand 0 rises over strand 1 (depth +1): σ_1. Then strand 0 (now
        // in slot 2) rises under strand 2 (depth -1): the strand moving up
        // from slot 2 is under, so σ_2⁻¹.
        let planar = PlanarLoop::from_points(vec![
            vec![C::new(0.0, 0.0), C::new(0.0, 1.0), C::new(0.0, 2.0)],
            vec![C::new(1.0, 0.5), C::new(0.0, 1.0), C::new(0.0, 2.0)],
            vec![C::new(1.0, 1.5), C::new(0.0, 1.0), C::new(0.0, 2.0)],
            vec![C::new(-1.0, 1.5), C::new(0.0, 1.0), C::new(0.0, 2.0)],
            vec![C::new(-1.0, 2.5), C::new(0.0, 1.0), C::new(0.0, 2.0)],
        ])
        .unwrap();
        let d = extract_braid(&planar, 0.0).unwrap();
        assert_eq!(d.word.to_string(), "3: 1 -2");
        assert_eq!(d.events[0].over, 0);
        assert_eq!(d.events[1].over, 2);
    }

    #[test]
    fn tangential_direction_is_rejected() {
        // Strand 1 grazes strand 0's screen level nearly tangentially.
        let planar = PlanarLoop::from_points(vec![
            vec![C::new(0.0, 0.0), C::new(-1.0, 1e-7)],
            vec![C::new(0.0, 0.0), C::new(-3.0, -1e-7)],
        ])
        .unwrap();
        assert!(matches!(extract_braid(&planar, 0.0), Err(Error::NonGenericDirection(_))));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Other directions see a transverse crossing.
        assert!(choose_direction(&planar, 2.0, &mut rng).is_ok());
    }

    #[test]
    fn orbit_every_direction_is_admissible() {
        let planar = orbit_loop(1.0, 1000);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let th = rng.random_range(0.0..2.0 * PI);
            let n = crossing_counts(&planar, th).unwrap();
            assert_eq!(n[0][1], 1);
            assert_eq!(n[1][0], 1);
        }
        let (_, d) = choose_direction(&planar, 1.01, &mut rng).unwrap();
        assert_eq!(d.word.len(), 2);
    }

    #[test]
    fn reversed_loop_reads_inverse_word() {
        let flow = FlowSpec::rotational(RadialProfile::height(), 2.0);
        let q = basepoint(5, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut done = 0;
        while done < 20 {
            let (x, _) = sample_configuration_with(&mut rng, 5).unwrap();
            let Ok(lp) = trace_loop(&flow, &x, &q, PathSystem::Geodesic, 1e-3) else { continue };
            let planar = planarize(&lp).unwrap();
            let th = rng.random_range(0.0..2.0 * PI);
            let (Ok(a), Ok(b)) = (extract_braid(&planar, th), extract_braid(&planarize(&lp.reversed()).unwrap(), th)) else {
                continue;
            };
            assert!(a.word.is_pure());
            assert!(a.word.concat(&b.word).unwrap().free_reduce().is_empty());
            assert_eq!(b.word, a.word.inverse());
            done += 1;
        }
    }

    #[test]
    fn planarize_is_mobius_invariant() {
        use crate::sphere::Mobius;
        let flow = FlowSpec::rotational(RadialProfile::height(), 1.0);
        let q = basepoint(5, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (x, _) = sample_configuration_with(&mut rng, 5).unwrap();
        let lp = trace_loop(&flow, &x, &q, PathSystem::Geodesic, 1e-3).unwrap();
        let m = Mobius::new(C::new(0.3, 1.0), C::new(-2.0, 0.1), C::new(0.7, 0.0), C::new(1.0, -0.4)).unwrap();
        let moved = lp.map_points(|p| m.apply(p));
        let a = planarize(&lp).unwrap();
        let b = planarize(&moved).unwrap();
        for (pa, pb) in a.points.iter().zip(&b.points) {
            for (u, v) in pa.iter().zip(pb) {
                assert!((u - v).norm() < 1e-8 * (1.0 + u.norm()));
            }
        }
    }

    #[test]
    fn four_point_loops_wind_around_punctures() {
        let flow = FlowSpec::rotational(RadialProfile::height(), 3.0);
        let q = basepoint(4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (x, _) = sample_configuration_with(&mut rng, 4).unwrap();
        let lp = trace_loop(&flow, &x, &q, PathSystem::Geodesic, 1e-3).unwrap();
        let planar = planarize(&lp).unwrap();
        assert_eq!(planar.strands(), 3);
        for j in [1, 2] {
            let w = planar.winding(0, j);
            assert!((w - w.round()).abs() < 1e-9, "{w}");
        }
        let d = extract_braid(&planar, 0.4).unwrap();
        assert!(d.word.is_pure());
        // Linking of the moving strand with each puncture matches the winding.
        let lk = d.word.exponent_sum();
        let total = (planar.winding(0, 1) + planar.winding(0, 2) + planar.winding(1, 2)).round() as i64;
        assert_eq!(lk, 2 * total);
    }

    #[test]
    fn direction_average_of_crossings_is_total_angle_variation() {
        let flow = FlowSpec::rotational(RadialProfile::height(), 2.0);
        let q = basepoint(5, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let (x, _) = sample_configuration_with(&mut rng, 5).unwrap();
            let planar = planarize(&trace_loop(&flow, &x, &q, PathSystem::Geodesic, 1e-3).unwrap()).unwrap();
            let m = planar.strands();
            let dirs = 256;
            let mut sum = vec![vec![0.0; m]; m];
            let mut used = 0;
            for k in 0..dirs {
                if let Ok(c) = crossing_counts(&planar, 2.0 * PI * (k as f64 + 0.5) / dirs as f64) {
                    used += 1;
                    for (row, crow) in sum.iter_mut().zip(&c) {
                        for (s, &n) in row.iter_mut().zip(crow) {
                            *s += n as f64;
                        }
                    }
                }
            }
            for i in 0..m {
                for j in (i + 1)..m {
                    let exact = planar.abs_winding(i, j);
                    let avg = sum[i][j] / used as f64;
                    assert!((avg - exact).abs() <= 0.02 * exact + 1e-12, "{i},{j}: {avg} vs {exact}");
                }
            }
        }
    }
}
