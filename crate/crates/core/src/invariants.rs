//! Link invariants of braid closures and the quasimorphisms built on them.
//!
//! The signature of a closure `β̂` is the signature of `V + Vᵀ`, where `V`
//! is the Seifert matrix of the Bennequin surface of the word `β` (one disk
//! per strand, one band per letter). Sign convention: the closure of the
//! positive word `σ_1³` on two strands has signature −2.
//!
//! An independent Goeritz-matrix computation on the closed braid diagram is
//! kept as an oracle for the Seifert route.

use crate::braids::BraidWord;
use crate::conventions::conventions;
use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Exact rational: machine-sized while it fits, big otherwise.
#[derive(Debug, Clone)]
enum Q {
    S(i128, i128),
    B(BigRational),
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.abs()
}

impl Q {
    fn int(v: i64) -> Q {
        Q::S(v as i128, 1)
    }

    fn small(n: i128, d: i128) -> Q {
        let g = gcd(n, d).max(1);
        let (n, d) = (n / g, d / g);
        if d < 0 {
            Q::S(-n, -d)
        } else {
            Q::S(n, d)
        }
    }

    fn big(&self) -> BigRational {
        match self {
            Q::S(n, d) => BigRational::new(BigInt::from(*n), BigInt::from(*d)),
            Q::B(b) => b.clone(),
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            Q::S(n, _) => *n == 0,
            Q::B(b) => b.is_zero(),
        }
    }

    fn signum(&self) -> i64 {
        match self {
            Q::S(n, _) => n.signum() as i64,
            Q::B(b) => {
                if b.is_positive() {
                    1
                } else if b.is_negative() {
                    -1
                } else {
                    0
                }
            }
        }
    }

    fn add(&self, o: &Q) -> Q {
        if let (Q::S(a, b), Q::S(c, d)) = (self, o) {
            let r = (|| Some((a.checked_mul(*d)?.checked_add(c.checked_mul(*b)?)?, b.checked_mul(*d)?)))();
            if let Some((n, den)) = r {
                return Q::small(n, den);
            }
        }
        Q::B(self.big() + o.big())
    }

    fn mul(&self, o: &Q) -> Q {
        if let (Q::S(a, b), Q::S(c, d)) = (self, o) {
            if let (Some(n), Some(den)) = (a.checked_mul(*c), b.checked_mul(*d)) {
                return Q::small(n, den);
            }
        }
        Q::B(self.big() * o.big())
    }

    fn neg(&self) -> Q {
        match self {
            Q::S(n, d) => Q::S(-n, *d),
            Q::B(b) => Q::B(-b.clone()),
        }
    }

    fn recip(&self) -> Q {
        match self {
            Q::S(n, d) => Q::small(*d, *n),
            Q::B(b) => Q::B(b.recip()),
        }
    }
}

/// Signature of a symmetric integer matrix given by its entries
/// (both `(i, j)` and `(j, i)` must be listed for off-diagonal terms; repeated
/// positions are summed). Exact symmetric Gaussian elimination over ℚ.
pub fn symmetric_signature(n: usize, entries: &[(usize, usize, i64)]) -> i64 {
    let mut rows: Vec<HashMap<usize, Q>> = vec![HashMap::new(); n];
    for &(i, j, v) in entries {
        if v == 0 {
            continue;
        }
        let e = rows[i].entry(j).or_insert(Q::int(0));
        *e = e.add(&Q::int(v));
    }
    for r in rows.iter_mut() {
        r.retain(|_, v| !v.is_zero());
    }
    let mut alive = vec![true; n];
    let mut sig = 0i64;

    fn eliminate(rows: &mut [HashMap<usize, Q>], alive: &mut [bool], p: usize) -> i64 {
        let piv = rows[p].get(&p).cloned().expect("nonzero pivot");
        let inv = piv.recip();
        let nbrs: Vec<(usize, Q)> = rows[p].iter().filter(|(&j, _)| j != p).map(|(&j, v)| (j, v.clone())).collect();
        for (i, a_ip) in &nbrs {
            let f = a_ip.mul(&inv).neg();
            for (j, a_pj) in &nbrs {
                let delta = f.mul(a_pj);
                let e = rows[*i].entry(*j).or_insert(Q::int(0));
                *e = e.add(&delta);
                if e.is_zero() {
                    rows[*i].remove(j);
                }
            }
            rows[*i].remove(&p);
        }
        rows[p].clear();
        alive[p] = false;
        piv.signum()
    }

    for k in 0..n {
        if !alive[k] {
            continue;
        }
        loop {
            if rows[k].get(&k).is_some_and(|v| !v.is_zero()) {
                sig += eliminate(&mut rows, &mut alive, k);
                break;
            }
            let partner = rows[k].keys().copied().filter(|&j| j != k).min();
            let Some(j) = partner else {
                alive[k] = false;
                break;
            };
            if rows[j].get(&j).is_some_and(|v| !v.is_zero()) {
                sig += eliminate(&mut rows, &mut alive, j);
                continue;
            }
            // Both diagonals vanish: replace e_k by e_k + e_j.
            let row_j: Vec<(usize, Q)> = rows[j].iter().map(|(&l, v)| (l, v.clone())).collect();
            let a_kj = rows[k].get(&j).cloned().unwrap();
            for (l, v) in &row_j {
                if *l == k {
                    continue;
                }
                let e = rows[k].entry(*l).or_insert(Q::int(0));
                *e = e.add(v);
                let val = e.clone();
                if val.is_zero() {
                    rows[k].remove(l);
                    rows[*l].remove(&k);
                } else {
                    rows[*l].insert(k, val);
                }
            }
            let diag = a_kj.add(&a_kj);
            rows[k].insert(k, diag);
            sig += eliminate(&mut rows, &mut alive, k);
            break;
        }
    }
    sig
}

/// Seifert matrix of the Bennequin surface of a braid word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeifertMatrix {
    pub size: usize,
    /// Nonzero entries `(row, col, value)`.
    pub entries: Vec<(usize, usize, i64)>,
}

impl SeifertMatrix {
    pub fn dense(&self) -> Vec<Vec<i64>> {
        let mut m = vec![vec![0; self.size]; self.size];
        for &(i, j, v) in &self.entries {
            m[i][j] += v;
        }
        m
    }

    /// Signature of `V + Vᵀ`.
    pub fn signature(&self) -> i64 {
        let mut sym = Vec::with_capacity(2 * self.entries.len());
        for &(i, j, v) in &self.entries {
            sym.push((i, j, v));
            sym.push((j, i, v));
        }
        symmetric_signature(self.size, &sym)
    }
}

/// `H_1` of the Bennequin surface has one generator per pair of
/// consecutive letters with the same generator index; the entries are the
/// linking numbers of those loops with push-offs.
pub fn seifert_matrix(w: &BraidWord) -> SeifertMatrix {
    let x = w.letters();
    let len = x.len();
    let mut next = vec![usize::MAX; len];
    let mut last_seen: HashMap<u32, usize> = HashMap::new();
    for k in (0..len).rev() {
        let g = x[k].unsigned_abs();
        if let Some(&l) = last_seen.get(&g) {
            next[k] = l;
        }
        last_seen.insert(g, k);
    }
    let mut index = vec![usize::MAX; len];
    let mut size = 0;
    for k in 0..len {
        if next[k] != usize::MAX {
            index[k] = size;
            size += 1;
        }
    }
    let mut entries = Vec::new();
    for i in 0..len {
        let hi = next[i];
        if hi == usize::MAX {
            continue;
        }
        let a = index[i];
        let diag = -(x[i].signum() + x[hi].signum()) / 2;
        if diag != 0 {
            entries.push((a, a, diag as i64));
        }
        for j in (i + 1)..=hi {
            let hj = next[j];
            if hj == usize::MAX || hi > hj {
                continue;
            }
            let b = index[j];
            if hi == j {
                if x[j] > 0 {
                    entries.push((b, a, 1));
                } else {
                    entries.push((a, b, -1));
                }
            } else {
                let (gi, gj) = (x[i].unsigned_abs() as i64, x[j].unsigned_abs() as i64);
                if gi - gj == 1 {
                    entries.push((b, a, -1));
                } else if gj - gi == 1 {
                    entries.push((a, b, 1));
                }
            }
        }
    }
    SeifertMatrix { size, entries }
}

/// Conjugates the word to a cyclically reduced one (same closure).
pub fn cyclic_reduce(w: &BraidWord) -> BraidWord {
    let r = w.free_reduce();
    let l = r.letters();
    let mut a = 0;
    let mut b = l.len();
    while b - a >= 2 && l[a] == -l[b - 1] {
        a += 1;
        b -= 1;
    }
    BraidWord::new(r.strands(), l[a..b].to_vec()).expect("subword of a valid word")
}

/// `sign(β̂)`.
pub fn closure_signature(w: &BraidWord) -> i64 {
    seifert_matrix(&cyclic_reduce(w)).signature()
}

pub fn exponent_sum(w: &BraidWord) -> i64 {
    w.exponent_sum()
}

/// Slope of `f(α^k)` in `k`. Signature sequences are affine up to a
/// periodic term, so the fit looks for the smallest period `p ≤ K/3` and the
/// longest tail `k0..K` on which `f(k+p) - f(k)` is constant (at least two
/// differences); the slope is that difference over `p`. When no depth-`K`
/// tail fits, depths `2K` and `4K` are tried before `NonStabilized`.
pub fn homogenize<F: Fn(&BraidWord) -> f64>(f: F, alpha: &BraidWord, depth: usize) -> Result<HomogenizedValue> {
    if depth < 4 {
        return Err(Error::Invalid(format!("homogenization depth {depth} must be at least 4")));
    }
    let tol = conventions().homogenization_residual_tol;
    let mut values: Vec<f64> = Vec::new();
    for k_max in [depth, 2 * depth, 4 * depth] {
        for k in values.len() + 1..=k_max {
            values.push(f(&alpha.pow(k)));
        }
        for period in 1..=k_max / 3 {
            let diffs: Vec<f64> = (0..k_max - period).map(|i| values[i + period] - values[i]).collect();
            for k0 in 1..=diffs.len() - 1 {
                let tail = &diffs[k0 - 1..];
                let mean = tail.iter().sum::<f64>() / tail.len() as f64;
                let residual = tail.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max);
                if residual <= tol {
                    return Ok(HomogenizedValue { value: mean / period as f64, residual, start: k0, period, values });
                }
            }
        }
    }
    let n = values.len() as f64;
    let slope = (values[values.len() - 1] - values[0]) / (n - 1.0);
    let residual = values.iter().enumerate().map(|(i, v)| (v - values[0] - slope * i as f64).abs()).fold(0.0, f64::max);
    Err(Error::NonStabilized { slope, residual })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogenizedValue {
    pub value: f64,
    pub residual: f64,
    /// First power included in the fit.
    pub start: usize,
    /// Period of the bounded oscillation on top of the linear part.
    pub period: usize,
    pub values: Vec<f64>,
}

/// Homogenized signature `sign̄(α)`.
pub fn homogenized_signature(alpha: &BraidWord, depth: usize) -> Result<f64> {
    Ok(homogenize(|w| closure_signature(w) as f64, alpha, depth)?.value)
}

/// `sign̄(Δ²)/lk(Δ²)` on `m` strands, cached per strand count.
pub fn center_ratio(m: usize) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<usize, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&v) = cache.lock().unwrap().get(&m) {
        return Ok(v);
    }
    let delta = BraidWord::full_twist(m);
    let v = homogenized_signature(&delta, conventions().homogenization_depth)? / delta.exponent_sum() as f64;
    cache.lock().unwrap().insert(m, v);
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasimorphismValue {
    pub value: f64,
    pub defect_witness: Option<f64>,
}

/// `s_m(α) = sign̄(α) − (sign̄(Δ²)/lk(Δ²)) lk(α)` for a pure braid `α`.
pub fn s_quasimorphism(alpha: &BraidWord, depth: usize) -> Result<QuasimorphismValue> {
    if !alpha.is_pure() {
        return Err(Error::NotPure);
    }
    let m = alpha.strands();
    if m < 2 {
        return Ok(QuasimorphismValue { value: 0.0, defect_witness: None });
    }
    let h = homogenize(|w| closure_signature(w) as f64, alpha, depth)?;
    let value = h.value - center_ratio(m)? * alpha.exponent_sum() as f64;
    Ok(QuasimorphismValue { value, defect_witness: Some(h.residual) })
}

/// The non-homogenized `sign(α̂) − (sign̄(Δ²)/lk(Δ²)) lk(α)`, differing from
/// `s_m` by a bounded amount.
pub fn s_raw(alpha: &BraidWord) -> Result<f64> {
    let m = alpha.strands();
    if m < 2 {
        return Ok(0.0);
    }
    Ok(closure_signature(alpha) as f64 - center_ratio(m)? * alpha.exponent_sum() as f64)
}

/// CSV table with columns word, strands, lk, signature, s.
pub fn invariant_table_csv(words: &[BraidWord], depth: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["word", "strands", "lk", "signature", "s"]).map_err(|e| Error::Io(e.to_string()))?;
    for b in words {
        let s = if b.is_pure() {
            s_quasimorphism(b, depth).map(|v| v.value.to_string()).unwrap_or_else(|e| format!("{e}"))
        } else {
            String::new()
        };
        w.write_record([
            b.to_string(),
            b.strands().to_string(),
            b.exponent_sum().to_string(),
            closure_signature(b).to_string(),
            s,
        ])
        .map_err(|e| Error::Io(e.to_string()))?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?).map_err(|e| Error::Io(e.to_string()))
}

/// Which gaps of the closed braid diagram are shaded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shading {
    OddGaps,
    EvenGaps,
}

/// Signature of `β̂` from a Goeritz matrix of the closed braid diagram
/// (Gordon–Litherland), computed blockwise over split components.
pub fn goeritz_signature(w: &BraidWord, shading: Shading) -> i64 {
    let m = w.strands();
    let used: Vec<bool> = (1..m).map(|g| w.letters().iter().any(|l| l.unsigned_abs() as usize == g)).collect();
    let mut total = 0;
    let mut g = 1;
    while g < m {
        if !used[g - 1] {
            g += 1;
            continue;
        }
        let start = g;
        while g < m && used[g - 1] {
            g += 1;
        }
        let letters: Vec<i32> = w
            .letters()
            .iter()
            .filter(|l| (start..g).contains(&(l.unsigned_abs() as usize)))
            .map(|l| l.signum() * (l.unsigned_abs() as i32 - start as i32 + 1))
            .collect();
        total += goeritz_connected(g - start + 1, &letters, shading);
    }
    total
}

fn goeritz_connected(m: usize, x: &[i32], shading: Shading) -> i64 {
    // Gap k lies between strand positions k and k+1; gap 0 is the inner
    // disk and gap m the outer region of the closed diagram.
    let shaded = |k: usize| match shading {
        Shading::OddGaps => k % 2 == 1,
        Shading::EvenGaps => k % 2 == 0,
    };
    let count: Vec<usize> = (0..=m)
        .map(|k| x.iter().filter(|l| l.unsigned_abs() as usize == k).count())
        .collect();
    // Regions: gap k contributes max(count, 1) faces, numbered by how many
    // σ_k crossings precede them (cyclically).
    let mut base = vec![usize::MAX; m + 1];
    let mut regions = 0;
    for k in 0..=m {
        if !shaded(k) {
            base[k] = regions;
            regions += count[k].max(1);
        }
    }
    let face = |k: usize, seen: usize| base[k] + if count[k] == 0 { 0 } else { seen % count[k] };
    let mut g = vec![vec![0i64; regions]; regions];
    let mut mu = 0i64;
    let mut seen = vec![0usize; m + 1];
    for &l in x {
        let k = l.unsigned_abs() as usize;
        let eps = l.signum() as i64;
        let (a, b, eta) = if shaded(k) {
            // Unshaded neighbours are the adjacent gaps at this point.
            mu += eps;
            (face(k - 1, seen[k - 1]), face(k + 1, seen[k + 1]), eps)
        } else {
            (face(k, seen[k]), face(k, seen[k] + 1), -eps)
        };
        seen[k] += 1;
        if a != b {
            g[a][a] += eta;
            g[b][b] += eta;
            g[a][b] -= eta;
            g[b][a] -= eta;
        }
    }
    if regions <= 1 {
        return -mu;
    }
    let reduced: Vec<Vec<f64>> = (1..regions).map(|i| (1..regions).map(|j| g[i][j] as f64).collect()).collect();
    let eig = jacobi_eigenvalues(reduced);
    let sign: i64 = eig.iter().map(|&e| if e > 1e-9 { 1 } else if e < -1e-9 { -1 } else { 0 }).sum();
    sign - mu
}

/// Eigenvalues of a small real symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn word(s: &str) -> BraidWord {
        s.parse().unwrap()
    }

    fn random_word(rng: &mut ChaCha8Rng, m: usize, len: usize) -> BraidWord {
        let letters = (0..len)
            .map(|_| rng.random_range(1..m as i32) * if rng.random_bool(0.5) { 1 } else { -1 })
            .collect();
        BraidWord::new(m, letters).unwrap()
    }

    #[test]
    fn anchors() {
        assert_eq!(closure_signature(&word("2: 1 1 1")), -2);
        assert_eq!(closure_signature(&word("2: 1 1")), -1);
        assert_eq!(closure_signature(&word("2: 1")), 0);
        assert_eq!(closure_signature(&word("2: -1 -1 -1")), 2);
        assert_eq!(closure_signature(&BraidWord::identity(4)), 0);
        for shading in [Shading::OddGaps, Shading::EvenGaps] {
            assert_eq!(goeritz_signature(&word("2: 1 1 1"), shading), -2);
            assert_eq!(goeritz_signature(&word("2: 1 1"), shading), -1);
            assert_eq!(goeritz_signature(&word("2: 1"), shading), 0);
        }
    }

    #[test]
    fn figure_eight_is_amphichiral() {
        assert_eq!(closure_signature(&word("3: 1 -2 1 -2")), 0);
    }

    #[test]
    fn seifert_matches_goeritz_on_short_words() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let m = rng.random_range(2..6);
            let len = rng.random_range(0..14);
            let w = random_word(&mut rng, m, len);
            let s = seifert_matrix(&w).signature();
            assert_eq!(s, goeritz_signature(&w, Shading::OddGaps), "{w}");
            assert_eq!(s, goeritz_signature(&w, Shading::EvenGaps), "{w}");
        }
    }

    #[test]
    fn exact_signature_handles_zero_pivots() {
        // [[0,1],[1,0]] has signature 0; [[0,1,0],[1,0,1],[0,1,0]] too.
        assert_eq!(symmetric_signature(2, &[(0, 1, 1), (1, 0, 1)]), 0);
        assert_eq!(symmetric_signature(3, &[(0, 1, 1), (1, 0, 1), (1, 2, 1), (2, 1, 1)]), 0);
        assert_eq!(symmetric_signature(3, &[(0, 0, 2), (1, 1, -3), (2, 2, 5)]), 1);
        assert_eq!(symmetric_signature(0, &[]), 0);
    }

    #[test]
    fn exact_signature_matches_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..300 {
            let n = rng.random_range(1..9);
            let mut dense = vec![vec![0i64; n]; n];
            for i in 0..n {
                for j in i..n {
                    if rng.random_bool(0.4) {
                        let v = rng.random_range(-3..4);
                        dense[i][j] = v;
                        dense[j][i] = v;
                    }
                }
            }
            let entries: Vec<_> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (i, j, dense[i][j])).collect();
            let exact = symmetric_signature(n, &entries);
            let eig = jacobi_eigenvalues(dense.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect());
            let float: i64 = eig.iter().map(|&e| if e > 1e-7 { 1 } else if e < -1e-7 { -1 } else { 0 }).sum();
            assert_eq!(exact, float);
        }
    }

    #[test]
    fn large_words_fall_back_to_big_rationals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_word(&mut rng, 4, 3000);
        let s = closure_signature(&w);
        assert!(s.abs() <= 3000);
        // The inverse word closes up to the mirror image.
        assert_eq!(closure_signature(&w.inverse()), -s);
    }

    #[test]
    fn signature_is_conjugation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let m = rng.random_range(2..6);
            let l1 = rng.random_range(0..13);
            let l2 = rng.random_range(0..13);
            let b = random_word(&mut rng, m, l1);
            let g = random_word(&mut rng, m, l2);
            let conj = g.concat(&b).unwrap().concat(&g.inverse()).unwrap();
            assert_eq!(closure_signature(&conj), closure_signature(&b));
        }
    }

    #[test]
    fn signature_is_stabilization_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let m = rng.random_range(2..5);
            let len = rng.random_range(0..12);
            let b = random_word(&mut rng, m, len);
            let sign = if rng.random_bool(0.5) { 1 } else { -1 };
            let mut letters = b.letters().to_vec();
            letters.push(sign * m as i32);
            let stab = BraidWord::new(m + 1, letters).unwrap();
            assert_eq!(closure_signature(&stab), closure_signature(&b));
        }
    }

    #[test]
    fn torus_link_sequence_and_homogenization() {
        let s = word("2: 1 1");
        let h = homogenize(|w| closure_signature(w) as f64, &s, 8).unwrap();
        assert_eq!(h.values[..4], [-1.0, -3.0, -5.0, -7.0]);
        for (k, v) in h.values.iter().enumerate() {
            assert_eq!(*v, goeritz_signature(&s.pow(k + 1), Shading::OddGaps) as f64);
        }
        assert!((h.value + 2.0).abs() < 1e-12);
        let lk = homogenize(|w| w.exponent_sum() as f64, &word("3: 1 -2 2 2"), 8).unwrap();
        assert!((lk.value - 2.0).abs() < 1e-12 && lk.residual < 1e-12);
        assert_eq!(homogenized_signature(&BraidWord::identity(3), 8).unwrap(), 0.0);
    }

    #[test]
    fn periodic_signature_sequence_homogenizes() {
        // Signatures of powers run 2, 5, 6, 9, 10, …: slope 2 plus a
        // period-2 oscillation, never exactly affine.
        let w = word("3: -1 -2 -2 -1");
        let h = homogenize(|w| closure_signature(w) as f64, &w, 8).unwrap();
        assert_eq!(h.values[..4], [2.0, 5.0, 6.0, 9.0]);
        assert_eq!((h.value, h.period), (2.0, 2));
        let g = homogenize(|w| goeritz_signature(w, Shading::EvenGaps) as f64, &w, 8).unwrap();
        assert_eq!(g.value, h.value);
    }

    #[test]
    fn center_ratio_values() {
        // sign̄(Δ²) on m strands: −m²/2 for even m, −(m²−1)/2 for odd m.
        for m in 2..7usize {
            let mm = m as f64;
            let want = if m % 2 == 0 { -mm * mm / 2.0 } else { -(mm * mm - 1.0) / 2.0 } / (mm * (mm - 1.0));
            assert!((center_ratio(m).unwrap() - want).abs() < 1e-9, "m={m}");
        }
    }

    #[test]
    fn s_vanishes_on_center_and_two_strands() {
        for m in 2..6 {
            let d = BraidWord::full_twist(m);
            assert!(s_quasimorphism(&d, 8).unwrap().value.abs() < 1e-9);
        }
        for k in 1..5 {
            let a = word("2: 1 1").pow(k);
            assert!(s_quasimorphism(&a, 8).unwrap().value.abs() < 1e-9);
        }
        assert_eq!(s_quasimorphism(&word("3: 1"), 8), Err(Error::NotPure));
    }

    #[test]
    fn s_is_invariant_under_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut checked = 0;
        let mut tries = 0;
        while checked < 30 && tries < 3000 {
            tries += 1;
            let w = random_word(&mut rng, 3, 10);
            if !w.is_pure() {
                continue;
            }
            let d = BraidWord::full_twist(3);
            let (Ok(a), Ok(b)) = (s_quasimorphism(&w, 8), s_quasimorphism(&w.concat(&d).unwrap(), 8)) else { continue };
            assert!((a.value - b.value).abs() < 1e-9, "{w}");
            checked += 1;
        }
        assert!(checked >= 10);
    }

    #[test]
    fn defect_of_signature_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut by_len: Vec<i64> = Vec::new();
        for len in [4usize, 8, 16, 32] {
            let mut worst = 0;
            let mut pairs = 0;
            while pairs < 250 {
                let a = random_word(&mut rng, 4, len);
                let b = random_word(&mut rng, 4, len);
                if !a.is_pure() || !b.is_pure() {
                    continue;
                }
                let d = closure_signature(&a.concat(&b).unwrap()) - closure_signature(&a) - closure_signature(&b);
                worst = worst.max(d.abs());
                pairs += 1;
            }
            by_len.push(worst);
        }
        // The defect does not grow with word length.
        assert!(by_len[3] <= by_len[0] + 6, "{by_len:?}");
        assert!(by_len.iter().all(|&d| d <= 8), "{by_len:?}");
    }

    #[test]
    fn table_csv_has_header_and_rows() {
        let csv = invariant_table_csv(&[word("2: 1 1"), word("3: 1 2")], 8).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "word,strands,lk,signature,s");
        assert!(lines[1].starts_with("2: 1 1,2,2,-1,"));
        assert_eq!(lines.len(), 3);
    }
}
