//! Seeded Monte Carlo reduction shared by the estimators.
//!
//! Sample `i` draws from ChaCha8 stream `i` of the run seed, so a result
//! depends only on `(seed, samples)` and never on the worker count. The
//! reduction runs in index order after the parallel map.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Random stream of sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary { mean: f64::NAN, stderr: f64::NAN, n };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Summary { mean, stderr: (var / n as f64).sqrt(), n }
}

/// Runs `f(index, rng)` for every sample on `workers` threads (0 = rayon
/// default) and returns the values in index order.
pub fn run<T, F>(samples: usize, seed: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> Result<T> + Sync,
{
    let job = || {
        (0..samples as u64)
            .into_par_iter()
            .map(|i| f(i, &mut sample_rng(seed, i)))
            .collect::<Result<Vec<T>>>()
    };
    if workers == 0 {
        return job();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?
        .install(job)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn worker_count_does_not_change_results() {
        let f = |_: u64, r: &mut ChaCha8Rng| Ok(r.random::<f64>());
        let a = run(200, 9, 1, f).unwrap();
        let b = run(200, 9, 3, f).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        assert_eq!(summarize(&a), summarize(&b));
    }

    #[test]
    fn summary_of_constant_and_pair() {
        let s = summarize(&[2.0; 5]);
        assert_eq!((s.mean, s.stderr), (2.0, 0.0));
        let s = summarize(&[0.0, 2.0]);
        assert!((s.stderr - 1.0).abs() < 1e-15);
    }
}
