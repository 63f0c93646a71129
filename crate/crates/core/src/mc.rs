//! Deterministic Monte Carlo plumbing.
//!
//! Every sample draws from its own ChaCha stream keyed by `(seed, domain,
//! index)`, and reductions run in index order, so results do not depend on
//! how the work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Independent random streams for separate parts of a simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Doppler = 1,
    Ensemble = 2,
    Histogram = 3,
    Preselection = 4,
    DropRecapture = 5,
    Bootstrap = 6,
    Fit = 7,
}

pub fn substream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Runs `f(index, rng)` for every index and returns the outputs in index order.
pub fn map_indexed<T, F>(seed: u64, domain: Domain, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, domain, i as u64);
            f(i, &mut rng)
        })
        .collect()
}

/// Mean signal and standard error of the mean on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceResult {
    pub t_s: Vec<f64>,
    pub signal: Vec<f64>,
    pub stderr: Vec<f64>,
    pub trials: usize,
}

impl TraceResult {
    /// Column-wise mean and standard error of `rows` (one row per sample), in row order.
    pub fn from_samples(t_s: Vec<f64>, rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let k = t_s.len();
        let mut mean = vec![0.0; k];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n.max(1) as f64);
        let mut var = vec![0.0; k];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m).powi(2);
            }
        }
        let stderr = var
            .iter()
            .map(|v| if n > 1 { (v / (n - 1) as f64 / n as f64).sqrt() } else { 0.0 })
            .collect();
        TraceResult { t_s, signal: mean, stderr, trials: n }
    }
}

/// Mean and standard error of a sample, summed in order.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_distinct_and_repeatable() {
        let a: u64 = substream(1, Domain::Doppler, 0).random();
        let b: u64 = substream(1, Domain::Doppler, 1).random();
        let c: u64 = substream(1, Domain::Ensemble, 0).random();
        let a2: u64 = substream(1, Domain::Doppler, 0).random();
        assert_eq!(a, a2);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| map_indexed(7, Domain::Fit, 500, |_, r| r.random::<f64>()))
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn trace_statistics() {
        let rows = vec![vec![1.0, 0.0], vec![3.0, 0.0]];
        let t = TraceResult::from_samples(vec![0.0, 1.0], &rows);
        assert_eq!(t.signal, vec![2.0, 0.0]);
        assert!((t.stderr[0] - 1.0).abs() < 1e-15);
        assert_eq!(mean_stderr(&[1.0, 3.0]), (2.0, 1.0));
    }
}
