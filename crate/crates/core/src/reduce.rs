//! Order-independent parallel reduction.
//!
//! Work is cut into fixed-size chunks of consecutive indices. Each chunk is
//! folded sequentially, and chunk summaries are merged by a pairwise tree whose
//! shape depends only on the number of chunks. The result is therefore
//! bitwise identical for any worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Indices per chunk. Changing this changes results in the last bits.
pub const CHUNK: usize = 512;

/// Pairwise (cascade) sum with a fixed recursion shape.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Running count/mean/M2 with the Chan et al. merge.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        Moments {
            n,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.n as f64 * w,
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

fn merge_tree(parts: &[Vec<Moments>]) -> Vec<Moments> {
    match parts.len() {
        0 => Vec::new(),
        1 => parts[0].clone(),
        len => {
            let mid = len / 2;
            let left = merge_tree(&parts[..mid]);
            let right = merge_tree(&parts[mid..]);
            left.iter().zip(&right).map(|(l, r)| l.merge(r)).collect()
        }
    }
}

/// Runs `f` inside a pool with `workers` threads (`None` uses the global pool).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Evaluates a `width`-vector for every index in `0..n` and returns per-component
/// moments.
///
/// `init` builds per-chunk scratch state; `sample` writes one vector of outputs.
pub fn reduce_indexed<S, I, F>(n: u64, width: usize, workers: Option<usize>, init: I, sample: F) -> Result<Vec<Moments>>
where
    I: Fn() -> S + Sync + Send,
    F: Fn(u64, &mut S, &mut [f64]) -> Result<()> + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK as u64);
    let run = || {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut scratch = init();
                let mut out = vec![0.0; width];
                let mut acc = vec![Moments::default(); width];
                let start = c * CHUNK as u64;
                let end = (start + CHUNK as u64).min(n);
                for i in start..end {
                    sample(i, &mut scratch, &mut out)?;
                    for (k, (m, &v)) in acc.iter_mut().zip(out.iter()).enumerate() {
                        if !v.is_finite() {
                            return Err(Error::Numeric(format!(
                                "non-finite sample {v} at index {i}, output {k}"
                            )));
                        }
                        m.push(v);
                    }
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()
    };
    let parts = with_workers(workers, run)??;
    if parts.is_empty() {
        return Ok(vec![Moments::default(); width]);
    }
    Ok(merge_tree(&parts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut seq = Moments::default();
        xs.iter().for_each(|&x| seq.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        let m = a.merge(&b);
        assert_eq!(m.n, seq.n);
        assert!((m.mean - seq.mean).abs() < 1e-12);
        assert!((m.m2 - seq.m2).abs() < 1e-8);
    }

    #[test]
    fn reduction_is_independent_of_workers() {
        let f = |i: u64, _: &mut (), out: &mut [f64]| {
            let x = ((i as f64) * 0.618_033_988_749_895).fract();
            out[0] = x.sin() * 1e3;
            out[1] = x * x;
            Ok(())
        };
        let reference = reduce_indexed(10_007, 2, Some(1), || (), f).unwrap();
        for w in [2, 4, 16] {
            let r = reduce_indexed(10_007, 2, Some(w), || (), f).unwrap();
            for (a, b) in r.iter().zip(&reference) {
                assert_eq!(a.mean.to_bits(), b.mean.to_bits());
                assert_eq!(a.m2.to_bits(), b.m2.to_bits());
            }
        }
    }

    #[test]
    fn non_finite_sample_is_an_error() {
        let r = reduce_indexed(
            10,
            1,
            None,
            || (),
            |i, _, out| {
                out[0] = if i == 7 { f64::NAN } else { 1.0 };
                Ok(())
            },
        );
        assert!(matches!(r, Err(Error::Numeric(_))));
    }

    #[test]
    fn pairwise_sum_of_powers_of_two_is_exact() {
        let xs = vec![2f64.powi(-10); 1024];
        assert_eq!(pairwise_sum(&xs), 1.0);
    }
}
