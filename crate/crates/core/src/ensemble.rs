//! Reproducible disorder draws and deterministic ensemble reduction.
//!
//! Realization `r` is generated from a ChaCha8 stream keyed by `(seed, r)`;
//! the `k`-th draw of that stream is the phase of momentum index `k`. Work is
//! split into fixed blocks of realizations, each summed in index order, and
//! the blocks are merged in index order, so results do not depend on the
//! number of workers.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::floquet::DisorderRealization;

const BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleSpec {
    pub seed: u64,
    pub n_realizations: usize,
    pub workers: Option<usize>,
}

impl EnsembleSpec {
    pub fn new(seed: u64, n_realizations: usize) -> Self {
        Self {
            seed,
            n_realizations,
            workers: None,
        }
    }

    pub fn with_workers(mut self, workers: Option<usize>) -> Self {
        self.workers = workers;
        self
    }
}

pub fn sample_disorder(spec: &EnsembleSpec, index: usize, n: usize) -> Result<DisorderRealization> {
    if index >= spec.n_realizations {
        return Err(Error::RealizationIndex {
            index,
            count: spec.n_realizations,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let alpha = (0..n)
        .map(|_| {
            let a = TAU * rng.random::<f64>();
            if a >= TAU {
                0.0
            } else {
                a
            }
        })
        .collect();
    DisorderRealization::new(alpha)
}

/// Exact moment `E[exp(-i k alpha / 2)]` for `alpha` uniform on [0, 2pi).
pub fn fractional_moment(k: u32) -> Complex64 {
    match k {
        0 => Complex64::new(1.0, 0.0),
        k if k % 2 == 0 => Complex64::new(0.0, 0.0),
        k => Complex64::new(0.0, -2.0 / (k as f64 * PI)),
    }
}

/// Value type that can be averaged with a scalar standard error.
pub trait Sample: Copy + Send + Sync + Default + 'static {
    fn add(self, other: Self) -> Self;
    fn sub(self, other: Self) -> Self;
    fn scale(self, s: f64) -> Self;
    /// `Re(conj(a) b)`, so that `dot(a, a) = |a|^2`.
    fn dot(self, other: Self) -> f64;
}

impl Sample for f64 {
    fn add(self, o: f64) -> f64 {
        self + o
    }
    fn sub(self, o: f64) -> f64 {
        self - o
    }
    fn scale(self, s: f64) -> f64 {
        self * s
    }
    fn dot(self, o: f64) -> f64 {
        self * o
    }
}

impl Sample for Complex64 {
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn dot(self, o: Self) -> f64 {
        (self.conj() * o).re
    }
}

/// Streaming mean / sum of squared deviations (Welford, merged with Chan's rule).
#[derive(Debug, Clone)]
pub struct Accumulator<T: Sample> {
    count: usize,
    mean: Vec<T>,
    m2: Vec<f64>,
}

impl<T: Sample> Accumulator<T> {
    pub fn new(len: usize) -> Self {
        Self {
            count: 0,
            mean: vec![T::default(); len],
            m2: vec![0.0; len],
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.mean.len() {
            return Err(Error::SizeMismatch {
                expected: self.mean.len(),
                found: values.len(),
            });
        }
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        for ((m, q), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(values) {
            let delta = x.sub(*m);
            *m = m.add(delta.scale(inv));
            *q += delta.dot(x.sub(*m));
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &Accumulator<T>) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i].sub(self.mean[i]);
            self.mean[i] = self.mean[i].add(delta.scale(nb / n));
            self.m2[i] += other.m2[i] + delta.dot(delta) * na * nb / n;
        }
        self.count += other.count;
    }

    pub fn finish(self) -> EnsembleStats<T> {
        let c = self.count as f64;
        let stderr = self
            .m2
            .iter()
            .map(|&q| {
                if self.count < 2 {
                    0.0
                } else {
                    (q.max(0.0) / (c - 1.0) / c).sqrt()
                }
            })
            .collect();
        EnsembleStats {
            mean: self.mean,
            stderr,
            count: self.count,
        }
    }
}

/// Ensemble mean and standard error of the mean, elementwise.
///
/// For complex entries the error is `sqrt(E|z - mean|^2 / (M - 1) / M)`, which
/// bounds the modulus of the deviation of the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats<T> {
    pub mean: Vec<T>,
    pub stderr: Vec<f64>,
    pub count: usize,
}

fn run_pool<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Averages `observable(index)` over all realizations of `spec`.
///
/// Every call must return the same length. The first failing realization (in
/// index order) aborts the run and is reported with its index.
pub fn ensemble_average<T, F>(spec: &EnsembleSpec, observable: F) -> Result<EnsembleStats<T>>
where
    T: Sample,
    F: Fn(usize) -> Result<Vec<T>> + Sync,
{
    if spec.n_realizations == 0 {
        return Err(Error::param("realizations", "must be >= 1"));
    }
    let m = spec.n_realizations;
    let blocks = m.div_ceil(BLOCK);
    let partials: Vec<Result<Accumulator<T>>> = run_pool(spec.workers, || {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut acc: Option<Accumulator<T>> = None;
                for index in b * BLOCK..((b + 1) * BLOCK).min(m) {
                    let values = observable(index).map_err(|e| Error::Realization {
                        index,
                        source: Box::new(e),
                    })?;
                    let a = acc.get_or_insert_with(|| Accumulator::new(values.len()));
                    a.push(&values).map_err(|e| Error::Realization {
                        index,
                        source: Box::new(e),
                    })?;
                }
                Ok(acc.expect("blocks are non-empty"))
            })
            .collect()
    })?;
    let mut total: Option<Accumulator<T>> = None;
    for p in partials {
        let p = p?;
        match total.as_mut() {
            None => total = Some(p),
            Some(t) => {
                if t.mean.len() != p.mean.len() {
                    return Err(Error::SizeMismatch {
                        expected: t.mean.len(),
                        found: p.mean.len(),
                    });
                }
                t.merge(&p)
            }
        }
    }
    Ok(total.expect("at least one block").finish())
}

/// Runs `f(index)` for every realization and returns results in index order.
pub fn ensemble_map<R, F>(spec: &EnsembleSpec, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> Result<R> + Sync,
{
    run_pool(spec.workers, || {
        (0..spec.n_realizations)
            .into_par_iter()
            .map(|index| {
                f(index).map_err(|e| Error::Realization {
                    index,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<R>>>()
    })?
}
