//! Ensemble reducers with a fixed summation order.
//!
//! Paths are split into fixed-size chunks; each chunk is reduced sequentially
//! and chunk results are merged in index order, so the result is identical
//! for any number of worker threads.

use rayon::prelude::*;

use crate::error::Result;

const CHUNK: usize = 256;

/// Per-coordinate running mean and centred second moment (Welford / Chan).
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    pub fn new(width: usize) -> Self {
        Self { count: 0, mean: vec![0.0; width], m2: vec![0.0; width] }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, values: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(values) {
            let delta = x - *m;
            *m += delta / n;
            *s += delta * (x - *m);
        }
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.count += other.count;
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self, i: usize) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2[i] / (self.count as f64 - 1.0)
        }
    }

    pub fn std_err(&self, i: usize) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance(i) / self.count as f64).sqrt()
        }
    }
}

/// Runs `observe(path, out)` for every path and accumulates the `width`
/// observables it writes.
pub fn ensemble<F>(paths: usize, width: usize, observe: F) -> Result<Moments>
where
    F: Fn(usize, &mut [f64]) -> Result<()> + Sync,
{
    let chunks = paths.div_ceil(CHUNK);
    let partial: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Moments::new(width);
            let mut buf = vec![0.0; width];
            for path in c * CHUNK..((c + 1) * CHUNK).min(paths) {
                buf.iter_mut().for_each(|v| *v = 0.0);
                observe(path, &mut buf)?;
                acc.push(&buf);
            }
            Ok(acc)
        })
        .collect::<Vec<Result<Moments>>>()
        .into_iter()
        .collect::<Result<_>>()?;
    let mut total = Moments::new(width);
    for m in &partial {
        total.merge(m);
    }
    Ok(total)
}

/// Ordered parallel map over path indices. On failure the error of the
/// lowest failing path is returned.
pub fn map_paths<T, F>(paths: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let out: Vec<Result<T>> = (0..paths).into_par_iter().map(|p| f(p)).collect();
    out.into_iter().collect()
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
