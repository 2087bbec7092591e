//! Monte Carlo validation of the jump measure and the compensated integral.

use super::{compensated_integral, compensated_path, sample_jump_train, Integrand, MarkMeasure, RngStream};
use crate::error::{Error, Result};
use crate::stats::ensemble;

/// Relative tolerance of the count-mean and isometry checks.
pub const RELATIVE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonCountReport {
    pub mean: f64,
    pub variance: f64,
    pub expected: f64,
    pub std_err: f64,
    pub relative_error: f64,
}

impl PoissonCountReport {
    pub fn passed(&self) -> bool {
        if self.expected == 0.0 {
            return self.mean == 0.0;
        }
        self.relative_error <= RELATIVE_TOLERANCE
    }
}

pub fn poisson_count_check(measure: &MarkMeasure, horizon: f64, paths: usize, seed: u64) -> Result<PoissonCountReport> {
    check_paths(paths)?;
    let m = ensemble(paths, 1, |p, out| {
        out[0] = sample_jump_train(measure, horizon, RngStream::new(seed, p as u64))?.len() as f64;
        Ok(())
    })?;
    let expected = measure.rate() * horizon;
    let mean = m.mean(0);
    Ok(PoissonCountReport {
        mean,
        variance: m.variance(0),
        expected,
        std_err: m.std_err(0),
        relative_error: if expected > 0.0 { (mean - expected).abs() / expected } else { mean.abs() },
    })
}

/// Sample correlation of the counts of two mark sets at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountCorrelationReport {
    pub correlation: f64,
    /// Three standard errors of a null correlation.
    pub band: f64,
}

impl CountCorrelationReport {
    pub fn passed(&self) -> bool {
        self.correlation.abs() <= self.band
    }
}

pub fn count_correlation_check<A, B>(
    measure: &MarkMeasure,
    horizon: f64,
    first: A,
    second: B,
    paths: usize,
    seed: u64,
) -> Result<CountCorrelationReport>
where
    A: Fn(&[f64]) -> bool + Sync,
    B: Fn(&[f64]) -> bool + Sync,
{
    check_paths(paths)?;
    let m = ensemble(paths, 3, |p, out| {
        let train = sample_jump_train(measure, horizon, RngStream::new(seed, p as u64))?;
        let a = train.count(horizon, &first) as f64;
        let b = train.count(horizon, &second) as f64;
        out.copy_from_slice(&[a, b, a * b]);
        Ok(())
    })?;
    let n = m.count() as f64;
    let cov = (m.mean(2) - m.mean(0) * m.mean(1)) * n / (n - 1.0);
    let denom = (m.variance(0) * m.variance(1)).sqrt();
    let correlation = if denom > 0.0 { cov / denom } else { 0.0 };
    Ok(CountCorrelationReport { correlation, band: 3.0 / n.sqrt() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsometryReport {
    /// Ensemble mean of `‖∫∫ f q‖²`.
    pub second_moment: f64,
    pub std_err: f64,
    /// `∫_0^T ∫ ‖f‖² β du ds`.
    pub expected: f64,
    pub relative_error: f64,
}

impl IsometryReport {
    pub fn passed(&self) -> bool {
        if self.expected == 0.0 {
            return self.second_moment == 0.0;
        }
        self.relative_error <= RELATIVE_TOLERANCE
    }
}

/// Isometry for the flat semigroup: second moment of the compensated integral
/// against the integrated squared norm.
pub fn ito_isometry_check(
    f: &Integrand,
    measure: &MarkMeasure,
    horizon: f64,
    paths: usize,
    seed: u64,
) -> Result<IsometryReport> {
    check_paths(paths)?;
    let m = ensemble(paths, 1, |p, out| {
        let train = sample_jump_train(measure, horizon, RngStream::new(seed, p as u64))?;
        out[0] = compensated_integral(f, &train, measure, horizon)?.norm_sq();
        Ok(())
    })?;
    let expected = f.square_norm_integral(measure, 0.0, horizon)?;
    let second_moment = m.mean(0);
    Ok(IsometryReport {
        second_moment,
        std_err: m.std_err(0),
        expected,
        relative_error: if expected > 0.0 { (second_moment - expected).abs() / expected } else { second_moment },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleRow {
    pub time: f64,
    /// Largest coordinate of the ensemble mean measured in standard errors.
    pub max_sigmas: f64,
    pub mean_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    pub rows: Vec<MartingaleRow>,
    pub sigmas: f64,
}

impl MartingaleReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.max_sigmas <= self.sigmas)
    }
}

/// Zero-mean check of the compensated integral at every time in `times`,
/// coordinatewise within a `4σ` band.
pub fn martingale_check(
    f: &Integrand,
    measure: &MarkMeasure,
    times: &[f64],
    paths: usize,
    seed: u64,
) -> Result<MartingaleReport> {
    check_paths(paths)?;
    let horizon = times.iter().copied().fold(0.0, f64::max);
    if horizon <= 0.0 {
        return Err(Error::invalid("times", "need at least one positive time"));
    }
    let d = f.dim();
    let m = ensemble(paths, d * times.len(), |p, out| {
        let train = sample_jump_train(measure, horizon, RngStream::new(seed, p as u64))?;
        for (k, z) in compensated_path(f, &train, measure, times)?.iter().enumerate() {
            out[k * d..(k + 1) * d].copy_from_slice(z.as_slice());
        }
        Ok(())
    })?;
    let rows = times
        .iter()
        .enumerate()
        .map(|(k, &time)| {
            let mut max_sigmas: f64 = 0.0;
            let mut norm = 0.0;
            for i in k * d..(k + 1) * d {
                let se = m.std_err(i);
                let mean = m.mean(i);
                norm += mean * mean;
                let s = if se > 0.0 { mean.abs() / se } else if mean == 0.0 { 0.0 } else { f64::INFINITY };
                max_sigmas = max_sigmas.max(s);
            }
            MartingaleRow { time, max_sigmas, mean_norm: norm.sqrt() }
        })
        .collect();
    Ok(MartingaleReport { rows, sigmas: 4.0 })
}

fn check_paths(paths: usize) -> Result<()> {
    if paths < 2 {
        return Err(Error::invalid("paths", "at least two paths are required"));
    }
    Ok(())
}
