use rand::Rng;
use rand_distr::StandardNormal;

use super::assignment;
use crate::error::{Error, Result};
use crate::noise::RngStream;
use crate::state::{check_dim, distance_sq, StateVector};

/// Largest cloud size accepted by the exact solver.
pub const EXACT_LIMIT: usize = 1024;

/// Equally weighted point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    points: Vec<StateVector>,
}

impl EmpiricalMeasure {
    pub fn new(points: Vec<StateVector>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::invalid("points", "an empirical measure needs at least one point"));
        };
        let dim = first.dim();
        for p in &points {
            check_dim(dim, p.dim())?;
            if !p.is_finite() {
                return Err(Error::invalid("points", "non-finite coordinate"));
            }
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn points(&self) -> &[StateVector] {
        &self.points
    }

    pub fn second_moment(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sq()).sum::<f64>() / self.len() as f64
    }

    /// Every `stride`-th point starting at `offset`.
    pub fn thin(&self, offset: usize, stride: usize) -> Result<Self> {
        Self::new(self.points.iter().skip(offset).step_by(stride.max(1)).cloned().collect())
    }

    fn projection(&self, direction: &[f64]) -> Vec<f64> {
        self.points.iter().map(|p| p.iter().zip(direction).map(|(a, b)| a * b).sum()).collect()
    }

    fn coordinate(&self, k: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[k]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingResult {
    /// `(1/n) Σ_i ‖x_i - y_{σ(i)}‖²`.
    pub cost: f64,
    pub assignment: Vec<usize>,
    pub dual_residual: f64,
}

impl CouplingResult {
    pub fn distance(&self) -> f64 {
        self.cost.sqrt()
    }
}

fn check_sizes(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::SizeMismatch { left, right });
    }
    Ok(())
}

/// Exact empirical `W₂²` as an assignment problem.
pub fn wasserstein2_exact(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<CouplingResult> {
    check_sizes(mu.len(), nu.len())?;
    check_dim(mu.dim(), nu.dim())?;
    let n = mu.len();
    if n > EXACT_LIMIT {
        return Err(Error::invalid("n", format!("exact solver accepts at most {EXACT_LIMIT} points")));
    }
    let mut cost = Vec::with_capacity(n * n);
    for x in mu.points() {
        for y in nu.points() {
            cost.push(distance_sq(x, y));
        }
    }
    let a = assignment::solve(n, &cost);
    Ok(CouplingResult { cost: a.total_cost / n as f64, assignment: a.columns, dual_residual: a.dual_residual })
}

/// `W₂²` between equal-size samples on the line, by sorting.
pub fn wasserstein2_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    check_sizes(a.len(), b.len())?;
    if a.is_empty() {
        return Err(Error::invalid("samples", "empty sample"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// `W₂` by the best available solver: sorting in one dimension, the exact
/// assignment otherwise.
pub fn wasserstein2(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    check_dim(mu.dim(), nu.dim())?;
    if mu.dim() == 1 {
        Ok(wasserstein2_1d(&mu.coordinate(0), &nu.coordinate(0))?.sqrt())
    } else {
        Ok(wasserstein2_exact(mu, nu)?.distance())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlicedEstimate {
    /// `(mean over directions of W₂²(projections))^{1/2}`.
    pub value: f64,
    /// Three standard errors of the direction average, mapped to the root scale.
    pub band: f64,
    pub directions: usize,
}

pub fn sliced_w2(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    directions: usize,
    rng: RngStream,
) -> Result<SlicedEstimate> {
    if directions < 16 {
        return Err(Error::invalid("directions", "at least 16 directions are required"));
    }
    check_sizes(mu.len(), nu.len())?;
    check_dim(mu.dim(), nu.dim())?;
    let mut g = rng.generator();
    let mut values = Vec::with_capacity(directions);
    for _ in 0..directions {
        let mut theta: Vec<f64> = (0..mu.dim()).map(|_| g.sample(StandardNormal)).collect();
        let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        theta.iter_mut().for_each(|v| *v /= norm);
        values.push(wasserstein2_1d(&mu.projection(&theta), &nu.projection(&theta))?);
    }
    let d = directions as f64;
    let mean = values.iter().sum::<f64>() / d;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d - 1.0);
    let se = (var / d).sqrt();
    let value = mean.sqrt();
    Ok(SlicedEstimate { value, band: (mean + 3.0 * se).sqrt() - value, directions })
}
