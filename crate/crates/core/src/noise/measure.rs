use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::quadrature::{gauss_hermite_normal, gauss_legendre};
use crate::error::{Error, Result};

/// Shape of the normalized mark law `β / β(mark space)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarkFamily {
    /// Finitely many points with relative weights (normalized internally).
    Atoms { points: Vec<Vec<f64>>, weights: Vec<f64> },
    /// Independent normal coordinates.
    Gaussian { mean: Vec<f64>, variance: Vec<f64> },
    /// Independent uniform coordinates on a box.
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
}

/// A finite jump intensity `β = rate · law`, with analytic moment oracles.
#[derive(Debug, Clone)]
pub struct MarkMeasure {
    rate: f64,
    family: MarkFamily,
    dim: usize,
    atom_probs: Vec<f64>,
    atom_index: Option<WeightedIndex<f64>>,
}

/// A deterministic discretization of `β`: `∫ g dβ ≈ Σ_i w_i g(u_i)` with
/// `Σ_i w_i = rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkQuadrature {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl MarkQuadrature {
    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut g: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(u, w)| w * g(u)).sum()
    }
}

impl PartialEq for MarkMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.rate == other.rate && self.family == other.family
    }
}

impl MarkMeasure {
    pub fn new(rate: f64, family: MarkFamily) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::invalid("rate", "must be finite and nonnegative"));
        }
        let mut atom_probs = Vec::new();
        let mut atom_index = None;
        let dim = match &family {
            MarkFamily::Atoms { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(Error::invalid("atoms", "need one weight per point and at least one point"));
                }
                let d = points[0].len();
                if d == 0 || points.iter().any(|p| p.len() != d || p.iter().any(|v| !v.is_finite())) {
                    return Err(Error::invalid("atoms.points", "points must share a positive dimension and be finite"));
                }
                if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
                    return Err(Error::invalid("atoms.weights", "weights must be positive"));
                }
                let total: f64 = weights.iter().sum();
                atom_probs = weights.iter().map(|w| w / total).collect();
                atom_index = Some(
                    WeightedIndex::new(weights.iter().copied())
                        .map_err(|e| Error::invalid("atoms.weights", e.to_string()))?,
                );
                d
            }
            MarkFamily::Gaussian { mean, variance } => {
                if mean.is_empty() || mean.len() != variance.len() {
                    return Err(Error::invalid("gaussian", "mean and variance must have equal positive length"));
                }
                if variance.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || mean.iter().any(|m| !m.is_finite()) {
                    return Err(Error::invalid("gaussian.variance", "variances must be finite and nonnegative"));
                }
                mean.len()
            }
            MarkFamily::UniformBox { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::invalid("uniform_box", "bounds must have equal positive length"));
                }
                if lower.iter().zip(upper).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
                    return Err(Error::invalid("uniform_box", "lower bound exceeds upper bound"));
                }
                lower.len()
            }
        };
        if dim > 4 {
            return Err(Error::invalid("marks", "mark dimension above 4 is not supported"));
        }
        Ok(Self { rate, family, dim, atom_probs, atom_index })
    }

    /// Two equiprobable atoms at `±size` in one dimension.
    pub fn symmetric_pair(rate: f64, size: f64) -> Result<Self> {
        Self::new(
            rate,
            MarkFamily::Atoms { points: vec![vec![size], vec![-size]], weights: vec![0.5, 0.5] },
        )
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &MarkFamily {
        &self.family
    }

    /// `∫ u β(du)`.
    pub fn mean_mark(&self) -> Vec<f64> {
        let per_jump: Vec<f64> = match &self.family {
            MarkFamily::Atoms { points, .. } => (0..self.dim)
                .map(|i| points.iter().zip(&self.atom_probs).map(|(p, w)| w * p[i]).sum())
                .collect(),
            MarkFamily::Gaussian { mean, .. } => mean.clone(),
            MarkFamily::UniformBox { lower, upper } => {
                lower.iter().zip(upper).map(|(l, h)| 0.5 * (l + h)).collect()
            }
        };
        per_jump.into_iter().map(|m| self.rate * m).collect()
    }

    /// `∫ u uᵀ β(du)` as a dense `d × d` matrix.
    pub fn second_moment_matrix(&self) -> Vec<Vec<f64>> {
        let d = self.dim;
        let mut s = vec![vec![0.0; d]; d];
        match &self.family {
            MarkFamily::Atoms { points, .. } => {
                for (p, w) in points.iter().zip(&self.atom_probs) {
                    for i in 0..d {
                        for j in 0..d {
                            s[i][j] += w * p[i] * p[j];
                        }
                    }
                }
            }
            MarkFamily::Gaussian { mean, variance } => {
                for i in 0..d {
                    for j in 0..d {
                        s[i][j] = mean[i] * mean[j] + if i == j { variance[i] } else { 0.0 };
                    }
                }
            }
            MarkFamily::UniformBox { lower, upper } => {
                let m: Vec<f64> = lower.iter().zip(upper).map(|(l, h)| 0.5 * (l + h)).collect();
                for i in 0..d {
                    for j in 0..d {
                        s[i][j] = if i == j {
                            let (l, h) = (lower[i], upper[i]);
                            (l * l + l * h + h * h) / 3.0
                        } else {
                            m[i] * m[j]
                        };
                    }
                }
            }
        }
        for row in &mut s {
            for v in row.iter_mut() {
                *v *= self.rate;
            }
        }
        s
    }

    /// `∫ ‖u‖^p β(du)` for `p ∈ {1, 2, 4}`.
    ///
    /// Exact for atoms and for `p ∈ {2, 4}`; the first absolute moment of
    /// multi-dimensional Gaussian and uniform laws uses a fine tensor grid.
    pub fn moment(&self, p: u32) -> Result<f64> {
        let per_jump = match (p, &self.family) {
            (1 | 2 | 4, MarkFamily::Atoms { points, .. }) => points
                .iter()
                .zip(&self.atom_probs)
                .map(|(u, w)| w * norm(u).powi(p as i32))
                .sum(),
            (2, _) => {
                let s = self.second_moment_matrix();
                if self.rate == 0.0 {
                    return Ok(0.0);
                }
                (0..self.dim).map(|i| s[i][i]).sum::<f64>() / self.rate
            }
            (4, MarkFamily::Gaussian { mean, variance }) => {
                let m2: Vec<f64> = mean.iter().zip(variance).map(|(m, v)| m * m + v).collect();
                let m4: Vec<f64> = mean
                    .iter()
                    .zip(variance)
                    .map(|(m, v)| m.powi(4) + 6.0 * m * m * v + 3.0 * v * v)
                    .collect();
                independent_fourth(&m2, &m4)
            }
            (4, MarkFamily::UniformBox { lower, upper }) => {
                let m2: Vec<f64> = lower.iter().zip(upper).map(|(l, h)| (l * l + l * h + h * h) / 3.0).collect();
                let m4: Vec<f64> = lower.iter().zip(upper).map(|(l, h)| uniform_power_mean(*l, *h, 4)).collect();
                independent_fourth(&m2, &m4)
            }
            (1, MarkFamily::Gaussian { mean, variance }) if self.dim == 1 => {
                let (m, v) = (mean[0], variance[0]);
                if v == 0.0 {
                    m.abs()
                } else {
                    let s = v.sqrt();
                    s * (2.0 / std::f64::consts::PI).sqrt() * (-m * m / (2.0 * v)).exp()
                        + m * libm::erf(m / (s * std::f64::consts::SQRT_2))
                }
            }
            (1, MarkFamily::UniformBox { lower, upper }) if self.dim == 1 => {
                let (l, h) = (lower[0], upper[0]);
                if l == h {
                    l.abs()
                } else {
                    (h * h.abs() - l * l.abs()) / (2.0 * (h - l))
                }
            }
            (1, _) => {
                if self.rate == 0.0 {
                    return Ok(0.0);
                }
                let panels = match self.dim {
                    2 => 40,
                    3 => 8,
                    _ => 3,
                };
                self.composite_grid(panels).integrate(norm) / self.rate
            }
            _ => return Err(Error::invalid("p", format!("moment order {p} not supported (use 1, 2 or 4)"))),
        };
        Ok(self.rate * per_jump)
    }

    pub fn sample_mark<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        match &self.family {
            MarkFamily::Atoms { points, .. } => {
                let idx = self.atom_index.as_ref().expect("atoms carry an index").sample(rng);
                out.extend_from_slice(&points[idx]);
            }
            MarkFamily::Gaussian { mean, variance } => {
                for (m, v) in mean.iter().zip(variance) {
                    let z: f64 = StandardNormal.sample(rng);
                    out.push(m + v.sqrt() * z);
                }
            }
            MarkFamily::UniformBox { lower, upper } => {
                for (l, h) in lower.iter().zip(upper) {
                    let u: f64 = rng.random();
                    out.push(l + (h - l) * u);
                }
            }
        }
    }

    /// Tensor-product grid for `β`: the atoms themselves, Gauss–Hermite per
    /// coordinate for Gaussian marks, Gauss–Legendre for uniform boxes.
    pub fn quadrature(&self, points_per_dim: usize) -> MarkQuadrature {
        let (nodes_1d, weights_1d): (Vec<Vec<f64>>, Vec<Vec<f64>>) = match &self.family {
            MarkFamily::Atoms { points, .. } => {
                return MarkQuadrature {
                    nodes: points.clone(),
                    weights: self.atom_probs.iter().map(|w| w * self.rate).collect(),
                }
            }
            MarkFamily::Gaussian { mean, variance } => {
                let (x, w) = gauss_hermite_normal(points_per_dim.max(1));
                mean.iter()
                    .zip(variance)
                    .map(|(m, v)| (x.iter().map(|z| m + v.sqrt() * z).collect(), w.clone()))
                    .unzip()
            }
            MarkFamily::UniformBox { lower, upper } => {
                let (x, w) = gauss_legendre(points_per_dim.max(1));
                lower
                    .iter()
                    .zip(upper)
                    .map(|(l, h)| {
                        let mid = 0.5 * (l + h);
                        let half = 0.5 * (h - l);
                        (x.iter().map(|z| mid + half * z).collect(), w.iter().map(|w| 0.5 * w).collect())
                    })
                    .unzip()
            }
        };
        self.tensor(&nodes_1d, &weights_1d)
    }

    /// Tensor grid of composite 10-point Gauss–Legendre panels, on the box for
    /// uniform marks and on `mean ± 9σ` (density-weighted) for Gaussian marks.
    /// Used where the integrand is not smooth, e.g. `‖u‖` near the origin.
    fn composite_grid(&self, panels: usize) -> MarkQuadrature {
        let (x, w) = gauss_legendre(10);
        let composite = |l: f64, h: f64| -> (Vec<f64>, Vec<f64>) {
            let width = (h - l) / panels as f64;
            let mut nodes = Vec::with_capacity(10 * panels);
            let mut weights = Vec::with_capacity(10 * panels);
            for p in 0..panels {
                let mid = l + (p as f64 + 0.5) * width;
                for (z, wz) in x.iter().zip(&w) {
                    nodes.push(mid + 0.5 * width * z);
                    weights.push(0.5 * width * wz);
                }
            }
            (nodes, weights)
        };
        let (nodes_1d, weights_1d): (Vec<Vec<f64>>, Vec<Vec<f64>>) = match &self.family {
            MarkFamily::Atoms { .. } => return self.quadrature(1),
            MarkFamily::Gaussian { mean, variance } => mean
                .iter()
                .zip(variance)
                .map(|(m, v)| {
                    if *v == 0.0 {
                        return (vec![*m], vec![1.0]);
                    }
                    let s = v.sqrt();
                    let (nodes, raw) = composite(m - 9.0 * s, m + 9.0 * s);
                    let dens: Vec<f64> =
                        nodes.iter().zip(&raw).map(|(u, w)| w * (-(u - m).powi(2) / (2.0 * v)).exp()).collect();
                    let total: f64 = dens.iter().sum();
                    (nodes, dens.into_iter().map(|d| d / total).collect())
                })
                .unzip(),
            MarkFamily::UniformBox { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, h)| {
                    if l == h {
                        return (vec![*l], vec![1.0]);
                    }
                    let (nodes, w) = composite(*l, *h);
                    (nodes, w.into_iter().map(|w| w / (h - l)).collect())
                })
                .unzip(),
        };
        self.tensor(&nodes_1d, &weights_1d)
    }

    fn tensor(&self, nodes_1d: &[Vec<f64>], weights_1d: &[Vec<f64>]) -> MarkQuadrature {
        let mut nodes = vec![Vec::with_capacity(self.dim)];
        let mut weights = vec![self.rate];
        for (xs, ws) in nodes_1d.iter().zip(weights_1d) {
            let mut next_nodes = Vec::with_capacity(nodes.len() * xs.len());
            let mut next_weights = Vec::with_capacity(nodes.len() * xs.len());
            for (node, w) in nodes.iter().zip(&weights) {
                for (x, wx) in xs.iter().zip(ws) {
                    let mut n = node.clone();
                    n.push(*x);
                    next_nodes.push(n);
                    next_weights.push(w * wx);
                }
            }
            nodes = next_nodes;
            weights = next_weights;
        }
        MarkQuadrature { nodes, weights }
    }
}

fn norm(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn independent_fourth(m2: &[f64], m4: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..m2.len() {
        for j in 0..m2.len() {
            total += if i == j { m4[i] } else { m2[i] * m2[j] };
        }
    }
    total
}

fn uniform_power_mean(l: f64, h: f64, p: i32) -> f64 {
    if l == h {
        l.powi(p)
    } else {
        (h.powi(p + 1) - l.powi(p + 1)) / ((p as f64 + 1.0) * (h - l))
    }
}
