//! Closed-form semigroup, resolvent and Yosida calculus for diagonal generators.
//!
//! The state space is the span of the first `N` eigenvectors of the generator,
//! so every operator built from `A` acts mode by mode:
//!
//! ```text
//! S_t x       = (e^{t a_k} x_k)_k
//! R(λ, A) x   = (x_k / (λ - a_k))_k
//! R_λ x       = λ R(λ, A) x
//! A_λ         = λ² R(λ, A) - λ I   with eigenvalues λ a_k / (λ - a_k)
//! ```
//!
//! Quadrature only shows up in [`generator_identity_suite`], which checks the
//! closed forms against independent integrals.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::state::{check_dim, StateVector};

/// `expm1(z) / z`, continuous at zero.
pub(crate) fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-300 {
        1.0
    } else {
        z.exp_m1() / z
    }
}

/// The generator `A` of a pseudo-contraction semigroup, given by its
/// eigenvalues. The growth constant is `max_k a_k` and `M = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalGenerator {
    eigenvalues: Vec<f64>,
    growth_rate: f64,
}

impl DiagonalGenerator {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::invalid("eigenvalues", "at least one mode is required"));
        }
        if let Some(k) = eigenvalues.iter().position(|a| !a.is_finite()) {
            return Err(Error::invalid("eigenvalues", format!("eigenvalue {k} is not finite")));
        }
        let growth_rate = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { eigenvalues, growth_rate })
    }

    /// Dirichlet Laplacian on (0, 1): `a_k = -(k π)²`, `k = 1..=n`.
    pub fn laplacian_dirichlet(n: usize) -> Result<Self> {
        Self::new((1..=n).map(|k| -((k as f64) * PI).powi(2)).collect())
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Semigroup growth constant `α_sg = max_k a_k`.
    pub fn growth_rate(&self) -> f64 {
        self.growth_rate
    }

    /// The constant `M` in `‖S_t‖ ≤ M e^{α t}`; always 1 for a diagonal generator.
    pub fn bound(&self) -> f64 {
        1.0
    }

    /// Smallest decay rate `min_k (-a_k)`.
    pub fn spectral_gap(&self) -> f64 {
        self.eigenvalues.iter().map(|a| -a).fold(f64::INFINITY, f64::min)
    }

    pub fn apply(&self, x: &StateVector) -> Result<StateVector> {
        check_dim(self.dim(), x.dim())?;
        Ok(self.eigenvalues.iter().zip(x.iter()).map(|(a, v)| a * v).collect::<Vec<_>>().into())
    }

    /// Modewise factors `e^{t a_k}`.
    pub fn semigroup_factors(&self, t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(Error::NegativeTime(t));
        }
        Ok(self.eigenvalues.iter().map(|a| (t * a).exp()).collect())
    }

    pub fn semigroup_apply(&self, t: f64, x: &StateVector) -> Result<StateVector> {
        check_dim(self.dim(), x.dim())?;
        let factors = self.semigroup_factors(t)?;
        Ok(factors.iter().zip(x.iter()).map(|(s, v)| s * v).collect::<Vec<_>>().into())
    }

    /// Operator norm `‖S_t‖ = max_k e^{t a_k}`.
    pub fn semigroup_norm(&self, t: f64) -> Result<f64> {
        Ok(self.semigroup_factors(t)?.into_iter().fold(0.0, f64::max))
    }

    /// Weights of `∫_0^Δ S_s ds`: `(e^{Δ a_k} - 1) / a_k`, or `Δ` for a zero mode.
    pub fn convolution_weight(&self, dt: f64) -> Result<Vec<f64>> {
        if !(dt > 0.0) {
            return Err(Error::NonPositiveStep(dt));
        }
        Ok(self.eigenvalues.iter().map(|a| dt * phi1(dt * a)).collect())
    }

    fn check_resolvent(&self, lambda: f64) -> Result<()> {
        if lambda > self.growth_rate && lambda.is_finite() {
            Ok(())
        } else {
            Err(Error::Spectrum { lambda, growth_rate: self.growth_rate })
        }
    }

    pub fn resolvent_apply(&self, lambda: f64, x: &StateVector) -> Result<StateVector> {
        self.check_resolvent(lambda)?;
        check_dim(self.dim(), x.dim())?;
        Ok(self.eigenvalues.iter().zip(x.iter()).map(|(a, v)| v / (lambda - a)).collect::<Vec<_>>().into())
    }

    /// `‖R(λ, A)^r‖ = max_k (λ - a_k)^{-r}`.
    pub fn resolvent_power_norm(&self, lambda: f64, r: u32) -> Result<f64> {
        self.check_resolvent(lambda)?;
        Ok(self
            .eigenvalues
            .iter()
            .map(|a| (lambda - a).powi(-(r as i32)))
            .fold(0.0, f64::max))
    }

    /// Modewise multipliers of `R_λ = λ R(λ, A)`, i.e. `λ / (λ - a_k)`.
    pub fn regularizer(&self, lambda: f64) -> Result<Vec<f64>> {
        self.check_resolvent(lambda)?;
        Ok(self.eigenvalues.iter().map(|a| lambda / (lambda - a)).collect())
    }

    pub fn regularize(&self, lambda: f64, x: &StateVector) -> Result<StateVector> {
        check_dim(self.dim(), x.dim())?;
        let r = self.regularizer(lambda)?;
        Ok(r.iter().zip(x.iter()).map(|(m, v)| m * v).collect::<Vec<_>>().into())
    }

    /// The Yosida approximation `A_λ = λ² R(λ, A) - λ I`.
    pub fn yosida_generator(&self, lambda: f64) -> Result<DiagonalGenerator> {
        self.check_resolvent(lambda)?;
        DiagonalGenerator::new(
            self.eigenvalues.iter().map(|a| lambda * a / (lambda - a)).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HilleYosidaRow {
    pub lambda: f64,
    pub power: u32,
    pub norm: f64,
    pub bound: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HilleYosidaReport {
    pub rows: Vec<HilleYosidaRow>,
    pub worst_slack: f64,
}

impl HilleYosidaReport {
    pub fn passed(&self) -> bool {
        self.worst_slack >= 0.0
    }
}

/// Checks `‖R(λ, A)^r‖ ≤ M (λ - α)^{-r}` for every listed `λ` and `r ≤ r_max`.
pub fn hille_yosida_verify(
    generator: &DiagonalGenerator,
    lambdas: &[f64],
    r_max: u32,
) -> Result<HilleYosidaReport> {
    if r_max < 1 {
        return Err(Error::invalid("r_max", "must be at least 1"));
    }
    let alpha = generator.growth_rate();
    let mut rows = Vec::with_capacity(lambdas.len() * r_max as usize);
    for &lambda in lambdas {
        for power in 1..=r_max {
            let norm = generator.resolvent_power_norm(lambda, power)?;
            let bound = generator.bound() * (lambda - alpha).powi(-(power as i32));
            rows.push(HilleYosidaRow { lambda, power, norm, bound, slack: bound - norm });
        }
    }
    let worst_slack = rows.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    Ok(HilleYosidaReport { rows, worst_slack })
}

/// Residuals of the classical semigroup identities, each paired with the
/// discretization parameter it was computed at.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    /// `‖A ∫_0^t S_s x ds - (S_t x - x)‖` with the integral in closed form.
    pub integral_exact: f64,
    /// Same identity with the integral by the composite midpoint rule.
    pub integral_quadrature: f64,
    pub integral_step: f64,
    /// `‖(S_{t+h}x - S_{t-h}x)/2h - A S_t x‖` at step `h` and `h/2`.
    pub derivative: f64,
    pub derivative_half: f64,
    pub derivative_step: f64,
    /// `‖∫_0^{s_max} e^{-λs} S_s x ds - R(λ, A) x‖` by the midpoint rule.
    pub laplace: f64,
    pub laplace_step: f64,
    pub laplace_horizon: f64,
    /// A priori bound on the Laplace residual: midpoint error plus truncated tail.
    pub laplace_bound: f64,
}

impl IdentityReport {
    /// Observed ratio of derivative residuals under step halving (≈ 4 for O(h²)).
    pub fn derivative_ratio(&self) -> f64 {
        self.derivative / self.derivative_half
    }
}

/// Tail tolerance used to truncate the Laplace integral.
pub const LAPLACE_TAIL: f64 = 1e-12;

pub fn generator_identity_suite(
    generator: &DiagonalGenerator,
    t: f64,
    lambda: f64,
    x: &StateVector,
    steps: usize,
) -> Result<IdentityReport> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveStep(t));
    }
    if steps < 2 {
        return Err(Error::invalid("steps", "quadrature needs at least 2 steps"));
    }
    generator.check_resolvent(lambda)?;
    check_dim(generator.dim(), x.dim())?;
    let eig = generator.eigenvalues();
    let st_x = generator.semigroup_apply(t, x)?;

    // (i) A ∫ S_s x ds = S_t x - x
    let w = generator.convolution_weight(t)?;
    let integral_exact = eig
        .iter()
        .zip(&w)
        .zip(x.iter().zip(st_x.iter()))
        .map(|((a, w), (x, s))| (a * w * x - (s - x)).powi(2))
        .sum::<f64>()
        .sqrt();

    let h = t / steps as f64;
    let mut quad = vec![0.0; x.dim()];
    for i in 0..steps {
        let s = (i as f64 + 0.5) * h;
        for (k, a) in eig.iter().enumerate() {
            quad[k] += h * (s * a).exp() * x[k];
        }
    }
    let integral_quadrature = eig
        .iter()
        .zip(&quad)
        .zip(x.iter().zip(st_x.iter()))
        .map(|((a, q), (x, s))| (a * q - (s - x)).powi(2))
        .sum::<f64>()
        .sqrt();

    // (ii) d/dt S_t x = A S_t x, central difference
    let scale = eig.iter().map(|a| a.abs()).fold(1.0, f64::max);
    let derivative_step = (0.05 / scale).min(t / 2.0);
    let central = |h: f64| -> Result<f64> {
        let fwd = generator.semigroup_apply(t + h, x)?;
        let bwd = generator.semigroup_apply(t - h, x)?;
        Ok(eig
            .iter()
            .enumerate()
            .map(|(k, a)| ((fwd[k] - bwd[k]) / (2.0 * h) - a * st_x[k]).powi(2))
            .sum::<f64>()
            .sqrt())
    };
    let derivative = central(derivative_step)?;
    let derivative_half = central(derivative_step / 2.0)?;

    // (iii) Laplace transform of the semigroup
    let gap = lambda - generator.growth_rate();
    let horizon = -LAPLACE_TAIL.ln() / gap;
    let dl = horizon / steps as f64;
    let mut laplace_quad = vec![0.0; x.dim()];
    for i in 0..steps {
        let s = (i as f64 + 0.5) * dl;
        for (k, a) in eig.iter().enumerate() {
            laplace_quad[k] += dl * (-(lambda - a) * s).exp() * x[k];
        }
    }
    let resolvent = generator.resolvent_apply(lambda, x)?;
    let laplace = laplace_quad
        .iter()
        .zip(resolvent.iter())
        .map(|(q, r)| (q - r).powi(2))
        .sum::<f64>()
        .sqrt();
    let laplace_bound = eig
        .iter()
        .zip(x.iter())
        .map(|(a, v)| {
            let rate = lambda - a;
            let midpoint = dl * dl / 24.0 * rate * v.abs();
            let tail = (-rate * horizon).exp() * v.abs() / rate;
            (midpoint + tail).powi(2)
        })
        .sum::<f64>()
        .sqrt();

    Ok(IdentityReport {
        integral_exact,
        integral_quadrature,
        integral_step: h,
        derivative,
        derivative_half,
        derivative_step,
        laplace,
        laplace_step: dl,
        laplace_horizon: horizon,
        laplace_bound,
    })
}

/// Largest violation of `S_0 = I` and `S_{s+t} = S_s S_t` over all pairs drawn
/// from `times`, relative to `‖x‖`.
pub fn semigroup_axiom_residual(
    generator: &DiagonalGenerator,
    x: &StateVector,
    times: &[f64],
) -> Result<f64> {
    let norm = x.norm().max(f64::MIN_POSITIVE);
    let mut worst = generator.semigroup_apply(0.0, x)?.distance_sq(x).sqrt() / norm;
    for &s in times {
        for &t in times {
            let joint = generator.semigroup_apply(s + t, x)?;
            let split = generator.semigroup_apply(s, &generator.semigroup_apply(t, x)?)?;
            worst = worst.max(joint.distance_sq(&split).sqrt() / norm);
        }
    }
    Ok(worst)
}

/// Largest `|‖S_t‖ - e^{t α}|` over `times`.
pub fn growth_bound_residual(generator: &DiagonalGenerator, times: &[f64]) -> Result<f64> {
    let alpha = generator.growth_rate();
    let mut worst: f64 = 0.0;
    for &t in times {
        worst = worst.max((generator.semigroup_norm(t)? - (t * alpha).exp()).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct YosidaLimitRow {
    pub lambda: f64,
    /// `‖R_λ x - x‖`
    pub resolvent_gap: f64,
    /// `‖A_λ x - A x‖`
    pub generator_gap: f64,
    /// `max_t ‖e^{t A_λ} x - S_t x‖` over the time grid.
    pub semigroup_gap: f64,
}

pub fn yosida_limits(
    generator: &DiagonalGenerator,
    x: &StateVector,
    lambdas: &[f64],
    times: &[f64],
) -> Result<Vec<YosidaLimitRow>> {
    let ax = generator.apply(x)?;
    lambdas
        .iter()
        .map(|&lambda| {
            let rx = generator.regularize(lambda, x)?;
            let yosida = generator.yosida_generator(lambda)?;
            let ay = yosida.apply(x)?;
            let mut semigroup_gap: f64 = 0.0;
            for &t in times {
                let approx = yosida.semigroup_apply(t, x)?;
                let exact = generator.semigroup_apply(t, x)?;
                semigroup_gap = semigroup_gap.max(approx.distance_sq(&exact).sqrt());
            }
            Ok(YosidaLimitRow {
                lambda,
                resolvent_gap: rx.distance_sq(x).sqrt(),
                generator_gap: ay.distance_sq(&ax).sqrt(),
                semigroup_gap,
            })
        })
        .collect()
}
