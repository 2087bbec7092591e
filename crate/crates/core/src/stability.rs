//! Lyapunov generators, dissipativity and mean-square stability.
//!
//! Lyapunov functions are weighted quadratic forms `H(x) = Σ_k q_k x_k²`. For
//! these the jump part of the generator,
//! `∫ H(x + f) - H(x) - ⟨∇H(x), f⟩ β(du)`, collapses to `Σ_k q_k ∫ f_k² β(du)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate_path, MildPath, Model, Scheme, SimulationGrid};
use crate::noise::{sample_jump_train, RngStream};
use crate::state::{check_dim, distance_sq, dot, norm_sq, StateVector};
use crate::stats::{ensemble, linear_fit};

/// Multiplicative slack on stability inequalities.
pub const RELATIVE_SLACK: f64 = 0.1;
/// Monte Carlo band in standard errors.
pub const BAND_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovFunction {
    weights: Vec<f64>,
}

impl LyapunovFunction {
    /// `H(x) = Σ_k q_k x_k²` with all `q_k > 0`.
    pub fn quadratic(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|q| !(*q > 0.0) || !q.is_finite()) {
            return Err(Error::invalid("weights", "need positive finite weights"));
        }
        Ok(Self { weights })
    }

    /// `H(x) = ‖x‖²`.
    pub fn norm_squared(dim: usize) -> Self {
        Self { weights: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(q, v)| q * v * v).sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.weights.iter().zip(x).map(|(q, v)| 2.0 * q * v).collect()
    }

    /// `∂²H(x) v`; constant in `x`.
    pub fn hessian_apply(&self, _x: &[f64], v: &[f64]) -> Vec<f64> {
        self.weights.iter().zip(v).map(|(q, v)| 2.0 * q * v).collect()
    }

    pub fn c1(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn c2(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Growth envelope of `‖∇H(x)‖` as a function of `r = ‖x‖`.
    pub fn h1(&self, r: f64) -> f64 {
        2.0 * self.c2() * r
    }

    /// Growth envelope of `‖∂²H(x)‖`.
    pub fn h2(&self, _r: f64) -> f64 {
        2.0 * self.c2()
    }

    /// Smallest `C` with `h(a + b) ≤ C (h(a) + h(b))` and `h(ab) ≤ C h(a) h(b)`
    /// for `h ∈ {h1, h2}` over all pairs drawn from `radii`.
    pub fn quasi_sublinear_constant(&self, radii: &[f64]) -> f64 {
        let mut c: f64 = 0.0;
        for &a in radii {
            for &b in radii {
                for h in [Self::h1 as fn(&Self, f64) -> f64, Self::h2] {
                    let sum = h(self, a) + h(self, b);
                    if sum > 0.0 {
                        c = c.max(h(self, a + b) / sum);
                    }
                    let prod = h(self, a) * h(self, b);
                    if prod > 0.0 {
                        c = c.max(h(self, a * b) / prod);
                    }
                }
            }
        }
        c
    }
}

fn generator_with(model: Model<'_>, h: &LyapunovFunction, x: &StateVector, r: Option<&[f64]>) -> Result<f64> {
    let n = model.generator.dim();
    check_dim(n, x.dim())?;
    check_dim(n, h.dim())?;
    let mut drift = vec![0.0; n];
    model.coeffs.drift_apply(x, &mut drift);
    let jump = model.coeffs.jump_square_diag(x)?;
    let eig = model.generator.eigenvalues();
    let q = h.weights();
    let mut total = 0.0;
    for k in 0..n {
        let rk = r.map_or(1.0, |r| r[k]);
        total += 2.0 * q[k] * x[k] * (eig[k] * x[k] + rk * drift[k]) + q[k] * rk * rk * jump[k];
    }
    if !total.is_finite() {
        return Err(Error::NonFiniteMarkRegion { region: "whole mark space".into() });
    }
    Ok(total)
}

/// `𝓛H(x) = ⟨∇H(x), Ax + F(x)⟩ + ∫ H(x + f(u, x)) - H(x) - ⟨∇H(x), f(u, x)⟩ β(du)`.
pub fn generator_apply(model: Model<'_>, h: &LyapunovFunction, x: &StateVector) -> Result<f64> {
    generator_with(model, h, x, None)
}

/// The generator formula evaluated literally, with the mark integral on a
/// quadrature grid with `mark_points` nodes per coordinate.
pub fn generator_apply_quadrature(
    model: Model<'_>,
    h: &LyapunovFunction,
    x: &StateVector,
    mark_points: usize,
) -> Result<f64> {
    let n = model.generator.dim();
    check_dim(n, x.dim())?;
    let ax = model.generator.apply(x)?;
    let mut drift = vec![0.0; n];
    model.coeffs.drift_apply(x, &mut drift);
    let grad = h.gradient(x);
    let flow: Vec<f64> = ax.iter().zip(&drift).map(|(a, f)| a + f).collect();
    let hx = h.value(x);
    let q = model.measure.quadrature(mark_points);
    let mut jump = vec![0.0; n];
    let mut shifted = vec![0.0; n];
    let mut integral = 0.0;
    for (u, w) in q.nodes.iter().zip(&q.weights) {
        model.coeffs.jump_apply(u, x, &mut jump);
        shifted.iter_mut().zip(x.iter().zip(&jump)).for_each(|(s, (a, b))| *s = a + b);
        let v = h.value(&shifted) - hx - dot(&grad, &jump);
        if !v.is_finite() {
            return Err(Error::NonFiniteMarkRegion { region: format!("quadrature node u = {u:?}") });
        }
        integral += w * v;
    }
    Ok(dot(&grad, &flow) + integral)
}

/// `𝓛ₙH(x)`: the generator with `F` and `f` replaced by `R_n F` and `R_n f`.
pub fn generator_yosida_apply(model: Model<'_>, h: &LyapunovFunction, x: &StateVector, n: f64) -> Result<f64> {
    let r = model.generator.regularizer(n)?;
    generator_with(model, h, x, Some(&r))
}

/// `max_k |𝓛H(X^n_{t_k}) - 𝓛ₙH(X^n_{t_k})|` along a path of the regularized scheme.
pub fn generator_gap(model: Model<'_>, h: &LyapunovFunction, path: &MildPath, n: f64) -> Result<f64> {
    if path.scheme != (Scheme::Yosida { n }) {
        return Err(Error::Precondition(format!("path was not produced by the Yosida scheme with n = {n}")));
    }
    let mut gap: f64 = 0.0;
    for x in &path.states {
        gap = gap.max((generator_apply(model, h, x)? - generator_yosida_apply(model, h, x, n)?).abs());
    }
    Ok(gap)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipativityReport {
    /// `min -⟨A(x-y) + F(x) - F(y), x-y⟩ / ‖x-y‖²` over probes.
    pub empirical: f64,
    /// `min_k(-a_k) - √L_F`.
    pub analytic: f64,
    /// The analytic bound when it is positive.
    pub certified: Option<f64>,
}

pub fn dissipativity_estimate(model: Model<'_>, probes: &[(StateVector, StateVector)]) -> Result<DissipativityReport> {
    let n = model.generator.dim();
    let (mut fx, mut fy) = (vec![0.0; n], vec![0.0; n]);
    let mut empirical = f64::INFINITY;
    for (x, y) in probes {
        check_dim(n, x.dim())?;
        check_dim(n, y.dim())?;
        let d: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| a - b).collect();
        let dd = norm_sq(&d);
        if dd == 0.0 {
            return Err(Error::invalid("probes", "probe pair with x = y"));
        }
        model.coeffs.drift_apply(x, &mut fx);
        model.coeffs.drift_apply(y, &mut fy);
        let inner: f64 = (0..n).map(|k| (model.generator.eigenvalues()[k] * d[k] + fx[k] - fy[k]) * d[k]).sum();
        empirical = empirical.min(-inner / dd);
    }
    let analytic = model.generator.spectral_gap() - model.coeffs.lipschitz_drift.sqrt();
    Ok(DissipativityReport { empirical, analytic, certified: (analytic > 0.0).then_some(analytic) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovReport {
    pub c1: f64,
    pub c2: f64,
    /// Largest `c₃` with `𝓛H ≤ -c₃ H` on all probes, when positive.
    pub c3: Option<f64>,
    pub sandwich_holds: bool,
    /// Probe with the worst decay ratio, or one where `𝓛H(0) > 0`.
    pub witness: Option<StateVector>,
}

impl LyapunovReport {
    pub fn passed(&self) -> bool {
        self.sandwich_holds && self.c3.is_some()
    }
}

pub fn lyapunov_check(model: Model<'_>, h: &LyapunovFunction, probes: &[StateVector]) -> Result<LyapunovReport> {
    if probes.is_empty() {
        return Err(Error::invalid("probes", "no probe states"));
    }
    let (c1, c2) = (h.c1(), h.c2());
    let mut sandwich_holds = true;
    let mut c3 = f64::INFINITY;
    let mut worst: Option<StateVector> = None;
    let mut origin_violation = None;
    for x in probes {
        let v = h.value(x);
        let r = x.norm_sq();
        sandwich_holds &= c1 * r <= v * (1.0 + 1e-12) && v <= c2 * r * (1.0 + 1e-12);
        let lh = generator_apply(model, h, x)?;
        if v == 0.0 {
            if lh > 0.0 && origin_violation.is_none() {
                origin_violation = Some(x.clone());
            }
            continue;
        }
        let ratio = -lh / v;
        if ratio < c3 {
            c3 = ratio;
            worst = Some(x.clone());
        }
    }
    let certified = origin_violation.is_none() && c3.is_finite() && c3 > 0.0;
    Ok(LyapunovReport {
        c1,
        c2,
        c3: certified.then_some(c3),
        sandwich_holds,
        witness: if certified { None } else { origin_violation.or(worst) },
    })
}

/// Probe pairs on several scales, deterministic in `seed`.
pub fn standard_probe_pairs(dim: usize, count: usize, seed: u64) -> Vec<(StateVector, StateVector)> {
    let mut rng = RngStream::new(seed, 0).derive(0x9a1f).generator();
    (0..count)
        .map(|i| {
            let scale = 10f64.powi((i % 5) as i32 - 2);
            let mut draw = || -> StateVector {
                (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect::<Vec<_>>().into()
            };
            let x = draw();
            let mut y = draw();
            if x == y {
                y[0] += scale;
            }
            (x, y)
        })
        .collect()
}

/// Probe states: the origin, random states, the diagonal and every coordinate
/// axis, with norms from `10⁻³` to `10³`. Axis probes hit the slowest mode of
/// a diagonal generator, which random states only approach.
pub fn standard_probe_states(dim: usize, seed: u64) -> Vec<StateVector> {
    let mut states = vec![StateVector::zeros(dim)];
    for (x, y) in standard_probe_pairs(dim, 35, seed) {
        states.push(x);
        states.push(y);
    }
    for e in -3..=3 {
        let r = 10f64.powi(e);
        states.push(StateVector::filled(dim, r / (dim as f64).sqrt()));
        for k in 0..dim {
            let mut axis = StateVector::zeros(dim);
            axis[k] = r;
            states.push(axis);
        }
    }
    states
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub alpha_dis: Option<f64>,
    /// `2 α - L_f` with `α` the analytic dissipativity bound.
    pub epsilon: f64,
    pub certified: bool,
    pub times: Vec<f64>,
    /// `D(t_k) = E‖X^ξ_{t_k} - X^η_{t_k}‖²` under synchronous coupling.
    pub decay: Vec<f64>,
    pub std_err: Vec<f64>,
    /// `‖ξ - η‖² e^{-ε t_k}`.
    pub bound: Vec<f64>,
    /// Largest sample variance of the squared distance over the grid.
    pub max_variance: f64,
    /// Decay rate fitted to `log D(t)`.
    pub fitted_rate: f64,
    /// `max_k D(t_k) / ‖ξ - η‖²`.
    pub continuity_constant: f64,
    pub pass: bool,
}

impl StabilityReport {
    pub fn row_passes(&self, k: usize) -> bool {
        self.decay[k] <= self.bound[k] * (1.0 + RELATIVE_SLACK) + BAND_SIGMAS * self.std_err[k]
    }
}

/// Mean-square distance of two coupled solutions started at `ξ` and `η`.
pub fn mean_square_decay(
    model: Model<'_>,
    xi: &StateVector,
    eta: &StateVector,
    grid: &SimulationGrid,
    paths: usize,
    seed: u64,
) -> Result<StabilityReport> {
    if xi == eta {
        return Err(Error::invalid("eta", "initial states must differ"));
    }
    let probes = standard_probe_pairs(model.generator.dim(), 20, seed);
    let dissipativity = dissipativity_estimate(model, &probes)?;
    let alpha_dis = dissipativity.certified;
    let epsilon = 2.0 * dissipativity.analytic - model.coeffs.lipschitz_jump;
    let certified = alpha_dis.is_some() && epsilon > 0.0;
    let dim = model.generator.dim();
    let m = ensemble(paths, grid.steps + 1, |p, out| {
        let train = sample_jump_train(model.measure, grid.horizon, RngStream::new(seed, p as u64))?;
        let mut first = vec![0.0; (grid.steps + 1) * dim];
        integrate_path(model, grid, xi, &train, Scheme::Mild, p, |k, x| {
            first[k * dim..(k + 1) * dim].copy_from_slice(x)
        })?;
        integrate_path(model, grid, eta, &train, Scheme::Mild, p, |k, x| {
            out[k] = distance_sq(x, &first[k * dim..(k + 1) * dim]);
        })
    })?;
    let times = grid.times();
    let d0 = xi.distance_sq(eta);
    let decay: Vec<f64> = (0..times.len()).map(|k| m.mean(k)).collect();
    let std_err: Vec<f64> = (0..times.len()).map(|k| m.std_err(k)).collect();
    let bound: Vec<f64> = times.iter().map(|t| d0 * (-epsilon * t).exp()).collect();
    let max_variance = (0..times.len()).map(|k| m.variance(k)).fold(0.0, f64::max);
    let (tt, ld): (Vec<f64>, Vec<f64>) =
        times.iter().zip(&decay).filter(|(_, d)| **d > 0.0).map(|(t, d)| (*t, d.ln())).unzip();
    let fitted_rate = if tt.len() >= 2 { -linear_fit(&tt, &ld).0 } else { f64::NAN };
    let continuity_constant = decay.iter().copied().fold(0.0, f64::max) / d0;
    let mut report = StabilityReport {
        alpha_dis,
        epsilon,
        certified,
        times,
        decay,
        std_err,
        bound,
        max_variance,
        fitted_rate,
        continuity_constant,
        pass: false,
    };
    report.pass = certified && (0..report.times.len()).all(|k| report.row_passes(k));
    Ok(report)
}

/// Law of the initial condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialLaw {
    Dirac { point: Vec<f64> },
    Gaussian { mean: Vec<f64>, variance: Vec<f64> },
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
}

impl InitialLaw {
    pub fn dim(&self) -> usize {
        match self {
            InitialLaw::Dirac { point } => point.len(),
            InitialLaw::Gaussian { mean, .. } => mean.len(),
            InitialLaw::UniformBox { lower, .. } => lower.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            InitialLaw::Dirac { point } => point.iter().all(|v| v.is_finite()),
            InitialLaw::Gaussian { mean, variance } => {
                mean.len() == variance.len()
                    && mean.iter().all(|v| v.is_finite())
                    && variance.iter().all(|v| *v >= 0.0 && v.is_finite())
            }
            InitialLaw::UniformBox { lower, upper } => {
                lower.len() == upper.len() && lower.iter().zip(upper).all(|(l, h)| l.is_finite() && h.is_finite() && l <= h)
            }
        };
        if ok && self.dim() > 0 {
            Ok(())
        } else {
            Err(Error::invalid("initial", "malformed initial law"))
        }
    }

    /// `E‖ξ‖²`.
    pub fn mean_square(&self) -> f64 {
        match self {
            InitialLaw::Dirac { point } => norm_sq(point),
            InitialLaw::Gaussian { mean, variance } => mean.iter().zip(variance).map(|(m, v)| m * m + v).sum(),
            InitialLaw::UniformBox { lower, upper } => {
                lower.iter().zip(upper).map(|(l, h)| (l * l + l * h + h * h) / 3.0).sum()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> StateVector {
        match self {
            InitialLaw::Dirac { point } => point.clone().into(),
            InitialLaw::Gaussian { mean, variance } => mean
                .iter()
                .zip(variance)
                .map(|(m, v)| m + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
                .collect::<Vec<_>>()
                .into(),
            InitialLaw::UniformBox { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, h)| if l == h { *l } else { rng.random_range(*l..*h) })
                .collect::<Vec<_>>()
                .into(),
        }
    }
}

/// Seed tag separating initial-condition draws from the jump noise.
pub(crate) const INITIAL_TAG: u64 = 0x1d1;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpStabilityReport {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub initial_mean_square: f64,
    pub times: Vec<f64>,
    /// `E‖X_t‖²`.
    pub second_moment: Vec<f64>,
    pub std_err: Vec<f64>,
    /// `(c₂/c₁) e^{-c₃ t} E‖ξ‖²`.
    pub bound: Vec<f64>,
    pub pass: bool,
}

impl ExpStabilityReport {
    pub fn row_passes(&self, k: usize) -> bool {
        // The relative 1e-12 absorbs rounding when the bound holds with equality.
        self.second_moment[k] <= self.bound[k] * (1.0 + 1e-12) + BAND_SIGMAS * self.std_err[k]
    }
}

/// Checks `E‖X_t‖² ≤ (c₂/c₁) e^{-c₃ t} E‖ξ‖²` on the grid, given certified
/// Lyapunov constants. The origin must be an equilibrium.
pub fn exp_stability_check(
    model: Model<'_>,
    h: &LyapunovFunction,
    lyapunov: &LyapunovReport,
    initial: &InitialLaw,
    grid: &SimulationGrid,
    paths: usize,
    seed: u64,
) -> Result<ExpStabilityReport> {
    let Some(c3) = lyapunov.c3.filter(|_| lyapunov.passed()) else {
        return Err(Error::Precondition("Lyapunov constants are not certified".into()));
    };
    if model.coeffs.drift_at_origin().iter().any(|v| *v != 0.0) {
        return Err(Error::Precondition("equilibrium condition F(0) = 0 is violated".into()));
    }
    if model.coeffs.f0_sq != 0.0 {
        return Err(Error::Precondition("equilibrium condition f(u, 0) = 0 is violated".into()));
    }
    initial.validate()?;
    check_dim(model.generator.dim(), initial.dim())?;
    check_dim(model.generator.dim(), h.dim())?;
    let m = ensemble(paths, grid.steps + 1, |p, out| {
        let stream = RngStream::new(seed, p as u64);
        let xi = initial.sample(&mut stream.derive(INITIAL_TAG).generator());
        let train = sample_jump_train(model.measure, grid.horizon, stream)?;
        integrate_path(model, grid, &xi, &train, Scheme::Mild, p, |k, x| out[k] = norm_sq(x))
    })?;
    let times = grid.times();
    let initial_mean_square = initial.mean_square();
    let c = lyapunov.c2 / lyapunov.c1;
    let mut report = ExpStabilityReport {
        c1: lyapunov.c1,
        c2: lyapunov.c2,
        c3,
        initial_mean_square,
        second_moment: (0..times.len()).map(|k| m.mean(k)).collect(),
        std_err: (0..times.len()).map(|k| m.std_err(k)).collect(),
        bound: times.iter().map(|t| c * (-c3 * t).exp() * initial_mean_square).collect(),
        times,
        pass: false,
    };
    report.pass = (0..report.times.len()).all(|k| report.row_passes(k));
    Ok(report)
}
