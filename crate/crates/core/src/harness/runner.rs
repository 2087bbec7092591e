//! Experiment pipelines producing result tables.

use crate::error::{Error, Result};
use crate::integrator::{
    mild_moments, simulate_yosida_path, validate_coefficients, yosida_gap_estimate, CoefficientSet, Jump, Model,
    SimulationGrid,
};
use crate::noise::{
    count_correlation_check, ito_isometry_check, martingale_check, maximal_inequality_check, maximal_report,
    poisson_count_check, Integrand, MarkMeasure, RngStream,
};
use crate::operator::{
    generator_identity_suite, growth_bound_residual, hille_yosida_verify, semigroup_axiom_residual, yosida_limits,
    DiagonalGenerator,
};
use crate::stability::{
    dissipativity_estimate, exp_stability_check, generator_gap, lyapunov_check, mean_square_decay,
    standard_probe_pairs, standard_probe_states, LyapunovFunction,
};
use crate::state::StateVector;
use crate::stats::Moments;
use crate::transport::{contraction_estimate, convergence_to_invariant, invariant_measure_sampler};

use super::config::{CoefficientsConfig, ExperimentConfig, ExperimentKind, Params};
use super::table::{ResultTable, Row};

/// Tolerance of the exact integral identity, relative to `max(1, ‖x‖)`.
pub const INTEGRAL_TOLERANCE: f64 = 1e-10;
pub const LAPLACE_TOLERANCE: f64 = 1e-6;
pub const AXIOM_TOLERANCE: f64 = 1e-12;
/// Accepted spread of the finite-difference refinement ratio around 4.
pub const DERIVATIVE_RATIO_BAND: f64 = 0.5;
/// Relative tolerance of the invariant second moment against its closed form.
pub const INVARIANT_TOLERANCE: f64 = 0.1;
/// Relative slack on fitted decay rates.
pub const RATE_SLACK: f64 = 0.1;
/// Number of martingale check times.
pub const MARTINGALE_TIMES: usize = 20;

struct Emitter {
    experiment: &'static str,
    table: ResultTable,
}

impl Emitter {
    fn row(&mut self, quantity: &str, param: Option<f64>, value: f64, band: Option<f64>, bound: Option<f64>, pass: bool) {
        self.table.push(Row {
            experiment: self.experiment.to_string(),
            quantity: quantity.to_string(),
            param,
            value,
            band,
            bound,
            pass: pass && value.is_finite(),
        });
    }

    fn info(&mut self, quantity: &str, param: Option<f64>, value: f64) {
        self.row(quantity, param, value, None, None, true);
    }

    /// Rows whose values must not increase with the parameter.
    fn monotone(&mut self, quantity: &str, points: &[(f64, f64)]) {
        let mut previous: Option<f64> = None;
        for &(param, value) in points {
            let pass = previous.is_none_or(|p| value <= p * (1.0 + 1e-12) + 1e-15);
            self.row(quantity, Some(param), value, None, previous, pass);
            previous = Some(value);
        }
    }
}

/// Everything an experiment needs, built once from a resolved configuration.
pub struct Setup {
    pub generator: DiagonalGenerator,
    pub measure: MarkMeasure,
    pub coeffs: CoefficientSet,
    pub grid: SimulationGrid,
    pub params: Params,
    pub paths: usize,
    pub seed: u64,
    preset: CoefficientsConfig,
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> std::result::Result<Self, super::config::ConfigError> {
        let generator = config.generator()?;
        let measure = config.measure()?;
        let coeffs = config.coefficients(generator.dim(), &measure)?;
        Ok(Self {
            grid: config.grid()?,
            params: config.params.clone(),
            paths: config.mc.paths,
            seed: config.mc.seed,
            preset: config.coefficients.clone(),
            generator,
            measure,
            coeffs,
        })
    }

    pub fn model(&self) -> Result<Model<'_>> {
        Model::new(&self.generator, &self.coeffs, &self.measure)
    }

    fn initial(&self) -> StateVector {
        self.params.initial.clone().unwrap_or_else(|| vec![1.0; self.generator.dim()]).into()
    }

    fn report_indices(&self) -> Vec<usize> {
        let steps = self.grid.steps;
        let stride = steps.div_ceil(self.params.report_points.unwrap_or(100).max(1)).max(1);
        let mut idx: Vec<usize> = (0..=steps).step_by(stride).collect();
        if idx.last() != Some(&steps) {
            idx.push(steps);
        }
        idx
    }
}

/// Runs the configured experiment. The configuration must be resolved.
pub fn run_experiment(kind: ExperimentKind, setup: &Setup) -> Result<ResultTable> {
    let mut out = Emitter { experiment: kind.name(), table: ResultTable::new() };
    let stochastic = kind != ExperimentKind::CertifyOperator && kind != ExperimentKind::NoiseChecks;
    if stochastic && !validation_rows(&mut out, setup)? {
        return Ok(out.table);
    }
    match kind {
        ExperimentKind::CertifyOperator => certify_operator(&mut out, setup)?,
        ExperimentKind::NoiseChecks => noise_checks(&mut out, setup)?,
        ExperimentKind::Simulate => simulate(&mut out, setup)?,
        ExperimentKind::YosidaGap => yosida_gap(&mut out, setup)?,
        ExperimentKind::Stability => stability(&mut out, setup)?,
        ExperimentKind::Contraction => contraction(&mut out, setup)?,
        ExperimentKind::Invariant => invariant(&mut out, setup)?,
    }
    Ok(out.table)
}

fn validation_rows(out: &mut Emitter, s: &Setup) -> Result<bool> {
    let probes = standard_probe_pairs(s.generator.dim(), 20, s.seed);
    let v = validate_coefficients(&s.coeffs, &probes)?;
    let ok = |ratio: f64, declared: f64| ratio <= declared * (1.0 + 1e-9) + 1e-9;
    out.row("lipschitz_drift", None, v.drift_ratio, None, Some(v.declared_drift), ok(v.drift_ratio, v.declared_drift));
    out.row("lipschitz_jump", None, v.jump_ratio, None, Some(v.declared_jump), ok(v.jump_ratio, v.declared_jump));
    out.row("linear_growth", None, v.growth_ratio, None, Some(v.growth_constant), ok(v.growth_ratio, v.growth_constant));
    Ok(v.passed())
}

fn certify_operator(out: &mut Emitter, s: &Setup) -> Result<()> {
    let g = &s.generator;
    let p = &s.params;
    let x = s.initial();
    let times = p.t_list.clone().unwrap_or_default();
    let report = hille_yosida_verify(g, p.lambdas.as_deref().unwrap_or(&[]), p.r_max.unwrap_or(5))?;
    for r in &report.rows {
        out.row(&format!("hille_yosida_r{}", r.power), Some(r.lambda), r.norm, None, Some(r.bound), r.slack >= 0.0);
    }
    let axioms = semigroup_axiom_residual(g, &x, &times)?;
    out.row("semigroup_axioms", None, axioms, None, Some(AXIOM_TOLERANCE), axioms <= AXIOM_TOLERANCE);
    let horizon = times.iter().copied().fold(0.0, f64::max);
    let growth_tol = AXIOM_TOLERANCE * (horizon * g.growth_rate()).exp().max(1.0);
    let growth = growth_bound_residual(g, &times)?;
    out.row("growth_bound", None, growth, None, Some(growth_tol), growth <= growth_tol);

    let lambda = p.laplace_lambda.unwrap_or(1.0);
    let id = generator_identity_suite(g, s.grid.horizon, lambda, &x, p.quadrature_steps.unwrap_or(100_000))?;
    let tol = INTEGRAL_TOLERANCE * x.norm().max(1.0);
    out.row("identity_integral", Some(s.grid.horizon), id.integral_exact, None, Some(tol), id.integral_exact <= tol);
    out.info("identity_integral_quadrature", Some(id.integral_step), id.integral_quadrature);
    out.info("identity_derivative", Some(id.derivative_step), id.derivative);
    out.info("identity_derivative", Some(id.derivative_step / 2.0), id.derivative_half);
    let ratio = id.derivative_ratio();
    out.row(
        "identity_derivative_ratio",
        None,
        ratio,
        Some(DERIVATIVE_RATIO_BAND),
        Some(4.0),
        (ratio - 4.0).abs() <= DERIVATIVE_RATIO_BAND,
    );
    out.row("identity_laplace", Some(lambda), id.laplace, Some(id.laplace_bound), Some(LAPLACE_TOLERANCE), id.laplace <= LAPLACE_TOLERANCE);

    let limits = yosida_limits(g, &x, p.yosida_lambdas.as_deref().unwrap_or(&[]), &times)?;
    let series = |f: fn(&crate::operator::YosidaLimitRow) -> f64| -> Vec<(f64, f64)> {
        limits.iter().map(|r| (r.lambda, f(r))).collect()
    };
    out.monotone("yosida_resolvent_gap", &series(|r| r.resolvent_gap));
    out.monotone("yosida_generator_gap", &series(|r| r.generator_gap));
    out.monotone("yosida_semigroup_gap", &series(|r| r.semigroup_gap));
    Ok(())
}

fn noise_checks(out: &mut Emitter, s: &Setup) -> Result<()> {
    let p = &s.params;
    let horizon = s.grid.horizon;
    let f = Integrand::linear_mark(p.integrand_map.clone().unwrap_or_default(), p.integrand_decay.unwrap_or(1.0))?;

    let c = poisson_count_check(&s.measure, horizon, s.paths, s.seed)?;
    out.row("poisson_count_mean", Some(horizon), c.mean, Some(3.0 * c.std_err), Some(c.expected), c.passed());
    let r = count_correlation_check(&s.measure, horizon, |u| u[0] > 0.0, |u| u[0] <= 0.0, s.paths, s.seed)?;
    out.row("count_correlation", Some(horizon), r.correlation, Some(r.band), None, r.passed());

    let iso = ito_isometry_check(&f, &s.measure, horizon, s.paths, s.seed)?;
    out.row("ito_isometry", Some(horizon), iso.second_moment, Some(3.0 * iso.std_err), Some(iso.expected), iso.passed());

    let times: Vec<f64> = (1..=MARTINGALE_TIMES).map(|k| horizon * k as f64 / MARTINGALE_TIMES as f64).collect();
    let m = martingale_check(&f, &s.measure, &times, s.paths, s.seed)?;
    for row in &m.rows {
        out.row("martingale_sigmas", Some(row.time), row.max_sigmas, None, Some(m.sigmas), row.max_sigmas <= m.sigmas);
    }

    let eps = p.epsilons.clone().unwrap_or_else(|| vec![1.0]);
    let first = maximal_inequality_check(&s.generator, &f, &s.measure, horizon, eps[0], s.paths, s.grid.steps, s.seed)?;
    let mut reports = vec![first.clone()];
    for &e in &eps[1..] {
        reports.push(maximal_report(&s.generator, &f, &s.measure, horizon, e, first.suprema.clone())?);
    }
    for r in reports {
        out.row("maximal_inequality", Some(r.epsilon), r.probability, Some(r.band), Some(r.bound), r.passed());
    }
    Ok(())
}

fn simulate(out: &mut Emitter, s: &Setup) -> Result<()> {
    let xi = s.initial();
    let m = mild_moments(s.model()?, &s.grid, &xi, s.paths, s.seed)?;
    for k in s.report_indices() {
        let t = m.times[k];
        out.row("second_moment", Some(t), m.second_moment[k], Some(3.0 * m.second_std_err[k]), None, true);
        for (i, (mean, se)) in m.mean[k].iter().zip(&m.mean_std_err[k]).enumerate() {
            out.row(&format!("mean_{}", i + 1), Some(t), *mean, Some(3.0 * se), None, true);
        }
    }
    out.info("integrated_second_moment", Some(s.grid.horizon), m.integrated_second_moment);
    out.info("st2_norm", Some(s.grid.horizon), m.st2_norm);
    Ok(())
}

fn yosida_gap(out: &mut Emitter, s: &Setup) -> Result<()> {
    let model = s.model()?;
    let xi = s.initial();
    let n_list = s.params.n_list.clone().unwrap_or_default();
    let curve = yosida_gap_estimate(model, &s.grid, &xi, s.paths, &n_list, s.seed)?;
    let mut previous: Option<(f64, f64)> = None;
    for r in &curve.rows {
        let pass = previous.is_none_or(|(gap, band)| r.gap + r.band < gap - band);
        out.row("yosida_gap", Some(r.n), r.gap, Some(r.band), previous.map(|p| p.0), pass);
        previous = Some((r.gap, r.band));
    }
    if curve.rows.len() >= 2 {
        let slope = curve.log_slope();
        out.row("yosida_gap_log_slope", None, slope, None, Some(-1.0), slope <= -1.0);
    }
    let h = LyapunovFunction::norm_squared(s.generator.dim());
    let mut points = Vec::with_capacity(n_list.len());
    for &n in &n_list {
        let path = simulate_yosida_path(model, &s.grid, &xi, RngStream::new(s.seed, 0), n)?;
        points.push((n, generator_gap(model, &h, &path, n)?));
    }
    out.monotone("generator_gap", &points);
    Ok(())
}

fn is_equilibrium(coeffs: &CoefficientSet) -> Result<bool> {
    let zero = StateVector::zeros(coeffs.dim());
    let drift = coeffs.drift_at_origin().iter().all(|v| *v == 0.0);
    let jump = coeffs.jump_square_diag(&zero)?.iter().all(|v| *v == 0.0);
    Ok(drift && jump)
}

fn stability(out: &mut Emitter, s: &Setup) -> Result<()> {
    let model = s.model()?;
    let xi = s.initial();
    let eta: StateVector = s.params.eta.clone().unwrap_or_default().into();
    let report = mean_square_decay(model, &xi, &eta, &s.grid, s.paths, s.seed)?;
    let analytic = dissipativity_estimate(model, &standard_probe_pairs(s.generator.dim(), 20, s.seed))?;
    out.row("alpha_dis", None, analytic.analytic, None, Some(analytic.empirical), report.alpha_dis.is_some());
    if !report.certified {
        out.row("certification_refused", None, report.epsilon, None, Some(0.0), false);
    } else {
        out.row("epsilon", None, report.epsilon, None, Some(0.0), true);
    }
    for k in s.report_indices() {
        let t = report.times[k];
        let band = 3.0 * report.std_err[k];
        out.row("mean_square_distance", Some(t), report.decay[k], Some(band), Some(report.bound[k]), report.row_passes(k));
    }
    if report.certified {
        let floor = report.epsilon * (1.0 - RATE_SLACK);
        out.row("fitted_rate", None, report.fitted_rate, None, Some(floor), report.fitted_rate >= floor);
    } else {
        out.info("fitted_rate", None, report.fitted_rate);
    }
    out.info("continuity_constant", Some(s.grid.horizon), report.continuity_constant);

    if is_equilibrium(&s.coeffs)? {
        let h = LyapunovFunction::norm_squared(s.generator.dim());
        let ly = lyapunov_check(model, &h, &standard_probe_states(s.generator.dim(), s.seed))?;
        out.row("lyapunov_c3", None, ly.c3.unwrap_or(0.0), None, Some(0.0), ly.passed());
        if ly.passed() {
            let law = s.params.rho.clone().unwrap_or(crate::stability::InitialLaw::Dirac { point: xi.to_vec() });
            let e = exp_stability_check(model, &h, &ly, &law, &s.grid, s.paths, s.seed)?;
            for k in s.report_indices() {
                out.row(
                    "exp_second_moment",
                    Some(e.times[k]),
                    e.second_moment[k],
                    Some(3.0 * e.std_err[k]),
                    Some(e.bound[k]),
                    e.row_passes(k),
                );
            }
        }
    }
    Ok(())
}

/// `ε = 2 α_dis - L_f` from the analytic dissipativity bound.
fn certified_epsilon(model: Model<'_>, seed: u64) -> Result<f64> {
    let d = dissipativity_estimate(model, &standard_probe_pairs(model.generator.dim(), 20, seed))?;
    Ok(2.0 * d.analytic - model.coeffs.lipschitz_jump)
}

fn contraction(out: &mut Emitter, s: &Setup) -> Result<()> {
    let model = s.model()?;
    let epsilon = certified_epsilon(model, s.seed)?;
    if !(epsilon > 0.0) {
        out.row("certification_refused", None, epsilon, None, Some(0.0), false);
        return Ok(());
    }
    out.row("epsilon", None, epsilon, None, Some(0.0), true);
    let p = &s.params;
    let (rho, rho_tilde) = (p.rho.clone().unwrap(), p.rho_tilde.clone().unwrap());
    let t_list = p.t_list.clone().unwrap_or_default();
    let points = p.points.unwrap_or(256);
    let r = contraction_estimate(model, &rho, &rho_tilde, &t_list, points, s.grid.dt(), epsilon, s.seed)?;
    out.info("w2_initial", Some(0.0), r.initial_distance);
    for row in &r.rows {
        out.row("w2_independent", Some(row.time), row.independent, Some(row.band), Some(row.bound), row.passed());
        out.info("w2_coupled", Some(row.time), row.coupled);
    }
    if r.rows.len() >= 2 {
        let slope = r.coupled_log_slope();
        let ceiling = -epsilon / 2.0 * (1.0 - RATE_SLACK);
        out.row("coupled_log_slope", None, slope, None, Some(ceiling), slope <= ceiling);
    }
    Ok(())
}

/// `E_π ‖X‖²` in closed form for additive noise without drift.
fn invariant_oracle(s: &Setup) -> Result<Option<f64>> {
    if !matches!(s.preset, CoefficientsConfig::Additive { .. }) || !matches!(s.coeffs.jump, Jump::Additive { .. }) {
        return Ok(None);
    }
    if s.generator.eigenvalues().iter().any(|a| *a >= 0.0) {
        return Ok(None);
    }
    let g = s.coeffs.jump_square_diag(&StateVector::zeros(s.generator.dim()))?;
    Ok(Some(g.iter().zip(s.generator.eigenvalues()).map(|(g, a)| g / (-2.0 * a)).sum()))
}

fn invariant(out: &mut Emitter, s: &Setup) -> Result<()> {
    let model = s.model()?;
    let epsilon = certified_epsilon(model, s.seed)?;
    if !(epsilon > 0.0) {
        out.row("certification_refused", None, epsilon, None, Some(0.0), false);
        return Ok(());
    }
    out.row("epsilon", None, epsilon, None, Some(0.0), true);
    let p = &s.params;
    let xi = s.initial();
    let dt = s.grid.dt();
    let burn_in = p.burn_in.unwrap_or_else(|| (10.0 / epsilon).max(s.grid.horizon));
    let gap = p.gap.unwrap_or_else(|| (1.0 / epsilon).max(dt));
    let sample = invariant_measure_sampler(model, &xi, burn_in, gap, p.samples.unwrap_or(2000), dt, s.seed)?;
    let mut m = Moments::new(1);
    for x in sample.measure.points() {
        m.push(&[x.norm_sq()]);
    }
    let value = m.mean(0);
    let band = 3.0 * m.std_err(0);
    match invariant_oracle(s)? {
        Some(oracle) => {
            let pass = (value - oracle).abs() <= INVARIANT_TOLERANCE * oracle;
            out.row("invariant_second_moment", None, value, Some(band), Some(oracle), pass);
        }
        None => out.row("invariant_second_moment", None, value, Some(band), None, true),
    }
    let w = &sample.witness;
    out.row("stationarity_shift", Some(dt), w.shift_distance, None, Some(w.self_distance), w.passed());
    let t_list = p.t_list.clone().unwrap_or_default();
    let curve = convergence_to_invariant(model, &xi, &sample.measure, &t_list, dt, s.seed)?;
    for (t, d) in curve.times.iter().zip(&curve.distance) {
        out.info("w2_to_invariant", Some(*t), *d);
    }
    if curve.times.len() >= 2 {
        out.row("invariant_convergence_slope", None, curve.log_slope, None, Some(0.0), curve.log_slope < 0.0);
    }
    Ok(())
}

/// Whether an error should be reported as a numerical failure rather than a
/// usage error.
pub fn is_numerical(e: &Error) -> bool {
    matches!(e, Error::Divergence { .. } | Error::NonFiniteIntegrand { .. } | Error::NonFiniteMarkRegion { .. })
}
