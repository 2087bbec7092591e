//! Exponential Euler integration of the mild equation
//!
//! ```text
//! X_t = S_t ξ + ∫_0^t S_{t-s} F(X_s) ds + ∫_0^t ∫ S_{t-s} f(u, X_{s-}) q(ds, du)
//! ```
//!
//! and of its Yosida-regularized counterpart, where `F`, `f` and `ξ` are
//! composed with `R_n = n R(n, A)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::noise::{sample_jump_train, JumpTrain, MarkMeasure, RngStream};
use crate::operator::DiagonalGenerator;
use crate::state::{check_dim, distance_sq, norm_sq, StateVector};
use crate::stats::{ensemble, linear_fit, Moments};

/// States whose norm exceeds this abort the path.
pub const DIVERGENCE_NORM: f64 = 1e12;

type DriftFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type JumpFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Drift `F`.
#[derive(Clone)]
pub enum Drift {
    Zero,
    /// `F(z) = c z`
    Linear(f64),
    /// `F(z)_k = c tanh(z_k)`
    Saturating(f64),
    /// Arbitrary drift with its declared squared Lipschitz constant.
    Custom { f: DriftFn, lipschitz: f64 },
}

/// Jump coefficient `f(u, z)`.
#[derive(Clone)]
pub enum Jump {
    Zero,
    /// `f(u, z) = M u`, `M` given row by row (`N × d`).
    Additive { map: Vec<Vec<f64>> },
    /// `f(u, z) = c u_1 z`
    Multiplicative { scale: f64 },
    /// `f(u, z)_k = c u_1 tanh(z_k)`
    Saturating { scale: f64 },
    /// Arbitrary coefficient evaluated by mark quadrature with `mark_points`
    /// nodes per mark coordinate.
    Custom { f: JumpFn, lipschitz: f64, mark_points: usize },
}

impl fmt::Debug for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drift::Zero => write!(f, "Zero"),
            Drift::Linear(c) => write!(f, "Linear({c})"),
            Drift::Saturating(c) => write!(f, "Saturating({c})"),
            Drift::Custom { lipschitz, .. } => write!(f, "Custom {{ lipschitz: {lipschitz} }}"),
        }
    }
}

impl fmt::Debug for Jump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Jump::Zero => write!(f, "Zero"),
            Jump::Additive { map } => write!(f, "Additive {{ map: {map:?} }}"),
            Jump::Multiplicative { scale } => write!(f, "Multiplicative {{ scale: {scale} }}"),
            Jump::Saturating { scale } => write!(f, "Saturating {{ scale: {scale} }}"),
            Jump::Custom { lipschitz, mark_points, .. } => {
                write!(f, "Custom {{ lipschitz: {lipschitz}, mark_points: {mark_points} }}")
            }
        }
    }
}

impl Drift {
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        match self {
            Drift::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            Drift::Linear(c) => out.iter_mut().zip(z).for_each(|(o, v)| *o = c * v),
            Drift::Saturating(c) => out.iter_mut().zip(z).for_each(|(o, v)| *o = c * v.tanh()),
            Drift::Custom { f, .. } => f(z, out),
        }
    }

    fn lipschitz(&self) -> f64 {
        match self {
            Drift::Zero => 0.0,
            Drift::Linear(c) | Drift::Saturating(c) => c * c,
            Drift::Custom { lipschitz, .. } => *lipschitz,
        }
    }
}

impl Jump {
    pub fn apply(&self, u: &[f64], z: &[f64], out: &mut [f64]) {
        match self {
            Jump::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            Jump::Additive { map } => {
                for (o, row) in out.iter_mut().zip(map) {
                    *o = row.iter().zip(u).map(|(m, x)| m * x).sum();
                }
            }
            Jump::Multiplicative { scale } => out.iter_mut().zip(z).for_each(|(o, v)| *o = scale * u[0] * v),
            Jump::Saturating { scale } => out.iter_mut().zip(z).for_each(|(o, v)| *o = scale * u[0] * v.tanh()),
            Jump::Custom { f, .. } => f(u, z, out),
        }
    }
}

/// Drift, jump coefficient and the constants of the Lipschitz and growth
/// conditions.
///
/// `lipschitz_drift` is `L_F` with `‖F(z) - F(z')‖² ≤ L_F ‖z - z'‖²`,
/// `lipschitz_jump` is `L_f` with `∫ ‖f(u, z) - f(u, z')‖² β(du) ≤ L_f ‖z - z'‖²`
/// and `f0_sq = ∫ ‖f(u, 0)‖² β(du)`. The catalogue coefficients get exact
/// values; they may be overridden by declared ones.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub drift: Drift,
    pub jump: Jump,
    pub lipschitz_drift: f64,
    pub lipschitz_jump: f64,
    pub f0_sq: f64,
    dim: usize,
    mark_dim: usize,
    // ∫ u β(du) and ∫ u uᵀ β(du), cached from the measure
    mean_mark: Vec<f64>,
    second_moment: Vec<Vec<f64>>,
    quadrature: Option<(Vec<Vec<f64>>, Vec<f64>)>,
}

impl CoefficientSet {
    pub fn new(dim: usize, drift: Drift, jump: Jump, measure: &MarkMeasure) -> Result<Self> {
        let mark_dim = measure.dim();
        match &jump {
            Jump::Additive { map } => {
                check_dim(dim, map.len())?;
                if let Some(row) = map.iter().find(|r| r.len() != mark_dim) {
                    return Err(Error::Dimension { expected: mark_dim, got: row.len() });
                }
            }
            Jump::Custom { lipschitz, .. } if !(*lipschitz >= 0.0) => {
                return Err(Error::invalid("lipschitz_jump", "must be nonnegative"));
            }
            _ => {}
        }
        if let Drift::Custom { lipschitz, .. } = &drift {
            if !(*lipschitz >= 0.0) {
                return Err(Error::invalid("lipschitz_drift", "must be nonnegative"));
            }
        }
        let mean_mark = measure.mean_mark();
        let second_moment = measure.second_moment_matrix();
        let quadrature = match &jump {
            Jump::Custom { mark_points, .. } => {
                let q = measure.quadrature(*mark_points);
                Some((q.nodes, q.weights))
            }
            _ => None,
        };
        let mut set = Self {
            lipschitz_drift: drift.lipschitz(),
            lipschitz_jump: 0.0,
            f0_sq: 0.0,
            drift,
            jump,
            dim,
            mark_dim,
            mean_mark,
            second_moment,
            quadrature,
        };
        let s11 = set.second_moment[0][0];
        set.lipschitz_jump = match &set.jump {
            Jump::Zero | Jump::Additive { .. } => 0.0,
            Jump::Multiplicative { scale } | Jump::Saturating { scale } => scale * scale * s11,
            Jump::Custom { lipschitz, .. } => *lipschitz,
        };
        set.f0_sq = set.jump_square_diag(&vec![0.0; dim])?.iter().sum();
        Ok(set)
    }

    pub fn zero(dim: usize, measure: &MarkMeasure) -> Result<Self> {
        Self::new(dim, Drift::Zero, Jump::Zero, measure)
    }

    /// Replaces the analytic constants by declared ones.
    pub fn with_declared(mut self, lipschitz_drift: Option<f64>, lipschitz_jump: Option<f64>) -> Self {
        if let Some(l) = lipschitz_drift {
            self.lipschitz_drift = l;
        }
        if let Some(l) = lipschitz_jump {
            self.lipschitz_jump = l;
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mark_dim(&self) -> usize {
        self.mark_dim
    }

    /// Linear growth constant `K = 2 max(L_f, f0_sq)`.
    pub fn growth_constant(&self) -> f64 {
        2.0 * self.lipschitz_jump.max(self.f0_sq)
    }

    /// `F(0)`.
    pub fn drift_at_origin(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.drift.apply(&vec![0.0; self.dim], &mut out);
        out
    }

    pub fn drift_apply(&self, z: &[f64], out: &mut [f64]) {
        self.drift.apply(z, out)
    }

    pub fn jump_apply(&self, u: &[f64], z: &[f64], out: &mut [f64]) {
        self.jump.apply(u, z, out)
    }

    /// `∫ f(u, z) β(du)`.
    pub fn compensator_mean(&self, z: &[f64], out: &mut [f64]) {
        let m1 = self.mean_mark[0];
        match &self.jump {
            Jump::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            Jump::Additive { map } => {
                for (o, row) in out.iter_mut().zip(map) {
                    *o = row.iter().zip(&self.mean_mark).map(|(m, x)| m * x).sum();
                }
            }
            Jump::Multiplicative { scale } => out.iter_mut().zip(z).for_each(|(o, v)| *o = scale * m1 * v),
            Jump::Saturating { scale } => out.iter_mut().zip(z).for_each(|(o, v)| *o = scale * m1 * v.tanh()),
            Jump::Custom { f, .. } => {
                let (nodes, weights) = self.quadrature.as_ref().expect("custom jumps carry a grid");
                out.iter_mut().for_each(|v| *v = 0.0);
                let mut buf = vec![0.0; self.dim];
                for (u, w) in nodes.iter().zip(weights) {
                    f(u, z, &mut buf);
                    out.iter_mut().zip(&buf).for_each(|(o, v)| *o += w * v);
                }
            }
        }
    }

    /// `(∫ f_k(u, z)² β(du))_k`, the diagonal of the jump covariance.
    pub fn jump_square_diag(&self, z: &[f64]) -> Result<Vec<f64>> {
        let s11 = self.second_moment[0][0];
        Ok(match &self.jump {
            Jump::Zero => vec![0.0; self.dim],
            Jump::Additive { map } => map
                .iter()
                .map(|row| {
                    let mut q = 0.0;
                    for i in 0..row.len() {
                        for j in 0..row.len() {
                            q += row[i] * self.second_moment[i][j] * row[j];
                        }
                    }
                    q
                })
                .collect(),
            Jump::Multiplicative { scale } => z.iter().map(|v| scale * scale * s11 * v * v).collect(),
            Jump::Saturating { scale } => z.iter().map(|v| scale * scale * s11 * v.tanh().powi(2)).collect(),
            Jump::Custom { f, .. } => {
                let (nodes, weights) = self.quadrature.as_ref().expect("custom jumps carry a grid");
                let mut acc = vec![0.0; self.dim];
                let mut buf = vec![0.0; self.dim];
                for (u, w) in nodes.iter().zip(weights) {
                    f(u, z, &mut buf);
                    if buf.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFiniteMarkRegion { region: format!("quadrature node u = {u:?}") });
                    }
                    acc.iter_mut().zip(&buf).for_each(|(a, v)| *a += w * v * v);
                }
                acc
            }
        })
    }

    /// `∫ ‖f(u, z) - f(u, z')‖² β(du)`.
    pub fn jump_difference_sq(&self, z: &[f64], z2: &[f64]) -> f64 {
        let s11 = self.second_moment[0][0];
        match &self.jump {
            Jump::Zero | Jump::Additive { .. } => 0.0,
            Jump::Multiplicative { scale } => scale * scale * s11 * distance_sq(z, z2),
            Jump::Saturating { scale } => {
                scale * scale * s11 * z.iter().zip(z2).map(|(a, b)| (a.tanh() - b.tanh()).powi(2)).sum::<f64>()
            }
            Jump::Custom { f, .. } => {
                let (nodes, weights) = self.quadrature.as_ref().expect("custom jumps carry a grid");
                let mut a = vec![0.0; self.dim];
                let mut b = vec![0.0; self.dim];
                nodes
                    .iter()
                    .zip(weights)
                    .map(|(u, w)| {
                        f(u, z, &mut a);
                        f(u, z2, &mut b);
                        w * distance_sq(&a, &b)
                    })
                    .sum()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub probes: usize,
    /// `max ‖F(z) - F(z')‖² / ‖z - z'‖²` over probes.
    pub drift_ratio: f64,
    /// `max ∫‖f(u, z) - f(u, z')‖² β / ‖z - z'‖²` over probes.
    pub jump_ratio: f64,
    pub declared_drift: f64,
    pub declared_jump: f64,
    pub growth_constant: f64,
    /// `max ∫‖f(u, z)‖² β / (1 + ‖z‖²)` over all probe states.
    pub growth_ratio: f64,
    /// The first probe pair violating a declared constant.
    pub witness: Option<(StateVector, StateVector)>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.witness.is_none()
    }

    pub fn into_result(self) -> Result<Self> {
        match &self.witness {
            None => Ok(self),
            Some((z, z2)) => Err(Error::Validation(format!(
                "declared constants exceeded (L_F: {} vs {}, L_f: {} vs {}, growth: {} vs K = {}) at z = {:?}, z' = {:?}",
                self.drift_ratio,
                self.declared_drift,
                self.jump_ratio,
                self.declared_jump,
                self.growth_ratio,
                self.growth_constant,
                z.as_slice(),
                z2.as_slice()
            ))),
        }
    }
}

const RATIO_SLACK: f64 = 1e-9;

/// Probes the Lipschitz and linear-growth conditions on at least ten pairs.
pub fn validate_coefficients(
    coeffs: &CoefficientSet,
    probes: &[(StateVector, StateVector)],
) -> Result<ValidationReport> {
    if probes.len() < 10 {
        return Err(Error::invalid("probes", "at least 10 probe pairs are required"));
    }
    let n = coeffs.dim();
    let (mut fa, mut fb) = (vec![0.0; n], vec![0.0; n]);
    let mut report = ValidationReport {
        probes: probes.len(),
        drift_ratio: 0.0,
        jump_ratio: 0.0,
        declared_drift: coeffs.lipschitz_drift,
        declared_jump: coeffs.lipschitz_jump,
        growth_constant: coeffs.growth_constant(),
        growth_ratio: 0.0,
        witness: None,
    };
    let tol = |declared: f64| declared * (1.0 + RATIO_SLACK) + RATIO_SLACK;
    for (z, z2) in probes {
        check_dim(n, z.dim())?;
        check_dim(n, z2.dim())?;
        let d = z.distance_sq(z2);
        let mut bad = false;
        if d > 0.0 {
            coeffs.drift_apply(z, &mut fa);
            coeffs.drift_apply(z2, &mut fb);
            let r = distance_sq(&fa, &fb) / d;
            report.drift_ratio = report.drift_ratio.max(r);
            bad |= r > tol(coeffs.lipschitz_drift);
            let r = coeffs.jump_difference_sq(z, z2) / d;
            report.jump_ratio = report.jump_ratio.max(r);
            bad |= r > tol(coeffs.lipschitz_jump);
        }
        for x in [z, z2] {
            let g = coeffs.jump_square_diag(x)?.iter().sum::<f64>() / (1.0 + x.norm_sq());
            report.growth_ratio = report.growth_ratio.max(g);
            bad |= g > tol(coeffs.growth_constant());
        }
        if bad && report.witness.is_none() {
            report.witness = Some((z.clone(), z2.clone()));
        }
    }
    Ok(report)
}

/// Uniform grid `t_k = k Δ`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl SimulationGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid("T", "must be positive and finite"));
        }
        if steps == 0 {
            return Err(Error::invalid("steps", "must be at least 1"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    Mild,
    Yosida { n: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MildPath {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub train_fingerprint: u64,
    pub scheme: Scheme,
}

impl MildPath {
    pub fn sup_norm_sq(&self) -> f64 {
        self.states.iter().map(|x| x.norm_sq()).fold(0.0, f64::max)
    }
}

/// Model bundle shared by the simulation routines.
#[derive(Debug, Clone, Copy)]
pub struct Model<'a> {
    pub generator: &'a DiagonalGenerator,
    pub coeffs: &'a CoefficientSet,
    pub measure: &'a MarkMeasure,
}

impl<'a> Model<'a> {
    pub fn new(generator: &'a DiagonalGenerator, coeffs: &'a CoefficientSet, measure: &'a MarkMeasure) -> Result<Self> {
        check_dim(generator.dim(), coeffs.dim())?;
        check_dim(measure.dim(), coeffs.mark_dim())?;
        Ok(Self { generator, coeffs, measure })
    }
}

/// One-step exponential propagator with preallocated buffers.
pub struct Stepper<'a> {
    model: Model<'a>,
    dt: f64,
    decay: Vec<f64>,
    weight: Vec<f64>,
    multiplier: Option<Vec<f64>>,
    drift: Vec<f64>,
    comp: Vec<f64>,
    jump: Vec<f64>,
    next: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(model: Model<'a>, dt: f64, scheme: Scheme) -> Result<Self> {
        let n = model.generator.dim();
        let multiplier = match scheme {
            Scheme::Mild => None,
            Scheme::Yosida { n } => Some(model.generator.regularizer(n)?),
        };
        Ok(Self {
            decay: model.generator.semigroup_factors(dt)?,
            weight: model.generator.convolution_weight(dt)?,
            model,
            dt,
            multiplier,
            drift: vec![0.0; n],
            comp: vec![0.0; n],
            jump: vec![0.0; n],
            next: vec![0.0; n],
        })
    }

    /// Advances `x` by one step. `jumps` yields `(offset, mark)` with offsets in `(0, Δ]`.
    pub fn step<'j, I>(&mut self, x: &mut [f64], jumps: I)
    where
        I: IntoIterator<Item = (f64, &'j [f64])>,
    {
        let eig = self.model.generator.eigenvalues();
        let coeffs = self.model.coeffs;
        coeffs.drift_apply(x, &mut self.drift);
        coeffs.compensator_mean(x, &mut self.comp);
        for k in 0..x.len() {
            self.next[k] = self.weight[k] * (self.drift[k] - self.comp[k]);
        }
        for (offset, u) in jumps {
            coeffs.jump_apply(u, x, &mut self.jump);
            let lag = self.dt - offset;
            for k in 0..x.len() {
                self.next[k] += (eig[k] * lag).exp() * self.jump[k];
            }
        }
        if let Some(r) = &self.multiplier {
            self.next.iter_mut().zip(r).for_each(|(v, r)| *v *= r);
        }
        for k in 0..x.len() {
            x[k] = self.decay[k] * x[k] + self.next[k];
        }
    }
}

/// `S_Δ x + W(Δ)(F(x) - ∫ f(u, x) β(du)) + Σ_j S_{Δ-δ_j} f(u_j, x)`.
pub fn step_mild(model: Model<'_>, x: &StateVector, jumps: &[(f64, Vec<f64>)], dt: f64) -> Result<StateVector> {
    check_dim(model.generator.dim(), x.dim())?;
    if let Some((d, _)) = jumps.iter().find(|(d, _)| !(*d > 0.0 && *d <= dt)) {
        return Err(Error::invalid("jumps", format!("offset {d} outside (0, {dt}]")));
    }
    let mut stepper = Stepper::new(model, dt, Scheme::Mild)?;
    let mut y = x.as_slice().to_vec();
    stepper.step(&mut y, jumps.iter().map(|(d, u)| (*d, u.as_slice())));
    let norm = norm_sq(&y).sqrt();
    if !norm.is_finite() || norm > DIVERGENCE_NORM {
        return Err(Error::Divergence { path: 0, step: 0, time: dt, norm });
    }
    Ok(y.into())
}

/// Integrates one path over `grid` with a given jump train, calling
/// `visit(k, X_{t_k})` at every grid time including `k = 0`.
pub fn integrate_path<V>(
    model: Model<'_>,
    grid: &SimulationGrid,
    xi: &StateVector,
    train: &JumpTrain,
    scheme: Scheme,
    path: usize,
    mut visit: V,
) -> Result<()>
where
    V: FnMut(usize, &[f64]),
{
    check_dim(model.generator.dim(), xi.dim())?;
    if train.horizon() < grid.horizon {
        return Err(Error::invalid("train", "horizon shorter than the grid"));
    }
    let mut stepper = Stepper::new(model, grid.dt(), scheme)?;
    let mut x = match scheme {
        Scheme::Mild => xi.as_slice().to_vec(),
        Scheme::Yosida { n } => model.generator.regularize(n, xi)?.into_inner(),
    };
    visit(0, &x);
    let times = train.times();
    let mut j = 0;
    for k in 0..grid.steps {
        let t0 = grid.time(k);
        let t1 = grid.time(k + 1);
        let start = j;
        while j < times.len() && times[j] <= t1 {
            j += 1;
        }
        stepper.step(&mut x, (start..j).map(|i| (times[i] - t0, train.mark(i))));
        let norm = norm_sq(&x).sqrt();
        if !norm.is_finite() || norm > DIVERGENCE_NORM {
            return Err(Error::Divergence { path, step: k + 1, time: t1, norm });
        }
        visit(k + 1, &x);
    }
    Ok(())
}

fn record(
    model: Model<'_>,
    grid: &SimulationGrid,
    xi: &StateVector,
    train: &JumpTrain,
    scheme: Scheme,
    path: usize,
) -> Result<MildPath> {
    let mut states = Vec::with_capacity(grid.steps + 1);
    integrate_path(model, grid, xi, train, scheme, path, |_, x| states.push(StateVector::from(x.to_vec())))?;
    Ok(MildPath { times: grid.times(), states, train_fingerprint: train.fingerprint(), scheme })
}

pub fn simulate_mild_path(model: Model<'_>, grid: &SimulationGrid, xi: &StateVector, rng: RngStream) -> Result<MildPath> {
    let train = sample_jump_train(model.measure, grid.horizon, rng)?;
    record(model, grid, xi, &train, Scheme::Mild, rng.stream as usize)
}

/// The regularized scheme on the same jump train a mild run with `rng` uses.
pub fn simulate_yosida_path(
    model: Model<'_>,
    grid: &SimulationGrid,
    xi: &StateVector,
    rng: RngStream,
    n: f64,
) -> Result<MildPath> {
    let growth_rate = model.generator.growth_rate();
    if !(n > growth_rate) {
        return Err(Error::Spectrum { lambda: n, growth_rate });
    }
    let train = sample_jump_train(model.measure, grid.horizon, rng)?;
    record(model, grid, xi, &train, Scheme::Yosida { n }, rng.stream as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub n: f64,
    /// Estimate of `E sup_k ‖X^n_{t_k} - X_{t_k}‖²`.
    pub gap: f64,
    pub std_err: f64,
    /// Three standard errors.
    pub band: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapCurve {
    pub rows: Vec<GapRow>,
}

impl GapCurve {
    /// Consecutive gaps separated beyond their bands.
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].gap + w[1].band < w[0].gap - w[0].band)
    }

    /// Least-squares slope of `log gap` against `log n`.
    pub fn log_slope(&self) -> f64 {
        let x: Vec<f64> = self.rows.iter().map(|r| r.n.ln()).collect();
        let y: Vec<f64> = self.rows.iter().map(|r| r.gap.ln()).collect();
        linear_fit(&x, &y).0
    }
}

/// Monte Carlo Yosida gap with the same jump train for both schemes on every path.
pub fn yosida_gap_estimate(
    model: Model<'_>,
    grid: &SimulationGrid,
    xi: &StateVector,
    paths: usize,
    n_list: &[f64],
    seed: u64,
) -> Result<GapCurve> {
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("n_list", "must be increasing"));
    }
    let growth_rate = model.generator.growth_rate();
    if let Some(&n) = n_list.iter().find(|&&n| !(n > growth_rate)) {
        return Err(Error::Spectrum { lambda: n, growth_rate });
    }
    let dim = model.generator.dim();
    let m = ensemble(paths, n_list.len(), |p, out| {
        let train = sample_jump_train(model.measure, grid.horizon, RngStream::new(seed, p as u64))?;
        let mut mild = vec![0.0; (grid.steps + 1) * dim];
        integrate_path(model, grid, xi, &train, Scheme::Mild, p, |k, x| {
            mild[k * dim..(k + 1) * dim].copy_from_slice(x)
        })?;
        for (i, &n) in n_list.iter().enumerate() {
            let mut sup: f64 = 0.0;
            integrate_path(model, grid, xi, &train, Scheme::Yosida { n }, p, |k, x| {
                sup = sup.max(distance_sq(x, &mild[k * dim..(k + 1) * dim]));
            })?;
            out[i] = sup;
        }
        Ok(())
    })?;
    Ok(GapCurve { rows: gap_rows(&m, n_list) })
}

fn gap_rows(m: &Moments, n_list: &[f64]) -> Vec<GapRow> {
    n_list
        .iter()
        .enumerate()
        .map(|(i, &n)| GapRow { n, gap: m.mean(i), std_err: m.std_err(i), band: 3.0 * m.std_err(i) })
        .collect()
}

/// `(mean over paths of sup_k ‖X_{t_k}‖²)^{1/2}`.
pub fn st2_norm(paths: &[MildPath]) -> Result<f64> {
    let Some(first) = paths.first() else {
        return Err(Error::invalid("paths", "ensemble is empty"));
    };
    if paths.iter().any(|p| p.times != first.times) {
        return Err(Error::invalid("paths", "paths must share one grid"));
    }
    let mean = paths.iter().map(MildPath::sup_norm_sq).sum::<f64>() / paths.len() as f64;
    Ok(mean.sqrt())
}

/// Ensemble statistics of a mild run at every grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentCurve {
    pub times: Vec<f64>,
    /// Per time: coordinatewise means.
    pub mean: Vec<Vec<f64>>,
    pub mean_std_err: Vec<Vec<f64>>,
    /// Per time: `E‖X_t‖²`.
    pub second_moment: Vec<f64>,
    pub second_std_err: Vec<f64>,
    /// `Σ_k Δ E‖X_{t_k}‖²`, the grid analogue of `∫_0^T E‖X_t‖² dt`.
    pub integrated_second_moment: f64,
    /// `(E sup_t ‖X_t‖²)^{1/2}` over the grid.
    pub st2_norm: f64,
}

pub fn mild_moments(
    model: Model<'_>,
    grid: &SimulationGrid,
    xi: &StateVector,
    paths: usize,
    seed: u64,
) -> Result<MomentCurve> {
    let dim = model.generator.dim();
    let width = dim + 1;
    let sup_slot = width * (grid.steps + 1);
    let m = ensemble(paths, sup_slot + 1, |p, out| {
        let train = sample_jump_train(model.measure, grid.horizon, RngStream::new(seed, p as u64))?;
        let mut sup: f64 = 0.0;
        integrate_path(model, grid, xi, &train, Scheme::Mild, p, |k, x| {
            let row = &mut out[k * width..(k + 1) * width];
            row[..dim].copy_from_slice(x);
            row[dim] = norm_sq(x);
            sup = sup.max(row[dim]);
        })?;
        out[sup_slot] = sup;
        Ok(())
    })?;
    let times = grid.times();
    let at = |k: usize, i: usize| k * width + i;
    let second_moment: Vec<f64> = (0..times.len()).map(|k| m.mean(at(k, dim))).collect();
    let integrated_second_moment = second_moment[..grid.steps].iter().sum::<f64>() * grid.dt();
    Ok(MomentCurve {
        mean: (0..times.len()).map(|k| (0..dim).map(|i| m.mean(at(k, i))).collect()).collect(),
        mean_std_err: (0..times.len()).map(|k| (0..dim).map(|i| m.std_err(at(k, i))).collect()).collect(),
        second_std_err: (0..times.len()).map(|k| m.std_err(at(k, dim))).collect(),
        second_moment,
        integrated_second_moment,
        st2_norm: m.mean(sup_slot).sqrt(),
        times,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfConvergence {
    pub steps: Vec<usize>,
    /// `E‖X_T‖²` for each step count.
    pub endpoint: Vec<f64>,
    /// `|m(Δ) - m(Δ/2)| / |m(Δ/2) - m(Δ/4)|` for consecutive halvings.
    pub ratios: Vec<f64>,
}

/// Mean-square endpoint under successive halvings of `Δ` with the same jump
/// trains; the first-order scheme gives ratios near 2.
pub fn self_convergence(
    model: Model<'_>,
    horizon: f64,
    coarse_steps: usize,
    halvings: usize,
    xi: &StateVector,
    paths: usize,
    seed: u64,
) -> Result<SelfConvergence> {
    let steps: Vec<usize> = (0..=halvings).map(|h| coarse_steps << h).collect();
    let grids = steps.iter().map(|&s| SimulationGrid::new(horizon, s)).collect::<Result<Vec<_>>>()?;
    let m = ensemble(paths, steps.len(), |p, out| {
        let train = sample_jump_train(model.measure, horizon, RngStream::new(seed, p as u64))?;
        for (i, grid) in grids.iter().enumerate() {
            integrate_path(model, grid, xi, &train, Scheme::Mild, p, |k, x| {
                if k == grid.steps {
                    out[i] = norm_sq(x);
                }
            })?;
        }
        Ok(())
    })?;
    let endpoint: Vec<f64> = (0..steps.len()).map(|i| m.mean(i)).collect();
    let diffs: Vec<f64> = endpoint.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    let ratios = diffs.windows(2).map(|d| d[0] / d[1]).collect();
    Ok(SelfConvergence { steps, endpoint, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::MarkFamily;

    fn scalar(a: f64) -> DiagonalGenerator {
        DiagonalGenerator::new(vec![a]).unwrap()
    }

    fn probes(dim: usize) -> Vec<(StateVector, StateVector)> {
        (0..12)
            .map(|i| {
                let z: Vec<f64> = (0..dim).map(|k| ((i * 7 + k * 3) as f64 * 0.37).sin() * (1.0 + i as f64)).collect();
                let z2: Vec<f64> = (0..dim).map(|k| ((i * 5 + k) as f64 * 0.91).cos() * 0.5 * i as f64).collect();
                (z.into(), z2.into())
            })
            .collect()
    }

    #[test]
    fn validation_examples() {
        let m = MarkMeasure::symmetric_pair(2.0, 1.5).unwrap();
        let zero = CoefficientSet::zero(2, &m).unwrap();
        let r = validate_coefficients(&zero, &probes(2)).unwrap();
        assert!(r.passed());
        assert_eq!(r.growth_constant, 0.0);

        let mult = CoefficientSet::new(1, Drift::Zero, Jump::Multiplicative { scale: 1.0 }, &m).unwrap();
        let m2 = m.moment(2).unwrap();
        assert!((mult.lipschitz_jump - m2).abs() < 1e-12);
        let r = validate_coefficients(&mult, &probes(1)).unwrap();
        assert!((r.jump_ratio - m2).abs() < 1e-12 * m2);

        let half = CoefficientSet::new(1, Drift::Linear(-0.5), Jump::Zero, &m).unwrap();
        let r = validate_coefficients(&half, &probes(1)).unwrap();
        assert!((r.drift_ratio - 0.25).abs() < 1e-15);

        let wrong = half.clone().with_declared(Some(0.2), None);
        let r = validate_coefficients(&wrong, &probes(1)).unwrap();
        assert!(!r.passed());
        assert!(matches!(r.into_result(), Err(Error::Validation(_))));
        assert!(validate_coefficients(&zero, &probes(2)[..9]).is_err());
    }

    #[test]
    fn additive_growth_constant() {
        let m = MarkMeasure::new(3.0, MarkFamily::Atoms { points: vec![vec![2.0]], weights: vec![1.0] }).unwrap();
        let c = CoefficientSet::new(1, Drift::Zero, Jump::Additive { map: vec![vec![1.0]] }, &m).unwrap();
        assert_eq!(c.f0_sq, 12.0);
        assert_eq!(c.growth_constant(), 24.0);
        assert!(validate_coefficients(&c, &probes(1)).unwrap().passed());
    }

    #[test]
    fn step_examples() {
        let m = MarkMeasure::symmetric_pair(2.0, 1.0).unwrap();
        let a = scalar(-1.0);
        let zero = CoefficientSet::zero(1, &m).unwrap();
        let model = Model::new(&a, &zero, &m).unwrap();
        let x = StateVector::from(vec![3.0]);
        let y = step_mild(model, &x, &[], 0.1).unwrap();
        assert_eq!(y[0], 3.0 * (-0.1f64).exp());

        let add = CoefficientSet::new(1, Drift::Zero, Jump::Additive { map: vec![vec![1.0]] }, &m).unwrap();
        let model = Model::new(&a, &add, &m).unwrap();
        let dt = 0.2;
        let y = step_mild(model, &x, &[(dt / 2.0, vec![1.0])], dt).unwrap();
        assert!((y[0] - (3.0 * (-dt).exp() + (-dt / 2.0).exp())).abs() < 1e-15);
        assert!(step_mild(model, &x, &[(0.0, vec![1.0])], dt).is_err());
    }

    #[test]
    fn zero_coefficients_follow_semigroup() {
        let m = MarkMeasure::symmetric_pair(2.0, 1.0).unwrap();
        let a = DiagonalGenerator::laplacian_dirichlet(3).unwrap();
        let zero = CoefficientSet::zero(3, &m).unwrap();
        let model = Model::new(&a, &zero, &m).unwrap();
        let grid = SimulationGrid::new(0.1, 50).unwrap();
        let xi = StateVector::from(vec![1.0, -2.0, 0.5]);
        let path = simulate_mild_path(model, &grid, &xi, RngStream::new(1, 0)).unwrap();
        for (t, x) in path.times.iter().zip(&path.states) {
            let exact = a.semigroup_apply(*t, &xi).unwrap();
            assert!(x.distance_sq(&exact).sqrt() <= 1e-12 * xi.norm());
        }
        let y = simulate_yosida_path(model, &grid, &xi, RngStream::new(1, 0), 50.0).unwrap();
        let rxi = a.regularize(50.0, &xi).unwrap();
        for (t, x) in y.times.iter().zip(&y.states) {
            let exact = a.semigroup_apply(*t, &rxi).unwrap();
            assert!(x.distance_sq(&exact).sqrt() <= 1e-12 * xi.norm());
        }
        assert_eq!(path.train_fingerprint, y.train_fingerprint);
    }

    #[test]
    fn yosida_scalar_multiplier() {
        let m = MarkMeasure::symmetric_pair(2.0, 1.0).unwrap();
        let a = scalar(-1.0);
        let add = CoefficientSet::new(1, Drift::Zero, Jump::Additive { map: vec![vec![1.0]] }, &m).unwrap();
        let model = Model::new(&a, &add, &m).unwrap();
        let grid = SimulationGrid::new(1.0, 100).unwrap();
        let xi = StateVector::from(vec![2.0]);
        let mild = simulate_mild_path(model, &grid, &xi, RngStream::new(3, 1)).unwrap();
        let yos = simulate_yosida_path(model, &grid, &xi, RngStream::new(3, 1), 9.0).unwrap();
        assert_eq!(yos.states[0][0], 1.8);
        for (x, y) in mild.states.iter().zip(&yos.states) {
            assert!((y[0] - 0.9 * x[0]).abs() < 1e-14);
        }
        assert!(simulate_yosida_path(model, &grid, &xi, RngStream::new(3, 1), -1.0).is_err());
    }

    #[test]
    fn exact_linear_gap() {
        let m = MarkMeasure::symmetric_pair(2.0, 1.0).unwrap();
        let a = scalar(-1.0);
        let zero = CoefficientSet::zero(1, &m).unwrap();
        let model = Model::new(&a, &zero, &m).unwrap();
        let grid = SimulationGrid::new(1.0, 20).unwrap();
        let xi = StateVector::from(vec![2.0]);
        let ns = [4.0, 16.0, 64.0, 256.0];
        let curve = yosida_gap_estimate(model, &grid, &xi, 4, &ns, 0).unwrap();
        for row in &curve.rows {
            let exact = (2.0 / (row.n + 1.0)).powi(2);
            assert!((row.gap - exact).abs() <= 1e-10 * exact);
        }
        assert!(curve.log_slope() <= -1.0);
    }

    #[test]
    fn st2_examples() {
        let path = |v: f64| MildPath {
            times: vec![0.0, 1.0],
            states: vec![vec![v].into(), vec![0.0].into()],
            train_fingerprint: 0,
            scheme: Scheme::Mild,
        };
        assert_eq!(st2_norm(&[path(0.0)]).unwrap(), 0.0);
        assert!((st2_norm(&[path(1.0), path(3.0)]).unwrap() - 5f64.sqrt()).abs() < 1e-15);
        assert!(st2_norm(&[]).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let m = MarkMeasure::symmetric_pair(0.0, 1.0).unwrap();
        let a = scalar(30.0);
        let zero = CoefficientSet::zero(1, &m).unwrap();
        let model = Model::new(&a, &zero, &m).unwrap();
        let grid = SimulationGrid::new(1.0, 10).unwrap();
        match simulate_mild_path(model, &grid, &StateVector::from(vec![1.0]), RngStream::new(0, 7)) {
            Err(Error::Divergence { path, step, .. }) => {
                assert_eq!(path, 7);
                assert_eq!(step, 10);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn deterministic_self_convergence() {
        let m = MarkMeasure::symmetric_pair(0.0, 1.0).unwrap();
        let a = scalar(-1.0);
        let c = CoefficientSet::new(1, Drift::Saturating(-2.0), Jump::Zero, &m).unwrap();
        let model = Model::new(&a, &c, &m).unwrap();
        let r = self_convergence(model, 1.0, 20, 3, &StateVector::from(vec![1.5]), 1, 0).unwrap();
        for ratio in r.ratios {
            assert!((1.5..=3.0).contains(&ratio), "{ratio}");
        }
    }
}
