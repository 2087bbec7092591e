use std::fmt;
use std::sync::Arc;

use super::{sample_jump_train, JumpTrain, MarkMeasure, RngStream};
use crate::error::{Error, Result};
use crate::operator::{phi1, DiagonalGenerator};
use crate::state::StateVector;
use crate::stats::map_paths;

type IntegrandFn = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;

/// Deterministic integrand `f(s, u)` of a compensated Poisson integral.
///
/// The catalogue variants carry closed-form compensators; `general` falls back
/// to midpoint quadrature in time with step `time_step`, and a tensor mark grid
/// with `mark_points` nodes per mark coordinate.
#[derive(Clone)]
pub struct Integrand {
    dim: usize,
    kind: Kind,
}

#[derive(Clone)]
enum Kind {
    Zero,
    Constant(Vec<f64>),
    /// `f(s, u) = e^{-decay s} M u`
    LinearMark { map: Vec<Vec<f64>>, decay: f64 },
    General { f: IntegrandFn, time_independent: bool, time_step: f64, mark_points: usize },
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match &self.kind {
            Kind::Zero => "zero",
            Kind::Constant(_) => "constant",
            Kind::LinearMark { .. } => "linear_mark",
            Kind::General { .. } => "general",
        };
        f.debug_struct("Integrand").field("dim", &self.dim).field("kind", &name).finish()
    }
}

impl Integrand {
    pub fn zero(dim: usize) -> Self {
        Self { dim, kind: Kind::Zero }
    }

    pub fn constant(c: StateVector) -> Self {
        Self { dim: c.dim(), kind: Kind::Constant(c.into_inner()) }
    }

    /// `f(s, u) = e^{-decay·s} M u` with `M` given row by row (`dim × mark_dim`).
    pub fn linear_mark(map: Vec<Vec<f64>>, decay: f64) -> Result<Self> {
        let dim = map.len();
        if dim == 0 || map.iter().any(|r| r.len() != map[0].len() || r.is_empty()) {
            return Err(Error::invalid("map", "expected a non-empty rectangular matrix"));
        }
        Ok(Self { dim, kind: Kind::LinearMark { map, decay } })
    }

    /// The scalar-mark identity embedding `f(s, u) = e^{-decay·s} u`.
    pub fn mark_identity(mark_dim: usize, decay: f64) -> Self {
        let map = (0..mark_dim)
            .map(|k| (0..mark_dim).map(|i| if i == k { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { dim: mark_dim, kind: Kind::LinearMark { map, decay } }
    }

    pub fn general<F>(dim: usize, f: F, time_independent: bool, time_step: f64, mark_points: usize) -> Self
    where
        F: Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            dim,
            kind: Kind::General { f: Arc::new(f), time_independent, time_step, mark_points: mark_points.max(1) },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, Kind::Zero)
    }

    /// Time step of the compensator quadrature, `None` when closed forms apply.
    pub fn quadrature_step(&self) -> Option<f64> {
        match &self.kind {
            Kind::General { time_step, .. } => Some(*time_step),
            _ => None,
        }
    }

    pub fn eval(&self, s: f64, u: &[f64]) -> Result<Vec<f64>> {
        let v = match &self.kind {
            Kind::Zero => vec![0.0; self.dim],
            Kind::Constant(c) => c.clone(),
            Kind::LinearMark { map, decay } => {
                let scale = (-decay * s).exp();
                map.iter().map(|row| scale * row.iter().zip(u).map(|(m, x)| m * x).sum::<f64>()).collect()
            }
            Kind::General { f, .. } => f(s, u),
        };
        if v.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteIntegrand { time: s, mark: u.to_vec() });
        }
        Ok(v)
    }

    /// `∫ f(s, u) β(du)` at a fixed time.
    fn mark_mean(&self, measure: &MarkMeasure, s: f64) -> Result<Vec<f64>> {
        match &self.kind {
            Kind::Zero => Ok(vec![0.0; self.dim]),
            Kind::Constant(c) => Ok(c.iter().map(|v| v * measure.rate()).collect()),
            Kind::LinearMark { map, decay } => {
                let m = measure.mean_mark();
                let scale = (-decay * s).exp();
                Ok(map.iter().map(|row| scale * row.iter().zip(&m).map(|(a, b)| a * b).sum::<f64>()).collect())
            }
            Kind::General { mark_points, .. } => {
                let q = measure.quadrature(*mark_points);
                let mut acc = vec![0.0; self.dim];
                for (u, w) in q.nodes.iter().zip(&q.weights) {
                    for (a, v) in acc.iter_mut().zip(self.eval(s, u)?) {
                        *a += w * v;
                    }
                }
                Ok(acc)
            }
        }
    }

    fn midpoints(&self, t0: f64, t1: f64) -> Vec<(f64, f64)> {
        let step = self.quadrature_step().unwrap_or(t1 - t0);
        let n = (((t1 - t0) / step).ceil() as usize).max(1);
        let h = (t1 - t0) / n as f64;
        (0..n).map(|i| (t0 + (i as f64 + 0.5) * h, h)).collect()
    }

    /// `∫_{t0}^{t1} ∫ f(s, u) β(du) ds`.
    pub fn compensator(&self, measure: &MarkMeasure, t0: f64, t1: f64) -> Result<Vec<f64>> {
        let h = t1 - t0;
        if h <= 0.0 {
            return Ok(vec![0.0; self.dim]);
        }
        match &self.kind {
            Kind::Zero | Kind::Constant(_) => Ok(self.mark_mean(measure, 0.0)?.into_iter().map(|v| v * h).collect()),
            Kind::LinearMark { decay, .. } => {
                let scale = (-decay * t0).exp() * h * phi1(-decay * h);
                Ok(self.mark_mean(measure, 0.0)?.into_iter().map(|v| v * scale).collect())
            }
            Kind::General { time_independent, .. } => {
                if *time_independent {
                    return Ok(self.mark_mean(measure, t0)?.into_iter().map(|v| v * h).collect());
                }
                let mut acc = vec![0.0; self.dim];
                for (s, w) in self.midpoints(t0, t1) {
                    for (a, v) in acc.iter_mut().zip(self.mark_mean(measure, s)?) {
                        *a += w * v;
                    }
                }
                Ok(acc)
            }
        }
    }

    /// `∫_{t0}^{t1} S_{t1-s} ∫ f(s, u) β(du) ds`.
    pub fn convolved_compensator(
        &self,
        generator: &DiagonalGenerator,
        measure: &MarkMeasure,
        t0: f64,
        t1: f64,
    ) -> Result<Vec<f64>> {
        crate::state::check_dim(generator.dim(), self.dim)?;
        let h = t1 - t0;
        if h <= 0.0 {
            return Ok(vec![0.0; self.dim]);
        }
        let eig = generator.eigenvalues();
        let time_independent = match &self.kind {
            Kind::General { time_independent, .. } => *time_independent,
            _ => true,
        };
        match &self.kind {
            Kind::LinearMark { decay, .. } => {
                let base = self.mark_mean(measure, 0.0)?;
                Ok(eig
                    .iter()
                    .zip(base)
                    .map(|(a, m)| {
                        let rate = a + decay;
                        let kernel = if rate <= 0.0 {
                            (-decay * h).exp() * h * phi1(rate * h)
                        } else {
                            (a * h).exp() * h * phi1(-rate * h)
                        };
                        m * (-decay * t0).exp() * kernel
                    })
                    .collect())
            }
            _ if time_independent => {
                let w = generator.convolution_weight(h)?;
                Ok(self.mark_mean(measure, t0)?.into_iter().zip(w).map(|(m, w)| m * w).collect())
            }
            _ => {
                let mut acc = vec![0.0; self.dim];
                for (s, w) in self.midpoints(t0, t1) {
                    let m = self.mark_mean(measure, s)?;
                    for (k, a) in eig.iter().enumerate() {
                        acc[k] += w * (a * (t1 - s)).exp() * m[k];
                    }
                }
                Ok(acc)
            }
        }
    }

    /// `∫_{t0}^{t1} ∫ ‖f(s, u)‖² β(du) ds`.
    pub fn square_norm_integral(&self, measure: &MarkMeasure, t0: f64, t1: f64) -> Result<f64> {
        let h = t1 - t0;
        if h <= 0.0 {
            return Ok(0.0);
        }
        match &self.kind {
            Kind::Zero => Ok(0.0),
            Kind::Constant(c) => Ok(c.iter().map(|v| v * v).sum::<f64>() * measure.rate() * h),
            Kind::LinearMark { map, decay } => {
                let s = measure.second_moment_matrix();
                let trace: f64 = map
                    .iter()
                    .map(|row| {
                        let mut q = 0.0;
                        for i in 0..row.len() {
                            for j in 0..row.len() {
                                q += row[i] * s[i][j] * row[j];
                            }
                        }
                        q
                    })
                    .sum();
                let time = (-2.0 * decay * t0).exp() * h * phi1(-2.0 * decay * h);
                Ok(trace * time)
            }
            Kind::General { mark_points, time_independent, .. } => {
                let q = measure.quadrature(*mark_points);
                let at = |s: f64| -> Result<f64> {
                    let mut acc = 0.0;
                    for (u, w) in q.nodes.iter().zip(&q.weights) {
                        acc += w * self.eval(s, u)?.iter().map(|v| v * v).sum::<f64>();
                    }
                    Ok(acc)
                };
                if *time_independent {
                    return Ok(at(t0)? * h);
                }
                let mut acc = 0.0;
                for (s, w) in self.midpoints(t0, t1) {
                    acc += w * at(s)?;
                }
                Ok(acc)
            }
        }
    }
}

/// `∫_0^T ∫ f(s, u) q(ds, du)` for one jump train: the jump sum minus the
/// compensator.
pub fn compensated_integral(
    f: &Integrand,
    train: &JumpTrain,
    measure: &MarkMeasure,
    horizon: f64,
) -> Result<StateVector> {
    if horizon > train.horizon() {
        return Err(Error::invalid("T", "beyond the horizon of the jump train"));
    }
    let mut acc = vec![0.0; f.dim()];
    for (s, u) in train.jumps().take_while(|(s, _)| *s <= horizon) {
        for (a, v) in acc.iter_mut().zip(f.eval(s, u)?) {
            *a += v;
        }
    }
    for (a, c) in acc.iter_mut().zip(f.compensator(measure, 0.0, horizon)?) {
        *a -= c;
    }
    Ok(acc.into())
}

/// Compensated integral evaluated at every time in the ascending list `times`.
pub fn compensated_path(
    f: &Integrand,
    train: &JumpTrain,
    measure: &MarkMeasure,
    times: &[f64],
) -> Result<Vec<StateVector>> {
    let mut acc = vec![0.0; f.dim()];
    let mut out = Vec::with_capacity(times.len());
    let mut prev = 0.0;
    let mut next_jump = 0;
    for &t in times {
        while next_jump < train.len() && train.times()[next_jump] <= t {
            let (s, u) = (train.times()[next_jump], train.mark(next_jump));
            for (a, v) in acc.iter_mut().zip(f.eval(s, u)?) {
                *a += v;
            }
            next_jump += 1;
        }
        for (a, c) in acc.iter_mut().zip(f.compensator(measure, prev, t)?) {
            *a -= c;
        }
        prev = t;
        out.push(acc.clone().into());
    }
    Ok(out)
}

/// `∫_0^t ∫ S_{t-s} f(s, u) q(ds, du)` for one jump train.
pub fn convolved_integral(
    generator: &DiagonalGenerator,
    f: &Integrand,
    train: &JumpTrain,
    measure: &MarkMeasure,
    t: f64,
) -> Result<StateVector> {
    if t > train.horizon() {
        return Err(Error::invalid("t", "beyond the horizon of the jump train"));
    }
    crate::state::check_dim(generator.dim(), f.dim())?;
    let mut acc = vec![0.0; f.dim()];
    for (s, u) in train.jumps().take_while(|(s, _)| *s <= t) {
        let v = f.eval(s, u)?;
        for (k, a) in generator.eigenvalues().iter().enumerate() {
            acc[k] += (a * (t - s)).exp() * v[k];
        }
    }
    for (a, c) in acc.iter_mut().zip(f.convolved_compensator(generator, measure, 0.0, t)?) {
        *a -= c;
    }
    Ok(acc.into())
}

/// Supremum of `‖∫_0^t ∫ S_{t-s} f q‖` over the grid `times`, augmented with
/// the left and right limits at every jump time.
pub fn convolved_supremum(
    generator: &DiagonalGenerator,
    f: &Integrand,
    train: &JumpTrain,
    measure: &MarkMeasure,
    times: &[f64],
) -> Result<f64> {
    let eig = generator.eigenvalues();
    let mut z = vec![0.0; f.dim()];
    let mut now = 0.0;
    let mut sup: f64 = 0.0;
    let advance = |z: &mut Vec<f64>, now: &mut f64, to: f64| -> Result<()> {
        if to > *now {
            let comp = f.convolved_compensator(generator, measure, *now, to)?;
            for (k, a) in eig.iter().enumerate() {
                z[k] = (a * (to - *now)).exp() * z[k] - comp[k];
            }
            *now = to;
        }
        Ok(())
    };
    let norm = |z: &[f64]| z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut j = 0;
    for &t in times {
        while j < train.len() && train.times()[j] <= t {
            let (s, u) = (train.times()[j], train.mark(j));
            advance(&mut z, &mut now, s)?;
            sup = sup.max(norm(&z));
            for (a, v) in z.iter_mut().zip(f.eval(s, u)?) {
                *a += v;
            }
            sup = sup.max(norm(&z));
            j += 1;
        }
        advance(&mut z, &mut now, t)?;
        sup = sup.max(norm(&z));
    }
    Ok(sup)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximalInequalityReport {
    pub epsilon: f64,
    /// Monte Carlo estimate of `P[sup_t ‖∫ S_{t-s} f q‖ > ε]`.
    pub probability: f64,
    /// Three binomial standard errors.
    pub band: f64,
    /// `4 e^{2 α⁺ T} / ε² · ∫_0^T ∫ ‖f‖² β du ds`.
    pub bound: f64,
    pub integrated_square: f64,
    pub growth_rate: f64,
    /// Per-path suprema, in path order.
    pub suprema: Vec<f64>,
}

impl MaximalInequalityReport {
    pub fn passed(&self) -> bool {
        self.probability <= self.bound + self.band
    }

    pub fn slack(&self) -> f64 {
        self.bound + self.band - self.probability
    }

    /// Empirical quantile of the per-path supremum.
    pub fn supremum_quantile(&self, q: f64) -> f64 {
        let mut s = self.suprema.clone();
        s.sort_by(f64::total_cmp);
        let idx = ((q * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1;
        s[idx]
    }
}

/// Monte Carlo check of the maximal inequality for the stochastic convolution
/// on `[0, T]`, sampled on a uniform grid of `grid_steps` intervals.
#[allow(clippy::too_many_arguments)]
pub fn maximal_inequality_check(
    generator: &DiagonalGenerator,
    f: &Integrand,
    measure: &MarkMeasure,
    horizon: f64,
    epsilon: f64,
    paths: usize,
    grid_steps: usize,
    seed: u64,
) -> Result<MaximalInequalityReport> {
    if paths < 1000 {
        return Err(Error::invalid("paths", "at least 1000 paths are required"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid("epsilon", "must be positive"));
    }
    let times: Vec<f64> = (1..=grid_steps.max(1)).map(|k| horizon * k as f64 / grid_steps.max(1) as f64).collect();
    let suprema = map_paths(paths, |p| {
        let train = sample_jump_train(measure, horizon, RngStream::new(seed, p as u64))?;
        convolved_supremum(generator, f, &train, measure, &times)
    })?;
    let report = maximal_report(generator, f, measure, horizon, epsilon, suprema)?;
    Ok(report)
}

/// Re-evaluates the inequality at another `ε` on the same suprema.
pub fn maximal_report(
    generator: &DiagonalGenerator,
    f: &Integrand,
    measure: &MarkMeasure,
    horizon: f64,
    epsilon: f64,
    suprema: Vec<f64>,
) -> Result<MaximalInequalityReport> {
    let n = suprema.len() as f64;
    let exceed = suprema.iter().filter(|s| **s > epsilon).count() as f64;
    let probability = exceed / n;
    let band = 3.0 * (probability * (1.0 - probability) / n).sqrt();
    let alpha_plus = generator.growth_rate().max(0.0);
    let integrated_square = f.square_norm_integral(measure, 0.0, horizon)?;
    let bound = 4.0 * (2.0 * alpha_plus * horizon).exp() / (epsilon * epsilon) * integrated_square;
    Ok(MaximalInequalityReport {
        epsilon,
        probability,
        band,
        bound,
        integrated_square,
        growth_rate: alpha_plus,
        suprema,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::MarkFamily;

    fn scalar(a: f64) -> DiagonalGenerator {
        DiagonalGenerator::new(vec![a]).unwrap()
    }

    #[test]
    fn zero_integrand_gives_zero() {
        let m = MarkMeasure::symmetric_pair(2.0, 1.0).unwrap();
        let train = sample_jump_train(&m, 1.0, RngStream::new(1, 1)).unwrap();
        let z = compensated_integral(&Integrand::zero(1), &train, &m, 1.0).unwrap();
        assert_eq!(z.as_slice(), &[0.0]);
        let z = convolved_integral(&scalar(-1.0), &Integrand::zero(1), &train, &m, 1.0).unwrap();
        assert_eq!(z.as_slice(), &[0.0]);
    }

    #[test]
    fn constant_integrand_is_count_minus_mean() {
        let m = MarkMeasure::symmetric_pair(3.0, 1.0).unwrap();
        let c = StateVector::new(vec![2.0, -1.0]).unwrap();
        let f = Integrand::constant(c);
        for s in 0..20 {
            let train = sample_jump_train(&m, 2.0, RngStream::new(5, s)).unwrap();
            let z = compensated_integral(&f, &train, &m, 2.0).unwrap();
            let k = train.len() as f64 - 3.0 * 2.0;
            assert!((z[0] - 2.0 * k).abs() < 1e-12);
            assert!((z[1] + k).abs() < 1e-12);
        }
    }

    #[test]
    fn convolved_integral_symmetric_marks_has_no_compensator() {
        let m = MarkMeasure::symmetric_pair(2.0, 1.0).unwrap();
        let f = Integrand::mark_identity(1, 0.0);
        let train = sample_jump_train(&m, 1.5, RngStream::new(8, 2)).unwrap();
        let z = convolved_integral(&scalar(-1.0), &f, &train, &m, 1.5).unwrap();
        let direct: f64 = train.jumps().map(|(s, u)| (-(1.5 - s)).exp() * u[0]).sum();
        assert!((z[0] - direct).abs() < 1e-14);
    }

    #[test]
    fn closed_form_compensators_match_general_quadrature() {
        let m = MarkMeasure::new(
            1.7,
            MarkFamily::Atoms { points: vec![vec![1.0, 0.5], vec![-2.0, 1.0]], weights: vec![1.0, 3.0] },
        )
        .unwrap();
        let map = vec![vec![1.0, -0.5], vec![0.25, 2.0]];
        let closed = Integrand::linear_mark(map.clone(), 0.8).unwrap();
        let general = Integrand::general(
            2,
            move |s, u| map.iter().map(|r| (-0.8 * s).exp() * (r[0] * u[0] + r[1] * u[1])).collect(),
            false,
            1e-4,
            1,
        );
        let a = DiagonalGenerator::new(vec![-1.0, -0.8]).unwrap();
        let c1 = closed.compensator(&m, 0.3, 1.1).unwrap();
        let c2 = general.compensator(&m, 0.3, 1.1).unwrap();
        let k1 = closed.convolved_compensator(&a, &m, 0.3, 1.1).unwrap();
        let k2 = general.convolved_compensator(&a, &m, 0.3, 1.1).unwrap();
        for i in 0..2 {
            assert!((c1[i] - c2[i]).abs() < 1e-8);
            assert!((k1[i] - k2[i]).abs() < 1e-8, "{k1:?} {k2:?}");
        }
        let s1 = closed.square_norm_integral(&m, 0.3, 1.1).unwrap();
        let s2 = general.square_norm_integral(&m, 0.3, 1.1).unwrap();
        assert!((s1 - s2).abs() < 1e-8);
    }

    #[test]
    fn nonfinite_integrand_names_site() {
        let m = MarkMeasure::symmetric_pair(5.0, 1.0).unwrap();
        let f = Integrand::general(1, |_, u| vec![1.0 / (u[0] - 1.0)], true, 0.1, 1);
        let train = JumpTrain::from_jumps(1.0, vec![(0.5, vec![1.0])]).unwrap();
        match compensated_integral(&f, &train, &m, 1.0) {
            Err(Error::NonFiniteIntegrand { time, mark }) => {
                assert_eq!(time, 0.5);
                assert_eq!(mark, vec![1.0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn supremum_matches_direct_evaluation() {
        let m = MarkMeasure::new(
            3.0,
            MarkFamily::Atoms { points: vec![vec![1.0], vec![-1.0]], weights: vec![0.25, 0.75] },
        )
        .unwrap();
        let a = scalar(-1.0);
        let f = Integrand::mark_identity(1, 0.0);
        let train = sample_jump_train(&m, 1.0, RngStream::new(4, 4)).unwrap();
        let times: Vec<f64> = (1..=50).map(|k| k as f64 / 50.0).collect();
        let sup = convolved_supremum(&a, &f, &train, &m, &times).unwrap();
        let mut direct: f64 = 0.0;
        for &t in &times {
            direct = direct.max(convolved_integral(&a, &f, &train, &m, t).unwrap().norm());
        }
        for (s, _) in train.jumps() {
            direct = direct.max(convolved_integral(&a, &f, &train, &m, s).unwrap().norm());
        }
        assert!(sup >= direct - 1e-12);
    }

    #[test]
    fn maximal_inequality_examples() {
        let m = MarkMeasure::symmetric_pair(1.0, 1.0).unwrap();
        let a = scalar(-1.0);
        let zero = maximal_inequality_check(&a, &Integrand::zero(1), &m, 1.0, 1.0, 1000, 20, 3).unwrap();
        assert_eq!(zero.probability, 0.0);
        assert!(zero.bound >= 0.0);

        let f = Integrand::mark_identity(1, 0.0);
        let rep = maximal_inequality_check(&a, &f, &m, 1.0, 10.0, 2000, 50, 3).unwrap();
        assert!((rep.bound - 0.04).abs() < 1e-15);
        assert_eq!(rep.probability, 0.0);
        assert!(rep.passed());

        let median = rep.supremum_quantile(0.5);
        let at_median = maximal_report(&a, &f, &m, 1.0, median, rep.suprema.clone()).unwrap();
        assert!(at_median.passed(), "{:?}", at_median.slack());
        assert!(at_median.probability <= 0.5);
    }
}
