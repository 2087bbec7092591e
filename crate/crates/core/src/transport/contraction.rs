//! Contraction of transition laws in `W₂` and sampling of the invariant law.

use super::{wasserstein2, EmpiricalMeasure};
use crate::error::{Error, Result};
use crate::integrator::{integrate_path, Model, Scheme, SimulationGrid};
use crate::noise::{sample_jump_train, RngStream};
use crate::stability::InitialLaw;
use crate::state::{distance_sq, StateVector};
use crate::stats::{linear_fit, map_paths};

const TAG_INITIAL: u64 = 0xa1;
const TAG_NOISE: u64 = 0xb1;
const TAG_NOISE_TILDE: u64 = 0xb2;
const TAG_REPLICA: u64 = 0xc1;
const TAG_REPLICA_TILDE: u64 = 0xc2;
const TAG_PUSH: u64 = 0xd1;

/// Grid indices of `t_list` on a grid of step `dt`, which must contain them.
fn grid_for(t_list: &[f64], dt: f64) -> Result<(SimulationGrid, Vec<usize>)> {
    if t_list.is_empty() || t_list.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::invalid("t_list", "need nonnegative times"));
    }
    let horizon = t_list.iter().copied().fold(0.0, f64::max);
    let steps = ((horizon / dt).round() as usize).max(1);
    if horizon > 0.0 && ((horizon / dt) - steps as f64).abs() > 1e-9 * steps as f64 {
        return Err(Error::invalid("t_list", format!("largest time {horizon} is not a multiple of {dt}")));
    }
    let grid = SimulationGrid::new(horizon.max(dt), steps)?;
    let idx = t_list
        .iter()
        .map(|t| {
            let k = (t / grid.dt()).round() as usize;
            if (grid.time(k) - t).abs() > 1e-9 * horizon.max(1.0) {
                Err(Error::invalid("t_list", format!("time {t} is not on the grid of step {dt}")))
            } else {
                Ok(k)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((grid, idx))
}

/// States of the solutions started at `starts[i]` with noise streams
/// `noise.with_stream(i)`, at each grid index in `idx`.
fn forward(
    model: Model<'_>,
    grid: &SimulationGrid,
    idx: &[usize],
    starts: &[StateVector],
    noise: RngStream,
) -> Result<Vec<Vec<StateVector>>> {
    let per_point = map_paths(starts.len(), |i| {
        let train = sample_jump_train(model.measure, grid.horizon, noise.with_stream(i as u64))?;
        let mut out = vec![StateVector::zeros(0); idx.len()];
        integrate_path(model, grid, &starts[i], &train, Scheme::Mild, i, |k, x| {
            for (slot, &want) in idx.iter().enumerate() {
                if want == k {
                    out[slot] = x.to_vec().into();
                }
            }
        })?;
        Ok(out)
    })?;
    Ok((0..idx.len()).map(|s| per_point.iter().map(|p| p[s].clone()).collect()).collect())
}

fn draw(law: &InitialLaw, n: usize, stream: RngStream) -> Vec<StateVector> {
    (0..n).map(|i| law.sample(&mut stream.with_stream(i as u64).generator())).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionRow {
    pub time: f64,
    /// `Ŵ₂(p_t*ρ, p_t*ρ̃)` with independent noise for every point.
    pub independent: f64,
    /// Root mean squared distance of synchronously coupled pairs.
    pub coupled: f64,
    /// `Ŵ₂(ρ, ρ̃) e^{-ε t / 2}`.
    pub bound: f64,
    /// Sum of the self-distances of `p_t*ρ` and `p_t*ρ̃` to independent replicas.
    pub band: f64,
}

impl ContractionRow {
    pub fn passed(&self) -> bool {
        self.independent <= self.bound + self.band
    }

    pub fn slack(&self) -> f64 {
        self.bound + self.band - self.independent
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub epsilon: f64,
    pub initial_distance: f64,
    pub rows: Vec<ContractionRow>,
}

impl ContractionReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(ContractionRow::passed)
    }

    /// Least-squares slope of `log coupled(t)` over rows with positive distance.
    pub fn coupled_log_slope(&self) -> f64 {
        let (t, y): (Vec<f64>, Vec<f64>) =
            self.rows.iter().filter(|r| r.coupled > 0.0).map(|r| (r.time, r.coupled.ln())).unzip();
        if t.len() < 2 {
            return f64::NAN;
        }
        linear_fit(&t, &y).0
    }
}

/// Forwards `n` samples of `ρ` and of `ρ̃` to each time in `t_list` and
/// compares `Ŵ₂` with `Ŵ₂(ρ, ρ̃) e^{-ε t / 2}`.
#[allow(clippy::too_many_arguments)]
pub fn contraction_estimate(
    model: Model<'_>,
    rho: &InitialLaw,
    rho_tilde: &InitialLaw,
    t_list: &[f64],
    n: usize,
    dt: f64,
    epsilon: f64,
    seed: u64,
) -> Result<ContractionReport> {
    if !(epsilon > 0.0) {
        return Err(Error::Precondition(format!("contraction needs a certified ε > 0, got {epsilon}")));
    }
    if n == 0 {
        return Err(Error::invalid("n", "need at least one point per measure"));
    }
    let (grid, idx) = grid_for(t_list, dt)?;
    let base = RngStream::new(seed, 0);
    // Both initial clouds use the same draws, so equal laws give equal clouds.
    let x0 = draw(rho, n, base.derive(TAG_INITIAL));
    let y0 = draw(rho_tilde, n, base.derive(TAG_INITIAL));
    let initial_distance = wasserstein2(&EmpiricalMeasure::new(x0.clone())?, &EmpiricalMeasure::new(y0.clone())?)?;

    let xs = forward(model, &grid, &idx, &x0, base.derive(TAG_NOISE))?;
    let ys = forward(model, &grid, &idx, &y0, base.derive(TAG_NOISE_TILDE))?;
    let ys_coupled = forward(model, &grid, &idx, &y0, base.derive(TAG_NOISE))?;
    let x_rep = forward(model, &grid, &idx, &draw(rho, n, base.derive(TAG_REPLICA)), base.derive(TAG_REPLICA ^ TAG_NOISE))?;
    let y_rep = forward(
        model,
        &grid,
        &idx,
        &draw(rho_tilde, n, base.derive(TAG_REPLICA_TILDE)),
        base.derive(TAG_REPLICA_TILDE ^ TAG_NOISE),
    )?;

    let mut rows = Vec::with_capacity(t_list.len());
    for (s, &time) in t_list.iter().enumerate() {
        let mu = EmpiricalMeasure::new(xs[s].clone())?;
        let nu = EmpiricalMeasure::new(ys[s].clone())?;
        let independent = wasserstein2(&mu, &nu)?;
        let coupled =
            (xs[s].iter().zip(&ys_coupled[s]).map(|(a, b)| distance_sq(a, b)).sum::<f64>() / n as f64).sqrt();
        let band = wasserstein2(&mu, &EmpiricalMeasure::new(x_rep[s].clone())?)?
            + wasserstein2(&nu, &EmpiricalMeasure::new(y_rep[s].clone())?)?;
        rows.push(ContractionRow {
            time,
            independent,
            coupled,
            bound: initial_distance * (-epsilon * time / 2.0).exp(),
            band,
        });
    }
    Ok(ContractionReport { epsilon, initial_distance, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarityWitness {
    /// `Ŵ₂` between a thinned half of the sample and its push-forward by one step.
    pub shift_distance: f64,
    /// `Ŵ₂` between the two disjoint thinned halves.
    pub self_distance: f64,
}

impl StationarityWitness {
    pub fn passed(&self) -> bool {
        self.shift_distance <= self.self_distance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSample {
    pub measure: EmpiricalMeasure,
    pub burn_in: f64,
    pub gap: f64,
    pub witness: StationarityWitness,
}

/// Samples one long trajectory from `ξ` after `burn_in`, every `gap` time
/// units, integrated with step `dt`.
#[allow(clippy::too_many_arguments)]
pub fn invariant_measure_sampler(
    model: Model<'_>,
    xi: &StateVector,
    burn_in: f64,
    gap: f64,
    samples: usize,
    dt: f64,
    seed: u64,
) -> Result<InvariantSample> {
    if samples < 2 {
        return Err(Error::invalid("samples", "need at least two samples"));
    }
    if !(burn_in >= 0.0 && gap > 0.0 && dt > 0.0) {
        return Err(Error::invalid("gap", "burn-in, gap and step must be positive"));
    }
    let per_gap = ((gap / dt).round() as usize).max(1);
    let burn_steps = (burn_in / dt).round() as usize;
    let steps = burn_steps + per_gap * (samples - 1);
    let grid = SimulationGrid::new(steps as f64 * dt, steps)?;
    let base = RngStream::new(seed, 0);
    let train = sample_jump_train(model.measure, grid.horizon, base)?;
    let mut points = Vec::with_capacity(samples);
    integrate_path(model, &grid, xi, &train, Scheme::Mild, 0, |k, x| {
        if k >= burn_steps && (k - burn_steps).is_multiple_of(per_gap) {
            points.push(StateVector::from(x.to_vec()));
        }
    })?;
    let measure = EmpiricalMeasure::new(points)?;

    let half = samples / 2;
    let limit = if measure.dim() == 1 { half } else { half.min(super::EXACT_LIMIT) };
    let stride = half.div_ceil(limit).max(1);
    let a = measure.thin(0, 2 * stride)?;
    let b = measure.thin(1, 2 * stride)?;
    let m = a.len().min(b.len());
    let a = EmpiricalMeasure::new(a.points()[..m].to_vec())?;
    let b = EmpiricalMeasure::new(b.points()[..m].to_vec())?;
    let step = SimulationGrid::new(dt, 1)?;
    let pushed = forward(model, &step, &[1], a.points(), base.derive(TAG_PUSH))?.remove(0);
    let witness = StationarityWitness {
        shift_distance: wasserstein2(&a, &EmpiricalMeasure::new(pushed)?)?,
        self_distance: wasserstein2(&a, &b)?,
    };
    Ok(InvariantSample { measure, burn_in, gap, witness })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceCurve {
    pub times: Vec<f64>,
    /// `Ŵ₂(p_t*δ_x, π̂)`.
    pub distance: Vec<f64>,
    pub log_slope: f64,
}

/// Distance from `n` independent copies of the solution started at `x` to a
/// random `n`-subsample of the invariant sample.
pub fn convergence_to_invariant(
    model: Model<'_>,
    x: &StateVector,
    invariant: &EmpiricalMeasure,
    t_list: &[f64],
    dt: f64,
    seed: u64,
) -> Result<ConvergenceCurve> {
    let n = if invariant.dim() == 1 { invariant.len() } else { invariant.len().min(super::EXACT_LIMIT) };
    let target = EmpiricalMeasure::new(invariant.points()[..n].to_vec())?;
    let (grid, idx) = grid_for(t_list, dt)?;
    let starts = vec![x.clone(); n];
    let clouds = forward(model, &grid, &idx, &starts, RngStream::new(seed, 0).derive(TAG_NOISE))?;
    let distance = clouds
        .into_iter()
        .map(|c| wasserstein2(&EmpiricalMeasure::new(c)?, &target))
        .collect::<Result<Vec<_>>>()?;
    let logs: Vec<f64> = distance.iter().map(|d| d.ln()).collect();
    let log_slope = linear_fit(t_list, &logs).0;
    Ok(ConvergenceCurve { times: t_list.to_vec(), distance, log_slope })
}
