//! Empirical Wasserstein-2 distances and contraction of transition laws.

pub mod assignment;
mod contraction;
mod wasserstein;

pub use contraction::{
    contraction_estimate, convergence_to_invariant, invariant_measure_sampler, ContractionReport, ContractionRow,
    ConvergenceCurve, InvariantSample, StationarityWitness,
};
pub use wasserstein::{
    sliced_w2, wasserstein2, wasserstein2_1d, wasserstein2_exact, CouplingResult, EmpiricalMeasure, SlicedEstimate,
    EXACT_LIMIT,
};
