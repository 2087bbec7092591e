//! Finite-activity Poisson random measures and compensated integrals.

mod checks;
mod integral;
mod measure;
pub mod quadrature;
mod rng;
mod train;

pub use checks::{
    count_correlation_check, ito_isometry_check, martingale_check, poisson_count_check, CountCorrelationReport,
    IsometryReport, MartingaleReport, MartingaleRow, PoissonCountReport,
};
pub use integral::{
    compensated_integral, compensated_path, convolved_integral, convolved_supremum, maximal_inequality_check,
    maximal_report, Integrand, MaximalInequalityReport,
};
pub use measure::{MarkFamily, MarkMeasure, MarkQuadrature};
pub use rng::RngStream;
pub use train::{sample_jump_train, JumpTrain};
