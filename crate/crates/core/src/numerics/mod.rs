//! Linear algebra, distribution kernels and association scores.

mod association;
mod distributions;
mod linalg;
mod rng;

pub use association::{
    average_ranks, kruskal_wallis, kruskal_wallis_from_ranks, pearson_correlation, tie_correction,
};
pub use distributions::{
    isotropic_log_density, normal_cdf, normal_log_density, sample_mvn, sample_truncated_normal,
    standard_normal, GaussianConditional, Truncation, LN_2PI,
};
pub use linalg::{cholesky, dot, Cholesky, DenseMatrix, PIVOT_TOLERANCE};
pub use rng::SeededRng;
