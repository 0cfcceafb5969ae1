use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::linalg::{dot, Cholesky, DenseMatrix};
use crate::error::{Error, Result};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Which half-line a truncated normal draw is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// Support `[0, ∞)`.
    Left0,
    /// Support `(-∞, 0]`.
    Right0,
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_log_density(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws from `N(mean, cov)` through the Cholesky factor of `cov`.
pub fn sample_mvn<R: Rng + ?Sized>(mean: &[f64], cov: &DenseMatrix, rng: &mut R) -> Result<Vec<f64>> {
    if cov.rows() != mean.len() || !cov.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "mean has length {}, covariance is {}x{}",
            mean.len(),
            cov.rows(),
            cov.cols()
        )));
    }
    let chol = Cholesky::factor(cov)?;
    let l = chol.lower();
    let u: Vec<f64> = (0..mean.len()).map(|_| standard_normal(rng)).collect();
    Ok((0..mean.len())
        .map(|i| mean[i] + (0..=i).map(|k| l[(i, k)] * u[k]).sum::<f64>())
        .collect())
}

/// Truncation point (in standard units) past which the exponential proposal is used.
const TAIL_SWITCH: f64 = 0.5;

/// Standard normal conditioned on `>= a`.
fn standard_normal_above<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if a <= TAIL_SWITCH {
        loop {
            let z = standard_normal(rng);
            if z >= a {
                return z;
            }
        }
    }
    // Robert (1995) translated-exponential proposal with the optimal rate.
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    let exp = Exp::new(rate).expect("rate is positive");
    loop {
        let z = a + exp.sample(rng);
        let u: f64 = rng.random();
        if u <= (-0.5 * (z - rate).powi(2)).exp() {
            return z;
        }
    }
}

/// Draws from `N(mean, sd²)` restricted to one side of zero.
pub fn sample_truncated_normal<R: Rng + ?Sized>(mean: f64, sd: f64, side: Truncation, rng: &mut R) -> f64 {
    assert!(sd > 0.0, "truncated normal needs a positive sd, got {sd}");
    match side {
        Truncation::Left0 => (mean + sd * standard_normal_above(-mean / sd, rng)).max(0.0),
        Truncation::Right0 => (mean - sd * standard_normal_above(mean / sd, rng)).min(0.0),
    }
}

/// Gaussian stored through the Cholesky factor of its precision matrix.
///
/// This is the form every full conditional arrives in: the precision
/// `I/σ² + DᵀD` is cheap to build and factor, while the covariance is only
/// materialized on request.
#[derive(Debug, Clone)]
pub struct GaussianConditional {
    pub mean: Vec<f64>,
    precision: Cholesky,
}

impl GaussianConditional {
    /// Builds `N(A⁻¹ b, A⁻¹)` from precision `A` and linear term `b`.
    pub fn from_precision(precision: &DenseMatrix, linear: &[f64]) -> Result<Self> {
        let chol = Cholesky::factor(precision)?;
        let mean = chol.solve(linear);
        Ok(Self {
            mean,
            precision: chol,
        })
    }

    pub fn empty() -> Self {
        Self {
            mean: Vec::new(),
            precision: Cholesky::factor(&DenseMatrix::zeros(0, 0)).expect("empty factor"),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cov(&self) -> DenseMatrix {
        self.precision.inverse()
    }

    pub fn precision_factor(&self) -> &Cholesky {
        &self.precision
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: Vec<f64> = (0..self.dim()).map(|_| standard_normal(rng)).collect();
        // x = mean + L⁻ᵀ u has covariance (L Lᵀ)⁻¹
        let offset = self.precision.solve_upper(&u);
        self.mean.iter().zip(offset).map(|(m, o)| m + o).collect()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "density evaluated at wrong dimension");
        let l = self.precision.lower();
        let k = self.dim();
        let diff: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        // ‖Lᵀ (x − μ)‖²
        let quad: f64 = (0..k)
            .map(|j| {
                let v: f64 = (j..k).map(|i| l[(i, j)] * diff[i]).sum();
                v * v
            })
            .sum();
        -0.5 * (k as f64) * LN_2PI + 0.5 * self.precision.log_det() - 0.5 * quad
    }

    pub fn quadratic_check(&self, linear: &[f64]) -> f64 {
        // max |A·mean − b|, used by tests
        let l = self.precision.lower();
        let a = l.matmul(&l.transpose()).expect("square");
        let am = a.matvec(&self.mean).expect("dims");
        am.iter().zip(linear).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

/// Log density of an isotropic Gaussian `N(0, var·I)` at `x`.
pub fn isotropic_log_density(x: &[f64], var: f64) -> f64 {
    -0.5 * (x.len() as f64) * (LN_2PI + var.ln()) - 0.5 * dot(x, x) / var
}
