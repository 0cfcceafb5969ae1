//! Probit data-augmentation model with additive/dominance SNP coding.
//!
//! The latent outcome is
//! `y*ᵢ = β₀ + Σ_{p∈G} β_p x_ip + Σ_{k∈M} α_k z_ik + Σ_{k∈M} δ_k (1 − |z_ik|) + ε`,
//! with `yᵢ = 1{y*ᵢ ≥ 0}` and independent Gaussian priors on every coefficient
//! block. Given the active sets and the latent vector every coefficient block
//! has a Gaussian full conditional, and the latent vector has a truncated
//! normal one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    isotropic_log_density, sample_truncated_normal, DenseMatrix, GaussianConditional, Truncation,
    LN_2PI,
};

/// Centering and scaling applied to one numeric column at ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub center: f64,
    pub scale: f64,
}

impl ColumnScaling {
    pub const IDENTITY: ColumnScaling = ColumnScaling {
        center: 0.0,
        scale: 1.0,
    };

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.center) / self.scale
    }
}

/// Binary outcomes with numeric (ROI) and three-level categorical (SNP) covariates.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: Vec<u8>,
    roi_names: Vec<String>,
    snp_names: Vec<String>,
    scaling: Vec<ColumnScaling>,
    ones: Vec<f64>,
    x_cols: Vec<Vec<f64>>,
    z_levels: Vec<Vec<i8>>,
    z_cols: Vec<Vec<f64>>,
    w_cols: Vec<Vec<f64>>,
}

fn check_unique(names: &[String], what: &str) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for n in names {
        if !seen.insert(n) {
            return Err(Error::InvalidInput(format!("duplicate {what} label {n:?}")));
        }
    }
    Ok(())
}

impl Dataset {
    /// Builds a dataset from column-major covariates, unscaled.
    pub fn from_columns(
        y: Vec<u8>,
        roi_columns: Vec<Vec<f64>>,
        snp_columns: Vec<Vec<i8>>,
        roi_names: Vec<String>,
        snp_names: Vec<String>,
    ) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 observations, got {n}")));
        }
        if let Some(bad) = y.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidInput(format!("outcome {bad} is not 0/1")));
        }
        if roi_names.len() != roi_columns.len() || snp_names.len() != snp_columns.len() {
            return Err(Error::DimensionMismatch("label count differs from column count".into()));
        }
        check_unique(&roi_names, "ROI")?;
        check_unique(&snp_names, "SNP")?;
        for (j, c) in roi_columns.iter().enumerate() {
            if c.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "ROI column {} has {} rows, expected {n}",
                    roi_names[j],
                    c.len()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("ROI column {} has non-finite values", roi_names[j])));
            }
        }
        for (k, c) in snp_columns.iter().enumerate() {
            if c.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "SNP column {} has {} rows, expected {n}",
                    snp_names[k],
                    c.len()
                )));
            }
            if let Some(bad) = c.iter().find(|v| !(-1..=1).contains(*v)) {
                return Err(Error::InvalidInput(format!(
                    "SNP column {} has level {bad} outside {{-1, 0, 1}}",
                    snp_names[k]
                )));
            }
        }
        let z_cols = snp_columns
            .iter()
            .map(|c| c.iter().map(|&v| f64::from(v)).collect())
            .collect();
        let w_cols = snp_columns
            .iter()
            .map(|c| c.iter().map(|&v| 1.0 - f64::from(v.abs())).collect())
            .collect();
        Ok(Self {
            y,
            scaling: vec![ColumnScaling::IDENTITY; roi_columns.len()],
            roi_names,
            snp_names,
            ones: vec![1.0; n],
            x_cols: roi_columns,
            z_levels: snp_columns,
            z_cols,
            w_cols,
        })
    }

    /// Builds a dataset from row-major matrices; `z` entries must be −1, 0 or 1.
    pub fn new(
        y: Vec<u8>,
        x: &DenseMatrix,
        z: &DenseMatrix,
        roi_names: Vec<String>,
        snp_names: Vec<String>,
    ) -> Result<Self> {
        if x.rows() != y.len() || z.rows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "y has {} rows, x has {}, z has {}",
                y.len(),
                x.rows(),
                z.rows()
            )));
        }
        let roi_columns = (0..x.cols()).map(|j| x.column(j)).collect();
        let mut snp_columns = Vec::with_capacity(z.cols());
        for k in 0..z.cols() {
            let col = z
                .column(k)
                .into_iter()
                .map(|v| match v {
                    v if v == -1.0 => Ok(-1),
                    v if v == 0.0 => Ok(0),
                    v if v == 1.0 => Ok(1),
                    other => Err(Error::InvalidInput(format!("SNP value {other} outside {{-1, 0, 1}}"))),
                })
                .collect::<Result<Vec<i8>>>()?;
            snp_columns.push(col);
        }
        Self::from_columns(y, roi_columns, snp_columns, roi_names, snp_names)
    }

    /// Returns a copy with every ROI column centered and scaled to unit sample
    /// variance. Scalings compose with any already applied, so `scaling()`
    /// always maps raw values to the stored ones.
    pub fn standardized(&self) -> Self {
        let mut out = self.clone();
        let n = self.n() as f64;
        for (j, col) in out.x_cols.iter_mut().enumerate() {
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
            let prev = out.scaling[j];
            out.scaling[j] = ColumnScaling {
                center: prev.center + prev.scale * mean,
                scale: prev.scale * sd,
            };
        }
        out
    }

    /// Applies explicit scalings (e.g. fitted on a training split).
    pub fn with_scaling(&self, scaling: &[ColumnScaling]) -> Result<Self> {
        if scaling.len() != self.g() {
            return Err(Error::DimensionMismatch(format!(
                "{} scalings for {} ROI columns",
                scaling.len(),
                self.g()
            )));
        }
        let mut out = self.clone();
        for (j, col) in out.x_cols.iter_mut().enumerate() {
            let (prev, next) = (self.scaling[j], scaling[j]);
            // undo the current transform, then apply the requested one
            col.iter_mut()
                .for_each(|v| *v = next.apply(*v * prev.scale + prev.center));
        }
        out.scaling = scaling.to_vec();
        Ok(out)
    }

    pub fn subset_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut out = Self::from_columns(
            rows.iter().map(|&i| self.y[i]).collect(),
            self.x_cols
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            self.z_levels
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            self.roi_names.clone(),
            self.snp_names.clone(),
        )?;
        out.scaling = self.scaling.clone();
        Ok(out)
    }

    pub fn subset_columns(&self, rois: &[usize], snps: &[usize]) -> Result<Self> {
        let mut out = Self::from_columns(
            self.y.clone(),
            rois.iter().map(|&j| self.x_cols[j].clone()).collect(),
            snps.iter().map(|&k| self.z_levels[k].clone()).collect(),
            rois.iter().map(|&j| self.roi_names[j].clone()).collect(),
            snps.iter().map(|&k| self.snp_names[k].clone()).collect(),
        )?;
        out.scaling = rois.iter().map(|&j| self.scaling[j]).collect();
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn g(&self) -> usize {
        self.x_cols.len()
    }

    pub fn m(&self) -> usize {
        self.z_levels.len()
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn roi_names(&self) -> &[String] {
        &self.roi_names
    }

    pub fn snp_names(&self) -> &[String] {
        &self.snp_names
    }

    pub fn scaling(&self) -> &[ColumnScaling] {
        &self.scaling
    }

    pub fn ones(&self) -> &[f64] {
        &self.ones
    }

    pub fn roi_column(&self, j: usize) -> &[f64] {
        &self.x_cols[j]
    }

    pub fn snp_levels(&self, k: usize) -> &[i8] {
        &self.z_levels[k]
    }

    /// SNP code column `z_k` as reals.
    pub fn snp_column(&self, k: usize) -> &[f64] {
        &self.z_cols[k]
    }

    /// Dominance column `1 − |z_k|`.
    pub fn dominance_column(&self, k: usize) -> &[f64] {
        &self.w_cols[k]
    }

    /// ROI matrix as stored (standardized if [`Dataset::standardized`] was applied).
    pub fn x(&self) -> DenseMatrix {
        DenseMatrix::from_columns(self.n(), &self.x_cols).expect("columns share length")
    }

    pub fn z(&self) -> DenseMatrix {
        DenseMatrix::from_columns(self.n(), &self.z_cols).expect("columns share length")
    }

    pub fn roi_index(&self, name: &str) -> Option<usize> {
        self.roi_names.iter().position(|n| n == name)
    }

    pub fn snp_index(&self, name: &str) -> Option<usize> {
        self.snp_names.iter().position(|n| n == name)
    }
}

/// Prior over the active sets.
///
/// `UniformSize` gives the counts `P` and `K` discrete-uniform marginals;
/// `UniformSubset` weights every subset equally, which makes the counts
/// binomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelPrior {
    /// `P ~ U{0..g}`, `K ~ U{0..m}`, subsets uniform given their size.
    #[default]
    UniformSize,
    /// Every subset of ROIs and of SNPs equally likely.
    UniformSubset,
}

impl std::str::FromStr for ModelPrior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-size" => Ok(Self::UniformSize),
            "uniform-subset" => Ok(Self::UniformSubset),
            other => Err(Error::Config(format!(
                "model_prior must be uniform-size or uniform-subset, got {other:?}"
            ))),
        }
    }
}

/// Prior variances of the three coefficient blocks and the model-space prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub var_beta: f64,
    pub var_alpha: f64,
    pub var_delta: f64,
    #[serde(default)]
    pub model_prior: ModelPrior,
}

impl Hyperparams {
    pub fn new(var_beta: f64, var_alpha: f64, var_delta: f64) -> Result<Self> {
        let h = Self {
            var_beta,
            var_alpha,
            var_delta,
            model_prior: ModelPrior::default(),
        };
        h.validate()?;
        Ok(h)
    }

    pub fn uniform(var: f64) -> Result<Self> {
        Self::new(var, var, var)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("var_beta", self.var_beta),
            ("var_alpha", self.var_alpha),
            ("var_delta", self.var_delta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            var_beta: 25.0,
            var_alpha: 25.0,
            var_delta: 25.0,
            model_prior: ModelPrior::default(),
        }
    }
}

/// Current model: active covariate sets, their coefficients and the latent outcomes.
///
/// `beta[0]` is the intercept and `beta[p + 1]` belongs to `active_rois[p]`;
/// `alpha[k]`/`delta[k]` belong to `active_snps[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub active_rois: Vec<usize>,
    pub active_snps: Vec<usize>,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub delta: Vec<f64>,
    pub latent: Vec<f64>,
}

impl ModelState {
    /// Intercept-only model with zero coefficients and latent values at ±0.5.
    pub fn initial(data: &Dataset) -> Self {
        Self {
            active_rois: Vec::new(),
            active_snps: Vec::new(),
            beta: vec![0.0],
            alpha: Vec::new(),
            delta: Vec::new(),
            latent: data.y().iter().map(|&v| if v == 1 { 0.5 } else { -0.5 }).collect(),
        }
    }

    /// Like [`ModelState::initial`] but with latent magnitudes drawn from U(0, 1)
    /// and a U(−1, 1) intercept, for dispersed multi-chain starts.
    pub fn jittered<R: Rng + ?Sized>(data: &Dataset, rng: &mut R) -> Self {
        let mut s = Self::initial(data);
        s.beta[0] = rng.random_range(-1.0..1.0);
        for (l, &y) in s.latent.iter_mut().zip(data.y()) {
            let u: f64 = rng.random();
            *l = if y == 1 { u } else { -u };
        }
        s
    }

    pub fn num_rois(&self) -> usize {
        self.active_rois.len()
    }

    pub fn num_snps(&self) -> usize {
        self.active_snps.len()
    }

    pub fn validate(&self, data: &Dataset) -> Result<()> {
        let (p, k) = (self.active_rois.len(), self.active_snps.len());
        if self.beta.len() != p + 1 || self.alpha.len() != k || self.delta.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "state has P={p}, K={k} but |β|={}, |α|={}, |δ|={}",
                self.beta.len(),
                self.alpha.len(),
                self.delta.len()
            )));
        }
        if self.latent.len() != data.n() {
            return Err(Error::DimensionMismatch(format!(
                "latent has {} entries, data has {} rows",
                self.latent.len(),
                data.n()
            )));
        }
        if self.active_rois.iter().any(|&j| j >= data.g()) || self.active_snps.iter().any(|&k| k >= data.m()) {
            return Err(Error::DimensionMismatch("active index out of range".into()));
        }
        Ok(())
    }

    /// Sorted ROI and SNP indices, the order-independent model identity.
    pub fn signature(&self) -> ModelSignature {
        ModelSignature::new(self.active_rois.clone(), self.active_snps.clone())
    }
}

/// Order-independent identity of a model: sorted active ROI and SNP indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelSignature {
    pub rois: Vec<usize>,
    pub snps: Vec<usize>,
}

impl ModelSignature {
    pub fn new(mut rois: Vec<usize>, mut snps: Vec<usize>) -> Self {
        rois.sort_unstable();
        snps.sort_unstable();
        Self { rois, snps }
    }

    pub fn size(&self) -> usize {
        self.rois.len() + self.snps.len()
    }
}

impl std::fmt::Display for ModelSignature {
    /// `rois=1;3;115|snps=2` using 1-based column positions.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let join = |v: &[usize]| v.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(";");
        write!(f, "rois={}|snps={}", join(&self.rois), join(&self.snps))
    }
}

fn axpy(acc: &mut [f64], a: f64, col: &[f64]) {
    if a == 0.0 {
        return;
    }
    for (o, v) in acc.iter_mut().zip(col) {
        *o += a * v;
    }
}

/// `[1|X_G] β`.
fn roi_part(data: &Dataset, rois: &[usize], beta: &[f64]) -> Vec<f64> {
    let mut out = vec![beta[0]; data.n()];
    for (b, &j) in beta[1..].iter().zip(rois) {
        axpy(&mut out, *b, data.roi_column(j));
    }
    out
}

/// `Z_M α`.
fn additive_part(data: &Dataset, snps: &[usize], alpha: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; data.n()];
    for (a, &k) in alpha.iter().zip(snps) {
        axpy(&mut out, *a, data.snp_column(k));
    }
    out
}

/// `[1 − |Z_M|] δ`.
fn dominance_part(data: &Dataset, snps: &[usize], delta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; data.n()];
    for (d, &k) in delta.iter().zip(snps) {
        axpy(&mut out, *d, data.dominance_column(k));
    }
    out
}

fn predictor_for(data: &Dataset, rois: &[usize], snps: &[usize], beta: &[f64], alpha: &[f64], delta: &[f64]) -> Vec<f64> {
    let mut out = roi_part(data, rois, beta);
    for (i, (a, d)) in additive_part(data, snps, alpha)
        .into_iter()
        .zip(dominance_part(data, snps, delta))
        .enumerate()
    {
        out[i] += a + d;
    }
    out
}

/// Linear predictor `ỹ*` for every observation.
pub fn linear_predictor(state: &ModelState, data: &Dataset) -> Result<Vec<f64>> {
    state.validate(data)?;
    Ok(predictor_for(
        data,
        &state.active_rois,
        &state.active_snps,
        &state.beta,
        &state.alpha,
        &state.delta,
    ))
}

/// `ξ = y* − ỹ*`.
pub fn residuals(state: &ModelState, data: &Dataset) -> Result<Vec<f64>> {
    let pred = linear_predictor(state, data)?;
    Ok(state.latent.iter().zip(pred).map(|(l, p)| l - p).collect())
}

pub fn latent_signs_consistent(latent: &[f64], y: &[u8]) -> bool {
    latent
        .iter()
        .zip(y)
        .all(|(&l, &y)| if y == 1 { l >= 0.0 } else { l <= 0.0 })
}

/// Augmented log-likelihood `−(n/2) log 2π − ½ Σ ξᵢ²`, or −∞ when a latent
/// value sits on the wrong side of zero for its outcome.
pub fn log_likelihood(state: &ModelState, data: &Dataset) -> Result<f64> {
    if !latent_signs_consistent(&state.latent, data.y()) {
        return Ok(f64::NEG_INFINITY);
    }
    let xi = residuals(state, data)?;
    Ok(-0.5 * data.n() as f64 * LN_2PI - 0.5 * xi.iter().map(|v| v * v).sum::<f64>())
}

/// `log π(P) + log π(K)` for the discrete-uniform size priors over
/// `{0, …, g}` and `{0, …, m}`.
pub fn log_size_prior(g: usize, m: usize) -> f64 {
    -((g + 1) as f64).ln() - ((m + 1) as f64).ln()
}

pub fn ln_choose(n: usize, k: usize) -> f64 {
    let f = |x: usize| libm::lgamma(x as f64 + 1.0);
    f(n) - f(k) - f(n - k)
}

/// Log prior probability of one specific pair of active sets with `p` of `g`
/// ROIs and `k` of `m` SNPs.
pub fn log_model_prior(prior: ModelPrior, g: usize, m: usize, p: usize, k: usize) -> f64 {
    match prior {
        ModelPrior::UniformSize => log_size_prior(g, m) - ln_choose(g, p) - ln_choose(m, k),
        // the size terms alone, constant across models
        ModelPrior::UniformSubset => log_size_prior(g, m),
    }
}

/// Gaussian coefficient priors plus the model-space prior.
pub fn log_prior(state: &ModelState, hyper: &Hyperparams, g: usize, m: usize) -> f64 {
    isotropic_log_density(&state.beta, hyper.var_beta)
        + isotropic_log_density(&state.alpha, hyper.var_alpha)
        + isotropic_log_density(&state.delta, hyper.var_delta)
        + log_model_prior(hyper.model_prior, g, m, state.num_rois(), state.num_snps())
}

pub fn log_posterior(state: &ModelState, data: &Dataset, hyper: &Hyperparams) -> Result<f64> {
    Ok(log_likelihood(state, data)? + log_prior(state, hyper, data.g(), data.m()))
}

/// `N((I/σ² + DᵀD)⁻¹ Dᵀ r, (I/σ² + DᵀD)⁻¹)` for design columns `D`.
pub(crate) fn block_conditional(columns: &[&[f64]], target: &[f64], prior_var: f64) -> Result<GaussianConditional> {
    let d = columns.len();
    if d == 0 {
        return Ok(GaussianConditional::empty());
    }
    let mut precision = DenseMatrix::zeros(d, d);
    let mut linear = vec![0.0; d];
    for a in 0..d {
        linear[a] = columns[a].iter().zip(target).map(|(x, r)| x * r).sum();
        for b in 0..=a {
            let v: f64 = columns[a].iter().zip(columns[b]).map(|(x, y)| x * y).sum();
            precision[(a, b)] = v;
            precision[(b, a)] = v;
        }
        precision[(a, a)] += 1.0 / prior_var;
    }
    GaussianConditional::from_precision(&precision, &linear)
}

fn subtract(latent: &[f64], parts: [&[f64]; 2]) -> Vec<f64> {
    latent
        .iter()
        .enumerate()
        .map(|(i, l)| l - parts[0][i] - parts[1][i])
        .collect()
}

fn beta_columns<'a>(data: &'a Dataset, rois: &[usize]) -> Vec<&'a [f64]> {
    std::iter::once(data.ones())
        .chain(rois.iter().map(|&j| data.roi_column(j)))
        .collect()
}

/// Full conditional of `β` (intercept first) given `α`, `δ` and the latent vector.
pub fn full_conditional_beta(state: &ModelState, data: &Dataset, hyper: &Hyperparams) -> Result<GaussianConditional> {
    state.validate(data)?;
    conditional_beta(data, hyper, &state.active_rois, &state.active_snps, &state.alpha, &state.delta, &state.latent)
}

/// Full conditional of the additive SNP effects `α`.
pub fn full_conditional_alpha(state: &ModelState, data: &Dataset, hyper: &Hyperparams) -> Result<GaussianConditional> {
    state.validate(data)?;
    conditional_alpha(data, hyper, &state.active_rois, &state.active_snps, &state.beta, &state.delta, &state.latent)
}

/// Full conditional of the dominance SNP effects `δ`.
pub fn full_conditional_delta(state: &ModelState, data: &Dataset, hyper: &Hyperparams) -> Result<GaussianConditional> {
    state.validate(data)?;
    conditional_delta(data, hyper, &state.active_rois, &state.active_snps, &state.beta, &state.alpha, &state.latent)
}

pub(crate) fn conditional_beta(
    data: &Dataset,
    hyper: &Hyperparams,
    rois: &[usize],
    snps: &[usize],
    alpha: &[f64],
    delta: &[f64],
    latent: &[f64],
) -> Result<GaussianConditional> {
    let target = subtract(
        latent,
        [&additive_part(data, snps, alpha), &dominance_part(data, snps, delta)],
    );
    block_conditional(&beta_columns(data, rois), &target, hyper.var_beta)
}

pub(crate) fn conditional_alpha(
    data: &Dataset,
    hyper: &Hyperparams,
    rois: &[usize],
    snps: &[usize],
    beta: &[f64],
    delta: &[f64],
    latent: &[f64],
) -> Result<GaussianConditional> {
    let target = subtract(latent, [&roi_part(data, rois, beta), &dominance_part(data, snps, delta)]);
    let cols: Vec<&[f64]> = snps.iter().map(|&k| data.snp_column(k)).collect();
    block_conditional(&cols, &target, hyper.var_alpha)
}

pub(crate) fn conditional_delta(
    data: &Dataset,
    hyper: &Hyperparams,
    rois: &[usize],
    snps: &[usize],
    beta: &[f64],
    alpha: &[f64],
    latent: &[f64],
) -> Result<GaussianConditional> {
    let target = subtract(latent, [&roi_part(data, rois, beta), &additive_part(data, snps, alpha)]);
    let cols: Vec<&[f64]> = snps.iter().map(|&k| data.dominance_column(k)).collect();
    block_conditional(&cols, &target, hyper.var_delta)
}

/// Coefficient values drawn (or evaluated) by one pass of the block conditionals.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientDraw {
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub delta: Vec<f64>,
    /// Sum of the three block log densities at the drawn values.
    pub log_density: f64,
}

/// Values of `source`'s SNP coefficients aligned to `snps`; SNPs the source
/// does not contain contribute zero.
fn align_snp_coefficients(source_snps: &[usize], source_vals: &[f64], snps: &[usize]) -> Vec<f64> {
    snps.iter()
        .map(|k| {
            source_snps
                .iter()
                .position(|s| s == k)
                .map_or(0.0, |pos| source_vals[pos])
        })
        .collect()
}

enum Pass<'a, R: ?Sized> {
    Draw(&'a mut R),
    Evaluate { beta: &'a [f64], alpha: &'a [f64], delta: &'a [f64] },
}

fn block_pass<R: Rng + ?Sized>(
    data: &Dataset,
    hyper: &Hyperparams,
    rois: &[usize],
    snps: &[usize],
    source: &ModelState,
    mut pass: Pass<'_, R>,
) -> Result<CoefficientDraw> {
    let latent = &source.latent;
    let src_alpha = align_snp_coefficients(&source.active_snps, &source.alpha, snps);
    let src_delta = align_snp_coefficients(&source.active_snps, &source.delta, snps);

    let mut pick = |cond: &GaussianConditional, which: usize| -> Vec<f64> {
        match &mut pass {
            Pass::Draw(rng) => cond.sample(*rng),
            Pass::Evaluate { beta, alpha, delta } => [*beta, *alpha, *delta][which].to_vec(),
        }
    };

    let cb = conditional_beta(data, hyper, rois, snps, &src_alpha, &src_delta, latent)?;
    let beta = pick(&cb, 0);
    let ca = conditional_alpha(data, hyper, rois, snps, &beta, &src_delta, latent)?;
    let alpha = pick(&ca, 1);
    let cd = conditional_delta(data, hyper, rois, snps, &beta, &alpha, latent)?;
    let delta = pick(&cd, 2);

    let log_density = cb.log_density(&beta) + ca.log_density(&alpha) + cd.log_density(&delta);
    Ok(CoefficientDraw {
        beta,
        alpha,
        delta,
        log_density,
    })
}

/// Draws `β`, then `α`, then `δ` for the model `(rois, snps)`, each block from
/// its full conditional given the latent vector of `source`, the blocks already
/// drawn, and `source`'s values for blocks not yet drawn.
pub fn draw_coefficients<R: Rng + ?Sized>(
    data: &Dataset,
    hyper: &Hyperparams,
    rois: &[usize],
    snps: &[usize],
    source: &ModelState,
    rng: &mut R,
) -> Result<CoefficientDraw> {
    block_pass(data, hyper, rois, snps, source, Pass::Draw(rng))
}

/// Log density with which [`draw_coefficients`] would produce the given values.
pub fn coefficient_log_density(
    data: &Dataset,
    hyper: &Hyperparams,
    rois: &[usize],
    snps: &[usize],
    source: &ModelState,
    beta: &[f64],
    alpha: &[f64],
    delta: &[f64],
) -> Result<f64> {
    if beta.len() != rois.len() + 1 || alpha.len() != snps.len() || delta.len() != snps.len() {
        return Err(Error::DimensionMismatch("coefficients do not match the model".into()));
    }
    block_pass::<crate::numerics::SeededRng>(
        data,
        hyper,
        rois,
        snps,
        source,
        Pass::Evaluate { beta, alpha, delta },
    )
    .map(|d| d.log_density)
}

/// Redraws every latent value from its truncated normal full conditional.
pub fn gibbs_update_latent<R: Rng + ?Sized>(state: &mut ModelState, data: &Dataset, rng: &mut R) -> Result<()> {
    let pred = linear_predictor(state, data)?;
    for ((l, &mu), &y) in state.latent.iter_mut().zip(&pred).zip(data.y()) {
        let side = if y == 1 { Truncation::Left0 } else { Truncation::Right0 };
        *l = sample_truncated_normal(mu, 1.0, side, rng);
    }
    Ok(())
}

/// One within-model sweep: `β`, `α`, `δ` from their full conditionals, then the latent vector.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &Dataset,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<()> {
    state.validate(data)?;
    let rois = state.active_rois.clone();
    let snps = state.active_snps.clone();
    let draw = draw_coefficients(data, hyper, &rois, &snps, state, rng)?;
    state.beta = draw.beta;
    state.alpha = draw.alpha;
    state.delta = draw.delta;
    gibbs_update_latent(state, data, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{normal_log_density, SeededRng};

    fn toy(n: usize, seed: u64) -> Dataset {
        let mut rng = SeededRng::new(seed);
        let x: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let z: Vec<Vec<i8>> = (0..3)
            .map(|_| (0..n).map(|_| rng.random_range(-1..=1)).collect())
            .collect();
        let y = (0..n).map(|i| u8::from(x[0][i] + rng.random_range(-1.0..1.0) > 0.0)).collect();
        Dataset::from_columns(
            y,
            x,
            z,
            (1..=3).map(|i| format!("roi_{i}")).collect(),
            (1..=3).map(|i| format!("snp_{i}")).collect(),
        )
        .unwrap()
    }

    fn state_with(data: &Dataset, rois: Vec<usize>, snps: Vec<usize>, seed: u64) -> ModelState {
        let mut rng = SeededRng::new(seed);
        let p = rois.len();
        let k = snps.len();
        let mut s = ModelState::initial(data);
        s.active_rois = rois;
        s.active_snps = snps;
        s.beta = (0..=p).map(|_| rng.random_range(-1.0..1.0)).collect();
        s.alpha = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        s.delta = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        gibbs_update_latent(&mut s, data, &mut rng).unwrap();
        s
    }

    #[test]
    fn dataset_rejects_bad_input() {
        let err = Dataset::from_columns(vec![0, 2], vec![], vec![], vec![], vec![]);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
        let err = Dataset::from_columns(vec![0, 1], vec![], vec![vec![0, 2]], vec![], vec!["s".into()]);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
        let err = Dataset::from_columns(
            vec![0, 1],
            vec![vec![0.0, 1.0], vec![1.0, 2.0]],
            vec![],
            vec!["a".into(), "a".into()],
            vec![],
        );
        assert!(matches!(err, Err(Error::InvalidInput(_))));
        let err = Dataset::from_columns(vec![1], vec![], vec![], vec![], vec![]);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn standardization_round_trip() {
        let d = toy(30, 1);
        let s = d.standardized();
        for j in 0..3 {
            let c = s.roi_column(j);
            let mean = c.iter().sum::<f64>() / 30.0;
            let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 29.0;
            assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
            let sc = s.scaling()[j];
            for (raw, st) in d.roi_column(j).iter().zip(c) {
                assert!((sc.apply(*raw) - st).abs() < 1e-12);
            }
        }
        // re-standardizing a standardized set keeps the raw mapping
        let again = s.standardized();
        for j in 0..3 {
            assert!((again.scaling()[j].center - s.scaling()[j].center).abs() < 1e-12);
            assert!((again.scaling()[j].scale - s.scaling()[j].scale).abs() < 1e-12);
        }
        let back = s.with_scaling(&[ColumnScaling::IDENTITY; 3]).unwrap();
        for j in 0..3 {
            for (a, b) in back.roi_column(j).iter().zip(d.roi_column(j)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_predictor_examples() {
        let d = Dataset::from_columns(
            vec![1, 0],
            vec![vec![0.5, 0.5]],
            vec![vec![-1, 0]],
            vec!["roi_1".into()],
            vec!["snp_1".into()],
        )
        .unwrap();
        let mut s = ModelState::initial(&d);
        s.beta = vec![2.5];
        assert_eq!(linear_predictor(&s, &d).unwrap(), vec![2.5, 2.5]);

        s.active_rois = vec![0];
        s.active_snps = vec![0];
        s.beta = vec![1.0, 2.0];
        s.alpha = vec![1.0];
        s.delta = vec![3.0];
        let lp = linear_predictor(&s, &d).unwrap();
        // row 0: 1 + 2·0.5 + 1·(−1) + 3·0 = 1; row 1 (heterozygote): 1 + 1 + 0 + 3 = 5
        assert_eq!(lp, vec![1.0, 5.0]);

        s.alpha = vec![];
        assert!(matches!(linear_predictor(&s, &d), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn residual_identities() {
        let d = Dataset::from_columns(vec![1, 1], vec![], vec![], vec![], vec![]).unwrap();
        let mut s = ModelState::initial(&d);
        s.beta = vec![1.0];
        s.latent = vec![1.0, 2.0];
        assert_eq!(residuals(&s, &d).unwrap(), vec![0.0, 1.0]);

        let d = toy(12, 3);
        let s = state_with(&d, vec![0, 2], vec![1], 4);
        let r = residuals(&s, &d).unwrap();
        let lp = linear_predictor(&s, &d).unwrap();
        for i in 0..d.n() {
            assert_eq!(r[i] + lp[i], s.latent[i]);
        }
    }

    #[test]
    fn log_likelihood_examples() {
        let d = Dataset::from_columns(vec![1, 0], vec![], vec![], vec![], vec![]).unwrap();
        let mut s = ModelState::initial(&d);
        s.latent = vec![0.0, 0.0];
        assert!((log_likelihood(&s, &d).unwrap() + LN_2PI).abs() < 1e-15);
        s.latent = vec![-0.3, -1.0];
        assert_eq!(log_likelihood(&s, &d).unwrap(), f64::NEG_INFINITY);

        // n = 2 with ξ = (2, 0): −log 2π − 2
        s.latent = vec![2.0, 0.0];
        assert!((log_likelihood(&s, &d).unwrap() - (-LN_2PI - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn log_likelihood_single_observation() {
        let d = Dataset::from_columns(vec![1, 1], vec![], vec![], vec![], vec![]).unwrap();
        let one = d.subset_rows(&[0]);
        // n ≥ 2 is a dataset invariant; evaluate the n = 1 case through the formula directly
        assert!(one.is_err());
        let xi: f64 = 2.0;
        let want = -0.5 * LN_2PI - 2.0;
        assert!((-0.5 * LN_2PI - 0.5 * xi * xi - want).abs() < 1e-15);
    }

    #[test]
    fn log_prior_examples() {
        let d = Dataset::from_columns(vec![1, 0], vec![], vec![], vec![], vec![]).unwrap();
        let s = ModelState::initial(&d);
        let h = Hyperparams::new(25.0, 1.0, 1.0).unwrap();
        let lp = log_prior(&s, &h, 0, 0);
        assert!((lp + 0.5 * (2.0 * std::f64::consts::PI * 25.0).ln()).abs() < 1e-14);

        let mut s = ModelState::initial(&d);
        s.beta = vec![3.0];
        let h2 = Hyperparams::new(50.0, 1.0, 1.0).unwrap();
        let diff = log_prior(&s, &h2, 0, 0) - log_prior(&s, &h, 0, 0);
        let want = normal_log_density(3.0, 0.0, 50.0) - normal_log_density(3.0, 0.0, 25.0);
        assert!((diff - want).abs() < 1e-14);

        // the size-prior factor is the same for K = 2 and K = 3
        assert_eq!(log_size_prior(4, 4), -2.0 * 5f64.ln());
        let mut a = ModelState::initial(&d);
        a.active_snps = vec![0, 1];
        a.alpha = vec![0.0; 2];
        a.delta = vec![0.0; 2];
        let mut b = a.clone();
        b.active_snps = vec![0, 1, 2];
        b.alpha = vec![0.0; 3];
        b.delta = vec![0.0; 3];
        let model_part = |s: &ModelState, h: &Hyperparams| {
            log_prior(s, h, 4, 4)
                - isotropic_log_density(&s.beta, h.var_beta)
                - isotropic_log_density(&s.alpha, h.var_alpha)
                - isotropic_log_density(&s.delta, h.var_delta)
        };
        let flat = Hyperparams {
            model_prior: ModelPrior::UniformSubset,
            ..h
        };
        assert!((model_part(&a, &flat) - model_part(&b, &flat)).abs() < 1e-14);
        // C(4, 2) = 6 subsets of size 2 share what 4 subsets of size 3 share
        assert!((model_part(&a, &h) - model_part(&b, &h) - (4.0f64 / 6.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn uniform_size_prior_normalizes() {
        let (g, m) = (5, 3);
        let mut total = 0.0;
        let mut by_p = vec![0.0; g + 1];
        for p in 0..=g {
            for k in 0..=m {
                let mass = (ln_choose(g, p) + ln_choose(m, k) + log_model_prior(ModelPrior::UniformSize, g, m, p, k)).exp();
                total += mass;
                by_p[p] += mass;
            }
        }
        assert!((total - 1.0).abs() < 1e-12);
        assert!(by_p.iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-12));
        assert!((ln_choose(10, 3) - 120f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn beta_conditional_scalar_case() {
        let d = Dataset::from_columns(vec![1, 1, 0, 1], vec![], vec![], vec![], vec![]).unwrap();
        let mut s = ModelState::initial(&d);
        s.latent = vec![1.0, 1.5, -0.5, 0.0];
        let h = Hyperparams::new(100.0, 1.0, 1.0).unwrap();
        let c = full_conditional_beta(&s, &d, &h).unwrap();
        let gamma = 1.0 / (0.01 + 4.0);
        assert!((c.cov()[(0, 0)] - gamma).abs() < 1e-14);
        assert!((c.mean[0] - 2.0 * gamma).abs() < 1e-14);
        assert!((c.cov()[(0, 0)] - 0.24938).abs() < 1e-5);
        assert!((c.mean[0] - 0.49875).abs() < 1e-5);
    }

    #[test]
    fn beta_conditional_two_by_two() {
        // standardized column x = (−1.5, −0.5, 0.5, 1.5)/sd
        let raw = vec![-1.5, -0.5, 0.5, 1.5];
        let sd = (raw.iter().map(|v: &f64| v * v).sum::<f64>() / 3.0).sqrt();
        let x: Vec<f64> = raw.iter().map(|v| v / sd).collect();
        let d = Dataset::from_columns(vec![1, 0, 1, 1], vec![x.clone()], vec![], vec!["r".into()], vec![]).unwrap();
        let mut s = ModelState::initial(&d);
        s.active_rois = vec![0];
        s.beta = vec![0.0, 0.0];
        s.latent = vec![0.3, -0.7, 1.1, 0.4];
        let h = Hyperparams::new(25.0, 1.0, 1.0).unwrap();
        let c = full_conditional_beta(&s, &d, &h).unwrap();
        // precision = [[4 + 0.04, Σx], [Σx, Σx² + 0.04]] with Σx = 0, Σx² = 3
        let (a, dd) = (4.04, 3.04);
        let cov = c.cov();
        assert!((cov[(0, 0)] - 1.0 / a).abs() < 1e-12);
        assert!((cov[(1, 1)] - 1.0 / dd).abs() < 1e-12);
        assert!(cov[(0, 1)].abs() < 1e-12);
        let b0: f64 = s.latent.iter().sum();
        let b1: f64 = s.latent.iter().zip(&x).map(|(l, x)| l * x).sum();
        assert!((c.mean[0] - b0 / a).abs() < 1e-12);
        assert!((c.mean[1] - b1 / dd).abs() < 1e-12);
    }

    #[test]
    fn beta_conditional_vague_prior_limit() {
        let d = toy(10, 9);
        let mut s = state_with(&d, vec![0, 1], vec![], 2);
        s.latent = (0..10).map(|i| i as f64 - 4.5).collect();
        let h = Hyperparams::new(1e12, 1.0, 1.0).unwrap();
        let c = full_conditional_beta(&s, &d, &h).unwrap();
        let l = c.precision_factor().lower();
        let prec = l.matmul(&l.transpose()).unwrap();
        let cols = beta_columns(&d, &[0, 1]);
        for a in 0..3 {
            for b in 0..3 {
                let xtx: f64 = cols[a].iter().zip(cols[b]).map(|(u, v)| u * v).sum();
                assert!((prec[(a, b)] - xtx).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn alpha_conditional_cases() {
        let h = Hyperparams::new(25.0, 25.0, 25.0).unwrap();
        let d = toy(8, 5);
        let s = state_with(&d, vec![0], vec![], 6);
        assert_eq!(full_conditional_alpha(&s, &d, &h).unwrap().dim(), 0);

        // all heterozygous: Z column is zero
        let d = Dataset::from_columns(vec![1, 0, 1], vec![], vec![vec![0, 0, 0]], vec![], vec!["s".into()]).unwrap();
        let mut s = ModelState::initial(&d);
        s.active_snps = vec![0];
        s.alpha = vec![0.0];
        s.delta = vec![0.0];
        let c = full_conditional_alpha(&s, &d, &h).unwrap();
        assert!((c.cov()[(0, 0)] - 25.0).abs() < 1e-12);
        assert_eq!(c.mean[0], 0.0);

        let d = Dataset::from_columns(vec![1, 0, 1, 0], vec![], vec![vec![1, -1, 1, -1]], vec![], vec!["s".into()])
            .unwrap();
        let mut s = ModelState::initial(&d);
        s.active_snps = vec![0];
        s.alpha = vec![0.0];
        s.delta = vec![0.7];
        s.beta = vec![0.2];
        s.latent = vec![1.0, -0.5, 0.3, -2.0];
        let c = full_conditional_alpha(&s, &d, &h).unwrap();
        // δ column is zero for homozygotes, so r = y* − β₀
        let r: Vec<f64> = s.latent.iter().map(|l| l - 0.2).collect();
        let z = [1.0, -1.0, 1.0, -1.0];
        let want = z.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / (0.04 + 4.0);
        assert!((c.mean[0] - want).abs() < 1e-12);
    }

    #[test]
    fn delta_conditional_cases() {
        let h = Hyperparams::new(25.0, 25.0, 25.0).unwrap();
        let d = toy(8, 5);
        let s = state_with(&d, vec![], vec![], 6);
        assert_eq!(full_conditional_delta(&s, &d, &h).unwrap().dim(), 0);

        let d = Dataset::from_columns(vec![1, 0, 1], vec![], vec![vec![1, -1, 1]], vec![], vec!["s".into()]).unwrap();
        let mut s = ModelState::initial(&d);
        s.active_snps = vec![0];
        s.alpha = vec![0.4];
        s.delta = vec![0.0];
        let c = full_conditional_delta(&s, &d, &h).unwrap();
        assert_eq!(c.mean[0], 0.0);
        assert!((c.cov()[(0, 0)] - 25.0).abs() < 1e-12);

        let d = Dataset::from_columns(vec![1, 0, 1, 0], vec![], vec![vec![0, -1, 0, 0]], vec![], vec!["s".into()])
            .unwrap();
        let mut s = ModelState::initial(&d);
        s.active_snps = vec![0];
        s.alpha = vec![0.5];
        s.delta = vec![0.0];
        s.beta = vec![-0.1];
        s.latent = vec![1.0, -0.5, 0.3, -2.0];
        let c = full_conditional_delta(&s, &d, &h).unwrap();
        let w = [1.0, 0.0, 1.0, 1.0];
        let r: Vec<f64> = (0..4).map(|i| s.latent[i] + 0.1 - 0.5 * [0.0, -1.0, 0.0, 0.0][i]).collect();
        let want = w.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / (0.04 + 3.0);
        assert!((c.mean[0] - want).abs() < 1e-12);
    }

    #[test]
    fn latent_update_signs_and_determinism() {
        let d = toy(40, 7);
        let mut s1 = state_with(&d, vec![0], vec![1], 8);
        let mut s2 = s1.clone();
        gibbs_update_latent(&mut s1, &d, &mut SeededRng::new(1)).unwrap();
        gibbs_update_latent(&mut s2, &d, &mut SeededRng::new(1)).unwrap();
        assert_eq!(s1.latent, s2.latent);
        assert!(latent_signs_consistent(&s1.latent, d.y()));
    }

    #[test]
    fn latent_update_half_normal_for_failures() {
        let y = vec![0u8; 1000];
        let d = Dataset::from_columns(y, vec![], vec![], vec![], vec![]).unwrap();
        let mut s = ModelState::initial(&d);
        let mut rng = SeededRng::new(17);
        let mut total = 0.0;
        let reps = 100;
        for _ in 0..reps {
            gibbs_update_latent(&mut s, &d, &mut rng).unwrap();
            total += s.latent.iter().sum::<f64>();
        }
        let mean = total / (reps * 1000) as f64;
        assert!((mean + (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.01, "{mean}");
    }

    #[test]
    fn sweep_preserves_active_sets() {
        let d = toy(25, 11);
        let h = Hyperparams::default();
        let mut s = state_with(&d, vec![2, 0], vec![1], 12);
        let mut rng = SeededRng::new(13);
        for _ in 0..20 {
            gibbs_sweep(&mut s, &d, &h, &mut rng).unwrap();
            assert_eq!(s.active_rois, vec![2, 0]);
            assert_eq!(s.active_snps, vec![1]);
            assert!(latent_signs_consistent(&s.latent, d.y()));
        }
        let mut e = ModelState::initial(&d);
        gibbs_sweep(&mut e, &d, &h, &mut rng).unwrap();
        assert_eq!(e.beta.len(), 1);
        assert!(e.alpha.is_empty() && e.delta.is_empty());
    }

    #[test]
    fn intercept_chain_targets_probit_mle() {
        // 140 successes out of 200: the probit MLE of the intercept is Φ⁻¹(0.7)
        let y: Vec<u8> = (0..200).map(|i| u8::from(i < 140)).collect();
        let d = Dataset::from_columns(y, vec![], vec![], vec![], vec![]).unwrap();
        let h = Hyperparams::new(100.0, 1.0, 1.0).unwrap();
        let mut s = ModelState::initial(&d);
        let mut rng = SeededRng::new(21);
        let mut acc = 0.0;
        let (burn, keep) = (500, 5000);
        for it in 0..burn + keep {
            gibbs_sweep(&mut s, &d, &h, &mut rng).unwrap();
            if it >= burn {
                acc += s.beta[0];
            }
        }
        let mean = acc / keep as f64;
        let mle = 0.524_400_512_708_041_2; // Φ⁻¹(0.7)
        assert!((mean - mle).abs() < 0.05, "{mean}");
    }

    #[test]
    fn draw_density_matches_evaluation() {
        let d = toy(15, 31);
        let h = Hyperparams::default();
        let s = state_with(&d, vec![1], vec![0, 2], 32);
        let mut rng = SeededRng::new(33);
        let draw = draw_coefficients(&d, &h, &[1, 2], &[0, 2], &s, &mut rng).unwrap();
        let eval =
            coefficient_log_density(&d, &h, &[1, 2], &[0, 2], &s, &draw.beta, &draw.alpha, &draw.delta).unwrap();
        assert_eq!(draw.log_density, eval);
        assert!(eval.is_finite());
    }

    #[test]
    fn snp_recoding_identity() {
        // z ∈ {0, 1}: swapping (α, δ) with columns (z, 1 − |z|) recoded as (1 − |z|, z)
        let z: Vec<i8> = vec![0, 1, 1, 0, 1];
        let swapped: Vec<i8> = z.iter().map(|v| 1 - v.abs()).collect();
        let d1 = Dataset::from_columns(vec![1, 0, 1, 0, 1], vec![], vec![z], vec![], vec!["s".into()]).unwrap();
        let d2 = Dataset::from_columns(vec![1, 0, 1, 0, 1], vec![], vec![swapped], vec![], vec!["s".into()]).unwrap();
        let mut s = ModelState::initial(&d1);
        s.active_snps = vec![0];
        s.alpha = vec![0.8];
        s.delta = vec![-1.3];
        let mut t = s.clone();
        t.alpha = vec![-1.3];
        t.delta = vec![0.8];
        assert_eq!(linear_predictor(&s, &d1).unwrap(), linear_predictor(&t, &d2).unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn normal_equation_identity(seed in any::<u64>(), n in 4usize..=20, p in 0usize..=3, k in 0usize..=3) {
                let d = toy(n, seed);
                let s = state_with(&d, (0..p).collect(), (0..k).collect(), seed ^ 1);
                let h = Hyperparams::new(4.0, 9.0, 2.0).unwrap();
                for (cond, cols, target) in [
                    (
                        full_conditional_beta(&s, &d, &h).unwrap(),
                        beta_columns(&d, &s.active_rois),
                        subtract(&s.latent, [&additive_part(&d, &s.active_snps, &s.alpha), &dominance_part(&d, &s.active_snps, &s.delta)]),
                    ),
                    (
                        full_conditional_alpha(&s, &d, &h).unwrap(),
                        s.active_snps.iter().map(|&k| d.snp_column(k)).collect(),
                        subtract(&s.latent, [&roi_part(&d, &s.active_rois, &s.beta), &dominance_part(&d, &s.active_snps, &s.delta)]),
                    ),
                    (
                        full_conditional_delta(&s, &d, &h).unwrap(),
                        s.active_snps.iter().map(|&k| d.dominance_column(k)).collect(),
                        subtract(&s.latent, [&roi_part(&d, &s.active_rois, &s.beta), &additive_part(&d, &s.active_snps, &s.alpha)]),
                    ),
                ] {
                    let b: Vec<f64> = cols.iter().map(|c| c.iter().zip(&target).map(|(u, v)| u * v).sum()).collect();
                    prop_assert!(cond.quadratic_check(&b) < 1e-10);
                }
            }

            #[test]
            fn log_likelihood_monotone_in_residual(seed in any::<u64>(), i in 0usize..10, bump in 0.01..3.0f64) {
                let d = toy(10, seed);
                let mut s = state_with(&d, vec![0], vec![], seed);
                let xi = residuals(&s, &d).unwrap();
                let before = log_likelihood(&s, &d).unwrap();
                // push |ξᵢ| outward while keeping the latent sign
                let dir = if xi[i] >= 0.0 { 1.0 } else { -1.0 };
                let moved = s.latent[i] + dir * bump;
                prop_assume!(latent_signs_consistent(&[moved], &[d.y()[i]]));
                s.latent[i] = moved;
                prop_assert!(log_likelihood(&s, &d).unwrap() < before);
            }
        }
    }
}
