//! Posterior summaries, model-averaged prediction and predictive metrics.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Hyperparams, ModelSignature};
use crate::numerics::{average_ranks, normal_cdf, SeededRng};
use crate::sampler::{fit, ChainTrace, RunConfig};

/// Stream reserved for fold assignment.
const FOLD_STREAM: u64 = u64::MAX - 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Term {
    Intercept,
    Beta,
    Alpha,
    Delta,
}

impl Term {
    pub fn class(self) -> &'static str {
        match self {
            Term::Intercept => "intercept",
            Term::Beta => "roi",
            Term::Alpha | Term::Delta => "snp",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Term::Intercept => "intercept",
            Term::Beta => "beta",
            Term::Alpha => "alpha",
            Term::Delta => "delta",
        }
    }
}

/// Posterior summary of one coefficient, in raw covariate units.
#[derive(Debug, Clone, PartialEq)]
pub struct TermSummary {
    pub label: String,
    pub term: Term,
    pub mppi: f64,
    /// NaN when the covariate is never visited under conditional summaries.
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelProbability {
    pub signature: ModelSignature,
    pub count: usize,
    pub probability: f64,
}

#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub samples: usize,
    pub roi_labels: Vec<String>,
    pub snp_labels: Vec<String>,
    pub mppi_roi: Vec<f64>,
    pub mppi_snp: Vec<f64>,
    /// Visited models by decreasing probability.
    pub models: Vec<ModelProbability>,
    pub terms: Vec<TermSummary>,
    pub conditional: bool,
}

impl PosteriorSummary {
    pub fn modal(&self) -> &ModelProbability {
        &self.models[0]
    }

    pub fn probability_of(&self, signature: &ModelSignature) -> f64 {
        self.models
            .iter()
            .find(|m| &m.signature == signature)
            .map_or(0.0, |m| m.probability)
    }

    pub fn term(&self, label: &str, term: Term) -> Option<&TermSummary> {
        self.terms.iter().find(|t| t.label == label && t.term == term)
    }
}

#[derive(Default, Clone, Copy)]
struct Moments {
    count: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn mean_sd(&self, total: usize, conditional: bool) -> (f64, f64) {
        // unconditional summaries count absent draws as zeros
        let n = if conditional { self.count } else { total };
        if n == 0 {
            return (f64::NAN, f64::NAN);
        }
        let mean = self.sum / n as f64;
        if n < 2 {
            return (mean, 0.0);
        }
        let var = ((self.sum_sq - n as f64 * mean * mean) / (n as f64 - 1.0)).max(0.0);
        (mean, var.sqrt())
    }
}

fn check_traces(traces: &[ChainTrace], data: &Dataset) -> Result<usize> {
    let total: usize = traces.iter().map(|t| t.samples.len()).sum();
    if total == 0 {
        return Err(Error::EmptyTrace);
    }
    for t in traces {
        if t.g != data.g() || t.m != data.m() {
            return Err(Error::DimensionMismatch(format!(
                "trace over {} ROIs and {} SNPs, dataset has {} and {}",
                t.g,
                t.m,
                data.g(),
                data.m()
            )));
        }
    }
    Ok(total)
}

/// Pools the retained samples of `traces`; coefficient moments are
/// conditional on inclusion.
pub fn summarize(traces: &[ChainTrace], data: &Dataset) -> Result<PosteriorSummary> {
    summarize_with(traces, data, true)
}

pub fn summarize_with(traces: &[ChainTrace], data: &Dataset, conditional: bool) -> Result<PosteriorSummary> {
    let total = check_traces(traces, data)?;
    let (g, m) = (data.g(), data.m());
    let mut intercept = Moments::default();
    let mut beta = vec![Moments::default(); g];
    let mut alpha = vec![Moments::default(); m];
    let mut delta = vec![Moments::default(); m];
    let mut counts: HashMap<ModelSignature, usize> = HashMap::new();

    for trace in traces {
        for s in &trace.samples {
            let raw = s.raw_beta(&trace.scaling);
            intercept.push(raw[0]);
            for (p, &j) in s.active_rois.iter().enumerate() {
                beta[j].push(raw[p + 1]);
            }
            for (q, &k) in s.active_snps.iter().enumerate() {
                alpha[k].push(s.alpha[q]);
                delta[k].push(s.delta[q]);
            }
            *counts.entry(s.signature()).or_default() += 1;
        }
    }

    let mut models: Vec<ModelProbability> = counts
        .into_iter()
        .map(|(signature, count)| ModelProbability {
            signature,
            count,
            probability: count as f64 / total as f64,
        })
        .collect();
    models.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.signature.cmp(&b.signature)));

    let frac = |mo: &Moments| mo.count as f64 / total as f64;
    let mut terms = Vec::with_capacity(1 + g + 2 * m);
    let (mean, sd) = intercept.mean_sd(total, true);
    terms.push(TermSummary {
        label: "intercept".into(),
        term: Term::Intercept,
        mppi: 1.0,
        mean,
        sd,
    });
    for (j, mo) in beta.iter().enumerate() {
        let (mean, sd) = mo.mean_sd(total, conditional);
        terms.push(TermSummary {
            label: data.roi_names()[j].clone(),
            term: Term::Beta,
            mppi: frac(mo),
            mean,
            sd,
        });
    }
    for k in 0..m {
        for (term, mo) in [(Term::Alpha, &alpha[k]), (Term::Delta, &delta[k])] {
            let (mean, sd) = mo.mean_sd(total, conditional);
            terms.push(TermSummary {
                label: data.snp_names()[k].clone(),
                term,
                mppi: frac(mo),
                mean,
                sd,
            });
        }
    }

    Ok(PosteriorSummary {
        samples: total,
        roi_labels: data.roi_names().to_vec(),
        snp_labels: data.snp_names().to_vec(),
        mppi_roi: beta.iter().map(frac).collect(),
        mppi_snp: alpha.iter().map(frac).collect(),
        models,
        terms,
        conditional,
    })
}

/// Labels (ROIs, then SNPs) whose inclusion probability exceeds `threshold`.
pub fn select(summary: &PosteriorSummary, threshold: f64) -> Result<Vec<String>> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::InvalidInput(format!("threshold {threshold} outside [0, 1)")));
    }
    let rois = summary.roi_labels.iter().zip(&summary.mppi_roi);
    let snps = summary.snp_labels.iter().zip(&summary.mppi_snp);
    Ok(rois
        .chain(snps)
        .filter(|(_, &p)| p > threshold)
        .map(|(l, _)| l.clone())
        .collect())
}

/// One visited model with its posterior weight and raw-scale mean coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedModel {
    pub weight: f64,
    pub intercept: f64,
    /// `(label, β)` pairs.
    pub beta: Vec<(String, f64)>,
    /// `(label, α, δ)` triples.
    pub snp: Vec<(String, f64, f64)>,
}

impl AveragedModel {
    fn linear_predictor(&self, data: &Dataset) -> Result<Vec<f64>> {
        let mut eta = vec![self.intercept; data.n()];
        for (label, b) in &self.beta {
            let j = data
                .roi_index(label)
                .ok_or_else(|| Error::UnknownColumn(label.clone()))?;
            let sc = data.scaling()[j];
            for (e, v) in eta.iter_mut().zip(data.roi_column(j)) {
                *e += b * (v * sc.scale + sc.center);
            }
        }
        for (label, a, d) in &self.snp {
            let k = data
                .snp_index(label)
                .ok_or_else(|| Error::UnknownColumn(label.clone()))?;
            for (e, &z) in eta.iter_mut().zip(data.snp_levels(k)) {
                let z = f64::from(z);
                *e += a * z + d * (1.0 - z.abs());
            }
        }
        Ok(eta)
    }
}

/// Model-averaged point predictor over the visited models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAverage {
    pub models: Vec<AveragedModel>,
}

impl ModelAverage {
    /// Normalizes the weights to sum to one.
    pub fn new(mut models: Vec<AveragedModel>) -> Result<Self> {
        let total: f64 = models.iter().map(|m| m.weight).sum();
        if models.is_empty() || !(total > 0.0) || models.iter().any(|m| !(m.weight >= 0.0)) {
            return Err(Error::InvalidInput("model weights must be nonnegative with a positive sum".into()));
        }
        models.iter_mut().for_each(|m| m.weight /= total);
        Ok(Self { models })
    }

    /// Visit-frequency weights and per-model posterior mean coefficients,
    /// mapped to raw covariate units.
    pub fn from_traces(traces: &[ChainTrace], data: &Dataset) -> Result<Self> {
        let total = check_traces(traces, data)?;
        struct Acc {
            count: usize,
            intercept: f64,
            beta: HashMap<usize, f64>,
            snp: HashMap<usize, (f64, f64)>,
        }
        let mut by_model: HashMap<ModelSignature, Acc> = HashMap::new();
        for trace in traces {
            for s in &trace.samples {
                let raw = s.raw_beta(&trace.scaling);
                let acc = by_model.entry(s.signature()).or_insert_with(|| Acc {
                    count: 0,
                    intercept: 0.0,
                    beta: HashMap::new(),
                    snp: HashMap::new(),
                });
                acc.count += 1;
                acc.intercept += raw[0];
                for (p, &j) in s.active_rois.iter().enumerate() {
                    *acc.beta.entry(j).or_default() += raw[p + 1];
                }
                for (q, &k) in s.active_snps.iter().enumerate() {
                    let e = acc.snp.entry(k).or_default();
                    e.0 += s.alpha[q];
                    e.1 += s.delta[q];
                }
            }
        }
        let mut keyed: Vec<(ModelSignature, Acc)> = by_model.into_iter().collect();
        keyed.sort_by(|a, b| b.1.count.cmp(&a.1.count).then_with(|| a.0.cmp(&b.0)));
        let models = keyed
            .into_iter()
            .map(|(sig, acc)| {
                let c = acc.count as f64;
                AveragedModel {
                    weight: c / total as f64,
                    intercept: acc.intercept / c,
                    beta: sig
                        .rois
                        .iter()
                        .map(|j| (data.roi_names()[*j].clone(), acc.beta[j] / c))
                        .collect(),
                    snp: sig
                        .snps
                        .iter()
                        .map(|k| {
                            let (a, d) = acc.snp[k];
                            (data.snp_names()[*k].clone(), a / c, d / c)
                        })
                        .collect(),
                }
            })
            .collect();
        Self::new(models)
    }

    /// Labels any model uses.
    pub fn required_labels(&self) -> (Vec<String>, Vec<String>) {
        let mut rois: Vec<String> = self.models.iter().flat_map(|m| m.beta.iter().map(|b| b.0.clone())).collect();
        let mut snps: Vec<String> = self.models.iter().flat_map(|m| m.snp.iter().map(|s| s.0.clone())).collect();
        rois.sort();
        rois.dedup();
        snps.sort();
        snps.dedup();
        (rois, snps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub latent: f64,
    pub probability: f64,
    pub class: u8,
}

/// Weighted sum of per-model linear predictors, matched to `data` by label.
pub fn bma_predict(average: &ModelAverage, data: &Dataset) -> Result<Vec<Prediction>> {
    let mut latent = vec![0.0; data.n()];
    for model in &average.models {
        for (acc, e) in latent.iter_mut().zip(model.linear_predictor(data)?) {
            *acc += model.weight * e;
        }
    }
    Ok(latent
        .into_iter()
        .map(|l| {
            let probability = normal_cdf(l);
            Prediction {
                latent: l,
                probability,
                class: u8::from(l > 0.0),
            }
        })
        .collect())
}

pub fn classify(probability: f64) -> u8 {
    u8::from(probability > 0.5)
}

/// Misclassification rate.
pub fn mce(predicted: &[u8], actual: &[u8]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: actual.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::InvalidInput("no predictions".into()));
    }
    let wrong = predicted.iter().zip(actual).filter(|(p, a)| p != a).count();
    Ok(wrong as f64 / actual.len() as f64)
}

/// Area under the ROC curve via the rank-sum form, ties counted half.
pub fn auc(scores: &[f64], actual: &[u8]) -> Result<f64> {
    if scores.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: actual.len(),
        });
    }
    let pos = actual.iter().filter(|&&a| a == 1).count() as f64;
    let neg = actual.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(Error::SingleClass);
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(actual).filter(|(_, &a)| a == 1).map(|(r, _)| r).sum();
    Ok((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

/// Stratified fold index per row: each class is shuffled and dealt in turn.
pub fn stratified_folds(y: &[u8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Config(format!("k = {k}, need at least 2 folds")));
    }
    let mut rng = SeededRng::with_stream(seed, FOLD_STREAM);
    let mut order: Vec<usize> = Vec::with_capacity(y.len());
    for class in [0u8, 1] {
        let mut rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        rows.shuffle(&mut rng);
        order.extend(rows);
    }
    let mut fold = vec![0; y.len()];
    for (pos, &row) in order.iter().enumerate() {
        fold[row] = pos % k;
    }
    for f in 0..k {
        for class in [0u8, 1] {
            let held = (0..y.len()).filter(|&i| fold[i] == f && y[i] == class).count();
            if held == 0 {
                return Err(Error::FoldDegenerate {
                    fold: f,
                    reason: format!("no held-out rows of class {class}"),
                });
            }
        }
    }
    Ok(fold)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeldOut {
    pub row: usize,
    pub fold: usize,
    pub actual: u8,
    pub prediction: Prediction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_test: usize,
    pub mce: f64,
    pub auc: f64,
}

/// Cross-validated predictions with per-fold metrics; the spreads are
/// sample standard deviations across folds.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionReport {
    pub rows: Vec<HeldOut>,
    pub folds: Vec<FoldMetrics>,
    pub mce_mean: f64,
    pub mce_sd: f64,
    pub auc_mean: f64,
    pub auc_sd: f64,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn run_fold(
    data: &Dataset,
    hyper: &Hyperparams,
    config: &RunConfig,
    folds: &[usize],
    f: usize,
) -> Result<(FoldMetrics, Vec<HeldOut>)> {
    let train_rows: Vec<usize> = (0..data.n()).filter(|&i| folds[i] != f).collect();
    let test_rows: Vec<usize> = (0..data.n()).filter(|&i| folds[i] == f).collect();
    let train = data.subset_rows(&train_rows)?.standardized();
    let test = data.subset_rows(&test_rows)?;
    let mut cfg = config.clone();
    cfg.seed = SeededRng::with_stream(config.seed, f as u64).random();
    let fitted = fit(&train, hyper, &cfg)?;
    let average = ModelAverage::from_traces(&fitted.traces, &train)?;
    let preds = bma_predict(&average, &test)?;
    let classes: Vec<u8> = preds.iter().map(|p| p.class).collect();
    let probs: Vec<f64> = preds.iter().map(|p| p.probability).collect();
    let metrics = FoldMetrics {
        fold: f,
        n_test: test_rows.len(),
        mce: mce(&classes, test.y())?,
        auc: auc(&probs, test.y())?,
    };
    let held = test_rows
        .iter()
        .zip(preds)
        .map(|(&row, prediction)| HeldOut {
            row,
            fold: f,
            actual: data.y()[row],
            prediction,
        })
        .collect();
    Ok((metrics, held))
}

/// Stratified `k`-fold cross-validation. Each fold standardizes on its
/// training rows, fits, and predicts the held-out rows by model averaging.
pub fn cross_validate(data: &Dataset, hyper: &Hyperparams, config: &RunConfig, k: usize) -> Result<PredictionReport> {
    config.validate()?;
    hyper.validate()?;
    let folds = stratified_folds(data.y(), k, config.seed)?;
    let results: Vec<(FoldMetrics, Vec<HeldOut>)> = (0..k)
        .into_par_iter()
        .map(|f| run_fold(data, hyper, config, &folds, f))
        .collect::<Result<_>>()?;
    let mut folds_out = Vec::with_capacity(k);
    let mut rows = Vec::with_capacity(data.n());
    for (metrics, held) in results {
        folds_out.push(metrics);
        rows.extend(held);
    }
    rows.sort_by_key(|h| h.row);
    let (mce_mean, mce_sd) = mean_sd(&folds_out.iter().map(|f| f.mce).collect::<Vec<_>>());
    let (auc_mean, auc_sd) = mean_sd(&folds_out.iter().map(|f| f.auc).collect::<Vec<_>>());
    Ok(PredictionReport {
        rows,
        folds: folds_out,
        mce_mean,
        mce_sd,
        auc_mean,
        auc_sd,
    })
}
