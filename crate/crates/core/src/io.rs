//! Dataset CSV, run configuration and result file formats.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{ModelAverage, PosteriorSummary, PredictionReport, Prediction};
use crate::model::{Dataset, Hyperparams, ModelPrior};
use crate::proposals::ProposalMode;
use crate::sampler::{ChainTrace, MoveStats, RunConfig, Selection};

/// Full-precision float formatting used in every numeric output file.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// A dataset read from CSV. `has_outcome` is false when the file carried no
/// `y` column, in which case the outcomes are placeholders.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub data: Dataset,
    pub has_outcome: bool,
}

fn parse_err(path: &Path, line: u64, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

enum Field {
    Outcome,
    Roi,
    Snp,
}

/// Reads `y` (0/1), `roi_*` (numeric) and `snp_*` (−1/0/1) columns.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let loaded = read_dataset_lenient(path, false)?;
    Ok(loaded.data)
}

/// As [`read_dataset`], optionally accepting files without a `y` column.
pub fn read_dataset_lenient(path: &Path, outcome_optional: bool) -> Result<LoadedData> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, 1, 1, e.to_string()))?
        .clone();
    let mut kinds = Vec::with_capacity(headers.len());
    let (mut roi_names, mut snp_names) = (Vec::new(), Vec::new());
    let mut has_outcome = false;
    for (c, h) in headers.iter().enumerate() {
        let kind = if h == "y" {
            if has_outcome {
                return Err(parse_err(path, 1, c + 1, "duplicate `y` column"));
            }
            has_outcome = true;
            Field::Outcome
        } else if h.starts_with("roi_") {
            roi_names.push(h.to_string());
            Field::Roi
        } else if h.starts_with("snp_") {
            snp_names.push(h.to_string());
            Field::Snp
        } else {
            return Err(parse_err(
                path,
                1,
                c + 1,
                format!("column `{h}` is not `y` and lacks a `roi_` or `snp_` prefix"),
            ));
        };
        kinds.push(kind);
    }
    if !has_outcome && !outcome_optional {
        return Err(parse_err(path, 1, 1, "missing `y` column"));
    }

    let mut y = Vec::new();
    let mut rois: Vec<Vec<f64>> = vec![Vec::new(); roi_names.len()];
    let mut snps: Vec<Vec<i8>> = vec![Vec::new(); snp_names.len()];
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, 1, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let (mut r, mut s) = (0, 0);
        for (c, (field, kind)) in record.iter().zip(&kinds).enumerate() {
            match kind {
                Field::Outcome => match field {
                    "0" => y.push(0),
                    "1" => y.push(1),
                    _ => return Err(parse_err(path, line, c + 1, format!("outcome `{field}` is not 0 or 1"))),
                },
                Field::Roi => {
                    let v: f64 = field
                        .parse()
                        .map_err(|_| parse_err(path, line, c + 1, format!("`{field}` is not a number")))?;
                    if !v.is_finite() {
                        return Err(parse_err(path, line, c + 1, "non-finite value"));
                    }
                    rois[r].push(v);
                    r += 1;
                }
                Field::Snp => {
                    let v = match field {
                        "-1" => -1,
                        "0" => 0,
                        "1" => 1,
                        _ => return Err(parse_err(path, line, c + 1, format!("genotype `{field}` is not -1, 0 or 1"))),
                    };
                    snps[s].push(v);
                    s += 1;
                }
            }
        }
    }
    let n = rois.first().map(Vec::len).or(snps.first().map(Vec::len)).unwrap_or(y.len());
    if !has_outcome {
        y = vec![0; n];
    }
    let data = Dataset::from_columns(y, rois, snps, roi_names, snp_names)?;
    Ok(LoadedData { data, has_outcome })
}

fn create(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidInput(format!("{}: {other:?}", path.display())),
    }
}

fn finish(path: &Path, mut w: csv::Writer<fs::File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `data` in raw covariate units.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = create(path)?;
    let mut header = vec!["y".to_string()];
    header.extend(data.roi_names().iter().cloned());
    header.extend(data.snp_names().iter().cloned());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for i in 0..data.n() {
        let mut row = vec![data.y()[i].to_string()];
        for j in 0..data.g() {
            let sc = data.scaling()[j];
            row.push(fmt_f64(data.roi_column(j)[i] * sc.scale + sc.center));
        }
        for k in 0..data.m() {
            row.push(data.snp_levels(k)[i].to_string());
        }
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Run settings as read from a flat TOML file; absent keys take defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub seed: Option<u64>,
    pub mode: Option<ProposalMode>,
    pub var_beta: Option<f64>,
    pub var_alpha: Option<f64>,
    pub var_delta: Option<f64>,
    pub preselect_threshold: Option<f64>,
    pub subsample_fraction: Option<f64>,
    pub chains: Option<usize>,
    pub space_prob_override: Option<f64>,
    pub model_prior: Option<ModelPrior>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, col)
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let at = e
                .span()
                .map(|s| {
                    let (l, c) = line_col(text, s.start);
                    format!(" at line {l}, column {c}")
                })
                .unwrap_or_default();
            Error::Config(format!("{}{at}", e.message()))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let d = RunConfig::default();
        let cfg = RunConfig {
            iterations: self.iterations.unwrap_or(d.iterations),
            burn_in: self.burn_in.unwrap_or(d.burn_in),
            thin: self.thin.unwrap_or(d.thin),
            seed: self.seed.unwrap_or(d.seed),
            mode: self.mode.unwrap_or(d.mode),
            preselect_threshold: self.preselect_threshold.or(d.preselect_threshold),
            subsample_fraction: self.subsample_fraction.or(d.subsample_fraction),
            chains: self.chains.unwrap_or(d.chains),
            space_prob_override: self.space_prob_override.or(d.space_prob_override),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Variances default to `default_var` when unset.
    pub fn hyperparams(&self, default_var: f64) -> Result<Hyperparams> {
        let h = Hyperparams {
            var_beta: self.var_beta.unwrap_or(default_var),
            var_alpha: self.var_alpha.unwrap_or(default_var),
            var_delta: self.var_delta.unwrap_or(default_var),
            model_prior: self.model_prior.unwrap_or_default(),
        };
        h.validate()?;
        Ok(h)
    }
}

fn join_labels(idx: &[usize], names: &[String]) -> String {
    idx.iter().map(|&i| names[i].as_str()).collect::<Vec<_>>().join(";")
}

fn join_indices(idx: &[usize]) -> String {
    idx.iter().map(|&i| (i + 1).to_string()).collect::<Vec<_>>().join(";")
}

fn coefficient_field(s: &crate::sampler::Sample, raw: &[f64], data: &Dataset) -> String {
    let mut parts = vec![format!("intercept={}", fmt_f64(raw[0]))];
    for (&j, b) in s.active_rois.iter().zip(&raw[1..]) {
        parts.push(format!("{}={}", data.roi_names()[j], fmt_f64(*b)));
    }
    for (k, &j) in s.active_snps.iter().enumerate() {
        let l = &data.snp_names()[j];
        parts.push(format!("{l}.alpha={}", fmt_f64(s.alpha[k])));
        parts.push(format!("{l}.delta={}", fmt_f64(s.delta[k])));
    }
    parts.join(";")
}

/// One row per retained sample. Active sets are 1-based column indices;
/// coefficients are in raw units, keyed by label.
pub fn write_trace(path: &Path, traces: &[ChainTrace], data: &Dataset) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["chain", "iteration", "log_posterior", "rois", "snps", "coefficients"])
        .map_err(|e| csv_err(path, e))?;
    for t in traces {
        for s in &t.samples {
            let raw = s.raw_beta(&t.scaling);
            w.write_record([
                t.chain.to_string(),
                s.iteration.to_string(),
                fmt_f64(s.log_posterior),
                join_indices(&s.active_rois),
                join_indices(&s.active_snps),
                coefficient_field(s, &raw, data),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    finish(path, w)
}

/// Log-posterior after every iteration of every chain.
pub fn write_log_posterior(path: &Path, traces: &[ChainTrace]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["chain", "iteration", "log_posterior"]).map_err(|e| csv_err(path, e))?;
    for t in traces {
        for (i, lp) in t.log_posterior.iter().enumerate() {
            w.write_record([t.chain.to_string(), (i + 1).to_string(), fmt_f64(*lp)])
                .map_err(|e| csv_err(path, e))?;
        }
    }
    finish(path, w)
}

pub fn write_summary(path: &Path, summary: &PosteriorSummary) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["label", "class", "term", "mppi", "post_mean", "post_sd"])
        .map_err(|e| csv_err(path, e))?;
    for t in &summary.terms {
        w.write_record([
            t.label.clone(),
            t.term.class().to_string(),
            t.term.as_str().to_string(),
            fmt_f64(t.mppi),
            fmt_f64(t.mean),
            fmt_f64(t.sd),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn write_models(path: &Path, summary: &PosteriorSummary) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["rank", "probability", "count", "rois", "snps"])
        .map_err(|e| csv_err(path, e))?;
    for (r, m) in summary.models.iter().enumerate() {
        w.write_record([
            (r + 1).to_string(),
            fmt_f64(m.probability),
            m.count.to_string(),
            join_labels(&m.signature.rois, &summary.roi_labels),
            join_labels(&m.signature.snps, &summary.snp_labels),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Pre-selection inclusion probabilities over the full covariate set.
pub fn write_selection(path: &Path, selection: &Selection, data: &Dataset) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["label", "class", "mppi", "kept"]).map_err(|e| csv_err(path, e))?;
    let rows = data
        .roi_names()
        .iter()
        .zip(&selection.roi_mppi)
        .enumerate()
        .map(|(j, (l, p))| (l, "roi", *p, selection.rois.contains(&j)))
        .chain(
            data.snp_names()
                .iter()
                .zip(&selection.snp_mppi)
                .enumerate()
                .map(|(k, (l, p))| (l, "snp", *p, selection.snps.contains(&k))),
        );
    for (label, class, p, kept) in rows {
        w.write_record([label.clone(), class.to_string(), fmt_f64(p), u8::from(kept).to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

pub fn write_predictions(path: &Path, preds: &[Prediction], actual: Option<&[u8]>) -> Result<()> {
    let mut w = create(path)?;
    let mut header = vec!["row", "latent", "probability", "class"];
    if actual.is_some() {
        header.push("actual");
    }
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (i, p) in preds.iter().enumerate() {
        let mut row = vec![(i + 1).to_string(), fmt_f64(p.latent), fmt_f64(p.probability), p.class.to_string()];
        if let Some(a) = actual {
            row.push(a[i].to_string());
        }
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Per-fold metrics followed by `mean` and `sd` rows.
pub fn write_metrics(path: &Path, report: &PredictionReport) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["fold", "n_test", "mce", "auc"]).map_err(|e| csv_err(path, e))?;
    for f in &report.folds {
        w.write_record([(f.fold + 1).to_string(), f.n_test.to_string(), fmt_f64(f.mce), fmt_f64(f.auc)])
            .map_err(|e| csv_err(path, e))?;
    }
    let n: usize = report.folds.iter().map(|f| f.n_test).sum();
    w.write_record(["mean".into(), n.to_string(), fmt_f64(report.mce_mean), fmt_f64(report.auc_mean)])
        .map_err(|e| csv_err(path, e))?;
    w.write_record(["sd".into(), n.to_string(), fmt_f64(report.mce_sd), fmt_f64(report.auc_sd)])
        .map_err(|e| csv_err(path, e))?;
    finish(path, w)
}

pub fn write_cv_predictions(path: &Path, report: &PredictionReport) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["row", "fold", "actual", "latent", "probability", "class"])
        .map_err(|e| csv_err(path, e))?;
    for h in &report.rows {
        w.write_record([
            (h.row + 1).to_string(),
            (h.fold + 1).to_string(),
            h.actual.to_string(),
            fmt_f64(h.prediction.latent),
            fmt_f64(h.prediction.probability),
            h.prediction.class.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Everything `predict` needs from a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub roi_labels: Vec<String>,
    pub snp_labels: Vec<String>,
    pub average: ModelAverage,
}

impl Predictor {
    /// Fails unless `data` has exactly the training covariates.
    pub fn check_schema(&self, data: &Dataset) -> Result<()> {
        let mut want: Vec<&String> = self.roi_labels.iter().chain(&self.snp_labels).collect();
        let mut have: Vec<&String> = data.roi_names().iter().chain(data.snp_names()).collect();
        want.sort();
        have.sort();
        if want == have {
            return Ok(());
        }
        let listed = |from: &[&String], other: &[&String]| {
            let v: Vec<&str> = from.iter().filter(|l| !other.contains(l)).map(|l| l.as_str()).collect();
            match v.len() {
                0..=8 => v.join(", "),
                n => format!("{}, ... ({n} total)", v[..8].join(", ")),
            }
        };
        Err(Error::SchemaMismatch(format!(
            "missing [{}], unexpected [{}]",
            listed(&want, &have),
            listed(&have, &want)
        )))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line() as u64, e.column(), e.to_string()))
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Acceptance rates for one move type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveDigest {
    pub attempts: u64,
    pub accepts: u64,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDigest {
    pub chain: usize,
    pub retained: usize,
    pub final_log_posterior: Option<f64>,
    pub moves: std::collections::BTreeMap<String, MoveDigest>,
}

impl ChainDigest {
    pub fn from_trace(t: &ChainTrace) -> Self {
        Self {
            chain: t.chain,
            retained: t.samples.len(),
            final_log_posterior: t.log_posterior.last().copied(),
            moves: digest_moves(&t.stats),
        }
    }
}

fn digest_moves(stats: &MoveStats) -> std::collections::BTreeMap<String, MoveDigest> {
    MoveStats::LABELS
        .iter()
        .enumerate()
        .map(|(i, l)| {
            (
                l.to_string(),
                MoveDigest {
                    attempts: stats.attempts[i],
                    accepts: stats.accepts[i],
                    rate: stats.rate(i),
                },
            )
        })
        .collect()
}

/// Record of one command invocation, written last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub elapsed_seconds: f64,
    pub chains: Vec<ChainDigest>,
}

impl RunManifest {
    /// Refuses to write when a listed output is missing.
    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(missing) = self.outputs.iter().find(|p| !p.exists()) {
            return Err(Error::io(
                missing,
                std::io::Error::new(std::io::ErrorKind::NotFound, "listed output was not written"),
            ));
        }
        write_json(path, self)
    }
}
