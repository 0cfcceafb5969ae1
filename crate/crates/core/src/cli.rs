//! Command implementations behind the `ddrj` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::datagen::{builtin_scenario, simulate, Scenario};
use crate::error::{Error, Result};
use crate::inference::{bma_predict, cross_validate, summarize, ModelAverage};
use crate::io::{self, ChainDigest, Config, Predictor, RunManifest};
use crate::model::{Dataset, Hyperparams};
use crate::proposals::ProposalMode;
use crate::sampler::{fit, RunConfig};

pub const DEFAULT_FOLDS: usize = 5;
const DEFAULT_PRIOR_VARIANCE: f64 = 25.0;

/// Settings shared by the commands that run chains.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub mode: Option<ProposalMode>,
}

impl RunOptions {
    /// Config file values, then command-line overrides.
    pub fn resolve(&self) -> Result<(RunConfig, Hyperparams)> {
        let cfg = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        let mut run = cfg.run_config()?;
        if let Some(s) = self.seed {
            run.seed = s;
        }
        if let Some(m) = self.mode {
            run.mode = m;
        }
        Ok((run, cfg.hyperparams(DEFAULT_PRIOR_VARIANCE)?))
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Resolves a built-in scenario name or a scenario TOML file.
pub fn load_scenario(spec: &str) -> Result<Scenario> {
    let path = Path::new(spec);
    if path.extension().is_some_and(|e| e == "toml") {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let s: Scenario = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
        s.validate()?;
        return Ok(s);
    }
    builtin_scenario(spec)
}

fn write_truth(path: &Path, s: &Scenario) -> Result<()> {
    let mut text = String::from("label,class,term,value\n");
    text.push_str(&format!("intercept,intercept,intercept,{}\n", io::fmt_f64(s.beta0)));
    let rois = s.roi_labels();
    let snps = s.snp_labels();
    let mut roi_effects = s.roi_effects.clone();
    roi_effects.sort_by_key(|e| e.roi);
    for e in &roi_effects {
        text.push_str(&format!("{},roi,beta,{}\n", rois[e.roi - 1], io::fmt_f64(e.beta)));
    }
    let mut snp_effects = s.snp_effects.clone();
    snp_effects.sort_by_key(|e| e.snp);
    for e in &snp_effects {
        let l = &snps[e.snp - 1];
        text.push_str(&format!("{l},snp,alpha,{}\n{l},snp,delta,{}\n", io::fmt_f64(e.alpha), io::fmt_f64(e.delta)));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `data.csv`, `truth.csv` and `manifest.json` for a scenario.
pub fn cmd_simulate(scenario: &str, seed: Option<u64>, out: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    let mut s = load_scenario(scenario)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let sim = simulate(&s)?;
    ensure_dir(out)?;
    let data_path = out.join("data.csv");
    let truth_path = out.join("truth.csv");
    io::write_dataset(&data_path, &sim.data)?;
    write_truth(&truth_path, &s)?;
    let manifest = RunManifest {
        command: format!("simulate {}", s.name),
        config_path: None,
        seed: Some(s.seed),
        inputs: vec![],
        outputs: vec![data_path, truth_path],
        elapsed_seconds: start.elapsed().as_secs_f64(),
        chains: vec![],
    };
    manifest.write(&out.join("manifest.json"))?;
    Ok(manifest)
}

/// Runs the sampler on a dataset and writes the trace, summaries and the
/// model-averaged predictor.
pub fn cmd_fit(data_path: &Path, options: &RunOptions, out: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    let (run, hyper) = options.resolve()?;
    let data = io::read_dataset(data_path)?.standardized();
    let fitted = fit(&data, &hyper, &run)?;
    ensure_dir(out)?;

    let summary = summarize(&fitted.traces, &data)?;
    let predictor = Predictor {
        roi_labels: data.roi_names().to_vec(),
        snp_labels: data.snp_names().to_vec(),
        average: ModelAverage::from_traces(&fitted.traces, &data)?,
    };
    let paths = ["trace.csv", "logpost.csv", "summary.csv", "models.csv", "predictor.json"].map(|f| out.join(f));
    io::write_trace(&paths[0], &fitted.traces, &data)?;
    io::write_log_posterior(&paths[1], &fitted.traces)?;
    io::write_summary(&paths[2], &summary)?;
    io::write_models(&paths[3], &summary)?;
    io::write_json(&paths[4], &predictor)?;
    let mut outputs = paths.to_vec();
    if let Some(sel) = &fitted.selection {
        let p = out.join("selection.csv");
        io::write_selection(&p, sel, &data)?;
        outputs.push(p);
    }
    log::info!(
        "modal model {} with probability {:.3}",
        summary.modal().signature,
        summary.modal().probability
    );
    let manifest = RunManifest {
        command: "fit".into(),
        config_path: options.config.clone(),
        seed: Some(run.seed),
        inputs: vec![data_path.to_path_buf()],
        outputs,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        chains: fitted.traces.iter().map(ChainDigest::from_trace).collect(),
    };
    manifest.write(&out.join("manifest.json"))?;
    Ok(manifest)
}

/// Applies the predictor saved by `fit` in `fit_dir` to new rows.
pub fn cmd_predict(fit_dir: &Path, newdata: &Path, out: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    let predictor_path = fit_dir.join("predictor.json");
    let predictor: Predictor = io::read_json(&predictor_path)?;
    let loaded = io::read_dataset_lenient(newdata, true)?;
    predictor.check_schema(&loaded.data)?;
    let preds = bma_predict(&predictor.average, &loaded.data)?;
    ensure_dir(out)?;
    let path = out.join("predictions.csv");
    io::write_predictions(&path, &preds, loaded.has_outcome.then(|| loaded.data.y()))?;
    let manifest = RunManifest {
        command: "predict".into(),
        config_path: None,
        seed: None,
        inputs: vec![predictor_path, newdata.to_path_buf()],
        outputs: vec![path],
        elapsed_seconds: start.elapsed().as_secs_f64(),
        chains: vec![],
    };
    manifest.write(&out.join("manifest.json"))?;
    Ok(manifest)
}

/// Stratified k-fold cross-validation of the model-averaged classifier.
pub fn cmd_crossval(data_path: &Path, options: &RunOptions, k: usize, out: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    let (run, hyper) = options.resolve()?;
    let data: Dataset = io::read_dataset(data_path)?;
    let report = cross_validate(&data, &hyper, &run, k)?;
    ensure_dir(out)?;
    let metrics = out.join("metrics.csv");
    let preds = out.join("cv_predictions.csv");
    io::write_metrics(&metrics, &report)?;
    io::write_cv_predictions(&preds, &report)?;
    log::info!(
        "MCE {:.3} (sd {:.3}), AUC {:.3} (sd {:.3})",
        report.mce_mean,
        report.mce_sd,
        report.auc_mean,
        report.auc_sd
    );
    let manifest = RunManifest {
        command: format!("crossval k={k}"),
        config_path: options.config.clone(),
        seed: Some(run.seed),
        inputs: vec![data_path.to_path_buf()],
        outputs: vec![metrics, preds],
        elapsed_seconds: start.elapsed().as_secs_f64(),
        chains: vec![],
    };
    manifest.write(&out.join("manifest.json"))?;
    Ok(manifest)
}
