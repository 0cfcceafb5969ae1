//! Reversible-jump chain driver.
//!
//! Each iteration proposes one birth or death, accepts it with the
//! Metropolis-Hastings ratio, then runs a within-model Gibbs sweep. The latent
//! vector is held fixed during the jump, and the coefficients of the
//! destination model are drawn block-wise from their full conditionals; the
//! proposal density is the product of those block densities.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    coefficient_log_density, draw_coefficients, gibbs_sweep, gibbs_update_latent, log_posterior, residuals,
    ColumnScaling, Dataset, Hyperparams, ModelSignature, ModelState,
};
use crate::numerics::SeededRng;
use crate::proposals::{inactive, move_kind_probs, MoveChoice, MoveKind, ProposalKernel, ProposalMode, Space};

/// A fully built jump: destination state plus forward and reverse log proposal densities.
#[derive(Debug, Clone)]
pub struct JumpProposal {
    pub choice: MoveChoice,
    pub candidate: ModelState,
    pub log_forward: f64,
    pub log_reverse: f64,
}

fn space_sizes(space: Space, state: &ModelState, data: &Dataset) -> (usize, usize) {
    match space {
        Space::Roi => (state.num_rois(), data.g()),
        Space::Snp => (state.num_snps(), data.m()),
    }
}

/// Builds the [`MoveChoice`] for a specific candidate, with the same
/// probabilities [`ProposalKernel::draw_move`] would attach to it.
pub fn move_choice(
    kernel: &ProposalKernel,
    state: &ModelState,
    data: &Dataset,
    space: Space,
    kind: MoveKind,
    candidate: usize,
) -> Result<MoveChoice> {
    let (active, max) = space_sizes(space, state, data);
    let (pb, pd) = move_kind_probs(active, max);
    let (log_kind_prob, log_selection_prob) = match kind {
        MoveKind::Birth => {
            let inact = inactive(space, state, data);
            if !inact.contains(&candidate) {
                return Err(Error::InvalidInput(format!("covariate {candidate} is already active")));
            }
            let xi = residuals(state, data)?;
            (pb.ln(), kernel.log_birth_selection(space, &xi, &inact, candidate))
        }
        MoveKind::Death => {
            let act = match space {
                Space::Roi => &state.active_rois,
                Space::Snp => &state.active_snps,
            };
            if !act.contains(&candidate) {
                return Err(Error::InvalidInput(format!("covariate {candidate} is not active")));
            }
            (pd.ln(), kernel.log_death_selection(space, state, candidate))
        }
    };
    Ok(MoveChoice {
        space,
        kind,
        candidate_index: candidate,
        log_selection_prob,
        log_kind_prob,
    })
}

fn with_coefficients(state: &ModelState, rois: Vec<usize>, snps: Vec<usize>, beta: Vec<f64>, alpha: Vec<f64>, delta: Vec<f64>) -> ModelState {
    ModelState {
        active_rois: rois,
        active_snps: snps,
        beta,
        alpha,
        delta,
        latent: state.latent.clone(),
    }
}

/// Proposes adding `choice.candidate_index` to the model.
pub fn propose_birth<R: Rng + ?Sized>(
    state: &ModelState,
    data: &Dataset,
    hyper: &Hyperparams,
    kernel: &ProposalKernel,
    choice: MoveChoice,
    rng: &mut R,
) -> Result<JumpProposal> {
    assert_eq!(choice.kind, MoveKind::Birth);
    let j = choice.candidate_index;
    let (mut rois, mut snps) = (state.active_rois.clone(), state.active_snps.clone());
    match choice.space {
        Space::Roi => rois.push(j),
        Space::Snp => snps.push(j),
    }
    let draw = draw_coefficients(data, hyper, &rois, &snps, state, rng)?;
    let candidate = with_coefficients(state, rois, snps, draw.beta, draw.alpha, draw.delta);

    let (active, max) = space_sizes(choice.space, &candidate, data);
    let (_, pd) = move_kind_probs(active, max);
    let log_reverse = pd.ln()
        + kernel.log_death_selection(choice.space, &candidate, j)
        + coefficient_log_density(
            data,
            hyper,
            &state.active_rois,
            &state.active_snps,
            &candidate,
            &state.beta,
            &state.alpha,
            &state.delta,
        )?;
    Ok(JumpProposal {
        choice,
        candidate,
        log_forward: choice.log_kind_prob + choice.log_selection_prob + draw.log_density,
        log_reverse,
    })
}

/// Proposes removing `choice.candidate_index` from the model.
pub fn propose_death<R: Rng + ?Sized>(
    state: &ModelState,
    data: &Dataset,
    hyper: &Hyperparams,
    kernel: &ProposalKernel,
    choice: MoveChoice,
    rng: &mut R,
) -> Result<JumpProposal> {
    assert_eq!(choice.kind, MoveKind::Death);
    let j = choice.candidate_index;
    let (mut rois, mut snps) = (state.active_rois.clone(), state.active_snps.clone());
    match choice.space {
        Space::Roi => rois.retain(|&r| r != j),
        Space::Snp => snps.retain(|&s| s != j),
    }
    let draw = draw_coefficients(data, hyper, &rois, &snps, state, rng)?;
    let candidate = with_coefficients(state, rois, snps, draw.beta, draw.alpha, draw.delta);

    let (active, max) = space_sizes(choice.space, &candidate, data);
    let (pb, _) = move_kind_probs(active, max);
    let xi = residuals(&candidate, data)?;
    let log_reverse = pb.ln()
        + kernel.log_birth_selection(choice.space, &xi, &inactive(choice.space, &candidate, data), j)
        + coefficient_log_density(
            data,
            hyper,
            &state.active_rois,
            &state.active_snps,
            &candidate,
            &state.beta,
            &state.alpha,
            &state.delta,
        )?;
    Ok(JumpProposal {
        choice,
        candidate,
        log_forward: choice.log_kind_prob + choice.log_selection_prob + draw.log_density,
        log_reverse,
    })
}

/// `log A` for moving from `current` to `proposal.candidate`.
pub fn log_acceptance(current: &ModelState, proposal: &JumpProposal, data: &Dataset, hyper: &Hyperparams) -> Result<f64> {
    let cand = log_posterior(&proposal.candidate, data, hyper)?;
    if cand == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let cur = log_posterior(current, data, hyper)?;
    Ok(cand - cur + proposal.log_reverse - proposal.log_forward)
}

/// Attempt and acceptance counts for the four move types.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveStats {
    pub attempts: [u64; 4],
    pub accepts: [u64; 4],
}

impl MoveStats {
    pub const LABELS: [&'static str; 4] = ["roi_birth", "roi_death", "snp_birth", "snp_death"];

    pub fn slot(space: Space, kind: MoveKind) -> usize {
        match (space, kind) {
            (Space::Roi, MoveKind::Birth) => 0,
            (Space::Roi, MoveKind::Death) => 1,
            (Space::Snp, MoveKind::Birth) => 2,
            (Space::Snp, MoveKind::Death) => 3,
        }
    }

    pub fn record(&mut self, space: Space, kind: MoveKind, accepted: bool) {
        let s = Self::slot(space, kind);
        self.attempts[s] += 1;
        self.accepts[s] += u64::from(accepted);
    }

    pub fn rate(&self, slot: usize) -> Option<f64> {
        (self.attempts[slot] > 0).then(|| self.accepts[slot] as f64 / self.attempts[slot] as f64)
    }

    pub fn merge(&mut self, other: &MoveStats) {
        for i in 0..4 {
            self.attempts[i] += other.attempts[i];
            self.accepts[i] += other.accepts[i];
        }
    }
}

/// Outcome of one [`ddrj_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub choice: MoveChoice,
    pub accepted: bool,
    pub log_acceptance: f64,
}

/// One jump attempt followed by a within-model Gibbs sweep. The proposal mode
/// is the kernel's.
pub fn ddrj_step<R: Rng + ?Sized>(
    state: &mut ModelState,
    data: &Dataset,
    hyper: &Hyperparams,
    kernel: &ProposalKernel,
    rng: &mut R,
) -> Result<StepRecord> {
    let choice = kernel.draw_move(state, data, rng)?;
    let proposal = match choice.kind {
        MoveKind::Birth => propose_birth(state, data, hyper, kernel, choice, rng),
        MoveKind::Death => propose_death(state, data, hyper, kernel, choice, rng),
    };
    let (accepted, log_a) = match proposal {
        Ok(p) => {
            let log_a = log_acceptance(state, &p, data, hyper)?;
            let accept = log_a >= 0.0 || rng.random::<f64>().ln() < log_a;
            if accept {
                *state = p.candidate;
            }
            (accept, log_a)
        }
        Err(e @ Error::NotPositiveDefinite { .. }) => {
            log::warn!("rejecting {:?} {:?} of covariate {}: {e}", choice.space, choice.kind, choice.candidate_index);
            (false, f64::NEG_INFINITY)
        }
        Err(e) => return Err(e),
    };
    gibbs_sweep(state, data, hyper, rng)?;
    Ok(StepRecord {
        choice,
        accepted,
        log_acceptance: log_a,
    })
}

/// Chain settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub mode: ProposalMode,
    pub preselect_threshold: Option<f64>,
    pub subsample_fraction: Option<f64>,
    pub chains: usize,
    pub space_prob_override: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            iterations: 35_000,
            burn_in: 5_000,
            thin: 10,
            seed: 1,
            mode: ProposalMode::DataDriven,
            preselect_threshold: None,
            subsample_fraction: None,
            chains: 1,
            space_prob_override: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn_in ({}) must be below iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.chains == 0 {
            return Err(Error::Config("chains must be at least 1".into()));
        }
        if let Some(t) = self.preselect_threshold {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("preselect_threshold must be non-negative, got {t}")));
            }
        }
        if let Some(f) = self.subsample_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("subsample_fraction must lie in (0, 1], got {f}")));
            }
        }
        if let Some(s) = self.space_prob_override {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Config(format!("space_prob_override must lie in [0, 1], got {s}")));
            }
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// One retained draw. Coefficients are on the internal (standardized) scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub iteration: usize,
    pub log_posterior: f64,
    pub active_rois: Vec<usize>,
    pub active_snps: Vec<usize>,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub delta: Vec<f64>,
}

impl Sample {
    pub fn signature(&self) -> ModelSignature {
        ModelSignature::new(self.active_rois.clone(), self.active_snps.clone())
    }

    /// `β` mapped back to raw covariate units: `β_j / s_j` and
    /// `β₀ − Σ β_j c_j / s_j`.
    pub fn raw_beta(&self, scaling: &[ColumnScaling]) -> Vec<f64> {
        let mut out = self.beta.clone();
        for (p, &j) in self.active_rois.iter().enumerate() {
            let sc = scaling[j];
            out[p + 1] = self.beta[p + 1] / sc.scale;
            out[0] -= self.beta[p + 1] * sc.center / sc.scale;
        }
        out
    }
}

/// Retained samples and diagnostics of one chain.
#[derive(Debug, Clone)]
pub struct ChainTrace {
    pub chain: usize,
    pub samples: Vec<Sample>,
    /// Log-posterior after every iteration, burn-in included.
    pub log_posterior: Vec<f64>,
    pub stats: MoveStats,
    /// Column scalings of the dataset the chain ran on, for back-transformation.
    pub scaling: Vec<ColumnScaling>,
    pub g: usize,
    pub m: usize,
}

/// Runs one chain; chain `c` draws from stream `c` of `config.seed`, and
/// chains after the first start from a jittered state.
pub fn run_chain(data: &Dataset, hyper: &Hyperparams, config: &RunConfig, chain: usize) -> Result<ChainTrace> {
    let mut rng = SeededRng::with_stream(config.seed, chain as u64);
    run_chain_with_rng(data, hyper, config, chain, &mut rng)
}

pub fn run_chain_with_rng<R: Rng + ?Sized>(
    data: &Dataset,
    hyper: &Hyperparams,
    config: &RunConfig,
    chain: usize,
    rng: &mut R,
) -> Result<ChainTrace> {
    config.validate()?;
    hyper.validate()?;
    if data.g() + data.m() == 0 {
        return Err(Error::InvalidInput("dataset has no candidate covariates".into()));
    }
    let kernel = ProposalKernel::with_options(
        data,
        config.mode,
        config.space_prob_override,
        config.subsample_fraction,
        rng,
    )?;
    let mut state = if chain == 0 {
        ModelState::initial(data)
    } else {
        ModelState::jittered(data, rng)
    };
    gibbs_update_latent(&mut state, data, rng)?;

    let mut trace = ChainTrace {
        chain,
        samples: Vec::with_capacity(config.retained()),
        log_posterior: Vec::with_capacity(config.iterations),
        stats: MoveStats::default(),
        scaling: data.scaling().to_vec(),
        g: data.g(),
        m: data.m(),
    };
    for it in 0..config.iterations {
        let rec = ddrj_step(&mut state, data, hyper, &kernel, rng)?;
        trace.stats.record(rec.choice.space, rec.choice.kind, rec.accepted);
        let lp = log_posterior(&state, data, hyper)?;
        trace.log_posterior.push(lp);
        if it >= config.burn_in && (it + 1 - config.burn_in) % config.thin == 0 {
            trace.samples.push(Sample {
                iteration: it + 1,
                log_posterior: lp,
                active_rois: state.active_rois.clone(),
                active_snps: state.active_snps.clone(),
                beta: state.beta.clone(),
                alpha: state.alpha.clone(),
                delta: state.delta.clone(),
            });
        }
    }
    Ok(trace)
}

/// Runs `config.chains` chains in parallel on the current rayon pool.
pub fn run_chains(data: &Dataset, hyper: &Hyperparams, config: &RunConfig) -> Result<Vec<ChainTrace>> {
    config.validate()?;
    (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(data, hyper, config, c))
        .collect()
}

/// Covariates kept by pre-selection, as column indices of the original dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub rois: Vec<usize>,
    pub snps: Vec<usize>,
    pub roi_mppi: Vec<f64>,
    pub snp_mppi: Vec<f64>,
}

fn inclusion_frequencies(trace: &ChainTrace) -> (Vec<f64>, Vec<f64>) {
    let mut r = vec![0.0; trace.g];
    let mut s = vec![0.0; trace.m];
    let n = trace.samples.len().max(1) as f64;
    for smp in &trace.samples {
        smp.active_rois.iter().for_each(|&j| r[j] += 1.0 / n);
        smp.active_snps.iter().for_each(|&k| s[k] += 1.0 / n);
    }
    (r, s)
}

const PRESELECT_ROI_STREAM: u64 = u64::MAX - 1;
const PRESELECT_SNP_STREAM: u64 = u64::MAX - 2;

/// Screens covariates with separate ROI-only and SNP-only chains and keeps
/// those whose inclusion frequency reaches `config.preselect_threshold`.
pub fn pre_select(data: &Dataset, hyper: &Hyperparams, config: &RunConfig) -> Result<(Dataset, Selection)> {
    let threshold = config
        .preselect_threshold
        .ok_or_else(|| Error::Config("pre-selection requires preselect_threshold".into()))?;
    let screen = |cols: Dataset, stream: u64| -> Result<(Vec<f64>, Vec<f64>)> {
        if cols.g() + cols.m() == 0 {
            return Ok((vec![0.0; cols.g()], vec![0.0; cols.m()]));
        }
        let mut rng = SeededRng::with_stream(config.seed, stream);
        let t = run_chain_with_rng(&cols, hyper, config, 0, &mut rng)?;
        Ok(inclusion_frequencies(&t))
    };
    let all_rois: Vec<usize> = (0..data.g()).collect();
    let all_snps: Vec<usize> = (0..data.m()).collect();
    let roi_only = data.subset_columns(&all_rois, &[])?;
    let snp_only = data.subset_columns(&[], &all_snps)?;
    let (roi_res, snp_res) = rayon::join(
        || screen(roi_only, PRESELECT_ROI_STREAM),
        || screen(snp_only, PRESELECT_SNP_STREAM),
    );
    let (roi_mppi, _) = roi_res?;
    let (_, snp_mppi) = snp_res?;
    let keep = |mppi: &[f64]| -> Vec<usize> { (0..mppi.len()).filter(|&i| mppi[i] >= threshold).collect() };
    let selection = Selection {
        rois: keep(&roi_mppi),
        snps: keep(&snp_mppi),
        roi_mppi,
        snp_mppi,
    };
    if selection.rois.is_empty() && selection.snps.is_empty() {
        return Err(Error::EmptySelection);
    }
    let reduced = data.subset_columns(&selection.rois, &selection.snps)?;
    Ok((reduced, selection))
}

/// Chains of a complete fit, indexed against the original dataset columns.
#[derive(Debug, Clone)]
pub struct Fit {
    pub traces: Vec<ChainTrace>,
    pub selection: Option<Selection>,
}

fn remap_trace(mut trace: ChainTrace, sel: &Selection, full: &Dataset) -> ChainTrace {
    for s in &mut trace.samples {
        s.active_rois.iter_mut().for_each(|j| *j = sel.rois[*j]);
        s.active_snps.iter_mut().for_each(|k| *k = sel.snps[*k]);
    }
    trace.scaling = full.scaling().to_vec();
    trace.g = full.g();
    trace.m = full.m();
    trace
}

/// Optional pre-selection followed by `config.chains` parallel chains. An
/// empty selection falls back to the full covariate set.
pub fn fit(data: &Dataset, hyper: &Hyperparams, config: &RunConfig) -> Result<Fit> {
    config.validate()?;
    if config.preselect_threshold.is_some() {
        match pre_select(data, hyper, config) {
            Ok((reduced, sel)) => {
                log::info!(
                    "pre-selection kept {} of {} ROIs and {} of {} SNPs",
                    sel.rois.len(),
                    data.g(),
                    sel.snps.len(),
                    data.m()
                );
                let traces = run_chains(&reduced, hyper, config)?
                    .into_iter()
                    .map(|t| remap_trace(t, &sel, data))
                    .collect();
                return Ok(Fit {
                    traces,
                    selection: Some(sel),
                });
            }
            Err(Error::EmptySelection) => {
                log::warn!("pre-selection kept nothing; using all covariates");
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Fit {
        traces: run_chains(data, hyper, config)?,
        selection: None,
    })
}
