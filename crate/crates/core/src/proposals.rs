//! Candidate selection for birth/death moves.
//!
//! Births favour covariates associated with the current latent residuals
//! (absolute Pearson correlation for ROIs, Kruskal-Wallis for SNPs); deaths
//! favour covariates with small coefficients. Every weight is floored at
//! [`WEIGHT_FLOOR`] before normalization so all legal moves stay reachable.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{residuals, Dataset, ModelState};
use crate::numerics::{average_ranks, kruskal_wallis_from_ranks, pearson_correlation, tie_correction};

pub const WEIGHT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Space {
    Roi,
    Snp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MoveKind {
    Birth,
    Death,
}

/// How candidates are picked once the space and move kind are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalMode {
    /// Association- and magnitude-weighted selection.
    #[default]
    #[serde(rename = "ddrj")]
    DataDriven,
    /// Uniform over the legal candidates (plain reversible jump).
    #[serde(rename = "rj")]
    Uniform,
}

impl std::str::FromStr for ProposalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ddrj" => Ok(Self::DataDriven),
            "rj" => Ok(Self::Uniform),
            other => Err(Error::Config(format!("mode must be ddrj or rj, got {other:?}"))),
        }
    }
}

impl std::fmt::Display for ProposalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::DataDriven => "ddrj",
            Self::Uniform => "rj",
        })
    }
}

/// A chosen move: which space, birth or death, and which covariate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveChoice {
    pub space: Space,
    pub kind: MoveKind,
    /// Column index of the covariate in the dataset.
    pub candidate_index: usize,
    /// Log weight of the chosen candidate within its weight vector.
    pub log_selection_prob: f64,
    /// Log probability of the birth/death decision given the current size.
    pub log_kind_prob: f64,
}

/// `s = g / (g + m)`, the probability of jumping in the ROI space.
pub fn jump_space_prob(g: usize, m: usize) -> f64 {
    assert!(g + m >= 1, "no covariates to jump over");
    g as f64 / (g + m) as f64
}

/// `(p(b | size), p(d | size))`.
pub fn move_kind_probs(active: usize, max: usize) -> (f64, f64) {
    assert!(active <= max, "active count {active} exceeds {max}");
    if active == 0 {
        (1.0, 0.0)
    } else if active == max {
        (0.0, 1.0)
    } else {
        (0.5, 0.5)
    }
}

fn normalize_floored(raw: impl Iterator<Item = f64>) -> Vec<f64> {
    let w: Vec<f64> = raw
        .map(|v| if v.is_finite() { v.max(WEIGHT_FLOOR) } else { WEIGHT_FLOOR })
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Birth weights over `inactive` ROIs, ∝ |cor(ξ, X_j)|.
pub fn roi_birth_weights(xi: &[f64], data: &Dataset, inactive: &[usize]) -> Vec<f64> {
    normalize_floored(
        inactive
            .iter()
            .map(|&j| pearson_correlation(xi, data.roi_column(j)).map_or(0.0, f64::abs)),
    )
}

/// Birth weights over `inactive` SNPs, ∝ KW(ξ, Z_k).
pub fn snp_birth_weights(xi: &[f64], data: &Dataset, inactive: &[usize]) -> Vec<f64> {
    let ranks = average_ranks(xi);
    let tc = tie_correction(xi);
    normalize_floored(
        inactive
            .iter()
            .map(|&k| kruskal_wallis_from_ranks(&ranks, tc, data.snp_levels(k)).unwrap_or(0.0)),
    )
}

/// Death weights over active ROIs, ∝ 1/|β_j| (intercept excluded).
pub fn roi_death_weights(beta: &[f64]) -> Vec<f64> {
    normalize_floored(beta.iter().map(|b| 1.0 / b.abs().max(WEIGHT_FLOOR)))
}

/// Death weights over active SNPs, ∝ 1/(|α_k| + |δ_k|).
pub fn snp_death_weights(alpha: &[f64], delta: &[f64]) -> Vec<f64> {
    normalize_floored(
        alpha
            .iter()
            .zip(delta)
            .map(|(a, d)| 1.0 / (a.abs() + d.abs()).max(WEIGHT_FLOOR)),
    )
}

/// Candidates of `space` not in the current model, in column order.
pub fn inactive(space: Space, state: &ModelState, data: &Dataset) -> Vec<usize> {
    let (total, active) = match space {
        Space::Roi => (data.g(), &state.active_rois),
        Space::Snp => (data.m(), &state.active_snps),
    };
    let mut mask = vec![true; total];
    for &j in active {
        mask[j] = false;
    }
    (0..total).filter(|&j| mask[j]).collect()
}

/// Move-selection kernel for one chain.
///
/// Holds the proposal mode, the space probability and, for data-driven
/// births, column caches restricted to a fixed row subset so forward and
/// reverse weights are computed on the same rows.
#[derive(Debug, Clone)]
pub struct ProposalKernel {
    mode: ProposalMode,
    space_prob: f64,
    rows: Option<Vec<usize>>,
    roi_centered: Vec<Vec<f64>>,
    roi_norms: Vec<f64>,
    snp_levels: Vec<Vec<i8>>,
}

impl ProposalKernel {
    pub fn new(data: &Dataset, mode: ProposalMode) -> Self {
        Self::build(data, mode, None, None)
    }

    /// `space_prob` overrides `g/(g+m)`; `subsample` restricts birth weights to
    /// a random fraction of rows drawn once from `rng`.
    pub fn with_options<R: Rng + ?Sized>(
        data: &Dataset,
        mode: ProposalMode,
        space_prob: Option<f64>,
        subsample: Option<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        if let Some(s) = space_prob {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Config(format!("space_prob_override must lie in [0, 1], got {s}")));
            }
        }
        let rows = match subsample {
            None => None,
            Some(f) if f > 0.0 && f <= 1.0 => {
                if f == 1.0 {
                    None
                } else {
                    let take = ((f * data.n() as f64).ceil() as usize).clamp(2, data.n());
                    let mut idx = rand::seq::index::sample(rng, data.n(), take).into_vec();
                    idx.sort_unstable();
                    Some(idx)
                }
            }
            Some(f) => return Err(Error::Config(format!("subsample_fraction must lie in (0, 1], got {f}"))),
        };
        Ok(Self::build(data, mode, space_prob, rows))
    }

    fn build(data: &Dataset, mode: ProposalMode, space_prob: Option<f64>, rows: Option<Vec<usize>>) -> Self {
        let pick = |col: &[f64]| -> Vec<f64> {
            match &rows {
                Some(r) => r.iter().map(|&i| col[i]).collect(),
                None => col.to_vec(),
            }
        };
        let mut roi_centered = Vec::with_capacity(data.g());
        let mut roi_norms = Vec::with_capacity(data.g());
        for j in 0..data.g() {
            let mut c = pick(data.roi_column(j));
            let mean = c.iter().sum::<f64>() / c.len() as f64;
            c.iter_mut().for_each(|v| *v -= mean);
            roi_norms.push(c.iter().map(|v| v * v).sum::<f64>().sqrt());
            roi_centered.push(c);
        }
        let snp_levels = (0..data.m())
            .map(|k| match &rows {
                Some(r) => r.iter().map(|&i| data.snp_levels(k)[i]).collect(),
                None => data.snp_levels(k).to_vec(),
            })
            .collect();
        let space_prob = match (data.g(), data.m()) {
            (0, _) => 0.0,
            (_, 0) => 1.0,
            (g, m) => space_prob.unwrap_or_else(|| jump_space_prob(g, m)),
        };
        Self {
            mode,
            space_prob,
            rows,
            roi_centered,
            roi_norms,
            snp_levels,
        }
    }

    pub fn mode(&self) -> ProposalMode {
        self.mode
    }

    pub fn space_prob(&self) -> f64 {
        self.space_prob
    }

    pub fn subsample_rows(&self) -> Option<&[usize]> {
        self.rows.as_deref()
    }

    fn restrict(&self, xi: &[f64]) -> Vec<f64> {
        match &self.rows {
            Some(r) => r.iter().map(|&i| xi[i]).collect(),
            None => xi.to_vec(),
        }
    }

    /// Normalized birth weights over `inactive` given full-length residuals.
    pub fn birth_weights(&self, space: Space, xi: &[f64], inactive: &[usize]) -> Vec<f64> {
        if inactive.is_empty() {
            return Vec::new();
        }
        if self.mode == ProposalMode::Uniform {
            return vec![1.0 / inactive.len() as f64; inactive.len()];
        }
        let xi = self.restrict(xi);
        match space {
            Space::Roi => {
                let mean = xi.iter().sum::<f64>() / xi.len() as f64;
                let xi_norm = xi.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt();
                normalize_floored(inactive.iter().map(|&j| {
                    let denom = self.roi_norms[j] * xi_norm;
                    if denom > 0.0 {
                        let num: f64 = self.roi_centered[j].iter().zip(&xi).map(|(a, b)| a * b).sum();
                        (num / denom).abs().min(1.0)
                    } else {
                        0.0
                    }
                }))
            }
            Space::Snp => {
                let ranks = average_ranks(&xi);
                let tc = tie_correction(&xi);
                normalize_floored(
                    inactive
                        .iter()
                        .map(|&k| kruskal_wallis_from_ranks(&ranks, tc, &self.snp_levels[k]).unwrap_or(0.0)),
                )
            }
        }
    }

    /// Normalized death weights over the active covariates of `space`, in
    /// active-list order.
    pub fn death_weights(&self, space: Space, state: &ModelState) -> Vec<f64> {
        let k = match space {
            Space::Roi => state.num_rois(),
            Space::Snp => state.num_snps(),
        };
        if k == 0 {
            return Vec::new();
        }
        if self.mode == ProposalMode::Uniform {
            return vec![1.0 / k as f64; k];
        }
        match space {
            Space::Roi => roi_death_weights(&state.beta[1..]),
            Space::Snp => snp_death_weights(&state.alpha, &state.delta),
        }
    }

    /// Log weight of proposing `candidate` for birth from a state with
    /// residuals `xi` and the given inactive set.
    pub fn log_birth_selection(&self, space: Space, xi: &[f64], inactive: &[usize], candidate: usize) -> f64 {
        let pos = inactive
            .iter()
            .position(|&j| j == candidate)
            .expect("birth candidate must be inactive");
        self.birth_weights(space, xi, inactive)[pos].ln()
    }

    /// Log weight of proposing `candidate` for death from `state`.
    pub fn log_death_selection(&self, space: Space, state: &ModelState, candidate: usize) -> f64 {
        let active = match space {
            Space::Roi => &state.active_rois,
            Space::Snp => &state.active_snps,
        };
        let pos = active
            .iter()
            .position(|&j| j == candidate)
            .expect("death candidate must be active");
        self.death_weights(space, state)[pos].ln()
    }

    /// Chooses space, move kind and candidate for the next jump.
    pub fn draw_move<R: Rng + ?Sized>(&self, state: &ModelState, data: &Dataset, rng: &mut R) -> Result<MoveChoice> {
        if data.g() + data.m() == 0 {
            return Err(Error::InvalidInput("dataset has no candidate covariates".into()));
        }
        let space = if rng.random::<f64>() < self.space_prob {
            Space::Roi
        } else {
            Space::Snp
        };
        let (active, max) = match space {
            Space::Roi => (state.num_rois(), data.g()),
            Space::Snp => (state.num_snps(), data.m()),
        };
        let (pb, pd) = move_kind_probs(active, max);
        let kind = if pd == 0.0 || (pb > 0.0 && rng.random::<f64>() < pb) {
            MoveKind::Birth
        } else {
            MoveKind::Death
        };
        let (candidates, weights, log_kind_prob) = match kind {
            MoveKind::Birth => {
                let inactive = inactive(space, state, data);
                let xi = if self.mode == ProposalMode::DataDriven {
                    residuals(state, data)?
                } else {
                    Vec::new()
                };
                let w = self.birth_weights(space, &xi, &inactive);
                (inactive, w, pb.ln())
            }
            MoveKind::Death => {
                let act = match space {
                    Space::Roi => state.active_rois.clone(),
                    Space::Snp => state.active_snps.clone(),
                };
                (act, self.death_weights(space, state), pd.ln())
            }
        };
        let pos = if weights.len() == 1 {
            0
        } else {
            WeightedIndex::new(&weights)
                .map_err(|e| Error::InvalidInput(format!("invalid proposal weights: {e}")))?
                .sample(rng)
        };
        Ok(MoveChoice {
            space,
            kind,
            candidate_index: candidates[pos],
            log_selection_prob: weights[pos].ln(),
            log_kind_prob,
        })
    }
}
