//! Synthetic datasets with known active covariates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::numerics::{standard_normal, Cholesky, DenseMatrix, SeededRng};

/// Covariance of the simulated ROI block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RoiCovariance {
    Identity,
    Full { rows: Vec<Vec<f64>> },
}

/// Non-null ROI effect; `roi` is the 1-based column number (`roi_<n>`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiEffect {
    pub roi: usize,
    pub beta: f64,
}

/// Non-null SNP effect; `snp` is the 1-based column number (`snp_<n>`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnpEffect {
    pub snp: usize,
    pub alpha: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    pub g: usize,
    pub m: usize,
    pub seed: u64,
    /// Prior variance the scenario is meant to be fitted with.
    pub prior_variance: f64,
    pub roi_mean: Vec<f64>,
    pub roi_covariance: RoiCovariance,
    /// Per-SNP probabilities of levels −1, 0, 1.
    pub snp_level_probs: Vec<[f64; 3]>,
    pub beta0: f64,
    #[serde(default)]
    pub roi_effects: Vec<RoiEffect>,
    #[serde(default)]
    pub snp_effects: Vec<SnpEffect>,
}

pub const DEFAULT_SNP_LEVELS: [f64; 3] = [0.25, 0.5, 0.25];

impl Scenario {
    /// Standard-normal ROIs and default SNP level probabilities.
    pub fn standard(name: &str, n: usize, g: usize, m: usize, prior_variance: f64, beta0: f64) -> Self {
        Self {
            name: name.to_string(),
            n,
            g,
            m,
            seed: 1,
            prior_variance,
            roi_mean: vec![0.0; g],
            roi_covariance: RoiCovariance::Identity,
            snp_level_probs: vec![DEFAULT_SNP_LEVELS; m],
            beta0,
            roi_effects: Vec::new(),
            snp_effects: Vec::new(),
        }
    }

    fn with_rois(mut self, effects: &[(usize, f64)]) -> Self {
        self.roi_effects = effects.iter().map(|&(roi, beta)| RoiEffect { roi, beta }).collect();
        self
    }

    fn with_snps(mut self, effects: &[(usize, f64, f64)]) -> Self {
        self.snp_effects = effects
            .iter()
            .map(|&(snp, alpha, delta)| SnpEffect { snp, alpha, delta })
            .collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("scenario {}: {msg}", self.name)));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.roi_mean.len() != self.g {
            return bad(format!("roi_mean has {} entries, g = {}", self.roi_mean.len(), self.g));
        }
        if let RoiCovariance::Full { rows } = &self.roi_covariance {
            if rows.len() != self.g || rows.iter().any(|r| r.len() != self.g) {
                return bad(format!("roi covariance must be {0}x{0}", self.g));
            }
        }
        if self.snp_level_probs.len() != self.m {
            return bad(format!("{} SNP level triples, m = {}", self.snp_level_probs.len(), self.m));
        }
        for (k, p) in self.snp_level_probs.iter().enumerate() {
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad(format!("SNP {} level probabilities {p:?} do not form a distribution", k + 1));
            }
        }
        if let Some(e) = self.roi_effects.iter().find(|e| e.roi == 0 || e.roi > self.g) {
            return bad(format!("ROI effect index {} outside 1..={}", e.roi, self.g));
        }
        if let Some(e) = self.snp_effects.iter().find(|e| e.snp == 0 || e.snp > self.m) {
            return bad(format!("SNP effect index {} outside 1..={}", e.snp, self.m));
        }
        if !(self.prior_variance > 0.0) {
            return bad("prior_variance must be positive".into());
        }
        Ok(())
    }

    /// Sorted 0-based column indices of the non-null ROIs and SNPs.
    pub fn true_sets(&self) -> (Vec<usize>, Vec<usize>) {
        let mut r: Vec<usize> = self.roi_effects.iter().map(|e| e.roi - 1).collect();
        let mut s: Vec<usize> = self.snp_effects.iter().map(|e| e.snp - 1).collect();
        r.sort_unstable();
        s.sort_unstable();
        (r, s)
    }

    pub fn roi_labels(&self) -> Vec<String> {
        (1..=self.g).map(|i| format!("roi_{i}")).collect()
    }

    pub fn snp_labels(&self) -> Vec<String> {
        (1..=self.m).map(|i| format!("snp_{i}")).collect()
    }
}

/// `n × g` draws from `N(roi_mean, roi_covariance)`.
pub fn simulate_rois<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<DenseMatrix> {
    let (n, g) = (scenario.n, scenario.g);
    let mut out = DenseMatrix::zeros(n, g);
    match &scenario.roi_covariance {
        RoiCovariance::Identity => {
            for i in 0..n {
                for j in 0..g {
                    out[(i, j)] = scenario.roi_mean[j] + standard_normal(rng);
                }
            }
        }
        RoiCovariance::Full { rows } => {
            let chol = Cholesky::factor(&DenseMatrix::from_rows(rows)?)?;
            let l = chol.lower();
            for i in 0..n {
                let u: Vec<f64> = (0..g).map(|_| standard_normal(rng)).collect();
                for j in 0..g {
                    out[(i, j)] = scenario.roi_mean[j] + (0..=j).map(|k| l[(j, k)] * u[k]).sum::<f64>();
                }
            }
        }
    }
    Ok(out)
}

/// `n × m` genotype codes, column `k` drawn from `snp_level_probs[k]`.
pub fn simulate_snps<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(scenario.n, scenario.m);
    for i in 0..scenario.n {
        for (k, p) in scenario.snp_level_probs.iter().enumerate() {
            let u: f64 = rng.random();
            out[(i, k)] = if u < p[0] {
                -1.0
            } else if u < p[0] + p[1] {
                0.0
            } else {
                1.0
            };
        }
    }
    out
}

/// Outcomes from the probit model at the true coefficients; returns `(y, y*)`.
pub fn simulate_outcomes<R: Rng + ?Sized>(
    x: &DenseMatrix,
    z: &DenseMatrix,
    scenario: &Scenario,
    rng: &mut R,
) -> (Vec<u8>, Vec<f64>) {
    let mut ystar = Vec::with_capacity(scenario.n);
    for i in 0..scenario.n {
        let mut eta = scenario.beta0;
        for e in &scenario.roi_effects {
            eta += e.beta * x[(i, e.roi - 1)];
        }
        for e in &scenario.snp_effects {
            let zk = z[(i, e.snp - 1)];
            eta += e.alpha * zk + e.delta * (1.0 - zk.abs());
        }
        ystar.push(eta + standard_normal(rng));
    }
    let y = ystar.iter().map(|&v| u8::from(v > 0.0)).collect();
    (y, ystar)
}

/// Simulated dataset (raw, unstandardized) plus the true latent outcomes.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: Dataset,
    pub ystar: Vec<f64>,
    pub x: DenseMatrix,
    pub z: DenseMatrix,
}

/// Draws ROIs, SNPs and outcomes in that order from `scenario.seed`.
pub fn simulate(scenario: &Scenario) -> Result<Simulated> {
    scenario.validate()?;
    let mut rng = SeededRng::new(scenario.seed);
    let x = simulate_rois(scenario, &mut rng)?;
    let z = simulate_snps(scenario, &mut rng);
    let (y, ystar) = simulate_outcomes(&x, &z, scenario, &mut rng);
    let data = Dataset::new(y, &x, &z, scenario.roi_labels(), scenario.snp_labels())?;
    Ok(Simulated { data, ystar, x, z })
}

const JOINT_SNPS: [(usize, f64, f64); 4] = [(1, 1.3, -1.2), (2, -1.0, -1.0), (3, 1.5, -1.3), (4, 1.0, -2.0)];

/// The simulation designs: joint ROI+SNP, ROI-only and SNP-only settings.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let mut v = vec![
        Scenario::standard("joint-210", 210, 116, 81, 25.0, 1.0)
            .with_rois(&[(1, 1.3), (3, 1.5), (115, 1.0)])
            .with_snps(&JOINT_SNPS),
    ];
    for (g, third) in [(300, 299), (500, 499), (1000, 999)] {
        v.push(
            Scenario::standard(&format!("joint-{g}"), 300, g, g, 25.0, 1.0)
                .with_rois(&[(1, 1.3), (3, 1.5), (third, 1.0)])
                .with_snps(&JOINT_SNPS),
        );
    }
    v.push(Scenario::standard("roi-210", 210, 116, 0, 100.0, 1.0).with_rois(&[(1, -2.0), (3, -2.5), (115, 3.0)]));
    v.push(Scenario::standard("roi-300", 300, 300, 0, 100.0, 1.0).with_rois(&[(1, -1.0), (3, -1.5), (299, 2.0)]));
    v.push(
        Scenario::standard("roi-500", 300, 500, 0, 100.0, 1.0)
            .with_rois(&[(1, -1.0), (3, 0.8), (4, -1.5), (486, 0.007), (499, 2.0)]),
    );
    v.push(
        Scenario::standard("roi-1000", 300, 1000, 0, 100.0, 1.0)
            .with_rois(&[(1, 1.2), (2, 0.8), (3, -1.5), (4, -1.0), (1000, 2.3)]),
    );
    v.push(
        Scenario::standard("snp-210", 210, 0, 81, 100.0, 1.7)
            .with_snps(&[(1, 1.3, -1.0), (2, 1.0, -1.4), (3, -1.5, -1.4), (4, -1.2, -2.0)]),
    );
    v.push(
        Scenario::standard("snp-300", 300, 0, 300, 100.0, 2.0)
            .with_snps(&[(1, 1.3, -1.0), (2, 1.2, -1.4), (3, -1.0, -1.5), (4, -1.5, -2.0)]),
    );
    for m in [500, 1000] {
        v.push(
            Scenario::standard(&format!("snp-{m}"), 300, 0, m, 100.0, 1.3)
                .with_snps(&[(1, 1.3, -1.0), (2, 1.2, -1.4), (3, -1.0, -1.5), (4, -0.5, -2.0)]),
        );
    }
    v
}

pub fn builtin_scenario(name: &str) -> Result<Scenario> {
    builtin_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownScenario(name.to_string()))
}
