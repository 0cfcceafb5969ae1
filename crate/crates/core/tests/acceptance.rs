//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.
//!
//! Run with `cargo test -p ddrj --test acceptance`.

use std::cell::OnceCell;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use ddrj::datagen::{builtin_scenario, simulate, RoiEffect, Scenario, SnpEffect};
use ddrj::inference::{cross_validate, summarize, PosteriorSummary, Term};
use ddrj::model::{
    coefficient_log_density, full_conditional_alpha, full_conditional_beta, full_conditional_delta,
    gibbs_update_latent, residuals, Dataset, Hyperparams, ModelSignature, ModelState,
};
use ddrj::numerics::{
    kruskal_wallis, pearson_correlation, sample_truncated_normal, GaussianConditional, SeededRng, Truncation,
};
use ddrj::proposals::{inactive, move_kind_probs, MoveKind, ProposalKernel, ProposalMode, Space};
use ddrj::sampler::{fit, log_acceptance, move_choice, propose_birth, propose_death, run_chain, RunConfig};
use rand::Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn ln_choose(n: usize, k: usize) -> f64 {
    let f = |x: usize| libm::lgamma(x as f64 + 1.0);
    f(n) - f(k) - f(n - k)
}

struct Run {
    scenario: Scenario,
    data: Dataset,
    summary: PosteriorSummary,
}

fn run(name: &str, seed: u64, mode: ProposalMode, preselect: Option<f64>) -> Run {
    let mut scenario = builtin_scenario(name).unwrap();
    scenario.seed = seed;
    let data = simulate(&scenario).unwrap().data.standardized();
    let config = RunConfig {
        seed,
        mode,
        preselect_threshold: preselect,
        ..RunConfig::default()
    };
    let hyper = Hyperparams::uniform(scenario.prior_variance).unwrap();
    let fitted = fit(&data, &hyper, &config).unwrap();
    let summary = summarize(&fitted.traces, &data).unwrap();
    Run { scenario, data, summary }
}

fn true_signature(s: &Scenario) -> ModelSignature {
    let (r, k) = s.true_sets();
    ModelSignature::new(r, k)
}

fn describe(sig: &ModelSignature, data: &Dataset) -> String {
    let r: Vec<&str> = sig.rois.iter().map(|&j| data.roi_names()[j].as_str()).collect();
    let s: Vec<&str> = sig.snps.iter().map(|&k| data.snp_names()[k].as_str()).collect();
    format!("{{{}}}", r.into_iter().chain(s).collect::<Vec<_>>().join(","))
}

fn criterion_1(r: &Run) -> Outcome {
    let s = &r.summary;
    let (true_rois, true_snps) = r.scenario.true_sets();
    let mut problems = Vec::new();
    let mut min_true: f64 = 1.0;
    for (j, &p) in s.mppi_roi.iter().enumerate() {
        if true_rois.contains(&j) {
            min_true = min_true.min(p);
            if p < 0.95 {
                problems.push(format!("{} mppi {p:.3}", s.roi_labels[j]));
            }
        } else if p > 0.5 {
            problems.push(format!("null {} mppi {p:.3}", s.roi_labels[j]));
        }
    }
    for (k, &p) in s.mppi_snp.iter().enumerate() {
        if true_snps.contains(&k) {
            min_true = min_true.min(p);
            if p < 0.95 {
                problems.push(format!("{} mppi {p:.3}", s.snp_labels[k]));
            }
        } else if p > 0.5 {
            problems.push(format!("null {} mppi {p:.3}", s.snp_labels[k]));
        }
    }

    let mut truth = vec![("intercept".to_string(), Term::Intercept, r.scenario.beta0)];
    for e in &r.scenario.roi_effects {
        truth.push((s.roi_labels[e.roi - 1].clone(), Term::Beta, e.beta));
    }
    for e in &r.scenario.snp_effects {
        truth.push((s.snp_labels[e.snp - 1].clone(), Term::Alpha, e.alpha));
        truth.push((s.snp_labels[e.snp - 1].clone(), Term::Delta, e.delta));
    }
    let mut worst: f64 = 0.0;
    for (label, term, value) in truth {
        let t = s.term(&label, term).unwrap();
        let z = (t.mean - value).abs() / t.sd;
        worst = worst.max(z);
        if !(z <= 3.0) {
            problems.push(format!("{label}.{} {:.3} ± {:.3} vs {value}", term.as_str(), t.mean, t.sd));
        }
    }
    check(
        problems.is_empty(),
        format!("min true mppi {min_true:.3}, worst |z| {worst:.2}; {}", problems.join("; ")),
    )
}

fn criterion_2(runs: &[&Vec<Run>]) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for per_seed in runs {
        let mut passed = 0;
        let mut notes = Vec::new();
        for r in per_seed.iter() {
            let truth = true_signature(&r.scenario);
            let modal = r.summary.modal();
            let needs_mass = r.scenario.name == "joint-210";
            let hit = modal.signature == truth && (!needs_mass || modal.probability >= 0.5);
            passed += usize::from(hit);
            notes.push(format!(
                "seed {}: modal {} p={:.3}, true p={:.3}",
                r.scenario.seed,
                if modal.signature == truth { "=true".to_string() } else { describe(&modal.signature, &r.data) },
                modal.probability,
                r.summary.probability_of(&truth)
            ));
        }
        ok &= passed >= 2;
        lines.push(format!("{} {passed}/3 [{}]", per_seed[0].scenario.name, notes.join("; ")));
    }
    check(ok, lines.join(" | "))
}

fn criterion_3(ddrj: &Run, rj: &Run) -> Outcome {
    let (a, b) = (ddrj.summary.modal(), rj.summary.modal());
    let truth = true_signature(&ddrj.scenario);
    check(
        a.signature == b.signature,
        format!(
            "DDRJ modal {} p={:.3} (true p={:.3}); RJ modal {} p={:.3} (true p={:.3})",
            describe(&a.signature, &ddrj.data),
            a.probability,
            ddrj.summary.probability_of(&truth),
            describe(&b.signature, &rj.data),
            b.probability,
            rj.summary.probability_of(&truth)
        ),
    )
}

fn criterion_4() -> Outcome {
    let s = builtin_scenario("joint-210").unwrap();
    let data = simulate(&s).unwrap().data;
    let hyper = Hyperparams::uniform(s.prior_variance).unwrap();
    let report = cross_validate(&data, &hyper, &RunConfig::default(), 5).unwrap();
    check(
        (0.78..=0.98).contains(&report.auc_mean) && (0.09..=0.30).contains(&report.mce_mean),
        format!(
            "AUC {:.3} ± {:.3}, MCE {:.3} ± {:.3}",
            report.auc_mean, report.auc_sd, report.mce_mean, report.mce_sd
        ),
    )
}

/// Model posterior over all subsets of `k` covariates, by prior Monte Carlo
/// of each marginal likelihood with the latent integrated out.
fn enumerate_posterior(data: &Dataset, snp: bool, var: f64, draws: usize, seed: u64) -> Vec<f64> {
    let k = if snp { data.m() } else { data.g() };
    let sd = var.sqrt();
    let mut rng = SeededRng::new(seed);
    let mut log_post = Vec::new();
    for mask in 0..1usize << k {
        let cols: Vec<usize> = (0..k).filter(|j| mask >> j & 1 == 1).collect();
        let mut lls = Vec::with_capacity(draws);
        for _ in 0..draws {
            let b0 = sd * rng.sample::<f64, _>(StandardNormal);
            let coef: Vec<(f64, f64)> = cols
                .iter()
                .map(|_| {
                    let a = sd * rng.sample::<f64, _>(StandardNormal);
                    let d = if snp { sd * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
                    (a, d)
                })
                .collect();
            let mut ll = 0.0;
            for i in 0..data.n() {
                let mut eta = b0;
                for (&j, &(a, d)) in cols.iter().zip(&coef) {
                    if snp {
                        let z = f64::from(data.snp_levels(j)[i]);
                        eta += a * z + d * (1.0 - z.abs());
                    } else {
                        eta += a * data.roi_column(j)[i];
                    }
                }
                let p = if data.y()[i] == 1 { phi(eta) } else { phi(-eta) };
                ll += p.max(1e-300).ln();
            }
            lls.push(ll);
        }
        let top = lls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lml = top + (lls.iter().map(|v| (v - top).exp()).sum::<f64>() / draws as f64).ln();
        // uniform over sizes, uniform within a size
        let prior = -((k + 1) as f64).ln() - ln_choose(k, cols.len());
        log_post.push(lml + prior);
    }
    let top = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = log_post.iter().map(|v| (v - top).exp()).sum();
    log_post.iter().map(|v| (v - top).exp() / z).collect()
}

fn oracle_tv(data: &Dataset, snp: bool) -> (f64, Vec<f64>, Vec<f64>) {
    let var = 25.0;
    let post = enumerate_posterior(data, snp, var, 1_000_000, 77);
    let config = RunConfig {
        iterations: 200_000,
        burn_in: 1_000,
        thin: 1,
        seed: 5,
        ..RunConfig::default()
    };
    let trace = run_chain(data, &Hyperparams::uniform(var).unwrap(), &config, 0).unwrap();
    let mut freq = vec![0.0; post.len()];
    for s in &trace.samples {
        let set = if snp { &s.active_snps } else { &s.active_rois };
        freq[set.iter().map(|j| 1usize << j).sum::<usize>()] += 1.0 / trace.samples.len() as f64;
    }
    let tv = post.iter().zip(&freq).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
    (tv, post, freq)
}

fn criterion_5() -> Outcome {
    let mut roi = Scenario::standard("oracle-roi", 60, 3, 0, 25.0, 0.0);
    roi.roi_effects = vec![RoiEffect { roi: 1, beta: 2.0 }];
    roi.seed = 3;
    let mut snp = Scenario::standard("oracle-snp", 60, 0, 2, 25.0, 0.0);
    snp.snp_effects = vec![SnpEffect { snp: 1, alpha: 1.0, delta: -1.0 }];
    snp.seed = 3;
    let (tv_r, post_r, freq_r) = oracle_tv(&simulate(&roi).unwrap().data.standardized(), false);
    let (tv_s, post_s, freq_s) = oracle_tv(&simulate(&snp).unwrap().data.standardized(), true);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    check(
        tv_r < 0.05 && tv_s < 0.05,
        format!(
            "ROI TV {tv_r:.4} (exact {} / chain {}); SNP TV {tv_s:.4} (exact {} / chain {})",
            fmt(&post_r),
            fmt(&freq_r),
            fmt(&post_s),
            fmt(&freq_s)
        ),
    )
}

fn random_dataset(rng: &mut SeededRng) -> Dataset {
    let n = rng.random_range(15..50);
    let g = rng.random_range(1..6);
    let m = rng.random_range(1..5);
    let x: Vec<Vec<f64>> = (0..g).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let mut z: Vec<Vec<i8>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-1..=1)).collect()).collect();
    for col in &mut z {
        // every level present so no column is degenerate
        col[..3].copy_from_slice(&[-1, 0, 1]);
    }
    let mut y: Vec<u8> = (0..n).map(|i| u8::from(x[0][i] + rng.random_range(-1.0..1.0) > 0.0)).collect();
    y[0] = 0;
    y[1] = 1;
    let rn = (0..g).map(|j| format!("roi_{}", j + 1)).collect();
    let sn = (0..m).map(|k| format!("snp_{}", k + 1)).collect();
    Dataset::from_columns(y, x, z, rn, sn).unwrap().standardized()
}

fn random_subset(rng: &mut SeededRng, n: usize, max: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
    v.truncate(max);
    v
}

fn random_state(data: &Dataset, rng: &mut SeededRng, rois: Vec<usize>, snps: Vec<usize>) -> ModelState {
    let mut s = ModelState::initial(data);
    s.beta = (0..=rois.len()).map(|_| rng.random_range(-1.5..1.5)).collect();
    s.alpha = (0..snps.len()).map(|_| rng.random_range(-1.5..1.5)).collect();
    s.delta = (0..snps.len()).map(|_| rng.random_range(-1.5..1.5)).collect();
    s.active_rois = rois;
    s.active_snps = snps;
    gibbs_update_latent(&mut s, data, rng).unwrap();
    s
}

/// log Aᵇ for a birth of `j` plus log Aᵈ for the death that returns exactly
/// to the starting state.
fn reciprocity_gap(data: &Dataset, state: &ModelState, space: Space, j: usize, mode: ProposalMode, rng: &mut SeededRng) -> f64 {
    let h = Hyperparams::default();
    let kernel = ProposalKernel::new(data, mode);
    let birth = move_choice(&kernel, state, data, space, MoveKind::Birth, j).unwrap();
    let pb = propose_birth(state, data, &h, &kernel, birth, rng).unwrap();
    let la_b = log_acceptance(state, &pb, data, &h).unwrap();

    let death = move_choice(&kernel, &pb.candidate, data, space, MoveKind::Death, j).unwrap();
    let mut pd = propose_death(&pb.candidate, data, &h, &kernel, death, rng).unwrap();
    pd.candidate = state.clone();
    let (act, max) = match space {
        Space::Roi => (state.num_rois(), data.g()),
        Space::Snp => (state.num_snps(), data.m()),
    };
    let xi = residuals(state, data).unwrap();
    pd.log_forward = death.log_kind_prob
        + death.log_selection_prob
        + coefficient_log_density(
            data,
            &h,
            &state.active_rois,
            &state.active_snps,
            &pb.candidate,
            &state.beta,
            &state.alpha,
            &state.delta,
        )
        .unwrap();
    pd.log_reverse = move_kind_probs(act, max).0.ln()
        + kernel.log_birth_selection(space, &xi, &inactive(space, state, data), j)
        + coefficient_log_density(
            data,
            &h,
            &pb.candidate.active_rois,
            &pb.candidate.active_snps,
            state,
            &pb.candidate.beta,
            &pb.candidate.alpha,
            &pb.candidate.delta,
        )
        .unwrap();
    la_b + log_acceptance(&pb.candidate, &pd, data, &h).unwrap()
}

fn criterion_6() -> Outcome {
    let mut rng = SeededRng::new(606);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let data = random_dataset(&mut rng);
        let space = if rng.random_bool(0.5) { Space::Roi } else { Space::Snp };
        let (g, m) = (data.g(), data.m());
        let (rois, snps) = match space {
            Space::Roi => (random_subset(&mut rng, g, g - 1), random_subset(&mut rng, m, m)),
            Space::Snp => (random_subset(&mut rng, g, g), random_subset(&mut rng, m, m - 1)),
        };
        let state = random_state(&data, &mut rng, rois, snps);
        let free = inactive(space, &state, &data);
        let j = free[rng.random_range(0..free.len())];
        let mode = if rng.random_bool(0.5) { ProposalMode::DataDriven } else { ProposalMode::Uniform };
        let gap = reciprocity_gap(&data, &state, space, j, mode, &mut rng);
        worst = worst.max(gap.abs());
    }
    check(worst <= 1e-10, format!("max |log Ab + log Ad| = {worst:.3e} over 1000 pairs"))
}

/// max |A·mean − Dᵀt| with A = I/var + DᵀD built from the columns directly.
fn normal_equation_residual(cols: &[Vec<f64>], target: &[f64], var: f64, c: &GaussianConditional) -> f64 {
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let mut worst: f64 = 0.0;
    for (i, ci) in cols.iter().enumerate() {
        let a_mean: f64 = cols
            .iter()
            .enumerate()
            .map(|(j, cj)| (dot(ci, cj) + if i == j { 1.0 / var } else { 0.0 }) * c.mean[j])
            .sum();
        worst = worst.max((a_mean - dot(ci, target)).abs());
    }
    worst
}

fn criterion_7() -> Outcome {
    let mut rng = SeededRng::new(707);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let data = random_dataset(&mut rng);
        let rois = random_subset(&mut rng, data.g(), data.g());
        let snps = random_subset(&mut rng, data.m(), data.m());
        let state = random_state(&data, &mut rng, rois, snps);
        let hyper = Hyperparams::new(rng.random_range(0.5..50.0), rng.random_range(0.5..50.0), rng.random_range(0.5..50.0))
            .unwrap();
        let n = data.n();

        let mut x_cols = vec![vec![1.0; n]];
        x_cols.extend(state.active_rois.iter().map(|&j| data.roi_column(j).to_vec()));
        let z_cols: Vec<Vec<f64>> = state
            .active_snps
            .iter()
            .map(|&k| data.snp_levels(k).iter().map(|&v| f64::from(v)).collect())
            .collect();
        let d_cols: Vec<Vec<f64>> = z_cols.iter().map(|z| z.iter().map(|v| 1.0 - v.abs()).collect()).collect();
        let part = |cols: &[Vec<f64>], coef: &[f64]| -> Vec<f64> {
            (0..n).map(|i| cols.iter().zip(coef).map(|(c, b)| c[i] * b).sum()).collect()
        };
        let xb = part(&x_cols, &state.beta);
        let za = part(&z_cols, &state.alpha);
        let dd = part(&d_cols, &state.delta);
        let target = |skip: &[f64], other: &[f64]| -> Vec<f64> {
            (0..n).map(|i| state.latent[i] - skip[i] - other[i]).collect()
        };

        let cb = full_conditional_beta(&state, &data, &hyper).unwrap();
        let ca = full_conditional_alpha(&state, &data, &hyper).unwrap();
        let cd = full_conditional_delta(&state, &data, &hyper).unwrap();
        worst = worst
            .max(normal_equation_residual(&x_cols, &target(&za, &dd), hyper.var_beta, &cb))
            .max(normal_equation_residual(&z_cols, &target(&xb, &dd), hyper.var_alpha, &ca))
            .max(normal_equation_residual(&d_cols, &target(&xb, &za), hyper.var_delta, &cd));
    }
    check(worst <= 1e-10, format!("max normal-equation residual {worst:.3e} over 500 instances"))
}

fn criterion_8() -> Outcome {
    let mut rng = SeededRng::new(808);
    let mut violations = 0usize;
    for i in 0..1_000_000 {
        let mean = rng.random_range(-8.0..8.0);
        let sd = rng.random_range(0.2..3.0);
        let side = if i % 2 == 0 { Truncation::Left0 } else { Truncation::Right0 };
        let v = sample_truncated_normal(mean, sd, side, &mut rng);
        let bad = match side {
            Truncation::Left0 => !(v >= 0.0),
            Truncation::Right0 => !(v <= 0.0),
        };
        violations += usize::from(bad);
    }
    let draws = 1_000_000;
    let half: f64 = (0..draws)
        .map(|_| sample_truncated_normal(0.0, 1.0, Truncation::Left0, &mut rng))
        .sum::<f64>()
        / draws as f64;
    let half_target = (2.0 / std::f64::consts::PI).sqrt();

    let kw = kruskal_wallis(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[-1, -1, 0, 0, 1, 1]).unwrap();
    // 12/(N(N+1)) Σ nᵢ(R̄ᵢ − R̄)² with rank means 1.5, 3.5, 5.5 around 3.5
    let kw_hand = 12.0 / 42.0 * (2.0 * 4.0 + 0.0 + 2.0 * 4.0);
    let r = pearson_correlation(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap();

    let ok = violations == 0 && (half - half_target).abs() <= 0.01 && kw == 5.0 && (r - 0.6).abs() <= 1e-12;
    check(
        ok,
        format!(
            "sign violations {violations}/1000000; half-normal mean {half:.4} vs {half_target:.4}; \
             KW {kw} (required 5.0; rank-sum formula gives {kw_hand}); Pearson {r}"
        ),
    )
}

fn main() -> ExitCode {
    // silence panic backtraces from failing criteria; the FAIL line carries the message
    panic::set_hook(Box::new(|_| {}));
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut record = |name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let out = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match &out {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!("{tag} criterion {name} ({:.0}s): {detail}", t.elapsed().as_secs_f64());
        results.push((name, out));
    };

    // fits are shared between criteria and timed under the first one that needs them
    let seeds = [1u64, 2, 3];
    let fits = |name: &str, pre: Option<f64>| -> Vec<Run> {
        seeds.iter().map(|&s| run(name, s, ProposalMode::DataDriven, pre)).collect()
    };
    let base: OnceCell<Vec<Run>> = OnceCell::new();
    record("1 scenario reproduction", &mut || criterion_1(&base.get_or_init(|| fits("joint-210", None))[0]));
    record("2 true-model recovery", &mut || {
        let mut all = vec![base.get_or_init(|| fits("joint-210", None))];
        let large: Vec<Vec<Run>> = ["joint-300", "joint-500", "joint-1000"]
            .into_iter()
            .map(|name| fits(name, Some(0.1)))
            .collect();
        all.extend(large.iter());
        criterion_2(&all)
    });
    record("3 DDRJ vs uniform RJ", &mut || {
        let rj = run("joint-210", 1, ProposalMode::Uniform, None);
        criterion_3(&base.get_or_init(|| fits("joint-210", None))[0], &rj)
    });
    record("4 predictive metrics", &mut criterion_4);
    record("5 brute-force posterior oracle", &mut criterion_5);
    record("6 reciprocity", &mut criterion_6);
    record("7 conditional algebra", &mut criterion_7);
    record("8 distribution kernels", &mut criterion_8);
    println!("NOTE criterion 9 real-data results: not reproducible without the original dataset; documented, not tested");

    let failed: Vec<&str> = results.iter().filter(|(_, o)| o.is_err()).map(|(n, _)| *n).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" ({})", failed.join(", ")) }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
