//! Acceptance criteria 1–11, run in order with one PASS/FAIL line each.
//!
//! Studies run on the default desk-scale cohort (10 subjects × 14 days,
//! 20 replications, seed 0).

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use ema_rl::agent::{
    compute_reward, train_offline, uncertainty_reward, Action, Agent, AgentConfig, AgentState, EpsilonSchedule,
    DEFAULT_WIDTHS,
};
use ema_rl::dsp::{analytic_bandpass_gain, design_bandpass, FilterSpec};
use ema_rl::error::Error;
use ema_rl::features::{extract_hrv_features, FeatureSet};
use ema_rl::harness::{
    answers_from_log, featurize_cohort, online_report, personalization_study, replay_offline, run_offline_study,
    run_online_study, study_labels, DecisionRecord, ExperimentConfig, LabelSource, OfflineRun, OnlineRun,
    SubjectData, PHASE2_STUDY,
};
use ema_rl::policies::{PolicyKind, DAILY_CAP};
use ema_rl::rng;
use ema_rl::sim::synth_cohort;
use ema_rl::storage::{
    cohort_records, load_agent, load_classifier, read_dataset, save_agent, save_classifier, write_dataset,
    write_metrics,
};
use rand::Rng as _;

const FILTER_GAIN_TOL: f64 = 0.05;
const STOPBAND_RATIO: f64 = 10.0;
const HRV_REL_TOL: f64 = 1e-9;
const GRAD_REL_TOL: f64 = 1e-4;
const BELLMAN_TOL: f64 = 0.05;
const MIN_REDUCTION_VS_RANDOM: f64 = 0.30;
const HOMOGENEOUS_AUC_BAND: f64 = 0.02;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn c1_dsp() -> Outcome {
    let start = Instant::now();
    let spec = FilterSpec::default();
    let f = design_bandpass(&spec).map_err(|e| e.to_string())?;
    let fs = spec.sample_rate;
    let pass = steady_state_amplitude(&f, 2.0, fs, 120.0, 60.0);
    let analytic = analytic_bandpass_gain(&spec, 2.0);
    let drift = steady_state_amplitude(&f, 0.1, fs, 600.0, 200.0);
    let noise = steady_state_amplitude(&f, 8.0, fs, 120.0, 60.0);
    let elapsed = start.elapsed();
    let gain_err = rel_err(pass, analytic);
    check(
        gain_err <= FILTER_GAIN_TOL
            && pass >= STOPBAND_RATIO * drift
            && pass >= STOPBAND_RATIO * noise
            && within(elapsed, 1.0),
        format!(
            "2 Hz gain {pass:.4} vs analytic {analytic:.4} (err {gain_err:.2e}); passband/0.1 Hz {:.0}x, passband/8 Hz {:.0}x; {:.3}s",
            pass / drift,
            pass / noise,
            elapsed.as_secs_f64()
        ),
    )
}

fn c2_hrv() -> Outcome {
    let mut r = rng::stream(2, "acceptance-hrv");
    let mut worst = 0.0f64;
    let mut prop_failures = 0;
    for _ in 0..100 {
        let iv = random_nn(&mut r);
        let got = extract_hrv_features(&nn(&iv)).map_err(|e| e.to_string())?.to_array();
        let want = hrv_oracle(&iv);
        for k in 0..12 {
            worst = worst.max(rel_err(got[k], want[k]));
        }
        let a = extract_hrv_features(&nn(&iv)).unwrap();
        let c = r.random_range(-200.0..400.0);
        let shifted: Vec<f64> = iv.iter().map(|x| x + c).collect();
        let b = extract_hrv_features(&nn(&shifted)).unwrap();
        let same = |x: f64, y: f64| (x - y).abs() <= HRV_REL_TOL * x.abs().max(y.abs()).max(1.0);
        let shift_ok = [
            (a.sdnn, b.sdnn),
            (a.sdsd, b.sdsd),
            (a.rmssd, b.rmssd),
            (a.pnn20, b.pnn20),
            (a.pnn50, b.pnn50),
            (a.hr_mad, b.hr_mad),
            (a.sd1, b.sd1),
        ]
        .iter()
        .all(|&(x, y)| same(x, y));
        let k = r.random_range(0.5..2.0);
        let scaled: Vec<f64> = iv.iter().map(|x| x * k).collect();
        let s = extract_hrv_features(&nn(&scaled)).unwrap();
        let scale_ok = [(a.sdnn, s.sdnn), (a.sdsd, s.sdsd), (a.rmssd, s.rmssd), (a.hr_mad, s.hr_mad), (a.sd1, s.sd1), (a.sd2, s.sd2)]
            .iter()
            .all(|&(x, y)| same(x * k, y))
            && same(a.s * k * k, s.s);
        if !(shift_ok && scale_ok) {
            prop_failures += 1;
        }
    }
    check(
        worst <= HRV_REL_TOL && prop_failures == 0,
        format!("100 series, worst relative error {worst:.2e}; shift/scale violations {prop_failures}"),
    )
}

fn c3_gradient() -> Outcome {
    let worst = (0..3).map(|seed| gradient_check(&DEFAULT_WIDTHS, seed)).fold(0.0, f64::max);
    check(
        worst < GRAD_REL_TOL,
        format!("network {DEFAULT_WIDTHS:?} with L1+L2, 3 seeds, worst relative error {worst:.2e}"),
    )
}

fn c4_bellman() -> Outcome {
    let start = Instant::now();
    let gamma = 0.5;
    let q_star = value_iteration(gamma);
    let config = AgentConfig {
        gamma,
        epsilon: EpsilonSchedule::constant(1.0),
        ..AgentConfig::default().with_total_steps(20_000)
    };
    let mut agent = Agent::new(config).map_err(|e| e.to_string())?;
    train_offline(&mut agent, &mut TwoState { at_b: false }, 20_000).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut optimal = true;
    for b in [false, true] {
        let q = agent.q_values(&toy_state(b)).unwrap();
        let exact = q_star[usize::from(b)];
        for a in 0..2 {
            worst = worst.max((q[a] - exact[a]).abs());
        }
        let best = if exact[1] > exact[0] { Action::Query } else { Action::NoQuery };
        optimal &= agent.greedy(&toy_state(b)).unwrap() == best;
    }
    let elapsed = start.elapsed();
    check(
        worst <= BELLMAN_TOL && optimal && within(elapsed, 60.0),
        format!("max |Q - Q*| {worst:.4}; greedy optimal {optimal}; {:.1}s", elapsed.as_secs_f64()),
    )
}

fn c5_reward() -> Outcome {
    let mut r = rng::stream(5, "acceptance-reward");
    let state = |r: &mut rng::Rng| AgentState::new(r.random(), r.random(), r.random(), r.random()).unwrap();
    let (mut sum_violations, mut monotone_violations, mut comparisons) = (0, 0, 0);
    for _ in 0..1000 {
        let s = state(&mut r);
        if compute_reward(&s, Action::Query) + compute_reward(&s, Action::NoQuery) != 3.0 {
            sum_violations += 1;
        }
        let other = state(&mut r);
        for c in 0..3 {
            let (a, b) = (s.to_input()[c], other.to_input()[c]);
            if a == b {
                continue;
            }
            let mut lo = s.to_input();
            let mut hi = s.to_input();
            lo[c] = a.min(b);
            hi[c] = a.max(b);
            let lo = AgentState::new(lo[0], lo[1], lo[2], lo[3]).unwrap();
            let hi = AgentState::new(hi[0], hi[1], hi[2], hi[3]).unwrap();
            comparisons += 1;
            if compute_reward(&hi, Action::Query) <= compute_reward(&lo, Action::Query) {
                monotone_violations += 1;
            }
        }
    }
    let r0 = uncertainty_reward(0.5);
    check(
        sum_violations == 0 && monotone_violations == 0 && r0 == 0.5,
        format!(
            "1000 states: sum != 3 in {sum_violations}; r0(0.5) = {r0}; monotonicity violations {monotone_violations}/{comparisons}"
        ),
    )
}

fn c6_trigger() -> Outcome {
    let a = audit_statistical_trigger(6, 2000);
    check(
        a.warmup_samples == 100
            && a.warmup_queries == 0
            && a.mismatches == 0
            && a.below_floor == 0
            && a.quota_nonzero == 0
            && a.regions_at_quota > 0,
        format!(
            "warm-up queries {}/{}; probability mismatches vs recount {}/{}; below 0.1 {}; nonzero at quota {}; regions at quota {}",
            a.warmup_queries, a.warmup_samples, a.mismatches, a.decisions, a.below_floor, a.quota_nonzero, a.regions_at_quota
        ),
    )
}

fn c7_offline(run: &OfflineRun, elapsed: Duration) -> Outcome {
    let r = &run.report;
    let level = r.target_recall;
    let get = |p| r.needed(p, level).ok_or_else(|| format!("no {p:?} entry at level {level}"));
    let (ctx, rnd, trad) = (get(PolicyKind::ContextAwareAl)?, get(PolicyKind::Random)?, get(PolicyKind::TraditionalAl)?);
    let reached = |q: &ema_rl::harness::QueriesNeeded| q.per_replication.iter().filter(|n| n.is_some()).count();
    let reduction = 1.0 - ctx.censored_mean / rnd.censored_mean;
    check(
        reduction >= MIN_REDUCTION_VS_RANDOM && ctx.censored_mean <= trad.censored_mean && within(elapsed, 600.0),
        format!(
            "target recall {level:.3} (baseline {:.3}, all labels {:.3}); queries (mean, unreached counted at final budget): context-aware {:.1} [{}/20 reached], random {:.1} [{}/20], traditional {:.1} [{}/20]; reduction vs random {:.0}%; {:.0}s",
            r.baseline_recall,
            r.full_recall,
            ctx.censored_mean,
            reached(ctx),
            rnd.censored_mean,
            reached(rnd),
            trad.censored_mean,
            reached(trad),
            100.0 * reduction,
            elapsed.as_secs_f64()
        ),
    )
}

fn c8_online(run: &OnlineRun) -> Outcome {
    let f1 = |c: &str, s: FeatureSet| run.report.get(c, s).map(|m| m.cv.mean.f1).ok_or(format!("missing {c}"));
    let online_ctx = f1("online", FeatureSet::PpgContext)?;
    let online_ppg = f1("online", FeatureSet::PpgOnly)?;
    let stat_ctx = f1("offline-collection", FeatureSet::PpgContext)?;
    let stat_ppg = f1("offline-collection", FeatureSet::PpgOnly)?;
    check(
        online_ctx > stat_ctx && online_ctx >= online_ppg && stat_ctx >= stat_ppg,
        format!(
            "mean F1 (4-fold): online ppg+context {online_ctx:.3} vs statistical ppg+context {stat_ctx:.3}; ppg-only online {online_ppg:.3}, statistical {stat_ppg:.3}"
        ),
    )
}

fn c9_personalization(config: &ExperimentConfig, subjects: &[SubjectData]) -> Outcome {
    let labels = study_labels(subjects, LabelSource::Oracle, None).map_err(|e| e.to_string())?;
    let het = personalization_study(subjects, config, &labels).map_err(|e| e.to_string())?;
    let mut homo_config = config.clone();
    homo_config.cohort.homogeneous = true;
    let homo_subjects = cohort(&homo_config);
    let homo_labels = study_labels(&homo_subjects, LabelSource::Oracle, None).map_err(|e| e.to_string())?;
    let homo = personalization_study(&homo_subjects, &homo_config, &homo_labels).map_err(|e| e.to_string())?;
    check(
        het.personalized_auc() > het.plain_auc() && homo.auc_gap().abs() <= HOMOGENEOUS_AUC_BAND,
        format!(
            "heterogeneous pooled AUC personalized {:.4} vs plain {:.4}; homogeneous gap {:+.4}",
            het.personalized_auc(),
            het.plain_auc(),
            homo.auc_gap()
        ),
    )
}

fn max_daily(log: &[DecisionRecord]) -> u32 {
    let mut m: BTreeMap<(&str, u32, &str, PolicyKind, i64), u32> = BTreeMap::new();
    for r in log.iter().filter(|r| r.decision.is_query()) {
        *m.entry((&r.study, r.replication, &r.subject_id, r.policy, r.timestamp.day())).or_insert(0) += 1;
    }
    m.values().copied().max().unwrap_or(0)
}

fn metrics_bytes(rows: &[ema_rl::harness::MetricRow]) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.csv");
    write_metrics(&p, rows).unwrap();
    fs::read(p).unwrap()
}

fn c10_invariants(
    config: &ExperimentConfig,
    subjects: &[SubjectData],
    offline: &OfflineRun,
    online: &OnlineRun,
) -> Outcome {
    let cap = max_daily(&offline.log).max(max_daily(&online.log));
    let mut per_step: BTreeMap<(u32, u32), BTreeMap<PolicyKind, usize>> = BTreeMap::new();
    for r in offline.log.iter().filter(|r| r.study == PHASE2_STUDY) {
        *per_step.entry((r.replication, r.step.unwrap_or(0))).or_default().entry(r.policy).or_insert(0) += 1;
    }
    let unequal = per_step
        .values()
        .filter(|c| c.len() != config.policies.len() || c.values().any(|n| Some(n) != c.values().next()))
        .count();
    let off = replay_offline(subjects, config, &offline.log).map_err(|e| e.to_string())?;
    let on = online_report(subjects, config, &online.log).map_err(|e| e.to_string())?;
    let off_exact = off == offline.report && metrics_bytes(&off.metric_rows()) == metrics_bytes(&offline.report.metric_rows());
    let on_exact = on == online.report && metrics_bytes(&on.metric_rows()) == metrics_bytes(&online.report.metric_rows());
    check(
        cap <= DAILY_CAP && unequal == 0 && off_exact && on_exact,
        format!(
            "max prompts per subject-day {cap}; steps with unequal budgets {unequal}/{}; offline replay exact {off_exact}; online replay exact {on_exact}",
            per_step.len()
        ),
    )
}

fn c11_persistence(subjects: &[SubjectData], online: &OnlineRun) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let model = &online.models[0];
    let mpath = dir.path().join("detector.emrl");
    save_classifier(&mpath, model, None).map_err(|e| e.to_string())?;
    let loaded = load_classifier(&mpath, Some(&model.signature)).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<f64>> = subjects[0].valid().take(100).map(|(_, f)| f.values(FeatureSet::PpgContext)).collect();
    let predictions_exact = rows
        .iter()
        .all(|r| model.predict_proba_row(r).unwrap().to_bits() == loaded.predict_proba_row(r).unwrap().to_bits());

    let apath = dir.path().join("agent.emrl");
    save_agent(&apath, &online.agent, None).map_err(|e| e.to_string())?;
    let agent = load_agent(&apath).map_err(|e| e.to_string())?;
    let mut r = rng::stream(11, "acceptance-states");
    let decisions_exact = agent == online.agent
        && (0..100).all(|_| {
            let s = AgentState::new(r.random(), r.random(), r.random(), r.random()).unwrap();
            agent.greedy(&s).unwrap() == online.agent.greedy(&s).unwrap()
                && agent.q_values(&s).unwrap().map(f64::to_bits) == online.agent.q_values(&s).unwrap().map(f64::to_bits)
        });

    let answers = answers_from_log(online.log.iter().filter(|r| r.subject_id == subjects[0].subject_id()));
    let records = cohort_records(&subjects[0], &answers, true).map_err(|e| e.to_string())?;
    let dpath = dir.path().join("s.jsonl");
    write_dataset(&records, &dpath).map_err(|e| e.to_string())?;
    let dataset_lossless = read_dataset(&dpath).map_err(|e| e.to_string())? == records;

    let bytes = fs::read(&mpath).unwrap();
    let mut flipped = bytes.clone();
    flipped[bytes.len() / 3] ^= 0x10;
    fs::write(&mpath, &flipped).unwrap();
    let corrupt = matches!(load_classifier(&mpath, None), Err(Error::Corruption(_)));
    fs::write(&mpath, &bytes).unwrap();
    let incompatible = matches!(
        load_classifier(&mpath, Some(&FeatureSet::PpgOnly.signature())),
        Err(Error::Compatibility(_))
    );
    let text = fs::read_to_string(&dpath).unwrap();
    fs::write(&dpath, &text[..text.len() - 7]).unwrap();
    let truncated = matches!(read_dataset(&dpath), Err(Error::Parse { line, .. }) if line == records.len());
    fs::write(&dpath, text.replace("\"schema_version\":1", "\"schema_version\":9")).unwrap();
    let migration = matches!(read_dataset(&dpath), Err(Error::Migration { found: 9, .. }));
    check(
        predictions_exact && decisions_exact && dataset_lossless && corrupt && incompatible && truncated && migration,
        format!(
            "predictions exact {predictions_exact}; agent decisions exact {decisions_exact}; {} dataset records lossless {dataset_lossless}; flipped byte -> corruption {corrupt}; wrong schema -> compatibility {incompatible}; truncated -> line error {truncated}; future version -> migration {migration}",
            records.len()
        ),
    )
}

fn cohort(config: &ExperimentConfig) -> Vec<SubjectData> {
    featurize_cohort(&synth_cohort(&config.cohort).unwrap(), &config.conditioning).unwrap()
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    })
}

fn main() {
    let config = ExperimentConfig::default();
    assert_eq!((config.cohort.subjects, config.cohort.days, config.replications), (10, 14, 20));
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "DSP contract", guarded(c1_dsp)),
        (2, "HRV oracle", guarded(c2_hrv)),
        (3, "gradient check", guarded(c3_gradient)),
        (4, "Bellman convergence", guarded(c4_bellman)),
        (5, "reward algebra", guarded(c5_reward)),
        (6, "statistical trigger", guarded(c6_trigger)),
    ];

    let subjects = cohort(&config);
    let start = Instant::now();
    let offline = run_offline_study(&subjects, &config);
    let offline_elapsed = start.elapsed();
    let online = run_online_study(&subjects, &config);
    results.push((
        7,
        "offline queries to target",
        match &offline {
            Ok(run) => guarded(|| c7_offline(run, offline_elapsed)),
            Err(e) => Err(e.to_string()),
        },
    ));
    results.push((
        8,
        "online collection F1",
        match &online {
            Ok(run) => guarded(|| c8_online(run)),
            Err(e) => Err(e.to_string()),
        },
    ));
    results.push((9, "personalization AUC", guarded(|| c9_personalization(&config, &subjects))));
    results.push((
        10,
        "budget, cap and replay",
        match (&offline, &online) {
            (Ok(off), Ok(on)) => guarded(|| c10_invariants(&config, &subjects, off, on)),
            _ => Err("a study failed to run".into()),
        },
    ));
    results.push((
        11,
        "persistence",
        match &online {
            Ok(on) => guarded(|| c11_persistence(&subjects, on)),
            Err(e) => Err(e.to_string()),
        },
    ));

    let mut failed = Vec::new();
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                println!("criterion {n:>2} FAIL  {name}: {detail}");
                failed.push(*n);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all 11 criteria pass");
}
