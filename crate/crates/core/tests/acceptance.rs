//! Acceptance criteria, run in order with one PASS/FAIL line each.
//!
//! Criteria 1-7 and 10 are exact or tightly bounded properties and fail the
//! test when violated. Criteria 8 and 9 are qualitative patterns measured
//! over ten seeded benchmark runs; their lines report the counts and the
//! test fails only if their hard invariants break.

mod common;

use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use bonus_policy::experiment::{default_lambda, run_experiment, ExperimentConfig, ExperimentReport, ProgramFilter};
use bonus_policy::matching::deferred_acceptance;
use bonus_policy::metrics::{objective, spd};
use bonus_policy::model::{ApplicationSet, BonusPolicy, ProgramId, ProgramRegistry};
use bonus_policy::policy::{optimal_bonus, BonusGrid, Evaluator, Strategy};
use bonus_policy::synthetic::{generate_synthetic_history, GroupSpec, SyntheticConfig, SyntheticHistory};
use common::*;
use rand::Rng;

const ATTRIBUTES: [&str; 2] = ["income", "gender"];
const STRATEGIES: [Strategy; 6] = [
    Strategy::Historical(1),
    Strategy::Historical(3),
    Strategy::Historical(5),
    Strategy::Predictive(50),
    Strategy::Predictive(200),
    Strategy::Ideal,
];

struct Verdict {
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn timed(f: impl FnOnce() -> (bool, String)) -> Verdict {
    let t = Instant::now();
    let (pass, detail) = f();
    Verdict { pass, detail, elapsed: t.elapsed() }
}

fn c1_stability_oracle() -> (bool, String) {
    let t = Instant::now();
    let mut r = rng(101);
    let mut failures = 0;
    let mut several = 0;
    for i in 0..1000 {
        let (reg, apps) = if i % 2 == 0 { random_market(&mut r, 20, 4) } else { contested_market(&mut r) };
        let policy = random_policy(&mut r, &reg);
        let outcome = deferred_acceptance(&apps, &reg, &policy).unwrap();
        let assignment = assignment_of(&outcome, &apps);
        let stable = all_stable_matchings(&apps, &reg, &policy);
        several += (stable.len() > 1) as usize;
        if !blocking_pairs(&apps, &reg, &policy, &assignment).is_empty()
            || student_optimal(&apps, &stable) != Some(assignment)
        {
            failures += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    (
        failures == 0 && several > 0 && secs < 60.0,
        format!("1000 instances ({several} with several stable matchings), {failures} mismatches, {secs:.1}s"),
    )
}

/// Random single-program pool with integer scores.
fn single_program_pool(r: &mut rand_chacha::ChaCha8Rng) -> (ProgramRegistry, ApplicationSet) {
    let reg = registry(&[(0, r.random_range(1..=10), 1.0)]);
    let n = r.random_range(2..=40);
    let students = (0..n)
        .map(|i| student(i, r.random_range(300..=800) as f64, 500.0, r.random_bool(0.5), &[0]))
        .collect();
    let apps = set(students, &reg);
    (reg, apps)
}

fn admitted_at(reg: &ProgramRegistry, apps: &ApplicationSet, bonus: f64) -> Vec<bool> {
    let policy = BonusPolicy::single(ProgramId(0), ATTR, bonus).unwrap();
    let o = deferred_acceptance(apps, reg, &policy).unwrap();
    apps.students().iter().map(|s| o.assigned_to(s.id).is_some()).collect()
}

fn c2_within_group_order() -> (bool, String) {
    let t = Instant::now();
    let mut r = rng(202);
    let mut inversions = 0;
    for _ in 0..200 {
        let (reg, apps) = single_program_pool(&mut r);
        let s = apps.students();
        for &b in BonusGrid::default().values() {
            let adm = admitted_at(&reg, &apps, b);
            for i in 0..s.len() {
                for j in 0..s.len() {
                    let same = s[i].is_protected(ATTR) == s[j].is_protected(ATTR);
                    if same && s[i].grade_score > s[j].grade_score && adm[j] && !adm[i] {
                        inversions += 1;
                    }
                }
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    (inversions == 0 && secs < 60.0, format!("200 instances x 51 bonuses, {inversions} inversions, {secs:.1}s"))
}

fn c3_monotonicity() -> (bool, String) {
    let mut r = rng(303);
    let mut violations = 0;
    for _ in 0..200 {
        let (reg, apps) = single_program_pool(&mut r);
        let mut last = 0;
        for &b in BonusGrid::default().values() {
            let adm = admitted_at(&reg, &apps, b);
            let count = apps.students().iter().zip(&adm).filter(|(s, a)| **a && s.is_protected(ATTR)).count();
            if count < last {
                violations += 1;
            }
            last = count;
        }
    }
    (violations == 0, format!("200 instances, {violations} decreases"))
}

fn c4_objective_identities(bench: &[Run]) -> (bool, String) {
    let mut checked = 0;
    let mut bad = 0;
    for run in bench {
        let realized = run.history.years.last().unwrap();
        let reg = &run.history.registry;
        for attribute in ATTRIBUTES {
            let lambda = default_lambda(attribute).unwrap();
            let evaluator = Evaluator::new(realized, reg, attribute, &BonusGrid::default(), lambda).unwrap();
            let base = deferred_acceptance(realized, reg, &BonusPolicy::empty()).unwrap();
            for p in reg.ids() {
                let direct = objective(&base, &base, realized, reg, p, attribute, lambda).unwrap();
                let searched = evaluator.deploy(p, 0.0).unwrap();
                let spd0 = spd(&base, realized, p, attribute).unwrap();
                if let (Ok(d), Ok(s), Ok(spd0)) = (direct, searched, spd0) {
                    checked += 1;
                    let expect = lambda * spd0.abs();
                    if d.utility_loss != 0.0 || s.objective.utility_loss != 0.0 || d.value != expect || s.objective.value != expect {
                        bad += 1;
                    }
                }
            }
        }
    }
    (bad == 0 && checked > 0, format!("{checked} program runs, {bad} violations"))
}

fn c5_grid_oracle() -> (bool, String) {
    let mut r = rng(505);
    let grid = BonusGrid::default();
    let lambda = 28.0;
    let (mut compared, mut mismatches) = (0, 0);
    while compared < 100 {
        let (reg, apps) = random_market(&mut r, 40, 4);
        let p = ProgramId(r.random_range(0..reg.len() as u32));
        let fast = optimal_bonus(&apps, &reg, p, ATTR, &grid, lambda).unwrap();
        // Independent path: one fresh matching per grid point.
        let base = deferred_acceptance(&apps, &reg, &BonusPolicy::empty()).unwrap();
        let mut best: Option<(f64, f64)> = None;
        for &b in grid.values() {
            let o = deferred_acceptance(&apps, &reg, &BonusPolicy::single(p, ATTR, b).unwrap()).unwrap();
            if let Ok(v) = objective(&o, &base, &apps, &reg, p, ATTR, lambda).unwrap() {
                if best.is_none_or(|(_, cur)| v.value < cur) {
                    best = Some((b, v.value));
                }
            }
        }
        match (fast, best) {
            (Ok(e), Some((b, v))) => {
                compared += 1;
                if e.bonus != b || e.objective.value != v {
                    mismatches += 1;
                }
            }
            (Err(_), None) => {}
            _ => {
                compared += 1;
                mismatches += 1;
            }
        }
    }
    (mismatches == 0, format!("{compared} instances, {mismatches} mismatches"))
}

fn c6_ideal_dominance(bench: &[Run]) -> (bool, String) {
    let mut rows = 0;
    let mut negative = 0;
    let mut worst = 0.0f64;
    for run in bench {
        for report in &run.reports {
            for table in &report.all_programs {
                for e in table.rows.iter().filter_map(|r| r.objective_error) {
                    rows += 1;
                    worst = worst.min(e);
                    if e < 0.0 {
                        negative += 1;
                    }
                }
            }
        }
    }
    (negative == 0, format!("{rows} rows, {negative} negative, minimum {worst}"))
}

fn cli(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_bonus-policy"))
        .current_dir(dir)
        .env_remove("BONUS_POLICY_OUT")
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn c7_determinism() -> (bool, String) {
    let run = |dir: &Path| -> bool {
        fs::write(dir.join("s.json"), r#"{"n_students": 400, "n_programs": 20, "n_years": 4, "seed": 12}"#).unwrap();
        let mut ok = cli(dir, &["generate", "--synthetic", "s.json", "--out", "out"]);
        for s in ["historical-1", "predictive-50", "ideal"] {
            ok &= cli(dir, &["suggest", "--data", "out", "--strategy", s, "--seed", "5", "--out", "out"]);
        }
        ok & cli(dir, &["evaluate", "--data", "out", "--out", "out"])
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    if !(run(a.path()) && run(b.path())) {
        return (false, "a command failed".into());
    }
    let mut names: Vec<String> = fs::read_dir(a.path().join("out"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|n| fs::read(a.path().join("out").join(n)).ok() != fs::read(b.path().join("out").join(n)).ok())
        .collect();
    (differing.is_empty(), format!("{} files compared, differing: {differing:?}", names.len()))
}

/// Benchmark cohort: 40 programs, 5 years, test-score gaps 28 (income) and 23 (gender).
fn benchmark_config(seed: u64) -> SyntheticConfig {
    SyntheticConfig { n_students: 1000, n_programs: 40, n_years: 5, seed, ..Default::default() }
}

struct Run {
    seed: u64,
    history: SyntheticHistory,
    reports: Vec<ExperimentReport>,
}

fn benchmark() -> (Vec<Run>, Duration) {
    let t = Instant::now();
    let runs = (0..10)
        .map(|seed| {
            let history = generate_synthetic_history(&benchmark_config(seed)).unwrap();
            let reports = ATTRIBUTES
                .iter()
                .map(|a| {
                    let mut cfg = ExperimentConfig::new(a, default_lambda(a).unwrap());
                    cfg.seed = seed;
                    run_experiment(&history.years, &history.registry, &STRATEGIES, &cfg).unwrap()
                })
                .collect();
            Run { seed, history, reports }
        })
        .collect();
    (runs, t.elapsed())
}

fn bonus_stats(report: &ExperimentReport, s: Strategy) -> (f64, f64) {
    let b = report.table(s, ProgramFilter::All).unwrap().summary.bonus;
    (b.mean, b.sd)
}

fn c8_bonus_spread_pattern(bench: &[Run], elapsed: Duration) -> (bool, String) {
    let mut detail = Vec::new();
    let mut pass = elapsed.as_secs() < 600;
    for (i, attribute) in ATTRIBUTES.iter().enumerate() {
        let (mut sd_ok, mut mean_ok) = (0, 0);
        let mut means = [0.0; 4];
        for run in bench {
            let r = &run.reports[i];
            let (h1, p50, p200, ideal) = (
                bonus_stats(r, Strategy::Historical(1)),
                bonus_stats(r, Strategy::Predictive(50)),
                bonus_stats(r, Strategy::Predictive(200)),
                bonus_stats(r, Strategy::Ideal),
            );
            sd_ok += (p200.1 <= p50.1 && p50.1 <= h1.1) as usize;
            mean_ok += (ideal.0 >= p200.0) as usize;
            for (m, v) in means.iter_mut().zip([h1.0, p50.0, p200.0, ideal.0]) {
                *m += v / bench.len() as f64;
            }
        }
        pass &= sd_ok >= 8 && mean_ok >= 8;
        detail.push(format!(
            "{attribute}: sd order {sd_ok}/10, ideal>=pred-200 mean {mean_ok}/10 (avg bonus h1 {:.2} p50 {:.2} p200 {:.2} ideal {:.2})",
            means[0], means[1], means[2], means[3]
        ));
    }
    detail.push(format!("{:.0}s", elapsed.as_secs_f64()));
    (pass, detail.join("; "))
}

fn c9_disparity_pattern(bench: &[Run]) -> (bool, String) {
    let mut reduced = 0;
    let mut per_seed = Vec::new();
    for run in bench {
        let deltas: Vec<f64> = run
            .reports
            .iter()
            .flat_map(|r| r.table(Strategy::Predictive(200), ProgramFilter::Consistent).unwrap().rows.iter())
            .filter_map(|row| row.spd_delta)
            .collect();
        let mean = deltas.iter().sum::<f64>() / deltas.len().max(1) as f64;
        reduced += (!deltas.is_empty() && mean <= 0.0) as usize;
        per_seed.push(format!("{}:{mean:+.4}(n{})", run.seed, deltas.len()));
    }
    (reduced >= 7, format!("gap reduced in {reduced}/10 seeds [{}]", per_seed.join(" ")))
}

fn c10_generator_calibration() -> (bool, String) {
    let cfg = SyntheticConfig { n_students: 20_000, n_programs: 10, n_years: 5, seed: 10, ..Default::default() };
    let h = generate_synthetic_history(&cfg).unwrap();
    let (mut p, mut o) = ((0.0, 0usize), (0.0, 0usize));
    for s in h.years.iter().flat_map(|y| y.students()) {
        let t = s.test_scores.values().sum::<f64>() / s.test_scores.len() as f64;
        let slot = if s.is_protected("income") { &mut p } else { &mut o };
        slot.0 += t;
        slot.1 += 1;
    }
    let gap = o.0 / o.1 as f64 - p.0 / p.1 as f64;

    let groups = ATTRIBUTES
        .map(|name| GroupSpec { name: name.into(), protected_share: 0.5, test_gap: 0.0, grade_gap: 0.0 })
        .to_vec();
    let cfg = SyntheticConfig { n_students: 5000, n_programs: 40, n_years: 5, groups, seed: 10, ..Default::default() };
    let h = generate_synthetic_history(&cfg).unwrap();
    let mut spds = Vec::new();
    for set in &h.years {
        let o = deferred_acceptance(set, &h.registry, &BonusPolicy::empty()).unwrap();
        spds.extend(h.registry.ids().filter_map(|p| spd(&o, set, p, "income").unwrap().ok()));
    }
    let mean_spd = spds.iter().sum::<f64>() / spds.len() as f64;
    (
        (gap - 28.0).abs() <= 2.0 && mean_spd.abs() <= 0.02,
        format!("gap {gap:.2} over {} students; no-gap mean SPD {mean_spd:+.4} over {} program-years", o.1 + p.1, spds.len()),
    )
}

#[test]
fn acceptance() {
    let mut verdicts: Vec<(u8, &str, Verdict)> = vec![
        (1, "stability oracle", timed(c1_stability_oracle)),
        (2, "within-group order", timed(c2_within_group_order)),
        (3, "single-program monotonicity", timed(c3_monotonicity)),
    ];
    let (bench, bench_time) = benchmark();
    verdicts.push((4, "objective identities", timed(|| c4_objective_identities(&bench))));
    verdicts.push((5, "grid-search oracle", timed(c5_grid_oracle)));
    verdicts.push((6, "ideal dominance", timed(|| c6_ideal_dominance(&bench))));
    verdicts.push((7, "determinism", timed(c7_determinism)));
    verdicts.push((8, "bonus SD and mean pattern", timed(|| c8_bonus_spread_pattern(&bench, bench_time))));
    verdicts.push((9, "disparity reduction pattern", timed(|| c9_disparity_pattern(&bench))));
    verdicts.push((10, "generator calibration", timed(c10_generator_calibration)));

    // Written to the real stdout so the lines appear without --nocapture.
    let mut out = io::stdout().lock();
    writeln!(out).unwrap();
    for (n, name, v) in &verdicts {
        writeln!(
            out,
            "{} criterion {n:>2} {name}: {} ({:.1}s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            v.elapsed.as_secs_f64()
        )
        .unwrap();
    }
    let hard: Vec<u8> = verdicts
        .iter()
        .filter(|(n, _, v)| !v.pass && !matches!(n, 8 | 9))
        .map(|(n, _, _)| *n)
        .collect();
    assert!(hard.is_empty(), "criteria failed: {hard:?}");
}
