//! The `generate`, `suggest`, `evaluate` and `report` pipelines behind the
//! command-line front end. Every command writes a manifest next to its
//! outputs recording the configuration it ran with.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{default_lambda, suggest, target_programs, ExperimentConfig, ProgramFilter};
use crate::io::{create_file, load_dataset, read_json, write_dataset, write_json, Dataset};
use crate::matching::deferred_acceptance;
use crate::metrics::{program_metrics, write_metrics_csv, InequalityFilter, ProgramMetrics, Undefined};
use crate::model::{BonusPolicy, ProgramId, ScoreScale};
use crate::policy::{spd_history, BonusGrid, EvaluationRow, EvaluationTable, Evaluator, PolicySuggestion, Strategy, Stat};
use crate::synthetic::{generate_synthetic_history, SyntheticConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset directory (`programs.csv` plus one directory per cohort).
    pub data: Option<PathBuf>,
    /// Generate the data in memory instead of reading it.
    pub synthetic: Option<SyntheticConfig>,
    pub attribute: String,
    /// Defaults to 28 for income and 23 for gender.
    pub lambda: Option<f64>,
    pub grid_max: f64,
    pub grid_step: f64,
    pub strategy: Option<Strategy>,
    pub seed: u64,
    pub out: PathBuf,
    pub filter: ProgramFilter,
    pub sample_size: Option<usize>,
    pub bucket_width: f64,
    pub rank_noise: f64,
    pub inequality_floor: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            synthetic: None,
            attribute: "income".into(),
            lambda: None,
            grid_max: 50.0,
            grid_step: 1.0,
            strategy: None,
            seed: 0,
            out: PathBuf::from("out"),
            filter: ProgramFilter::All,
            sample_size: None,
            bucket_width: 50.0,
            rank_noise: 0.5,
            inequality_floor: InequalityFilter::default().floor,
        }
    }
}

impl RunConfig {
    pub fn lambda(&self) -> Result<f64> {
        let lambda = match self.lambda {
            Some(l) => l,
            None => default_lambda(&self.attribute).ok_or_else(|| {
                Error::Config(format!(
                    "no default lambda for attribute `{}`; pass --lambda",
                    self.attribute
                ))
            })?,
        };
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(lambda)
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::new(&self.attribute, self.lambda()?);
        cfg.grid = BonusGrid::range(self.grid_max, self.grid_step)?;
        cfg.seed = self.seed;
        cfg.sample_size = self.sample_size;
        cfg.bucket_width = self.bucket_width;
        cfg.rank_noise = self.rank_noise;
        cfg.inequality.floor = self.inequality_floor;
        Ok(cfg)
    }

    /// Loads or generates the cohort history.
    pub fn dataset(&self) -> Result<Dataset> {
        match (&self.data, &self.synthetic) {
            (Some(dir), None) => load_dataset(dir, ScoreScale::default()),
            (None, Some(cfg)) => {
                let h = generate_synthetic_history(cfg)?;
                Ok(Dataset {
                    registry: h.registry,
                    years: h.years,
                })
            }
            (Some(_), Some(_)) => Err(Error::Config("give either a data directory or a synthetic config, not both".into())),
            (None, None) => Err(Error::Config("no data source: pass --data or --synthetic".into())),
        }
    }

    fn synthetic_or_default(&self) -> SyntheticConfig {
        let mut cfg = self.synthetic.clone().unwrap_or_default();
        if self.synthetic.is_none() {
            cfg.seed = self.seed;
        }
        cfg
    }
}

impl Error {
    /// Process exit status: 1 configuration, 2 data, 3 infeasible run.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidPolicy(_) => 1,
            Error::Infeasible(_) => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    inputs: Vec<PathBuf>,
}

fn write_manifest(config: &RunConfig, command: &str, inputs: Vec<PathBuf>) -> Result<()> {
    write_json(
        &config.out.join(format!("manifest-{command}.json")),
        &Manifest {
            command,
            version: VERSION,
            seed: config.seed,
            config,
            inputs,
        },
    )
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::data(dir, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMeans {
    pub attribute: String,
    pub year: String,
    pub protected_test_mean: f64,
    pub other_test_mean: f64,
    pub protected_grade_mean: f64,
    pub other_grade_mean: f64,
}

impl GroupMeans {
    pub fn test_gap(&self) -> f64 {
        self.other_test_mean - self.protected_test_mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub years: Vec<String>,
    pub programs: usize,
    pub group_means: Vec<GroupMeans>,
    /// Per program, SPD without intervention in each year (None when undefined).
    pub spd_by_year: BTreeMap<ProgramId, Vec<Option<f64>>>,
}

/// Mean test score (averaged over tests) and grade per group.
pub fn group_means(dataset: &Dataset, attribute: &str) -> Vec<GroupMeans> {
    dataset
        .years
        .iter()
        .map(|set| {
            let mut acc = [(0.0, 0.0, 0usize); 2];
            for s in set.students() {
                let slot = &mut acc[s.is_protected(attribute) as usize];
                let tests: f64 = s.test_scores.values().sum::<f64>() / s.test_scores.len().max(1) as f64;
                slot.0 += tests;
                slot.1 += s.grade_score;
                slot.2 += 1;
            }
            let mean = |v: f64, n: usize| if n == 0 { f64::NAN } else { v / n as f64 };
            GroupMeans {
                attribute: attribute.to_string(),
                year: set.year_label().to_string(),
                protected_test_mean: mean(acc[1].0, acc[1].2),
                other_test_mean: mean(acc[0].0, acc[0].2),
                protected_grade_mean: mean(acc[1].1, acc[1].2),
                other_grade_mean: mean(acc[0].1, acc[0].2),
            }
        })
        .collect()
}

/// Writes a synthetic history to `out` in the dataset layout.
pub fn cmd_generate(config: &RunConfig) -> Result<GenerateSummary> {
    if config.data.is_some() {
        return Err(Error::Config("generate takes a synthetic config, not a data directory".into()));
    }
    let synthetic = config.synthetic_or_default();
    let history = generate_synthetic_history(&synthetic)?;
    prepare_out(&config.out)?;
    write_dataset(&config.out, &history.registry, &history.years)?;
    let dataset = Dataset {
        registry: history.registry,
        years: history.years,
    };

    let mut group_stats = Vec::new();
    for g in &synthetic.groups {
        group_stats.extend(group_means(&dataset, &g.name));
    }
    let spd = spd_history(&dataset.years, &dataset.registry, &config.attribute)?;
    let summary = GenerateSummary {
        years: dataset.years.iter().map(|y| y.year_label().to_string()).collect(),
        programs: dataset.registry.len(),
        group_means: group_stats,
        spd_by_year: spd
            .into_iter()
            .map(|(p, v)| (p, v.into_iter().map(|m| m.ok()).collect()))
            .collect(),
    };
    write_json(&config.out.join("summary.json"), &summary)?;
    let mut resolved = config.clone();
    resolved.synthetic = Some(synthetic);
    write_manifest(&resolved, "generate", Vec::new())?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedProgram {
    pub program: ProgramId,
    pub reason: Undefined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionFile {
    pub strategy: Strategy,
    pub attribute: String,
    pub lambda: f64,
    pub grid: BonusGrid,
    pub seed: u64,
    pub evaluation_year: String,
    pub filter: ProgramFilter,
    pub suggestions: Vec<PolicySuggestion>,
    pub skipped: Vec<SkippedProgram>,
    pub dropped_students: usize,
}

impl SuggestionFile {
    pub fn policy(&self) -> Result<BonusPolicy> {
        let mut policy = BonusPolicy::with_max(self.grid.max().max(crate::model::DEFAULT_MAX_BONUS));
        for s in &self.suggestions {
            policy.insert(s.program, &s.attribute, s.bonus)?;
        }
        Ok(policy)
    }
}

pub fn suggestions_path(out: &Path, strategy: Strategy) -> PathBuf {
    out.join(format!("suggestions-{strategy}.json"))
}

/// Suggests per-program bonuses for the last cohort of the dataset.
pub fn cmd_suggest(config: &RunConfig) -> Result<SuggestionFile> {
    let strategy = config
        .strategy
        .ok_or_else(|| Error::Config("suggest needs --strategy".into()))?;
    let exp = config.experiment()?;
    let dataset = config.dataset()?;
    let targets = target_programs(&dataset.years, &dataset.registry, config.filter, &exp)?;
    if matches!(strategy, Strategy::Predictive(_)) && dataset.years.len() < 2 {
        return Err(Error::Infeasible(
            "predictive strategies need a training year and a held-out evaluation year".into(),
        ));
    }
    let run = suggest(&dataset.years, &dataset.registry, strategy, &exp)?;

    let mut suggestions = Vec::new();
    let mut skipped = Vec::new();
    for program in targets {
        match &run.suggestions[&program] {
            Ok(s) => suggestions.push(s.clone()),
            Err(reason) => {
                log::info!("program {program}: skipped ({reason})");
                skipped.push(SkippedProgram {
                    program,
                    reason: *reason,
                });
            }
        }
    }
    if suggestions.is_empty() {
        return Err(Error::Infeasible("no program admits a suggestion".into()));
    }
    let file = SuggestionFile {
        strategy,
        attribute: exp.attribute.clone(),
        lambda: exp.lambda,
        grid: exp.grid.clone(),
        seed: exp.seed,
        evaluation_year: dataset.years.last().expect("non-empty").year_label().to_string(),
        filter: config.filter,
        suggestions,
        skipped,
        dropped_students: run.dropped_students,
    };
    prepare_out(&config.out)?;
    write_json(&suggestions_path(&config.out, strategy), &file)?;
    write_json(&config.out.join(format!("policy-{strategy}.json")), &file.policy()?)?;
    write_manifest(config, &format!("suggest-{strategy}"), Vec::new())?;
    Ok(file)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub attribute: String,
    pub lambda: f64,
    pub evaluation_year: String,
    pub filter: ProgramFilter,
    pub tables: Vec<EvaluationTable>,
}

#[derive(Serialize)]
struct TableRow<'a> {
    strategy: String,
    attribute: &'a str,
    filter: &'a str,
    mean: f64,
    sd: f64,
    count: usize,
}

#[derive(Serialize)]
struct DetailRow<'a> {
    strategy: String,
    program: ProgramId,
    attribute: &'a str,
    suggested_bonus: f64,
    ideal_bonus: Option<f64>,
    objective_suggested: Option<f64>,
    objective_ideal: Option<f64>,
    objective_error: Option<f64>,
    spd_0: Option<f64>,
    spd_b: Option<f64>,
    spd_delta: Option<f64>,
    excluded: Option<String>,
}

fn filter_name(f: ProgramFilter) -> &'static str {
    match f {
        ProgramFilter::All => "all",
        ProgramFilter::Consistent => "consistent",
    }
}

fn write_stat_table(path: &Path, report: &EvaluationReport, pick: impl Fn(&EvaluationTable) -> Stat) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    for t in &report.tables {
        let s = pick(t);
        w.serialize(TableRow {
            strategy: t.summary.strategy.to_string(),
            attribute: &report.attribute,
            filter: filter_name(report.filter),
            mean: s.mean,
            sd: s.sd,
            count: s.count,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_detail_csv(path: &Path, rows: &[EvaluationRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    for r in rows {
        w.serialize(DetailRow {
            strategy: r.strategy.to_string(),
            program: r.program,
            attribute: &r.attribute,
            suggested_bonus: r.suggested_bonus,
            ideal_bonus: r.ideal_bonus,
            objective_suggested: r.objective_suggested,
            objective_ideal: r.objective_ideal,
            objective_error: r.objective_error,
            spd_0: r.spd_0,
            spd_b: r.spd_b,
            spd_delta: r.spd_delta,
            excluded: r.excluded.map(|u| u.to_string()),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Evaluates suggestion files against the ideal policy on the last cohort.
/// With no files given, every `suggestions-*.json` in the output directory
/// is used.
pub fn cmd_evaluate(config: &RunConfig, suggestion_files: &[PathBuf]) -> Result<EvaluationReport> {
    let exp = config.experiment()?;
    let dataset = config.dataset()?;
    let files: Vec<PathBuf> = if suggestion_files.is_empty() {
        let mut found: Vec<PathBuf> = fs::read_dir(&config.out)
            .map_err(|e| Error::data(&config.out, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("suggestions-") && n.ends_with(".json"))
            })
            .collect();
        found.sort();
        found
    } else {
        suggestion_files.to_vec()
    };
    if files.is_empty() {
        return Err(Error::Config("no suggestion files to evaluate".into()));
    }
    let realized = dataset
        .years
        .last()
        .ok_or_else(|| Error::Infeasible("dataset has no cohorts".into()))?;
    let targets = target_programs(&dataset.years, &dataset.registry, config.filter, &exp)?;
    let evaluator = Evaluator::new(realized, &dataset.registry, &exp.attribute, &exp.grid, exp.lambda)?;

    let mut tables = Vec::new();
    for path in &files {
        let file: SuggestionFile = read_json(path)?;
        if file.attribute != exp.attribute {
            return Err(Error::data(
                path,
                format!("suggestions are for `{}`, run is for `{}`", file.attribute, exp.attribute),
            ));
        }
        for s in &file.suggestions {
            if !dataset.registry.contains(s.program) {
                return Err(Error::data(path, format!("program {} is not registered", s.program)));
            }
        }
        let selected: Vec<PolicySuggestion> = file
            .suggestions
            .into_iter()
            .filter(|s| targets.contains(&s.program))
            .collect();
        tables.push(evaluator.evaluate(file.strategy, &selected)?);
    }
    let report = EvaluationReport {
        attribute: exp.attribute.clone(),
        lambda: exp.lambda,
        evaluation_year: realized.year_label().to_string(),
        filter: config.filter,
        tables,
    };

    prepare_out(&config.out)?;
    write_json(&config.out.join("evaluation.json"), &report)?;
    write_stat_table(&config.out.join("table-objective-error.csv"), &report, |t| t.summary.objective_error)?;
    write_stat_table(&config.out.join("table-spd-delta.csv"), &report, |t| t.summary.spd_delta)?;
    write_stat_table(&config.out.join("table-bonus.csv"), &report, |t| t.summary.bonus)?;
    let rows: Vec<EvaluationRow> = report.tables.iter().flat_map(|t| t.rows.iter().cloned()).collect();
    write_detail_csv(&config.out.join("evaluation-detail.csv"), &rows)?;
    write_manifest(config, "evaluate", files)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub attribute: String,
    pub year: String,
    pub metrics: Vec<ProgramMetrics>,
    pub consistent_programs: Vec<ProgramId>,
}

/// Per-program metrics of the last cohort without intervention, plus the
/// programs passing the consistency filter on the preceding years.
pub fn cmd_report(config: &RunConfig) -> Result<MetricsReport> {
    let exp = config.experiment()?;
    let dataset = config.dataset()?;
    let realized = dataset
        .years
        .last()
        .ok_or_else(|| Error::Infeasible("dataset has no cohorts".into()))?;
    let outcome = deferred_acceptance(realized, &dataset.registry, &BonusPolicy::empty())?;
    let metrics = program_metrics(&outcome, realized, &dataset.registry, &exp.attribute)?;
    let consistent_programs = if dataset.years.len() >= 4 {
        target_programs(&dataset.years, &dataset.registry, ProgramFilter::Consistent, &exp)?
    } else {
        Vec::new()
    };
    let report = MetricsReport {
        attribute: exp.attribute.clone(),
        year: realized.year_label().to_string(),
        metrics,
        consistent_programs,
    };
    prepare_out(&config.out)?;
    write_metrics_csv(&report.metrics, create_file(&config.out.join("metrics.csv"))?)?;
    write_json(&config.out.join("metrics.json"), &report)?;
    write_json(&config.out.join("match-outcome.json"), &outcome)?;
    write_manifest(config, "report", Vec::new())?;
    Ok(report)
}
