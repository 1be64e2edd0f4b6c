//! Strategy comparison on a cohort history: the last cohort is the realized
//! (evaluation) year and everything before it is history.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::applicant_model::{sample_application_sets, train, TrainConfig};
use crate::error::{Error, Result};
use crate::metrics::{InequalityFilter, Measured};
use crate::model::{ApplicationSet, ProgramId, ProgramRegistry};
use crate::policy::{
    average_optima, consistent_programs, optimal_bonuses, BonusEvaluation, BonusGrid, EvaluationRow, EvaluationTable,
    Evaluator, PolicySuggestion, Strategy, StrategySummary,
};

/// Default trade-off weight for the attribute: the median score gap between
/// its groups on the point scale.
pub fn default_lambda(attribute: &str) -> Option<f64> {
    match attribute {
        "income" => Some(28.0),
        "gender" => Some(23.0),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgramFilter {
    #[default]
    All,
    Consistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub attribute: String,
    pub lambda: f64,
    pub grid: BonusGrid,
    pub seed: u64,
    /// Students per sampled application set; defaults to the training cohort size.
    pub sample_size: Option<usize>,
    pub bucket_width: f64,
    pub rank_noise: f64,
    pub inequality: InequalityFilter,
}

impl ExperimentConfig {
    pub fn new(attribute: &str, lambda: f64) -> Self {
        let train = TrainConfig::new(attribute);
        ExperimentConfig {
            attribute: attribute.to_string(),
            lambda,
            grid: BonusGrid::default(),
            seed: 0,
            sample_size: None,
            bucket_width: train.bucket_width,
            rank_noise: train.rank_noise,
            inequality: InequalityFilter::default(),
        }
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            attribute: self.attribute.clone(),
            bucket_width: self.bucket_width,
            rank_noise: self.rank_noise,
        }
    }
}

/// Suggestions of one strategy for every registered program.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyRun {
    pub strategy: Strategy,
    pub suggestions: BTreeMap<ProgramId, Measured<PolicySuggestion>>,
    /// Sampled students dropped for having no program to list.
    pub dropped_students: usize,
}

impl StrategyRun {
    pub fn applicable(&self) -> Vec<PolicySuggestion> {
        self.suggestions.values().filter_map(|s| s.clone().ok()).collect()
    }
}

fn split(years: &[ApplicationSet]) -> Result<(&[ApplicationSet], &ApplicationSet)> {
    match years.split_last() {
        Some((realized, history)) => Ok((history, realized)),
        None => Err(Error::Infeasible("no cohorts available".into())),
    }
}

/// Per-set grid optima over sampled application sets, shared by every
/// predictive strategy of one experiment. Predictive-n averages the first
/// `n` sets.
pub struct PredictiveSamples {
    per_set: Vec<BTreeMap<ProgramId, Measured<BonusEvaluation>>>,
    dropped: Vec<usize>,
}

impl PredictiveSamples {
    /// Trains on the most recent history year and evaluates `n_sets` sets.
    pub fn draw(
        years: &[ApplicationSet],
        registry: &ProgramRegistry,
        cfg: &ExperimentConfig,
        n_sets: usize,
    ) -> Result<Self> {
        let (history, _) = split(years)?;
        let train_year = history.last().ok_or_else(|| {
            Error::Infeasible("predictive strategies need a training year before the evaluation year".into())
        })?;
        let model = train(train_year, registry, cfg.train_config())?;
        let n_students = cfg.sample_size.unwrap_or(train_year.len());
        let sets = sample_application_sets(&model, registry, n_sets, n_students, cfg.seed)?;
        let dropped = sets.iter().map(|s| s.dropped).collect();
        let per_set = sets
            .par_iter()
            .map(|s| optimal_bonuses(&s.set, registry, &cfg.attribute, &cfg.grid, cfg.lambda))
            .collect::<Result<Vec<_>>>()?;
        Ok(PredictiveSamples { per_set, dropped })
    }

    pub fn len(&self) -> usize {
        self.per_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_set.is_empty()
    }

    pub fn suggest(&self, n_sets: usize, registry: &ProgramRegistry, attribute: &str) -> Result<StrategyRun> {
        if n_sets == 0 || n_sets > self.per_set.len() {
            return Err(Error::Config(format!(
                "requested {n_sets} sets but {} were drawn",
                self.per_set.len()
            )));
        }
        let strategy = Strategy::Predictive(n_sets);
        Ok(StrategyRun {
            strategy,
            suggestions: average_optima(&self.per_set[..n_sets], registry, attribute, strategy),
            dropped_students: self.dropped[..n_sets].iter().sum(),
        })
    }
}

/// Suggestions of one strategy for the last cohort in `years`.
pub fn suggest(
    years: &[ApplicationSet],
    registry: &ProgramRegistry,
    strategy: Strategy,
    cfg: &ExperimentConfig,
) -> Result<StrategyRun> {
    let (history, realized) = split(years)?;
    match strategy {
        Strategy::Historical(k) => {
            if history.is_empty() {
                return Err(Error::Infeasible("historical strategies need at least one past year".into()));
            }
            if history.len() < k {
                log::warn!(
                    "historical-{k}: only {} past years available, averaging those",
                    history.len()
                );
            }
            let window = &history[history.len().saturating_sub(k)..];
            let per_year = window
                .par_iter()
                .map(|s| optimal_bonuses(s, registry, &cfg.attribute, &cfg.grid, cfg.lambda))
                .collect::<Result<Vec<_>>>()?;
            Ok(StrategyRun {
                strategy,
                suggestions: average_optima(&per_year, registry, &cfg.attribute, strategy),
                dropped_students: 0,
            })
        }
        Strategy::Predictive(n) => PredictiveSamples::draw(years, registry, cfg, n)?.suggest(n, registry, &cfg.attribute),
        Strategy::Ideal => {
            let evaluator = Evaluator::new(realized, registry, &cfg.attribute, &cfg.grid, cfg.lambda)?;
            Ok(ideal_run(&evaluator, registry, &cfg.attribute))
        }
    }
}

fn ideal_run(evaluator: &Evaluator, registry: &ProgramRegistry, attribute: &str) -> StrategyRun {
    StrategyRun {
        strategy: Strategy::Ideal,
        suggestions: registry
            .ids()
            .map(|program| {
                let s = evaluator.ideal(program).map(|e| PolicySuggestion {
                    program,
                    attribute: attribute.to_string(),
                    bonus: e.bonus,
                    strategy: Strategy::Ideal,
                    support: 1,
                });
                (program, s)
            })
            .collect(),
        dropped_students: 0,
    }
}

/// Programs targeted under `filter`, judged on the history before the
/// evaluation year.
pub fn target_programs(
    years: &[ApplicationSet],
    registry: &ProgramRegistry,
    filter: ProgramFilter,
    cfg: &ExperimentConfig,
) -> Result<Vec<ProgramId>> {
    match filter {
        ProgramFilter::All => Ok(registry.ids().collect()),
        ProgramFilter::Consistent => {
            let (history, _) = split(years)?;
            if history.len() < 3 {
                return Err(Error::Infeasible(
                    "the consistency filter needs three past years".into(),
                ));
            }
            consistent_programs(history, registry, &cfg.attribute, &cfg.inequality)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub attribute: String,
    pub lambda: f64,
    pub consistent_programs: Vec<ProgramId>,
    /// One table per strategy over all applicable programs.
    pub all_programs: Vec<EvaluationTable>,
    /// The same rows restricted to consistently unequal programs.
    pub consistent: Vec<EvaluationTable>,
}

impl ExperimentReport {
    pub fn table(&self, strategy: Strategy, filter: ProgramFilter) -> Option<&EvaluationTable> {
        let tables = match filter {
            ProgramFilter::All => &self.all_programs,
            ProgramFilter::Consistent => &self.consistent,
        };
        tables.iter().find(|t| t.summary.strategy == strategy)
    }
}

/// Runs every strategy on `years` (last one realized) and evaluates each
/// against the ideal policy, over all programs and over the consistently
/// unequal ones.
pub fn run_experiment(
    years: &[ApplicationSet],
    registry: &ProgramRegistry,
    strategies: &[Strategy],
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    let (history, realized) = split(years)?;
    let evaluator = Evaluator::new(realized, registry, &cfg.attribute, &cfg.grid, cfg.lambda)?;
    let max_sets = strategies
        .iter()
        .filter_map(|s| match s {
            Strategy::Predictive(n) => Some(*n),
            _ => None,
        })
        .max();
    let samples = max_sets
        .map(|n| PredictiveSamples::draw(years, registry, cfg, n))
        .transpose()?;

    let consistent_programs = if history.len() >= 3 {
        consistent_programs(history, registry, &cfg.attribute, &cfg.inequality)?
    } else {
        Vec::new()
    };

    let mut all_programs = Vec::new();
    let mut consistent = Vec::new();
    for strategy in strategies {
        let run = match strategy {
            Strategy::Predictive(n) => samples
                .as_ref()
                .expect("samples drawn for predictive strategies")
                .suggest(*n, registry, &cfg.attribute)?,
            Strategy::Ideal => ideal_run(&evaluator, registry, &cfg.attribute),
            Strategy::Historical(_) => suggest(years, registry, *strategy, cfg)?,
        };
        let table = evaluator.evaluate(*strategy, &run.applicable())?;
        consistent.push(restrict(&table, &consistent_programs));
        all_programs.push(table);
    }
    Ok(ExperimentReport {
        attribute: cfg.attribute.clone(),
        lambda: cfg.lambda,
        consistent_programs,
        all_programs,
        consistent,
    })
}

/// The table's rows for `programs` only, with a recomputed summary.
pub fn restrict(table: &EvaluationTable, programs: &[ProgramId]) -> EvaluationTable {
    let rows: Vec<EvaluationRow> = table
        .rows
        .iter()
        .filter(|r| programs.contains(&r.program))
        .cloned()
        .collect();
    let summary = StrategySummary::from_rows(table.summary.strategy, &table.summary.attribute, &rows);
    EvaluationTable { rows, summary }
}
