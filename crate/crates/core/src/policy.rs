//! Bonus-policy search and the design strategies built on it.
//!
//! A policy is optimized for one (program, attribute) pair at a time: the
//! bonus applies to protected applicants of that program only, and the whole
//! market is re-matched for every candidate bonus so cascades through other
//! programs are part of the measured outcome.
//!
//! Changing the bonus at one program only changes that program's ranking,
//! and that ranking changes only when the bonus crosses the admission-score
//! gap of some protected/non-protected applicant pair. Bonus values between
//! the same gaps therefore produce the same matching; the search uses this to
//! skip re-running deferred acceptance without changing any result.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{Market, Scratch};
use crate::metrics::{
    check_lambda, consistently_unequal, GroupCounts, GroupRates, InequalityFilter, Measured,
    ObjectiveValue, Undefined,
};
use crate::model::{ApplicationSet, ProgramId, ProgramRegistry};

/// Candidate bonus values, ascending from zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BonusGrid {
    values: Vec<f64>,
}

impl Default for BonusGrid {
    fn default() -> Self {
        BonusGrid::range(50.0, 1.0).expect("valid default grid")
    }
}

impl BonusGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.first() != Some(&0.0) {
            return Err(Error::Config("bonus grid must start at 0".into()));
        }
        if values.windows(2).any(|w| !(w[1] > w[0])) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("bonus grid must be strictly increasing".into()));
        }
        Ok(BonusGrid { values })
    }

    /// `0, step, 2*step, ...` up to and including `max` (within rounding).
    pub fn range(max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(max >= 0.0) || !max.is_finite() {
            return Err(Error::Config(format!("invalid grid max {max} / step {step}")));
        }
        let n = (max / step + 1e-9).floor() as usize;
        BonusGrid::new((0..=n).map(|i| i as f64 * step).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("grid is non-empty")
    }
}

impl TryFrom<Vec<f64>> for BonusGrid {
    type Error = Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        BonusGrid::new(values)
    }
}

impl From<BonusGrid> for Vec<f64> {
    fn from(grid: BonusGrid) -> Self {
        grid.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// Mean of the hindsight optima of the last `k` years.
    Historical(usize),
    /// Mean of the optima over `n` application sets sampled from a trained model.
    Predictive(usize),
    /// Hindsight optimum on the realized year.
    Ideal,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Historical(k) => write!(f, "historical-{k}"),
            Strategy::Predictive(n) => write!(f, "predictive-{n}"),
            Strategy::Ideal => f.write_str("ideal"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown strategy `{s}` (expected historical-K, predictive-N or ideal)"));
        if s == "ideal" {
            return Ok(Strategy::Ideal);
        }
        let (kind, count) = s.split_once('-').ok_or_else(bad)?;
        let count: usize = count.parse().map_err(|_| bad())?;
        if count == 0 {
            return Err(bad());
        }
        match kind {
            "historical" => Ok(Strategy::Historical(count)),
            "predictive" => Ok(Strategy::Predictive(count)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Strategy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySuggestion {
    pub program: ProgramId,
    pub attribute: String,
    pub bonus: f64,
    pub strategy: Strategy,
    /// Number of application sets or years averaged.
    pub support: usize,
}

/// Objective and SPD for one bonus value at one program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BonusEvaluation {
    pub bonus: f64,
    pub objective: ObjectiveValue,
    pub spd: f64,
}

/// Evaluates single-program bonuses on one application set.
pub(crate) struct SetEvaluator {
    market: Market,
    protected: Vec<bool>,
    baseline: Scratch,
    baseline_thresholds: Vec<f64>,
    lambda: f64,
}

impl SetEvaluator {
    pub fn new(
        apps: &ApplicationSet,
        registry: &ProgramRegistry,
        attribute: &str,
        lambda: f64,
    ) -> Result<Self> {
        check_lambda(lambda)?;
        let market = Market::compile(apps, registry)?;
        let protected: Vec<bool> = apps
            .students()
            .iter()
            .map(|s| s.is_protected(attribute))
            .collect();
        let mut baseline = Scratch::default();
        let baseline_thresholds = market.baseline_thresholds(&protected, &mut baseline);
        Ok(SetEvaluator {
            market,
            protected,
            baseline,
            baseline_thresholds,
            lambda,
        })
    }

    pub fn program_index(&self, program: ProgramId) -> Result<usize> {
        self.market
            .program_index(program)
            .ok_or(Error::UnknownProgram(program))
    }

    /// Prepares the search at one program; undefined when the program lacks
    /// applicants from either group or admits nobody without a bonus.
    pub fn focal(&self, program: usize) -> Measured<Focal<'_>> {
        let applicants = &self.market.applicants[program];
        let mut counts = GroupCounts::default();
        let mut protected_scores = Vec::new();
        let mut other_scores = Vec::new();
        for (s, score) in applicants {
            if self.protected[*s as usize] {
                counts.protected += 1;
                protected_scores.push(*score);
            } else {
                counts.other += 1;
                other_scores.push(*score);
            }
        }
        GroupRates {
            applicants: counts,
            admitted: GroupCounts::default(),
        }
        .spd()?;
        let (baseline_rates, baseline_utility) = self.tally(program, &self.baseline, counts);
        let baseline_utility = baseline_utility?;
        let baseline_spd = baseline_rates.spd()?;

        let mut gaps: Vec<f64> = protected_scores
            .iter()
            .flat_map(|p| other_scores.iter().map(move |o| o - p))
            .filter(|g| *g >= 0.0)
            .collect();
        gaps.sort_by(f64::total_cmp);
        gaps.dedup();

        Ok(Focal {
            eval: self,
            program,
            counts,
            gaps,
            baseline_utility,
            baseline_spd,
            base: None,
            known: Vec::new(),
        })
    }

    /// Group counts and mean raw score of the admitted at `program`.
    fn tally(&self, program: usize, run: &Scratch, counts: GroupCounts) -> (GroupRates, Measured<f64>) {
        let mut admitted: Vec<u32> = run.held(program).map(|h| h.student).collect();
        admitted.sort_unstable();
        let mut rates = GroupRates {
            applicants: counts,
            admitted: GroupCounts::default(),
        };
        for s in &admitted {
            if self.protected[*s as usize] {
                rates.admitted.protected += 1;
            } else {
                rates.admitted.other += 1;
            }
        }
        if admitted.is_empty() {
            return (rates, Err(Undefined::NoAdmitted));
        }
        let id = self.market.program_ids[program];
        let total: f64 = admitted
            .iter()
            .map(|s| {
                self.market.choices[*s as usize]
                    .iter()
                    .find(|c| self.market.program_ids[c.program as usize] == id)
                    .expect("admitted students listed the program")
                    .score
            })
            .sum();
        (rates, Ok(total / admitted.len() as f64))
    }
}

pub(crate) struct Focal<'e> {
    eval: &'e SetEvaluator,
    program: usize,
    counts: GroupCounts,
    /// Sorted distinct non-negative score gaps (other minus protected).
    gaps: Vec<f64>,
    baseline_utility: f64,
    baseline_spd: f64,
    /// Matching of the students not applying here, built on first use.
    base: Option<Scratch>,
    /// Bonus intervals `[lo, hi)` over which the outcome is already known.
    known: Vec<(f64, f64, Measured<(ObjectiveValue, f64)>)>,
}

impl Focal<'_> {
    pub fn baseline_spd(&self) -> f64 {
        self.baseline_spd
    }

    pub fn evaluate(&mut self, bonus: f64, scratch: &mut Scratch) -> Measured<BonusEvaluation> {
        let known = self
            .known
            .iter()
            .find(|(lo, hi, _)| *lo <= bonus && bonus < *hi)
            .map(|k| k.2);
        let (objective, spd) = match known {
            Some(v) => v?,
            None => {
                let (v, hi) = self.run(bonus, scratch);
                self.known.push((bonus, hi, v));
                v?
            }
        };
        Ok(BonusEvaluation {
            bonus,
            objective,
            spd,
        })
    }

    /// Outcome at `bonus` and the bonus up to which it stays unchanged.
    fn run(&mut self, bonus: f64, scratch: &mut Scratch) -> (Measured<(ObjectiveValue, f64)>, f64) {
        let eval = self.eval;
        let ((rates, utility), hi) = if bonus == 0.0 {
            (
                eval.tally(self.program, &eval.baseline, self.counts),
                eval.baseline_thresholds[self.program],
            )
        } else {
            let base = self
                .base
                .get_or_insert_with(|| eval.market.without_applicants(self.program));
            let hi = eval.market.run_focal(base, self.program, &eval.protected, bonus, scratch);
            (eval.tally(self.program, scratch, self.counts), hi)
        };
        let value = (|| {
            let spd = rates.spd()?;
            let objective = ObjectiveValue::new(self.baseline_utility, utility?, spd, eval.lambda);
            Ok((objective, spd))
        })();
        (value, hi)
    }

    /// Smallest grid value attaining the minimum objective.
    pub fn grid_optimum(&mut self, grid: &BonusGrid, scratch: &mut Scratch) -> Measured<BonusEvaluation> {
        self.argmin(grid.values().iter().copied(), scratch)
    }

    /// Minimum over every bonus in `[grid.min, grid.max]`: the grid plus one
    /// representative of each ranking the program can take in that range.
    /// The grid optimum is kept unless an off-grid bonus is strictly better.
    pub fn exact_optimum(&mut self, grid: &BonusGrid, scratch: &mut Scratch) -> Measured<BonusEvaluation> {
        let on_grid = self.grid_optimum(grid, scratch);
        let (lo, hi) = (grid.min(), grid.max());
        let mut points: Vec<f64> = grid
            .values()
            .iter()
            .copied()
            .chain(self.gaps.iter().copied().filter(|g| *g >= lo && *g <= hi))
            .collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        let mids: Vec<f64> = points.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect();
        points.extend(mids);
        points.sort_by(f64::total_cmp);
        points.dedup();
        let anywhere = self.argmin(points.into_iter(), scratch);
        match (on_grid, anywhere) {
            (Ok(g), Ok(a)) if a.objective.value < g.objective.value => Ok(a),
            (Ok(g), _) => Ok(g),
            (Err(_), a) => a,
        }
    }

    fn argmin(&mut self, bonuses: impl Iterator<Item = f64>, scratch: &mut Scratch) -> Measured<BonusEvaluation> {
        let mut best: Option<BonusEvaluation> = None;
        for b in bonuses {
            let Ok(e) = self.evaluate(b, scratch) else {
                continue;
            };
            if best.is_none_or(|cur| e.objective.value < cur.objective.value) {
                best = Some(e);
            }
        }
        best.ok_or(Undefined::NotApplicable)
    }
}

/// Grid-optimal bonus for every registered program on one application set.
pub fn optimal_bonuses(
    apps: &ApplicationSet,
    registry: &ProgramRegistry,
    attribute: &str,
    grid: &BonusGrid,
    lambda: f64,
) -> Result<BTreeMap<ProgramId, Measured<BonusEvaluation>>> {
    let eval = SetEvaluator::new(apps, registry, attribute, lambda)?;
    let mut scratch = Scratch::default();
    Ok(registry
        .ids()
        .enumerate()
        .map(|(k, id)| {
            let result = eval
                .focal(k)
                .map_err(|_| Undefined::NotApplicable)
                .and_then(|mut f| f.grid_optimum(grid, &mut scratch));
            (id, result)
        })
        .collect())
}

/// Grid value minimizing the objective at `program` on one application set;
/// ties go to the smaller bonus.
pub fn optimal_bonus(
    apps: &ApplicationSet,
    registry: &ProgramRegistry,
    program: ProgramId,
    attribute: &str,
    grid: &BonusGrid,
    lambda: f64,
) -> Result<Measured<BonusEvaluation>> {
    let eval = SetEvaluator::new(apps, registry, attribute, lambda)?;
    let k = eval.program_index(program)?;
    let mut scratch = Scratch::default();
    Ok(eval
        .focal(k)
        .map_err(|_| Undefined::NotApplicable)
        .and_then(|mut f| f.grid_optimum(grid, &mut scratch)))
}

pub(crate) fn average_optima(
    per_set: &[BTreeMap<ProgramId, Measured<BonusEvaluation>>],
    registry: &ProgramRegistry,
    attribute: &str,
    strategy: Strategy,
) -> BTreeMap<ProgramId, Measured<PolicySuggestion>> {
    registry
        .ids()
        .map(|program| {
            let optima: Vec<f64> = per_set
                .iter()
                .filter_map(|m| m.get(&program).and_then(|r| r.as_ref().ok()))
                .map(|e| e.bonus)
                .collect();
            let suggestion = if optima.is_empty() {
                Err(Undefined::NotApplicable)
            } else {
                Ok(PolicySuggestion {
                    program,
                    attribute: attribute.to_string(),
                    bonus: optima.iter().sum::<f64>() / optima.len() as f64,
                    strategy,
                    support: optima.len(),
                })
            };
            (program, suggestion)
        })
        .collect()
}

/// Mean of per-set optimal bonuses over sampled application sets, for every
/// program. Sets are evaluated in parallel and reduced in input order.
pub fn suggest_predictive_all(
    sampled_sets: &[ApplicationSet],
    registry: &ProgramRegistry,
    attribute: &str,
    grid: &BonusGrid,
    lambda: f64,
) -> Result<BTreeMap<ProgramId, Measured<PolicySuggestion>>> {
    let per_set = sampled_sets
        .par_iter()
        .map(|set| optimal_bonuses(set, registry, attribute, grid, lambda))
        .collect::<Result<Vec<_>>>()?;
    Ok(average_optima(
        &per_set,
        registry,
        attribute,
        Strategy::Predictive(sampled_sets.len()),
    ))
}

pub fn suggest_predictive(
    sampled_sets: &[ApplicationSet],
    registry: &ProgramRegistry,
    program: ProgramId,
    attribute: &str,
    grid: &BonusGrid,
    lambda: f64,
) -> Result<Measured<PolicySuggestion>> {
    registry.get(program)?;
    let mut all = suggest_predictive_all(sampled_sets, registry, attribute, grid, lambda)?;
    Ok(all.remove(&program).expect("registered program"))
}

/// Mean of the hindsight-optimal bonuses of the last `years` entries of
/// `history` (oldest first). Fewer available years average what exists.
pub fn suggest_historical_all(
    history: &[ApplicationSet],
    years: usize,
    registry: &ProgramRegistry,
    attribute: &str,
    grid: &BonusGrid,
    lambda: f64,
) -> Result<BTreeMap<ProgramId, Measured<PolicySuggestion>>> {
    if years == 0 {
        return Err(Error::Config("historical strategy needs at least one year".into()));
    }
    let window = &history[history.len().saturating_sub(years)..];
    let per_year = window
        .par_iter()
        .map(|set| optimal_bonuses(set, registry, attribute, grid, lambda))
        .collect::<Result<Vec<_>>>()?;
    Ok(average_optima(
        &per_year,
        registry,
        attribute,
        Strategy::Historical(years),
    ))
}

pub fn suggest_historical(
    history: &[ApplicationSet],
    years: usize,
    registry: &ProgramRegistry,
    program: ProgramId,
    attribute: &str,
    grid: &BonusGrid,
    lambda: f64,
) -> Result<Measured<PolicySuggestion>> {
    registry.get(program)?;
    let mut all = suggest_historical_all(history, years, registry, attribute, grid, lambda)?;
    Ok(all.remove(&program).expect("registered program"))
}

/// Hindsight optimum on the realized application set over the whole bonus
/// range spanned by the grid, not only its points. Every bonus a strategy
/// can suggest (an average of grid values) lies in that range, so no
/// suggestion can beat it.
pub fn ideal_policy(
    realized: &ApplicationSet,
    registry: &ProgramRegistry,
    program: ProgramId,
    attribute: &str,
    grid: &BonusGrid,
    lambda: f64,
) -> Result<Measured<PolicySuggestion>> {
    let eval = SetEvaluator::new(realized, registry, attribute, lambda)?;
    let k = eval.program_index(program)?;
    let mut scratch = Scratch::default();
    Ok(eval
        .focal(k)
        .map_err(|_| Undefined::NotApplicable)
        .and_then(|mut f| f.exact_optimum(grid, &mut scratch))
        .map(|e| PolicySuggestion {
            program,
            attribute: attribute.to_string(),
            bonus: e.bonus,
            strategy: Strategy::Ideal,
            support: 1,
        }))
}

/// Ideal suggestions for every registered program.
pub fn ideal_policy_all(
    realized: &ApplicationSet,
    registry: &ProgramRegistry,
    attribute: &str,
    grid: &BonusGrid,
    lambda: f64,
) -> Result<BTreeMap<ProgramId, Measured<PolicySuggestion>>> {
    let evaluator = Evaluator::new(realized, registry, attribute, grid, lambda)?;
    Ok(registry
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
        .collect())
}

/// SPD without intervention of every program in each history year.
pub fn spd_history(
    history: &[ApplicationSet],
    registry: &ProgramRegistry,
    attribute: &str,
) -> Result<BTreeMap<ProgramId, Vec<Measured<f64>>>> {
    let mut table: BTreeMap<ProgramId, Vec<Measured<f64>>> =
        registry.ids().map(|p| (p, Vec::new())).collect();
    for set in history {
        let eval = SetEvaluator::new(set, registry, attribute, 0.0)?;
        for (k, id) in registry.ids().enumerate() {
            let spd = eval.focal(k).map(|f| f.baseline_spd());
            table.get_mut(&id).expect("registered").push(spd);
        }
    }
    Ok(table)
}

/// Programs passing the consistent-inequality filter over the last three
/// history years.
pub fn consistent_programs(
    history: &[ApplicationSet],
    registry: &ProgramRegistry,
    attribute: &str,
    filter: &InequalityFilter,
) -> Result<Vec<ProgramId>> {
    let recent = &history[history.len().saturating_sub(3)..];
    Ok(spd_history(recent, registry, attribute)?
        .into_iter()
        .filter(|(_, spds)| consistently_unequal(spds, filter) == Ok(true))
        .map(|(p, _)| p)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

impl Stat {
    /// Mean and sample standard deviation; the SD of fewer than two values is 0.
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len();
        if n == 0 {
            return Stat {
                mean: f64::NAN,
                sd: f64::NAN,
                count: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Stat { mean, sd, count: n }
    }
}

/// Per-program result of deploying a suggestion on the realized year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub program: ProgramId,
    pub strategy: Strategy,
    pub attribute: String,
    pub suggested_bonus: f64,
    pub ideal_bonus: Option<f64>,
    pub objective_suggested: Option<f64>,
    pub objective_ideal: Option<f64>,
    /// `o_suggested - o_ideal`.
    pub objective_error: Option<f64>,
    pub spd_0: Option<f64>,
    pub spd_b: Option<f64>,
    /// `|SPD_b| - |SPD_0|`.
    pub spd_delta: Option<f64>,
    pub excluded: Option<Undefined>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub attribute: String,
    pub objective_error: Stat,
    pub spd_delta: Stat,
    pub bonus: Stat,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationTable {
    pub rows: Vec<EvaluationRow>,
    pub summary: StrategySummary,
}

impl StrategySummary {
    pub fn from_rows(strategy: Strategy, attribute: &str, rows: &[EvaluationRow]) -> Self {
        let errors: Vec<f64> = rows.iter().filter_map(|r| r.objective_error).collect();
        let deltas: Vec<f64> = rows.iter().filter_map(|r| r.spd_delta).collect();
        let bonuses: Vec<f64> = rows.iter().map(|r| r.suggested_bonus).collect();
        StrategySummary {
            strategy,
            attribute: attribute.to_string(),
            objective_error: Stat::of(&errors),
            spd_delta: Stat::of(&deltas),
            bonus: Stat::of(&bonuses),
            excluded: rows.iter().filter(|r| r.excluded.is_some()).count(),
        }
    }
}

/// Deploys suggestions on a realized application set and compares them with
/// the ideal policy. Ideal optima are computed once per program and reused
/// across strategies.
pub struct Evaluator {
    eval: SetEvaluator,
    registry: ProgramRegistry,
    attribute: String,
    ideal: BTreeMap<ProgramId, Measured<BonusEvaluation>>,
    baseline: BTreeMap<ProgramId, Measured<f64>>,
}

impl Evaluator {
    pub fn new(
        realized: &ApplicationSet,
        registry: &ProgramRegistry,
        attribute: &str,
        grid: &BonusGrid,
        lambda: f64,
    ) -> Result<Self> {
        let eval = SetEvaluator::new(realized, registry, attribute, lambda)?;
        let ids: Vec<ProgramId> = registry.ids().collect();
        let per_program: Vec<(Measured<BonusEvaluation>, Measured<f64>)> = ids
            .par_iter()
            .enumerate()
            .map_init(Scratch::default, |scratch, (k, _)| match eval.focal(k) {
                Ok(mut f) => (f.exact_optimum(grid, scratch), Ok(f.baseline_spd())),
                Err(u) => (Err(Undefined::NotApplicable), Err(u)),
            })
            .collect();
        let mut ideal = BTreeMap::new();
        let mut baseline = BTreeMap::new();
        for (id, (opt, spd0)) in ids.into_iter().zip(per_program) {
            ideal.insert(id, opt);
            baseline.insert(id, spd0);
        }
        Ok(Evaluator {
            eval,
            registry: registry.clone(),
            attribute: attribute.to_string(),
            ideal,
            baseline,
        })
    }

    pub fn ideal(&self, program: ProgramId) -> Measured<BonusEvaluation> {
        self.ideal
            .get(&program)
            .copied()
            .unwrap_or(Err(Undefined::NotApplicable))
    }

    pub fn baseline_spd(&self, program: ProgramId) -> Measured<f64> {
        self.baseline
            .get(&program)
            .copied()
            .unwrap_or(Err(Undefined::NotApplicable))
    }

    /// Objective and SPD of deploying `bonus` at `program`.
    pub fn deploy(&self, program: ProgramId, bonus: f64) -> Result<Measured<BonusEvaluation>> {
        let k = self.eval.program_index(program)?;
        let mut scratch = Scratch::default();
        Ok(self
            .eval
            .focal(k)
            .and_then(|mut f| f.evaluate(bonus, &mut scratch)))
    }

    pub fn evaluate(&self, strategy: Strategy, suggestions: &[PolicySuggestion]) -> Result<EvaluationTable> {
        for s in suggestions {
            self.registry.get(s.program)?;
            if s.attribute != self.attribute {
                return Err(Error::Config(format!(
                    "suggestion for attribute `{}` evaluated under `{}`",
                    s.attribute, self.attribute
                )));
            }
        }
        let rows = suggestions
            .par_iter()
            .map(|s| self.row(strategy, s))
            .collect::<Result<Vec<_>>>()?;
        let summary = StrategySummary::from_rows(strategy, &self.attribute, &rows);
        Ok(EvaluationTable { rows, summary })
    }

    fn row(&self, strategy: Strategy, s: &PolicySuggestion) -> Result<EvaluationRow> {
        let deployed = self.deploy(s.program, s.bonus)?;
        let ideal = self.ideal(s.program);
        let spd_0 = self.baseline_spd(s.program);
        let mut row = EvaluationRow {
            program: s.program,
            strategy,
            attribute: s.attribute.clone(),
            suggested_bonus: s.bonus,
            ideal_bonus: ideal.ok().map(|e| e.bonus),
            objective_suggested: deployed.ok().map(|e| e.objective.value),
            objective_ideal: ideal.ok().map(|e| e.objective.value),
            objective_error: None,
            spd_0: spd_0.ok(),
            spd_b: deployed.ok().map(|e| e.spd),
            spd_delta: None,
            excluded: None,
        };
        match (deployed, ideal, spd_0) {
            (Ok(d), Ok(i), Ok(s0)) => {
                row.objective_error = Some(d.objective.value - i.objective.value);
                row.spd_delta = Some(d.spd.abs() - s0.abs());
            }
            (d, i, s0) => {
                row.excluded = [d.err(), i.err(), s0.err()].into_iter().flatten().next();
            }
        }
        Ok(row)
    }
}

/// Evaluates one strategy's suggestions on the realized year.
pub fn evaluate_strategy(
    strategy: Strategy,
    suggestions: &[PolicySuggestion],
    realized: &ApplicationSet,
    registry: &ProgramRegistry,
    attribute: &str,
    grid: &BonusGrid,
    lambda: f64,
) -> Result<EvaluationTable> {
    Evaluator::new(realized, registry, attribute, grid, lambda)?.evaluate(strategy, suggestions)
}
