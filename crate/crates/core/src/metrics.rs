//! Fairness and utility measurements on match outcomes.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::MatchOutcome;
use crate::model::{admission_score, ApplicationSet, ProgramId, ProgramRegistry};

/// |SPD| above this is strongly unequal; the boundary itself is accepted.
pub const STRONG_SPD: f64 = 0.1;

/// A metric that cannot be computed for a program. Kept apart from hard
/// errors so callers can exclude the program from aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, thiserror::Error)]
#[serde(rename_all = "snake_case")]
pub enum Undefined {
    #[error("no applicants from the protected group")]
    NoProtectedApplicants,
    #[error("no applicants outside the protected group")]
    NoOtherApplicants,
    #[error("no admitted students")]
    NoAdmitted,
    #[error("no admission history")]
    NoHistory,
    #[error("fewer than three years of defined SPD")]
    InsufficientHistory,
    #[error("no applicable application set")]
    NotApplicable,
}

pub type Measured<T> = std::result::Result<T, Undefined>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCounts {
    pub protected: usize,
    pub other: usize,
}

/// Applicant and admitted counts per group at one program. Applicants are
/// all students listing the program, wherever they ended up.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GroupRates {
    pub applicants: GroupCounts,
    pub admitted: GroupCounts,
}

impl GroupRates {
    pub fn spd(&self) -> Measured<f64> {
        if self.applicants.protected == 0 {
            return Err(Undefined::NoProtectedApplicants);
        }
        if self.applicants.other == 0 {
            return Err(Undefined::NoOtherApplicants);
        }
        let rate_protected = self.admitted.protected as f64 / self.applicants.protected as f64;
        let rate_other = self.admitted.other as f64 / self.applicants.other as f64;
        Ok(rate_protected - rate_other)
    }
}

pub fn group_rates(
    outcome: &MatchOutcome,
    apps: &ApplicationSet,
    program: ProgramId,
    attribute: &str,
) -> Result<GroupRates> {
    let po = outcome.program(program)?;
    let mut rates = GroupRates::default();
    let protected = |id| {
        apps.student(id)
            .map(|s| s.is_protected(attribute))
            .ok_or_else(|| Error::Config(format!("student {id} not in application set")))
    };
    for id in &po.applicants {
        if protected(*id)? {
            rates.applicants.protected += 1;
        } else {
            rates.applicants.other += 1;
        }
    }
    for id in &po.admitted {
        if protected(*id)? {
            rates.admitted.protected += 1;
        } else {
            rates.admitted.other += 1;
        }
    }
    Ok(rates)
}

/// Statistical parity difference: admission rate of the protected group
/// minus that of everyone else, among the program's applicants.
pub fn spd(
    outcome: &MatchOutcome,
    apps: &ApplicationSet,
    program: ProgramId,
    attribute: &str,
) -> Result<Measured<f64>> {
    Ok(group_rates(outcome, apps, program, attribute)?.spd())
}

/// Mean admission score, without bonus, of the students admitted.
pub fn utility(
    outcome: &MatchOutcome,
    apps: &ApplicationSet,
    registry: &ProgramRegistry,
    program: ProgramId,
) -> Result<Measured<f64>> {
    let po = outcome.program(program)?;
    let prog = registry.get(program)?;
    if po.admitted.is_empty() {
        return Ok(Err(Undefined::NoAdmitted));
    }
    let mut total = 0.0;
    for id in &po.admitted {
        let s = apps
            .student(*id)
            .ok_or_else(|| Error::Config(format!("student {id} not in application set")))?;
        total += admission_score(s, prog)?;
    }
    Ok(Ok(total / po.admitted.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub value: f64,
    pub utility_loss: f64,
    pub abs_spd: f64,
    pub lambda: f64,
}

impl ObjectiveValue {
    /// `(mu_0 - mu_b) + lambda * |spd_b|`.
    pub fn new(baseline_utility: f64, utility: f64, spd: f64, lambda: f64) -> Self {
        let utility_loss = baseline_utility - utility;
        let abs_spd = spd.abs();
        ObjectiveValue {
            value: utility_loss + lambda * abs_spd,
            utility_loss,
            abs_spd,
            lambda,
        }
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("lambda must be a finite value >= 0, got {lambda}")))
    }
}

/// Objective of the bonused outcome against the no-bonus baseline, both
/// computed on the same application set.
pub fn objective(
    outcome_b: &MatchOutcome,
    outcome_0: &MatchOutcome,
    apps: &ApplicationSet,
    registry: &ProgramRegistry,
    program: ProgramId,
    attribute: &str,
    lambda: f64,
) -> Result<Measured<ObjectiveValue>> {
    check_lambda(lambda)?;
    let baseline = utility(outcome_0, apps, registry, program)?;
    let with_bonus = utility(outcome_b, apps, registry, program)?;
    let spd_b = spd(outcome_b, apps, program, attribute)?;
    Ok((|| Ok(ObjectiveValue::new(baseline?, with_bonus?, spd_b?, lambda)))())
}

/// Pooled mean admission score of every student admitted to `program` over
/// the last three entries of `history` (oldest first). Shorter histories
/// use what is there.
pub fn prestige(
    program: ProgramId,
    history: &[(&ApplicationSet, &MatchOutcome)],
    registry: &ProgramRegistry,
) -> Result<Measured<f64>> {
    let prog = registry.get(program)?;
    let window = &history[history.len().saturating_sub(3)..];
    let mut total = 0.0;
    let mut count = 0usize;
    for (apps, outcome) in window {
        let po = outcome.program(program)?;
        for id in &po.admitted {
            let s = apps
                .student(*id)
                .ok_or_else(|| Error::Config(format!("student {id} not in application set")))?;
            total += admission_score(s, prog)?;
            count += 1;
        }
    }
    if count == 0 {
        return Ok(Err(Undefined::NoHistory));
    }
    Ok(Ok(total / count as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpdClass {
    Accepted,
    StronglyUnequal,
}

pub fn classify_spd(spd: f64) -> SpdClass {
    if spd.abs() > STRONG_SPD {
        SpdClass::StronglyUnequal
    } else {
        SpdClass::Accepted
    }
}

/// Thresholds of the consistent-inequality filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityFilter {
    /// |SPD| must exceed this in every year to count as unequal.
    pub floor: f64,
    /// |SPD| must exceed this in at least two of the three years.
    pub strong: f64,
}

impl Default for InequalityFilter {
    fn default() -> Self {
        InequalityFilter {
            floor: 0.05,
            strong: STRONG_SPD,
        }
    }
}

/// Whether the last three SPD values show a persistent gap against the same
/// group, strong in at least two of the years.
pub fn consistently_unequal(spd_history: &[Measured<f64>], filter: &InequalityFilter) -> Measured<bool> {
    if spd_history.len() < 3 {
        return Err(Undefined::InsufficientHistory);
    }
    let recent = &spd_history[spd_history.len() - 3..];
    let mut values = [0.0; 3];
    for (slot, v) in values.iter_mut().zip(recent) {
        *slot = v.map_err(|_| Undefined::InsufficientHistory)?;
    }
    let unequal = values.iter().all(|v| v.abs() > filter.floor);
    let same_side = values.iter().all(|v| *v < 0.0) || values.iter().all(|v| *v > 0.0);
    let strong_years = values.iter().filter(|v| v.abs() > filter.strong).count();
    Ok(unequal && same_side && strong_years >= 2)
}

/// One row of the per-program metric table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramMetrics {
    pub program: ProgramId,
    pub spd: Option<f64>,
    pub utility: Option<f64>,
    pub admitted_count: usize,
    pub applicant_counts: GroupCounts,
    pub classification: Option<SpdClass>,
}

pub fn program_metrics(
    outcome: &MatchOutcome,
    apps: &ApplicationSet,
    registry: &ProgramRegistry,
    attribute: &str,
) -> Result<Vec<ProgramMetrics>> {
    registry
        .ids()
        .map(|program| {
            let rates = group_rates(outcome, apps, program, attribute)?;
            let spd = rates.spd().ok();
            Ok(ProgramMetrics {
                program,
                spd,
                utility: utility(outcome, apps, registry, program)?.ok(),
                admitted_count: rates.admitted.protected + rates.admitted.other,
                applicant_counts: rates.applicants,
                classification: spd.map(classify_spd),
            })
        })
        .collect()
}

#[derive(Serialize)]
struct MetricsRow {
    program: ProgramId,
    spd: Option<f64>,
    utility: Option<f64>,
    admitted_count: usize,
    protected_applicants: usize,
    other_applicants: usize,
    classification: &'static str,
}

/// CSV columns: program, spd, utility, admitted_count, protected_applicants,
/// other_applicants, classification. Undefined values are empty cells.
pub fn write_metrics_csv<W: Write>(rows: &[ProgramMetrics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(MetricsRow {
            program: r.program,
            spd: r.spd,
            utility: r.utility,
            admitted_count: r.admitted_count,
            protected_applicants: r.applicant_counts.protected,
            other_applicants: r.applicant_counts.other,
            classification: match r.classification {
                Some(SpdClass::Accepted) => "accepted",
                Some(SpdClass::StronglyUnequal) => "strongly_unequal",
                None => "undefined",
            },
        })?;
    }
    w.flush()?;
    Ok(())
}
