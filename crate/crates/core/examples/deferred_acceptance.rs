//! Student-proposing deferred acceptance with and without a bonus.
//!
//! Run with `cargo run --example deferred_acceptance`.

use std::collections::BTreeMap;

use bonus_policy::prelude::*;

fn student(id: u32, score: f64, protected: bool, prefs: &[u32]) -> Student {
    Student {
        id: StudentId(id),
        grade_score: score,
        test_scores: BTreeMap::new(),
        group_attrs: BTreeMap::from([("income".to_string(), protected)]),
        preferences: prefs.iter().map(|p| ProgramId(*p)).collect(),
    }
}

pub fn run_example() -> Result<(MatchOutcome, MatchOutcome)> {
    let grades_only = BTreeMap::from([("grades".to_string(), 1.0)]);
    let registry = ProgramRegistry::new(
        [
            Program::new(ProgramId(1), 2, grades_only.clone())?,
            Program::new(ProgramId(2), 2, grades_only)?,
        ],
        ScoreScale::default(),
    )?;
    let apps = ApplicationSet::new(
        "example",
        vec![
            student(1, 720.0, false, &[1, 2]),
            student(2, 700.0, false, &[1, 2]),
            student(3, 690.0, true, &[1, 2]),
            student(4, 650.0, true, &[2, 1]),
            student(5, 600.0, false, &[2]),
        ],
        Provenance::Historical,
        &registry,
    )?;

    let plain = deferred_acceptance(&apps, &registry, &BonusPolicy::empty())?;
    let bonus = BonusPolicy::single(ProgramId(1), "income", 15.0)?;
    let bonused = deferred_acceptance(&apps, &registry, &bonus)?;
    for (label, outcome) in [("no bonus", &plain), ("15 points at program 1", &bonused)] {
        println!("{label}:");
        for (student, program) in &outcome.assignment {
            let program = program.map_or("-".to_string(), |p| p.to_string());
            println!("  student {student} -> {program}");
        }
        println!("  cutoff at program 1: {}", cutoff(outcome, ProgramId(1))?);
    }
    Ok((plain, bonused))
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
