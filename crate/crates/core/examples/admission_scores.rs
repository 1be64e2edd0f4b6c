//! Admission and effective scores under a bonus policy.
//!
//! Run with `cargo run --example admission_scores`.

use std::collections::BTreeMap;

use bonus_policy::model::{admission_score, effective_score, BonusPolicy, Program, ProgramId, Student, StudentId};

pub fn run_example() -> bonus_policy::Result<(f64, f64)> {
    let program = Program::new(
        ProgramId(1),
        30,
        BTreeMap::from([("grades".to_string(), 0.3), ("math".to_string(), 0.7)]),
    )?;
    let student = Student {
        id: StudentId(7),
        grade_score: 600.0,
        test_scores: BTreeMap::from([("math".to_string(), 700.0)]),
        group_attrs: BTreeMap::from([("income".to_string(), true), ("gender".to_string(), true)]),
        preferences: vec![ProgramId(1)],
    };

    let mut policy = BonusPolicy::empty();
    policy.insert(ProgramId(1), "income", 10.0)?;
    policy.insert(ProgramId(1), "gender", 5.0)?;

    let raw = admission_score(&student, &program)?;
    let effective = effective_score(&student, &program, &policy)?;
    println!("admission score {raw:.1}, effective score {effective:.1}");
    println!("policy as JSON: {}", serde_json::to_string(&policy).expect("serializable"));
    Ok((raw, effective))
}

fn main() -> bonus_policy::Result<()> {
    run_example().map(|_| ())
}
