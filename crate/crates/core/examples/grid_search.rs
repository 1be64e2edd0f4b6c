//! Hindsight-optimal bonus of every program on one cohort, and the objective
//! curve of one program over the grid.
//!
//! Run with `cargo run --example grid_search`.

use bonus_policy::prelude::*;

pub fn run_example() -> Result<Vec<(ProgramId, f64)>> {
    let cfg = SyntheticConfig { n_students: 500, n_programs: 10, n_years: 1, seed: 2, ..Default::default() };
    let history = generate_synthetic_history(&cfg)?;
    let cohort = &history.years[0];
    let grid = BonusGrid::range(30.0, 1.0)?;
    let lambda = 28.0;

    let mut optima = Vec::new();
    for program in history.registry.ids() {
        match optimal_bonus(cohort, &history.registry, program, "income", &grid, lambda)? {
            Ok(e) => {
                println!(
                    "program {program}: bonus {:>4.1}  objective {:.3}  (utility loss {:.2}, |SPD| {:.3})",
                    e.bonus, e.objective.value, e.objective.utility_loss, e.objective.abs_spd
                );
                optima.push((program, e.bonus));
            }
            Err(reason) => println!("program {program}: skipped ({reason})"),
        }
    }

    if let Some((program, _)) = optima.first() {
        let base = deferred_acceptance(cohort, &history.registry, &BonusPolicy::empty())?;
        println!("objective curve at program {program}:");
        for b in grid.values().iter().step_by(5) {
            let policy = BonusPolicy::single(*program, "income", *b)?;
            let outcome = deferred_acceptance(cohort, &history.registry, &policy)?;
            if let Ok(o) = objective(&outcome, &base, cohort, &history.registry, *program, "income", lambda)? {
                println!("  b = {b:>4}: {:.3}", o.value);
            }
        }
    }
    Ok(optima)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
