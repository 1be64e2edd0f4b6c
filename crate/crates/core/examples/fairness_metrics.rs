//! Per-program SPD, utility, strong-inequality classification and the
//! consistency filter over a synthetic history.
//!
//! Run with `cargo run --example fairness_metrics`.

use bonus_policy::metrics::{consistently_unequal, InequalityFilter};
use bonus_policy::prelude::*;

pub fn run_example() -> Result<usize> {
    let cfg = SyntheticConfig { n_students: 600, n_programs: 12, n_years: 3, seed: 1, ..Default::default() };
    let history = generate_synthetic_history(&cfg)?;
    let outcomes: Vec<MatchOutcome> = history
        .years
        .iter()
        .map(|y| deferred_acceptance(y, &history.registry, &BonusPolicy::empty()))
        .collect::<Result<_>>()?;

    let filter = InequalityFilter::default();
    let mut consistent = 0;
    println!("program   spd by year            utility   class   consistent");
    for program in history.registry.ids() {
        let spds: Vec<Measured<f64>> = history
            .years
            .iter()
            .zip(&outcomes)
            .map(|(set, o)| spd(o, set, program, "income"))
            .collect::<Result<_>>()?;
        let last = history.years.len() - 1;
        let mu = utility(&outcomes[last], &history.years[last], &history.registry, program)?;
        let class = spds[last].map(classify_spd);
        let flag = consistently_unequal(&spds, &filter) == Ok(true);
        consistent += flag as usize;
        let shown: Vec<String> = spds
            .iter()
            .map(|s| s.map_or("  n/a".into(), |v| format!("{v:+.3}")))
            .collect();
        println!(
            "{program:>7}   {}   {:>7}   {:?}   {flag}",
            shown.join(" "),
            mu.map_or("n/a".into(), |u| format!("{u:.1}")),
            class.ok(),
        );
    }
    println!("{consistent} programs consistently unequal");
    Ok(consistent)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
