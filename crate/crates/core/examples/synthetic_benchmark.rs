//! Compares historical, predictive and ideal strategies on a synthetic
//! history and prints the three summary tables.
//!
//! Run with `cargo run --release --example synthetic_benchmark [seed]`.

use bonus_policy::experiment::default_lambda;
use bonus_policy::prelude::*;

pub fn run_example(seed: u64, n_students: usize, n_programs: usize) -> Result<Vec<ExperimentReport>> {
    let cfg = SyntheticConfig { n_students, n_programs, n_years: 5, seed, ..Default::default() };
    let history = generate_synthetic_history(&cfg)?;
    let strategies = [
        Strategy::Historical(1),
        Strategy::Historical(3),
        Strategy::Predictive(50),
        Strategy::Ideal,
    ];
    let mut reports = Vec::new();
    for attribute in ["income", "gender"] {
        let mut exp = ExperimentConfig::new(attribute, default_lambda(attribute).expect("known attribute"));
        exp.seed = seed;
        let report = run_experiment(&history.years, &history.registry, &strategies, &exp)?;
        println!("{attribute} ({} consistently unequal programs)", report.consistent_programs.len());
        println!("  strategy        objective error      spd delta (consistent)   bonus");
        for s in strategies {
            let all = &report.table(s, ProgramFilter::All).expect("strategy ran").summary;
            let cons = &report.table(s, ProgramFilter::Consistent).expect("strategy ran").summary;
            println!(
                "  {:<14} {:>6.3} ({:>6.3})   {:>+8.4} ({:>6.4})      {:>5.2} ({:>5.2})",
                s.to_string(),
                all.objective_error.mean,
                all.objective_error.sd,
                cons.spd_delta.mean,
                cons.spd_delta.sd,
                all.bonus.mean,
                all.bonus.sd
            );
        }
        reports.push(report);
    }
    Ok(reports)
}

fn main() -> Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    run_example(seed, 1000, 40).map(|_| ())
}
