//! Trains the applicant model on one year, samples application sets from it
//! and averages their optimal bonuses.
//!
//! Run with `cargo run --release --example predictive_strategy`.

use bonus_policy::applicant_model::{sample_application_sets, train, TrainConfig};
use bonus_policy::policy::suggest_predictive_all;
use bonus_policy::prelude::*;

pub fn run_example() -> Result<Vec<PolicySuggestion>> {
    let cfg = SyntheticConfig { n_students: 400, n_programs: 10, n_years: 2, seed: 3, ..Default::default() };
    let history = generate_synthetic_history(&cfg)?;
    let model = train(&history.years[0], &history.registry, TrainConfig::new("gender"))?;
    println!(
        "trained on {} students, {} score buckets",
        model.cohort_pool.len(),
        model.bucket_edges.len()
    );

    let sampled = sample_application_sets(&model, &history.registry, 20, 400, 11)?;
    let dropped: usize = sampled.iter().map(|s| s.dropped).sum();
    let sets: Vec<ApplicationSet> = sampled.into_iter().map(|s| s.set).collect();
    println!("sampled {} sets ({dropped} students dropped)", sets.len());

    let suggestions: Vec<PolicySuggestion> =
        suggest_predictive_all(&sets, &history.registry, "gender", &BonusGrid::default(), 23.0)?
            .into_values()
            .filter_map(|s| s.ok())
            .collect();
    for s in &suggestions {
        println!("program {}: bonus {:.2} from {} sets", s.program, s.bonus, s.support);
    }
    Ok(suggestions)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
