//! Writes a synthetic history in the dataset layout, loads it back and
//! checks nothing was lost.
//!
//! Run with `cargo run --example csv_roundtrip [dir]`.

use std::path::{Path, PathBuf};

use bonus_policy::io::{load_dataset, write_dataset};
use bonus_policy::prelude::*;

pub fn run_example(dir: &Path) -> Result<bool> {
    let cfg = SyntheticConfig { n_students: 150, n_programs: 8, n_years: 2, seed: 4, ..Default::default() };
    let history = generate_synthetic_history(&cfg)?;
    write_dataset(dir, &history.registry, &history.years)?;
    let loaded = load_dataset(dir, ScoreScale::default())?;

    let same_programs = loaded.registry == history.registry;
    let same_students = loaded
        .years
        .iter()
        .zip(&history.years)
        .all(|(a, b)| a.year_label() == b.year_label() && a.students() == b.students());
    println!(
        "wrote and reloaded {} programs and {} cohorts under {}: identical = {}",
        loaded.registry.len(),
        loaded.years.len(),
        dir.display(),
        same_programs && same_students
    );
    Ok(same_programs && same_students)
}

fn main() -> Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("bonus-policy-csv-roundtrip"));
    run_example(&dir).map(|_| ())
}
