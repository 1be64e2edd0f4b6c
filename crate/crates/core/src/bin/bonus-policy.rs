use std::path::PathBuf;
use std::process::ExitCode;

use bonus_policy::commands::{cmd_evaluate, cmd_generate, cmd_report, cmd_suggest, RunConfig};
use bonus_policy::experiment::ProgramFilter;
use bonus_policy::policy::Strategy;
use bonus_policy::synthetic::SyntheticConfig;
use bonus_policy::{io::read_json, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bonus-policy", version, about = "Bonus policy design for score-based admissions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-year dataset.
    Generate(Common),
    /// Suggest per-program bonuses for the last cohort.
    Suggest(Common),
    /// Evaluate suggestion files against the ideal policy.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Suggestion files; defaults to every suggestions-*.json in the output directory.
        suggestions: Vec<PathBuf>,
    },
    /// Per-program metrics of the last cohort without bonuses.
    Report(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    All,
    Consistent,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Synthetic generator configuration (JSON).
    #[arg(long)]
    synthetic: Option<PathBuf>,
    #[arg(long)]
    attribute: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    /// historical-<k>, predictive-<n> or ideal.
    #[arg(long)]
    strategy: Option<Strategy>,
    #[arg(long)]
    grid_max: Option<f64>,
    #[arg(long)]
    grid_step: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    filter: Option<FilterArg>,
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long, env = "BONUS_POLICY_OUT")]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(self) -> Result<RunConfig, Error> {
        let mut cfg: RunConfig = match &self.config {
            Some(path) => read_json(path).map_err(|e| Error::Config(e.to_string()))?,
            None => RunConfig::default(),
        };
        if let Some(path) = &self.synthetic {
            let s: SyntheticConfig = read_json(path).map_err(|e| Error::Config(e.to_string()))?;
            cfg.synthetic = Some(s);
        }
        if let Some(d) = self.data {
            cfg.data = Some(d);
        }
        if let Some(a) = self.attribute {
            cfg.attribute = a;
        }
        if self.lambda.is_some() {
            cfg.lambda = self.lambda;
        }
        if self.strategy.is_some() {
            cfg.strategy = self.strategy;
        }
        if let Some(v) = self.grid_max {
            cfg.grid_max = v;
        }
        if let Some(v) = self.grid_step {
            cfg.grid_step = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(f) = self.filter {
            cfg.filter = match f {
                FilterArg::All => ProgramFilter::All,
                FilterArg::Consistent => ProgramFilter::Consistent,
            };
        }
        if self.sample_size.is_some() {
            cfg.sample_size = self.sample_size;
        }
        if let Some(o) = self.out {
            cfg.out = o;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate(c) => {
            let s = cmd_generate(&c.resolve()?)?;
            println!("generated {} programs over {} years", s.programs, s.years.len());
        }
        Command::Suggest(c) => {
            let f = cmd_suggest(&c.resolve()?)?;
            println!(
                "{}: {} suggestions, {} programs skipped",
                f.strategy,
                f.suggestions.len(),
                f.skipped.len()
            );
        }
        Command::Evaluate { common, suggestions } => {
            let r = cmd_evaluate(&common.resolve()?, &suggestions)?;
            for t in &r.tables {
                let s = &t.summary;
                println!(
                    "{}: objective error {:.3} (sd {:.3}), spd delta {:.4}, bonus {:.2}",
                    s.strategy, s.objective_error.mean, s.objective_error.sd, s.spd_delta.mean, s.bonus.mean
                );
            }
        }
        Command::Report(c) => {
            let r = cmd_report(&c.resolve()?)?;
            println!("{} programs, {} consistently unequal", r.metrics.len(), r.consistent_programs.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
