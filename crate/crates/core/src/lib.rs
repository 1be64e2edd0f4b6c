//! Design of affirmative-action bonus policies for centralized, score-based
//! admissions.
//!
//! Students rank up to ten programs; programs admit by a weighted admission
//! score through student-proposing deferred acceptance. A bonus policy adds
//! points to protected-group applicants at a program. This crate measures
//! the effect of a bonus (admission-rate parity and admitted-score utility),
//! searches for the bonus minimizing a combined objective, and compares
//! strategies for choosing a bonus before the applicants are known: averaging
//! past years' optima, or averaging optima over application sets sampled
//! from a model of application behaviour.
//!
//! ```
//! use bonus_policy::prelude::*;
//!
//! let cfg = SyntheticConfig { n_students: 120, n_programs: 8, n_years: 2, ..Default::default() };
//! let history = generate_synthetic_history(&cfg).unwrap();
//! let last = history.years.last().unwrap();
//! let outcome = deferred_acceptance(last, &history.registry, &BonusPolicy::empty()).unwrap();
//! assert_eq!(outcome.assignment.len(), 120);
//! ```

pub mod applicant_model;
pub mod commands;
pub mod error;
pub mod experiment;
pub mod io;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod policy;
pub mod synthetic;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::applicant_model::{sample_application_set, sample_application_sets, train, ApplicantModel, TrainConfig};
    pub use crate::error::{Error, Result};
    pub use crate::experiment::{run_experiment, ExperimentConfig, ExperimentReport, ProgramFilter};
    pub use crate::matching::{cutoff, deferred_acceptance, MatchOutcome};
    pub use crate::metrics::{
        classify_spd, consistently_unequal, objective, prestige, spd, utility, InequalityFilter, Measured,
        ObjectiveValue, SpdClass, Undefined,
    };
    pub use crate::model::{
        admission_score, effective_score, ApplicationSet, BonusPolicy, Program, ProgramId, ProgramRegistry,
        Provenance, ScoreScale, Student, StudentId,
    };
    pub use crate::policy::{
        evaluate_strategy, ideal_policy, optimal_bonus, suggest_historical, suggest_predictive, BonusGrid,
        Evaluator, PolicySuggestion, Strategy,
    };
    pub use crate::synthetic::{generate_synthetic_history, SyntheticConfig, SyntheticHistory};
}
