//! Synthetic admission histories.
//!
//! Each student has a latent ability driving grades and test scores; members
//! of a protected group score lower by a configured gap. Programs carry a
//! latent prestige, and students list programs close to (slightly above)
//! their own standing in the cohort, so high scorers apply to prestigious
//! programs. Group shares and program popularity drift from year to year,
//! which makes per-program SPD fluctuate between cohorts.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gumbel, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ApplicationSet, Program, ProgramId, ProgramRegistry, Provenance, ScoreScale, Student, StudentId,
    GRADES, MAX_PREFERENCES,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    /// Expected share of the protected group in a cohort.
    pub protected_share: f64,
    /// Points subtracted from the protected group's mean test scores.
    pub test_gap: f64,
    /// Points subtracted from the protected group's mean grades.
    pub grade_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_students: usize,
    pub n_programs: usize,
    pub n_years: usize,
    pub groups: Vec<GroupSpec>,
    pub tests: Vec<String>,
    pub score_mean: f64,
    pub score_sd: f64,
    /// Total seats as a fraction of the cohort size.
    pub seat_ratio: f64,
    pub min_preferences: usize,
    pub max_preferences: usize,
    /// How sharply students concentrate on programs matching their standing.
    pub prestige_preference_strength: f64,
    /// Programs above a student's standing they still aim for, in percentile units.
    pub aspiration: f64,
    /// Noise on perceived prestige when a student orders the programs they list.
    pub ranking_noise: f64,
    /// Year-to-year standard deviation of each group's share.
    pub composition_sd: f64,
    /// Year-to-year standard deviation of each program's popularity.
    pub popularity_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_students: 1000,
            n_programs: 40,
            n_years: 5,
            groups: vec![
                GroupSpec {
                    name: "income".into(),
                    protected_share: 0.5,
                    test_gap: 28.0,
                    grade_gap: 10.0,
                },
                GroupSpec {
                    name: "gender".into(),
                    protected_share: 0.5,
                    test_gap: 23.0,
                    grade_gap: 5.0,
                },
            ],
            tests: vec!["math".into(), "lang".into()],
            score_mean: 500.0,
            score_sd: 100.0,
            seat_ratio: 0.6,
            min_preferences: 2,
            max_preferences: 5,
            prestige_preference_strength: 8.0,
            aspiration: 0.2,
            ranking_noise: 0.1,
            composition_sd: 0.05,
            popularity_sd: 0.05,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_students == 0 || self.n_programs == 0 || self.n_years == 0 {
            return bad("student, program and year counts must be positive");
        }
        if self.tests.is_empty() || self.tests.iter().any(|t| t == GRADES) {
            return bad("at least one test is required and `grades` is reserved");
        }
        for g in &self.groups {
            if !(g.test_gap >= 0.0 && g.grade_gap >= 0.0) {
                return bad("group score gaps must be >= 0");
            }
            if !(0.0..=1.0).contains(&g.protected_share) {
                return bad("protected share must lie in [0, 1]");
            }
        }
        if !(self.score_sd >= 0.0) || !(self.seat_ratio > 0.0) {
            return bad("score sd must be >= 0 and seat ratio > 0");
        }
        if self.min_preferences == 0 || self.min_preferences > self.max_preferences {
            return bad("preference bounds must satisfy 1 <= min <= max");
        }
        if self.max_preferences > MAX_PREFERENCES {
            return bad("preference lists are limited to ten programs");
        }
        if self.max_preferences > self.n_programs {
            return Err(Error::Infeasible(format!(
                "{} preference slots requested but only {} programs exist",
                self.max_preferences, self.n_programs
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticHistory {
    pub registry: ProgramRegistry,
    /// Cohorts, oldest first.
    pub years: Vec<ApplicationSet>,
    /// Latent prestige of each program in `[0, 1]`.
    pub program_quality: BTreeMap<ProgramId, f64>,
}

pub fn year_label(index: usize) -> String {
    format!("year{:02}", index + 1)
}

pub fn generate_synthetic_history(cfg: &SyntheticConfig) -> Result<SyntheticHistory> {
    cfg.validate()?;
    let scale = ScoreScale::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let quality: Vec<f64> = (0..cfg.n_programs).map(|_| rng.random::<f64>()).collect();
    let size: Vec<f64> = (0..cfg.n_programs).map(|_| rng.random_range(0.5..1.5)).collect();
    let size_total: f64 = size.iter().sum();
    let seats = cfg.seat_ratio * cfg.n_students as f64;
    let mut programs = Vec::with_capacity(cfg.n_programs);
    for k in 0..cfg.n_programs {
        let capacity = ((seats * size[k] / size_total).round() as usize).max(1);
        let grade_weight = rng.random_range(0.1..0.4);
        let raw: Vec<f64> = cfg.tests.iter().map(|_| rng.random_range(0.2..1.0)).collect();
        let raw_total: f64 = raw.iter().sum();
        let mut weights = BTreeMap::new();
        weights.insert(GRADES.to_string(), grade_weight);
        for (t, r) in cfg.tests.iter().zip(&raw) {
            weights.insert(t.clone(), (1.0 - grade_weight) * r / raw_total);
        }
        programs.push(Program::new(ProgramId(k as u32 + 1), capacity, weights)?);
    }
    let registry = ProgramRegistry::new(programs, scale)?;

    let mut years = Vec::with_capacity(cfg.n_years);
    for y in 0..cfg.n_years {
        let shares: Vec<f64> = cfg
            .groups
            .iter()
            .map(|g| {
                if g.protected_share <= 0.0 || g.protected_share >= 1.0 {
                    return g.protected_share;
                }
                let z: f64 = StandardNormal.sample(&mut rng);
                (g.protected_share + cfg.composition_sd * z).clamp(0.05, 0.95)
            })
            .collect();
        let popularity: Vec<f64> = quality
            .iter()
            .map(|q| {
                let z: f64 = StandardNormal.sample(&mut rng);
                q + cfg.popularity_sd * z
            })
            .collect();
        years.push(generate_cohort(cfg, &registry, &shares, &popularity, y, &mut rng)?);
    }

    Ok(SyntheticHistory {
        program_quality: registry.ids().zip(quality).collect(),
        registry,
        years,
    })
}

fn generate_cohort(
    cfg: &SyntheticConfig,
    registry: &ProgramRegistry,
    shares: &[f64],
    popularity: &[f64],
    year: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ApplicationSet> {
    let scale = registry.scale();
    let clamp = |v: f64| v.clamp(scale.min, scale.max);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let gumbel = Gumbel::new(0.0, 1.0).expect("standard gumbel");

    let mut students = Vec::with_capacity(cfg.n_students);
    let mut standing = Vec::with_capacity(cfg.n_students);
    for i in 0..cfg.n_students {
        let mut group_attrs = BTreeMap::new();
        let mut test_shift = 0.0;
        let mut grade_shift = 0.0;
        for (g, share) in cfg.groups.iter().zip(shares) {
            let protected = rng.random::<f64>() < *share;
            if protected {
                test_shift += g.test_gap;
                grade_shift += g.grade_gap;
            }
            group_attrs.insert(g.name.clone(), protected);
        }
        let ability: f64 = noise.sample(rng);
        let grade_noise: f64 = noise.sample(rng);
        let grade_score = clamp(
            cfg.score_mean + cfg.score_sd * (0.6 * ability + 0.8 * grade_noise) - grade_shift,
        );
        let mut test_scores = BTreeMap::new();
        let mut composite = grade_score;
        for t in &cfg.tests {
            let e: f64 = noise.sample(rng);
            let v = clamp(cfg.score_mean + cfg.score_sd * (0.8 * ability + 0.6 * e) - test_shift);
            composite += v;
            test_scores.insert(t.clone(), v);
        }
        standing.push((composite, i));
        students.push(Student {
            id: StudentId(i as u32 + 1),
            grade_score,
            test_scores,
            group_attrs,
            preferences: Vec::new(),
        });
    }

    // percentile of each student's composite within the cohort
    standing.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let n = cfg.n_students as f64;
    let mut percentile = vec![0.0; cfg.n_students];
    for (rank, (_, i)) in standing.iter().enumerate() {
        percentile[*i] = (rank as f64 + 0.5) / n;
    }

    let ids: Vec<ProgramId> = registry.ids().collect();
    for (i, student) in students.iter_mut().enumerate() {
        let target = percentile[i] + cfg.aspiration;
        let len = rng.random_range(cfg.min_preferences..=cfg.max_preferences);
        let mut utility: Vec<(f64, usize)> = popularity
            .iter()
            .enumerate()
            .map(|(k, q)| {
                let g: f64 = gumbel.sample(rng);
                (-cfg.prestige_preference_strength * (q - target).powi(2) + g, k)
            })
            .collect();
        utility.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut chosen: Vec<(f64, usize)> = utility
            .iter()
            .take(len)
            .map(|(_, k)| {
                let e: f64 = noise.sample(rng);
                (popularity[*k] + cfg.ranking_noise * e, *k)
            })
            .collect();
        chosen.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        student.preferences = chosen.iter().map(|(_, k)| ids[*k]).collect();
    }

    ApplicationSet::new(year_label(year), students, Provenance::Synthetic, registry)
}
