//! Predictive model of application behaviour.
//!
//! For every program the model keeps the empirical probability that a
//! student lists it, conditioned on the student's admission-score bucket at
//! that program and their group under one attribute. Sampling bootstraps
//! students from the training cohort (scores and groups intact) and draws a
//! fresh preference list for each from those probabilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    admission_score, ApplicationSet, ProgramId, ProgramRegistry, Provenance, ScoreScale, Student,
    StudentId, MAX_PREFERENCES,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub attribute: String,
    /// Width of admission-score buckets, in points.
    pub bucket_width: f64,
    /// Standard deviation of the log-normal factor perturbing propensities
    /// when ordering a sampled preference list.
    pub rank_noise: f64,
}

impl TrainConfig {
    pub fn new(attribute: impl Into<String>) -> Self {
        TrainConfig {
            attribute: attribute.into(),
            bucket_width: 50.0,
            rank_noise: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicantModel {
    pub config: TrainConfig,
    pub scale: ScoreScale,
    pub programs: Vec<ProgramId>,
    /// Lower edges of the score buckets; the last bucket is closed above.
    pub bucket_edges: Vec<f64>,
    /// `propensity[program][bucket] = [non-protected, protected]`.
    pub propensity: Vec<Vec<[f64; 2]>>,
    pub cohort_pool: Vec<Student>,
    /// `pool_buckets[student][program]`: bucket of the pool student's
    /// admission score at each program.
    pub pool_buckets: Vec<Vec<u16>>,
    /// Preference-list lengths observed in the training cohort.
    pub list_lengths: Vec<u8>,
}

impl ApplicantModel {
    fn bucket(&self, score: f64) -> usize {
        bucket_of(score, &self.scale, self.config.bucket_width, self.bucket_edges.len())
    }

    /// Probability that a student with admission score `score` at `program`
    /// lists it.
    pub fn propensity_for(&self, program: ProgramId, score: f64, protected: bool) -> Option<f64> {
        let k = self.programs.binary_search(&program).ok()?;
        Some(self.propensity[k][self.bucket(score)][protected as usize])
    }

    fn pool_propensities(&self, student: usize) -> impl Iterator<Item = f64> + '_ {
        let protected = self.cohort_pool[student].is_protected(&self.config.attribute) as usize;
        self.pool_buckets[student]
            .iter()
            .zip(&self.propensity)
            .map(move |(b, cells)| cells[*b as usize][protected])
    }
}

fn bucket_of(score: f64, scale: &ScoreScale, width: f64, buckets: usize) -> usize {
    let raw = ((score - scale.min) / width).floor();
    if raw <= 0.0 {
        0
    } else {
        (raw as usize).min(buckets - 1)
    }
}

/// Estimates cell propensities from one cohort. Empty (bucket, group) cells
/// fall back to the bucket's rate over both groups, and empty buckets to the
/// program's overall rate.
pub fn train(cohort: &ApplicationSet, registry: &ProgramRegistry, config: TrainConfig) -> Result<ApplicantModel> {
    if cohort.is_empty() {
        return Err(Error::Config("cannot train on an empty cohort".into()));
    }
    if !(config.bucket_width > 0.0) || !(config.rank_noise >= 0.0) {
        return Err(Error::Config("bucket width must be > 0 and rank noise >= 0".into()));
    }
    let scale = registry.scale();
    let n_buckets = (((scale.max - scale.min) / config.bucket_width).ceil() as usize).max(1);
    let bucket_edges: Vec<f64> = (0..n_buckets)
        .map(|b| scale.min + b as f64 * config.bucket_width)
        .collect();
    let programs: Vec<ProgramId> = registry.ids().collect();

    let mut pool_buckets = Vec::with_capacity(cohort.len());
    for s in cohort.students() {
        let row = registry
            .iter()
            .map(|p| {
                admission_score(s, p).map(|a| bucket_of(a, &scale, config.bucket_width, n_buckets) as u16)
            })
            .collect::<Result<Vec<u16>>>()?;
        pool_buckets.push(row);
    }

    // [program][bucket][group] -> (listed, total)
    let mut counts = vec![vec![[(0u32, 0u32); 2]; n_buckets]; programs.len()];
    for (s, student) in cohort.students().iter().enumerate() {
        let g = student.is_protected(&config.attribute) as usize;
        for (k, p) in programs.iter().enumerate() {
            let cell = &mut counts[k][pool_buckets[s][k] as usize][g];
            cell.1 += 1;
            if student.lists(*p) {
                cell.0 += 1;
            }
        }
    }

    let propensity = counts
        .iter()
        .map(|per_bucket| {
            let (listed, total) = per_bucket
                .iter()
                .flatten()
                .fold((0, 0), |(l, t), (a, b)| (l + a, t + b));
            let program_rate = listed as f64 / total as f64;
            per_bucket
                .iter()
                .map(|cells| {
                    let (bl, bt) = (cells[0].0 + cells[1].0, cells[0].1 + cells[1].1);
                    let bucket_rate = if bt > 0 { bl as f64 / bt as f64 } else { program_rate };
                    cells.map(|(l, t)| if t > 0 { l as f64 / t as f64 } else { bucket_rate })
                })
                .collect()
        })
        .collect();

    Ok(ApplicantModel {
        config,
        scale,
        programs,
        bucket_edges,
        propensity,
        cohort_pool: cohort.students().to_vec(),
        pool_buckets,
        list_lengths: cohort
            .students()
            .iter()
            .map(|s| s.preferences.len() as u8)
            .collect(),
    })
}

#[derive(Debug, Clone)]
pub struct SampledSet {
    pub set: ApplicationSet,
    /// Students drawn with no program of positive propensity.
    pub dropped: usize,
}

/// Draws one application set of `n_students` bootstrapped students, each
/// with a preference list sampled from the model.
pub fn sample_application_set(
    model: &ApplicantModel,
    registry: &ProgramRegistry,
    n_students: usize,
    seed: u64,
) -> Result<SampledSet> {
    let rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(model, registry, n_students, rng, format!("sample-{seed}"))
}

/// `n_sets` application sets; set `i` uses stream `i` of the generator
/// seeded with `seed`, so each set is reproducible on its own.
pub fn sample_application_sets(
    model: &ApplicantModel,
    registry: &ProgramRegistry,
    n_sets: usize,
    n_students: usize,
    seed: u64,
) -> Result<Vec<SampledSet>> {
    (0..n_sets)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            sample_with(model, registry, n_students, rng, format!("sample-{seed}-{i}"))
        })
        .collect()
}

fn sample_with(
    model: &ApplicantModel,
    registry: &ProgramRegistry,
    n_students: usize,
    mut rng: ChaCha8Rng,
    label: String,
) -> Result<SampledSet> {
    if model.cohort_pool.is_empty() {
        return Err(Error::Config("model has an empty cohort pool".into()));
    }
    let mut students = Vec::with_capacity(n_students);
    let mut dropped = 0;
    for i in 0..n_students {
        let pick = rng.random_range(0..model.cohort_pool.len());
        let wanted = model.list_lengths[rng.random_range(0..model.list_lengths.len())] as usize;
        let preferences = sample_preferences(model, pick, wanted, &mut rng);
        if preferences.is_empty() {
            dropped += 1;
            continue;
        }
        let source = &model.cohort_pool[pick];
        students.push(Student {
            id: StudentId(i as u32 + 1),
            grade_score: source.grade_score,
            test_scores: source.test_scores.clone(),
            group_attrs: source.group_attrs.clone(),
            preferences,
        });
    }
    Ok(SampledSet {
        set: ApplicationSet::new(label, students, Provenance::Sampled, registry)?,
        dropped,
    })
}

/// Draws up to `wanted` distinct programs with probability proportional to
/// propensity, then orders them by propensity times log-normal noise.
fn sample_preferences(model: &ApplicantModel, student: usize, wanted: usize, rng: &mut ChaCha8Rng) -> Vec<ProgramId> {
    // weighted sampling without replacement: keep the largest ln(u) / w
    let mut keyed: Vec<(f64, usize, f64)> = model
        .pool_propensities(student)
        .enumerate()
        .filter(|(_, w)| *w > 0.0)
        .map(|(k, w)| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            (u.ln() / w, k, w)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.truncate(wanted.min(MAX_PREFERENCES));

    let noise = model.config.rank_noise;
    let mut ranked: Vec<(f64, usize)> = keyed
        .into_iter()
        .map(|(_, k, w)| {
            let z: f64 = StandardNormal.sample(rng);
            (w.ln() + noise * z, k)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    ranked.into_iter().map(|(_, k)| model.programs[k]).collect()
}
