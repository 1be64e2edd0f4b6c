//! Domain types: students, programs, application sets and bonus policies,
//! plus the two score functions every other module builds on.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the high-school grade component in program weight maps.
pub const GRADES: &str = "grades";

/// Longest preference list a student may submit.
pub const MAX_PREFERENCES: usize = 10;

/// Default ceiling for any single bonus entry, in points.
pub const DEFAULT_MAX_BONUS: f64 = 50.0;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StudentId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProgramId(pub u32);

impl fmt::Display for StudentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for ProgramId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Bounds of the admission point scale. Effective (bonused) scores may
/// exceed `max`; they are priorities, not reported scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreScale {
    pub min: f64,
    pub max: f64,
}

impl Default for ScoreScale {
    fn default() -> Self {
        ScoreScale {
            min: 150.0,
            max: 850.0,
        }
    }
}

impl ScoreScale {
    pub fn contains(&self, points: f64) -> bool {
        points >= self.min && points <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Student {
    pub id: StudentId,
    pub grade_score: f64,
    pub test_scores: BTreeMap<String, f64>,
    /// Attribute name to membership of the protected group.
    pub group_attrs: BTreeMap<String, bool>,
    pub preferences: Vec<ProgramId>,
}

impl Student {
    pub fn component(&self, name: &str) -> Option<f64> {
        if name == GRADES {
            Some(self.grade_score)
        } else {
            self.test_scores.get(name).copied()
        }
    }

    /// Whether the student belongs to the protected group of `attribute`.
    /// Students without the attribute are treated as non-protected.
    pub fn is_protected(&self, attribute: &str) -> bool {
        self.group_attrs.get(attribute).copied().unwrap_or(false)
    }

    pub fn lists(&self, program: ProgramId) -> bool {
        self.preferences.contains(&program)
    }

    pub fn validate(&self, scale: &ScoreScale) -> Result<()> {
        let fail = |reason: String| Error::InvalidStudent {
            student: self.id,
            reason,
        };
        if self.preferences.is_empty() || self.preferences.len() > MAX_PREFERENCES {
            return Err(fail(format!(
                "preference list has {} entries, expected 1..={MAX_PREFERENCES}",
                self.preferences.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for p in &self.preferences {
            if !seen.insert(*p) {
                return Err(fail(format!("program {p} listed twice")));
            }
        }
        if !scale.contains(self.grade_score) {
            return Err(fail(format!("grade score {} out of scale", self.grade_score)));
        }
        for (name, score) in &self.test_scores {
            if name == GRADES {
                return Err(fail(format!("test name `{GRADES}` is reserved")));
            }
            if !scale.contains(*score) {
                return Err(fail(format!("test `{name}` score {score} out of scale")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub id: ProgramId,
    pub capacity: usize,
    /// Score component (`grades` or a test name) to weight; sums to one.
    pub weights: BTreeMap<String, f64>,
    /// Mean admission score of admitted students over the previous three
    /// years, once computed.
    pub prestige: Option<f64>,
}

impl Program {
    pub fn new(id: ProgramId, capacity: usize, weights: BTreeMap<String, f64>) -> Result<Self> {
        let program = Program {
            id,
            capacity,
            weights,
            prestige: None,
        };
        program.validate()?;
        Ok(program)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::InvalidProgram {
            program: self.id,
            reason,
        };
        if self.capacity == 0 {
            return Err(fail("capacity must be at least 1".into()));
        }
        if let Some((name, w)) = self.weights.iter().find(|(_, w)| !(**w >= 0.0)) {
            return Err(fail(format!("weight `{name}` = {w} is negative")));
        }
        let total: f64 = self.weights.values().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(fail(format!("weights sum to {total}, expected 1")));
        }
        Ok(())
    }
}

/// The set of programs taking part in one admission process.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramRegistry {
    programs: BTreeMap<ProgramId, Program>,
    scale: ScoreScale,
}

impl ProgramRegistry {
    pub fn new(programs: impl IntoIterator<Item = Program>, scale: ScoreScale) -> Result<Self> {
        let mut map = BTreeMap::new();
        for p in programs {
            p.validate()?;
            let id = p.id;
            if map.insert(id, p).is_some() {
                return Err(Error::DuplicateProgram(id));
            }
        }
        Ok(ProgramRegistry {
            programs: map,
            scale,
        })
    }

    pub fn get(&self, id: ProgramId) -> Result<&Program> {
        self.programs.get(&id).ok_or(Error::UnknownProgram(id))
    }

    pub fn contains(&self, id: ProgramId) -> bool {
        self.programs.contains_key(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = ProgramId> + '_ {
        self.programs.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Program> {
        self.programs.values()
    }

    pub fn len(&self) -> usize {
        self.programs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.programs.is_empty()
    }

    pub fn scale(&self) -> ScoreScale {
        self.scale
    }

    pub fn set_prestige(&mut self, id: ProgramId, prestige: Option<f64>) -> Result<()> {
        let p = self.programs.get_mut(&id).ok_or(Error::UnknownProgram(id))?;
        p.prestige = prestige;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Historical,
    Sampled,
    Synthetic,
}

/// One cohort of applicants, validated against a program registry.
#[derive(Debug, Clone, PartialEq)]
pub struct ApplicationSet {
    year_label: String,
    students: Vec<Student>,
    provenance: Provenance,
}

impl ApplicationSet {
    /// Validates every student and sorts the cohort by id.
    pub fn new(
        year_label: impl Into<String>,
        mut students: Vec<Student>,
        provenance: Provenance,
        registry: &ProgramRegistry,
    ) -> Result<Self> {
        students.sort_by_key(|s| s.id);
        for pair in students.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::DuplicateStudent(pair[0].id));
            }
        }
        let scale = registry.scale();
        for s in &students {
            s.validate(&scale)?;
            if let Some(p) = s.preferences.iter().find(|p| !registry.contains(**p)) {
                return Err(Error::UnknownProgram(*p));
            }
        }
        Ok(ApplicationSet {
            year_label: year_label.into(),
            students,
            provenance,
        })
    }

    pub fn year_label(&self) -> &str {
        &self.year_label
    }

    /// Students in ascending id order.
    pub fn students(&self) -> &[Student] {
        &self.students
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.students.len()
    }

    pub fn is_empty(&self) -> bool {
        self.students.is_empty()
    }

    pub fn student(&self, id: StudentId) -> Option<&Student> {
        self.students
            .binary_search_by_key(&id, |s| s.id)
            .ok()
            .map(|i| &self.students[i])
    }

    /// All students listing `program` anywhere in their preferences.
    pub fn applicants(&self, program: ProgramId) -> impl Iterator<Item = &Student> {
        self.students.iter().filter(move |s| s.lists(program))
    }
}

/// Bonus points per (program, attribute), added to the admission score of
/// students in the protected group of that attribute when ranked at that
/// program.
#[derive(Debug, Clone, PartialEq)]
pub struct BonusPolicy {
    entries: BTreeMap<(ProgramId, String), f64>,
    max_bonus: f64,
}

impl Default for BonusPolicy {
    fn default() -> Self {
        BonusPolicy::empty()
    }
}

impl BonusPolicy {
    pub fn empty() -> Self {
        BonusPolicy::with_max(DEFAULT_MAX_BONUS)
    }

    pub fn with_max(max_bonus: f64) -> Self {
        BonusPolicy {
            entries: BTreeMap::new(),
            max_bonus,
        }
    }

    /// A policy with one entry.
    pub fn single(program: ProgramId, attribute: &str, bonus: f64) -> Result<Self> {
        let mut policy = BonusPolicy::with_max(bonus.max(DEFAULT_MAX_BONUS));
        policy.insert(program, attribute, bonus)?;
        Ok(policy)
    }

    pub fn max_bonus(&self) -> f64 {
        self.max_bonus
    }

    /// Adds an entry; replacing an existing (program, attribute) pair is an error.
    pub fn insert(&mut self, program: ProgramId, attribute: &str, bonus: f64) -> Result<()> {
        if !(0.0..=self.max_bonus).contains(&bonus) {
            return Err(Error::InvalidPolicy(format!(
                "bonus {bonus} for program {program}/{attribute} outside [0, {}]",
                self.max_bonus
            )));
        }
        let key = (program, attribute.to_string());
        if self.entries.contains_key(&key) {
            return Err(Error::InvalidPolicy(format!(
                "duplicate entry for program {program}/{attribute}"
            )));
        }
        self.entries.insert(key, bonus);
        Ok(())
    }

    pub fn get(&self, program: ProgramId, attribute: &str) -> Option<f64> {
        self.entries
            .get(&(program, attribute.to_string()))
            .copied()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = (ProgramId, &str, f64)> {
        self.entries
            .iter()
            .map(|((p, a), b)| (*p, a.as_str(), *b))
    }

    /// Sum of the entries at `program` whose protected group contains `student`.
    pub fn bonus_for(&self, student: &Student, program: ProgramId) -> f64 {
        self.entries
            .range((program, String::new())..)
            .take_while(|((p, _), _)| *p == program)
            .filter(|((_, attr), _)| student.is_protected(attr))
            .map(|(_, b)| *b)
            .sum()
    }
}

#[derive(Serialize, Deserialize)]
struct PolicyEntry {
    program: ProgramId,
    attribute: String,
    bonus: f64,
}

#[derive(Serialize, Deserialize)]
struct PolicyDocument {
    entries: Vec<PolicyEntry>,
}

impl Serialize for BonusPolicy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PolicyDocument {
            entries: self
                .entries()
                .map(|(program, attribute, bonus)| PolicyEntry {
                    program,
                    attribute: attribute.to_string(),
                    bonus,
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BonusPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = PolicyDocument::deserialize(deserializer)?;
        let mut policy = BonusPolicy::empty();
        for e in doc.entries {
            policy
                .insert(e.program, &e.attribute, e.bonus)
                .map_err(serde::de::Error::custom)?;
        }
        Ok(policy)
    }
}

/// Weighted sum of the student's score components under the program's weights.
/// Components with zero weight may be absent.
pub fn admission_score(student: &Student, program: &Program) -> Result<f64> {
    let mut total = 0.0;
    for (component, weight) in &program.weights {
        if *weight == 0.0 {
            continue;
        }
        let score = student
            .component(component)
            .ok_or_else(|| Error::MissingComponent {
                student: student.id,
                component: component.clone(),
            })?;
        total += weight * score;
    }
    Ok(total)
}

/// Admission score plus every applicable bonus entry at this program.
pub fn effective_score(student: &Student, program: &Program, policy: &BonusPolicy) -> Result<f64> {
    Ok(admission_score(student, program)? + policy.bonus_for(student, program.id))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn student(grades: f64, tests: &[(&str, f64)], groups: &[(&str, bool)]) -> Student {
        Student {
            id: StudentId(1),
            grade_score: grades,
            test_scores: tests.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            group_attrs: groups.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            preferences: vec![ProgramId(1)],
        }
    }

    #[test]
    fn admission_score_examples() {
        let p = Program::new(ProgramId(1), 3, weights(&[("grades", 0.3), ("math", 0.7)])).unwrap();
        let s = student(600.0, &[("math", 700.0)], &[]);
        assert!((admission_score(&s, &p).unwrap() - 670.0).abs() < 1e-9);

        let p = Program::new(ProgramId(1), 3, weights(&[("grades", 1.0)])).unwrap();
        let s = student(512.0, &[], &[]);
        assert_eq!(admission_score(&s, &p).unwrap(), 512.0);

        let p = Program::new(
            ProgramId(1),
            3,
            weights(&[("grades", 0.5), ("math", 0.25), ("lang", 0.25)]),
        )
        .unwrap();
        let s = student(600.0, &[("math", 500.0), ("lang", 700.0)], &[]);
        assert_eq!(admission_score(&s, &p).unwrap(), 600.0);
    }

    #[test]
    fn missing_component_is_named() {
        let p = Program::new(ProgramId(1), 3, weights(&[("grades", 0.3), ("math", 0.7)])).unwrap();
        let s = student(600.0, &[], &[]);
        match admission_score(&s, &p) {
            Err(Error::MissingComponent { component, .. }) => assert_eq!(component, "math"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_weight_component_may_be_missing() {
        let p = Program::new(ProgramId(1), 3, weights(&[("grades", 1.0), ("math", 0.0)])).unwrap();
        let s = student(600.0, &[], &[]);
        assert_eq!(admission_score(&s, &p).unwrap(), 600.0);
    }

    #[test]
    fn effective_score_examples() {
        let p = Program::new(ProgramId(1), 3, weights(&[("grades", 0.3), ("math", 0.7)])).unwrap();
        let mut policy = BonusPolicy::empty();
        policy.insert(ProgramId(1), "income", 10.0).unwrap();

        let protected = student(600.0, &[("math", 700.0)], &[("income", true)]);
        let other = student(600.0, &[("math", 700.0)], &[("income", false)]);
        assert!((effective_score(&protected, &p, &policy).unwrap() - 680.0).abs() < 1e-9);
        assert!((effective_score(&other, &p, &policy).unwrap() - 670.0).abs() < 1e-9);

        policy.insert(ProgramId(1), "gender", 5.0).unwrap();
        let both = student(600.0, &[("math", 700.0)], &[("income", true), ("gender", true)]);
        let summed = effective_score(&both, &p, &policy).unwrap();
        let per_entry = admission_score(&both, &p).unwrap()
            + policy.get(ProgramId(1), "income").unwrap()
            + policy.get(ProgramId(1), "gender").unwrap();
        assert!((summed - 685.0).abs() < 1e-9);
        assert_eq!(summed, per_entry);
    }

    #[test]
    fn bonus_at_other_program_does_not_apply() {
        let p = Program::new(ProgramId(1), 3, weights(&[("grades", 1.0)])).unwrap();
        let policy = BonusPolicy::single(ProgramId(2), "income", 10.0).unwrap();
        let s = student(600.0, &[], &[("income", true)]);
        assert_eq!(effective_score(&s, &p, &policy).unwrap(), 600.0);
    }

    #[test]
    fn program_invariants() {
        assert!(Program::new(ProgramId(1), 0, weights(&[("grades", 1.0)])).is_err());
        assert!(Program::new(ProgramId(1), 1, weights(&[("grades", 0.5)])).is_err());
        assert!(Program::new(ProgramId(1), 1, weights(&[("grades", 1.2), ("math", -0.2)])).is_err());
        assert!(Program::new(ProgramId(1), 1, weights(&[("grades", 0.5), ("math", 0.5)])).is_ok());
    }

    #[test]
    fn student_invariants() {
        let scale = ScoreScale::default();
        let mut s = student(600.0, &[], &[]);
        assert!(s.validate(&scale).is_ok());
        s.preferences = vec![ProgramId(1), ProgramId(1)];
        assert!(s.validate(&scale).is_err());
        s.preferences = (0..11).map(ProgramId).collect();
        assert!(s.validate(&scale).is_err());
        s.preferences = vec![];
        assert!(s.validate(&scale).is_err());
        s.preferences = vec![ProgramId(1)];
        s.grade_score = 900.0;
        assert!(s.validate(&scale).is_err());
    }

    #[test]
    fn application_set_checks_registry_and_ids() {
        let registry = ProgramRegistry::new(
            [Program::new(ProgramId(1), 1, weights(&[("grades", 1.0)])).unwrap()],
            ScoreScale::default(),
        )
        .unwrap();
        let a = student(600.0, &[], &[]);
        let mut b = a.clone();
        assert!(matches!(
            ApplicationSet::new("y", vec![a.clone(), b.clone()], Provenance::Historical, &registry),
            Err(Error::DuplicateStudent(_))
        ));
        b.id = StudentId(2);
        b.preferences = vec![ProgramId(9)];
        assert!(matches!(
            ApplicationSet::new("y", vec![a, b], Provenance::Historical, &registry),
            Err(Error::UnknownProgram(ProgramId(9)))
        ));
    }

    #[test]
    fn policy_bounds_and_duplicates() {
        let mut policy = BonusPolicy::empty();
        assert!(policy.insert(ProgramId(1), "income", -1.0).is_err());
        assert!(policy.insert(ProgramId(1), "income", 51.0).is_err());
        policy.insert(ProgramId(1), "income", 50.0).unwrap();
        assert!(policy.insert(ProgramId(1), "income", 1.0).is_err());
    }

    #[test]
    fn policy_json_shape() {
        let mut policy = BonusPolicy::empty();
        policy.insert(ProgramId(3), "income", 2.5).unwrap();
        let json = serde_json::to_string(&policy).unwrap();
        assert_eq!(
            json,
            r#"{"entries":[{"program":3,"attribute":"income","bonus":2.5}]}"#
        );
        let back: BonusPolicy = serde_json::from_str(&json).unwrap();
        assert_eq!(back, policy);
    }
}
