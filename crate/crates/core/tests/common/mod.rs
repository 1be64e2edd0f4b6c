#![allow(dead_code)]

use std::collections::BTreeMap;

use bonus_policy::matching::MatchOutcome;
use bonus_policy::model::{
    effective_score, ApplicationSet, BonusPolicy, Program, ProgramId, ProgramRegistry, Provenance, ScoreScale,
    Student, StudentId,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ATTR: &str = "income";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn weights(grades: f64) -> BTreeMap<String, f64> {
    BTreeMap::from([("grades".to_string(), grades), ("math".to_string(), 1.0 - grades)])
}

pub fn student(id: u32, grades: f64, math: f64, protected: bool, prefs: &[u32]) -> Student {
    Student {
        id: StudentId(id),
        grade_score: grades,
        test_scores: BTreeMap::from([("math".to_string(), math)]),
        group_attrs: BTreeMap::from([(ATTR.to_string(), protected)]),
        preferences: prefs.iter().map(|p| ProgramId(*p)).collect(),
    }
}

pub fn registry(programs: &[(u32, usize, f64)]) -> ProgramRegistry {
    ProgramRegistry::new(
        programs
            .iter()
            .map(|(id, cap, g)| Program::new(ProgramId(*id), *cap, weights(*g)).unwrap()),
        ScoreScale::default(),
    )
    .unwrap()
}

pub fn set(students: Vec<Student>, registry: &ProgramRegistry) -> ApplicationSet {
    ApplicationSet::new("test", students, Provenance::Historical, registry).unwrap()
}

/// Random market with integer scores and quarter-step weights so every
/// effective score is exact in floating point. Small score ranges force ties.
pub fn random_market(rng: &mut ChaCha8Rng, max_students: usize, max_programs: usize) -> (ProgramRegistry, ApplicationSet) {
    let n_programs = rng.random_range(1..=max_programs);
    let programs: Vec<(u32, usize, f64)> = (0..n_programs)
        .map(|p| (p as u32, rng.random_range(1..=4), rng.random_range(0..=4) as f64 / 4.0))
        .collect();
    let reg = registry(&programs);
    let n_students = rng.random_range(1..=max_students);
    let (lo, hi) = if rng.random_bool(0.3) { (500, 510) } else { (300, 800) };
    let ids: Vec<u32> = (0..n_programs as u32).collect();
    let students = (0..n_students as u32)
        .map(|id| {
            let mut prefs = ids.clone();
            prefs.shuffle(rng);
            prefs.truncate(rng.random_range(1..=n_programs));
            student(
                id,
                rng.random_range(lo..=hi) as f64,
                rng.random_range(lo..=hi) as f64,
                rng.random_bool(0.5),
                &prefs,
            )
        })
        .collect();
    let apps = set(students, &reg);
    (reg, apps)
}

/// Balanced market with unit capacities and full preference lists. Each
/// program ranks by its own test, so priorities are independent across
/// programs and several stable matchings are common.
pub fn contested_market(rng: &mut ChaCha8Rng) -> (ProgramRegistry, ApplicationSet) {
    let n = rng.random_range(2..=5u32);
    let test = |p: u32| format!("t{p}");
    let programs = (0..n).map(|p| {
        let w = BTreeMap::from([("grades".to_string(), 0.0), (test(p), 1.0)]);
        Program::new(ProgramId(p), 1, w).unwrap()
    });
    let reg = ProgramRegistry::new(programs, ScoreScale::default()).unwrap();
    let ids: Vec<u32> = (0..n).collect();
    let students = (0..n)
        .map(|id| {
            let mut prefs = ids.clone();
            prefs.shuffle(rng);
            Student {
                id: StudentId(id),
                grade_score: 500.0,
                test_scores: ids.iter().map(|p| (test(*p), rng.random_range(300..=800) as f64)).collect(),
                group_attrs: BTreeMap::from([(ATTR.to_string(), rng.random_bool(0.5))]),
                preferences: prefs.into_iter().map(ProgramId).collect(),
            }
        })
        .collect();
    let apps = set(students, &reg);
    (reg, apps)
}

/// Random policy with integer bonuses at some programs.
pub fn random_policy(rng: &mut ChaCha8Rng, registry: &ProgramRegistry) -> BonusPolicy {
    let mut policy = BonusPolicy::empty();
    for id in registry.ids() {
        if rng.random_bool(0.5) {
            policy.insert(id, ATTR, rng.random_range(0..=30) as f64).unwrap();
        }
    }
    policy
}

/// Priority of a student at a program: higher effective score first, then lower id.
pub fn priority(s: &Student, registry: &ProgramRegistry, policy: &BonusPolicy, p: ProgramId) -> (f64, i64) {
    let e = effective_score(s, registry.get(p).unwrap(), policy).unwrap();
    (e, -(s.id.0 as i64))
}

fn outranks(a: (f64, i64), b: (f64, i64)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 > b.1)
}

/// Rank of `assigned` in the student's list; unassigned ranks last.
fn rank(s: &Student, assigned: Option<ProgramId>) -> usize {
    assigned
        .and_then(|p| s.preferences.iter().position(|q| *q == p))
        .unwrap_or(s.preferences.len())
}

/// Every blocking pair of an assignment (student index, program).
pub fn blocking_pairs(
    apps: &ApplicationSet,
    registry: &ProgramRegistry,
    policy: &BonusPolicy,
    assignment: &[Option<ProgramId>],
) -> Vec<(usize, ProgramId)> {
    let students = apps.students();
    let mut out = Vec::new();
    for (i, s) in students.iter().enumerate() {
        for &q in &s.preferences[..rank(s, assignment[i])] {
            let members: Vec<usize> = (0..students.len()).filter(|j| assignment[*j] == Some(q)).collect();
            let cap = registry.get(q).unwrap().capacity;
            let mine = priority(s, registry, policy, q);
            if members.len() < cap
                || members
                    .iter()
                    .any(|j| outranks(mine, priority(&students[*j], registry, policy, q)))
            {
                out.push((i, q));
            }
        }
    }
    out
}

pub fn assignment_of(outcome: &MatchOutcome, apps: &ApplicationSet) -> Vec<Option<ProgramId>> {
    apps.students().iter().map(|s| outcome.assigned_to(s.id)).collect()
}

/// All stable matchings, by depth-first enumeration of every student's
/// options with pruning of partial assignments that already contain a
/// blocking pair.
pub fn all_stable_matchings(
    apps: &ApplicationSet,
    registry: &ProgramRegistry,
    policy: &BonusPolicy,
) -> Vec<Vec<Option<ProgramId>>> {
    let students = apps.students();
    let prio: Vec<BTreeMap<ProgramId, (f64, i64)>> = students
        .iter()
        .map(|s| s.preferences.iter().map(|p| (*p, priority(s, registry, policy, *p))).collect())
        .collect();
    let listers: BTreeMap<ProgramId, Vec<usize>> = registry
        .ids()
        .map(|p| (p, (0..students.len()).filter(|i| students[*i].lists(p)).collect()))
        .collect();
    let mut state = Enumeration {
        students,
        registry,
        prio,
        listers,
        assignment: Vec::new(),
        found: Vec::new(),
    };
    state.search();
    state.found
}

struct Enumeration<'a> {
    students: &'a [Student],
    registry: &'a ProgramRegistry,
    prio: Vec<BTreeMap<ProgramId, (f64, i64)>>,
    listers: BTreeMap<ProgramId, Vec<usize>>,
    assignment: Vec<Option<ProgramId>>,
    found: Vec<Vec<Option<ProgramId>>>,
}

impl Enumeration<'_> {
    fn count(&self, p: ProgramId) -> usize {
        self.assignment.iter().filter(|a| **a == Some(p)).count()
    }

    /// Whether the partial assignment already fixes a blocking pair: a
    /// placed student envies a program holding a lower-priority student, or
    /// a program that can no longer fill up.
    fn doomed(&self) -> bool {
        let placed = self.assignment.len();
        for (i, s) in self.students[..placed].iter().enumerate() {
            for &q in &s.preferences[..rank(s, self.assignment[i])] {
                let mine = self.prio[i][&q];
                let worse = (0..placed).any(|j| self.assignment[j] == Some(q) && outranks(mine, self.prio[j][&q]));
                let reachable = self.count(q) + self.listers[&q].iter().filter(|j| **j >= placed).count();
                if worse || reachable < self.registry.get(q).unwrap().capacity {
                    return true;
                }
            }
        }
        false
    }

    fn search(&mut self) {
        if self.doomed() {
            return;
        }
        let i = self.assignment.len();
        if i == self.students.len() {
            self.found.push(self.assignment.clone());
            return;
        }
        let options: Vec<Option<ProgramId>> = self.students[i]
            .preferences
            .iter()
            .map(|p| Some(*p))
            .chain([None])
            .collect();
        for o in options {
            if let Some(p) = o {
                if self.count(p) >= self.registry.get(p).unwrap().capacity {
                    continue;
                }
            }
            self.assignment.push(o);
            self.search();
            self.assignment.pop();
        }
    }
}

/// The stable matching every student weakly prefers to all others, if one exists.
pub fn student_optimal(apps: &ApplicationSet, stable: &[Vec<Option<ProgramId>>]) -> Option<Vec<Option<ProgramId>>> {
    let students = apps.students();
    stable
        .iter()
        .find(|m| {
            stable.iter().all(|other| {
                students
                    .iter()
                    .enumerate()
                    .all(|(i, s)| rank(s, m[i]) <= rank(s, other[i]))
            })
        })
        .cloned()
}
