//! Student-proposing deferred acceptance with score priorities.
//!
//! Each program ranks its applicants by effective score (admission score plus
//! applicable bonus). Two applicants are compared through the difference of
//! their admission scores against the difference of their bonuses, so two
//! students with the same bonus are always ordered exactly by admission score
//! and a protected/non-protected pair swaps order exactly at the bonus value
//! equal to their score gap. Remaining ties go to the lower student id.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{admission_score, ApplicationSet, BonusPolicy, ProgramId, ProgramRegistry, StudentId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramOutcome {
    /// Admitted students, ascending id.
    pub admitted: Vec<StudentId>,
    /// Every student listing the program, ascending id.
    pub applicants: Vec<StudentId>,
    pub cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub assignment: BTreeMap<StudentId, Option<ProgramId>>,
    pub per_program: BTreeMap<ProgramId, ProgramOutcome>,
}

impl MatchOutcome {
    pub fn program(&self, id: ProgramId) -> Result<&ProgramOutcome> {
        self.per_program.get(&id).ok_or(Error::UnknownProgram(id))
    }

    pub fn assigned_to(&self, student: StudentId) -> Option<ProgramId> {
        self.assignment.get(&student).copied().flatten()
    }
}

/// Runs deferred acceptance on `apps` with bonus points from `policy`.
pub fn deferred_acceptance(
    apps: &ApplicationSet,
    registry: &ProgramRegistry,
    policy: &BonusPolicy,
) -> Result<MatchOutcome> {
    let market = Market::compile(apps, registry)?;
    let students = apps.students();
    let bonuses: Vec<Vec<f64>> = students
        .iter()
        .map(|s| {
            s.preferences
                .iter()
                .map(|p| policy.bonus_for(s, *p))
                .collect()
        })
        .collect();
    let mut scratch = Scratch::default();
    market.run(|s, k| bonuses[s][k], &mut scratch);

    let mut assignment = BTreeMap::new();
    for (s, student) in students.iter().enumerate() {
        let program = scratch.assigned[s].map(|k| market.program_ids[k as usize]);
        assignment.insert(student.id, program);
    }

    let scale_min = registry.scale().min;
    let mut per_program = BTreeMap::new();
    for (k, id) in market.program_ids.iter().enumerate() {
        let mut admitted: Vec<(StudentId, f64)> = scratch.heaps[k]
            .iter()
            .map(|h| (students[h.student as usize].id, h.score + h.bonus))
            .collect();
        admitted.sort_by_key(|(id, _)| *id);
        let cutoff = if admitted.len() < market.capacity[k] {
            scale_min
        } else {
            admitted
                .iter()
                .map(|(_, eff)| *eff)
                .fold(f64::INFINITY, f64::min)
        };
        let applicants = market.applicants[k]
            .iter()
            .map(|(s, _)| students[*s as usize].id)
            .collect();
        per_program.insert(
            *id,
            ProgramOutcome {
                admitted: admitted.into_iter().map(|(id, _)| id).collect(),
                applicants,
                cutoff,
            },
        );
    }
    Ok(MatchOutcome {
        assignment,
        per_program,
    })
}

/// Lowest effective score among the admitted, or the scale minimum when
/// seats remain unfilled.
pub fn cutoff(outcome: &MatchOutcome, program: ProgramId) -> Result<f64> {
    Ok(outcome.program(program)?.cutoff)
}

/// Priority comparison at one program: `Greater` means `x` is ranked ahead of `y`.
pub(crate) fn priority_cmp(
    x_score: f64,
    x_bonus: f64,
    x_id: u32,
    y_score: f64,
    y_bonus: f64,
    y_id: u32,
) -> Ordering {
    let gap = x_score - y_score;
    let bonus_gap = y_bonus - x_bonus;
    // IEEE comparison so that -0.0 and 0.0 tie; scores are finite.
    gap.partial_cmp(&bonus_gap)
        .unwrap_or(Ordering::Equal)
        .then(y_id.cmp(&x_id))
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Choice {
    pub program: u32,
    pub score: f64,
}

/// An application set compiled to dense indices. Student index order equals
/// ascending student id, program index order equals ascending program id.
#[derive(Debug, Clone)]
pub(crate) struct Market {
    pub program_ids: Vec<ProgramId>,
    pub capacity: Vec<usize>,
    pub choices: Vec<Vec<Choice>>,
    /// Per program: (student index, admission score) of every applicant.
    pub applicants: Vec<Vec<(u32, f64)>>,
}

impl Market {
    pub fn compile(apps: &ApplicationSet, registry: &ProgramRegistry) -> Result<Self> {
        let program_ids: Vec<ProgramId> = registry.ids().collect();
        let index: BTreeMap<ProgramId, u32> = program_ids
            .iter()
            .enumerate()
            .map(|(k, id)| (*id, k as u32))
            .collect();
        let capacity = registry.iter().map(|p| p.capacity).collect();
        let mut applicants = vec![Vec::new(); program_ids.len()];
        let mut choices = Vec::with_capacity(apps.len());
        for (s, student) in apps.students().iter().enumerate() {
            let mut row = Vec::with_capacity(student.preferences.len());
            for p in &student.preferences {
                let k = *index.get(p).ok_or(Error::UnknownProgram(*p))?;
                let score = admission_score(student, registry.get(*p)?)?;
                applicants[k as usize].push((s as u32, score));
                row.push(Choice { program: k, score });
            }
            choices.push(row);
        }
        Ok(Market {
            program_ids,
            capacity,
            choices,
            applicants,
        })
    }

    pub fn program_index(&self, id: ProgramId) -> Option<usize> {
        self.program_ids.binary_search(&id).ok()
    }

    /// Runs deferred acceptance; `bonus(student, choice_index)` gives the bonus
    /// the student carries at that entry of their preference list. Results
    /// are left in `scratch`.
    pub fn run<F: Fn(usize, usize) -> f64>(&self, bonus: F, scratch: &mut Scratch) {
        scratch.reset(self.choices.len(), self.program_ids.len());
        self.insert(0..self.choices.len() as u32, bonus, |_, _, _| {}, scratch);
        scratch.finish();
    }

    /// Per program index, the smallest bonus at which some rejection made
    /// there in a run without bonuses could have gone the other way.
    pub fn baseline_thresholds(&self, protected: &[bool], scratch: &mut Scratch) -> Vec<f64> {
        let mut thresholds = vec![f64::INFINITY; self.program_ids.len()];
        scratch.reset(self.choices.len(), self.program_ids.len());
        self.insert(
            0..self.choices.len() as u32,
            |_, _| 0.0,
            |p, rejected, heap| {
                if protected[rejected.student as usize] {
                    thresholds[p] = thresholds[p].min(threshold(rejected, heap, protected));
                }
            },
            scratch,
        );
        scratch.finish();
        thresholds
    }

    /// Deferred acceptance among the students who do not list program index
    /// `focal`. Their proposals never reach `focal`, so this state is shared
    /// by every bonus given there.
    pub fn without_applicants(&self, focal: usize) -> Scratch {
        let mut scratch = Scratch::default();
        scratch.reset(self.choices.len(), self.program_ids.len());
        let others = (0..self.choices.len() as u32)
            .filter(|s| !self.choices[*s as usize].iter().any(|c| c.program as usize == focal));
        self.insert(others, |_, _| 0.0, |_, _, _| {}, &mut scratch);
        scratch
    }

    /// Completes `base` (from [`Market::without_applicants`]) by inserting the
    /// applicants of `focal`, protected ones carrying `bonus` there. Deferred
    /// acceptance does not depend on insertion order, so this is the full
    /// outcome. Only held sets are filled in. Returns the smallest bonus at
    /// which some rejection at `focal` could have gone the other way: every
    /// bonus in `[bonus, threshold)` replays identically.
    pub fn run_focal(&self, base: &Scratch, focal: usize, protected: &[bool], bonus: f64, scratch: &mut Scratch) -> f64 {
        let mut limit = f64::INFINITY;
        scratch.clone_from(base);
        self.insert(
            self.applicants[focal].iter().map(|(s, _)| *s),
            |s, k| {
                if protected[s] && self.choices[s][k].program as usize == focal {
                    bonus
                } else {
                    0.0
                }
            },
            |p, rejected, heap| {
                if p == focal && protected[rejected.student as usize] {
                    limit = limit.min(threshold(rejected, heap, protected));
                }
            },
            scratch,
        );
        limit
    }

    /// Inserts students one at a time, each followed by its rejection chain.
    fn insert<I, F, R>(&self, students: I, bonus: F, mut on_reject: R, scratch: &mut Scratch)
    where
        I: Iterator<Item = u32>,
        F: Fn(usize, usize) -> f64,
        R: FnMut(usize, &Held, &BinaryHeap<Held>),
    {
        for first in students {
            scratch.free.push(first);
            while let Some(s) = scratch.free.pop() {
                let s = s as usize;
                let k = scratch.next[s] as usize;
                let Some(choice) = self.choices[s].get(k) else {
                    continue;
                };
                scratch.next[s] += 1;
                let p = choice.program as usize;
                let entry = Held {
                    score: choice.score,
                    bonus: bonus(s, k),
                    student: s as u32,
                };
                let heap = &mut scratch.heaps[p];
                if heap.len() < self.capacity[p] {
                    heap.push(entry);
                    continue;
                }
                let weakest = heap.peek().expect("capacity is at least one");
                if entry.outranks(weakest) {
                    let bumped = heap.pop().expect("non-empty");
                    heap.push(entry);
                    on_reject(p, &bumped, heap);
                    scratch.free.push(bumped.student);
                } else {
                    on_reject(p, &entry, heap);
                    scratch.free.push(s as u32);
                }
            }
        }
    }
}

/// Smallest bonus at which the protected `rejected` would outrank a retained
/// non-protected applicant.
fn threshold(rejected: &Held, retained: &BinaryHeap<Held>, protected: &[bool]) -> f64 {
    retained
        .iter()
        .filter(|h| !protected[h.student as usize])
        .map(|h| -(rejected.score - h.score))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Held {
    pub score: f64,
    pub bonus: f64,
    pub student: u32,
}

impl Held {
    fn outranks(&self, other: &Held) -> bool {
        self.priority(other) == Ordering::Greater
    }

    fn priority(&self, other: &Held) -> Ordering {
        priority_cmp(
            self.score,
            self.bonus,
            self.student,
            other.score,
            other.bonus,
            other.student,
        )
    }
}

impl PartialEq for Held {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Held {}

impl PartialOrd for Held {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Max-heap top is the weakest held applicant.
impl Ord for Held {
    fn cmp(&self, other: &Self) -> Ordering {
        other.priority(self)
    }
}

#[derive(Debug, Default)]
pub(crate) struct Scratch {
    pub heaps: Vec<BinaryHeap<Held>>,
    pub assigned: Vec<Option<u32>>,
    next: Vec<u16>,
    free: Vec<u32>,
}

impl Clone for Scratch {
    fn clone(&self) -> Self {
        Scratch {
            heaps: self.heaps.clone(),
            assigned: self.assigned.clone(),
            next: self.next.clone(),
            free: self.free.clone(),
        }
    }

    fn clone_from(&mut self, source: &Self) {
        self.heaps.clone_from(&source.heaps);
        self.assigned.clone_from(&source.assigned);
        self.next.clone_from(&source.next);
        self.free.clone_from(&source.free);
    }
}

impl Scratch {
    fn reset(&mut self, students: usize, programs: usize) {
        self.heaps.resize_with(programs, BinaryHeap::new);
        self.heaps.truncate(programs);
        for h in &mut self.heaps {
            h.clear();
        }
        self.assigned.clear();
        self.assigned.resize(students, None);
        self.next.clear();
        self.next.resize(students, 0);
        self.free.clear();
    }

    fn finish(&mut self) {
        for (p, heap) in self.heaps.iter().enumerate() {
            for h in heap.iter() {
                self.assigned[h.student as usize] = Some(p as u32);
            }
        }
    }

    /// Students held by program index `p`.
    pub fn held(&self, p: usize) -> impl Iterator<Item = &Held> {
        self.heaps[p].iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Program, Provenance, ScoreScale, Student};

    fn registry(caps: &[usize]) -> ProgramRegistry {
        ProgramRegistry::new(
            caps.iter().enumerate().map(|(i, c)| {
                Program::new(
                    ProgramId(i as u32 + 1),
                    *c,
                    [("grades".to_string(), 1.0)].into_iter().collect(),
                )
                .unwrap()
            }),
            ScoreScale::default(),
        )
        .unwrap()
    }

    fn student(id: u32, score: f64, protected: bool, prefs: &[u32]) -> Student {
        Student {
            id: StudentId(id),
            grade_score: score,
            test_scores: BTreeMap::new(),
            group_attrs: [("income".to_string(), protected)].into_iter().collect(),
            preferences: prefs.iter().map(|p| ProgramId(*p)).collect(),
        }
    }

    fn set(students: Vec<Student>, reg: &ProgramRegistry) -> ApplicationSet {
        ApplicationSet::new("t", students, Provenance::Synthetic, reg).unwrap()
    }

    #[test]
    fn capacity_one_takes_top_score() {
        let reg = registry(&[1]);
        let apps = set(
            vec![student(1, 650.0, false, &[1]), student(2, 700.0, false, &[1])],
            &reg,
        );
        let out = deferred_acceptance(&apps, &reg, &BonusPolicy::empty()).unwrap();
        assert_eq!(out.assigned_to(StudentId(2)), Some(ProgramId(1)));
        assert_eq!(out.assigned_to(StudentId(1)), None);
        assert_eq!(cutoff(&out, ProgramId(1)).unwrap(), 700.0);
    }

    #[test]
    fn free_seat_at_first_choice() {
        let reg = registry(&[1, 1]);
        let apps = set(vec![student(1, 400.0, false, &[1, 2])], &reg);
        let out = deferred_acceptance(&apps, &reg, &BonusPolicy::empty()).unwrap();
        assert_eq!(out.assigned_to(StudentId(1)), Some(ProgramId(1)));
        assert_eq!(cutoff(&out, ProgramId(1)).unwrap(), 400.0);
        assert_eq!(cutoff(&out, ProgramId(2)).unwrap(), 150.0);
    }

    #[test]
    fn cutoff_is_lowest_admitted() {
        let reg = registry(&[2]);
        let apps = set(
            vec![
                student(1, 700.0, false, &[1]),
                student(2, 680.0, false, &[1]),
                student(3, 650.0, false, &[1]),
            ],
            &reg,
        );
        let out = deferred_acceptance(&apps, &reg, &BonusPolicy::empty()).unwrap();
        assert_eq!(cutoff(&out, ProgramId(1)).unwrap(), 680.0);
        assert_eq!(out.program(ProgramId(1)).unwrap().admitted, vec![StudentId(1), StudentId(2)]);
        assert!(matches!(cutoff(&out, ProgramId(7)), Err(Error::UnknownProgram(_))));
    }

    #[test]
    fn cutoff_includes_bonus() {
        let reg = registry(&[2]);
        let apps = set(
            vec![
                student(1, 700.0, false, &[1]),
                student(2, 675.0, true, &[1]),
                student(3, 680.0, false, &[1]),
            ],
            &reg,
        );
        let policy = BonusPolicy::single(ProgramId(1), "income", 10.0).unwrap();
        let out = deferred_acceptance(&apps, &reg, &policy).unwrap();
        assert_eq!(out.program(ProgramId(1)).unwrap().admitted, vec![StudentId(1), StudentId(2)]);
        assert_eq!(cutoff(&out, ProgramId(1)).unwrap(), 685.0);
    }

    #[test]
    fn ties_go_to_lower_id() {
        let reg = registry(&[1]);
        let apps = set(
            vec![student(5, 600.0, false, &[1]), student(3, 600.0, false, &[1])],
            &reg,
        );
        let out = deferred_acceptance(&apps, &reg, &BonusPolicy::empty()).unwrap();
        assert_eq!(out.program(ProgramId(1)).unwrap().admitted, vec![StudentId(3)]);
    }

    #[test]
    fn bumped_student_moves_down_the_list() {
        let reg = registry(&[1, 1]);
        let apps = set(
            vec![
                student(1, 600.0, false, &[1, 2]),
                student(2, 700.0, false, &[1, 2]),
            ],
            &reg,
        );
        let out = deferred_acceptance(&apps, &reg, &BonusPolicy::empty()).unwrap();
        assert_eq!(out.assigned_to(StudentId(2)), Some(ProgramId(1)));
        assert_eq!(out.assigned_to(StudentId(1)), Some(ProgramId(2)));
    }

    #[test]
    fn empty_set_gives_empty_outcome() {
        let reg = registry(&[3]);
        let apps = set(vec![], &reg);
        let out = deferred_acceptance(&apps, &reg, &BonusPolicy::empty()).unwrap();
        assert!(out.assignment.is_empty());
        assert!(out.program(ProgramId(1)).unwrap().admitted.is_empty());
    }

    #[test]
    fn priority_swaps_exactly_at_score_gap() {
        let gap: f64 = 712.3 - 698.9;
        let protected = (698.9, 1);
        let other = (712.3, 2);
        let cmp = |b: f64| priority_cmp(protected.0, b, protected.1, other.0, 0.0, other.1);
        assert_eq!(cmp(gap - 1e-9), Ordering::Less);
        assert_eq!(cmp(gap + 1e-9), Ordering::Greater);
        // exact tie on effective score falls back to id
        assert_eq!(cmp(gap), Ordering::Greater);
    }
}
