//! CSV and JSON file formats.
//!
//! `students.csv`: `id, grade_score, test_<name>..., group_<attribute>...,
//! preferences` where group cells are `0`/`1` and preferences is a
//! `|`-separated ranked list of program ids.
//!
//! `programs.csv`: `id, capacity, weight_<component>...` with `grades` as the
//! grade component name.
//!
//! A dataset directory holds `programs.csv` plus one subdirectory per cohort
//! containing that cohort's `students.csv`; cohorts are ordered by directory
//! name.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    ApplicationSet, Program, ProgramId, ProgramRegistry, Provenance, ScoreScale, Student, StudentId,
};

pub const STUDENTS_FILE: &str = "students.csv";
pub const PROGRAMS_FILE: &str = "programs.csv";

const TEST_PREFIX: &str = "test_";
const GROUP_PREFIX: &str = "group_";
const WEIGHT_PREFIX: &str = "weight_";

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_students<W: Write>(students: &[Student], out: W) -> Result<()> {
    let tests: BTreeSet<&str> = students
        .iter()
        .flat_map(|s| s.test_scores.keys().map(String::as_str))
        .collect();
    let groups: BTreeSet<&str> = students
        .iter()
        .flat_map(|s| s.group_attrs.keys().map(String::as_str))
        .collect();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string(), "grade_score".to_string()];
    header.extend(tests.iter().map(|t| format!("{TEST_PREFIX}{t}")));
    header.extend(groups.iter().map(|g| format!("{GROUP_PREFIX}{g}")));
    header.push("preferences".into());
    w.write_record(&header)?;
    for s in students {
        let mut row = vec![s.id.to_string(), fmt_f64(s.grade_score)];
        row.extend(
            tests
                .iter()
                .map(|t| s.test_scores.get(*t).map(|v| fmt_f64(*v)).unwrap_or_default()),
        );
        row.extend(groups.iter().map(|g| match s.group_attrs.get(*g) {
            Some(true) => "1".to_string(),
            Some(false) => "0".to_string(),
            None => String::new(),
        }));
        row.push(
            s.preferences
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join("|"),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_students<R: Read>(input: R, origin: &Path) -> Result<Vec<Student>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::data(origin, format!("missing column `{name}`")))
    };
    let id_col = col("id")?;
    let grade_col = col("grade_score")?;
    let pref_col = col("preferences")?;
    let tests: Vec<(usize, &str)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix(TEST_PREFIX).map(|t| (i, t)))
        .collect();
    let groups: Vec<(usize, &str)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix(GROUP_PREFIX).map(|g| (i, g)))
        .collect();

    let mut students = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let at = |message: String| Error::data(origin, format!("row {}: {message}", line + 2));
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let number = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|_| at(format!("`{}` is not a number", field(i))))
        };
        let id = field(id_col)
            .parse::<u32>()
            .map_err(|_| at(format!("bad student id `{}`", field(id_col))))?;
        let mut test_scores = BTreeMap::new();
        for (i, t) in &tests {
            if !field(*i).is_empty() {
                test_scores.insert(t.to_string(), number(*i)?);
            }
        }
        let mut group_attrs = BTreeMap::new();
        for (i, g) in &groups {
            match field(*i) {
                "" => {}
                "0" => {
                    group_attrs.insert(g.to_string(), false);
                }
                "1" => {
                    group_attrs.insert(g.to_string(), true);
                }
                other => return Err(at(format!("group `{g}` must be 0 or 1, got `{other}`"))),
            }
        }
        let preferences = field(pref_col)
            .split('|')
            .filter(|p| !p.trim().is_empty())
            .map(|p| {
                p.trim()
                    .parse::<u32>()
                    .map(ProgramId)
                    .map_err(|_| at(format!("bad program id `{p}` in preferences")))
            })
            .collect::<Result<Vec<_>>>()?;
        students.push(Student {
            id: StudentId(id),
            grade_score: number(grade_col)?,
            test_scores,
            group_attrs,
            preferences,
        });
    }
    Ok(students)
}

pub fn write_programs<W: Write>(registry: &ProgramRegistry, out: W) -> Result<()> {
    let components: BTreeSet<&str> = registry
        .iter()
        .flat_map(|p| p.weights.keys().map(String::as_str))
        .collect();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string(), "capacity".to_string()];
    header.extend(components.iter().map(|c| format!("{WEIGHT_PREFIX}{c}")));
    w.write_record(&header)?;
    for p in registry.iter() {
        let mut row = vec![p.id.to_string(), p.capacity.to_string()];
        row.extend(
            components
                .iter()
                .map(|c| fmt_f64(p.weights.get(*c).copied().unwrap_or(0.0))),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_programs<R: Read>(input: R, origin: &Path, scale: ScoreScale) -> Result<ProgramRegistry> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::data(origin, format!("missing column `{name}`")))
    };
    let id_col = col("id")?;
    let cap_col = col("capacity")?;
    let weight_cols: Vec<(usize, &str)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix(WEIGHT_PREFIX).map(|c| (i, c)))
        .collect();
    let mut programs = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let at = |message: String| Error::data(origin, format!("row {}: {message}", line + 2));
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let id = field(id_col)
            .parse::<u32>()
            .map_err(|_| at(format!("bad program id `{}`", field(id_col))))?;
        let capacity = field(cap_col)
            .parse::<usize>()
            .map_err(|_| at(format!("bad capacity `{}`", field(cap_col))))?;
        let mut weights = BTreeMap::new();
        for (i, c) in &weight_cols {
            if field(*i).is_empty() {
                continue;
            }
            let w = field(*i)
                .parse::<f64>()
                .map_err(|_| at(format!("bad weight `{}`", field(*i))))?;
            weights.insert(c.to_string(), w);
        }
        programs.push(Program {
            id: ProgramId(id),
            capacity,
            weights,
            prestige: None,
        });
    }
    ProgramRegistry::new(programs, scale)
}

/// Programs plus cohorts, oldest first.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub registry: ProgramRegistry,
    pub years: Vec<ApplicationSet>,
}

pub fn load_dataset(dir: &Path, scale: ScoreScale) -> Result<Dataset> {
    let programs_path = dir.join(PROGRAMS_FILE);
    let registry = read_programs(open(&programs_path)?, &programs_path, scale)?;
    let mut cohort_dirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::data(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(STUDENTS_FILE).is_file())
        .collect();
    cohort_dirs.sort();
    let mut years = Vec::with_capacity(cohort_dirs.len());
    for d in cohort_dirs {
        let path = d.join(STUDENTS_FILE);
        let students = read_students(open(&path)?, &path)?;
        let label = d
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let set = ApplicationSet::new(label, students, Provenance::Historical, &registry)
            .map_err(|e| Error::data(&path, e))?;
        years.push(set);
    }
    Ok(Dataset { registry, years })
}

pub fn write_dataset(dir: &Path, registry: &ProgramRegistry, years: &[ApplicationSet]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_programs(registry, create(&dir.join(PROGRAMS_FILE))?)?;
    for set in years {
        let d = dir.join(set.year_label());
        fs::create_dir_all(&d)?;
        write_students(set.students(), create(&d.join(STUDENTS_FILE))?)?;
    }
    Ok(())
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::data(path, e))
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    Ok(std::io::BufWriter::new(
        fs::File::create(path).map_err(|e| Error::data(path, e))?,
    ))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(std::io::BufReader::new(open(path)?)).map_err(|e| Error::data(path, e))
}

pub fn create_file(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    create(path)
}
