use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::fit::LogLogFit;
use crate::potentials::PotentialKind;

/// One pass/fail comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `"<="`, `">="` or `"in"`.
    pub relation: String,
    pub bound: Vec<f64>,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, relation: "<=".into(), bound: vec![bound], pass: value <= bound }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, relation: ">=".into(), bound: vec![bound], pass: value >= bound }
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), value, relation: "in".into(), bound: vec![lo, hi], pass: lo <= value && value <= hi }
    }

    pub fn holds(name: &str, ok: bool) -> Self {
        Self::at_least(name, if ok { 1.0 } else { 0.0 }, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedFit {
    pub name: String,
    pub fit: LogLogFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Everything a run depended on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dimension: usize,
    pub extent: Vec<f64>,
    pub points: Vec<usize>,
    pub potential: PotentialKind,
    pub t0: Option<f64>,
    pub eta: f64,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub digest: String,
    pub seed: u64,
    pub provenance: Provenance,
    pub measurements: Map<String, Value>,
    pub fits: Vec<NamedFit>,
    pub checks: Vec<Check>,
    pub curves: Vec<Curve>,
    pub pass: bool,
    pub wall_clock_s: f64,
}

impl ResultRecord {
    pub fn new(experiment: &str, digest: String, seed: u64, provenance: Provenance) -> Self {
        Self {
            experiment: experiment.into(),
            digest,
            seed,
            provenance,
            measurements: Map::new(),
            fits: Vec::new(),
            checks: Vec::new(),
            curves: Vec::new(),
            pass: true,
            wall_clock_s: 0.0,
        }
    }

    pub fn measure(&mut self, name: &str, value: impl Serialize) {
        self.measurements.insert(name.into(), serde_json::to_value(value).expect("JSON-representable measurement"));
    }

    pub fn fit(&mut self, name: &str, fit: LogLogFit) {
        self.fits.push(NamedFit { name: name.into(), fit });
    }

    pub fn check(&mut self, c: Check) {
        self.pass &= c.pass;
        self.checks.push(c);
    }

    pub fn curve(&mut self, name: &str, points: Vec<(f64, f64)>) {
        self.curves.push(Curve { name: name.into(), points });
    }

    /// The record without wall-clock time; identical for identical inputs.
    pub fn payload(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("record serializes");
        v.as_object_mut().expect("object").remove("wall_clock_s");
        v
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub experiment: String,
    pub digest: String,
    pub seed: u64,
    pub pass: bool,
    pub failed_checks: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub records: usize,
    pub passed: usize,
    pub failed: usize,
    pub entries: Vec<SummaryEntry>,
}

/// Sole writer of an output directory.
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: impl AsRef<Path>) -> std::io::Result<Self> {
        fs::create_dir_all(root.as_ref())?;
        Ok(Self { root: root.as_ref().to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Appends the record and rewrites `summary.json` and `curves.csv`
    /// from the full `results.jsonl`.
    pub fn append(&self, record: &ResultRecord) -> std::io::Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(self.root.join("results.jsonl"))?;
        writeln!(f, "{}", serde_json::to_string(record).map_err(std::io::Error::other)?)?;
        let all = self.records()?;
        self.write_summary(&all)?;
        self.write_curves(&all)
    }

    pub fn records(&self) -> std::io::Result<Vec<ResultRecord>> {
        let path = self.root.join("results.jsonl");
        if !path.exists() {
            return Ok(Vec::new());
        }
        BufReader::new(File::open(path)?)
            .lines()
            .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
            .map(|l| serde_json::from_str(&l?).map_err(std::io::Error::other))
            .collect()
    }

    fn write_summary(&self, all: &[ResultRecord]) -> std::io::Result<()> {
        let entries: Vec<SummaryEntry> = all
            .iter()
            .map(|r| SummaryEntry {
                experiment: r.experiment.clone(),
                digest: r.digest.clone(),
                seed: r.seed,
                pass: r.pass,
                failed_checks: r.failures().iter().map(|c| c.name.clone()).collect(),
            })
            .collect();
        let passed = entries.iter().filter(|e| e.pass).count();
        let s = Summary { records: entries.len(), passed, failed: entries.len() - passed, entries };
        fs::write(self.root.join("summary.json"), serde_json::to_string_pretty(&s).map_err(std::io::Error::other)?)
    }

    fn write_curves(&self, all: &[ResultRecord]) -> std::io::Result<()> {
        let mut out = String::from("experiment,curve,scale,value\n");
        for r in all {
            for c in &r.curves {
                for (s, v) in &c.points {
                    out.push_str(&format!("{},{},{s},{v}\n", r.experiment, c.name));
                }
            }
        }
        fs::write(self.root.join("curves.csv"), out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(seed: u64) -> ResultRecord {
        let prov = Provenance {
            dimension: 1,
            extent: vec![8.0],
            points: vec![64],
            potential: PotentialKind::Free,
            t0: Some(1.0),
            eta: 0.01,
            seeds: vec![1, 2],
        };
        let mut r = ResultRecord::new("demo", "ab".into(), seed, prov);
        r.measure("ratio", 0.1 + 0.2);
        r.curve("decay", vec![(1.0, 0.5), (2.0, 0.25)]);
        r.check(Check::at_most("small", 0.3, 0.5));
        r
    }

    #[test]
    fn failing_check_fails_the_record() {
        let mut r = record(0);
        assert!(r.pass);
        r.check(Check::within("band", 3.0, 3.5, 4.5));
        assert!(!r.pass);
        assert_eq!(r.failures().len(), 1);
    }

    #[test]
    fn floats_round_trip_exactly() {
        let mut r = record(0);
        r.wall_clock_s = 1.25;
        let back: ResultRecord = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.measurements["ratio"].as_f64(), Some(0.1 + 0.2));
    }

    #[test]
    fn payload_drops_wall_clock() {
        let mut a = record(0);
        let mut b = record(0);
        a.wall_clock_s = 1.0;
        b.wall_clock_s = 2.0;
        assert_eq!(a.payload(), b.payload());
    }

    #[test]
    fn output_directory_accumulates() {
        let dir = std::env::temp_dir().join(format!("pslab-record-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        let out = OutputDir::create(&dir).unwrap();
        out.append(&record(1)).unwrap();
        let mut bad = record(2);
        bad.check(Check::at_least("big", 0.0, 1.0));
        out.append(&bad).unwrap();
        assert_eq!(out.records().unwrap().len(), 2);
        let s: Summary = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
        assert_eq!((s.records, s.passed, s.failed), (2, 1, 1));
        assert_eq!(s.entries[1].failed_checks, vec!["big".to_string()]);
        let csv = fs::read_to_string(dir.join("curves.csv")).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.contains("demo,decay,2,0.25"));
        fs::remove_dir_all(&dir).unwrap();
    }
}
