//! The twelve acceptance criteria and a fast invariant suite.

use std::fmt;
use std::time::Instant;

use super::config::ExperimentConfig;
use super::experiments::{self, find, run_experiment};
use super::record::ResultRecord;
use crate::error::{Error, Result};

/// Default seed for acceptance runs.
pub const ACCEPTANCE_SEED: u64 = 20;

pub struct CriterionSpec {
    pub id: usize,
    pub title: &'static str,
    /// Wall-clock budget in seconds; per case when `per_case` is set.
    pub budget_s: f64,
    pub per_case: bool,
    cases: fn() -> Vec<ExperimentConfig>,
}

fn default_of(name: &str) -> Vec<ExperimentConfig> {
    vec![(find(name).expect("registered").default_config)()]
}

pub const CRITERIA: &[CriterionSpec] = &[
    CriterionSpec { id: 1, title: "unitarity", budget_s: 10.0, per_case: false, cases: experiments::unitarity_cases },
    CriterionSpec { id: 2, title: "oracle equivalence", budget_s: 30.0, per_case: false, cases: || default_of("oracle") },
    CriterionSpec { id: 3, title: "dispersive exponent", budget_s: 60.0, per_case: false, cases: experiments::dispersive_cases },
    CriterionSpec { id: 4, title: "Galilei covariance", budget_s: 30.0, per_case: false, cases: || default_of("galilei") },
    CriterionSpec { id: 5, title: "lens identity", budget_s: 30.0, per_case: false, cases: experiments::lens_cases },
    CriterionSpec { id: 6, title: "FBI Plancherel", budget_s: 30.0, per_case: false, cases: || default_of("fbi") },
    CriterionSpec { id: 7, title: "wavepacket frame", budget_s: 60.0, per_case: false, cases: || default_of("frames") },
    CriterionSpec { id: 8, title: "classical flow", budget_s: 30.0, per_case: false, cases: experiments::flow_cases },
    CriterionSpec { id: 9, title: "bilinear scaling", budget_s: 300.0, per_case: true, cases: experiments::bilinear_cases },
    CriterionSpec { id: 10, title: "kernel decay", budget_s: 180.0, per_case: false, cases: || default_of("kernel_decay") },
    CriterionSpec { id: 11, title: "profile recovery", budget_s: 120.0, per_case: false, cases: || default_of("profiles") },
    CriterionSpec { id: 12, title: "interval selection", budget_s: 60.0, per_case: false, cases: || default_of("interval") },
];

#[derive(Clone, Debug)]
pub struct CriterionOutcome {
    pub id: usize,
    pub title: &'static str,
    pub pass: bool,
    pub elapsed_s: f64,
    pub budget_s: f64,
    pub detail: Vec<String>,
    pub records: Vec<ResultRecord>,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {:<20} {} ({:.1}s / {:.0}s)",
            self.id,
            self.title,
            if self.pass { "PASS" } else { "FAIL" },
            self.elapsed_s,
            self.budget_s
        )?;
        for line in &self.detail {
            write!(f, "; {line}")?;
        }
        Ok(())
    }
}

/// Runs acceptance criterion `id` (1 to 12) with the default seed.
pub fn criterion(id: usize) -> Result<CriterionOutcome> {
    let spec = CRITERIA.iter().find(|c| c.id == id).ok_or_else(|| Error::Config(format!("no criterion {id}")))?;
    let clock = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    let mut records = Vec::new();
    for cfg in (spec.cases)() {
        let rec = run_experiment(&cfg, ACCEPTANCE_SEED)?;
        let label = format!("{} d={} {}", cfg.experiment, cfg.dimension, cfg.potential.label());
        if spec.per_case && rec.wall_clock_s > spec.budget_s {
            pass = false;
            detail.push(format!("{label}: {:.1}s over budget", rec.wall_clock_s));
        }
        for f in &rec.fits {
            detail.push(format!("{label}: {} slope {:.3} ± {:.3}", f.name, f.fit.slope, f.fit.half_width));
        }
        for c in rec.failures() {
            detail.push(format!("{label}: {} = {:.4e} fails {} {:?}", c.name, c.value, c.relation, c.bound));
        }
        pass &= rec.pass;
        records.push(rec);
    }
    let elapsed_s = clock.elapsed().as_secs_f64();
    if !spec.per_case && elapsed_s > spec.budget_s {
        pass = false;
        detail.push(format!("over budget by {:.1}s", elapsed_s - spec.budget_s));
    }
    Ok(CriterionOutcome { id, title: spec.title, pass, elapsed_s, budget_s: spec.budget_s, detail, records })
}

/// Small, fast configurations of every experiment except the scaling fits.
pub fn invariant_suite() -> Result<Vec<ResultRecord>> {
    let quick = [
        ExperimentConfig::new("unitarity", 1, 16.0, 256).with_param("steps", 200),
        (find("oracle").expect("registered").default_config)(),
        (find("galilei").expect("registered").default_config)(),
        (find("lens").expect("registered").default_config)(),
        (find("fbi").expect("registered").default_config)().with_param("seeds", [1, 2]),
        (find("flow_report").expect("registered").default_config)().with_param("pairs", 20),
    ];
    quick.iter().map(|cfg| run_experiment(cfg, ACCEPTANCE_SEED)).collect()
}
