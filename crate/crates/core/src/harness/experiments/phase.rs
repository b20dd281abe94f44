use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::super::common::{exact_trace, random_packets, start, symmetric_nodes};
use super::super::config::{derive_seed, ExperimentConfig};
use super::super::record::{Check, ResultRecord};
use crate::error::Result;
use crate::flow::{flow_estimate_report, random_pairs};
use crate::grid::ComplexField;
use crate::inverse::refined_norm;
use crate::phasespace::{decompose_scale_r, fbi_forward, subcollection_ratio, PhaseSpaceGrid};
use crate::potentials::{select_t0, PotentialKind};

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Fbi {
    seeds: Vec<u64>,
    band_fraction: f64,
    lambda: f64,
    tolerance: f64,
}

impl Default for Fbi {
    fn default() -> Self {
        Self { seeds: (1..=8).collect(), band_fraction: 0.5, lambda: 1.0, tolerance: 1e-6 }
    }
}

pub(crate) fn fbi_config() -> ExperimentConfig {
    ExperimentConfig::new("fbi", 1, 16.0, 256)
}

pub(crate) fn fbi(cfg: &ExperimentConfig, seed: u64) -> Result<ResultRecord> {
    let p: Fbi = cfg.params()?;
    let grid = cfg.grid()?;
    let mut rec = start(cfg, seed, None, p.seeds.clone())?;
    let ps = PhaseSpaceGrid::for_scale(&grid, p.lambda)?;
    let bands: Vec<f64> = (0..grid.dim()).map(|a| p.band_fraction * grid.max_frequency(a)).collect();
    let mut worst: f64 = 0.0;
    let mut devs = Vec::new();
    for &s in &p.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, s));
        let f = ComplexField::from_frequency_fn(&grid, |k| {
            if k.iter().zip(&bands).all(|(k, b)| k.abs() < *b) {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            } else {
                Complex64::default()
            }
        })
        .to_position()?;
        let dev = (fbi_forward(&f, &ps)?.norm() - f.norm()).abs() / f.norm();
        devs.push(dev);
        worst = worst.max(dev);
    }
    rec.measure("relative_deviation", &devs);
    rec.check(Check::at_most("| |Tf| - |f| | / |f|", worst, p.tolerance));
    Ok(rec)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Frames {
    rs: Vec<f64>,
    packets: usize,
    subcollections: usize,
    frame_bound: f64,
    reconstruction: f64,
}

impl Default for Frames {
    fn default() -> Self {
        Self { rs: vec![4.0, 16.0], packets: 6, subcollections: 100, frame_bound: 10.0, reconstruction: 1e-6 }
    }
}

pub(crate) fn frames_config() -> ExperimentConfig {
    ExperimentConfig::new("frames", 1, 16.0, 256)
}

pub(crate) fn frames(cfg: &ExperimentConfig, seed: u64) -> Result<ResultRecord> {
    let p: Frames = cfg.params()?;
    let grid = cfg.grid()?;
    let mut rec = start(cfg, seed, None, vec![1])?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let f = random_packets(&grid, p.packets, 0.375 * grid.extent(0), 0.5 * grid.max_frequency(0).min(16.0), &mut rng)?;
    for &r in &p.rs {
        let dec = decompose_scale_r(&f, r)?;
        let mut worst: f64 = 0.0;
        for _ in 0..p.subcollections {
            let keep: Vec<bool> = (0..dec.atoms.len()).map(|_| rng.random_bool(0.5)).collect();
            worst = worst.max(subcollection_ratio(&dec, |i| keep[i]));
        }
        rec.measure(&format!("R={r}"), serde_json::json!({
            "atoms": dec.atoms.len(),
            "discarded": dec.discarded,
            "coefficient_ratio": dec.coefficient_ratio,
            "frame_constant": dec.frame_constant,
            "reconstruction_error": dec.reconstruction_error,
            "worst_subcollection_ratio": worst,
        }));
        rec.check(Check::at_most(&format!("R={r} reconstruction error"), dec.reconstruction_error, p.reconstruction));
        rec.check(Check::at_most(&format!("R={r} frame constant"), dec.frame_constant, p.frame_bound));
        rec.check(Check::at_most(&format!("R={r} worst subcollection ratio / frame constant"), worst / dec.frame_constant, 1.0 + 1e-9));
    }
    Ok(rec)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FlowParams {
    pairs: usize,
    pair_seed: u64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self { pairs: 100, pair_seed: 1 }
    }
}

pub(crate) fn flow_config() -> ExperimentConfig {
    ExperimentConfig::new("flow_report", 1, 8.0, 64).with_potential(PotentialKind::Harmonic { omega: vec![1.0] })
}

pub(crate) fn flow_cases() -> Vec<ExperimentConfig> {
    vec![
        flow_config(),
        ExperimentConfig::new("flow_report", 1, 8.0, 64).with_potential(PotentialKind::TimeStepHarmonic {
            switch_times: vec![0.05],
            omegas: vec![vec![1.0], vec![0.5]],
        }),
        ExperimentConfig::new("flow_report", 2, 8.0, 64).with_potential(PotentialKind::Magnetic {
            field: vec![vec![0.0, 1.0], vec![-1.0, 0.0]],
            omega: vec![],
        }),
    ]
}

pub(crate) fn flow_report(cfg: &ExperimentConfig, seed: u64) -> Result<ResultRecord> {
    let p: FlowParams = cfg.params()?;
    let v = cfg.potential()?;
    let t0 = cfg.time.resolve(|| select_t0(&v));
    let s = derive_seed(seed, p.pair_seed);
    let mut rec = start(cfg, seed, Some(t0), vec![s])?;
    let report = flow_estimate_report(&v, &random_pairs(v.dim(), p.pairs, s), t0)?;
    rec.check(Check::at_most("|det J - 1|", report.det_deviation, 1e-9));
    for c in report.linearization.iter().chain(&report.integrated).chain([&report.once_collision, &report.dilate]) {
        rec.check(Check::at_most(&format!("constant {}", c.name), c.constant, c.budget));
    }
    rec.check(Check::holds("single-interaction bound is non-vacuous", report.once_collision_pairs > 0));
    rec.measure("report", &report);
    Ok(rec)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Refined {
    lambdas: Vec<f64>,
    seeds: Vec<u64>,
    packets: usize,
    nodes: usize,
}

impl Default for Refined {
    fn default() -> Self {
        Self { lambdas: vec![1.0, 0.5, 0.25], seeds: vec![1, 2], packets: 4, nodes: 8 }
    }
}

pub(crate) fn refined_config() -> ExperimentConfig {
    ExperimentConfig::new("refined", 1, 16.0, 512)
}

/// Reports the refined-norm ratios; the exponent is not asserted.
pub(crate) fn refined(cfg: &ExperimentConfig, seed: u64) -> Result<ResultRecord> {
    let p: Refined = cfg.params()?;
    let (grid, v) = (cfg.grid()?, cfg.potential()?);
    let mut rec = start(cfg, seed, Some(1.0), p.seeds.clone())?;
    let times = symmetric_nodes(1.0, p.nodes);
    for &s in &p.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, s));
        let f = random_packets(&grid, p.packets, 4.0, 3.0, &mut rng)?;
        let rep = refined_norm(&exact_trace(&v, &f, 0.0, &times)?, &p.lambdas)?;
        rec.check(Check::at_most(&format!("seed {s}: sup <= |u0| / (2 pi)^(d/2)"), rep.sup, rep.initial_norm * (2.0 * std::f64::consts::PI).powf(-0.5 * grid.dim() as f64) + 1e-12));
        rec.curve(&format!("theta ratio seed {s}"), rep.ratios.clone());
        rec.measure(&format!("seed {s}"), serde_json::json!({
            "sup": rep.sup, "lambda": rep.lambda, "time": rep.time, "strichartz": rep.strichartz,
        }));
    }
    Ok(rec)
}
