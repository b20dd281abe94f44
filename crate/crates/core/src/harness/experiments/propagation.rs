use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::super::common::{exact_trace, random_packets, start, symmetric_nodes};
use super::super::config::{derive_seed, ExperimentConfig};
use super::super::fit::fit_loglog;
use super::super::record::{Check, ResultRecord};
use crate::error::Result;
use crate::flow::PhasePoint;
use crate::grid::{mixed_norm, GridSpec};
use crate::phasespace::coherent_state;
use crate::potentials::{select_t0, PotentialKind, PotentialSpec};
use crate::propagators::{
    dispersive_ratio_on, exact_quadratic_propagate, galilei_covariance_residual, lens_transform, propagate, Method,
    PropagatorSpec,
};

fn harmonic(d: usize, omega: f64) -> PotentialKind {
    PotentialKind::Harmonic { omega: vec![omega; d] }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Unitarity {
    steps: usize,
    stride: usize,
    packets: usize,
    seeds: Vec<u64>,
    tolerance: f64,
}

impl Default for Unitarity {
    fn default() -> Self {
        Self { steps: 1000, stride: 50, packets: 4, seeds: vec![1], tolerance: 1e-12 }
    }
}

pub(crate) fn unitarity_config() -> ExperimentConfig {
    ExperimentConfig::new("unitarity", 1, 32.0, 1024).with_potential(harmonic(1, 1.0)).with_dt(1e-3)
}

pub(crate) fn unitarity_cases() -> Vec<ExperimentConfig> {
    vec![unitarity_config(), ExperimentConfig::new("unitarity", 2, 16.0, 256).with_potential(harmonic(2, 1.0)).with_dt(1e-3)]
}

pub(crate) fn unitarity(cfg: &ExperimentConfig, seed: u64) -> Result<ResultRecord> {
    let p: Unitarity = cfg.params()?;
    let (grid, v) = (cfg.grid()?, cfg.potential()?);
    let dt = cfg.time.dt_or(1e-3);
    let mut rec = start(cfg, seed, None, p.seeds.clone())?;
    let spec = PropagatorSpec::split_step(v, dt)?;
    let mut worst: f64 = 0.0;
    for &s in &p.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, s));
        let f = random_packets(&grid, p.packets, 0.25 * grid.extent(0), 0.25 * grid.max_frequency(0), &mut rng)?;
        let tr = propagate(&spec, &f, p.steps as f64 * dt, p.stride)?;
        let m0 = f.mass();
        let drift = tr.fields().iter().map(|u| (u.mass() - m0).abs() / m0).fold(0.0, f64::max);
        rec.curve(&format!("mass drift seed {s}"), tr.times().iter().zip(tr.fields()).map(|(&t, u)| (t, (u.mass() - m0).abs() / m0)).collect());
        worst = worst.max(drift);
    }
    rec.measure("steps", p.steps);
    rec.measure("dt", dt);
    rec.check(Check::at_most("relative mass drift", worst, p.tolerance));
    Ok(rec)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Oracle {
    t: f64,
    x0: f64,
    xi0: f64,
    tolerance: f64,
    ratio_band: [f64; 2],
}

impl Default for Oracle {
    fn default() -> Self {
        Self { t: 1.0, x0: 1.0, xi0: 0.5, tolerance: 1e-6, ratio_band: [3.5, 4.5] }
    }
}

pub(crate) fn oracle_config() -> ExperimentConfig {
    ExperimentConfig::new("oracle", 1, 16.0, 256).with_potential(harmonic(1, 1.0)).with_dt(1e-3)
}

pub(crate) fn oracle(cfg: &ExperimentConfig, seed: u64) -> Result<ResultRecord> {
    let p: Oracle = cfg.params()?;
    let (grid, v) = (cfg.grid()?, cfg.potential()?);
    let d = grid.dim();
    let dt = cfg.time.dt_or(1e-3);
    let mut rec = start(cfg, seed, None, vec![])?;
    let f = coherent_state(&PhasePoint::new(vec![p.x0; d], vec![p.xi0; d]), 1.0, &grid)?;
    let exact = exact_quadratic_propagate(&PropagatorSpec::exact(v.clone(), p.t)?, &f, p.t)?;
    let split = |h: f64| -> Result<f64> {
        let steps = (p.t / h).round() as usize;
        let tr = propagate(&PropagatorSpec::split_step(v.clone(), h)?, &f, p.t, steps)?;
        tr.fields()[tr.len() - 1].distance(&exact).map(|e| e / f.norm())
    };
    let (e1, e2) = (split(dt)?, split(0.5 * dt)?);
    rec.measure("error_dt", e1);
    rec.measure("error_half_dt", e2);
    rec.curve("split-step error", vec![(0.5 * dt, e2), (dt, e1)]);
    rec.check(Check::at_most("relative L2 error at dt", e1, p.tolerance));
    rec.check(Check::within("error ratio on halving dt", e1 / e2, p.ratio_band[0], p.ratio_band[1]));
    Ok(rec)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Dispersive {
    samples: usize,
    width: Option<f64>,
    tolerance: f64,
}

impl Default for Dispersive {
    fn default() -> Self {
        Self { samples: 4, width: None, tolerance: 0.05 }
    }
}

pub(crate) fn dispersive_config() -> ExperimentConfig {
    ExperimentConfig::new("dispersive", 1, 64.0, 4096)
}

/// Grids for the four acceptance cases (free / harmonic, d = 1, 2).
pub(crate) fn dispersive_cases() -> Vec<ExperimentConfig> {
    vec![
        dispersive_config(),
        ExperimentConfig::new("dispersive", 1, 8.0, 1024).with_potential(harmonic(1, 1.0)),
        ExperimentConfig::new("dispersive", 2, 30.0, 1024),
        ExperimentConfig::new("dispersive", 2, 8.0, 1024).with_potential(harmonic(2, 1.0)),
    ]
}

pub(crate) fn dispersive(cfg: &ExperimentConfig, seed: u64) -> Result<ResultRecord> {
    let p: Dispersive = cfg.params()?;
    let (grid, v) = (cfg.grid()?, cfg.potential()?);
    let d = grid.dim() as f64;
    let t0 = cfg.time.resolve(|| select_t0(&v));
    let mut rec = start(cfg, seed, Some(t0), vec![])?;
    let times: Vec<f64> = (0..p.samples).rev().map(|k| t0 * 0.5f64.powi(k as i32)).collect();
    let width = p.width.unwrap_or(0.45 * times[0].sqrt());
    let method = if v.is_free() { Method::ExactFree { dt: t0 } } else { Method::ExactQuadratic { dt: t0 } };
    let ratios = dispersive_ratio_on(&PropagatorSpec::new(v, method)?, &times, width, Some(&grid))?;
    let fit = fit_loglog(&ratios)?;
    rec.measure("width", width);
    rec.curve("sup|U f| / |f|_1", ratios);
    rec.fit("dispersive decay", fit);
    rec.check(Check::within("fitted slope", fit.slope, -0.5 * d - p.tolerance, -0.5 * d + p.tolerance));
    Ok(rec)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Strichartz {
    seeds: Vec<u64>,
    packets: usize,
    x_spread: f64,
    xi_spread: f64,
    tolerance: f64,
}

impl Default for Strichartz {
    fn default() -> Self {
        Self { seeds: (1..=8).collect(), packets: 8, x_spread: 3.0, xi_spread: 4.0, tolerance: 0.02 }
    }
}

pub(crate) fn strichartz_config() -> ExperimentConfig {
    ExperimentConfig::new("strichartz", 1, 16.0, 256).with_potential(harmonic(1, 1.0))
}

pub(crate) fn strichartz(cfg: &ExperimentConfig, seed: u64) -> Result<ResultRecord> {
    let p: Strichartz = cfg.params()?;
    let (grid, v) = (cfg.grid()?, cfg.potential()?);
    let d = grid.dim();
    let t0 = cfg.time.resolve(|| select_t0(&v));
    let dt = cfg.time.dt_or(t0 / 100.0);
    let mut rec = start(cfg, seed, Some(t0), p.seeds.clone())?;
    let q = 2.0 * (d as f64 + 2.0) / d as f64;
    let m = (t0 / dt).round().max(1.0) as usize;
    let times = symmetric_nodes(t0, m);
    let fine = GridSpec::anisotropic((0..d).map(|a| grid.extent(a)).collect(), (0..d).map(|a| 2 * grid.points(a)).collect())?;
    let sup_on = |g: &GridSpec| -> Result<(f64, Vec<f64>)> {
        let mut ratios = Vec::new();
        for &s in &p.seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, s));
            let f = random_packets(g, p.packets, p.x_spread, p.xi_spread, &mut rng)?;
            let tr = exact_trace(&v, &f, 0.0, &times)?;
            ratios.push(mixed_norm(&tr, q, q)? / f.norm());
        }
        Ok((ratios.iter().cloned().fold(0.0, f64::max), ratios))
    };
    let (coarse, rc) = sup_on(&grid)?;
    let (refined, rf) = sup_on(&fine)?;
    rec.measure("exponent", q);
    rec.measure("ratios", &rc);
    rec.measure("ratios_refined", &rf);
    rec.measure("sup", coarse);
    rec.measure("sup_refined", refined);
    rec.check(Check::holds("sup finite", coarse.is_finite() && refined.is_finite()));
    rec.check(Check::at_most("relative change under refinement", (refined - coarse).abs() / coarse, p.tolerance));
    Ok(rec)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Galilei {
    x0: Vec<f64>,
    xi0: Vec<f64>,
    t: Option<f64>,
    packets: usize,
    tolerance: f64,
}

impl Default for Galilei {
    fn default() -> Self {
        Self { x0: vec![2.0], xi0: vec![1.0], t: None, packets: 3, tolerance: 1e-6 }
    }
}

pub(crate) fn galilei_config() -> ExperimentConfig {
    ExperimentConfig::new("galilei", 1, 16.0, 256).with_potential(harmonic(1, 1.0))
}

pub(crate) fn galilei(cfg: &ExperimentConfig, seed: u64) -> Result<ResultRecord> {
    let p: Galilei = cfg.params()?;
    let (grid, v) = (cfg.grid()?, cfg.potential()?);
    let d = grid.dim();
    let t0 = cfg.time.resolve(|| select_t0(&v));
    let t = p.t.unwrap_or(t0);
    let mut rec = start(cfg, seed, Some(t0), vec![1])?;
    let pad = |w: &[f64]| (0..d).map(|i| *w.get(i).or(w.last()).unwrap_or(&0.0)).collect::<Vec<_>>();
    let z0 = PhasePoint::new(pad(&p.x0), pad(&p.xi0));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let f = random_packets(&grid, p.packets, 1.0, 1.0, &mut rng)?;
    let r = galilei_covariance_residual(&v, &z0, &f, t, Method::ExactQuadratic { dt: t })?;
    rec.measure("t", t);
    rec.check(Check::at_most("covariance residual", r / f.norm(), p.tolerance));
    Ok(rec)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Lens {
    t: f64,
    packets: usize,
    tolerance: f64,
}

impl Default for Lens {
    fn default() -> Self {
        Self { t: 0.3, packets: 3, tolerance: 1e-5 }
    }
}

pub(crate) fn lens_config() -> ExperimentConfig {
    ExperimentConfig::new("lens", 1, 16.0, 512)
}

/// The lens identity compares free evolution against `V = |x|^2 / 2`; the
/// configured potential is not used.
pub(crate) fn lens(cfg: &ExperimentConfig, seed: u64) -> Result<ResultRecord> {
    let p: Lens = cfg.params()?;
    let grid = cfg.grid()?;
    let d = grid.dim();
    let mut rec = start(cfg, seed, None, vec![1])?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let f = random_packets(&grid, p.packets, 1.0, 1.0, &mut rng)?;
    let tau = p.t.tan();
    let free = propagate(&PropagatorSpec::new(PotentialSpec::free(d), Method::ExactFree { dt: tau })?, &f, tau, 1)?;
    let lensed = lens_transform(&free, &[p.t])?;
    let osc = PotentialSpec::new(d, harmonic(d, 1.0))?;
    let direct = exact_quadratic_propagate(&PropagatorSpec::exact(osc, p.t)?, &f, p.t)?;
    let err = lensed.fields()[0].distance(&direct)? / f.norm();
    rec.measure("t", p.t);
    rec.check(Check::at_most("L2 error", err, p.tolerance));
    Ok(rec)
}

pub(crate) fn lens_cases() -> Vec<ExperimentConfig> {
    vec![lens_config(), ExperimentConfig::new("lens", 2, 12.0, 256)]
}
