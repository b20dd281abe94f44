use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Deserialize;

use super::super::common::{at_nodes, median, start, symmetric_nodes, trapezoid};
use super::super::config::{derive_seed, ExperimentConfig};
use super::super::fit::fit_loglog;
use super::super::record::{Check, ResultRecord};
use crate::error::{Error, Result};
use crate::flow::PhasePoint;
use crate::grid::{ComplexField, GridSpec, Representation};
use crate::phasespace::coherent_state;
use crate::potentials::{select_t0, select_t0_with, PotentialKind, PotentialSpec, ETA};

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Bilinear {
    q: Option<f64>,
    ns: Vec<f64>,
    c: f64,
    seeds: Vec<u64>,
    /// Width of the spatial window in units of `1/N`.
    window: f64,
    /// Time nodes per unit of `N^2 t`.
    samples_per_unit: f64,
    slack: f64,
}

impl Default for Bilinear {
    fn default() -> Self {
        Self { q: None, ns: vec![4.0, 8.0, 16.0, 32.0], c: 1.0, seeds: (1..=8).collect(), window: 1.0, samples_per_unit: 1.0, slack: 0.15 }
    }
}

pub(crate) fn bilinear_config() -> ExperimentConfig {
    ExperimentConfig::new("bilinear_scaling", 1, 32.0, 4096)
}

pub(crate) fn bilinear_cases() -> Vec<ExperimentConfig> {
    let d1 = |kind| bilinear_config().with_potential(kind);
    let d2 = || {
        ExperimentConfig::new("bilinear_scaling", 2, 16.0, 1024)
            .with_grid(vec![16.0, 8.0], vec![1024, 256])
            .with_param("ns", [4.0, 8.0, 16.0])
    };
    vec![
        bilinear_config(),
        d1(PotentialKind::Harmonic { omega: vec![0.2] }),
        d1(PotentialKind::TimeStepHarmonic { switch_times: vec![0.0], omegas: vec![vec![0.2], vec![0.1]] }),
        d2(),
        d2().with_potential(PotentialKind::Magnetic { field: vec![vec![0.0, 0.2], vec![-0.2, 0.0]], omega: vec![] }),
    ]
}

/// Largest `T0 <= 1/2` with `T0^2 |a_xx| <= ETA`.
pub fn bilinear_t0(v: &PotentialSpec) -> f64 {
    select_t0_with(0.0, v.norm_a_xx(), ETA, 0.5)
}

// Complex Gaussian noise under the window `exp(-|N x / a|^2 / 2)`, with
// spectrum cut to the ball of radius `N / 2` about `centre`.
fn masked_noise(grid: &GridSpec, n: f64, window: f64, centre: &[f64], rng: &mut ChaCha8Rng) -> Result<ComplexField> {
    let mut vals = Vec::with_capacity(grid.len());
    grid.for_each_node(|_, x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let w = (-0.5 * r2 * (n / window).powi(2)).exp();
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        vals.push(Complex64::new(re, im) * w);
    });
    let mut spec = ComplexField::new(grid.clone(), vals, Representation::Position)?.to_frequency()?;
    let vals = spec.values_mut();
    grid.for_each_frequency(|i, k| {
        let r2: f64 = k.iter().zip(centre).map(|(a, b)| (a - b).powi(2)).sum();
        if r2.sqrt() > 0.5 * n {
            vals[i] = Complex64::default();
        }
    });
    let f = spec.to_position()?;
    let norm = f.norm();
    Ok(f.scaled(Complex64::new(1.0 / norm, 0.0)))
}

pub(crate) fn bilinear(cfg: &ExperimentConfig, seed: u64) -> Result<ResultRecord> {
    let p: Bilinear = cfg.params()?;
    let (grid, v) = (cfg.grid()?, cfg.potential()?);
    let d = grid.dim();
    let df = d as f64;
    let q = p.q.unwrap_or((df + 3.0) / (df + 1.0));
    if !(q >= (df + 3.0) / (df + 1.0) - 1e-12 && q < (df + 2.0) / df) {
        return Err(Error::Exponent(q));
    }
    if p.ns.len() < 3 || p.ns.iter().any(|&n| !(n >= 1.0)) {
        return Err(Error::Config("need at least three frequency scales N >= 1".into()));
    }
    let n_max = p.ns.iter().cloned().fold(0.0, f64::max);
    if grid.max_frequency(0) < 4.0 * p.c * n_max || (1..d).any(|a| grid.max_frequency(a) < 2.0 * n_max) {
        return Err(Error::Resolution(format!("N = {n_max} exceeds the dual range of the grid")));
    }
    let t0 = cfg.time.resolve(|| bilinear_t0(&v));
    let seeds: Vec<u64> = p.seeds.iter().map(|&s| derive_seed(seed, s)).collect();
    let mut rec = start(cfg, seed, Some(t0), seeds.clone())?;
    let bound = df - (df + 2.0) / q;
    let cell = grid.cell_volume();
    let shift = 0.5 * (p.c + 1.0);
    let mut medians = Vec::new();
    for &n in &p.ns {
        let m = ((t0 * n * n * p.samples_per_unit).ceil() as usize).max(8);
        let times = symmetric_nodes(t0, m);
        let ratios: Vec<f64> = seeds
            .par_iter()
            .map(|&s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let mut centre = vec![0.0; d];
                centre[0] = -shift * n;
                let f = masked_noise(&grid, n, p.window, &centre, &mut rng)?;
                centre[0] = shift * n;
                let g = masked_noise(&grid, n, p.window, &centre, &mut rng)?;
                let dens = at_nodes(&v, &[&f, &g], 0.0, &times, |_, us| {
                    us[0].values().iter().zip(us[1].values()).map(|(a, b)| (a * b).norm().powf(q)).sum::<f64>() * cell
                })?;
                Ok(trapezoid(&times, &dens).powf(1.0 / q))
            })
            .collect::<Result<_>>()?;
        rec.measure(&format!("N={n}"), &ratios);
        medians.push((n, median(&ratios)));
    }
    let fit = fit_loglog(&medians)?;
    rec.measure("q", q);
    rec.measure("bound", bound);
    rec.curve("median |uv|_q", medians);
    rec.fit("bilinear", fit);
    rec.check(Check::at_most("fitted slope", fit.slope, bound + p.slack));
    Ok(rec)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Kernel {
    deltas: Vec<f64>,
    mismatch_delta: f64,
    mismatches: Vec<f64>,
    separation_delta: f64,
    separations: Vec<f64>,
    dt: f64,
    slope_bound: f64,
    mismatch_factor: f64,
    separation_factor: f64,
}

impl Default for Kernel {
    fn default() -> Self {
        Self {
            deltas: vec![2.0, 4.0, 8.0, 16.0],
            mismatch_delta: 4.0,
            mismatches: vec![0.0, 2.0, 4.0, 8.0],
            separation_delta: 4.0,
            separations: vec![0.0, 2.0, 4.0, 8.0],
            dt: 0.005,
            slope_bound: -0.9,
            mismatch_factor: 1e3,
            separation_factor: 1e-6,
        }
    }
}

pub(crate) fn kernel_config() -> ExperimentConfig {
    ExperimentConfig::new("kernel_decay", 1, 16.0, 512)
}

/// `<U psi_1 U psi_2, U psi_3 U psi_4>` over `[-t0, t0] x R^d`.
pub fn four_packet_kernel(v: &PotentialSpec, grid: &GridSpec, z: &[PhasePoint; 4], t0: f64, dt: f64) -> Result<Complex64> {
    let psi: Vec<ComplexField> = z.iter().map(|p| coherent_state(p, 1.0, grid)).collect::<Result<_>>()?;
    let m = ((t0 / dt).round() as usize).max(1);
    let times = symmetric_nodes(t0, m);
    let cell = grid.cell_volume();
    let vals = at_nodes(v, &[&psi[0], &psi[1], &psi[2], &psi[3]], 0.0, &times, |_, us| {
        let s: Complex64 = (0..us[0].values().len())
            .map(|i| us[0].values()[i] * us[1].values()[i] * (us[2].values()[i] * us[3].values()[i]).conj())
            .sum();
        s * cell
    })?;
    let re: Vec<f64> = vals.iter().map(|c| c.re).collect();
    let im: Vec<f64> = vals.iter().map(|c| c.im).collect();
    Ok(Complex64::new(trapezoid(&times, &re), trapezoid(&times, &im)))
}

fn point(d: usize, x: f64, xi: f64) -> PhasePoint {
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    a[0] = x;
    b[0] = xi;
    PhasePoint::new(a, b)
}

pub(crate) fn kernel(cfg: &ExperimentConfig, seed: u64) -> Result<ResultRecord> {
    let p: Kernel = cfg.params()?;
    let (grid, v) = (cfg.grid()?, cfg.potential()?);
    let d = grid.dim();
    let t0 = cfg.time.resolve(|| select_t0(&v));
    let mut rec = start(cfg, seed, Some(t0), vec![])?;
    let k = |z: [PhasePoint; 4]| four_packet_kernel(&v, &grid, &z, t0, p.dt).map(|c| c.norm());

    let mut sweep = Vec::new();
    for &delta in &p.deltas {
        let (a, b) = (point(d, 0.0, 0.5 * delta), point(d, 0.0, -0.5 * delta));
        sweep.push((delta, k([a.clone(), b.clone(), a, b])?));
    }
    let fit = fit_loglog(&sweep)?;
    rec.curve("|K| against delta", sweep);
    rec.fit("delta sweep", fit);
    rec.check(Check::at_most("delta-sweep slope", fit.slope, p.slope_bound));

    let dm = p.mismatch_delta;
    let mut mis = Vec::new();
    for &mu in &p.mismatches {
        let z = [point(d, 0.0, 0.5 * dm), point(d, 0.0, -0.5 * dm), point(d, 0.0, 0.5 * (dm + mu)), point(d, 0.0, 0.5 * (mu - dm))];
        mis.push((mu, k(z)?));
    }
    let supp = mis[0].1 / mis[mis.len() - 1].1;
    rec.curve("|K| against frequency-sum mismatch", mis);
    rec.check(Check::at_least("mismatch suppression", supp, p.mismatch_factor));

    let ds = p.separation_delta;
    let mut sep = Vec::new();
    for &x in &p.separations {
        let z = [point(d, 0.0, 0.5 * ds), point(d, 0.0, -0.5 * ds), point(d, x, 0.5 * ds), point(d, x, -0.5 * ds)];
        sep.push((x, k(z)?));
    }
    let rel = sep[sep.len() - 1].1 / sep[0].1;
    rec.curve("|K| against separation", sep);
    rec.check(Check::at_most("separated / colliding", rel, p.separation_factor));
    Ok(rec)
}
