use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::record::{Provenance, ResultRecord};
use crate::error::Result;
use crate::flow::PhasePoint;
use crate::grid::{ComplexField, GridSpec, SpacetimeTrace};
use crate::phasespace::coherent_state;
use crate::potentials::{PotentialSpec, ETA};
use crate::propagators::QuadraticPlan;

pub(crate) fn start(cfg: &ExperimentConfig, seed: u64, t0: Option<f64>, seeds: Vec<u64>) -> Result<ResultRecord> {
    let grid = cfg.grid()?;
    let d = grid.dim();
    let prov = Provenance {
        dimension: d,
        extent: (0..d).map(|a| grid.extent(a)).collect(),
        points: (0..d).map(|a| grid.points(a)).collect(),
        potential: cfg.potential.clone(),
        t0,
        eta: ETA,
        seeds,
    };
    Ok(ResultRecord::new(&cfg.experiment, cfg.digest(seed), seed, prov))
}

/// Unit-mass sum of `count` unit-scale coherent states with centres drawn
/// from `[-x_half, x_half]^d x [-xi_half, xi_half]^d`.
pub(crate) fn random_packets(grid: &GridSpec, count: usize, x_half: f64, xi_half: f64, rng: &mut impl Rng) -> Result<ComplexField> {
    let d = grid.dim();
    let mut f = ComplexField::zeros(grid);
    for _ in 0..count {
        let x = (0..d).map(|_| rng.random_range(-x_half..=x_half)).collect();
        let xi = (0..d).map(|_| rng.random_range(-xi_half..=xi_half)).collect();
        let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        f.axpy(c, &coherent_state(&PhasePoint::new(x, xi), 1.0, grid)?)?;
    }
    let n = f.norm();
    Ok(if n > 0.0 { f.scaled(Complex64::new(1.0 / n, 0.0)) } else { f })
}

/// `2m + 1` equispaced nodes on `[-t0, t0]`.
pub(crate) fn symmetric_nodes(t0: f64, m: usize) -> Vec<f64> {
    (0..=2 * m).map(|k| -t0 + k as f64 * t0 / m as f64).collect()
}

pub(crate) fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times.windows(2).zip(values.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum()
}

/// `g(t, [U(t, s) f_1, ..., U(t, s) f_k])` at every node, by exact
/// propagation from `s`.
pub(crate) fn at_nodes<T: Send>(
    v: &PotentialSpec,
    fields: &[&ComplexField],
    s: f64,
    times: &[f64],
    g: impl Fn(f64, &[ComplexField]) -> T + Sync,
) -> Result<Vec<T>> {
    times
        .par_iter()
        .map(|&t| {
            let plan = QuadraticPlan::new(v, s, t)?;
            let us: Vec<ComplexField> = fields.iter().map(|f| plan.apply(f)).collect();
            Ok(g(t, &us))
        })
        .collect()
}

/// The exact solution through `f` at time `s`, sampled at `times`.
pub(crate) fn exact_trace(v: &PotentialSpec, f: &ComplexField, s: f64, times: &[f64]) -> Result<SpacetimeTrace> {
    let fields = at_nodes(v, &[f], s, times, |_, us| us[0].clone())?;
    SpacetimeTrace::new(times.to_vec(), fields)
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn trapezoid_is_exact_on_lines() {
        let t = symmetric_nodes(1.0, 4);
        assert_eq!(t.len(), 9);
        let v: Vec<f64> = t.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((trapezoid(&t, &v) - 2.0).abs() < 1e-15);
    }
}
