use num_complex::Complex64;
use serde::Deserialize;

use super::super::common::{exact_trace, start, symmetric_nodes};
use super::super::config::ExperimentConfig;
use super::super::record::{Check, ResultRecord};
use crate::error::Result;
use crate::flow::PhasePoint;
use crate::grid::ComplexField;
use crate::inverse::{find_time_interval, interval_pair, profile_decomposition, SearchGrid};
use crate::phasespace::{coherent_state, PhaseSpaceGrid};
use crate::potentials::select_t0;

/// `coefficient * S_lambda pi(x0, xi0) psi`, parameters along the first axis.
#[derive(Clone, Debug, Deserialize, serde::Serialize)]
pub struct PlantedBubble {
    pub lambda: f64,
    pub x0: f64,
    pub xi0: f64,
    #[serde(default = "one")]
    pub coefficient: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Profiles {
    scenarios: Vec<Vec<PlantedBubble>>,
    k_max: u32,
    radius: f64,
    eps_stop: f64,
    decoupling: f64,
    remainder: f64,
}

impl Default for Profiles {
    fn default() -> Self {
        let b = |lambda, x0, xi0, coefficient| PlantedBubble { lambda, x0, xi0, coefficient };
        Self {
            scenarios: vec![vec![b(0.25, 3.07, -2.11, 1.0)], vec![b(1.0, -5.93, -3.9, 1.0), b(0.5, 6.05, 5.08, 0.8)]],
            k_max: 3,
            radius: 5.0,
            eps_stop: 1e-3,
            decoupling: 0.05,
            remainder: 0.02,
        }
    }
}

pub(crate) fn profiles_config() -> ExperimentConfig {
    ExperimentConfig::new("profiles", 1, 16.0, 512)
}

fn along_first(d: usize, x: f64, xi: f64) -> PhasePoint {
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    a[0] = x;
    b[0] = xi;
    PhasePoint::new(a, b)
}

pub(crate) fn profiles(cfg: &ExperimentConfig, seed: u64) -> Result<ResultRecord> {
    let p: Profiles = cfg.params()?;
    let (grid, v) = (cfg.grid()?, cfg.potential()?);
    let d = grid.dim();
    let mut rec = start(cfg, seed, None, vec![])?;
    let mut search = SearchGrid::at_time_zero(p.k_max);
    search.radius = p.radius;
    for (si, planted) in p.scenarios.iter().enumerate() {
        let mut f = ComplexField::zeros(&grid);
        for b in planted {
            f.axpy(Complex64::new(b.coefficient, 0.0), &coherent_state(&along_first(d, b.x0, b.xi0), b.lambda, &grid)?)?;
        }
        let mass = f.mass();
        let rep = profile_decomposition(&f, &v, &search, planted.len(), p.eps_stop)?;
        let tag = format!("scenario {si}");
        rec.check(Check::at_least(&format!("{tag}: profiles found"), rep.profiles.len() as f64, planted.len() as f64));
        for (bi, b) in planted.iter().enumerate() {
            let ps = PhaseSpaceGrid::for_scale(&grid, b.lambda)?;
            let cx = ps.stride() as f64 * grid.spacing(0) / b.lambda;
            let xs = ps.xi_nodes();
            let cxi = b.lambda * if xs.len() > 1 { xs[1] - xs[0] } else { f64::INFINITY };
            let hit = rep
                .profiles
                .iter()
                .filter(|q| q.lambda == b.lambda)
                .map(|q| ((q.center.x[0] - b.x0).abs() / cx).max((q.center.xi[0] - b.xi0).abs() / cxi))
                .fold(f64::INFINITY, f64::min);
            rec.check(Check::at_most(&format!("{tag} bubble {bi}: offset in search cells"), hit, 1.0));
        }
        let last = rep.ledger.last().map_or(0.0, |e| e.decoupling);
        rec.check(Check::at_most(&format!("{tag}: decoupling residual / |f|^2"), last / mass, p.decoupling));
        rec.check(Check::at_most(&format!("{tag}: remainder mass / |f|^2"), rep.remainder.mass() / mass, p.remainder));
        rec.measure(&tag, serde_json::json!({
            "profiles": rep.profiles.iter().map(|q| serde_json::json!({
                "lambda": q.lambda, "t": q.time, "x0": q.center.x, "xi0": q.center.xi,
                "correlation": q.correlation.norm(), "mass": q.mass,
            })).collect::<Vec<_>>(),
            "ledger": rep.ledger,
        }));
    }
    Ok(rec)
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Interval {
    lambdas: Vec<f64>,
    center: f64,
    dt: f64,
    band: [f64; 2],
}

impl Default for Interval {
    fn default() -> Self {
        Self { lambdas: vec![0.25, 0.125], center: 0.3, dt: 1.0 / 1024.0, band: [0.25, 4.0] }
    }
}

pub(crate) fn interval_config() -> ExperimentConfig {
    ExperimentConfig::new("interval", 1, 32.0, 2048)
}

/// A bubble `S_lambda0 psi` placed at time `center` and evolved over `[-1, 1]`;
/// the selected window should contain `center` and have `|J| ~ lambda0^2 T0`.
pub(crate) fn interval(cfg: &ExperimentConfig, seed: u64) -> Result<ResultRecord> {
    let p: Interval = cfg.params()?;
    let (grid, v) = (cfg.grid()?, cfg.potential()?);
    let d = grid.dim();
    let t0 = cfg.time.resolve(|| select_t0(&v));
    let mut rec = start(cfg, seed, Some(t0), vec![])?;
    let (q, r) = interval_pair(d);
    let times = symmetric_nodes(1.0, (1.0 / p.dt).round() as usize);
    for &lam in &p.lambdas {
        let bubble = coherent_state(&PhasePoint::origin(d), lam, &grid)?;
        let trace = exact_trace(&v, &bubble, p.center, &times)?;
        let found = find_time_interval(&trace, q, r, t0)?;
        let rel = found.best.length() / (lam * lam * t0);
        rec.measure(&format!("lambda={lam}"), serde_json::json!({
            "start": found.best.start, "end": found.best.end, "value": found.best.value, "length_over_lambda2_t0": rel,
        }));
        rec.check(Check::holds(&format!("lambda={lam}: J contains the bubble time"), found.best.contains(p.center)));
        rec.check(Check::within(&format!("lambda={lam}: |J| / (lambda^2 T0)"), rel, p.band[0], p.band[1]));
    }
    rec.measure("q", q);
    rec.measure("r", r);
    Ok(rec)
}
