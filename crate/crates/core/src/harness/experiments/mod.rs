//! Registered experiments.

mod inverse;
mod phase;
mod propagation;
mod scaling;

use std::time::Instant;

use super::config::ExperimentConfig;
use super::record::ResultRecord;
use crate::error::{Error, Result};

pub use inverse::PlantedBubble;
pub use scaling::{bilinear_t0, four_packet_kernel};

type Runner = fn(&ExperimentConfig, u64) -> Result<ResultRecord>;

pub struct ExperimentInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub default_config: fn() -> ExperimentConfig,
    run: Runner,
}

pub const EXPERIMENTS: &[ExperimentInfo] = &[
    ExperimentInfo { name: "unitarity", summary: "split-step mass conservation", default_config: propagation::unitarity_config, run: propagation::unitarity },
    ExperimentInfo { name: "oracle", summary: "split-step against exact quadratic propagation", default_config: propagation::oracle_config, run: propagation::oracle },
    ExperimentInfo { name: "dispersive", summary: "log-log slope of sup|U(t)f| / |f|_1", default_config: propagation::dispersive_config, run: propagation::dispersive },
    ExperimentInfo { name: "strichartz", summary: "L^{2(d+2)/d} ratio over seeded data and its grid refinement", default_config: propagation::strichartz_config, run: propagation::strichartz },
    ExperimentInfo { name: "galilei", summary: "phase-space translation covariance residual", default_config: propagation::galilei_config, run: propagation::galilei },
    ExperimentInfo { name: "lens", summary: "lens transform of free evolution against the oscillator", default_config: propagation::lens_config, run: propagation::lens },
    ExperimentInfo { name: "fbi", summary: "FBI transform isometry on band-limited data", default_config: phase::fbi_config, run: phase::fbi },
    ExperimentInfo { name: "frames", summary: "scale-R wavepacket reconstruction and frame bounds", default_config: phase::frames_config, run: phase::frames },
    ExperimentInfo { name: "flow_report", summary: "bicharacteristic linearization and interaction constants", default_config: phase::flow_config, run: phase::flow_report },
    ExperimentInfo { name: "refined", summary: "refined-norm sup and theta ratios", default_config: phase::refined_config, run: phase::refined },
    ExperimentInfo { name: "bilinear_scaling", summary: "N-dependence of |uv|_{L^q} for separated frequency supports", default_config: scaling::bilinear_config, run: scaling::bilinear },
    ExperimentInfo { name: "kernel_decay", summary: "four-packet kernel decay in frequency, mismatch and separation", default_config: scaling::kernel_config, run: scaling::kernel },
    ExperimentInfo { name: "profiles", summary: "planted bubble recovery and mass decoupling", default_config: inverse::profiles_config, run: inverse::profiles },
    ExperimentInfo { name: "interval", summary: "significant time interval around a planted bubble", default_config: inverse::interval_config, run: inverse::interval },
];

pub fn find(name: &str) -> Option<&'static ExperimentInfo> {
    EXPERIMENTS.iter().find(|e| e.name == name)
}

/// Runs `cfg` with `seed` and stamps the wall-clock time.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64) -> Result<ResultRecord> {
    let info = find(&cfg.experiment).ok_or_else(|| Error::Config(format!("unknown experiment {:?}", cfg.experiment)))?;
    cfg.validate()?;
    let clock = Instant::now();
    let mut rec = (info.run)(cfg, seed)?;
    rec.wall_clock_s = clock.elapsed().as_secs_f64();
    Ok(rec)
}

pub(crate) use phase::flow_cases;
pub(crate) use propagation::{dispersive_cases, lens_cases, unitarity_cases};
pub(crate) use scaling::bilinear_cases;
