//! Trajectory CSV and JSON report emission.

use std::io::Write;

use anyhow::Result;
use gltop::analysis::{classify_stability, detect_convergence, ConvergenceResult, StabilityReport};
use gltop::chart::vector_to_euler;
use gltop::dynamics::angular_momentum_scalars;
use gltop::integrator::{IntegrationStats, Termination, Trajectory};
use serde::Serialize;

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: &str = "t,theta,phidot,omega3,nux,nuy,E,gn,L3,Lz,LAz,vA";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// One CSV line per sample. The Euler columns are left empty where the
/// chart is singular.
pub fn write_trajectory_csv(out: &mut impl Write, traj: &Trajectory, cfg: &RunConfig) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for s in &traj.samples {
        let euler = match vector_to_euler(&s.state, &cfg.params) {
            Ok((e, _)) => [e.theta, e.phidot, e.omega3, e.nux, e.nuy].map(num).join(","),
            Err(_) => ",,,,".to_string(),
        };
        let c = &s.scalars;
        writeln!(
            out,
            "{},{euler},{},{},{},{},{},{}",
            num(s.t),
            num(c.energy),
            num(c.gn),
            num(c.l3),
            num(c.lz),
            num(c.laz),
            num(c.va_norm)
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct Drifts {
    pub max_abs_delta_l3: f64,
    pub max_energy_increase: f64,
    pub max_abs_vertical_tip_velocity: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub termination: Termination,
    pub final_time: f64,
    pub samples: usize,
    pub convergence: ConvergenceResult,
    pub stability: StabilityReport,
    pub drifts: Drifts,
    pub stats: IntegrationStats,
}

/// Summarize a finished run. The stability report uses `L_A . 3hat` of the
/// initial state, which equals `L . 3hat` because the contact arm is
/// parallel to the axis.
pub fn run_report(traj: &Trajectory, cfg: &RunConfig) -> RunReport {
    let la3 = angular_momentum_scalars(&cfg.initial, &cfg.params).l3;
    RunReport {
        schema_version: SCHEMA_VERSION,
        termination: traj.termination,
        final_time: traj.last().t,
        samples: traj.samples.len(),
        convergence: detect_convergence(traj, &cfg.params, &cfg.criteria),
        stability: classify_stability(la3, &cfg.params),
        drifts: Drifts {
            max_abs_delta_l3: traj.max_l3_drift(),
            max_energy_increase: traj.max_energy_increase(),
            max_abs_vertical_tip_velocity: traj.max_vertical_tip_velocity(),
        },
        stats: traj.stats,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutput<'a> {
    pub schema_version: u32,
    pub passed: bool,
    pub settings: &'a gltop::checks::CheckSettings,
    pub suites: &'a [gltop::checks::SuiteResult],
}
