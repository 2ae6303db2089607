//! TOML run configuration.
//!
//! A document has the tables `[params]`, `[friction]`, `[initial.euler]` or
//! `[initial.vector]`, and optionally `[integrator]`, `[convergence]`,
//! `[outputs]`, `[check]` and `[sweep]`. Unknown keys are rejected so a
//! misspelt field is an error rather than a silently ignored default.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use gltop::analysis::ConvergenceCriteria;
use gltop::chart::euler_to_vector;
use gltop::checks::CheckSettings;
use gltop::integrator::IntegratorConfig;
use gltop::{ConstantFriction, EulerState, Guards, PhysicalParams, VectorState};
use nalgebra::{Vector2, Vector3};
use serde::Deserialize;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub m: f64,
    pub g: f64,
    pub l: f64,
    pub i1: f64,
    pub i3: f64,
    /// Replaces `I1 + m l^2`; only for negative-control checks.
    pub i1_star_override: Option<f64>,
    #[serde(default)]
    pub guards: Guards,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FrictionSection {
    Constant { mu: f64 },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EulerInitial {
    pub theta: f64,
    #[serde(default)]
    pub thetadot: f64,
    #[serde(default)]
    pub phidot: f64,
    pub omega3: f64,
    #[serde(default)]
    pub nux: f64,
    #[serde(default)]
    pub nuy: f64,
    #[serde(default)]
    pub phi: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorInitial {
    pub rdot: [f64; 2],
    pub momentum: [f64; 3],
    pub axis: [f64; 3],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub euler: Option<EulerInitial>,
    pub vector: Option<VectorInitial>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub t_end: f64,
    pub sample_dt: f64,
    pub max_steps: u64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let d = IntegratorConfig::default();
        Self {
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
            h_init: d.h_init,
            h_max: d.h_max,
            t_end: d.t_end,
            sample_dt: d.sample_dt,
            max_steps: d.max_steps,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSection {
    pub tol_v: f64,
    pub tol_axis: f64,
    pub window: usize,
    /// End the run as soon as the criteria have held for a full window.
    pub stop_early: bool,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        let d = ConvergenceCriteria::default();
        Self {
            tol_v: d.tol_v,
            tol_axis: d.tol_axis,
            window: d.window,
            stop_early: true,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    pub trajectory_csv: Option<PathBuf>,
    pub report_json: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path into the run document, e.g. `initial.euler.omega3`.
    pub path: String,
    pub values: Vec<toml::Value>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axes: Vec<SweepAxis>,
    pub parallelism: usize,
    /// Largest allowed number of grid points.
    pub cap: usize,
    /// Summary table, relative to the output directory.
    pub summary_csv: PathBuf,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axes: Vec::new(),
            parallelism: 1,
            cap: 10_000,
            summary_csv: PathBuf::from("sweep.csv"),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDocument {
    pub params: ParamsSection,
    pub friction: FrictionSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub convergence: ConvergenceSection,
    #[serde(default)]
    pub outputs: OutputsSection,
    #[serde(default)]
    pub check: CheckSettings,
    /// Only `sweep` reads this; `run` and `check` accept and ignore it.
    #[allow(dead_code)]
    pub sweep: Option<SweepSection>,
}

/// A validated run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub params: PhysicalParams,
    pub friction: ConstantFriction,
    pub initial: VectorState,
    pub integrator: IntegratorConfig,
    pub criteria: ConvergenceCriteria,
    pub outputs: OutputsSection,
    pub check: CheckSettings,
}

pub fn parse_document(text: &str) -> Result<RunDocument> {
    toml::from_str(text).map_err(|e| anyhow!("{e}"))
}

impl RunDocument {
    pub fn validate(&self) -> Result<RunConfig> {
        let p = &self.params;
        let mut params = PhysicalParams::new(p.m, p.g, p.l, p.i1, p.i3)
            .and_then(|x| x.with_guards(p.guards))
            .context("[params]")?;
        if let Some(i1_star) = p.i1_star_override {
            if !(i1_star.is_finite() && i1_star > 0.0) {
                bail!("[params] i1_star_override must be finite and > 0, got {i1_star}");
            }
            params = params.with_pivot_inertia_override(i1_star);
        }

        let friction = match self.friction {
            FrictionSection::Constant { mu } => ConstantFriction::new(mu).context("[friction]")?,
        };

        let initial = match (&self.initial.euler, &self.initial.vector) {
            (Some(e), None) => euler_initial(e, &params)?,
            (None, Some(v)) => vector_initial(v)?,
            _ => bail!("[initial] needs exactly one of [initial.euler] or [initial.vector]"),
        };

        let c = &self.convergence;
        let criteria = ConvergenceCriteria {
            tol_v: c.tol_v,
            tol_axis: c.tol_axis,
            window: c.window,
        };
        criteria.validate().context("[convergence]")?;

        let i = &self.integrator;
        let integrator = IntegratorConfig {
            rel_tol: i.rel_tol,
            abs_tol: i.abs_tol,
            h_init: i.h_init,
            h_max: i.h_max,
            t_end: i.t_end,
            sample_dt: i.sample_dt,
            max_steps: i.max_steps,
            stop_on_contact_loss: true,
            convergence: c.stop_early.then_some(criteria),
        };
        integrator.validate().context("[integrator]")?;

        let s = &self.check;
        if s.random_states == 0 || s.fd_states == 0 || s.fd_substeps == 0 || !(s.fd_step > 0.0 && s.horizon > 0.0) {
            bail!("[check] sample counts, fd_step and horizon must be positive");
        }

        Ok(RunConfig {
            params,
            friction,
            initial,
            integrator,
            criteria,
            outputs: self.outputs.clone(),
            check: self.check,
        })
    }
}

fn euler_initial(e: &EulerInitial, params: &PhysicalParams) -> Result<VectorState> {
    let values = [e.theta, e.thetadot, e.phidot, e.omega3, e.nux, e.nuy, e.phi];
    if values.iter().any(|v| !v.is_finite()) {
        bail!("[initial.euler] values must be finite");
    }
    if !(0.0..=std::f64::consts::PI).contains(&e.theta) {
        bail!("[initial.euler] theta must lie in [0, pi], got {}", e.theta);
    }
    let state = EulerState {
        theta: e.theta,
        thetadot: e.thetadot,
        phidot: e.phidot,
        omega3: e.omega3,
        nux: e.nux,
        nuy: e.nuy,
    };
    Ok(euler_to_vector(&state, e.phi, params))
}

fn vector_initial(v: &VectorInitial) -> Result<VectorState> {
    let all = v.rdot.iter().chain(&v.momentum).chain(&v.axis);
    if all.clone().any(|x| !x.is_finite()) {
        bail!("[initial.vector] values must be finite");
    }
    let axis = Vector3::from(v.axis);
    if (axis.norm() - 1.0).abs() > 1e-6 {
        bail!("[initial.vector] axis must be a unit vector, |axis| = {}", axis.norm());
    }
    Ok(VectorState {
        rdot: Vector2::from(v.rdot),
        momentum: Vector3::from(v.momentum),
        axis: axis.normalize(),
    })
}

/// Set a dotted `path` in a TOML document, creating intermediate tables.
pub fn set_path(doc: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    if matches!(value, toml::Value::Table(_) | toml::Value::Array(_)) {
        bail!("sweep values for `{path}` must be scalars");
    }
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) || keys[0] == "sweep" {
        bail!("invalid sweep path `{path}`");
    }
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| anyhow!("sweep path `{path}`: `{key}` is not inside a table"))?;
        node = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| anyhow!("sweep path `{path}` does not lead to a table"))?;
    let last = keys[keys.len() - 1];
    if let Some(existing) = table.get(last) {
        if matches!(existing, toml::Value::Table(_) | toml::Value::Array(_)) {
            bail!("sweep path `{path}` names a table or array, not a scalar");
        }
    }
    table.insert(last.to_string(), value);
    Ok(())
}
