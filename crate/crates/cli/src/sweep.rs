//! Cartesian parameter sweeps over a base run document.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use gltop::analysis::Limit;
use gltop::integrator::{integrate, Termination};
use rayon::prelude::*;

use crate::config::{set_path, RunDocument, SweepSection};
use crate::output::run_report;

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub index: usize,
    pub values: Vec<String>,
    pub outcome: std::result::Result<PointOutcome, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointOutcome {
    pub la3: f64,
    pub threshold: f64,
    pub predicted_upright_stable: bool,
    pub observed: Limit,
    pub t_converged: Option<f64>,
    pub termination: Termination,
}

pub fn termination_kind(t: &Termination) -> &'static str {
    match t {
        Termination::TimeEnd => "TimeEnd",
        Termination::ContactLoss { .. } => "ContactLoss",
        Termination::Converged { .. } => "Converged",
        Termination::DegenerateDenominator { .. } => "DegenerateDenominator",
        Termination::StepSizeUnderflow { .. } => "StepSizeUnderflow",
        Termination::StepLimit { .. } => "StepLimit",
    }
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn header(axes: &[String]) -> String {
    let mut cols = vec!["index".to_string()];
    cols.extend(axes.iter().map(|a| quote(a)));
    cols.extend(
        [
            "la3",
            "threshold",
            "predicted_upright_stable",
            "observed_limit",
            "t_converged",
            "termination",
            "error",
        ]
        .map(String::from),
    );
    cols.join(",")
}

impl Row {
    pub fn to_csv(&self) -> String {
        let mut cols = vec![self.index.to_string()];
        cols.extend(self.values.iter().map(|v| quote(v)));
        match &self.outcome {
            Ok(o) => cols.extend([
                format!("{:.16e}", o.la3),
                format!("{:.16e}", o.threshold),
                o.predicted_upright_stable.to_string(),
                format!("{:?}", o.observed),
                o.t_converged.map(|t| format!("{t:.16e}")).unwrap_or_default(),
                termination_kind(&o.termination).to_string(),
                String::new(),
            ]),
            Err(e) => {
                cols.extend(std::iter::repeat_n(String::new(), 6));
                cols.push(quote(e));
            }
        }
        cols.join(",")
    }
}

/// Grid point `index` in row-major order (last axis fastest).
fn grid_point(sweep: &SweepSection, mut index: usize) -> Vec<toml::Value> {
    let mut picks = vec![toml::Value::Boolean(false); sweep.axes.len()];
    for (k, axis) in sweep.axes.iter().enumerate().rev() {
        picks[k] = axis.values[index % axis.values.len()].clone();
        index /= axis.values.len();
    }
    picks
}

fn evaluate(base: &toml::Value, sweep: &SweepSection, index: usize) -> Row {
    let picks = grid_point(sweep, index);
    let values = picks.iter().map(|v| v.to_string()).collect();
    let outcome = (|| -> Result<PointOutcome> {
        let mut doc = base.clone();
        for (axis, v) in sweep.axes.iter().zip(&picks) {
            set_path(&mut doc, &axis.path, v.clone())?;
        }
        let doc: RunDocument = doc.try_into().context("grid point does not form a valid run")?;
        let cfg = doc.validate()?;
        let traj = integrate(&cfg.initial, &cfg.params, &cfg.friction, &cfg.integrator)?;
        let report = run_report(&traj, &cfg);
        Ok(PointOutcome {
            la3: report.stability.la3,
            threshold: report.stability.threshold,
            predicted_upright_stable: report.stability.upright_stable,
            observed: report.convergence.limit,
            t_converged: report.convergence.t_converged,
            termination: report.termination,
        })
    })()
    .map_err(|e| format!("{e:#}").replace('\n', " "));
    Row { index, values, outcome }
}

/// Run the grid, appending each finished row to `<summary>.partial` as it
/// completes, then write the summary sorted by grid index.
pub fn run_sweep(mut doc: toml::Value, out_dir: &Path) -> Result<Vec<Row>> {
    let sweep_value = doc
        .as_table_mut()
        .and_then(|t| t.remove("sweep"))
        .context("sweep config needs a [sweep] table")?;
    let sweep: SweepSection = sweep_value.try_into().context("[sweep]")?;
    if sweep.parallelism == 0 {
        bail!("[sweep] parallelism must be positive");
    }
    if let Some(a) = sweep.axes.iter().find(|a| a.values.is_empty()) {
        bail!("[sweep] axis `{}` has no values", a.path);
    }
    let size = sweep
        .axes
        .iter()
        .try_fold(1usize, |n, a| n.checked_mul(a.values.len()))
        .unwrap_or(usize::MAX);
    if size > sweep.cap {
        bail!("[sweep] grid has {size} points, above the cap of {}", sweep.cap);
    }
    // Catch errors in the base document before starting.
    let _: RunDocument = doc.clone().try_into().context("base run document")?;

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let summary = out_dir.join(&sweep.summary_csv);
    let mut partial_name = summary.clone().into_os_string();
    partial_name.push(".partial");
    let partial_path = std::path::PathBuf::from(partial_name);
    let axes: Vec<String> = sweep.axes.iter().map(|a| a.path.clone()).collect();
    let head = header(&axes);

    let mut partial = File::create(&partial_path).with_context(|| format!("creating {}", partial_path.display()))?;
    writeln!(partial, "{head}")?;
    partial.flush()?;
    drop(partial);
    let partial = Mutex::new(OpenOptions::new().append(true).open(&partial_path)?);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep.parallelism)
        .build()
        .context("building the worker pool")?;
    let mut rows: Vec<Row> = pool.install(|| {
        (0..size)
            .into_par_iter()
            .map(|index| {
                let row = evaluate(&doc, &sweep, index);
                let mut f = partial.lock().expect("partial log lock");
                // A failed append loses only the crash log, not the result.
                let _ = writeln!(f, "{}", row.to_csv()).and_then(|_| f.flush());
                row
            })
            .collect()
    });
    rows.sort_by_key(|r| r.index);

    let mut text = format!("{head}\n");
    for r in &rows {
        text.push_str(&r.to_csv());
        text.push('\n');
    }
    fs::write(&summary, text).with_context(|| format!("writing {}", summary.display()))?;
    fs::remove_file(&partial_path).ok();
    Ok(rows)
}
