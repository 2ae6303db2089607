//! Adaptive integration of the vector-chart equations of motion.
//!
//! Dormand–Prince 5(4) with PI step-size control and the standard
//! continuous extension. The axis is rescaled to unit length after every
//! accepted step (never inside the stages). A run stops at `t_end`, when
//! the reaction force changes sign (contact loss, localized by bisection on
//! the dense output), or when the convergence predicate has held for a full
//! window of samples.

use serde::{Deserialize, Serialize};

use crate::analysis::{near_vertical_spin, ConvergenceCriteria, VerticalSpin};
use crate::dynamics::{derivatives_vector, monitored_scalars, MonitoredScalars};
use crate::error::{Error, Result};
use crate::params::{FrictionModel, PhysicalParams};
use crate::state::{Flat, VectorState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub t_end: f64,
    /// Output cadence of the recorded samples.
    pub sample_dt: f64,
    pub max_steps: u64,
    /// When false, negative reaction forces are integrated through instead
    /// of ending the run. Used by the invariance probes only.
    pub stop_on_contact_loss: bool,
    /// Stop once the trajectory sits at a vertical spin; `None` disables.
    pub convergence: Option<ConvergenceCriteria>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            h_init: 1e-4,
            h_max: 1e-2,
            t_end: 10.0,
            sample_dt: 1e-2,
            max_steps: 50_000_000,
            stop_on_contact_loss: true,
            convergence: Some(ConvergenceCriteria::default()),
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("h_init", self.h_init),
            ("h_max", self.h_max),
            ("t_end", self.t_end),
            ("sample_dt", self.sample_dt),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be > 0".into()));
        }
        if let Some(c) = &self.convergence {
            c.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Termination {
    TimeEnd,
    ContactLoss { t: f64 },
    Converged { limit: VerticalSpin, t: f64 },
    DegenerateDenominator { t: f64 },
    StepSizeUnderflow { t: f64 },
    StepLimit { t: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub state: VectorState,
    pub scalars: MonitoredScalars,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IntegrationStats {
    pub accepted: u64,
    pub rejected: u64,
    pub rhs_evals: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub termination: Termination,
    pub stats: IntegrationStats,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory always holds the initial sample")
    }

    /// Largest `E(t_{k+1}) - E(t_k)` between consecutive samples (<= 0 for
    /// an exactly dissipative run).
    pub fn max_energy_increase(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| w[1].scalars.energy - w[0].scalars.energy)
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
    }

    pub fn max_l3_drift(&self) -> f64 {
        let l30 = self.samples[0].scalars.l3;
        self.samples
            .iter()
            .map(|s| (s.scalars.l3 - l30).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_vertical_tip_velocity(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.scalars.va_vertical.abs())
            .fold(0.0, f64::max)
    }

    pub fn max_axis_norm_error(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.state.axis_norm_error())
            .fold(0.0, f64::max)
    }
}

// Dormand–Prince 5(4) tableau. The system is autonomous, so the nodes c_i
// are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// PI controller settings.
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

struct Rhs<'a> {
    params: &'a PhysicalParams,
    friction: &'a dyn FrictionModel,
    evals: u64,
}

impl Rhs<'_> {
    fn eval(&mut self, y: &Flat) -> Result<(Flat, f64)> {
        self.evals += 1;
        let d = derivatives_vector(&VectorState::from_flat(y), self.params, self.friction)?;
        Ok((d.rate.to_flat(), d.gn))
    }
}

/// Continuous extension over one accepted step.
struct DenseSegment {
    t0: f64,
    h: f64,
    coeffs: [Flat; 5],
}

impl DenseSegment {
    fn eval(&self, t: f64) -> Flat {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        r1 + (r2 + (r3 + (r4 + r5 * s1) * s) * s1) * s
    }
}

struct StepOutcome {
    y_new: Flat,
    k7: Flat,
    err: f64,
    dense: DenseSegment,
}

fn error_norm(err: &Flat, y: &Flat, y_new: &Flat, rel_tol: f64, abs_tol: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..8 {
        let sk = abs_tol + rel_tol * y[i].abs().max(y_new[i].abs());
        acc += (err[i] / sk).powi(2);
    }
    (acc / 8.0).sqrt()
}

fn dopri_step(rhs: &mut Rhs, t: f64, y: &Flat, k1: &Flat, h: f64, cfg: &IntegratorConfig) -> Result<StepOutcome> {
    let (k2, _) = rhs.eval(&(y + k1 * (h * A21)))?;
    let (k3, _) = rhs.eval(&(y + (k1 * A31 + k2 * A32) * h))?;
    let (k4, _) = rhs.eval(&(y + (k1 * A41 + k2 * A42 + k3 * A43) * h))?;
    let (k5, _) = rhs.eval(&(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h))?;
    let (k6, _) = rhs.eval(&(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h))?;
    let y_new = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
    let (k7, _) = rhs.eval(&y_new)?;

    let err_vec = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
    let err = error_norm(&err_vec, y, &y_new, cfg.rel_tol, cfg.abs_tol);

    let ydiff = y_new - y;
    let bspl = k1 * h - ydiff;
    let dense = DenseSegment {
        t0: t,
        h,
        coeffs: [
            *y,
            ydiff,
            bspl,
            ydiff - k7 * h - bspl,
            (k1 * D1 + k3 * D3 + k4 * D4 + k5 * D5 + k6 * D6 + k7 * D7) * h,
        ],
    };
    Ok(StepOutcome { y_new, k7, err, dense })
}

fn normalized(y: Flat) -> Flat {
    let mut s = VectorState::from_flat(&y);
    s.renormalize();
    s.to_flat()
}

enum Stop {
    Continue,
    Done(Termination),
}

struct Recorder<'a> {
    params: &'a PhysicalParams,
    friction: &'a dyn FrictionModel,
    criteria: Option<ConvergenceCriteria>,
    samples: Vec<Sample>,
    streak: Option<(VerticalSpin, usize)>,
}

impl Recorder<'_> {
    /// Append a sample; reports a degenerate force or a completed
    /// convergence window.
    fn push(&mut self, t: f64, state: VectorState) -> Result<Stop> {
        let scalars = match monitored_scalars(&state, self.params, self.friction) {
            Ok(s) => s,
            Err(Error::DegenerateDenominator { .. }) => {
                return Ok(Stop::Done(Termination::DegenerateDenominator { t }))
            }
            Err(e) => return Err(e),
        };
        self.samples.push(Sample { t, state, scalars });

        let Some(criteria) = self.criteria else {
            return Ok(Stop::Continue);
        };
        let near = near_vertical_spin(&state, self.params, &criteria);
        self.streak = match (near, self.streak) {
            (Some(limit), Some((prev, n))) if prev == limit => Some((limit, n + 1)),
            (Some(limit), _) => Some((limit, 1)),
            (None, _) => None,
        };
        match self.streak {
            Some((limit, n)) if n >= criteria.window => Ok(Stop::Done(Termination::Converged { limit, t })),
            _ => Ok(Stop::Continue),
        }
    }
}

fn gn_of(y: &Flat, params: &PhysicalParams, friction: &dyn FrictionModel) -> Result<f64> {
    Ok(derivatives_vector(&VectorState::from_flat(y), params, friction)?.gn)
}

/// Bisect `g_n` along the dense output between a non-negative and a
/// negative point.
fn locate_contact_loss(
    dense: &DenseSegment,
    mut lo: f64,
    mut hi: f64,
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
) -> Result<f64> {
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if gn_of(&dense.eval(mid), params, friction)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Integrate from `initial` at `t = 0`.
///
/// Precondition: the reaction force at `initial` is non-negative (unless
/// `stop_on_contact_loss` is off). Degenerate reaction-force denominators
/// met during the run end the trajectory; they are not errors.
pub fn integrate(
    initial: &VectorState,
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    config.validate()?;
    let mut rhs = Rhs {
        params,
        friction,
        evals: 0,
    };
    let mut rec = Recorder {
        params,
        friction,
        criteria: config.convergence,
        samples: Vec::new(),
        streak: None,
    };
    let mut stats = IntegrationStats::default();

    let mut y = normalized(initial.to_flat());
    let (mut k1, gn0) = rhs.eval(&y)?;
    if config.stop_on_contact_loss && gn0 < 0.0 {
        return Err(Error::NegativeInitialContact { gn: gn0 });
    }

    let finish = |rec: Recorder, termination, mut stats: IntegrationStats, evals| {
        stats.rhs_evals = evals;
        Ok(Trajectory {
            samples: rec.samples,
            termination,
            stats,
        })
    };

    if let Stop::Done(term) = rec.push(0.0, VectorState::from_flat(&y))? {
        return finish(rec, term, stats, rhs.evals);
    }

    let t_end = config.t_end;
    let mut next_sample: u64 = 1;
    let sample_time = |k: u64| (k as f64 * config.sample_dt).min(t_end);

    let mut t = 0.0;
    let mut h = config.h_init.min(config.h_max);
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;
    let expo = 0.2 - BETA * 0.75;

    loop {
        if stats.accepted + stats.rejected >= config.max_steps {
            return finish(rec, Termination::StepLimit { t }, stats, rhs.evals);
        }
        let h_min = 1e-14 * t.abs().max(1.0);
        if t + h >= t_end || t_end - (t + h) < h_min {
            h = t_end - t;
        }
        if h < h_min {
            return finish(rec, Termination::StepSizeUnderflow { t }, stats, rhs.evals);
        }

        let out = match dopri_step(&mut rhs, t, &y, &k1, h, config) {
            Ok(out) => out,
            Err(Error::DegenerateDenominator { .. }) => {
                // A stage left the solvable region; retry smaller unless the
                // step is already negligible.
                stats.rejected += 1;
                last_rejected = true;
                if h * 0.25 < h_min {
                    return finish(rec, Termination::DegenerateDenominator { t }, stats, rhs.evals);
                }
                h *= 0.25;
                continue;
            }
            Err(e) => return Err(e),
        };

        let fac11 = out.err.powf(expo);
        if out.err <= 1.0 {
            stats.accepted += 1;
            let t_new = if h == t_end - t { t_end } else { t + h };
            let mut fac = fac11 / fac_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = (h / fac).min(config.h_max);
            if last_rejected {
                h_new = h_new.min(h);
            }
            fac_old = out.err.max(1e-4);
            last_rejected = false;

            let y_new = normalized(out.y_new);
            let (k_next, gn_new) = if y_new == out.y_new {
                (out.k7, gn_of(&y_new, params, friction)?)
            } else {
                rhs.eval(&y_new)?
            };

            // Sample points that fall inside this step, then the event check.
            let mut pending = Vec::new();
            while sample_time(next_sample) <= t_new {
                let ts = sample_time(next_sample);
                let ys = if ts >= t_new { y_new } else { normalized(out.dense.eval(ts)) };
                pending.push((ts, ys));
                next_sample += 1;
                if ts >= t_end {
                    break;
                }
            }

            if config.stop_on_contact_loss {
                let mut lo = t;
                let mut crossing = None;
                for &(ts, ys) in &pending {
                    if gn_of(&ys, params, friction)? < 0.0 {
                        crossing = Some(ts);
                        break;
                    }
                    lo = ts;
                }
                if crossing.is_none() && gn_new < 0.0 {
                    crossing = Some(t_new);
                }
                if let Some(hi) = crossing {
                    let t_event = locate_contact_loss(&out.dense, lo, hi, params, friction)?;
                    for &(ts, ys) in pending.iter().filter(|(ts, _)| *ts < t_event) {
                        if let Stop::Done(term) = rec.push(ts, VectorState::from_flat(&ys))? {
                            return finish(rec, term, stats, rhs.evals);
                        }
                    }
                    let y_event = normalized(out.dense.eval(t_event));
                    rec.push(t_event, VectorState::from_flat(&y_event))?;
                    return finish(rec, Termination::ContactLoss { t: t_event }, stats, rhs.evals);
                }
            }

            for (ts, ys) in pending {
                if let Stop::Done(term) = rec.push(ts, VectorState::from_flat(&ys))? {
                    return finish(rec, term, stats, rhs.evals);
                }
            }

            t = t_new;
            y = y_new;
            k1 = k_next;
            h = h_new;
            if t >= t_end {
                return finish(rec, Termination::TimeEnd, stats, rhs.evals);
            }
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
        }
    }
}

/// One classical fourth-order Runge–Kutta step (no renormalization).
pub fn step_fixed_rk4(
    state: &VectorState,
    h: f64,
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
) -> Result<VectorState> {
    let f = |y: &Flat| -> Result<Flat> {
        Ok(derivatives_vector(&VectorState::from_flat(y), params, friction)?
            .rate
            .to_flat())
    };
    let y = state.to_flat();
    let k1 = f(&y)?;
    let k2 = f(&(y + k1 * (0.5 * h)))?;
    let k3 = f(&(y + k2 * (0.5 * h)))?;
    let k4 = f(&(y + k3 * h))?;
    Ok(VectorState::from_flat(&(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))))
}
