//! Asymptotics of the gliding top: stability of the two vertical spins from
//! the effective energy, finite-time convergence detection, and Monte Carlo
//! probes showing that no other `v_A = 0` or `g_n = 0` invariant set exists.

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::euler_to_vector;
use crate::dynamics::{derivatives_vector, gliding_acceleration, gliding_velocity};
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig, Termination, Trajectory};
use crate::params::{FrictionModel, PhysicalParams};
use crate::state::{EulerState, VectorState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerticalSpin {
    Upright,
    Inverted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Limit {
    Upright,
    Inverted,
    Undetermined,
}

impl From<VerticalSpin> for Limit {
    fn from(v: VerticalSpin) -> Self {
        match v {
            VerticalSpin::Upright => Limit::Upright,
            VerticalSpin::Inverted => Limit::Inverted,
        }
    }
}

/// `E2(cos theta) = L3^2/(2 I3) + (LAz - L3 cos)^2 / (2 I1* (1 - cos^2)) + m g l cos`.
pub fn effective_energy(cos_theta: f64, laz: f64, l3: f64, params: &PhysicalParams) -> Result<f64> {
    let sin_sq = 1.0 - cos_theta * cos_theta;
    if !(sin_sq > 0.0) {
        return Err(Error::EffectiveEnergyPole { cos_theta });
    }
    Ok(l3 * l3 / (2.0 * params.i3())
        + (laz - l3 * cos_theta).powi(2) / (2.0 * params.i1_star() * sin_sq)
        + params.mgl() * cos_theta)
}

/// `dE2/d(cos theta)` at `cos theta = +1` (upright) or `-1` (inverted),
/// with `L_A . z = +-L_A . 3hat` there.
pub fn e2_boundary_derivative(which: VerticalSpin, la3: f64, params: &PhysicalParams) -> f64 {
    let kinetic = la3 * la3 / (4.0 * params.i1_star());
    match which {
        VerticalSpin::Upright => -kinetic + params.mgl(),
        VerticalSpin::Inverted => kinetic + params.mgl(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub la3: f64,
    pub threshold: f64,
    pub upright_stable: bool,
    pub inverted_stable: bool,
    pub e2_curvature_up: f64,
    pub e2_curvature_down: f64,
}

/// Energy-curvature classification of the vertical spins.
///
/// `E2''(theta) = -cos(theta) E2'(cos) + sin^2(theta) E2''(cos)`, so at
/// `theta = 0` the curvature is positive iff `E2'(cos = 1) < 0`, i.e.
/// `LA3^2 > 4 m g l I1*`; at `theta = pi` it is positive iff
/// `E2'(cos = -1) > 0`, which always holds.
pub fn classify_stability(la3: f64, params: &PhysicalParams) -> StabilityReport {
    let up = e2_boundary_derivative(VerticalSpin::Upright, la3, params);
    let down = e2_boundary_derivative(VerticalSpin::Inverted, la3, params);
    StabilityReport {
        la3,
        threshold: params.upright_threshold(),
        upright_stable: up < 0.0,
        inverted_stable: down > 0.0,
        e2_curvature_up: up,
        e2_curvature_down: down,
    }
}

/// Finite-time cut-offs for deciding that a run has reached a vertical spin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceCriteria {
    /// Bound on `|v_A|` (m/s); the transverse angular rate is held below `tol_v / l`.
    pub tol_v: f64,
    /// Bound on `1 - |3hat . z|`.
    pub tol_axis: f64,
    /// Number of consecutive samples that must satisfy the bounds.
    pub window: usize,
}

impl Default for ConvergenceCriteria {
    fn default() -> Self {
        Self {
            tol_v: 1e-4,
            tol_axis: 1e-5,
            window: 20,
        }
    }
}

impl ConvergenceCriteria {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_v > 0.0 && self.tol_axis > 0.0 && self.tol_axis < 1.0) || self.window == 0 {
            return Err(Error::InvalidConfig(format!("invalid convergence criteria {self:?}")));
        }
        Ok(())
    }
}

/// Transverse angular rate `|L x 3hat| / I1`.
pub fn transverse_rate(state: &VectorState, params: &PhysicalParams) -> f64 {
    state.momentum.cross(&state.axis).norm() / params.i1()
}

/// Which vertical spin (if any) the state is within tolerance of.
pub fn near_vertical_spin(
    state: &VectorState,
    params: &PhysicalParams,
    criteria: &ConvergenceCriteria,
) -> Option<VerticalSpin> {
    if gliding_velocity(state, params).norm() >= criteria.tol_v
        || transverse_rate(state, params) >= criteria.tol_v / params.l()
    {
        return None;
    }
    let cos = state.axis.z;
    if cos > 1.0 - criteria.tol_axis {
        Some(VerticalSpin::Upright)
    } else if cos < -(1.0 - criteria.tol_axis) {
        Some(VerticalSpin::Inverted)
    } else {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Residuals {
    pub va: f64,
    pub transverse_rate: f64,
    pub axis_gap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceResult {
    pub limit: Limit,
    /// Start of the final run of samples that all sit at the limit.
    pub t_converged: Option<f64>,
    /// Residuals at the last sample.
    pub residuals: Residuals,
}

/// Decide the limit of a finished trajectory from its trailing samples.
///
/// Runs ended by contact loss or a degenerate reaction force are
/// `Undetermined` regardless of where they stopped.
pub fn detect_convergence(
    traj: &Trajectory,
    params: &PhysicalParams,
    criteria: &ConvergenceCriteria,
) -> ConvergenceResult {
    let last = traj.last();
    let residuals = Residuals {
        va: last.scalars.va_norm,
        transverse_rate: transverse_rate(&last.state, params),
        axis_gap: 1.0 - last.state.axis.z.abs(),
    };
    let undetermined = ConvergenceResult {
        limit: Limit::Undetermined,
        t_converged: None,
        residuals,
    };
    if matches!(
        traj.termination,
        Termination::ContactLoss { .. } | Termination::DegenerateDenominator { .. }
    ) {
        return undetermined;
    }

    let Some(limit) = near_vertical_spin(&last.state, params, criteria) else {
        return undetermined;
    };
    let run = traj
        .samples
        .iter()
        .rev()
        .take_while(|s| near_vertical_spin(&s.state, params, criteria) == Some(limit))
        .count();
    if run < criteria.window {
        return undetermined;
    }
    ConvergenceResult {
        limit: limit.into(),
        t_converged: Some(traj.samples[traj.samples.len() - run].t),
        residuals,
    }
}

fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub tilted_samples: usize,
    /// Tilted `v_A = 0` states whose rate vanishes (expected: none).
    pub counterexamples: usize,
    pub min_tilted_rate_norm: f64,
    /// Smallest `|dv_A/dt|` seen: how far the best candidate is from staying
    /// on `v_A = 0`.
    pub min_slip_acceleration: f64,
    pub max_vertical_rate_norm: f64,
}

impl FixedPointReport {
    pub fn passed(&self) -> bool {
        self.counterexamples == 0 && self.max_vertical_rate_norm < 1e-14
    }
}

/// Monte Carlo check that the only `v_A = 0` equilibria are vertical spins.
///
/// Draws tilted no-slip states with positive reaction force and confirms
/// none is a fixed point of the vector field; also evaluates vertical spins
/// of random axial rate, which must be fixed points.
pub fn verify_fixed_point_family(
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
    n_samples: usize,
    seed: u64,
) -> Result<FixedPointReport> {
    let tol = 1e-12;
    let outcomes: Vec<(f64, f64, f64)> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64, f64)> {
            let mut rng = sample_rng(seed, i);
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let omega3 = rng.gen_range(-400.0..400.0);
            // Tilted no-slip state with g_n > 0.
            let (state, d) = loop {
                let e = EulerState {
                    theta: rng.gen_range(0.05..std::f64::consts::PI - 0.05),
                    thetadot: rng.gen_range(-5.0..5.0),
                    phidot: rng.gen_range(-20.0..20.0),
                    omega3,
                    nux: 0.0,
                    nuy: 0.0,
                };
                let s = euler_to_vector(&e, phi, params);
                let d = derivatives_vector(&s, params, friction)?;
                if d.gn > 0.0 {
                    break (s, d);
                }
            };
            debug_assert!(gliding_velocity(&state, params).norm() < 1e-12);
            let slip_acc = gliding_acceleration(&state, &d.rate, params).norm();

            let vertical = if i % 2 == 0 {
                VectorState::upright_spin(params, omega3)
            } else {
                VectorState::inverted_spin(params, omega3)
            };
            let vertical_rate = derivatives_vector(&vertical, params, friction)?.rate.norm();
            Ok((d.rate.norm(), slip_acc, vertical_rate))
        })
        .collect::<Result<_>>()?;

    Ok(FixedPointReport {
        tilted_samples: outcomes.len(),
        counterexamples: outcomes.iter().filter(|o| o.0 <= tol).count(),
        min_tilted_rate_norm: outcomes.iter().map(|o| o.0).fold(f64::INFINITY, f64::min),
        min_slip_acceleration: outcomes.iter().map(|o| o.1).fold(f64::INFINITY, f64::min),
        max_vertical_rate_norm: outcomes.iter().map(|o| o.2).fold(0.0, f64::max),
    })
}

/// `g I1^2 / l + (L . z)(L . 3hat) - (3hat . z) |L|^2`: the reaction-force
/// numerator divided by `m l`. Vanishes exactly where `g_n = 0`.
pub fn gn_numerator(state: &VectorState, params: &PhysicalParams) -> f64 {
    let lvec = &state.momentum;
    params.g() * params.i1().powi(2) / params.l() + lvec.z * lvec.dot(&state.axis)
        - state.axis.z * lvec.norm_squared()
}

/// Find `lambda > 0` with `gn_numerator` zero for `L = lambda * direction`,
/// by bracketing outward from zero and bisecting.
pub fn solve_numerator_zero(
    axis: &Vector3<f64>,
    direction: &Vector3<f64>,
    rdot: Vector2<f64>,
    params: &PhysicalParams,
) -> Result<VectorState> {
    let at = |lambda: f64| VectorState {
        rdot,
        momentum: direction * lambda,
        axis: *axis,
    };
    let f = |lambda: f64| gn_numerator(&at(lambda), params);
    // f(0) = g I1^2 / l > 0.
    let mut lo = 0.0;
    let mut hi = 1e-3;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::RootFindFailure(
                "numerator stays positive along the sampled direction".into(),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let (flo, fhi) = (f(lo), f(hi));
    Ok(at(if flo.abs() <= fhi.abs() { lo } else { hi }))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GnZeroReport {
    pub attempted: usize,
    pub constructed: usize,
    /// Samples with no on-manifold state along the drawn direction.
    pub root_find_failures: usize,
    pub departed: usize,
    /// Runs that met a singular reaction-force denominator (or a collapsed
    /// step) before departing; they are excluded rather than counted either way.
    pub breakdowns: usize,
    /// Constructed states that stayed on the `g_n = 0` set (expected: none).
    pub counterexamples: usize,
    /// Smallest peak `|numerator| / (g I1^2 / l)` reached by a completed run.
    pub min_departure: f64,
    /// Largest `|g_n|` at the constructed starting states.
    pub max_initial_gn: f64,
}

impl GnZeroReport {
    pub fn passed(&self) -> bool {
        self.departed > 0 && self.counterexamples == 0
    }
}

pub const GN_ZERO_HORIZON: f64 = 1e-2;
pub const GN_ZERO_DEPARTURE: f64 = 1e-6;

enum Probe {
    NoRoot,
    Departed { peak: f64, gn0: f64 },
    Stayed { peak: f64, gn0: f64 },
    Breakdown { gn0: f64 },
}

/// Monte Carlo check that no solution lives on `g_n = 0`.
///
/// States on the numerator-zero set are built by root finding along a
/// random momentum direction, integrated for [`GN_ZERO_HORIZON`] seconds
/// (through negative reaction forces), and required to leave the set by a
/// relative margin of [`GN_ZERO_DEPARTURE`].
pub fn verify_no_gn_zero_solutions(
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
    n_samples: usize,
    seed: u64,
) -> Result<GnZeroReport> {
    let scale = params.g() * params.i1().powi(2) / params.l();
    let cfg = IntegratorConfig {
        rel_tol: 1e-11,
        abs_tol: 1e-13,
        h_init: 1e-5,
        h_max: 1e-3,
        t_end: GN_ZERO_HORIZON,
        sample_dt: GN_ZERO_HORIZON / 20.0,
        stop_on_contact_loss: false,
        convergence: None,
        ..Default::default()
    };

    let probes: Vec<Probe> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| -> Result<Probe> {
            let mut rng = sample_rng(seed, i);
            let theta: f64 = rng.gen_range(0.02..std::f64::consts::PI - 0.02);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let axis = Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            let direction = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalize();
            let rdot = Vector2::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
            let start = match solve_numerator_zero(&axis, &direction, rdot, params) {
                Ok(s) => s,
                Err(Error::RootFindFailure(_)) => return Ok(Probe::NoRoot),
                Err(e) => return Err(e),
            };
            let gn0 = match derivatives_vector(&start, params, friction) {
                Ok(d) => d.gn.abs(),
                Err(Error::DegenerateDenominator { .. }) => return Ok(Probe::NoRoot),
                Err(e) => return Err(e),
            };
            let traj = integrate(&start, params, friction, &cfg)?;
            let peak = traj
                .samples
                .iter()
                .map(|s| gn_numerator(&s.state, params).abs() / scale)
                .fold(0.0, f64::max);
            Ok(if peak > GN_ZERO_DEPARTURE {
                Probe::Departed { peak, gn0 }
            } else if traj.termination != Termination::TimeEnd {
                Probe::Breakdown { gn0 }
            } else {
                Probe::Stayed { peak, gn0 }
            })
        })
        .collect::<Result<_>>()?;

    let mut report = GnZeroReport {
        attempted: n_samples,
        constructed: 0,
        root_find_failures: 0,
        departed: 0,
        breakdowns: 0,
        counterexamples: 0,
        min_departure: f64::INFINITY,
        max_initial_gn: 0.0,
    };
    for probe in probes {
        let gn0 = match probe {
            Probe::NoRoot => {
                report.root_find_failures += 1;
                continue;
            }
            Probe::Departed { peak, gn0 } => {
                report.departed += 1;
                report.min_departure = report.min_departure.min(peak);
                gn0
            }
            Probe::Stayed { peak, gn0 } => {
                report.counterexamples += 1;
                report.min_departure = report.min_departure.min(peak);
                gn0
            }
            Probe::Breakdown { gn0 } => {
                report.breakdowns += 1;
                gn0
            }
        };
        report.constructed += 1;
        report.max_initial_gn = report.max_initial_gn.max(gn0);
    }
    Ok(report)
}
