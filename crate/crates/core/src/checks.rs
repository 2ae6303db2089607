//! Invariant suites bundled for the command-line `check` verb.
//!
//! Each suite measures a handful of drifts or errors at the configured
//! parameters and compares them with fixed tolerances.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{verify_fixed_point_family, verify_no_gn_zero_solutions};
use crate::chart::{euler_to_vector, pushforward_rate, vector_to_euler};
use crate::dynamics::{
    derivatives_euler, derivatives_vector, energy_dissipation_rate, gliding_velocity, total_energy_euler,
    total_energy_vector, vertical_momentum_rate,
};
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig, Trajectory};
use crate::params::{FrictionModel, PhysicalParams};
use crate::state::{EulerState, Flat, VectorState};

pub const CROSS_CHART_TOL: f64 = 1e-9;
pub const ROUND_TRIP_TOL: f64 = 1e-10;
pub const L3_DRIFT_TOL: f64 = 1e-8;
pub const CONSTRAINT_TOL: f64 = 1e-9;
pub const AXIS_NORM_TOL: f64 = 1e-9;
pub const RATE_LAW_TOL: f64 = 1e-5;
pub const CLASSICAL_DRIFT_TOL: f64 = 1e-8;
/// Samples with slower gliding are excluded from the rate-law comparisons.
pub const MIN_GLIDE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSettings {
    pub seed: u64,
    pub random_states: usize,
    pub fd_states: usize,
    pub fd_step: f64,
    pub fd_substeps: usize,
    pub lemma1_samples: usize,
    pub lemma2_samples: usize,
    /// Upper bound on the simulated time of the trajectory suites.
    pub horizon: f64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            random_states: 10_000,
            fd_states: 200,
            fd_step: 5e-4,
            fd_substeps: 10,
            lemma1_samples: 1000,
            lemma2_samples: 200,
            horizon: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub measured: BTreeMap<&'static str, f64>,
    pub notes: Vec<String>,
}

impl SuiteResult {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            passed: true,
            measured: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    /// Record `value` and fail the suite unless `value < limit`.
    fn below(&mut self, key: &'static str, value: f64, limit: f64) {
        self.measured.insert(key, value);
        if !(value < limit) {
            self.passed = false;
            self.notes.push(format!("{key} = {value:e} (limit {limit:e})"));
        }
    }

    fn fail(&mut self, note: String) {
        self.passed = false;
        self.notes.push(note);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

/// Random state strictly inside the Euler chart, with its azimuth.
pub fn random_interior_state(rng: &mut impl Rng) -> (EulerState, f64) {
    let e = EulerState {
        theta: rng.gen_range(0.05..PI - 0.05),
        thetadot: rng.gen_range(-10.0..10.0),
        phidot: rng.gen_range(-20.0..20.0),
        omega3: rng.gen_range(-300.0..300.0),
        nux: rng.gen_range(-0.5..0.5),
        nuy: rng.gen_range(-0.5..0.5),
    };
    (e, rng.gen_range(0.0..TAU))
}

/// Sum of the magnitudes of the terms making up each Euler-chart rate.
///
/// Used as the denominator floor of the cross-chart comparison so that a
/// component that cancels to (nearly) zero is judged against the size of
/// what cancelled. `theta` is a projection of the axis velocity, so its
/// scale is `|d3hat/dt|`. For `omega3`, whose exact rate is zero, the scale
/// is the size of `(dL/dt . 3hat + L . d3hat/dt) / I3` term by term.
pub fn euler_rate_scales(state: &EulerState, gn: f64, mu: f64, params: &PhysicalParams) -> [f64; 6] {
    let (m, l, i1, i3, i1s) = (params.m(), params.l(), params.i1(), params.i3(), params.i1_star());
    let (s, c) = (state.theta.sin().abs(), state.theta.cos().abs());
    let (td, pd, w3) = (state.thetadot.abs(), state.phidot.abs(), state.omega3.abs());
    let (nux, nuy) = (state.nux.abs(), state.nuy.abs());
    let (gn, spin) = (gn.abs(), i3 * w3);

    let lmag = (i1 * (td * td + pd * pd * s * s)).sqrt() * i1.sqrt() + spin;
    let ldot = l * gn * (1.0 + mu * (nux * nux + nuy * nuy).sqrt());
    let axis_rate = (td * td + pd * pd * s * s).sqrt();
    [
        axis_rate,
        (i1 * pd * pd * s * c + spin * pd * s + l * mu * gn * nux * c + l * gn * s) / i1,
        (spin * td + 2.0 * i1 * td * pd * c + l * mu * gn * nuy) / (i1 * s),
        (ldot + lmag * axis_rate) / i3,
        l * s / i1 * (spin * pd * c + i1 * (td * td + pd * pd * s * s) + l * gn * c)
            + mu * gn * nux / (m * i1) * (i1 + m * l * l * c * c)
            + nuy * pd,
        l * spin * td / i1 + i1s / (m * i1) * mu * gn * nuy + nux * pd,
    ]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossChartErrors {
    pub rate: f64,
    pub gn: f64,
    pub energy: f64,
    pub round_trip: f64,
}

/// Compare both charts at one interior state.
pub fn cross_chart_errors(
    e: &EulerState,
    phi: f64,
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
) -> Result<CrossChartErrors> {
    let v = euler_to_vector(e, phi, params);
    let ed = derivatives_euler(e, params, friction)?;
    let vd = derivatives_vector(&v, params, friction)?;
    let pushed = pushforward_rate(&v, &vd.rate, params)?.to_array();
    let direct = ed.rate.to_array();
    let scales = euler_rate_scales(e, ed.gn, ed.mu, params);
    let rate = (0..6)
        .map(|k| {
            let denom = direct[k].abs().max(pushed[k].abs()).max(scales[k]);
            if denom == 0.0 {
                0.0
            } else {
                (direct[k] - pushed[k]).abs() / denom
            }
        })
        .fold(0.0, f64::max);

    let (back, phi_back) = vector_to_euler(&v, params)?;
    let mut round_trip = back
        .to_array()
        .iter()
        .zip(e.to_array())
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max);
    let dphi = (phi_back - phi).rem_euclid(TAU);
    round_trip = round_trip.max(dphi.min(TAU - dphi));

    let ee = total_energy_euler(e, params);
    let ev = total_energy_vector(&v, params);
    Ok(CrossChartErrors {
        rate,
        gn: (ed.gn - vd.gn).abs() / ed.gn.abs().max(vd.gn.abs()).max(f64::MIN_POSITIVE),
        energy: (ee - ev).abs() / ee.abs().max(ev.abs()).max(f64::MIN_POSITIVE),
        round_trip,
    })
}

/// Time derivative of `observable` along the flow through `state`.
///
/// Nine-point (eighth-order) central difference with spacing `h`. The neighbouring states
/// come from `substeps` RK4 steps per spacing in each direction, with the
/// increments accumulated by compensated summation: the spin energy is
/// about six orders of magnitude above the dissipated power times `h`, so
/// plain accumulation of rounding in the state would swamp the difference.
pub fn flow_derivative(
    state: &VectorState,
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
    h: f64,
    substeps: usize,
    observable: impl Fn(&VectorState) -> Result<f64>,
) -> Result<f64> {
    let rhs = |y: &Flat| -> Result<Flat> {
        Ok(derivatives_vector(&VectorState::from_flat(y), params, friction)?
            .rate
            .to_flat())
    };
    let mut values = [0.0; 9];
    values[4] = observable(state)?;
    for dir in [-1.0, 1.0] {
        let dt = dir * h / substeps as f64;
        let mut y = state.to_flat();
        let mut carry = Flat::zeros();
        for k in 1..=4 {
            for _ in 0..substeps {
                let k1 = rhs(&y)?;
                let k2 = rhs(&(y + k1 * (0.5 * dt)))?;
                let k3 = rhs(&(y + k2 * (0.5 * dt)))?;
                let k4 = rhs(&(y + k3 * dt))?;
                let inc = (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0) - carry;
                let next = y + inc;
                carry = (next - y) - inc;
                y = next;
            }
            values[(4 + dir as i64 * k) as usize] = observable(&VectorState::from_flat(&y))?;
        }
    }
    let [m4, m3, m2, m1, _, p1, p2, p3, p4] = values;
    Ok((672.0 * (p1 - m1) - 168.0 * (p2 - m2) + 32.0 * (p3 - m3) - 3.0 * (p4 - m4)) / (840.0 * h))
}

/// Energy from the Euler-chart formula, which carries `I1*` explicitly.
fn euler_energy_of(state: &VectorState, params: &PhysicalParams) -> Result<f64> {
    let (e, _) = vector_to_euler(state, params)?;
    Ok(total_energy_euler(&e, params))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateLawErrors {
    /// Relative error of the energy identity; `None` when gliding is too slow.
    pub energy: Option<f64>,
    /// Relative error of the vertical-momentum law; `None` when `|nu_y|` is too small.
    pub vertical_momentum: Option<f64>,
}

/// Compare finite-difference rates of `E` and `L . z` with their identities.
pub fn rate_law_errors(
    state: &VectorState,
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
    h: f64,
    substeps: usize,
) -> Result<RateLawErrors> {
    let (e, _) = vector_to_euler(state, params)?;
    let mut out = RateLawErrors {
        energy: None,
        vertical_momentum: None,
    };
    if gliding_velocity(state, params).norm() > MIN_GLIDE {
        let fd = flow_derivative(state, params, friction, h, substeps, |s| euler_energy_of(s, params))?;
        let exact = energy_dissipation_rate(state, params, friction)?;
        out.energy = Some((fd - exact).abs() / exact.abs());
    }
    if e.nuy.abs() > MIN_GLIDE {
        let fd = flow_derivative(state, params, friction, h, substeps, |s| Ok(s.momentum.z))?;
        let exact = vertical_momentum_rate(&e, params, friction)?;
        out.vertical_momentum = Some((fd - exact).abs() / exact.abs());
    }
    Ok(out)
}

fn cross_chart_suite(
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
    settings: &CheckSettings,
) -> SuiteResult {
    let mut suite = SuiteResult::new("cross_chart");
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let (mut rate, mut gn, mut energy, mut round_trip) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut skipped = 0usize;
    for _ in 0..settings.random_states {
        let (e, phi) = random_interior_state(&mut rng);
        match cross_chart_errors(&e, phi, params, friction) {
            Ok(c) => {
                rate = rate.max(c.rate);
                gn = gn.max(c.gn);
                energy = energy.max(c.energy);
                round_trip = round_trip.max(c.round_trip);
            }
            Err(Error::DegenerateDenominator { .. }) => skipped += 1,
            Err(err) => {
                suite.fail(err.to_string());
                return suite;
            }
        }
    }
    suite.below("max_rate_rel_error", rate, CROSS_CHART_TOL);
    suite.below("max_gn_rel_error", gn, CROSS_CHART_TOL);
    suite.below("max_energy_rel_error", energy, CROSS_CHART_TOL);
    suite.below("max_round_trip_error", round_trip, ROUND_TRIP_TOL);
    suite.measured.insert("skipped_degenerate", skipped as f64);
    suite
}

fn conservation_suite(traj: &Trajectory) -> SuiteResult {
    let mut suite = SuiteResult::new("conservation");
    let l30 = traj.samples[0].scalars.l3;
    let l3_rel = if l30 == 0.0 {
        traj.max_l3_drift()
    } else {
        traj.max_l3_drift() / l30.abs()
    };
    suite.below("max_l3_rel_drift", l3_rel, L3_DRIFT_TOL);
    suite.below("max_vertical_tip_velocity", traj.max_vertical_tip_velocity(), CONSTRAINT_TOL);
    suite.below("max_axis_norm_error", traj.max_axis_norm_error(), AXIS_NORM_TOL);
    let eps_e = 1e-8 * (1.0 + traj.samples[0].scalars.energy.abs());
    suite.below("max_energy_increase_over_eps", traj.max_energy_increase() / eps_e, 1.0);
    let negative_gn = traj.samples.iter().filter(|s| s.scalars.gn < 0.0).count();
    suite.below("negative_gn_samples", negative_gn as f64, 1.0);
    suite.measured.insert("samples", traj.samples.len() as f64);
    suite
}

fn dissipation_suite(
    traj: &Trajectory,
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
    settings: &CheckSettings,
) -> SuiteResult {
    let mut suite = SuiteResult::new("dissipation_identity");
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x5eed_d155);
    let mut states: Vec<VectorState> = Vec::new();
    while states.len() < settings.fd_states {
        let (mut e, phi) = random_interior_state(&mut rng);
        e.nux = e.nux.signum() * e.nux.abs().max(0.05);
        e.nuy = e.nuy.signum() * e.nuy.abs().max(0.05);
        let v = euler_to_vector(&e, phi, params);
        if derivatives_vector(&v, params, friction).is_ok_and(|d| d.gn > 0.0) {
            states.push(v);
        }
    }
    let stride = (traj.samples.len() / settings.fd_states.max(1)).max(1);
    states.extend(traj.samples.iter().step_by(stride).map(|s| s.state));

    let (mut energy, mut lz) = (0.0f64, 0.0f64);
    let (mut n_energy, mut n_lz) = (0usize, 0usize);
    for s in &states {
        match rate_law_errors(s, params, friction, settings.fd_step, settings.fd_substeps) {
            Ok(r) => {
                if let Some(x) = r.energy {
                    energy = energy.max(x);
                    n_energy += 1;
                }
                if let Some(x) = r.vertical_momentum {
                    lz = lz.max(x);
                    n_lz += 1;
                }
            }
            Err(Error::ChartSingularity { .. }) => {}
            Err(err) => {
                suite.fail(err.to_string());
                return suite;
            }
        }
    }
    if friction.is_frictionless() {
        suite.notes.push("frictionless: both rates vanish, identities not compared".into());
    } else {
        suite.below("max_energy_rate_rel_error", energy, RATE_LAW_TOL);
        suite.below("max_vertical_momentum_rate_rel_error", lz, RATE_LAW_TOL);
    }
    suite.measured.insert("energy_points", n_energy as f64);
    suite.measured.insert("vertical_momentum_points", n_lz as f64);
    suite
}

fn lemma1_suite(params: &PhysicalParams, friction: &dyn FrictionModel, settings: &CheckSettings) -> SuiteResult {
    let mut suite = SuiteResult::new("lemma1_fixed_points");
    match verify_fixed_point_family(params, friction, settings.lemma1_samples, settings.seed) {
        Ok(r) => {
            suite.below("counterexamples", r.counterexamples as f64, 1.0);
            suite.below("max_vertical_rate_norm", r.max_vertical_rate_norm, 1e-14);
            suite.measured.insert("min_tilted_rate_norm", r.min_tilted_rate_norm);
            suite.measured.insert("min_slip_acceleration", r.min_slip_acceleration);
            suite.measured.insert("samples", r.tilted_samples as f64);
        }
        Err(err) => suite.fail(err.to_string()),
    }
    suite
}

fn lemma2_suite(params: &PhysicalParams, friction: &dyn FrictionModel, settings: &CheckSettings) -> SuiteResult {
    let mut suite = SuiteResult::new("lemma2_no_gn_zero");
    match verify_no_gn_zero_solutions(params, friction, settings.lemma2_samples, settings.seed) {
        Ok(r) => {
            suite.below("counterexamples", r.counterexamples as f64, 1.0);
            if r.constructed == 0 {
                suite.fail("no numerator-zero state could be constructed".into());
            }
            suite.measured.insert("constructed", r.constructed as f64);
            suite.measured.insert("root_find_failures", r.root_find_failures as f64);
            suite.measured.insert("min_departure", r.min_departure);
        }
        Err(err) => suite.fail(err.to_string()),
    }
    suite
}

fn classical_suite(traj: &Trajectory) -> SuiteResult {
    let mut suite = SuiteResult::new("classical_limit");
    let first = &traj.samples[0].scalars;
    let rel = |now: f64, then: f64| (now - then).abs() / then.abs().max(f64::MIN_POSITIVE);
    let e_drift = traj
        .samples
        .iter()
        .map(|s| rel(s.scalars.energy, first.energy))
        .fold(0.0, f64::max);
    let lz_drift = traj
        .samples
        .iter()
        .map(|s| {
            if first.lz == 0.0 {
                s.scalars.lz.abs()
            } else {
                rel(s.scalars.lz, first.lz)
            }
        })
        .fold(0.0, f64::max);
    suite.below("max_energy_rel_drift", e_drift, CLASSICAL_DRIFT_TOL);
    suite.below("max_lz_rel_drift", lz_drift, CLASSICAL_DRIFT_TOL);
    suite
}

/// Run every suite at the given parameters. The trajectory suites integrate
/// `initial` for at most `settings.horizon` seconds with `config`.
pub fn run_checks(
    initial: &VectorState,
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
    config: &IntegratorConfig,
    settings: &CheckSettings,
) -> Result<CheckReport> {
    let run_cfg = IntegratorConfig {
        t_end: config.t_end.min(settings.horizon),
        convergence: None,
        ..*config
    };
    let traj = integrate(initial, params, friction, &run_cfg)?;

    let mut suites = vec![
        cross_chart_suite(params, friction, settings),
        conservation_suite(&traj),
        dissipation_suite(&traj, params, friction, settings),
        lemma1_suite(params, friction, settings),
        lemma2_suite(params, friction, settings),
    ];
    if friction.is_frictionless() {
        suites.push(classical_suite(&traj));
    }
    Ok(CheckReport {
        passed: suites.iter().all(|s| s.passed),
        suites,
    })
}
