//! Reference oracles and pinned tolerances for the acceptance suite.
//!
//! The oracles here deliberately avoid the library's own helpers for the
//! quantity being checked: rates come from finite differences along a
//! separately integrated flow, and chart pushforwards from differentiating
//! the chart map numerically.

use gltop::chart::{euler_to_vector, vector_to_euler};
use gltop::dynamics::derivatives_vector;
use gltop::state::Flat;
use gltop::{EulerState, FrictionModel, PhysicalParams, Result, VectorState};

/// `2 sqrt(m g l (I1 + m l^2))` for the reference body, evaluated by hand:
/// `m g l = 0.981`, `I1* = 0.012`, `4 * 0.981 * 0.012 = 0.047088`.
pub const REFERENCE_THRESHOLD: f64 = 0.216_997_695_840_301_5;

pub const L3_REL_DRIFT: f64 = 1e-8;
pub const ENERGY_STEP_SLACK: f64 = 1e-8;
pub const RATE_LAW_REL: f64 = 1e-5;
pub const MIN_GLIDE: f64 = 1e-3;
pub const CLASSICAL_REL_DRIFT: f64 = 1e-8;
pub const FIXED_POINT_RATE: f64 = 1e-14;
pub const CROSS_CHART_REL: f64 = 1e-9;
pub const ROUND_TRIP: f64 = 1e-10;
pub const RK4_RATIO: (f64, f64) = (14.0, 18.0);
pub const TILT_CAP: f64 = 0.5;

pub fn reference_params() -> PhysicalParams {
    PhysicalParams::new(1.0, 9.81, 0.1, 0.002, 0.001).expect("reference parameters are valid")
}

/// Generic tilted spinning start used by the trajectory criteria.
pub fn tilted_start(params: &PhysicalParams) -> VectorState {
    let e = EulerState {
        theta: 0.5,
        thetadot: 0.5,
        phidot: 1.0,
        omega3: 150.0,
        nux: 0.05,
        nuy: 0.02,
    };
    euler_to_vector(&e, 0.3, params)
}

/// Start with the axis at `theta`, no tilt rates, slip `(0.05, 0)`, and
/// `L_A . 3hat = la3` (all momentum is axial, so `L_A . 3hat = I3 omega3`).
pub fn launch(theta: f64, la3: f64, params: &PhysicalParams) -> VectorState {
    let e = EulerState {
        theta,
        thetadot: 0.0,
        phidot: 0.0,
        omega3: la3 / params.i3(),
        nux: 0.05,
        nuy: 0.0,
    };
    euler_to_vector(&e, 0.0, params)
}

fn rhs(y: &Flat, params: &PhysicalParams, friction: &dyn FrictionModel) -> Result<Flat> {
    Ok(derivatives_vector(&VectorState::from_flat(y), params, friction)?
        .rate
        .to_flat())
}

/// One RK4 step on the flat state with compensated accumulation.
fn rk4_compensated(
    y: &mut Flat,
    carry: &mut Flat,
    dt: f64,
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
) -> Result<()> {
    let k1 = rhs(y, params, friction)?;
    let k2 = rhs(&(*y + k1 * (dt / 2.0)), params, friction)?;
    let k3 = rhs(&(*y + k2 * (dt / 2.0)), params, friction)?;
    let k4 = rhs(&(*y + k3 * dt), params, friction)?;
    let inc = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0) - *carry;
    let next = *y + inc;
    *carry = (next - *y) - inc;
    *y = next;
    Ok(())
}

/// Eighth-order central-difference weights for offsets 1..=4.
const D1_WEIGHTS: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];

/// `d/dt observable(y(t))` at `t = 0` along the flow through `start`.
pub fn flow_rate(
    start: &VectorState,
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
    observable: &dyn Fn(&VectorState) -> f64,
) -> Result<f64> {
    const H: f64 = 5e-4;
    const SUB: usize = 10;
    let mut plus = [0.0; 4];
    let mut minus = [0.0; 4];
    for (sign, out) in [(1.0, &mut plus), (-1.0, &mut minus)] {
        let mut y = start.to_flat();
        let mut carry = Flat::zeros();
        for slot in out.iter_mut() {
            for _ in 0..SUB {
                rk4_compensated(&mut y, &mut carry, sign * H / SUB as f64, params, friction)?;
            }
            *slot = observable(&VectorState::from_flat(&y));
        }
    }
    Ok((0..4).map(|k| D1_WEIGHTS[k] * (plus[k] - minus[k])).sum::<f64>() / H)
}

/// Euler-chart rate obtained by differentiating `vector_to_euler` along
/// `direction` at `state`.
pub fn pushforward_fd(state: &VectorState, direction: &Flat, params: &PhysicalParams) -> Result<[f64; 6]> {
    let speed = direction.norm();
    if speed == 0.0 {
        return Ok([0.0; 6]);
    }
    let unit = direction / speed;
    let h = 1e-3;
    let at = |s: f64| -> Result<[f64; 6]> {
        let y = state.to_flat() + unit * s;
        Ok(vector_to_euler(&VectorState::from_flat(&y), params)?.0.to_array())
    };
    let mut d = [0.0; 6];
    for (k, w) in D1_WEIGHTS.iter().enumerate() {
        let s = (k + 1) as f64 * h;
        let (p, m) = (at(s)?, at(-s)?);
        for i in 0..6 {
            d[i] += w * (p[i] - m[i]);
        }
    }
    Ok(d.map(|x| x * speed / h))
}

/// Endpoint of `n` fixed RK4 steps of size `h` (plain library stepper).
pub fn rk4_endpoint(
    start: &VectorState,
    h: f64,
    n: usize,
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
) -> Result<Flat> {
    let mut s = *start;
    for _ in 0..n {
        s = gltop::integrator::step_fixed_rk4(&s, h, params, friction)?;
    }
    Ok(s.to_flat())
}

/// One line of the acceptance report.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{mark}] {:>2}. {}: {}", self.id, self.title, self.detail)
    }
}
