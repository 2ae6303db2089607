//! Test-side oracles, written without the library's force and chart code.
#![allow(dead_code)]

use gltop::state::Flat;
use gltop::{ConstantFriction, EulerState, PhysicalParams, VectorState};
use nalgebra::{Vector2, Vector3};

pub fn params() -> PhysicalParams {
    PhysicalParams::new(1.0, 9.81, 0.1, 0.002, 0.001).unwrap()
}

pub fn friction(mu: f64) -> ConstantFriction {
    ConstantFriction::new(mu).unwrap()
}

pub fn tilted() -> EulerState {
    EulerState {
        theta: 0.5,
        thetadot: 0.5,
        phidot: 1.0,
        omega3: 150.0,
        nux: 0.05,
        nuy: 0.02,
    }
}

fn omega_of(l: &Vector3<f64>, axis: &Vector3<f64>, p: &PhysicalParams) -> Vector3<f64> {
    let l3 = l.dot(axis);
    (l - axis * l3) / p.i1() + axis * (l3 / p.i3())
}

/// `g_n` from the unreduced equations: `m s'' = F - m g z`,
/// `L' = a x F`, `3hat' = omega x 3hat`, with the contact constraint
/// `z . (s + a) = 0` differentiated twice. The constraint is affine in
/// `g_n`, so two evaluations fix it.
pub fn constraint_gn(state: &VectorState, p: &PhysicalParams, mu: f64) -> f64 {
    let (m, g, l) = (p.m(), p.g(), p.l());
    let axis = state.axis;
    let a = -axis * l;
    let omega = omega_of(&state.momentum, &axis, p);
    let axis_dot = omega.cross(&axis);
    let sdot = Vector3::new(state.rdot.x, state.rdot.y, l * axis_dot.z);
    let va = sdot + omega.cross(&a);
    let va_h = Vector3::new(va.x, va.y, 0.0);

    let residual = |gn: f64| {
        let force = Vector3::z() * gn - va_h * (mu * gn);
        let sddot_z = force.z / m - g;
        let ldot = a.cross(&force);
        let l3 = state.momentum.dot(&axis);
        // d/dt of omega with L3 constant.
        let omega_dot = (ldot - axis_dot * l3) / p.i1() + axis_dot * (l3 / p.i3());
        let axis_ddot = omega_dot.cross(&axis) + omega.cross(&axis_dot);
        sddot_z - l * axis_ddot.z
    };
    let r0 = residual(0.0);
    let r1 = residual(1.0);
    -r0 / (r1 - r0)
}

/// Random vector-chart state with a unit axis anywhere on the sphere.
pub fn vector_state_from(raw: [f64; 8]) -> VectorState {
    let axis = Vector3::new(raw[5], raw[6], raw[7]);
    let axis = if axis.norm() < 1e-3 { Vector3::z() } else { axis.normalize() };
    VectorState {
        rdot: Vector2::new(raw[0], raw[1]),
        momentum: Vector3::new(raw[2], raw[3], raw[4]),
        axis,
    }
}

const D1_WEIGHTS: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];

/// `d/dt observable` along the flow, from a compensated RK4 integration of
/// `+-4h` around the state and an eighth-order central difference.
pub fn flow_rate(
    start: &VectorState,
    p: &PhysicalParams,
    f: &ConstantFriction,
    h: f64,
    observable: &dyn Fn(&VectorState) -> f64,
) -> f64 {
    let sub = 10;
    let rhs = |y: &Flat| {
        gltop::dynamics::derivatives_vector(&VectorState::from_flat(y), p, f)
            .unwrap()
            .rate
            .to_flat()
    };
    let mut sides = [[0.0; 4]; 2];
    for (side, sign) in [1.0, -1.0].into_iter().enumerate() {
        let dt = sign * h / sub as f64;
        let mut y = start.to_flat();
        let mut carry = Flat::zeros();
        for slot in sides[side].iter_mut() {
            for _ in 0..sub {
                let k1 = rhs(&y);
                let k2 = rhs(&(y + k1 * (dt / 2.0)));
                let k3 = rhs(&(y + k2 * (dt / 2.0)));
                let k4 = rhs(&(y + k3 * dt));
                let inc = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0) - carry;
                let next = y + inc;
                carry = (next - y) - inc;
                y = next;
            }
            *slot = observable(&VectorState::from_flat(&y));
        }
    }
    (0..4).map(|k| D1_WEIGHTS[k] * (sides[0][k] - sides[1][k])).sum::<f64>() / h
}

/// Directional derivative of a state function along `direction` (central
/// difference in state space, eighth order).
pub fn directional(state: &VectorState, direction: &Flat, h: f64, fun: &dyn Fn(&VectorState) -> f64) -> f64 {
    let speed = direction.norm();
    if speed == 0.0 {
        return 0.0;
    }
    let u = direction / speed;
    let at = |s: f64| fun(&VectorState::from_flat(&(state.to_flat() + u * s)));
    let d: f64 = (0..4)
        .map(|k| {
            let s = (k + 1) as f64 * h;
            D1_WEIGHTS[k] * (at(s) - at(-s))
        })
        .sum();
    d * speed / h
}
