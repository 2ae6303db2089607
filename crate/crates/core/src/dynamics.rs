//! Equations of motion of the gliding top in both charts, the reaction
//! force at the tip, and the scalar quantities monitored along a run.
//!
//! Conventions: `z` is the inertial vertical, `a = -l 3hat` points from the
//! CM to the tip, the tip force is `F = g_n z - mu g_n v_A` and `v_A` is the
//! (horizontal) gliding velocity of the tip.

use nalgebra::{Vector2, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{checked_mu, FrictionModel, PhysicalParams};
use crate::state::{EulerRate, EulerState, VectorRate, VectorState};

/// Invert `L = I omega` for the axisymmetric inertia tensor.
pub fn angular_velocity(momentum: &Vector3<f64>, axis: &Vector3<f64>, params: &PhysicalParams) -> Vector3<f64> {
    let l3 = momentum.dot(axis);
    (momentum - axis * l3) / params.i1() + axis * (l3 / params.i3())
}

/// `d3hat/dt = omega x 3hat = (L x 3hat) / I1`.
pub fn axis_rate(momentum: &Vector3<f64>, axis: &Vector3<f64>, params: &PhysicalParams) -> Vector3<f64> {
    momentum.cross(axis) / params.i1()
}

/// Vertical CM velocity implied by the contact constraint.
pub fn vertical_cm_velocity(state: &VectorState, params: &PhysicalParams) -> f64 {
    params.l() * axis_rate(&state.momentum, &state.axis, params).z
}

/// Full CM velocity `sdot` (horizontal part stored, vertical part derived).
pub fn cm_velocity(state: &VectorState, params: &PhysicalParams) -> Vector3<f64> {
    Vector3::new(state.rdot.x, state.rdot.y, vertical_cm_velocity(state, params))
}

/// Tip velocity `sdot + omega x a` as a 3-vector.
///
/// Built from the full angular velocity rather than from the axis rate, so
/// its vertical component is an independent check of the constraint.
pub fn tip_velocity(state: &VectorState, params: &PhysicalParams) -> Vector3<f64> {
    let omega = angular_velocity(&state.momentum, &state.axis, params);
    let a = -state.axis * params.l();
    cm_velocity(state, params) + omega.cross(&a)
}

/// Horizontal gliding velocity `v_A` of the tip.
pub fn gliding_velocity(state: &VectorState, params: &PhysicalParams) -> Vector2<f64> {
    let axis_dot = axis_rate(&state.momentum, &state.axis, params);
    state.rdot - params.l() * Vector2::new(axis_dot.x, axis_dot.y)
}

/// Time derivative of the gliding velocity along a state rate.
pub fn gliding_acceleration(state: &VectorState, rate: &VectorRate, params: &PhysicalParams) -> Vector2<f64> {
    let axis_ddot = (rate.momentum_dot.cross(&state.axis) + state.momentum.cross(&rate.axis_dot)) / params.i1();
    rate.rddot - params.l() * Vector2::new(axis_ddot.x, axis_ddot.y)
}

fn horizontal(v: Vector2<f64>) -> Vector3<f64> {
    Vector3::new(v.x, v.y, 0.0)
}

/// Reaction force from the second time derivative of the contact constraint.
///
/// The result may be negative; whether that ends a run is the caller's call.
pub fn normal_force_vector(state: &VectorState, params: &PhysicalParams, mu: f64) -> Result<f64> {
    let (m, g, l, i1) = (params.m(), params.g(), params.l(), params.i1());
    let lvec = &state.momentum;
    let axis = &state.axis;
    let cos = axis.z;
    let va = horizontal(gliding_velocity(state, params));

    let numerator = m * g * i1 * i1 + m * l * (lvec.dot(axis) * lvec.z - cos * lvec.norm_squared());
    let denominator =
        i1 * i1 + m * l * l * i1 * (1.0 - cos * cos) + m * l * l * i1 * mu * cos * va.dot(axis);
    let threshold = params.guards().eps_den * i1 * i1;
    if denominator.abs() < threshold {
        return Err(Error::DegenerateDenominator {
            value: denominator,
            threshold,
        });
    }
    Ok(numerator / denominator)
}

/// The same reaction force written in Euler angles.
pub fn normal_force_euler(state: &EulerState, params: &PhysicalParams, mu: f64) -> Result<f64> {
    let (m, g, l, i1, i3) = (params.m(), params.g(), params.l(), params.i1(), params.i3());
    let (s, c) = state.theta.sin_cos();
    let transverse_sq = state.thetadot.powi(2) + state.phidot.powi(2) * s * s;

    let numerator =
        m * g * i1 - m * l * (i1 * c * transverse_sq - i3 * state.omega3 * state.phidot * s * s);
    let denominator = i1 + m * l * l * s * s + m * l * l * mu * state.nux * s * c;
    let threshold = params.guards().eps_den * i1;
    if denominator.abs() < threshold {
        return Err(Error::DegenerateDenominator {
            value: denominator,
            threshold,
        });
    }
    Ok(numerator / denominator)
}

/// Rate of change of the vector state together with the force data that
/// produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VectorDerivatives {
    pub rate: VectorRate,
    pub gn: f64,
    pub mu: f64,
}

pub fn derivatives_vector(
    state: &VectorState,
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
) -> Result<VectorDerivatives> {
    let mu = checked_mu(friction.mu_vector(state))?;
    let gn = normal_force_vector(state, params, mu)?;
    let va = horizontal(gliding_velocity(state, params));
    let force = Vector3::z() * gn - va * (mu * gn);
    let a = -state.axis * params.l();

    let rate = VectorRate {
        rddot: Vector2::new(force.x, force.y) / params.m(),
        momentum_dot: a.cross(&force),
        axis_dot: axis_rate(&state.momentum, &state.axis, params),
    };
    Ok(VectorDerivatives { rate, gn, mu })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EulerDerivatives {
    pub rate: EulerRate,
    pub gn: f64,
    pub mu: f64,
}

fn require_chart(theta: f64, params: &PhysicalParams) -> Result<(f64, f64)> {
    let (s, c) = theta.sin_cos();
    if s.abs() < params.guards().eps_sing {
        return Err(Error::ChartSingularity { sin_theta: s.abs() });
    }
    Ok((s, c))
}

/// Solved Euler-angle equations of motion.
pub fn derivatives_euler(
    state: &EulerState,
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
) -> Result<EulerDerivatives> {
    let (s, c) = require_chart(state.theta, params)?;
    let mu = checked_mu(friction.mu_euler(state))?;
    let gn = normal_force_euler(state, params, mu)?;
    let (m, l, i1, i3, i1s) = (params.m(), params.l(), params.i1(), params.i3(), params.i1_star());
    let EulerState {
        thetadot: td,
        phidot: pd,
        omega3: w3,
        nux,
        nuy,
        ..
    } = *state;
    let spin = i3 * w3;

    let thetaddot = (i1 * pd * pd * s * c - spin * pd * s + l * mu * gn * nux * c + l * gn * s) / i1;
    let phiddot = (spin * td - 2.0 * i1 * td * pd * c + l * mu * gn * nuy) / (i1 * s);
    let nux_dot = l * s / i1 * (spin * pd * c + i1 * (td * td + pd * pd * s * s) - l * gn * c)
        - mu * gn * nux / (m * i1) * (i1 + m * l * l * c * c)
        + nuy * pd;
    let nuy_dot = -l * spin * td / i1 - i1s / (m * i1) * mu * gn * nuy - nux * pd;

    Ok(EulerDerivatives {
        rate: EulerRate {
            theta: td,
            thetadot: thetaddot,
            phidot: phiddot,
            omega3: 0.0,
            nux: nux_dot,
            nuy: nuy_dot,
        },
        gn,
        mu,
    })
}

/// `E = 1/2 m sdot^2 + 1/2 omega . L + m g s_z` with `s_z = l cos(theta)`.
pub fn total_energy_vector(state: &VectorState, params: &PhysicalParams) -> f64 {
    let sdot = cm_velocity(state, params);
    let omega = angular_velocity(&state.momentum, &state.axis, params);
    0.5 * params.m() * sdot.norm_squared()
        + 0.5 * omega.dot(&state.momentum)
        + params.mgl() * state.axis.z
}

/// Energy in Euler angles; uses `I1*` explicitly.
pub fn total_energy_euler(state: &EulerState, params: &PhysicalParams) -> f64 {
    let (m, l) = (params.m(), params.l());
    let (s, c) = state.theta.sin_cos();
    let EulerState {
        thetadot: td,
        phidot: pd,
        omega3: w3,
        nux,
        nuy,
        ..
    } = *state;
    0.5 * m * (nux * nux + nuy * nuy)
        + m * l * (nux * td * c + nuy * pd * s)
        + 0.5 * (params.i1_star() * (td * td + pd * pd * s * s) + params.i3() * w3 * w3)
        + params.mgl() * c
}

/// `dE/dt = F . v_A = -mu g_n |v_A|^2`.
pub fn energy_dissipation_rate(
    state: &VectorState,
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
) -> Result<f64> {
    let mu = checked_mu(friction.mu_vector(state))?;
    let gn = normal_force_vector(state, params, mu)?;
    Ok(-mu * gn * gliding_velocity(state, params).norm_squared())
}

/// Euler-chart version of [`energy_dissipation_rate`].
pub fn energy_dissipation_rate_euler(
    state: &EulerState,
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
) -> Result<f64> {
    let mu = checked_mu(friction.mu_euler(state))?;
    let gn = normal_force_euler(state, params, mu)?;
    Ok(-mu * gn * (state.nux * state.nux + state.nuy * state.nuy))
}

/// `(L . 3hat, L . z, L_A . z)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentumScalars {
    pub l3: f64,
    pub lz: f64,
    pub laz: f64,
}

/// Momentum projections in the vector chart; `L_A = L + m a x (omega x a)`.
pub fn angular_momentum_scalars(state: &VectorState, params: &PhysicalParams) -> MomentumScalars {
    let omega = angular_velocity(&state.momentum, &state.axis, params);
    let a = -state.axis * params.l();
    let la = state.momentum + a.cross(&omega.cross(&a)) * params.m();
    MomentumScalars {
        l3: state.momentum.dot(&state.axis),
        lz: state.momentum.z,
        laz: la.z,
    }
}

pub fn angular_momentum_scalars_euler(state: &EulerState, params: &PhysicalParams) -> MomentumScalars {
    let (s, c) = state.theta.sin_cos();
    let spin = params.i3() * state.omega3;
    MomentumScalars {
        l3: spin,
        lz: params.i1() * state.phidot * s * s + spin * c,
        laz: params.i1_star() * state.phidot * s * s + spin * c,
    }
}

/// `d(L . z)/dt = l mu g_n nu_y sin(theta)`.
pub fn vertical_momentum_rate(
    state: &EulerState,
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
) -> Result<f64> {
    let mu = checked_mu(friction.mu_euler(state))?;
    let gn = normal_force_euler(state, params, mu)?;
    Ok(params.l() * mu * gn * state.nuy * state.theta.sin())
}

/// Scalars recorded with every trajectory sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonitoredScalars {
    pub energy: f64,
    pub gn: f64,
    pub l3: f64,
    pub lz: f64,
    pub laz: f64,
    pub va_norm: f64,
    /// `-mu g_n |v_A|^2`, from the identity rather than differentiation.
    pub edot: f64,
    /// Vertical tip velocity reconstructed from the full angular velocity.
    pub va_vertical: f64,
}

pub fn monitored_scalars(
    state: &VectorState,
    params: &PhysicalParams,
    friction: &dyn FrictionModel,
) -> Result<MonitoredScalars> {
    let mu = checked_mu(friction.mu_vector(state))?;
    let gn = normal_force_vector(state, params, mu)?;
    let va_norm = gliding_velocity(state, params).norm();
    let mom = angular_momentum_scalars(state, params);
    Ok(MonitoredScalars {
        energy: total_energy_vector(state, params),
        gn,
        l3: mom.l3,
        lz: mom.lz,
        laz: mom.laz,
        va_norm,
        edot: -mu * gn * va_norm * va_norm,
        va_vertical: tip_velocity(state, params).z,
    })
}
