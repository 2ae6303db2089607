//! Conversions between the vector chart and the Euler-angle chart.
//!
//! Frames: the rotating horizontal pair `xhat = (cos phi, sin phi, 0)`,
//! `yhat = 2hat = z x xhat`; the body-adapted triad
//! `1hat = cos(theta) xhat - sin(theta) z`, `2hat`, and
//! `3hat = sin(theta) xhat + cos(theta) z`.

use nalgebra::{Vector2, Vector3};

use crate::dynamics::{gliding_acceleration, gliding_velocity};
use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::state::{EulerRate, EulerState, VectorRate, VectorState};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub theta: f64,
    pub phi: f64,
    pub sin_theta: f64,
    pub cos_theta: f64,
    pub xhat: Vector3<f64>,
    pub yhat: Vector3<f64>,
    pub e1: Vector3<f64>,
    pub e3: Vector3<f64>,
}

impl Frame {
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let xhat = Vector3::new(cp, sp, 0.0);
        let yhat = Vector3::new(-sp, cp, 0.0);
        Self {
            theta,
            phi,
            sin_theta: s,
            cos_theta: c,
            xhat,
            yhat,
            e1: xhat * c - Vector3::z() * s,
            e3: xhat * s + Vector3::z() * c,
        }
    }

    /// Frame attached to a unit axis; fails when the axis is (nearly)
    /// vertical and the azimuth is undefined.
    pub fn from_axis(axis: &Vector3<f64>, params: &PhysicalParams) -> Result<Self> {
        let horiz = Vector2::new(axis.x, axis.y);
        let s = horiz.norm();
        if s < params.guards().eps_sing {
            return Err(Error::ChartSingularity { sin_theta: s });
        }
        let c = axis.z;
        let xhat = Vector3::new(horiz.x / s, horiz.y / s, 0.0);
        let yhat = Vector3::new(-xhat.y, xhat.x, 0.0);
        Ok(Self {
            theta: s.atan2(c),
            phi: xhat.y.atan2(xhat.x),
            sin_theta: s,
            cos_theta: c,
            xhat,
            yhat,
            e1: xhat * c - Vector3::z() * s,
            e3: *axis,
        })
    }
}

pub fn euler_to_vector(state: &EulerState, phi: f64, params: &PhysicalParams) -> VectorState {
    let f = Frame::from_angles(state.theta, phi);
    let momentum = (f.e1 * (-state.phidot * f.sin_theta) + f.yhat * state.thetadot) * params.i1()
        + f.e3 * (params.i3() * state.omega3);
    let axis_dot = f.e1 * state.thetadot + f.yhat * (state.phidot * f.sin_theta);
    let rdot3 = f.xhat * state.nux + f.yhat * state.nuy + axis_dot * params.l();
    VectorState {
        rdot: Vector2::new(rdot3.x, rdot3.y),
        momentum,
        axis: f.e3,
    }
}

/// Returns the Euler state and the azimuth `phi`.
pub fn vector_to_euler(state: &VectorState, params: &PhysicalParams) -> Result<(EulerState, f64)> {
    let f = Frame::from_axis(&state.axis, params)?;
    let lvec = &state.momentum;
    let va = gliding_velocity(state, params);
    let va3 = Vector3::new(va.x, va.y, 0.0);
    let euler = EulerState {
        theta: f.theta,
        thetadot: lvec.dot(&f.yhat) / params.i1(),
        phidot: -lvec.dot(&f.e1) / (params.i1() * f.sin_theta),
        omega3: lvec.dot(&state.axis) / params.i3(),
        nux: va3.dot(&f.xhat),
        nuy: va3.dot(&f.yhat),
    };
    Ok((euler, f.phi))
}

/// Push a vector-chart rate through the chart map, i.e. the time derivative
/// of `vector_to_euler(state(t))` given `d state/dt = rate`.
pub fn pushforward_rate(state: &VectorState, rate: &VectorRate, params: &PhysicalParams) -> Result<EulerRate> {
    let f = Frame::from_axis(&state.axis, params)?;
    let (s, c) = (f.sin_theta, f.cos_theta);
    let (i1, i3) = (params.i1(), params.i3());
    let lvec = &state.momentum;
    let ldot = &rate.momentum_dot;
    let axis_dot = &rate.axis_dot;

    // Kinematic angle rates read off the axis motion.
    let theta_rate = axis_dot.dot(&f.e1);
    let phi_rate = axis_dot.dot(&f.yhat) / s;

    // Frame derivatives: xhat' = phi' yhat, yhat' = -phi' xhat,
    // 1hat' = phi' cos(theta) 2hat - theta' 3hat.
    let yhat_dot = -f.xhat * phi_rate;
    let e1_dot = f.yhat * (phi_rate * c) - f.e3 * theta_rate;

    let l_e1 = lvec.dot(&f.e1);
    let thetadot_rate = (ldot.dot(&f.yhat) + lvec.dot(&yhat_dot)) / i1;
    let phidot_rate = -(ldot.dot(&f.e1) + lvec.dot(&e1_dot)) / (i1 * s) + l_e1 * c * theta_rate / (i1 * s * s);
    let omega3_rate = (ldot.dot(&f.e3) + lvec.dot(axis_dot)) / i3;

    let va = gliding_velocity(state, params);
    let va3 = Vector3::new(va.x, va.y, 0.0);
    let va_dot = gliding_acceleration(state, rate, params);
    let va_dot = Vector3::new(va_dot.x, va_dot.y, 0.0);
    let nux_rate = va_dot.dot(&f.xhat) + phi_rate * va3.dot(&f.yhat);
    let nuy_rate = va_dot.dot(&f.yhat) - phi_rate * va3.dot(&f.xhat);

    Ok(EulerRate {
        theta: theta_rate,
        thetadot: thetadot_rate,
        phidot: phidot_rate,
        omega3: omega3_rate,
        nux: nux_rate,
        nuy: nuy_rate,
    })
}

/// `d3hat/dt` written in the body-adapted triad, `thetadot 1hat + phidot sin(theta) 2hat`.
pub fn axis_rate_in_frame(state: &EulerState, phi: f64) -> Vector3<f64> {
    let f = Frame::from_angles(state.theta, phi);
    f.e1 * state.thetadot + f.yhat * (state.phidot * f.sin_theta)
}
