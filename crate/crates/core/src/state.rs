//! State representations: the singularity-free vector chart used for
//! integration and the Euler-angle chart used for analysis.

use nalgebra::{SVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::params::PhysicalParams;

/// Flat storage for the integrator: `[rdot(2), L(3), axis(3)]`.
pub type Flat = SVector<f64, 8>;

/// `(rdot, L, 3hat)` with all components in the inertial frame.
///
/// The vertical CM velocity is not stored; it follows from the contact
/// constraint as `l * (d3hat/dt) . z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorState {
    /// Horizontal CM velocity (m/s).
    pub rdot: Vector2<f64>,
    /// Angular momentum about the CM (kg m^2/s).
    pub momentum: Vector3<f64>,
    /// Unit symmetry axis.
    pub axis: Vector3<f64>,
}

impl VectorState {
    /// Vertical spin `3hat = +z` (`y_0`).
    pub fn upright_spin(params: &PhysicalParams, omega3: f64) -> Self {
        let axis = Vector3::z();
        Self {
            rdot: Vector2::zeros(),
            momentum: axis * (params.i3() * omega3),
            axis,
        }
    }

    /// Vertical spin `3hat = -z` (`y_pi`).
    pub fn inverted_spin(params: &PhysicalParams, omega3: f64) -> Self {
        let axis = -Vector3::z();
        Self {
            rdot: Vector2::zeros(),
            momentum: axis * (params.i3() * omega3),
            axis,
        }
    }

    pub fn to_flat(&self) -> Flat {
        Flat::from_column_slice(&[
            self.rdot.x,
            self.rdot.y,
            self.momentum.x,
            self.momentum.y,
            self.momentum.z,
            self.axis.x,
            self.axis.y,
            self.axis.z,
        ])
    }

    pub fn from_flat(y: &Flat) -> Self {
        Self {
            rdot: Vector2::new(y[0], y[1]),
            momentum: Vector3::new(y[2], y[3], y[4]),
            axis: Vector3::new(y[5], y[6], y[7]),
        }
    }

    /// Rescale the axis to unit length.
    pub fn renormalize(&mut self) {
        let n = self.axis.norm();
        if n > 0.0 {
            self.axis /= n;
        }
    }

    pub fn axis_norm_error(&self) -> f64 {
        (self.axis.norm() - 1.0).abs()
    }

    /// `3hat . z = cos(theta)`.
    pub fn cos_theta(&self) -> f64 {
        self.axis.z
    }
}

/// Time derivative of a [`VectorState`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VectorRate {
    pub rddot: Vector2<f64>,
    pub momentum_dot: Vector3<f64>,
    pub axis_dot: Vector3<f64>,
}

impl VectorRate {
    pub fn to_flat(&self) -> Flat {
        Flat::from_column_slice(&[
            self.rddot.x,
            self.rddot.y,
            self.momentum_dot.x,
            self.momentum_dot.y,
            self.momentum_dot.z,
            self.axis_dot.x,
            self.axis_dot.y,
            self.axis_dot.z,
        ])
    }

    pub fn norm(&self) -> f64 {
        self.to_flat().norm()
    }
}

/// Euler-angle chart `(theta, thetadot, phidot, omega3, nu_x, nu_y)`.
///
/// `nu_x`, `nu_y` are the gliding-velocity components along the rotating
/// horizontal axes `xhat = 2hat x z` and `yhat = 2hat`. The chart is only
/// valid for `theta` strictly inside `(0, pi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerState {
    pub theta: f64,
    pub thetadot: f64,
    pub phidot: f64,
    /// `psidot + phidot cos(theta)`.
    pub omega3: f64,
    pub nux: f64,
    pub nuy: f64,
}

impl EulerState {
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.theta,
            self.thetadot,
            self.phidot,
            self.omega3,
            self.nux,
            self.nuy,
        ]
    }
}

/// Time derivative of each [`EulerState`] field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EulerRate {
    pub theta: f64,
    pub thetadot: f64,
    pub phidot: f64,
    pub omega3: f64,
    pub nux: f64,
    pub nuy: f64,
}

impl EulerRate {
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.theta,
            self.thetadot,
            self.phidot,
            self.omega3,
            self.nux,
            self.nuy,
        ]
    }
}
