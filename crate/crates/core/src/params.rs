//! Physical constants of the top and the friction law acting at the tip.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{EulerState, VectorState};

/// Numerical guards for the two divisions that can blow up.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Guards {
    /// Reaction-force denominators below `eps_den * I1^2` (vector form) or
    /// `eps_den * I1` (Euler form) are rejected.
    pub eps_den: f64,
    /// Euler chart is declared singular when `|sin(theta)| < eps_sing`.
    pub eps_sing: f64,
}

impl Default for Guards {
    fn default() -> Self {
        Self {
            eps_den: 1e-12,
            eps_sing: 1e-8,
        }
    }
}

/// Mass, geometry and inertia of an axisymmetric top.
///
/// `I1*` (transverse inertia about the tip) is derived as `I1 + m l^2` and
/// cannot be set independently, except through
/// [`PhysicalParams::with_pivot_inertia_override`], which exists so that
/// negative controls can check the invariant suites actually detect a
/// wrong value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhysicalParams {
    m: f64,
    g: f64,
    l: f64,
    i1: f64,
    i3: f64,
    i1_star: f64,
    guards: Guards,
}

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParams {
            name,
            reason: format!("must be finite and > 0, got {value}"),
        })
    }
}

impl PhysicalParams {
    pub fn new(m: f64, g: f64, l: f64, i1: f64, i3: f64) -> Result<Self> {
        let m = positive("m", m)?;
        let g = positive("g", g)?;
        let l = positive("l", l)?;
        let i1 = positive("i1", i1)?;
        let i3 = positive("i3", i3)?;
        if i3 > 2.0 * i1 {
            return Err(Error::InvalidParams {
                name: "i3",
                reason: format!("axial inertia {i3} exceeds 2*I1 = {}", 2.0 * i1),
            });
        }
        Ok(Self {
            m,
            g,
            l,
            i1,
            i3,
            i1_star: i1 + m * l * l,
            guards: Guards::default(),
        })
    }

    pub fn with_guards(mut self, guards: Guards) -> Result<Self> {
        positive("eps_den", guards.eps_den)?;
        positive("eps_sing", guards.eps_sing)?;
        self.guards = guards;
        Ok(self)
    }

    /// Replace the derived pivot inertia. Only meaningful as a deliberately
    /// corrupted model for negative-control checks.
    pub fn with_pivot_inertia_override(mut self, i1_star: f64) -> Self {
        self.i1_star = i1_star;
        self
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn i1(&self) -> f64 {
        self.i1
    }

    pub fn i3(&self) -> f64 {
        self.i3
    }

    pub fn i1_star(&self) -> f64 {
        self.i1_star
    }

    pub fn guards(&self) -> Guards {
        self.guards
    }

    /// `m g l`, the potential energy scale.
    pub fn mgl(&self) -> f64 {
        self.m * self.g * self.l
    }

    /// Critical axial momentum `2 sqrt(m g l I1*)` for the upright spin.
    pub fn upright_threshold(&self) -> f64 {
        2.0 * (self.mgl() * self.i1_star).sqrt()
    }
}

/// Friction coefficient law `mu(state) >= 0`.
///
/// The coefficient is evaluated before the reaction force is solved for, so
/// it must not depend on `g_n`.
pub trait FrictionModel: Send + Sync + fmt::Debug {
    fn mu_vector(&self, state: &VectorState) -> f64;
    fn mu_euler(&self, state: &EulerState) -> f64;

    /// True when the law is identically zero (classical top).
    fn is_frictionless(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantFriction {
    mu: f64,
}

impl ConstantFriction {
    pub fn new(mu: f64) -> Result<Self> {
        if mu.is_finite() && mu >= 0.0 {
            Ok(Self { mu })
        } else {
            Err(Error::InvalidFriction(mu))
        }
    }

    pub fn frictionless() -> Self {
        Self { mu: 0.0 }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

impl FrictionModel for ConstantFriction {
    fn mu_vector(&self, _state: &VectorState) -> f64 {
        self.mu
    }

    fn mu_euler(&self, _state: &EulerState) -> f64 {
        self.mu
    }

    fn is_frictionless(&self) -> bool {
        self.mu == 0.0
    }
}

pub(crate) fn checked_mu(mu: f64) -> Result<f64> {
    if mu.is_finite() && mu >= 0.0 {
        Ok(mu)
    } else {
        Err(Error::InvalidFriction(mu))
    }
}
