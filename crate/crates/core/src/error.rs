use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The linear equation for the reaction force has a (near) zero
    /// coefficient, so the contact constraint cannot be solved.
    #[error("degenerate reaction-force denominator {value:e} (threshold {threshold:e})")]
    DegenerateDenominator { value: f64, threshold: f64 },

    /// Euler-angle chart evaluated at (or too close to) a vertical axis.
    #[error("Euler chart singular: |sin(theta)| = {sin_theta:e}")]
    ChartSingularity { sin_theta: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParams { name: &'static str, reason: String },

    #[error("invalid friction coefficient {0} (must be finite and >= 0)")]
    InvalidFriction(f64),

    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),

    /// The integrator precondition g_n >= 0 is violated by the initial state.
    #[error("initial reaction force is negative ({gn:e} N)")]
    NegativeInitialContact { gn: f64 },

    #[error("effective energy undefined at |cos(theta)| = {cos_theta}")]
    EffectiveEnergyPole { cos_theta: f64 },

    #[error("root finding failed: {0}")]
    RootFindFailure(String),
}
