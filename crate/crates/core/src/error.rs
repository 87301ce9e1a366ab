use core::fmt;

use crate::model::PopulationState;

pub type Result<T> = core::result::Result<T, Error>;

/// Failures raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A state with a negative component was passed where the nonnegative
    /// quadrant is required.
    NegativeState { n: f64, w: f64 },
    /// The Jacobian has no limit at the origin, the frequency term `N/(N+W)`
    /// is discontinuous there.
    SingularAtOrigin,
    /// A rate parameter is zero, negative or not finite.
    NonPositiveParameter(&'static str),
    /// `rho <= alpha` for at least one population; carrying capacities are
    /// nonpositive and the model is outside its domain.
    NotSurvivable,
    /// The coexistence equilibrium does not exist (`n_sharp <= w_sharp`).
    NoCoexistence,
    /// The coexistence equilibrium exists but is not a saddle.
    NotSaddle,
    /// Integration options are inconsistent.
    InvalidOptions(&'static str),
    /// The adaptive step shrank below the representable resolution.
    StepSizeUnderflow { t: f64, last: PopulationState },
    /// The basin oracle could not decide on either end of a bracket.
    Ambiguous { lo: f64, hi: f64 },
    /// No upper bracket with a successful outcome could be found.
    NoSuccess { upper: f64 },
    /// A release schedule is malformed or lacks what its stop rule needs.
    InvalidSchedule(&'static str),
    /// A state was queried outside the range covered by a separatrix curve.
    OutsideCurve { n: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NegativeState { n, w } => {
                write!(f, "state ({n}, {w}) is outside the nonnegative quadrant")
            }
            Error::SingularAtOrigin => f.write_str(
                "Jacobian cannot be evaluated at the origin; the trivial equilibrium is \
                 classified as a source from its invariant axes instead",
            ),
            Error::NonPositiveParameter(name) => {
                write!(f, "parameter `{name}` must be finite and strictly positive")
            }
            Error::NotSurvivable => f.write_str(
                "survival conditions rho_n > alpha_n and rho_w > alpha_w do not hold",
            ),
            Error::NoCoexistence => {
                f.write_str("no coexistence equilibrium: n_sharp must exceed w_sharp")
            }
            Error::NotSaddle => f.write_str("coexistence equilibrium is not a saddle"),
            Error::InvalidOptions(why) => write!(f, "invalid integration options: {why}"),
            Error::StepSizeUnderflow { t, last } => write!(
                f,
                "step size underflow at t = {t}, last state ({}, {})",
                last.n, last.w
            ),
            Error::Ambiguous { lo, hi } => {
                write!(f, "basin oracle undecided on interval [{lo}, {hi}]")
            }
            Error::NoSuccess { upper } => {
                write!(f, "no successful outcome at upper bracket {upper}")
            }
            Error::InvalidSchedule(why) => write!(f, "invalid release schedule: {why}"),
            Error::OutsideCurve { n } => {
                write!(f, "n = {n} lies outside the separatrix curve range")
            }
        }
    }
}

impl core::error::Error for Error {}
