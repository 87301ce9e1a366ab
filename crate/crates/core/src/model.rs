//! Parameters, phase points, the vector field and its Jacobian.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix2;

/// The six positive rates of the model, all per day (competition rates per
/// individual per day).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ModelParameters {
    /// Fecundity of uninfected insects.
    pub rho_n: f64,
    /// Fecundity of infected insects.
    pub rho_w: f64,
    /// Natural mortality of uninfected insects.
    pub alpha_n: f64,
    /// Natural mortality of infected insects.
    pub alpha_w: f64,
    /// Competition coefficient of uninfected insects.
    pub beta_n: f64,
    /// Competition coefficient of infected insects.
    pub beta_w: f64,
}

impl ModelParameters {
    /// Aedes aegypti with the wMelPop strain.
    pub const WMELPOP: ModelParameters = ModelParameters {
        rho_n: 4.55,
        rho_w: 2.27,
        alpha_n: 0.03333,
        alpha_w: 0.06666,
        beta_n: 2.61258e-3,
        beta_w: 3.12792e-3,
    };

    /// Carrying capacity of the wild population alone, `(rho_n - alpha_n) / beta_n`.
    #[inline]
    pub fn n_sharp(&self) -> f64 {
        (self.rho_n - self.alpha_n) / self.beta_n
    }

    /// Carrying capacity of the infected population alone, `(rho_w - alpha_w) / beta_w`.
    #[inline]
    pub fn w_sharp(&self) -> f64 {
        (self.rho_w - self.alpha_w) / self.beta_w
    }

    /// `max(n_sharp, w_sharp)`, the natural population scale.
    #[inline]
    pub fn scale(&self) -> f64 {
        libm::fmax(self.n_sharp(), self.w_sharp())
    }

    /// Coexistence condition `n_sharp > w_sharp`.
    pub fn is_feasible(&self) -> bool {
        self.n_sharp() > self.w_sharp()
    }

    pub(crate) fn fields(&self) -> [(&'static str, f64); 6] {
        [
            ("rho_n", self.rho_n),
            ("rho_w", self.rho_w),
            ("alpha_n", self.alpha_n),
            ("alpha_w", self.alpha_w),
            ("beta_n", self.beta_n),
            ("beta_w", self.beta_w),
        ]
    }

    /// Errors unless every rate is finite and positive and both populations
    /// survive on their own.
    pub fn check_survivable(&self) -> Result<()> {
        for (name, v) in self.fields() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NonPositiveParameter(name));
            }
        }
        if self.rho_n > self.alpha_n && self.rho_w > self.alpha_w {
            Ok(())
        } else {
            Err(Error::NotSurvivable)
        }
    }
}

impl Default for ModelParameters {
    fn default() -> Self {
        Self::WMELPOP
    }
}

/// A point of the phase plane: wild and infected adult counts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PopulationState {
    pub n: f64,
    pub w: f64,
}

impl PopulationState {
    pub const ORIGIN: PopulationState = PopulationState { n: 0.0, w: 0.0 };

    pub const fn new(n: f64, w: f64) -> Self {
        PopulationState { n, w }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.n >= 0.0 && self.w >= 0.0
    }

    pub fn check_nonnegative(&self) -> Result<()> {
        if self.is_nonnegative() {
            Ok(())
        } else {
            Err(Error::NegativeState { n: self.n, w: self.w })
        }
    }

    pub fn distance(&self, other: &PopulationState) -> f64 {
        libm::hypot(self.n - other.n, self.w - other.w)
    }

    #[inline]
    pub(crate) fn to_array(self) -> [f64; 2] {
        [self.n, self.w]
    }

    #[inline]
    pub(crate) fn from_array(y: [f64; 2]) -> Self {
        PopulationState { n: y[0], w: y[1] }
    }
}

/// One of the conditions checked by [`validate_params`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Condition {
    /// Every rate strictly positive and finite.
    Positivity,
    /// `rho_n > alpha_n`.
    SurvivalWild,
    /// `rho_w > alpha_w`.
    SurvivalInfected,
    /// `n_sharp > w_sharp`; the coexistence saddle exists.
    Coexistence,
}

/// Outcome of [`validate_params`]: which conditions hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValidationReport {
    pub positivity: bool,
    pub survival_wild: bool,
    pub survival_infected: bool,
    pub coexistence: bool,
}

impl ValidationReport {
    pub fn violated(&self) -> Vec<Condition> {
        let mut out = Vec::new();
        if !self.positivity {
            out.push(Condition::Positivity);
        }
        if !self.survival_wild {
            out.push(Condition::SurvivalWild);
        }
        if !self.survival_infected {
            out.push(Condition::SurvivalInfected);
        }
        if !self.coexistence {
            out.push(Condition::Coexistence);
        }
        out
    }

    pub fn all_hold(&self) -> bool {
        self.positivity && self.survival_wild && self.survival_infected && self.coexistence
    }

    /// Survival holds, so equilibria can be computed (coexistence may fail).
    pub fn in_scope(&self) -> bool {
        self.positivity && self.survival_wild && self.survival_infected
    }
}

/// Reports which model conditions the parameters satisfy. Never fails.
pub fn validate_params(p: &ModelParameters) -> ValidationReport {
    let positivity = p.fields().iter().all(|(_, v)| v.is_finite() && *v > 0.0);
    let survival_wild = p.rho_n > p.alpha_n;
    let survival_infected = p.rho_w > p.alpha_w;
    // Capacities only mean something with positive rates.
    let coexistence = positivity && p.is_feasible();
    ValidationReport { positivity, survival_wild, survival_infected, coexistence }
}

/// Right-hand side without domain checks. The frequency term is zero at
/// the origin so `(0, 0)` is an exact fixed point.
#[inline]
pub(crate) fn field_unchecked(p: &ModelParameters, n: f64, w: f64) -> [f64; 2] {
    let total = n + w;
    let freq = if total > 0.0 { n / total } else { 0.0 };
    [
        p.rho_n * n * freq - p.alpha_n * n - p.beta_n * n * total,
        p.rho_w * w - p.alpha_w * w - p.beta_w * w * total,
    ]
}

/// `(dN/dt, dW/dt)` in individuals per day.
pub fn vector_field(p: &ModelParameters, s: PopulationState) -> Result<(f64, f64)> {
    s.check_nonnegative()?;
    let [dn, dw] = field_unchecked(p, s.n, s.w);
    Ok((dn, dw))
}

#[inline]
pub(crate) fn jacobian_unchecked(p: &ModelParameters, n: f64, w: f64) -> Matrix2 {
    let total = n + w;
    let total_sq = total * total;
    Matrix2::new(
        p.rho_n * (1.0 - w * w / total_sq) - p.alpha_n - p.beta_n * (w + 2.0 * n),
        -n * (p.beta_n + p.rho_n * n / total_sq),
        -p.beta_w * w,
        p.rho_w - p.alpha_w - p.beta_w * (n + 2.0 * w),
    )
}

/// Jacobian of the vector field. Undefined at the origin.
pub fn jacobian(p: &ModelParameters, s: PopulationState) -> Result<Matrix2> {
    s.check_nonnegative()?;
    if s.n + s.w <= 0.0 {
        return Err(Error::SingularAtOrigin);
    }
    Ok(jacobian_unchecked(p, s.n, s.w))
}

/// Cone order with cone `R+ × R-`: `a <= b` iff `a.n <= b.n` and `a.w >= b.w`.
///
/// Under this componentwise rule the infected-only equilibrium `(0, w_sharp)`
/// is the smallest of the steady states and `(n_sharp, 0)` the largest.
pub fn order_leq_cone(a: PopulationState, b: PopulationState) -> bool {
    a.n <= b.n && a.w >= b.w
}

/// `a <= b` and `a != b`.
pub fn order_lt_cone(a: PopulationState, b: PopulationState) -> bool {
    order_leq_cone(a, b) && a != b
}

/// Strong order: `b - a` lies in the interior of the cone.
pub fn order_strong_cone(a: PopulationState, b: PopulationState) -> bool {
    a.n < b.n && a.w > b.w
}
