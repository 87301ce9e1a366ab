//! Closed-form steady states and their local stability.
//!
//! The four equilibria are `E0 = (0, 0)`, `E_N = (n_sharp, 0)`,
//! `E_W = (0, w_sharp)` and, when `n_sharp > w_sharp`, the coexistence point
//!
//! ```text
//! w_c = w_sharp (beta_n / rho_n) (n_sharp - w_sharp),   n_c = w_sharp - w_c
//! ```
//!
//! No root-finding is involved.

use crate::error::{Error, Result};
use crate::linalg::{Matrix2, Spectrum};
use crate::model::{jacobian_unchecked, ModelParameters, PopulationState};

/// The steady states of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EquilibriumSet {
    pub e0: PopulationState,
    pub e_n: PopulationState,
    pub e_w: PopulationState,
    /// Present only when `n_sharp > w_sharp`.
    pub e_c: Option<PopulationState>,
    pub n_sharp: f64,
    pub w_sharp: f64,
}

impl EquilibriumSet {
    /// Coexistence saddle, or [`Error::NoCoexistence`].
    pub fn saddle(&self) -> Result<PopulationState> {
        self.e_c.ok_or(Error::NoCoexistence)
    }

    pub fn scale(&self) -> f64 {
        libm::fmax(self.n_sharp, self.w_sharp)
    }
}

/// Computes all steady states from their closed forms.
pub fn equilibria(p: &ModelParameters) -> Result<EquilibriumSet> {
    p.check_survivable()?;
    let n_sharp = p.n_sharp();
    let w_sharp = p.w_sharp();
    let e_c = if n_sharp > w_sharp {
        let w_c = w_sharp * (p.beta_n / p.rho_n) * (n_sharp - w_sharp);
        let n_c = w_sharp - w_c;
        Some(PopulationState::new(n_c, w_c))
    } else {
        None
    };
    Ok(EquilibriumSet {
        e0: PopulationState::ORIGIN,
        e_n: PopulationState::new(n_sharp, 0.0),
        e_w: PopulationState::new(0.0, w_sharp),
        e_c,
        n_sharp,
        w_sharp,
    })
}

/// Local type of an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Classification {
    NodalAttractor,
    Saddle,
    Source,
    Degenerate,
}

/// Eigen-data at one equilibrium.
pub type Eigenvalues = Spectrum;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EquilibriumStability {
    pub state: PopulationState,
    /// `None` for the origin, where the Jacobian does not exist.
    pub eigenvalues: Option<Eigenvalues>,
    /// Unit eigenvectors paired with `hi` and `lo` for a real spectrum.
    pub eigenvectors: Option<[[f64; 2]; 2]>,
    pub classification: Classification,
    /// Set when the spectrum came out complex, which the theory rules out
    /// at these equilibria.
    pub unexpected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StabilityReport {
    pub e0: EquilibriumStability,
    pub e_n: EquilibriumStability,
    pub e_w: EquilibriumStability,
    pub e_c: Option<EquilibriumStability>,
}

fn classify_matrix(state: PopulationState, j: &Matrix2) -> EquilibriumStability {
    let spectrum = j.spectrum();
    // Eigenvalues below this magnitude are treated as zero.
    let zero = 1e-12 * j.0.iter().flatten().map(|x| libm::fabs(*x)).sum::<f64>();
    let (classification, eigenvectors, unexpected) = match spectrum {
        Spectrum::Real { hi, lo } => {
            let class = if libm::fabs(hi) <= zero || libm::fabs(lo) <= zero {
                Classification::Degenerate
            } else if hi < 0.0 {
                Classification::NodalAttractor
            } else if lo > 0.0 {
                Classification::Source
            } else {
                Classification::Saddle
            };
            (class, Some([j.eigenvector(hi), j.eigenvector(lo)]), false)
        }
        Spectrum::Complex { re, .. } => {
            let class = if libm::fabs(re) <= zero {
                Classification::Degenerate
            } else if re < 0.0 {
                Classification::NodalAttractor
            } else {
                Classification::Source
            };
            (class, None, true)
        }
    };
    EquilibriumStability {
        state,
        eigenvalues: Some(spectrum),
        eigenvectors,
        classification,
        unexpected,
    }
}

/// Linearised stability of every equilibrium. The origin is a source by
/// rule: both invariant axes carry orbits leaving it.
pub fn classify_stability(p: &ModelParameters) -> Result<StabilityReport> {
    let eq = equilibria(p)?;
    let at = |s: PopulationState| classify_matrix(s, &jacobian_unchecked(p, s.n, s.w));
    Ok(StabilityReport {
        e0: EquilibriumStability {
            state: eq.e0,
            eigenvalues: None,
            eigenvectors: None,
            classification: Classification::Source,
            unexpected: false,
        },
        e_n: at(eq.e_n),
        e_w: at(eq.e_w),
        e_c: eq.e_c.map(at),
    })
}

/// Stable and unstable unit eigenvectors of the coexistence saddle, oriented
/// with a positive `n` component.
pub(crate) fn saddle_directions(p: &ModelParameters) -> Result<(PopulationState, [f64; 2], [f64; 2])> {
    let report = classify_stability(p)?;
    let ec = report.e_c.ok_or(Error::NoCoexistence)?;
    match (ec.classification, ec.eigenvalues) {
        (Classification::Saddle, Some(Spectrum::Real { hi, lo })) => {
            let j = jacobian_unchecked(p, ec.state.n, ec.state.w);
            Ok((ec.state, j.eigenvector(lo), j.eigenvector(hi)))
        }
        _ => Err(Error::NotSaddle),
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    const P: ModelParameters = ModelParameters::WMELPOP;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn wmelpop_equilibria_match_high_precision() {
        // 40-digit evaluations of the closed forms.
        let eq = equilibria(&P).unwrap();
        assert!(rel(eq.n_sharp, 1728.815959702669391942) < 1e-13);
        assert!(rel(eq.w_sharp, 704.4105987365405764853) < 1e-13);
        let ec = eq.e_c.unwrap();
        assert!(rel(ec.n, 290.0714917882502507603) < 1e-12);
        assert!(rel(ec.w, 414.3391069482903257250) < 1e-12);
        assert!(rel(ec.n + ec.w, eq.w_sharp) < 1e-12);
    }

    #[test]
    fn equal_capacities_have_no_saddle() {
        let p = ModelParameters {
            rho_n: 3.0,
            alpha_n: 1.0,
            rho_w: 3.0,
            alpha_w: 1.0,
            beta_n: 0.01,
            beta_w: 0.01,
        };
        let eq = equilibria(&p).unwrap();
        assert!(eq.n_sharp <= eq.w_sharp);
        assert!(eq.e_c.is_none());
        assert_eq!(eq.saddle(), Err(Error::NoCoexistence));
    }

    #[test]
    fn survival_violation_is_an_error() {
        let p = ModelParameters { rho_n: P.alpha_n * 0.5, ..P };
        assert_eq!(equilibria(&p), Err(Error::NotSurvivable));
    }

    #[test]
    fn wmelpop_classifications() {
        let r = classify_stability(&P).unwrap();
        assert_eq!(r.e0.classification, Classification::Source);
        assert_eq!(r.e_n.classification, Classification::NodalAttractor);
        assert_eq!(r.e_w.classification, Classification::NodalAttractor);
        let ec = r.e_c.unwrap();
        assert_eq!(ec.classification, Classification::Saddle);
        assert!(!ec.unexpected);
    }

    #[test]
    fn infected_capacity_eigenvalues_match_closed_form() {
        let r = classify_stability(&P).unwrap();
        let Some(Spectrum::Real { hi, lo }) = r.e_w.eigenvalues else {
            panic!("real spectrum expected")
        };
        // -alpha_n - beta_n w_sharp = -1.87365904..., -(rho_w - alpha_w) = -2.20334
        assert!(rel(hi, -1.873659042047111179) < 1e-12);
        assert!(rel(lo, -2.20334) < 1e-12);
    }

    #[test]
    fn saddle_eigenvalues_match_high_precision() {
        let r = classify_stability(&P).unwrap();
        let Some(Spectrum::Real { hi, lo }) = r.e_c.unwrap().eigenvalues else {
            panic!("real spectrum expected")
        };
        assert!(rel(hi, 1.153465174816909806) < 1e-10);
        assert!(rel(lo, -2.105220735432278740) < 1e-10);
    }

    #[test]
    fn saddle_directions_are_oriented() {
        let (_, stable, unstable) = saddle_directions(&P).unwrap();
        // The separatrix rises with n, the heteroclinic connection falls.
        assert!(stable[0] > 0.0 && stable[1] > 0.0);
        assert!(unstable[0] > 0.0 && unstable[1] < 0.0);
    }
}
