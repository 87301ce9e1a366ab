//! Trajectories of the smooth system and long-run basin classification.

mod dopri;

use alloc::vec::Vec;

pub use dopri::DenseStep;
pub(crate) use dopri::{solve, End, Flow, Solved, StepConfig};

use crate::equilibria::{equilibria, EquilibriumSet};
use crate::error::{Error, Result};
use crate::model::{field_unchecked, ModelParameters, PopulationState};

/// Settings for [`integrate`] and [`classify_basin`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct IntegrationOptions {
    pub rel_tol: f64,
    /// Absolute tolerance in individuals; also the axis snapping band.
    pub abs_tol: f64,
    /// Largest step in days.
    pub max_step: f64,
    /// Horizon in days.
    pub t_max: f64,
    /// Keep the interpolant of every step so [`Trajectory::state_at`] works
    /// between samples.
    pub dense_output: bool,
    /// Capture ball radius around an attractor, as a fraction of
    /// `max(n_sharp, w_sharp)`.
    pub capture_factor: f64,
    /// End [`integrate`] as soon as the state enters a capture ball.
    pub stop_on_capture: bool,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: 10.0,
            t_max: 5000.0,
            dense_output: false,
            capture_factor: 1e-3,
            stop_on_capture: false,
        }
    }
}

impl IntegrationOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.rel_tol) {
            return Err(Error::InvalidOptions("rel_tol must be positive"));
        }
        if !positive(self.abs_tol) {
            return Err(Error::InvalidOptions("abs_tol must be positive"));
        }
        if self.max_step.partial_cmp(&0.0) != Some(core::cmp::Ordering::Greater) {
            return Err(Error::InvalidOptions("max_step must be positive"));
        }
        if !positive(self.t_max) {
            return Err(Error::InvalidOptions("t_max must be positive"));
        }
        if !positive(self.capture_factor) {
            return Err(Error::InvalidOptions("capture_factor must be positive"));
        }
        Ok(())
    }

    pub(crate) fn step_config(&self) -> StepConfig {
        StepConfig {
            rtol: self.rel_tol,
            atol: self.abs_tol,
            max_step: self.max_step,
            clamp: true,
        }
    }
}

/// Why a trajectory ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TerminalReason {
    ReachedTMax,
    ConvergedToAttractor,
    LeftDomain,
}

/// A time-stamped phase point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sample {
    pub t: f64,
    pub state: PopulationState,
}

/// Samples at every accepted step, starting with the initial condition.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub reason: TerminalReason,
    #[cfg_attr(feature = "serde", serde(skip))]
    dense: Vec<DenseStep>,
}

impl Trajectory {
    pub(crate) fn new(first: Sample) -> Self {
        Trajectory {
            samples: alloc::vec![first],
            reason: TerminalReason::ReachedTMax,
            dense: Vec::new(),
        }
    }

    pub(crate) fn push_step(&mut self, step: &DenseStep, keep_dense: bool) {
        self.samples.push(Sample { t: step.t1(), state: PopulationState::from_array(step.y1) });
        if keep_dense {
            self.dense.push(*step);
        }
    }

    pub fn first(&self) -> Sample {
        self.samples[0]
    }

    pub fn last(&self) -> Sample {
        *self.samples.last().expect("trajectory always holds its initial sample")
    }

    pub fn has_dense_output(&self) -> bool {
        !self.dense.is_empty() || self.samples.len() == 1
    }

    /// Interpolated state at `t`. Needs dense output; `None` outside the
    /// covered time span or without it.
    pub fn state_at(&self, t: f64) -> Option<PopulationState> {
        let first = self.first();
        if t == first.t {
            return Some(first.state);
        }
        if self.dense.is_empty() {
            return None;
        }
        let idx = self.dense.partition_point(|s| s.t1() < t);
        let step = self.dense.get(idx)?;
        if t < step.t0 {
            return None;
        }
        Some(step.state_at(t))
    }
}

/// Long-run fate of an initial condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BasinLabel {
    /// Wild population wins: converges to `(n_sharp, 0)`.
    ToEN,
    /// Replacement: converges to `(0, w_sharp)`.
    ToEW,
    /// Horizon reached without entering either capture ball.
    Undecided,
}

pub(crate) fn capture_label(eq: &EquilibriumSet, radius: f64, y: [f64; 2]) -> Option<BasinLabel> {
    let s = PopulationState::from_array(y);
    if s.distance(&eq.e_w) <= radius {
        Some(BasinLabel::ToEW)
    } else if s.distance(&eq.e_n) <= radius {
        Some(BasinLabel::ToEN)
    } else {
        None
    }
}

/// Flows the smooth system from `y0` at `t0` to `t1`.
pub(crate) fn flow<S>(
    p: &ModelParameters,
    y0: [f64; 2],
    t0: f64,
    t1: f64,
    opts: &IntegrationOptions,
    on_step: S,
) -> Result<Solved>
where
    S: FnMut(&DenseStep) -> Flow,
{
    solve(|y| field_unchecked(p, y[0], y[1]), t0, y0, t1, &opts.step_config(), on_step)
}

/// Integrates until `t_max` (or capture, when requested).
pub fn integrate(
    p: &ModelParameters,
    s0: PopulationState,
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    s0.check_nonnegative()?;
    opts.validate()?;
    // Capture only needs the attractors, which need survival.
    let capture = if opts.stop_on_capture {
        let eq = equilibria(p)?;
        Some((eq, opts.capture_factor * eq.scale()))
    } else {
        None
    };
    let mut traj = Trajectory::new(Sample { t: 0.0, state: s0 });
    let mut captured = false;
    let out = flow(p, s0.to_array(), 0.0, opts.t_max, opts, |step| {
        traj.push_step(step, opts.dense_output);
        match &capture {
            Some((eq, r)) if capture_label(eq, *r, step.y1).is_some() => {
                captured = true;
                Flow::Stop
            }
            _ => Flow::Continue,
        }
    })?;
    traj.reason = match out.end {
        End::Reached => TerminalReason::ReachedTMax,
        End::Stopped if captured => TerminalReason::ConvergedToAttractor,
        End::Stopped => TerminalReason::ReachedTMax,
        End::LeftDomain => TerminalReason::LeftDomain,
    };
    Ok(traj)
}

/// Runs from `y0` until a capture ball is entered or `t_max` days elapse.
/// Returns the label with the final time and state.
pub(crate) fn settle(
    p: &ModelParameters,
    eq: &EquilibriumSet,
    y0: [f64; 2],
    opts: &IntegrationOptions,
) -> Result<(BasinLabel, f64, [f64; 2])> {
    let radius = opts.capture_factor * eq.scale();
    if let Some(label) = capture_label(eq, radius, y0) {
        return Ok((label, 0.0, y0));
    }
    let mut label = BasinLabel::Undecided;
    let out = flow(p, y0, 0.0, opts.t_max, opts, |step| match capture_label(eq, radius, step.y1) {
        Some(l) => {
            label = l;
            Flow::Stop
        }
        None => Flow::Continue,
    })?;
    Ok((label, out.t, out.y))
}

/// Classifies `s0` by which attractor's capture ball it reaches first.
pub fn classify_basin(
    p: &ModelParameters,
    s0: PopulationState,
    opts: &IntegrationOptions,
) -> Result<BasinLabel> {
    s0.check_nonnegative()?;
    opts.validate()?;
    let eq = equilibria(p)?;
    settle(p, &eq, s0.to_array(), opts).map(|(label, _, _)| label)
}
