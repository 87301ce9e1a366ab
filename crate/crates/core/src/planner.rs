//! Periodic releases of infected insects.
//!
//! The release campaign is the smooth system with impulses on `W`:
//! `W(0) = Λ` and `W(iτ⁺) = W(iτ⁻) + Λ` for `i = 1, …, n - 1`. The first
//! release at `t = 0` counts towards `n`.

use alloc::vec::Vec;

use crate::equilibria::{equilibria, EquilibriumSet};
use crate::error::{Error, Result};
use crate::model::{ModelParameters, PopulationState};
use crate::ode::{self, capture_label, BasinLabel, End, Flow, IntegrationOptions, Sample, TerminalReason, Trajectory};
use crate::threshold::{minimal_viable_w_with, separatrix_backward, SeparatrixCurve};

/// Margin above the separatrix, relative to `w_sharp`, required before
/// releases are suspended.
pub const CROSSING_MARGIN: f64 = 1e-3;

/// When to stop releasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum StopRule {
    /// Suspend releases once a jump lands above the separatrix.
    OnSeparatrixCrossing,
    /// Always perform `max_releases` releases.
    FixedCount,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReleaseSchedule {
    /// Release size Λ, individuals.
    pub lambda_size: f64,
    /// Days between releases.
    pub tau: f64,
    pub max_releases: u32,
    pub stop_rule: StopRule,
}

impl ReleaseSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_size.is_finite() && self.lambda_size >= 0.0) {
            return Err(Error::InvalidSchedule("release size must be finite and nonnegative"));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::InvalidSchedule("release period must be positive"));
        }
        if self.max_releases == 0 {
            return Err(Error::InvalidSchedule("at least one release is required"));
        }
        Ok(())
    }
}

/// One impulse on the infected population.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JumpEvent {
    pub t: f64,
    pub w_before: f64,
    pub w_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Outcome {
    /// The orbit ends in the replacement basin.
    Replacement,
    /// The wild population persists.
    Failure,
    /// All releases were spent without crossing the separatrix and the
    /// wild population persists.
    BudgetExhausted,
}

/// Piecewise-smooth orbit of a release campaign.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ImpulsiveTrajectory {
    /// Smooth pieces between jumps; the last one runs release-free until
    /// an attractor is captured.
    pub segments: Vec<Trajectory>,
    pub jumps: Vec<JumpEvent>,
    pub outcome: Outcome,
    pub releases_used: u32,
    /// Final long-run label of the release-free tail.
    pub final_label: BasinLabel,
}

/// Minimal release size found by [`minimal_release_size`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlanResult {
    /// Initial wild population, individuals.
    pub n0: f64,
    pub tau: f64,
    pub max_releases: u32,
    /// Smallest successful release size Λ̂, individuals.
    pub lambda_hat: f64,
    /// Releases performed at Λ̂.
    pub releases: u32,
    /// `releases · Λ̂`.
    pub total_released: f64,
    /// `releases · τ`, days.
    pub duration_days: f64,
}

/// Reusable context for release simulations: parameters, equilibria and
/// separatrix are computed once and shared by every query.
#[derive(Debug, Clone)]
pub struct ReleasePlanner {
    params: ModelParameters,
    eq: EquilibriumSet,
    separatrix: SeparatrixCurve,
    opts: IntegrationOptions,
}

/// Arc budget and spacing used when a planner builds its own separatrix,
/// as multiples of `n_sharp`.
const PLANNER_ARC_BUDGET: f64 = 40.0;
const PLANNER_ARC_STEP: f64 = 1e-3;

impl ReleasePlanner {
    /// Builds the separatrix by backward integration.
    pub fn new(p: &ModelParameters) -> Result<Self> {
        let ns = p.n_sharp();
        let sep = separatrix_backward(p, PLANNER_ARC_BUDGET * ns, PLANNER_ARC_STEP * ns)?;
        Self::with_separatrix(p, sep)
    }

    pub fn with_separatrix(p: &ModelParameters, separatrix: SeparatrixCurve) -> Result<Self> {
        let eq = equilibria(p)?;
        eq.saddle()?;
        Ok(ReleasePlanner { params: *p, eq, separatrix, opts: IntegrationOptions::default() })
    }

    pub fn with_options(mut self, opts: IntegrationOptions) -> Result<Self> {
        opts.validate()?;
        self.opts = opts;
        Ok(self)
    }

    pub fn params(&self) -> &ModelParameters {
        &self.params
    }

    pub fn separatrix(&self) -> &SeparatrixCurve {
        &self.separatrix
    }

    pub fn equilibria(&self) -> &EquilibriumSet {
        &self.eq
    }

    /// Runs one release campaign from the wild-only state `(n0, 0)`.
    pub fn simulate(&self, n0: f64, sched: &ReleaseSchedule) -> Result<ImpulsiveTrajectory> {
        simulate_inner(&self.params, &self.eq, Some(&self.separatrix), n0, sched, &self.opts)
    }

    /// Whether the campaign ends in replacement, and with how many releases.
    fn succeeds(&self, n0: f64, sched: &ReleaseSchedule) -> Result<(bool, u32)> {
        let run = self.simulate(n0, sched)?;
        Ok((run.outcome == Outcome::Replacement, run.releases_used))
    }

    /// Smallest Λ achieving replacement within `max_releases` releases every
    /// `tau` days, by bisection on `[0, Ŵ₀(n0)]` to relative tolerance `tol`.
    pub fn minimal_release_size(
        &self,
        n0: f64,
        tau: f64,
        max_releases: u32,
        tol: f64,
        stop_rule: StopRule,
    ) -> Result<PlanResult> {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::InvalidOptions("tolerance must lie in (0, 1)"));
        }
        let mut sched = ReleaseSchedule { lambda_size: 0.0, tau, max_releases, stop_rule };
        sched.validate()?;
        let plan = |lambda_hat: f64, releases: u32| PlanResult {
            n0,
            tau,
            max_releases,
            lambda_hat,
            releases,
            total_released: releases as f64 * lambda_hat,
            duration_days: releases as f64 * tau,
        };
        if n0 == 0.0 {
            return Ok(plan(0.0, 0));
        }

        let upper = minimal_viable_w_with(&self.params, n0, tol * 1e-2, &self.opts)?;
        sched.lambda_size = upper;
        let (ok, mut releases) = self.succeeds(n0, &sched)?;
        if !ok {
            return Err(Error::NoSuccess { upper });
        }
        let (mut lo, mut hi) = (0.0, upper);
        while hi - lo > tol * hi {
            let mid = 0.5 * (lo + hi);
            sched.lambda_size = mid;
            let (ok, used) = self.succeeds(n0, &sched)?;
            if ok {
                hi = mid;
                releases = used;
            } else {
                lo = mid;
            }
        }
        Ok(plan(hi, releases))
    }

    /// Minimal release sizes over a grid of initial wild populations and
    /// periods. Failures are recorded per cell.
    pub fn tradeoff_table(
        &self,
        n0_grid: &[f64],
        tau_grid: &[f64],
        budget: u32,
        tol: f64,
    ) -> Result<Vec<TradeoffCell>> {
        if n0_grid.is_empty() || tau_grid.is_empty() {
            return Err(Error::InvalidOptions("tradeoff grids must be nonempty"));
        }
        let mut out = Vec::with_capacity(n0_grid.len() * tau_grid.len());
        for &n0 in n0_grid {
            for &tau in tau_grid {
                let result =
                    self.minimal_release_size(n0, tau, budget, tol, StopRule::OnSeparatrixCrossing);
                out.push(TradeoffCell { n0, tau, result });
            }
        }
        Ok(out)
    }
}

/// One cell of a tradeoff table.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffCell {
    pub n0: f64,
    pub tau: f64,
    pub result: Result<PlanResult>,
}

fn simulate_inner(
    p: &ModelParameters,
    eq: &EquilibriumSet,
    sep: Option<&SeparatrixCurve>,
    n0: f64,
    sched: &ReleaseSchedule,
    opts: &IntegrationOptions,
) -> Result<ImpulsiveTrajectory> {
    sched.validate()?;
    if !(n0.is_finite() && n0 >= 0.0) {
        return Err(Error::NegativeState { n: n0, w: 0.0 });
    }
    let sep = match (sched.stop_rule, sep) {
        (StopRule::OnSeparatrixCrossing, None) => {
            return Err(Error::InvalidSchedule("separatrix-crossing stop rule needs a separatrix"))
        }
        (_, s) => s,
    };
    let margin = CROSSING_MARGIN * eq.w_sharp;
    let lambda = sched.lambda_size;

    let mut segments = Vec::new();
    let mut jumps = Vec::new();
    let mut t = 0.0;
    let mut y = [n0, 0.0];
    let mut releases = 0u32;
    let mut crossed = false;

    if lambda > 0.0 {
        loop {
            let w_before = y[1];
            y[1] = w_before + lambda;
            jumps.push(JumpEvent { t, w_before, w_after: y[1] });
            releases += 1;

            if sched.stop_rule == StopRule::OnSeparatrixCrossing {
                if let Some(curve) = sep {
                    if curve.is_above(PopulationState::from_array(y), margin)? {
                        crossed = true;
                        break;
                    }
                }
            }
            if releases >= sched.max_releases {
                break;
            }
            let seg = free_segment(p, y, t, t + sched.tau, opts)?;
            t = seg.last().t;
            y = seg.last().state.to_array();
            segments.push(seg);
        }
    }

    let (tail, label) = free_tail(p, eq, y, t, opts)?;
    segments.push(tail);

    let outcome = match label {
        BasinLabel::ToEW => Outcome::Replacement,
        _ if sched.stop_rule == StopRule::OnSeparatrixCrossing && !crossed && lambda > 0.0 => {
            Outcome::BudgetExhausted
        }
        _ => Outcome::Failure,
    };
    Ok(ImpulsiveTrajectory { segments, jumps, outcome, releases_used: releases, final_label: label })
}

// Smooth flow between two releases.
fn free_segment(
    p: &ModelParameters,
    y: [f64; 2],
    t0: f64,
    t1: f64,
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    let mut seg = Trajectory::new(Sample { t: t0, state: PopulationState::from_array(y) });
    let out = ode::flow(p, y, t0, t1, opts, |s| {
        seg.push_step(s, opts.dense_output);
        Flow::Continue
    })?;
    if out.end == End::LeftDomain {
        return Err(Error::StepSizeUnderflow { t: out.t, last: PopulationState::from_array(out.y) });
    }
    Ok(seg)
}

// Release-free tail until an attractor is captured.
fn free_tail(
    p: &ModelParameters,
    eq: &EquilibriumSet,
    y: [f64; 2],
    t: f64,
    opts: &IntegrationOptions,
) -> Result<(Trajectory, BasinLabel)> {
    let radius = opts.capture_factor * eq.scale();
    let mut tail = Trajectory::new(Sample { t, state: PopulationState::from_array(y) });
    let mut label = capture_label(eq, radius, y).unwrap_or(BasinLabel::Undecided);
    if label != BasinLabel::Undecided {
        tail.reason = TerminalReason::ConvergedToAttractor;
        return Ok((tail, label));
    }
    let out = ode::flow(p, y, t, t + opts.t_max, opts, |s| {
        tail.push_step(s, opts.dense_output);
        match capture_label(eq, radius, s.y1) {
            Some(l) => {
                label = l;
                Flow::Stop
            }
            None => Flow::Continue,
        }
    })?;
    tail.reason = match out.end {
        End::Stopped => TerminalReason::ConvergedToAttractor,
        End::Reached => TerminalReason::ReachedTMax,
        End::LeftDomain => TerminalReason::LeftDomain,
    };
    Ok((tail, label))
}

/// One release of `size` infected insects on day `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Release {
    pub t: f64,
    pub size: f64,
}

/// Simulates an arbitrary list of releases from `s0`, then runs free until
/// capture. Releases must be sorted by day; all of them are applied.
pub fn simulate_releases(
    p: &ModelParameters,
    s0: PopulationState,
    releases: &[Release],
    opts: &IntegrationOptions,
) -> Result<ImpulsiveTrajectory> {
    s0.check_nonnegative()?;
    opts.validate()?;
    let mut last_t = 0.0;
    for r in releases {
        if !(r.t.is_finite() && r.t >= last_t) {
            return Err(Error::InvalidSchedule("release days must be finite, nonnegative and sorted"));
        }
        if !(r.size.is_finite() && r.size >= 0.0) {
            return Err(Error::InvalidSchedule("release size must be finite and nonnegative"));
        }
        last_t = r.t;
    }
    let eq = equilibria(p)?;

    let mut segments = Vec::new();
    let mut jumps = Vec::with_capacity(releases.len());
    let mut t = 0.0;
    let mut y = s0.to_array();
    for r in releases {
        if r.t > t {
            let seg = free_segment(p, y, t, r.t, opts)?;
            y = seg.last().state.to_array();
            segments.push(seg);
            t = r.t;
        }
        let w_before = y[1];
        y[1] = w_before + r.size;
        jumps.push(JumpEvent { t, w_before, w_after: y[1] });
    }
    let (tail, label) = free_tail(p, &eq, y, t, opts)?;
    segments.push(tail);
    Ok(ImpulsiveTrajectory {
        segments,
        jumps,
        outcome: if label == BasinLabel::ToEW { Outcome::Replacement } else { Outcome::Failure },
        releases_used: releases.len() as u32,
        final_label: label,
    })
}

/// Simulates a release campaign from `(n0, 0)` with the first release at
/// `t = 0`. `sep` is required by [`StopRule::OnSeparatrixCrossing`].
pub fn simulate_impulsive(
    p: &ModelParameters,
    n0: f64,
    sched: &ReleaseSchedule,
    sep: Option<&SeparatrixCurve>,
) -> Result<ImpulsiveTrajectory> {
    let eq = equilibria(p)?;
    simulate_inner(p, &eq, sep, n0, sched, &IntegrationOptions::default())
}

/// Minimal periodic release size; builds its own separatrix and uses the
/// separatrix-crossing stop rule.
pub fn minimal_release_size(
    p: &ModelParameters,
    n0: f64,
    tau: f64,
    max_releases: u32,
    tol: f64,
) -> Result<PlanResult> {
    ReleasePlanner::new(p)?.minimal_release_size(n0, tau, max_releases, tol, StopRule::OnSeparatrixCrossing)
}

/// [`ReleasePlanner::tradeoff_table`] with a freshly built planner.
pub fn tradeoff_table(
    p: &ModelParameters,
    n0_grid: &[f64],
    tau_grid: &[f64],
    budget: u32,
    tol: f64,
) -> Result<Vec<TradeoffCell>> {
    ReleasePlanner::new(p)?.tradeoff_table(n0_grid, tau_grid, budget, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::threshold::minimal_viable_w;

    extern crate std;
    use std::sync::OnceLock;

    const P: ModelParameters = ModelParameters::WMELPOP;

    fn planner() -> &'static ReleasePlanner {
        static PLANNER: OnceLock<ReleasePlanner> = OnceLock::new();
        PLANNER.get_or_init(|| ReleasePlanner::new(&P).unwrap())
    }

    fn sched(lambda_size: f64, tau: f64, max_releases: u32, stop_rule: StopRule) -> ReleaseSchedule {
        ReleaseSchedule { lambda_size, tau, max_releases, stop_rule }
    }

    #[test]
    fn no_release_leaves_wild_population() {
        let run = planner()
            .simulate(P.n_sharp(), &sched(0.0, 1.0, 5, StopRule::OnSeparatrixCrossing))
            .unwrap();
        assert_eq!(run.outcome, Outcome::Failure);
        assert_eq!(run.releases_used, 0);
        assert!(run.jumps.is_empty());
        assert_eq!(run.final_label, BasinLabel::ToEN);
    }

    #[test]
    fn one_release_above_threshold_suffices() {
        let ns = P.n_sharp();
        let w0 = minimal_viable_w(&P, ns, 1e-6).unwrap();
        let run = planner()
            .simulate(ns, &sched(1.05 * w0, 1.0, 10, StopRule::OnSeparatrixCrossing))
            .unwrap();
        assert_eq!(run.outcome, Outcome::Replacement);
        assert_eq!(run.releases_used, 1);
        assert_eq!(run.segments.len(), 1);
    }

    #[test]
    fn jumps_add_exactly_lambda_at_multiples_of_tau() {
        let lambda = 0.1 * P.n_sharp();
        let run = planner()
            .simulate(P.n_sharp(), &sched(lambda, 3.0, 4, StopRule::FixedCount))
            .unwrap();
        assert_eq!(run.jumps.len(), 4);
        for (i, j) in run.jumps.iter().enumerate() {
            assert_eq!(j.t, 3.0 * i as f64);
            assert_eq!(j.w_after, j.w_before + lambda);
        }
        // Each smooth piece ends where the next jump starts.
        for (seg, j) in run.segments.iter().zip(run.jumps.iter().skip(1)) {
            assert_eq!(seg.last().t, j.t);
            assert_eq!(seg.last().state.w, j.w_before);
        }
    }

    #[test]
    fn fixed_count_spends_every_release() {
        let ns = P.n_sharp();
        let run = planner().simulate(ns, &sched(ns, 1.0, 6, StopRule::FixedCount)).unwrap();
        assert_eq!(run.releases_used, 6);
        assert_eq!(run.outcome, Outcome::Replacement);
    }

    #[test]
    fn small_releases_exhaust_the_budget() {
        let ns = P.n_sharp();
        let run = planner()
            .simulate(ns, &sched(0.01 * ns, 1.0, 3, StopRule::OnSeparatrixCrossing))
            .unwrap();
        assert_eq!(run.outcome, Outcome::BudgetExhausted);
        assert_eq!(run.releases_used, 3);
    }

    #[test]
    fn crossing_rule_needs_a_curve() {
        let err = simulate_impulsive(&P, 100.0, &sched(10.0, 1.0, 3, StopRule::OnSeparatrixCrossing), None);
        assert!(matches!(err, Err(Error::InvalidSchedule(_))));
        let ok = simulate_impulsive(&P, 100.0, &sched(10.0, 1.0, 3, StopRule::FixedCount), None);
        assert!(ok.is_ok());
    }

    #[test]
    fn schedule_validation() {
        for s in [
            sched(-1.0, 1.0, 1, StopRule::FixedCount),
            sched(1.0, 0.0, 1, StopRule::FixedCount),
            sched(1.0, 1.0, 0, StopRule::FixedCount),
            sched(f64::NAN, 1.0, 1, StopRule::FixedCount),
        ] {
            assert!(s.validate().is_err());
        }
    }

    #[test]
    fn daily_releases_at_full_capacity() {
        let ns = P.n_sharp();
        let r = planner()
            .minimal_release_size(ns, 1.0, 12, 1e-3, StopRule::OnSeparatrixCrossing)
            .unwrap();
        assert!((r.lambda_hat / ns - 0.43).abs() < 0.05, "{r:?}");
        assert!(r.releases.abs_diff(12) <= 1, "{r:?}");
        assert_eq!(r.total_released, r.releases as f64 * r.lambda_hat);
        assert_eq!(r.duration_days, r.releases as f64);
    }

    #[test]
    fn single_release_budget_needs_the_full_threshold() {
        let n0 = 0.5 * P.n_sharp();
        let w0 = minimal_viable_w(&P, n0, 1e-6).unwrap();
        let r = planner()
            .minimal_release_size(n0, 1.0, 1, 1e-4, StopRule::OnSeparatrixCrossing)
            .unwrap();
        assert!((r.lambda_hat - w0).abs() < 2e-3 * w0, "{} vs {w0}", r.lambda_hat);
        assert_eq!(r.releases, 1);
    }

    #[test]
    fn yearly_releases_behave_like_one() {
        let n0 = 0.75 * P.n_sharp();
        let w0 = minimal_viable_w(&P, n0, 1e-6).unwrap();
        let r = planner()
            .minimal_release_size(n0, 365.0, 10, 1e-3, StopRule::OnSeparatrixCrossing)
            .unwrap();
        assert!((r.lambda_hat - w0).abs() < 0.05 * w0, "{} vs {w0}", r.lambda_hat);
    }

    #[test]
    fn empty_wild_population_needs_nothing() {
        let r = planner()
            .minimal_release_size(0.0, 1.0, 5, 1e-3, StopRule::OnSeparatrixCrossing)
            .unwrap();
        assert_eq!((r.lambda_hat, r.releases, r.total_released), (0.0, 0, 0.0));
    }

    #[test]
    fn tradeoff_table_fills_every_cell() {
        let ns = P.n_sharp();
        let cells = planner().tradeoff_table(&[0.25 * ns, 0.5 * ns], &[1.0, 3.0], 3, 1e-2).unwrap();
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|c| c.result.is_ok()));
        assert!(planner().tradeoff_table(&[], &[1.0], 3, 1e-2).is_err());
    }

    #[test]
    fn manual_releases_match_periodic_schedule() {
        let ns = P.n_sharp();
        let periodic = planner().simulate(ns, &sched(0.2 * ns, 2.0, 5, StopRule::FixedCount)).unwrap();
        let manual: Vec<Release> =
            (0..5).map(|i| Release { t: 2.0 * i as f64, size: 0.2 * ns }).collect();
        let run = simulate_releases(&P, PopulationState::new(ns, 0.0), &manual, &IntegrationOptions::default())
            .unwrap();
        assert_eq!(run.jumps, periodic.jumps);
        assert_eq!(run.final_label, periodic.final_label);
        assert_eq!(run.segments.last().unwrap().last(), periodic.segments.last().unwrap().last());
    }

    #[test]
    fn manual_releases_must_be_sorted() {
        let bad = [Release { t: 3.0, size: 1.0 }, Release { t: 1.0, size: 1.0 }];
        let err = simulate_releases(&P, PopulationState::new(10.0, 0.0), &bad, &IntegrationOptions::default());
        assert!(matches!(err, Err(Error::InvalidSchedule(_))));
    }

    #[test]
    fn no_manual_release_is_failure() {
        let run = simulate_releases(&P, PopulationState::new(500.0, 0.0), &[], &IntegrationOptions::default())
            .unwrap();
        assert_eq!(run.outcome, Outcome::Failure);
        assert!(run.jumps.is_empty());
    }
}
