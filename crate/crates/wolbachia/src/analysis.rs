//! The six analyses, with serde inputs and outputs shared by the CLI and the
//! HTTP service.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use wolbachia_core::threshold::relative_gap;
use wolbachia_core::{
    classify_stability, equilibria, integrate, separatrix_backward, simulate_impulsive,
    simulate_releases,
    unstable_manifold, validate_params, EquilibriumSet, ImpulsiveTrajectory, IntegrationOptions,
    ManifoldPair, ModelParameters, Outcome, PopulationState, Provenance, Release, ReleasePlanner,
    ReleaseSchedule, Sample, SeparatrixCurve, StabilityReport, StopRule, TerminalReason,
    ValidationReport,
};

use crate::error::{AppError, AppResult};
use crate::params;
use crate::sweep::{self, Cancel};

/// Tolerances actually used, as decimal strings.
pub type Tolerances = BTreeMap<&'static str, String>;

fn tol_str(v: f64) -> String {
    format!("{v:e}")
}

fn integration_tolerances(o: &IntegrationOptions) -> Tolerances {
    BTreeMap::from([
        ("rel_tol", tol_str(o.rel_tol)),
        ("abs_tol", tol_str(o.abs_tol)),
        ("max_step", tol_str(o.max_step)),
        ("t_max", tol_str(o.t_max)),
        ("capture_factor", tol_str(o.capture_factor)),
    ])
}

/// Result of an analysis with the tolerances behind it.
#[derive(Debug, Clone)]
pub struct Computed<T> {
    pub value: T,
    pub tolerances: Tolerances,
}

// ---- equilibria ----

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriaInput {}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriaReport {
    pub validation: ValidationReport,
    pub equilibria: EquilibriumSet,
    pub stability: StabilityReport,
    /// Runs from the wild-only state only fail to replace when `e_c` exists.
    pub feasible: bool,
}

pub fn run_equilibria(p: &ModelParameters, _: &EquilibriaInput) -> AppResult<Computed<EquilibriaReport>> {
    params::check(p, false)?;
    let validation = validate_params(p);
    let report = EquilibriaReport {
        validation,
        equilibria: equilibria(p)?,
        stability: classify_stability(p)?,
        feasible: validation.coexistence,
    };
    Ok(Computed { value: report, tolerances: BTreeMap::from([("zero_eigenvalue", tol_str(1e-12))]) })
}

// ---- simulate ----

fn default_t_max() -> f64 {
    IntegrationOptions::default().t_max
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateInput {
    pub n0: f64,
    pub w0: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    /// Resample on a uniform grid of this spacing instead of solver steps.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub options: Option<IntegrationOptions>,
}

/// One exported trajectory sample, named as in the `t,N,W` CSV header.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub t: f64,
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(rename = "W")]
    pub w: f64,
}

impl From<Sample> for Point {
    fn from(s: Sample) -> Self {
        Point { t: s.t, n: s.state.n, w: s.state.w }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryReport {
    pub reason: TerminalReason,
    pub samples: Vec<Point>,
}

pub fn run_simulate(p: &ModelParameters, input: &SimulateInput) -> AppResult<Computed<TrajectoryReport>> {
    params::check(p, false)?;
    let mut opts = input.options.unwrap_or_default();
    opts.t_max = input.t_max;
    let s0 = PopulationState::new(input.n0, input.w0);
    let samples_on_grid = match input.dt {
        Some(dt) if !(dt.is_finite() && dt > 0.0) => {
            return Err(AppError::validation("dt must be positive"))
        }
        Some(dt) => {
            opts.dense_output = true;
            Some(dt)
        }
        None => None,
    };
    let traj = integrate(p, s0, &opts)?;
    let samples = match samples_on_grid {
        None => traj.samples.clone(),
        Some(dt) => {
            let end = traj.last().t;
            let count = (end / dt).floor() as usize;
            let mut out: Vec<Sample> = (0..=count)
                .filter_map(|k| {
                    let t = k as f64 * dt;
                    traj.state_at(t).map(|state| Sample { t, state })
                })
                .collect();
            if out.last().is_some_and(|s| s.t < end) {
                out.push(traj.last());
            }
            out
        }
    };
    Ok(Computed {
        value: TrajectoryReport {
            reason: traj.reason,
            samples: samples.into_iter().map(Point::from).collect(),
        },
        tolerances: integration_tolerances(&opts),
    })
}

// ---- separatrix ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SeparatrixMethod {
    #[default]
    Backward,
    Bisection,
}

fn default_points() -> usize {
    32
}
fn default_sep_tol() -> f64 {
    1e-6
}
fn default_arc_step() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparatrixInput {
    #[serde(default)]
    pub method: SeparatrixMethod,
    /// Bisection grid size over `[0, n_sharp]`.
    #[serde(default = "default_points")]
    pub points: usize,
    /// Relative tolerance of each bisection.
    #[serde(default = "default_sep_tol")]
    pub tol: f64,
    /// Backward-integration sample spacing, as a fraction of `n_sharp`.
    #[serde(default = "default_arc_step")]
    pub arc_step: f64,
    /// Also return the two heteroclinic orbits leaving the saddle.
    #[serde(default)]
    pub unstable_manifold: bool,
}

impl Default for SeparatrixInput {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparatrixReport {
    pub provenance: Provenance,
    pub unordered: bool,
    pub points: Vec<PopulationState>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unstable_manifold: Option<ManifoldPair>,
}

/// Arc budget of backward tracing, in multiples of `n_sharp`.
pub const ARC_BUDGET: f64 = 40.0;

pub fn backward_curve(p: &ModelParameters, arc_step: f64) -> AppResult<SeparatrixCurve> {
    if !(arc_step > 0.0 && arc_step < 1.0) {
        return Err(AppError::validation("arc_step must lie in (0, 1)"));
    }
    let ns = p.n_sharp();
    Ok(separatrix_backward(p, ARC_BUDGET * ns, arc_step * ns)?)
}

/// Evenly spaced grid of `count` points over `[0, hi]`.
pub fn grid(hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![hi],
        _ => (0..count).map(|k| hi * k as f64 / (count - 1) as f64).collect(),
    }
}

pub fn run_separatrix(
    p: &ModelParameters,
    input: &SeparatrixInput,
    cancel: &Cancel,
) -> AppResult<Computed<SeparatrixReport>> {
    params::check(p, true)?;
    let mut tolerances = BTreeMap::new();
    let curve = match input.method {
        SeparatrixMethod::Backward => {
            tolerances.insert("arc_step", tol_str(input.arc_step));
            tolerances.insert("arc_budget", tol_str(ARC_BUDGET));
            tolerances.insert("seed_offset", tol_str(wolbachia_core::threshold::SEED_OFFSET));
            backward_curve(p, input.arc_step)?
        }
        SeparatrixMethod::Bisection => {
            if input.points < 2 {
                return Err(AppError::validation("bisection needs at least two grid points"));
            }
            tolerances.insert("tol", tol_str(input.tol));
            sweep::separatrix_bisection(p, &grid(p.n_sharp(), input.points), input.tol, cancel)?
        }
    };
    let manifold = if input.unstable_manifold { Some(unstable_manifold(p)?) } else { None };
    Ok(Computed {
        value: SeparatrixReport {
            provenance: curve.provenance(),
            unordered: curve.is_unordered(),
            points: curve.points().to_vec(),
            unstable_manifold: manifold,
        },
        tolerances,
    })
}

// ---- min-release (single release thresholds) ----

fn default_fractions() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinReleaseInput {
    /// Initial wild populations as fractions of `n_sharp`.
    #[serde(default = "default_fractions")]
    pub n0_frac: Vec<f64>,
    #[serde(default = "default_sep_tol")]
    pub tol: f64,
}

impl Default for MinReleaseInput {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MinReleaseRow {
    /// `n0 / n_sharp`.
    pub lambda: f64,
    pub n0: f64,
    pub w0_hat: f64,
    /// `w0_hat / n_sharp`.
    pub w0_hat_frac: f64,
}

pub fn run_min_release(
    p: &ModelParameters,
    input: &MinReleaseInput,
    cancel: &Cancel,
) -> AppResult<Computed<Vec<MinReleaseRow>>> {
    params::check(p, true)?;
    check_fractions(&input.n0_frac)?;
    let ns = p.n_sharp();
    let n0s: Vec<f64> = input.n0_frac.iter().map(|f| f * ns).collect();
    let w0s = sweep::minimal_viable_w(p, &n0s, input.tol, cancel)?;
    let rows = input
        .n0_frac
        .iter()
        .zip(n0s.iter().zip(w0s))
        .map(|(&lambda, (&n0, w0_hat))| MinReleaseRow { lambda, n0, w0_hat, w0_hat_frac: w0_hat / ns })
        .collect();
    let mut tolerances = integration_tolerances(&IntegrationOptions::default());
    tolerances.insert("tol", tol_str(input.tol));
    Ok(Computed { value: rows, tolerances })
}

fn check_fractions(fracs: &[f64]) -> AppResult<()> {
    if fracs.is_empty() {
        return Err(AppError::validation("n0_frac must be nonempty"));
    }
    if fracs.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
        return Err(AppError::validation("n0_frac entries must be finite and nonnegative"));
    }
    Ok(())
}

// ---- plan (periodic releases) ----

fn default_taus() -> Vec<f64> {
    vec![1.0, 3.0]
}
fn default_budget() -> u32 {
    30
}
fn default_plan_tol() -> f64 {
    1e-3
}
fn default_stop_rule() -> StopRule {
    StopRule::OnSeparatrixCrossing
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanInput {
    #[serde(default = "default_fractions")]
    pub n0_frac: Vec<f64>,
    #[serde(default = "default_taus")]
    pub tau: Vec<f64>,
    /// Most releases allowed per campaign.
    #[serde(default = "default_budget")]
    pub budget: u32,
    /// Relative tolerance of the release-size bisection.
    #[serde(default = "default_plan_tol")]
    pub tol: f64,
    #[serde(default = "default_stop_rule")]
    pub stop_rule: StopRule,
}

impl Default for PlanInput {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

/// One row of a release plan table. Failed cells carry `error` and no numbers.
#[derive(Debug, Clone, Serialize)]
pub struct PlanRow {
    /// `n0 / n_sharp`.
    pub lambda: f64,
    /// `lambda_hat / n_sharp`.
    pub lambda_hat_frac: Option<f64>,
    pub tau: f64,
    /// Releases performed at `lambda_hat`.
    pub releases: Option<u32>,
    pub n0: f64,
    pub lambda_hat: Option<f64>,
    pub total_released: Option<f64>,
    /// `total_released / n_sharp`.
    pub total_frac: Option<f64>,
    pub duration_days: Option<f64>,
    pub budget: u32,
    pub error: Option<String>,
}

pub fn run_plan(p: &ModelParameters, input: &PlanInput, cancel: &Cancel) -> AppResult<Computed<Vec<PlanRow>>> {
    params::check(p, true)?;
    check_fractions(&input.n0_frac)?;
    if input.tau.is_empty() || input.tau.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(AppError::validation("tau entries must be positive"));
    }
    if input.budget == 0 {
        return Err(AppError::validation("budget must be at least one release"));
    }
    if !(input.tol > 0.0 && input.tol < 1.0) {
        return Err(AppError::validation("tol must lie in (0, 1)"));
    }
    let planner = ReleasePlanner::with_separatrix(p, backward_curve(p, default_arc_step())?)?;
    let ns = p.n_sharp();
    let cells: Vec<(f64, f64)> = input
        .n0_frac
        .iter()
        .flat_map(|&f| input.tau.iter().map(move |&tau| (f, tau)))
        .collect();
    let results = sweep::map(&cells, cancel, |&(frac, tau)| {
        planner.minimal_release_size(frac * ns, tau, input.budget, input.tol, input.stop_rule)
    })?;
    let rows = cells
        .iter()
        .zip(results)
        .map(|(&(frac, tau), r)| {
            let mut row = PlanRow {
                lambda: frac,
                lambda_hat_frac: None,
                tau,
                releases: None,
                n0: frac * ns,
                lambda_hat: None,
                total_released: None,
                total_frac: None,
                duration_days: None,
                budget: input.budget,
                error: None,
            };
            match r {
                Ok(plan) => {
                    row.lambda_hat_frac = Some(plan.lambda_hat / ns);
                    row.releases = Some(plan.releases);
                    row.lambda_hat = Some(plan.lambda_hat);
                    row.total_released = Some(plan.total_released);
                    row.total_frac = Some(plan.total_released / ns);
                    row.duration_days = Some(plan.duration_days);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();
    let mut tolerances = integration_tolerances(&IntegrationOptions::default());
    tolerances.insert("tol", tol_str(input.tol));
    tolerances.insert("crossing_margin", tol_str(wolbachia_core::planner::CROSSING_MARGIN));
    Ok(Computed { value: rows, tolerances })
}

// ---- simulate-impulsive ----

/// Either a periodic campaign from `(n0, 0)` or explicit releases from
/// `(n0, w0)`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpulsiveInput {
    pub n0: f64,
    #[serde(default)]
    pub w0: f64,
    #[serde(default)]
    pub schedule: Option<ReleaseSchedule>,
    #[serde(default)]
    pub releases: Option<Vec<Release>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImpulsiveReport {
    pub outcome: Outcome,
    pub releases_used: u32,
    #[serde(flatten)]
    pub trajectory: ImpulsiveTrajectory,
}

pub fn run_impulsive(p: &ModelParameters, input: &ImpulsiveInput) -> AppResult<Computed<ImpulsiveReport>> {
    params::check(p, true)?;
    let opts = IntegrationOptions::default();
    let traj = match (&input.schedule, &input.releases) {
        (Some(sched), None) => {
            if input.w0 != 0.0 {
                return Err(AppError::validation("periodic campaigns start from w0 = 0"));
            }
            let curve = match sched.stop_rule {
                StopRule::OnSeparatrixCrossing => Some(backward_curve(p, default_arc_step())?),
                StopRule::FixedCount => None,
            };
            simulate_impulsive(p, input.n0, sched, curve.as_ref())?
        }
        (None, Some(list)) => simulate_releases(p, PopulationState::new(input.n0, input.w0), list, &opts)?,
        _ => return Err(AppError::validation("give exactly one of schedule or releases")),
    };
    let mut tolerances = integration_tolerances(&opts);
    tolerances.insert("crossing_margin", tol_str(wolbachia_core::planner::CROSSING_MARGIN));
    Ok(Computed {
        value: ImpulsiveReport { outcome: traj.outcome, releases_used: traj.releases_used, trajectory: traj },
        tolerances,
    })
}

/// Largest relative disagreement between two curves at the given `n`.
pub fn max_relative_gap(a: &SeparatrixCurve, b: &SeparatrixCurve, ns: &[f64]) -> Option<f64> {
    ns.iter()
        .map(|&n| Some(relative_gap(a.w_of_n(n)?, b.w_of_n(n)?)))
        .try_fold(0.0f64, |acc, g| g.map(|g| acc.max(g)))
}
