//! The threshold manifold through the coexistence saddle.
//!
//! The stable manifold of `E_c` splits the quadrant into the basin of the
//! wild equilibrium (below) and the basin of replacement (above). Two
//! independent constructions are provided:
//!
//! * [`separatrix_backward`] follows the time-reversed flow, parametrised by
//!   arc length, from a seed on the stable eigendirection;
//! * [`separatrix_bisection`] bisects the basin oracle at fixed `n`.
//!
//! [`minimal_viable_w`] is the single-point version of the latter: the
//! smallest infected population that, released into a wild population of
//! size `n0`, leads to replacement.

use alloc::vec::Vec;

use libm::{fabs, hypot};

use crate::equilibria::{equilibria, saddle_directions, EquilibriumSet};
use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::model::{field_unchecked, ModelParameters, PopulationState};
use crate::ode::{self, capture_label, solve, BasinLabel, Flow, IntegrationOptions, StepConfig};

/// Seed offset from the saddle, relative to `n_c + w_c`.
pub const SEED_OFFSET: f64 = 1e-6;

/// How a [`SeparatrixCurve`] was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Provenance {
    BackwardIntegration,
    Bisection,
}

/// Polyline approximation of the separatrix with monotone interpolation of
/// `w` as a function of `n`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "CurveData", into = "CurveData"))]
pub struct SeparatrixCurve {
    points: Vec<PopulationState>,
    provenance: Provenance,
    interp: Pchip,
}

#[cfg(feature = "serde")]
#[derive(serde::Serialize, serde::Deserialize)]
struct CurveData {
    provenance: Provenance,
    points: Vec<PopulationState>,
}

#[cfg(feature = "serde")]
impl TryFrom<CurveData> for SeparatrixCurve {
    type Error = Error;

    fn try_from(d: CurveData) -> Result<Self> {
        SeparatrixCurve::new(d.points, d.provenance)
    }
}

#[cfg(feature = "serde")]
impl From<SeparatrixCurve> for CurveData {
    fn from(c: SeparatrixCurve) -> Self {
        CurveData { provenance: c.provenance, points: c.points }
    }
}

impl SeparatrixCurve {
    /// Builds a curve from points with strictly increasing `n`.
    pub fn new(points: Vec<PopulationState>, provenance: Provenance) -> Result<Self> {
        for p in &points {
            p.check_nonnegative()?;
        }
        let xs = points.iter().map(|p| p.n).collect();
        let ys = points.iter().map(|p| p.w).collect();
        let interp = Pchip::new(xs, ys)
            .ok_or(Error::InvalidOptions("separatrix needs two or more points with increasing n"))?;
        Ok(SeparatrixCurve { points, provenance, interp })
    }

    pub fn points(&self) -> &[PopulationState] {
        &self.points
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `(n_min, n_max)` covered by the curve.
    pub fn n_range(&self) -> (f64, f64) {
        self.interp.x_range()
    }

    /// Minimal viable infected population at wild size `n`, read off the curve.
    pub fn w_of_n(&self, n: f64) -> Option<f64> {
        self.interp.eval(n)
    }

    /// True when `s` lies above the curve by more than `margin`.
    pub fn is_above(&self, s: PopulationState, margin: f64) -> Result<bool> {
        let w = self.w_of_n(s.n).ok_or(Error::OutsideCurve { n: s.n })?;
        Ok(s.w > w + margin)
    }

    /// No two vertices are strictly comparable in the cone order: along
    /// increasing `n`, `w` never decreases.
    pub fn is_unordered(&self) -> bool {
        self.points.windows(2).all(|w| w[0].n < w[1].n && w[0].w <= w[1].w)
    }

    /// Smallest distance from `s` to the polyline.
    pub fn distance_to(&self, s: PopulationState) -> f64 {
        self.points
            .windows(2)
            .map(|seg| point_segment_distance(s, seg[0], seg[1]))
            .fold(f64::INFINITY, libm::fmin)
    }
}

fn point_segment_distance(p: PopulationState, a: PopulationState, b: PopulationState) -> f64 {
    let (dx, dy) = (b.n - a.n, b.w - a.w);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.n - a.n) * dx + (p.w - a.w) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    hypot(p.n - (a.n + t * dx), p.w - (a.w + t * dy))
}

/// The two heteroclinic orbits leaving the saddle.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ManifoldPair {
    /// From `E_c` to the wild equilibrium `(n_sharp, 0)`.
    pub toward_en: Vec<PopulationState>,
    /// From `E_c` to the replacement equilibrium `(0, w_sharp)`.
    pub toward_ew: Vec<PopulationState>,
}

fn basin_options() -> IntegrationOptions {
    IntegrationOptions::default()
}

fn require_saddle(p: &ModelParameters) -> Result<EquilibriumSet> {
    let eq = equilibria(p)?;
    eq.saddle()?;
    Ok(eq)
}

/// Smallest `w` such that `(n0, w)` lies in the replacement basin, to
/// relative tolerance `tol`. Uses the default basin oracle.
pub fn minimal_viable_w(p: &ModelParameters, n0: f64, tol: f64) -> Result<f64> {
    minimal_viable_w_with(p, n0, tol, &basin_options())
}

/// [`minimal_viable_w`] with explicit integration options for the oracle.
pub fn minimal_viable_w_with(
    p: &ModelParameters,
    n0: f64,
    tol: f64,
    opts: &IntegrationOptions,
) -> Result<f64> {
    if !(n0.is_finite() && n0 >= 0.0) {
        return Err(Error::NegativeState { n: n0, w: 0.0 });
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidOptions("tolerance must lie in (0, 1)"));
    }
    opts.validate()?;
    let eq = require_saddle(p)?;
    // On the invariant infected axis any positive release succeeds.
    if n0 == 0.0 {
        return Ok(0.0);
    }
    let oracle = |w: f64| ode::settle(p, &eq, [n0, w], opts).map(|(label, _, _)| label);

    let mut lo = 0.0;
    let mut hi = eq.w_sharp;
    let mut doublings = 0;
    loop {
        match oracle(hi)? {
            BasinLabel::ToEW => break,
            BasinLabel::ToEN => {
                lo = hi;
                hi *= 2.0;
            }
            BasinLabel::Undecided => return Err(Error::Ambiguous { lo, hi }),
        }
        doublings += 1;
        if doublings > 64 {
            return Err(Error::NoSuccess { upper: hi });
        }
    }
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        match oracle(mid)? {
            BasinLabel::ToEW => hi = mid,
            BasinLabel::ToEN => lo = mid,
            BasinLabel::Undecided => {
                // Lingering at the saddle: refine on either side before giving up.
                let quarter = 0.25 * (hi - lo);
                match (oracle(mid - quarter)?, oracle(mid + quarter)?) {
                    (BasinLabel::ToEN, _) => lo = mid - quarter,
                    (_, BasinLabel::ToEW) => hi = mid + quarter,
                    _ => return Err(Error::Ambiguous { lo, hi }),
                }
            }
        }
    }
    Ok(hi)
}

/// Separatrix sampled by bisection at each `n` of `grid`.
pub fn separatrix_bisection(p: &ModelParameters, grid: &[f64], tol: f64) -> Result<SeparatrixCurve> {
    let mut ns: Vec<f64> = grid.to_vec();
    ns.sort_by(f64::total_cmp);
    ns.dedup();
    let mut points = Vec::with_capacity(ns.len());
    for n in ns {
        points.push(PopulationState::new(n, minimal_viable_w(p, n, tol)?));
    }
    SeparatrixCurve::new(points, Provenance::Bisection)
}

/// Upper end of the box explored by [`separatrix_backward`], as a multiple
/// of `n_sharp`.
pub const BACKWARD_N_EXTENT: f64 = 2.0;
/// Ceiling on `w` for the upper branch, as a multiple of `max(n_sharp, w_sharp)`.
pub const BACKWARD_W_EXTENT: f64 = 20.0;

/// Separatrix traced by integrating the time-reversed field from
/// `E_c ± δ v_s`, sampled every `step` individuals of arc length. Each branch
/// stops after `arc_budget` individuals of arc, on leaving
/// `[0, 2 n_sharp] × [0, 20 max(n_sharp, w_sharp)]`, or on reaching the
/// origin.
pub fn separatrix_backward(p: &ModelParameters, arc_budget: f64, step: f64) -> Result<SeparatrixCurve> {
    if !(arc_budget > 0.0 && step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidOptions("arc budget and step must be positive"));
    }
    let eq = equilibria(p)?;
    let (ec, stable, _) = saddle_directions(p)?;
    let delta = SEED_OFFSET * (ec.n + ec.w);
    let n_max = BACKWARD_N_EXTENT * eq.n_sharp;
    let w_max = BACKWARD_W_EXTENT * eq.scale();
    let near_origin = 1e-6 * eq.scale();

    let mut lower = trace_reversed(p, ec, [-stable[0], -stable[1]], delta, arc_budget, step, n_max, w_max, near_origin)?;
    let upper = trace_reversed(p, ec, stable, delta, arc_budget, step, n_max, w_max, near_origin)?;

    lower.reverse();
    let mut points = Vec::with_capacity(lower.len() + upper.len() + 1);
    let mut push = |s: PopulationState| {
        if points.last().is_none_or(|last: &PopulationState| s.n > last.n) {
            points.push(s);
        }
    };
    for s in lower {
        push(s);
    }
    push(ec);
    for s in upper {
        push(s);
    }
    SeparatrixCurve::new(points, Provenance::BackwardIntegration)
}

#[allow(clippy::too_many_arguments)]
fn trace_reversed(
    p: &ModelParameters,
    ec: PopulationState,
    dir: [f64; 2],
    delta: f64,
    arc_budget: f64,
    step: f64,
    n_max: f64,
    w_max: f64,
    near_origin: f64,
) -> Result<Vec<PopulationState>> {
    // Unit-speed reversed field: d(state)/ds = -F / |F|.
    let field = |y: [f64; 2]| {
        let f = field_unchecked(p, libm::fmax(y[0], 0.0), libm::fmax(y[1], 0.0));
        let norm = hypot(f[0], f[1]);
        if norm > 0.0 {
            [-f[0] / norm, -f[1] / norm]
        } else {
            [0.0, 0.0]
        }
    };
    let cfg = StepConfig { rtol: 1e-12, atol: 1e-9, max_step: step, clamp: false };
    let seed = [ec.n + delta * dir[0], ec.w + delta * dir[1]];
    let mut out = alloc::vec![PopulationState::from_array(seed)];
    let mut next_mark = step;
    let mut reached_origin = false;
    let inside = |y: [f64; 2]| y[0] >= 0.0 && y[1] >= 0.0 && y[0] <= n_max && y[1] <= w_max;

    solve(field, 0.0, seed, arc_budget, &cfg, |s| {
        while next_mark <= s.t1() {
            let y = s.eval(next_mark);
            if !inside(y) {
                return Flow::Stop;
            }
            out.push(PopulationState::from_array(y));
            next_mark += step;
        }
        if !inside(s.y1) {
            return Flow::Stop;
        }
        if s.y1[0] + s.y1[1] <= near_origin {
            reached_origin = true;
            return Flow::Stop;
        }
        Flow::Continue
    })?;
    if reached_origin {
        out.push(PopulationState::ORIGIN);
    }
    Ok(out)
}

/// Forward orbits from `E_c ± δ v_u` until they enter the capture balls of
/// the two attractors, recording every accepted step.
pub fn unstable_manifold(p: &ModelParameters) -> Result<ManifoldPair> {
    let eq = equilibria(p)?;
    let (ec, _, unstable) = saddle_directions(p)?;
    let delta = SEED_OFFSET * (ec.n + ec.w);
    let opts = IntegrationOptions { rel_tol: 1e-11, abs_tol: 1e-9, max_step: 1.0, ..basin_options() };
    let radius = opts.capture_factor * eq.scale();

    let branch = |sign: f64| -> Result<Vec<PopulationState>> {
        let seed = [ec.n + sign * delta * unstable[0], ec.w + sign * delta * unstable[1]];
        let mut out = alloc::vec![ec, PopulationState::from_array(seed)];
        let mut label = BasinLabel::Undecided;
        ode::flow(p, seed, 0.0, opts.t_max, &opts, |s| {
            out.push(PopulationState::from_array(s.y1));
            match capture_label(&eq, radius, s.y1) {
                Some(l) => {
                    label = l;
                    Flow::Stop
                }
                None => Flow::Continue,
            }
        })?;
        if label == BasinLabel::Undecided {
            return Err(Error::Ambiguous { lo: seed[0], hi: seed[1] });
        }
        Ok(out)
    };
    // The unstable direction has n > 0, w < 0, so +δ heads for the wild equilibrium.
    Ok(ManifoldPair { toward_en: branch(1.0)?, toward_ew: branch(-1.0)? })
}

/// Relative disagreement `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = libm::fmax(fabs(a), fabs(b));
    if scale == 0.0 {
        0.0
    } else {
        fabs(a - b) / scale
    }
}
