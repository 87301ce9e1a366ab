//! Randomized model checks driven by an explicit seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wolbachia_core::{
    integrate, jacobian, order_leq_cone, vector_field, IntegrationOptions, Matrix2, ModelParameters,
    PopulationState,
};

use crate::error::AppResult;
use crate::formats::{json, Format, Render};

#[derive(Debug, Clone, Serialize)]
pub struct PropertyResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest observed error measure (relative error or order violation).
    pub worst: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub seed: u64,
    pub passed: bool,
    pub properties: Vec<PropertyResult>,
}

impl Render for CheckReport {
    fn render(&self, format: Format) -> AppResult<Vec<u8>> {
        match format {
            Format::Json => Ok(json(self)),
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                for p in &self.properties {
                    w.serialize(p).map_err(|e| crate::error::AppError::Numerical(e.to_string()))?;
                }
                w.into_inner().map_err(|e| crate::error::AppError::Numerical(e.to_string()))
            }
        }
    }
}

/// Centered finite-difference Jacobian with steps kept inside the quadrant.
pub fn fd_jacobian(p: &ModelParameters, s: PopulationState) -> Matrix2 {
    let f = |n: f64, w: f64| vector_field(p, PopulationState::new(n, w)).expect("nonnegative state");
    let hn = (1e-5 * s.n.max(1.0)).min(0.5 * s.n);
    let hw = (1e-5 * s.w.max(1.0)).min(0.5 * s.w);
    let (np, nm) = (f(s.n + hn, s.w), f(s.n - hn, s.w));
    let (wp, wm) = (f(s.n, s.w + hw), f(s.n, s.w - hw));
    Matrix2::new(
        (np.0 - nm.0) / (2.0 * hn),
        (wp.0 - wm.0) / (2.0 * hw),
        (np.1 - nm.1) / (2.0 * hn),
        (wp.1 - wm.1) / (2.0 * hw),
    )
}

fn frobenius(m: &Matrix2) -> f64 {
    m.0.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative Frobenius distance between the analytic and difference Jacobians.
pub fn jacobian_error(p: &ModelParameters, s: PopulationState) -> f64 {
    let a = jacobian(p, s).expect("state off the origin");
    let b = fd_jacobian(p, s);
    let d = Matrix2::new(a.0[0][0] - b.0[0][0], a.0[0][1] - b.0[0][1], a.0[1][0] - b.0[1][0], a.0[1][1] - b.0[1][1]);
    frobenius(&d) / frobenius(&a)
}

/// Largest order violation between the orbits of `a <= b` sampled every
/// `dt` days up to `t_max`; zero or negative means the order held.
pub fn order_violation(p: &ModelParameters, a: PopulationState, b: PopulationState, t_max: f64, dt: f64) -> AppResult<f64> {
    let opts = IntegrationOptions { t_max, dense_output: true, ..Default::default() };
    let ta = integrate(p, a, &opts)?;
    let tb = integrate(p, b, &opts)?;
    let steps = (t_max / dt).round() as usize;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..=steps {
        let t = (k as f64 * dt).min(t_max);
        let (x, y) = match (ta.state_at(t), tb.state_at(t)) {
            (Some(x), Some(y)) => (x, y),
            _ => continue,
        };
        worst = worst.max(x.n - y.n).max(y.w - x.w);
    }
    Ok(worst)
}

/// Random ordered pair `a <= b` in `[0, 2 n_sharp] × [0, 2 w_sharp]`.
pub fn ordered_pair(rng: &mut impl Rng, p: &ModelParameters) -> (PopulationState, PopulationState) {
    let (ns, ws) = (p.n_sharp(), p.w_sharp());
    let a = PopulationState::new(rng.random_range(0.0..2.0 * ns), rng.random_range(0.0..2.0 * ws));
    let b = PopulationState::new(
        a.n + rng.random_range(0.0..0.3 * ns),
        (a.w - rng.random_range(0.0..0.3 * ws)).max(0.0),
    );
    debug_assert!(order_leq_cone(a, b));
    (a, b)
}

pub fn run(p: &ModelParameters, seed: u64, cases: usize) -> AppResult<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ns, ws) = (p.n_sharp(), p.w_sharp());
    let eps = 1e-6 * p.scale();

    let mut jac = PropertyResult { name: "jacobian_vs_finite_differences", cases, failures: 0, worst: 0.0 };
    let mut metz = PropertyResult { name: "cooperative_jacobian_is_metzler", cases, failures: 0, worst: 0.0 };
    for _ in 0..cases {
        let s = PopulationState::new(rng.random_range(1e-3..3.0 * ns), rng.random_range(1e-3..3.0 * ws));
        let e = jacobian_error(p, s);
        jac.worst = jac.worst.max(e);
        jac.failures += usize::from(e.is_nan() || e > 1e-6);
        let m = jacobian(p, s)?.cone_conjugate();
        metz.worst = metz.worst.max(m.0[0][1].min(0.0).abs()).max(m.0[1][0].min(0.0).abs());
        metz.failures += usize::from(!m.is_metzler());
    }

    let orbit_cases = cases.min(200);
    let mut mono = PropertyResult { name: "monotone_semiflow", cases: orbit_cases, failures: 0, worst: f64::NEG_INFINITY };
    let mut pos = PropertyResult { name: "positivity", cases: orbit_cases, failures: 0, worst: 0.0 };
    let opts = IntegrationOptions { t_max: 100.0, ..Default::default() };
    for _ in 0..orbit_cases {
        let (a, b) = ordered_pair(&mut rng, p);
        let v = order_violation(p, a, b, 60.0, 0.1)?;
        mono.worst = mono.worst.max(v);
        mono.failures += usize::from(v > eps);

        let traj = integrate(p, a, &opts)?;
        let low = traj.samples.iter().map(|s| s.state.n.min(s.state.w)).fold(0.0, f64::min);
        pos.worst = pos.worst.max(0.0 - low);
        pos.failures += usize::from(low < -opts.abs_tol);
    }

    let properties = vec![jac, metz, mono, pos];
    Ok(CheckReport { seed, passed: properties.iter().all(|p| p.failures == 0), properties })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_report() {
        let p = ModelParameters::WMELPOP;
        let a = run(&p, 7, 20).unwrap();
        let b = run(&p, 7, 20).unwrap();
        assert_eq!(json(&a), json(&b));
        assert!(a.passed, "{a:?}");
    }
}
