//! Dormand–Prince 5(4) stepper with free fourth-order dense output, for
//! autonomous planar systems.

use libm::{fabs, fmax, fmin, pow, sqrt};

use crate::error::{Error, Result};
use crate::model::PopulationState;


const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Shampine's dense output weights.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

type V2 = [f64; 2];

#[inline]
fn axpy(y: V2, terms: &[(f64, &V2)], h: f64) -> V2 {
    let mut out = y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Step-size control settings.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    /// Snap components in `[-atol, 0)` to zero and report leaving the
    /// quadrant for anything more negative.
    pub clamp: bool,
}

/// One accepted step with its interpolant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    pub y0: V2,
    pub y1: V2,
    rc: [V2; 4],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Interpolated state at `t` within `[t0, t0 + h]`.
    pub fn eval(&self, t: f64) -> V2 {
        if t == self.t1() {
            return self.y1;
        }
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        core::array::from_fn(|i| {
            self.y0[i]
                + th * (self.rc[0][i]
                    + th1 * (self.rc[1][i] + th * (self.rc[2][i] + th1 * self.rc[3][i])))
        })
    }

    pub fn state_at(&self, t: f64) -> PopulationState {
        PopulationState::from_array(self.eval(t))
    }
}

/// Callback verdict after each accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum End {
    Reached,
    Stopped,
    LeftDomain,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Solved {
    pub t: f64,
    pub y: V2,
    pub end: End,
}

fn err_norm(e: V2, y0: V2, y1: V2, cfg: &StepConfig) -> f64 {
    let mut acc = 0.0;
    for i in 0..2 {
        let sc = cfg.atol + cfg.rtol * fmax(fabs(y0[i]), fabs(y1[i]));
        let r = e[i] / sc;
        acc += r * r;
    }
    sqrt(acc / 2.0)
}

fn initial_step<F: Fn(V2) -> V2>(f: &F, y0: V2, f0: V2, span: f64, cfg: &StepConfig) -> f64 {
    let sc = |i: usize| cfg.atol + cfg.rtol * fabs(y0[i]);
    let d0 = sqrt(((y0[0] / sc(0)).powi2() + (y0[1] / sc(1)).powi2()) / 2.0);
    let d1 = sqrt(((f0[0] / sc(0)).powi2() + (f0[1] / sc(1)).powi2()) / 2.0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = fmin(h0, span);
    let y1 = axpy(y0, &[(1.0, &f0)], h0);
    let f1 = f(y1);
    let d2 = sqrt(
        (((f1[0] - f0[0]) / sc(0)).powi2() + ((f1[1] - f0[1]) / sc(1)).powi2()) / 2.0,
    ) / h0;
    let h1 = if fmax(d1, d2) <= 1e-15 {
        fmax(1e-6, h0 * 1e-3)
    } else {
        pow(0.01 / fmax(d1, d2), 1.0 / 5.0)
    };
    fmin(fmin(100.0 * h0, h1), fmin(span, cfg.max_step))
}

trait Sq {
    fn powi2(self) -> f64;
}

impl Sq for f64 {
    #[inline]
    fn powi2(self) -> f64 {
        self * self
    }
}

/// Integrates `y' = f(y)` from `t0` to `t_end`, landing exactly on `t_end`
/// unless `on_step` stops early. Deterministic: no state outside the
/// arguments influences the result.
pub(crate) fn solve<F, S>(
    f: F,
    t0: f64,
    y0: V2,
    t_end: f64,
    cfg: &StepConfig,
    mut on_step: S,
) -> Result<Solved>
where
    F: Fn(V2) -> V2,
    S: FnMut(&DenseStep) -> Flow,
{
    let mut t = t0;
    let mut y = y0;
    if t_end <= t0 {
        return Ok(Solved { t, y, end: End::Reached });
    }
    let mut k1 = f(y);
    let mut h = initial_step(&f, y, k1, t_end - t0, cfg);
    let mut reject_streak = false;

    loop {
        let remaining = t_end - t;
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        if h <= 16.0 * f64::EPSILON * fmax(fabs(t), 1.0) {
            return Err(Error::StepSizeUnderflow { t, last: PopulationState::from_array(y) });
        }

        let k2 = f(axpy(y, &[(A21, &k1)], h));
        let k3 = f(axpy(y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = f(axpy(y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = f(axpy(y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
        let k6 = f(axpy(y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
        let y1 = axpy(y, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)], h);
        let k7 = f(y1);

        let e = [
            h * (E1 * k1[0] + E3 * k3[0] + E4 * k4[0] + E5 * k5[0] + E6 * k6[0] + E7 * k7[0]),
            h * (E1 * k1[1] + E3 * k3[1] + E4 * k4[1] + E5 * k5[1] + E6 * k6[1] + E7 * k7[1]),
        ];
        let err = err_norm(e, y, y1, cfg);
        let finite = y1[0].is_finite() && y1[1].is_finite() && err.is_finite();

        if finite && err <= 1.0 {
            let t1 = if last { t_end } else { t + h };
            let mut y1 = y1;
            let mut k7 = k7;
            if cfg.clamp {
                let mut snapped = false;
                for v in y1.iter_mut() {
                    if *v < 0.0 {
                        if *v >= -cfg.atol {
                            *v = 0.0;
                            snapped = true;
                        } else {
                            return Ok(Solved { t, y, end: End::LeftDomain });
                        }
                    }
                }
                if snapped {
                    k7 = f(y1);
                }
            }
            let ydiff = [y1[0] - y[0], y1[1] - y[1]];
            let bspl = [h * k1[0] - ydiff[0], h * k1[1] - ydiff[1]];
            let rc3 = [ydiff[0] - h * k7[0] - bspl[0], ydiff[1] - h * k7[1] - bspl[1]];
            let rc4 = [
                h * (D1 * k1[0] + D3 * k3[0] + D4 * k4[0] + D5 * k5[0] + D6 * k6[0] + D7 * k7[0]),
                h * (D1 * k1[1] + D3 * k3[1] + D4 * k4[1] + D5 * k5[1] + D6 * k6[1] + D7 * k7[1]),
            ];
            let step = DenseStep { t0: t, h: t1 - t, y0: y, y1, rc: [ydiff, bspl, rc3, rc4] };
            t = t1;
            y = y1;
            k1 = k7;
            if on_step(&step) == Flow::Stop {
                return Ok(Solved { t, y, end: End::Stopped });
            }
            if last {
                return Ok(Solved { t, y, end: End::Reached });
            }
            let mut fac = if err == 0.0 { FAC_MAX } else { SAFETY * pow(err, -0.2) };
            fac = fmin(FAC_MAX, fmax(FAC_MIN, fac));
            if reject_streak {
                fac = fmin(fac, 1.0);
            }
            reject_streak = false;
            h = fmin(h * fac, cfg.max_step);
        } else {
            let fac = if finite { fmax(FAC_MIN, SAFETY * pow(err, -0.2)) } else { FAC_MIN };
            h *= fac;
            reject_streak = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CFG: StepConfig = StepConfig { rtol: 1e-10, atol: 1e-12, max_step: 1.0, clamp: false };

    #[test]
    fn exponential_decay_is_accurate() {
        let out = solve(|y| [-y[0], -2.0 * y[1]], 0.0, [1.0, 1.0], 3.0, &CFG, |_| Flow::Continue)
            .unwrap();
        assert_eq!(out.end, End::Reached);
        assert_eq!(out.t, 3.0);
        assert!((out.y[0] - libm::exp(-3.0)).abs() < 1e-9);
        assert!((out.y[1] - libm::exp(-6.0)).abs() < 1e-9);
    }

    #[test]
    fn dense_output_interpolates_harmonic_oscillator() {
        let mut worst: f64 = 0.0;
        solve(|y| [y[1], -y[0]], 0.0, [0.0, 1.0], 10.0, &CFG, |s| {
            for k in 0..=8 {
                let t = s.t0 + s.h * k as f64 / 8.0;
                let y = s.eval(t);
                worst = worst.max((y[0] - libm::sin(t)).abs());
            }
            Flow::Continue
        })
        .unwrap();
        assert!(worst < 1e-7, "worst interpolation error {worst}");
    }

    #[test]
    fn callback_can_stop() {
        let out = solve(|_| [1.0, 0.0], 0.0, [0.0, 0.0], 100.0, &CFG, |s| {
            if s.y1[0] > 5.0 {
                Flow::Stop
            } else {
                Flow::Continue
            }
        })
        .unwrap();
        assert_eq!(out.end, End::Stopped);
        assert!(out.y[0] > 5.0 && out.t < 100.0);
    }

    #[test]
    fn clamp_reports_leaving_quadrant() {
        let cfg = StepConfig { clamp: true, ..CFG };
        let out = solve(|_| [-1.0, 0.0], 0.0, [1.0, 0.0], 5.0, &cfg, |_| Flow::Continue).unwrap();
        assert_eq!(out.end, End::LeftDomain);
        assert!(out.y[0] >= 0.0);
    }
}
