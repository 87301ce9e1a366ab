//! Just enough 2×2 linear algebra for phase-plane work.

use libm::{fabs, hypot, sqrt};

/// Row-major real 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix2(pub [[f64; 2]; 2]);

/// Spectrum of a 2×2 real matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Spectrum {
    /// Two real eigenvalues, `hi >= lo`.
    Real { hi: f64, lo: f64 },
    /// A complex-conjugate pair `re ± i·im`, `im > 0`.
    Complex { re: f64, im: f64 },
}

impl Matrix2 {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Matrix2([[a, b], [c, d]])
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    /// Conjugation `D M D` with `D = diag(1, -1)`: flips the sign of both
    /// off-diagonal entries.
    pub fn cone_conjugate(&self) -> Self {
        let [[a, b], [c, d]] = self.0;
        Matrix2::new(a, -b, -c, d)
    }

    /// True when both off-diagonal entries are nonnegative.
    pub fn is_metzler(&self) -> bool {
        self.0[0][1] >= 0.0 && self.0[1][0] >= 0.0
    }

    /// Eigenvalues. Triangular matrices return their diagonal verbatim so
    /// closed-form spectra are reproduced to the last bit.
    pub fn spectrum(&self) -> Spectrum {
        let [[a, b], [c, d]] = self.0;
        if b == 0.0 || c == 0.0 {
            let (hi, lo) = if a >= d { (a, d) } else { (d, a) };
            return Spectrum::Real { hi, lo };
        }
        let half_tr = 0.5 * (a + d);
        let half_diff = 0.5 * (a - d);
        let disc = half_diff * half_diff + b * c;
        if disc >= 0.0 {
            let root = sqrt(disc);
            // Avoid cancellation: compute the larger-magnitude root first.
            let big = if half_tr >= 0.0 { half_tr + root } else { half_tr - root };
            let det = self.det();
            let small = if big != 0.0 { det / big } else { half_tr - root };
            let (hi, lo) = if big >= small { (big, small) } else { (small, big) };
            Spectrum::Real { hi, lo }
        } else {
            Spectrum::Complex { re: half_tr, im: sqrt(-disc) }
        }
    }

    /// Unit eigenvector for a real eigenvalue, oriented so the first
    /// nonzero component is positive.
    pub fn eigenvector(&self, lambda: f64) -> [f64; 2] {
        let [[a, b], [c, d]] = self.0;
        // Rows of (M - λI) are orthogonal to the eigenvector; take the
        // better-conditioned one.
        let r1 = [a - lambda, b];
        let r2 = [c, d - lambda];
        let n1 = hypot(r1[0], r1[1]);
        let n2 = hypot(r2[0], r2[1]);
        let v = if n1 == 0.0 && n2 == 0.0 {
            [1.0, 0.0]
        } else if n1 >= n2 {
            [-r1[1], r1[0]]
        } else {
            [-r2[1], r2[0]]
        };
        let norm = hypot(v[0], v[1]);
        let mut v = [v[0] / norm, v[1] / norm];
        let lead = if fabs(v[0]) > 0.0 { v[0] } else { v[1] };
        if lead < 0.0 {
            v = [-v[0], -v[1]];
        }
        v
    }
}
