//! Shared numerics: composite Gauss-Legendre quadrature with panel doubling,
//! Simpson's rule on a fixed grid, and cubic interpolation on uniform grids.

use crate::error::{AqqpError, Result};
use crate::num::Real;

/// 16-point Gauss-Legendre abscissae (positive half) on [-1, 1].
const GL16_X: [f64; 8] = [
    0.095_012_509_837_637_45,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_37,
    0.617_876_244_402_643_8,
    0.755_404_408_355_003,
    0.865_631_202_387_831_8,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
/// Matching weights.
const GL16_W: [f64; 8] = [
    0.189_450_610_455_068_6,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_62,
    0.149_595_988_816_576_76,
    0.124_628_971_255_534_03,
    0.095_158_511_682_492_59,
    0.062_253_523_938_647_706,
    0.027_152_459_411_754_037,
];

/// Composite 16-point Gauss-Legendre over `[a, b]` split into `panels` panels.
pub fn gauss_legendre<R: Real, F: Fn(R) -> R>(f: &F, a: R, b: R, panels: usize) -> R {
    let width = (b - a) / R::from_usize(panels).unwrap();
    let half = width * R::c(0.5);
    let mut total = R::zero();
    for p in 0..panels {
        let mid = a + width * R::from_usize(p).unwrap() + half;
        let mut acc = R::zero();
        for i in 0..8 {
            let dx = half * R::c(GL16_X[i]);
            acc = acc + R::c(GL16_W[i]) * (f(mid + dx) + f(mid - dx));
        }
        total = total + acc * half;
    }
    total
}

/// Panel-doubling Gauss-Legendre: doubles the panel count until the relative
/// change drops below `rel_tol`, starting from `panels0`.
pub fn adaptive_gauss_legendre<R: Real, F: Fn(R) -> R>(
    f: &F,
    a: R,
    b: R,
    rel_tol: R,
    panels0: usize,
) -> Result<R> {
    let mut panels = panels0.max(1);
    let mut prev = gauss_legendre(f, a, b, panels);
    for _ in 0..16 {
        panels *= 2;
        let cur = gauss_legendre(f, a, b, panels);
        let scale = cur.abs().max(prev.abs()).max(R::min_positive_value());
        if (cur - prev).abs() <= rel_tol * scale {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(AqqpError::Convergence(format!(
        "Gauss-Legendre quadrature did not reach rel_tol={} within panel budget",
        rel_tol.to_f64_lossy()
    )))
}

/// Simpson's rule over uniformly spaced samples (`values.len()` must be odd
/// and >= 3; `h` is the grid spacing).
pub fn simpson_uniform<R: Real>(values: &[R], h: R) -> R {
    assert!(values.len() >= 3 && values.len() % 2 == 1, "Simpson needs an odd sample count >= 3");
    let mut s4 = R::zero();
    let mut s2 = R::zero();
    for (i, &v) in values.iter().enumerate().skip(1).take(values.len() - 2) {
        if i % 2 == 1 {
            s4 = s4 + v;
        } else {
            s2 = s2 + v;
        }
    }
    (values[0] + *values.last().unwrap() + R::c(4.0) * s4 + R::c(2.0) * s2) * h / R::c(3.0)
}

/// Uniform-grid table with 4-point (cubic Lagrange) interpolation.
///
/// Nodes are `x_i = x0 + i*h`. Evaluation outside `[x0, x0 + (n-1) h]` is the
/// caller's responsibility.
#[derive(Debug, Clone)]
pub struct UniformTable<R> {
    pub x0: R,
    pub h: R,
    pub values: Vec<R>,
}

impl<R: Real> UniformTable<R> {
    pub fn x_last(&self) -> R {
        self.x0 + self.h * R::from_usize(self.values.len() - 1).unwrap()
    }

    /// Cubic Lagrange interpolation on the stencil `i-1..=i+2`, clamped at the
    /// table edges.
    pub fn eval(&self, x: R) -> R {
        let n = self.values.len();
        debug_assert!(n >= 4);
        let t = (x - self.x0) / self.h;
        let mut i = t.floor().to_usize().unwrap_or(0);
        if i > n - 2 {
            i = n - 2;
        }
        // stencil start, clamped so all four nodes exist
        let s = i.saturating_sub(1).min(n - 4);
        let u = t - R::from_usize(s).unwrap();
        let v = &self.values[s..s + 4];
        let one = R::one();
        let two = R::c(2.0);
        let three = R::c(3.0);
        let sixth = R::c(1.0 / 6.0);
        let half = R::c(0.5);
        // Lagrange basis on nodes 0,1,2,3
        let l0 = -(u - one) * (u - two) * (u - three) * sixth;
        let l1 = u * (u - two) * (u - three) * half;
        let l2 = -u * (u - one) * (u - three) * half;
        let l3 = u * (u - one) * (u - two) * sixth;
        v[0] * l0 + v[1] * l1 + v[2] * l2 + v[3] * l3
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_gaussian() {
        let v = adaptive_gauss_legendre(&|k: f64| (-k * k).exp(), -8.0, 8.0, 1e-12, 4).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn simpson_matches_polynomial() {
        // x^3 over [0,2] = 4; Simpson is exact for cubics.
        let h = 0.25;
        let vals: Vec<f64> = (0..9).map(|i| (i as f64 * h).powi(3)).collect();
        assert!((simpson_uniform(&vals, h) - 4.0).abs() < 1e-13);
    }

    #[test]
    fn cubic_interp_reproduces_cubic() {
        let h = 0.1;
        let values: Vec<f64> = (0..50).map(|i| {
            let x = i as f64 * h;
            1.0 - 2.0 * x + 0.5 * x * x - 0.25 * x * x * x
        }).collect();
        let tab = UniformTable { x0: 0.0, h, values };
        for &x in &[0.0, 0.03, 1.234, 3.999, 4.85] {
            let expect = 1.0 - 2.0 * x + 0.5 * x * x - 0.25 * x * x * x;
            assert!((tab.eval(x) - expect).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn convergence_error_surfaces() {
        // Oscillation far below any reachable panel resolution.
        let f = |x: f64| (x * 1e12).sin() * 1e6;
        let r = adaptive_gauss_legendre(&f, 0.0, 1.0, 1e-14, 1);
        assert!(r.is_err());
    }
}
