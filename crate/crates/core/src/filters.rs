//! Regularizing autocorrelation filters.
//!
//! The filter is the normalized one-dimensional autocorrelation of a base
//! kernel,
//!
//! ```text
//! Omega_w(k) = N^-1 * integral omega(k') omega(k' + k/w) dk',   N = integral omega(k')^2 dk'
//! ```
//!
//! which guarantees `Omega_w(0) = 1`, `|Omega_w| <= 1`, evenness, and a
//! nonnegative Fourier transform (autocorrelation theorem). The default base
//! kernel is the quartic exponential `omega(k) = exp(-k^4)`.

use rayon::prelude::*;

use crate::error::{AqqpError, Result};
use crate::num::Real;
use crate::quad::{adaptive_gauss_legendre, simpson_uniform, UniformTable};

/// Smallest accepted filter width. Below this the filter is so narrow in `k`
/// that the memoization grid undersamples it.
pub const MIN_WIDTH: f64 = 0.1;

/// Spacing of the internal memoization grid in `k`.
pub const GRID_SPACING: f64 = 0.001;

/// Base kernel of the autocorrelation filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BaseKernel {
    /// `omega(k) = exp(-k^4)` (the default; the only kernel with acceptance
    /// coverage).
    Quartic,
    /// `omega(k) = exp(-k^(2p))`, `p >= 2`.
    EvenPower(u32),
}

impl BaseKernel {
    fn exponent(self) -> i32 {
        match self {
            BaseKernel::Quartic => 4,
            BaseKernel::EvenPower(p) => 2 * p as i32,
        }
    }

    /// Kernel value `omega(k)`.
    pub fn eval<R: Real>(self, k: R) -> R {
        (-k.powi(self.exponent())).exp()
    }

    /// Half-width beyond which the kernel is negligible at double precision.
    pub fn support<R: Real>(self) -> R {
        // exp(-s^(2p)) < 1e-112 at s = 4 for the quartic; scale other
        // exponents to the same tail mass.
        R::c(256f64.powf(1.0 / self.exponent() as f64))
    }

    pub fn label(self) -> String {
        match self {
            BaseKernel::Quartic => "quartic".to_string(),
            BaseKernel::EvenPower(p) => format!("evenpower{p}"),
        }
    }
}

/// A constructed filter: immutable, cheap to evaluate, safe to share across
/// threads.
#[derive(Debug, Clone)]
pub struct FilterSpec<R> {
    kernel: BaseKernel,
    width: R,
    norm_constant: R,
    cutoff: R,
    /// `Omega_w` on the uniform grid `k = 0, dk, 2 dk, ...` out to the full
    /// autocorrelation support (beyond `cutoff` the values are retained for
    /// Simpson sums but `eval` reports 0 there).
    table: UniformTable<R>,
}

impl<R: Real> FilterSpec<R> {
    pub fn kernel(&self) -> BaseKernel {
        self.kernel
    }

    pub fn width(&self) -> R {
        self.width
    }

    /// Normalization constant `N = integral omega^2`.
    pub fn norm_constant(&self) -> R {
        self.norm_constant
    }

    /// `K_max`: beyond this `|k|` the filter is treated as exactly zero, and
    /// `exp(k^2/2) Omega_w(k)` has decayed 12 orders of magnitude below its
    /// maximum, so pattern-function integrals over `[0, K_max]` converge.
    pub fn cutoff(&self) -> R {
        self.cutoff
    }
}

/// Builds a filter of the given width with the quartic base kernel.
pub fn make_filter<R: Real>(width: R, rel_tol: R) -> Result<FilterSpec<R>> {
    make_filter_with_kernel(BaseKernel::Quartic, width, rel_tol)
}

/// Builds a filter with an explicit base kernel.
pub fn make_filter_with_kernel<R: Real>(
    kernel: BaseKernel,
    width: R,
    rel_tol: R,
) -> Result<FilterSpec<R>> {
    if !(width > R::zero()) {
        return Err(AqqpError::InvalidArgument(format!(
            "filter width must be positive, got {width}"
        )));
    }
    if width < R::c(MIN_WIDTH) {
        return Err(AqqpError::InvalidArgument(format!(
            "filter width {width} below the supported minimum {MIN_WIDTH}"
        )));
    }
    if !(rel_tol > R::zero() && rel_tol < R::one()) {
        return Err(AqqpError::InvalidArgument(format!(
            "rel_tol must be in (0, 1), got {rel_tol}"
        )));
    }
    if let BaseKernel::EvenPower(p) = kernel {
        if p < 2 {
            return Err(AqqpError::InvalidArgument(format!(
                "base kernel exponent 2p must be >= 4, got p={p}"
            )));
        }
    }

    let support: R = kernel.support();
    let norm = adaptive_gauss_legendre(
        &|k: R| {
            let v = kernel.eval(k);
            v * v
        },
        -support,
        support,
        rel_tol,
        8,
    )?;

    // The product omega(k') omega(k' + k/w) lives on |k| <= 2 * support * w.
    let dk = R::c(GRID_SPACING);
    let k_support = support * width * R::c(2.0);
    let n_nodes = (k_support / dk).ceil().to_usize().unwrap() + 1;

    let values: Vec<Result<R>> = (0..n_nodes)
        .into_par_iter()
        .map(|i| {
            let shift = dk * R::from_usize(i).unwrap() / width;
            if shift >= support * R::c(2.0) {
                return Ok(R::zero());
            }
            let lo = -support;
            let hi = support - shift;
            let v = adaptive_gauss_legendre(
                &|kp: R| kernel.eval(kp) * kernel.eval(kp + shift),
                lo,
                hi,
                rel_tol,
                8,
            )?;
            Ok(v / norm)
        })
        .collect();
    let values: Vec<R> = values.into_iter().collect::<Result<_>>()?;

    // Cutoff from the log-scale decay of exp(k^2/2) * Omega(k); log space
    // avoids overflow for wide filters and f32.
    let thresh_ln = R::c(1e-12).max(R::epsilon() * R::c(4.0)).ln();
    let log_growth: Vec<R> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let k = dk * R::from_usize(i).unwrap();
            if v.abs() > R::zero() {
                k * k * R::c(0.5) + v.abs().ln()
            } else {
                R::neg_infinity()
            }
        })
        .collect();
    let lg_max = log_growth
        .iter()
        .cloned()
        .fold(R::neg_infinity(), R::max);
    let cut_idx = log_growth
        .iter()
        .rposition(|&lg| lg >= lg_max + thresh_ln)
        .unwrap_or(0)
        .max(8);
    let cutoff = dk * R::from_usize(cut_idx.min(n_nodes - 1)).unwrap();

    Ok(FilterSpec {
        kernel,
        width,
        norm_constant: norm,
        cutoff,
        table: UniformTable {
            x0: R::zero(),
            h: dk,
            values,
        },
    })
}

/// Evaluates `Omega_w(k)`. Even in `k`; exactly zero beyond the cutoff.
pub fn eval_filter<R: Real>(f: &FilterSpec<R>, k: R) -> R {
    let a = k.abs();
    if a > f.cutoff {
        return R::zero();
    }
    f.table.eval(a)
}

/// `(1/2pi) * integral Omega_w(k) exp(i k x) dk` on a grid of `x` values.
///
/// By the autocorrelation theorem this is a nonnegative function of `x` (up
/// to quadrature error); the nonnegativity check backs the claim that the
/// filter itself cannot fake negativities.
pub fn filter_fourier_transform<R: Real>(f: &FilterSpec<R>, x_grid: &[R]) -> Vec<R> {
    let (values, h) = simpson_slice(f);
    x_grid
        .iter()
        .map(|&x| {
            let integrand: Vec<R> = values
                .iter()
                .enumerate()
                .map(|(i, &om)| {
                    let k = h * R::from_usize(i).unwrap();
                    om * (k * x).cos()
                })
                .collect();
            simpson_uniform(&integrand, h) / R::PI()
        })
        .collect()
}

/// Filter values on `[0, K_max]` padded to an odd node count for Simpson.
pub(crate) fn simpson_slice<R: Real>(f: &FilterSpec<R>) -> (&[R], R) {
    let mut m = (f.cutoff / f.table.h).round().to_usize().unwrap();
    if m % 2 == 1 {
        m += 1;
    }
    let m = m.min(f.table.values.len() - 1);
    let m = if m % 2 == 1 { m - 1 } else { m };
    (&f.table.values[..=m], f.table.h)
}
