//! Pattern function evaluation.
//!
//! The sampling estimator averages a pattern function over measured
//! quadrature values. In cosine form (the integrand is even),
//!
//! ```text
//! f(x) = (1/pi) * integral_0^Kmax exp(k^2/2) Omega_w(k) cos(k x) dk,  x = j_sample - j_phi
//! ```
//!
//! evaluated once on a uniform displacement grid and interpolated afterwards.
//! Fixed integration grids keep the table bit-for-bit reproducible.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{AqqpError, Result};
use crate::filters::{self, FilterSpec};
use crate::num::Real;
use crate::quad::{simpson_uniform, UniformTable};

/// Default displacement half-range.
pub const DEFAULT_X_MAX: f64 = 15.0;
/// Default displacement grid spacing.
pub const DEFAULT_SPACING: f64 = 0.005;

/// Precomputed pattern function on a displacement grid.
#[derive(Debug, Clone)]
pub struct PatternTable<R> {
    filter: FilterSpec<R>,
    table: UniformTable<R>,
    x_max: R,
}

impl<R: Real> PatternTable<R> {
    pub fn filter(&self) -> &FilterSpec<R> {
        &self.filter
    }

    pub fn width(&self) -> R {
        self.filter.width()
    }

    pub fn x_max(&self) -> R {
        self.x_max
    }

    pub fn spacing(&self) -> R {
        self.table.h
    }

    /// Largest absolute tabulated value.
    pub fn max_abs(&self) -> R {
        self.table
            .values
            .iter()
            .fold(R::zero(), |m, &v| m.max(v.abs()))
    }

    /// Grid values (displacements `0, h, 2h, ...`; the function is even).
    pub fn values(&self) -> &[R] {
        &self.table.values
    }
}

/// Tabulates the pattern function for the given filter.
pub fn build_pattern_table<R: Real>(
    filter: &FilterSpec<R>,
    x_max: R,
    spacing: R,
) -> Result<PatternTable<R>> {
    if !(x_max >= R::c(12.0)) {
        return Err(AqqpError::InvalidArgument(format!(
            "x_max must be >= 12 to cover the sample range, got {x_max}"
        )));
    }
    if !(spacing > R::zero() && spacing <= R::c(0.01)) {
        return Err(AqqpError::InvalidArgument(format!(
            "spacing must be in (0, 0.01], got {spacing}"
        )));
    }

    // k-grid: fine enough both for the integrand structure and for the
    // fastest oscillation cos(k * x_max).
    let (omega, dk_filter) = filter_integrand(filter);
    let dk_target = R::c(0.002).min(R::c(2.0) * R::PI() / (R::c(100.0) * x_max));
    let stride = (dk_target / dk_filter).floor().to_usize().unwrap().max(1);
    // subsample the filter grid at a fixed stride; keep an odd node count
    let mut nodes: Vec<(R, R)> = omega
        .iter()
        .enumerate()
        .step_by(stride)
        .map(|(i, &g)| (dk_filter * R::from_usize(i).unwrap(), g))
        .collect();
    if nodes.len().is_multiple_of(2) {
        nodes.pop();
    }
    if nodes.len() < 3 {
        return Err(AqqpError::Convergence(
            "filter support too narrow for the pattern integration grid".into(),
        ));
    }
    let dk = dk_filter * R::from_usize(stride).unwrap();

    let n_x = (x_max / spacing).ceil().to_usize().unwrap() + 1;
    let inv_pi = R::PI().recip();
    let values: Vec<R> = (0..n_x)
        .into_par_iter()
        .map(|i| {
            let x = spacing * R::from_usize(i).unwrap();
            let integrand: Vec<R> = nodes.iter().map(|&(k, g)| g * (k * x).cos()).collect();
            simpson_uniform(&integrand, dk) * inv_pi
        })
        .collect();

    Ok(PatternTable {
        filter: filter.clone(),
        table: UniformTable {
            x0: R::zero(),
            h: spacing,
            values,
        },
        x_max,
    })
}

/// `exp(k^2/2) Omega(k)` on the filter's memo grid up to the cutoff, plus the
/// grid spacing. Shared with the analytic-oracle quadratures in `states`.
pub(crate) fn filter_integrand<R: Real>(filter: &FilterSpec<R>) -> (Vec<R>, R) {
    let (om, h) = filters::simpson_slice(filter);
    let vals = om
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let k = h * R::from_usize(i).unwrap();
            (k * k * R::c(0.5)).exp() * v
        })
        .collect();
    (vals, h)
}

/// Pattern value for a sample at grid point `j_phi`; depends only on the
/// displacement `j_sample - j_phi`.
pub fn eval_pattern<R: Real>(table: &PatternTable<R>, j_sample: R, j_phi: R) -> Result<R> {
    let x = (j_sample - j_phi).abs();
    if x > table.x_max {
        return Err(AqqpError::DisplacementOutOfRange {
            displacement: x.to_f64_lossy(),
            x_max: table.x_max.to_f64_lossy(),
        });
    }
    Ok(table.table.eval(x))
}

/// Writes the table to the flat CSV cache format: one `#`-prefixed header
/// line with the construction parameters, then `x,value` rows.
pub fn write_cache<R: Real, W: Write>(table: &PatternTable<R>, mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "# aqqp-pattern kernel={} w={} x_max={} spacing={}",
        table.filter.kernel().label(),
        table.width().to_f64_lossy(),
        table.x_max.to_f64_lossy(),
        table.spacing().to_f64_lossy(),
    )?;
    writeln!(out, "x,value")?;
    for (i, v) in table.table.values.iter().enumerate() {
        let x = table.spacing() * R::from_usize(i).unwrap();
        writeln!(out, "{},{}", x.to_f64_lossy(), v.to_f64_lossy())?;
    }
    Ok(())
}

/// Reads a cached table back. The filter is rebuilt from the header
/// parameters; cached values are trusted as written.
pub fn read_cache<R: Real, B: BufRead>(input: B, rel_tol: R) -> Result<PatternTable<R>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err("empty cache file"))?
        .map_err(io_err)?;
    let mut kernel = None;
    let mut width = None;
    let mut x_max = None;
    let mut spacing = None;
    for tok in header.trim_start_matches('#').split_whitespace() {
        if let Some((key, val)) = tok.split_once('=') {
            match key {
                "kernel" => kernel = Some(val.to_string()),
                "w" => width = val.parse::<f64>().ok(),
                "x_max" => x_max = val.parse::<f64>().ok(),
                "spacing" => spacing = val.parse::<f64>().ok(),
                _ => {}
            }
        }
    }
    let (width, x_max, spacing) = match (width, x_max, spacing) {
        (Some(w), Some(x), Some(s)) => (w, x, s),
        _ => return Err(parse_err("cache header missing parameters")),
    };
    if kernel.as_deref() != Some("quartic") {
        return Err(parse_err("only quartic-kernel caches are supported"));
    }
    let filter = filters::make_filter(R::c(width), rel_tol)?;
    let mut values = Vec::new();
    for line in lines {
        let line = line.map_err(io_err)?;
        let line = line.trim();
        if line.is_empty() || line == "x,value" || line.starts_with('#') {
            continue;
        }
        let (_, v) = line
            .split_once(',')
            .ok_or_else(|| parse_err("malformed cache row"))?;
        values.push(R::c(v.trim().parse::<f64>().map_err(|e| {
            parse_err(&format!("bad cache value: {e}"))
        })?));
    }
    if values.len() < 4 {
        return Err(parse_err("cache holds too few rows"));
    }
    Ok(PatternTable {
        filter,
        table: UniformTable {
            x0: R::zero(),
            h: R::c(spacing),
            values,
        },
        x_max: R::c(x_max),
    })
}

fn parse_err(msg: &str) -> AqqpError {
    AqqpError::Parse {
        path: "<pattern cache>".into(),
        message: msg.into(),
    }
}

fn io_err(e: std::io::Error) -> AqqpError {
    AqqpError::Io {
        path: "<pattern cache>".into(),
        source: e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::make_filter;

    fn table(w: f64) -> PatternTable<f64> {
        let f = make_filter(w, 1e-9).unwrap();
        build_pattern_table(&f, 15.0, 0.005).unwrap()
    }

    #[test]
    fn central_value_positive_and_matches_oracle() {
        let t = table(1.0);
        let f0 = eval_pattern(&t, 0.0, 0.0).unwrap();
        assert!(f0 > 0.0);
        let oracle = crate::oracle::pattern_oracle(1.0, &[0.0])[0];
        assert!((f0 - oracle).abs() < 1e-7, "{f0} vs {oracle}");
    }

    #[test]
    fn even_in_displacement() {
        let t = table(1.1);
        for &x in &[0.3, 1.7, 4.2] {
            let a = eval_pattern(&t, x, 0.0).unwrap();
            let b = eval_pattern(&t, -x, 0.0).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn depends_only_on_difference() {
        let t = table(1.1);
        let a = eval_pattern(&t, 1.3, 0.3).unwrap();
        let b = eval_pattern(&t, 2.0, 1.0).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn off_grid_matches_direct_quadrature() {
        let t = table(1.1);
        let xs = [0.1234, 2.7177, 5.5551];
        let oracle = crate::oracle::pattern_oracle(1.1, &xs);
        let budget = 1e-6 * t.max_abs();
        for (&x, &o) in xs.iter().zip(&oracle) {
            let v = eval_pattern(&t, x, 0.0).unwrap();
            assert!((v - o).abs() < budget, "x={x}: {v} vs {o}");
        }
    }

    #[test]
    fn oscillation_amplitude_nondecreasing_in_width() {
        let maxes: Vec<f64> = [0.5, 1.0, 2.0].iter().map(|&w| table(w).max_abs()).collect();
        assert!(maxes[0] <= maxes[1] && maxes[1] <= maxes[2], "{maxes:?}");
    }

    #[test]
    fn decays_toward_grid_edge() {
        for &w in &[1.1, 2.0] {
            let t = table(w);
            let edge = eval_pattern(&t, 15.0, 0.0).unwrap().abs();
            assert!(edge < 1e-3 * t.max_abs(), "w={w}: edge {edge}");
        }
    }

    #[test]
    fn small_width_limit_approaches_filter_transform() {
        // For narrow filters exp(k^2/2) ~ 1 over the support, so the pattern
        // function approaches the (nonnegative) Fourier transform of Omega.
        let dev = |w: f64| {
            let f = make_filter(w, 1e-9).unwrap();
            let t = build_pattern_table(&f, 15.0, 0.005).unwrap();
            let grid: Vec<f64> = (0..=120).map(|i| i as f64 * 0.05).collect();
            let ft = crate::filters::filter_fourier_transform(&f, &grid);
            grid.iter()
                .zip(&ft)
                .map(|(&x, &v)| (eval_pattern(&t, x, 0.0).unwrap() - v).abs())
                .fold(0.0f64, f64::max)
        };
        assert!(dev(0.1) < dev(0.2));
    }

    #[test]
    fn out_of_range_displacement_errors() {
        let t = table(1.0);
        assert!(matches!(
            eval_pattern(&t, 20.0, 0.0),
            Err(AqqpError::DisplacementOutOfRange { .. })
        ));
    }

    #[test]
    fn rejects_bad_grid_parameters() {
        let f = make_filter(1.0, 1e-9).unwrap();
        assert!(build_pattern_table(&f, 10.0, 0.005).is_err());
        assert!(build_pattern_table(&f, 15.0, 0.02).is_err());
    }

    #[test]
    fn cache_round_trip() {
        let t = table(1.1);
        let mut buf = Vec::new();
        write_cache(&t, &mut buf).unwrap();
        let back: PatternTable<f64> = read_cache(&buf[..], 1e-9).unwrap();
        assert_eq!(back.values().len(), t.values().len());
        for (a, b) in t.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
