//! Direct sampling of the quadrature quasiprobability.
//!
//! The estimate at each grid point is the empirical mean of the pattern
//! function over the measured samples, with the pointwise standard error
//! `empirical std / sqrt(N)`. The significance functional is the most
//! negative ratio `p / se` over the grid.
//!
//! All per-grid-point accumulation uses exactly rounded summation
//! ([`crate::sums`]), so results are bitwise independent of sample order,
//! dataset splitting, and worker count.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{AqqpError, Result};
use crate::filters::make_filter;
use crate::num::Real;
use crate::pattern::{build_pattern_table, eval_pattern, PatternTable};
use crate::sums::ExactSum;

/// Provenance attached to a dataset.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct DatasetMeta {
    pub source: Option<String>,
    pub calibration_id: Option<String>,
    pub efficiency: Option<f64>,
    pub n_atoms: Option<u64>,
}

/// Normalized quadrature samples (ground-state standard deviation = 1).
#[derive(Debug, Clone)]
pub struct QuadratureDataset<R> {
    samples: Vec<R>,
    angle: Option<R>,
    meta: DatasetMeta,
}

impl<R: Real> QuadratureDataset<R> {
    pub fn new(samples: Vec<R>, angle: Option<R>, meta: DatasetMeta) -> Result<Self> {
        if samples.is_empty() {
            return Err(AqqpError::InvalidArgument("empty sample set".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(AqqpError::InvalidArgument(
                "samples must be finite (no NaN/Inf)".into(),
            ));
        }
        Ok(QuadratureDataset {
            samples,
            angle,
            meta,
        })
    }

    pub fn samples(&self) -> &[R] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn angle(&self) -> Option<R> {
        self.angle
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn sample_variance(&self) -> R {
        let n = R::from_usize(self.len()).unwrap();
        let mean = self.samples.iter().cloned().sum::<R>() / n;
        self.samples
            .iter()
            .map(|&s| (s - mean) * (s - mean))
            .sum::<R>()
            / (n - R::one())
    }

    /// Concatenates two datasets (metadata taken from `self`).
    pub fn concat(&self, other: &QuadratureDataset<R>) -> QuadratureDataset<R> {
        let mut samples = self.samples.clone();
        samples.extend_from_slice(&other.samples);
        QuadratureDataset {
            samples,
            angle: self.angle,
            meta: self.meta.clone(),
        }
    }

    pub fn max_abs_sample(&self) -> R {
        self.samples.iter().fold(R::zero(), |m, &s| m.max(s.abs()))
    }
}

/// Pointwise quasiprobability estimate over a grid of quadrature values.
#[derive(Debug, Clone)]
pub struct AqqpEstimate<R> {
    pub phi_grid: Vec<R>,
    pub p: Vec<R>,
    pub se: Vec<R>,
    pub width: R,
    pub n_samples: usize,
    // exact per-grid-point sums of f and f^2; kept so estimates merge
    // without any additional rounding
    sums: Vec<(ExactSum<R>, ExactSum<R>)>,
}

impl<R: Real> AqqpEstimate<R> {
    /// Merges two estimates over the same grid and width, as if their
    /// datasets had been concatenated. Bitwise identical to estimating the
    /// concatenated dataset directly.
    pub fn merge(&self, other: &AqqpEstimate<R>) -> Result<AqqpEstimate<R>> {
        if self.width != other.width
            || self.phi_grid.len() != other.phi_grid.len()
            || self
                .phi_grid
                .iter()
                .zip(&other.phi_grid)
                .any(|(a, b)| a != b)
        {
            return Err(AqqpError::InvalidArgument(
                "estimates must share grid and width to merge".into(),
            ));
        }
        let n = self.n_samples + other.n_samples;
        let sums: Vec<_> = self
            .sums
            .iter()
            .zip(&other.sums)
            .map(|((fa, fa2), (fb, fb2))| {
                let mut f = fa.clone();
                f.merge(fb);
                let mut f2 = fa2.clone();
                f2.merge(fb2);
                (f, f2)
            })
            .collect();
        let (p, se) = moments_from_sums(&sums, n);
        Ok(AqqpEstimate {
            phi_grid: self.phi_grid.clone(),
            p,
            se,
            width: self.width,
            n_samples: n,
            sums,
        })
    }
}

fn moments_from_sums<R: Real>(sums: &[(ExactSum<R>, ExactSum<R>)], n: usize) -> (Vec<R>, Vec<R>) {
    let nn = R::from_usize(n).unwrap();
    let mut p = Vec::with_capacity(sums.len());
    let mut se = Vec::with_capacity(sums.len());
    for (sf, sf2) in sums {
        let s = sf.value();
        let s2 = sf2.value();
        let mean = s / nn;
        let var = ((s2 - s * s / nn) / (nn - R::one())).max(R::zero());
        p.push(mean);
        se.push((var / nn).sqrt());
    }
    (p, se)
}

/// Estimates the quasiprobability on `phi_grid` from the dataset.
pub fn estimate_aqqp<R: Real>(
    data: &QuadratureDataset<R>,
    table: &PatternTable<R>,
    phi_grid: &[R],
) -> Result<AqqpEstimate<R>> {
    if data.len() < 2 {
        return Err(AqqpError::InsufficientData(
            "standard errors need at least 2 samples".into(),
        ));
    }
    if phi_grid.is_empty() {
        return Err(AqqpError::InvalidArgument("empty phi grid".into()));
    }
    // range check up front so the parallel loop below cannot fail
    let reach = data.max_abs_sample()
        + phi_grid
            .iter()
            .fold(R::zero(), |m, &phi| m.max(phi.abs()));
    if reach > table.x_max() {
        return Err(AqqpError::DisplacementOutOfRange {
            displacement: reach.to_f64_lossy(),
            x_max: table.x_max().to_f64_lossy(),
        });
    }

    let sums: Vec<(ExactSum<R>, ExactSum<R>)> = phi_grid
        .par_iter()
        .map(|&phi| {
            let mut sf = ExactSum::new();
            let mut sf2 = ExactSum::new();
            for &j in data.samples() {
                // in-range by the reach check above
                let f = eval_pattern(table, j, phi).expect("displacement in range");
                sf.add(f);
                sf2.add(f * f);
            }
            (sf, sf2)
        })
        .collect();

    let (p, se) = moments_from_sums(&sums, data.len());
    Ok(AqqpEstimate {
        phi_grid: phi_grid.to_vec(),
        p,
        se,
        width: table.width(),
        n_samples: data.len(),
        sums,
    })
}

/// Most negative `p/se` over the grid and its location. Ties resolve to the
/// smallest grid value (grids are ascending).
pub fn significance<R: Real>(est: &AqqpEstimate<R>) -> (R, R) {
    let mut best = R::infinity();
    let mut at = est.phi_grid[0];
    for ((&p, &se), &phi) in est.p.iter().zip(&est.se).zip(&est.phi_grid) {
        let ratio = p / se;
        if ratio < best {
            best = ratio;
            at = phi;
        }
    }
    (best, at)
}

/// Significance as a function of filter width.
#[derive(Debug, Clone)]
pub struct SignificanceScan<R> {
    pub widths: Vec<R>,
    pub sigma: Vec<R>,
    pub argmin_phi: Vec<R>,
}

/// Numeric settings for a width scan.
#[derive(Debug, Clone, Copy)]
pub struct ScanSettings<R> {
    pub filter_rel_tol: R,
    pub pattern_spacing: R,
    pub phi_step: R,
    /// Base grid half-range; per width the grid extends to
    /// `max(base, 4.5/w)` so the small-width negativity lobe (located near
    /// `|j| ~ 3.3/w` for squeezed Gaussian data) stays inside the grid.
    pub phi_half_range: R,
}

impl<R: Real> Default for ScanSettings<R> {
    fn default() -> Self {
        ScanSettings {
            filter_rel_tol: R::c(1e-9),
            pattern_spacing: R::c(crate::pattern::DEFAULT_SPACING),
            phi_step: R::c(0.05),
            phi_half_range: R::c(6.0),
        }
    }
}

/// Uniform ascending grid `[-half, half]` with the given step.
pub fn phi_grid<R: Real>(half_range: R, step: R) -> Vec<R> {
    let n = (half_range / step).round().to_isize().unwrap();
    (-n..=n)
        .map(|i| step * R::from_isize(i).unwrap())
        .collect()
}

/// Width-aware grid half-range used by scans.
pub fn scan_half_range<R: Real>(base: R, width: R) -> R {
    base.max(R::c(4.5) / width)
}

/// Runs the estimator over each width on the supplied grid. Tables are built
/// (and reused for duplicate widths) internally.
pub fn scan_width<R: Real>(
    data: &QuadratureDataset<R>,
    widths: &[R],
    phi_grid: &[R],
    settings: &ScanSettings<R>,
) -> Result<SignificanceScan<R>> {
    check_widths(widths)?;
    let grid_reach = phi_grid
        .iter()
        .fold(R::zero(), |m, &p| m.max(p.abs()));
    let x_max = table_range(grid_reach, data.max_abs_sample());

    let mut tables: BTreeMap<u64, PatternTable<R>> = BTreeMap::new();
    let mut sigma = Vec::with_capacity(widths.len());
    let mut argmin = Vec::with_capacity(widths.len());
    for &w in widths {
        let key = w.to_f64_lossy().to_bits();
        let table = match tables.entry(key) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(v) => {
                let filter = make_filter(w, settings.filter_rel_tol)?;
                v.insert(build_pattern_table(&filter, x_max, settings.pattern_spacing)?)
            }
        };
        let est = estimate_aqqp(data, table, phi_grid)?;
        let (s, at) = significance(&est);
        sigma.push(s);
        argmin.push(at);
    }
    Ok(SignificanceScan {
        widths: widths.to_vec(),
        sigma,
        argmin_phi: argmin,
    })
}

/// Like [`scan_width`], but widens the grid per width via
/// [`scan_half_range`].
pub fn scan_width_auto<R: Real>(
    data: &QuadratureDataset<R>,
    widths: &[R],
    settings: &ScanSettings<R>,
) -> Result<SignificanceScan<R>> {
    check_widths(widths)?;
    let mut sigma = Vec::with_capacity(widths.len());
    let mut argmin = Vec::with_capacity(widths.len());
    for &w in widths {
        let half = scan_half_range(settings.phi_half_range, w);
        let grid = phi_grid(half, settings.phi_step);
        let scan = scan_width(data, &[w], &grid, settings)?;
        sigma.push(scan.sigma[0]);
        argmin.push(scan.argmin_phi[0]);
    }
    Ok(SignificanceScan {
        widths: widths.to_vec(),
        sigma,
        argmin_phi: argmin,
    })
}

/// Default 30-point log-spaced width grid over `[0.4, 3.0]`.
pub fn default_scan_widths<R: Real>() -> Vec<R> {
    let (lo, hi, n) = (0.4f64, 3.0f64, 30usize);
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            R::c((lo.ln() + t * (hi.ln() - lo.ln())).exp())
        })
        .collect()
}

fn check_widths<R: Real>(widths: &[R]) -> Result<()> {
    if widths.is_empty() {
        return Err(AqqpError::InvalidArgument("empty width list".into()));
    }
    for &w in widths {
        if !(w >= R::c(0.1) && w <= R::c(3.0)) {
            return Err(AqqpError::InvalidArgument(format!(
                "scan widths must lie in [0.1, 3.0], got {w}"
            )));
        }
    }
    if widths.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(AqqpError::InvalidArgument(
            "scan widths must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Pattern-table half-range needed to cover every sample/grid displacement,
/// respecting the table's minimum of 12.
pub fn table_range<R: Real>(grid_reach: R, max_abs_sample: R) -> R {
    (grid_reach + max_abs_sample + R::one()).max(R::c(12.0))
}
