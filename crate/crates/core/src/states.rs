//! Analytic state models and synthetic record generation.
//!
//! The analytic quasiprobabilities computed here are the oracles the sampling
//! estimator is validated against. All quadrature data is normalized so the
//! ground state has unit variance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::calibration::RawRecord;
use crate::error::{AqqpError, Result};
use crate::estimator::{DatasetMeta, QuadratureDataset};
use crate::filters::FilterSpec;
use crate::num::Real;
use crate::quad::simpson_uniform;

/// Quadrature statistics of a state model, in ground-state units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateModel<R> {
    /// Gaussian quadrature distribution with the given variance and mean.
    /// `variance < 1` is squeezed, `> 1` thermal-like.
    Gaussian { variance: R, mean: R },
    /// Single collective excitation: quadrature density
    /// `x^2 exp(-x^2/2) / sqrt(2 pi)` (mean 0, variance 3).
    SingleExcitation,
}

impl<R: Real> StateModel<R> {
    pub fn gaussian(variance: R) -> Result<Self> {
        Self::gaussian_with_mean(variance, R::zero())
    }

    pub fn gaussian_with_mean(variance: R, mean: R) -> Result<Self> {
        if !(variance > R::zero() && variance.is_finite()) {
            return Err(AqqpError::InvalidArgument(format!(
                "gaussian variance must be positive, got {variance}"
            )));
        }
        Ok(StateModel::Gaussian { variance, mean })
    }

    fn mean(&self) -> R {
        match *self {
            StateModel::Gaussian { mean, .. } => mean,
            StateModel::SingleExcitation => R::zero(),
        }
    }
}

/// One-dimensional section of the vacuum-compensated characteristic function
/// along the measured quadrature (mean folded out; see [`analytic_aqqp`]).
///
/// Gaussian: `exp((1-V) k^2 / 2)`. Single excitation: `1 - k^2` (the
/// `exp(k^2/2)` compensation cancels its Gaussian envelope exactly).
pub fn char_function<R: Real>(state: &StateModel<R>, k: R) -> R {
    match *state {
        StateModel::Gaussian { variance, .. } => ((R::one() - variance) * k * k * R::c(0.5)).exp(),
        StateModel::SingleExcitation => R::one() - k * k,
    }
}

/// Exact quasiprobability by quadrature:
/// `p(j) = (1/pi) * integral_0^Kmax char(k) Omega(k) cos(k (j - mean)) dk`.
pub fn analytic_aqqp<R: Real>(
    state: &StateModel<R>,
    filter: &FilterSpec<R>,
    phi_grid: &[R],
) -> Result<Vec<R>> {
    let (nodes, dk) = char_filter_nodes(state, filter)?;
    let mean = state.mean();
    let inv_pi = R::PI().recip();
    Ok(phi_grid
        .iter()
        .map(|&j| {
            let integrand: Vec<R> = nodes
                .iter()
                .enumerate()
                .map(|(i, &g)| {
                    let k = dk * R::from_usize(i).unwrap();
                    g * (k * (j - mean)).cos()
                })
                .collect();
            simpson_uniform(&integrand, dk) * inv_pi
        })
        .collect())
}

/// `char(k) * Omega(k)` on the filter grid, with a decay check: the filtered
/// characteristic function must be negligible at the cutoff for the inverse
/// transform to be trustworthy.
fn char_filter_nodes<R: Real>(state: &StateModel<R>, filter: &FilterSpec<R>) -> Result<(Vec<R>, R)> {
    let (om, dk) = crate::filters::simpson_slice(filter);
    let nodes: Vec<R> = om
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let k = dk * R::from_usize(i).unwrap();
            char_function(state, k) * v
        })
        .collect();
    let max = nodes.iter().fold(R::zero(), |m, &v| m.max(v.abs()));
    let tail = nodes.last().copied().unwrap_or(R::zero()).abs();
    if !(max.is_finite()) || tail > R::c(1e-8) * max {
        return Err(AqqpError::Convergence(format!(
            "filtered characteristic function has not decayed at the cutoff (tail/max = {})",
            (tail / max).to_f64_lossy()
        )));
    }
    Ok((nodes, dk))
}

/// Two-dimensional quasiprobability on a Cartesian grid.
#[derive(Debug, Clone)]
pub struct Quasiprob2D<R> {
    pub x_grid: Vec<R>,
    pub y_grid: Vec<R>,
    /// Row-major: `values[ix * y_grid.len() + iy]`.
    pub values: Vec<R>,
}

impl<R: Real> Quasiprob2D<R> {
    pub fn at(&self, ix: usize, iy: usize) -> R {
        self.values[ix * self.y_grid.len() + iy]
    }

    /// Marginal over the y grid (Simpson; the y grid must have an odd length
    /// and uniform spacing).
    pub fn marginal_over_y(&self) -> Vec<R> {
        let h = self.y_grid[1] - self.y_grid[0];
        (0..self.x_grid.len())
            .map(|ix| {
                let row: Vec<R> =
                    (0..self.y_grid.len()).map(|iy| self.at(ix, iy)).collect();
                simpson_uniform(&row, h)
            })
            .collect()
    }
}

/// Filtered two-dimensional quasiprobability of a Gaussian or rotationally
/// symmetric state, by separated cosine quadrature. The normalization is
/// fixed so that the marginal over one axis reproduces [`analytic_aqqp`]
/// along the other.
///
/// For a squeezed Gaussian the conjugate axis carries the minimum-uncertainty
/// partner variance `1/V`.
pub fn analytic_quasiprob2d<R: Real>(
    state: &StateModel<R>,
    filter: &FilterSpec<R>,
    x_grid: &[R],
    y_grid: &[R],
) -> Result<Quasiprob2D<R>> {
    let (vx, vy) = match *state {
        StateModel::Gaussian { variance, mean } => {
            if mean != R::zero() {
                return Err(AqqpError::InvalidArgument(
                    "2D reconstruction assumes zero-mean states".into(),
                ));
            }
            (variance, variance.recip())
        }
        StateModel::SingleExcitation => (R::zero(), R::zero()), // marker, radial path below
    };

    // subsample the filter grid: the full 0.001 spacing would make the 2D
    // matrix enormous, and Simpson at ~0.004 is already far below the 1e-6
    // symmetry tolerance
    let (om_full, dk_full) = crate::filters::simpson_slice(filter);
    let stride = (R::c(0.004) / dk_full)
        .floor()
        .to_usize()
        .unwrap()
        .max(1);
    let mut om: Vec<R> = om_full.iter().step_by(stride).copied().collect();
    if om.len().is_multiple_of(2) {
        om.pop();
    }
    let dk = dk_full * R::from_usize(stride).unwrap();
    let n_k = om.len();
    let radial = |r2: R| -> R {
        // Omega at radius sqrt(r2) via the filter's own grid values
        let r = r2.sqrt();
        let idx = r / dk;
        let i = idx.floor().to_usize().unwrap_or(0);
        if i + 1 >= n_k {
            return R::zero();
        }
        let t = idx - R::from_usize(i).unwrap();
        om[i] * (R::one() - t) + om[i + 1] * t
    };

    // G(kr, ki) with Simpson weights folded in on both axes.
    let simpson_w = |i: usize| -> R {
        if i == 0 || i == n_k - 1 {
            R::one()
        } else if i % 2 == 1 {
            R::c(4.0)
        } else {
            R::c(2.0)
        }
    };
    let half = R::c(0.5);
    let g: Vec<R> = (0..n_k * n_k)
        .map(|idx| {
            let ir = idx / n_k;
            let ii = idx % n_k;
            let kr = dk * R::from_usize(ir).unwrap();
            let ki = dk * R::from_usize(ii).unwrap();
            let envelope = match *state {
                StateModel::Gaussian { .. } => {
                    ((R::one() - vy) * kr * kr * half + (R::one() - vx) * ki * ki * half).exp()
                }
                StateModel::SingleExcitation => R::one() - (kr * kr + ki * ki),
            };
            envelope * radial(kr * kr + ki * ki) * simpson_w(ir) * simpson_w(ii)
        })
        .collect();

    // decay check on the outer rim
    let gmax = g.iter().fold(R::zero(), |m, &v| m.max(v.abs()));
    let rim = (0..n_k)
        .map(|i| g[(n_k - 1) * n_k + i].abs().max(g[i * n_k + n_k - 1].abs()))
        .fold(R::zero(), R::max);
    if rim > R::c(1e-6) * gmax {
        return Err(AqqpError::Convergence(
            "2D filtered characteristic function has not decayed at the cutoff".into(),
        ));
    }

    // separated evaluation: M(x, kr) = sum_ki cos(x ki) G, then
    // P(x, y) = (1/pi^2) * sum_kr cos(y kr) M * (dk/3)^2
    let scale = (dk / R::c(3.0)) * (dk / R::c(3.0)) / (R::PI() * R::PI());
    let mut values = vec![R::zero(); x_grid.len() * y_grid.len()];
    let m: Vec<Vec<R>> = x_grid
        .iter()
        .map(|&x| {
            (0..n_k)
                .map(|ir| {
                    let mut acc = R::zero();
                    for ii in 0..n_k {
                        let ki = dk * R::from_usize(ii).unwrap();
                        acc = acc + (x * ki).cos() * g[ir * n_k + ii];
                    }
                    acc
                })
                .collect()
        })
        .collect();
    for (ix, mrow) in m.iter().enumerate() {
        for (iy, &y) in y_grid.iter().enumerate() {
            let mut acc = R::zero();
            for (ir, &mv) in mrow.iter().enumerate() {
                let kr = dk * R::from_usize(ir).unwrap();
                acc = acc + (y * kr).cos() * mv;
            }
            values[ix * y_grid.len() + iy] = acc * scale;
        }
    }
    Ok(Quasiprob2D {
        x_grid: x_grid.to_vec(),
        y_grid: y_grid.to_vec(),
        values,
    })
}

/// Draws i.i.d. samples from the state's quadrature density. Deterministic
/// per seed.
pub fn sample_quadratures<R: Real>(
    state: &StateModel<R>,
    n: usize,
    seed: u64,
) -> Result<QuadratureDataset<R>> {
    if n == 0 {
        return Err(AqqpError::InvalidArgument("sample count must be >= 1".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let samples: Vec<R> = match *state {
        StateModel::Gaussian { variance, mean } => {
            let dist = Normal::new(mean.to_f64_lossy(), variance.to_f64_lossy().sqrt())
                .expect("valid normal");
            (0..n).map(|_| R::c(dist.sample(&mut rng))).collect()
        }
        StateModel::SingleExcitation => {
            // |x| is chi-distributed with 3 degrees of freedom; attach a
            // random sign.
            let std = Normal::new(0.0, 1.0).unwrap();
            (0..n)
                .map(|_| {
                    let a: f64 = std.sample(&mut rng);
                    let b: f64 = std.sample(&mut rng);
                    let c: f64 = std.sample(&mut rng);
                    let r = (a * a + b * b + c * c).sqrt();
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    R::c(sign * r)
                })
                .collect()
        }
    };
    QuadratureDataset::new(
        samples,
        None,
        DatasetMeta {
            source: Some(format!("synthetic seed={seed}")),
            ..DatasetMeta::default()
        },
    )
}

/// Two-pulse phase-shift measurement model used by the synthetic record
/// generator and by the calibration round-trip tests.
///
/// Per record: `phi1 = d1 + kappa X + tau`, `phi2 = d2 + sqrt(eta) kappa X +
/// tau + e`, with `d1 ~ N(0, a0)`, `d2 ~ N(0, a0/ratio)` (the verification
/// pulse uses `ratio` times the photons, so its shot noise is smaller),
/// atomic projection term `X ~ N(0, N_a)`, shared technical noise
/// `tau ~ N(0, a2 N_a^2)`, and verification-pulse excess noise `e` sized so
/// that the regression residual `phi2 - zeta* phi1`, normalized to the
/// coherent-state reference, has the requested variance.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct MeasurementModel<R> {
    /// First-pulse light shot-noise variance `a0 = var(dn1/n1)` (rad^2).
    pub shot_variance: R,
    /// Photon-number ratio `n2/n1` of verification to QND pulse.
    pub photon_ratio: R,
    /// Projection-noise coefficient `a1 = kappa^2` (rad^2 per atom).
    pub coupling_sq: R,
    /// Technical-noise coefficient `a2` (rad^2 per atom^2).
    pub technical_quadratic: R,
    /// Photons in the QND pulse.
    pub n1_photons: R,
    /// Decoherence per photon.
    pub epsilon: R,
}

impl<R: Real> MeasurementModel<R> {
    /// Contrast factor `eta = exp(-n1 epsilon)`.
    pub fn eta(&self) -> R {
        (-self.n1_photons * self.epsilon).exp()
    }

    /// Population second moments at a given atom number:
    /// `(var(phi1), cov(phi1, phi2), var(phi2) without excess, var_ACS)`.
    pub fn moments(&self, n_atoms: u64) -> (R, R, R, R) {
        let n = R::from_u64(n_atoms).unwrap();
        let eta = self.eta();
        let atom1 = self.coupling_sq * n;
        let tech = self.technical_quadratic * n * n;
        let vp1 = self.shot_variance + atom1 + tech;
        let c12 = eta.sqrt() * atom1 + tech;
        let shot2 = self.shot_variance / self.photon_ratio;
        let vp2 = shot2 + eta * atom1 + tech;
        let var_acs = shot2 + eta * atom1;
        (vp1, c12, vp2, var_acs)
    }

    /// Population-optimal prediction gain `zeta* = cov(phi1, phi2) /
    /// var(phi1)`.
    pub fn optimal_zeta(&self, n_atoms: u64) -> R {
        let (vp1, c12, _, _) = self.moments(n_atoms);
        c12 / vp1
    }

    /// Normalized variance of the regression residual before any excess
    /// noise is added; the smallest `true_variance` the generator can reach.
    pub fn conditional_floor(&self, n_atoms: u64) -> R {
        let (vp1, c12, vp2, var_acs) = self.moments(n_atoms);
        (vp2 - c12 * c12 / vp1) / var_acs
    }

    /// Parameters anchored to the published experiment: `eta = 65.8%`
    /// (`n1 = 4.1e7`, `epsilon = 1.02e-8`) and effective detection
    /// efficiency 0.83 at `N_a = 2.9e5`.
    pub fn paper_preset() -> Self {
        let n1 = R::c(4.1e7);
        let epsilon = R::c(1.02e-8);
        let ratio = R::c(1.5);
        let a1 = R::c(1.0e-11);
        let eta = (-n1 * epsilon).exp();
        let n_ref = R::c(2.9e5);
        let eff = R::c(0.83);
        // a0/ratio = a1 eta N_ref (1 - eff) / eff
        let a0 = ratio * a1 * eta * n_ref * (R::one() - eff) / eff;
        MeasurementModel {
            shot_variance: a0,
            photon_ratio: ratio,
            coupling_sq: a1,
            technical_quadratic: R::c(2.0e-19),
            n1_photons: n1,
            epsilon,
        }
    }
}

/// Generates `n` synthetic two-pulse records at a fixed atom number whose
/// calibrated quadrature variance targets `true_variance` (1 = coherent
/// reference). Deterministic per seed.
pub fn simulate_records<R: Real>(
    model: &MeasurementModel<R>,
    true_variance: R,
    n_atoms: u64,
    n: usize,
    seed: u64,
) -> Result<Vec<RawRecord<R>>> {
    if n == 0 {
        return Err(AqqpError::InvalidArgument("record count must be >= 1".into()));
    }
    if !(true_variance > R::zero()) {
        return Err(AqqpError::InvalidArgument(format!(
            "true_variance must be positive, got {true_variance}"
        )));
    }
    for (name, v) in [
        ("shot_variance", model.shot_variance),
        ("photon_ratio", model.photon_ratio),
        ("coupling_sq", model.coupling_sq),
        ("n1_photons", model.n1_photons),
    ] {
        if !(v > R::zero()) {
            return Err(AqqpError::InvalidArgument(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    if model.technical_quadratic < R::zero() || model.epsilon < R::zero() {
        return Err(AqqpError::InvalidArgument(
            "technical_quadratic and epsilon must be nonnegative".into(),
        ));
    }

    let (vp1, c12, vp2, var_acs) = model.moments(n_atoms);
    let conditional = vp2 - c12 * c12 / vp1;
    let excess = true_variance * var_acs - conditional;
    if excess < -var_acs * R::c(1e-12) {
        return Err(AqqpError::InvalidArgument(format!(
            "true_variance {} below the conditional floor {} of this measurement model",
            true_variance.to_f64_lossy(),
            (conditional / var_acs).to_f64_lossy()
        )));
    }
    let excess = excess.max(R::zero());

    let n_f = R::from_u64(n_atoms).unwrap();
    let kappa = model.coupling_sq.sqrt();
    let sqrt_eta = model.eta().sqrt();
    let sd = |v: R| v.max(R::zero()).sqrt().to_f64_lossy();
    let std = Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let (s_atom, s_tech, s_d1, s_d2, s_e) = (
        sd(n_f),
        sd(model.technical_quadratic * n_f * n_f),
        sd(model.shot_variance),
        sd(model.shot_variance / model.photon_ratio),
        sd(excess),
    );
    let records = (0..n)
        .map(|i| {
            let x = R::c(std.sample(&mut rng) * s_atom);
            let tau = R::c(std.sample(&mut rng) * s_tech);
            let d1 = R::c(std.sample(&mut rng) * s_d1);
            let d2 = R::c(std.sample(&mut rng) * s_d2);
            let e = R::c(std.sample(&mut rng) * s_e);
            RawRecord {
                cycle_id: i as u64,
                n_atoms,
                phi1: d1 + kappa * x + tau,
                phi2: d2 + sqrt_eta * kappa * x + tau + e,
            }
        })
        .collect();
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator;
    use crate::filters::make_filter;

    #[test]
    fn coherent_char_is_flat() {
        let s = StateModel::<f64>::gaussian(1.0).unwrap();
        for &k in &[0.0, 0.5, 2.0, 5.0] {
            assert!((char_function(&s, k) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_excitation_char_values() {
        let s = StateModel::<f64>::SingleExcitation;
        assert_eq!(char_function(&s, 0.0), 1.0);
        assert_eq!(char_function(&s, 1.0), 0.0);
        // numeric Fourier transform of the density x^2 exp(-x^2/2)/sqrt(2pi)
        for &k in &[0.3, 0.9, 1.7] {
            let mut acc = 0.0;
            let h = 1e-3;
            let n = 16000;
            for i in 0..=n {
                let x = -8.0 + i as f64 * h;
                let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
                acc += wgt * x * x * (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
                    * (k * x).cos();
            }
            acc *= h;
            let expect = (1.0 - k * k) * (-k * k / 2.0).exp();
            assert!((acc - expect).abs() < 1e-9, "k={k}");
            // and the filtered section divides out the Gaussian envelope
            assert!((char_function(&s, k) - acc * (k * k / 2.0).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn squeezed_char_closed_form() {
        let s = StateModel::gaussian(0.681).unwrap();
        let expect = (0.319f64 * 2.0).exp();
        assert!((char_function(&s, 2.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn coherent_aqqp_is_filter_transform() {
        let f = make_filter(1.1, 1e-9).unwrap();
        let s = StateModel::gaussian(1.0).unwrap();
        let grid = estimator::phi_grid(6.0, 0.1);
        let p = analytic_aqqp(&s, &f, &grid).unwrap();
        let ft = crate::filters::filter_fourier_transform(&f, &grid);
        let max = p.iter().cloned().fold(0.0f64, f64::max);
        for (a, b) in p.iter().zip(&ft) {
            assert!((a - b).abs() < 1e-9 * max.max(1.0));
        }
        assert!(p.iter().all(|&v| v >= -1e-9 * max));
    }

    #[test]
    fn squeezed_aqqp_has_negative_lobes() {
        let f = make_filter(1.1, 1e-9).unwrap();
        let s = StateModel::gaussian(0.681).unwrap();
        let grid = estimator::phi_grid(6.0, 0.05);
        let p = analytic_aqqp(&s, &f, &grid).unwrap();
        let center = p[grid.len() / 2];
        let min = p.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(center > 0.0);
        assert!(min < -1e-3, "min {min}");
        // negative lobes on both sides of the central peak
        let neg_left = grid.iter().zip(&p).any(|(&x, &v)| x < 0.0 && v < -1e-3);
        let neg_right = grid.iter().zip(&p).any(|(&x, &v)| x > 0.0 && v < -1e-3);
        assert!(neg_left && neg_right);
    }

    #[test]
    fn single_excitation_negative_at_origin_for_wide_filter() {
        let f = make_filter(2.0, 1e-9).unwrap();
        let s = StateModel::<f64>::SingleExcitation;
        let p = analytic_aqqp(&s, &f, &[0.0]).unwrap();
        assert!(p[0] < 0.0, "p(0) = {}", p[0]);
    }

    #[test]
    fn mean_shifts_the_curve() {
        let f = make_filter(1.0, 1e-9).unwrap();
        let a = StateModel::<f64>::gaussian(1.0).unwrap();
        let b = StateModel::gaussian_with_mean(1.0, 1.5).unwrap();
        let pa = analytic_aqqp(&a, &f, &[0.0]).unwrap();
        let pb = analytic_aqqp(&b, &f, &[1.5]).unwrap();
        assert!((pa[0] - pb[0]).abs() < 1e-12);
    }

    #[test]
    fn quasiprob2d_radial_symmetry_and_positivity() {
        let f = make_filter(1.1, 1e-9).unwrap();
        let s = StateModel::gaussian(1.0).unwrap();
        let g: Vec<f64> = (-12..=12).map(|i| i as f64 * 0.25).collect();
        let q = analytic_quasiprob2d(&s, &f, &g, &g).unwrap();
        let max = q.values.iter().cloned().fold(0.0f64, f64::max);
        // unlike the 1d marginals, the 2d transform is only approximately
        // nonnegative: the radial extension of the filter rings at the
        // sub-percent level
        assert!(q.values.iter().all(|&v| v >= -0.01 * max));
        // radius-only dependence: compare (x, y) against (y, x)
        for ix in 0..g.len() {
            for iy in 0..g.len() {
                assert!((q.at(ix, iy) - q.at(iy, ix)).abs() < 1e-6 * max);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_matches_variance() {
        let s = StateModel::<f64>::gaussian(0.681).unwrap();
        let a = sample_quadratures(&s, 4841, 7).unwrap();
        let b = sample_quadratures(&s, 4841, 7).unwrap();
        assert_eq!(a.samples(), b.samples());
        let v = a.sample_variance();
        assert!((v - 0.681).abs() < 0.05 * 0.681 + 0.02, "variance {v}");
        assert!(sample_quadratures(&s, 1, 0).unwrap().len() == 1);
        assert!(sample_quadratures(&s, 0, 0).is_err());
    }

    #[test]
    fn single_excitation_moments() {
        let s = StateModel::<f64>::SingleExcitation;
        let d = sample_quadratures(&s, 200_000, 11).unwrap();
        let mean: f64 = d.samples().iter().sum::<f64>() / d.len() as f64;
        let var = d.sample_variance();
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 3.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn noise_free_records_reduce_to_atomic_variance() {
        let model = MeasurementModel {
            shot_variance: 1e-30,
            photon_ratio: 1.5,
            coupling_sq: 1e-11,
            technical_quadratic: 0.0,
            n1_photons: 4.1e7,
            epsilon: 1.02e-8,
        };
        let n_atoms = 200_000;
        let recs = simulate_records(&model, 0.5, n_atoms, 40_000, 3).unwrap();
        let zeta = model.optimal_zeta(n_atoms);
        let (_, _, _, var_acs) = model.moments(n_atoms);
        let resid: Vec<f64> = recs.iter().map(|r| r.phi2 - zeta * r.phi1).collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let var = resid.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / (resid.len() - 1) as f64;
        assert!((var / var_acs - 0.5).abs() < 0.02, "{}", var / var_acs);
    }

    #[test]
    fn zero_atoms_is_pure_shot_noise() {
        let model = MeasurementModel::<f64>::paper_preset();
        let recs = simulate_records(&model, 1.0, 0, 50_000, 5).unwrap();
        let mean1 = recs.iter().map(|r| r.phi1).sum::<f64>() / recs.len() as f64;
        let v1 = recs
            .iter()
            .map(|r| (r.phi1 - mean1) * (r.phi1 - mean1))
            .sum::<f64>()
            / (recs.len() - 1) as f64;
        assert!((v1 / model.shot_variance - 1.0).abs() < 0.03, "{v1}");
    }

    #[test]
    fn paper_preset_anchors() {
        let model = MeasurementModel::<f64>::paper_preset();
        assert!((model.eta() - 0.658).abs() < 5e-4);
        let (_, _, _, var_acs) = model.moments(290_000);
        let (_, _, _, var0) = model.moments(0);
        let eff = (var_acs - var0) / var_acs;
        assert!((eff - 0.83).abs() < 1e-12, "efficiency {eff}");
    }

    #[test]
    fn unreachable_variance_is_rejected() {
        let model = MeasurementModel::<f64>::paper_preset();
        assert!(simulate_records(&model, 1e-6, 290_000, 10, 0).is_err());
    }
}
