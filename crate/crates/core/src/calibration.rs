//! Calibration of raw two-pulse phase-shift records into normalized
//! quadrature samples: noise-scaling decomposition, prediction-gain
//! regression, contrast factor, effective detection efficiency, and the
//! final normalization.

use std::collections::BTreeMap;

use crate::error::{AqqpError, Result};
use crate::estimator::{DatasetMeta, QuadratureDataset};
use crate::num::Real;

/// One measurement cycle: conditioning (QND) pulse outcome `phi1`,
/// verification pulse outcome `phi2`, both in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRecord<R> {
    pub cycle_id: u64,
    pub n_atoms: u64,
    pub phi1: R,
    pub phi2: R,
}

/// Fitted noise decomposition plus the derived measurement constants.
#[derive(Debug, Clone)]
pub struct CalibrationModel<R> {
    /// First-pulse light shot-noise variance (rad^2).
    pub a0: R,
    /// Projection-noise coefficient `kappa^2` (rad^2 per atom).
    pub a1: R,
    /// Technical-noise coefficient (rad^2 per atom^2).
    pub a2: R,
    /// QND prediction gain.
    pub zeta: R,
    /// Decoherence per photon.
    pub epsilon: R,
    /// Photons in the conditioning pulse.
    pub n1_photons: R,
    /// Photon ratio `n2/n1` between verification and conditioning pulse.
    pub photon_ratio: R,
    /// Contrast factor, always `exp(-n1 epsilon)`.
    pub eta: R,
    /// Covariance of the (a0, a1, a2) fit.
    pub fit_covariance: [[R; 3]; 3],
}

impl<R: Real> CalibrationModel<R> {
    /// Assembles a model; `eta` is derived, never stored independently.
    pub fn new(
        coeffs: [R; 3],
        fit_covariance: [[R; 3]; 3],
        zeta: R,
        epsilon: R,
        n1_photons: R,
        photon_ratio: R,
    ) -> Result<Self> {
        let [a0, a1, a2] = coeffs;
        // a2 does not enter the coherent reference; tolerate small negative
        // fits within their own 2-sigma uncertainty
        let a2_slack = R::c(2.0) * fit_covariance[2][2].max(R::zero()).sqrt();
        if !(a0 > R::zero()) || !(a1 > R::zero()) || a2 < -a2_slack {
            return Err(AqqpError::CalibrationInconsistent(format!(
                "coefficients must satisfy a0 > 0, a1 > 0, a2 >= -2 sd(a2) (got {}, {}, {})",
                a0.to_f64_lossy(),
                a1.to_f64_lossy(),
                a2.to_f64_lossy()
            )));
        }
        if zeta < R::zero() {
            return Err(AqqpError::CalibrationInconsistent(
                "zeta must be nonnegative".into(),
            ));
        }
        let eta = (-n1_photons * epsilon).exp();
        if !(eta > R::zero() && eta <= R::one()) {
            return Err(AqqpError::CalibrationInconsistent(
                "eta = exp(-n1 epsilon) must lie in (0, 1]".into(),
            ));
        }
        Ok(CalibrationModel {
            a0,
            a1,
            a2,
            zeta,
            epsilon,
            n1_photons,
            photon_ratio,
            eta,
            fit_covariance,
        })
    }
}

/// Groups records by atom number and computes the variance of the
/// drift-compensated values `(phi1_k - phi1_{k+1}) / sqrt(2)` over
/// non-overlapping successive pairs, per group.
///
/// Returns `(n_atoms, variance, pair count)` triples sorted by atom number.
pub fn group_variances<R: Real>(records: &[RawRecord<R>]) -> Vec<(R, R, usize)> {
    let mut groups: BTreeMap<u64, Vec<R>> = BTreeMap::new();
    for r in records {
        groups.entry(r.n_atoms).or_default().push(r.phi1);
    }
    let sqrt2 = R::c(2.0).sqrt();
    groups
        .into_iter()
        .filter_map(|(n_atoms, phis)| {
            let diffs: Vec<R> = phis
                .chunks_exact(2)
                .map(|pair| (pair[0] - pair[1]) / sqrt2)
                .collect();
            if diffs.len() < 2 {
                return None;
            }
            let m = R::from_usize(diffs.len()).unwrap();
            let mean = diffs.iter().cloned().sum::<R>() / m;
            let var = diffs
                .iter()
                .map(|&d| (d - mean) * (d - mean))
                .sum::<R>()
                / (m - R::one());
            Some((R::from_u64(n_atoms).unwrap(), var, diffs.len()))
        })
        .collect()
}

/// Weighted least-squares fit of `var = a0 + a1 N + a2 N^2` over
/// `(N, variance, count)` groups. Weights are the inverse chi-square variance
/// of a sample variance, `(count - 1) / (2 var^2)`.
pub fn fit_noise_scaling<R: Real>(groups: &[(R, R, usize)]) -> Result<([R; 3], [[R; 3]; 3])> {
    let distinct = {
        let mut ns: Vec<R> = groups.iter().map(|g| g.0).collect();
        ns.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ns.dedup();
        ns.len()
    };
    if distinct < 3 {
        return Err(AqqpError::InsufficientData(format!(
            "noise-scaling fit needs >= 3 distinct atom numbers, got {distinct}"
        )));
    }
    for &(n, var, count) in groups {
        if !(var > R::zero()) || count < 2 || n < R::zero() {
            return Err(AqqpError::InvalidArgument(
                "each group needs n_atoms >= 0, variance > 0 and count >= 2".into(),
            ));
        }
    }

    // normal equations X^T W X beta = X^T W y with rows (1, N, N^2);
    // N is rescaled to keep the 3x3 solve well conditioned.
    let n_scale = groups
        .iter()
        .map(|g| g.0)
        .fold(R::zero(), R::max)
        .max(R::one());
    let mut xtx = [[R::zero(); 3]; 3];
    let mut xty = [R::zero(); 3];
    for &(n, var, count) in groups {
        let weight = R::from_usize(count - 1).unwrap() / (R::c(2.0) * var * var);
        let ns = n / n_scale;
        let row = [R::one(), ns, ns * ns];
        for i in 0..3 {
            for j in 0..3 {
                xtx[i][j] = xtx[i][j] + weight * row[i] * row[j];
            }
            xty[i] = xty[i] + weight * row[i] * var;
        }
    }
    let inv = invert3(&xtx).ok_or_else(|| {
        AqqpError::InsufficientData("noise-scaling design matrix is singular".into())
    })?;
    let mut beta = [R::zero(); 3];
    for i in 0..3 {
        for j in 0..3 {
            beta[i] = beta[i] + inv[i][j] * xty[j];
        }
    }
    // undo the N rescaling on coefficients and covariance
    let scales = [R::one(), n_scale.recip(), (n_scale * n_scale).recip()];
    let mut coeffs = [R::zero(); 3];
    let mut cov = [[R::zero(); 3]; 3];
    for i in 0..3 {
        coeffs[i] = beta[i] * scales[i];
        for j in 0..3 {
            cov[i][j] = inv[i][j] * scales[i] * scales[j];
        }
    }

    for (idx, name) in [(0usize, "a0"), (1, "a1")] {
        let sd = cov[idx][idx].max(R::zero()).sqrt();
        if coeffs[idx] < -R::c(2.0) * sd {
            return Err(AqqpError::CalibrationInconsistent(format!(
                "fitted {name} = {} is negative beyond 2 standard deviations ({})",
                coeffs[idx].to_f64_lossy(),
                sd.to_f64_lossy()
            )));
        }
    }
    Ok((coeffs, cov))
}

fn invert3<R: Real>(m: &[[R; 3]; 3]) -> Option<[[R; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det == R::zero() || !det.is_finite() {
        return None;
    }
    let inv_det = det.recip();
    let mut out = [[R::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = ((i + 1) % 3, (i + 2) % 3);
            let (c, d) = ((j + 1) % 3, (j + 2) % 3);
            // cofactor transpose
            out[j][i] = (m[a][c] * m[b][d] - m[a][d] * m[b][c]) * inv_det;
        }
    }
    Some(out)
}

/// Prediction gain `zeta* = cov(phi1, phi2) / var(phi1)`, the minimizer of
/// `var(phi2 - zeta phi1)`.
pub fn fit_zeta<R: Real>(records: &[RawRecord<R>]) -> Result<R> {
    if records.len() < 2 {
        return Err(AqqpError::InsufficientData(
            "zeta regression needs >= 2 records".into(),
        ));
    }
    let n = R::from_usize(records.len()).unwrap();
    let mean1 = records.iter().map(|r| r.phi1).sum::<R>() / n;
    let mean2 = records.iter().map(|r| r.phi2).sum::<R>() / n;
    let mut var1 = R::zero();
    let mut cov = R::zero();
    for r in records {
        let d1 = r.phi1 - mean1;
        var1 = var1 + d1 * d1;
        cov = cov + d1 * (r.phi2 - mean2);
    }
    if var1 == R::zero() {
        return Err(AqqpError::DegenerateInput(
            "var(phi1) is zero; zeta is undefined".into(),
        ));
    }
    Ok(cov / var1)
}

/// Coherent-reference variance at a given atom number:
/// `var_ACS = a0 / ratio + a1 * eta * N_a` (the verification pulse carries
/// `ratio` times the photons of the conditioning pulse, so its shot noise is
/// `a0 / ratio`).
pub fn acs_variance<R: Real>(model: &CalibrationModel<R>, n_atoms: u64) -> R {
    model.a0 / model.photon_ratio + model.a1 * model.eta * R::from_u64(n_atoms).unwrap()
}

/// Effective detection efficiency
/// `(var_ACS(eta N_a) - var_ACS(0)) / var_ACS(eta N_a)`.
pub fn efficiency<R: Real>(model: &CalibrationModel<R>, n_atoms: u64) -> R {
    let v = acs_variance(model, n_atoms);
    (v - acs_variance(model, 0)) / v
}

/// Default efficiency acceptance threshold for conversion.
pub const DEFAULT_EFFICIENCY_THRESHOLD: f64 = 0.77;

/// Converts records at a single atom number into normalized quadrature
/// samples `j_k = (phi2_k - zeta phi1_k) / sqrt(var_ACS)`.
pub fn normalize<R: Real>(
    records: &[RawRecord<R>],
    model: &CalibrationModel<R>,
    threshold: R,
    force: bool,
) -> Result<QuadratureDataset<R>> {
    let n_atoms = match records.first() {
        None => {
            return Err(AqqpError::InsufficientData(
                "no records to normalize".into(),
            ))
        }
        Some(r) => r.n_atoms,
    };
    if records.iter().any(|r| r.n_atoms != n_atoms) {
        return Err(AqqpError::InvalidArgument(
            "records mix atom numbers; normalize one group at a time".into(),
        ));
    }
    let eff = efficiency(model, n_atoms);
    if eff < threshold && !force {
        return Err(AqqpError::EfficiencyBelowThreshold {
            efficiency: eff.to_f64_lossy(),
            threshold: threshold.to_f64_lossy(),
        });
    }
    let scale = acs_variance(model, n_atoms).sqrt().recip();
    let samples: Vec<R> = records
        .iter()
        .map(|r| (r.phi2 - model.zeta * r.phi1) * scale)
        .collect();
    QuadratureDataset::new(
        samples,
        None,
        DatasetMeta {
            source: None,
            calibration_id: None,
            efficiency: Some(eff.to_f64_lossy()),
            n_atoms: Some(n_atoms),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_with(a0: f64, a1: f64, a2: f64, zeta: f64) -> CalibrationModel<f64> {
        CalibrationModel::new(
            [a0, a1, a2],
            [[0.0; 3]; 3],
            zeta,
            1.02e-8,
            4.1e7,
            1.5,
        )
        .unwrap()
    }

    #[test]
    fn eta_round_trips_paper_value() {
        let m = model_with(1e-7, 1e-11, 0.0, 0.5);
        assert!((m.eta - (-4.1e7f64 * 1.02e-8).exp()).abs() < 1e-15);
        assert!((m.eta - 0.658).abs() < 5e-4);
    }

    #[test]
    fn zeta_perfect_and_uncorrelated() {
        let recs: Vec<RawRecord<f64>> = (0..100)
            .map(|i| {
                let v = (i as f64 * 0.37).sin();
                RawRecord {
                    cycle_id: i,
                    n_atoms: 10,
                    phi1: v,
                    phi2: v,
                }
            })
            .collect();
        assert!((fit_zeta(&recs).unwrap() - 1.0).abs() < 1e-12);

        let recs: Vec<RawRecord<f64>> = (0..20_000)
            .map(|i| RawRecord {
                cycle_id: i,
                n_atoms: 10,
                phi1: ((i as f64) * 12.9898).sin(),
                phi2: ((i as f64) * 78.233).cos(),
            })
            .collect();
        assert!(fit_zeta(&recs).unwrap().abs() < 0.02);
    }

    #[test]
    fn zeta_degenerate_input() {
        let recs: Vec<RawRecord<f64>> = (0..5)
            .map(|i| RawRecord {
                cycle_id: i,
                n_atoms: 0,
                phi1: 1.0,
                phi2: i as f64,
            })
            .collect();
        assert!(matches!(
            fit_zeta(&recs),
            Err(AqqpError::DegenerateInput(_))
        ));
        assert!(fit_zeta(&recs[..1]).is_err());
    }

    #[test]
    fn acs_variance_structure() {
        let m = model_with(1.5e-7, 1e-11, 0.0, 0.5);
        let v0 = acs_variance(&m, 0);
        assert!((v0 - 1e-7).abs() < 1e-20); // a0 / 1.5
        let v1 = acs_variance(&m, 100_000);
        let v2 = acs_variance(&m, 200_000);
        assert!(v0 < v1 && v1 < v2);
        assert!((v1 - (1e-7 + 1e-11 * m.eta * 1e5)).abs() < 1e-20);
    }

    #[test]
    fn efficiency_limits_and_monotonicity() {
        let m = model_with(1.5e-7, 1e-11, 0.0, 0.5);
        assert_eq!(efficiency(&m, 0), 0.0);
        let mut prev = 0.0;
        for &n in &[1_000u64, 10_000, 100_000, 1_000_000] {
            let e = efficiency(&m, n);
            assert!(e > prev && e < 1.0);
            prev = e;
        }
    }

    #[test]
    fn normalization_is_definitional() {
        // phi2 = sqrt(var_ACS) * u with unit-variance u, zeta = 0: the
        // normalized samples are exactly u.
        let m = model_with(1.5e-7, 1e-11, 0.0, 0.0);
        let n_atoms = 290_000;
        let s = acs_variance(&m, n_atoms).sqrt();
        let recs: Vec<RawRecord<f64>> = (0..1000)
            .map(|i| RawRecord {
                cycle_id: i,
                n_atoms,
                phi1: 0.0,
                phi2: s * ((i as f64 * 0.61).sin() * 1.3),
            })
            .collect();
        let data = normalize(&recs, &m, 0.77, false).unwrap();
        for (d, r) in data.samples().iter().zip(&recs) {
            assert!((d - r.phi2 / s).abs() < 1e-12);
        }
        assert!(data.meta().efficiency.unwrap() > 0.77);
    }

    #[test]
    fn efficiency_threshold_and_force() {
        let m = model_with(1.5e-7, 1e-11, 0.0, 0.0);
        let recs: Vec<RawRecord<f64>> = (0..10)
            .map(|i| RawRecord {
                cycle_id: i,
                n_atoms: 1_000,
                phi1: 0.0,
                phi2: (i as f64) * 1e-4,
            })
            .collect();
        assert!(matches!(
            normalize(&recs, &m, 0.77, false),
            Err(AqqpError::EfficiencyBelowThreshold { .. })
        ));
        assert!(normalize(&recs, &m, 0.77, true).is_ok());
    }

    #[test]
    fn mixed_atom_numbers_rejected() {
        let m = model_with(1.5e-7, 1e-11, 0.0, 0.0);
        let recs = vec![
            RawRecord {
                cycle_id: 0,
                n_atoms: 100,
                phi1: 0.0,
                phi2: 0.1,
            },
            RawRecord {
                cycle_id: 1,
                n_atoms: 200,
                phi1: 0.0,
                phi2: 0.2,
            },
        ];
        assert!(normalize(&recs, &m, 0.0, true).is_err());
    }

    #[test]
    fn fit_requires_three_groups() {
        let groups = [(0.0, 1e-7, 100), (1e5, 2e-7, 100)];
        assert!(matches!(
            fit_noise_scaling(&groups),
            Err(AqqpError::InsufficientData(_))
        ));
    }

    #[test]
    fn fit_recovers_exact_polynomial() {
        let (a0, a1, a2) = (1.2e-7, 0.9e-11, 3e-19);
        let groups: Vec<(f64, f64, usize)> = [0.0, 4e4, 8e4, 1.5e5, 2.9e5]
            .iter()
            .map(|&n| (n, a0 + a1 * n + a2 * n * n, 500))
            .collect();
        let (coeffs, _cov) = fit_noise_scaling(&groups).unwrap();
        assert!((coeffs[0] / a0 - 1.0).abs() < 1e-9);
        assert!((coeffs[1] / a1 - 1.0).abs() < 1e-9);
        assert!((coeffs[2] / a2 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn nested_model_keeps_a2_near_zero() {
        let (a0, a1) = (1.2e-7, 0.9e-11);
        let groups: Vec<(f64, f64, usize)> = [0.0, 4e4, 8e4, 1.5e5, 2.9e5]
            .iter()
            .map(|&n| (n, a0 + a1 * n, 500))
            .collect();
        let (coeffs, cov) = fit_noise_scaling(&groups).unwrap();
        assert!(coeffs[2].abs() < 1e-12 * a1, "a2 = {}", coeffs[2]);
        assert!(cov[2][2] >= 0.0);
    }

    #[test]
    fn invert3_round_trip() {
        let m: [[f64; 3]; 3] = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let inv = invert3(&m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += m[i][k] * inv[k][j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((acc - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn model_validation() {
        assert!(CalibrationModel::new(
            [-1.0, 1e-11, 0.0],
            [[0.0; 3]; 3],
            0.5,
            1e-8,
            4e7,
            1.5
        )
        .is_err());
        assert!(CalibrationModel::new(
            [1e-7, 1e-11, 0.0],
            [[0.0; 3]; 3],
            -0.1,
            1e-8,
            4e7,
            1.5
        )
        .is_err());
    }
}
