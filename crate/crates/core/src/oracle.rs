//! Brute-force f64 reference implementations used to cross-check the
//! production code paths in tests. These deliberately avoid the memoized
//! filter table, adaptive quadrature, and interpolation: everything is a
//! fixed-step Simpson rule evaluated directly.

use std::f64::consts::PI;

/// ω(k) = exp(-k^4), the base kernel.
fn omega(k: f64) -> f64 {
    (-k.powi(4)).exp()
}

/// Simpson integral of `f` over [a, b] with `n` (even) panels.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n >= 2 && n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Simpson sum over tabulated values with step `h`; drops a trailing value
/// if the count is even.
fn simpson_values(values: &[f64], h: f64) -> f64 {
    let n = if values.len().is_multiple_of(2) {
        values.len() - 1
    } else {
        values.len()
    };
    let mut acc = values[0] + values[n - 1];
    for (i, &v) in values[1..n - 1].iter().enumerate() {
        acc += if i % 2 == 0 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

/// Normalization constant of the autocorrelation filter, integral of ω^2.
pub fn norm_constant_oracle() -> f64 {
    simpson(|k| omega(k) * omega(k), -4.5, 4.5, 18_000)
}

/// Autocorrelation filter Ω_w(k), evaluated directly.
pub fn filter_oracle(w: f64, k: f64) -> f64 {
    let shift = k.abs() / w;
    if shift >= 8.0 {
        return 0.0;
    }
    simpson(|u| omega(u) * omega(u + shift), -4.5, 4.5, 18_000) / norm_constant_oracle()
}

/// Ω_w sampled on a uniform grid over [0, 8w] with step `dk`, sharing one
/// normalization integral.
fn filter_grid(w: f64, dk: f64) -> Vec<f64> {
    let norm = norm_constant_oracle();
    let n = ((8.0 * w) / dk).ceil() as usize;
    (0..=n)
        .map(|i| {
            let shift = (i as f64 * dk) / w;
            if shift >= 8.0 {
                0.0
            } else {
                simpson(|u| omega(u) * omega(u + shift), -4.5, 4.5, 4_000) / norm
            }
        })
        .collect()
}

/// Pattern function f_Ω(x) = (1/π) ∫_0^∞ e^{k²/2} Ω_w(k) cos(kx) dk at each
/// requested displacement, with a fixed dk = 1e-3 step.
pub fn pattern_oracle(w: f64, xs: &[f64]) -> Vec<f64> {
    let dk = 1e-3;
    let grid = filter_grid(w, dk);
    // e^{k²/2} Ω_w(k), truncated where it falls below 1e-14 of its max
    let env: Vec<f64> = grid
        .iter()
        .enumerate()
        .map(|(i, &om)| ((i as f64 * dk).powi(2) / 2.0).exp() * om)
        .collect();
    let peak = env.iter().cloned().fold(0.0f64, f64::max);
    let hi = env
        .iter()
        .rposition(|&v| v > 1e-14 * peak)
        .map_or(env.len(), |i| i + 1);
    xs.iter()
        .map(|&x| {
            let integrand: Vec<f64> = env[..hi]
                .iter()
                .enumerate()
                .map(|(i, &e)| e * (i as f64 * dk * x).cos())
                .collect();
            simpson_values(&integrand, dk) / PI
        })
        .collect()
}

/// Analytic regularized quasiprobability for a zero-mean Gaussian quadrature
/// distribution of variance `v`:
/// p(x) = (1/π) ∫_0^∞ e^{(1-v)k²/2} Ω_w(k) cos(kx) dk.
pub fn gaussian_aqqp_oracle(w: f64, v: f64, xs: &[f64]) -> Vec<f64> {
    let dk = 1e-3;
    let grid = filter_grid(w, dk);
    let env: Vec<f64> = grid
        .iter()
        .enumerate()
        .map(|(i, &om)| ((1.0 - v) * (i as f64 * dk).powi(2) / 2.0).exp() * om)
        .collect();
    xs.iter()
        .map(|&x| {
            let integrand: Vec<f64> = env
                .iter()
                .enumerate()
                .map(|(i, &e)| e * (i as f64 * dk * x).cos())
                .collect();
            simpson_values(&integrand, dk) / PI
        })
        .collect()
}
