//! Fit of an exponential decay model `|lambda_j| ~ C1 exp(-C2 j^gamma)`
//! to sorted singular-value magnitudes.
//!
//! For a fixed `gamma` the log-model `ln|lambda_j| = ln C1 - C2 t_j`,
//! `t_j = j^gamma`, is linear, so it is solved in closed form. `gamma` is
//! picked on a coarse grid and then refined by golden-section search around
//! the best grid point.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpamError};

pub const GAMMA_GRID: [f64; 7] = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralFit {
    pub c1: f64,
    pub c2: f64,
    pub gamma: f64,
    /// Root-mean-square error of the fit in the log domain.
    pub residual: f64,
}

/// `(j, ln|lambda_j|)` pairs pooled over all sequences, 1-based `j`.
fn log_points(spectra: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
    if spectra.is_empty() {
        return Err(SpamError::DegenerateSpectrum("no spectra given".into()));
    }
    let mut points = Vec::new();
    let mut any_nonzero = false;
    for (s, seq) in spectra.iter().enumerate() {
        let nonzero = seq.iter().filter(|v| v.abs() > 0.0).count();
        any_nonzero |= nonzero > 0;
        if nonzero > 0 && nonzero < 3 {
            return Err(SpamError::DegenerateSpectrum(format!(
                "sequence {s} has only {nonzero} nonzero values, need at least 3"
            )));
        }
        for (j, v) in seq.iter().enumerate() {
            if !v.is_finite() {
                return Err(SpamError::DegenerateSpectrum(format!(
                    "sequence {s} has a non-finite value at position {j}"
                )));
            }
            if v.abs() > 0.0 {
                points.push(((j + 1) as f64, v.abs().ln()));
            }
        }
    }
    if !any_nonzero {
        return Err(SpamError::DegenerateSpectrum("all singular values are zero".into()));
    }
    Ok(points)
}

/// Least squares for fixed gamma; returns `(ln C1, C2, rms)`.
fn fit_for_gamma(points: &[(f64, f64)], gamma: f64) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let ts: Vec<f64> = points.iter().map(|&(j, _)| j.powf(gamma)).collect();
    let t_mean = ts.iter().sum::<f64>() / n;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut stt = 0.0;
    let mut sty = 0.0;
    for (t, &(_, y)) in ts.iter().zip(points) {
        stt += (t - t_mean) * (t - t_mean);
        sty += (t - t_mean) * (y - y_mean);
    }
    // y = a + slope * t, with slope = -C2
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    let a = y_mean - slope * t_mean;
    let sse: f64 = ts
        .iter()
        .zip(points)
        .map(|(t, &(_, y))| {
            let e = y - (a + slope * t);
            e * e
        })
        .sum();
    (a, -slope, (sse / n).sqrt())
}

/// Fits one decay law to all the given spectra (each sorted descending).
pub fn spectral_fit(spectra: &[Vec<f64>]) -> Result<SpectralFit> {
    let points = log_points(spectra)?;
    let rms = |g: f64| fit_for_gamma(&points, g).2;

    let (mut best_gamma, mut best_rms) = (GAMMA_GRID[0], rms(GAMMA_GRID[0]));
    for &g in &GAMMA_GRID[1..] {
        let r = rms(g);
        if r < best_rms {
            best_gamma = g;
            best_rms = r;
        }
    }

    // Golden-section refinement on [best - 0.5, best + 0.5], clamped to gamma >= 1.
    let mut lo = (best_gamma - 0.5).max(1.0);
    let mut hi = best_gamma + 0.5;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let mut fa = rms(a);
    let mut fb = rms(b);
    for _ in 0..100 {
        if hi - lo < 1e-10 {
            break;
        }
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = rms(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = rms(b);
        }
    }
    let refined = 0.5 * (lo + hi);
    let gamma = if rms(refined) < best_rms {
        refined
    } else {
        best_gamma
    };

    let (ln_c1, c2, residual) = fit_for_gamma(&points, gamma);
    Ok(SpectralFit {
        c1: ln_c1.exp(),
        c2,
        gamma,
        residual,
    })
}

/// Magnitudes sorted in descending order.
pub fn sorted_magnitudes(values: &[f64]) -> Vec<f64> {
    let mut m: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    m.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted(c1: f64, c2: f64, gamma: f64, n: usize) -> Vec<f64> {
        (1..=n)
            .map(|j| c1 * (-c2 * (j as f64).powf(gamma)).exp())
            .collect()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn recovers_cubic_decay() {
        let fit = spectral_fit(&[planted(0.54, 0.006, 3.0, 20)]).unwrap();
        assert!(rel(fit.c1, 0.54) < 0.05, "{fit:?}");
        assert!(rel(fit.c2, 0.006) < 0.05, "{fit:?}");
        assert!(rel(fit.gamma, 3.0) < 0.05, "{fit:?}");
    }

    #[test]
    fn recovers_off_grid_gamma() {
        let fit = spectral_fit(&[planted(0.8, 0.05, 1.7, 25), planted(0.8, 0.05, 1.7, 25)])
            .unwrap();
        assert!(rel(fit.gamma, 1.7) < 1e-3, "{fit:?}");
        assert!(rel(fit.c2, 0.05) < 1e-3, "{fit:?}");
        assert!(fit.residual < 1e-6);
    }

    #[test]
    fn constant_spectrum_has_no_decay() {
        let fit = spectral_fit(&[vec![0.3; 10]]).unwrap();
        assert!(fit.c2.abs() <= 1e-6);
        assert!((fit.c1 - 0.3).abs() < 1e-12);
    }

    #[test]
    fn exact_exponential_fits_without_residual() {
        let fit = spectral_fit(&[planted(2.0, 0.3, 1.0, 15)]).unwrap();
        assert!(fit.residual <= 1e-8, "{fit:?}");
        assert_eq!(fit.gamma, 1.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            spectral_fit(&[vec![0.0; 5]]),
            Err(SpamError::DegenerateSpectrum(_))
        ));
        assert!(spectral_fit(&[vec![1.0, 0.5, 0.0]]).is_err());
        assert!(spectral_fit(&[]).is_err());
    }

    #[test]
    fn magnitudes_sorted() {
        assert_eq!(sorted_magnitudes(&[0.1, -3.0, 2.0]), vec![3.0, 2.0, 0.1]);
    }
}
