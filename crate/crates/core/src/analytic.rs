//! Closed-form detection theory: normal and non-central chi-squared
//! distributions, post-correlation SNR of the quadrature EmL arm, and the
//! detection probabilities of both STL detectors.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::correlator::{
    autocorr, noiseless_outputs, sinc, MultipathState, ReceiverConfig, TrackingError, TrackingMode,
};
use crate::detectors::DetectorKind;
use crate::error::{Error, Result};
use crate::tracking::LockPoint;

/// Truncation bound on the neglected Poisson mass of the mixture series.
const POISSON_TAIL: f64 = 1e-12;

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Inverse of the standard normal CDF.
///
/// Rational approximation (Acklam) refined by one Halley step against the
/// erfc-based CDF. Upper-half arguments are reflected so the refinement
/// always works in the accurate lower tail.
pub fn inv_norm_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain {
            what: "probability",
            value: p,
        });
    }
    if p > 0.5 {
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

fn lower_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let e = norm_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

fn check_chi2_args(x: f64, lambda: f64, dof: u32) -> Result<()> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::Domain { what: "x", value: x });
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Domain {
            what: "non-centrality",
            value: lambda,
        });
    }
    if dof == 0 || !dof.is_multiple_of(2) {
        return Err(Error::Domain {
            what: "degrees of freedom (positive even integer)",
            value: dof as f64,
        });
    }
    Ok(())
}

fn ln_poisson(k: usize, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -mean + k as f64 * mean.ln() - libm::lgamma(k as f64 + 1.0)
}

/// Poisson(lambda/2) mixture weights covering all but `POISSON_TAIL` of the mass.
fn mixture_weights(mean: f64) -> (usize, Vec<f64>) {
    let mode = mean.floor() as usize;
    let mut lo = mode;
    let mut hi = mode;
    let mut weights = std::collections::VecDeque::from([ln_poisson(mode, mean).exp()]);
    let mut mass = weights[0];
    while 1.0 - mass > POISSON_TAIL {
        let up = ln_poisson(hi + 1, mean).exp();
        let down = if lo > 0 { ln_poisson(lo - 1, mean).exp() } else { 0.0 };
        if down > up {
            lo -= 1;
            weights.push_front(down);
            mass += down;
        } else {
            hi += 1;
            weights.push_back(up);
            mass += up;
            if up == 0.0 && lo == 0 {
                break;
            }
        }
    }
    (lo, weights.into())
}

/// Lower and upper Poisson(t) cumulative sums: `le[n] = P(X < n)`, `ge[n] = P(X >= n)`.
fn poisson_split(t: f64, n_max: usize) -> (Vec<f64>, Vec<f64>) {
    let tail_end = n_max.max((t + 40.0 * t.sqrt() + 40.0).ceil() as usize);
    let pmf: Vec<f64> = (0..=tail_end).map(|i| ln_poisson(i, t).exp()).collect();
    let mut below = vec![0.0; n_max + 1];
    for n in 1..=n_max {
        below[n] = below[n - 1] + pmf[n - 1];
    }
    let mut above = vec![0.0; tail_end + 2];
    for n in (0..=tail_end).rev() {
        above[n] = above[n + 1] + pmf[n];
    }
    above.truncate(n_max + 1);
    (below, above)
}

/// Returns `(cdf, sf)` of the non-central chi-squared distribution.
///
/// Poisson mixture of central chi-squared laws with `dof + 2j` degrees of
/// freedom; each central term for even `dof` is itself a Poisson tail, so
/// both the CDF and the survival function are sums of positive terms. The
/// mixture is truncated once less than 1e-12 of the Poisson mass remains.
fn noncentral_chi2(x: f64, lambda: f64, dof: u32) -> Result<(f64, f64)> {
    check_chi2_args(x, lambda, dof)?;
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    let m = (dof / 2) as usize;
    let (j0, weights) = mixture_weights(0.5 * lambda);
    let n_max = m + j0 + weights.len();
    let (below, above) = poisson_split(0.5 * x, n_max);
    let mut cdf = 0.0;
    let mut sf = 0.0;
    for (k, w) in weights.iter().enumerate() {
        let n = m + j0 + k;
        cdf += w * above[n];
        sf += w * below[n];
    }
    Ok((cdf.clamp(0.0, 1.0), sf.clamp(0.0, 1.0)))
}

pub fn noncentral_chi2_cdf(x: f64, lambda: f64, dof: u32) -> Result<f64> {
    noncentral_chi2(x, lambda, dof).map(|(cdf, _)| cdf)
}

pub fn noncentral_chi2_sf(x: f64, lambda: f64, dof: u32) -> Result<f64> {
    noncentral_chi2(x, lambda, dof).map(|(_, sf)| sf)
}

fn check_pfa(pfa: f64) -> Result<()> {
    if pfa > 0.0 && pfa < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "pfa",
            value: pfa,
        })
    }
}

fn check_snr(snr: f64) -> Result<()> {
    if snr.is_finite() && snr >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "snr",
            value: snr,
        })
    }
}

/// Detection probability of Detector I,
/// `2 - cdf(z - sqrt(snr)) - cdf(z + sqrt(snr))` with `z = cdf^-1(1 - pfa/2)`.
pub fn detector1_pd(pfa: f64, snr: f64) -> Result<f64> {
    check_pfa(pfa)?;
    check_snr(snr)?;
    let z = -inv_norm_cdf(0.5 * pfa)?;
    let s = snr.sqrt();
    Ok(norm_cdf(s - z) + norm_cdf(-z - s))
}

/// Detection probability of Detector II: the non-central chi-squared (2 dof,
/// non-centrality `snr`) survival function at `2 ln((N/2 - 1) / pfa)`.
pub fn detector2_pd(pfa: f64, n: usize, snr: f64) -> Result<f64> {
    check_pfa(pfa)?;
    check_snr(snr)?;
    if n <= 2 {
        return Err(Error::Domain {
            what: "window length",
            value: n as f64,
        });
    }
    let bins = n as f64 / 2.0 - 1.0;
    let x = (2.0 * (bins / pfa).ln()).max(0.0);
    noncentral_chi2_sf(x, snr, 2)
}

/// Everything the post-correlation SNR of the quadrature EmL arm depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrInputs {
    pub c_over_n0_dbhz: f64,
    /// Observation window length `N`.
    pub window_len: usize,
    pub integration_time: f64,
    pub half_spacing: f64,
    pub delta_f: f64,
    pub delta_tau: f64,
    pub delta_phi: f64,
    pub alpha: f64,
    pub delay_chips: f64,
    pub phase_rad: f64,
}

impl SnrInputs {
    /// Inputs for a receiver locked at `lock` on multipath `mp`.
    pub fn at_lock(rc: &ReceiverConfig, mp: &MultipathState, lock: &LockPoint, window_len: usize) -> Self {
        Self {
            c_over_n0_dbhz: rc.c_over_n0_dbhz,
            window_len,
            integration_time: rc.integration_time,
            half_spacing: rc.half_spacing,
            delta_f: 0.0,
            delta_tau: lock.delta_tau,
            delta_phi: lock.delta_phi,
            alpha: mp.alpha,
            delay_chips: mp.delay_chips,
            phase_rad: mp.phase_rad,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.half_spacing;
        if !(d.is_finite() && d > 0.0 && d <= 0.5) {
            return Err(Error::invalid("d", format!("half spacing must lie in (0, 0.5], got {d}")));
        }
        if self.window_len == 0 {
            return Err(Error::invalid("N", "window length must be positive"));
        }
        if !(self.integration_time.is_finite() && self.integration_time > 0.0) {
            return Err(Error::invalid("T", "integration time must be positive"));
        }
        for (name, v) in [
            ("c_over_n0_dbhz", self.c_over_n0_dbhz),
            ("delta_f", self.delta_f),
            ("delta_tau", self.delta_tau),
            ("delta_phi", self.delta_phi),
            ("theta_M", self.phase_rad),
        ] {
            crate::error::require_finite(name, v)?;
        }
        self.multipath().validate()
    }

    fn multipath(&self) -> MultipathState {
        MultipathState::explicit(self.alpha, self.delay_chips, self.phase_rad)
    }

    /// Normalised quadrature EmL amplitude (the braced term, `A / A0`).
    pub fn quadrature_bracket(&self) -> f64 {
        let d = self.half_spacing;
        let tau = self.delta_tau;
        let delay = self.delay_chips;
        (autocorr(tau + d) - autocorr(tau - d)) * self.delta_phi.sin()
            + self.alpha
                * (autocorr(tau - delay + d) - autocorr(tau - delay - d))
                * (self.delta_phi - self.phase_rad).sin()
    }
}

/// Post-correlation SNR `N A^2 / (2 sigma^2)` of the quadrature EmL arm,
/// evaluated in closed form from C/N0.
pub fn postcorr_snr(si: &SnrInputs) -> Result<f64> {
    si.validate()?;
    let cn0 = 10f64.powf(si.c_over_n0_dbhz / 10.0);
    let window = si.window_len as f64 * si.integration_time / 2.0;
    let loss = sinc(PI * si.delta_f * si.integration_time).powi(2) / (2.0 * si.half_spacing);
    Ok(cn0 * window * loss * si.quadrature_bracket().powi(2))
}

/// The same SNR assembled from the correlator model: `A` is the noiseless
/// quadrature EmL output and `sigma^2 = N0 f_s K (1 - r)`.
pub fn postcorr_snr_from_model(si: &SnrInputs, sampling_hz: f64) -> Result<f64> {
    si.validate()?;
    let rc = ReceiverConfig {
        half_spacing: si.half_spacing,
        integration_time: si.integration_time,
        sampling_hz,
        c_over_n0_dbhz: si.c_over_n0_dbhz,
        n0: 1.0,
    };
    let te = TrackingError::new(si.delta_tau, si.delta_phi, si.delta_f);
    let amplitude = noiseless_outputs(&te, &si.multipath(), &rc, TrackingMode::Stl)?.q_eml;
    Ok(si.window_len as f64 * amplitude * amplitude / (2.0 * rc.eml_noise_variance()))
}

/// Non-centrality `N A^2 / sigma^2` of the zero-frequency Detector I
/// statistic when the quadrature EmL arm carries a constant offset `A`.
///
/// A constant puts all of its power in the single real-valued DC bin, so the
/// statistic is chi-squared with one degree of freedom and twice the
/// sinusoid-convention SNR.
pub fn dc_level_noncentrality(si: &SnrInputs) -> Result<f64> {
    Ok(2.0 * postcorr_snr(si)?)
}

/// One point of a PD-versus-PFA curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryPoint {
    pub pfa: f64,
    /// Linear SNR.
    pub snr: f64,
    pub window_len: usize,
    pub pd: f64,
}

/// Theoretical PD over a `(snr, pfa)` grid for one detector.
pub fn theory_table(
    kind: DetectorKind,
    snr_db: &[f64],
    pfa_grid: &[f64],
    window_len: usize,
) -> Result<Vec<TheoryPoint>> {
    if window_len < 2 || !window_len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(window_len));
    }
    let mut rows = Vec::with_capacity(snr_db.len() * pfa_grid.len());
    for &db in snr_db {
        let snr = 10f64.powf(db / 10.0);
        for &pfa in pfa_grid {
            let pd = theoretical_pd(kind, pfa, window_len, snr)?;
            rows.push(TheoryPoint {
                pfa,
                snr,
                window_len,
                pd,
            });
        }
    }
    Ok(rows)
}

pub fn theoretical_pd(kind: DetectorKind, pfa: f64, window_len: usize, snr: f64) -> Result<f64> {
    match kind {
        DetectorKind::StlDetectorI => detector1_pd(pfa, snr),
        DetectorKind::StlDetectorII => detector2_pd(pfa, window_len, snr),
        DetectorKind::VtlDetector => Err(Error::invalid(
            "detector",
            "no closed-form detection probability for the VTL detector",
        )),
    }
}
