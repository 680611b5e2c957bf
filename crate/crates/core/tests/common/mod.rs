//! Test-side oracles that share no code paths with the library internals
//! beyond the public noiseless correlator model.

#![allow(dead_code)]

use std::f64::consts::PI;

use mpdetect::{noiseless_outputs, MultipathState, ReceiverConfig, TrackingError, TrackingMode};

/// A lock point found by exhaustive search.
#[derive(Debug, Clone, Copy)]
pub struct GridLock {
    pub delta_tau: f64,
    pub delta_phi: f64,
    pub objective: f64,
}

fn residuals(mp: &MultipathState, rc: &ReceiverConfig, tau: f64, phi: f64) -> (f64, f64, f64) {
    let a0 = rc.los_amplitude(0.0);
    let s = noiseless_outputs(&TrackingError::new(tau, phi, 0.0), mp, rc, TrackingMode::Stl).unwrap();
    (s.i_eml / a0, s.q_p / a0, s.i_p / a0)
}

fn objective(mp: &MultipathState, rc: &ReceiverConfig, tau: f64, phi: f64) -> f64 {
    let (d, q, _) = residuals(mp, rc, tau, phi);
    d * d + q * q
}

pub fn wrap(phi: f64) -> f64 {
    let w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Linearised stability of the loop `tau += k D`, `phi -= k Q_P`: the
/// Jacobian of `(D, -Q_P)` must have negative trace and positive determinant.
fn is_stable(mp: &MultipathState, rc: &ReceiverConfig, tau: f64, phi: f64) -> bool {
    let h_t = 1e-6;
    let h_p = 1e-6;
    let (d_tp, q_tp, _) = residuals(mp, rc, tau + h_t, phi);
    let (d_tm, q_tm, _) = residuals(mp, rc, tau - h_t, phi);
    let (d_pp, q_pp, _) = residuals(mp, rc, tau, phi + h_p);
    let (d_pm, q_pm, _) = residuals(mp, rc, tau, phi - h_p);
    let j11 = (d_tp - d_tm) / (2.0 * h_t);
    let j12 = (d_pp - d_pm) / (2.0 * h_p);
    let j21 = -(q_tp - q_tm) / (2.0 * h_t);
    let j22 = -(q_pp - q_pm) / (2.0 * h_p);
    j11 + j22 < 0.0 && j11 * j22 - j12 * j21 > 0.0
}

/// Exhaustive 2-D search for the STL lock point: a coarse grid
/// (1e-3 chips x 1e-2 rad) locates local minima of `D^2 + Q_P^2`, each is
/// refined on a 1e-4 x 1e-3 grid, and the stable zero with positive prompt
/// nearest to zero code error is returned.
pub fn brute_force_stl_lock(mp: &MultipathState, rc: &ReceiverConfig, tau_span: f64) -> Option<GridLock> {
    let dt = 1e-3;
    let dp = 1e-2;
    let nt = (2.0 * tau_span / dt).round() as usize + 1;
    let np = (2.0 * PI / dp).ceil() as usize;
    let tau_at = |i: usize| -tau_span + i as f64 * dt;
    let phi_at = |j: usize| -PI + j as f64 * dp;
    let grid: Vec<Vec<f64>> = (0..nt)
        .map(|i| (0..np).map(|j| objective(mp, rc, tau_at(i), phi_at(j))).collect())
        .collect();

    let mut best: Option<GridLock> = None;
    for i in 1..nt - 1 {
        for j in 0..np {
            let v = grid[i][j];
            if v > 1e-3 {
                continue;
            }
            let mut is_min = true;
            'nb: for di in [-1i64, 0, 1] {
                for dj in [-1i64, 0, 1] {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ii = (i as i64 + di) as usize;
                    let jj = ((j as i64 + dj).rem_euclid(np as i64)) as usize;
                    if grid[ii][jj] < v {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if !is_min {
                continue;
            }
            // refine
            let (t0, p0) = (tau_at(i), phi_at(j));
            let mut fine = GridLock {
                delta_tau: t0,
                delta_phi: p0,
                objective: v,
            };
            for a in -30..=30 {
                for b in -30..=30 {
                    let t = t0 + a as f64 * 1e-4;
                    let p = p0 + b as f64 * 1e-3;
                    let o = objective(mp, rc, t, p);
                    if o < fine.objective {
                        fine = GridLock {
                            delta_tau: t,
                            delta_phi: p,
                            objective: o,
                        };
                    }
                }
            }
            let (_, _, i_p) = residuals(mp, rc, fine.delta_tau, fine.delta_phi);
            if fine.objective > 1e-6 || i_p <= 0.0 || !is_stable(mp, rc, fine.delta_tau, fine.delta_phi) {
                continue;
            }
            fine.delta_phi = wrap(fine.delta_phi);
            if best.is_none_or(|b| fine.delta_tau.abs() < b.delta_tau.abs() - 1e-6) {
                best = Some(fine);
            }
        }
    }
    best
}

/// Direct O(N^2) DFT periodogram.
pub fn dft_periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|m| {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, &v) in x.iter().enumerate() {
                let ang = -2.0 * PI * ((m * k) % n) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            (re * re + im * im) / n as f64
        })
        .collect()
}

/// Standard normal quantile by bisection on `0.5 erfc(-z / sqrt 2)`.
pub fn bisect_quantile(p: f64) -> f64 {
    let cdf = |z: f64| 0.5 * libm_erfc(-z / std::f64::consts::SQRT_2);
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// erfc by continued fraction / series, independent of the library's libm use.
pub fn libm_erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - libm_erfc(-x);
    }
    if x < 2.0 {
        // Maclaurin series of erf
        let mut sum = 0.0;
        let mut term = x;
        let mut k = 0.0;
        while k < 200.0 {
            let add = term / (2.0 * k + 1.0);
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
            k += 1.0;
            term *= -x * x / k;
        }
        1.0 - 2.0 / PI.sqrt() * sum
    } else {
        // Lentz continued fraction
        let tiny = 1e-300;
        let mut f = x;
        let mut c = x;
        let mut d = 0.0;
        for k in 1..500 {
            let a = k as f64 / 2.0;
            d = x + a * d;
            d = if d.abs() < tiny { tiny } else { d };
            d = 1.0 / d;
            c = x + a / c;
            c = if c.abs() < tiny { tiny } else { c };
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x * x).exp() / (f * PI.sqrt())
    }
}
