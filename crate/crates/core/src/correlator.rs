//! Specular multipath signal model and Early/Prompt/Late correlator outputs.
//!
//! Amplitudes follow the usual post-correlation scaling: the LOS amplitude is
//! `A0 = sqrt(C) * K * sinc(pi * df * T)` and every correlator arm carries
//! Gaussian noise of variance `N0 * f_s * K / 2`, so the Early-minus-Late
//! noise variance is `N0 * f_s * K * (1 - r)` with `r = 1 - 2d`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{require_finite, Error, Result};

pub const GPS_L1_HZ: f64 = 1_575_420_000.0;
pub const CA_CHIP_RATE: f64 = 1_023_000.0;
pub const CA_CODE_LENGTH: u32 = 1023;

/// Carrier and code constants of the tracked signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierConstants {
    pub carrier_hz: f64,
    pub chip_rate: f64,
    pub chips_per_code: u32,
}

impl Default for CarrierConstants {
    fn default() -> Self {
        Self {
            carrier_hz: GPS_L1_HZ,
            chip_rate: CA_CHIP_RATE,
            chips_per_code: CA_CODE_LENGTH,
        }
    }
}

impl CarrierConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_hz.is_finite() && self.carrier_hz > 0.0) {
            return Err(Error::invalid("carrier_hz", "must be positive"));
        }
        if !(self.chip_rate.is_finite() && self.chip_rate > 0.0) {
            return Err(Error::invalid("chip_rate", "must be positive"));
        }
        if self.chips_per_code == 0 {
            return Err(Error::invalid("chips_per_code", "must be positive"));
        }
        Ok(())
    }

    /// Carrier cycles per code chip (1540 for GPS L1 C/A).
    pub fn cycles_per_chip(&self) -> f64 {
        self.carrier_hz / self.chip_rate
    }
}

/// Receiver front-end and correlator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverConfig {
    /// Half the Early-Late spacing `d`, in chips.
    pub half_spacing: f64,
    /// Coherent integration time `T`, in seconds.
    pub integration_time: f64,
    /// Baseband sampling frequency `f_s`, in Hz.
    pub sampling_hz: f64,
    pub c_over_n0_dbhz: f64,
    /// Noise spectral density (unitless scale).
    pub n0: f64,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            half_spacing: 0.5,
            integration_time: 1e-3,
            sampling_hz: 2.046e6,
            c_over_n0_dbhz: 45.0,
            n0: 1.0,
        }
    }
}

impl ReceiverConfig {
    pub fn validate(&self) -> Result<()> {
        let d = self.half_spacing;
        if !(d.is_finite() && d > 0.0 && d <= 0.5) {
            return Err(Error::invalid("d", format!("half spacing must lie in (0, 0.5], got {d}")));
        }
        if !(self.integration_time.is_finite() && self.integration_time > 0.0) {
            return Err(Error::invalid("T", "integration time must be positive"));
        }
        if !(self.sampling_hz.is_finite() && self.sampling_hz > 0.0) {
            return Err(Error::invalid("f_s", "sampling frequency must be positive"));
        }
        let k = self.integration_time * self.sampling_hz;
        if k < 0.5 || (k - k.round()).abs() > 1e-6 * k.max(1.0) {
            return Err(Error::invalid(
                "f_s",
                format!("K = T * f_s must be a positive integer, got {k}"),
            ));
        }
        require_finite("c_over_n0_dbhz", self.c_over_n0_dbhz)?;
        if !(self.n0.is_finite() && self.n0 > 0.0) {
            return Err(Error::invalid("N0", "noise density must be positive"));
        }
        Ok(())
    }

    /// Number of correlation points `K = T * f_s`.
    pub fn correlation_points(&self) -> u64 {
        (self.integration_time * self.sampling_hz).round() as u64
    }

    /// Early/Late noise correlation `r = 1 - 2d`.
    pub fn early_late_correlation(&self) -> f64 {
        1.0 - 2.0 * self.half_spacing
    }

    /// LOS carrier power `C`, from C/N0 in dB-Hz.
    pub fn carrier_power(&self) -> f64 {
        10f64.powf(self.c_over_n0_dbhz / 10.0) * self.n0
    }

    /// Post-correlation LOS amplitude `A0 = sqrt(C) K sinc(pi df T)`.
    pub fn los_amplitude(&self, delta_f: f64) -> f64 {
        self.carrier_power().sqrt()
            * self.correlation_points() as f64
            * sinc(PI * delta_f * self.integration_time)
    }

    /// Thermal noise power `sigma_n^2 = N0 f_s`.
    pub fn thermal_noise_power(&self) -> f64 {
        self.n0 * self.sampling_hz
    }

    /// Variance of the Early-minus-Late noise, `sigma_n^2 K (1 - r)`.
    pub fn eml_noise_variance(&self) -> f64 {
        self.thermal_noise_power()
            * self.correlation_points() as f64
            * (1.0 - self.early_late_correlation())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseModel {
    ExplicitPhase,
    /// Phase follows the differential path delay, `2 pi f_L1 delay / R_c`.
    DelayDerived,
}

/// Effective single multipath relative to the LOS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultipathState {
    /// Multipath-to-LOS amplitude ratio; zero means no multipath.
    pub alpha: f64,
    /// Delay relative to the LOS, in chips.
    pub delay_chips: f64,
    /// Phase relative to the LOS, in radians.
    pub phase_rad: f64,
    pub phase_model: PhaseModel,
}

impl Default for MultipathState {
    fn default() -> Self {
        Self::none()
    }
}

impl MultipathState {
    pub fn none() -> Self {
        Self {
            alpha: 0.0,
            delay_chips: 0.0,
            phase_rad: 0.0,
            phase_model: PhaseModel::ExplicitPhase,
        }
    }

    pub fn explicit(alpha: f64, delay_chips: f64, phase_rad: f64) -> Self {
        Self {
            alpha,
            delay_chips,
            phase_rad,
            phase_model: PhaseModel::ExplicitPhase,
        }
    }

    pub fn delay_derived(alpha: f64, delay_chips: f64, carrier: &CarrierConstants) -> Self {
        let phase = (TAU * carrier.cycles_per_chip() * delay_chips).rem_euclid(TAU);
        Self {
            alpha,
            delay_chips,
            phase_rad: phase,
            phase_model: PhaseModel::DelayDerived,
        }
    }

    pub fn is_present(&self) -> bool {
        self.alpha > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::invalid("alpha", format!("must be finite and >= 0, got {}", self.alpha)));
        }
        if !(self.delay_chips.is_finite() && self.delay_chips >= 0.0) {
            return Err(Error::invalid(
                "delta_M",
                format!("must be finite and >= 0, got {}", self.delay_chips),
            ));
        }
        require_finite("theta_M", self.phase_rad)
    }

    /// Collapses several specular paths into one effective multipath.
    ///
    /// Paths are summed as complex vectors at the prompt point
    /// (`alpha_l R(-delay_l) exp(-j theta_l)`). The effective delay is the
    /// prompt-weighted mean delay and the effective amplitude reproduces the
    /// summed prompt contribution exactly.
    pub fn from_paths(paths: &[MultipathState]) -> Result<Self> {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut weight = 0.0;
        let mut weighted_delay = 0.0;
        for p in paths {
            p.validate()?;
            let w = p.alpha * autocorr(-p.delay_chips);
            sum += Complex64::from_polar(w, -p.phase_rad);
            weight += w;
            weighted_delay += w * p.delay_chips;
        }
        if weight == 0.0 || sum.norm() == 0.0 {
            return Ok(Self::none());
        }
        let delay = weighted_delay / weight;
        Ok(Self::explicit(
            sum.norm() / autocorr(-delay),
            delay,
            (-sum.arg()).rem_euclid(TAU),
        ))
    }
}

/// Code and carrier tracking errors of the local replica.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackingError {
    /// Code tracking error, in chips.
    pub delta_tau: f64,
    /// Carrier phase error, in radians.
    pub delta_phi: f64,
    /// Carrier frequency error, in Hz.
    pub delta_f: f64,
}

impl TrackingError {
    pub fn new(delta_tau: f64, delta_phi: f64, delta_f: f64) -> Self {
        Self {
            delta_tau,
            delta_phi,
            delta_f,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_finite("delta_tau", self.delta_tau)?;
        require_finite("delta_phi", self.delta_phi)?;
        require_finite("delta_f", self.delta_f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrackingMode {
    #[serde(rename = "STL", alias = "stl")]
    Stl,
    #[serde(rename = "VTL", alias = "vtl")]
    Vtl,
}

/// One coherent integration epoch of correlator outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorSample {
    pub epoch: u64,
    pub i_e: f64,
    pub q_e: f64,
    pub i_p: f64,
    pub q_p: f64,
    pub i_l: f64,
    pub q_l: f64,
    pub i_eml: f64,
    pub q_eml: f64,
    pub eml_abs: f64,
}

impl CorrelatorSample {
    /// Builds a sample from the six arms and derives the EmL fields.
    #[allow(clippy::too_many_arguments)]
    pub fn from_arms(epoch: u64, i_e: f64, q_e: f64, i_p: f64, q_p: f64, i_l: f64, q_l: f64) -> Self {
        let i_eml = i_e - i_l;
        let q_eml = q_e - q_l;
        Self {
            epoch,
            i_e,
            q_e,
            i_p,
            q_p,
            i_l,
            q_l,
            i_eml,
            q_eml,
            eml_abs: i_eml.hypot(q_eml),
        }
    }

    /// This sample with one epoch of noise added to every arm.
    pub fn with_noise(&self, noise: &ArmNoise, epoch: u64) -> Self {
        Self::from_arms(
            epoch,
            self.i_e + noise.i_e,
            self.q_e + noise.q_e,
            self.i_p + noise.i_p,
            self.q_p + noise.q_p,
            self.i_l + noise.i_l,
            self.q_l + noise.q_l,
        )
    }
}

/// Ideal C/A code autocorrelation: unit triangle over +/- 1 chip.
pub fn autocorr(tau: f64) -> f64 {
    (1.0 - tau.abs()).max(0.0)
}

/// `sin(x) / x` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Noiseless correlator outputs for a given tracking error and multipath.
///
/// In VTL mode the code error is forced to zero (locked vector loop); the
/// carrier phase error is taken from `te` in both modes.
pub fn noiseless_outputs(
    te: &TrackingError,
    mp: &MultipathState,
    rc: &ReceiverConfig,
    mode: TrackingMode,
) -> Result<CorrelatorSample> {
    te.validate()?;
    mp.validate()?;
    rc.validate()?;
    let tau = match mode {
        TrackingMode::Stl => te.delta_tau,
        TrackingMode::Vtl => 0.0,
    };
    let d = rc.half_spacing;
    let a0 = rc.los_amplitude(te.delta_f);
    let am = mp.alpha * a0;
    let (los_sin, los_cos) = te.delta_phi.sin_cos();
    let (mp_sin, mp_cos) = (te.delta_phi - mp.phase_rad).sin_cos();
    let delay = mp.delay_chips;

    let arm = |offset: f64| {
        let los = a0 * autocorr(tau + offset);
        let refl = am * autocorr(tau - delay + offset);
        (los * los_cos + refl * mp_cos, los * los_sin + refl * mp_sin)
    };
    let (i_e, q_e) = arm(d);
    let (i_p, q_p) = arm(0.0);
    let (i_l, q_l) = arm(-d);
    Ok(CorrelatorSample::from_arms(0, i_e, q_e, i_p, q_p, i_l, q_l))
}

/// Gaussian noise statistics of the correlator arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Thermal noise power `N0 f_s`.
    pub sigma_n_sq: f64,
    /// Variance of each correlator arm, `sigma_n^2 K / 2`.
    pub per_arm_variance: f64,
    /// Early/Late correlation `r`.
    pub early_late_correlation: f64,
    pub rng_seed: u64,
}

impl NoiseModel {
    pub fn from_receiver(rc: &ReceiverConfig, seed: u64) -> Result<Self> {
        rc.validate()?;
        let sigma_n_sq = rc.thermal_noise_power();
        Ok(Self {
            sigma_n_sq,
            per_arm_variance: sigma_n_sq * rc.correlation_points() as f64 / 2.0,
            early_late_correlation: rc.early_late_correlation(),
            rng_seed: seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.per_arm_variance.is_finite() && self.per_arm_variance >= 0.0) {
            return Err(Error::invalid("per_arm_variance", "must be finite and >= 0"));
        }
        let r = self.early_late_correlation;
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::invalid("r", format!("must lie in [0, 1], got {r}")));
        }
        Ok(())
    }

    /// Implied variance of the EmL noise on one phase arm.
    pub fn eml_variance(&self) -> f64 {
        2.0 * self.per_arm_variance * (1.0 - self.early_late_correlation)
    }
}

/// One epoch of noise on the six correlator arms.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ArmNoise {
    pub i_e: f64,
    pub i_p: f64,
    pub i_l: f64,
    pub q_e: f64,
    pub q_p: f64,
    pub q_l: f64,
}

/// Seeded generator of correlated correlator noise.
///
/// Per phase arm, Prompt is a standard draw `z0` and Early/Late are
/// `sqrt(r) z0 + sqrt(1 - r) z_{E,L}`, which gives `corr(E, L) = r` and
/// `corr(E, P) = corr(L, P) = sqrt(r)`. I and Q arms are independent.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
    scale: f64,
    shared: f64,
    private: f64,
}

impl NoiseSource {
    pub fn new(model: &NoiseModel) -> Result<Self> {
        model.validate()?;
        let r = model.early_late_correlation;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(model.rng_seed),
            scale: model.per_arm_variance.sqrt(),
            shared: r.sqrt(),
            private: (1.0 - r).sqrt(),
        })
    }

    fn triple(&mut self) -> (f64, f64, f64) {
        let z0: f64 = self.rng.sample(StandardNormal);
        let ze: f64 = self.rng.sample(StandardNormal);
        let zl: f64 = self.rng.sample(StandardNormal);
        let s = self.scale;
        (
            s * (self.shared * z0 + self.private * ze),
            s * z0,
            s * (self.shared * z0 + self.private * zl),
        )
    }

    pub fn next_epoch(&mut self) -> ArmNoise {
        let (i_e, i_p, i_l) = self.triple();
        let (q_e, q_p, q_l) = self.triple();
        ArmNoise {
            i_e,
            i_p,
            i_l,
            q_e,
            q_p,
            q_l,
        }
    }
}

/// Draws `epochs` consecutive epochs of arm noise from the model's seed.
pub fn draw_noise(model: &NoiseModel, epochs: usize) -> Result<Vec<ArmNoise>> {
    if epochs == 0 {
        return Err(Error::invalid("epochs", "must be >= 1"));
    }
    let mut source = NoiseSource::new(model)?;
    Ok((0..epochs).map(|_| source.next_epoch()).collect())
}

/// Noiseless outputs plus one epoch drawn from `noise`.
pub fn sample_epoch(
    te: &TrackingError,
    mp: &MultipathState,
    rc: &ReceiverConfig,
    noise: &mut NoiseSource,
    mode: TrackingMode,
    epoch: u64,
) -> Result<CorrelatorSample> {
    let clean = noiseless_outputs(te, mp, rc, mode)?;
    Ok(clean.with_noise(&noise.next_epoch(), epoch))
}
