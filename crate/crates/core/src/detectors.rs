//! Window-based multipath detectors.
//!
//! Detector I thresholds the zero-frequency periodogram of the quadrature
//! EmL arm normalised by the window variance; Detector II and the VTL detector
//! compare in-band against out-of-band spectral power of `Q_EmL` and `|EmL|`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::analytic::inv_norm_cdf;
use crate::correlator::CorrelatorSample;
use crate::error::{Error, Result};

/// Relative slack when mapping band edges onto bin frequencies.
const EDGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectorKind {
    #[serde(rename = "d1")]
    StlDetectorI,
    #[serde(rename = "d2")]
    StlDetectorII,
    #[serde(rename = "vtl")]
    VtlDetector,
}

impl DetectorKind {
    /// Scalar input the detector consumes from each epoch.
    pub fn input(self, sample: &CorrelatorSample) -> f64 {
        match self {
            Self::StlDetectorI | Self::StlDetectorII => sample.q_eml,
            Self::VtlDetector => sample.eml_abs,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Self::StlDetectorI => "d1",
            Self::StlDetectorII => "d2",
            Self::VtlDetector => "vtl",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdMode {
    Analytic,
    Calibrated(f64),
}

/// Which periodogram bins Detector I maximises over.
///
/// `DcBin` evaluates the zero-frequency bin only, which is where a constant
/// multipath offset on `Q_EmL` lands; `AllBins` maximises over every bin
/// (optionally skipping DC).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PeakSearch {
    #[default]
    #[serde(rename = "dc")]
    DcBin,
    #[serde(rename = "all")]
    AllBins,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    /// Window length `N`.
    pub window_len: usize,
    pub stride: usize,
    pub pfa: f64,
    pub threshold_mode: ThresholdMode,
    pub signal_band_hz: f64,
    pub nyquist_hz: f64,
    /// Epoch duration, sets the bin-to-frequency mapping.
    pub integration_time: f64,
    pub exclude_dc: bool,
    /// Circular 3-bin moving average of the periodogram before band sums.
    pub smooth3: bool,
    pub search: PeakSearch,
}

impl DetectorConfig {
    pub fn new(kind: DetectorKind) -> Self {
        Self {
            kind,
            window_len: 1024,
            stride: 64,
            pfa: 1e-2,
            threshold_mode: ThresholdMode::Analytic,
            signal_band_hz: 200.0,
            nyquist_hz: 500.0,
            integration_time: 1e-3,
            exclude_dc: false,
            smooth3: false,
            search: PeakSearch::DcBin,
        }
    }

    pub fn with_window(mut self, window_len: usize) -> Self {
        self.window_len = window_len;
        self
    }

    pub fn with_pfa(mut self, pfa: f64) -> Self {
        self.pfa = pfa;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_threshold(mut self, mode: ThresholdMode) -> Self {
        self.threshold_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.window_len;
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        if self.kind == DetectorKind::StlDetectorI && n < 32 {
            return Err(Error::invalid("N", format!("Detector I needs N >= 32, got {n}")));
        }
        if self.stride == 0 {
            return Err(Error::invalid("stride", "must be at least 1"));
        }
        if !(self.pfa > 0.0 && self.pfa < 1.0) {
            return Err(Error::invalid("pfa", format!("must lie in (0, 1), got {}", self.pfa)));
        }
        if !(self.integration_time.is_finite() && self.integration_time > 0.0) {
            return Err(Error::invalid("T", "integration time must be positive"));
        }
        if !(self.signal_band_hz.is_finite()
            && self.nyquist_hz.is_finite()
            && self.signal_band_hz > 0.0
            && self.signal_band_hz < self.nyquist_hz)
        {
            return Err(Error::invalid(
                "band edges",
                format!(
                    "need 0 < signal band ({}) < nyquist ({})",
                    self.signal_band_hz, self.nyquist_hz
                ),
            ));
        }
        if self.kind == DetectorKind::StlDetectorI && self.search == PeakSearch::DcBin && self.exclude_dc {
            return Err(Error::invalid(
                "exclude_dc",
                "the DC-bin search cannot exclude the DC bin; use the all-bins search",
            ));
        }
        if let ThresholdMode::Calibrated(v) = self.threshold_mode {
            crate::error::require_finite("threshold", v)?;
        }
        Ok(())
    }

    /// Decision threshold implied by the threshold mode.
    pub fn threshold(&self) -> Result<f64> {
        match self.threshold_mode {
            ThresholdMode::Calibrated(v) => Ok(v),
            ThresholdMode::Analytic => match self.kind {
                DetectorKind::StlDetectorI => detector1_threshold(self.pfa, self.window_len),
                DetectorKind::StlDetectorII | DetectorKind::VtlDetector => detector2_threshold(self.pfa),
            },
        }
    }

    pub fn band_plan(&self) -> BandPlan {
        BandPlan::new(
            self.window_len,
            self.integration_time,
            self.signal_band_hz,
            self.nyquist_hz,
            self.exclude_dc,
        )
    }
}

/// Reusable forward FFT of a fixed length producing periodograms.
pub struct Periodogram {
    fft: Arc<dyn Fft<f64>>,
    buffer: Vec<Complex64>,
    scratch: Vec<Complex64>,
    power: Vec<f64>,
}

impl fmt::Debug for Periodogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Periodogram").field("len", &self.power.len()).finish()
    }
}

impl Periodogram {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        let fft = FftPlanner::new().plan_fft_forward(n);
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        Ok(Self {
            fft,
            buffer: vec![Complex64::default(); n],
            scratch,
            power: vec![0.0; n],
        })
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    /// `(1/N)|X(m)|^2` for every bin.
    pub fn compute(&mut self, window: &[f64]) -> Result<&[f64]> {
        let n = self.len();
        if window.len() != n {
            return Err(Error::invalid(
                "window",
                format!("expected {n} samples, got {}", window.len()),
            ));
        }
        for (slot, &x) in self.buffer.iter_mut().zip(window) {
            if !x.is_finite() {
                return Err(Error::Domain {
                    what: "window sample",
                    value: x,
                });
            }
            *slot = Complex64::new(x, 0.0);
        }
        self.fft.process_with_scratch(&mut self.buffer, &mut self.scratch);
        let scale = 1.0 / n as f64;
        for (p, c) in self.power.iter_mut().zip(&self.buffer) {
            *p = c.norm_sqr() * scale;
        }
        Ok(&self.power)
    }
}

/// Periodogram `(1/N)|X(m)|^2` of a power-of-two length window.
pub fn periodogram(window: &[f64]) -> Result<Vec<f64>> {
    let mut p = Periodogram::new(window.len())?;
    Ok(p.compute(window)?.to_vec())
}

/// Assignment of periodogram bins to the signal band, the noise band, or neither.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandPlan {
    pub signal: Vec<usize>,
    pub noise: Vec<usize>,
    pub excluded: Vec<usize>,
}

impl BandPlan {
    /// Bin `m` sits at `|f| = min(m, N - m) / (N T)`; the signal edge itself
    /// belongs to the noise band, the nyquist edge is inclusive.
    pub fn new(n: usize, integration_time: f64, signal_hz: f64, nyquist_hz: f64, exclude_dc: bool) -> Self {
        let mut plan = Self {
            signal: Vec::new(),
            noise: Vec::new(),
            excluded: Vec::new(),
        };
        let resolution = 1.0 / (n as f64 * integration_time);
        for m in 0..n {
            let f = m.min(n - m) as f64 * resolution;
            if m == 0 && exclude_dc {
                plan.excluded.push(m);
            } else if f < signal_hz * (1.0 - EDGE_TOL) {
                plan.signal.push(m);
            } else if f <= nyquist_hz * (1.0 + EDGE_TOL) {
                plan.noise.push(m);
            } else {
                plan.excluded.push(m);
            }
        }
        plan
    }
}

fn smooth_circular3(power: &[f64]) -> Vec<f64> {
    let n = power.len();
    (0..n)
        .map(|m| (power[(m + n - 1) % n] + power[m] + power[(m + 1) % n]) / 3.0)
        .collect()
}

fn window_variance(window: &[f64]) -> Result<f64> {
    if window.iter().all(|&x| x == window[0]) {
        return Err(Error::DegenerateWindow("constant window has zero sample variance"));
    }
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    Ok(window.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n)
}

fn detector1_from_spectrum(power: &[f64], window: &[f64], search: PeakSearch, exclude_dc: bool) -> Result<f64> {
    let var = window_variance(window)?;
    let peak = match search {
        PeakSearch::DcBin => power[0],
        PeakSearch::AllBins => {
            let skip = usize::from(exclude_dc);
            power[skip..].iter().copied().fold(f64::NEG_INFINITY, f64::max)
        }
    };
    Ok(peak / (window.len() as f64 * var))
}

fn band_ratio_db(power: &[f64], plan: &BandPlan, smooth3: bool) -> Result<f64> {
    let smoothed;
    let power = if smooth3 {
        smoothed = smooth_circular3(power);
        &smoothed[..]
    } else {
        power
    };
    let noise: f64 = plan.noise.iter().map(|&m| power[m]).sum();
    if noise <= 0.0 {
        return Err(Error::DegenerateWindow("noise band carries no power"));
    }
    let signal: f64 = plan.signal.iter().map(|&m| power[m]).sum();
    Ok(10.0 * (signal / noise).log10())
}

/// Detector I statistic: the searched periodogram peak divided by
/// `N sigma^2`, with `sigma^2` the maximum-likelihood window variance.
pub fn detector1_metric(window: &[f64], search: PeakSearch, exclude_dc: bool) -> Result<f64> {
    let power = periodogram(window)?;
    detector1_from_spectrum(&power, window, search, exclude_dc)
}

/// Detector II statistic: `10 log10(SP / NP)` of the window periodogram.
pub fn detector2_metric(window: &[f64], cfg: &DetectorConfig) -> Result<f64> {
    if window.len() != cfg.window_len {
        return Err(Error::invalid("window", "length differs from the configured N"));
    }
    let power = periodogram(window)?;
    band_ratio_db(&power, &cfg.band_plan(), cfg.smooth3)
}

/// VTL statistic: the Detector II pipeline applied to `|EmL|` samples.
pub fn vtl_metric(window: &[f64], cfg: &DetectorConfig) -> Result<f64> {
    detector2_metric(window, cfg)
}

/// `exp(z^2 / N) - 1` with `z` the upper `pfa/2` normal quantile. Accepts
/// `pfa = 1`, where the threshold degenerates to zero.
pub fn detector1_threshold(pfa: f64, n: usize) -> Result<f64> {
    if !(pfa > 0.0 && pfa <= 1.0) {
        return Err(Error::Domain { what: "pfa", value: pfa });
    }
    if n < 2 {
        return Err(Error::Domain {
            what: "window length",
            value: n as f64,
        });
    }
    let z = -inv_norm_cdf(0.5 * pfa)?;
    Ok((z * z / n as f64).exp_m1())
}

/// `-ln(pfa)`, accepting `pfa = 1`.
pub fn detector2_threshold(pfa: f64) -> Result<f64> {
    if !(pfa > 0.0 && pfa <= 1.0) {
        return Err(Error::Domain { what: "pfa", value: pfa });
    }
    Ok(-pfa.ln())
}

/// Metric evaluation with the FFT plan and band plan built once.
#[derive(Debug)]
pub struct WindowEvaluator {
    cfg: DetectorConfig,
    spectrum: Periodogram,
    plan: BandPlan,
}

impl WindowEvaluator {
    pub fn new(cfg: &DetectorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: *cfg,
            spectrum: Periodogram::new(cfg.window_len)?,
            plan: cfg.band_plan(),
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn metric(&mut self, window: &[f64]) -> Result<f64> {
        let power = self.spectrum.compute(window)?;
        match self.cfg.kind {
            DetectorKind::StlDetectorI => {
                detector1_from_spectrum(power, window, self.cfg.search, self.cfg.exclude_dc)
            }
            DetectorKind::StlDetectorII | DetectorKind::VtlDetector => {
                band_ratio_db(power, &self.plan, self.cfg.smooth3)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    H0,
    H1,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::H0 => "H0",
            Self::H1 => "H1",
        })
    }
}

impl std::str::FromStr for Decision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H0" => Ok(Self::H0),
            "H1" => Ok(Self::H1),
            other => Err(Error::invalid("decision", format!("expected H0 or H1, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    /// One past the epoch index of the newest sample in the window.
    pub window_end_epoch: u64,
    pub metric: f64,
    pub threshold: f64,
    pub decision: Decision,
}

impl DetectionEvent {
    pub fn new(window_end_epoch: u64, metric: f64, threshold: f64) -> Self {
        let decision = if metric > threshold { Decision::H1 } else { Decision::H0 };
        Self {
            window_end_epoch,
            metric,
            threshold,
            decision,
        }
    }
}

/// Ring buffer of the last `N` inputs that signals when a window is due.
#[derive(Debug, Clone)]
pub struct WindowBuffer {
    data: Vec<f64>,
    head: usize,
    filled: usize,
    stride: usize,
    since_emit: usize,
}

impl WindowBuffer {
    pub fn new(window_len: usize, stride: usize) -> Result<Self> {
        if window_len == 0 || stride == 0 {
            return Err(Error::invalid("window", "length and stride must be positive"));
        }
        Ok(Self {
            data: vec![0.0; window_len],
            head: 0,
            filled: 0,
            stride,
            since_emit: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.data.len()
    }

    pub fn fill_count(&self) -> usize {
        self.filled
    }

    /// Appends one value; returns true when a full window is due.
    pub fn push(&mut self, x: f64) -> bool {
        let n = self.data.len();
        self.data[self.head] = x;
        self.head = (self.head + 1) % n;
        if self.filled < n {
            self.filled += 1;
            if self.filled == n {
                self.since_emit = 0;
                return true;
            }
            return false;
        }
        self.since_emit += 1;
        if self.since_emit == self.stride {
            self.since_emit = 0;
            return true;
        }
        false
    }

    /// Copies the current window, oldest sample first.
    pub fn window_into(&self, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.data[self.head..]);
        out.extend_from_slice(&self.data[..self.head]);
    }
}

/// Stateful streaming detector for one channel.
#[derive(Debug)]
pub struct Detector {
    evaluator: WindowEvaluator,
    buffer: WindowBuffer,
    threshold: f64,
    scratch: Vec<f64>,
}

impl Detector {
    pub fn new(cfg: &DetectorConfig) -> Result<Self> {
        let evaluator = WindowEvaluator::new(cfg)?;
        Ok(Self {
            buffer: WindowBuffer::new(cfg.window_len, cfg.stride)?,
            threshold: cfg.threshold()?,
            scratch: Vec::with_capacity(cfg.window_len),
            evaluator,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn config(&self) -> &DetectorConfig {
        self.evaluator.config()
    }

    pub fn push(&mut self, sample: &CorrelatorSample) -> Result<Option<DetectionEvent>> {
        let x = self.evaluator.config().kind.input(sample);
        self.push_value(x, sample.epoch)
    }

    pub fn push_value(&mut self, x: f64, epoch: u64) -> Result<Option<DetectionEvent>> {
        if !self.buffer.push(x) {
            return Ok(None);
        }
        self.buffer.window_into(&mut self.scratch);
        let metric = self
            .evaluator
            .metric(&self.scratch)
            .map_err(|e| e.at_epoch(epoch))?;
        Ok(Some(DetectionEvent::new(epoch + 1, metric, self.threshold)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRun {
    pub events: Vec<DetectionEvent>,
    pub warning: Option<String>,
}

/// Slides a detector over a whole stream.
pub fn run_detector(stream: &[CorrelatorSample], cfg: &DetectorConfig) -> Result<DetectionRun> {
    let mut detector = Detector::new(cfg)?;
    if stream.len() < cfg.window_len {
        return Ok(DetectionRun {
            events: Vec::new(),
            warning: Some(format!(
                "stream has {} samples, fewer than the window length {}; no decisions made",
                stream.len(),
                cfg.window_len
            )),
        });
    }
    let mut events = Vec::with_capacity((stream.len() - cfg.window_len) / cfg.stride + 1);
    for sample in stream {
        if let Some(ev) = detector.push(sample)? {
            events.push(ev);
        }
    }
    Ok(DetectionRun { events, warning: None })
}
