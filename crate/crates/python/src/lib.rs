//! Python bindings for `mpdetect`: signal model, lock solvers, detectors,
//! closed-form theory and Monte Carlo estimation.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mpdetect::analytic::theory_table as core_theory_table;
use mpdetect::montecarlo::calibrate_threshold as core_calibrate;
use mpdetect::tracking::solve_lock as core_solve_lock;
use mpdetect::{
    DetectorKind, Error as CoreError, Hypothesis, PeakSearch, ThresholdMode, TrackingError, TrackingMode,
};

fn to_py(e: CoreError) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn parse_kind(s: &str) -> PyResult<DetectorKind> {
    match s.to_ascii_lowercase().as_str() {
        "d1" => Ok(DetectorKind::StlDetectorI),
        "d2" => Ok(DetectorKind::StlDetectorII),
        "vtl" => Ok(DetectorKind::VtlDetector),
        other => Err(PyValueError::new_err(format!("unknown detector {other:?}; expected d1, d2 or vtl"))),
    }
}

fn parse_mode(s: &str) -> PyResult<TrackingMode> {
    match s.to_ascii_lowercase().as_str() {
        "stl" => Ok(TrackingMode::Stl),
        "vtl" => Ok(TrackingMode::Vtl),
        other => Err(PyValueError::new_err(format!("unknown mode {other:?}; expected stl or vtl"))),
    }
}

/// Receiver front-end parameters.
#[pyclass(name = "ReceiverConfig", module = "mpdetect_py", from_py_object)]
#[derive(Clone)]
struct PyReceiverConfig {
    inner: mpdetect::ReceiverConfig,
}

#[pymethods]
impl PyReceiverConfig {
    #[new]
    #[pyo3(signature = (d=0.5, t=1e-3, f_s=2.046e6, c_over_n0_dbhz=45.0, n0=1.0))]
    fn new(d: f64, t: f64, f_s: f64, c_over_n0_dbhz: f64, n0: f64) -> PyResult<Self> {
        let inner = mpdetect::ReceiverConfig {
            half_spacing: d,
            integration_time: t,
            sampling_hz: f_s,
            c_over_n0_dbhz,
            n0,
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn d(&self) -> f64 {
        self.inner.half_spacing
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.integration_time
    }

    #[getter]
    fn f_s(&self) -> f64 {
        self.inner.sampling_hz
    }

    #[getter]
    fn c_over_n0_dbhz(&self) -> f64 {
        self.inner.c_over_n0_dbhz
    }

    /// Post-correlation LOS amplitude for a residual Doppler `delta_f`.
    #[pyo3(signature = (delta_f=0.0))]
    fn los_amplitude(&self, delta_f: f64) -> f64 {
        self.inner.los_amplitude(delta_f)
    }

    fn __repr__(&self) -> String {
        format!(
            "ReceiverConfig(d={}, t={}, f_s={}, c_over_n0_dbhz={})",
            self.inner.half_spacing, self.inner.integration_time, self.inner.sampling_hz, self.inner.c_over_n0_dbhz
        )
    }
}

/// One specular multipath ray relative to the LOS.
#[pyclass(name = "MultipathState", module = "mpdetect_py", from_py_object)]
#[derive(Clone)]
struct PyMultipathState {
    inner: mpdetect::MultipathState,
}

#[pymethods]
impl PyMultipathState {
    #[new]
    #[pyo3(signature = (alpha, delay_chips, phase_rad))]
    fn new(alpha: f64, delay_chips: f64, phase_rad: f64) -> PyResult<Self> {
        let inner = mpdetect::MultipathState::explicit(alpha, delay_chips, phase_rad);
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn none() -> Self {
        Self {
            inner: mpdetect::MultipathState::none(),
        }
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn delay_chips(&self) -> f64 {
        self.inner.delay_chips
    }

    #[getter]
    fn phase_rad(&self) -> f64 {
        self.inner.phase_rad
    }

    fn __repr__(&self) -> String {
        format!(
            "MultipathState(alpha={}, delay_chips={}, phase_rad={})",
            self.inner.alpha, self.inner.delay_chips, self.inner.phase_rad
        )
    }
}

/// Early/Prompt/Late correlator outputs for one epoch.
#[pyclass(name = "CorrelatorSample", module = "mpdetect_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyCorrelatorSample {
    inner: mpdetect::CorrelatorSample,
}

#[pymethods]
impl PyCorrelatorSample {
    #[getter]
    fn epoch(&self) -> u64 {
        self.inner.epoch
    }

    #[getter]
    fn i_e(&self) -> f64 {
        self.inner.i_e
    }

    #[getter]
    fn q_e(&self) -> f64 {
        self.inner.q_e
    }

    #[getter]
    fn i_p(&self) -> f64 {
        self.inner.i_p
    }

    #[getter]
    fn q_p(&self) -> f64 {
        self.inner.q_p
    }

    #[getter]
    fn i_l(&self) -> f64 {
        self.inner.i_l
    }

    #[getter]
    fn q_l(&self) -> f64 {
        self.inner.q_l
    }

    #[getter]
    fn i_eml(&self) -> f64 {
        self.inner.i_eml
    }

    #[getter]
    fn q_eml(&self) -> f64 {
        self.inner.q_eml
    }

    #[getter]
    fn eml_abs(&self) -> f64 {
        self.inner.eml_abs
    }

    fn __repr__(&self) -> String {
        format!(
            "CorrelatorSample(epoch={}, i_eml={}, q_eml={})",
            self.inner.epoch, self.inner.i_eml, self.inner.q_eml
        )
    }
}

/// Decision for one analysis window.
#[pyclass(name = "DetectionEvent", module = "mpdetect_py", frozen)]
struct PyDetectionEvent {
    #[pyo3(get)]
    window_end_epoch: u64,
    #[pyo3(get)]
    metric: f64,
    #[pyo3(get)]
    threshold: f64,
    #[pyo3(get)]
    decision: String,
}

#[pymethods]
impl PyDetectionEvent {
    fn __repr__(&self) -> String {
        format!(
            "DetectionEvent(window_end_epoch={}, metric={}, threshold={}, decision={})",
            self.window_end_epoch, self.metric, self.threshold, self.decision
        )
    }
}

/// Detector kind, window schedule and threshold policy.
#[pyclass(name = "DetectorConfig", module = "mpdetect_py", from_py_object)]
#[derive(Clone)]
struct PyDetectorConfig {
    inner: mpdetect::DetectorConfig,
}

#[pymethods]
impl PyDetectorConfig {
    #[new]
    #[pyo3(signature = (
        kind="d1", n=1024, stride=64, pfa=1e-2, threshold=None, exclude_dc=false, smooth3=false,
        search="dc", t=1e-3, signal_band_hz=200.0, nyquist_hz=500.0
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        kind: &str,
        n: usize,
        stride: usize,
        pfa: f64,
        threshold: Option<f64>,
        exclude_dc: bool,
        smooth3: bool,
        search: &str,
        t: f64,
        signal_band_hz: f64,
        nyquist_hz: f64,
    ) -> PyResult<Self> {
        let mut inner = mpdetect::DetectorConfig::new(parse_kind(kind)?)
            .with_window(n)
            .with_stride(stride)
            .with_pfa(pfa);
        if let Some(v) = threshold {
            inner = inner.with_threshold(ThresholdMode::Calibrated(v));
        }
        inner.exclude_dc = exclude_dc;
        inner.smooth3 = smooth3;
        inner.search = match search {
            "dc" => PeakSearch::DcBin,
            "all" => PeakSearch::AllBins,
            other => return Err(PyValueError::new_err(format!("unknown search {other:?}; expected dc or all"))),
        };
        inner.integration_time = t;
        inner.signal_band_hz = signal_band_hz;
        inner.nyquist_hz = nyquist_hz;
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind.short_name()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.window_len
    }

    #[getter]
    fn pfa(&self) -> f64 {
        self.inner.pfa
    }

    /// Decision threshold in effect (analytic or calibrated).
    fn threshold(&self) -> PyResult<f64> {
        self.inner.threshold().map_err(to_py)
    }

    /// Numbers of (signal, noise, excluded) periodogram bins.
    fn band_sizes(&self) -> (usize, usize, usize) {
        let p = self.inner.band_plan();
        (p.signal.len(), p.noise.len(), p.excluded.len())
    }

    /// Detection metric of a single window of length N.
    fn metric(&self, window: Vec<f64>) -> PyResult<f64> {
        let mut ev = mpdetect::detectors::WindowEvaluator::new(&self.inner).map_err(to_py)?;
        ev.metric(&window).map_err(to_py)
    }

    /// Runs the detector over a stream; returns the events and an optional warning.
    fn run(&self, stream: Vec<PyCorrelatorSample>) -> PyResult<(Vec<PyDetectionEvent>, Option<String>)> {
        let samples: Vec<_> = stream.into_iter().map(|s| s.inner).collect();
        let run = mpdetect::run_detector(&samples, &self.inner).map_err(to_py)?;
        let events = run
            .events
            .into_iter()
            .map(|e| PyDetectionEvent {
                window_end_epoch: e.window_end_epoch,
                metric: e.metric,
                threshold: e.threshold,
                decision: e.decision.to_string(),
            })
            .collect();
        Ok((events, run.warning))
    }

    fn __repr__(&self) -> String {
        format!(
            "DetectorConfig(kind={}, n={}, stride={}, pfa={})",
            self.inner.kind.short_name(),
            self.inner.window_len,
            self.inner.stride,
            self.inner.pfa
        )
    }
}

/// Empirical rate with a Wilson confidence interval.
#[pyclass(name = "RateEstimate", module = "mpdetect_py", frozen)]
struct PyRateEstimate {
    #[pyo3(get)]
    rate: f64,
    #[pyo3(get)]
    successes: u64,
    #[pyo3(get)]
    trials: u64,
    #[pyo3(get)]
    ci_low: f64,
    #[pyo3(get)]
    ci_high: f64,
}

#[pymethods]
impl PyRateEstimate {
    fn __repr__(&self) -> String {
        format!(
            "RateEstimate(rate={}, successes={}, trials={}, ci=[{}, {}])",
            self.rate, self.successes, self.trials, self.ci_low, self.ci_high
        )
    }
}

fn plan(
    cfg: &PyDetectorConfig,
    rc: Option<&PyReceiverConfig>,
    multipath: Option<&PyMultipathState>,
    trials: u64,
    seed: u64,
    shards: usize,
) -> mpdetect::TrialPlan {
    let hypothesis = match multipath {
        Some(mp) => Hypothesis::H1 { multipath: mp.inner },
        None => Hypothesis::H0,
    };
    let mut p = mpdetect::TrialPlan::new(cfg.inner, hypothesis, trials, seed).with_shards(shards);
    if let Some(rc) = rc {
        p.receiver = rc.inner;
    }
    p
}

#[pyfunction]
fn norm_cdf(x: f64) -> f64 {
    mpdetect::norm_cdf(x)
}

#[pyfunction]
fn inv_norm_cdf(p: f64) -> PyResult<f64> {
    mpdetect::inv_norm_cdf(p).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (x, noncentrality, dof=2))]
fn noncentral_chi2_cdf(x: f64, noncentrality: f64, dof: u32) -> PyResult<f64> {
    mpdetect::noncentral_chi2_cdf(x, noncentrality, dof).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (x, noncentrality, dof=2))]
fn noncentral_chi2_sf(x: f64, noncentrality: f64, dof: u32) -> PyResult<f64> {
    mpdetect::noncentral_chi2_sf(x, noncentrality, dof).map_err(to_py)
}

#[pyfunction]
fn detector1_pd(pfa: f64, snr: f64) -> PyResult<f64> {
    mpdetect::detector1_pd(pfa, snr).map_err(to_py)
}

#[pyfunction]
fn detector2_pd(pfa: f64, n: usize, snr: f64) -> PyResult<f64> {
    mpdetect::detector2_pd(pfa, n, snr).map_err(to_py)
}

#[pyfunction]
fn detector1_threshold(pfa: f64, n: usize) -> PyResult<f64> {
    mpdetect::detector1_threshold(pfa, n).map_err(to_py)
}

#[pyfunction]
fn detector2_threshold(pfa: f64) -> PyResult<f64> {
    mpdetect::detector2_threshold(pfa).map_err(to_py)
}

#[pyfunction]
fn autocorr(tau: f64) -> f64 {
    mpdetect::autocorr(tau)
}

/// `|X[k]|^2 / N` of a real window whose length is a power of two.
#[pyfunction]
fn periodogram(window: Vec<f64>) -> PyResult<Vec<f64>> {
    mpdetect::periodogram(&window).map_err(to_py)
}

/// Steady-state `(delta_tau, delta_phi)` of the loop under multipath.
#[pyfunction]
#[pyo3(signature = (multipath, receiver, mode="stl"))]
fn solve_lock(multipath: &PyMultipathState, receiver: &PyReceiverConfig, mode: &str) -> PyResult<(f64, f64)> {
    let lock = core_solve_lock(&multipath.inner, &receiver.inner, parse_mode(mode)?).map_err(to_py)?;
    Ok((lock.delta_tau, lock.delta_phi))
}

/// Noise-free correlator outputs at the given tracking errors.
#[pyfunction]
#[pyo3(signature = (delta_tau, delta_phi, multipath, receiver, mode="stl", delta_f=0.0))]
fn noiseless_outputs(
    delta_tau: f64,
    delta_phi: f64,
    multipath: &PyMultipathState,
    receiver: &PyReceiverConfig,
    mode: &str,
    delta_f: f64,
) -> PyResult<PyCorrelatorSample> {
    let te = TrackingError::new(delta_tau, delta_phi, delta_f);
    let inner = mpdetect::noiseless_outputs(&te, &multipath.inner, &receiver.inner, parse_mode(mode)?)
        .map_err(to_py)?;
    Ok(PyCorrelatorSample { inner })
}

/// Correlator stream for a scenario given as JSON text.
#[pyfunction]
fn simulate(scenario_json: &str) -> PyResult<Vec<PyCorrelatorSample>> {
    let sc = mpdetect::io::parse_scenario(scenario_json).map_err(to_py)?;
    let stream = mpdetect::generate_stream(&sc).map_err(to_py)?;
    Ok(stream.into_iter().map(|inner| PyCorrelatorSample { inner }).collect())
}

/// Closed-form `(pfa, snr, pd)` rows over an SNR (dB) by PFA grid.
#[pyfunction]
#[pyo3(signature = (kind, snr_db, pfa_grid, n=1024))]
fn theory_table(kind: &str, snr_db: Vec<f64>, pfa_grid: Vec<f64>, n: usize) -> PyResult<Vec<(f64, f64, f64)>> {
    let rows = core_theory_table(parse_kind(kind)?, &snr_db, &pfa_grid, n).map_err(to_py)?;
    Ok(rows.into_iter().map(|r| (r.pfa, r.snr, r.pd)).collect())
}

/// Fraction of seeded trials whose window metric exceeds the threshold.
/// Passing `multipath` simulates H1, otherwise H0.
#[pyfunction]
#[pyo3(signature = (detector, trials, seed, receiver=None, multipath=None, shards=1))]
fn empirical_rate(
    detector: &PyDetectorConfig,
    trials: u64,
    seed: u64,
    receiver: Option<&PyReceiverConfig>,
    multipath: Option<&PyMultipathState>,
    shards: usize,
) -> PyResult<PyRateEstimate> {
    let p = plan(detector, receiver, multipath, trials, seed, shards);
    let r = mpdetect::empirical_rate(&p).map_err(to_py)?;
    Ok(PyRateEstimate {
        rate: r.rate,
        successes: r.successes,
        trials: r.trials,
        ci_low: r.ci_low,
        ci_high: r.ci_high,
    })
}

/// Threshold from the empirical H0 metric quantile; returns `(threshold, warning)`.
#[pyfunction]
#[pyo3(signature = (detector, pfa, trials, seed, receiver=None, shards=1))]
fn calibrate_threshold(
    detector: &PyDetectorConfig,
    pfa: f64,
    trials: u64,
    seed: u64,
    receiver: Option<&PyReceiverConfig>,
    shards: usize,
) -> PyResult<(f64, Option<String>)> {
    let p = plan(detector, receiver, None, trials, seed, shards);
    let c = core_calibrate(&p, pfa).map_err(to_py)?;
    Ok((c.threshold, c.warning))
}

#[pymodule]
fn mpdetect_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyReceiverConfig>()?;
    m.add_class::<PyMultipathState>()?;
    m.add_class::<PyCorrelatorSample>()?;
    m.add_class::<PyDetectionEvent>()?;
    m.add_class::<PyDetectorConfig>()?;
    m.add_class::<PyRateEstimate>()?;
    m.add_function(wrap_pyfunction!(norm_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(inv_norm_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(noncentral_chi2_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(noncentral_chi2_sf, m)?)?;
    m.add_function(wrap_pyfunction!(detector1_pd, m)?)?;
    m.add_function(wrap_pyfunction!(detector2_pd, m)?)?;
    m.add_function(wrap_pyfunction!(detector1_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(detector2_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(autocorr, m)?)?;
    m.add_function(wrap_pyfunction!(periodogram, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lock, m)?)?;
    m.add_function(wrap_pyfunction!(noiseless_outputs, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(theory_table, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_rate, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_threshold, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
