//! Synthetic GPS correlator streams under specular multipath, FFT-based
//! multipath detectors for scalar and vector tracking loops, and the
//! closed-form detection theory used to validate them.
//!
//! The crate is organised bottom-up:
//!
//! * [`correlator`] – signal model, Early/Prompt/Late outputs and noise.
//! * [`tracking`] – steady-state lock points, envelope sweeps, scenario streams.
//! * [`detectors`] – periodogram, Detector I/II, VTL detector, window scheduling.
//! * [`analytic`] – special functions, post-correlation SNR, PD curves.
//! * [`montecarlo`] – false-alarm/detection rate estimation and calibration.
//! * [`io`] and [`cli`] – scenario JSON, CSV/SVG emission, command-line front end.

pub mod analytic;
pub mod cli;
pub mod correlator;
pub mod detectors;
pub mod error;
pub mod io;
pub mod montecarlo;
pub mod tracking;

pub use analytic::{
    detector1_pd, detector2_pd, inv_norm_cdf, noncentral_chi2_cdf, noncentral_chi2_sf, norm_cdf,
    postcorr_snr, SnrInputs, TheoryPoint,
};
pub use correlator::{
    autocorr, draw_noise, noiseless_outputs, sample_epoch, CarrierConstants, CorrelatorSample,
    MultipathState, NoiseModel, NoiseSource, PhaseModel, ReceiverConfig, TrackingError,
    TrackingMode,
};
pub use detectors::{
    detector1_metric, detector1_threshold, detector2_metric, detector2_threshold, periodogram,
    run_detector, vtl_metric, Decision, DetectionEvent, DetectionRun, Detector, DetectorConfig,
    DetectorKind, PeakSearch, ThresholdMode, WindowBuffer,
};
pub use error::{Error, Result};
pub use montecarlo::{calibrate_threshold, empirical_rate, roc_curve, Hypothesis, RateEstimate, TrialPlan};
pub use tracking::{
    envelope_sweep, generate_stream, solve_stl_lock, EnvelopeCurve, LockPoint, ScenarioConfig,
    Segment,
};
