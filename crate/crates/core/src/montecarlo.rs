//! Monte Carlo estimation of false-alarm and detection rates.
//!
//! Each trial draws one fresh window of `N` epochs around the noiseless
//! lock point of the plan's hypothesis. Trial `i` is seeded with
//! `base_seed ^ i`, so results never depend on how trials are sharded.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{postcorr_snr, theoretical_pd, SnrInputs};
use crate::correlator::{
    CorrelatorSample, MultipathState, NoiseModel, NoiseSource, ReceiverConfig, TrackingMode,
};
use crate::detectors::{DetectorConfig, DetectorKind, ThresholdMode, WindowEvaluator};
use crate::error::{Error, Result};
use crate::tracking::locked_outputs;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1 { multipath: MultipathState },
}

impl Hypothesis {
    pub fn multipath(&self) -> MultipathState {
        match self {
            Self::H0 => MultipathState::none(),
            Self::H1 { multipath } => *multipath,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub detector: DetectorConfig,
    pub receiver: ReceiverConfig,
    pub hypothesis: Hypothesis,
    pub trials: u64,
    /// Trial `i` uses seed `base_seed ^ i`; plans meant to be independent
    /// should use bases that differ above the bits spanned by `trials`.
    pub base_seed: u64,
    pub shards: usize,
}

/// Tracking loop architecture implied by the detector.
pub fn mode_for(kind: DetectorKind) -> TrackingMode {
    match kind {
        DetectorKind::VtlDetector => TrackingMode::Vtl,
        DetectorKind::StlDetectorI | DetectorKind::StlDetectorII => TrackingMode::Stl,
    }
}

impl TrialPlan {
    pub fn new(detector: DetectorConfig, hypothesis: Hypothesis, trials: u64, base_seed: u64) -> Self {
        Self {
            detector,
            receiver: ReceiverConfig::default(),
            hypothesis,
            trials,
            base_seed,
            shards: 1,
        }
    }

    pub fn with_shards(mut self, shards: usize) -> Self {
        self.shards = shards;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        self.receiver.validate()?;
        self.hypothesis.multipath().validate()?;
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        if self.shards == 0 {
            return Err(Error::invalid("shards", "must be at least 1"));
        }
        Ok(())
    }

    pub fn mode(&self) -> TrackingMode {
        mode_for(self.detector.kind)
    }

    /// Inputs to the post-correlation SNR at the plan's lock point.
    pub fn snr_inputs(&self) -> Result<SnrInputs> {
        let mp = self.hypothesis.multipath();
        let (lock, _) = locked_outputs(&mp, &self.receiver, self.mode())?;
        Ok(SnrInputs::at_lock(&self.receiver, &mp, &lock, self.detector.window_len))
    }

    /// SNR in the convention of the detector's closed-form PD: the
    /// non-centrality of the Detector I statistic (a DC level, twice the
    /// sinusoid-convention SNR) or the post-correlation SNR for Detector II.
    /// `None` for the VTL detector, which has no closed form.
    pub fn statistic_snr(&self) -> Result<Option<f64>> {
        let snr = postcorr_snr(&self.snr_inputs()?)?;
        Ok(match self.detector.kind {
            DetectorKind::StlDetectorI => Some(2.0 * snr),
            DetectorKind::StlDetectorII => Some(snr),
            DetectorKind::VtlDetector => None,
        })
    }

    /// Returns a copy whose C/N0 is shifted so `statistic_snr` equals `target`.
    pub fn scaled_to_statistic_snr(&self, target: f64) -> Result<Self> {
        if !(target.is_finite() && target > 0.0) {
            return Err(Error::Domain {
                what: "target snr",
                value: target,
            });
        }
        let current = self.statistic_snr()?.ok_or_else(|| {
            Error::invalid("detector", "the VTL detector has no SNR to scale against")
        })?;
        if current <= 0.0 {
            return Err(Error::invalid(
                "hypothesis",
                "multipath geometry yields zero quadrature EmL amplitude; SNR cannot be scaled",
            ));
        }
        let mut plan = *self;
        plan.receiver.c_over_n0_dbhz += 10.0 * (target / current).log10();
        Ok(plan)
    }
}

/// Binomial proportion with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rate: f64,
    pub successes: u64,
    pub trials: u64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl RateEstimate {
    /// 95% Wilson interval.
    pub fn new(successes: u64, trials: u64) -> Self {
        Self::wilson(successes, trials, Z95)
    }

    /// Wilson interval at normal quantile `z`.
    pub fn wilson(successes: u64, trials: u64, z: f64) -> Self {
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        Self {
            rate: p,
            successes,
            trials,
            ci_low: (centre - half).clamp(0.0, p),
            ci_high: (centre + half).clamp(p, 1.0),
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }
}

fn window_values(
    evaluator: &mut WindowEvaluator,
    locked: &CorrelatorSample,
    rc: &ReceiverConfig,
    seed: u64,
    buf: &mut Vec<f64>,
) -> Result<f64> {
    let cfg = *evaluator.config();
    let mut source = NoiseSource::new(&NoiseModel::from_receiver(rc, seed)?)?;
    buf.clear();
    for k in 0..cfg.window_len {
        let sample = locked.with_noise(&source.next_epoch(), k as u64);
        buf.push(cfg.kind.input(&sample));
    }
    evaluator.metric(buf)
}

/// Detector metric of every trial, in trial order.
pub fn trial_metrics(plan: &TrialPlan) -> Result<Vec<f64>> {
    plan.validate()?;
    let (_, locked) = locked_outputs(&plan.hypothesis.multipath(), &plan.receiver, plan.mode())?;
    let shards = plan.shards as u64;
    let per = plan.trials.div_ceil(shards);
    let parts: Vec<Result<Vec<f64>>> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let lo = (s * per).min(plan.trials);
            let hi = ((s + 1) * per).min(plan.trials);
            let mut evaluator = WindowEvaluator::new(&plan.detector)?;
            let mut buf = Vec::with_capacity(plan.detector.window_len);
            (lo..hi)
                .map(|i| {
                    window_values(&mut evaluator, &locked, &plan.receiver, plan.base_seed ^ i, &mut buf)
                        .map_err(|e| e.at_epoch(i))
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(plan.trials as usize);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

fn exceedances(metrics: &[f64], threshold: f64) -> u64 {
    metrics.iter().filter(|&&m| m > threshold).count() as u64
}

/// Fraction of trials deciding H1 at the plan's threshold.
pub fn empirical_rate(plan: &TrialPlan) -> Result<RateEstimate> {
    let threshold = plan.detector.threshold()?;
    let metrics = trial_metrics(plan)?;
    Ok(RateEstimate::new(exceedances(&metrics, threshold), plan.trials))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocRow {
    pub pfa: f64,
    /// SNR used for the closed-form PD (detector convention, linear).
    pub snr: f64,
    pub threshold: f64,
    pub pd_theory: Option<f64>,
    pub pd_empirical: RateEstimate,
}

/// Theoretical and empirical PD for each analytic threshold in `pfa_grid`.
/// The trial metrics are computed once and re-thresholded per row.
pub fn roc_curve(plan: &TrialPlan, pfa_grid: &[f64]) -> Result<Vec<RocRow>> {
    if pfa_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("pfa grid", "must be strictly increasing"));
    }
    let snr = plan.statistic_snr()?;
    let metrics = trial_metrics(plan)?;
    pfa_grid
        .iter()
        .map(|&pfa| {
            let cfg = plan
                .detector
                .with_pfa(pfa)
                .with_threshold(ThresholdMode::Analytic);
            cfg.validate()?;
            let threshold = cfg.threshold()?;
            let pd_theory = match snr {
                Some(s) => Some(theoretical_pd(cfg.kind, pfa, cfg.window_len, s)?),
                None => None,
            };
            Ok(RocRow {
                pfa,
                snr: snr.unwrap_or(f64::NAN),
                threshold,
                pd_theory,
                pd_empirical: RateEstimate::new(exceedances(&metrics, threshold), plan.trials),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    pub target_pfa: f64,
    pub trials: u64,
    pub warning: Option<String>,
}

/// Empirical `(1 - target_pfa)` quantile of the H0 metric: the smallest
/// order statistic that at most `target_pfa * trials` metrics exceed.
pub fn calibrate_threshold(plan: &TrialPlan, target_pfa: f64) -> Result<Calibration> {
    if !(target_pfa > 0.0 && target_pfa < 1.0) {
        return Err(Error::invalid("pfa", format!("must lie in (0, 1), got {target_pfa}")));
    }
    if plan.hypothesis != Hypothesis::H0 {
        return Err(Error::invalid("hypothesis", "calibration needs noise-only (H0) trials"));
    }
    let mut metrics = trial_metrics(plan)?;
    metrics.sort_by(f64::total_cmp);
    let n = metrics.len();
    let k = ((n as f64 * (1.0 - target_pfa)).ceil() as usize).clamp(1, n) - 1;
    let recommended = (100.0 / target_pfa).ceil();
    let warning = ((plan.trials as f64) < recommended).then(|| {
        format!(
            "{} trials is below the recommended {} for pfa {}",
            plan.trials, recommended, target_pfa
        )
    });
    Ok(Calibration {
        threshold: metrics[k],
        target_pfa,
        trials: plan.trials,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h0_plan(kind: DetectorKind, n: usize, trials: u64) -> TrialPlan {
        TrialPlan::new(DetectorConfig::new(kind).with_window(n), Hypothesis::H0, trials, 42)
    }

    #[test]
    fn wilson_bounds() {
        let r = RateEstimate::new(0, 1);
        assert_eq!(r.rate, 0.0);
        assert_eq!(r.ci_low, 0.0);
        assert!(r.ci_high > 0.0 && r.ci_high < 1.0);
        let r = RateEstimate::new(1, 1);
        assert_eq!(r.ci_high, 1.0);
        assert!(r.ci_low > 0.0);
        let r = RateEstimate::new(50, 100);
        assert!(r.contains(0.5));
        assert!((r.ci_high - 0.5967).abs() < 1e-3);
    }

    #[test]
    fn shard_invariance() {
        let plan = h0_plan(DetectorKind::StlDetectorI, 64, 200);
        let one = trial_metrics(&plan).unwrap();
        for shards in [4, 16, 7] {
            assert_eq!(one, trial_metrics(&plan.with_shards(shards)).unwrap());
        }
    }

    #[test]
    fn single_trial_is_degenerate_but_valid() {
        let r = empirical_rate(&h0_plan(DetectorKind::StlDetectorI, 64, 1)).unwrap();
        assert!(r.rate == 0.0 || r.rate == 1.0);
        assert!(r.ci_low <= r.rate && r.rate <= r.ci_high);
    }

    #[test]
    fn invalid_plans() {
        assert!(empirical_rate(&h0_plan(DetectorKind::StlDetectorI, 64, 0)).is_err());
        assert!(empirical_rate(&h0_plan(DetectorKind::StlDetectorI, 64, 10).with_shards(0)).is_err());
    }

    #[test]
    fn median_calibration() {
        let plan = h0_plan(DetectorKind::StlDetectorII, 256, 301);
        let cal = calibrate_threshold(&plan, 0.5).unwrap();
        let mut m = trial_metrics(&plan).unwrap();
        m.sort_by(f64::total_cmp);
        assert_eq!(cal.threshold, m[150]);
        assert!(cal.warning.is_none());
        assert!(calibrate_threshold(&plan, 0.01).unwrap().warning.is_some());
    }

    #[test]
    fn calibration_rejects_h1() {
        let mp = MultipathState::explicit(0.5, 0.3, 1.0);
        let plan = TrialPlan::new(
            DetectorConfig::new(DetectorKind::StlDetectorI),
            Hypothesis::H1 { multipath: mp },
            10,
            1,
        );
        assert!(calibrate_threshold(&plan, 0.1).is_err());
    }

    #[test]
    fn snr_scaling_hits_target() {
        let mp = MultipathState::explicit(0.5, 0.3, 1.0);
        let plan = TrialPlan::new(
            DetectorConfig::new(DetectorKind::StlDetectorI).with_window(256),
            Hypothesis::H1 { multipath: mp },
            10,
            1,
        );
        let scaled = plan.scaled_to_statistic_snr(10.0).unwrap();
        let snr = scaled.statistic_snr().unwrap().unwrap();
        assert!((snr - 10.0).abs() < 1e-9 * 10.0, "{snr}");
        assert!(h0_plan(DetectorKind::StlDetectorI, 256, 1).scaled_to_statistic_snr(10.0).is_err());
    }

    #[test]
    fn roc_null_row_matches_pfa() {
        let plan = h0_plan(DetectorKind::StlDetectorI, 64, 50);
        let rows = roc_curve(&plan, &[0.01, 0.1]).unwrap();
        assert_eq!(rows.len(), 2);
        for r in rows {
            assert!((r.pd_theory.unwrap() - r.pfa).abs() < 1e-12);
        }
        assert!(roc_curve(&plan, &[0.1, 0.01]).is_err());
    }
}
