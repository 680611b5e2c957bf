//! Scenario documents.
//!
//! ```json
//! {
//!   "duration_s": 60.0,
//!   "mode": "STL",
//!   "receiver": {"d": 0.5, "T": 0.001, "f_s": 2046000.0, "c_over_n0_dbhz": 45.0},
//!   "segments": [
//!     {"start_s": 0.0, "alpha": 0.0},
//!     {"start_s": 30.0, "alpha": 0.5, "delta_M_chips": 0.25, "theta_M_deg": 60.0}
//!   ],
//!   "seed": 7
//! }
//! ```
//!
//! Angles are given in degrees; `"phase_model": "delay_derived"` replaces
//! `theta_M_deg` with the carrier phase implied by the path delay.

use serde::{Deserialize, Serialize};

use crate::correlator::{CarrierConstants, MultipathState, ReceiverConfig, TrackingMode};
use crate::error::{Error, Result};
use crate::tracking::{ScenarioConfig, Segment};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    duration_s: f64,
    mode: TrackingMode,
    receiver: ReceiverDoc,
    segments: Vec<SegmentDoc>,
    seed: u64,
    #[serde(default)]
    label: Option<String>,
}

fn default_t() -> f64 {
    1e-3
}

fn default_n0() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReceiverDoc {
    d: f64,
    #[serde(rename = "T", default = "default_t")]
    t: f64,
    f_s: f64,
    c_over_n0_dbhz: f64,
    #[serde(rename = "N0", default = "default_n0")]
    n0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PhaseModelDoc {
    Explicit,
    DelayDerived,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct SegmentDoc {
    start_s: f64,
    alpha: f64,
    #[serde(default)]
    delta_M_chips: Option<f64>,
    #[serde(default)]
    theta_M_deg: Option<f64>,
    #[serde(default)]
    phase_model: Option<PhaseModelDoc>,
}

fn schema(path: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        reason: reason.into(),
    }
}

fn finite(path: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(schema(path, "must be a finite number"))
    }
}

impl SegmentDoc {
    fn to_multipath(&self, path: &str) -> Result<MultipathState> {
        let alpha = finite(&format!("{path}.alpha"), self.alpha)?;
        if alpha < 0.0 {
            return Err(schema(format!("{path}.alpha"), "must be >= 0"));
        }
        let delay = finite(&format!("{path}.delta_M_chips"), self.delta_M_chips.unwrap_or(0.0))?;
        if delay < 0.0 {
            return Err(schema(format!("{path}.delta_M_chips"), "must be >= 0"));
        }
        if alpha > 0.0 && self.delta_M_chips.is_none() {
            return Err(schema(path, "delta_M_chips is required when alpha > 0"));
        }
        match (self.phase_model, self.theta_M_deg) {
            (Some(PhaseModelDoc::DelayDerived), Some(_)) => Err(schema(
                format!("{path}.theta_M_deg"),
                "not allowed together with phase_model \"delay_derived\"",
            )),
            (Some(PhaseModelDoc::DelayDerived), None) => {
                Ok(MultipathState::delay_derived(alpha, delay, &CarrierConstants::default()))
            }
            (_, Some(deg)) => {
                let deg = finite(&format!("{path}.theta_M_deg"), deg)?;
                Ok(MultipathState::explicit(alpha, delay, deg.to_radians()))
            }
            (_, None) if alpha > 0.0 => Err(schema(
                path,
                "theta_M_deg or phase_model \"delay_derived\" is required when alpha > 0",
            )),
            (_, None) => Ok(MultipathState::explicit(alpha, delay, 0.0)),
        }
    }
}

/// Parses and validates a scenario document. Errors carry the JSON path of
/// the offending value, e.g. `segments[1].start_s`.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ScenarioDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema(if path.is_empty() { "." } else { &path }.to_string(), e.inner().to_string())
    })?;

    let duration = finite("duration_s", doc.duration_s)?;
    if duration <= 0.0 {
        return Err(schema("duration_s", "must be positive"));
    }
    let r = &doc.receiver;
    let receiver = ReceiverConfig {
        half_spacing: finite("receiver.d", r.d)?,
        integration_time: finite("receiver.T", r.t)?,
        sampling_hz: finite("receiver.f_s", r.f_s)?,
        c_over_n0_dbhz: finite("receiver.c_over_n0_dbhz", r.c_over_n0_dbhz)?,
        n0: finite("receiver.N0", r.n0)?,
    };
    receiver
        .validate()
        .map_err(|e| schema("receiver", e.to_string()))?;

    if doc.segments.is_empty() {
        return Err(schema("segments", "at least one segment is required"));
    }
    let mut segments = Vec::with_capacity(doc.segments.len());
    for (i, seg) in doc.segments.iter().enumerate() {
        let path = format!("segments[{i}]");
        let start = finite(&format!("{path}.start_s"), seg.start_s)?;
        if i == 0 && start != 0.0 {
            return Err(schema(format!("{path}.start_s"), "the first segment must start at 0"));
        }
        if i > 0 && start <= doc.segments[i - 1].start_s {
            return Err(schema(
                format!("{path}.start_s"),
                format!("segments must be in increasing start order ({start} after {})", doc.segments[i - 1].start_s),
            ));
        }
        if start >= duration {
            return Err(schema(format!("{path}.start_s"), "must lie before duration_s"));
        }
        segments.push(Segment {
            start_s: start,
            multipath: seg.to_multipath(&path)?,
        });
    }

    let sc = ScenarioConfig {
        label: doc.label.unwrap_or_default(),
        duration_s: duration,
        receiver,
        mode: doc.mode,
        segments,
        seed: doc.seed,
    };
    sc.validate().map_err(|e| schema(".", e.to_string()))?;
    Ok(sc)
}
