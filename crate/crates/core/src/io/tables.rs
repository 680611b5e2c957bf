//! CSV tables. Every file starts with a `#` manifest comment, then a header
//! row; floats are written with 17 significant digits and LF line endings.

use std::path::Path;

use crate::analytic::TheoryPoint;
use crate::correlator::CorrelatorSample;
use crate::detectors::{Decision, DetectionEvent, DetectorKind};
use crate::error::{Error, Result};
use crate::io::manifest::RunManifest;
use crate::montecarlo::RocRow;
use crate::tracking::EnvelopeCurve;

pub const STREAM_HEADER: [&str; 10] = [
    "epoch", "i_e", "q_e", "i_p", "q_p", "i_l", "q_l", "i_eml", "q_eml", "eml_abs",
];
pub const EVENTS_HEADER: [&str; 4] = ["window_end_epoch", "metric", "threshold", "decision"];
pub const THEORY_HEADER: [&str; 6] = ["detector", "window_len", "snr_db", "snr", "pfa", "pd"];
pub const RATES_HEADER: [&str; 11] = [
    "detector",
    "window_len",
    "pfa",
    "snr",
    "threshold",
    "pd_theory",
    "pd_empirical",
    "successes",
    "trials",
    "ci_low",
    "ci_high",
];
pub const ENVELOPE_HEADER: [&str; 8] = [
    "delay_chips",
    "phase_rad",
    "delta_tau",
    "delta_phi",
    "i_eml",
    "q_eml",
    "eml_abs",
    "locked",
];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header plus rows of already formatted fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::invalid(
                "row",
                format!("has {} fields, schema has {}", row.len(), self.header.len()),
            ));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv(&self, manifest: Option<&RunManifest>) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        if let Some(m) = manifest {
            out.extend_from_slice(m.comment_line().as_bytes());
            out.push(b'\n');
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let wrap = |source| Error::Csv {
            path: "<memory>".into(),
            source,
        };
        w.write_record(&self.header).map_err(wrap)?;
        for row in &self.rows {
            w.write_record(row).map_err(wrap)?;
        }
        w.into_inner().map_err(|e| Error::Io {
            path: "<memory>".into(),
            source: e.into_error(),
        })
    }

    pub fn stream(samples: &[CorrelatorSample]) -> Self {
        let mut t = Self::new(&STREAM_HEADER);
        for s in samples {
            let mut row = vec![s.epoch.to_string()];
            row.extend(
                [s.i_e, s.q_e, s.i_p, s.q_p, s.i_l, s.q_l, s.i_eml, s.q_eml, s.eml_abs]
                    .into_iter()
                    .map(fmt_f64),
            );
            t.rows.push(row);
        }
        t
    }

    pub fn events(events: &[DetectionEvent]) -> Self {
        let mut t = Self::new(&EVENTS_HEADER);
        for e in events {
            t.rows.push(vec![
                e.window_end_epoch.to_string(),
                fmt_f64(e.metric),
                fmt_f64(e.threshold),
                e.decision.to_string(),
            ]);
        }
        t
    }

    pub fn theory(kind: DetectorKind, points: &[TheoryPoint]) -> Self {
        let mut t = Self::new(&THEORY_HEADER);
        for p in points {
            t.rows.push(vec![
                kind.to_string(),
                p.window_len.to_string(),
                fmt_f64(10.0 * p.snr.log10()),
                fmt_f64(p.snr),
                fmt_f64(p.pfa),
                fmt_f64(p.pd),
            ]);
        }
        t
    }

    pub fn rates(kind: DetectorKind, window_len: usize, rows: &[RocRow]) -> Self {
        let mut t = Self::new(&RATES_HEADER);
        for r in rows {
            let e = &r.pd_empirical;
            t.rows.push(vec![
                kind.to_string(),
                window_len.to_string(),
                fmt_f64(r.pfa),
                fmt_f64(r.snr),
                fmt_f64(r.threshold),
                r.pd_theory.map(fmt_f64).unwrap_or_default(),
                fmt_f64(e.rate),
                e.successes.to_string(),
                e.trials.to_string(),
                fmt_f64(e.ci_low),
                fmt_f64(e.ci_high),
            ]);
        }
        t
    }

    /// Envelope outputs normalised by the LOS amplitude.
    pub fn envelope(curve: &EnvelopeCurve) -> Self {
        let mut t = Self::new(&ENVELOPE_HEADER);
        let a0 = curve.los_amplitude;
        for k in 0..curve.len() {
            t.rows.push(vec![
                fmt_f64(curve.delays[k]),
                fmt_f64(curve.phases[k]),
                fmt_f64(curve.delta_tau[k]),
                fmt_f64(curve.delta_phi[k]),
                fmt_f64(curve.i_eml[k] / a0),
                fmt_f64(curve.q_eml[k] / a0),
                fmt_f64(curve.eml_abs[k] / a0),
                curve.locked[k].to_string(),
            ]);
        }
        t
    }
}

fn reader(data: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(data)
}

fn records(data: &[u8], source: &Path, expected: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = reader(data);
    let wrap = |e| Error::Csv {
        path: source.to_path_buf(),
        source: e,
    };
    let header = rdr.headers().map_err(wrap)?.clone();
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Schema {
            path: source.display().to_string(),
            reason: format!("expected columns {}, found {}", expected.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    rdr.records().collect::<std::result::Result<_, _>>().map_err(wrap)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str, source: &Path) -> Result<T> {
    rec[i].trim().parse().map_err(|_| Error::Schema {
        path: format!(
            "{}:{}:{name}",
            source.display(),
            rec.position().map(|p| p.line()).unwrap_or(0)
        ),
        reason: format!("cannot parse {:?}", &rec[i]),
    })
}

/// Parses a stream CSV written by [`Table::stream`].
pub fn read_stream(data: &[u8], source: &Path) -> Result<Vec<CorrelatorSample>> {
    records(data, source, &STREAM_HEADER)?
        .iter()
        .map(|r| {
            let f = |i: usize| field::<f64>(r, i, STREAM_HEADER[i], source);
            Ok(CorrelatorSample {
                epoch: field(r, 0, "epoch", source)?,
                i_e: f(1)?,
                q_e: f(2)?,
                i_p: f(3)?,
                q_p: f(4)?,
                i_l: f(5)?,
                q_l: f(6)?,
                i_eml: f(7)?,
                q_eml: f(8)?,
                eml_abs: f(9)?,
            })
        })
        .collect()
}

/// Parses an events CSV written by [`Table::events`].
pub fn read_events(data: &[u8], source: &Path) -> Result<Vec<DetectionEvent>> {
    records(data, source, &EVENTS_HEADER)?
        .iter()
        .map(|r| {
            Ok(DetectionEvent {
                window_end_epoch: field(r, 0, "window_end_epoch", source)?,
                metric: field(r, 1, "metric", source)?,
                threshold: field(r, 2, "threshold", source)?,
                decision: field::<Decision>(r, 3, "decision", source)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let bytes = Table::events(&[]).to_csv(None).unwrap();
        assert_eq!(bytes, b"window_end_epoch,metric,threshold,decision\n");
    }

    #[test]
    fn manifest_comment_comes_first() {
        let m = RunManifest::new("detect", &["detect".into()], &[], None, Some(3));
        let bytes = Table::events(&[]).to_csv(Some(&m)).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# mpdetect"));
        assert_eq!(lines.next().unwrap(), "window_end_epoch,metric,threshold,decision");
        assert!(!text.contains('\r'));
    }

    #[test]
    fn stream_round_trip_is_exact() {
        let samples: Vec<CorrelatorSample> = (0..5)
            .map(|k| {
                let x = 0.1 * k as f64 + 1.0 / 3.0;
                CorrelatorSample::from_arms(k, x, -x * 1e-300, x.sqrt(), 1e17 * x, -x, x.exp())
            })
            .collect();
        let bytes = Table::stream(&samples).to_csv(None).unwrap();
        assert_eq!(read_stream(&bytes, Path::new("s.csv")).unwrap(), samples);
    }

    #[test]
    fn events_round_trip_is_exact() {
        let events = vec![
            DetectionEvent::new(64, 0.1234567890123, 0.05),
            DetectionEvent::new(128, -3.0, 4.6),
        ];
        let bytes = Table::events(&events).to_csv(None).unwrap();
        assert_eq!(read_events(&bytes, Path::new("e.csv")).unwrap(), events);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_stream(b"a,b\n1,2\n", Path::new("x.csv")).is_err());
        let mut t = Table::new(&["a", "b"]);
        assert!(t.push(vec!["1".into()]).is_err());
    }
}
