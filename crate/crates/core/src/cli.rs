//! Command-line front end.
//!
//! Exit status: 0 on success, 1 on usage or validation errors, 2 on runtime
//! errors (I/O, solver failures).

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analytic::{theory_table, TheoryPoint};
use crate::correlator::{MultipathState, ReceiverConfig, TrackingMode};
use crate::detectors::{run_detector, DetectorConfig, DetectorKind, PeakSearch, ThresholdMode};
use crate::error::{Error, Result};
use crate::io::{
    parse_scenario, read_file, read_stream, render_svg, write_file, PlotKind, PlotSpec, RunManifest, Series,
    Table,
};
use crate::montecarlo::{calibrate_threshold, roc_curve, Hypothesis, TrialPlan};
use crate::tracking::{envelope_sweep, generate_stream};

#[derive(Debug, Parser)]
#[command(name = "mpdetect", version, about = "GPS multipath detection: simulation, detectors and theory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a correlator stream CSV from a scenario JSON file.
    Simulate(SimulateArgs),
    /// Run a detector over a stream CSV and write decision events.
    Detect(DetectArgs),
    /// Sweep noiseless EmL outputs against multipath delay.
    Envelope(EnvelopeArgs),
    /// Tabulate closed-form detection probabilities.
    Theory(TheoryArgs),
    /// Estimate detection rates by Monte Carlo and compare with theory.
    Montecarlo(MonteCarloArgs),
    /// Calibrate a threshold from noise-only trials; prints it on stdout.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DetectorArg {
    D1,
    D2,
    Vtl,
}

impl From<DetectorArg> for DetectorKind {
    fn from(d: DetectorArg) -> Self {
        match d {
            DetectorArg::D1 => DetectorKind::StlDetectorI,
            DetectorArg::D2 => DetectorKind::StlDetectorII,
            DetectorArg::Vtl => DetectorKind::VtlDetector,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SearchArg {
    Dc,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Stl,
    Vtl,
}

impl From<ModeArg> for TrackingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Stl => TrackingMode::Stl,
            ModeArg::Vtl => TrackingMode::Vtl,
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output stream CSV (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Detector settings shared by `detect`, `montecarlo` and `calibrate`.
#[derive(Debug, Args)]
struct DetectorArgs {
    #[arg(long, value_enum, default_value_t = DetectorArg::D1)]
    detector: DetectorArg,
    /// Window length N (power of two).
    #[arg(long = "N", default_value_t = 1024)]
    n: usize,
    /// Samples between consecutive windows.
    #[arg(long, default_value_t = 64)]
    stride: usize,
    /// Exclude the DC bin (Detector I all-bins search, Detector II, VTL).
    #[arg(long)]
    exclude_dc: bool,
    /// Detector I peak search.
    #[arg(long, value_enum, default_value_t = SearchArg::Dc)]
    search: SearchArg,
    /// 3-bin moving average of the periodogram before band sums.
    #[arg(long)]
    smooth3: bool,
    /// Integration time per epoch, seconds.
    #[arg(long = "T", default_value_t = 1e-3)]
    t: f64,
    #[arg(long, default_value_t = 200.0)]
    signal_band_hz: f64,
    #[arg(long, default_value_t = 500.0)]
    nyquist_hz: f64,
}

impl DetectorArgs {
    fn config(&self, pfa: f64, threshold: Option<f64>) -> DetectorConfig {
        let mut cfg = DetectorConfig::new(self.detector.into())
            .with_window(self.n)
            .with_stride(self.stride)
            .with_pfa(pfa);
        cfg.exclude_dc = self.exclude_dc;
        cfg.search = match self.search {
            SearchArg::Dc => PeakSearch::DcBin,
            SearchArg::All => PeakSearch::AllBins,
        };
        cfg.smooth3 = self.smooth3;
        cfg.integration_time = self.t;
        cfg.signal_band_hz = self.signal_band_hz;
        cfg.nyquist_hz = self.nyquist_hz;
        if let Some(v) = threshold {
            cfg.threshold_mode = ThresholdMode::Calibrated(v);
        }
        cfg
    }
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// Stream CSV produced by `simulate`.
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    detector: DetectorArgs,
    /// Probability of false alarm for the analytic threshold.
    #[arg(long, default_value_t = 1e-2)]
    pfa: f64,
    /// Calibrated threshold overriding the analytic one.
    #[arg(long, visible_alias = "calibrated")]
    threshold: Option<f64>,
    /// Output events CSV (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Receiver settings for subcommands that synthesise their own samples.
#[derive(Debug, Args)]
struct ReceiverArgs {
    /// Half Early-Late spacing, chips.
    #[arg(long, default_value_t = 0.5)]
    d: f64,
    /// Carrier-to-noise density, dB-Hz.
    #[arg(long, default_value_t = 45.0)]
    cn0: f64,
    /// Baseband sampling frequency, Hz.
    #[arg(long, default_value_t = 2.046e6)]
    fs: f64,
}

impl ReceiverArgs {
    fn config(&self, integration_time: f64) -> ReceiverConfig {
        ReceiverConfig {
            half_spacing: self.d,
            integration_time,
            sampling_hz: self.fs,
            c_over_n0_dbhz: self.cn0,
            n0: 1.0,
        }
    }
}

#[derive(Debug, Args)]
struct EnvelopeArgs {
    /// Multipath-to-LOS amplitude ratio.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Stl)]
    mode: ModeArg,
    /// Largest multipath delay, chips (at most 1.5).
    #[arg(long, default_value_t = 1.5)]
    delay_max: f64,
    #[arg(long, default_value_t = 301)]
    points: usize,
    /// Carrier cycles per chip of multipath delay.
    #[arg(long, default_value_t = 25.0)]
    cycles_per_chip: f64,
    #[command(flatten)]
    receiver: ReceiverArgs,
    /// Output curve CSV (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TheoryArgs {
    #[arg(long, value_enum, default_value_t = DetectorArg::D1)]
    detector: DetectorArg,
    /// SNR values in dB: `v`, `v1,v2`, `list:v1,v2`, `lin:a:b:n` or `log:a:b:n`.
    #[arg(long, default_value = "list:1,5,10,20")]
    snr_db: String,
    #[arg(long, default_value = "log:1e-8:1e-1:50")]
    pfa_grid: String,
    #[arg(long = "N", default_value_t = 1024)]
    n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MultipathArgs {
    /// Multipath-to-LOS amplitude ratio under H1.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Multipath delay under H1, chips.
    #[arg(long, default_value_t = 0.3)]
    delay: f64,
    /// Multipath phase under H1, degrees.
    #[arg(long, default_value_t = 60.0)]
    theta_deg: f64,
}

#[derive(Debug, Args)]
struct MonteCarloArgs {
    #[command(flatten)]
    detector: DetectorArgs,
    #[arg(long, default_value = "list:0.01,0.1")]
    pfa_grid: String,
    /// Simulate H1 (multipath present) instead of noise only.
    #[arg(long)]
    h1: bool,
    /// Statistic SNR in dB under H1; rescales C/N0 and implies --h1.
    #[arg(long)]
    snr_db: Option<f64>,
    #[command(flatten)]
    multipath: MultipathArgs,
    #[command(flatten)]
    receiver: ReceiverArgs,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    shards: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    detector: DetectorArgs,
    /// Target probability of false alarm.
    #[arg(long, default_value_t = 1e-2)]
    pfa: f64,
    #[command(flatten)]
    receiver: ReceiverArgs,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    shards: usize,
}

/// Parses a value grid: `v`, `v1,v2,...`, `list:v1,v2`, `lin:a:b:n`, `log:a:b:n`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |reason: String| Error::invalid("grid", format!("{spec:?}: {reason}"));
    let number = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(format!("{s:?} is not a finite number")))
    };
    let ranged = |body: &str, log: bool| -> Result<Vec<f64>> {
        let parts: Vec<&str> = body.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:stop:count".into()));
        }
        let (a, b) = (number(parts[0])?, number(parts[1])?);
        let n: usize = parts[2]
            .trim()
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| bad("count must be a positive integer".into()))?;
        if log && !(a > 0.0 && b > 0.0) {
            return Err(bad("log grid bounds must be positive".into()));
        }
        let (lo, hi) = if log { (a.log10(), b.log10()) } else { (a, b) };
        Ok((0..n)
            .map(|k| {
                let f = if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 };
                let v = lo + f * (hi - lo);
                if log {
                    10f64.powf(v)
                } else {
                    v
                }
            })
            .collect())
    };
    if let Some(body) = spec.strip_prefix("log:") {
        ranged(body, true)
    } else if let Some(body) = spec.strip_prefix("lin:") {
        ranged(body, false)
    } else {
        let body = spec.strip_prefix("list:").unwrap_or(spec);
        let values: Vec<f64> = body.split(',').map(number).collect::<Result<_>>()?;
        if values.is_empty() {
            return Err(bad("empty list".into()));
        }
        Ok(values)
    }
}

fn emit(bytes: &[u8], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_file(path, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes).and_then(|_| stdout.flush()).map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}

fn path_string(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

/// Runs the CLI on `argv` (including the program name) and returns the exit status.
pub fn dispatch(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let args = argv.get(1..).unwrap_or_default();
    match run(cli.command, args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

fn run(command: Command, argv: &[String]) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a, argv),
        Command::Detect(a) => detect(a, argv),
        Command::Envelope(a) => envelope(a, argv),
        Command::Theory(a) => theory(a, argv),
        Command::Montecarlo(a) => montecarlo(a, argv),
        Command::Calibrate(a) => calibrate(a, argv),
    }
}

fn simulate(a: SimulateArgs, argv: &[String]) -> Result<()> {
    let bytes = read_file(&a.scenario)?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Error::Schema {
        path: a.scenario.display().to_string(),
        reason: "not valid UTF-8".into(),
    })?;
    let sc = parse_scenario(&text)?;
    let stream = generate_stream(&sc)?;
    let manifest = RunManifest::new(
        "simulate",
        argv,
        &[(a.scenario.display().to_string(), bytes)],
        path_string(&a.out),
        Some(sc.seed),
    );
    emit(&Table::stream(&stream).to_csv(Some(&manifest))?, a.out.as_deref())
}

fn detect(a: DetectArgs, argv: &[String]) -> Result<()> {
    let cfg = a.detector.config(a.pfa, a.threshold);
    cfg.validate()?;
    let bytes = read_file(&a.input)?;
    let stream = read_stream(&bytes, &a.input)?;
    let run = run_detector(&stream, &cfg)?;
    if let Some(w) = &run.warning {
        eprintln!("warning: {w}");
    }
    let manifest = RunManifest::new(
        "detect",
        argv,
        &[(a.input.display().to_string(), bytes)],
        path_string(&a.out),
        None,
    );
    emit(&Table::events(&run.events).to_csv(Some(&manifest))?, a.out.as_deref())
}

fn envelope(a: EnvelopeArgs, argv: &[String]) -> Result<()> {
    if a.points < 2 {
        return Err(Error::invalid("points", "need at least 2"));
    }
    if !(a.delay_max > 0.0 && a.delay_max <= 1.5) {
        return Err(Error::invalid("delay-max", "must lie in (0, 1.5] chips"));
    }
    let rc = a.receiver.config(1e-3);
    let grid: Vec<f64> = (0..a.points)
        .map(|k| a.delay_max * k as f64 / (a.points - 1) as f64)
        .collect();
    let mode: TrackingMode = a.mode.into();
    let curve = envelope_sweep(a.alpha, &rc, mode, &grid, a.cycles_per_chip)?;
    let manifest = RunManifest::new("envelope", argv, &[], path_string(&a.out), None);
    emit(&Table::envelope(&curve).to_csv(Some(&manifest))?, a.out.as_deref())?;
    if let Some(svg_path) = &a.svg {
        let (kind, name) = match mode {
            TrackingMode::Stl => (PlotKind::EnvelopeFig1, "STL"),
            TrackingMode::Vtl => (PlotKind::EnvelopeFig2, "VTL"),
        };
        let spec = PlotSpec::new(
            kind,
            format!("{name} EmL outputs, alpha = {}, d = {}", a.alpha, a.receiver.d),
        );
        let norm = |v: &[f64]| v.iter().map(|x| x / curve.los_amplitude).collect::<Vec<_>>();
        let series = [
            Series::new("I_EmL", grid.clone(), norm(&curve.i_eml)),
            Series::new("Q_EmL", grid.clone(), norm(&curve.q_eml)),
            Series::new("|EmL|", grid.clone(), norm(&curve.eml_abs)),
        ];
        write_file(svg_path, render_svg(&spec, &series)?.as_bytes())?;
    }
    Ok(())
}

fn roc_kind(kind: DetectorKind) -> PlotKind {
    match kind {
        DetectorKind::StlDetectorII => PlotKind::RocFig4,
        _ => PlotKind::RocFig3,
    }
}

fn theory(a: TheoryArgs, argv: &[String]) -> Result<()> {
    let kind: DetectorKind = a.detector.into();
    let snrs = parse_grid(&a.snr_db)?;
    let pfas = parse_grid(&a.pfa_grid)?;
    let rows = theory_table(kind, &snrs, &pfas, a.n)?;
    let manifest = RunManifest::new("theory", argv, &[], path_string(&a.out), None);
    emit(&Table::theory(kind, &rows).to_csv(Some(&manifest))?, a.out.as_deref())?;
    if let Some(svg_path) = &a.svg {
        let spec = PlotSpec::new(roc_kind(kind), format!("{kind}: PD versus PFA, N = {}", a.n));
        let series: Vec<Series> = snrs
            .iter()
            .enumerate()
            .map(|(i, db)| {
                let chunk: &[TheoryPoint] = &rows[i * pfas.len()..(i + 1) * pfas.len()];
                Series::new(
                    format!("SNR = {db} dB"),
                    chunk.iter().map(|p| p.pfa).collect(),
                    chunk.iter().map(|p| p.pd).collect(),
                )
            })
            .collect();
        write_file(svg_path, render_svg(&spec, &series)?.as_bytes())?;
    }
    Ok(())
}

fn montecarlo(a: MonteCarloArgs, argv: &[String]) -> Result<()> {
    let pfas = parse_grid(&a.pfa_grid)?;
    let cfg = a.detector.config(pfas[0], None);
    let hypothesis = if a.h1 || a.snr_db.is_some() {
        Hypothesis::H1 {
            multipath: MultipathState::explicit(
                a.multipath.alpha,
                a.multipath.delay,
                a.multipath.theta_deg.to_radians(),
            ),
        }
    } else {
        Hypothesis::H0
    };
    let mut plan = TrialPlan::new(cfg, hypothesis, a.trials, a.seed).with_shards(a.shards);
    plan.receiver = a.receiver.config(cfg.integration_time);
    if let Some(db) = a.snr_db {
        plan = plan.scaled_to_statistic_snr(10f64.powf(db / 10.0))?;
    }
    let rows = roc_curve(&plan, &pfas)?;
    let manifest = RunManifest::new("montecarlo", argv, &[], path_string(&a.out), Some(a.seed));
    emit(
        &Table::rates(cfg.kind, cfg.window_len, &rows).to_csv(Some(&manifest))?,
        a.out.as_deref(),
    )?;
    if let Some(svg_path) = &a.svg {
        let spec = PlotSpec::new(roc_kind(cfg.kind), format!("{}: Monte Carlo PD", cfg.kind));
        let x: Vec<f64> = rows.iter().map(|r| r.pfa).collect();
        let mut series = vec![Series::new(
            "empirical",
            x.clone(),
            rows.iter().map(|r| r.pd_empirical.rate).collect(),
        )];
        if rows.iter().all(|r| r.pd_theory.is_some()) {
            series.push(Series::new(
                "theory",
                x,
                rows.iter().filter_map(|r| r.pd_theory).collect(),
            ));
        }
        write_file(svg_path, render_svg(&spec, &series)?.as_bytes())?;
    }
    Ok(())
}

fn calibrate(a: CalibrateArgs, _argv: &[String]) -> Result<()> {
    let cfg = a.detector.config(a.pfa, None);
    let mut plan = TrialPlan::new(cfg, Hypothesis::H0, a.trials, a.seed).with_shards(a.shards);
    plan.receiver = a.receiver.config(cfg.integration_time);
    let cal = calibrate_threshold(&plan, a.pfa)?;
    if let Some(w) = &cal.warning {
        eprintln!("warning: {w}");
    }
    emit(format!("{:.16e}\n", cal.threshold).as_bytes(), None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = parse_grid("log:1e-8:1e-1:50").unwrap();
        assert_eq!(g.len(), 50);
        assert!((g[0] - 1e-8).abs() < 1e-20 && (g[49] - 0.1).abs() < 1e-15);
        assert_eq!(parse_grid("lin:0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("list:1,5,10").unwrap(), vec![1.0, 5.0, 10.0]);
        assert_eq!(parse_grid("10").unwrap(), vec![10.0]);
        for bad in ["log:0:1:3", "lin:0:1", "list:", "x", "lin:0:1:0"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn usage_errors_exit_one() {
        let argv = |s: &str| s.split_whitespace().map(String::from).collect::<Vec<_>>();
        assert_eq!(dispatch(&argv("mpdetect bogus")), 1);
        assert_eq!(dispatch(&argv("mpdetect theory --nope")), 1);
        assert_eq!(dispatch(&argv("mpdetect theory --detector vtl --snr-db 1 --pfa-grid 0.1")), 1);
    }
}
