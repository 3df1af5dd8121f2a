//! Command-line front end and file-based workflows: `synth`,
//! `extract-events`, `train`, `forecast`, `evaluate`.
//!
//! Every command is a pure function of its input files, flags, and seed;
//! outputs carry a `# config: <hash>` provenance comment and contain no wall
//! clock timestamps, so repeated runs are byte-identical. Exit codes:
//! 0 success, 1 usage, 2 data error, 3 numerical abort.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{config_hash, parse_levels, RunConfig, SEED_ENV_VAR};
use crate::data::{
    align_events, extract_events, format_timestamp, load_events, load_series, parse_timestamp,
    synthesize, window_at, EventWindow, FeatureAnchor, RawEvents, RawSeries, Scaler, SynthConfig,
};
use crate::error::{Error, Result};
use crate::forecast::{forecast, ForecastOptions};
use crate::metrics::{calibration_r2, coverage_curve, crps_empirical, EvalReport, VariableScores};
use crate::model::{train, Model, ModelBundle, TrainOptions, TrainTrace, TrainingSample};
use crate::rng::StreamRng;

#[derive(Parser)]
#[command(
    name = "hcf",
    version,
    about = "Probabilistic multi-horizon forecasting conditioned on past series and event sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a coupled synthetic series/events dataset.
    Synth(SynthCli),
    /// Derive up/down events from series fluctuations by threshold.
    ExtractEvents(ExtractCli),
    /// Train a model and write a self-sufficient checkpoint.
    Train(TrainCli),
    /// Write Monte-Carlo forecasts from a checkpoint.
    Forecast(ForecastCli),
    /// Score forecast files against the truth series.
    Evaluate(EvaluateCli),
}

/// Parse the process arguments and dispatch.
pub fn run() -> i32 {
    run_from(std::env::args())
}

/// Parse the given arguments and dispatch; returns the process exit code.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/version output with status 0.
            if e.use_stderr() {
                eprint!("{e}");
                return 1;
            }
            print!("{e}");
            return 0;
        }
    };
    let outcome = match cli.command {
        Cmd::Synth(args) => args.execute(),
        Cmd::ExtractEvents(args) => args.execute(),
        Cmd::Train(args) => args.execute(),
        Cmd::Forecast(args) => args.execute(),
        Cmd::Evaluate(args) => args.execute(),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

// ── synth ────────────────────────────────────────────────────────────

#[derive(Args)]
struct SynthCli {
    /// Flat key=value synth config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    period: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    rate: Option<f64>,
    /// Comma-separated per-type level-shift magnitudes.
    #[arg(long)]
    magnitudes: Option<String>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    effect_lag: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// ISO-8601 timestamp of the first point.
    #[arg(long)]
    start: Option<String>,
    #[arg(long)]
    step_seconds: Option<i64>,
}

impl SynthCli {
    fn execute(self) -> Result<()> {
        let mut cfg = match &self.config {
            Some(path) => SynthConfig::from_map(&crate::config::parse_key_value_file(path)?)?,
            None => SynthConfig::default(),
        };
        if let Ok(raw) = std::env::var(SEED_ENV_VAR) {
            cfg.seed = raw.parse().map_err(|_| {
                Error::Config(format!("{SEED_ENV_VAR} must be an integer, got {raw:?}"))
            })?;
        }
        if let Some(v) = self.length {
            cfg.length = v;
        }
        if let Some(v) = self.period {
            cfg.period = v;
        }
        if let Some(v) = self.amplitude {
            cfg.amplitude = v;
        }
        if let Some(v) = self.rate {
            cfg.rate = v;
        }
        if let Some(v) = &self.magnitudes {
            cfg.magnitudes = v
                .split(',')
                .map(|m| m.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("bad magnitudes list {v:?}")))?;
        }
        if let Some(v) = self.noise_std {
            cfg.noise_std = v;
        }
        if let Some(v) = self.effect_lag {
            cfg.effect_lag = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.start {
            cfg.start_epoch = parse_timestamp(v)
                .ok_or_else(|| Error::Config(format!("bad start timestamp {v:?}")))?;
        }
        if let Some(v) = self.step_seconds {
            cfg.step_seconds = v;
        }
        let (series_path, events_path) = cmd_synth(&cfg, &self.out_dir)?;
        println!(
            "wrote {} and {}",
            series_path.display(),
            events_path.display()
        );
        Ok(())
    }
}

fn synth_key_values(cfg: &SynthConfig) -> Vec<(String, String)> {
    vec![
        ("length".into(), cfg.length.to_string()),
        ("period".into(), format!("{}", cfg.period)),
        ("amplitude".into(), format!("{}", cfg.amplitude)),
        ("rate".into(), format!("{}", cfg.rate)),
        (
            "magnitudes".into(),
            cfg.magnitudes
                .iter()
                .map(|m| format!("{m}"))
                .collect::<Vec<_>>()
                .join(","),
        ),
        ("noise_std".into(), format!("{}", cfg.noise_std)),
        ("effect_lag".into(), format!("{}", cfg.effect_lag)),
        ("seed".into(), cfg.seed.to_string()),
        ("start".into(), format_timestamp(cfg.start_epoch)),
        ("step_seconds".into(), cfg.step_seconds.to_string()),
    ]
}

/// Generate and write `series.csv` and `events.csv` under `out_dir`.
pub fn cmd_synth(cfg: &SynthConfig, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(out_dir)?;
    let rng = StreamRng::from_seed(cfg.seed);
    let (series, events) = synthesize(cfg, &rng)?;
    let hash = config_hash(&synth_key_values(cfg));
    let comment = vec![format!("config: {hash}")];
    let series_path = out_dir.join("series.csv");
    let events_path = out_dir.join("events.csv");
    crate::data::write_series(&series, &series_path, &comment)?;
    crate::data::write_events(&events, &events_path, &comment)?;
    Ok((series_path, events_path))
}

// ── extract-events ───────────────────────────────────────────────────

#[derive(Args)]
struct ExtractCli {
    #[arg(long)]
    series: PathBuf,
    /// Variable name or 0-based column index.
    #[arg(long, default_value = "0")]
    variable: String,
    /// Emit an event when a first difference exceeds this (strictly).
    #[arg(long)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
}

impl ExtractCli {
    fn execute(self) -> Result<()> {
        let (ups, downs) =
            cmd_extract_events(&self.series, &self.variable, self.threshold, &self.out)?;
        println!("up: {ups}");
        println!("down: {downs}");
        Ok(())
    }
}

/// Extract threshold events from one variable and write the events file.
/// Returns the (up, down) counts.
pub fn cmd_extract_events(
    series_path: &Path,
    variable: &str,
    threshold: f64,
    out: &Path,
) -> Result<(usize, usize)> {
    let series = load_series(series_path)?;
    let var_idx = match variable.parse::<usize>() {
        Ok(i) => i,
        Err(_) => series
            .variable_index(variable)
            .ok_or_else(|| Error::Data(format!("unknown variable {variable:?}")))?,
    };
    let events = extract_events(&series, var_idx, threshold)?;
    let hash = config_hash(&[
        ("threshold".into(), format!("{threshold}")),
        ("variable".into(), var_idx.to_string()),
    ]);
    crate::data::write_events(&events, out, &[format!("config: {hash}")])?;
    Ok((events.count_of_type(1), events.count_of_type(2)))
}

// ── train ────────────────────────────────────────────────────────────

#[derive(Args)]
struct TrainCli {
    #[arg(long)]
    series: PathBuf,
    /// Event file; omit to train in series-only mode.
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Loss trace file; defaults to `<checkpoint>.trace`.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Continue training from the existing checkpoint.
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    latent: Option<usize>,
    #[arg(long)]
    elbo_samples: Option<usize>,
    #[arg(long)]
    t_past: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    std_floor: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    steps_per_epoch: Option<usize>,
    #[arg(long)]
    holdout: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl TrainCli {
    fn execute(self) -> Result<()> {
        let mut config = RunConfig::default();
        if let Some(path) = &self.config {
            config.merge_file(path)?;
        }
        config.apply_env()?;
        macro_rules! over {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { config.$field = v; })*
            };
        }
        over!(hidden, latent, elbo_samples, t_past, horizon, std_floor);
        over!(epochs, batch_size, learning_rate, holdout, seed);
        if let Some(v) = self.steps_per_epoch {
            config.steps_per_epoch = Some(v);
        }
        let args = TrainArgs {
            series: self.series,
            events: self.events,
            checkpoint: self.checkpoint.clone(),
            trace: self.trace,
            resume: self.resume,
            verbose: true,
            config,
        };
        let trace = cmd_train(&args)?;
        println!(
            "trained {} epochs; final neg_elbo {:.6}; checkpoint {}",
            trace.epoch_neg_elbo.len(),
            trace.epoch_neg_elbo.last().copied().unwrap_or(f64::NAN),
            self.checkpoint.display()
        );
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainArgs {
    pub series: PathBuf,
    pub events: Option<PathBuf>,
    pub checkpoint: PathBuf,
    pub trace: Option<PathBuf>,
    pub resume: bool,
    pub verbose: bool,
    pub config: RunConfig,
}

/// Build standardized training windows with aligned events over the
/// training range (everything before the holdout).
pub fn prepare_training(
    series: &RawSeries,
    events: Option<&RawEvents>,
    t_past: usize,
    horizon: usize,
    train_len: usize,
) -> Result<(Vec<TrainingSample>, Scaler, FeatureAnchor)> {
    let width = t_past + horizon;
    if train_len < width || train_len > series.len() {
        return Err(Error::Data(format!(
            "training range of {train_len} points cannot host windows of width {width}"
        )));
    }
    let scaler = Scaler::fit(series, train_len)?;
    let anchor = FeatureAnchor::fit(series.timestamp_at(0), series.timestamp_at(train_len - 1))?;
    let mut samples = Vec::new();
    for origin in 1..=(train_len - width + 1) {
        let window = window_at(series, &scaler, &anchor, origin, t_past, horizon, true)?;
        let ev = match events {
            Some(raw) => align_events(raw, &window, &anchor, None)?,
            None => EventWindow::empty(0, &window, &anchor),
        };
        samples.push(TrainingSample { window, events: ev });
    }
    Ok((samples, scaler, anchor))
}

/// Train (or resume) and write the checkpoint bundle plus the loss trace.
pub fn cmd_train(args: &TrainArgs) -> Result<TrainTrace> {
    let cfg = &args.config;
    let series = load_series(&args.series)?;
    let events = match &args.events {
        Some(p) => Some(load_events(p)?),
        None => None,
    };
    let train_len = series
        .len()
        .checked_sub(cfg.holdout)
        .ok_or_else(|| Error::Data("holdout longer than the series".into()))?;

    let (mut bundle, first_epoch) = if args.resume {
        let bundle = ModelBundle::load(&args.checkpoint)?;
        if bundle.variable_names != series.variable_names {
            return Err(Error::Checkpoint(
                "checkpoint variables do not match the series".into(),
            ));
        }
        let first = bundle.epochs_trained;
        (bundle, first)
    } else {
        let num_event_types = events.as_ref().map(|e| e.num_types().max(1)).unwrap_or(1);
        let model_cfg = cfg.model_config(series.dim(), num_event_types);
        let init_rng = StreamRng::from_seed(cfg.seed).split("init");
        let model = Model::init(model_cfg, &init_rng)?;
        let scaler = Scaler::fit(&series, train_len)?;
        let anchor =
            FeatureAnchor::fit(series.timestamp_at(0), series.timestamp_at(train_len - 1))?;
        let bundle = ModelBundle {
            model,
            scaler,
            anchor,
            step_seconds: series.step_seconds,
            variable_names: series.variable_names.clone(),
            event_type_names: events
                .as_ref()
                .map(|e| e.type_names.clone())
                .unwrap_or_default(),
            epochs_trained: 0,
        };
        (bundle, 0)
    };

    // Window construction must reuse the checkpoint's scaler and anchor on
    // resume so the standardized inputs stay comparable.
    let t_past = bundle.model.config.t_past;
    let horizon = bundle.model.config.horizon;
    let width = t_past + horizon;
    if train_len < width {
        return Err(Error::Data(format!(
            "training range of {train_len} points cannot host windows of width {width}"
        )));
    }
    let mut samples = Vec::new();
    for origin in 1..=(train_len - width + 1) {
        let window = window_at(
            &series,
            &bundle.scaler,
            &bundle.anchor,
            origin,
            t_past,
            horizon,
            true,
        )?;
        let ev = match &events {
            Some(raw) => align_events(raw, &window, &bundle.anchor, None)?,
            None => EventWindow::empty(0, &window, &bundle.anchor),
        };
        samples.push(TrainingSample { window, events: ev });
    }

    let opts = TrainOptions {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        steps_per_epoch: cfg.steps_per_epoch,
        first_epoch,
        verbose: args.verbose,
    };
    let rng = StreamRng::from_seed(cfg.seed).split("train");
    let trace = train(&mut bundle.model, &samples, &opts, &rng)?;

    bundle.epochs_trained = first_epoch + cfg.epochs;
    if let Some(dir) = args.checkpoint.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    bundle.save(&args.checkpoint)?;

    let trace_path = args
        .trace
        .clone()
        .unwrap_or_else(|| args.checkpoint.with_extension("trace"));
    let mut text = if args.resume && trace_path.exists() {
        fs::read_to_string(&trace_path)?
    } else {
        format!("# config: {}\nepoch,neg_elbo\n", cfg.hash())
    };
    for (i, v) in trace.epoch_neg_elbo.iter().enumerate() {
        writeln!(text, "{},{}", first_epoch + i + 1, v).unwrap();
    }
    fs::write(&trace_path, text)?;
    Ok(trace)
}

// ── forecast ─────────────────────────────────────────────────────────

#[derive(Args)]
struct ForecastCli {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    series: PathBuf,
    /// Event file; omit to forecast in series-only mode.
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Timestamp of the last observed point (single-origin mode).
    #[arg(long, conflicts_with = "rolling")]
    origin: Option<String>,
    /// Forecast at every stride over the holdout range.
    #[arg(long)]
    rolling: bool,
    /// Origin spacing in steps for --rolling; defaults to the horizon.
    #[arg(long)]
    stride: Option<usize>,
    /// Steps to forecast; defaults to the model's training horizon.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    num_samples: Option<usize>,
    /// Comma-separated quantile levels.
    #[arg(long)]
    quantiles: Option<String>,
    #[arg(long)]
    holdout: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Skip the per-cell sample sidecar files.
    #[arg(long)]
    no_samples: bool,
    /// Diagnostic: feed the observation mean back instead of a sample.
    #[arg(long)]
    mean_feedback: bool,
}

impl ForecastCli {
    fn execute(self) -> Result<()> {
        let mut config = RunConfig::default();
        if let Some(path) = &self.config {
            config.merge_file(path)?;
        }
        config.apply_env()?;
        if let Some(v) = self.num_samples {
            config.num_samples = v;
        }
        if let Some(v) = &self.quantiles {
            config.quantiles = parse_levels(v)?;
        }
        if let Some(v) = self.holdout {
            config.holdout = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.stride {
            config.stride = Some(v);
        }
        let args = ForecastArgs {
            checkpoint: self.checkpoint,
            series: self.series,
            events: self.events,
            out_dir: self.out_dir,
            origin: self.origin,
            rolling: self.rolling,
            horizon: self.horizon,
            emit_samples: !self.no_samples,
            mean_feedback: self.mean_feedback,
            config,
        };
        let files = cmd_forecast(&args)?;
        println!("wrote {} forecast file(s)", files.len());
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ForecastArgs {
    pub checkpoint: PathBuf,
    pub series: PathBuf,
    pub events: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Timestamp of the last observed point; `None` with `rolling = false`
    /// forecasts past the series end.
    pub origin: Option<String>,
    pub rolling: bool,
    pub horizon: Option<usize>,
    pub emit_samples: bool,
    pub mean_feedback: bool,
    pub config: RunConfig,
}

/// Rolling 1-based window origins: non-overlapping (or strided) forecast
/// starts covering the holdout range.
pub fn rolling_origins(
    series_len: usize,
    t_past: usize,
    horizon: usize,
    holdout: usize,
    stride: usize,
) -> Result<Vec<usize>> {
    let eval_start = series_len
        .checked_sub(holdout)
        .ok_or_else(|| Error::Data("holdout longer than the series".into()))?;
    if eval_start < t_past {
        return Err(Error::Data(format!(
            "insufficient history: {eval_start} points before the holdout, need {t_past}"
        )));
    }
    if stride == 0 {
        return Err(Error::Data("stride must be positive".into()));
    }
    let mut origins = Vec::new();
    let mut first_future = eval_start;
    while first_future + horizon <= series_len {
        origins.push(first_future - t_past + 1);
        first_future += stride;
    }
    if origins.is_empty() {
        return Err(Error::Data(
            "holdout shorter than one forecast horizon".into(),
        ));
    }
    Ok(origins)
}

/// Forecast one or many origins; returns the written forecast file paths.
pub fn cmd_forecast(args: &ForecastArgs) -> Result<Vec<PathBuf>> {
    let cfg = &args.config;
    let bundle = ModelBundle::load(&args.checkpoint)?;
    let series = load_series(&args.series)?;
    if series.variable_names != bundle.variable_names {
        return Err(Error::Data(
            "series variables do not match the checkpoint".into(),
        ));
    }
    if series.step_seconds != bundle.step_seconds {
        return Err(Error::Data(
            "series sampling interval does not match the checkpoint".into(),
        ));
    }
    let events = match &args.events {
        Some(p) => Some(load_events(p)?),
        None => None,
    };
    if let Some(ev) = &events {
        if ev.num_types() > bundle.model.config.num_event_types {
            return Err(Error::Data(format!(
                "event file has {} types, checkpoint supports {}",
                ev.num_types(),
                bundle.model.config.num_event_types
            )));
        }
    }
    let t_past = bundle.model.config.t_past;
    let horizon = args.horizon.unwrap_or(bundle.model.config.horizon);
    if horizon == 0 {
        return Err(Error::Data("horizon must be positive".into()));
    }

    let origins: Vec<usize> = if args.rolling {
        rolling_origins(
            series.len(),
            t_past,
            horizon,
            cfg.holdout,
            cfg.stride.unwrap_or(horizon),
        )?
    } else if let Some(ts) = &args.origin {
        let epoch = parse_timestamp(ts)
            .ok_or_else(|| Error::Data(format!("bad origin timestamp {ts:?}")))?;
        let offset = epoch - series.start_epoch;
        if offset < 0 || offset % series.step_seconds != 0 {
            return Err(Error::Data(format!(
                "origin {ts} is not on the sampling grid"
            )));
        }
        let row = (offset / series.step_seconds) as usize;
        if row >= series.len() {
            return Err(Error::Data(format!("origin {ts} is past the series end")));
        }
        if row + 1 < t_past {
            return Err(Error::Data(format!(
                "insufficient history: origin {ts} has {} points, need {t_past}",
                row + 1
            )));
        }
        vec![row + 2 - t_past]
    } else {
        // Forecast past the end of the series.
        if series.len() < t_past {
            return Err(Error::Data("insufficient history for one window".into()));
        }
        vec![series.len() - t_past + 1]
    };

    fs::create_dir_all(&args.out_dir)?;
    let hash = cfg.hash();
    let opts = ForecastOptions {
        num_samples: cfg.num_samples,
        levels: cfg.quantiles.clone(),
        mean_feedback: args.mean_feedback,
        zero_noise: false,
    };
    let root_rng = StreamRng::from_seed(cfg.seed);
    let mut written = Vec::new();
    for (k, &origin) in origins.iter().enumerate() {
        let window = window_at(
            &series,
            &bundle.scaler,
            &bundle.anchor,
            origin,
            t_past,
            horizon,
            false,
        )?;
        let ev_window = match &events {
            Some(raw) => align_events(raw, &window, &bundle.anchor, None)?,
            None => EventWindow::empty(0, &window, &bundle.anchor),
        };
        let rng = root_rng.split(&format!("forecast.origin{origin}"));
        let ensemble = forecast(
            &bundle.model,
            &bundle.scaler,
            &window,
            &ev_window,
            horizon,
            &opts,
            &rng,
        )?;

        let origin_ts = format_timestamp(window.end_epoch());
        let mut out = String::new();
        writeln!(out, "# config: {hash}").unwrap();
        writeln!(out, "# origin: {origin_ts}").unwrap();
        write!(out, "timestamp,variable,mean").unwrap();
        for p in &opts.levels {
            write!(out, ",q{p}").unwrap();
        }
        out.push('\n');
        for j in 0..horizon {
            let ts = format_timestamp(window.horizon_epoch(j));
            for (v, name) in bundle.variable_names.iter().enumerate() {
                write!(out, "{ts},{name},{}", ensemble.mean_at(j, v)).unwrap();
                for li in 0..opts.levels.len() {
                    write!(out, ",{}", ensemble.quantile_at(li, j, v)).unwrap();
                }
                out.push('\n');
            }
        }
        let path = args.out_dir.join(format!("forecast_{k:03}.csv"));
        fs::write(&path, out)?;

        if args.emit_samples {
            let mut samp = String::new();
            writeln!(samp, "# config: {hash}").unwrap();
            writeln!(samp, "# origin: {origin_ts}").unwrap();
            write!(samp, "timestamp,variable").unwrap();
            for n in 0..ensemble.num_samples {
                write!(samp, ",s{n}").unwrap();
            }
            samp.push('\n');
            for j in 0..horizon {
                let ts = format_timestamp(window.horizon_epoch(j));
                for (v, name) in bundle.variable_names.iter().enumerate() {
                    write!(samp, "{ts},{name}").unwrap();
                    for s in ensemble.cell_samples(j, v) {
                        write!(samp, ",{s}").unwrap();
                    }
                    samp.push('\n');
                }
            }
            fs::write(
                args.out_dir.join(format!("forecast_{k:03}_samples.csv")),
                samp,
            )?;
        }
        written.push(path);
    }
    Ok(written)
}

// ── evaluate ─────────────────────────────────────────────────────────

#[derive(Args)]
struct EvaluateCli {
    #[arg(long)]
    forecast_dir: PathBuf,
    /// Series file holding the realized values.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Comma-separated coverage levels.
    #[arg(long)]
    levels: Option<String>,
}

impl EvaluateCli {
    fn execute(self) -> Result<()> {
        let levels = match &self.levels {
            Some(raw) => parse_levels(raw)?,
            None => crate::forecast::default_levels(),
        };
        let args = EvaluateArgs {
            forecast_dir: self.forecast_dir,
            truth: self.truth,
            out_dir: self.out_dir,
            levels,
        };
        let report = cmd_evaluate(&args)?;
        print!("{}", report.to_key_values());
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EvaluateArgs {
    pub forecast_dir: PathBuf,
    pub truth: PathBuf,
    pub out_dir: PathBuf,
    pub levels: Vec<f64>,
}

struct ParsedForecast {
    /// (epoch, variable index, mean)
    rows: Vec<(i64, usize, f64)>,
    /// per-row Monte-Carlo samples, aligned with `rows`
    samples: Vec<Vec<f64>>,
}

fn parse_delimited(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path)?;
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if header.is_none() {
            header = Some(fields);
        } else {
            rows.push(fields);
        }
    }
    let header = header.ok_or_else(|| Error::Data(format!("{}: empty file", path.display())))?;
    Ok((header, rows))
}

fn parse_forecast_pair(forecast_path: &Path, truth: &RawSeries) -> Result<ParsedForecast> {
    let misaligned = |msg: String| Error::Data(format!("{}: {msg}", forecast_path.display()));
    let (header, raw_rows) = parse_delimited(forecast_path)?;
    if header.len() < 3
        || header[0] != "timestamp"
        || header[1] != "variable"
        || header[2] != "mean"
    {
        return Err(misaligned(
            "header must start with timestamp,variable,mean".into(),
        ));
    }
    let mut rows = Vec::with_capacity(raw_rows.len());
    for r in &raw_rows {
        let epoch = parse_timestamp(&r[0])
            .ok_or_else(|| misaligned(format!("bad timestamp {:?}", r[0])))?;
        let var = truth
            .variable_index(&r[1])
            .ok_or_else(|| misaligned(format!("variable {:?} not in the truth series", r[1])))?;
        let mean: f64 = r[2]
            .parse()
            .map_err(|_| misaligned(format!("bad mean {:?}", r[2])))?;
        rows.push((epoch, var, mean));
    }

    let stem = forecast_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    let samples_path = forecast_path.with_file_name(format!("{stem}_samples.csv"));
    if !samples_path.exists() {
        return Err(Error::Data(format!(
            "{}: missing sample sidecar {} (run forecast without --no-samples)",
            forecast_path.display(),
            samples_path.display()
        )));
    }
    let (_, sample_rows) = parse_delimited(&samples_path)?;
    if sample_rows.len() != rows.len() {
        return Err(misaligned("sample sidecar row count differs".into()));
    }
    let mut samples = Vec::with_capacity(rows.len());
    for r in &sample_rows {
        let vals: Vec<f64> = r[2..]
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| misaligned("bad sample value".into()))?;
        if vals.is_empty() {
            return Err(misaligned("sample sidecar has no sample columns".into()));
        }
        samples.push(vals);
    }
    Ok(ParsedForecast { rows, samples })
}

/// Score every `forecast_*.csv` under the directory against the truth
/// series; writes `report.txt` and `curve.csv` and returns the report.
/// Aggregate scores are per-window means; coverage pools every cell.
pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<EvalReport> {
    let truth = load_series(&args.truth)?;
    let mut files: Vec<PathBuf> = fs::read_dir(&args.forecast_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| {
                    n.starts_with("forecast_")
                        && n.ends_with(".csv")
                        && !n.ends_with("_samples.csv")
                })
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Data(format!(
            "no forecast files under {}",
            args.forecast_dir.display()
        )));
    }

    let d = truth.dim();
    let mut window_rmse = Vec::new();
    let mut window_crps = Vec::new();
    let mut window_mae = Vec::new();
    let mut var_rmse = vec![Vec::new(); d];
    let mut var_crps = vec![Vec::new(); d];
    let mut var_mae = vec![Vec::new(); d];
    let mut pooled_samples: Vec<Vec<f64>> = Vec::new();
    let mut pooled_truths: Vec<f64> = Vec::new();

    for path in &files {
        let parsed = parse_forecast_pair(path, &truth)?;
        let mut sq = 0.0;
        let mut ab = 0.0;
        let mut cr = 0.0;
        let mut var_acc = vec![(0.0, 0.0, 0.0, 0usize); d];
        for ((epoch, var, mean), samples) in parsed.rows.iter().zip(&parsed.samples) {
            let offset = epoch - truth.start_epoch;
            if offset < 0 || offset % truth.step_seconds != 0 {
                return Err(Error::Data(format!(
                    "{}: forecast time {} is off the truth grid",
                    path.display(),
                    format_timestamp(*epoch)
                )));
            }
            let row = (offset / truth.step_seconds) as usize;
            if row >= truth.len() {
                return Err(Error::Data(format!(
                    "{}: forecast time {} is past the truth series",
                    path.display(),
                    format_timestamp(*epoch)
                )));
            }
            let actual = truth.value(row, *var);
            let err = actual - mean;
            let crps = crps_empirical(samples, actual)?;
            sq += err * err;
            ab += err.abs();
            cr += crps;
            let acc = &mut var_acc[*var];
            acc.0 += err * err;
            acc.1 += err.abs();
            acc.2 += crps;
            acc.3 += 1;
            pooled_samples.push(samples.clone());
            pooled_truths.push(actual);
        }
        let n = parsed.rows.len() as f64;
        if n == 0.0 {
            return Err(Error::Data(format!("{}: no forecast rows", path.display())));
        }
        window_rmse.push((sq / n).sqrt());
        window_mae.push(ab / n);
        window_crps.push(cr / n);
        for (v, acc) in var_acc.iter().enumerate() {
            if acc.3 > 0 {
                let nv = acc.3 as f64;
                var_rmse[v].push((acc.0 / nv).sqrt());
                var_mae[v].push(acc.1 / nv);
                var_crps[v].push(acc.2 / nv);
            }
        }
    }

    let mean_of = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let coverage = coverage_curve(&pooled_samples, &pooled_truths, &args.levels)?;
    let report = EvalReport {
        windows: files.len(),
        cells: pooled_truths.len(),
        rmse: mean_of(&window_rmse),
        crps: mean_of(&window_crps),
        mae: mean_of(&window_mae),
        calibration_r2: calibration_r2(&coverage)?,
        coverage,
        per_variable: (0..d)
            .filter(|&v| !var_rmse[v].is_empty())
            .map(|v| VariableScores {
                name: truth.variable_names[v].clone(),
                rmse: mean_of(&var_rmse[v]),
                crps: mean_of(&var_crps[v]),
                mae: mean_of(&var_mae[v]),
            })
            .collect(),
    };

    fs::create_dir_all(&args.out_dir)?;
    let mut pairs: Vec<(String, String)> = vec![(
        "levels".into(),
        args.levels
            .iter()
            .map(|p| format!("{p}"))
            .collect::<Vec<_>>()
            .join(","),
    )];
    pairs.extend(
        files
            .iter()
            .enumerate()
            .map(|(i, p)| (format!("file{i}"), p.display().to_string())),
    );
    let hash = config_hash(&pairs);
    fs::write(
        args.out_dir.join("report.txt"),
        format!("# config: {hash}\n{}", report.to_key_values()),
    )?;
    fs::write(
        args.out_dir.join("curve.csv"),
        format!("# config: {hash}\n{}", report.curve_csv()),
    )?;
    Ok(report)
}
