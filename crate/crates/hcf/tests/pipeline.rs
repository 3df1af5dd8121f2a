//! End-to-end workflows through the command layer: synth → extract-events →
//! train → forecast → evaluate, checkpoint resume, series-only mode, output
//! stability, and error/exit-code behavior.

use std::fs;
use std::path::{Path, PathBuf};

use hcf::cli::{
    cmd_evaluate, cmd_extract_events, cmd_forecast, cmd_synth, cmd_train, run_from, EvaluateArgs,
    ForecastArgs, TrainArgs,
};
use hcf::config::RunConfig;
use hcf::data::{load_events, load_series, SynthConfig};
use hcf::error::Error;
use hcf::model::ModelBundle;

fn tiny_run_config(seed: u64) -> RunConfig {
    RunConfig {
        hidden: 8,
        latent: 4,
        elbo_samples: 1,
        t_past: 24,
        horizon: 12,
        epochs: 3,
        batch_size: 4,
        steps_per_epoch: Some(4),
        learning_rate: 0.01,
        holdout: 60,
        num_samples: 25,
        seed,
        ..RunConfig::default()
    }
}

fn tiny_synth(seed: u64) -> SynthConfig {
    SynthConfig {
        length: 400,
        rate: 0.06,
        noise_std: 0.25,
        seed,
        ..SynthConfig::default()
    }
}

struct Workspace {
    dir: tempfile::TempDir,
    series: PathBuf,
    events: PathBuf,
}

fn synth_workspace(seed: u64) -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let (series, events) = cmd_synth(&tiny_synth(seed), dir.path()).unwrap();
    Workspace {
        dir,
        series,
        events,
    }
}

fn train_args(ws: &Workspace, with_events: bool, seed: u64) -> TrainArgs {
    TrainArgs {
        series: ws.series.clone(),
        events: with_events.then(|| ws.events.clone()),
        checkpoint: ws.dir.path().join("model.ckpt"),
        trace: None,
        resume: false,
        verbose: false,
        config: tiny_run_config(seed),
    }
}

#[test]
fn synth_output_loads_and_trains_without_edits() {
    let ws = synth_workspace(3);
    let series = load_series(&ws.series).unwrap();
    assert_eq!(series.len(), 400);
    let events = load_events(&ws.events).unwrap();
    assert!(!events.is_empty());

    let trace = cmd_train(&train_args(&ws, true, 3)).unwrap();
    assert_eq!(trace.epoch_neg_elbo.len(), 3);
    assert!(trace.epoch_neg_elbo.iter().all(|v| v.is_finite()));
    assert!(ws.dir.path().join("model.ckpt").exists());
    assert!(ws.dir.path().join("model.trace").exists());
}

#[test]
fn zero_rate_synth_is_accepted_downstream() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig {
        rate: 0.0,
        length: 400,
        ..tiny_synth(4)
    };
    let (series, events) = cmd_synth(&cfg, dir.path()).unwrap();
    assert!(load_events(&events).unwrap().is_empty());
    let ws = Workspace {
        dir,
        series,
        events,
    };
    // An empty events file trains with the auxiliary transit only.
    let trace = cmd_train(&train_args(&ws, true, 4)).unwrap();
    assert!(trace.epoch_neg_elbo[0].is_finite());
}

#[test]
fn full_cycle_forecast_and_evaluate() {
    let ws = synth_workspace(5);
    cmd_train(&train_args(&ws, true, 5)).unwrap();
    let fc_dir = ws.dir.path().join("fc");
    let files = cmd_forecast(&ForecastArgs {
        checkpoint: ws.dir.path().join("model.ckpt"),
        series: ws.series.clone(),
        events: Some(ws.events.clone()),
        out_dir: fc_dir.clone(),
        origin: None,
        rolling: true,
        horizon: None,
        emit_samples: true,
        mean_feedback: false,
        config: tiny_run_config(5),
    })
    .unwrap();
    // holdout 60, horizon 12 → 5 rolling origins
    assert_eq!(files.len(), 5);

    let report = cmd_evaluate(&EvaluateArgs {
        forecast_dir: fc_dir,
        truth: ws.series.clone(),
        out_dir: ws.dir.path().join("eval"),
        levels: hcf::forecast::default_levels(),
    })
    .unwrap();
    assert_eq!(report.windows, 5);
    assert_eq!(report.cells, 5 * 12);
    assert!(report.rmse > 0.0 && report.crps > 0.0);
    assert!(ws.dir.path().join("eval/report.txt").exists());
    assert!(ws.dir.path().join("eval/curve.csv").exists());
}

#[test]
fn report_keys_are_stable() {
    let ws = synth_workspace(6);
    cmd_train(&train_args(&ws, true, 6)).unwrap();
    let fc_dir = ws.dir.path().join("fc");
    cmd_forecast(&ForecastArgs {
        checkpoint: ws.dir.path().join("model.ckpt"),
        series: ws.series.clone(),
        events: Some(ws.events.clone()),
        out_dir: fc_dir.clone(),
        origin: None,
        rolling: true,
        horizon: None,
        emit_samples: true,
        mean_feedback: false,
        config: tiny_run_config(6),
    })
    .unwrap();
    cmd_evaluate(&EvaluateArgs {
        forecast_dir: fc_dir,
        truth: ws.series.clone(),
        out_dir: ws.dir.path().join("eval"),
        levels: vec![0.1, 0.5, 0.9],
    })
    .unwrap();
    let text = fs::read_to_string(ws.dir.path().join("eval/report.txt")).unwrap();
    let keys: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_once('=').unwrap().0)
        .collect();
    assert_eq!(
        keys,
        vec![
            "windows",
            "cells",
            "rmse",
            "crps",
            "mae",
            "calibration_r2",
            "rmse.value",
            "crps.value",
            "mae.value"
        ]
    );
}

#[test]
fn forecast_without_events_runs_in_series_only_mode() {
    let ws = synth_workspace(7);
    cmd_train(&train_args(&ws, true, 7)).unwrap();
    // Same checkpoint, no events file: every window degrades to M = 0.
    let files = cmd_forecast(&ForecastArgs {
        checkpoint: ws.dir.path().join("model.ckpt"),
        series: ws.series.clone(),
        events: None,
        out_dir: ws.dir.path().join("fc_ts"),
        origin: None,
        rolling: true,
        horizon: None,
        emit_samples: false,
        mean_feedback: false,
        config: tiny_run_config(7),
    })
    .unwrap();
    assert_eq!(files.len(), 5);
}

#[test]
fn series_only_training_has_no_event_types() {
    let ws = synth_workspace(8);
    cmd_train(&train_args(&ws, false, 8)).unwrap();
    let bundle = ModelBundle::load(&ws.dir.path().join("model.ckpt")).unwrap();
    assert_eq!(bundle.model.config.num_event_types, 1);
    assert!(bundle.event_type_names.is_empty());
}

#[test]
fn resume_matches_straight_through_training_bitwise() {
    let ws = synth_workspace(9);

    // Straight through: 4 epochs.
    let mut once = train_args(&ws, true, 9);
    once.checkpoint = ws.dir.path().join("once.ckpt");
    once.config.epochs = 4;
    cmd_train(&once).unwrap();

    // Split: 2 epochs, then resume for 2 more.
    let mut split = train_args(&ws, true, 9);
    split.checkpoint = ws.dir.path().join("split.ckpt");
    split.config.epochs = 2;
    cmd_train(&split).unwrap();
    split.resume = true;
    cmd_train(&split).unwrap();

    let a = ModelBundle::load(&ws.dir.path().join("once.ckpt")).unwrap();
    let b = ModelBundle::load(&ws.dir.path().join("split.ckpt")).unwrap();
    assert_eq!(a.epochs_trained, 4);
    assert_eq!(b.epochs_trained, 4);
    for name in a.model.store.names() {
        let x = a.model.store.value(name).unwrap();
        let y = b.model.store.value(name).unwrap();
        for (p, q) in x.data().iter().zip(y.data()) {
            assert_eq!(p.to_bits(), q.to_bits(), "parameter {name} diverged");
        }
    }

    // The split trace is the straight-through trace.
    let ta = fs::read_to_string(ws.dir.path().join("once.trace")).unwrap();
    let tb = fs::read_to_string(ws.dir.path().join("split.trace")).unwrap();
    let losses = |t: &str| -> Vec<String> {
        t.lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("epoch"))
            .map(String::from)
            .collect()
    };
    assert_eq!(losses(&ta), losses(&tb));
}

#[test]
fn forecast_ignores_the_withheld_future() {
    // Mutate the holdout region of the series: forecasts at origins whose
    // past lies before the mutation must not change.
    let ws = synth_workspace(10);
    cmd_train(&train_args(&ws, true, 10)).unwrap();

    let forecast_once = |series_path: &Path, tag: &str| -> Vec<u8> {
        let out = ws.dir.path().join(tag);
        cmd_forecast(&ForecastArgs {
            checkpoint: ws.dir.path().join("model.ckpt"),
            series: series_path.to_path_buf(),
            events: Some(ws.events.clone()),
            out_dir: out.clone(),
            origin: Some("2014-01-15T03:00:00".into()), // row 339 of 400
            rolling: false,
            horizon: Some(12),
            emit_samples: true,
            mean_feedback: false,
            config: tiny_run_config(10),
        })
        .unwrap();
        fs::read(out.join("forecast_000.csv")).unwrap()
    };
    let baseline = forecast_once(&ws.series, "fc_a");

    // Rewrite the series with the 12 future points after the origin zeroed.
    let series = load_series(&ws.series).unwrap();
    let mut values = series.values().to_vec();
    for row in values.iter_mut().take(352).skip(340) {
        *row = 0.0;
    }
    let mutated = hcf::data::RawSeries::new(
        series.start_epoch,
        series.step_seconds,
        values,
        series.variable_names.clone(),
    )
    .unwrap();
    let mutated_path = ws.dir.path().join("mutated.csv");
    hcf::data::write_series(&mutated, &mutated_path, &[]).unwrap();
    let shifted = forecast_once(&mutated_path, "fc_b");
    assert_eq!(baseline, shifted);
}

#[test]
fn single_origin_with_one_sample_writes_the_trajectory_as_mean() {
    let ws = synth_workspace(11);
    cmd_train(&train_args(&ws, true, 11)).unwrap();
    let mut config = tiny_run_config(11);
    config.num_samples = 1;
    config.quantiles = vec![0.25, 0.75];
    let files = cmd_forecast(&ForecastArgs {
        checkpoint: ws.dir.path().join("model.ckpt"),
        series: ws.series.clone(),
        events: Some(ws.events.clone()),
        out_dir: ws.dir.path().join("fc1"),
        origin: None,
        rolling: false,
        horizon: None,
        emit_samples: false,
        mean_feedback: false,
        config,
    })
    .unwrap();
    assert_eq!(files.len(), 1);
    let text = fs::read_to_string(&files[0]).unwrap();
    for line in text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("timestamp"))
    {
        let fields: Vec<&str> = line.split(',').collect();
        // mean, q0.25, q0.75 all equal the single trajectory value
        assert_eq!(fields[2], fields[3]);
        assert_eq!(fields[2], fields[4]);
    }
}

#[test]
fn extract_events_cli_counts_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    // Spiky data with known up/down steps.
    let values: Vec<f64> = (0..50)
        .map(|i| match i % 10 {
            3 => 50.0,
            4 => 0.0,
            _ => (i as f64) * 0.01,
        })
        .collect();
    let series = hcf::data::RawSeries::new(1400000000, 3600, values, vec!["load".into()]).unwrap();
    let series_path = dir.path().join("s.csv");
    hcf::data::write_series(&series, &series_path, &[]).unwrap();

    let out = dir.path().join("e.csv");
    let (ups, downs) = cmd_extract_events(&series_path, "load", 10.0, &out).unwrap();
    assert!(ups > 0 && downs > 0);
    let first = fs::read(&out).unwrap();
    cmd_extract_events(&series_path, "0", 10.0, &out).unwrap();
    assert_eq!(first, fs::read(&out).unwrap());

    let (u2, d2) = cmd_extract_events(
        &series_path,
        "load",
        f64::INFINITY,
        &dir.path().join("e2.csv"),
    )
    .unwrap();
    assert_eq!((u2, d2), (0, 0));
}

#[test]
fn cli_dispatch_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    // Successful synth through the argument parser.
    let code = run_from([
        "hcf",
        "synth",
        "--out-dir",
        out.to_str().unwrap(),
        "--length",
        "80",
        "--seed",
        "2",
    ]);
    assert_eq!(code, 0);
    assert!(out.join("series.csv").exists());

    // Usage error.
    assert_eq!(run_from(["hcf", "no-such-command"]), 1);
    assert_eq!(run_from(["hcf", "train", "--bogus-flag"]), 1);

    // Data error: missing file.
    let code = run_from([
        "hcf",
        "extract-events",
        "--series",
        dir.path().join("missing.csv").to_str().unwrap(),
        "--threshold",
        "5",
        "--out",
        dir.path().join("x.csv").to_str().unwrap(),
    ]);
    assert_eq!(code, 2);

    // Exit-code mapping for numerical aborts.
    let abort = Error::TrainAbort {
        epoch: 1,
        step: 1,
        element: 0,
        origin: 1,
    };
    assert_eq!(abort.exit_code(), 3);
    assert_eq!(Error::Data("x".into()).exit_code(), 2);
}

#[test]
fn seed_env_var_overrides_the_config_seed() {
    // Run in-process but guard against parallel env mutation by using a
    // dedicated key check before and after.
    let dir = tempfile::tempdir().unwrap();
    std::env::set_var("HCF_SEED", "777");
    let code = run_from([
        "hcf",
        "synth",
        "--out-dir",
        dir.path().join("a").to_str().unwrap(),
        "--length",
        "60",
    ]);
    std::env::remove_var("HCF_SEED");
    assert_eq!(code, 0);
    let direct = cmd_synth(
        &SynthConfig {
            length: 60,
            seed: 777,
            ..SynthConfig::default()
        },
        &dir.path().join("b"),
    )
    .unwrap();
    assert_eq!(
        fs::read(dir.path().join("a/series.csv")).unwrap(),
        fs::read(direct.0).unwrap()
    );
}

#[test]
fn forecast_with_insufficient_history_is_a_data_error() {
    let ws = synth_workspace(13);
    cmd_train(&train_args(&ws, true, 13)).unwrap();
    let err = cmd_forecast(&ForecastArgs {
        checkpoint: ws.dir.path().join("model.ckpt"),
        series: ws.series.clone(),
        events: Some(ws.events.clone()),
        out_dir: ws.dir.path().join("fc"),
        origin: Some("2014-01-01T05:00:00".into()), // only 6 points of history
        rolling: false,
        horizon: None,
        emit_samples: false,
        mean_feedback: false,
        config: tiny_run_config(13),
    })
    .unwrap_err();
    assert!(err.to_string().contains("insufficient history"), "{err}");
    assert_eq!(err.exit_code(), 2);
}
