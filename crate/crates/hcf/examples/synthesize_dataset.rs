//! Generate a coupled series/events dataset and write it as CSV.
//!
//! The series is seasonal with Gaussian noise; a Poisson stream of typed
//! events injects persistent level shifts. With `effect_lag > 0` the shift
//! lands a few steps after its event, so recent events carry information
//! about the future that the past values alone do not.
//!
//! Run: `cargo run --example synthesize_dataset -- [out_dir]`

use hcf::cli::cmd_synth;
use hcf::data::{load_events, load_series, SynthConfig};

fn main() -> hcf::Result<()> {
    let out_dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "synth_data".into());

    let cfg = SynthConfig {
        length: 2000,
        period: 24.0,
        amplitude: 2.0,
        rate: 0.08,
        magnitudes: vec![3.5, -3.5],
        noise_std: 0.25,
        effect_lag: 18.0,
        seed: 1,
        ..SynthConfig::default()
    };
    let (series_path, events_path) = cmd_synth(&cfg, out_dir.as_ref())?;

    let series = load_series(&series_path)?;
    let events = load_events(&events_path)?;
    println!(
        "series: {} points, {} variable(s), hourly from {}",
        series.len(),
        series.dim(),
        hcf::data::format_timestamp(series.start_epoch)
    );
    println!(
        "events: {} total ({} up-shifts, {} down-shifts)",
        events.len(),
        events.count_of_type(1),
        events.count_of_type(2)
    );
    println!(
        "wrote {} and {}",
        series_path.display(),
        events_path.display()
    );
    Ok(())
}
