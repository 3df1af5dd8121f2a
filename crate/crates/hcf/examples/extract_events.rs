//! Derive typed events from a series by fluctuation threshold: a first
//! difference larger than the threshold (strictly) becomes an "up" event,
//! one below the negative threshold a "down" event.
//!
//! Run: `cargo run --example extract_events`

use hcf::data::{extract_events, synthesize, RawSeries, SynthConfig};
use hcf::rng::StreamRng;

fn main() -> hcf::Result<()> {
    // A spiky series: the level-shift events create steps of ±3.5 on top of
    // a ±2 seasonal swing, so a threshold between those separates them.
    let cfg = SynthConfig {
        length: 600,
        rate: 0.05,
        magnitudes: vec![3.5, -3.5],
        noise_std: 0.1,
        seed: 7,
        ..SynthConfig::default()
    };
    let (series, true_events) = synthesize(&cfg, &StreamRng::from_seed(cfg.seed))?;

    for threshold in [1.0, 2.5, 5.0] {
        let events = extract_events(&series, 0, threshold)?;
        println!(
            "threshold {threshold:>4}: {} events ({} up / {} down)",
            events.len(),
            events.count_of_type(1),
            events.count_of_type(2),
        );
    }
    println!("injected events in the generator: {}", true_events.len());

    // The rule uses a strict inequality: a step exactly at the threshold is
    // not an event.
    let flat = RawSeries::new(0, 3600, vec![0.0, 30.0, 60.0], vec!["v".into()])?;
    assert!(extract_events(&flat, 0, 30.0)?.is_empty());
    println!("a step of exactly the threshold emits nothing (strict rule)");
    Ok(())
}
