//! Run a named experiment preset and print its checksum manifest.
//!
//! Usage: `cargo run --release --example run_experiment -- PRESET CHECKPOINT DATA OUT_DIR [HORIZON]`

use std::path::Path;

use lucie3d::checkpoint::Checkpoint;
use lucie3d::data::read_container;
use lucie3d::experiment::{run_experiment, ExperimentOptions, ExperimentPreset};
use lucie3d::rollout::Emulator;

fn main() -> lucie3d::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    if args.len() < 5 {
        eprintln!("usage: run_experiment PRESET CHECKPOINT DATA OUT_DIR [HORIZON]");
        std::process::exit(2);
    }
    let preset: ExperimentPreset = args[1].parse()?;
    let em = Emulator::new(Checkpoint::load(&args[2])?)?;
    let data = read_container(&args[3])?;
    let opts = ExperimentOptions {
        horizon: args.get(5).and_then(|s| s.parse().ok()),
        ..Default::default()
    };
    let report = run_experiment(preset, &em, &data, &opts, Path::new(&args[4]))?;
    print!("{}", report.manifest_text());
    for (name, surface, top) in &report.trends {
        println!("{name}: surface {surface:+.3} K/decade, top {top:+.3} K/decade");
    }
    Ok(())
}
