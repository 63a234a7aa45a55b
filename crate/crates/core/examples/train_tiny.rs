//! Train a small model on a few synthetic months and save a checkpoint.
//!
//! Usage: `cargo run --release --example train_tiny [epochs]`

use lucie3d::checkpoint::Checkpoint;
use lucie3d::data::{compute_norm_stats, generate_synthetic_climate, Dataset, SynthConfig};
use lucie3d::layout::ChannelLayout;
use lucie3d::model::ModelConfig;
use lucie3d::trainer::{train, TrainConfig};
use lucie3d::GridSpec;

fn main() -> lucie3d::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let grid = GridSpec::t7()?;
    let data = generate_synthetic_climate(&SynthConfig { years: 1, ..Default::default() }, &grid)?;
    let stats = compute_norm_stats(&data)?;
    let layout = ChannelLayout::standard(grid.nlevels(), false);
    let ds = Dataset::new(&data, layout.clone(), &stats)?;
    let tc = TrainConfig {
        total_epochs: epochs,
        finetune_epochs: epochs / 6,
        batch_size: 16,
        lr_max: 1e-3,
        lr_min: 1e-6,
        sample_stride: 24,
        ..Default::default()
    };
    let mc = ModelConfig::desk(layout.n_in(), layout.n_out(), grid.truncation);
    println!("{} parameters, {} samples", mc.parameter_count(), ds.len() / tc.sample_stride);
    let out = train(&ds, &stats, &tc, &mc, &grid)?;
    print!("{}", out.history.summary());

    let path = std::env::temp_dir().join("lucie3d-tiny.ckpt");
    out.checkpoint.save(&path)?;
    assert_eq!(Checkpoint::load(&path)?, out.checkpoint);
    println!("saved {}", path.display());
    Ok(())
}
