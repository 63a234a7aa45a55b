//! Roll a checkpoint forward under rising and under stationary CO2 and
//! compare the fitted global-mean surface temperature trends.
//!
//! Usage: `cargo run --release --example forced_rollout -- CHECKPOINT DATA [YEARS]`
//! where DATA is a container written by `lucie3d synth`.

use lucie3d::checkpoint::Checkpoint;
use lucie3d::data::read_container;
use lucie3d::diagnostics::{annual_trend, trend::global_mean_series};
use lucie3d::forcing::{year_of, SOLAR_CONSTANT, STEPS_PER_YEAR};
use lucie3d::rollout::{initial_state, rollout_to_container, Co2Mode, Emulator, ForcingSeries, InitMode, RolloutConfig};

fn main() -> lucie3d::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    if args.len() < 3 {
        eprintln!("usage: forced_rollout CHECKPOINT DATA [YEARS]");
        std::process::exit(2);
    }
    let years: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(2);
    let em = Emulator::new(Checkpoint::load(&args[1])?)?;
    let data = read_container(&args[2])?;
    let forcings = ForcingSeries::from_container(&data, SOLAR_CONSTANT)?;
    let init = initial_state(InitMode::State(0), &data, em.layout(), None)?;
    let grid = em.grid().clone();
    let surface = grid.nlevels() - 1;

    for co2_mode in [Co2Mode::Observed, Co2Mode::Stationary(year_of(init.time))] {
        let config = RolloutConfig {
            horizon: years * STEPS_PER_YEAR - 1,
            co2_mode,
            ..Default::default()
        };
        let traj = rollout_to_container(&em, &init, &forcings, &config)?;
        let fit = annual_trend(&traj, "T", surface, &grid)?;
        let top = annual_trend(&traj, "T", 0, &grid)?;
        let last = *global_mean_series(&traj, "T", surface, &grid)?.last().unwrap_or(&f64::NAN);
        println!(
            "{co2_mode:?}: surface {:+.3} K/decade, top {:+.3} K/decade, final surface mean {last:.2} K",
            fit.slope, top.slope
        );
    }
    Ok(())
}
