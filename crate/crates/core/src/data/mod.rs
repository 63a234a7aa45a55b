//! Field container, normalization statistics and the synthetic climate generator.

pub mod container;
pub mod dataset;
pub mod norm;
pub mod synth;

pub use container::{read_container, write_container, ContainerHeader, ContainerReader, ContainerWriter, FieldContainer};
pub use dataset::{Dataset, Normalizer, Sample};
pub use norm::{compute_norm_stats, compute_norm_stats_file, ChannelStats, NormStats};
pub use synth::{generate_synthetic_climate, write_synthetic_climate, PlantedWave, SynthConfig, SyntheticClimate};
