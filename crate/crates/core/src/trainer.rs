//! Two-phase training: quadrature-weighted pre-training with adaptive
//! per-channel weights, then fine-tuning with the spectral regularizer.
//! One cosine learning-rate schedule spans both phases.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::checkpoint::Checkpoint;
use crate::data::dataset::{Dataset, Sample};
use crate::data::norm::NormStats;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::losses::{
    plain_l2_kernel, total_loss, total_loss_on_tape, update_adaptive_weights, weighted_l2_kernel, LossBreakdown, LossWeights, RegularizerConfig,
    ZonalSpectrumLoss,
};
use crate::model::{record_forward, ModelConfig, ModelParams};
use crate::optim::{adam_step, cosine_lr, AdamConfig, OptimizerState};
use crate::sht::Sht;
use crate::tensor::{backward, Tape, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub total_epochs: usize,
    pub finetune_epochs: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub weight_decay: f64,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Final fraction of the (strided) time axis held out for validation.
    pub val_fraction: f64,
    /// Use every `sample_stride`-th time step as a training sample.
    pub sample_stride: usize,
    pub adaptive_weighting: bool,
    /// Regularizer settings; `active` is ignored and set by the phase.
    pub regularizer: RegularizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_epochs: 160,
            finetune_epochs: 30,
            batch_size: 32,
            lr_max: 5e-4,
            lr_min: 1e-8,
            weight_decay: 1e-5,
            adam: AdamConfig::default(),
            seed: 0,
            val_fraction: 0.1,
            sample_stride: 1,
            adaptive_weighting: true,
            regularizer: RegularizerConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_epochs == 0 {
            return Err(Error::Config("total_epochs must be positive".into()));
        }
        if self.finetune_epochs > self.total_epochs {
            return Err(Error::Config("finetune_epochs exceeds total_epochs".into()));
        }
        if !(self.lr_min <= self.lr_max) || !(self.lr_min >= 0.0) {
            return Err(Error::Config("need 0 <= lr_min <= lr_max".into()));
        }
        if self.batch_size == 0 || self.sample_stride == 0 {
            return Err(Error::Config("batch_size and sample_stride must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Config("val_fraction must lie in [0, 1)".into()));
        }
        self.regularizer.validate()
    }

    pub fn lr(&self, epoch: usize) -> Result<f64> {
        cosine_lr(epoch as f64, self.total_epochs, self.lr_max, self.lr_min)
    }

    /// First epoch of the fine-tuning phase.
    pub fn finetune_start(&self) -> usize {
        self.total_epochs - self.finetune_epochs
    }

    pub fn is_finetune(&self, epoch: usize) -> bool {
        epoch >= self.finetune_start()
    }
}

/// Learning-rate schedule of `config` at `epoch`.
pub fn lr_schedule(epoch: usize, config: &TrainConfig) -> Result<f64> {
    config.lr(epoch)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub finetune: bool,
    pub lr: f64,
    pub weights_updated: bool,
    pub weights: Vec<f64>,
    /// Mean over training samples, evaluated before each batch update.
    pub train: LossBreakdown,
    pub val: Option<LossBreakdown>,
    pub train_channel: Vec<f64>,
    pub val_channel: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub channels: Vec<String>,
    pub records: Vec<EpochRecord>,
    /// Channels whose validation loss hit the denominator floor at some update.
    pub clamped: Vec<(usize, String)>,
}

impl TrainHistory {
    /// Line-oriented records: one per (epoch, channel).
    pub fn to_text(&self) -> String {
        let mut s = String::from("# epoch phase lr channel weight train_loss val_loss\n");
        for r in &self.records {
            let phase = if r.finetune { "finetune" } else { "pretrain" };
            for (c, name) in self.channels.iter().enumerate() {
                let val = r.val_channel.get(c).copied().unwrap_or(f64::NAN);
                let _ = writeln!(
                    s,
                    "{} {} {:e} {} {:e} {:e} {:e}",
                    r.epoch, phase, r.lr, name, r.weights[c], r.train_channel[c], val
                );
            }
        }
        s
    }

    /// One summary line per epoch.
    pub fn summary(&self) -> String {
        let mut s = String::from("# epoch phase lr train_total train_reg val_total\n");
        for r in &self.records {
            let phase = if r.finetune { "finetune" } else { "pretrain" };
            let val = r.val.map(|v| v.total()).unwrap_or(f64::NAN);
            let _ = writeln!(s, "{} {} {:e} {:e} {:e} {:e}", r.epoch, phase, r.lr, r.train.total(), r.train.regularizer, val);
        }
        s
    }
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: TrainHistory,
    pub weights: LossWeights,
}

/// Initial loss weights for a dataset: unit weights with the manual factors,
/// degenerate channels excluded.
pub fn initial_weights(dataset: &Dataset) -> Result<LossWeights> {
    let mut w = LossWeights::new(dataset.layout.output_names(), dataset.layout.loss_kinds())?;
    for (c, ex) in dataset.normalizer.excluded_outputs().into_iter().enumerate() {
        if ex {
            w.exclude(c);
        }
    }
    Ok(w)
}

struct SampleEval {
    breakdown: LossBreakdown,
    channel: Vec<f64>,
    grads: Option<Vec<Vec<f64>>>,
}

/// Unweighted per-channel losses of a prediction: quadrature L2 for weighted
/// channels, plain L2 for the rest.
fn channel_losses(pred: &[f64], target: &[f64], weights: &LossWeights, grid: &GridSpec) -> Vec<f64> {
    let np = grid.npoints();
    let nw = weights.n_weighted();
    (0..weights.len())
        .map(|c| {
            let (p, t) = (&pred[c * np..(c + 1) * np], &target[c * np..(c + 1) * np]);
            if c < nw {
                weighted_l2_kernel(p, t, &[1.0], grid, None)
            } else {
                plain_l2_kernel(p, t, &[1.0], None)
            }
        })
        .collect()
}

struct Context<'a> {
    params: &'a ModelParams,
    plan: &'a Arc<Sht>,
    grid: &'a Arc<GridSpec>,
    weights: &'a LossWeights,
    spectrum: Option<&'a Arc<ZonalSpectrumLoss>>,
}

fn eval_sample(ctx: &Context, sample: &Sample, with_grad: bool) -> Result<SampleEval> {
    let g = ctx.grid;
    let cfg = &ctx.params.config;
    let mut tape = Tape::new();
    let nodes = if with_grad {
        ctx.params.register(&mut tape)?
    } else {
        ctx.params
            .tensors
            .iter()
            .map(|t| tape.constant(Tensor::new(t.shape.clone(), t.data.clone())?))
            .collect::<Result<Vec<_>>>()?
    };
    let x = tape.constant(Tensor::new(vec![cfg.in_channels, g.nlat, g.nlon], sample.input.clone())?)?;
    let y = record_forward(&mut tape, cfg, &nodes, x, ctx.plan)?;
    let loss = total_loss_on_tape(&mut tape, y, &sample.target, ctx.weights, ctx.spectrum, g)?;
    let value = |id| tape.value(id).data[0];
    let breakdown = LossBreakdown {
        weighted: value(loss.weighted),
        plain: loss.plain.map(value).unwrap_or(0.0),
        regularizer: loss.regularizer.map(value).unwrap_or(0.0),
    };
    let channel = channel_losses(&tape.value(y).data, &sample.target, ctx.weights, g);
    let grads = if with_grad {
        let gr = backward(&tape, loss.total)?;
        Some(
            nodes
                .iter()
                .zip(&ctx.params.tensors)
                .map(|(id, t)| gr.data(*id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.data.len()]))
                .collect(),
        )
    } else {
        None
    };
    Ok(SampleEval {
        breakdown,
        channel,
        grads,
    })
}

fn add_breakdown(acc: &mut LossBreakdown, b: &LossBreakdown, scale: f64) {
    acc.weighted += scale * b.weighted;
    acc.plain += scale * b.plain;
    acc.regularizer += scale * b.regularizer;
}

/// Mean loss breakdown and per-channel losses of `params` over the samples at `times`.
pub fn evaluate(
    dataset: &Dataset,
    params: &ModelParams,
    times: &[usize],
    weights: &LossWeights,
    regularizer: Option<&RegularizerConfig>,
    grid: &GridSpec,
) -> Result<(LossBreakdown, Vec<f64>)> {
    if times.is_empty() {
        return Err(Error::Invalid("no samples to evaluate".into()));
    }
    let plan = Arc::new(Sht::new(grid));
    let grid_arc = Arc::new(grid.clone());
    let spectrum = match regularizer {
        Some(r) if r.active => Some(Arc::new(ZonalSpectrumLoss::new(grid, r)?)),
        _ => None,
    };
    let ctx = Context {
        params,
        plan: &plan,
        grid: &grid_arc,
        weights,
        spectrum: spectrum.as_ref(),
    };
    let evals: Vec<SampleEval> = times
        .par_iter()
        .map(|&t| eval_sample(&ctx, &dataset.sample(t)?, false))
        .collect::<Result<_>>()?;
    let scale = 1.0 / times.len() as f64;
    let mut total = LossBreakdown::default();
    let mut channel = vec![0.0; weights.len()];
    for e in &evals {
        add_breakdown(&mut total, &e.breakdown, scale);
        channel.iter_mut().zip(&e.channel).for_each(|(a, b)| *a += scale * b);
    }
    Ok((total, channel))
}

/// Trains from a seeded initialization.
pub fn train(dataset: &Dataset, stats: &NormStats, config: &TrainConfig, model_config: &ModelConfig, grid: &GridSpec) -> Result<TrainOutcome> {
    let params = ModelParams::init(*model_config, config.seed)?;
    train_from(dataset, stats, config, params, grid)
}

/// Trains starting from `params`.
pub fn train_from(dataset: &Dataset, stats: &NormStats, config: &TrainConfig, mut params: ModelParams, grid: &GridSpec) -> Result<TrainOutcome> {
    config.validate()?;
    params.validate()?;
    let mc = params.config;
    if mc.in_channels != dataset.layout.n_in() || mc.out_channels != dataset.layout.n_out() {
        return Err(Error::Config("model channel counts do not match the dataset layout".into()));
    }
    let (train_t, val_t) = dataset.split(config.sample_stride, config.val_fraction);
    if train_t.is_empty() {
        return Err(Error::Invalid("empty training set".into()));
    }
    let plan = Arc::new(Sht::new(grid));
    let grid_arc = Arc::new(grid.clone());
    let reg = RegularizerConfig {
        active: true,
        ..config.regularizer
    };
    let spectrum = Arc::new(ZonalSpectrumLoss::new(grid, &reg)?);
    let mut weights = initial_weights(dataset)?;
    let mut opt = OptimizerState::new(&params.tensors.iter().map(|t| t.data.clone()).collect::<Vec<_>>());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9));
    let mut history = TrainHistory {
        channels: weights.channels.clone(),
        records: Vec::new(),
        clamped: Vec::new(),
    };
    let mut last_val_channel: Option<Vec<f64>> = None;

    for epoch in 0..config.total_epochs {
        let mut weights_updated = false;
        if config.adaptive_weighting && weights.is_update_epoch(epoch) {
            if let Some(val) = &last_val_channel {
                let up = update_adaptive_weights(val, &weights, epoch)?;
                weights_updated = up.updated;
                history.clamped.extend(up.clamped.into_iter().map(|c| (epoch, c)));
                weights = up.weights;
            }
        }
        let finetune = config.is_finetune(epoch);
        let lr = config.lr(epoch)?;
        let mut order = train_t.clone();
        order.shuffle(&mut rng);

        let mut train_total = LossBreakdown::default();
        let mut train_channel = vec![0.0; weights.len()];
        let per_sample = 1.0 / order.len() as f64;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let abort = |reason: String| Error::TrainingAborted {
                epoch,
                batch: batch_idx,
                reason,
            };
            let ctx = Context {
                params: &params,
                plan: &plan,
                grid: &grid_arc,
                weights: &weights,
                spectrum: finetune.then_some(&spectrum),
            };
            let evals: Vec<SampleEval> = batch
                .par_iter()
                .map(|&t| eval_sample(&ctx, &dataset.sample(t)?, true))
                .collect::<Result<_>>()
                .map_err(|e| abort(e.to_string()))?;
            let mut grads: Vec<Vec<f64>> = params.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect();
            let inv = 1.0 / batch.len() as f64;
            for e in &evals {
                if !e.breakdown.total().is_finite() {
                    return Err(abort("non-finite loss".into()));
                }
                add_breakdown(&mut train_total, &e.breakdown, per_sample);
                train_channel.iter_mut().zip(&e.channel).for_each(|(a, b)| *a += per_sample * b);
                for (g, sg) in grads.iter_mut().zip(e.grads.as_ref().expect("gradients requested")) {
                    g.iter_mut().zip(sg).for_each(|(a, b)| *a += inv * b);
                }
            }
            let mut slices: Vec<&mut Vec<f64>> = params.tensors.iter_mut().map(|t| &mut t.data).collect();
            adam_step(&mut slices, &grads, &mut opt, lr, config.weight_decay, &config.adam).map_err(|e| abort(e.to_string()))?;
        }

        let (val, val_channel) = if val_t.is_empty() {
            (None, train_channel.clone())
        } else {
            let r = finetune.then_some(&reg);
            let (b, c) = evaluate(dataset, &params, &val_t, &weights, r, grid)?;
            (Some(b), c)
        };
        last_val_channel = Some(val_channel.clone());
        history.records.push(EpochRecord {
            epoch,
            finetune,
            lr,
            weights_updated,
            weights: weights.weights.clone(),
            train: train_total,
            val,
            train_channel,
            val_channel: if val_t.is_empty() { Vec::new() } else { val_channel },
        });
    }

    let checkpoint = Checkpoint::new(params, grid.clone(), dataset.layout.clone(), stats.clone())?;
    Ok(TrainOutcome {
        checkpoint,
        history,
        weights,
    })
}

/// Total loss of raw stacked outputs against a sample target, without a tape.
pub fn sample_loss(pred: &[f64], sample: &Sample, weights: &LossWeights, reg: &RegularizerConfig, grid: &GridSpec) -> Result<LossBreakdown> {
    total_loss(pred, &sample.target, weights, reg, grid)
}
