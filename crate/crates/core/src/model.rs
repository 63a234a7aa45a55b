//! Spherical Fourier neural operator: pointwise encoder, residual SFNO
//! blocks and pointwise decoder.
//!
//! Each block computes `x + W2 · silu(W1 · S(x) + b1) + b2`, where `S` is the
//! spectral convolution (analysis, per-degree complex channel mixing,
//! synthesis). Encoder and decoder stacks are 1x1 affine layers separated by
//! SiLU when more than one layer is requested.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::sht::Sht;
use crate::tensor::{NodeId, Tape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub num_blocks: usize,
    pub latent_dim: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub truncation: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl ModelConfig {
    /// Full-size hyperparameters: 12 blocks, latent 256, one encoder and decoder layer, T30.
    pub fn full(in_channels: usize, out_channels: usize) -> Self {
        Self {
            num_blocks: 12,
            latent_dim: 256,
            encoder_layers: 1,
            decoder_layers: 1,
            truncation: 30,
            in_channels,
            out_channels,
        }
    }

    /// Desk-scale profile: 2 blocks, latent 32.
    pub fn desk(in_channels: usize, out_channels: usize, truncation: usize) -> Self {
        Self {
            num_blocks: 2,
            latent_dim: 32,
            encoder_layers: 1,
            decoder_layers: 1,
            truncation,
            in_channels,
            out_channels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Config("channel counts must be positive".into()));
        }
        if self.encoder_layers == 0 || self.decoder_layers == 0 {
            return Err(Error::Config("encoder and decoder need at least one layer".into()));
        }
        if self.truncation == 0 {
            return Err(Error::Config("truncation must be at least 1".into()));
        }
        Ok(())
    }

    /// Names and shapes of every parameter tensor, in storage order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let c = self.latent_dim;
        let mut out = Vec::new();
        for k in 0..self.encoder_layers {
            let fan_in = if k == 0 { self.in_channels } else { c };
            out.push((format!("encoder.{k}.weight"), vec![c, fan_in]));
            out.push((format!("encoder.{k}.bias"), vec![c]));
        }
        for b in 0..self.num_blocks {
            out.push((format!("block.{b}.spectral"), vec![self.truncation + 1, c, c, 2]));
            out.push((format!("block.{b}.mlp1.weight"), vec![c, c]));
            out.push((format!("block.{b}.mlp1.bias"), vec![c]));
            out.push((format!("block.{b}.mlp2.weight"), vec![c, c]));
            out.push((format!("block.{b}.mlp2.bias"), vec![c]));
        }
        for k in 0..self.decoder_layers {
            let fan_out = if k + 1 == self.decoder_layers { self.out_channels } else { c };
            out.push((format!("decoder.{k}.weight"), vec![fan_out, c]));
            out.push((format!("decoder.{k}.bias"), vec![fan_out]));
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.param_shapes()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub tensors: Vec<ParamTensor>,
}

impl ModelParams {
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let tensors = config
            .param_shapes()
            .into_iter()
            .map(|(name, shape)| ParamTensor {
                data: vec![0.0; shape.iter().product()],
                name,
                shape,
            })
            .collect();
        Ok(Self { config, tensors })
    }

    /// Seeded initialization: Xavier-uniform affine weights, zero biases and
    /// complex Gaussian spectral weights with scale `1/sqrt(C (l+1))`.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = config.latent_dim;
        for t in &mut p.tensors {
            if t.name.ends_with(".bias") {
                continue;
            }
            if t.name.ends_with(".spectral") {
                let per_l = c * c * 2;
                for (idx, v) in t.data.iter_mut().enumerate() {
                    let l = idx / per_l;
                    let scale = 1.0 / ((c * (l + 1)) as f64).sqrt() / std::f64::consts::SQRT_2;
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v = scale * z;
                }
            } else {
                let bound = (6.0 / (t.shape[0] + t.shape[1]) as f64).sqrt();
                for v in &mut t.data {
                    *v = rng.gen_range(-bound..bound);
                }
            }
        }
        Ok(p)
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&ParamTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ParamTensor> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    /// Checks that tensor names and shapes agree with the configuration.
    pub fn validate(&self) -> Result<()> {
        let shapes = self.config.param_shapes();
        if shapes.len() != self.tensors.len() {
            return Err(Error::Config("parameter tensor count mismatch".into()));
        }
        for ((name, shape), t) in shapes.iter().zip(&self.tensors) {
            if name != &t.name || shape != &t.shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::Config(format!("parameter {name} does not match configuration")));
            }
        }
        Ok(())
    }

    /// Registers every tensor as a tape parameter, in storage order.
    pub fn register(&self, tape: &mut Tape) -> Result<Vec<NodeId>> {
        self.tensors
            .iter()
            .map(|t| tape.param(Tensor::new(t.shape.clone(), t.data.clone())?))
            .collect()
    }
}

/// Per-degree spectral convolution recorded on a tape.
pub fn record_spectral_conv(tape: &mut Tape, x: NodeId, weights: NodeId, plan: &Arc<Sht>) -> Result<NodeId> {
    let spec = tape.sht_forward(x, plan)?;
    let mixed = tape.spectral_mix(spec, weights, plan.truncation())?;
    tape.sht_inverse(mixed, plan)
}

/// Block parameter node ids: spectral weights, then MLP weight/bias pairs.
#[derive(Debug, Clone, Copy)]
pub struct BlockNodes {
    pub spectral: NodeId,
    pub w1: NodeId,
    pub b1: NodeId,
    pub w2: NodeId,
    pub b2: NodeId,
}

pub fn record_block(tape: &mut Tape, x: NodeId, p: &BlockNodes, plan: &Arc<Sht>) -> Result<NodeId> {
    let s = record_spectral_conv(tape, x, p.spectral, plan)?;
    let h = tape.linear(p.w1, s, Some(p.b1))?;
    let h = tape.silu(h)?;
    let y = tape.linear(p.w2, h, Some(p.b2))?;
    tape.add(x, y)
}

/// Records the full network on `input` (`[C_in, nlat, nlon]`) given registered parameters.
pub fn record_forward(tape: &mut Tape, config: &ModelConfig, params: &[NodeId], input: NodeId, plan: &Arc<Sht>) -> Result<NodeId> {
    if plan.truncation() != config.truncation {
        return Err(Error::Truncation {
            expected: config.truncation,
            got: plan.truncation(),
        });
    }
    let expected = 2 * (config.encoder_layers + config.decoder_layers) + 5 * config.num_blocks;
    if params.len() != expected {
        return Err(Error::Config(format!("expected {expected} parameter nodes, got {}", params.len())));
    }
    let mut it = params.iter().copied();
    let mut next = || it.next().expect("length checked");
    let mut x = input;
    for k in 0..config.encoder_layers {
        if k > 0 {
            x = tape.silu(x)?;
        }
        let (w, b) = (next(), next());
        x = tape.linear(w, x, Some(b))?;
    }
    for _ in 0..config.num_blocks {
        let nodes = BlockNodes {
            spectral: next(),
            w1: next(),
            b1: next(),
            w2: next(),
            b2: next(),
        };
        x = record_block(tape, x, &nodes, plan)?;
    }
    for k in 0..config.decoder_layers {
        if k > 0 {
            x = tape.silu(x)?;
        }
        let (w, b) = (next(), next());
        x = tape.linear(w, x, Some(b))?;
    }
    Ok(x)
}

fn check_input(x: &Tensor, channels: usize, plan: &Sht) -> Result<()> {
    if x.complex || x.channels() != channels || x.inner() != plan.npoints() {
        return Err(Error::Shape {
            expected: vec![channels, plan.grid().nlat, plan.grid().nlon],
            got: x.shape.clone(),
        });
    }
    Ok(())
}

/// Spectral convolution of a `[C, nlat, nlon]` latent with `[L+1, C_out, C, 2]` weights.
pub fn spectral_conv(latent: &Tensor, weights: &Tensor, plan: &Arc<Sht>) -> Result<Tensor> {
    check_input(latent, latent.channels(), plan)?;
    let mut tape = Tape::new();
    let x = tape.constant(latent.clone())?;
    let w = tape.constant(weights.clone())?;
    let y = record_spectral_conv(&mut tape, x, w, plan)?;
    Ok(tape.value(y).clone())
}

/// One residual block using the parameters of block `index`.
pub fn sfno_block(latent: &Tensor, params: &ModelParams, index: usize, plan: &Arc<Sht>) -> Result<Tensor> {
    if index >= params.config.num_blocks {
        return Err(Error::OutOfRange(format!("block {index}")));
    }
    check_input(latent, params.config.latent_dim, plan)?;
    let get = |suffix: &str| -> Result<Tensor> {
        let t = params
            .get(&format!("block.{index}.{suffix}"))
            .ok_or_else(|| Error::Missing(format!("block.{index}.{suffix}")))?;
        Tensor::new(t.shape.clone(), t.data.clone())
    };
    let mut tape = Tape::new();
    let x = tape.constant(latent.clone())?;
    let nodes = BlockNodes {
        spectral: tape.constant(get("spectral")?)?,
        w1: tape.constant(get("mlp1.weight")?)?,
        b1: tape.constant(get("mlp1.bias")?)?,
        w2: tape.constant(get("mlp2.weight")?)?,
        b2: tape.constant(get("mlp2.bias")?)?,
    };
    let y = record_block(&mut tape, x, &nodes, plan)?;
    Ok(tape.value(y).clone())
}

/// Network output split into prognostic tendencies and diagnostic channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    pub tendencies: Tensor,
    pub diagnostics: Tensor,
}

/// Evaluates the network on a normalized `[C_in, nlat, nlon]` input. The
/// first `n_prognostic` output channels are tendencies; the rest are diagnostics.
pub fn model_forward(input: &Tensor, params: &ModelParams, n_prognostic: usize, plan: &Arc<Sht>) -> Result<ModelOutput> {
    let out = forward_raw(input, params, plan)?;
    let c = params.config.out_channels;
    if n_prognostic > c {
        return Err(Error::OutOfRange(format!("{n_prognostic} prognostic channels of {c}")));
    }
    let npts = plan.npoints();
    let g = plan.grid();
    let split = |lo: usize, hi: usize| Tensor::new(vec![hi - lo, g.nlat, g.nlon], out.data[lo * npts..hi * npts].to_vec());
    Ok(ModelOutput {
        tendencies: split(0, n_prognostic)?,
        diagnostics: split(n_prognostic, c)?,
    })
}

/// Evaluates the network and returns the stacked `[C_out, nlat, nlon]` output.
pub fn forward_raw(input: &Tensor, params: &ModelParams, plan: &Arc<Sht>) -> Result<Tensor> {
    check_input(input, params.config.in_channels, plan)?;
    let mut tape = Tape::new();
    let nodes: Vec<NodeId> = params
        .tensors
        .iter()
        .map(|t| tape.constant(Tensor::new(t.shape.clone(), t.data.clone())?))
        .collect::<Result<_>>()?;
    let x = tape.constant(input.clone())?;
    let y = record_forward(&mut tape, &params.config, &nodes, x, plan)?;
    Ok(tape.value(y).clone())
}
