//! Finite-difference checks of every reverse-mode gradient used in training.

use std::sync::Arc;

use lucie3d::layout::ChannelLayout;
use lucie3d::losses::{total_loss, total_loss_on_tape, LossWeights, RegularizerConfig, ZonalSpectrumLoss};
use lucie3d::model::{record_block, record_forward, BlockNodes, ModelConfig, ModelParams};
use lucie3d::sht::Sht;
use lucie3d::tensor::{backward, NodeId, Tape, Tensor};
use lucie3d::GridSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-6;

/// Compares tape gradients of `f` with central differences on `probes`
/// randomly chosen coordinates of every input tensor.
pub fn check<F>(inputs: &[Tensor], probes: usize, seed: u64, f: F)
where
    F: Fn(&mut Tape, &[NodeId]) -> NodeId,
{
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| tape.param(t.clone()).unwrap()).collect();
    let loss = f(&mut tape, &ids);
    let grads = backward(&tape, loss).unwrap();

    let eval = |perturbed: &[Tensor]| -> f64 {
        let mut t = Tape::new();
        let ids: Vec<NodeId> = perturbed.iter().map(|x| t.param(x.clone()).unwrap()).collect();
        let l = f(&mut t, &ids);
        t.value(l).data[0]
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.data(ids[k]).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; input.len()]);
        let (mut diff, mut norm) = (0.0f64, 0.0f64);
        for _ in 0..probes.min(input.len()) {
            let i = rng.gen_range(0..input.len());
            let mut p = inputs.to_vec();
            p[k].data[i] += H;
            let up = eval(&p);
            p[k].data[i] -= 2.0 * H;
            let down = eval(&p);
            let fd = (up - down) / (2.0 * H);
            diff = diff.max((fd - analytic[i]).abs());
            norm = norm.max(fd.abs()).max(analytic[i].abs());
        }
        let rel = diff / norm.max(1e-12);
        assert!(rel < TOL, "input {k}: relative gradient error {rel:e}");
    }
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

pub fn weighted_l2_gradient() {
    let g = Arc::new(GridSpec::t7().unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let c = 3;
    let pred = random_tensor(&mut rng, vec![c, g.nlat, g.nlon], 1.0);
    let target = Arc::new(random_tensor(&mut rng, vec![c, g.nlat, g.nlon], 1.0).data);
    let weights = vec![0.7, 1.3, 0.2];
    check(&[pred], 60, 2, |t, ids| t.weighted_l2(ids[0], target.clone(), weights.clone(), &g).unwrap());
}

pub fn spectral_regularizer_gradient() {
    let g = GridSpec::t7().unwrap();
    let cfg = RegularizerConfig { active: true, ..Default::default() };
    let spec = Arc::new(ZonalSpectrumLoss::new(&g, &cfg).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = 2;
    let pred = random_tensor(&mut rng, vec![c, g.nlat, g.nlon], 1.0);
    let target = Arc::new(random_tensor(&mut rng, vec![c, g.nlat, g.nlon], 1.0).data);
    check(&[pred], 60, 4, |t, ids| t.spectral_reg(ids[0], target.clone(), &spec).unwrap());
}

pub fn sfno_block_gradient() {
    let g = GridSpec::t7().unwrap();
    let plan = Arc::new(Sht::new(&g));
    let latent = 4;
    let mc = ModelConfig {
        num_blocks: 1,
        latent_dim: latent,
        ..ModelConfig::desk(2, 2, g.truncation)
    };
    let params = ModelParams::init(mc, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let enc = 2 * mc.encoder_layers;
    let mut inputs: Vec<Tensor> = params.tensors[enc..enc + 5]
        .iter()
        .map(|p| {
            let mut t = Tensor::new(p.shape.clone(), p.data.clone()).unwrap();
            // Nonzero biases so every parameter sees a generic point.
            t.data.iter_mut().for_each(|v| *v += rng.gen_range(-0.1..0.1));
            t
        })
        .collect();
    inputs.push(random_tensor(&mut rng, vec![latent, g.nlat, g.nlon], 1.0));
    let probe = Arc::new(random_tensor(&mut rng, vec![latent, g.nlat, g.nlon], 1.0));
    check(&inputs, 25, 7, |t, ids| {
        let nodes = BlockNodes {
            spectral: ids[0],
            w1: ids[1],
            b1: ids[2],
            w2: ids[3],
            b2: ids[4],
        };
        let y = record_block(t, ids[5], &nodes, &plan).unwrap();
        let r = t.constant((*probe).clone()).unwrap();
        let yr = t.mul(y, r).unwrap();
        t.sum(yr).unwrap()
    });
}

pub fn total_loss_through_one_block_model() {
    let g = Arc::new(GridSpec::t7().unwrap());
    let plan = Arc::new(Sht::new(&g));
    let layout = ChannelLayout::standard(g.nlevels(), false);
    let mc = ModelConfig {
        num_blocks: 1,
        latent_dim: 4,
        ..ModelConfig::desk(layout.n_in(), layout.n_out(), g.truncation)
    };
    let params = ModelParams::init(mc, 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let input = random_tensor(&mut rng, vec![mc.in_channels, g.nlat, g.nlon], 1.0);
    let target = random_tensor(&mut rng, vec![mc.out_channels, g.nlat, g.nlon], 1.0).data;
    let mut weights = LossWeights::new(layout.output_names(), layout.loss_kinds()).unwrap();
    weights.weights.iter_mut().for_each(|w| *w = rng.gen_range(0.1..1.5));
    let reg = RegularizerConfig { active: true, ..Default::default() };
    let spec = Arc::new(ZonalSpectrumLoss::new(&g, &reg).unwrap());

    let tensors: Vec<Tensor> = params.tensors.iter().map(|p| Tensor::new(p.shape.clone(), p.data.clone()).unwrap()).collect();
    let record = |t: &mut Tape, ids: &[NodeId]| {
        let x = t.constant(input.clone()).unwrap();
        let y = record_forward(t, &mc, ids, x, &plan).unwrap();
        total_loss_on_tape(t, y, &target, &weights, Some(&spec), &g).unwrap()
    };

    // The tape value agrees with the direct evaluation.
    let mut tape = Tape::new();
    let ids: Vec<NodeId> = tensors.iter().map(|x| tape.param(x.clone()).unwrap()).collect();
    let nodes = record(&mut tape, &ids);
    let y = tape.value(nodes.total).data[0];
    let x = tape.constant(input.clone()).unwrap();
    let out = record_forward(&mut tape, &mc, &ids, x, &plan).unwrap();
    let direct = total_loss(&tape.value(out).data, &target, &weights, &reg, &g).unwrap();
    assert!((direct.total() - y).abs() < 1e-12 * y.abs());
    assert!(direct.regularizer > 0.0 && direct.plain > 0.0);

    check(&tensors, 12, 13, |t, ids| record(t, ids).total);
}
