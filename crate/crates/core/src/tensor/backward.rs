use crate::error::{Error, Result};
use crate::losses::{plain_l2_kernel, weighted_l2_kernel};

use super::{degree_of_coeff, sigmoid, NodeId, Op, Tape, Tensor};

/// Gradients of a scalar loss with respect to every node that requires them.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<Tensor> {
        let g = self.grads.get(id.0)?.as_ref()?;
        Some(Tensor {
            shape: self.shapes[id.0].clone(),
            data: g.clone(),
            complex: false,
        })
    }

    /// Borrowed gradient data; `None` when nothing flowed into the node.
    pub fn data(&self, id: NodeId) -> Option<&[f64]> {
        self.grads.get(id.0)?.as_deref()
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, len: usize) -> &mut Vec<f64> {
    slot.get_or_insert_with(|| vec![0.0; len])
}

/// Reverse sweep over the tape from a scalar loss node.
pub fn backward(tape: &Tape, loss: NodeId) -> Result<Gradients> {
    let n = tape.nodes.len();
    let node = tape
        .nodes
        .get(loss.0)
        .ok_or_else(|| Error::Tape(format!("node {} is not on this tape", loss.0)))?;
    if !node.value.is_scalar() {
        return Err(Error::Tape(format!(
            "loss must be scalar, got shape {:?}",
            node.value.shape
        )));
    }
    let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
    grads[loss.0] = Some(vec![1.0]);

    for idx in (0..=loss.0).rev() {
        let Some(g) = grads[idx].take() else { continue };
        let node = &tape.nodes[idx];
        if !node.requires_grad {
            continue;
        }
        let wants = |id: NodeId| tape.nodes[id.0].requires_grad;
        let len_of = |id: NodeId| tape.nodes[id.0].value.len();
        match &node.op {
            Op::Leaf => {
                grads[idx] = Some(g);
                continue;
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if wants(*a) {
                    let ga = accumulate(&mut grads[a.0], g.len());
                    ga.iter_mut().zip(&g).for_each(|(x, y)| *x += y);
                }
                if wants(*b) {
                    let gb = accumulate(&mut grads[b.0], g.len());
                    gb.iter_mut().zip(&g).for_each(|(x, y)| *x += sign * y);
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (&tape.nodes[a.0].value.data, &tape.nodes[b.0].value.data);
                if wants(*a) {
                    let ga = accumulate(&mut grads[a.0], g.len());
                    for k in 0..g.len() {
                        ga[k] += g[k] * vb[k];
                    }
                }
                if wants(*b) {
                    let gb = accumulate(&mut grads[b.0], g.len());
                    for k in 0..g.len() {
                        gb[k] += g[k] * va[k];
                    }
                }
            }
            Op::Scale(a, c) => {
                let ga = accumulate(&mut grads[a.0], g.len());
                ga.iter_mut().zip(&g).for_each(|(x, y)| *x += c * y);
            }
            Op::Sum(a) => {
                let ga = accumulate(&mut grads[a.0], len_of(*a));
                ga.iter_mut().for_each(|x| *x += g[0]);
            }
            Op::Silu(a) => {
                let xs = &tape.nodes[a.0].value.data;
                let ga = accumulate(&mut grads[a.0], g.len());
                for k in 0..g.len() {
                    let s = sigmoid(xs[k]);
                    ga[k] += g[k] * s * (1.0 + xs[k] * (1.0 - s));
                }
            }
            Op::Linear { w, x, b } => {
                let tw = &tape.nodes[w.0].value;
                let tx = &tape.nodes[x.0].value;
                let (n_out, n_in, npts) = (tw.shape[0], tw.shape[1], tx.inner());
                if wants(*w) {
                    let gw = accumulate(&mut grads[w.0], n_out * n_in);
                    for o in 0..n_out {
                        let go = &g[o * npts..(o + 1) * npts];
                        for i in 0..n_in {
                            let xi = &tx.data[i * npts..(i + 1) * npts];
                            gw[o * n_in + i] += go.iter().zip(xi).map(|(p, q)| p * q).sum::<f64>();
                        }
                    }
                }
                if wants(*x) {
                    let gx = accumulate(&mut grads[x.0], n_in * npts);
                    for o in 0..n_out {
                        let go = &g[o * npts..(o + 1) * npts];
                        for i in 0..n_in {
                            let wv = tw.data[o * n_in + i];
                            let gxi = &mut gx[i * npts..(i + 1) * npts];
                            for (r, &gv) in gxi.iter_mut().zip(go) {
                                *r += wv * gv;
                            }
                        }
                    }
                }
                if let Some(b) = b {
                    if wants(*b) {
                        let gb = accumulate(&mut grads[b.0], n_out);
                        for o in 0..n_out {
                            gb[o] += g[o * npts..(o + 1) * npts].iter().sum::<f64>();
                        }
                    }
                }
            }
            Op::ShtForward(x, plan) => {
                let npts = plan.npoints();
                let nc = 2 * plan.ncoef();
                let c = g.len() / nc;
                let gx = accumulate(&mut grads[x.0], c * npts);
                let mut buf = vec![0.0; npts];
                for ch in 0..c {
                    plan.forward_adjoint_raw(&g[ch * nc..(ch + 1) * nc], &mut buf);
                    gx[ch * npts..(ch + 1) * npts]
                        .iter_mut()
                        .zip(&buf)
                        .for_each(|(a, b)| *a += b);
                }
            }
            Op::ShtInverse(x, plan) => {
                let npts = plan.npoints();
                let nc = 2 * plan.ncoef();
                let c = g.len() / npts;
                let gx = accumulate(&mut grads[x.0], c * nc);
                let mut buf = vec![0.0; nc];
                for ch in 0..c {
                    plan.inverse_adjoint_raw(&g[ch * npts..(ch + 1) * npts], &mut buf);
                    gx[ch * nc..(ch + 1) * nc]
                        .iter_mut()
                        .zip(&buf)
                        .for_each(|(a, b)| *a += b);
                }
            }
            Op::SpectralMix { x, w, truncation } => {
                let tx = &tape.nodes[x.0].value;
                let tw = &tape.nodes[w.0].value;
                let (c_in, ncoef) = (tx.shape[0], tx.shape[1]);
                let c_out = tw.shape[1];
                let degrees = degree_of_coeff(*truncation);
                if wants(*x) {
                    let gx = accumulate(&mut grads[x.0], tx.len());
                    for o in 0..c_out {
                        let go = &g[o * ncoef * 2..(o + 1) * ncoef * 2];
                        for i in 0..c_in {
                            let gxi = &mut gx[i * ncoef * 2..(i + 1) * ncoef * 2];
                            for (k, &l) in degrees.iter().enumerate() {
                                let widx = ((l * c_out + o) * c_in + i) * 2;
                                let (wr, wi) = (tw.data[widx], tw.data[widx + 1]);
                                let (gr, gi) = (go[2 * k], go[2 * k + 1]);
                                gxi[2 * k] += wr * gr + wi * gi;
                                gxi[2 * k + 1] += -wi * gr + wr * gi;
                            }
                        }
                    }
                }
                if wants(*w) {
                    let gw = accumulate(&mut grads[w.0], tw.len());
                    for o in 0..c_out {
                        let go = &g[o * ncoef * 2..(o + 1) * ncoef * 2];
                        for i in 0..c_in {
                            let xi = &tx.data[i * ncoef * 2..(i + 1) * ncoef * 2];
                            for (k, &l) in degrees.iter().enumerate() {
                                let widx = ((l * c_out + o) * c_in + i) * 2;
                                let (gr, gi) = (go[2 * k], go[2 * k + 1]);
                                let (xr, xim) = (xi[2 * k], xi[2 * k + 1]);
                                gw[widx] += gr * xr + gi * xim;
                                gw[widx + 1] += -gr * xim + gi * xr;
                            }
                        }
                    }
                }
            }
            Op::Narrow { x, start } => {
                let inner = tape.nodes[x.0].value.inner();
                let gx = accumulate(&mut grads[x.0], len_of(*x));
                let off = start * inner;
                gx[off..off + g.len()]
                    .iter_mut()
                    .zip(&g)
                    .for_each(|(a, b)| *a += b);
            }
            Op::WeightedL2 {
                pred,
                target,
                channel_weights,
                grid,
            } => {
                let p = &tape.nodes[pred.0].value.data;
                let gp = accumulate(&mut grads[pred.0], p.len());
                weighted_l2_kernel(p, target, channel_weights, grid, Some((gp, g[0])));
            }
            Op::PlainL2 {
                pred,
                target,
                channel_weights,
            } => {
                let p = &tape.nodes[pred.0].value.data;
                let gp = accumulate(&mut grads[pred.0], p.len());
                plain_l2_kernel(p, target, channel_weights, Some((gp, g[0])));
            }
            Op::SpectralReg {
                pred,
                target,
                spectrum,
            } => {
                let tp = &tape.nodes[pred.0].value;
                let channels = tp.channels();
                let gp = accumulate(&mut grads[pred.0], tp.len());
                spectrum.gradient(&tp.data, target, channels, g[0], gp);
            }
        }
    }

    Ok(Gradients {
        grads,
        shapes: tape.nodes.iter().map(|n| n.value.shape.clone()).collect(),
    })
}
