//! Dense float64 tensors with a small reverse-mode tape.
//!
//! The operation set is closed: elementwise arithmetic, SiLU, a channel-wise
//! affine map (1x1 convolution), batched spherical harmonic analysis and
//! synthesis, per-degree spectral channel mixing, channel slicing, and the
//! three training losses. There is no broadcasting; every backward rule is
//! written out by hand in [`backward`].
//!
//! Complex tensors store interleaved `[re, im]` pairs in their last axis and
//! are differentiated as pairs of reals.

mod backward;

use std::sync::Arc;

pub use backward::{backward, Gradients};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::losses::{plain_l2_kernel, weighted_l2_kernel, ZonalSpectrumLoss};
use crate::sht::{Sht, SpectralCoeffs};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    /// Last axis holds interleaved real/imaginary parts.
    pub complex: bool,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape {
                expected: shape,
                got: vec![data.len()],
            });
        }
        Ok(Self {
            shape,
            data,
            complex: false,
        })
    }

    pub fn complex(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.last() != Some(&2) {
            return Err(Error::Shape {
                expected: vec![2],
                got: shape,
            });
        }
        let mut t = Self::new(shape, data)?;
        t.complex = true;
        Ok(t)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
            complex: false,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![v],
            complex: false,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Size of the leading (channel) axis.
    pub fn channels(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Elements per leading-axis slice.
    pub fn inner(&self) -> usize {
        self.shape.iter().skip(1).product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Sum(NodeId),
    Silu(NodeId),
    Linear {
        w: NodeId,
        x: NodeId,
        b: Option<NodeId>,
    },
    ShtForward(NodeId, Arc<Sht>),
    ShtInverse(NodeId, Arc<Sht>),
    SpectralMix {
        x: NodeId,
        w: NodeId,
        truncation: usize,
    },
    Narrow {
        x: NodeId,
        start: usize,
    },
    WeightedL2 {
        pred: NodeId,
        target: Arc<Vec<f64>>,
        channel_weights: Vec<f64>,
        grid: Arc<GridSpec>,
    },
    PlainL2 {
        pred: NodeId,
        target: Arc<Vec<f64>>,
        channel_weights: Vec<f64>,
    },
    SpectralReg {
        pred: NodeId,
        target: Arc<Vec<f64>>,
        spectrum: Arc<ZonalSpectrumLoss>,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub value: Tensor,
    pub op: Op,
    pub requires_grad: bool,
}

/// Records operations in topological order for a single backward pass.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn get(&self, id: NodeId) -> Result<&Node> {
        self.nodes
            .get(id.0)
            .ok_or_else(|| Error::Tape(format!("node {} is not on this tape", id.0)))
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Result<NodeId> {
        if !value.data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("tape node {}", self.nodes.len())));
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// Parameter leaf; gradients are reported for it.
    pub fn param(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(value, Op::Leaf, true)
    }

    /// Constant leaf; no gradient flows into it.
    pub fn constant(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(value, Op::Leaf, false)
    }

    fn same_shape(&self, a: NodeId, b: NodeId) -> Result<(&Tensor, &Tensor)> {
        let (ta, tb) = (&self.get(a)?.value, &self.get(b)?.value);
        if ta.shape != tb.shape {
            return Err(Error::Shape {
                expected: ta.shape.clone(),
                got: tb.shape.clone(),
            });
        }
        Ok((ta, tb))
    }

    fn needs(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    fn binary(&mut self, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<NodeId> {
        let (ta, tb) = self.same_shape(a, b)?;
        let data = ta.data.iter().zip(&tb.data).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor {
            shape: ta.shape.clone(),
            data,
            complex: ta.complex,
        };
        let rg = self.needs(&[a, b]);
        self.push(value, op, rg)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product of two real (or two interleaved, taken as reals) tensors.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let t = &self.get(a)?.value;
        let value = Tensor {
            shape: t.shape.clone(),
            data: t.data.iter().map(|v| v * c).collect(),
            complex: t.complex,
        };
        let rg = self.needs(&[a]);
        self.push(value, Op::Scale(a, c), rg)
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let s = self.get(a)?.value.data.iter().sum();
        let rg = self.needs(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn silu(&mut self, a: NodeId) -> Result<NodeId> {
        let t = &self.get(a)?.value;
        let value = Tensor {
            shape: t.shape.clone(),
            data: t.data.iter().map(|&x| x * sigmoid(x)).collect(),
            complex: false,
        };
        let rg = self.needs(&[a]);
        self.push(value, Op::Silu(a), rg)
    }

    /// Channel-wise affine map: `w [out, in]`, `x [in, ...]`, `b [out]`.
    pub fn linear(&mut self, w: NodeId, x: NodeId, b: Option<NodeId>) -> Result<NodeId> {
        let tw = &self.get(w)?.value;
        let tx = &self.get(x)?.value;
        if tw.shape.len() != 2 || tw.shape[1] != tx.channels() {
            return Err(Error::Shape {
                expected: vec![tw.shape.first().copied().unwrap_or(0), tx.channels()],
                got: tw.shape.clone(),
            });
        }
        let (n_out, n_in, npts) = (tw.shape[0], tw.shape[1], tx.inner());
        let mut out = vec![0.0; n_out * npts];
        if let Some(b) = b {
            let tb = &self.get(b)?.value;
            if tb.len() != n_out {
                return Err(Error::Shape {
                    expected: vec![n_out],
                    got: tb.shape.clone(),
                });
            }
            for o in 0..n_out {
                out[o * npts..(o + 1) * npts].iter_mut().for_each(|v| *v = tb.data[o]);
            }
        }
        for o in 0..n_out {
            let row = &mut out[o * npts..(o + 1) * npts];
            for i in 0..n_in {
                let wv = tw.data[o * n_in + i];
                if wv == 0.0 {
                    continue;
                }
                let xi = &tx.data[i * npts..(i + 1) * npts];
                for (r, &xv) in row.iter_mut().zip(xi) {
                    *r += wv * xv;
                }
            }
        }
        let mut shape = tx.shape.clone();
        shape[0] = n_out;
        let value = Tensor {
            shape,
            data: out,
            complex: false,
        };
        let mut ids = vec![w, x];
        ids.extend(b);
        let rg = self.needs(&ids);
        self.push(value, Op::Linear { w, x, b }, rg)
    }

    /// Per-channel spherical harmonic analysis: `[C, nlat, nlon] -> [C, ncoef, 2]`.
    pub fn sht_forward(&mut self, x: NodeId, plan: &Arc<Sht>) -> Result<NodeId> {
        let tx = &self.get(x)?.value;
        let npts = plan.npoints();
        if tx.complex || tx.inner() != npts {
            return Err(Error::Shape {
                expected: vec![tx.channels(), plan.grid().nlat, plan.grid().nlon],
                got: tx.shape.clone(),
            });
        }
        let c = tx.channels();
        let nc = 2 * plan.ncoef();
        let mut out = vec![0.0; c * nc];
        for ch in 0..c {
            plan.forward_raw(&tx.data[ch * npts..(ch + 1) * npts], &mut out[ch * nc..(ch + 1) * nc]);
        }
        let value = Tensor {
            shape: vec![c, plan.ncoef(), 2],
            data: out,
            complex: true,
        };
        let rg = self.needs(&[x]);
        self.push(value, Op::ShtForward(x, plan.clone()), rg)
    }

    /// Per-channel spherical harmonic synthesis: `[C, ncoef, 2] -> [C, nlat, nlon]`.
    pub fn sht_inverse(&mut self, x: NodeId, plan: &Arc<Sht>) -> Result<NodeId> {
        let tx = &self.get(x)?.value;
        let nc = 2 * plan.ncoef();
        if !tx.complex || tx.inner() != nc {
            return Err(Error::Truncation {
                expected: plan.truncation(),
                got: tx.shape.get(1).copied().unwrap_or(0),
            });
        }
        let c = tx.channels();
        let npts = plan.npoints();
        let mut out = vec![0.0; c * npts];
        for ch in 0..c {
            plan.inverse_raw(&tx.data[ch * nc..(ch + 1) * nc], &mut out[ch * npts..(ch + 1) * npts]);
        }
        let value = Tensor {
            shape: vec![c, plan.grid().nlat, plan.grid().nlon],
            data: out,
            complex: false,
        };
        let rg = self.needs(&[x]);
        self.push(value, Op::ShtInverse(x, plan.clone()), rg)
    }

    /// Per-degree complex channel mixing.
    ///
    /// `x [C_in, ncoef, 2]`, `w [L+1, C_out, C_in, 2]`;
    /// `y[o, (l,m)] = Σ_i w[l, o, i] · x[i, (l,m)]`, shared over all orders `m`.
    pub fn spectral_mix(&mut self, x: NodeId, w: NodeId, truncation: usize) -> Result<NodeId> {
        let tx = &self.get(x)?.value;
        let tw = &self.get(w)?.value;
        let ncoef = crate::sht::num_coeffs(truncation);
        if !tx.complex || tx.shape.len() != 3 || tx.shape[1] != ncoef {
            return Err(Error::Shape {
                expected: vec![tx.channels(), ncoef, 2],
                got: tx.shape.clone(),
            });
        }
        let c_in = tx.shape[0];
        if tw.shape.len() != 4 || tw.shape[0] != truncation + 1 || tw.shape[2] != c_in || tw.shape[3] != 2 {
            return Err(Error::Shape {
                expected: vec![truncation + 1, tw.shape.get(1).copied().unwrap_or(0), c_in, 2],
                got: tw.shape.clone(),
            });
        }
        let c_out = tw.shape[1];
        let degrees = degree_of_coeff(truncation);
        let mut out = vec![0.0; c_out * ncoef * 2];
        for o in 0..c_out {
            for i in 0..c_in {
                let xi = &tx.data[i * ncoef * 2..(i + 1) * ncoef * 2];
                let yo = &mut out[o * ncoef * 2..(o + 1) * ncoef * 2];
                for (k, &l) in degrees.iter().enumerate() {
                    let widx = ((l * c_out + o) * c_in + i) * 2;
                    let (wr, wi) = (tw.data[widx], tw.data[widx + 1]);
                    let (xr, xim) = (xi[2 * k], xi[2 * k + 1]);
                    yo[2 * k] += wr * xr - wi * xim;
                    yo[2 * k + 1] += wr * xim + wi * xr;
                }
            }
        }
        let value = Tensor {
            shape: vec![c_out, ncoef, 2],
            data: out,
            complex: true,
        };
        let rg = self.needs(&[x, w]);
        self.push(value, Op::SpectralMix { x, w, truncation }, rg)
    }

    /// Slice `len` channels starting at `start` along the leading axis.
    pub fn narrow(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let tx = &self.get(x)?.value;
        if start + len > tx.channels() || len == 0 {
            return Err(Error::OutOfRange(format!(
                "channel slice {start}..{} of {}",
                start + len,
                tx.channels()
            )));
        }
        let inner = tx.inner();
        let mut shape = tx.shape.clone();
        shape[0] = len;
        let value = Tensor {
            shape,
            data: tx.data[start * inner..(start + len) * inner].to_vec(),
            complex: tx.complex,
        };
        let rg = self.needs(&[x]);
        self.push(value, Op::Narrow { x, start }, rg)
    }

    /// `Σ_c w_c · quadrature_mean((pred_c − target_c)²)` over `[C, nlat, nlon]` fields.
    pub fn weighted_l2(
        &mut self,
        pred: NodeId,
        target: Arc<Vec<f64>>,
        channel_weights: Vec<f64>,
        grid: &Arc<GridSpec>,
    ) -> Result<NodeId> {
        let tp = &self.get(pred)?.value;
        check_loss_shapes(tp, &target, &channel_weights, grid.npoints())?;
        let v = weighted_l2_kernel(&tp.data, &target, &channel_weights, grid, None);
        let rg = self.needs(&[pred]);
        self.push(
            Tensor::scalar(v),
            Op::WeightedL2 {
                pred,
                target,
                channel_weights,
                grid: grid.clone(),
            },
            rg,
        )
    }

    /// `Σ_c w_c · mean((pred_c − target_c)²)` without area weighting.
    pub fn plain_l2(&mut self, pred: NodeId, target: Arc<Vec<f64>>, channel_weights: Vec<f64>) -> Result<NodeId> {
        let tp = &self.get(pred)?.value;
        check_loss_shapes(tp, &target, &channel_weights, tp.inner())?;
        let v = plain_l2_kernel(&tp.data, &target, &channel_weights, None);
        let rg = self.needs(&[pred]);
        self.push(
            Tensor::scalar(v),
            Op::PlainL2 {
                pred,
                target,
                channel_weights,
            },
            rg,
        )
    }

    /// Zonal log-amplitude spectrum mismatch (spectral regularizer).
    pub fn spectral_reg(&mut self, pred: NodeId, target: Arc<Vec<f64>>, spectrum: &Arc<ZonalSpectrumLoss>) -> Result<NodeId> {
        let tp = &self.get(pred)?.value;
        if tp.len() != target.len() || tp.inner() != spectrum.npoints() {
            return Err(Error::Shape {
                expected: vec![target.len()],
                got: tp.shape.clone(),
            });
        }
        let v = spectrum.value(&tp.data, &target, tp.channels());
        let rg = self.needs(&[pred]);
        self.push(
            Tensor::scalar(v),
            Op::SpectralReg {
                pred,
                target,
                spectrum: spectrum.clone(),
            },
            rg,
        )
    }
}

fn check_loss_shapes(pred: &Tensor, target: &[f64], weights: &[f64], npts: usize) -> Result<()> {
    if pred.len() != target.len() || pred.inner() != npts || weights.len() != pred.channels() {
        return Err(Error::Shape {
            expected: vec![weights.len(), npts],
            got: pred.shape.clone(),
        });
    }
    Ok(())
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn degree_of_coeff(truncation: usize) -> Vec<usize> {
    crate::sht::coeff_pairs(truncation).into_iter().map(|(l, _)| l).collect()
}

/// Adjoint of the spherical harmonic analysis operator, including quadrature weights.
pub fn sht_adjoint(cotangent: &SpectralCoeffs, grid: &GridSpec) -> Result<Vec<f64>> {
    if cotangent.truncation != grid.truncation {
        return Err(Error::Truncation {
            expected: grid.truncation,
            got: cotangent.truncation,
        });
    }
    let plan = Sht::new(grid);
    let mut out = vec![0.0; grid.npoints()];
    plan.forward_adjoint_raw(&cotangent.to_interleaved(), &mut out);
    Ok(out)
}
