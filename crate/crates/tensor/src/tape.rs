//! Reverse-mode gradient tape.
//!
//! Every operation on a [`Var`] appends one node holding its value and the
//! bookkeeping its adjoint needs. [`Tape::backward`] walks the nodes in
//! reverse and returns the accumulated gradients. A tape belongs to one
//! thread; parallel rollouts each build their own.

use std::cell::{Cell, RefCell};
use std::sync::Arc;

use crate::error::TensorError;
use crate::kernels::{self, ConvGeom, MatRef};
use crate::sparse::SparseMap;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceKind {
    Sum,
    Mean,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Relu,
    Exp,
    Log,
    Square,
}

enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Unary(Unary, usize),
    Scale(usize, f64),
    AddScalar(usize),
    MatMul {
        a: usize,
        b: usize,
        m: usize,
        k: usize,
        n: usize,
    },
    Correlate {
        input: usize,
        filters: usize,
        geom: ConvGeom,
    },
    ChannelBias {
        input: usize,
        bias: usize,
    },
    Reduce {
        input: usize,
        kind: ReduceKind,
        outer: usize,
        extent: usize,
        inner: usize,
        argmax: Vec<usize>,
    },
    Softmax(usize),
    LogSoftmax(usize),
    Gather {
        input: usize,
        index: Arc<[usize]>,
    },
    Sparse {
        input: usize,
        map: Arc<SparseMap>,
        lead: usize,
    },
    MaxPool {
        input: usize,
        argmax: Vec<usize>,
    },
    Reshape(usize),
}

struct Node {
    value: Arc<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Records operations for one forward pass and replays them backwards.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    backward_at: Cell<Option<usize>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

/// Gradients produced by one backward pass, indexed by node.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient with respect to `v`, or `None` when `v` does not influence the
    /// loss or was recorded as a constant.
    pub fn get(&self, v: Var<'_>) -> Option<Tensor> {
        self.grads
            .get(v.id)
            .and_then(|g| g.as_ref())
            .map(|g| Tensor::from_parts(self.shapes[v.id].clone(), g.clone()))
    }

    /// Gradient with respect to `v`, zero-filled when absent.
    pub fn wrt(&self, v: Var<'_>) -> Tensor {
        self.get(v)
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.id]))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records a value that gradients are not tracked for.
    pub fn constant(&self, t: Tensor) -> Var<'_> {
        self.leaf(Arc::new(t), false)
    }

    /// Records a trainable leaf; its gradient is reported by `backward`.
    pub fn param(&self, t: Tensor) -> Var<'_> {
        self.leaf(Arc::new(t), true)
    }

    /// Like [`Tape::param`] / [`Tape::constant`] but shares an existing value.
    pub fn leaf_shared(&self, t: Arc<Tensor>, requires_grad: bool) -> Var<'_> {
        self.leaf(t, requires_grad)
    }

    fn leaf(&self, t: Arc<Tensor>, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: t,
            op: Op::Leaf,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn push(
        &self,
        name: &'static str,
        shape: Vec<usize>,
        data: Vec<f64>,
        op: Op,
        requires_grad: bool,
    ) -> Result<Var<'_>, TensorError> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { op: name });
        }
        let value = Tensor::from_parts(shape, data);
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Arc::new(value),
            op,
            requires_grad,
        });
        Ok(Var {
            tape: self,
            id: nodes.len() - 1,
        })
    }

    fn value(&self, id: usize) -> Arc<Tensor> {
        self.nodes.borrow()[id].value.clone()
    }

    fn requires(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Back-propagates from a one-element `loss`.
    ///
    /// A second call without recording anything new in between is rejected.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients, TensorError> {
        let nodes = self.nodes.borrow();
        if self.backward_at.get() == Some(nodes.len()) {
            return Err(TensorError::TapeConsumed);
        }
        if nodes[loss.id].value.numel() != 1 {
            return Err(TensorError::contract(
                "backward",
                format!("loss must hold one element, got shape {:?}", nodes[loss.id].value.shape()),
            ));
        }
        self.backward_at.set(Some(nodes.len()));

        let n = loss.id + 1;
        let mut grads: Vec<Option<Vec<f64>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(vec![1.0]);

        for id in (0..n).rev() {
            let node = &nodes[id];
            if matches!(node.op, Op::Leaf) {
                if !node.requires_grad {
                    grads[id] = None;
                }
                continue;
            }
            // Interior gradients are dropped once propagated.
            let Some(g) = grads[id].take() else { continue };
            if node.requires_grad {
                backprop_node(&nodes, node, &g, &mut grads);
            }
        }
        let shapes = nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], nodes: &[Node], id: usize, f: impl FnOnce(&mut [f64])) {
    if !nodes[id].requires_grad {
        return;
    }
    let slot = grads[id].get_or_insert_with(|| vec![0.0; nodes[id].value.numel()]);
    f(slot);
}

fn backprop_node(nodes: &[Node], node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    match &node.op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            accumulate(grads, nodes, *a, |d| add_into(d, g));
            accumulate(grads, nodes, *b, |d| add_into(d, g));
        }
        Op::Sub(a, b) => {
            accumulate(grads, nodes, *a, |d| add_into(d, g));
            accumulate(grads, nodes, *b, |d| {
                for (x, gi) in d.iter_mut().zip(g) {
                    *x -= gi;
                }
            });
        }
        Op::Mul(a, b) => {
            let (va, vb) = (nodes[*a].value.clone(), nodes[*b].value.clone());
            accumulate(grads, nodes, *a, |d| {
                for ((x, gi), bi) in d.iter_mut().zip(g).zip(vb.data()) {
                    *x += gi * bi;
                }
            });
            accumulate(grads, nodes, *b, |d| {
                for ((x, gi), ai) in d.iter_mut().zip(g).zip(va.data()) {
                    *x += gi * ai;
                }
            });
        }
        Op::Unary(kind, a) => {
            let input = nodes[*a].value.clone();
            let out = node.value.clone();
            accumulate(grads, nodes, *a, |d| {
                let it = d.iter_mut().zip(g).zip(input.data()).zip(out.data());
                for (((x, gi), xi), yi) in it {
                    *x += match kind {
                        Unary::Relu => {
                            if *xi > 0.0 {
                                *gi
                            } else {
                                0.0
                            }
                        }
                        Unary::Exp => gi * yi,
                        Unary::Log => gi / xi,
                        Unary::Square => 2.0 * xi * gi,
                    };
                }
            });
        }
        Op::Scale(a, s) => accumulate(grads, nodes, *a, |d| {
            for (x, gi) in d.iter_mut().zip(g) {
                *x += s * gi;
            }
        }),
        Op::AddScalar(a) => accumulate(grads, nodes, *a, |d| add_into(d, g)),
        Op::MatMul { a, b, m, k, n } => {
            let (va, vb) = (nodes[*a].value.clone(), nodes[*b].value.clone());
            let (m, k, n) = (*m, *k, *n);
            accumulate(grads, nodes, *a, |d| {
                kernels::gemm(MatRef::new(g, m, n), MatRef::new(vb.data(), k, n).t(), 1.0, d);
            });
            accumulate(grads, nodes, *b, |d| {
                kernels::gemm(MatRef::new(va.data(), m, k).t(), MatRef::new(g, m, n), 1.0, d);
            });
        }
        Op::Correlate {
            input,
            filters,
            geom,
        } => {
            let want_in = nodes[*input].requires_grad;
            let want_f = nodes[*filters].requires_grad;
            let (dx, dw) = kernels::correlate2d_backward(
                nodes[*input].value.data(),
                nodes[*filters].value.data(),
                geom,
                g,
                want_in,
                want_f,
            );
            if let Some(dx) = dx {
                accumulate(grads, nodes, *input, |d| add_into(d, &dx));
            }
            if let Some(dw) = dw {
                accumulate(grads, nodes, *filters, |d| add_into(d, &dw));
            }
        }
        Op::ChannelBias { input, bias } => {
            accumulate(grads, nodes, *input, |d| add_into(d, g));
            let channels = nodes[*bias].value.numel();
            let per = g.len() / channels;
            accumulate(grads, nodes, *bias, |d| {
                for (c, x) in d.iter_mut().enumerate() {
                    *x += g[c * per..(c + 1) * per].iter().sum::<f64>();
                }
            });
        }
        Op::Reduce {
            input,
            kind,
            outer,
            extent,
            inner,
            argmax,
        } => {
            let (outer, extent, inner) = (*outer, *extent, *inner);
            accumulate(grads, nodes, *input, |d| match kind {
                ReduceKind::Sum | ReduceKind::Mean => {
                    let s = if *kind == ReduceKind::Mean {
                        1.0 / extent as f64
                    } else {
                        1.0
                    };
                    for o in 0..outer {
                        for e in 0..extent {
                            for i in 0..inner {
                                d[(o * extent + e) * inner + i] += s * g[o * inner + i];
                            }
                        }
                    }
                }
                ReduceKind::Max => {
                    for (gi, &at) in g.iter().zip(argmax) {
                        d[at] += gi;
                    }
                }
            });
        }
        Op::Softmax(a) => {
            let y = node.value.clone();
            let dot: f64 = g.iter().zip(y.data()).map(|(gi, yi)| gi * yi).sum();
            accumulate(grads, nodes, *a, |d| {
                for ((x, gi), yi) in d.iter_mut().zip(g).zip(y.data()) {
                    *x += yi * (gi - dot);
                }
            });
        }
        Op::LogSoftmax(a) => {
            let y = node.value.clone();
            let total: f64 = g.iter().sum();
            accumulate(grads, nodes, *a, |d| {
                for ((x, gi), yi) in d.iter_mut().zip(g).zip(y.data()) {
                    *x += gi - yi.exp() * total;
                }
            });
        }
        Op::Gather { input, index } => accumulate(grads, nodes, *input, |d| {
            for (gi, &src) in g.iter().zip(index.iter()) {
                d[src] += gi;
            }
        }),
        Op::Sparse { input, map, lead } => {
            accumulate(grads, nodes, *input, |d| map.transpose_accumulate(g, *lead, d))
        }
        Op::MaxPool { input, argmax } => accumulate(grads, nodes, *input, |d| {
            for (gi, &at) in g.iter().zip(argmax) {
                d[at] += gi;
            }
        }),
        Op::Reshape(a) => accumulate(grads, nodes, *a, |d| add_into(d, g)),
    }
}

fn add_into(d: &mut [f64], g: &[f64]) {
    for (x, gi) in d.iter_mut().zip(g) {
        *x += gi;
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Arc<Tensor> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn numel(&self) -> usize {
        self.tape.nodes.borrow()[self.id].value.numel()
    }

    fn same_tape(&self, other: &Var<'t>) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "vars from different tapes cannot be combined"
        );
    }

    fn binary(
        self,
        other: Var<'t>,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: fn(usize, usize) -> Op,
    ) -> Result<Var<'t>, TensorError> {
        self.same_tape(&other);
        let (a, b) = (self.value(), other.value());
        if a.shape() != b.shape() {
            return Err(TensorError::ShapeMismatch {
                op: name,
                left: a.shape().to_vec(),
                right: b.shape().to_vec(),
            });
        }
        let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
        let rg = self.tape.requires(self.id) || self.tape.requires(other.id);
        self.tape
            .push(name, a.shape().to_vec(), data, op(self.id, other.id), rg)
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.binary(other, "add", |x, y| x + y, Op::Add)
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.binary(other, "sub", |x, y| x - y, Op::Sub)
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.binary(other, "mul", |x, y| x * y, Op::Mul)
    }

    pub fn unary(self, kind: Unary) -> Result<Var<'t>, TensorError> {
        let a = self.value();
        let (name, f): (&'static str, fn(f64) -> f64) = match kind {
            Unary::Relu => ("relu", |x| x.max(0.0)),
            Unary::Exp => ("exp", f64::exp),
            Unary::Log => ("log", f64::ln),
            Unary::Square => ("square", |x| x * x),
        };
        let data = a.data().iter().map(|&x| f(x)).collect();
        self.tape.push(
            name,
            a.shape().to_vec(),
            data,
            Op::Unary(kind, self.id),
            self.tape.requires(self.id),
        )
    }

    pub fn relu(self) -> Result<Var<'t>, TensorError> {
        self.unary(Unary::Relu)
    }

    pub fn exp(self) -> Result<Var<'t>, TensorError> {
        self.unary(Unary::Exp)
    }

    pub fn log(self) -> Result<Var<'t>, TensorError> {
        self.unary(Unary::Log)
    }

    pub fn square(self) -> Result<Var<'t>, TensorError> {
        self.unary(Unary::Square)
    }

    pub fn scale(self, s: f64) -> Result<Var<'t>, TensorError> {
        let a = self.value();
        let data = a.data().iter().map(|x| x * s).collect();
        self.tape.push(
            "scale",
            a.shape().to_vec(),
            data,
            Op::Scale(self.id, s),
            self.tape.requires(self.id),
        )
    }

    pub fn add_scalar(self, s: f64) -> Result<Var<'t>, TensorError> {
        let a = self.value();
        let data = a.data().iter().map(|x| x + s).collect();
        self.tape.push(
            "add_scalar",
            a.shape().to_vec(),
            data,
            Op::AddScalar(self.id),
            self.tape.requires(self.id),
        )
    }

    pub fn neg(self) -> Result<Var<'t>, TensorError> {
        self.scale(-1.0)
    }

    /// Rank-2 matrix product.
    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.same_tape(&other);
        let (a, b) = (self.value(), other.value());
        if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left: a.shape().to_vec(),
                right: b.shape().to_vec(),
            });
        }
        let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
        let mut out = vec![0.0; m * n];
        kernels::gemm(MatRef::new(a.data(), m, k), MatRef::new(b.data(), k, n), 0.0, &mut out);
        let rg = self.tape.requires(self.id) || self.tape.requires(other.id);
        self.tape.push(
            "matmul",
            vec![m, n],
            out,
            Op::MatMul {
                a: self.id,
                b: other.id,
                m,
                k,
                n,
            },
            rg,
        )
    }

    /// Cross-correlation of a `[C_in, H, W]` input with `[C_out, C_in, k, k]`
    /// filters under zero padding.
    pub fn correlate2d(self, filters: Var<'t>, stride: usize, padding: usize) -> Result<Var<'t>, TensorError> {
        self.same_tape(&filters);
        let (x, w) = (self.value(), filters.value());
        let geom = ConvGeom::new(x.shape(), w.shape(), stride, padding)?;
        let out = kernels::correlate2d_forward(x.data(), w.data(), &geom);
        let rg = self.tape.requires(self.id) || self.tape.requires(filters.id);
        self.tape.push(
            "correlate2d",
            vec![geom.c_out, geom.oh, geom.ow],
            out,
            Op::Correlate {
                input: self.id,
                filters: filters.id,
                geom,
            },
            rg,
        )
    }

    /// Adds `bias[c]` to every element of channel `c` (axis 0).
    pub fn add_channel_bias(self, bias: Var<'t>) -> Result<Var<'t>, TensorError> {
        self.same_tape(&bias);
        let (x, b) = (self.value(), bias.value());
        if b.rank() != 1 || x.rank() == 0 || x.shape()[0] != b.numel() {
            return Err(TensorError::ShapeMismatch {
                op: "add_channel_bias",
                left: x.shape().to_vec(),
                right: b.shape().to_vec(),
            });
        }
        let per = x.numel() / b.numel();
        let data = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v + b.data()[i / per])
            .collect();
        let rg = self.tape.requires(self.id) || self.tape.requires(bias.id);
        self.tape.push(
            "add_channel_bias",
            x.shape().to_vec(),
            data,
            Op::ChannelBias {
                input: self.id,
                bias: bias.id,
            },
            rg,
        )
    }

    /// Reduces over `axis`, or over every element when `axis` is `None`.
    /// Max routes its gradient to the first maximum in row-major order.
    pub fn reduce(self, kind: ReduceKind, axis: Option<usize>) -> Result<Var<'t>, TensorError> {
        let x = self.value();
        let (outer, extent, inner, out_shape) = match axis {
            None => (1, x.numel(), 1, vec![]),
            Some(ax) if ax < x.rank() => {
                let (o, e, i) = kernels::axis_split(x.shape(), ax);
                let mut s = x.shape().to_vec();
                s.remove(ax);
                (o, e, i, s)
            }
            Some(ax) => {
                return Err(TensorError::contract(
                    "reduce",
                    format!("axis {ax} out of range for shape {:?}", x.shape()),
                ))
            }
        };
        let mut out = vec![0.0; outer * inner];
        let mut argmax = Vec::new();
        let d = x.data();
        match kind {
            ReduceKind::Sum | ReduceKind::Mean => {
                for o in 0..outer {
                    for e in 0..extent {
                        for i in 0..inner {
                            out[o * inner + i] += d[(o * extent + e) * inner + i];
                        }
                    }
                }
                if kind == ReduceKind::Mean {
                    for v in &mut out {
                        *v /= extent as f64;
                    }
                }
            }
            ReduceKind::Max => {
                argmax = vec![0; outer * inner];
                for o in 0..outer {
                    for i in 0..inner {
                        let mut best = f64::NEG_INFINITY;
                        let mut at = 0;
                        for e in 0..extent {
                            let off = (o * extent + e) * inner + i;
                            if d[off] > best {
                                best = d[off];
                                at = off;
                            }
                        }
                        out[o * inner + i] = best;
                        argmax[o * inner + i] = at;
                    }
                }
            }
        }
        let name = match kind {
            ReduceKind::Sum => "sum",
            ReduceKind::Mean => "mean",
            ReduceKind::Max => "max",
        };
        self.tape.push(
            name,
            out_shape,
            out,
            Op::Reduce {
                input: self.id,
                kind,
                outer,
                extent,
                inner,
                argmax,
            },
            self.tape.requires(self.id),
        )
    }

    pub fn sum(self) -> Result<Var<'t>, TensorError> {
        self.reduce(ReduceKind::Sum, None)
    }

    pub fn mean(self) -> Result<Var<'t>, TensorError> {
        self.reduce(ReduceKind::Mean, None)
    }

    /// Softmax over all elements, computed with max subtraction.
    pub fn softmax(self) -> Result<Var<'t>, TensorError> {
        let x = self.value();
        let y = kernels::softmax(x.data());
        self.tape.push(
            "softmax",
            x.shape().to_vec(),
            y,
            Op::Softmax(self.id),
            self.tape.requires(self.id),
        )
    }

    pub fn log_softmax(self) -> Result<Var<'t>, TensorError> {
        let x = self.value();
        let y = kernels::log_softmax(x.data());
        self.tape.push(
            "log_softmax",
            x.shape().to_vec(),
            y,
            Op::LogSoftmax(self.id),
            self.tape.requires(self.id),
        )
    }

    /// `out.flat[i] = self.flat[index[i]]`, reshaped to `shape`.
    pub fn gather(self, index: Arc<[usize]>, shape: &[usize]) -> Result<Var<'t>, TensorError> {
        let x = self.value();
        let n: usize = shape.iter().product();
        if n != index.len() || shape.iter().any(|&e| e == 0) {
            return Err(TensorError::contract(
                "gather",
                format!("{} indices for output shape {shape:?}", index.len()),
            ));
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= x.numel()) {
            return Err(TensorError::contract(
                "gather",
                format!("index {bad} out of range for {} elements", x.numel()),
            ));
        }
        let data = index.iter().map(|&i| x.data()[i]).collect();
        self.tape.push(
            "gather",
            shape.to_vec(),
            data,
            Op::Gather {
                input: self.id,
                index,
            },
            self.tape.requires(self.id),
        )
    }

    pub fn sparse_map(self, map: &Arc<SparseMap>) -> Result<Var<'t>, TensorError> {
        let x = self.value();
        let lead = map.lead_of(x.shape())?;
        let out = map.forward_raw(x.data(), lead);
        self.tape.push(
            "sparse_map",
            map.out_full_shape(x.shape()),
            out,
            Op::Sparse {
                input: self.id,
                map: map.clone(),
                lead,
            },
            self.tape.requires(self.id),
        )
    }

    /// Windowed maximum over the trailing two axes, floor semantics.
    pub fn max_pool2d(self, window: usize, stride: usize) -> Result<Var<'t>, TensorError> {
        let x = self.value();
        let r = x.rank();
        if r < 2 || window == 0 || stride == 0 || x.shape()[r - 2] < window || x.shape()[r - 1] < window {
            return Err(TensorError::contract(
                "max_pool2d",
                format!("window {window} stride {stride} on shape {:?}", x.shape()),
            ));
        }
        let (h, w) = (x.shape()[r - 2], x.shape()[r - 1]);
        let lead = x.numel() / (h * w);
        let (out, argmax, oh, ow) = kernels::max_pool2d(x.data(), lead, h, w, window, stride);
        let mut shape = x.shape()[..r - 2].to_vec();
        shape.extend([oh, ow]);
        self.tape.push(
            "max_pool2d",
            shape,
            out,
            Op::MaxPool {
                input: self.id,
                argmax,
            },
            self.tape.requires(self.id),
        )
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>, TensorError> {
        let x = self.value();
        let n: usize = shape.iter().product();
        if n != x.numel() || shape.iter().any(|&e| e == 0) {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                left: x.shape().to_vec(),
                right: shape.to_vec(),
            });
        }
        self.tape.push(
            "reshape",
            shape.to_vec(),
            x.data().to_vec(),
            Op::Reshape(self.id),
            self.tape.requires(self.id),
        )
    }

    pub fn flatten(self) -> Result<Var<'t>, TensorError> {
        let n = self.numel();
        self.reshape(&[n])
    }
}
