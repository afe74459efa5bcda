//! Reverse-mode tape.
//!
//! Every operation appends one node holding its output value and the inputs
//! needed by its backward rule. Nodes are only ever appended, so the node
//! order is a topological order and backward is a single reverse sweep.

use super::kernels::{gelu, gelu_grad, gemm};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Backward rule for an operation implemented outside this module.
pub trait CustomBackward {
    fn name(&self) -> &'static str;

    /// Gradients for each input, in the order the inputs were recorded.
    /// `None` means the input receives no gradient.
    fn backward(&self, grad_out: &Tensor, inputs: &[&Tensor]) -> Result<Vec<Option<Vec<f64>>>>;
}

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    BiasAdd(Var, Var),
    MatMul(Var, Var),
    BatchedMatMul(Var, Var),
    Transpose(Var),
    Reshape(Var),
    Gelu(Var),
    Concat(Vec<Var>),
    TileBatch(Var),
    Sum(Var),
    RelativeL2 {
        pred: Var,
        target: Tensor,
        // per sample: (‖pred − target‖, ‖target‖)
        norms: Vec<(f64, f64)>,
    },
    Custom {
        inputs: Vec<Var>,
        rule: Box<dyn CustomBackward>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Gradients produced by [`Tape::backward`], one per `requires_grad` leaf.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(|g| g.take())
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
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

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    /// Record a leaf. It receives a gradient iff `tensor.requires_grad`.
    pub fn leaf(&mut self, tensor: Tensor) -> Var {
        let needs_grad = tensor.requires_grad;
        self.nodes.push(Node {
            value: tensor,
            op: Op::Leaf,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Record a leaf that never receives a gradient.
    pub fn constant(&mut self, mut tensor: Tensor) -> Var {
        tensor.requires_grad = false;
        self.leaf(tensor)
    }

    fn push(&mut self, name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::shape(op, sa, sb));
        }
        Ok(())
    }

    fn zip(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (va, vb) = (self.value(a), self.value(b));
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(va.shape(), data).expect("shape preserved")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.zip(a, b, |x, y| x + y);
        self.push("add", out, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.zip(a, b, |x, y| x - y);
        self.push("sub", out, Op::Sub(a, b), &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.zip(a, b, |x, y| x * y);
        self.push("mul", out, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.value(a).map(|x| c * x);
        self.push("scale", out, Op::Scale(a, c), &[a])
    }

    /// `x[..., c] + bias[c]`: the one broadcasting operation, over every
    /// axis but the trailing channel axis.
    pub fn bias_add(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (vx, vb) = (self.value(x), self.value(bias));
        if vb.ndim() != 1 || vb.numel() != vx.channels() {
            return Err(Error::shape("bias_add", vx.shape(), vb.shape()));
        }
        let c = vb.numel();
        let mut out = vx.clone();
        out.requires_grad = false;
        for row in out.data_mut().chunks_exact_mut(c) {
            for (o, &b) in row.iter_mut().zip(vb.data()) {
                *o += b;
            }
        }
        self.push("bias_add", out, Op::BiasAdd(x, bias), &[x, bias])
    }

    /// Contract the trailing axis of `a` (`[..., k]`) with a `[k, n]` matrix.
    /// For a 2-D `a` this is the ordinary matrix product.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if vb.ndim() != 2 || va.ndim() < 2 || va.channels() != vb.shape()[0] {
            return Err(Error::shape("matmul", va.shape(), vb.shape()));
        }
        let k = vb.shape()[0];
        let n = vb.shape()[1];
        let rows = va.numel() / k;
        let mut data = vec![0.0; rows * n];
        gemm(
            rows,
            k,
            n,
            va.data(),
            (k, 1),
            vb.data(),
            (n, 1),
            &mut data,
            0.0,
        );
        let mut shape = va.shape().to_vec();
        *shape.last_mut().unwrap() = n;
        let out = Tensor::new(&shape, data)?;
        self.push("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    /// `[B, m, k] × [B, k, n] -> [B, m, n]`.
    pub fn batched_matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let (sa, sb) = (va.shape(), vb.shape());
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] || sa[2] != sb[1] {
            return Err(Error::shape("batched_matmul", sa, sb));
        }
        let (batch, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
        let mut data = vec![0.0; batch * m * n];
        for i in 0..batch {
            gemm(
                m,
                k,
                n,
                &va.data()[i * m * k..(i + 1) * m * k],
                (k, 1),
                &vb.data()[i * k * n..(i + 1) * k * n],
                (n, 1),
                &mut data[i * m * n..(i + 1) * m * n],
                0.0,
            );
        }
        let out = Tensor::new(&[batch, m, n], data)?;
        self.push("batched_matmul", out, Op::BatchedMatMul(a, b), &[a, b])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let va = self.value(a);
        if va.ndim() != 2 {
            return Err(Error::invalid_shape(
                "transpose",
                format!("expected a matrix, got {:?}", va.shape()),
            ));
        }
        let out = transpose2(va);
        self.push("transpose", out, Op::Transpose(a), &[a])
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).clone().reshape(shape)?;
        self.push("reshape", out, Op::Reshape(a), &[a])
    }

    /// Tanh-approximated GeLU, see [`gelu`].
    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(gelu);
        self.push("gelu", out, Op::Gelu(a), &[a])
    }

    /// Concatenate along the trailing channel axis.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::invalid_shape("concat_channels", "no inputs"))?;
        if parts.len() == 1 {
            return Ok(first);
        }
        let lead = {
            let s = self.shape(first);
            s[..s.len() - 1].to_vec()
        };
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.shape(p);
            if s.len() != lead.len() + 1 || s[..s.len() - 1] != lead[..] {
                return Err(Error::shape("concat_channels", self.shape(first), s));
            }
            widths.push(*s.last().unwrap());
        }
        let total: usize = widths.iter().sum();
        let rows: usize = lead.iter().product();
        let mut data = vec![0.0; rows * total];
        let mut offset = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let src = self.value(p).data();
            for r in 0..rows {
                data[r * total + offset..r * total + offset + w]
                    .copy_from_slice(&src[r * w..(r + 1) * w]);
            }
            offset += w;
        }
        let mut shape = lead;
        shape.push(total);
        let out = Tensor::new(&shape, data)?;
        self.push("concat_channels", out, Op::Concat(parts.to_vec()), parts)
    }

    /// Repeat `a` along a new leading axis of size `batch`.
    pub fn tile_batch(&mut self, a: Var, batch: usize) -> Result<Var> {
        let va = self.value(a);
        let mut shape = vec![batch];
        shape.extend_from_slice(va.shape());
        let data = va.data().repeat(batch);
        let out = Tensor::new(&shape, data)?;
        self.push("tile_batch", out, Op::TileBatch(a), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s: f64 = self.value(a).data().iter().sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(a), &[a])
    }

    /// Mean over the leading (batch) axis of `‖pred_i − target_i‖ / ‖target_i‖`.
    pub fn relative_l2(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let vp = self.value(pred);
        if vp.shape() != target.shape() {
            return Err(Error::shape("relative_l2", vp.shape(), target.shape()));
        }
        let batch = vp.shape()[0];
        let per = vp.numel() / batch;
        let mut norms = Vec::with_capacity(batch);
        let mut total = 0.0;
        for i in 0..batch {
            let p = &vp.data()[i * per..(i + 1) * per];
            let t = &target.data()[i * per..(i + 1) * per];
            let tn = t.iter().map(|v| v * v).sum::<f64>().sqrt();
            if tn == 0.0 {
                return Err(Error::DegenerateTarget(i));
            }
            let dn = p
                .iter()
                .zip(t)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            total += dn / tn;
            norms.push((dn, tn));
        }
        let op = Op::RelativeL2 {
            pred,
            target: target.clone(),
            norms,
        };
        self.push(
            "relative_l2",
            Tensor::scalar(total / batch as f64),
            op,
            &[pred],
        )
    }

    /// Record an operation whose forward value was computed by the caller.
    pub fn custom(
        &mut self,
        inputs: &[Var],
        output: Tensor,
        rule: Box<dyn CustomBackward>,
    ) -> Result<Var> {
        let name = rule.name();
        let op = Op::Custom {
            inputs: inputs.to_vec(),
            rule,
        };
        self.push(name, output, op, inputs)
    }

    /// Reverse sweep from a scalar `loss`. The tape can be swept only once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        if self.value(loss).numel() != 1 {
            return Err(Error::NotScalar(self.shape(loss).to_vec()));
        }
        self.consumed = true;

        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = (0..n).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, g, &mut grads)?;
        }

        let grads = self
            .nodes
            .iter()
            .zip(grads)
            .map(|(node, g)| match (&node.op, node.needs_grad, g) {
                (Op::Leaf, true, Some(g)) => {
                    Some(Tensor::new(node.value.shape(), g).expect("gradient shape"))
                }
                (Op::Leaf, true, None) => Some(Tensor::zeros(node.value.shape())),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], var: Var, g: impl FnOnce(&mut [f64])) {
        if !self.nodes[var.0].needs_grad {
            return;
        }
        let slot = grads[var.0].get_or_insert_with(|| vec![0.0; self.nodes[var.0].value.numel()]);
        g(slot);
    }

    fn propagate(&self, idx: usize, g: Vec<f64>, grads: &mut [Option<Vec<f64>>]) -> Result<()> {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |s| axpy(s, 1.0, &g));
                self.accumulate(grads, *b, |s| axpy(s, 1.0, &g));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, |s| axpy(s, 1.0, &g));
                self.accumulate(grads, *b, |s| axpy(s, -1.0, &g));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, |s| {
                    for ((s, &gi), &bi) in s.iter_mut().zip(&g).zip(vb) {
                        *s += gi * bi;
                    }
                });
                self.accumulate(grads, *b, |s| {
                    for ((s, &gi), &ai) in s.iter_mut().zip(&g).zip(va) {
                        *s += gi * ai;
                    }
                });
            }
            Op::Scale(a, c) => self.accumulate(grads, *a, |s| axpy(s, *c, &g)),
            Op::BiasAdd(x, b) => {
                self.accumulate(grads, *x, |s| axpy(s, 1.0, &g));
                let c = self.value(*b).numel();
                self.accumulate(grads, *b, |s| {
                    for row in g.chunks_exact(c) {
                        axpy(s, 1.0, row);
                    }
                });
            }
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (k, n) = (vb.shape()[0], vb.shape()[1]);
                let rows = va.numel() / k;
                // grad_a = g · bᵀ
                self.accumulate(grads, *a, |s| {
                    gemm(rows, n, k, &g, (n, 1), vb.data(), (1, n), s, 1.0)
                });
                // grad_b = aᵀ · g
                self.accumulate(grads, *b, |s| {
                    gemm(k, rows, n, va.data(), (1, k), &g, (n, 1), s, 1.0)
                });
            }
            Op::BatchedMatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (batch, m, k) = (va.shape()[0], va.shape()[1], va.shape()[2]);
                let n = vb.shape()[2];
                self.accumulate(grads, *a, |s| {
                    for i in 0..batch {
                        gemm(
                            m,
                            n,
                            k,
                            &g[i * m * n..(i + 1) * m * n],
                            (n, 1),
                            &vb.data()[i * k * n..(i + 1) * k * n],
                            (1, n),
                            &mut s[i * m * k..(i + 1) * m * k],
                            1.0,
                        );
                    }
                });
                self.accumulate(grads, *b, |s| {
                    for i in 0..batch {
                        gemm(
                            k,
                            m,
                            n,
                            &va.data()[i * m * k..(i + 1) * m * k],
                            (1, k),
                            &g[i * m * n..(i + 1) * m * n],
                            (n, 1),
                            &mut s[i * k * n..(i + 1) * k * n],
                            1.0,
                        );
                    }
                });
            }
            Op::Transpose(a) => {
                let shape = node.value.shape();
                let gt = transpose2(&Tensor::new(shape, g).expect("gradient shape"));
                self.accumulate(grads, *a, |s| axpy(s, 1.0, gt.data()));
            }
            Op::Reshape(a) => self.accumulate(grads, *a, |s| axpy(s, 1.0, &g)),
            Op::Gelu(a) => {
                let va = self.value(*a).data();
                self.accumulate(grads, *a, |s| {
                    for ((s, &gi), &x) in s.iter_mut().zip(&g).zip(va) {
                        *s += gi * gelu_grad(x);
                    }
                });
            }
            Op::Concat(parts) => {
                let total = node.value.channels();
                let rows = node.value.numel() / total;
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).channels();
                    self.accumulate(grads, p, |s| {
                        for r in 0..rows {
                            axpy(
                                &mut s[r * w..(r + 1) * w],
                                1.0,
                                &g[r * total + offset..r * total + offset + w],
                            );
                        }
                    });
                    offset += w;
                }
            }
            Op::TileBatch(a) => {
                let per = self.value(*a).numel();
                self.accumulate(grads, *a, |s| {
                    for chunk in g.chunks_exact(per) {
                        axpy(s, 1.0, chunk);
                    }
                });
            }
            Op::Sum(a) => {
                let g0 = g[0];
                self.accumulate(grads, *a, |s| s.iter_mut().for_each(|v| *v += g0));
            }
            Op::RelativeL2 {
                pred,
                target,
                norms,
            } => {
                let vp = self.value(*pred).data();
                let batch = norms.len();
                let per = vp.len() / batch;
                let g0 = g[0] / batch as f64;
                self.accumulate(grads, *pred, |s| {
                    for (i, &(dn, tn)) in norms.iter().enumerate() {
                        // the ratio is not differentiable at pred == target; use 0
                        if dn == 0.0 {
                            continue;
                        }
                        let coef = g0 / (dn * tn);
                        let range = i * per..(i + 1) * per;
                        for ((s, &p), &t) in s[range.clone()]
                            .iter_mut()
                            .zip(&vp[range.clone()])
                            .zip(&target.data()[range])
                        {
                            *s += coef * (p - t);
                        }
                    }
                });
            }
            Op::Custom { inputs, rule } => {
                let gout = Tensor::new(node.value.shape(), g).expect("gradient shape");
                let values: Vec<&Tensor> = inputs.iter().map(|v| self.value(*v)).collect();
                let input_grads = rule.backward(&gout, &values)?;
                for (&v, gi) in inputs.iter().zip(input_grads) {
                    if let Some(gi) = gi {
                        self.accumulate(grads, v, |s| axpy(s, 1.0, &gi));
                    }
                }
            }
        }
        Ok(())
    }
}

fn axpy(dst: &mut [f64], alpha: f64, src: &[f64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += alpha * s;
    }
}

fn transpose2(t: &Tensor) -> Tensor {
    let (r, c) = (t.shape()[0], t.shape()[1]);
    let src = t.data();
    Tensor::from_fn(&[c, r], |i| src[(i % r) * c + i / r])
}
