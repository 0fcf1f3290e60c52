use super::kernels;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`]. Only meaningful for the tape that issued it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// An operation with a hand-written backward rule.
///
/// Implementations are recorded with [`Tape::custom`]; the tape stores the op
/// next to its inputs and calls `backward` during the reverse sweep.
pub trait CustomOp {
    fn name(&self) -> &'static str;

    fn forward(&self, inputs: &[&Tensor]) -> Tensor;

    /// Returns one gradient per input, `None` where the input gets no gradient.
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>>;
}

#[derive(Clone, Copy, Debug)]
enum Unary {
    Neg,
    Relu,
    Tanh,
    Exp,
    Square,
    Softplus,
}

#[derive(Clone, Copy, Debug)]
enum Binary {
    Add,
    Sub,
    Mul,
    /// Elementwise minimum; ties go to the left operand.
    Min,
}

enum Op {
    Leaf,
    Unary(Var, Unary),
    Binary(Var, Var, Binary),
    Scale(Var, f64),
    AddScalar(Var),
    Clamp(Var, f64, f64),
    MatMulT(Var, Var),
    AddBias(Var, Var),
    Mean(Var),
    SumCols(Var),
    BroadcastRows(Var),
    ConcatCols(Var, Var),
    Custom(Vec<Var>, Box<dyn CustomOp>),
}

struct Node {
    value: Tensor,
    requires_grad: bool,
    op: Op,
}

/// Define-by-run gradient tape.
///
/// Every operation appends a node in execution order. [`Tape::backward`] sweeps
/// the nodes in reverse and returns gradients for the tracked inputs. A tape
/// is not shared between threads; build a fresh one per forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by one reverse sweep, indexed by tracked input.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient with respect to `var`, or `None` if nothing reached it.
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    /// Gradient with respect to `var`, zero-filled when nothing reached it.
    pub fn get_or_zeros(&self, var: Var, len: usize) -> Vec<f64> {
        match self.get(var) {
            Some(g) => g.to_vec(),
            None => vec![0.0; len],
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Runs `program` on a fresh tape and hands back its result with the tape.
    pub fn run<R>(program: impl FnOnce(&mut Tape) -> R) -> (R, Tape) {
        let mut tape = Tape::new();
        let out = program(&mut tape);
        (out, tape)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a tracked input: gradients flow back to it.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, true, Op::Leaf)
    }

    /// Records a constant: no gradient is computed for it.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, false, Op::Leaf)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, value: Tensor, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn map(&mut self, a: Var, kind: Unary) -> Var {
        let x = self.value(a);
        let data: Vec<f64> = x
            .data()
            .iter()
            .map(|&v| match kind {
                Unary::Neg => -v,
                Unary::Relu => v.max(0.0),
                Unary::Tanh => v.tanh(),
                Unary::Exp => v.exp(),
                Unary::Square => v * v,
                Unary::Softplus => v.max(0.0) + (-v.abs()).exp().ln_1p(),
            })
            .collect();
        let value = Tensor::from_parts(x.shape().to_vec(), data);
        let rg = self.rg(&[a]);
        self.push(value, rg, Op::Unary(a, kind))
    }

    fn zip(&mut self, a: Var, b: Var, kind: Binary) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.shape(), y.shape(), "{kind:?}: shape mismatch");
        let data: Vec<f64> = x
            .data()
            .iter()
            .zip(y.data())
            .map(|(&p, &q)| match kind {
                Binary::Add => p + q,
                Binary::Sub => p - q,
                Binary::Mul => p * q,
                Binary::Min => {
                    if p <= q {
                        p
                    } else {
                        q
                    }
                }
            })
            .collect();
        let value = Tensor::from_parts(x.shape().to_vec(), data);
        let rg = self.rg(&[a, b]);
        self.push(value, rg, Op::Binary(a, b, kind))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.map(a, Unary::Neg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, Unary::Relu)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, Unary::Tanh)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.map(a, Unary::Exp)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.map(a, Unary::Square)
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&mut self, a: Var) -> Var {
        self.map(a, Unary::Softplus)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, Binary::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, Binary::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, Binary::Mul)
    }

    pub fn min(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, Binary::Min)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let x = self.value(a);
        let value =
            Tensor::from_parts(x.shape().to_vec(), x.data().iter().map(|v| v * k).collect());
        let rg = self.rg(&[a]);
        self.push(value, rg, Op::Scale(a, k))
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let x = self.value(a);
        let value =
            Tensor::from_parts(x.shape().to_vec(), x.data().iter().map(|v| v + k).collect());
        let rg = self.rg(&[a]);
        self.push(value, rg, Op::AddScalar(a))
    }

    /// Clamps into `[lo, hi]`; the gradient passes only where the input lies inside.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let x = self.value(a);
        let value = Tensor::from_parts(
            x.shape().to_vec(),
            x.data().iter().map(|v| v.clamp(lo, hi)).collect(),
        );
        let rg = self.rg(&[a]);
        self.push(value, rg, Op::Clamp(a, lo, hi))
    }

    /// `x · wᵀ` for `x: [rows × inner]` and `w: [outs × inner]`.
    pub fn matmul_wt(&mut self, x: Var, w: Var) -> Var {
        let (xv, wv) = (self.value(x), self.value(w));
        let (rows, inner) = (xv.rows(), xv.cols());
        assert_eq!(wv.cols(), inner, "matmul_wt: inner dimension mismatch");
        let outs = wv.rows();
        let mut out = vec![0.0; rows * outs];
        kernels::matmul_wt(xv.data(), wv.data(), rows, inner, outs, &mut out, false);
        let value = Tensor::from_parts(vec![rows, outs], out);
        let rg = self.rg(&[x, w]);
        self.push(value, rg, Op::MatMulT(x, w))
    }

    /// Adds a row vector `b: [cols]` to every row of `x: [rows × cols]`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Var {
        let (xv, bv) = (self.value(x), self.value(b));
        let cols = xv.cols();
        assert_eq!(bv.len(), cols, "add_bias: width mismatch");
        let mut data = xv.data().to_vec();
        for row in data.chunks_mut(cols) {
            for (v, bias) in row.iter_mut().zip(bv.data()) {
                *v += bias;
            }
        }
        let value = Tensor::from_parts(xv.shape().to_vec(), data);
        let rg = self.rg(&[x, b]);
        self.push(value, rg, Op::AddBias(x, b))
    }

    /// `x · wᵀ + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let y = self.matmul_wt(x, w);
        self.add_bias(y, b)
    }

    /// Mean over all elements, as a scalar.
    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let m = x.data().iter().sum::<f64>() / x.len() as f64;
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(m), rg, Op::Mean(a))
    }

    /// Row sums: `[rows × cols] -> [rows × 1]`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let cols = x.cols();
        let data: Vec<f64> = x.data().chunks(cols).map(|r| r.iter().sum()).collect();
        let value = Tensor::from_parts(vec![x.rows(), 1], data);
        let rg = self.rg(&[a]);
        self.push(value, rg, Op::SumCols(a))
    }

    /// Repeats a vector `[cols]` as `rows` rows.
    pub fn broadcast_rows(&mut self, a: Var, rows: usize) -> Var {
        let x = self.value(a);
        let cols = x.len();
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend_from_slice(x.data());
        }
        let value = Tensor::from_parts(vec![rows, cols], data);
        let rg = self.rg(&[a]);
        self.push(value, rg, Op::BroadcastRows(a))
    }

    /// Side-by-side concatenation of two matrices with equal row counts.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.rows(), y.rows(), "concat_cols: row mismatch");
        let (rows, ca, cb) = (x.rows(), x.cols(), y.cols());
        let mut data = Vec::with_capacity(rows * (ca + cb));
        for r in 0..rows {
            data.extend_from_slice(x.row(r));
            data.extend_from_slice(y.row(r));
        }
        let value = Tensor::from_parts(vec![rows, ca + cb], data);
        let rg = self.rg(&[a, b]);
        self.push(value, rg, Op::ConcatCols(a, b))
    }

    /// Records an operation with a hand-written backward rule.
    pub fn custom(&mut self, op: Box<dyn CustomOp>, inputs: &[Var]) -> Var {
        let value = {
            let refs: Vec<&Tensor> = inputs.iter().map(|v| self.value(*v)).collect();
            op.forward(&refs)
        };
        let rg = self.rg(inputs);
        self.push(value, rg, Op::Custom(inputs.to_vec(), op))
    }

    /// Reverse sweep from a scalar `output`.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let root = &self.nodes[output.0];
        if root.value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward seed must be a scalar, got shape {:?}",
                root.value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(vec![1.0]);

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }

        // Keep only tracked inputs.
        for (node, g) in self.nodes.iter().zip(grads.iter_mut()) {
            if !(node.requires_grad && matches!(node.op, Op::Leaf)) {
                *g = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], var: Var, contrib: Vec<f64>) {
        if !self.nodes[var.0].requires_grad {
            return;
        }
        match &mut grads[var.0] {
            Some(existing) => {
                for (e, c) in existing.iter_mut().zip(contrib) {
                    *e += c;
                }
            }
            slot @ None => *slot = Some(contrib),
        }
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::Unary(a, kind) => {
                let x = val(*a).data();
                let y = node.value.data();
                let d: Vec<f64> = g
                    .iter()
                    .zip(x.iter().zip(y))
                    .map(|(&g, (&x, &y))| match kind {
                        Unary::Neg => -g,
                        Unary::Relu => {
                            if x > 0.0 {
                                g
                            } else {
                                0.0
                            }
                        }
                        Unary::Tanh => g * (1.0 - y * y),
                        Unary::Exp => g * y,
                        Unary::Square => g * 2.0 * x,
                        Unary::Softplus => g / (1.0 + (-x).exp()),
                    })
                    .collect();
                self.accumulate(grads, *a, d);
            }
            Op::Binary(a, b, kind) => {
                let (x, y) = (val(*a).data(), val(*b).data());
                match kind {
                    Binary::Add => {
                        self.accumulate(grads, *a, g.to_vec());
                        self.accumulate(grads, *b, g.to_vec());
                    }
                    Binary::Sub => {
                        self.accumulate(grads, *a, g.to_vec());
                        self.accumulate(grads, *b, g.iter().map(|v| -v).collect());
                    }
                    Binary::Mul => {
                        self.accumulate(grads, *a, g.iter().zip(y).map(|(g, y)| g * y).collect());
                        self.accumulate(grads, *b, g.iter().zip(x).map(|(g, x)| g * x).collect());
                    }
                    Binary::Min => {
                        let left: Vec<bool> = x.iter().zip(y).map(|(p, q)| p <= q).collect();
                        let ga = g
                            .iter()
                            .zip(&left)
                            .map(|(&g, &l)| if l { g } else { 0.0 })
                            .collect();
                        let gb = g
                            .iter()
                            .zip(&left)
                            .map(|(&g, &l)| if l { 0.0 } else { g })
                            .collect();
                        self.accumulate(grads, *a, ga);
                        self.accumulate(grads, *b, gb);
                    }
                }
            }
            Op::Scale(a, k) => self.accumulate(grads, *a, g.iter().map(|v| v * k).collect()),
            Op::AddScalar(a) => self.accumulate(grads, *a, g.to_vec()),
            Op::Clamp(a, lo, hi) => {
                let x = val(*a).data();
                let d = g
                    .iter()
                    .zip(x)
                    .map(|(&g, &x)| if x >= *lo && x <= *hi { g } else { 0.0 })
                    .collect();
                self.accumulate(grads, *a, d);
            }
            Op::MatMulT(x, w) => {
                let (xv, wv) = (val(*x), val(*w));
                let (rows, inner, outs) = (xv.rows(), xv.cols(), wv.rows());
                if self.nodes[x.0].requires_grad {
                    let mut dx = vec![0.0; rows * inner];
                    kernels::matmul_acc(g, wv.data(), rows, outs, inner, &mut dx);
                    self.accumulate(grads, *x, dx);
                }
                if self.nodes[w.0].requires_grad {
                    let mut dw = vec![0.0; outs * inner];
                    kernels::matmul_tn_acc(g, xv.data(), rows, outs, inner, &mut dw);
                    self.accumulate(grads, *w, dw);
                }
            }
            Op::AddBias(x, b) => {
                let cols = val(*b).len();
                self.accumulate(grads, *x, g.to_vec());
                if self.nodes[b.0].requires_grad {
                    self.accumulate(grads, *b, column_sums(g, cols));
                }
            }
            Op::Mean(a) => {
                let n = val(*a).len();
                self.accumulate(grads, *a, vec![g[0] / n as f64; n]);
            }
            Op::SumCols(a) => {
                let cols = val(*a).cols();
                let d = g
                    .iter()
                    .flat_map(|&v| std::iter::repeat_n(v, cols))
                    .collect();
                self.accumulate(grads, *a, d);
            }
            Op::BroadcastRows(a) => {
                let cols = val(*a).len();
                self.accumulate(grads, *a, column_sums(g, cols));
            }
            Op::ConcatCols(a, b) => {
                let (ca, cb) = (val(*a).cols(), val(*b).cols());
                let mut ga = Vec::with_capacity(g.len() / (ca + cb) * ca);
                let mut gb = Vec::with_capacity(g.len() / (ca + cb) * cb);
                for row in g.chunks(ca + cb) {
                    ga.extend_from_slice(&row[..ca]);
                    gb.extend_from_slice(&row[ca..]);
                }
                self.accumulate(grads, *a, ga);
                self.accumulate(grads, *b, gb);
            }
            Op::Custom(inputs, op) => {
                let refs: Vec<&Tensor> = inputs.iter().map(|v| val(*v)).collect();
                let parts = op.backward(&refs, &node.value, g);
                debug_assert_eq!(parts.len(), inputs.len(), "{}: gradient arity", op.name());
                for (var, part) in inputs.iter().zip(parts) {
                    if let Some(part) = part {
                        self.accumulate(grads, *var, part);
                    }
                }
            }
        }
    }
}

fn column_sums(g: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for row in g.chunks(cols) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}
