//! Tape-based reverse-mode automatic differentiation over complex arrays.
//!
//! Operations append nodes to an append-only tape; node inputs always
//! reference earlier nodes, so the tape is topologically ordered by
//! construction. The backward pass emits its adjoint computations as
//! ordinary tape nodes, which means a gradient is itself differentiable:
//! taking a gradient of a loss that contains an earlier gradient
//! computation (as the meta-training loop does) needs no special casing.
//!
//! Gradient convention: for a real-valued loss `L` of complex parameters,
//! [`Tape::grad`] returns the conjugate Wirtinger derivative `∂L/∂z*`, so
//! `z ← z − μ·grad` is steepest descent. In terms of the real and
//! imaginary parts, `grad = (∂L/∂x + i·∂L/∂y) / 2`.

use num_complex::Complex64;
use thiserror::Error;

use super::array::ComplexArray;
use super::fft::fft_last_axis;

/// Handle to a node on a [`Tape`]. Ids order by creation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Constant,
    Detach(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Neg(NodeId),
    Conj(NodeId),
    Exp(NodeId),
    Ln(NodeId),
    Sqrt(NodeId),
    AbsSqr(NodeId),
    Abs(NodeId),
    Re(NodeId),
    Im(NodeId),
    SplitRelu(NodeId),
    SplitSigmoid(NodeId),
    SplitTanh(NodeId),
    Scale(NodeId, Complex64),
    AddScalar(NodeId, Complex64),
    MulConst(NodeId, Box<ComplexArray>),
    ClampRe(NodeId, f64, f64),
    Sum(NodeId),
    SumAxis0(NodeId),
    BroadcastScalar(NodeId, Vec<usize>),
    RepeatRows(NodeId, usize),
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    AddRow(NodeId, NodeId),
    Fft(NodeId),
    Ifft(NodeId),
    Concat0(NodeId, NodeId),
    Slice0(NodeId, usize, usize),
    Reshape(NodeId, Vec<usize>),
}

struct Node {
    op: Op,
    value: ComplexArray,
}

/// Errors from the gradient entry points.
#[derive(Debug, Error, PartialEq)]
pub enum GradError {
    #[error("loss must be a scalar node, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("loss must be numerically real, got imaginary part {0}")]
    NotReal(f64),
    #[error("gradient target {0:?} is not a registered leaf")]
    NotLeaf(NodeId),
}

/// Append-only record of a complex-valued computation.
///
/// A tape is single-threaded; run independent tapes on independent threads.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Forward value of a node.
    pub fn value(&self, id: NodeId) -> &ComplexArray {
        &self.nodes[id.idx()].value
    }

    fn eval(&self, op: &Op) -> ComplexArray {
        let v = |id: NodeId| &self.nodes[id.idx()].value;
        match op {
            Op::Leaf | Op::Constant => unreachable!("leaf values are supplied, not evaluated"),
            Op::Detach(a) => v(*a).clone(),
            Op::Add(a, b) => v(*a).add(v(*b)),
            Op::Sub(a, b) => v(*a).sub(v(*b)),
            Op::Mul(a, b) => v(*a).mul(v(*b)),
            Op::Div(a, b) => v(*a).div(v(*b)),
            Op::Neg(a) => v(*a).neg(),
            Op::Conj(a) => v(*a).conj(),
            Op::Exp(a) => v(*a).exp(),
            Op::Ln(a) => v(*a).ln(),
            Op::Sqrt(a) => v(*a).sqrt(),
            Op::AbsSqr(a) => v(*a).abs_sqr(),
            Op::Abs(a) => v(*a).abs(),
            Op::Re(a) => v(*a).re(),
            Op::Im(a) => v(*a).im(),
            Op::SplitRelu(a) => v(*a).split_relu(),
            Op::SplitSigmoid(a) => v(*a).split_sigmoid(),
            Op::SplitTanh(a) => v(*a).split_tanh(),
            Op::Scale(a, c) => v(*a).scale(*c),
            Op::AddScalar(a, c) => v(*a).add_scalar(*c),
            Op::MulConst(a, c) => v(*a).mul(c),
            Op::ClampRe(a, lo, hi) => v(*a).clamp_re(*lo, *hi),
            Op::Sum(a) => v(*a).sum(),
            Op::SumAxis0(a) => v(*a).sum_axis0(),
            Op::BroadcastScalar(a, shape) => v(*a).broadcast_scalar(shape.clone()),
            Op::RepeatRows(a, m) => v(*a).repeat_rows(*m),
            Op::MatMul(a, b) => v(*a).matmul(v(*b)),
            Op::Transpose(a) => v(*a).transpose(),
            Op::AddRow(a, r) => v(*a).add_row(v(*r)),
            Op::Fft(a) => fft_last_axis(v(*a), false),
            Op::Ifft(a) => fft_last_axis(v(*a), true),
            Op::Concat0(a, b) => v(*a).concat0(v(*b)),
            Op::Slice0(a, start, count) => v(*a).slice0(*start, *count),
            Op::Reshape(a, shape) => v(*a).reshaped(shape.clone()),
        }
    }

    fn push(&mut self, op: Op) -> NodeId {
        let value = self.eval(&op);
        self.push_with_value(op, value)
    }

    fn push_with_value(&mut self, op: Op, value: ComplexArray) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node { op, value });
        id
    }

    /// Register a differentiable parameter.
    pub fn leaf(&mut self, value: ComplexArray) -> NodeId {
        self.push_with_value(Op::Leaf, value)
    }

    /// Register a value that never receives gradient.
    pub fn constant(&mut self, value: ComplexArray) -> NodeId {
        self.push_with_value(Op::Constant, value)
    }

    pub fn zeros_const(&mut self, shape: Vec<usize>) -> NodeId {
        self.constant(ComplexArray::zeros(shape))
    }

    pub fn ones_const(&mut self, shape: Vec<usize>) -> NodeId {
        self.constant(ComplexArray::ones(shape))
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        matches!(self.nodes[id.idx()].op, Op::Leaf)
    }

    /// Same value, but gradient does not flow through it.
    pub fn detach(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Detach(a))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Mul(a, b))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Div(a, b))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Neg(a))
    }

    pub fn conj(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Conj(a))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Exp(a))
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Ln(a))
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Sqrt(a))
    }

    /// Elementwise |z|²; result is real-valued.
    pub fn abs_sqr(&mut self, a: NodeId) -> NodeId {
        self.push(Op::AbsSqr(a))
    }

    /// Elementwise |z|; result is real-valued.
    pub fn abs(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Abs(a))
    }

    pub fn re(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Re(a))
    }

    pub fn im(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Im(a))
    }

    pub fn split_relu(&mut self, a: NodeId) -> NodeId {
        self.push(Op::SplitRelu(a))
    }

    pub fn split_sigmoid(&mut self, a: NodeId) -> NodeId {
        self.push(Op::SplitSigmoid(a))
    }

    pub fn split_tanh(&mut self, a: NodeId) -> NodeId {
        self.push(Op::SplitTanh(a))
    }

    pub fn scale(&mut self, a: NodeId, c: Complex64) -> NodeId {
        self.push(Op::Scale(a, c))
    }

    pub fn scale_re(&mut self, a: NodeId, c: f64) -> NodeId {
        self.scale(a, Complex64::new(c, 0.0))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: Complex64) -> NodeId {
        self.push(Op::AddScalar(a, c))
    }

    pub fn mul_const(&mut self, a: NodeId, c: ComplexArray) -> NodeId {
        self.push(Op::MulConst(a, Box::new(c)))
    }

    /// Clamp the real part to `[lo, hi]`; imaginary parts pass through.
    pub fn clamp_re(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        self.push(Op::ClampRe(a, lo, hi))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Sum(a))
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let n = self.value(a).len();
        let s = self.sum(a);
        self.scale_re(s, 1.0 / n as f64)
    }

    /// Column sums of a matrix: [M, N] → [N].
    pub fn sum_axis0(&mut self, a: NodeId) -> NodeId {
        assert_eq!(self.value(a).shape().len(), 2, "sum_axis0 expects a matrix");
        self.push(Op::SumAxis0(a))
    }

    pub fn broadcast_scalar(&mut self, a: NodeId, shape: Vec<usize>) -> NodeId {
        self.push(Op::BroadcastScalar(a, shape))
    }

    pub fn repeat_rows(&mut self, a: NodeId, m: usize) -> NodeId {
        self.push(Op::RepeatRows(a, m))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Transpose(a))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        self.push(Op::AddRow(a, row))
    }

    /// Unnormalized FFT along the trailing axis (power-of-two length).
    pub fn fft(&mut self, a: NodeId) -> NodeId {
        assert!(
            self.value(a).row_len().is_power_of_two(),
            "tape fft requires a power-of-two trailing axis"
        );
        self.push(Op::Fft(a))
    }

    /// Inverse FFT with 1/N scaling along the trailing axis.
    pub fn ifft(&mut self, a: NodeId) -> NodeId {
        assert!(
            self.value(a).row_len().is_power_of_two(),
            "tape ifft requires a power-of-two trailing axis"
        );
        self.push(Op::Ifft(a))
    }

    pub fn concat0(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Op::Concat0(a, b))
    }

    pub fn slice0(&mut self, a: NodeId, start: usize, count: usize) -> NodeId {
        self.push(Op::Slice0(a, start, count))
    }

    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> NodeId {
        self.push(Op::Reshape(a, shape))
    }

    /// Recompute every node from its recorded operation and compare against
    /// the stored forward values. Returns true when the replay is
    /// bit-identical.
    pub fn replay_verify(&self) -> bool {
        for node in &self.nodes {
            match node.op {
                Op::Leaf | Op::Constant => continue,
                _ => {
                    if self.eval(&node.op) != node.value {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn check_loss(&self, loss: NodeId) -> Result<(), GradError> {
        let v = self.value(loss);
        if !v.is_scalar() {
            return Err(GradError::NotScalar(v.shape().to_vec()));
        }
        let z = v.scalar_value();
        if z.im.abs() > 1e-9 * (1.0 + z.re.abs()) {
            return Err(GradError::NotReal(z.im));
        }
        Ok(())
    }

    /// Conjugate-Wirtinger gradients `∂loss/∂param*` for registered leaves.
    pub fn grad(&mut self, loss: NodeId, params: &[NodeId]) -> Result<Vec<ComplexArray>, GradError> {
        let nodes = self.grad_nodes(loss, params)?;
        Ok(nodes.into_iter().map(|n| self.value(n).clone()).collect())
    }

    /// Like [`Tape::grad`], but the gradients are returned as tape nodes and
    /// remain differentiable.
    pub fn grad_nodes(&mut self, loss: NodeId, params: &[NodeId]) -> Result<Vec<NodeId>, GradError> {
        for &p in params {
            if !self.is_leaf(p) {
                return Err(GradError::NotLeaf(p));
            }
        }
        self.check_loss(loss)?;
        Ok(self.backward(loss, params, NodeId(0)))
    }

    /// Gradients with respect to arbitrary nodes, treating them as roots:
    /// nothing below `floor` is visited, so ancestry shared with earlier
    /// steps is left untouched. Used by the online filter loop, where the
    /// per-step loss is differentiated with respect to the step's current
    /// parameters rather than the original leaves.
    pub fn grad_nodes_rooted(
        &mut self,
        loss: NodeId,
        params: &[NodeId],
        floor: NodeId,
    ) -> Result<Vec<NodeId>, GradError> {
        self.check_loss(loss)?;
        for &p in params {
            assert!(p.0 >= floor.0, "gradient root below the traversal floor");
        }
        Ok(self.backward(loss, params, floor))
    }

    /// Reverse sweep in the real-pair convention `G = ∂L/∂x + i·∂L/∂y`,
    /// emitting adjoints as tape nodes. Returns `G/2` per parameter.
    fn backward(&mut self, loss: NodeId, params: &[NodeId], floor: NodeId) -> Vec<NodeId> {
        let mut adjoint: Vec<Option<NodeId>> = vec![None; loss.idx() + 1];
        let seed = self.constant(ComplexArray::real_scalar(1.0));
        adjoint[loss.idx()] = Some(seed);

        let is_param = |id: NodeId| params.contains(&id);

        for i in (floor.idx()..=loss.idx()).rev() {
            let w = match adjoint[i] {
                Some(w) => w,
                None => continue,
            };
            if is_param(NodeId(i as u32)) {
                // Parameters are treated as roots; gradient does not flow
                // through them into shared history.
                continue;
            }
            let op = self.nodes[i].op.clone();
            let out = NodeId(i as u32);
            match op {
                Op::Leaf | Op::Constant | Op::Detach(_) => {}
                Op::Add(a, b) => {
                    self.accumulate(&mut adjoint, a, w, floor);
                    self.accumulate(&mut adjoint, b, w, floor);
                }
                Op::Sub(a, b) => {
                    self.accumulate(&mut adjoint, a, w, floor);
                    let nw = self.neg(w);
                    self.accumulate(&mut adjoint, b, nw, floor);
                }
                Op::Mul(a, b) => {
                    let cb = self.conj(b);
                    let ga = self.mul(w, cb);
                    self.accumulate(&mut adjoint, a, ga, floor);
                    let ca = self.conj(a);
                    let gb = self.mul(w, ca);
                    self.accumulate(&mut adjoint, b, gb, floor);
                }
                Op::Div(a, b) => {
                    let cb = self.conj(b);
                    let ga = self.div(w, cb);
                    self.accumulate(&mut adjoint, a, ga, floor);
                    let q = self.div(out, b);
                    let cq = self.conj(q);
                    let t = self.mul(w, cq);
                    let gb = self.neg(t);
                    self.accumulate(&mut adjoint, b, gb, floor);
                }
                Op::Neg(a) => {
                    let g = self.neg(w);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::Conj(a) => {
                    let g = self.conj(w);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::Exp(a) => {
                    let co = self.conj(out);
                    let g = self.mul(w, co);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::Ln(a) => {
                    let ca = self.conj(a);
                    let g = self.div(w, ca);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::Sqrt(a) => {
                    let two = self.scale_re(out, 2.0);
                    let ct = self.conj(two);
                    let g = self.div(w, ct);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::AbsSqr(a) => {
                    // G_a = 2·Re(w) ⊙ a
                    let rw = self.re(w);
                    let t = self.mul(rw, a);
                    let g = self.scale_re(t, 2.0);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::Abs(a) => {
                    // G_a = Re(w) ⊙ a/|a|, zero where |a| = 0.
                    let mask = self.value(a).map(|z| {
                        Complex64::new(if z.norm_sqr() > 0.0 { 1.0 } else { 0.0 }, 0.0)
                    });
                    let safe = self.clamp_re(out, 1e-300, f64::INFINITY);
                    let dir = self.div(a, safe);
                    let masked = self.mul_const(dir, mask);
                    let rw = self.re(w);
                    let g = self.mul(rw, masked);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::Re(a) => {
                    let g = self.re(w);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::Im(a) => {
                    let rw = self.re(w);
                    let g = self.scale(rw, Complex64::new(0.0, 1.0));
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::SplitRelu(a) => {
                    let (mr, mi) = split_masks(self.value(a), |x| if x > 0.0 { 1.0 } else { 0.0 });
                    let g = self.split_combine(w, mr, mi);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::SplitSigmoid(a) => {
                    // σ' = σ(1−σ), rebuilt from the output node so the
                    // derivative itself stays differentiable.
                    let ones = self.ones_const(self.value(out).shape().to_vec());
                    let or = self.re(out);
                    let oi = self.im(out);
                    let one_minus_r = self.sub(ones, or);
                    let spr = self.mul(or, one_minus_r);
                    let one_minus_i = self.sub(ones, oi);
                    let spi = self.mul(oi, one_minus_i);
                    let g = self.split_combine_nodes(w, spr, spi);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::SplitTanh(a) => {
                    let ones = self.ones_const(self.value(out).shape().to_vec());
                    let or = self.re(out);
                    let oi = self.im(out);
                    let or2 = self.mul(or, or);
                    let spr = self.sub(ones, or2);
                    let oi2 = self.mul(oi, oi);
                    let spi = self.sub(ones, oi2);
                    let g = self.split_combine_nodes(w, spr, spi);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::Scale(a, c) => {
                    let g = self.scale(w, c.conj());
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::AddScalar(a, _) => {
                    self.accumulate(&mut adjoint, a, w, floor);
                }
                Op::MulConst(a, c) => {
                    let g = self.mul_const(w, c.conj());
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::ClampRe(a, lo, hi) => {
                    let mask = self.value(a).map(|z| {
                        Complex64::new(if z.re > lo && z.re < hi { 1.0 } else { 0.0 }, 0.0)
                    });
                    let rw = self.re(w);
                    let gr = self.mul_const(rw, mask);
                    let iw = self.im(w);
                    let gi = self.scale(iw, Complex64::new(0.0, 1.0));
                    let g = self.add(gr, gi);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::Sum(a) => {
                    let shape = self.value(a).shape().to_vec();
                    let g = self.broadcast_scalar(w, shape);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::SumAxis0(a) => {
                    let m = self.value(a).rows();
                    let g = self.repeat_rows(w, m);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::BroadcastScalar(a, _) => {
                    let g = self.sum(w);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::RepeatRows(a, _) => {
                    let g = self.sum_axis0(w);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::MatMul(a, b) => {
                    let cb = self.conj(b);
                    let cbt = self.transpose(cb);
                    let ga = self.matmul(w, cbt);
                    self.accumulate(&mut adjoint, a, ga, floor);
                    let ca = self.conj(a);
                    let cat = self.transpose(ca);
                    let gb = self.matmul(cat, w);
                    self.accumulate(&mut adjoint, b, gb, floor);
                }
                Op::Transpose(a) => {
                    let g = self.transpose(w);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::AddRow(a, r) => {
                    self.accumulate(&mut adjoint, a, w, floor);
                    let g = self.sum_axis0(w);
                    self.accumulate(&mut adjoint, r, g, floor);
                }
                Op::Fft(a) => {
                    let n = self.value(out).row_len() as f64;
                    let iw = self.ifft(w);
                    let g = self.scale_re(iw, n);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::Ifft(a) => {
                    let n = self.value(out).row_len() as f64;
                    let fw = self.fft(w);
                    let g = self.scale_re(fw, 1.0 / n);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::Concat0(a, b) => {
                    let (ra, rb) = (self.count0(a), self.count0(b));
                    let ga = self.slice0(w, 0, ra);
                    self.accumulate(&mut adjoint, a, ga, floor);
                    let gb = self.slice0(w, ra, rb);
                    self.accumulate(&mut adjoint, b, gb, floor);
                }
                Op::Slice0(a, start, count) => {
                    let total = self.count0(a);
                    let mut g = w;
                    if start > 0 {
                        let before = self.zeros_like_slice(a, start);
                        g = self.concat0(before, g);
                    }
                    if start + count < total {
                        let after = self.zeros_like_slice(a, total - start - count);
                        g = self.concat0(g, after);
                    }
                    self.accumulate(&mut adjoint, a, g, floor);
                }
                Op::Reshape(a, _) => {
                    let shape = self.value(a).shape().to_vec();
                    let g = self.reshape(w, shape);
                    self.accumulate(&mut adjoint, a, g, floor);
                }
            }
        }

        params
            .iter()
            .map(|&p| {
                let g = match adjoint[p.idx()] {
                    Some(g) => g,
                    None => self.zeros_const(self.value(p).shape().to_vec()),
                };
                self.scale_re(g, 0.5)
            })
            .collect()
    }

    fn accumulate(
        &mut self,
        adjoint: &mut [Option<NodeId>],
        target: NodeId,
        contrib: NodeId,
        floor: NodeId,
    ) {
        if target.0 < floor.0 {
            return;
        }
        adjoint[target.idx()] = Some(match adjoint[target.idx()] {
            Some(existing) => self.add(existing, contrib),
            None => contrib,
        });
    }

    /// Leading-axis extent: rows of a matrix, length of a vector.
    fn count0(&self, id: NodeId) -> usize {
        let v = self.value(id);
        if v.shape().len() == 1 {
            v.len()
        } else {
            v.rows()
        }
    }

    fn zeros_like_slice(&mut self, a: NodeId, count: usize) -> NodeId {
        let shape = if self.value(a).shape().len() == 1 {
            vec![count]
        } else {
            vec![count, self.value(a).row_len()]
        };
        self.zeros_const(shape)
    }

    fn split_combine(&mut self, w: NodeId, mask_re: ComplexArray, mask_im: ComplexArray) -> NodeId {
        let rw = self.re(w);
        let gr = self.mul_const(rw, mask_re);
        let iw = self.im(w);
        let gi0 = self.mul_const(iw, mask_im);
        let gi = self.scale(gi0, Complex64::new(0.0, 1.0));
        self.add(gr, gi)
    }

    fn split_combine_nodes(&mut self, w: NodeId, deriv_re: NodeId, deriv_im: NodeId) -> NodeId {
        let rw = self.re(w);
        let gr = self.mul(rw, deriv_re);
        let iw = self.im(w);
        let gi0 = self.mul(iw, deriv_im);
        let gi = self.scale(gi0, Complex64::new(0.0, 1.0));
        self.add(gr, gi)
    }
}

fn split_masks(v: &ComplexArray, f: impl Fn(f64) -> f64) -> (ComplexArray, ComplexArray) {
    let re = v.map(|z| Complex64::new(f(z.re), 0.0));
    let im = v.map(|z| Complex64::new(f(z.im), 0.0));
    (re, im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::gradcheck::{check_loss_gradients, max_rel_err};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_array(rng: &mut StdRng, shape: Vec<usize>) -> ComplexArray {
        let count: usize = shape.iter().product();
        let data = (0..count)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        ComplexArray::new(data, shape)
    }

    fn random_positive(rng: &mut StdRng, n: usize) -> ComplexArray {
        ComplexArray::new(
            (0..n)
                .map(|_| Complex64::new(rng.gen_range(0.3..2.0), 0.0))
                .collect(),
            vec![n],
        )
    }

    #[test]
    fn abs_sqr_gradient_is_parameter() {
        // L = |w|² with w = 3+4i → ∂L/∂w* = w.
        let mut tape = Tape::new();
        let w = tape.leaf(ComplexArray::scalar(Complex64::new(3.0, 4.0)));
        let l0 = tape.abs_sqr(w);
        let loss = tape.re(l0);
        let g = tape.grad(loss, &[w]).unwrap();
        assert!((g[0].scalar_value() - Complex64::new(3.0, 4.0)).norm() < 1e-12);
    }

    #[test]
    fn fir_gradient_matches_conjugated_error_form() {
        // L = |ŵᴴu − d|², single tap → gradient u·(ŵᴴu − d)*.
        let mut tape = Tape::new();
        let wv = Complex64::new(0.7, -0.3);
        let uv = Complex64::new(1.2, 0.4);
        let dv = Complex64::new(0.5, 0.1);
        let w = tape.leaf(ComplexArray::scalar(wv));
        let u = tape.constant(ComplexArray::scalar(uv));
        let d = tape.constant(ComplexArray::scalar(dv));
        let cw = tape.conj(w);
        let y = tape.mul(cw, u);
        let e = tape.sub(y, d);
        let l0 = tape.abs_sqr(e);
        let loss = tape.re(l0);
        let g = tape.grad(loss, &[w]).unwrap();
        let expected = uv * (wv.conj() * uv - dv).conj();
        assert!((g[0].scalar_value() - expected).norm() < 1e-12);
    }

    #[test]
    fn grad_rejects_non_scalar_loss() {
        let mut tape = Tape::new();
        let w = tape.leaf(ComplexArray::from_real(&[1.0, 2.0]));
        let y = tape.abs_sqr(w);
        assert!(matches!(tape.grad(y, &[w]), Err(GradError::NotScalar(_))));
    }

    #[test]
    fn grad_rejects_complex_loss() {
        let mut tape = Tape::new();
        let w = tape.leaf(ComplexArray::scalar(Complex64::new(1.0, 0.0)));
        let c = tape.constant(ComplexArray::scalar(Complex64::new(0.0, 1.0)));
        let loss = tape.mul(w, c);
        assert!(matches!(tape.grad(loss, &[w]), Err(GradError::NotReal(_))));
    }

    #[test]
    fn grad_rejects_non_leaf_target() {
        let mut tape = Tape::new();
        let w = tape.leaf(ComplexArray::scalar(Complex64::new(1.0, 0.0)));
        let y = tape.abs_sqr(w);
        let loss = tape.re(y);
        assert!(matches!(tape.grad(loss, &[y]), Err(GradError::NotLeaf(_))));
    }

    #[test]
    fn detach_blocks_one_path() {
        // L = |w|² has two paths into w; detaching one halves the gradient.
        let z = Complex64::new(0.8, -0.6);
        let full = {
            let mut tape = Tape::new();
            let w = tape.leaf(ComplexArray::scalar(z));
            let l0 = tape.abs_sqr(w);
            let loss = tape.re(l0);
            tape.grad(loss, &[w]).unwrap()[0].scalar_value()
        };
        let blocked = {
            let mut tape = Tape::new();
            let w = tape.leaf(ComplexArray::scalar(z));
            let frozen = tape.detach(w);
            let cf = tape.conj(frozen);
            let l0 = tape.mul(w, cf);
            let loss = tape.re(l0);
            tape.grad(loss, &[w]).unwrap()[0].scalar_value()
        };
        assert!((full - z).norm() < 1e-12);
        assert!((blocked - z * 0.5).norm() < 1e-12, "one path blocked halves the gradient");
    }

    #[test]
    fn detach_preserves_constant_values() {
        let mut tape = Tape::new();
        let c = tape.constant(ComplexArray::from_real(&[1.5, -2.5]));
        let d = tape.detach(c);
        assert_eq!(tape.value(d), tape.value(c));
    }

    #[test]
    fn replay_is_bit_identical() {
        let mut rng = StdRng::seed_from_u64(5);
        let mut tape = Tape::new();
        let a = tape.leaf(random_array(&mut rng, vec![2, 4]));
        let b = tape.leaf(random_array(&mut rng, vec![2, 4]));
        let m = tape.mul(a, b);
        let f = tape.fft(m);
        let s = tape.sum_axis0(f);
        let p = tape.abs_sqr(s);
        let l = tape.sum(p);
        let loss = tape.re(l);
        let _ = tape.grad_nodes(loss, &[a, b]).unwrap();
        assert!(tape.replay_verify());
    }

    #[test]
    fn elementwise_ops_match_finite_differences() {
        let mut rng = StdRng::seed_from_u64(23);
        let a0 = random_array(&mut rng, vec![4]);
        let b0 = random_array(&mut rng, vec![4]);

        // Loss mixing add/sub/mul/div/neg/conj/scale paths.
        let err = check_loss_gradients(
            |tape, leaves| {
                let (a, b) = (leaves[0], leaves[1]);
                let s = tape.add(a, b);
                let d = tape.sub(a, b);
                let m = tape.mul(s, d);
                let shifted = tape.add_scalar(b, Complex64::new(2.5, 1.0));
                let q = tape.div(m, shifted);
                let n = tape.neg(q);
                let c = tape.conj(n);
                let sc = tape.scale(c, Complex64::new(0.3, -0.7));
                let p = tape.abs_sqr(sc);
                let t = tape.sum(p);
                tape.re(t)
            },
            &[a0, b0],
            1e-6,
        );
        assert!(err < 1e-6, "rel err {}", err);
    }

    #[test]
    fn analytic_ops_match_finite_differences() {
        let mut rng = StdRng::seed_from_u64(29);
        let a0 = random_array(&mut rng, vec![3]);
        let pos = random_positive(&mut rng, 3);

        let err = check_loss_gradients(
            |tape, leaves| {
                let (a, p) = (leaves[0], leaves[1]);
                let e = tape.exp(a);
                let l = tape.ln(p);
                let r = tape.sqrt(p);
                let m1 = tape.mul(e, l);
                let m2 = tape.mul(m1, r);
                let g = tape.abs_sqr(m2);
                let s = tape.sum(g);
                tape.re(s)
            },
            &[a0, pos],
            1e-6,
        );
        assert!(err < 1e-6, "rel err {}", err);
    }

    #[test]
    fn magnitude_and_projection_ops_match_finite_differences() {
        let mut rng = StdRng::seed_from_u64(31);
        let a0 = random_array(&mut rng, vec![4]);

        let err = check_loss_gradients(
            |tape, leaves| {
                let a = leaves[0];
                let m = tape.abs(a);
                let r = tape.re(a);
                let i = tape.im(a);
                let mixed = tape.mul(r, i);
                let combined = tape.add(m, mixed);
                let p = tape.abs_sqr(combined);
                let s = tape.sum(p);
                tape.re(s)
            },
            &[a0],
            1e-6,
        );
        assert!(err < 1e-6, "rel err {}", err);
    }

    #[test]
    fn split_activations_match_finite_differences() {
        let mut rng = StdRng::seed_from_u64(37);
        // Keep away from the ReLU kink at zero.
        let a0 = ComplexArray::new(
            (0..4)
                .map(|_| {
                    let r: f64 = rng.gen_range(0.2..1.0);
                    let i: f64 = rng.gen_range(0.2..1.0);
                    Complex64::new(r * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }, i)
                })
                .collect(),
            vec![4],
        );

        let err = check_loss_gradients(
            |tape, leaves| {
                let a = leaves[0];
                let r = tape.split_relu(a);
                let s = tape.split_sigmoid(a);
                let t = tape.split_tanh(a);
                let m1 = tape.mul(r, s);
                let m2 = tape.mul(m1, t);
                let p = tape.abs_sqr(m2);
                let total = tape.sum(p);
                tape.re(total)
            },
            &[a0],
            1e-6,
        );
        assert!(err < 1e-6, "rel err {}", err);
    }

    #[test]
    fn linear_algebra_ops_match_finite_differences() {
        let mut rng = StdRng::seed_from_u64(41);
        let a0 = random_array(&mut rng, vec![3, 2]);
        let b0 = random_array(&mut rng, vec![2, 3]);
        let r0 = random_array(&mut rng, vec![3]);

        let err = check_loss_gradients(
            |tape, leaves| {
                let (a, b, r) = (leaves[0], leaves[1], leaves[2]);
                let m = tape.matmul(a, b);
                let mt = tape.transpose(m);
                let mtt = tape.transpose(mt);
                let shifted = tape.add_row(mtt, r);
                let cols = tape.sum_axis0(shifted);
                let p = tape.abs_sqr(cols);
                let s = tape.sum(p);
                tape.re(s)
            },
            &[a0, b0, r0],
            1e-6,
        );
        assert!(err < 1e-6, "rel err {}", err);
    }

    #[test]
    fn fft_ops_match_finite_differences() {
        let mut rng = StdRng::seed_from_u64(43);
        let a0 = random_array(&mut rng, vec![2, 8]);

        let err = check_loss_gradients(
            |tape, leaves| {
                let a = leaves[0];
                let f = tape.fft(a);
                let g = tape.ifft(f);
                let both = tape.add(f, g);
                let p = tape.abs_sqr(both);
                let s = tape.sum(p);
                tape.re(s)
            },
            &[a0],
            1e-6,
        );
        assert!(err < 1e-6, "rel err {}", err);
    }

    #[test]
    fn shape_ops_match_finite_differences() {
        let mut rng = StdRng::seed_from_u64(47);
        let a0 = random_array(&mut rng, vec![6]);
        let s0 = random_array(&mut rng, vec![1]);

        let err = check_loss_gradients(
            |tape, leaves| {
                let (a, s) = (leaves[0], leaves[1]);
                let head = tape.slice0(a, 0, 2);
                let tail = tape.slice0(a, 4, 2);
                let joined = tape.concat0(head, tail);
                let wide = tape.broadcast_scalar(s, vec![4]);
                let mixed = tape.mul(joined, wide);
                let m = tape.reshape(mixed, vec![2, 2]);
                let reps = tape.repeat_rows_helper(m);
                let p = tape.abs_sqr(reps);
                let t = tape.sum(p);
                tape.re(t)
            },
            &[a0, s0],
            1e-6,
        );
        assert!(err < 1e-6, "rel err {}", err);
    }

    impl Tape {
        /// Test helper: collapse a matrix and tile the column sums.
        fn repeat_rows_helper(&mut self, m: NodeId) -> NodeId {
            let cols = self.sum_axis0(m);
            self.repeat_rows(cols, 3)
        }
    }

    #[test]
    fn clamp_gradient_masks_saturated_region() {
        let mut tape = Tape::new();
        let x = tape.leaf(ComplexArray::from_real(&[-2.0, 0.5, 3.0]));
        let c = tape.clamp_re(x, 0.0, 1.0);
        let p = tape.abs_sqr(c);
        let t = tape.sum(p);
        let loss = tape.re(t);
        let g = tape.grad(loss, &[x]).unwrap();
        // Only the interior element carries gradient: d(0.5²)/dx = 1.0,
        // reported as conjugate-Wirtinger 0.5.
        assert_eq!(g[0].data()[0], Complex64::new(0.0, 0.0));
        assert!((g[0].data()[1] - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        assert_eq!(g[0].data()[2], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn second_order_through_recorded_backward() {
        // d/dx of (dL/dx) where L = Re((x·x)·x̄): backward-emitted nodes are
        // themselves differentiable, so a gradient of a gradient component
        // must match finite differences of that component.
        let x0 = ComplexArray::scalar(Complex64::new(0.6, -0.4));

        let build = |tape: &mut Tape, x: NodeId| -> NodeId {
            let sq = tape.mul(x, x);
            let cx = tape.conj(x);
            let m = tape.mul(sq, cx);
            let r = tape.re(m);
            let loss = tape.sum(r);
            let g = tape.grad_nodes(loss, &[x]).unwrap()[0];
            // Scalar functional of the gradient.
            let gr = tape.abs_sqr(g);
            let t = tape.sum(gr);
            tape.re(t)
        };

        let analytic = {
            let mut tape = Tape::new();
            let x = tape.leaf(x0.clone());
            let meta = build(&mut tape, x);
            tape.grad(meta, &[x]).unwrap()[0].clone()
        };

        let numeric = crate::complex::gradcheck::numeric_grad(
            |vals| {
                let mut tape = Tape::new();
                let x = tape.leaf(vals[0].clone());
                let meta = build(&mut tape, x);
                tape.value(meta).scalar_value().re
            },
            &[x0],
            1e-5,
        );
        let err = max_rel_err(&[analytic], &numeric);
        assert!(err < 1e-5, "second-order rel err {}", err);
    }

    #[test]
    fn one_tape_with_detach_matches_fresh_tape_at_boundary() {
        // Two-segment chain: gradient of the second segment's loss with
        // respect to the shared multiplier is identical whether the boundary
        // is a detach on one tape or a restart onto a fresh tape.
        let mut rng = StdRng::seed_from_u64(53);
        let theta0 = random_array(&mut rng, vec![4]);
        let phi0 = random_array(&mut rng, vec![4]);

        let segment = |tape: &mut Tape, theta: NodeId, phi: NodeId| -> (NodeId, NodeId) {
            let y = tape.mul(theta, phi);
            let p = tape.abs_sqr(y);
            let s = tape.sum(p);
            let loss = tape.re(s);
            let next = tape.add(theta, phi);
            (loss, next)
        };

        let single = {
            let mut tape = Tape::new();
            let theta = tape.leaf(theta0.clone());
            let phi = tape.leaf(phi0.clone());
            let (_l1, next) = segment(&mut tape, theta, phi);
            let boundary = tape.detach(next);
            let (l2, _) = segment(&mut tape, boundary, phi);
            tape.grad(l2, &[phi]).unwrap()[0].clone()
        };

        let fresh = {
            let mut tape = Tape::new();
            let theta = tape.leaf(theta0.clone());
            let phi = tape.leaf(phi0.clone());
            let (_l1, next) = segment(&mut tape, theta, phi);
            let carried = tape.value(next).clone();
            let mut tape2 = Tape::new();
            let theta2 = tape2.constant(carried);
            let phi2 = tape2.leaf(phi0.clone());
            let (l2, _) = segment(&mut tape2, theta2, phi2);
            tape2.grad(l2, &[phi2]).unwrap()[0].clone()
        };

        assert_eq!(single, fresh, "detach boundary must equal a tape restart");
    }
}
