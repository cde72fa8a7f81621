//! Reverse-mode automatic differentiation over dense tensors.
//!
//! The engine is a flat tape: every operation appends a node holding the
//! forward value and enough information to propagate gradients back to its
//! parents. Graphs are rebuilt per evaluation (define-by-run), which keeps
//! the trainer's two-phase optimization honest: a phase inserts only the
//! parameters it is allowed to update as trainable leaves, so gradients
//! cannot reach anything else by construction.
//!
//! All operations are sequential and allocation-deterministic: the same
//! inputs produce bit-identical outputs in the same floating environment.

mod conv;
mod ops;
mod scalar;

pub use scalar::Scalar;

use ndarray::{ArrayD, IxDyn};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Var(pub(crate) usize);

pub(crate) enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Abs(usize),
    Square(usize),
    Sqrt(usize),
    Relu(usize),
    LeakyRelu(usize, f64),
    Softplus(usize),
    Sigmoid(usize),
    Scale(usize, f64),
    AddScalar(usize),
    Reshape(usize),
    MatMul(usize, usize),
    AddRowBias { x: usize, bias: usize },
    AddChannelBias { x: usize, bias: usize },
    Conv2d { x: usize, w: usize, stride: usize, pad: usize },
    NearestUp2(usize),
    ConcatChannels(Vec<usize>),
    ConcatFeatures(Vec<usize>),
    Flatten(usize),
    BatchNormChannels { x: usize, gamma: usize, beta: usize, eps: f64 },
    BatchNormFeatures { x: usize, gamma: usize, beta: usize, eps: f64 },
    SumAll(usize),
    MeanAll(usize),
    SumRows(usize),
    CrossEntropyMean { scores: usize, classes: Vec<usize> },
}

pub(crate) struct Node<F: Scalar> {
    pub value: ArrayD<F>,
    pub op: Op,
    pub needs_grad: bool,
}

/// Gradients of one scalar output with respect to the tape's leaves.
///
/// Only leaf nodes retain their gradient; intermediate gradients are freed
/// as soon as they have been consumed.
pub struct Gradients<F: Scalar> {
    grads: Vec<Option<ArrayD<F>>>,
}

impl<F: Scalar> Gradients<F> {
    /// Gradient for `var`, if `var` is a trainable leaf reached by backprop.
    pub fn get(&self, var: Var) -> Option<&ArrayD<F>> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }
}

/// A define-by-run computation tape.
pub struct Tape<F: Scalar> {
    nodes: Vec<Node<F>>,
}

impl<F: Scalar> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    /// Number of nodes currently on the tape.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: ArrayD<F>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, id: usize) -> bool {
        self.nodes[id].needs_grad
    }

    /// Insert a trainable leaf: gradients will be collected for it.
    pub fn leaf(&mut self, value: ArrayD<F>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Insert a constant leaf: no gradient flows into it.
    pub fn constant(&mut self, value: ArrayD<F>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Forward value of a node.
    pub fn value(&self, var: Var) -> &ArrayD<F> {
        &self.nodes[var.0].value
    }

    /// Forward value of a single-element node as a scalar.
    pub fn scalar(&self, var: Var) -> F {
        let v = &self.nodes[var.0].value;
        debug_assert_eq!(v.len(), 1, "scalar() on non-scalar node");
        *v.iter().next().expect("empty node value")
    }

    /// Backpropagate from a single-element node, returning leaf gradients.
    pub fn backward(&self, loss: Var) -> Gradients<F> {
        assert_eq!(
            self.nodes[loss.0].value.len(),
            1,
            "backward requires a scalar node"
        );
        let mut grads: Vec<Option<ArrayD<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(ArrayD::ones(self.nodes[loss.0].value.raw_dim()));
        for id in (0..=loss.0).rev() {
            if !self.nodes[id].needs_grad {
                grads[id] = None;
                continue;
            }
            let Some(gout) = grads[id].take() else {
                continue;
            };
            self.dispatch_backward(id, &gout, &mut grads);
            if matches!(self.nodes[id].op, Op::Leaf) {
                grads[id] = Some(gout);
            }
        }
        Gradients { grads }
    }
}

pub(crate) fn accumulate<F: Scalar>(
    grads: &mut [Option<ArrayD<F>>],
    id: usize,
    contribution: ArrayD<F>,
) {
    match &mut grads[id] {
        Some(g) => *g += &contribution,
        slot @ None => *slot = Some(contribution),
    }
}

/// Shape helper: total element count of a dyn shape.
pub(crate) fn numel(shape: &IxDyn) -> usize {
    ndarray::Dimension::size(shape)
}
