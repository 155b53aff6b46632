//! Plain-tensor entry points for the tape primitives, for callers that do not
//! need gradients. Each call records on a throwaway tape.

use crate::error::TensorError;
use crate::tape::{ReduceKind, Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseKind {
    Add,
    Sub,
    Mul,
    Relu,
    Exp,
    Log,
    Square,
}

impl ElementwiseKind {
    pub fn is_binary(self) -> bool {
        matches!(self, Self::Add | Self::Sub | Self::Mul)
    }

    pub fn apply<'t>(self, a: Var<'t>, b: Option<Var<'t>>) -> Result<Var<'t>, TensorError> {
        let need = |b: Option<Var<'t>>| {
            b.ok_or_else(|| TensorError::contract("elementwise", format!("{self:?} needs two operands")))
        };
        match self {
            Self::Add => a.add(need(b)?),
            Self::Sub => a.sub(need(b)?),
            Self::Mul => a.mul(need(b)?),
            Self::Relu => a.relu(),
            Self::Exp => a.exp(),
            Self::Log => a.log(),
            Self::Square => a.square(),
        }
    }
}

fn run(f: impl for<'t> FnOnce(&'t Tape) -> Result<Var<'t>, TensorError>) -> Result<Tensor, TensorError> {
    let tape = Tape::new();
    let out = f(&tape)?;
    let v = out.value();
    Ok((*v).clone())
}

pub fn elementwise(kind: ElementwiseKind, a: &Tensor, b: Option<&Tensor>) -> Result<Tensor, TensorError> {
    run(|t| {
        let av = t.constant(a.clone());
        let bv = b.map(|b| t.constant(b.clone()));
        kind.apply(av, bv)
    })
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    run(|t| t.constant(a.clone()).matmul(t.constant(b.clone())))
}

pub fn correlate2d(input: &Tensor, filters: &Tensor, stride: usize, padding: usize) -> Result<Tensor, TensorError> {
    run(|t| t.constant(input.clone()).correlate2d(t.constant(filters.clone()), stride, padding))
}

pub fn reduce(kind: ReduceKind, input: &Tensor, axis: Option<usize>) -> Result<Tensor, TensorError> {
    run(|t| t.constant(input.clone()).reduce(kind, axis))
}

pub fn softmax_flat(input: &Tensor) -> Result<Tensor, TensorError> {
    run(|t| t.constant(input.clone()).softmax())
}
