//! Minimal dense neural-network machinery: a flat parameter store with
//! named tensor views, a deterministic (optionally row-parallel) GEMM, and
//! the layers the policy network needs (channels-last convolution, layer
//! normalization, linear). Gradients are computed by hand-written backward
//! passes and validated against finite differences in the test suite.

pub mod adam;
pub mod layers;

use ndarray::{Array2, ArrayView2, ArrayViewMut2, s};

use crate::error::{Error, Result};

/// Shape and location of one named tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Handle to a registered tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorId(usize);

/// All parameters and their gradients in two flat vectors; layers hold
/// `TensorId`s and borrow 2D views. The flat layout makes the optimizer,
/// gradient clipping, checkpointing and finite-difference checks trivial.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    pub data: Vec<f64>,
    pub grad: Vec<f64>,
    pub specs: Vec<TensorSpec>,
}

impl ParamStore {
    pub fn register(&mut self, name: &str, shape: &[usize]) -> TensorId {
        let offset = self.data.len();
        let len: usize = shape.iter().product();
        self.data.resize(offset + len, 0.0);
        self.grad.resize(offset + len, 0.0);
        self.specs.push(TensorSpec {
            name: name.to_string(),
            shape: shape.to_vec(),
            offset,
        });
        TensorId(self.specs.len() - 1)
    }

    pub fn spec(&self, id: TensorId) -> &TensorSpec {
        &self.specs[id.0]
    }

    pub fn slice(&self, id: TensorId) -> &[f64] {
        let s = &self.specs[id.0];
        &self.data[s.offset..s.offset + s.len()]
    }

    pub fn slice_mut(&mut self, id: TensorId) -> &mut [f64] {
        let s = self.specs[id.0].clone();
        &mut self.data[s.offset..s.offset + s.len()]
    }

    pub fn grad_slice_mut(&mut self, id: TensorId) -> &mut [f64] {
        let s = self.specs[id.0].clone();
        &mut self.grad[s.offset..s.offset + s.len()]
    }

    /// 2D view of a tensor with a 2D shape.
    pub fn view2(&self, id: TensorId) -> ArrayView2<'_, f64> {
        let s = &self.specs[id.0];
        debug_assert_eq!(s.shape.len(), 2);
        ArrayView2::from_shape((s.shape[0], s.shape[1]), self.slice(id)).unwrap()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn grad_norm(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale_grad(&mut self, factor: f64) {
        for g in &mut self.grad {
            *g *= factor;
        }
    }

    pub fn n_params(&self) -> usize {
        self.data.len()
    }
}

/// C = A . B with fixed row-chunk parallelism. Chunk boundaries are a
/// compile-time constant, so the partitioning (and each output element's
/// accumulation order) does not depend on the thread count.
pub fn matmul(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    #[cfg(feature = "parallel")]
    {
        use crate::par::GEMM_ROW_CHUNK;
        use rayon::prelude::*;
        let (m, _) = a.dim();
        let n = b.dim().1;
        if m > GEMM_ROW_CHUNK {
            let mut out = Array2::<f64>::zeros((m, n));
            out.as_slice_mut()
                .expect("freshly allocated output is contiguous")
                .par_chunks_mut(GEMM_ROW_CHUNK * n)
                .enumerate()
                .for_each(|(i, chunk)| {
                    let r0 = i * GEMM_ROW_CHUNK;
                    let r1 = (r0 + GEMM_ROW_CHUNK).min(m);
                    let block = a.slice(s![r0..r1, ..]).dot(&b);
                    chunk.copy_from_slice(block.as_slice().unwrap());
                });
            return out;
        }
    }
    a.dot(&b)
}

/// Adds `a^T . b` into an existing gradient view.
pub fn matmul_at_b_accum(
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    mut out: ArrayViewMut2<'_, f64>,
) {
    let product = matmul(a.t(), b);
    out += &product;
}

/// One-hot encodes integer state tensors (values -1..=max_code+2) into a
/// channels-last matrix of shape (batch * cells, channels).
pub fn one_hot_batch(states: &[&[i32]], cells: usize, channels: usize) -> Result<Array2<f64>> {
    let batch = states.len();
    let mut out = Array2::<f64>::zeros((batch * cells, channels));
    for (b, state) in states.iter().enumerate() {
        if state.len() != cells {
            return Err(Error::ShapeMismatch(format!(
                "state {b} has {} cells, expected {cells}",
                state.len()
            )));
        }
        for (p, &v) in state.iter().enumerate() {
            let ch = v + 1;
            if ch < 0 || ch as usize >= channels {
                return Err(Error::ShapeMismatch(format!(
                    "cell value {v} outside the {channels}-channel code table"
                )));
            }
            out[(b * cells + p, ch as usize)] = 1.0;
        }
    }
    Ok(out)
}
