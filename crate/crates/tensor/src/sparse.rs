use crate::error::TensorError;
use crate::tensor::Tensor;

/// A fixed sparse linear operator acting on the trailing block of a tensor.
///
/// For an input of shape `[lead.., in_shape..]` the output has shape
/// `[lead.., out_shape..]` and every leading slice is mapped independently:
/// `out[l, o] = sum_i w[o, i] * x[l, i]`. Resampling grids, blur kernels
/// and area averages are all expressed this way so they share one
/// differentiable primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMap {
    in_shape: Vec<usize>,
    out_shape: Vec<usize>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
}

impl SparseMap {
    /// `rows[o]` lists `(input offset, weight)` pairs for output offset `o`.
    pub fn from_rows(
        in_shape: &[usize],
        out_shape: &[usize],
        rows: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self, TensorError> {
        let in_len: usize = in_shape.iter().product();
        let out_len: usize = out_shape.iter().product();
        if rows.len() != out_len {
            return Err(TensorError::contract(
                "SparseMap::from_rows",
                format!("{} rows for output shape {out_shape:?}", rows.len()),
            ));
        }
        let mut row_ptr = Vec::with_capacity(out_len + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (i, wt) in row {
                if i >= in_len || !wt.is_finite() {
                    return Err(TensorError::contract(
                        "SparseMap::from_rows",
                        format!("entry ({i}, {wt}) invalid for input length {in_len}"),
                    ));
                }
                cols.push(i);
                weights.push(wt);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self {
            in_shape: in_shape.to_vec(),
            out_shape: out_shape.to_vec(),
            row_ptr,
            cols,
            weights,
        })
    }

    pub fn in_shape(&self) -> &[usize] {
        &self.in_shape
    }

    pub fn out_shape(&self) -> &[usize] {
        &self.out_shape
    }

    pub fn in_len(&self) -> usize {
        self.in_shape.iter().product()
    }

    pub fn out_len(&self) -> usize {
        self.out_shape.iter().product()
    }

    /// Entries of output row `o` as `(input offset, weight)`.
    pub fn row(&self, o: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[o]..self.row_ptr[o + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.weights[span].iter().copied())
    }

    /// Number of leading slices in `shape`, or an error when the trailing
    /// extents do not match `in_shape`.
    pub(crate) fn lead_of(&self, shape: &[usize]) -> Result<usize, TensorError> {
        let t = self.in_shape.len();
        if shape.len() < t || shape[shape.len() - t..] != self.in_shape[..] {
            return Err(TensorError::ShapeMismatch {
                op: "sparse_map",
                left: shape.to_vec(),
                right: self.in_shape.clone(),
            });
        }
        Ok(shape[..shape.len() - t].iter().product())
    }

    pub(crate) fn out_full_shape(&self, shape: &[usize]) -> Vec<usize> {
        let t = self.in_shape.len();
        let mut out = shape[..shape.len() - t].to_vec();
        out.extend_from_slice(&self.out_shape);
        out
    }

    pub(crate) fn forward_raw(&self, x: &[f64], lead: usize) -> Vec<f64> {
        let (n_in, n_out) = (self.in_len(), self.out_len());
        let mut out = vec![0.0; lead * n_out];
        for l in 0..lead {
            let src = &x[l * n_in..(l + 1) * n_in];
            let dst = &mut out[l * n_out..(l + 1) * n_out];
            for (o, d) in dst.iter_mut().enumerate() {
                let mut acc = 0.0;
                for j in self.row_ptr[o]..self.row_ptr[o + 1] {
                    acc += self.weights[j] * src[self.cols[j]];
                }
                *d = acc;
            }
        }
        out
    }

    pub(crate) fn transpose_accumulate(&self, g: &[f64], lead: usize, dx: &mut [f64]) {
        let (n_in, n_out) = (self.in_len(), self.out_len());
        for l in 0..lead {
            let src = &g[l * n_out..(l + 1) * n_out];
            let dst = &mut dx[l * n_in..(l + 1) * n_in];
            for (o, &go) in src.iter().enumerate() {
                for j in self.row_ptr[o]..self.row_ptr[o + 1] {
                    dst[self.cols[j]] += self.weights[j] * go;
                }
            }
        }
    }

    /// Applies the map to a plain tensor (no gradient tracking).
    pub fn apply(&self, x: &Tensor) -> Result<Tensor, TensorError> {
        let lead = self.lead_of(x.shape())?;
        Tensor::new(self.out_full_shape(x.shape()), self.forward_raw(x.data(), lead))
    }
}
