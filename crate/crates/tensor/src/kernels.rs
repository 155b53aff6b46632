//! Raw numeric kernels shared by the tape and by plain-tensor helpers.

use crate::error::TensorError;

/// Strided view of a row-major matrix, optionally transposed.
#[derive(Clone, Copy)]
pub(crate) struct MatRef<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub transposed: bool,
}

impl<'a> MatRef<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self {
            data,
            rows,
            cols,
            transposed: false,
        }
    }

    /// The transpose of a stored `rows x cols` matrix, viewed as `cols x rows`.
    pub fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            transposed: !self.transposed,
        }
    }

    fn strides(&self) -> (isize, isize) {
        if self.transposed {
            // stored as cols x rows (the un-transposed extents)
            (1, self.rows as isize)
        } else {
            (self.cols as isize, 1)
        }
    }
}

/// `c = a * b + beta * c` with `c` stored row-major.
pub(crate) fn gemm(a: MatRef<'_>, b: MatRef<'_>, beta: f64, c: &mut [f64]) {
    assert_eq!(a.cols, b.rows, "gemm inner extent");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert_eq!(c.len(), m * n, "gemm output size");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in c.iter_mut() {
            *v *= beta;
        }
        return;
    }
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: extents and strides describe the borrowed slices exactly; the
    // output slice is exclusively borrowed and does not alias the inputs.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Geometry of a single-image 2D cross-correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    pub fn new(
        input: &[usize],
        filters: &[usize],
        stride: usize,
        pad: usize,
    ) -> Result<Self, TensorError> {
        if input.len() != 3 || filters.len() != 4 {
            return Err(TensorError::ShapeMismatch {
                op: "correlate2d",
                left: input.to_vec(),
                right: filters.to_vec(),
            });
        }
        let (c_in, h, w) = (input[0], input[1], input[2]);
        let (c_out, fc, kh, kw) = (filters[0], filters[1], filters[2], filters[3]);
        if fc != c_in || kh != kw {
            return Err(TensorError::ShapeMismatch {
                op: "correlate2d",
                left: input.to_vec(),
                right: filters.to_vec(),
            });
        }
        if stride == 0 {
            return Err(TensorError::contract("correlate2d", "stride must be positive"));
        }
        let k = kh;
        if k > h + 2 * pad || k > w + 2 * pad {
            return Err(TensorError::contract(
                "correlate2d",
                format!("filter extent {k} exceeds padded input {h}x{w} (pad {pad}); output extent would be <= 0"),
            ));
        }
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (w + 2 * pad - k) / stride + 1;
        Ok(Self {
            c_in,
            h,
            w,
            c_out,
            k,
            stride,
            pad,
            oh,
            ow,
        })
    }

    pub fn patch_len(&self) -> usize {
        self.c_in * self.k * self.k
    }

    pub fn out_pixels(&self) -> usize {
        self.oh * self.ow
    }
}

/// Unfolds the input into a `[c_in*k*k, oh*ow]` column matrix.
pub(crate) fn im2col(x: &[f64], g: &ConvGeom) -> Vec<f64> {
    let p = g.out_pixels();
    let mut cols = vec![0.0; g.patch_len() * p];
    for c in 0..g.c_in {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for u in 0..g.k {
            for v in 0..g.k {
                let row = (c * g.k + u) * g.k + v;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + u) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    let drow = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    for (ox, d) in drow.iter_mut().enumerate() {
                        let ix = (ox * g.stride + v) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            *d = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: accumulates columns back into an input-shaped buffer.
pub(crate) fn col2im(cols: &[f64], g: &ConvGeom, dx: &mut [f64]) {
    let p = g.out_pixels();
    for c in 0..g.c_in {
        let plane = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for u in 0..g.k {
            for v in 0..g.k {
                let row = (c * g.k + u) * g.k + v;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + u) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let base = iy as usize * g.w;
                    for ox in 0..g.ow {
                        let ix = (ox * g.stride + v) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            plane[base + ix as usize] += src[oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn correlate2d_forward(x: &[f64], filters: &[f64], g: &ConvGeom) -> Vec<f64> {
    let cols = im2col(x, g);
    let mut out = vec![0.0; g.c_out * g.out_pixels()];
    gemm(
        MatRef::new(filters, g.c_out, g.patch_len()),
        MatRef::new(&cols, g.patch_len(), g.out_pixels()),
        0.0,
        &mut out,
    );
    out
}

/// Returns `(d_input, d_filters)`; either is skipped when not requested.
pub(crate) fn correlate2d_backward(
    x: &[f64],
    filters: &[f64],
    g: &ConvGeom,
    grad_out: &[f64],
    want_input: bool,
    want_filters: bool,
) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
    let p = g.out_pixels();
    let kk = g.patch_len();
    let d_filters = want_filters.then(|| {
        let cols = im2col(x, g);
        let mut dw = vec![0.0; g.c_out * kk];
        gemm(
            MatRef::new(grad_out, g.c_out, p),
            MatRef::new(&cols, kk, p).t(),
            0.0,
            &mut dw,
        );
        dw
    });
    let d_input = want_input.then(|| {
        let mut dcols = vec![0.0; kk * p];
        gemm(
            MatRef::new(filters, g.c_out, kk).t(),
            MatRef::new(grad_out, g.c_out, p),
            0.0,
            &mut dcols,
        );
        let mut dx = vec![0.0; g.c_in * g.h * g.w];
        col2im(&dcols, g, &mut dx);
        dx
    });
    (d_input, d_filters)
}

/// Windowed max over the trailing two axes. Returns values and, per output
/// element, the flat input offset of its first (row-major) maximum.
pub(crate) fn max_pool2d(
    x: &[f64],
    lead: usize,
    h: usize,
    w: usize,
    window: usize,
    stride: usize,
) -> (Vec<f64>, Vec<usize>, usize, usize) {
    let oh = (h - window) / stride + 1;
    let ow = (w - window) / stride + 1;
    let mut out = Vec::with_capacity(lead * oh * ow);
    let mut arg = Vec::with_capacity(lead * oh * ow);
    for l in 0..lead {
        let base = l * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_at = 0;
                for u in 0..window {
                    for v in 0..window {
                        let off = base + (oy * stride + u) * w + ox * stride + v;
                        if x[off] > best {
                            best = x[off];
                            best_at = off;
                        }
                    }
                }
                out.push(best);
                arg.push(best_at);
            }
        }
    }
    (out, arg, oh, ow)
}

/// Splits `shape` around `axis` into `(outer, extent, inner)`.
pub(crate) fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

pub(crate) fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub(crate) fn log_softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = x.iter().map(|v| (v - max).exp()).sum();
    let lse = max + z.ln();
    x.iter().map(|v| v - lse).collect()
}
