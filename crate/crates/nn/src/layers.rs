//! Convolution, pooling and fully connected layers over tape variables.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use symnav_tensor::{ReduceKind, SparseMap, TensorError, Var};

use crate::p4::rot90_source_index;
use crate::params::{Bound, ParamId, ParamStore};

/// Bound of the uniform weight initialisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// `+-sqrt(1 / fan_in)`.
    FanIn,
    /// `+-sqrt(6 / fan_in)`, variance-preserving in front of a ReLU.
    Relu,
}

impl Init {
    pub fn bound(self, fan_in: usize) -> f64 {
        match self {
            Init::FanIn => (1.0 / fan_in as f64).sqrt(),
            Init::Relu => (6.0 / fan_in as f64).sqrt(),
        }
    }
}

/// Plain `k x k` convolution with per-channel bias, `[C_in,H,W] -> [C_out,H',W']`.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        pad: usize,
        init: Init,
        rng: &mut R,
    ) -> Self {
        let bound = init.bound(c_in * k * k);
        let weight = store.add_uniform(format!("{name}.weight"), &[c_out, c_in, k, k], bound, rng);
        let bias = store.add(format!("{name}.bias"), symnav_tensor::Tensor::zeros(&[c_out]));
        Self {
            weight,
            bias,
            c_in,
            c_out,
            k,
            stride,
            pad,
        }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: Var<'t>) -> Result<Var<'t>, TensorError> {
        x.correlate2d(p.var(self.weight), self.stride, self.pad)?
            .add_channel_bias(p.var(self.bias))
    }
}

/// Lifting convolution: one filter bank applied at all four rotations,
/// `[C_in,H,W] -> [C_out,4,H',W']`.
#[derive(Debug, Clone)]
pub struct LiftingConv {
    pub weight: ParamId,
    pub bias: ParamId,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    index: Arc<[usize]>,
}

impl LiftingConv {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        pad: usize,
        init: Init,
        rng: &mut R,
    ) -> Self {
        let bound = init.bound(c_in * k * k);
        let weight = store.add_uniform(format!("{name}.weight"), &[c_out, c_in, k, k], bound, rng);
        let bias = store.add(format!("{name}.bias"), symnav_tensor::Tensor::zeros(&[c_out]));
        Self {
            weight,
            bias,
            c_in,
            c_out,
            k,
            stride,
            pad,
            index: lifting_index(c_out, c_in, k).into(),
        }
    }

    /// The `[C_out*4, C_in, k, k]` bank with slice `co*4+m` holding `W[co]` rotated by `m`.
    pub fn expanded_filters<'t>(&self, p: &Bound<'t>) -> Result<Var<'t>, TensorError> {
        p.var(self.weight)
            .gather(self.index.clone(), &[self.c_out * 4, self.c_in, self.k, self.k])
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: Var<'t>) -> Result<Var<'t>, TensorError> {
        let y = x.correlate2d(self.expanded_filters(p)?, self.stride, self.pad)?;
        let s = y.shape();
        y.reshape(&[self.c_out, 4, s[1], s[2]])?
            .add_channel_bias(p.var(self.bias))
    }
}

fn lifting_index(c_out: usize, c_in: usize, k: usize) -> Vec<usize> {
    let rots: Vec<Vec<usize>> = (0..4).map(|m| rot90_source_index(k, k, m)).collect();
    let mut idx = Vec::with_capacity(c_out * 4 * c_in * k * k);
    for co in 0..c_out {
        for rot in &rots {
            for ci in 0..c_in {
                let base = (co * c_in + ci) * k * k;
                idx.extend(rot.iter().map(|&s| base + s));
            }
        }
    }
    idx
}

/// Group convolution on orientation-carrying maps,
/// `[C_in,4,H,W] -> [C_out,4,H',W']` with filters `[C_out,C_in,4,k,k]`.
#[derive(Debug, Clone)]
pub struct GroupConv {
    pub weight: ParamId,
    pub bias: ParamId,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    index: Arc<[usize]>,
}

impl GroupConv {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        stride: usize,
        pad: usize,
        init: Init,
        rng: &mut R,
    ) -> Self {
        let bound = init.bound(c_in * 4 * k * k);
        let weight =
            store.add_uniform(format!("{name}.weight"), &[c_out, c_in, 4, k, k], bound, rng);
        let bias = store.add(format!("{name}.bias"), symnav_tensor::Tensor::zeros(&[c_out]));
        Self {
            weight,
            bias,
            c_in,
            c_out,
            k,
            stride,
            pad,
            index: group_index(c_out, c_in, k).into(),
        }
    }

    /// The `[C_out*4, C_in*4, k, k]` bank: slice `(co*4+m, ci*4+r)` is
    /// `W[co, ci, (r-m) mod 4]` rotated by `m`.
    pub fn expanded_filters<'t>(&self, p: &Bound<'t>) -> Result<Var<'t>, TensorError> {
        p.var(self.weight).gather(
            self.index.clone(),
            &[self.c_out * 4, self.c_in * 4, self.k, self.k],
        )
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: Var<'t>) -> Result<Var<'t>, TensorError> {
        let s = x.shape();
        if s.len() != 4 || s[0] != self.c_in || s[1] != 4 {
            return Err(TensorError::ShapeMismatch {
                op: "group_gconv",
                left: s,
                right: vec![self.c_in, 4],
            });
        }
        let flat = x.reshape(&[self.c_in * 4, s[2], s[3]])?;
        let y = flat.correlate2d(self.expanded_filters(p)?, self.stride, self.pad)?;
        let o = y.shape();
        y.reshape(&[self.c_out, 4, o[1], o[2]])?
            .add_channel_bias(p.var(self.bias))
    }
}

fn group_index(c_out: usize, c_in: usize, k: usize) -> Vec<usize> {
    let rots: Vec<Vec<usize>> = (0..4).map(|m| rot90_source_index(k, k, m)).collect();
    let mut idx = Vec::with_capacity(c_out * 4 * c_in * 4 * k * k);
    for co in 0..c_out {
        for (m, rot) in rots.iter().enumerate() {
            for ci in 0..c_in {
                for r in 0..4 {
                    let src_r = (r + 4 - m) % 4;
                    let base = ((co * c_in + ci) * 4 + src_r) * k * k;
                    idx.extend(rot.iter().map(|&s| base + s));
                }
            }
        }
    }
    idx
}

/// Affine map `W x + b` on a flat input.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub n_in: usize,
    pub n_out: usize,
}

impl Linear {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        n_in: usize,
        n_out: usize,
        init: Init,
        rng: &mut R,
    ) -> Self {
        let weight = store.add_uniform(format!("{name}.weight"), &[n_out, n_in], init.bound(n_in), rng);
        let bias = store.add(format!("{name}.bias"), symnav_tensor::Tensor::zeros(&[n_out]));
        Self {
            weight,
            bias,
            n_in,
            n_out,
        }
    }

    pub fn forward<'t>(&self, p: &Bound<'t>, x: Var<'t>) -> Result<Var<'t>, TensorError> {
        fully_connected(x, p.var(self.weight), p.var(self.bias))
    }
}

/// `w . x + b` for a flat `x` of length `w.shape[1]`.
pub fn fully_connected<'t>(x: Var<'t>, w: Var<'t>, b: Var<'t>) -> Result<Var<'t>, TensorError> {
    let ws = w.shape();
    if ws.len() != 2 || x.numel() != ws[1] || b.shape() != [ws[0]] {
        return Err(TensorError::ShapeMismatch {
            op: "fully_connected",
            left: x.shape(),
            right: ws,
        });
    }
    w.matmul(x.reshape(&[ws[1], 1])?)?
        .reshape(&[ws[0]])?
        .add(b)
}

/// Windowed max with floor semantics over the trailing two axes.
pub fn max_pool<'t>(x: Var<'t>, window: usize, stride: usize) -> Result<Var<'t>, TensorError> {
    x.max_pool2d(window, stride)
}

/// One-dimensional taps and reflect padding of the anti-aliasing filter for
/// an axis of extent `n`, and the output extent.
///
/// Odd extents use `[1,2,1]/4`; even extents use `[1,3,3,1]/8` so the sample
/// centres sit symmetrically on the grid and quarter-turns commute with the
/// downsampling exactly.
fn blur_taps(n: usize) -> (&'static [f64], isize) {
    if n % 2 == 1 {
        (&[0.25, 0.5, 0.25], 1)
    } else {
        (&[0.125, 0.375, 0.375, 0.125], 1)
    }
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    if n == 1 {
        return 0;
    }
    // single reflection suffices for pads smaller than the extent
    if i < 0 {
        i = -i;
    }
    if i >= n {
        i = 2 * (n - 1) - i;
    }
    i as usize
}

/// `(out extent, rows of (input index, weight))` along one axis.
fn blur_axis(n: usize, stride: usize) -> (usize, Vec<Vec<(usize, f64)>>) {
    let (taps, left) = blur_taps(n);
    let out = n.div_ceil(stride);
    let rows = (0..out)
        .map(|o| {
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(taps.len());
            for (t, &w) in taps.iter().enumerate() {
                let src = reflect((o * stride) as isize + t as isize - left, n);
                match row.iter_mut().find(|(i, _)| *i == src) {
                    Some(e) => e.1 += w,
                    None => row.push((src, w)),
                }
            }
            row
        })
        .collect();
    (out, rows)
}

/// The blur-then-subsample operator on an `h x w` plane, cached per extent.
pub fn blur_pool_map(h: usize, w: usize, stride: usize) -> Result<Arc<SparseMap>, TensorError> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize, usize), Arc<SparseMap>>>> = OnceLock::new();
    if h < 2 || w < 2 || stride == 0 {
        return Err(TensorError::contract(
            "blur_pool",
            format!("needs extents >= 2 and positive stride, got {h}x{w} stride {stride}"),
        ));
    }
    let cache = CACHE.get_or_init(Default::default);
    if let Some(m) = cache.lock().unwrap().get(&(h, w, stride)) {
        return Ok(m.clone());
    }
    let (oh, rows_y) = blur_axis(h, stride);
    let (ow, rows_x) = blur_axis(w, stride);
    let mut rows = Vec::with_capacity(oh * ow);
    for ry in &rows_y {
        for rx in &rows_x {
            let mut row = Vec::with_capacity(ry.len() * rx.len());
            for &(iy, wy) in ry {
                for &(ix, wx) in rx {
                    row.push((iy * w + ix, wy * wx));
                }
            }
            rows.push(row);
        }
    }
    let map = Arc::new(SparseMap::from_rows(&[h, w], &[oh, ow], rows)?);
    cache.lock().unwrap().insert((h, w, stride), map.clone());
    Ok(map)
}

/// Low-pass filter then keep every `stride`-th sample from index 0,
/// reflect padding, output extent `ceil(n / stride)`.
pub fn blur_pool<'t>(x: Var<'t>, stride: usize) -> Result<Var<'t>, TensorError> {
    let s = x.shape();
    if s.len() < 2 {
        return Err(TensorError::contract("blur_pool", format!("rank {} < 2", s.len())));
    }
    let map = blur_pool_map(s[s.len() - 2], s[s.len() - 1], stride)?;
    x.sparse_map(&map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrientationPool {
    Max,
    Mean,
}

/// Collapses the orientation axis of a `[C,4,H,W]` map.
pub fn orientation_pool<'t>(x: Var<'t>, mode: OrientationPool) -> Result<Var<'t>, TensorError> {
    let s = x.shape();
    if s.len() != 4 || s[1] != 4 {
        return Err(TensorError::contract(
            "orientation_pool",
            format!("expected [C, 4, H, W], got {s:?}"),
        ));
    }
    let kind = match mode {
        OrientationPool::Max => ReduceKind::Max,
        OrientationPool::Mean => ReduceKind::Mean,
    };
    x.reduce(kind, Some(1))
}
