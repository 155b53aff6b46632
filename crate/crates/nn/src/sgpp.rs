//! Polar resampling and the pooling heads built on it.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use symnav_tensor::{ReduceKind, SparseMap, TensorError, Var};

/// Sampling grid of a Cartesian-to-polar resampler on an `h x w` plane.
#[derive(Debug)]
pub struct PolarGrid {
    pub h: usize,
    pub w: usize,
    /// Sample radii in cells, evenly spaced from 0 to the inscribed radius.
    pub radii: Vec<f64>,
    /// Sample angles in radians, `2 pi j / A`.
    pub angles: Vec<f64>,
    map: Arc<SparseMap>,
}

/// Exact-as-possible `(cos, sin)` of `2 pi j / a`. When `a` is a multiple of
/// four the quarter-turn partners are derived by swapping components, so the
/// sample set is mapped onto itself bit-for-bit by 90 degree rotations.
fn unit_directions(a: usize) -> Vec<(f64, f64)> {
    if a % 4 != 0 {
        return (0..a)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / a as f64;
                (t.cos(), t.sin())
            })
            .collect();
    }
    let q = a / 4;
    let base: Vec<(f64, f64)> = (0..q)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / a as f64;
            (t.cos(), t.sin())
        })
        .collect();
    let mut out = Vec::with_capacity(a);
    for quarter in 0..4 {
        for &(c, s) in &base {
            out.push(match quarter {
                0 => (c, s),
                1 => (-s, c),
                2 => (-c, -s),
                _ => (s, -c),
            });
        }
    }
    out
}

/// Bilinear weights of the point `(x, y)` (column, row) on an `h x w` plane.
pub fn bilinear_weights(x: f64, y: f64, h: usize, w: usize) -> Vec<(usize, f64)> {
    let axis = |v: f64, n: usize| -> (usize, usize, f64) {
        if n == 1 {
            return (0, 0, 0.0);
        }
        let i0 = (v.floor().max(0.0) as usize).min(n - 2);
        (i0, i0 + 1, v - i0 as f64)
    };
    let (x0, x1, fx) = axis(x, w);
    let (y0, y1, fy) = axis(y, h);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(4);
    for (yy, wy) in [(y0, 1.0 - fy), (y1, fy)] {
        for (xx, wx) in [(x0, 1.0 - fx), (x1, fx)] {
            let off = yy * w + xx;
            match out.iter_mut().find(|e| e.0 == off) {
                Some(e) => e.1 += wy * wx,
                None => out.push((off, wy * wx)),
            }
        }
    }
    out
}

impl PolarGrid {
    /// Shared grid for the given extents, built once per process.
    pub fn get(h: usize, w: usize, r: usize, a: usize) -> Result<Arc<PolarGrid>, TensorError> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize, usize, usize), Arc<PolarGrid>>>> =
            OnceLock::new();
        if r < 1 || a < 1 {
            return Err(TensorError::contract(
                "cartesian_to_polar",
                format!("radial bins {r} and angular bins {a} must be >= 1"),
            ));
        }
        if h != w {
            return Err(TensorError::contract(
                "cartesian_to_polar",
                format!("square maps only, got {h}x{w}"),
            ));
        }
        let cache = CACHE.get_or_init(Default::default);
        if let Some(g) = cache.lock().unwrap().get(&(h, w, r, a)) {
            return Ok(g.clone());
        }
        let grid = Arc::new(Self::build(h, w, r, a)?);
        cache.lock().unwrap().insert((h, w, r, a), grid.clone());
        Ok(grid)
    }

    fn build(h: usize, w: usize, r: usize, a: usize) -> Result<Self, TensorError> {
        let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
        let rmax = (h.min(w) as f64 - 1.0) / 2.0;
        let radii: Vec<f64> = if r == 1 {
            vec![0.0]
        } else {
            (0..r).map(|i| rmax * i as f64 / (r - 1) as f64).collect()
        };
        let angles: Vec<f64> = (0..a).map(|j| 2.0 * PI * j as f64 / a as f64).collect();
        let dirs = unit_directions(a);
        let mut rows = Vec::with_capacity(r * a);
        for &rho in &radii {
            for &(c, s) in &dirs {
                rows.push(bilinear_weights(cx + rho * c, cy + rho * s, h, w));
            }
        }
        let map = Arc::new(SparseMap::from_rows(&[h, w], &[r, a], rows)?);
        Ok(Self {
            h,
            w,
            radii,
            angles,
            map,
        })
    }

    pub fn map(&self) -> &Arc<SparseMap> {
        &self.map
    }
}

/// `[C,H,W] -> [C,R,A]` by bilinear sampling on concentric circles.
pub fn cartesian_to_polar<'t>(x: Var<'t>, r: usize, a: usize) -> Result<Var<'t>, TensorError> {
    let s = x.shape();
    if s.len() != 3 {
        return Err(TensorError::contract(
            "cartesian_to_polar",
            format!("expected [C, H, W], got {s:?}"),
        ));
    }
    let grid = PolarGrid::get(s[1], s[2], r, a)?;
    x.sparse_map(grid.map())
}

/// Mean over the angular axis, `[C,R,A] -> [C,R]`.
pub fn circumferential_average(p: Var<'_>) -> Result<Var<'_>, TensorError> {
    if p.shape().len() != 3 {
        return Err(TensorError::contract(
            "circumferential_average",
            format!("expected [C, R, A], got {:?}", p.shape()),
        ));
    }
    p.reduce(ReduceKind::Mean, Some(2))
}

/// Semi-global polar pooling, `[C,H,W] -> [C,R]`.
pub fn sgpp<'t>(x: Var<'t>, r: usize, a: usize) -> Result<Var<'t>, TensorError> {
    circumferential_average(cartesian_to_polar(x, r, a)?)
}

/// Per-channel spatial mean, `[C,H,W] -> [C]`.
pub fn global_average_pool(x: Var<'_>) -> Result<Var<'_>, TensorError> {
    let s = x.shape();
    if s.len() != 3 {
        return Err(TensorError::contract(
            "global_average_pool",
            format!("expected [C, H, W], got {s:?}"),
        ));
    }
    x.reshape(&[s[0], s[1] * s[2]])?.reduce(ReduceKind::Mean, Some(1))
}
