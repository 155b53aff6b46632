//! The p4 group (integer translations and quarter-turn rotations) and its
//! action on planar and orientation-carrying feature maps.

use std::ops::Mul;

use symnav_tensor::{Tensor, TensorError};

/// `g(m, z1, z2)`: rotate by `m * 90deg` counter-clockwise, then translate by `(z1, z2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct P4Element {
    m: u8,
    pub z1: i64,
    pub z2: i64,
}

impl P4Element {
    pub const IDENTITY: P4Element = P4Element { m: 0, z1: 0, z2: 0 };

    pub fn new(m: i64, z1: i64, z2: i64) -> Self {
        Self {
            m: m.rem_euclid(4) as u8,
            z1,
            z2,
        }
    }

    pub fn rotation(m: i64) -> Self {
        Self::new(m, 0, 0)
    }

    pub fn m(&self) -> u8 {
        self.m
    }

    /// Exact cos/sin of `m * pi / 2`.
    fn cos_sin(m: u8) -> (i64, i64) {
        match m {
            0 => (1, 0),
            1 => (0, 1),
            2 => (-1, 0),
            _ => (0, -1),
        }
    }

    /// Homogeneous 3x3 integer matrix of the element.
    pub fn matrix(&self) -> [[i64; 3]; 3] {
        let (c, s) = Self::cos_sin(self.m);
        [[c, -s, self.z1], [s, c, self.z2], [0, 0, 1]]
    }

    /// Recovers an element from its matrix; `None` when the matrix is not in p4.
    pub fn from_matrix(mat: &[[i64; 3]; 3]) -> Option<Self> {
        if mat[2] != [0, 0, 1] {
            return None;
        }
        let m = (0..4u8).find(|&m| {
            let (c, s) = Self::cos_sin(m);
            mat[0][0] == c && mat[0][1] == -s && mat[1][0] == s && mat[1][1] == c
        })?;
        Some(Self {
            m,
            z1: mat[0][2],
            z2: mat[1][2],
        })
    }

    /// Group product `self * other` (apply `other` first).
    pub fn compose(&self, other: &P4Element) -> P4Element {
        let (c, s) = Self::cos_sin(self.m);
        P4Element {
            m: (self.m + other.m) % 4,
            z1: c * other.z1 - s * other.z2 + self.z1,
            z2: s * other.z1 + c * other.z2 + self.z2,
        }
    }

    pub fn inverse(&self) -> P4Element {
        let inv_m = (4 - self.m) % 4;
        let (c, s) = Self::cos_sin(inv_m);
        P4Element {
            m: inv_m,
            z1: -(c * self.z1 - s * self.z2),
            z2: -(s * self.z1 + c * self.z2),
        }
    }

    pub fn act(&self, point: (i64, i64)) -> (i64, i64) {
        let (c, s) = Self::cos_sin(self.m);
        (
            c * point.0 - s * point.1 + self.z1,
            s * point.0 + c * point.1 + self.z2,
        )
    }
}

impl Mul for P4Element {
    type Output = P4Element;

    fn mul(self, rhs: P4Element) -> P4Element {
        self.compose(&rhs)
    }
}

/// For an `h x w` plane rotated counter-clockwise `m` quarter turns, the
/// source offset of every output offset (row-major). The output plane is
/// `w x h` for odd `m`.
pub fn rot90_source_index(h: usize, w: usize, m: u8) -> Vec<usize> {
    let (oh, ow) = if m % 2 == 1 { (w, h) } else { (h, w) };
    let mut idx = Vec::with_capacity(h * w);
    for i in 0..oh {
        for j in 0..ow {
            let (r, c) = match m % 4 {
                0 => (i, j),
                1 => (j, w - 1 - i),
                2 => (h - 1 - i, w - 1 - j),
                _ => (h - 1 - j, i),
            };
            idx.push(r * w + c);
        }
    }
    idx
}

/// Counter-clockwise rotation of the trailing two axes by `m` quarter turns.
pub fn rot90_spatial(x: &Tensor, m: i64) -> Result<Tensor, TensorError> {
    let r = x.rank();
    if r < 2 {
        return Err(TensorError::contract("rot90_spatial", format!("rank {r} < 2")));
    }
    let m = m.rem_euclid(4) as u8;
    let (h, w) = (x.shape()[r - 2], x.shape()[r - 1]);
    let src = rot90_source_index(h, w, m);
    let plane = h * w;
    let lead = x.numel() / plane;
    let mut data = Vec::with_capacity(x.numel());
    for l in 0..lead {
        let base = l * plane;
        data.extend(src.iter().map(|&s| x.data()[base + s]));
    }
    let mut shape = x.shape().to_vec();
    if m % 2 == 1 {
        shape.swap(r - 2, r - 1);
    }
    Tensor::new(shape, data)
}

/// The p4 rotation `m` acting on a `[C, 4, H, W]` orientation-carrying map:
/// every slice is rotated spatially and the orientation axis is shifted
/// cyclically, `out[c, o] = rot90(x[c, (o - m) mod 4], m)`.
pub fn p4_rotate(x: &Tensor, m: i64) -> Result<Tensor, TensorError> {
    if x.rank() != 4 || x.shape()[1] != 4 {
        return Err(TensorError::contract(
            "p4_rotate",
            format!("expected [C, 4, H, W], got {:?}", x.shape()),
        ));
    }
    let rotated = rot90_spatial(x, m)?;
    let s = rotated.shape().to_vec();
    let plane = s[2] * s[3];
    let shift = m.rem_euclid(4) as usize;
    let mut data = vec![0.0; rotated.numel()];
    for c in 0..s[0] {
        for o in 0..4 {
            let from = (c * 4 + (o + 4 - shift) % 4) * plane;
            let to = (c * 4 + o) * plane;
            data[to..to + plane].copy_from_slice(&rotated.data()[from..from + plane]);
        }
    }
    Tensor::new(s, data)
}

/// Cyclic shift of the trailing two axes by `(dy, dx)` with zero fill.
pub fn shift_spatial(x: &Tensor, dy: i64, dx: i64) -> Result<Tensor, TensorError> {
    let r = x.rank();
    if r < 2 {
        return Err(TensorError::contract("shift_spatial", format!("rank {r} < 2")));
    }
    let (h, w) = (x.shape()[r - 2], x.shape()[r - 1]);
    let plane = h * w;
    let lead = x.numel() / plane;
    let mut data = vec![0.0; x.numel()];
    for l in 0..lead {
        for y in 0..h as i64 {
            for xx in 0..w as i64 {
                let (sy, sx) = (y - dy, xx - dx);
                if sy >= 0 && sx >= 0 && sy < h as i64 && sx < w as i64 {
                    data[l * plane + (y as usize) * w + xx as usize] =
                        x.data()[l * plane + (sy as usize) * w + sx as usize];
                }
            }
        }
    }
    Tensor::new(x.shape().to_vec(), data)
}
