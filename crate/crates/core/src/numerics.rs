//! Dense row-major `f64` tensors and the handful of operations the pipeline
//! needs: normalization, softmax, argmax, nearest upsampling and channel
//! concatenation. Operations that work per pixel treat the last axis as the
//! channel axis.

use crate::error::{Error, Result};

/// Norms below this are treated as exactly zero.
pub const ZERO_NORM: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch(format!(
                "non-finite value {} at flat index {i}",
                data[i]
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        Self::new(vec![data.len()], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Length of the last axis (1 for rank-0).
    pub fn last_dim(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    /// Iterator over contiguous last-axis rows.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        let d = self.last_dim().max(1);
        self.data.chunks(d)
    }
}

/// Integer-valued counterpart of [`Tensor`], produced by argmax.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexTensor {
    pub shape: Vec<usize>,
    pub data: Vec<usize>,
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unit vector in the direction of `v`, returned together with `‖v‖`.
pub fn normalize_slice(v: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = norm(v);
    if !(n >= ZERO_NORM) {
        return Err(Error::ZeroVector { norm: n });
    }
    Ok((v.iter().map(|x| x / n).collect(), n))
}

pub fn l2_normalize(v: &Tensor) -> Result<Tensor> {
    if v.rank() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "l2_normalize expects rank 1, got shape {:?}",
            v.shape()
        )));
    }
    let (unit, _) = normalize_slice(v.data())?;
    Tensor::new(v.shape.clone(), unit)
}

/// Numerically stable softmax of one row, written into `out`.
pub fn softmax_into(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(row) {
        *o = (x - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn softmax_last_axis(t: &Tensor) -> Tensor {
    let d = t.last_dim();
    let mut data = vec![0.0; t.len()];
    if d > 0 {
        for (row, out) in t.data.chunks(d).zip(data.chunks_mut(d)) {
            softmax_into(row, out);
        }
    }
    Tensor {
        shape: t.shape.clone(),
        data,
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn argmax_last_axis(t: &Tensor) -> IndexTensor {
    let d = t.last_dim();
    let data = if d == 0 {
        Vec::new()
    } else {
        t.data.chunks(d).map(argmax).collect()
    };
    let shape = t.shape[..t.rank().saturating_sub(1)].to_vec();
    IndexTensor { shape, data }
}

/// Source coordinate for nearest-neighbour upsampling from `src` to `dst`.
#[inline]
pub fn nearest_source(i: usize, src: usize, dst: usize) -> usize {
    (i * src) / dst
}

fn expect_rank3(t: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [h, w, d] => Ok((h, w, d)),
        _ => Err(Error::ShapeMismatch(format!(
            "{what} expects H×W×D, got shape {:?}",
            t.shape()
        ))),
    }
}

pub fn upsample_nearest(t: &Tensor, new_h: usize, new_w: usize) -> Result<Tensor> {
    let (h, w, d) = expect_rank3(t, "upsample_nearest")?;
    if new_h < h || new_w < w {
        return Err(Error::ShapeMismatch(format!(
            "upsample target {new_h}×{new_w} smaller than source {h}×{w}"
        )));
    }
    let mut data = Vec::with_capacity(new_h * new_w * d);
    for y in 0..new_h {
        let sy = nearest_source(y, h, new_h);
        for x in 0..new_w {
            let sx = nearest_source(x, w, new_w);
            let base = (sy * w + sx) * d;
            data.extend_from_slice(&t.data[base..base + d]);
        }
    }
    Ok(Tensor {
        shape: vec![new_h, new_w, d],
        data,
    })
}

pub fn concat_channels(ts: &[&Tensor]) -> Result<Tensor> {
    let first = ts
        .first()
        .ok_or_else(|| Error::ShapeMismatch("concat_channels of nothing".into()))?;
    let (h, w, _) = expect_rank3(first, "concat_channels")?;
    let mut widths = Vec::with_capacity(ts.len());
    for t in ts {
        let (th, tw, td) = expect_rank3(t, "concat_channels")?;
        if (th, tw) != (h, w) {
            return Err(Error::ShapeMismatch(format!(
                "concat_channels: {th}×{tw} does not match {h}×{w}"
            )));
        }
        widths.push(td);
    }
    let total: usize = widths.iter().sum();
    let mut data = Vec::with_capacity(h * w * total);
    for p in 0..h * w {
        for (t, &d) in ts.iter().zip(&widths) {
            data.extend_from_slice(&t.data[p * d..(p + 1) * d]);
        }
    }
    Ok(Tensor {
        shape: vec![h, w, total],
        data,
    })
}
