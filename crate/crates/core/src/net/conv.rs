//! Same-length dilated 1-D convolution over padded batches.
//!
//! `y[b,t,o] = bias[o] + Σ_{c,j} w[o,c,j] · x[b, t + (j - (k-1)/2)·d, c]`,
//! with source frames outside the example's valid range read as zero.
//! Weights are stored `out × in × k`.

use crate::error::{Error, Result};
use crate::tensor::BatchTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub c_out: usize,
    pub c_in: usize,
    pub kernel: usize,
    pub dilation: usize,
}

impl ConvShape {
    fn weight_len(&self) -> usize {
        self.c_out * self.c_in * self.kernel
    }

    /// Source frame for output frame `t` and tap `j`, if inside `0..len`.
    #[inline]
    fn source(&self, t: usize, j: usize, len: usize) -> Option<usize> {
        let half = (self.kernel - 1) / 2;
        let s = (t + j * self.dilation).checked_sub(half * self.dilation)?;
        (s < len).then_some(s)
    }
}

/// Everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct ConvCache {
    input: BatchTensor,
    shape: ConvShape,
}

/// `w[o,c,j]` rearranged to `[j][o][c]` so the inner loop runs over input
/// channels contiguously.
fn tap_major(w: &[f64], s: &ConvShape) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    for o in 0..s.c_out {
        for c in 0..s.c_in {
            for j in 0..s.kernel {
                out[(j * s.c_out + o) * s.c_in + c] = w[(o * s.c_in + c) * s.kernel + j];
            }
        }
    }
    out
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn check(x: &BatchTensor, w: &[f64], b: &[f64], s: &ConvShape) -> Result<()> {
    if s.kernel % 2 == 0 || s.kernel == 0 || s.dilation == 0 {
        return Err(Error::Shape(format!(
            "kernel {} / dilation {} invalid",
            s.kernel, s.dilation
        )));
    }
    if x.channels() != s.c_in {
        return Err(Error::Shape(format!(
            "conv input has {} channels, weight expects {}",
            x.channels(),
            s.c_in
        )));
    }
    if w.len() != s.weight_len() || b.len() != s.c_out {
        return Err(Error::Shape("conv weight/bias length".into()));
    }
    Ok(())
}

pub fn conv1d_forward(
    x: &BatchTensor,
    w: &[f64],
    b: &[f64],
    shape: ConvShape,
) -> Result<(BatchTensor, ConvCache)> {
    check(x, w, b, &shape)?;
    let wt = tap_major(w, &shape);
    let mut y = x.zeros_like_with_channels(shape.c_out);
    for bi in 0..x.batch() {
        let len = x.len_of(bi);
        for t in 0..len {
            let out = y.frame_mut(bi, t);
            out.copy_from_slice(b);
            for j in 0..shape.kernel {
                let Some(s) = shape.source(t, j, len) else {
                    continue;
                };
                let src = x.frame(bi, s);
                let taps = &wt[j * shape.c_out * shape.c_in..(j + 1) * shape.c_out * shape.c_in];
                for (o, row) in taps.chunks_exact(shape.c_in).enumerate() {
                    out[o] += dot(row, src);
                }
            }
        }
    }
    Ok((
        y,
        ConvCache {
            input: x.clone(),
            shape,
        },
    ))
}

/// Returns `(dx, dw, db)`. Frames of `dy` beyond the valid length are ignored.
pub fn conv1d_backward(
    cache: &ConvCache,
    w: &[f64],
    dy: &BatchTensor,
) -> Result<(BatchTensor, Vec<f64>, Vec<f64>)> {
    let s = cache.shape;
    let x = &cache.input;
    if dy.channels() != s.c_out || dy.batch() != x.batch() || dy.time() != x.time() {
        return Err(Error::Shape("conv upstream gradient does not match cache".into()));
    }
    let wt = tap_major(w, &s);
    let mut dx = x.zeros_like_with_channels(s.c_in);
    let mut dwt = vec![0.0; wt.len()];
    let mut db = vec![0.0; s.c_out];
    let block = s.c_out * s.c_in;
    for bi in 0..x.batch() {
        let len = x.len_of(bi);
        for t in 0..len {
            let g = dy.frame(bi, t);
            for (acc, gi) in db.iter_mut().zip(g) {
                *acc += gi;
            }
            for j in 0..s.kernel {
                let Some(src) = s.source(t, j, len) else {
                    continue;
                };
                let taps = &wt[j * block..(j + 1) * block];
                let dtaps = &mut dwt[j * block..(j + 1) * block];
                let xs = x.frame(bi, src);
                let dxs = dx.frame_mut(bi, src);
                for (o, &go) in g.iter().enumerate() {
                    if go == 0.0 {
                        continue;
                    }
                    axpy(go, &taps[o * s.c_in..(o + 1) * s.c_in], dxs);
                    axpy(go, xs, &mut dtaps[o * s.c_in..(o + 1) * s.c_in]);
                }
            }
        }
    }
    let mut dw = vec![0.0; w.len()];
    for o in 0..s.c_out {
        for c in 0..s.c_in {
            for j in 0..s.kernel {
                dw[(o * s.c_in + c) * s.kernel + j] = dwt[(j * s.c_out + o) * s.c_in + c];
            }
        }
    }
    Ok((dx, dw, db))
}
