//! Adaptive average pooling of each example's valid frames to a fixed number
//! of segments.

use crate::error::{Error, Result};
use crate::tensor::{BatchTensor, Matrix};

/// Frame range `[start, end)` of segment `s` out of `steps` for a sequence of
/// `len` valid frames. Sequences shorter than `steps` behave as if padded by
/// repeating their last frame.
pub fn segment(s: usize, steps: usize, len: usize) -> (usize, usize) {
    if len >= steps {
        (s * len / steps, (s + 1) * len / steps)
    } else {
        let t = s.min(len - 1);
        (t, t + 1)
    }
}

#[derive(Debug, Clone)]
pub struct PoolCache {
    lengths: Vec<usize>,
    time: usize,
    channels: usize,
    steps: usize,
}

/// Returns a `batch × (steps · channels)` matrix, segment-major.
pub fn adaptive_avgpool(x: &BatchTensor, steps: usize) -> Result<(Matrix, PoolCache)> {
    if steps == 0 {
        return Err(Error::Shape("pooling to zero steps".into()));
    }
    let c = x.channels();
    let mut out = Matrix::zeros(x.batch(), steps * c);
    for b in 0..x.batch() {
        let len = x.len_of(b);
        let row = out.row_mut(b);
        for s in 0..steps {
            let (start, end) = segment(s, steps, len);
            let dst = &mut row[s * c..(s + 1) * c];
            for t in start..end {
                for (d, v) in dst.iter_mut().zip(x.frame(b, t)) {
                    *d += v;
                }
            }
            let n = (end - start) as f64;
            dst.iter_mut().for_each(|d| *d /= n);
        }
    }
    Ok((
        out,
        PoolCache {
            lengths: x.lengths().to_vec(),
            time: x.time(),
            channels: c,
            steps,
        },
    ))
}

pub fn adaptive_avgpool4(x: &BatchTensor) -> Result<(Matrix, PoolCache)> {
    adaptive_avgpool(x, 4)
}

pub fn adaptive_avgpool_backward(cache: &PoolCache, dy: &Matrix) -> Result<BatchTensor> {
    let c = cache.channels;
    if dy.rows() != cache.lengths.len() || dy.cols() != cache.steps * c {
        return Err(Error::Shape("pooling upstream gradient does not match cache".into()));
    }
    let mut dx = BatchTensor::zeros(cache.lengths.clone(), cache.time, c)?;
    for (b, &len) in cache.lengths.iter().enumerate() {
        for s in 0..cache.steps {
            let (start, end) = segment(s, cache.steps, len);
            let n = (end - start) as f64;
            let g = &dy.row(b)[s * c..(s + 1) * c];
            for t in start..end {
                for (d, gi) in dx.frame_mut(b, t).iter_mut().zip(g) {
                    *d += gi / n;
                }
            }
        }
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(values: &[f64], time: usize) -> BatchTensor {
        let m = Matrix::from_vec(values.len(), 1, values.to_vec()).unwrap();
        BatchTensor::from_sequences(&[&m], time).unwrap()
    }

    #[test]
    fn equal_segments() {
        let (y, _) = adaptive_avgpool4(&seq(&[1., 2., 3., 4., 5., 6., 7., 8.], 10)).unwrap();
        assert_eq!(y.row(0), &[1.5, 3.5, 5.5, 7.5]);
    }

    #[test]
    fn length_four_is_identity() {
        let (y, _) = adaptive_avgpool4(&seq(&[4., -1., 2., 9.], 4)).unwrap();
        assert_eq!(y.row(0), &[4., -1., 2., 9.]);
    }

    #[test]
    fn uneven_segments() {
        // boundaries floor(s·6/4) = 0, 1, 3, 4, 6
        let (y, _) = adaptive_avgpool4(&seq(&[1., 2., 3., 4., 5., 6.], 6)).unwrap();
        assert_eq!(y.row(0), &[1.0, 2.5, 4.0, 5.5]);
    }

    #[test]
    fn short_sequences_repeat_the_last_frame() {
        let (y, cache) = adaptive_avgpool4(&seq(&[3., 5.], 6)).unwrap();
        assert_eq!(y.row(0), &[3., 5., 5., 5.]);
        let dy = Matrix::from_vec(1, 4, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let dx = adaptive_avgpool_backward(&cache, &dy).unwrap();
        assert_eq!(dx.example(0), &[1.0, 3.0]);
    }

    #[test]
    fn backward_spreads_evenly() {
        let (_, cache) = adaptive_avgpool4(&seq(&[1., 2., 3., 4., 5., 6.], 7)).unwrap();
        let dy = Matrix::from_vec(1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let dx = adaptive_avgpool_backward(&cache, &dy).unwrap();
        assert_eq!(dx.example(0), &[1.0, 1.0, 1.0, 3.0, 2.0, 2.0]);
        assert!(dx.masked_frames_are_zero());
    }
}
