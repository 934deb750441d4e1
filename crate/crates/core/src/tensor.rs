//! Dense containers used throughout the toolkit.
//!
//! Everything is row-major `f64`. A [`Matrix`] holds one utterance's frames
//! (`T × D`); a [`BatchTensor`] holds a padded batch (`B × T × C`) together
//! with each example's valid length.

use crate::error::{Error, Result};

/// Row-major `rows × cols` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::Shape(format!(
                "row {bad} has {} columns, expected {cols}",
                rows[bad].len()
            )));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A padded batch of sequences, `batch × time × channels`, channels fastest.
///
/// Frames at or beyond an example's valid length are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchTensor {
    batch: usize,
    time: usize,
    channels: usize,
    lengths: Vec<usize>,
    data: Vec<f64>,
}

impl BatchTensor {
    pub fn zeros(lengths: Vec<usize>, time: usize, channels: usize) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::Shape("empty batch".into()));
        }
        if let Some(&bad) = lengths.iter().find(|&&l| l == 0 || l > time) {
            return Err(Error::Shape(format!(
                "valid length {bad} outside [1, {time}]"
            )));
        }
        Ok(Self {
            batch: lengths.len(),
            time,
            channels,
            data: vec![0.0; lengths.len() * time * channels],
            lengths,
        })
    }

    /// Pads `sequences` to `time` frames (at least the longest sequence).
    pub fn from_sequences(sequences: &[&Matrix], time: usize) -> Result<Self> {
        let channels = sequences.first().map_or(0, |m| m.cols());
        let time = sequences.iter().map(|m| m.rows()).fold(time, usize::max);
        let lengths = sequences.iter().map(|m| m.rows()).collect();
        let mut out = Self::zeros(lengths, time, channels)?;
        for (b, m) in sequences.iter().enumerate() {
            if m.cols() != channels {
                return Err(Error::Shape(format!(
                    "sequence {b} has {} channels, expected {channels}",
                    m.cols()
                )));
            }
            let start = b * time * channels;
            out.data[start..start + m.as_slice().len()].copy_from_slice(m.as_slice());
        }
        Ok(out)
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn len_of(&self, b: usize) -> usize {
        self.lengths[b]
    }

    /// Total number of valid frames across the batch.
    pub fn valid_frames(&self) -> usize {
        self.lengths.iter().sum()
    }

    pub fn frame(&self, b: usize, t: usize) -> &[f64] {
        let start = (b * self.time + t) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn frame_mut(&mut self, b: usize, t: usize) -> &mut [f64] {
        let start = (b * self.time + t) * self.channels;
        &mut self.data[start..start + self.channels]
    }

    /// The valid frames of example `b` as one contiguous slice.
    pub fn example(&self, b: usize) -> &[f64] {
        let start = b * self.time * self.channels;
        &self.data[start..start + self.lengths[b] * self.channels]
    }

    pub fn example_mut(&mut self, b: usize) -> &mut [f64] {
        let start = b * self.time * self.channels;
        let len = self.lengths[b] * self.channels;
        &mut self.data[start..start + len]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Same lengths and time axis, new channel count, all zeros.
    pub fn zeros_like_with_channels(&self, channels: usize) -> Self {
        Self {
            batch: self.batch,
            time: self.time,
            channels,
            lengths: self.lengths.clone(),
            data: vec![0.0; self.batch * self.time * channels],
        }
    }

    /// Copies example `b`'s valid frames out into a matrix.
    pub fn to_matrix(&self, b: usize) -> Matrix {
        Matrix::from_vec(self.lengths[b], self.channels, self.example(b).to_vec())
            .expect("example slice matches its shape")
    }

    /// True when every frame beyond a valid length is exactly zero.
    pub fn masked_frames_are_zero(&self) -> bool {
        (0..self.batch).all(|b| {
            (self.lengths[b]..self.time).all(|t| self.frame(b, t).iter().all(|&v| v == 0.0))
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn same_layout(&self, other: &Self) -> bool {
        self.batch == other.batch
            && self.time == other.time
            && self.channels == other.channels
            && self.lengths == other.lengths
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padding_keeps_masked_frames_zero() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![5.0, 6.0]]).unwrap();
        let x = BatchTensor::from_sequences(&[&a, &b], 0).unwrap();
        assert_eq!(x.time(), 2);
        assert_eq!(x.lengths(), &[2, 1]);
        assert_eq!(x.frame(1, 0), &[5.0, 6.0]);
        assert!(x.masked_frames_are_zero());
        assert_eq!(x.to_matrix(0), a);
    }

    #[test]
    fn rejects_out_of_range_lengths() {
        assert!(BatchTensor::zeros(vec![0], 3, 1).is_err());
        assert!(BatchTensor::zeros(vec![4], 3, 1).is_err());
        assert!(BatchTensor::zeros(vec![], 3, 1).is_err());
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
