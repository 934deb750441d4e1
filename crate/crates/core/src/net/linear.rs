use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// `logits = h Wᵀ + b` with `W` stored `out × in`.
pub fn linear_forward(h: &Matrix, w: &[f64], b: &[f64]) -> Result<Matrix> {
    let (n_in, n_out) = (h.cols(), b.len());
    if w.len() != n_in * n_out {
        return Err(Error::Shape(format!(
            "linear weight has {} values, expected {n_out}x{n_in}",
            w.len()
        )));
    }
    let mut out = Matrix::zeros(h.rows(), n_out);
    for r in 0..h.rows() {
        let x = h.row(r);
        for (o, y) in out.row_mut(r).iter_mut().enumerate() {
            *y = b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    Ok(out)
}

/// Returns `(dh, dW, db)`.
pub fn linear_backward(h: &Matrix, w: &[f64], dy: &Matrix) -> Result<(Matrix, Vec<f64>, Vec<f64>)> {
    let (n_in, n_out) = (h.cols(), dy.cols());
    if dy.rows() != h.rows() || w.len() != n_in * n_out {
        return Err(Error::Shape("linear upstream gradient does not match input".into()));
    }
    let mut dh = Matrix::zeros(h.rows(), n_in);
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; n_out];
    for r in 0..h.rows() {
        let x = h.row(r);
        let g = dy.row(r);
        let dx = dh.row_mut(r);
        for (o, &go) in g.iter().enumerate() {
            db[o] += go;
            let wo = &w[o * n_in..(o + 1) * n_in];
            let dwo = &mut dw[o * n_in..(o + 1) * n_in];
            for i in 0..n_in {
                dx[i] += go * wo[i];
                dwo[i] += go * x[i];
            }
        }
    }
    Ok((dh, dw, db))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zero_logits() {
        let h = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.0, 4.0]).unwrap();
        let y = linear_forward(&h, &[0.0; 6], &[0.0; 2]).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_output_is_a_dot_product() {
        let h = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = linear_forward(&h, &[0.5, -1.0], &[0.25]).unwrap();
        assert_eq!(y.as_slice(), &[-1.25, -2.25]);
    }

    #[test]
    fn weight_gradient_matches_finite_differences() {
        let h = Matrix::from_vec(3, 4, (0..12).map(|i| (i as f64 * 0.4).sin()).collect()).unwrap();
        let w: Vec<f64> = (0..8).map(|i| (i as f64 * 0.9).cos()).collect();
        let b = [0.1, -0.1];
        let r = [0.3, -1.2, 0.8, 0.5, -0.7, 1.1];
        let loss = |w: &[f64]| -> f64 {
            let y = linear_forward(&h, w, &b).unwrap();
            y.as_slice().iter().zip(&r).map(|(a, b)| a * b).sum()
        };
        let dy = Matrix::from_vec(3, 2, r.to_vec()).unwrap();
        let (_, dw, db) = linear_backward(&h, &w, &dy).unwrap();
        for i in 0..w.len() {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[i] += 1e-5;
            wm[i] -= 1e-5;
            let num = (loss(&wp) - loss(&wm)) / 2e-5;
            assert!((dw[i] - num).abs() / dw[i].abs().max(num.abs()).max(1e-8) < 1e-4);
        }
        assert!((db[0] - (0.3 + 0.8 - 0.7)).abs() < 1e-12);
    }
}
