//! Held-out fit of a frozen dictionary.

use crate::batch::activation_scale;
use crate::error::{Error, Result};
use crate::kernels::{is_term, update_h_in_place, Workspace};
use crate::matrix::NonnegMatrix;

pub const DEFAULT_EVAL_ITERS: usize = 100;

/// Mean per-frame smoothed IS divergence of `test` under `w`, each frame's
/// activation refit from a constant start with `inner_iters` updates.
///
/// `w` is only read.
pub fn evaluate_heldout(w: &NonnegMatrix, test: &NonnegMatrix, epsilon: f64, inner_iters: usize) -> Result<f64> {
    let (f, k) = w.shape();
    if test.rows() != f {
        return Err(Error::shape((f, test.cols()), test.shape()));
    }
    if test.cols() == 0 {
        return Err(Error::EmptyDataset);
    }
    if let Some(dead) = w.column_sums().iter().position(|&s| s <= 0.0) {
        return Err(Error::ZeroColumn(dead));
    }
    let mut ws = Workspace::new(f);
    let mut h = vec![0.0; k];
    let mut model = vec![0.0; f];
    let mut total = 0.0;
    for v in test.columns() {
        let mean = v.iter().sum::<f64>() / f as f64;
        h.fill(activation_scale(mean, w, epsilon));
        update_h_in_place(v, w, &mut h, inner_iters, epsilon, &mut ws);
        model.fill(epsilon);
        for (col, &hk) in w.columns().zip(&h) {
            model.iter_mut().zip(col).for_each(|(m, &x)| *m += x * hk);
        }
        total += v.iter().zip(&model).map(|(&y, &x)| is_term(epsilon + y, x)).sum::<f64>();
    }
    Ok(total / test.cols() as f64)
}
