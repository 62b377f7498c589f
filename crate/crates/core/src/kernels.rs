//! Numerical kernels for Itakura-Saito NMF.
//!
//! Every divergence is ε-smoothed: `d(ε + y, ε + x)`. The model of a frame is
//! `x = ε + W h`, and the majorization-minimization updates below are derived
//! for that model with `ε` treated as a fixed extra component.

use crate::error::{Error, Result};
use crate::matrix::NonnegMatrix;

/// Per-sample (or summed) auxiliary statistics, both F×K.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStats {
    pub a: NonnegMatrix,
    pub b: NonnegMatrix,
}

fn check_vec(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::shape((expected, 1), (found, 1)));
    }
    Ok(())
}

fn check_nonneg(values: &[f64]) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFiniteEntry { index });
        }
        if value < 0.0 {
            return Err(Error::NegativeInput { index, value });
        }
    }
    Ok(())
}

/// `Σ_i (ε+y_i)/(ε+x_i) - log((ε+y_i)/(ε+x_i)) - 1`.
pub fn is_divergence(y: &[f64], x: &[f64], epsilon: f64) -> Result<f64> {
    check_vec(y.len(), x.len())?;
    check_nonneg(y)?;
    check_nonneg(x)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon {epsilon} must be positive")));
    }
    Ok(y.iter().zip(x).map(|(&y, &x)| is_term(epsilon + y, epsilon + x)).sum())
}

/// One term `p/q - log(p/q) - 1`, written via `q' = (p - q)/q` for accuracy near p = q.
#[inline]
pub(crate) fn is_term(p: f64, q: f64) -> f64 {
    let u = (p - q) / q;
    (u - u.ln_1p()).max(0.0)
}

/// Fills `model` with `ε + W h`.
#[inline]
fn reconstruct(w: &[f64], f: usize, h: &[f64], epsilon: f64, model: &mut [f64]) {
    model.fill(epsilon);
    for (k, &hk) in h.iter().enumerate() {
        if hk == 0.0 {
            continue;
        }
        for (m, &wfk) in model.iter_mut().zip(&w[k * f..(k + 1) * f]) {
            *m += wfk * hk;
        }
    }
}

/// Scratch buffers for the activation solver, reused across samples.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    model: Vec<f64>,
    ratio: Vec<f64>,
    inv: Vec<f64>,
}

impl Workspace {
    pub fn new(f: usize) -> Self {
        Workspace {
            model: vec![0.0; f],
            ratio: vec![0.0; f],
            inv: vec![0.0; f],
        }
    }

    fn ensure(&mut self, f: usize) {
        if self.model.len() != f {
            *self = Workspace::new(f);
        }
    }
}

/// Runs `iters` multiplicative updates of `h` in place:
/// `h_k ← h_k · sqrt( Σ_f W_fk (ε+v_f)/x_f² / Σ_f W_fk/x_f )`, `x = ε + W h`.
///
/// Unchecked core shared by the trainers; shapes must already agree.
pub(crate) fn update_h_in_place(
    v: &[f64],
    w: &NonnegMatrix,
    h: &mut [f64],
    iters: usize,
    epsilon: f64,
    ws: &mut Workspace,
) {
    let f = w.rows();
    let wd = w.as_slice();
    ws.ensure(f);
    for _ in 0..iters {
        reconstruct(wd, f, h, epsilon, &mut ws.model);
        for ((r, i), (&m, &vf)) in ws.ratio.iter_mut().zip(ws.inv.iter_mut()).zip(ws.model.iter().zip(v)) {
            let inv = 1.0 / m;
            *i = inv;
            *r = (epsilon + vf) * inv * inv;
        }
        for (k, hk) in h.iter_mut().enumerate() {
            let col = &wd[k * f..(k + 1) * f];
            let mut num = 0.0;
            let mut den = 0.0;
            for ((&wfk, &r), &i) in col.iter().zip(&ws.ratio).zip(&ws.inv) {
                num += wfk * r;
                den += wfk * i;
            }
            if den > 0.0 {
                *hk *= (num / den).sqrt();
            }
        }
    }
}

/// Activation fit of one frame against a fixed dictionary, starting at `h0`.
pub fn solve_h(v: &[f64], w: &NonnegMatrix, h0: &[f64], iters: usize, epsilon: f64) -> Result<Vec<f64>> {
    check_vec(w.rows(), v.len())?;
    check_vec(w.cols(), h0.len())?;
    check_nonneg(v)?;
    if let Some(index) = h0.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::NonPositiveInit { index });
    }
    if let Some(dead) = w.column_sums().iter().position(|&s| s <= 0.0) {
        return Err(Error::ZeroColumn(dead));
    }
    let mut h = h0.to_vec();
    update_h_in_place(v, w, &mut h, iters, epsilon, &mut Workspace::new(w.rows()));
    Ok(h)
}

/// Adds one frame's statistics into the F×K accumulators and returns the
/// frame's divergence `d(ε+v, ε+Wh)` (a by-product of the same pass).
pub(crate) fn accumulate_stats(
    v: &[f64],
    w: &NonnegMatrix,
    h: &[f64],
    epsilon: f64,
    a: &mut [f64],
    b: &mut [f64],
    ws: &mut Workspace,
) -> f64 {
    let f = w.rows();
    let wd = w.as_slice();
    ws.ensure(f);
    reconstruct(wd, f, h, epsilon, &mut ws.model);
    let mut loss = 0.0;
    for ((r, i), (&m, &vf)) in ws.ratio.iter_mut().zip(ws.inv.iter_mut()).zip(ws.model.iter().zip(v)) {
        let inv = 1.0 / m;
        *i = inv;
        *r = (epsilon + vf) * inv * inv;
        loss += is_term(epsilon + vf, m);
    }
    for (k, &hk) in h.iter().enumerate() {
        if hk == 0.0 {
            continue;
        }
        let range = k * f..(k + 1) * f;
        let (ak, bk) = (&mut a[range.clone()], &mut b[range.clone()]);
        for ((((af, bf), &wfk), &r), &i) in ak.iter_mut().zip(bk.iter_mut()).zip(&wd[range]).zip(&ws.ratio).zip(&ws.inv) {
            *af += r * hk * wfk * wfk;
            *bf += hk * i;
        }
    }
    loss
}

/// `a_fk = (ε+v_f)/x_f² · h_k · W_fk²`, `b_fk = h_k / x_f` with `x = ε + W h`.
pub fn sample_stats(v: &[f64], w: &NonnegMatrix, h: &[f64], epsilon: f64) -> Result<SampleStats> {
    check_vec(w.rows(), v.len())?;
    check_vec(w.cols(), h.len())?;
    check_nonneg(v)?;
    check_nonneg(h)?;
    let (f, k) = w.shape();
    let mut a = vec![0.0; f * k];
    let mut b = vec![0.0; f * k];
    accumulate_stats(v, w, h, epsilon, &mut a, &mut b, &mut Workspace::new(f));
    Ok(SampleStats {
        a: NonnegMatrix::from_raw(f, k, a),
        b: NonnegMatrix::from_raw(f, k, b),
    })
}

/// Sum of [`sample_stats`] over every column of `v`, in O(FKN).
pub fn batch_stats(v: &NonnegMatrix, w: &NonnegMatrix, h: &NonnegMatrix, epsilon: f64) -> Result<SampleStats> {
    let (f, k) = w.shape();
    let n = v.cols();
    v.ensure_shape((f, n))?;
    h.ensure_shape((k, n))?;
    let mut a = vec![0.0; f * k];
    let mut b = vec![0.0; f * k];
    let mut ws = Workspace::new(f);
    for (vn, hn) in v.columns().zip(h.columns()) {
        accumulate_stats(vn, w, hn, epsilon, &mut a, &mut b, &mut ws);
    }
    Ok(SampleStats {
        a: NonnegMatrix::from_raw(f, k, a),
        b: NonnegMatrix::from_raw(f, k, b),
    })
}

/// Closed-form minimizer of `Σ a/W + b W`: `W = sqrt(a/b)`.
///
/// Entries with `a = b = 0` carry no information and keep their value from
/// `previous`.
pub fn update_w(a: &NonnegMatrix, b: &NonnegMatrix, previous: &NonnegMatrix) -> Result<NonnegMatrix> {
    b.ensure_shape(a.shape())?;
    previous.ensure_shape(a.shape())?;
    let rows = a.rows();
    let mut out = Vec::with_capacity(a.as_slice().len());
    for (idx, ((&af, &bf), &prev)) in a.as_slice().iter().zip(b.as_slice()).zip(previous.as_slice()).enumerate() {
        let value = if bf > 0.0 {
            (af / bf).sqrt()
        } else if af == 0.0 {
            prev
        } else {
            return Err(Error::InconsistentStats {
                row: idx % rows.max(1),
                col: idx / rows.max(1),
            });
        };
        if !value.is_finite() {
            return Err(Error::NonFiniteEntry { index: idx });
        }
        out.push(value);
    }
    Ok(NonnegMatrix::from_raw(a.rows(), a.cols(), out))
}

/// `Σ_fk a_fk / W_fk + b_fk W_fk`, without the constant term.
pub fn aux_value(a: &NonnegMatrix, b: &NonnegMatrix, w: &NonnegMatrix) -> Result<f64> {
    b.ensure_shape(a.shape())?;
    w.ensure_shape(a.shape())?;
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .zip(w.as_slice())
        .map(|((&a, &b), &w)| {
            let inverse = if a == 0.0 { 0.0 } else { a / w };
            inverse + b * w
        })
        .sum())
}

/// Constant `c` that makes `aux_value(A, B, W) + c` a tight majorizer of
/// `N · objective(V, W, H)` at `W = w_ref`:
///
/// `c = Σ_fn (ε+v)ε/x² + ε/x + log(x/(ε+v)) - 2`, with `x = ε + w_ref H`.
///
/// Diagnostic only; it never enters an update.
pub fn aux_constant(v: &NonnegMatrix, w_ref: &NonnegMatrix, h: &NonnegMatrix, epsilon: f64) -> Result<f64> {
    let (f, k) = w_ref.shape();
    let n = v.cols();
    v.ensure_shape((f, n))?;
    h.ensure_shape((k, n))?;
    let mut model = vec![0.0; f];
    let mut c = 0.0;
    for (vn, hn) in v.columns().zip(h.columns()) {
        reconstruct(w_ref.as_slice(), f, hn, epsilon, &mut model);
        for (&x, &vf) in model.iter().zip(vn) {
            let p = epsilon + vf;
            c += p * epsilon / (x * x) + epsilon / x + (x / p).ln() - 2.0;
        }
    }
    Ok(c)
}

/// Mean smoothed divergence `(1/N) Σ_n d(ε+v_n, ε+W h_n)`.
pub fn objective(v: &NonnegMatrix, w: &NonnegMatrix, h: &NonnegMatrix, epsilon: f64) -> Result<f64> {
    let (f, k) = w.shape();
    let n = v.cols();
    v.ensure_shape((f, n))?;
    h.ensure_shape((k, n))?;
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut model = vec![0.0; f];
    let mut total = 0.0;
    for (vn, hn) in v.columns().zip(h.columns()) {
        reconstruct(w.as_slice(), f, hn, epsilon, &mut model);
        total += vn.iter().zip(&model).map(|(&y, &x)| is_term(epsilon + y, x)).sum::<f64>();
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TINY: f64 = 1e-300;

    fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> NonnegMatrix {
        NonnegMatrix::from_fn(rows, cols, |_, _| rng.random_range(0.05..2.0)).unwrap()
    }

    /// Direct transcription of the unsmoothed definition, independent of `is_term`.
    fn naive_is(y: &[f64], x: &[f64]) -> f64 {
        y.iter().zip(x).map(|(y, x)| y / x - (y / x).ln() - 1.0).sum()
    }

    #[test]
    fn divergence_identical_is_zero() {
        let y = [0.3, 4.0, 1e-5, 0.0];
        assert_eq!(is_divergence(&y, &y, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn divergence_hand_value() {
        let d = is_divergence(&[1.0, 1.0], &[2.0, 2.0], TINY).unwrap();
        let expected = 2.0 * (0.5 + std::f64::consts::LN_2 - 1.0);
        assert!((d - expected).abs() < 1e-12);
        assert!((d - 0.386294).abs() < 1e-6);
    }

    #[test]
    fn divergence_errors() {
        assert!(matches!(is_divergence(&[1.0], &[1.0, 2.0], 1.0), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(is_divergence(&[-1.0], &[1.0], 1.0), Err(Error::NegativeInput { .. })));
    }

    proptest! {
        #[test]
        fn divergence_nonnegative_and_matches_naive(
            pairs in prop::collection::vec((1e-3f64..1e3, 1e-3f64..1e3), 1..20)
        ) {
            let (y, x): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let d = is_divergence(&y, &x, TINY).unwrap();
            prop_assert!(d >= 0.0);
            let reference = naive_is(&y, &x);
            prop_assert!((d - reference).abs() <= 1e-9 * (1.0 + reference));
        }

        #[test]
        fn divergence_scale_invariant(
            pairs in prop::collection::vec((1e-3f64..1e3, 1e-3f64..1e3), 1..20),
            lambda in 1e-3f64..1e3,
        ) {
            let eps = 1e-9;
            let (y, x): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let ys: Vec<f64> = y.iter().map(|v| v * lambda).collect();
            let xs: Vec<f64> = x.iter().map(|v| v * lambda).collect();
            let d = is_divergence(&y, &x, eps).unwrap();
            let ds = is_divergence(&ys, &xs, eps * lambda).unwrap();
            prop_assert!((d - ds).abs() <= 1e-10 * (1.0 + d));
        }
    }

    #[test]
    fn solve_h_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random(&mut rng, 6, 2);
        let h_star = [0.7, 1.3];
        let v = w.matmul(&NonnegMatrix::from_col_major(2, 1, h_star.to_vec()).unwrap()).unwrap();
        let h = solve_h(v.as_slice(), &w, &h_star, 5, TINY).unwrap();
        for (a, b) in h.iter().zip(&h_star) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_h_one_dimensional_optimum() {
        let w = NonnegMatrix::from_col_major(1, 1, vec![2.0]).unwrap();
        let h = solve_h(&[4.0], &w, &[0.1], 100, 1e-12).unwrap();
        assert!((h[0] - 2.0).abs() < 1e-6, "h = {}", h[0]);
    }

    #[test]
    fn solve_h_rejects_nonpositive_init() {
        let w = NonnegMatrix::filled(2, 2, 0.5).unwrap();
        assert!(matches!(
            solve_h(&[1.0, 1.0], &w, &[1.0, 0.0], 3, 1e-12),
            Err(Error::NonPositiveInit { index: 1 })
        ));
    }

    /// Log-grid search over h ∈ [1e-3, 1e3]², refined around the best cell.
    fn grid_oracle(v: &[f64], w: &NonnegMatrix, eps: f64) -> f64 {
        let eval = |h0: f64, h1: f64| {
            let x: Vec<f64> = (0..w.rows()).map(|f| w.get(f, 0) * h0 + w.get(f, 1) * h1).collect();
            is_divergence(v, &x, eps).unwrap()
        };
        let (mut lo0, mut hi0, mut lo1, mut hi1) = (-3.0f64, 3.0f64, -3.0f64, 3.0f64);
        let steps = 200;
        let mut best = f64::INFINITY;
        for _ in 0..6 {
            let (mut b0, mut b1) = (0.0, 0.0);
            for i in 0..=steps {
                let l0 = lo0 + (hi0 - lo0) * i as f64 / steps as f64;
                for j in 0..=steps {
                    let l1 = lo1 + (hi1 - lo1) * j as f64 / steps as f64;
                    let d = eval(10f64.powf(l0), 10f64.powf(l1));
                    if d < best {
                        best = d;
                        b0 = l0;
                        b1 = l1;
                    }
                }
            }
            let span0 = (hi0 - lo0) / steps as f64 * 4.0;
            let span1 = (hi1 - lo1) / steps as f64 * 4.0;
            lo0 = (b0 - span0).max(-3.0);
            hi0 = (b0 + span0).min(3.0);
            lo1 = (b1 - span1).max(-3.0);
            hi1 = (b1 + span1).min(3.0);
        }
        best
    }

    #[test]
    fn solve_h_matches_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..3 {
            let w = random(&mut rng, 5, 2);
            let v: Vec<f64> = (0..5).map(|_| rng.random_range(0.1..3.0)).collect();
            let eps = 1e-12;
            let h = solve_h(&v, &w, &[1.0, 1.0], 5000, eps).unwrap();
            let x: Vec<f64> = (0..5).map(|f| w.get(f, 0) * h[0] + w.get(f, 1) * h[1]).collect();
            let ours = is_divergence(&v, &x, eps).unwrap();
            let oracle = grid_oracle(&v, &w, eps);
            assert!(ours <= oracle + 1e-4, "solver {ours} vs grid {oracle}");
        }
    }

    #[test]
    fn solve_h_monotone_descent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let w = random(&mut rng, 8, 3);
            let v: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..5.0)).collect();
            let mut h = vec![rng.random_range(0.1..3.0), rng.random_range(0.1..3.0), rng.random_range(0.1..3.0)];
            let eps = 1e-12;
            let div = |h: &[f64]| {
                let x = w.matmul(&NonnegMatrix::from_col_major(3, 1, h.to_vec()).unwrap()).unwrap();
                is_divergence(&v, x.as_slice(), eps).unwrap()
            };
            let mut prev = div(&h);
            for _ in 0..50 {
                h = solve_h(&v, &w, &h, 1, eps).unwrap();
                let cur = div(&h);
                assert!(cur <= prev + 1e-10, "{cur} > {prev}");
                prev = cur;
            }
        }
    }

    #[test]
    fn sample_stats_hand_values() {
        let w = NonnegMatrix::from_col_major(1, 1, vec![2.0]).unwrap();
        let s = sample_stats(&[8.0], &w, &[1.0], TINY).unwrap();
        assert!((s.a.get(0, 0) - 8.0).abs() < 1e-12);
        assert!((s.b.get(0, 0) - 0.5).abs() < 1e-12);
        assert!(((s.a.get(0, 0) / s.b.get(0, 0)).sqrt() - 4.0).abs() < 1e-12);

        let w = NonnegMatrix::from_col_major(1, 1, vec![1.0]).unwrap();
        let s = sample_stats(&[0.0], &w, &[1.0], 1.0).unwrap();
        assert!((s.a.get(0, 0) - 0.25).abs() < 1e-15);
        assert!((s.b.get(0, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sample_stats_fixed_point_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = random(&mut rng, 7, 3);
        let h = [0.4, 0.0, 2.0];
        let v = w.matmul(&NonnegMatrix::from_col_major(3, 1, h.to_vec()).unwrap()).unwrap();
        let s = sample_stats(v.as_slice(), &w, &h, TINY).unwrap();
        for k in [0, 2] {
            for f in 0..7 {
                let ratio = (s.a.get(f, k) / s.b.get(f, k)).sqrt();
                assert!((ratio - w.get(f, k)).abs() < 1e-12);
            }
        }
        assert_eq!(s.a.col(1), &[0.0; 7]);
    }

    #[test]
    fn batch_stats_is_sum_of_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (f, k, n) = (6, 3, 9);
        let w = random(&mut rng, f, k);
        let h = random(&mut rng, k, n);
        let v = random(&mut rng, f, n);
        let eps = 1e-6;
        let total = batch_stats(&v, &w, &h, eps).unwrap();
        let mut a = vec![0.0; f * k];
        let mut b = vec![0.0; f * k];
        for col in 0..n {
            let s = sample_stats(v.col(col), &w, h.col(col), eps).unwrap();
            a.iter_mut().zip(s.a.as_slice()).for_each(|(x, y)| *x += y);
            b.iter_mut().zip(s.b.as_slice()).for_each(|(x, y)| *x += y);
        }
        for (x, y) in total.a.as_slice().iter().zip(&a).chain(total.b.as_slice().iter().zip(&b)) {
            assert!((x - y).abs() <= 1e-10 * y.abs());
        }

        let single = batch_stats(
            &v.select_columns(&[0]),
            &w,
            &h.select_columns(&[0]),
            eps,
        )
        .unwrap();
        assert_eq!(single, sample_stats(v.col(0), &w, h.col(0), eps).unwrap());
    }

    #[test]
    fn batch_stats_fixed_point_on_exact_factorization() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let w = random(&mut rng, 5, 3);
        let h = random(&mut rng, 3, 12);
        let v = w.matmul(&h).unwrap();
        let s = batch_stats(&v, &w, &h, TINY).unwrap();
        let updated = update_w(&s.a, &s.b, &w).unwrap();
        for (x, y) in updated.as_slice().iter().zip(w.as_slice()) {
            assert!((x - y).abs() < 1e-12 * y);
        }
    }

    #[test]
    fn update_w_simple_cases() {
        let ones = NonnegMatrix::filled(2, 3, 1.0).unwrap();
        let a = NonnegMatrix::filled(2, 3, 3.5).unwrap();
        assert_eq!(update_w(&a, &a, &ones).unwrap(), ones);
        let four = NonnegMatrix::filled(1, 1, 4.0).unwrap();
        let one = NonnegMatrix::filled(1, 1, 1.0).unwrap();
        assert_eq!(update_w(&four, &one, &one).unwrap().as_slice(), &[2.0]);
    }

    #[test]
    fn update_w_dead_and_inconsistent_entries() {
        let prev = NonnegMatrix::from_col_major(1, 2, vec![0.3, 0.7]).unwrap();
        let a = NonnegMatrix::from_col_major(1, 2, vec![0.0, 4.0]).unwrap();
        let b = NonnegMatrix::from_col_major(1, 2, vec![0.0, 1.0]).unwrap();
        assert_eq!(update_w(&a, &b, &prev).unwrap().as_slice(), &[0.3, 2.0]);
        let b = NonnegMatrix::from_col_major(1, 2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            update_w(&a, &b, &prev),
            Err(Error::InconsistentStats { row: 0, col: 1 })
        ));
    }

    #[test]
    fn update_w_is_auxiliary_argmin() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let a = random(&mut rng, 4, 3);
            let b = random(&mut rng, 4, 3);
            let w = update_w(&a, &b, &a).unwrap();
            let base = aux_value(&a, &b, &w).unwrap();
            for idx in 0..12 {
                for factor in [0.99, 1.01] {
                    let mut data = w.as_slice().to_vec();
                    data[idx] *= factor;
                    let probe = NonnegMatrix::from_col_major(4, 3, data).unwrap();
                    assert!(aux_value(&a, &b, &probe).unwrap() > base);
                }
            }
        }
    }

    #[test]
    fn aux_value_unit() {
        let one = NonnegMatrix::filled(1, 1, 1.0).unwrap();
        assert_eq!(aux_value(&one, &one, &one).unwrap(), 2.0);
    }

    #[test]
    fn objective_zero_on_exact_factorization() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let w = random(&mut rng, 5, 2);
        let h = random(&mut rng, 2, 4);
        let v = w.matmul(&h).unwrap();
        assert!(objective(&v, &w, &h, TINY).unwrap() < 1e-24);
    }

    #[test]
    fn majorization_tight_and_above() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for eps in [1e-12, 0.3] {
            let (f, k, n) = (6, 3, 5);
            let w_ref = random(&mut rng, f, k);
            let h = random(&mut rng, k, n);
            let v = random(&mut rng, f, n);
            let stats = batch_stats(&v, &w_ref, &h, eps).unwrap();
            let c = aux_constant(&v, &w_ref, &h, eps).unwrap();
            let at_ref = aux_value(&stats.a, &stats.b, &w_ref).unwrap() + c;
            let target = n as f64 * objective(&v, &w_ref, &h, eps).unwrap();
            assert!((at_ref - target).abs() <= 1e-8 * target.abs());
            for _ in 0..50 {
                let w = random(&mut rng, f, k);
                let bound = aux_value(&stats.a, &stats.b, &w).unwrap() + c;
                let actual = n as f64 * objective(&v, &w, &h, eps).unwrap();
                assert!(bound >= actual - 1e-9 * actual.abs());
            }
        }
    }
}
