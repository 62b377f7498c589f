//! Full-data IS-NMF by alternating multiplicative updates.
//!
//! One epoch visits every frame once: each column of `H` gets a single
//! multiplicative update against the current `W`, then `A` and `B` are
//! recomputed over the whole data set and `W = sqrt(A/B)`, followed by ℓ1
//! column normalization with `H` compensated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::{batch_stats, objective, update_h_in_place, update_w, Workspace};
use crate::matrix::NonnegMatrix;
use crate::model::{frobenius_delta, rescale_dictionary, Dictionary, SolverConfig};
use crate::report::{Stopwatch, TracePoint, TrainReport};

/// Relative objective increase treated as a broken descent guarantee.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct BatchState {
    pub w: NonnegMatrix,
    pub h: NonnegMatrix,
    pub epoch: usize,
    /// `||W_t - W_{t-1}||_F` of the last epoch.
    pub last_delta: Option<f64>,
    pub converged: bool,
    pub trace: TrainReport,
}

/// What a batch callback sees after each epoch (timer paused).
#[derive(Debug)]
pub struct BatchProgress<'a> {
    pub epoch: usize,
    pub seconds: f64,
    pub train_objective: f64,
    pub w: &'a NonnegMatrix,
    pub h: &'a NonnegMatrix,
}

/// Draws `k` frames uniformly with replacement, floors them at `epsilon` and
/// ℓ1-normalizes them into dictionary columns.
pub fn init_from_samples(v: &NonnegMatrix, k: usize, epsilon: f64, seed: u64) -> Result<NonnegMatrix> {
    let n = v.cols();
    if n == 0 || v.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(v.rows() * k);
    for _ in 0..k {
        let idx = rng.random_range(0..n);
        let column: Vec<f64> = v.col(idx).iter().map(|&x| x.max(epsilon)).collect();
        let sum: f64 = column.iter().sum();
        data.extend(column.into_iter().map(|x| x / sum));
    }
    Ok(NonnegMatrix::from_raw(v.rows(), k, data))
}

/// Constant activation scale `mean / (K · mean(W))`, floored at `epsilon`, so
/// that `W h` starts on the data's scale.
pub(crate) fn activation_scale(data_mean: f64, w: &NonnegMatrix, epsilon: f64) -> f64 {
    let scale = data_mean.max(epsilon) / (w.cols() as f64 * w.mean());
    if scale.is_finite() && scale > 0.0 {
        scale
    } else {
        1.0
    }
}

/// All-constant `H0` (K×N) at [`activation_scale`] of the whole data set.
pub fn default_h0(v: &NonnegMatrix, w: &NonnegMatrix, epsilon: f64) -> NonnegMatrix {
    let scale = activation_scale(v.mean(), w, epsilon);
    NonnegMatrix::from_raw(w.cols(), v.cols(), vec![scale; w.cols() * v.cols()])
}

/// Runs up to `config.budget` epochs, stopping early once
/// `||W_t - W_{t-1}||_F < eta`.
///
/// The callback runs after every epoch with the clock paused; whatever it
/// returns is recorded as that epoch's held-out objective.
pub fn batch_train<C>(
    v: &NonnegMatrix,
    config: &SolverConfig,
    w0: &NonnegMatrix,
    h0: &NonnegMatrix,
    mut callback: C,
) -> Result<BatchState>
where
    C: FnMut(&BatchProgress<'_>) -> Option<f64>,
{
    config.validate()?;
    let (f, n) = v.shape();
    let k = config.k;
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    w0.ensure_shape((f, k))?;
    h0.ensure_shape((k, n))?;
    if let Some(index) = w0.as_slice().iter().chain(h0.as_slice()).position(|&x| x <= 0.0) {
        return Err(Error::NonPositiveInit { index });
    }
    let eps = config.epsilon;
    let eta = config.eta_for(f, k);
    // Summation noise of an objective that has reached zero.
    let roundoff = (f * n) as f64 * f64::EPSILON;

    let mut w = w0.clone();
    let mut h = h0.clone();
    let mut trace = TrainReport::new(format!("batch-s{}", config.seed), config.seed, config.to_string());
    let mut clock = Stopwatch::new(config.clock);

    let mut previous = objective(v, &w, &h, eps)?;
    let heldout = callback(&BatchProgress {
        epoch: 0,
        seconds: 0.0,
        train_objective: previous,
        w: &w,
        h: &h,
    });
    trace.points.push(TracePoint {
        samples: 0,
        seconds: 0.0,
        train_objective: Some(previous),
        heldout_objective: heldout,
    });

    let mut ws = Workspace::new(f);
    let mut epoch = 0;
    let mut last_delta = None;
    let mut converged = false;
    while (epoch as u64) < config.budget {
        epoch += 1;
        clock.resume();
        for col in 0..n {
            update_h_in_place(v.col(col), &w, h.col_mut(col), 1, eps, &mut ws);
        }
        let stats = batch_stats(v, &w, &h, eps)?;
        let w_new = update_w(&stats.a, &stats.b, &w)?;
        let mut dict = Dictionary::new(w_new, stats.a, stats.b)?;
        rescale_dictionary(&mut dict, Some(&mut h))?;
        let (w_new, _, _) = dict.into_parts();
        let delta = frobenius_delta(&w_new, &w)?;
        w = w_new;
        clock.pause();
        let seconds = clock.seconds();

        let current = objective(v, &w, &h, eps)?;
        let slack = DIVERGENCE_TOLERANCE * previous.abs() + roundoff;
        if !current.is_finite() || current - previous > slack {
            return Err(Error::DivergedObjective {
                epoch,
                previous,
                current,
            });
        }
        previous = current;
        let heldout = callback(&BatchProgress {
            epoch,
            seconds,
            train_objective: current,
            w: &w,
            h: &h,
        });
        trace.points.push(TracePoint {
            samples: epoch as u64,
            seconds,
            train_objective: Some(current),
            heldout_objective: heldout,
        });
        last_delta = Some(delta);
        if delta < eta {
            converged = true;
            break;
        }
    }

    Ok(BatchState {
        w,
        h,
        epoch,
        last_delta,
        converged,
        trace,
    })
}
