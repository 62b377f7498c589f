//! Dictionary bundle, solver configuration and the column rescaling step.

use std::fmt;

use crate::error::{Error, Result};
use crate::matrix::NonnegMatrix;
use crate::report::ClockMode;

/// Dictionary `W` (F×K) together with the auxiliary statistics `A`, `B` that
/// summarize the data seen so far. `W = sqrt(A / B)` after every commit.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    w: NonnegMatrix,
    a: NonnegMatrix,
    b: NonnegMatrix,
}

impl Dictionary {
    pub fn new(w: NonnegMatrix, a: NonnegMatrix, b: NonnegMatrix) -> Result<Self> {
        a.ensure_shape(w.shape())?;
        b.ensure_shape(w.shape())?;
        Ok(Dictionary { w, a, b })
    }

    /// Statistics seeded so that `w` is already the fixed point of the update:
    /// `A = scale * w^2`, `B = scale`.
    pub fn with_prior(w: NonnegMatrix, scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::InvalidConfig(format!("statistic prior {scale} must be finite and >= 0")));
        }
        let (f, k) = w.shape();
        let a = NonnegMatrix::from_raw(f, k, w.as_slice().iter().map(|x| scale * x * x).collect());
        let b = NonnegMatrix::from_raw(f, k, vec![scale; f * k]);
        Ok(Dictionary { w, a, b })
    }

    pub fn w(&self) -> &NonnegMatrix {
        &self.w
    }

    pub fn a(&self) -> &NonnegMatrix {
        &self.a
    }

    pub fn b(&self) -> &NonnegMatrix {
        &self.b
    }

    pub fn shape(&self) -> (usize, usize) {
        self.w.shape()
    }

    pub fn into_parts(self) -> (NonnegMatrix, NonnegMatrix, NonnegMatrix) {
        (self.w, self.a, self.b)
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut NonnegMatrix, &mut NonnegMatrix, &mut NonnegMatrix) {
        (&mut self.w, &mut self.a, &mut self.b)
    }
}

/// Normalizes every column of `W` to unit ℓ1 norm.
///
/// For each atom `k` with column sum `s`: `W[:,k] /= s`, `A[:,k] /= s`,
/// `B[:,k] *= s`, and, when activations are supplied, `H[k,:] *= s`. The
/// product `W H` and the identity `W = sqrt(A/B)` are both preserved.
///
/// Returns the column sums `s` that were divided out. Nothing is modified if
/// any column sums to zero.
pub fn rescale_dictionary(dict: &mut Dictionary, warm_h: Option<&mut NonnegMatrix>) -> Result<Vec<f64>> {
    let k = dict.shape().1;
    if let Some(h) = warm_h.as_ref() {
        if h.rows() != k {
            return Err(Error::shape((k, h.cols()), h.shape()));
        }
    }
    let sums = dict.w.column_sums();
    if let Some(dead) = sums.iter().position(|&s| s <= 0.0) {
        return Err(Error::ZeroColumn(dead));
    }
    let (w, a, b) = dict.parts_mut();
    for (col, &s) in sums.iter().enumerate() {
        if s == 1.0 {
            continue;
        }
        w.col_mut(col).iter_mut().for_each(|x| *x /= s);
        a.col_mut(col).iter_mut().for_each(|x| *x /= s);
        b.col_mut(col).iter_mut().for_each(|x| *x *= s);
    }
    if let Some(h) = warm_h {
        scale_rows(h, &sums);
    }
    Ok(sums)
}

/// `W[:,k] /= s_k` and `H[k,:] *= s_k` without touching any statistics.
pub fn rescale_factors(w: &mut NonnegMatrix, h: &mut NonnegMatrix) -> Result<Vec<f64>> {
    if h.rows() != w.cols() {
        return Err(Error::shape((w.cols(), h.cols()), h.shape()));
    }
    let sums = w.column_sums();
    if let Some(dead) = sums.iter().position(|&s| s <= 0.0) {
        return Err(Error::ZeroColumn(dead));
    }
    for (col, &s) in sums.iter().enumerate() {
        w.col_mut(col).iter_mut().for_each(|x| *x /= s);
    }
    scale_rows(h, &sums);
    Ok(sums)
}

fn scale_rows(h: &mut NonnegMatrix, scales: &[f64]) {
    let k = h.rows();
    for n in 0..h.cols() {
        for (x, &s) in h.col_mut(n).iter_mut().zip(scales).take(k) {
            *x *= s;
        }
    }
}

/// Frobenius norm of `w_new - w_old`.
pub fn frobenius_delta(w_new: &NonnegMatrix, w_old: &NonnegMatrix) -> Result<f64> {
    w_new.ensure_shape(w_old.shape())?;
    Ok(w_new
        .as_slice()
        .iter()
        .zip(w_old.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestartMode {
    /// Reuse each sample's last activation as the inner solver's starting point.
    Warm,
    /// Start every inner solve from a fresh random point.
    Fresh,
}

impl RestartMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RestartMode::Warm => "warm",
            RestartMode::Fresh => "fresh",
        }
    }
}

impl std::str::FromStr for RestartMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "warm" => Ok(RestartMode::Warm),
            "fresh" => Ok(RestartMode::Fresh),
            other => Err(Error::InvalidConfig(format!("unknown restart mode {other:?}"))),
        }
    }
}

/// Hyperparameters shared by the batch and online trainers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Number of basis spectra.
    pub k: usize,
    /// Additive floor applied to data and model before every divergence.
    pub epsilon: f64,
    /// Stopping threshold on `||W_t - W_{t-1}||_F`; `None` picks `1e-6 * sqrt(F K)`.
    pub eta: Option<f64>,
    /// Mini-batch size (samples per dictionary commit).
    pub beta: usize,
    /// Forgetting base; past statistics are discounted by `r^(beta/N)` per commit.
    pub r: f64,
    /// Inner activation iterations; `None` means 1 for warm and 100 for fresh restarts.
    pub inner_iters: Option<usize>,
    pub restart: RestartMode,
    pub seed: u64,
    pub n_seeds: usize,
    /// Epochs for the batch trainer, samples for the online trainer.
    pub budget: u64,
    /// Scale of the initial statistics `A0 = delta W0^2`, `B0 = delta`.
    pub stat_prior: f64,
    /// Online trace cadence, in commits.
    pub trace_every: u64,
    pub clock: ClockMode,
}

impl SolverConfig {
    pub fn new(k: usize) -> Self {
        SolverConfig {
            k,
            epsilon: 1e-12,
            eta: None,
            beta: 1000,
            r: 0.7,
            inner_iters: None,
            restart: RestartMode::Warm,
            seed: 0,
            n_seeds: 5,
            budget: 500,
            stat_prior: 1.0,
            trace_every: 10,
            clock: ClockMode::Wall,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k < 1 {
            return bad("k must be at least 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon {} must be positive", self.epsilon));
        }
        if self.beta < 1 {
            return bad("beta must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.r) {
            return bad(format!("r {} must lie in [0, 1]", self.r));
        }
        if self.inner_iters == Some(0) {
            return bad("inner_iters must be at least 1".into());
        }
        if let Some(eta) = self.eta {
            if !(eta >= 0.0) {
                return bad(format!("eta {eta} must be >= 0"));
            }
        }
        if self.n_seeds < 1 {
            return bad("n_seeds must be at least 1".into());
        }
        if self.trace_every < 1 {
            return bad("trace_every must be at least 1".into());
        }
        if !(self.stat_prior >= 0.0 && self.stat_prior.is_finite()) {
            return bad(format!("stat_prior {} must be finite and >= 0", self.stat_prior));
        }
        Ok(())
    }

    pub fn eta_for(&self, f: usize, k: usize) -> f64 {
        self.eta.unwrap_or_else(|| 1e-6 * ((f * k) as f64).sqrt())
    }

    pub fn inner_iters(&self) -> usize {
        self.inner_iters.unwrap_or(match self.restart {
            RestartMode::Warm => 1,
            RestartMode::Fresh => 100,
        })
    }

    /// Per-commit forgetting factor `r^(beta/N)`; an unbounded stream gives 1.
    pub fn rho(&self, n: Option<usize>) -> f64 {
        match n {
            None => 1.0,
            Some(n) => self.r.powf(self.beta as f64 / n as f64),
        }
    }
}

impl fmt::Display for SolverConfig {
    /// Single-line `key=value` snapshot, used in report headers.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let eta = self.eta.map_or_else(|| "auto".to_string(), |e| e.to_string());
        write!(
            f,
            "k={} epsilon={} eta={} beta={} r={} inner_iters={} restart={} budget={} stat_prior={} trace_every={}",
            self.k,
            self.epsilon,
            eta,
            self.beta,
            self.r,
            self.inner_iters(),
            self.restart.as_str(),
            self.budget,
            self.stat_prior,
            self.trace_every
        )
    }
}
