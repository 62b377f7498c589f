//! Streaming IS-NMF with mini-batches and a forgetting factor.
//!
//! Each sample gets an activation fit against the current dictionary and
//! contributes `a_t`, `b_t` to pending accumulators. Every `beta` samples the
//! statistics are committed:
//!
//! ```text
//! A ← rho·A + Σ a_s      B ← rho·B + Σ b_s      W ← sqrt(A/B)
//! ```
//!
//! followed by ℓ1 column normalization of `W` (with `A`, `B` and, under warm
//! restarts, the stored activations compensated). The discount multiplies the
//! past statistics, so a mini-batch committed `j` commits ago carries weight
//! `rho^j`; with `beta = N` and `rho = 0` a commit reproduces one batch epoch.

mod checkpoint;
mod source;

pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use source::{
    write_chunk, ChunkedFrameReader, Draw, FiniteCycling, FrameStream, MatrixStream, SampleSource, StreamSource,
    MIN_STREAM_BUFFER,
};

use rand::Rng;

use crate::batch::{activation_scale, default_h0};
use crate::error::{Error, Result};
use crate::kernels::{accumulate_stats, objective, update_h_in_place, update_w, Workspace};
use crate::matrix::NonnegMatrix;
use crate::model::{frobenius_delta, rescale_dictionary, Dictionary, RestartMode, SolverConfig};
use crate::report::{Stopwatch, TracePoint, TrainReport};
use crate::rng::{derived, Domain};

/// Result of a dictionary commit.
#[derive(Debug, Clone, PartialEq)]
pub struct CommitOutcome {
    /// `||W_new - W_old||_F`.
    pub delta: f64,
    /// Column sums of `sqrt(A/B)` before normalization.
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// `d(ε + v_t, ε + W h_t)` at the fitted activation.
    pub loss: f64,
    pub commit: Option<CommitOutcome>,
}

#[derive(Debug, Clone)]
pub struct OnlineState {
    pub(crate) dict: Dictionary,
    pub(crate) t: u64,
    pub(crate) commits: u64,
    pub(crate) pending_a: Vec<f64>,
    pub(crate) pending_b: Vec<f64>,
    pub(crate) warm_h: Option<NonnegMatrix>,
    pub(crate) rho: f64,
    pub(crate) seed: u64,
    pub(crate) restart: RestartMode,
    pub(crate) last_delta: Option<f64>,
    /// Sum and count of per-sample losses since the last trace point.
    pub(crate) window_loss: f64,
    pub(crate) window_count: u64,
    pub trace: TrainReport,
    ws: Workspace,
    h_buf: Vec<f64>,
}

/// What an online callback sees at each trace point (timer paused).
#[derive(Debug)]
pub struct OnlineProgress<'a> {
    pub samples: u64,
    pub commits: u64,
    pub seconds: f64,
    pub train_objective: Option<f64>,
    pub state: &'a OnlineState,
}

impl OnlineState {
    /// Fresh state around `w0` with `A0 = delta·W0²`, `B0 = delta`
    /// (`delta = config.stat_prior`). `dataset_len` is `None` for an
    /// unbounded stream, which makes `rho = 1`.
    pub fn new(w0: NonnegMatrix, config: &SolverConfig, dataset_len: Option<usize>) -> Result<Self> {
        config.validate()?;
        if w0.cols() != config.k {
            return Err(Error::shape((w0.rows(), config.k), w0.shape()));
        }
        if dataset_len == Some(0) {
            return Err(Error::EmptyDataset);
        }
        let (f, k) = w0.shape();
        let dict = Dictionary::with_prior(w0, config.stat_prior)?;
        Ok(OnlineState {
            dict,
            t: 0,
            commits: 0,
            pending_a: vec![0.0; f * k],
            pending_b: vec![0.0; f * k],
            warm_h: None,
            rho: config.rho(dataset_len),
            seed: config.seed,
            restart: config.restart,
            last_delta: None,
            window_loss: 0.0,
            window_count: 0,
            trace: TrainReport::new(stage_name(config), config.seed, config.to_string()),
            ws: Workspace::new(f),
            h_buf: vec![0.0; k],
        })
    }

    /// Installs the stored activations used by warm restarts (K×N).
    pub fn with_warm_start(mut self, h0: NonnegMatrix) -> Result<Self> {
        if h0.rows() != self.dict.shape().1 {
            return Err(Error::shape((self.dict.shape().1, h0.cols()), h0.shape()));
        }
        self.warm_h = Some(h0);
        Ok(self)
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn w(&self) -> &NonnegMatrix {
        self.dict.w()
    }

    pub fn samples_seen(&self) -> u64 {
        self.t
    }

    pub fn commits(&self) -> u64 {
        self.commits
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn restart(&self) -> RestartMode {
        self.restart
    }

    pub fn warm_h(&self) -> Option<&NonnegMatrix> {
        self.warm_h.as_ref()
    }

    pub fn last_delta(&self) -> Option<f64> {
        self.last_delta
    }

    pub fn pending_a(&self) -> &[f64] {
        &self.pending_a
    }

    pub fn pending_b(&self) -> &[f64] {
        &self.pending_b
    }

    /// Fits `h_t` for one sample, accumulates its statistics and commits the
    /// dictionary when `t` reaches a multiple of `beta`.
    ///
    /// Warm restarts start from (and write back to) column `index` of the
    /// stored activations; fresh restarts start from a random positive point
    /// determined by `(seed, t)`.
    pub fn online_step(&mut self, frame: &[f64], index: Option<usize>, config: &SolverConfig) -> Result<StepOutcome> {
        let (f, k) = self.dict.shape();
        if frame.len() != f {
            return Err(Error::shape((f, 1), (frame.len(), 1)));
        }
        let iters = config.inner_iters();
        let eps = config.epsilon;
        let mut h = std::mem::take(&mut self.h_buf);
        h.resize(k, 0.0);
        match self.restart {
            RestartMode::Warm => {
                let (Some(warm), Some(index)) = (self.warm_h.as_ref(), index) else {
                    self.h_buf = h;
                    return Err(Error::InvalidConfig(
                        "warm restarts need stored activations and indexed samples".into(),
                    ));
                };
                if index >= warm.cols() {
                    self.h_buf = h;
                    return Err(Error::shape((k, index + 1), warm.shape()));
                }
                h.copy_from_slice(warm.col(index));
            }
            RestartMode::Fresh => {
                let mean = frame.iter().sum::<f64>() / f as f64;
                let scale = activation_scale(mean, self.dict.w(), eps);
                let mut rng = derived(self.seed, Domain::FreshActivation, self.t);
                for x in h.iter_mut() {
                    *x = (1.0 - rng.random::<f64>()) * scale;
                }
            }
        }
        update_h_in_place(frame, self.dict.w(), &mut h, iters, eps, &mut self.ws);
        if let (RestartMode::Warm, Some(warm), Some(index)) = (self.restart, self.warm_h.as_mut(), index) {
            warm.col_mut(index).copy_from_slice(&h);
        }
        let outcome = self.observe_with_activation(frame, &h, config);
        self.h_buf = h;
        outcome
    }

    /// Accumulates a sample whose activation was computed by the caller, then
    /// applies the mini-batch gate exactly like [`online_step`](Self::online_step).
    pub fn observe_with_activation(&mut self, frame: &[f64], h: &[f64], config: &SolverConfig) -> Result<StepOutcome> {
        let (f, k) = self.dict.shape();
        if frame.len() != f || h.len() != k {
            return Err(Error::shape((f, k), (frame.len(), h.len())));
        }
        let loss = accumulate_stats(
            frame,
            self.dict.w(),
            h,
            config.epsilon,
            &mut self.pending_a,
            &mut self.pending_b,
            &mut self.ws,
        );
        self.window_loss += loss;
        self.window_count += 1;
        self.t += 1;
        let commit = if self.t.is_multiple_of(config.beta as u64) {
            Some(self.dictionary_commit()?)
        } else {
            None
        };
        Ok(StepOutcome { loss, commit })
    }

    /// `A ← rho·A + Σa`, `B ← rho·B + Σb`, `W ← sqrt(A/B)` (entries with no
    /// statistics keep their old value), then ℓ1 normalization. Pending
    /// accumulators are cleared. On error the state is left untouched.
    pub fn dictionary_commit(&mut self) -> Result<CommitOutcome> {
        let (f, k) = self.dict.shape();
        let rho = self.rho;
        let blend = |old: &NonnegMatrix, pending: &[f64]| {
            let data = old.as_slice().iter().zip(pending).map(|(o, p)| rho * o + p).collect();
            NonnegMatrix::from_raw(f, k, data)
        };
        let a = blend(self.dict.a(), &self.pending_a);
        let b = blend(self.dict.b(), &self.pending_b);
        let w_new = update_w(&a, &b, self.dict.w())?;
        let mut dict = Dictionary::new(w_new, a, b)?;
        // rescale_dictionary validates before touching the activations
        let scales = rescale_dictionary(&mut dict, self.warm_h.as_mut())?;
        let delta = frobenius_delta(dict.w(), self.dict.w())?;

        self.dict = dict;
        self.pending_a.fill(0.0);
        self.pending_b.fill(0.0);
        self.commits += 1;
        self.last_delta = Some(delta);
        Ok(CommitOutcome { delta, scales })
    }

    fn take_window_mean(&mut self) -> Option<f64> {
        if self.window_count == 0 {
            return None;
        }
        let mean = self.window_loss / self.window_count as f64;
        self.window_loss = 0.0;
        self.window_count = 0;
        Some(mean)
    }

    /// Training objective reported at a trace point: the full objective over
    /// the data set when stored activations exist, otherwise the mean
    /// per-sample loss since the previous trace point.
    fn trace_objective(&mut self, dataset: Option<&NonnegMatrix>, epsilon: f64) -> Result<Option<f64>> {
        match (dataset, self.warm_h.as_ref()) {
            (Some(v), Some(h)) => {
                self.window_loss = 0.0;
                self.window_count = 0;
                Ok(Some(objective(v, self.dict.w(), h, epsilon)?))
            }
            _ => Ok(self.take_window_mean()),
        }
    }
}

fn stage_name(config: &SolverConfig) -> String {
    format!("online-{}-r{}-b{}-s{}", config.restart.as_str(), config.r, config.beta, config.seed)
}

/// Trains from `w0` over `source` until the stopping rule
/// `||W_t - W_{t-1}||_F < eta` holds at a commit, the sample budget
/// (`config.budget`) is spent, or the source runs dry.
///
/// Warm restarts need a finite source; the stored activations start at the
/// same constant level as the batch trainer's.
pub fn online_train<S, C>(source: &mut S, config: &SolverConfig, w0: &NonnegMatrix, callback: C) -> Result<OnlineState>
where
    S: SampleSource + ?Sized,
    C: FnMut(&OnlineProgress<'_>) -> Option<f64>,
{
    config.validate()?;
    let f = source.frame_len();
    w0.ensure_shape((f, config.k))?;
    if let Some(index) = w0.as_slice().iter().position(|&x| !(x > 0.0)) {
        return Err(Error::NonPositiveInit { index });
    }
    if let Some(col) = w0.column_sums().iter().position(|s| (s - 1.0).abs() > 1e-9) {
        return Err(Error::InvalidConfig(format!("initial dictionary column {col} is not l1-normalized")));
    }
    let mut state = OnlineState::new(w0.clone(), config, source.dataset_len())?;
    if config.restart == RestartMode::Warm {
        let data = source
            .dataset()
            .ok_or_else(|| Error::InvalidConfig("warm restarts need a finite data set".into()))?;
        let h0 = default_h0(data, w0, config.epsilon);
        state = state.with_warm_start(h0)?;
    }
    resume_online(state, source, config, callback)
}

/// Continues training from an existing state (for example one restored from a
/// checkpoint). The source is first positioned at the state's sample count.
pub fn resume_online<S, C>(
    mut state: OnlineState,
    source: &mut S,
    config: &SolverConfig,
    mut callback: C,
) -> Result<OnlineState>
where
    S: SampleSource + ?Sized,
    C: FnMut(&OnlineProgress<'_>) -> Option<f64>,
{
    config.validate()?;
    if state.restart != config.restart {
        return Err(Error::InvalidConfig("restart mode differs from the state's".into()));
    }
    let (f, _) = state.dict.shape();
    if source.frame_len() != f {
        return Err(Error::shape((f, 1), (source.frame_len(), 1)));
    }
    let eta = config.eta_for(f, config.k);
    source.skip_to(state.t)?;
    let mut clock = Stopwatch::new(config.clock);
    let mut frame = vec![0.0; f];

    let record = |state: &mut OnlineState, clock: &mut Stopwatch, source: &S, callback: &mut C, seconds: Option<f64>| -> Result<()> {
        let seconds = seconds.unwrap_or_else(|| clock.seconds());
        let train = state.trace_objective(source.dataset(), config.epsilon)?;
        let heldout = callback(&OnlineProgress {
            samples: state.t,
            commits: state.commits,
            seconds,
            train_objective: train,
            state,
        });
        state.trace.points.push(TracePoint {
            samples: state.t,
            seconds,
            train_objective: train,
            heldout_objective: heldout,
        });
        Ok(())
    };

    if state.trace.points.is_empty() {
        if state.t > 0 {
            state.trace = TrainReport::new(format!("{}-from{}", stage_name(config), state.t), state.seed, config.to_string());
        }
        record(&mut state, &mut clock, source, &mut callback, Some(0.0))?;
    }

    while state.t < config.budget {
        clock.resume();
        let Some(draw) = source.next_into(&mut frame)? else {
            break;
        };
        let outcome = state.online_step(&frame, draw.index, config)?;
        let Some(commit) = outcome.commit else {
            continue;
        };
        clock.pause();
        let stop = commit.delta < eta;
        if state.commits.is_multiple_of(config.trace_every) || stop {
            record(&mut state, &mut clock, source, &mut callback, None)?;
        }
        if stop {
            break;
        }
    }
    clock.pause();
    if state.trace.points.last().is_some_and(|p| p.samples != state.t) {
        record(&mut state, &mut clock, source, &mut callback, None)?;
    }
    Ok(state)
}
