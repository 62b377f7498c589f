//! Nonnegative matrix factorization under the Itakura-Saito divergence.
//!
//! The crate provides
//!
//! - the divergence, activation and dictionary kernels ([`kernels`]),
//! - a full-data trainer ([`batch_train`]),
//! - a streaming trainer with mini-batches, forgetting and checkpoints
//!   ([`online_train`], [`OnlineState`]),
//! - an STFT power-spectrogram front end for WAV audio ([`audio`]),
//! - held-out evaluation, multi-seed experiments and CSV traces.
//!
//! Matrices are column-major [`NonnegMatrix`] values; columns of the data
//! matrix are frames.

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod batch;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod kernels;
pub mod matrix;
pub mod model;
pub mod online;
pub mod report;
mod rng;
pub mod synth;

pub use audio::{ingest_files, load_audio, stft_power, FrameMeta, SpectrogramDataset};
pub use batch::{batch_train, default_h0, init_from_samples, BatchProgress, BatchState};
pub use error::{Error, ErrorClass, Result};
pub use eval::{evaluate_heldout, DEFAULT_EVAL_ITERS};
pub use experiment::{run_experiment, Experiment, GridPoint, GridResult, Mode};
pub use kernels::{
    aux_constant, aux_value, batch_stats, is_divergence, objective, sample_stats, solve_h, update_w, SampleStats,
};
pub use matrix::NonnegMatrix;
pub use model::{frobenius_delta, rescale_dictionary, rescale_factors, Dictionary, RestartMode, SolverConfig};
pub use online::{
    online_train, resume_online, ChunkedFrameReader, FiniteCycling, FrameStream, OnlineProgress, OnlineState,
    SampleSource, StreamSource,
};
pub use report::{read_csv, write_csv, ClockMode, Stopwatch, TracePoint, TrainReport};
pub use synth::SyntheticSpec;
