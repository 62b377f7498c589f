//! `isnmf`: prepare spectrogram data sets, train IS-NMF dictionaries in batch
//! or online mode, evaluate them on held-out frames and summarize traces.
//!
//! Exit codes: 0 success, 2 bad arguments, 3 data error, 4 numerical failure.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use isnmf::audio::{ingest_files, DEFAULT_HOP, DEFAULT_SILENCE_DB, DEFAULT_WINDOW};
use isnmf::online::{ChunkedFrameReader, FrameStream, StreamSource};
use isnmf::report::HELDOUT_METRIC;
use isnmf::{
    evaluate_heldout, init_from_samples, online_train, read_csv, resume_online, run_experiment, write_csv,
    ClockMode, Error, ErrorClass, Experiment, FiniteCycling, Mode, NonnegMatrix, OnlineState, RestartMode,
    SolverConfig, SyntheticSpec, TrainReport, DEFAULT_EVAL_ITERS,
};

#[derive(Parser)]
#[command(name = "isnmf", version, about = "Itakura-Saito NMF: batch and online training on power spectrograms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a power-spectrogram data set from WAV files.
    Spectrogram {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, default_value_t = DEFAULT_HOP)]
        hop: usize,
        #[arg(long, default_value_t = DEFAULT_SILENCE_DB, allow_hyphen_values = true)]
        silence_db: f64,
    },
    /// Train a dictionary with full-data multiplicative updates.
    TrainBatch {
        dataset: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Maximum number of epochs.
        #[arg(long, default_value_t = 500)]
        max_epochs: u64,
    },
    /// Train a dictionary online; `-` reads chunked frames from standard input.
    TrainOnline {
        dataset: String,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.7)]
        r: f64,
        #[arg(long, default_value_t = 1000)]
        beta: usize,
        #[arg(long, default_value = "warm")]
        restart: RestartMode,
        /// Defaults to 1 for warm and 100 for fresh restarts.
        #[arg(long)]
        inner_iters: Option<usize>,
        /// Samples to process; defaults to 10 passes over a data set, or the
        /// whole stream.
        #[arg(long)]
        budget: Option<u64>,
        /// Trace cadence in dictionary commits.
        #[arg(long, default_value_t = 10)]
        trace_every: u64,
        /// Frame length of a standard-input stream.
        #[arg(long, default_value_t = DEFAULT_WINDOW / 2 + 1)]
        bins: usize,
        /// Write the final training state here.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Continue from a saved training state.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Mean per-frame divergence of a held-out data set under a dictionary.
    Evaluate {
        model: PathBuf,
        test: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EVAL_ITERS)]
        inner_iters: usize,
        #[arg(long, default_value_t = 1e-12)]
        epsilon: f64,
    },
    /// Summarize a CSV trace: final objectives and time to a held-out target.
    Report {
        trace: PathBuf,
        /// Held-out target; defaults to 1% above the best final held-out value.
        #[arg(long)]
        target: Option<f64>,
    },
    /// Write a synthetic data set `W* H*` with multiplicative noise.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        f: usize,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Independent draw from the same dictionary (e.g. 1 for a test set).
        #[arg(long, default_value_t = 0)]
        stream: u64,
        /// Also write the generating dictionary.
        #[arg(long)]
        dictionary: Option<PathBuf>,
        /// Write the chunked stream format instead of a matrix file.
        #[arg(long)]
        chunked: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 1e-12)]
    epsilon: f64,
    /// Number of seeds; the run with the lowest final training objective wins.
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Held-out data set evaluated at every trace point.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_EVAL_ITERS)]
    eval_iters: usize,
    /// Dictionary output (best seed).
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV trace output (all seeds).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Count one millisecond per clock reading instead of real time.
    #[arg(long)]
    virtual_clock: bool,
}

impl Common {
    fn config(&self) -> SolverConfig {
        let mut c = SolverConfig::new(self.k);
        c.eta = self.eta;
        c.epsilon = self.epsilon;
        c.n_seeds = self.seeds;
        c.seed = self.seed;
        c.clock = if self.virtual_clock {
            ClockMode::Virtual
        } else {
            ClockMode::Wall
        };
        c
    }

    fn test_set(&self) -> Result<Option<NonnegMatrix>, Error> {
        self.test.as_ref().map(NonnegMatrix::load).transpose()
    }
}

fn bad_args(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn exit_code(err: &Error) -> u8 {
    match err.class() {
        ErrorClass::Argument => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Spectrogram {
            inputs,
            out,
            window,
            hop,
            silence_db,
        } => {
            let ds = ingest_files(&inputs, window, hop, silence_db)?;
            ds.save(&out)?;
            eprintln!(
                "{} frames x {} bins at {} Hz ({} silent frames discarded) -> {}",
                ds.frames.cols(),
                ds.frames.rows(),
                ds.sample_rate,
                ds.discarded_count,
                out.display()
            );
            Ok(())
        }
        Command::TrainBatch {
            dataset,
            common,
            max_epochs,
        } => {
            let mut config = common.config();
            config.budget = max_epochs;
            let train = NonnegMatrix::load(&dataset)?;
            let test = common.test_set()?;
            let mut experiment = Experiment::new(Mode::Batch, config);
            experiment.eval_iters = common.eval_iters;
            let result = run_experiment(&train, test.as_ref(), &experiment)?.remove(0);
            finish(&common, result.runs, result.best, &result.best_w)
        }
        Command::TrainOnline {
            dataset,
            common,
            r,
            beta,
            restart,
            inner_iters,
            budget,
            trace_every,
            bins,
            checkpoint,
            resume,
        } => {
            let mut config = common.config();
            config.r = r;
            config.beta = beta;
            config.restart = restart;
            config.inner_iters = inner_iters;
            config.trace_every = trace_every;
            config.validate()?;
            let test = common.test_set()?;
            if dataset == "-" {
                config.budget = budget.unwrap_or(u64::MAX);
                let input = std::io::stdin().lock();
                return train_stream(ChunkedFrameReader::new(input, bins), &common, config, test, checkpoint, resume);
            }
            let train = NonnegMatrix::load(&dataset)?;
            config.budget = budget.unwrap_or(10 * train.cols() as u64);
            if checkpoint.is_some() || resume.is_some() {
                if config.n_seeds != 1 {
                    return Err(bad_args("--checkpoint and --resume need --seeds 1"));
                }
                let mut source = FiniteCycling::new(&train, config.seed)?;
                let state = match &resume {
                    Some(path) => resume_online(load_state(path, &config)?, &mut source, &config, heldout(&test, &common))?,
                    None => {
                        let w0 = init_from_samples(&train, config.k, config.epsilon, config.seed)?;
                        online_train(&mut source, &config, &w0, heldout(&test, &common))?
                    }
                };
                return finish_state(&common, state, checkpoint.as_deref());
            }
            let mut experiment = Experiment::new(Mode::Online, config);
            experiment.eval_iters = common.eval_iters;
            let result = run_experiment(&train, test.as_ref(), &experiment)?.remove(0);
            finish(&common, result.runs, result.best, &result.best_w)
        }
        Command::Evaluate {
            model,
            test,
            inner_iters,
            epsilon,
        } => {
            let w = NonnegMatrix::load(&model)?;
            let test = NonnegMatrix::load(&test)?;
            let value = evaluate_heldout(&w, &test, epsilon, inner_iters)?;
            println!("{HELDOUT_METRIC} {value}");
            Ok(())
        }
        Command::Report { trace, target } => report(&trace, target),
        Command::Synth {
            out,
            f,
            k,
            n,
            noise,
            seed,
            stream,
            dictionary,
            chunked,
        } => {
            let spec = SyntheticSpec::new(f, k, noise, seed);
            let (v, _) = spec.generate(n, stream)?;
            if chunked {
                let mut w = BufWriter::new(File::create(&out)?);
                isnmf::online::write_chunk(&mut w, &v)?;
                w.flush()?;
            } else {
                v.save(&out)?;
            }
            if let Some(path) = dictionary {
                spec.dictionary()?.save(path)?;
            }
            eprintln!("{n} frames x {f} bins -> {}", out.display());
            Ok(())
        }
    }
}

fn heldout<'a>(
    test: &'a Option<NonnegMatrix>,
    common: &'a Common,
) -> impl FnMut(&isnmf::OnlineProgress<'_>) -> Option<f64> + 'a {
    move |p| {
        let test = test.as_ref()?;
        evaluate_heldout(p.state.w(), test, common.epsilon, common.eval_iters).ok()
    }
}

fn load_state(path: &Path, config: &SolverConfig) -> Result<OnlineState, Error> {
    let state = OnlineState::load_checkpoint(path)?;
    if state.w().cols() != config.k {
        return Err(bad_args(format!("checkpoint has k={}, not {}", state.w().cols(), config.k)));
    }
    Ok(state)
}

/// Serves frames already read (to pick the initial dictionary) before the rest
/// of the stream.
struct Prefetched<S> {
    head: NonnegMatrix,
    next: usize,
    rest: S,
}

impl<S: FrameStream> FrameStream for Prefetched<S> {
    fn frame_len(&self) -> usize {
        self.rest.frame_len()
    }

    fn read_frame(&mut self, out: &mut [f64]) -> isnmf::Result<bool> {
        if self.next < self.head.cols() {
            out.copy_from_slice(self.head.col(self.next));
            self.next += 1;
            return Ok(true);
        }
        self.rest.read_frame(out)
    }
}

fn train_stream<R: Read>(
    mut reader: ChunkedFrameReader<R>,
    common: &Common,
    config: SolverConfig,
    test: Option<NonnegMatrix>,
    checkpoint: Option<PathBuf>,
    resume: Option<PathBuf>,
) -> Result<(), Error> {
    if config.n_seeds != 1 {
        return Err(bad_args("a standard-input stream can be read only once: use --seeds 1"));
    }
    if config.restart == RestartMode::Warm {
        return Err(bad_args("warm restarts need a finite data set: use --restart fresh with a stream"));
    }
    let f = reader.frame_len();
    let state = match &resume {
        Some(path) => {
            let state = load_state(path, &config)?;
            let mut source = StreamSource::new(reader, config.beta, config.seed);
            resume_online(state, &mut source, &config, heldout(&test, common))?
        }
        None => {
            let mut head = Vec::new();
            let mut frame = vec![0.0; f];
            while head.len() < config.beta.max(config.k) * f && reader.read_frame(&mut frame)? {
                head.extend_from_slice(&frame);
            }
            if head.is_empty() {
                return Err(Error::EmptyDataset);
            }
            let head = NonnegMatrix::from_col_major(f, head.len() / f, head)?;
            let w0 = init_from_samples(&head, config.k, config.epsilon, config.seed)?;
            let stream = Prefetched { head, next: 0, rest: reader };
            let mut source = StreamSource::new(stream, config.beta, config.seed);
            online_train(&mut source, &config, &w0, heldout(&test, common))?
        }
    };
    finish_state(common, state, checkpoint.as_deref())
}

fn finish_state(common: &Common, state: OnlineState, checkpoint: Option<&Path>) -> Result<(), Error> {
    if let Some(path) = checkpoint {
        state.save_checkpoint(path)?;
    }
    let w = state.w().clone();
    finish(common, vec![state.trace], 0, &w)
}

fn finish(common: &Common, mut runs: Vec<TrainReport>, best: usize, w: &NonnegMatrix) -> Result<(), Error> {
    if let Some(out) = &common.out {
        w.save(out)?;
        runs[best].model_path = Some(out.display().to_string());
    }
    for (i, r) in runs.iter().enumerate() {
        let last = r.last();
        eprintln!(
            "{}{} seed={} points={} samples={} train_obj={} heldout_obj={}",
            if i == best { "* " } else { "  " },
            r.stage,
            r.seed,
            r.points.len(),
            last.map_or(0, |p| p.samples),
            fmt_opt(r.final_train_objective()),
            fmt_opt(r.final_heldout_objective())
        );
    }
    if let Some(path) = &common.trace {
        let mut out = BufWriter::new(File::create(path)?);
        write_csv(&runs, &mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

fn report(path: &Path, target: Option<f64>) -> Result<(), Error> {
    let reports = read_csv(BufReader::new(File::open(path)?))?;
    if reports.is_empty() {
        return Err(Error::MalformedReport("trace holds no reports".into()));
    }
    let target = target.or_else(|| {
        reports
            .iter()
            .filter_map(TrainReport::final_heldout_objective)
            .min_by(f64::total_cmp)
            .map(|best| best + 0.01 * best.abs())
    });
    let mut out = std::io::stdout().lock();
    writeln!(out, "# heldout_metric={HELDOUT_METRIC} target={}", fmt_opt(target))?;
    writeln!(out, "stage,seed,points,final_samples,final_seconds,final_train_obj,final_heldout_obj,time_to_target")?;
    for r in &reports {
        let last = r.last();
        let reached = target.and_then(|t| r.time_to_heldout(t));
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.stage,
            r.seed,
            r.points.len(),
            last.map_or(String::new(), |p| p.samples.to_string()),
            last.map_or(String::new(), |p| p.seconds.to_string()),
            r.final_train_objective().map_or(String::new(), |x| x.to_string()),
            r.final_heldout_objective().map_or(String::new(), |x| x.to_string()),
            reached.map_or(String::new(), |x| x.to_string())
        )?;
    }
    Ok(())
}
