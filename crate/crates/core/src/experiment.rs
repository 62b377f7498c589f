//! Best-of-seeds training runs over a grid of `(r, beta)` settings, with
//! held-out evaluation at every trace point.

use crate::batch::{batch_train, default_h0, init_from_samples};
use crate::error::{Error, Result};
use crate::eval::{evaluate_heldout, DEFAULT_EVAL_ITERS};
use crate::matrix::NonnegMatrix;
use crate::model::SolverConfig;
use crate::online::{online_train, FiniteCycling};
use crate::report::TrainReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Batch,
    Online,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub r: f64,
    pub beta: usize,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub mode: Mode,
    /// Settings shared by all runs; `seed` is the first seed, runs use
    /// `seed, seed + 1, ..., seed + n_seeds - 1`.
    pub base: SolverConfig,
    /// Ignored in batch mode, which runs a single group.
    pub grid: Vec<GridPoint>,
    pub eval_iters: usize,
}

impl Experiment {
    pub fn new(mode: Mode, base: SolverConfig) -> Self {
        let grid = vec![GridPoint {
            r: base.r,
            beta: base.beta,
        }];
        Experiment {
            mode,
            base,
            grid,
            eval_iters: DEFAULT_EVAL_ITERS,
        }
    }
}

/// All runs of one grid point and the best of them.
#[derive(Debug, Clone)]
pub struct GridResult {
    pub point: GridPoint,
    pub runs: Vec<TrainReport>,
    /// Index into `runs` with the smallest final training objective.
    pub best: usize,
    pub best_w: NonnegMatrix,
}

impl GridResult {
    pub fn best_report(&self) -> &TrainReport {
        &self.runs[self.best]
    }
}

/// Trains every seed of every grid point on `train`, evaluating `test` (if
/// any) at each trace point with the clock paused.
pub fn run_experiment(train: &NonnegMatrix, test: Option<&NonnegMatrix>, experiment: &Experiment) -> Result<Vec<GridResult>> {
    experiment.base.validate()?;
    if train.cols() == 0 {
        return Err(Error::EmptyDataset);
    }
    if let Some(test) = test {
        if test.rows() != train.rows() {
            return Err(Error::shape((train.rows(), test.cols()), test.shape()));
        }
    }
    let grid = match experiment.mode {
        Mode::Batch => &experiment.grid[..experiment.grid.len().min(1)],
        Mode::Online => &experiment.grid[..],
    };
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty parameter grid".into()));
    }
    grid.iter()
        .map(|&point| run_point(train, test, experiment, point))
        .collect()
}

fn run_point(train: &NonnegMatrix, test: Option<&NonnegMatrix>, experiment: &Experiment, point: GridPoint) -> Result<GridResult> {
    let base = &experiment.base;
    let eps = base.epsilon;
    let eval = |w: &NonnegMatrix| test.map(|t| evaluate_heldout(w, t, eps, experiment.eval_iters));
    let mut runs = Vec::with_capacity(base.n_seeds);
    let mut best: Option<(usize, f64, NonnegMatrix)> = None;
    for i in 0..base.n_seeds as u64 {
        let mut config = base.clone();
        config.seed = base.seed.wrapping_add(i);
        config.r = point.r;
        config.beta = point.beta;
        let w0 = init_from_samples(train, config.k, eps, config.seed)?;
        let mut eval_error = None;
        let mut heldout = |w: &NonnegMatrix| match eval(w) {
            Some(Ok(x)) => Some(x),
            Some(Err(e)) => {
                eval_error.get_or_insert(e);
                None
            }
            None => None,
        };
        let (w, report) = match experiment.mode {
            Mode::Batch => {
                let h0 = default_h0(train, &w0, eps);
                let state = batch_train(train, &config, &w0, &h0, |p| heldout(p.w))?;
                (state.w, state.trace)
            }
            Mode::Online => {
                let mut source = FiniteCycling::new(train, config.seed)?;
                let state = online_train(&mut source, &config, &w0, |p| heldout(p.state.w()))?;
                let w = state.w().clone();
                (w, state.trace)
            }
        };
        if let Some(e) = eval_error {
            return Err(e);
        }
        let score = report.final_train_objective().unwrap_or(f64::INFINITY);
        let better = match &best {
            None => true,
            Some((_, s, _)) => score < *s || (s.is_nan() && !score.is_nan()),
        };
        if better {
            best = Some((runs.len(), score, w));
        }
        runs.push(report);
    }
    let (best, _, best_w) = best.expect("n_seeds >= 1");
    Ok(GridResult {
        point,
        runs,
        best,
        best_w,
    })
}
