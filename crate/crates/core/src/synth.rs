//! Synthetic spectrogram-like data `V = W* H*` with multiplicative noise.
//!
//! Atoms are smooth positive spectra with a few peaks; activations are sparse
//! and exponentially distributed. Used by tests, benchmarks and the CLI's
//! `synth` command.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::NonnegMatrix;
use crate::online::FrameStream;
use crate::rng::{derived, Domain};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub f: usize,
    pub k: usize,
    /// Relative amplitude of uniform multiplicative noise, e.g. `0.01` for 1%.
    pub noise: f64,
    /// Probability that an atom is active in a frame.
    pub activity: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(f: usize, k: usize, noise: f64, seed: u64) -> Self {
        SyntheticSpec {
            f,
            k,
            noise,
            activity: 0.4,
            seed,
        }
    }

    fn check(&self) -> Result<()> {
        if self.f == 0 || self.k == 0 {
            return Err(Error::InvalidConfig("synthetic data needs f, k >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.noise) || !(self.activity > 0.0 && self.activity <= 1.0) {
            return Err(Error::InvalidConfig("noise must lie in [0, 1), activity in (0, 1]".into()));
        }
        Ok(())
    }

    /// Ground-truth dictionary, ℓ1-normalized columns.
    pub fn dictionary(&self) -> Result<NonnegMatrix> {
        self.check()?;
        let mut rng = derived(self.seed, Domain::Synthetic, 0);
        let mut data = Vec::with_capacity(self.f * self.k);
        for _ in 0..self.k {
            let peaks: Vec<(f64, f64, f64)> = (0..3)
                .map(|_| {
                    (
                        rng.random_range(0.0..self.f as f64),
                        rng.random_range(0.5..3.0) + self.f as f64 / 64.0,
                        rng.random_range(0.5..2.0),
                    )
                })
                .collect();
            let column: Vec<f64> = (0..self.f)
                .map(|bin| {
                    let x = bin as f64;
                    0.01 + peaks
                        .iter()
                        .map(|&(c, width, amp)| amp * (-((x - c) / width).powi(2)).exp())
                        .sum::<f64>()
                })
                .collect();
            let sum: f64 = column.iter().sum();
            data.extend(column.into_iter().map(|x| x / sum));
        }
        NonnegMatrix::from_col_major(self.f, self.k, data)
    }

    fn frame(&self, w: &NonnegMatrix, rng: &mut ChaCha8Rng, h: &mut [f64], out: &mut [f64]) {
        loop {
            for x in h.iter_mut() {
                *x = if rng.random::<f64>() < self.activity {
                    -(1.0 - rng.random::<f64>()).ln() * self.f as f64
                } else {
                    0.0
                };
            }
            if h.iter().any(|&x| x > 0.0) {
                break;
            }
        }
        out.fill(0.0);
        for (col, &hk) in w.columns().zip(h.iter()) {
            if hk > 0.0 {
                out.iter_mut().zip(col).for_each(|(o, &x)| *o += x * hk);
            }
        }
        if self.noise > 0.0 {
            for o in out.iter_mut() {
                *o *= 1.0 + self.noise * rng.random_range(-1.0..=1.0);
            }
        }
    }

    /// `n` frames drawn from `stream`; also returns the activations used.
    pub fn generate(&self, n: usize, stream: u64) -> Result<(NonnegMatrix, NonnegMatrix)> {
        let w = self.dictionary()?;
        let mut rng = derived(self.seed, Domain::Synthetic, stream + 1);
        let mut v = vec![0.0; self.f * n];
        let mut h = vec![0.0; self.k * n];
        for col in 0..n {
            self.frame(
                &w,
                &mut rng,
                &mut h[col * self.k..(col + 1) * self.k],
                &mut v[col * self.f..(col + 1) * self.f],
            );
        }
        Ok((
            NonnegMatrix::from_col_major(self.f, n, v)?,
            NonnegMatrix::from_col_major(self.k, n, h)?,
        ))
    }

    /// An unbounded (or `limit`-long) stream with constant memory.
    pub fn stream(&self, limit: Option<u64>, stream: u64) -> Result<SyntheticStream> {
        Ok(SyntheticStream {
            w: self.dictionary()?,
            spec: self.clone(),
            rng: derived(self.seed, Domain::Synthetic, stream + 1),
            h: vec![0.0; self.k],
            remaining: limit,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticStream {
    spec: SyntheticSpec,
    w: NonnegMatrix,
    rng: ChaCha8Rng,
    h: Vec<f64>,
    remaining: Option<u64>,
}

impl FrameStream for SyntheticStream {
    fn frame_len(&self) -> usize {
        self.spec.f
    }

    fn read_frame(&mut self, out: &mut [f64]) -> Result<bool> {
        match self.remaining.as_mut() {
            Some(0) => return Ok(false),
            Some(r) => *r -= 1,
            None => {}
        }
        self.spec.frame(&self.w, &mut self.rng, &mut self.h, out);
        Ok(true)
    }
}
