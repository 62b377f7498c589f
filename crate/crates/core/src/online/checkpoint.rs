//! Binary checkpoint of an [`OnlineState`].
//!
//! ```text
//! "ISCK" | version u32 = 1 | t u64 | commits u64 | seed u64 | rho f64
//! | restart u8 (0 warm, 1 fresh) | has_delta u8 | last_delta f64
//! | window_loss f64 | window_count u64 | has_warm_h u8
//! | W, A, B, pending A, pending B  (matrix records) | [warm H (matrix record)]
//! ```
//!
//! All integers and floats little-endian; matrix records use the `ISNM`
//! layout. The trace is not part of the checkpoint.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::OnlineState;
use crate::error::{Error, Result};
use crate::kernels::Workspace;
use crate::matrix::{read_u32, read_u64, NonnegMatrix};
use crate::model::{Dictionary, RestartMode};
use crate::report::TrainReport;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ISCK";
pub const CHECKPOINT_VERSION: u32 = 1;

fn read_u8<R: Read>(input: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    input.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_f64<R: Read>(input: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(input)?))
}

impl OnlineState {
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        let (f, k) = self.dict.shape();
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        out.write_all(&self.t.to_le_bytes())?;
        out.write_all(&self.commits.to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        out.write_all(&self.rho.to_bits().to_le_bytes())?;
        out.write_all(&[match self.restart {
            RestartMode::Warm => 0,
            RestartMode::Fresh => 1,
        }])?;
        out.write_all(&[u8::from(self.last_delta.is_some())])?;
        out.write_all(&self.last_delta.unwrap_or(0.0).to_bits().to_le_bytes())?;
        out.write_all(&self.window_loss.to_bits().to_le_bytes())?;
        out.write_all(&self.window_count.to_le_bytes())?;
        out.write_all(&[u8::from(self.warm_h.is_some())])?;
        self.dict.w().write_to(&mut out)?;
        self.dict.a().write_to(&mut out)?;
        self.dict.b().write_to(&mut out)?;
        NonnegMatrix::from_raw(f, k, self.pending_a.clone()).write_to(&mut out)?;
        NonnegMatrix::from_raw(f, k, self.pending_b.clone()).write_to(&mut out)?;
        if let Some(h) = &self.warm_h {
            h.write_to(&mut out)?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<OnlineState> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::BadMagic);
        }
        let version = read_u32(&mut input)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let t = read_u64(&mut input)?;
        let commits = read_u64(&mut input)?;
        let seed = read_u64(&mut input)?;
        let rho = read_f64(&mut input)?;
        let restart = match read_u8(&mut input)? {
            0 => RestartMode::Warm,
            1 => RestartMode::Fresh,
            other => return Err(Error::InvalidConfig(format!("unknown restart tag {other}"))),
        };
        let has_delta = read_u8(&mut input)? != 0;
        let delta = read_f64(&mut input)?;
        let window_loss = read_f64(&mut input)?;
        let window_count = read_u64(&mut input)?;
        let has_warm = read_u8(&mut input)? != 0;
        let w = NonnegMatrix::read_from(&mut input)?;
        let a = NonnegMatrix::read_from(&mut input)?;
        let b = NonnegMatrix::read_from(&mut input)?;
        let pending_a = NonnegMatrix::read_from(&mut input)?;
        let pending_b = NonnegMatrix::read_from(&mut input)?;
        pending_a.ensure_shape(w.shape())?;
        pending_b.ensure_shape(w.shape())?;
        let warm_h = if has_warm {
            let h = NonnegMatrix::read_from(&mut input)?;
            if h.rows() != w.cols() {
                return Err(Error::shape((w.cols(), h.cols()), h.shape()));
            }
            Some(h)
        } else {
            None
        };
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidConfig(format!("checkpoint rho {rho} outside [0, 1]")));
        }
        let (f, k) = w.shape();
        Ok(OnlineState {
            dict: Dictionary::new(w, a, b)?,
            t,
            commits,
            pending_a: pending_a.into_vec(),
            pending_b: pending_b.into_vec(),
            warm_h,
            rho,
            seed,
            restart,
            last_delta: has_delta.then_some(delta),
            window_loss,
            window_count,
            trace: TrainReport::default(),
            ws: Workspace::new(f),
            h_buf: vec![0.0; k],
        })
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_checkpoint(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<OnlineState> {
        Self::read_checkpoint(BufReader::new(File::open(path)?))
    }
}
