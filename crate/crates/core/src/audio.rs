//! Audio front end: WAV decoding, sine-windowed STFT power spectra and
//! silent-frame removal.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::{Path, PathBuf};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::matrix::NonnegMatrix;

pub const DEFAULT_WINDOW: usize = 512;
pub const DEFAULT_HOP: usize = 256;
pub const DEFAULT_SILENCE_DB: f64 = -60.0;

/// Origin of one spectrogram column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameMeta {
    pub source: usize,
    pub frame: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramDataset {
    pub frames: NonnegMatrix,
    pub sample_rate: u32,
    pub frame_meta: Vec<FrameMeta>,
    pub discarded_count: usize,
}

fn unsupported(msg: impl Into<String>) -> Error {
    Error::UnsupportedFormat(msg.into())
}

fn from_hound(err: hound::Error) -> Error {
    match err {
        // hound reports short reads as `UnexpectedEof` or as `Other`.
        hound::Error::IoError(e) if matches!(e.kind(), ErrorKind::UnexpectedEof | ErrorKind::Other) => {
            unsupported(format!("truncated WAV data: {e}"))
        }
        hound::Error::IoError(e) => Error::Io(e),
        hound::Error::FormatError(msg) => unsupported(msg),
        hound::Error::Unsupported => unsupported("unsupported WAV encoding"),
        other => unsupported(other.to_string()),
    }
}

/// Decodes 16-bit PCM or 32-bit float WAV, mono or stereo, into mono samples
/// in [-1, 1]. Stereo is averaged. Returns `(samples, sample_rate)`.
pub fn load_audio(path: impl AsRef<Path>) -> Result<(Vec<f64>, u32)> {
    read_audio(BufReader::new(File::open(path)?))
}

pub fn read_audio<R: Read>(input: R) -> Result<(Vec<f64>, u32)> {
    let reader = hound::WavReader::new(input).map_err(from_hound)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(unsupported(format!("{channels} channels")));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|x| f64::from(x) / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(from_hound)?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(from_hound)?,
        (format, bits) => return Err(unsupported(format!("{bits}-bit {format:?} samples"))),
    };
    let mono = interleaved
        .chunks(channels)
        .map(|c| c.iter().sum::<f64>() / channels as f64)
        .collect();
    Ok((mono, spec.sample_rate))
}

/// Writes mono 16-bit PCM; samples are clamped to [-1, 1].
pub fn write_wav_pcm16(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(from_hound)?;
    for &s in samples {
        let q = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(q).map_err(from_hound)?;
    }
    writer.finalize().map_err(from_hound)
}

/// `floor((len - window)/hop) + 1` for `len >= window`, otherwise 0.
pub fn frame_count(len: usize, window: usize, hop: usize) -> usize {
    if len < window || hop == 0 {
        0
    } else {
        (len - window) / hop + 1
    }
}

/// `w[n] = sin(π (n + 1/2) / L)`.
pub fn sine_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| (std::f64::consts::PI * (n as f64 + 0.5) / len as f64).sin())
        .collect()
}

/// Squared-magnitude one-sided STFT, `window/2 + 1` bins by
/// `floor((len - window)/hop) + 1` frames.
pub fn stft_power(samples: &[f64], window: usize, hop: usize) -> Result<NonnegMatrix> {
    if window < 2 || !window.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!("window {window} must be even and >= 2")));
    }
    if hop == 0 || hop > window {
        return Err(Error::InvalidConfig(format!("hop {hop} must lie in 1..={window}")));
    }
    if samples.len() < window {
        return Err(Error::TooShort {
            len: samples.len(),
            window,
        });
    }
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteEntry { index: i });
    }
    let n = frame_count(samples.len(), window, hop);
    let bins = window / 2 + 1;
    let taper = sine_window(window);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window);
    let mut buf = vec![Complex::new(0.0, 0.0); window];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut out = Vec::with_capacity(bins * n);
    for frame in 0..n {
        let start = frame * hop;
        for ((b, &s), &w) in buf.iter_mut().zip(&samples[start..start + window]).zip(&taper) {
            *b = Complex::new(s * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        out.extend(buf[..bins].iter().map(|c| c.norm_sqr()));
    }
    NonnegMatrix::from_col_major(bins, n, out)
}

/// Indices of frames whose total power is within `|threshold_db|` dB of the
/// loudest frame.
pub fn loud_frames(spec: &NonnegMatrix, threshold_db: f64) -> Vec<usize> {
    let powers = spec.column_sums();
    let loudest = powers.iter().cloned().fold(0.0, f64::max);
    if loudest <= 0.0 {
        return Vec::new();
    }
    let floor_db = -threshold_db.abs();
    powers
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0 && 10.0 * (p / loudest).log10() >= floor_db)
        .map(|(i, _)| i)
        .collect()
}

/// Drops silent frames from a single-source spectrogram.
pub fn discard_silence(spec: &NonnegMatrix, threshold_db: f64) -> Result<SpectrogramDataset> {
    SpectrogramDataset::from_source(spec.clone(), 0, 0).discard_silence(threshold_db)
}

impl SpectrogramDataset {
    /// Wraps frames from one source, frame indices `0..N`.
    pub fn from_source(frames: NonnegMatrix, source: usize, sample_rate: u32) -> Self {
        let frame_meta = (0..frames.cols()).map(|frame| FrameMeta { source, frame }).collect();
        SpectrogramDataset {
            frames,
            sample_rate,
            frame_meta,
            discarded_count: 0,
        }
    }

    /// Removes frames more than `|threshold_db|` dB below the loudest one,
    /// keeping the order of the rest.
    pub fn discard_silence(self, threshold_db: f64) -> Result<SpectrogramDataset> {
        let keep = loud_frames(&self.frames, threshold_db);
        if keep.is_empty() {
            return Err(Error::AllSilent);
        }
        let dropped = self.frames.cols() - keep.len();
        Ok(SpectrogramDataset {
            frames: self.frames.select_columns(&keep),
            sample_rate: self.sample_rate,
            frame_meta: keep.iter().map(|&i| self.frame_meta[i]).collect(),
            discarded_count: self.discarded_count + dropped,
        })
    }

    /// Sidecar path next to the matrix file: `<path>.frames`.
    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".frames");
        PathBuf::from(s)
    }

    /// Writes the frames matrix to `path` and the frame metadata to the sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.frames.save(path)?;
        let mut out = BufWriter::new(File::create(Self::sidecar_path(path))?);
        writeln!(out, "# sample_rate={} discarded={}", self.sample_rate, self.discarded_count)?;
        for m in &self.frame_meta {
            writeln!(out, "{} {}", m.source, m.frame)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SpectrogramDataset> {
        let path = path.as_ref();
        let frames = NonnegMatrix::load(path)?;
        let sidecar = BufReader::new(File::open(Self::sidecar_path(path))?);
        let bad = |msg: &str| Error::UnsupportedFormat(format!("frame sidecar: {msg}"));
        let mut lines = sidecar.lines();
        let header = lines.next().ok_or_else(|| bad("empty"))??;
        let mut sample_rate = None;
        let mut discarded = None;
        for token in header.trim_start_matches('#').split_whitespace() {
            match token.split_once('=') {
                Some(("sample_rate", v)) => sample_rate = v.parse().ok(),
                Some(("discarded", v)) => discarded = v.parse().ok(),
                _ => {}
            }
        }
        let mut frame_meta = Vec::with_capacity(frames.cols());
        for line in lines {
            let line = line?;
            let mut parts = line.split_whitespace();
            let (Some(s), Some(f), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(bad("expected two fields per line"));
            };
            frame_meta.push(FrameMeta {
                source: s.parse().map_err(|_| bad("bad source index"))?,
                frame: f.parse().map_err(|_| bad("bad frame index"))?,
            });
        }
        if frame_meta.len() != frames.cols() {
            return Err(bad("line count does not match the frame count"));
        }
        Ok(SpectrogramDataset {
            frames,
            sample_rate: sample_rate.ok_or_else(|| bad("missing sample_rate"))?,
            frame_meta,
            discarded_count: discarded.ok_or_else(|| bad("missing discarded"))?,
        })
    }
}

/// Decodes each file, computes its power spectrogram, concatenates them in
/// input order and discards silent frames relative to the loudest frame
/// overall. All files must share one sample rate.
pub fn ingest_files<P: AsRef<Path>>(
    paths: &[P],
    window: usize,
    hop: usize,
    threshold_db: f64,
) -> Result<SpectrogramDataset> {
    if paths.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut parts = Vec::with_capacity(paths.len());
    let mut meta = Vec::new();
    let mut rate = None;
    for (source, path) in paths.iter().enumerate() {
        let (samples, sr) = load_audio(path)?;
        if *rate.get_or_insert(sr) != sr {
            return Err(unsupported(format!(
                "sample rate {sr} of input {source} differs from {}",
                rate.unwrap_or(sr)
            )));
        }
        let spec = stft_power(&samples, window, hop)?;
        meta.extend((0..spec.cols()).map(|frame| FrameMeta { source, frame }));
        parts.push(spec);
    }
    let frames = NonnegMatrix::hconcat(&parts)?;
    SpectrogramDataset {
        frames,
        sample_rate: rate.unwrap_or(0),
        frame_meta: meta,
        discarded_count: 0,
    }
    .discard_silence(threshold_db)
}
