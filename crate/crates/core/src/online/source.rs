//! Where the online trainer's samples come from.
//!
//! A finite data set is cycled with a fresh permutation per cycle. An
//! unbounded stream is read in buffers of `max(beta, 4096)` frames, each
//! buffer shuffled before it is served.

use std::io::{ErrorKind, Read, Write};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::matrix::{read_f64s, write_f64s, NonnegMatrix};
use crate::rng::{derived, Domain};

pub const MIN_STREAM_BUFFER: usize = 4096;

/// Identity of a drawn sample: its column in the data set, when there is one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Draw {
    pub index: Option<usize>,
}

pub trait SampleSource {
    fn frame_len(&self) -> usize;

    /// Number of distinct frames when the source is a finite data set.
    fn dataset_len(&self) -> Option<usize>;

    fn dataset(&self) -> Option<&NonnegMatrix> {
        None
    }

    /// Copies the next frame into `frame`. `Ok(None)` once exhausted.
    fn next_into(&mut self, frame: &mut [f64]) -> Result<Option<Draw>>;

    /// Positions the source as if `t` samples had already been drawn.
    fn skip_to(&mut self, t: u64) -> Result<()>;
}

/// Endless passes over a finite data set, re-permuted every pass.
#[derive(Debug, Clone)]
pub struct FiniteCycling<'a> {
    data: &'a NonnegMatrix,
    seed: u64,
    order: Vec<usize>,
    cycle: u64,
    pos: usize,
}

impl<'a> FiniteCycling<'a> {
    pub fn new(data: &'a NonnegMatrix, seed: u64) -> Result<Self> {
        if data.cols() == 0 || data.rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut source = FiniteCycling {
            data,
            seed,
            order: (0..data.cols()).collect(),
            cycle: 0,
            pos: 0,
        };
        source.permute();
        Ok(source)
    }

    fn permute(&mut self) {
        self.order.iter_mut().enumerate().for_each(|(i, o)| *o = i);
        let mut rng = derived(self.seed, Domain::CyclePermutation, self.cycle);
        self.order.shuffle(&mut rng);
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }
}

impl SampleSource for FiniteCycling<'_> {
    fn frame_len(&self) -> usize {
        self.data.rows()
    }

    fn dataset_len(&self) -> Option<usize> {
        Some(self.data.cols())
    }

    fn dataset(&self) -> Option<&NonnegMatrix> {
        Some(self.data)
    }

    fn next_into(&mut self, frame: &mut [f64]) -> Result<Option<Draw>> {
        if self.pos == self.order.len() {
            self.cycle += 1;
            self.pos = 0;
            self.permute();
        }
        let index = self.order[self.pos];
        self.pos += 1;
        frame.copy_from_slice(self.data.col(index));
        Ok(Some(Draw { index: Some(index) }))
    }

    fn skip_to(&mut self, t: u64) -> Result<()> {
        let n = self.order.len() as u64;
        self.cycle = t / n;
        self.pos = (t % n) as usize;
        self.permute();
        Ok(())
    }
}

/// A producer of frames with no random access.
pub trait FrameStream {
    fn frame_len(&self) -> usize;

    /// Fills `out` with the next frame; `Ok(false)` at end of stream.
    fn read_frame(&mut self, out: &mut [f64]) -> Result<bool>;
}

/// Buffers a [`FrameStream`] and serves each buffer in shuffled order.
#[derive(Debug)]
pub struct StreamSource<S> {
    inner: S,
    capacity: usize,
    buffer: Vec<f64>,
    order: Vec<usize>,
    filled: usize,
    pos: usize,
    buffers_read: u64,
    seed: u64,
}

impl<S: FrameStream> StreamSource<S> {
    /// Buffer holds `max(beta, 4096)` frames.
    pub fn new(inner: S, beta: usize, seed: u64) -> Self {
        let capacity = beta.max(MIN_STREAM_BUFFER);
        StreamSource {
            buffer: vec![0.0; capacity * inner.frame_len()],
            order: Vec::with_capacity(capacity),
            inner,
            capacity,
            filled: 0,
            pos: 0,
            buffers_read: 0,
            seed,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn into_inner(self) -> S {
        self.inner
    }

    fn refill(&mut self) -> Result<()> {
        let f = self.inner.frame_len();
        self.filled = 0;
        while self.filled < self.capacity {
            let slot = &mut self.buffer[self.filled * f..(self.filled + 1) * f];
            if !self.inner.read_frame(slot)? {
                break;
            }
            self.filled += 1;
        }
        self.order.clear();
        self.order.extend(0..self.filled);
        let mut rng = derived(self.seed, Domain::BufferPermutation, self.buffers_read);
        self.order.shuffle(&mut rng);
        self.buffers_read += 1;
        self.pos = 0;
        Ok(())
    }
}

impl<S: FrameStream> SampleSource for StreamSource<S> {
    fn frame_len(&self) -> usize {
        self.inner.frame_len()
    }

    fn dataset_len(&self) -> Option<usize> {
        None
    }

    fn next_into(&mut self, frame: &mut [f64]) -> Result<Option<Draw>> {
        if self.pos == self.filled {
            self.refill()?;
            if self.filled == 0 {
                return Ok(None);
            }
        }
        let f = self.inner.frame_len();
        let slot = self.order[self.pos];
        frame.copy_from_slice(&self.buffer[slot * f..(slot + 1) * f]);
        self.pos += 1;
        Ok(Some(Draw { index: None }))
    }

    /// A stream cannot rewind: the underlying reader is assumed to already sit
    /// at sample `t`. Only the buffer is dropped.
    fn skip_to(&mut self, _t: u64) -> Result<()> {
        self.filled = 0;
        self.pos = 0;
        Ok(())
    }
}

/// Reads the headerless chunked frame format:
/// repeated `[frame count: u64 LE | count * frame_len f64 LE]`, frames column-major.
#[derive(Debug)]
pub struct ChunkedFrameReader<R> {
    input: R,
    frame_len: usize,
    remaining: u64,
}

impl<R: Read> ChunkedFrameReader<R> {
    pub fn new(input: R, frame_len: usize) -> Self {
        ChunkedFrameReader {
            input,
            frame_len,
            remaining: 0,
        }
    }

    /// Reads a chunk header; `None` on a clean end of input.
    fn read_count(&mut self) -> Result<Option<u64>> {
        let mut buf = [0u8; 8];
        let mut got = 0;
        while got < 8 {
            match self.input.read(&mut buf[got..]) {
                Ok(0) if got == 0 => return Ok(None),
                Ok(0) => return Err(Error::Io(ErrorKind::UnexpectedEof.into())),
                Ok(n) => got += n,
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(Some(u64::from_le_bytes(buf)))
    }
}

impl<R: Read> FrameStream for ChunkedFrameReader<R> {
    fn frame_len(&self) -> usize {
        self.frame_len
    }

    fn read_frame(&mut self, out: &mut [f64]) -> Result<bool> {
        while self.remaining == 0 {
            match self.read_count()? {
                None => return Ok(false),
                Some(count) => self.remaining = count,
            }
        }
        let values = read_f64s(&mut self.input, self.frame_len as u64)?;
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteEntry { index });
            }
            if value < 0.0 {
                return Err(Error::NegativeInput { index, value });
            }
        }
        out.copy_from_slice(&values);
        self.remaining -= 1;
        Ok(true)
    }
}

/// Writes the columns of `frames` as one chunk of the chunked frame format.
pub fn write_chunk<W: Write>(out: &mut W, frames: &NonnegMatrix) -> Result<()> {
    out.write_all(&(frames.cols() as u64).to_le_bytes())?;
    write_f64s(out, frames.as_slice())
}

/// Serves the columns of a matrix once, in order, as a stream.
#[derive(Debug, Clone)]
pub struct MatrixStream<'a> {
    data: &'a NonnegMatrix,
    next: usize,
}

impl<'a> MatrixStream<'a> {
    pub fn new(data: &'a NonnegMatrix) -> Self {
        MatrixStream { data, next: 0 }
    }
}

impl FrameStream for MatrixStream<'_> {
    fn frame_len(&self) -> usize {
        self.data.rows()
    }

    fn read_frame(&mut self, out: &mut [f64]) -> Result<bool> {
        if self.next == self.data.cols() {
            return Ok(false);
        }
        out.copy_from_slice(self.data.col(self.next));
        self.next += 1;
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn indexed(n: usize) -> NonnegMatrix {
        NonnegMatrix::from_fn(2, n, |r, c| (c * 2 + r) as f64).unwrap()
    }

    #[test]
    fn cycling_visits_each_frame_once_per_cycle() {
        let data = indexed(100);
        let mut src = FiniteCycling::new(&data, 3).unwrap();
        let mut frame = [0.0; 2];
        let mut orders = Vec::new();
        for _ in 0..3 {
            let mut seen = vec![0usize; 100];
            let mut order = Vec::new();
            for _ in 0..100 {
                let d = src.next_into(&mut frame).unwrap().unwrap();
                let idx = d.index.unwrap();
                assert_eq!(frame[0], (idx * 2) as f64);
                seen[idx] += 1;
                order.push(idx);
            }
            assert!(seen.iter().all(|&c| c == 1));
            orders.push(order);
        }
        assert_ne!(orders[0], orders[1]);
        assert_ne!(orders[1], orders[2]);
    }

    #[test]
    fn cycling_skip_reproduces_position() {
        let data = indexed(7);
        let mut a = FiniteCycling::new(&data, 1).unwrap();
        let mut frame = [0.0; 2];
        let drawn: Vec<_> = (0..20).map(|_| a.next_into(&mut frame).unwrap().unwrap().index).collect();
        for t in [0u64, 3, 7, 13] {
            let mut b = FiniteCycling::new(&data, 1).unwrap();
            b.skip_to(t).unwrap();
            let rest: Vec<_> = (t..20).map(|_| b.next_into(&mut frame).unwrap().unwrap().index).collect();
            assert_eq!(&rest[..], &drawn[t as usize..]);
        }
    }

    #[test]
    fn stream_buffers_are_permutations() {
        let data = indexed(5000);
        let mut src = StreamSource::new(MatrixStream::new(&data), 10, 0);
        assert_eq!(src.capacity(), 4096);
        let mut frame = [0.0; 2];
        let mut first: Vec<usize> = Vec::new();
        let mut count = 0;
        while let Some(d) = src.next_into(&mut frame).unwrap() {
            assert_eq!(d.index, None);
            if count < 4096 {
                first.push(frame[0] as usize / 2);
            } else {
                assert!(frame[0] as usize / 2 >= 4096);
            }
            count += 1;
        }
        assert_eq!(count, 5000);
        let mut sorted = first.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..4096).collect::<Vec<_>>());
        assert_ne!(first, sorted);
    }

    #[test]
    fn chunked_roundtrip_and_errors() {
        let data = indexed(5);
        let mut bytes = Vec::new();
        write_chunk(&mut bytes, &data.select_columns(&[0, 1])).unwrap();
        write_chunk(&mut bytes, &NonnegMatrix::zeros(2, 0)).unwrap();
        write_chunk(&mut bytes, &data.select_columns(&[2, 3, 4])).unwrap();
        let mut reader = ChunkedFrameReader::new(&bytes[..], 2);
        let mut frame = [0.0; 2];
        for c in 0..5 {
            assert!(reader.read_frame(&mut frame).unwrap());
            assert_eq!(frame, [data.get(0, c), data.get(1, c)]);
        }
        assert!(!reader.read_frame(&mut frame).unwrap());

        let truncated = &bytes[..bytes.len() - 4];
        let mut reader = ChunkedFrameReader::new(truncated, 2);
        let mut result = Ok(true);
        for _ in 0..5 {
            result = reader.read_frame(&mut frame);
        }
        assert!(matches!(result, Err(Error::TruncatedPayload { .. })));

        let mut neg = Vec::new();
        neg.extend_from_slice(&1u64.to_le_bytes());
        neg.extend_from_slice(&1.0f64.to_le_bytes());
        neg.extend_from_slice(&(-1.0f64).to_le_bytes());
        let mut reader = ChunkedFrameReader::new(&neg[..], 2);
        assert!(matches!(reader.read_frame(&mut frame), Err(Error::NegativeInput { .. })));
    }

    #[test]
    fn empty_dataset_rejected() {
        let empty = NonnegMatrix::zeros(3, 0);
        assert!(matches!(FiniteCycling::new(&empty, 0), Err(Error::EmptyDataset)));
    }
}
