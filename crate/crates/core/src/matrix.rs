//! Dense nonnegative matrices and their binary file format.
//!
//! Storage is column-major so that a frame `v_n` (or an atom `w_k`) is one
//! contiguous slice. The on-disk layout is:
//!
//! ```text
//! "ISNM" | version: u32 LE = 1 | rows: u64 LE | cols: u64 LE | rows*cols f64 LE (column-major)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MATRIX_MAGIC: &[u8; 4] = b"ISNM";
pub const MATRIX_VERSION: u32 = 1;

/// Dense matrix whose entries are finite and nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct NonnegMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

fn validate(data: &[f64]) -> Result<()> {
    for (index, &value) in data.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFiniteEntry { index });
        }
        if value < 0.0 {
            return Err(Error::NegativeInput { index, value });
        }
    }
    Ok(())
}

impl NonnegMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        NonnegMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::from_col_major(rows, cols, vec![value; rows * cols])
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::shape((rows, cols), (data.len(), 1)));
        }
        validate(&data)?;
        Ok(NonnegMatrix { rows, cols, data })
    }

    /// Builds a matrix entry by entry; `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        Self::from_col_major(rows, cols, data)
    }

    /// Stacks equal-length columns side by side.
    pub fn from_columns<C: AsRef<[f64]>>(rows: usize, columns: &[C]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * columns.len());
        for column in columns {
            let column = column.as_ref();
            if column.len() != rows {
                return Err(Error::shape((rows, 1), (column.len(), 1)));
            }
            data.extend_from_slice(column);
        }
        Self::from_col_major(rows, columns.len(), data)
    }

    /// Caller guarantees every entry is finite and nonnegative.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        debug_assert!(validate(&data).is_ok());
        NonnegMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        assert!(row < self.rows && col < self.cols, "index out of bounds");
        self.data[col * self.rows + row]
    }

    pub fn col(&self, col: usize) -> &[f64] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub(crate) fn col_mut(&mut self, col: usize) -> &mut [f64] {
        &mut self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact panics on a zero chunk size
        let rows = self.rows.max(1);
        self.data.chunks_exact(rows).take(if self.rows == 0 { 0 } else { self.cols })
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.columns().map(|c| c.iter().sum()).collect()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn ensure_shape(&self, expected: (usize, usize)) -> Result<()> {
        if self.shape() != expected {
            return Err(Error::shape(expected, self.shape()));
        }
        Ok(())
    }

    /// Dense product `self * rhs`.
    pub fn matmul(&self, rhs: &NonnegMatrix) -> Result<NonnegMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::shape((self.cols, rhs.cols), rhs.shape()));
        }
        let mut out = vec![0.0; self.rows * rhs.cols];
        for (j, out_col) in out.chunks_exact_mut(self.rows.max(1)).enumerate().take(rhs.cols) {
            for (k, &coef) in rhs.col(j).iter().enumerate() {
                if coef == 0.0 {
                    continue;
                }
                for (o, &a) in out_col.iter_mut().zip(self.col(k)) {
                    *o += a * coef;
                }
            }
        }
        Ok(NonnegMatrix::from_raw(self.rows, rhs.cols, out))
    }

    /// New matrix made of the listed columns, in order (repeats allowed).
    pub fn select_columns(&self, indices: &[usize]) -> NonnegMatrix {
        let mut data = Vec::with_capacity(self.rows * indices.len());
        for &i in indices {
            data.extend_from_slice(self.col(i));
        }
        NonnegMatrix::from_raw(self.rows, indices.len(), data)
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn hconcat(parts: &[NonnegMatrix]) -> Result<NonnegMatrix> {
        let rows = parts.first().map_or(0, |m| m.rows);
        let mut data = Vec::new();
        let mut cols = 0;
        for part in parts {
            if part.rows != rows {
                return Err(Error::shape((rows, part.cols), part.shape()));
            }
            data.extend_from_slice(&part.data);
            cols += part.cols;
        }
        Ok(NonnegMatrix::from_raw(rows, cols, data))
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MATRIX_MAGIC)?;
        out.write_all(&MATRIX_VERSION.to_le_bytes())?;
        out.write_all(&(self.rows as u64).to_le_bytes())?;
        out.write_all(&(self.cols as u64).to_le_bytes())?;
        write_f64s(&mut out, &self.data)?;
        Ok(())
    }

    /// Reads exactly one matrix from `input`, leaving any trailing bytes unread.
    pub fn read_from<R: Read>(mut input: R) -> Result<NonnegMatrix> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MATRIX_MAGIC {
            return Err(Error::BadMagic);
        }
        let version = read_u32(&mut input)?;
        if version != MATRIX_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let rows = read_u64(&mut input)?;
        let cols = read_u64(&mut input)?;
        let expected = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::InvalidConfig(format!("matrix header {rows}x{cols} overflows")))?;
        let data = read_f64s(&mut input, expected)?;
        let (rows, cols) = (to_usize(rows)?, to_usize(cols)?);
        validate(&data)?;
        Ok(NonnegMatrix { rows, cols, data })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<NonnegMatrix> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn to_usize(v: u64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::InvalidConfig(format!("dimension {v} exceeds address space")))
}

pub(crate) fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub(crate) fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub(crate) fn write_f64s<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&bytes)?;
    Ok(())
}

/// Reads `count` little-endian doubles; a short read reports how many were present.
pub(crate) fn read_f64s<R: Read>(input: &mut R, count: u64) -> Result<Vec<f64>> {
    let want = count
        .checked_mul(8)
        .ok_or_else(|| Error::InvalidConfig(format!("payload of {count} values overflows")))?;
    let mut bytes = Vec::new();
    input.take(want).read_to_end(&mut bytes)?;
    if (bytes.len() as u64) < want {
        return Err(Error::TruncatedPayload {
            expected: count,
            found: bytes.len() as u64 / 8,
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(rows: u64, cols: u64) -> Vec<u8> {
        let mut bytes = MATRIX_MAGIC.to_vec();
        bytes.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
        bytes.extend_from_slice(&rows.to_le_bytes());
        bytes.extend_from_slice(&cols.to_le_bytes());
        bytes
    }

    #[test]
    fn rejects_negative_and_nan() {
        assert!(matches!(
            NonnegMatrix::from_col_major(1, 2, vec![1.0, -0.5]),
            Err(Error::NegativeInput { index: 1, .. })
        ));
        assert!(matches!(
            NonnegMatrix::from_col_major(1, 1, vec![f64::NAN]),
            Err(Error::NonFiniteEntry { index: 0 })
        ));
        assert!(NonnegMatrix::from_col_major(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn column_major_layout() {
        let m = NonnegMatrix::from_fn(2, 3, |r, c| (10 * r + c) as f64).unwrap();
        assert_eq!(m.col(1), &[1.0, 11.0]);
        assert_eq!(m.get(1, 2), 12.0);
        assert_eq!(m.as_slice(), &[0.0, 10.0, 1.0, 11.0, 2.0, 12.0]);
    }

    #[test]
    fn matmul_small() {
        let a = NonnegMatrix::from_col_major(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = NonnegMatrix::from_col_major(2, 1, vec![1.0, 1.0]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().as_slice(), &[4.0, 6.0]);
    }

    #[test]
    fn save_load_roundtrip_3x2() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.isnm");
        let m = NonnegMatrix::from_col_major(3, 2, vec![0.0, 1.5, 2.25, 1e-300, 7.0, 3.0]).unwrap();
        m.save(&path).unwrap();
        let back = NonnegMatrix::load(&path).unwrap();
        assert_eq!(back.shape(), (3, 2));
        let raw = |m: &NonnegMatrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(raw(&back), raw(&m));
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 4 + 4 + 8 + 8 + 6 * 8);
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = header(1, 1);
        bytes[0] = b'X';
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        assert!(matches!(NonnegMatrix::read_from(&bytes[..]), Err(Error::BadMagic)));
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = header(2, 2);
        for v in [1.0f64, 2.0, 3.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        assert!(matches!(
            NonnegMatrix::read_from(&bytes[..]),
            Err(Error::TruncatedPayload { expected: 4, found: 3 })
        ));
    }

    #[test]
    fn nonfinite_on_load() {
        let mut bytes = header(1, 1);
        bytes.extend_from_slice(&f64::INFINITY.to_le_bytes());
        assert!(matches!(
            NonnegMatrix::read_from(&bytes[..]),
            Err(Error::NonFiniteEntry { index: 0 })
        ));
    }

    #[test]
    fn unknown_version() {
        let mut bytes = header(0, 0);
        bytes[4] = 9;
        assert!(matches!(NonnegMatrix::read_from(&bytes[..]), Err(Error::UnsupportedVersion(9))));
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(
            rows in 0usize..6,
            cols in 0usize..6,
            seed in prop::collection::vec(0.0f64..f64::MAX, 36),
        ) {
            let data: Vec<f64> = seed.into_iter().take(rows * cols).collect();
            let m = NonnegMatrix::from_col_major(rows, cols, data).unwrap();
            let mut bytes = Vec::new();
            m.write_to(&mut bytes).unwrap();
            let back = NonnegMatrix::read_from(&bytes[..]).unwrap();
            prop_assert_eq!(back.shape(), m.shape());
            for (x, y) in back.as_slice().iter().zip(m.as_slice()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
