//! `CXG1` array container.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! "CXG1" | ndim | dims[ndim] | dtype | payload
//! ```
//!
//! `dtype` is 1 (complex64), 2 (complex128) or 3 (float64). The payload is
//! row-major; complex values are stored as interleaved `(re, im)`.

use std::path::Path;

use num_complex::Complex32;

use crate::acquisition::MultiCoilKspace;
use crate::numeric::{ComplexGrid, C64};

use super::{atomic_write, FileError};

pub const MAGIC: [u8; 4] = *b"CXG1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    Complex64 = 1,
    Complex128 = 2,
    Float64 = 3,
}

impl DType {
    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(DType::Complex64),
            2 => Some(DType::Complex128),
            3 => Some(DType::Float64),
            _ => None,
        }
    }

    /// Bytes per element.
    pub fn size(self) -> usize {
        match self {
            DType::Complex64 | DType::Float64 => 8,
            DType::Complex128 => 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    Complex64(Vec<Complex32>),
    Complex128(Vec<C64>),
    Float64(Vec<f64>),
}

impl ArrayData {
    pub fn dtype(&self) -> DType {
        match self {
            ArrayData::Complex64(_) => DType::Complex64,
            ArrayData::Complex128(_) => DType::Complex128,
            ArrayData::Float64(_) => DType::Float64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ArrayData::Complex64(v) => v.len(),
            ArrayData::Complex128(v) => v.len(),
            ArrayData::Float64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An n-dimensional array with its element type.
#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    dims: Vec<usize>,
    data: ArrayData,
}

impl Array {
    pub fn new(dims: Vec<usize>, data: ArrayData) -> Result<Self, FileError> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(FileError::EmptyDims {
                path: String::new(),
            });
        }
        let n = element_count(&dims).ok_or_else(|| FileError::Layout {
            message: format!("dims {dims:?} overflow"),
        })?;
        if n != data.len() {
            return Err(FileError::Layout {
                message: format!("dims {dims:?} need {n} elements, got {}", data.len()),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn data(&self) -> &ArrayData {
        &self.data
    }

    pub fn into_data(self) -> ArrayData {
        self.data
    }

    pub fn from_grid(grid: &ComplexGrid) -> Self {
        Self {
            dims: vec![grid.height(), grid.width()],
            data: ArrayData::Complex128(grid.data().to_vec()),
        }
    }

    /// Stacks equally shaped grids into a `n×H×W` array.
    pub fn from_stack(grids: &[ComplexGrid]) -> Result<Self, FileError> {
        let first = grids.first().ok_or(FileError::EmptyDims {
            path: String::new(),
        })?;
        let (h, w) = first.shape();
        let mut data = Vec::with_capacity(grids.len() * h * w);
        for g in grids {
            if g.shape() != (h, w) {
                return Err(FileError::Layout {
                    message: format!("stack mixes {h}x{w} and {}x{} grids", g.height(), g.width()),
                });
            }
            data.extend_from_slice(g.data());
        }
        Ok(Self {
            dims: vec![grids.len(), h, w],
            data: ArrayData::Complex128(data),
        })
    }

    pub fn from_kspace(k: &MultiCoilKspace) -> Self {
        Self::from_stack(k.coils()).expect("k-space coils share one shape")
    }

    /// Values as complex128, widening complex64 and real data.
    fn complex_values(&self) -> Vec<C64> {
        match &self.data {
            ArrayData::Complex64(v) => v
                .iter()
                .map(|z| C64::new(z.re as f64, z.im as f64))
                .collect(),
            ArrayData::Complex128(v) => v.clone(),
            ArrayData::Float64(v) => v.iter().map(|&x| C64::new(x, 0.0)).collect(),
        }
    }

    /// A 2D array as a grid; a 3D array with a leading 1 is also accepted.
    pub fn to_grid(&self) -> Result<ComplexGrid, FileError> {
        let (h, w) = match self.dims.as_slice() {
            [h, w] | [1, h, w] => (*h, *w),
            other => {
                return Err(FileError::Layout {
                    message: format!("expected a 2D array, found dims {other:?}"),
                })
            }
        };
        Ok(ComplexGrid::from_vec(h, w, self.complex_values()).expect("dims checked"))
    }

    /// A 3D array as a list of grids; a 2D array is a stack of one.
    pub fn to_stack(&self) -> Result<Vec<ComplexGrid>, FileError> {
        let (n, h, w) = match self.dims.as_slice() {
            [h, w] => (1, *h, *w),
            [n, h, w] => (*n, *h, *w),
            other => {
                return Err(FileError::Layout {
                    message: format!("expected a 2D or 3D array, found dims {other:?}"),
                })
            }
        };
        let values = self.complex_values();
        Ok((0..n)
            .map(|i| {
                ComplexGrid::from_vec(h, w, values[i * h * w..(i + 1) * h * w].to_vec())
                    .expect("dims checked")
            })
            .collect())
    }

    pub fn to_kspace(&self) -> Result<MultiCoilKspace, FileError> {
        MultiCoilKspace::new(self.to_stack()?).map_err(|e| FileError::Layout {
            message: e.to_string(),
        })
    }

    /// Serialized bytes.
    pub fn encode(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(12 + 4 * self.dims.len() + self.data.len() * self.dtype().size());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.dtype().code().to_le_bytes());
        match &self.data {
            ArrayData::Complex64(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
            ArrayData::Complex128(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
            ArrayData::Float64(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    /// Parses bytes produced by [`encode`](Self::encode). `path` only labels errors.
    pub fn decode(bytes: &[u8], path: &str) -> Result<Self, FileError> {
        let path = path.to_string();
        let mut cursor = 0usize;
        let next_u32 = |cursor: &mut usize| -> Result<u32, FileError> {
            let b = bytes
                .get(*cursor..*cursor + 4)
                .ok_or(FileError::TruncatedHeader { path: path.clone() })?;
            *cursor += 4;
            Ok(u32::from_le_bytes(b.try_into().unwrap()))
        };
        let magic = bytes
            .get(0..4)
            .ok_or(FileError::TruncatedHeader { path: path.clone() })?;
        if magic != MAGIC {
            return Err(FileError::BadMagic {
                path: path.clone(),
                found: magic.try_into().unwrap(),
            });
        }
        cursor += 4;
        let ndim = next_u32(&mut cursor)? as usize;
        if ndim == 0 {
            return Err(FileError::EmptyDims { path: path.clone() });
        }
        if ndim > (bytes.len().saturating_sub(cursor)) / 4 {
            return Err(FileError::TruncatedHeader { path: path.clone() });
        }
        let dims: Vec<usize> = (0..ndim)
            .map(|_| next_u32(&mut cursor).map(|d| d as usize))
            .collect::<Result<_, _>>()?;
        if dims.contains(&0) {
            return Err(FileError::EmptyDims { path: path.clone() });
        }
        let code = next_u32(&mut cursor)?;
        let dtype = DType::from_code(code).ok_or(FileError::UnknownDtype {
            path: path.clone(),
            code,
        })?;
        let payload = &bytes[cursor..];
        let expected = element_count(&dims)
            .and_then(|n| n.checked_mul(dtype.size()))
            .map(|b| b as u64)
            .unwrap_or(u64::MAX);
        if payload.len() as u64 != expected {
            return Err(FileError::LengthMismatch {
                path: path.clone(),
                expected,
                found: payload.len() as u64,
            });
        }
        let f32_at = |i: usize| f32::from_le_bytes(payload[i..i + 4].try_into().unwrap());
        let f64_at = |i: usize| f64::from_le_bytes(payload[i..i + 8].try_into().unwrap());
        let n = expected as usize / dtype.size();
        let data = match dtype {
            DType::Complex64 => ArrayData::Complex64(
                (0..n)
                    .map(|k| Complex32::new(f32_at(8 * k), f32_at(8 * k + 4)))
                    .collect(),
            ),
            DType::Complex128 => ArrayData::Complex128(
                (0..n)
                    .map(|k| C64::new(f64_at(16 * k), f64_at(16 * k + 8)))
                    .collect(),
            ),
            DType::Float64 => ArrayData::Float64((0..n).map(|k| f64_at(8 * k)).collect()),
        };
        Ok(Self { dims, data })
    }
}

fn element_count(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

pub fn write_array(path: impl AsRef<Path>, array: &Array) -> Result<(), FileError> {
    atomic_write(path.as_ref(), &array.encode())
}

pub fn read_array(path: impl AsRef<Path>) -> Result<Array, FileError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| FileError::io(path, e))?;
    Array::decode(&bytes, &path.display().to_string())
}

pub fn write_grid(path: impl AsRef<Path>, grid: &ComplexGrid) -> Result<(), FileError> {
    write_array(path, &Array::from_grid(grid))
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<ComplexGrid, FileError> {
    read_array(path)?.to_grid()
}

pub fn write_kspace(path: impl AsRef<Path>, k: &MultiCoilKspace) -> Result<(), FileError> {
    write_array(path, &Array::from_kspace(k))
}

pub fn read_kspace(path: impl AsRef<Path>) -> Result<MultiCoilKspace, FileError> {
    read_array(path)?.to_kspace()
}
