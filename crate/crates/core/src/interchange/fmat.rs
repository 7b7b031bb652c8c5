//! FMAT: a minimal dense-matrix container.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "FMAT"
//! 4       1     version (0x01)
//! 5       4     header length H, u32 little-endian
//! 9       H     UTF-8 JSON {"dtype","shape","order","ids"?}
//! 9+H     ...   row-major little-endian payload
//! ```

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};

pub const MAGIC: &[u8; 4] = b"FMAT";
pub const VERSION: u8 = 1;
const PREAMBLE: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FmatData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fmat {
    pub rows: usize,
    pub cols: usize,
    pub data: FmatData,
    pub ids: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    dtype: Dtype,
    shape: [usize; 2],
    order: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ids: Option<Vec<String>>,
}

impl Fmat {
    pub fn from_f64(values: &Array2<f64>, ids: Option<Vec<String>>) -> Self {
        let (rows, cols) = values.dim();
        Fmat {
            rows,
            cols,
            data: FmatData::F64(values.iter().copied().collect()),
            ids,
        }
    }

    pub fn from_f32(values: &Array2<f32>, ids: Option<Vec<String>>) -> Self {
        let (rows, cols) = values.dim();
        Fmat {
            rows,
            cols,
            data: FmatData::F32(values.iter().copied().collect()),
            ids,
        }
    }

    /// Store `values` as f32 (the usual choice for features).
    pub fn from_f64_as_f32(values: &Array2<f64>, ids: Option<Vec<String>>) -> Self {
        Self::from_f32(&values.mapv(|v| v as f32), ids)
    }

    pub fn dtype(&self) -> Dtype {
        match self.data {
            FmatData::F32(_) => Dtype::F32,
            FmatData::F64(_) => Dtype::F64,
        }
    }

    pub fn to_f64(&self) -> Array2<f64> {
        let v: Vec<f64> = match &self.data {
            FmatData::F32(d) => d.iter().map(|&x| f64::from(x)).collect(),
            FmatData::F64(d) => d.clone(),
        };
        Array2::from_shape_vec((self.rows, self.cols), v).expect("validated shape")
    }

    pub fn to_f32(&self) -> Array2<f32> {
        let v: Vec<f32> = match &self.data {
            FmatData::F32(d) => d.clone(),
            FmatData::F64(d) => d.iter().map(|&x| x as f32).collect(),
        };
        Array2::from_shape_vec((self.rows, self.cols), v).expect("validated shape")
    }

    fn len(&self) -> usize {
        match &self.data {
            FmatData::F32(d) => d.len(),
            FmatData::F64(d) => d.len(),
        }
    }
}

pub fn encode_fmat(m: &Fmat) -> Result<Vec<u8>> {
    if m.len() != m.rows * m.cols {
        return Err(Error::DimensionMismatch(format!(
            "{} values for shape {}x{}",
            m.len(),
            m.rows,
            m.cols
        )));
    }
    if let Some(ids) = &m.ids {
        if ids.len() != m.rows {
            return Err(Error::DimensionMismatch(format!("{} ids for {} rows", ids.len(), m.rows)));
        }
    }
    let header = serde_json::to_vec(&Header {
        dtype: m.dtype(),
        shape: [m.rows, m.cols],
        order: "row-major".into(),
        ids: m.ids.clone(),
    })
    .map_err(|e| Error::Internal(format!("fmat header: {e}")))?;
    let header_len = u32::try_from(header.len())
        .map_err(|_| Error::Validation("fmat header exceeds 4 GiB".into()))?;

    let mut out = Vec::with_capacity(PREAMBLE + header.len() + m.len() * m.dtype().width());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&header);
    match &m.data {
        FmatData::F32(d) => d.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        FmatData::F64(d) => d.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
    }
    Ok(out)
}

pub fn decode_fmat(bytes: &[u8]) -> Result<Fmat, FormatError> {
    if bytes.len() < 4 {
        return Err(FormatError::Truncated {
            offset: bytes.len() as u64,
            what: "magic",
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if &magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let Some(&version) = bytes.get(4) else {
        return Err(FormatError::Truncated {
            offset: 4,
            what: "version",
        });
    };
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(u64::from(version)));
    }
    if bytes.len() < PREAMBLE {
        return Err(FormatError::Truncated {
            offset: bytes.len() as u64,
            what: "header length",
        });
    }
    let header_len = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let payload_start = PREAMBLE + header_len;
    if bytes.len() < payload_start {
        return Err(FormatError::Truncated {
            offset: bytes.len() as u64,
            what: "header",
        });
    }
    let header: Header = serde_json::from_slice(&bytes[PREAMBLE..payload_start]).map_err(|e| {
        FormatError::Header {
            offset: (PREAMBLE + e.column().saturating_sub(1)) as u64,
            message: e.to_string(),
        }
    })?;
    if header.order != "row-major" {
        return Err(FormatError::Header {
            offset: PREAMBLE as u64,
            message: format!("unsupported order `{}`", header.order),
        });
    }
    let [rows, cols] = header.shape;
    if let Some(ids) = &header.ids {
        if ids.len() != rows {
            return Err(FormatError::Shape(format!("{} ids for {rows} rows", ids.len())));
        }
    }
    let width = header.dtype.width();
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(width))
        .ok_or_else(|| FormatError::Shape(format!("shape {rows}x{cols} overflows")))?;
    let payload = &bytes[payload_start..];
    if payload.len() != expected {
        return Err(FormatError::PayloadLength {
            expected: expected as u64,
            actual: payload.len() as u64,
        });
    }
    let data = match header.dtype {
        Dtype::F32 => FmatData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect(),
        ),
        Dtype::F64 => FmatData::F64(
            payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
        ),
    };
    Ok(Fmat {
        rows,
        cols,
        data,
        ids: header.ids,
    })
}

pub fn write_fmat(m: &Fmat, path: &Path) -> Result<()> {
    let bytes = encode_fmat(m)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_fmat(path: &Path) -> Result<Fmat> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_fmat(&bytes)?)
}
