use std::collections::HashSet;
use std::path::Path;

use super::fmat::read_fmat;
use crate::encoding::{VoxelInfo, VoxelResponseMatrix};
use crate::error::{Error, FormatError, Result};

pub const VOXEL_META_HEADER: [&str; 4] = ["voxel_id", "subject", "roi", "hemisphere"];

/// Parse voxel metadata CSV (`voxel_id,subject,roi,hemisphere`).
pub fn decode_voxel_meta(text: &str) -> Result<Vec<VoxelInfo>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| csv_error(&e))?.clone();
    if header.iter().collect::<Vec<_>>() != VOXEL_META_HEADER {
        return Err(FormatError::Line {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                VOXEL_META_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        }
        .into());
    }

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(&e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let voxel_id = field(0).to_string();
        if voxel_id.is_empty() {
            return Err(FormatError::Line {
                line,
                message: "empty voxel_id".into(),
            }
            .into());
        }
        let roi = field(2).parse().map_err(|value| FormatError::Enumeration {
            field: "roi",
            value,
            line,
        })?;
        let hemisphere = field(3).parse().map_err(|value| FormatError::Enumeration {
            field: "hemisphere",
            value,
            line,
        })?;
        if !seen.insert(voxel_id.clone()) {
            return Err(FormatError::Line {
                line,
                message: format!("duplicate voxel_id `{voxel_id}`"),
            }
            .into());
        }
        out.push(VoxelInfo {
            voxel_id,
            subject: field(1).to_string(),
            roi,
            hemisphere,
        });
    }
    Ok(out)
}

pub fn encode_voxel_meta(voxels: &[VoxelInfo]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Internal(e.to_string());
    w.write_record(VOXEL_META_HEADER).map_err(io)?;
    for v in voxels {
        w.write_record([v.voxel_id.as_str(), &v.subject, v.roi.as_str(), v.hemisphere.as_str()])
            .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

pub fn read_voxel_meta(path: &Path) -> Result<Vec<VoxelInfo>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_voxel_meta(&text)
}

pub fn write_voxel_meta(voxels: &[VoxelInfo], path: &Path) -> Result<()> {
    std::fs::write(path, encode_voxel_meta(voxels)?).map_err(|e| Error::io(path, e))
}

/// Assemble a response matrix from an FMAT (rows = images, ids required)
/// and its voxel metadata (one record per column).
pub fn assemble_responses(m: &super::Fmat, voxels: Vec<VoxelInfo>) -> Result<VoxelResponseMatrix> {
    if m.cols != voxels.len() {
        return Err(FormatError::CountMismatch(format!(
            "response matrix has {} columns but metadata lists {} voxels",
            m.cols,
            voxels.len()
        ))
        .into());
    }
    let ids = m.ids.clone().ok_or_else(|| FormatError::Header {
        offset: 9,
        message: "response matrix needs image ids".into(),
    })?;
    VoxelResponseMatrix::new(m.to_f64(), ids, voxels)
}

pub fn read_responses(fmat_path: &Path, meta_path: &Path) -> Result<VoxelResponseMatrix> {
    let m = read_fmat(fmat_path)?;
    let voxels = read_voxel_meta(meta_path)?;
    assemble_responses(&m, voxels)
}

fn csv_error(e: &csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    FormatError::Line {
        line,
        message: e.to_string(),
    }
    .into()
}
