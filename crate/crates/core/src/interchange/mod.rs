//! File formats shared with the feature extractor and the CLI.

mod fmat;
mod voxel_meta;
mod word_states;

use std::path::Path;

pub use fmat::{decode_fmat, encode_fmat, read_fmat, write_fmat, Dtype, Fmat, FmatData, MAGIC, VERSION};
pub use voxel_meta::{
    assemble_responses, decode_voxel_meta, encode_voxel_meta, read_responses, read_voxel_meta, write_voxel_meta,
    VOXEL_META_HEADER,
};
pub use word_states::{decode_word_states, encode_word_states, read_word_states, write_word_states};

use crate::encoding::VoxelResponseMatrix;
use crate::error::{FormatError, Result};
use crate::features::{FeatureMatrix, FeatureSource};

/// Interpret an FMAT with row ids as a feature matrix.
pub fn feature_matrix_from_fmat(m: &Fmat, source: FeatureSource) -> Result<FeatureMatrix> {
    let ids = m.ids.clone().ok_or_else(|| FormatError::Header {
        offset: 9,
        message: "feature matrix needs image ids".into(),
    })?;
    FeatureMatrix::new(m.to_f64(), ids, source)
}

pub fn read_feature_matrix(path: &Path, source: FeatureSource) -> Result<FeatureMatrix> {
    feature_matrix_from_fmat(&read_fmat(path)?, source)
}

pub fn write_feature_matrix(m: &FeatureMatrix, path: &Path, dtype: Dtype) -> Result<()> {
    let ids = Some(m.image_ids.clone());
    let f = match dtype {
        Dtype::F32 => Fmat::from_f64_as_f32(&m.values, ids),
        Dtype::F64 => Fmat::from_f64(&m.values, ids),
    };
    write_fmat(&f, path)
}

/// Responses as an f64 FMAT with image ids; metadata goes to a separate CSV.
pub fn responses_to_fmat(r: &VoxelResponseMatrix) -> Fmat {
    Fmat::from_f64(&r.values, Some(r.image_ids.clone()))
}
