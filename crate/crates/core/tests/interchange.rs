mod common;

use ndarray::Array2;
use proptest::prelude::*;
use voxenc::encoding::{load_models, models_from_json, models_to_json, save_models, train_voxelwise, EncodingConfig};
use voxenc::encoding::{Hemisphere, Roi, VoxelInfo, VoxelResponseMatrix};
use voxenc::features::{FeatureMatrix, FeatureSource, WordStateSequence};
use voxenc::interchange::*;
use voxenc::solver::SolverConfig;
use voxenc::{Error, FormatError};

fn fmat_bits(m: &Fmat) -> Vec<u64> {
    match &m.data {
        FmatData::F32(d) => d.iter().map(|v| u64::from(v.to_bits())).collect(),
        FmatData::F64(d) => d.iter().map(|v| v.to_bits()).collect(),
    }
}

#[test]
fn two_by_three_f32_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.fmat");
    let m = Fmat::from_f32(&ndarray::array![[0.1f32, -2.5, 3e-38], [f32::MAX, 0.0, -0.0]], None);
    write_fmat(&m, &path).unwrap();
    let back = read_fmat(&path).unwrap();
    assert_eq!(fmat_bits(&back), fmat_bits(&m));
    assert_eq!((back.rows, back.cols), (2, 3));
}

#[test]
fn documented_example_bytes() {
    let header = br#"{"dtype":"f32","shape":[2,3],"order":"row-major","ids":["img1","img2"]}"#;
    let mut bytes = b"FMAT\x01".to_vec();
    bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
    bytes.extend_from_slice(header);
    for v in [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.5] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    assert_eq!(bytes.len(), 104);
    assert_eq!(&bytes[4..9], &[0x01, 0x47, 0x00, 0x00, 0x00]);
    assert_eq!(&bytes[80..84], &[0x00, 0x00, 0x80, 0x3f]);
    let m = decode_fmat(&bytes).unwrap();
    assert_eq!(m.to_f32(), ndarray::array![[1.0f32, 2.0, 3.0], [4.0, 5.0, 6.5]]);
    assert_eq!(m.ids, Some(vec!["img1".to_string(), "img2".to_string()]));
    assert_eq!(encode_fmat(&m).unwrap(), bytes);
}

#[test]
fn header_claims_more_rows_than_payload() {
    let m = Fmat::from_f64(&Array2::zeros((9, 2)), None);
    let mut bytes = encode_fmat(&m).unwrap();
    let pos = bytes.windows(5).position(|w| w == b"[9,2]").unwrap();
    bytes.splice(pos..pos + 5, *b"[10,2]");
    // header grew by one byte
    let len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) + 1;
    bytes[5..9].copy_from_slice(&len.to_le_bytes());
    assert!(matches!(
        decode_fmat(&bytes),
        Err(FormatError::PayloadLength { expected: 160, actual: 144 })
    ));
}

#[test]
fn missing_file_is_an_io_error() {
    let err = read_fmat(std::path::Path::new("/nonexistent/x.fmat")).unwrap_err();
    assert_eq!(err.category(), voxenc::ErrorCategory::Io);
}

#[test]
fn word_states_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (idx, st) = (dir.path().join("w.jsonl"), dir.path().join("w.fmat"));
    let seqs = vec![
        WordStateSequence::new("a", vec!["<start>".into(), "dog".into()], Array2::from_elem((2, 4), 0.5f32)).unwrap(),
        WordStateSequence::new("b", vec!["cat".into()], Array2::from_elem((1, 4), -1.5f32)).unwrap(),
    ];
    write_word_states(&seqs, &idx, &st).unwrap();
    assert_eq!(read_word_states(&idx, &st, Some(4)).unwrap(), seqs);
    assert!(matches!(read_word_states(&idx, &st, Some(5)), Err(Error::DimensionMismatch(_))));
}

fn voxels(n: usize) -> Vec<VoxelInfo> {
    (0..n)
        .map(|i| VoxelInfo {
            voxel_id: format!("v{i}"),
            subject: "S1".into(),
            roi: Roi::ALL[i % 5],
            hemisphere: if i % 2 == 0 { Hemisphere::L } else { Hemisphere::R },
        })
        .collect()
}

#[test]
fn response_files_assemble() {
    let dir = tempfile::tempdir().unwrap();
    let ids: Vec<String> = (0..4).map(|i| format!("img{i}")).collect();
    let r = VoxelResponseMatrix::new(Array2::from_shape_fn((4, 3), |(i, j)| (i * 3 + j) as f64), ids, voxels(3)).unwrap();
    let (fp, mp) = (dir.path().join("r.fmat"), dir.path().join("v.csv"));
    write_fmat(&responses_to_fmat(&r), &fp).unwrap();
    write_voxel_meta(&r.voxels, &mp).unwrap();
    assert_eq!(read_responses(&fp, &mp).unwrap(), r);

    write_voxel_meta(&voxels(2), &mp).unwrap();
    assert!(matches!(read_responses(&fp, &mp), Err(Error::Format(FormatError::CountMismatch(_)))));
}

fn small_model_set() -> voxenc::encoding::EncodingModelSet {
    let mut r = common::rng(4);
    let x = common::gaussian(&mut r, 30, 6);
    let ids: Vec<String> = (0..30).map(|i| format!("i{i}")).collect();
    let y = x.dot(&ndarray::array![[1.0, 0.0, 0.3], [0.0, -2.0, 0.0], [0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.0, 0.0, 0.1], [0.0, 0.0, 0.0]])
        + 1.0 / 3.0;
    let f = FeatureMatrix::new(x, ids.clone(), FeatureSource::Icf).unwrap();
    let resp = VoxelResponseMatrix::new(y, ids, voxels(3)).unwrap();
    let cfg = EncodingConfig {
        solver: SolverConfig::new(2),
        ..Default::default()
    };
    train_voxelwise(&f, &resp, &cfg).unwrap()
}

#[test]
fn model_file_round_trip_is_exact() {
    let set = small_model_set();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("models.json");
    save_models(&set, &path).unwrap();
    let back = load_models(&path).unwrap();
    assert_eq!(back, set);
    for (a, b) in set.models.iter().zip(&back.models) {
        let bits = |v: &[f64]| v.iter().map(|c| c.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.solution.coefficients), bits(&b.solution.coefficients));
        assert_eq!(a.solution.intercept.to_bits(), b.solution.intercept.to_bits());
    }
}

#[test]
fn model_file_errors() {
    let json = models_to_json(&small_model_set()).unwrap();
    let truncated = &json.as_bytes()[..json.len() / 2];
    match models_from_json(truncated) {
        Err(Error::Format(FormatError::Parse { offset, .. })) => assert!(offset > 0),
        other => panic!("unexpected {other:?}"),
    }
    let v2 = json.replacen("\"version\":1", "\"version\":2", 1);
    assert!(matches!(models_from_json(v2.as_bytes()), Err(Error::Format(FormatError::UnsupportedVersion(2)))));
    assert!(models_from_json(b"{\"format\":\"other\",\"version\":1}").is_err());
}

#[test]
fn model_file_matches_schema() {
    common::assert_matches_schema("models.schema.json", &models_to_json(&small_model_set()).unwrap());
}

proptest! {
    #[test]
    fn f64_round_trip_is_bit_exact(bits in proptest::collection::vec(any::<u64>(), 0..64), cols in 1usize..5) {
        let rows = bits.len() / cols;
        let data: Vec<f64> = bits[..rows * cols].iter().map(|&b| f64::from_bits(b)).collect();
        let ids = Some((0..rows).map(|i| format!("r{i}")).collect());
        let m = Fmat { rows, cols, data: FmatData::F64(data), ids };
        let back = decode_fmat(&encode_fmat(&m).unwrap()).unwrap();
        prop_assert_eq!(fmat_bits(&back), fmat_bits(&m));
        prop_assert_eq!(back.ids, m.ids);
    }

    #[test]
    fn f32_round_trip_is_bit_exact(bits in proptest::collection::vec(any::<u32>(), 0..64), cols in 1usize..5) {
        let rows = bits.len() / cols;
        let data: Vec<f32> = bits[..rows * cols].iter().map(|&b| f32::from_bits(b)).collect();
        let m = Fmat { rows, cols, data: FmatData::F32(data), ids: None };
        let back = decode_fmat(&encode_fmat(&m).unwrap()).unwrap();
        prop_assert_eq!(fmat_bits(&back), fmat_bits(&m));
    }

    #[test]
    fn fmat_reader_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode_fmat(&bytes);
        let mut framed = b"FMAT\x01".to_vec();
        framed.extend(&bytes);
        let _ = decode_fmat(&framed);
    }

    #[test]
    fn corrupted_fmat_never_panics(pos in 0usize..200, byte in any::<u8>(), cut in 0usize..200) {
        let m = Fmat::from_f32(&Array2::from_elem((3, 4), 1.25f32), Some(vec!["a".into(), "b".into(), "c".into()]));
        let mut bytes = encode_fmat(&m).unwrap();
        let n = bytes.len();
        bytes[pos % n] = byte;
        bytes.truncate(n - cut % n);
        let _ = decode_fmat(&bytes);
    }

    #[test]
    fn text_readers_never_panic(text in "\\PC{0,200}") {
        let states = Fmat::from_f32(&Array2::zeros((3, 2)), None);
        let _ = decode_word_states(&text, &states, Some(2));
        let _ = decode_voxel_meta(&text);
        let _ = models_from_json(text.as_bytes());
    }

    #[test]
    fn voxel_meta_round_trip(n in 1usize..30) {
        let v = voxels(n);
        prop_assert_eq!(decode_voxel_meta(&encode_voxel_meta(&v).unwrap()).unwrap(), v);
    }
}
