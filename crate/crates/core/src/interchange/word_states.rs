//! Word-state files: a JSON-lines index plus a companion FMAT of stacked
//! decoder states.
//!
//! Each index line is `{"image_id": .., "tokens": [..], "state_rows": [start, end]}`
//! where `[start, end)` selects that caption's rows of the companion matrix.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::fmat::{read_fmat, write_fmat, Fmat};
use crate::error::{Error, FormatError, Result};
use crate::features::WordStateSequence;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexLine {
    image_id: String,
    tokens: Vec<String>,
    state_rows: [usize; 2],
}

/// Resolve an index (JSON-lines text) against its stacked-state matrix.
pub fn decode_word_states(index: &str, states: &Fmat, state_dim: Option<usize>) -> Result<Vec<WordStateSequence>> {
    if let Some(dim) = state_dim {
        if states.rows > 0 && states.cols != dim {
            return Err(Error::DimensionMismatch(format!(
                "state matrix has {} columns, expected {dim}",
                states.cols
            )));
        }
    }
    let matrix = states.to_f32();

    let mut parsed: Vec<(usize, IndexLine)> = Vec::new();
    for (i, text) in index.lines().enumerate() {
        let line = i + 1;
        if text.trim().is_empty() {
            continue;
        }
        let rec: IndexLine = serde_json::from_str(text).map_err(|e| FormatError::Line {
            line,
            message: e.to_string(),
        })?;
        let [start, end] = rec.state_rows;
        if start > end {
            return Err(FormatError::Line {
                line,
                message: format!("state_rows [{start}, {end}) is reversed"),
            }
            .into());
        }
        if end > states.rows {
            return Err(FormatError::Line {
                line,
                message: format!("state_rows [{start}, {end}) outside {} stored rows", states.rows),
            }
            .into());
        }
        if end - start != rec.tokens.len() {
            return Err(FormatError::Line {
                line,
                message: format!("{} tokens but {} state rows", rec.tokens.len(), end - start),
            }
            .into());
        }
        parsed.push((line, rec));
    }

    if parsed.is_empty() {
        log::warn!("word-state index is empty");
        return Ok(Vec::new());
    }

    let mut by_start: Vec<(usize, usize, usize)> =
        parsed.iter().map(|(l, r)| (r.state_rows[0], r.state_rows[1], *l)).collect();
    by_start.sort_unstable();
    for w in by_start.windows(2) {
        let (_, prev_end, prev_line) = w[0];
        let (start, _, line) = w[1];
        if start < prev_end {
            return Err(FormatError::Line {
                line,
                message: format!("state rows overlap those of line {prev_line}"),
            }
            .into());
        }
    }

    parsed
        .into_iter()
        .map(|(_, rec)| {
            let [start, end] = rec.state_rows;
            let rows = matrix.slice(s![start..end, ..]).to_owned();
            WordStateSequence::new(rec.image_id, rec.tokens, rows)
        })
        .collect()
}

pub fn read_word_states(index_path: &Path, states_path: &Path, state_dim: Option<usize>) -> Result<Vec<WordStateSequence>> {
    let index = fs::read_to_string(index_path).map_err(|e| Error::io(index_path, e))?;
    let states = read_fmat(states_path)?;
    decode_word_states(&index, &states, state_dim)
}

/// Stack `seqs` into an index text and an f32 state matrix.
pub fn encode_word_states(seqs: &[WordStateSequence]) -> Result<(String, Fmat)> {
    let dim = seqs.first().map_or(0, |s| s.states.ncols());
    let total: usize = seqs.iter().map(|s| s.states.nrows()).sum();
    let mut stacked = Array2::<f32>::zeros((total, dim));
    let mut index = String::new();
    let mut row = 0;
    for seq in seqs {
        if seq.states.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "image {}: state dimension {} differs from {dim}",
                seq.image_id,
                seq.states.ncols()
            )));
        }
        let k = seq.states.nrows();
        stacked.slice_mut(s![row..row + k, ..]).assign(&seq.states);
        let line = serde_json::to_string(&IndexLine {
            image_id: seq.image_id.clone(),
            tokens: seq.tokens.clone(),
            state_rows: [row, row + k],
        })
        .map_err(|e| Error::Internal(e.to_string()))?;
        index.push_str(&line);
        index.push('\n');
        row += k;
    }
    Ok((index, Fmat::from_f32(&stacked, None)))
}

pub fn write_word_states(seqs: &[WordStateSequence], index_path: &Path, states_path: &Path) -> Result<()> {
    let (index, states) = encode_word_states(seqs)?;
    let mut f = fs::File::create(index_path).map_err(|e| Error::io(index_path, e))?;
    f.write_all(index.as_bytes()).map_err(|e| Error::io(index_path, e))?;
    write_fmat(&states, states_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn states() -> Fmat {
        Fmat::from_f32(&array![[1.0f32, 2.0], [3.0, 4.0], [5.0, 6.0]], None)
    }

    #[test]
    fn two_images() {
        let index = "{\"image_id\":\"a\",\"tokens\":[\"dog\",\"runs\"],\"state_rows\":[0,2]}\n\
                     {\"image_id\":\"b\",\"tokens\":[\"cat\"],\"state_rows\":[2,3]}\n";
        let seqs = decode_word_states(index, &states(), Some(2)).unwrap();
        assert_eq!(seqs.len(), 2);
        assert_eq!(seqs[0].states.dim(), (2, 2));
        assert_eq!(seqs[1].tokens, vec!["cat"]);
        assert_eq!(seqs[1].states, array![[5.0f32, 6.0]]);
    }

    #[test]
    fn token_count_mismatch_names_the_line() {
        let index = "{\"image_id\":\"a\",\"tokens\":[\"dog\"],\"state_rows\":[0,1]}\n\
                     {\"image_id\":\"b\",\"tokens\":[\"cat\"],\"state_rows\":[1,3]}\n";
        match decode_word_states(index, &states(), None) {
            Err(Error::Format(FormatError::Line { line: 2, .. })) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overlapping_and_out_of_range_rows() {
        let overlap = "{\"image_id\":\"a\",\"tokens\":[\"x\",\"y\"],\"state_rows\":[0,2]}\n\
                       {\"image_id\":\"b\",\"tokens\":[\"z\"],\"state_rows\":[1,2]}\n";
        assert!(matches!(
            decode_word_states(overlap, &states(), None),
            Err(Error::Format(FormatError::Line { line: 2, .. }))
        ));
        let oob = "{\"image_id\":\"a\",\"tokens\":[\"x\",\"y\"],\"state_rows\":[2,4]}\n";
        assert!(matches!(
            decode_word_states(oob, &states(), None),
            Err(Error::Format(FormatError::Line { line: 1, .. }))
        ));
    }

    #[test]
    fn empty_index_gives_empty_list() {
        let empty = Fmat::from_f32(&Array2::zeros((0, 2)), None);
        assert!(decode_word_states("", &empty, Some(2)).unwrap().is_empty());
        assert!(decode_word_states("\n\n", &empty, Some(2)).unwrap().is_empty());
    }

    #[test]
    fn encode_then_decode() {
        let seqs = vec![
            WordStateSequence::new("a", vec!["x".into(), "y".into()], array![[1.0f32, 2.0], [3.0, 4.0]]).unwrap(),
            WordStateSequence::new("b", vec!["z".into()], array![[5.0f32, 6.0]]).unwrap(),
        ];
        let (index, m) = encode_word_states(&seqs).unwrap();
        assert_eq!(decode_word_states(&index, &m, Some(2)).unwrap(), seqs);
    }
}
