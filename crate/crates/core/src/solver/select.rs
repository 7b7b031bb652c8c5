use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Outcome of the comparable-subset step.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Selected candidate indices, ascending.
    pub indices: Vec<usize>,
    /// Sum of squared magnitudes over the selection.
    pub energy: f64,
    /// Set when every candidate magnitude was zero.
    pub degenerate: bool,
}

/// Pick the maximal-energy comparable subset of `candidates`.
///
/// A subset is comparable when `max <= ratio * min` over its magnitudes.
/// Any positive-energy optimum contains every candidate whose magnitude lies
/// between its minimum and maximum, so it is enough to scan the windows of
/// the magnitude-sorted list that start at each distinct magnitude. Ties on
/// energy prefer the window holding the largest magnitude, then the smaller
/// window, then the lexicographically lowest index list.
pub fn regularize_select(candidates: &[(usize, f64)], ratio: f64) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::Validation("regularize_select needs at least one candidate".into()));
    }
    if !(ratio.is_finite() && ratio >= 1.0) {
        return Err(Error::Validation(format!("comparability ratio must be >= 1, got {ratio}")));
    }
    if let Some(&(i, m)) = candidates.iter().find(|(_, m)| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::Validation(format!(
            "candidate {i} has invalid magnitude {m}"
        )));
    }

    let mut sorted: Vec<(usize, f64)> = candidates.to_vec();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    if sorted[0].1 == 0.0 {
        let first = candidates.iter().map(|c| c.0).min().unwrap_or(sorted[0].0);
        return Ok(Selection {
            indices: vec![first],
            energy: 0.0,
            degenerate: true,
        });
    }

    let top = sorted[0].1;
    let mut best: Option<Selection> = None;
    let mut start = 0;
    while start < sorted.len() {
        let max = sorted[start].1;
        if max == 0.0 {
            break;
        }
        let mut end = start;
        while end < sorted.len() && max <= ratio * sorted[end].1 {
            end += 1;
        }
        let window = &sorted[start..end];
        let energy: f64 = window.iter().map(|(_, m)| m * m).sum();
        let mut indices: Vec<usize> = window.iter().map(|(i, _)| *i).collect();
        indices.sort_unstable();
        let cand = Selection {
            indices,
            energy,
            degenerate: false,
        };
        if best.as_ref().is_none_or(|b| better(&cand, b, top, &sorted) == Ordering::Greater) {
            best = Some(cand);
        }

        // next distinct magnitude
        let mut next = start + 1;
        while next < sorted.len() && sorted[next].1 == max {
            next += 1;
        }
        start = next;
    }

    Ok(best.expect("at least one positive window"))
}

fn contains_top(sel: &Selection, top: f64, sorted: &[(usize, f64)]) -> bool {
    sorted
        .iter()
        .take_while(|(_, m)| *m == top)
        .any(|(i, _)| sel.indices.binary_search(i).is_ok())
}

fn better(a: &Selection, b: &Selection, top: f64, sorted: &[(usize, f64)]) -> Ordering {
    a.energy
        .total_cmp(&b.energy)
        .then_with(|| contains_top(a, top, sorted).cmp(&contains_top(b, top, sorted)))
        .then_with(|| b.indices.len().cmp(&a.indices.len()))
        .then_with(|| b.indices.cmp(&a.indices))
}
