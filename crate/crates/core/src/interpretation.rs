//! Word-level voxel interpretation.
//!
//! Each word state of a caption is pushed through a voxel's model as if it
//! were a pooled image feature; the words whose single-state predictions
//! land closest to the observed response are credited to the voxel.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{EncodingModelSet, VoxelPredictor, VoxelResponseMatrix};
use crate::error::{Error, Result};
use crate::features::{PoolOptions, WordStateSequence};
use crate::par::{self, Execution};

pub const DEFAULT_WORDS_PER_IMAGE: usize = 2;
pub const DEFAULT_STOPWORDS: [&str; 12] = ["a", "an", "the", "of", "and", "to", "in", "on", "is", "are", "with", "at"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedWord {
    pub token: String,
    /// Row of the word in its caption.
    pub position: usize,
    /// |single-state prediction - observed response|
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordSelection {
    pub image_id: String,
    /// All words, by ascending error then caption position.
    pub ranked: Vec<RankedWord>,
    /// The first `k` tokens of `ranked`.
    pub selected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordAttribution {
    pub voxel_id: String,
    pub per_image: Vec<WordSelection>,
}

/// Rank a caption's words by how well each state alone predicts `observed`.
pub fn attribute_words(
    predictor: VoxelPredictor<'_>,
    seq: &WordStateSequence,
    observed: f64,
    k: usize,
    opts: &PoolOptions,
) -> Result<WordSelection> {
    if k == 0 {
        return Err(Error::Validation("words per image must be at least 1".into()));
    }
    if predictor.standardization.dim() != opts.state_dim {
        return Err(Error::DimensionMismatch(format!(
            "model expects {} features but word states have {}",
            predictor.standardization.dim(),
            opts.state_dim
        )));
    }
    let rows = opts.word_rows(seq)?;
    let mut ranked = rows
        .into_iter()
        .map(|r| {
            let pred = predictor.predict_raw(seq.states.row(r).iter().map(|&v| f64::from(v)))?;
            Ok(RankedWord {
                token: seq.tokens[r].clone(),
                position: r,
                error: (pred - observed).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| a.error.total_cmp(&b.error).then(a.position.cmp(&b.position)));
    let selected = ranked.iter().take(k).map(|w| w.token.clone()).collect();
    Ok(WordSelection {
        image_id: seq.image_id.clone(),
        ranked,
        selected,
    })
}

/// Attribute words for one voxel over every caption in `seqs`, taking the
/// observed value for each image from `responses`.
pub fn attribute_voxel(
    set: &EncodingModelSet,
    voxel_id: &str,
    seqs: &[WordStateSequence],
    responses: &VoxelResponseMatrix,
    k: usize,
    opts: &PoolOptions,
) -> Result<WordAttribution> {
    let predictor = set
        .find(voxel_id)
        .ok_or_else(|| Error::Validation(format!("no model for voxel `{voxel_id}`")))?;
    let col = responses
        .voxels
        .iter()
        .position(|v| v.voxel_id == voxel_id)
        .ok_or_else(|| Error::Validation(format!("no responses for voxel `{voxel_id}`")))?;
    let rows: HashMap<&str, usize> = responses
        .image_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let per_image = seqs
        .iter()
        .map(|seq| {
            let row = *rows.get(seq.image_id.as_str()).ok_or_else(|| {
                Error::Alignment(format!("image `{}` has no response", seq.image_id))
            })?;
            attribute_words(predictor, seq, responses.values[(row, col)], k, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WordAttribution {
        voxel_id: voxel_id.to_string(),
        per_image,
    })
}

/// [`attribute_voxel`] for several voxels, in the given order.
pub fn attribute_voxels(
    set: &EncodingModelSet,
    voxel_ids: &[String],
    seqs: &[WordStateSequence],
    responses: &VoxelResponseMatrix,
    k: usize,
    opts: &PoolOptions,
    exec: Execution,
) -> Result<Vec<WordAttribution>> {
    par::map_indexed(exec, voxel_ids.len(), |i| {
        attribute_voxel(set, &voxel_ids[i], seqs, responses, k, opts)
    })
    .into_iter()
    .collect()
}

/// Lowercased words dropped before counting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWords(BTreeSet<String>);

impl StopWords {
    pub fn new<I: IntoIterator<Item = S>, S: AsRef<str>>(words: I) -> Self {
        StopWords(words.into_iter().map(|w| w.as_ref().to_lowercase()).collect())
    }

    pub fn none() -> Self {
        StopWords(BTreeSet::new())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }
}

impl Default for StopWords {
    fn default() -> Self {
        StopWords::new(DEFAULT_STOPWORDS)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordFrequencyTable {
    pub voxel_id: String,
    pub counts: BTreeMap<String, u64>,
    pub total_selections: u64,
}

impl WordFrequencyTable {
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Entries by descending count, then token.
    pub fn sorted(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<(&str, u64)> = self.counts.iter().map(|(k, &c)| (k.as_str(), c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        v
    }

    /// `token,count` rows, most frequent first.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        // writing to a Vec cannot fail
        w.write_record(["token", "count"]).expect("in-memory csv");
        for (t, c) in self.sorted() {
            w.write_record([t, &c.to_string()]).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 tokens")
    }

    pub fn from_csv(voxel_id: &str, text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut counts = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let bad = |m: String| Error::Validation(format!("frequency table row {}: {m}", i + 2));
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if rec.len() != 2 {
                return Err(bad(format!("expected 2 fields, found {}", rec.len())));
            }
            let c: u64 = rec[1].parse().map_err(|_| bad(format!("bad count `{}`", &rec[1])))?;
            if c == 0 {
                return Err(bad("counts must be positive".into()));
            }
            *counts.entry(rec[0].to_string()).or_insert(0) += c;
        }
        let total_selections = counts.values().sum();
        Ok(WordFrequencyTable {
            voxel_id: voxel_id.to_string(),
            counts,
            total_selections,
        })
    }
}

/// Count the selected words over all images, lowercased and minus stopwords.
pub fn build_frequency_table(
    voxel_id: &str,
    selections: &[WordSelection],
    stopwords: &StopWords,
) -> Result<WordFrequencyTable> {
    if selections.is_empty() {
        return Err(Error::Validation(format!("voxel {voxel_id}: no attributions to count")));
    }
    let mut counts = BTreeMap::new();
    for token in selections.iter().flat_map(|s| &s.selected) {
        let token = token.to_lowercase();
        if !stopwords.contains(&token) {
            *counts.entry(token).or_insert(0u64) += 1;
        }
    }
    if counts.is_empty() {
        log::warn!("voxel {voxel_id}: every selected word was a stopword");
    }
    let total_selections = counts.values().sum();
    Ok(WordFrequencyTable {
        voxel_id: voxel_id.to_string(),
        counts,
        total_selections,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudStyle {
    pub min_font: f64,
    pub max_font: f64,
    pub font_family: String,
    pub palette: Vec<String>,
    pub background: String,
    pub seed: u64,
    /// Glyph advance as a fraction of font size.
    pub char_width: f64,
    pub padding: f64,
}

impl Default for CloudStyle {
    fn default() -> Self {
        CloudStyle {
            min_font: 12.0,
            max_font: 64.0,
            font_family: "Helvetica, Arial, sans-serif".into(),
            palette: [
                "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
                "#17becf",
            ]
            .map(String::from)
            .to_vec(),
            background: "#ffffff".into(),
            seed: 0,
            char_width: 0.6,
            padding: 1.0,
        }
    }
}

/// One word's position in a cloud; `(x, y)` is the box centre.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedWord {
    pub token: String,
    pub count: u64,
    pub x: f64,
    pub y: f64,
    pub font_size: f64,
    pub width: f64,
    pub height: f64,
    pub color: String,
}

impl PlacedWord {
    fn overlaps(&self, other: &PlacedWord, pad: f64) -> bool {
        (self.x - other.x).abs() * 2.0 < self.width + other.width + 2.0 * pad
            && (self.y - other.y).abs() * 2.0 < self.height + other.height + 2.0 * pad
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Place words on an Archimedean spiral, biggest first.
///
/// Font size grows linearly with count between `min_font` and `max_font`.
/// Coordinates are rounded to 0.01 before collision checks so the emitted
/// SVG reproduces the checked geometry.
pub fn layout_wordcloud(table: &WordFrequencyTable, style: &CloudStyle) -> Result<Vec<PlacedWord>> {
    if table.is_empty() {
        return Err(Error::Validation(format!(
            "voxel {}: frequency table is empty; review the significance threshold or stopword list",
            table.voxel_id
        )));
    }
    if style.palette.is_empty() || !(style.min_font > 0.0 && style.max_font >= style.min_font) {
        return Err(Error::Validation("invalid word-cloud style".into()));
    }
    let words = table.sorted();
    let cmax = words[0].1 as f64;
    let cmin = words[words.len() - 1].1 as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(style.seed);
    let start_angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let step = 0.1;
    let spacing = 2.0;

    let mut placed: Vec<PlacedWord> = Vec::with_capacity(words.len());
    for (rank, (token, count)) in words.into_iter().enumerate() {
        let frac = if cmax > cmin { (count as f64 - cmin) / (cmax - cmin) } else { 1.0 };
        let font_size = round2(style.min_font + (style.max_font - style.min_font) * frac);
        let mut word = PlacedWord {
            token: token.to_string(),
            count,
            x: 0.0,
            y: 0.0,
            font_size,
            width: round2(style.char_width * font_size * token.chars().count() as f64),
            height: font_size,
            color: style.palette[rank % style.palette.len()].clone(),
        };
        let mut t = 0.0f64;
        loop {
            let r = spacing * t / std::f64::consts::TAU;
            let a = start_angle + t;
            word.x = round2(r * a.cos());
            word.y = round2(r * a.sin());
            if placed.iter().all(|p| !p.overlaps(&word, style.padding)) {
                break;
            }
            t += step;
        }
        placed.push(word);
    }
    Ok(placed)
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Render a frequency table as a standalone SVG document.
///
/// Each word is a `<text>` centred on `(x, y)` whose rendered width is pinned
/// with `textLength`, so its box is `textLength` by `font-size`.
pub fn render_wordcloud_svg(table: &WordFrequencyTable, style: &CloudStyle) -> Result<String> {
    let words = layout_wordcloud(table, style)?;
    let margin = 4.0;
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for w in &words {
        x0 = x0.min(w.x - w.width / 2.0);
        x1 = x1.max(w.x + w.width / 2.0);
        y0 = y0.min(w.y - w.height / 2.0);
        y1 = y1.max(w.y + w.height / 2.0);
    }
    let (vx, vy) = (round2(x0 - margin), round2(y0 - margin));
    let (vw, vh) = (round2(x1 - x0 + 2.0 * margin), round2(y1 - y0 + 2.0 * margin));

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{vw:.2}" height="{vh:.2}" viewBox="{vx:.2} {vy:.2} {vw:.2} {vh:.2}">"#
    );
    let _ = writeln!(svg, "<title>{}</title>", escape_xml(&table.voxel_id));
    let _ = writeln!(
        svg,
        r#"<rect x="{vx:.2}" y="{vy:.2}" width="{vw:.2}" height="{vh:.2}" fill="{}"/>"#,
        escape_xml(&style.background)
    );
    for w in &words {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="{:.2}" font-family="{}" fill="{}" text-anchor="middle" dominant-baseline="central" textLength="{:.2}" lengthAdjust="spacingAndGlyphs" data-count="{}">{}</text>"#,
            w.x,
            w.y,
            w.font_size,
            escape_xml(&style.font_family),
            escape_xml(&w.color),
            w.width,
            w.count,
            escape_xml(&w.token)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Cosine similarity between two count vectors over their joint vocabulary.
pub fn word_distribution_similarity(a: &WordFrequencyTable, b: &WordFrequencyTable) -> Result<f64> {
    for t in [a, b] {
        if t.is_empty() {
            return Err(Error::Validation(format!("voxel {}: empty frequency table", t.voxel_id)));
        }
    }
    let dot: f64 = a
        .counts
        .iter()
        .filter_map(|(w, &ca)| b.counts.get(w).map(|&cb| ca as f64 * cb as f64))
        .sum();
    let na: f64 = a.counts.values().map(|&c| (c as f64).powi(2)).sum();
    let nb: f64 = b.counts.values().map(|&c| (c as f64).powi(2)).sum();
    Ok((dot / (na * nb).sqrt()).clamp(0.0, 1.0))
}

/// A frequency table tagged with the group (region, subject, ...) it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTable {
    pub group: String,
    pub table: WordFrequencyTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarPair {
    pub a: String,
    pub b: String,
    pub group_a: String,
    pub group_b: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub labels: Vec<String>,
    pub groups: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Most similar pairs whose members sit in different groups.
    pub top_pairs: Vec<SimilarPair>,
}

impl SimilarityMatrix {
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header).expect("in-memory csv");
        for (label, row) in self.labels.iter().zip(&self.values) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 labels")
    }
}

pub fn similarity_matrix(tables: &[LabeledTable], top_n: usize) -> Result<SimilarityMatrix> {
    let n = tables.len();
    if n < 2 {
        return Err(Error::Validation(format!("similarity matrix needs at least 2 tables, got {n}")));
    }
    let mut values = vec![vec![0.0; n]; n];
    let mut pairs = Vec::new();
    for i in 0..n {
        values[i][i] = 1.0;
        for j in i + 1..n {
            let s = word_distribution_similarity(&tables[i].table, &tables[j].table)?;
            values[i][j] = s;
            values[j][i] = s;
            if tables[i].group != tables[j].group {
                pairs.push((i, j, s));
            }
        }
    }
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    let top_pairs = pairs
        .into_iter()
        .take(top_n)
        .map(|(i, j, s)| SimilarPair {
            a: tables[i].table.voxel_id.clone(),
            b: tables[j].table.voxel_id.clone(),
            group_a: tables[i].group.clone(),
            group_b: tables[j].group.clone(),
            similarity: s,
        })
        .collect();
    Ok(SimilarityMatrix {
        labels: tables.iter().map(|t| t.table.voxel_id.clone()).collect(),
        groups: tables.iter().map(|t| t.group.clone()).collect(),
        values,
        top_pairs,
    })
}
