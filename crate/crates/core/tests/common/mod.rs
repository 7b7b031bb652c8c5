#![allow(clippy::needless_range_loop)]

//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, d), || StandardNormal.sample(rng))
}

/// Columns of the Q factor of a Gaussian matrix.
pub fn orthonormal(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    let g = gaussian(rng, n, n);
    let m = DMatrix::from_fn(n, n, |i, j| g[(i, j)]);
    let q = m.qr().q();
    Array2::from_shape_fn((n, n), |(i, j)| q[(i, j)])
}

/// Every comparable subset, scored as the selection rule prescribes.
pub fn brute_force_select(cands: &[(usize, f64)], ratio: f64) -> Vec<usize> {
    let top = cands.iter().map(|c| c.1).fold(0.0, f64::max);
    if top == 0.0 {
        return vec![cands.iter().map(|c| c.0).min().unwrap()];
    }
    let mut best: Option<(f64, bool, usize, Vec<usize>)> = None;
    for mask in 1u32..(1 << cands.len()) {
        let subset: Vec<(usize, f64)> = (0..cands.len()).filter(|b| mask & (1 << b) != 0).map(|b| cands[b]).collect();
        let max = subset.iter().map(|c| c.1).fold(f64::MIN, f64::max);
        let min = subset.iter().map(|c| c.1).fold(f64::MAX, f64::min);
        if max > ratio * min {
            continue;
        }
        let energy: f64 = subset.iter().map(|c| c.1 * c.1).sum();
        let has_top = subset.iter().any(|c| c.1 == top);
        let mut idx: Vec<usize> = subset.iter().map(|c| c.0).collect();
        idx.sort_unstable();
        let key = (energy, has_top, subset.len(), idx);
        let wins = match &best {
            None => true,
            Some(b) => {
                key.0 > b.0
                    || key.0 == b.0
                        && (key.1 && !b.1 || key.1 == b.1 && (key.2 < b.2 || key.2 == b.2 && key.3 < b.3))
            }
        };
        if wins {
            best = Some(key);
        }
    }
    best.unwrap().3
}

/// Least squares on `support` via the normal equations and Gaussian
/// elimination with partial pivoting. Returns (coefficients, intercept).
pub fn normal_equations(x: &Array2<f64>, y: &Array1<f64>, support: &[usize], intercept: bool) -> (Vec<f64>, f64) {
    let n = x.nrows();
    let off = usize::from(intercept);
    let k = support.len() + off;
    let col = |i: usize, c: usize| if intercept && c == 0 { 1.0 } else { x[(i, support[c - off])] };
    let mut a = vec![vec![0.0; k + 1]; k];
    for r in 0..k {
        for c in 0..k {
            a[r][c] = (0..n).map(|i| col(i, r) * col(i, c)).sum();
        }
        a[r][k] = (0..n).map(|i| col(i, r) * y[i]).sum();
    }
    for p in 0..k {
        let piv = (p..k).max_by(|&i, &j| a[i][p].abs().total_cmp(&a[j][p].abs())).unwrap();
        a.swap(p, piv);
        for r in p + 1..k {
            let f = a[r][p] / a[p][p];
            for c in p..=k {
                a[r][c] -= f * a[p][c];
            }
        }
    }
    let mut sol = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| a[r][c] * sol[c]).sum();
        sol[r] = (a[r][k] - s) / a[r][r];
    }
    let b0 = if intercept { sol[0] } else { 0.0 };
    (sol[off..].to_vec(), b0)
}

pub fn columnwise_max(rows: &[Vec<f32>]) -> Vec<f32> {
    let mut out = rows[0].clone();
    for r in &rows[1..] {
        for (o, v) in out.iter_mut().zip(r) {
            if *v > *o {
                *o = *v;
            }
        }
    }
    out
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// P(T > t) for Student t with `nu` degrees of freedom. With t = √nu·tan θ
/// the density becomes proportional to cos^(nu-1) θ on (-π/2, π/2).
pub fn t_upper_tail(t: f64, nu: f64) -> f64 {
    let half = std::f64::consts::FRAC_PI_2;
    let k = |th: f64| th.cos().powf(nu - 1.0);
    simpson(k, (t / nu.sqrt()).atan(), half, 20_000) / (2.0 * simpson(k, 0.0, half, 20_000))
}

/// Critical |r| for `n` pairs at level `p`, found by bisection on the tail.
pub fn critical_r(n: usize, p: f64, two_tailed: bool) -> f64 {
    let nu = (n - 2) as f64;
    let target = if two_tailed { p / 2.0 } else { p };
    let (mut lo, mut hi) = (0.0, 1e3);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_upper_tail(mid, nu) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    t / (t * t + nu).sqrt()
}

/// Checks `value` against the subset of JSON Schema used in `docs/schemas`:
/// type, enum, const, properties, required, additionalProperties (bool),
/// items, minItems, minimum, maximum and local `$ref`s into `$defs`.
pub fn schema_errors(root: &Value, schema: &Value, value: &Value, path: &str, out: &mut Vec<String>) {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        let name = r.strip_prefix("#/$defs/").expect("local ref");
        return schema_errors(root, &root["$defs"][name], value, path, out);
    }
    if let Some(types) = schema.get("type") {
        let types: Vec<&str> = match types {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
            _ => panic!("bad type keyword at {path}"),
        };
        let ok = types.iter().any(|t| match *t {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "number" => value.is_number(),
            "integer" => value.is_u64() || value.is_i64(),
            "boolean" => value.is_boolean(),
            "null" => value.is_null(),
            _ => panic!("unknown type {t}"),
        });
        if !ok {
            out.push(format!("{path}: expected {types:?}, got {value}"));
            return;
        }
    }
    if let Some(e) = schema.get("enum").and_then(Value::as_array) {
        if !e.contains(value) {
            out.push(format!("{path}: {value} not in enum"));
        }
    }
    if let Some(c) = schema.get("const") {
        if c != value {
            out.push(format!("{path}: expected const {c}"));
        }
    }
    if let (Some(min), Some(v)) = (schema.get("minimum").and_then(Value::as_f64), value.as_f64()) {
        if v < min {
            out.push(format!("{path}: {v} < {min}"));
        }
    }
    if let (Some(max), Some(v)) = (schema.get("maximum").and_then(Value::as_f64), value.as_f64()) {
        if v > max {
            out.push(format!("{path}: {v} > {max}"));
        }
    }
    if let Some(obj) = value.as_object() {
        let props = schema.get("properties").and_then(Value::as_object);
        for req in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
            let req = req.as_str().unwrap();
            if !obj.contains_key(req) {
                out.push(format!("{path}: missing `{req}`"));
            }
        }
        for (k, v) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(sub) => schema_errors(root, sub, v, &format!("{path}.{k}"), out),
                None => {
                    if schema.get("additionalProperties") == Some(&Value::Bool(false)) {
                        out.push(format!("{path}: unexpected `{k}`"));
                    }
                }
            }
        }
    }
    if let Some(arr) = value.as_array() {
        if let Some(min) = schema.get("minItems").and_then(Value::as_u64) {
            if (arr.len() as u64) < min {
                out.push(format!("{path}: fewer than {min} items"));
            }
        }
        if let Some(items) = schema.get("items") {
            for (i, v) in arr.iter().enumerate() {
                schema_errors(root, items, v, &format!("{path}[{i}]"), out);
            }
        }
    }
}

pub fn assert_matches_schema(schema_file: &str, json: &str) {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas").join(schema_file);
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(&path).expect("schema file")).unwrap();
    let value: Value = serde_json::from_str(json).unwrap();
    let mut errs = Vec::new();
    schema_errors(&schema, &schema, &value, "$", &mut errs);
    assert!(errs.is_empty(), "{schema_file}: {errs:#?}");
}

/// Predict every caption word by hand and take the `k` smallest absolute
/// errors, earlier positions first on ties.
pub fn word_oracle(
    set: &voxenc::encoding::EncodingModelSet,
    voxel: usize,
    seq: &voxenc::features::WordStateSequence,
    observed: f64,
    k: usize,
) -> Vec<String> {
    let m = &set.models[voxel].solution;
    let dim = set.feature_dim;
    let dense = m.dense(dim);
    let st = &set.standardization;
    let mut errors: Vec<(usize, f64)> = (1..seq.len() - 1)
        .map(|r| {
            let mut p = m.intercept;
            for j in 0..dim {
                p += dense[j] * (f64::from(seq.states[(r, j)]) - st.means[j]) / st.stds[j];
            }
            (r, (p - observed).abs())
        })
        .collect();
    let mut out = Vec::new();
    while out.len() < k && !errors.is_empty() {
        let mut best = 0;
        for i in 1..errors.len() {
            if errors[i].1 < errors[best].1 {
                best = i;
            }
        }
        out.push(seq.tokens[errors.remove(best).0].clone());
    }
    out
}

fn svg_attr(tag: &str, name: &str) -> f64 {
    let key = format!(" {name}=\"");
    let start = tag.find(&key).unwrap_or_else(|| panic!("no {name} in {tag}")) + key.len();
    tag[start..].split('"').next().unwrap().parse().unwrap()
}

/// `(x0, y0, x1, y1, count)` of every `<text>` element, from its centre,
/// `textLength` and `font-size`.
pub fn svg_word_boxes(svg: &str) -> Vec<(f64, f64, f64, f64, u64)> {
    svg.lines()
        .filter(|l| l.starts_with("<text"))
        .map(|l| {
            let (x, y) = (svg_attr(l, "x"), svg_attr(l, "y"));
            let (w, h) = (svg_attr(l, "textLength"), svg_attr(l, "font-size"));
            (x - w / 2.0, y - h / 2.0, x + w / 2.0, y + h / 2.0, svg_attr(l, "data-count") as u64)
        })
        .collect()
}

/// First pair of boxes with a positive-area intersection.
pub fn first_overlap(boxes: &[(f64, f64, f64, f64, u64)]) -> Option<(usize, usize)> {
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            let (a, b) = (boxes[i], boxes[j]);
            if !(a.2 <= b.0 || b.2 <= a.0 || a.3 <= b.1 || b.3 <= a.1) {
                return Some((i, j));
            }
        }
    }
    None
}
