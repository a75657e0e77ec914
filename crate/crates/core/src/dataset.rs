//! Binary datasets, KEEL parsing, stratified folds and min-max scaling.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Class id. `1` is always the minority (positive) class.
pub type ClassId = u8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dataset<T> {
    pub name: String,
    pub features: Matrix<T>,
    pub labels: Vec<ClassId>,
    pub feature_names: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    /// Validates the binary-dataset invariants. If class 1 outnumbers class 0
    /// the labels are flipped so the minority is always class 1.
    pub fn new(
        name: impl Into<String>,
        features: Matrix<T>,
        mut labels: Vec<ClassId>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let name = name.into();
        if features.n_rows() != labels.len() {
            return Err(Error::Shape {
                expected: features.n_rows(),
                got: labels.len(),
            });
        }
        if feature_names.len() != features.n_cols() {
            return Err(Error::Shape {
                expected: features.n_cols(),
                got: feature_names.len(),
            });
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::DegenerateDataset(format!(
                "{name}: labels must be 0 or 1"
            )));
        }
        if labels.len() < 2 {
            return Err(Error::DegenerateDataset(format!(
                "{name}: needs at least two samples"
            )));
        }
        if !features.is_finite() {
            return Err(Error::DegenerateDataset(format!(
                "{name}: non-finite feature value"
            )));
        }
        let n1 = labels.iter().filter(|&&l| l == 1).count();
        let n0 = labels.len() - n1;
        if n0 == 0 || n1 == 0 {
            return Err(Error::DegenerateDataset(format!(
                "{name}: only one class present"
            )));
        }
        if n1 > n0 {
            labels.iter_mut().for_each(|l| *l = 1 - *l);
        }
        Ok(Self {
            name,
            features,
            labels,
            feature_names,
        })
    }

    /// Convenience constructor with generated feature names `x0, x1, ...`.
    pub fn from_parts(name: impl Into<String>, features: Matrix<T>, labels: Vec<ClassId>) -> Result<Self> {
        let names = (0..features.n_cols()).map(|j| format!("x{j}")).collect();
        Self::new(name, features, labels, names)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    /// `[count of class 0, count of class 1]`.
    pub fn class_counts(&self) -> [usize; 2] {
        class_counts(&self.labels)
    }

    /// Majority-to-minority size ratio.
    pub fn imbalance_ratio(&self) -> f64 {
        let [n0, n1] = self.class_counts();
        n0 as f64 / n1 as f64
    }

    /// Subset of rows as a new (unvalidated) dataset sharing the name.
    pub fn subset(&self, indices: &[usize]) -> Dataset<T> {
        Dataset {
            name: self.name.clone(),
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Emits KEEL text. Values use the shortest representation that parses
    /// back to the identical scalar.
    pub fn to_keel(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "@relation {}", self.name);
        for (j, name) in self.feature_names.iter().enumerate() {
            let (lo, hi) = self
                .features
                .column(j)
                .fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            let _ = writeln!(out, "@attribute {name} real [{lo}, {hi}]");
        }
        let _ = writeln!(out, "@attribute Class {{positive, negative}}");
        let _ = writeln!(out, "@inputs {}", self.feature_names.join(", "));
        let _ = writeln!(out, "@outputs Class");
        let _ = writeln!(out, "@data");
        for (row, &label) in self.features.rows().zip(&self.labels) {
            for v in row {
                let _ = write!(out, "{v}, ");
            }
            let _ = writeln!(out, "{}", if label == 1 { "positive" } else { "negative" });
        }
        out
    }
}

pub fn class_counts(labels: &[ClassId]) -> [usize; 2] {
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    [labels.len() - n1, n1]
}

enum AttrKind {
    Numeric,
    Nominal(Vec<String>),
}

struct Attr {
    name: String,
    kind: AttrKind,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_attribute(rest: &str, line: usize) -> Result<Attr> {
    let rest = rest.trim();
    let (name, tail) = if let Some(stripped) = rest.strip_prefix('\'') {
        let end = stripped
            .find('\'')
            .ok_or_else(|| parse_err(line, "unterminated quoted attribute name"))?;
        (stripped[..end].to_string(), stripped[end + 1..].trim())
    } else {
        let end = rest
            .find(|c: char| c.is_whitespace() || c == '{')
            .ok_or_else(|| parse_err(line, "attribute without a type"))?;
        (rest[..end].to_string(), rest[end..].trim())
    };
    if name.is_empty() {
        return Err(parse_err(line, "empty attribute name"));
    }
    if let Some(body) = tail.strip_prefix('{') {
        let body = body
            .strip_suffix('}')
            .ok_or_else(|| parse_err(line, "unterminated nominal value list"))?;
        let values = body
            .split(',')
            .map(|v| v.trim().to_string())
            .filter(|v| !v.is_empty())
            .collect();
        return Ok(Attr {
            name,
            kind: AttrKind::Nominal(values),
        });
    }
    let ty = tail
        .split(|c: char| c.is_whitespace() || c == '[')
        .next()
        .unwrap_or("")
        .to_ascii_lowercase();
    match ty.as_str() {
        "real" | "integer" | "numeric" => Ok(Attr {
            name,
            kind: AttrKind::Numeric,
        }),
        other => Err(parse_err(line, format!("unsupported attribute type '{other}'"))),
    }
}

/// Parses a KEEL `.dat` document into a binary dataset.
///
/// The output attribute is the one named by `@outputs`, or the last declared
/// attribute. It must be the last column of each row. Nominal input
/// attributes are rejected.
pub fn parse_keel<T: Scalar>(text: &str) -> Result<Dataset<T>> {
    let mut relation: Option<String> = None;
    let mut attrs: Vec<Attr> = Vec::new();
    let mut output_name: Option<String> = None;
    let mut data_line: Option<usize> = None;
    let mut rows: Vec<(usize, &str)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if data_line.is_some() {
            rows.push((lineno, line));
            continue;
        }
        if !line.starts_with('@') {
            return Err(parse_err(lineno, "expected a header keyword before @data"));
        }
        let (kw, rest) = line
            .split_once(|c: char| c.is_whitespace())
            .unwrap_or((line, ""));
        match kw.to_ascii_lowercase().as_str() {
            "@relation" => relation = Some(rest.trim().to_string()),
            "@attribute" => attrs.push(parse_attribute(rest, lineno)?),
            "@inputs" => {}
            "@outputs" | "@output" => {
                let name = rest.trim();
                if name.contains(',') {
                    return Err(parse_err(lineno, "multiple outputs are not supported"));
                }
                output_name = Some(name.to_string());
            }
            "@data" => {
                if relation.is_none() {
                    return Err(parse_err(lineno, "missing @relation before @data"));
                }
                data_line = Some(lineno);
            }
            other => return Err(parse_err(lineno, format!("unknown keyword '{other}'"))),
        }
    }

    let data_line = data_line.ok_or_else(|| parse_err(text.lines().count().max(1), "missing @data section"))?;
    let name = relation.unwrap_or_default();
    if attrs.len() < 2 {
        return Err(parse_err(data_line, "need at least one input and one output attribute"));
    }
    let out_pos = match &output_name {
        Some(o) => attrs
            .iter()
            .position(|a| &a.name == o)
            .ok_or_else(|| parse_err(data_line, format!("output attribute '{o}' not declared")))?,
        None => attrs.len() - 1,
    };
    if out_pos != attrs.len() - 1 {
        return Err(parse_err(data_line, "the output attribute must be the last column"));
    }
    for a in &attrs[..out_pos] {
        if let AttrKind::Nominal(_) = a.kind {
            return Err(parse_err(
                data_line,
                format!("nominal input attribute '{}' is not supported", a.name),
            ));
        }
    }
    let n_features = attrs.len() - 1;

    let mut values: Vec<T> = Vec::with_capacity(rows.len() * n_features);
    let mut raw_labels: Vec<String> = Vec::with_capacity(rows.len());
    for &(lineno, line) in &rows {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != attrs.len() {
            return Err(parse_err(
                lineno,
                format!("expected {} values, found {}", attrs.len(), fields.len()),
            ));
        }
        for f in &fields[..n_features] {
            let v: T = f
                .parse()
                .map_err(|_| parse_err(lineno, format!("non-numeric feature value '{f}'")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("non-finite feature value '{f}'")));
            }
            values.push(v);
        }
        raw_labels.push(fields[n_features].to_string());
    }
    if rows.is_empty() {
        return Err(Error::DegenerateDataset(format!("{name}: no data rows")));
    }

    // Distinct class values, in declaration order when the class is nominal.
    let mut order: Vec<String> = match &attrs[out_pos].kind {
        AttrKind::Nominal(vals) => vals.clone(),
        AttrKind::Numeric => Vec::new(),
    };
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for l in &raw_labels {
        *counts.entry(l.as_str()).or_default() += 1;
        if !order.iter().any(|o| o == l) {
            order.push(l.clone());
        }
    }
    let present: Vec<&String> = order.iter().filter(|o| counts.contains_key(o.as_str())).collect();
    match present.len() {
        0 | 1 => {
            return Err(Error::DegenerateDataset(format!(
                "{name}: only one class present"
            )))
        }
        2 => {}
        k => {
            return Err(parse_err(
                data_line,
                format!("found {k} classes; only binary problems are supported"),
            ))
        }
    }
    let (a, b) = (present[0].as_str(), present[1].as_str());
    let (ca, cb) = (counts[a], counts[b]);
    let positive = if ca < cb {
        a
    } else if cb < ca {
        b
    } else if a.eq_ignore_ascii_case("positive") {
        a
    } else {
        b
    };
    let labels: Vec<ClassId> = raw_labels.iter().map(|l| u8::from(l == positive)).collect();
    let features = Matrix::new(rows.len(), n_features, values)?;
    let feature_names = attrs[..n_features].iter().map(|a| a.name.clone()).collect();
    Dataset::new(name, features, labels, feature_names)
}

/// Reads and parses a KEEL file from disk.
pub fn read_keel<T: Scalar>(path: &Path) -> Result<Dataset<T>> {
    let text = std::fs::read_to_string(path)?;
    let mut ds = parse_keel(&text)?;
    if ds.name.is_empty() {
        ds.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(ds)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_id: usize,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Stratified k-fold partition. Each class is shuffled with `seed` and dealt
/// round-robin; the minority class starts where the majority left off so fold
/// sizes also stay within one of each other.
pub fn stratified_kfold<T: Scalar>(ds: &Dataset<T>, k: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    stratified_kfold_labels(&ds.labels, k, seed)
}

pub fn stratified_kfold_labels(labels: &[ClassId], k: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    if k < 2 {
        return Err(Error::Stratification(format!("k must be at least 2, got {k}")));
    }
    let counts = class_counts(labels);
    if let Some(c) = (0..2).find(|&c| counts[c] < k) {
        return Err(Error::Stratification(format!(
            "class {c} has {} samples, fewer than {k} folds",
            counts[c]
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut offset = 0;
    for class in 0..2u8 {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for (pos, i) in idx.iter().enumerate() {
            test[(offset + pos) % k].push(*i);
        }
        offset = (offset + idx.len()) % k;
    }
    Ok(test
        .into_iter()
        .enumerate()
        .map(|(fold_id, mut test_indices)| {
            test_indices.sort_unstable();
            let mut in_test = vec![false; labels.len()];
            test_indices.iter().for_each(|&i| in_test[i] = true);
            let train_indices = (0..labels.len()).filter(|&i| !in_test[i]).collect();
            FoldSplit {
                fold_id,
                train_indices,
                test_indices,
            }
        })
        .collect())
}

/// Loads KEEL's pre-split cross-validation files `<name>-<k>-<i>tst.dat`
/// (i = 1..k) from `dir`. The dataset is the concatenation of the test
/// partitions in fold order; fold `i` tests exactly the rows of file `i`.
/// Returns `Ok(None)` when the partition files are not all present.
pub fn read_keel_partitions<T: Scalar>(
    dir: &Path,
    name: &str,
    k: usize,
) -> Result<Option<(Dataset<T>, Vec<FoldSplit>)>> {
    let paths: Vec<_> = (1..=k).map(|i| dir.join(format!("{name}-{k}-{i}tst.dat"))).collect();
    if !paths.iter().all(|p| p.is_file()) {
        return Ok(None);
    }
    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut labels: Vec<ClassId> = Vec::new();
    let mut bounds = Vec::with_capacity(k);
    let mut feature_names = Vec::new();
    for p in &paths {
        let part: Dataset<T> = read_keel(p)?;
        if feature_names.is_empty() {
            feature_names = part.feature_names.clone();
        } else if feature_names != part.feature_names {
            return Err(Error::DegenerateDataset(format!(
                "{name}: partitions disagree on attributes"
            )));
        }
        let start = rows.len();
        rows.extend(part.features.rows().map(<[T]>::to_vec));
        labels.extend_from_slice(&part.labels);
        bounds.push(start..rows.len());
    }
    let features = Matrix::from_rows(&rows)?;
    let ds = Dataset::new(name, features, labels, feature_names)?;
    let n = ds.n_samples();
    let folds = bounds
        .into_iter()
        .enumerate()
        .map(|(fold_id, r)| FoldSplit {
            fold_id,
            train_indices: (0..r.start).chain(r.end..n).collect(),
            test_indices: r.collect(),
        })
        .collect();
    Ok(Some((ds, folds)))
}

/// Per-feature min-max scaler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Scaler<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Scalar> Scaler<T> {
    pub fn fit(train: &Matrix<T>) -> Self {
        let d = train.n_cols();
        let mut min = vec![T::infinity(); d];
        let mut max = vec![T::neg_infinity(); d];
        for row in train.rows() {
            for j in 0..d {
                min[j] = min[j].min(row[j]);
                max[j] = max[j].max(row[j]);
            }
        }
        Self { min, max }
    }

    /// Maps into [0,1]; values outside the fitted range are clipped and
    /// constant features map to 0.
    pub fn transform_row(&self, row: &[T]) -> Vec<T> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let range = self.max[j] - self.min[j];
                if range > T::zero() {
                    ((v - self.min[j]) / range).max(T::zero()).min(T::one())
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    pub fn apply(&self, x: &Matrix<T>) -> Matrix<T> {
        let rows: Vec<Vec<T>> = x.rows().map(|r| self.transform_row(r)).collect();
        Matrix::from_rows(&rows).unwrap_or_else(|_| Matrix::zeros(0, x.n_cols()))
    }
}

/// One row of the reference table of the 64 KEEL benchmark problems:
/// name, feature count, sample count, imbalance ratio.
pub struct BenchmarkEntry {
    pub name: &'static str,
    pub n_features: usize,
    pub n_samples: usize,
    pub imbalance_ratio: f64,
}

macro_rules! bench {
    ($($n:literal, $f:literal, $s:literal, $ir:literal;)*) => {
        &[$(BenchmarkEntry { name: $n, n_features: $f, n_samples: $s, imbalance_ratio: $ir }),*]
    };
}

pub const KEEL_BENCHMARK: &[BenchmarkEntry] = bench! {
    "glass1", 9, 214, 1.82;
    "ecoli0vs1", 7, 220, 1.86;
    "wisconsin", 9, 683, 1.86;
    "pima", 8, 768, 1.87;
    "iris0", 4, 150, 2.0;
    "glass0", 9, 214, 2.06;
    "yeast1", 8, 1484, 2.46;
    "haberman", 3, 306, 2.78;
    "vehicle2", 18, 846, 2.88;
    "vehicle1", 18, 846, 2.9;
    "vehicle3", 18, 846, 2.99;
    "glass0123vs456", 9, 214, 3.2;
    "vehicle0", 18, 846, 3.25;
    "ecoli1", 7, 336, 3.36;
    "new-thyroid1", 5, 215, 5.14;
    "new-thyroid2", 5, 215, 5.14;
    "ecoli2", 7, 336, 5.46;
    "segment0", 19, 2308, 6.0;
    "glass6", 9, 214, 6.38;
    "yeast3", 8, 1484, 8.1;
    "ecoli3", 7, 336, 8.6;
    "page-blocks0", 10, 5472, 8.79;
    "ecoli-0-3-4vs5", 7, 200, 9.0;
    "yeast-2vs4", 8, 514, 9.08;
    "ecoli-0-6-7vs3-5", 7, 202, 9.09;
    "ecoli-0-2-3-4vs5", 7, 222, 9.1;
    "yeast-0-3-5-9vs7-8", 8, 506, 9.12;
    "glass-0-1-5vs2", 9, 172, 9.12;
    "yeast-0-2-5-7-9vs3-6-8", 8, 1004, 9.14;
    "yeast-0-2-5-6vs3-7-8-9", 8, 1004, 9.14;
    "ecoli-0-4-6vs5", 6, 203, 9.15;
    "ecoli-0-1vs2-3-5", 7, 224, 9.17;
    "ecoli-0-2-6-7vs3-5", 7, 224, 9.18;
    "glass-0-4vs5", 9, 92, 9.22;
    "ecoli-0-3-4-6vs5", 7, 205, 9.25;
    "ecoli-0-3-4-7vs5-6", 7, 257, 9.28;
    "yeast-05679vs4", 8, 528, 9.35;
    "vowel0", 13, 988, 9.98;
    "ecoli-0-6-7vs5", 6, 220, 10.0;
    "glass-016vs2", 9, 192, 10.29;
    "ecoli-0-1-4-7vs2-3-5-6", 7, 336, 10.59;
    "led7digit-0-2-4-5-6-7-8-9vs1", 7, 443, 10.97;
    "glass-0-6vs5", 9, 205, 11.0;
    "ecoli-0-1vs5", 6, 240, 11.0;
    "glass-0-1-4-6vs2", 9, 205, 11.06;
    "glass2", 9, 214, 11.59;
    "ecoli-0-1-4-7vs5-6", 6, 332, 12.28;
    "ecoli-0-1-4-6vs5", 6, 280, 13.0;
    "cleveland-0vs4", 13, 177, 12.62;
    "shuttle-c0vsc4", 9, 1829, 13.87;
    "yeast-1vs7", 7, 459, 14.3;
    "glass4", 9, 214, 15.47;
    "ecoli4", 7, 336, 15.8;
    "page-blocks-13vs4", 10, 472, 15.86;
    "glass-0-1-6vs5", 9, 184, 19.44;
    "shuttle-c2-vs-c4", 9, 129, 20.5;
    "yeast-1458vs7", 8, 693, 22.1;
    "glass5", 9, 214, 22.78;
    "yeast-2vs8", 8, 482, 23.1;
    "yeast4", 8, 1484, 28.1;
    "yeast-1289vs7", 8, 947, 30.57;
    "yeast5", 8, 1484, 32.73;
    "ecoli-0137vs26", 7, 281, 39.14;
    "yeast6", 8, 1484, 41.4;
};

/// Looks up a benchmark entry, ignoring case and separators so that KEEL
/// file names such as `ecoli-0-1_vs_5` resolve to `ecoli-0-1vs5`.
pub fn benchmark_entry(name: &str) -> Option<&'static BenchmarkEntry> {
    let key = |s: &str| {
        s.chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase()
    };
    let k = key(name);
    KEEL_BENCHMARK.iter().find(|e| key(e.name) == k)
}
