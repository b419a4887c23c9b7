//! Dataset loading (CSV and LibSVM text) and train/test splitting.
//!
//! Files store one sample per row; once loaded, samples become the columns
//! of a [`DataMatrix`].

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DataMatrix, Matrix};

/// Samples (columns of `data`) with integer class labels in `[0, class_count)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: DataMatrix,
    pub labels: Vec<usize>,
    pub class_count: usize,
    /// Original label text for each class id.
    pub label_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(data: DataMatrix, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let names = (0..class_count).map(|c| c.to_string()).collect();
        Self::with_names(data, labels, class_count, names)
    }

    pub fn with_names(
        data: DataMatrix,
        labels: Vec<usize>,
        class_count: usize,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if labels.len() != data.cols() {
            return Err(Error::dimension(
                "LabeledDataset labels",
                data.cols(),
                labels.len(),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside [0, {class_count})"
            )));
        }
        if label_names.len() != class_count {
            return Err(Error::dimension(
                "LabeledDataset label_names",
                class_count,
                label_names.len(),
            ));
        }
        Ok(LabeledDataset {
            data,
            labels,
            class_count,
            label_names,
        })
    }

    pub fn samples(&self) -> usize {
        self.data.cols()
    }

    pub fn features(&self) -> usize {
        self.data.rows()
    }

    /// The listed samples, in order; class ids and names are kept.
    pub fn subset(&self, indices: &[usize]) -> Result<LabeledDataset> {
        Ok(LabeledDataset {
            data: self.data.select_columns(indices)?,
            labels: indices.iter().map(|&j| self.labels[j]).collect(),
            class_count: self.class_count,
            label_names: self.label_names.clone(),
        })
    }

    /// Most frequent label, lowest id on ties.
    pub fn majority_label(&self) -> usize {
        majority(&self.labels, self.class_count).unwrap_or(0)
    }
}

pub(crate) fn majority(labels: &[usize], class_count: usize) -> Option<usize> {
    let mut counts = vec![0usize; class_count];
    for &l in labels {
        counts[l] += 1;
    }
    let (best, &n) = counts.iter().enumerate().rev().max_by_key(|&(_, c)| *c)?;
    (n > 0).then_some(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Libsvm,
}

impl FromStr for DataFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DataFormat::Csv),
            "libsvm" | "svmlight" => Ok(DataFormat::Libsvm),
            other => Err(Error::Config(format!("unknown data format {other:?}"))),
        }
    }
}

impl fmt::Display for DataFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataFormat::Csv => "csv",
            DataFormat::Libsvm => "libsvm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelColumn {
    Last,
    Index(usize),
}

impl FromStr for LabelColumn {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("last") {
            return Ok(LabelColumn::Last);
        }
        s.parse().map(LabelColumn::Index).map_err(|_| {
            Error::Config(format!(
                "label column must be an index or \"last\", got {s:?}"
            ))
        })
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Last => f.write_str("last"),
            LabelColumn::Index(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub format: DataFormat,
    /// CSV only.
    pub label_column: LabelColumn,
    /// CSV only.
    pub delimiter: char,
    /// CSV only.
    pub has_header: bool,
    /// Subtract the minimum of every feature that has negative values.
    pub shift_nonneg: bool,
    /// Divide every feature by its maximum (features with max 0 are left alone).
    #[serde(default)]
    pub scale_max: bool,
}

impl DatasetSpec {
    pub fn csv(path: impl Into<PathBuf>) -> Self {
        DatasetSpec {
            path: path.into(),
            format: DataFormat::Csv,
            label_column: LabelColumn::Last,
            delimiter: ',',
            has_header: false,
            shift_nonneg: false,
            scale_max: false,
        }
    }

    pub fn libsvm(path: impl Into<PathBuf>) -> Self {
        DatasetSpec {
            format: DataFormat::Libsvm,
            ..DatasetSpec::csv(path)
        }
    }
}

/// Rows read from a file before label re-encoding.
struct RawRows {
    features: Vec<Vec<f64>>,
    labels: Vec<String>,
}

pub fn load_dataset(spec: &DatasetSpec) -> Result<LabeledDataset> {
    let raw = match spec.format {
        DataFormat::Csv => read_csv(spec)?,
        DataFormat::Libsvm => read_libsvm(&spec.path)?,
    };
    if raw.features.is_empty() {
        return Err(Error::Parse {
            path: spec.path.clone(),
            line: 0,
            message: "no samples".into(),
        });
    }
    let m = raw.features[0].len();
    let n = raw.features.len();
    let mut x = Matrix::from_fn(m, n, |i, j| raw.features[j][i]);
    if spec.shift_nonneg {
        shift_nonnegative(&mut x);
    }
    if spec.scale_max {
        scale_by_max(&mut x);
    }
    let data = DataMatrix::new(x)?;
    let (labels, names) = encode_labels(&raw.labels);
    LabeledDataset::with_names(data, labels, names.len(), names)
}

fn read_csv(spec: &DatasetSpec) -> Result<RawRows> {
    if !spec.delimiter.is_ascii() {
        return Err(Error::Config(format!(
            "delimiter {:?} must be ASCII",
            spec.delimiter
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter as u8)
        .has_headers(spec.has_header)
        .trim(csv::Trim::All)
        .from_path(&spec.path)?;
    let mut rows = RawRows {
        features: Vec::new(),
        labels: Vec::new(),
    };
    let mut width = None;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parse_err = |message: String| Error::Parse {
            path: spec.path.clone(),
            line,
            message,
        };
        if record.len() < 2 {
            return Err(parse_err("need at least one feature and a label".into()));
        }
        let label_at = match spec.label_column {
            LabelColumn::Last => record.len() - 1,
            LabelColumn::Index(i) if i < record.len() => i,
            LabelColumn::Index(i) => {
                return Err(parse_err(format!(
                    "label column {i} missing ({} fields)",
                    record.len()
                )))
            }
        };
        if *width.get_or_insert(record.len()) != record.len() {
            return Err(parse_err(format!(
                "expected {} fields, found {}",
                width.unwrap_or(0),
                record.len()
            )));
        }
        let mut features = Vec::with_capacity(record.len() - 1);
        for (c, field) in record.iter().enumerate() {
            if c == label_at {
                continue;
            }
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(format!("field {c}: {field:?} is not a number")))?;
            features.push(v);
        }
        rows.features.push(features);
        rows.labels.push(record[label_at].to_string());
    }
    Ok(rows)
}

fn read_libsvm(path: &Path) -> Result<RawRows> {
    let reader = BufReader::new(File::open(path)?);
    let mut sparse: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label = tokens.next().unwrap_or_default().to_string();
        let mut entries = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(format!("expected index:value, found {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(format!("bad feature index {idx:?}")))?;
            if idx == 0 {
                return Err(parse_err("feature indices are 1-based".into()));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(format!("bad feature value {val:?}")))?;
            max_index = max_index.max(idx);
            entries.push((idx - 1, val));
        }
        sparse.push(entries);
        labels.push(label);
    }
    let features = sparse
        .into_iter()
        .map(|entries| {
            let mut dense = vec![0.0; max_index];
            for (i, v) in entries {
                dense[i] = v;
            }
            dense
        })
        .collect();
    Ok(RawRows { features, labels })
}

/// Maps label strings to contiguous ids. Labels that all parse as numbers
/// are ordered numerically, otherwise lexically.
fn encode_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let numeric: Option<Vec<f64>> = raw.iter().map(|s| s.parse::<f64>().ok()).collect();
    let mut names: Vec<String> = raw.to_vec();
    match &numeric {
        Some(_) => names.sort_by(|a, b| {
            let (a, b) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
            a.total_cmp(&b)
        }),
        None => names.sort(),
    }
    names.dedup();
    let ids: BTreeMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let labels = raw.iter().map(|s| ids[s.as_str()]).collect();
    (labels, names)
}

fn shift_nonnegative(x: &mut Matrix) {
    for i in 0..x.rows() {
        let min = (0..x.cols())
            .map(|j| x.get(i, j))
            .fold(f64::INFINITY, f64::min);
        if min < 0.0 {
            for j in 0..x.cols() {
                x.set(i, j, x.get(i, j) - min);
            }
        }
    }
}

fn scale_by_max(x: &mut Matrix) {
    for i in 0..x.rows() {
        let max = (0..x.cols()).map(|j| x.get(i, j)).fold(0.0, f64::max);
        if max > 0.0 {
            for j in 0..x.cols() {
                x.set(i, j, x.get(i, j) / max);
            }
        }
    }
}

/// Writes `ds` as CSV with the label in the last column and no header. The
/// shortest round-trip float rendering is used, so reloading is bit-exact.
pub fn write_csv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    for j in 0..ds.samples() {
        for v in ds.data.col(j) {
            write!(out, "{v},")?;
        }
        writeln!(out, "{}", ds.label_names[ds.labels[j]])?;
    }
    out.flush()?;
    Ok(())
}

/// Number of training samples for a split of `n` samples.
pub fn train_size(n: usize, train_fraction: f64) -> usize {
    // the small offset keeps e.g. 0.7 * 10 = 7.000000000000001 from rounding up
    ((train_fraction * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Shuffled train/test index sets: the first `⌈fraction · n⌉` shuffled
/// indices train, the rest test.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = train_size(n, train_fraction);
    if cut == 0 || cut >= n {
        return Err(Error::InvalidArgument(format!(
            "split of {n} samples at fraction {train_fraction} leaves an empty part"
        )));
    }
    let test = order.split_off(cut);
    Ok((order, test))
}

/// Per-class variant of [`split_indices`]; each class is split separately.
pub fn stratified_split_indices(
    labels: &[usize],
    class_count: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for class in 0..class_count {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&j| labels[j] == class).collect();
        members.shuffle(&mut rng);
        let cut = train_size(members.len(), train_fraction);
        test.extend(members.split_off(cut));
        train.extend(members);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidArgument(
            "stratified split leaves an empty part".into(),
        ));
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    Ok((train, test))
}

pub fn train_test_split(
    ds: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = split_indices(ds.samples(), train_fraction, seed)?;
    Ok((ds.subset(&train)?, ds.subset(&test)?))
}

pub fn train_test_split_stratified(
    ds: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = stratified_split_indices(&ds.labels, ds.class_count, train_fraction, seed)?;
    Ok((ds.subset(&train)?, ds.subset(&test)?))
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn temp_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_with_header() {
        let f = temp_file("a,b,class\n1.0,2.0,yes\n0.5,0,no\n3,1,yes\n");
        let spec = DatasetSpec {
            has_header: true,
            ..DatasetSpec::csv(f.path())
        };
        let ds = load_dataset(&spec).unwrap();
        assert_eq!((ds.features(), ds.samples()), (2, 3));
        assert_eq!(ds.data.col(1), &[0.5, 0.0]);
        assert_eq!(ds.label_names, vec!["no", "yes"]);
        assert_eq!(ds.labels, vec![1, 0, 1]);
    }

    #[test]
    fn csv_label_by_index_and_delimiter() {
        let f = temp_file("7;1;2\n3;4;5\n");
        let spec = DatasetSpec {
            label_column: LabelColumn::Index(0),
            delimiter: ';',
            ..DatasetSpec::csv(f.path())
        };
        let ds = load_dataset(&spec).unwrap();
        assert_eq!(ds.data.col(0), &[1.0, 2.0]);
        assert_eq!(ds.label_names, vec!["3", "7"]);
        assert_eq!(ds.labels, vec![1, 0]);
    }

    #[test]
    fn numeric_labels_sort_numerically() {
        let f = temp_file("1,10\n1,9\n1,-1\n");
        let ds = load_dataset(&DatasetSpec::csv(f.path())).unwrap();
        assert_eq!(ds.label_names, vec!["-1", "9", "10"]);
        assert_eq!(ds.labels, vec![2, 1, 0]);
    }

    #[test]
    fn csv_bad_field_reports_line() {
        let f = temp_file("1,2,0\n1,x,1\n");
        match load_dataset(&DatasetSpec::csv(f.path())) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn libsvm_sparse_fill() {
        let f = temp_file("1 1:0.5 3:2\n# comment\n-1 2:1.5\n");
        let ds = load_dataset(&DatasetSpec::libsvm(f.path())).unwrap();
        assert_eq!(ds.data.col(0), &[0.5, 0.0, 2.0]);
        assert_eq!(ds.data.col(1), &[0.0, 1.5, 0.0]);
        assert_eq!(ds.labels, vec![1, 0]);
    }

    #[test]
    fn libsvm_rejects_malformed() {
        let f = temp_file("1 1:0.5\n1 0:2\n");
        assert!(matches!(
            load_dataset(&DatasetSpec::libsvm(f.path())),
            Err(Error::Parse { line: 2, .. })
        ));
        let f = temp_file("1 1-0.5\n");
        assert!(load_dataset(&DatasetSpec::libsvm(f.path())).is_err());
    }

    #[test]
    fn negative_features_need_shift() {
        let f = temp_file("-1,2,0\n3,4,1\n");
        assert!(matches!(
            load_dataset(&DatasetSpec::csv(f.path())),
            Err(Error::NegativeEntry { .. })
        ));
        let spec = DatasetSpec {
            shift_nonneg: true,
            ..DatasetSpec::csv(f.path())
        };
        let ds = load_dataset(&spec).unwrap();
        assert_eq!(ds.data.row(0), vec![0.0, 4.0]);
        assert_eq!(ds.data.row(1), vec![2.0, 4.0]);
    }

    #[test]
    fn max_scaling() {
        let f = temp_file("2,0,0\n4,0,1\n");
        let spec = DatasetSpec {
            scale_max: true,
            ..DatasetSpec::csv(f.path())
        };
        let ds = load_dataset(&spec).unwrap();
        assert_eq!(ds.data.row(0), vec![0.5, 1.0]);
        assert_eq!(ds.data.row(1), vec![0.0, 0.0]);
    }

    #[test]
    fn write_then_load_is_bit_exact() {
        let f = temp_file("0.1,3.3333333333333335,1e-300,a\n2.5,0,7,b\n");
        let ds = load_dataset(&DatasetSpec::csv(f.path())).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, out.path()).unwrap();
        let again = load_dataset(&DatasetSpec::csv(out.path())).unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn split_sizes() {
        assert_eq!(train_size(10, 0.8), 8);
        assert_eq!(train_size(5, 0.8), 4);
        assert_eq!(train_size(10, 0.7), 7);
        let (a, b) = split_indices(10, 0.8, 3).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        assert_eq!(split_indices(10, 0.8, 3).unwrap(), (a, b));
        assert!(split_indices(1, 0.8, 0).is_err());
        assert!(split_indices(10, 1.0, 0).is_err());
    }

    #[test]
    fn stratified_split_keeps_class_ratio() {
        let labels: Vec<usize> = (0..20).map(|j| usize::from(j >= 10)).collect();
        let (train, test) = stratified_split_indices(&labels, 2, 0.8, 1).unwrap();
        assert_eq!(train.iter().filter(|&&j| labels[j] == 0).count(), 8);
        assert_eq!(test.len(), 4);
    }

    #[test]
    fn majority_prefers_lowest_label() {
        assert_eq!(majority(&[2, 1, 2, 1], 3), Some(1));
        assert_eq!(majority(&[], 3), None);
    }

    proptest::proptest! {
        #[test]
        fn split_partitions_indices(n in 2usize..200, frac in 0.05..0.95f64, seed in proptest::prelude::any::<u64>()) {
            if let Ok((mut train, test)) = split_indices(n, frac, seed) {
                train.extend(test);
                train.sort_unstable();
                proptest::prop_assert_eq!(train, (0..n).collect::<Vec<_>>());
            }
        }
    }
}
