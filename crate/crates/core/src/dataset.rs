//! Grouped panel data.
//!
//! A [`GroupedDataset`] is an ordered list of [`Group`]s, one per cross-sectional
//! period (or query). Every group carries a row-major `n x d` feature block, a
//! label per item, optional portfolio weights, and the original item order used
//! to break ties deterministically.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::ops::{Deref, Range};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rankcore::descending_ranks;

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    id: String,
    num_features: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    weights: Option<Vec<f64>>,
    item_index: Vec<usize>,
}

impl Group {
    /// Build a group from a row-major feature block.
    pub fn new(
        id: impl Into<String>,
        num_features: usize,
        features: Vec<f64>,
        labels: Vec<f64>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let id = id.into();
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptyDataset(format!("group {id:?} has no items")));
        }
        if num_features == 0 {
            return Err(Error::Schema("at least one feature is required".into()));
        }
        if features.len() != n * num_features {
            return Err(Error::LengthMismatch { expected: n * num_features, got: features.len() });
        }
        if let Some(w) = &weights {
            if w.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: w.len() });
            }
            if let Some(pos) = w.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Data {
                    row: pos,
                    msg: format!("weight {} in group {id:?} is not a nonnegative real", w[pos]),
                });
            }
        }
        if let Some(pos) = labels.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data { row: pos, msg: format!("non-finite label in group {id:?}") });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data { row: pos / num_features, msg: format!("non-finite feature in group {id:?}") });
        }
        Ok(Group { id, num_features, features, labels, weights, item_index: (0..n).collect() })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.num_features..(i + 1) * self.num_features]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn item_index(&self) -> &[usize] {
        &self.item_index
    }

    pub fn label_ranks(&self) -> LabelRanks {
        label_ranks(self)
    }

    /// Same group with labels replaced (used for leakage audits and label shuffles).
    pub fn with_labels(&self, labels: Vec<f64>) -> Result<Self> {
        Group::new(self.id.clone(), self.num_features, self.features.clone(), labels, self.weights.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDataset {
    groups: Vec<Group>,
    num_features: usize,
    feature_names: Option<Vec<String>>,
}

impl GroupedDataset {
    pub fn new(groups: Vec<Group>, feature_names: Option<Vec<String>>) -> Result<Self> {
        let first = groups.first().ok_or_else(|| Error::EmptyDataset("no groups".into()))?;
        let d = first.num_features();
        let mut seen = HashMap::with_capacity(groups.len());
        for (pos, g) in groups.iter().enumerate() {
            if g.num_features() != d {
                return Err(Error::Schema(format!(
                    "group {:?} has {} features, expected {d}",
                    g.id(),
                    g.num_features()
                )));
            }
            if let Some(prev) = seen.insert(g.id().to_string(), pos) {
                return Err(Error::Schema(format!("duplicate group id {:?} at positions {prev} and {pos}", g.id())));
            }
        }
        if let Some(names) = &feature_names {
            if names.len() != d {
                return Err(Error::LengthMismatch { expected: d, got: names.len() });
            }
        }
        Ok(GroupedDataset { groups, num_features: d, feature_names })
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_rows(&self) -> usize {
        self.groups.iter().map(Group::len).sum()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Feature names, falling back to `f000`, `f001`, ... when none were given.
    pub fn feature_names_or_default(&self) -> Vec<String> {
        match &self.feature_names {
            Some(n) => n.clone(),
            None => default_feature_names(self.num_features),
        }
    }

    /// Contiguous slice of groups by position.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.groups.len() {
            return Err(Error::Domain(format!("group range {range:?} is empty or outside 0..{}", self.groups.len())));
        }
        GroupedDataset::new(self.groups[range].to_vec(), self.feature_names.clone())
    }

    /// Groups at the given positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> Result<Self> {
        let groups = positions
            .iter()
            .map(|&p| {
                self.groups.get(p).cloned().ok_or_else(|| Error::Domain(format!("group position {p} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        GroupedDataset::new(groups, self.feature_names.clone())
    }

    pub fn map_groups(&self, f: impl FnMut(&Group) -> Result<Group>) -> Result<Self> {
        let groups = self.groups.iter().map(f).collect::<Result<Vec<_>>>()?;
        GroupedDataset::new(groups, self.feature_names.clone())
    }
}

pub fn default_feature_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("f{j:03}")).collect()
}

/// Label ranks: 1 is the largest label, ties go to the lower `item_index`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRanks(Vec<u32>);

impl LabelRanks {
    /// Wrap an explicit rank vector; it must be a permutation of `1..=n`.
    pub fn from_permutation(ranks: Vec<u32>) -> Result<Self> {
        check_permutation(&ranks)?;
        Ok(LabelRanks(ranks))
    }

    pub fn into_inner(self) -> Vec<u32> {
        self.0
    }
}

impl Deref for LabelRanks {
    type Target = [u32];

    fn deref(&self) -> &[u32] {
        &self.0
    }
}

pub(crate) fn check_permutation(ranks: &[u32]) -> Result<()> {
    let n = ranks.len();
    let mut seen = vec![false; n];
    for &r in ranks {
        let r = r as usize;
        if r == 0 || r > n || seen[r - 1] {
            return Err(Error::Domain(format!("ranks are not a permutation of 1..={n}")));
        }
        seen[r - 1] = true;
    }
    Ok(())
}

pub fn label_ranks(group: &Group) -> LabelRanks {
    // labels are validated finite at construction, so ranking cannot fail
    LabelRanks(descending_ranks(group.labels(), group.item_index()))
}

/// Replace each feature, within each group, by its cross-sectional rank mapped
/// linearly onto [-1, 1]. Ties receive their average rank; a single-item group maps to 0.
pub fn rank_transform_features(ds: &GroupedDataset) -> GroupedDataset {
    let groups = ds
        .groups()
        .iter()
        .map(|g| {
            let n = g.len();
            let d = g.num_features();
            let mut out = vec![0.0; n * d];
            let mut order: Vec<usize> = (0..n).collect();
            for j in 0..d {
                let col = |i: usize| g.features()[i * d + j];
                order.sort_by(|&a, &b| col(a).total_cmp(&col(b)));
                let mut start = 0;
                while start < n {
                    let mut end = start + 1;
                    while end < n && col(order[end]) == col(order[start]) {
                        end += 1;
                    }
                    // 1-based average rank of positions start..end
                    let avg = (start + end + 1) as f64 / 2.0;
                    let mapped = if n == 1 { 0.0 } else { 2.0 * (avg - 1.0) / (n - 1) as f64 - 1.0 };
                    for &i in &order[start..end] {
                        out[i * d + j] = mapped;
                    }
                    start = end;
                }
            }
            Group { features: out, ..g.clone() }
        })
        .collect();
    GroupedDataset { groups, num_features: ds.num_features, feature_names: ds.feature_names.clone() }
}

/// Column mapping for CSV ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub group_col: String,
    pub label_col: String,
    pub weight_col: Option<String>,
    /// Explicit feature columns; when absent every remaining column is a feature.
    pub feature_cols: Option<Vec<String>>,
    /// Columns never treated as features (e.g. a precomputed score column).
    pub exclude_cols: Vec<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            group_col: "group".into(),
            label_col: "label".into(),
            weight_col: None,
            feature_cols: None,
            exclude_cols: Vec::new(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<GroupedDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<GroupedDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyDataset("file has no header".into()));
    }
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Schema(format!("missing column {name:?}")))
    };
    let group_idx = find(&schema.group_col)?;
    let label_idx = find(&schema.label_col)?;
    let weight_idx = schema.weight_col.as_deref().map(find).transpose()?;
    let feature_idx: Vec<usize> = match &schema.feature_cols {
        Some(cols) => cols.iter().map(|c| find(c)).collect::<Result<_>>()?,
        None => (0..headers.len())
            .filter(|&i| {
                i != group_idx
                    && i != label_idx
                    && Some(i) != weight_idx
                    && !schema.exclude_cols.iter().any(|c| c == &headers[i])
            })
            .collect(),
    };
    if feature_idx.is_empty() {
        return Err(Error::Schema("no feature columns".into()));
    }
    let feature_names: Vec<String> = feature_idx.iter().map(|&i| headers[i].to_string()).collect();
    let d = feature_idx.len();

    struct Pending {
        id: String,
        features: Vec<f64>,
        labels: Vec<f64>,
        weights: Vec<f64>,
    }
    let mut order: Vec<Pending> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let cell = |i: usize, what: &str| -> Result<f64> {
            let raw = record.get(i).unwrap_or("").trim();
            let v: f64 = raw.parse().map_err(|_| Error::Data {
                row,
                msg: format!("{what} column {:?} has non-numeric value {raw:?}", &headers[i]),
            })?;
            if !v.is_finite() {
                return Err(Error::Data { row, msg: format!("{what} column {:?} is not finite", &headers[i]) });
            }
            Ok(v)
        };
        let gid = record.get(group_idx).unwrap_or("").to_string();
        let label = cell(label_idx, "label")?;
        let weight = weight_idx.map(|i| cell(i, "weight")).transpose()?;
        if let Some(w) = weight {
            if w < 0.0 {
                return Err(Error::Data { row, msg: format!("negative weight {w}") });
            }
        }
        let slot = *lookup.entry(gid.clone()).or_insert_with(|| {
            order.push(Pending { id: gid, features: Vec::new(), labels: Vec::new(), weights: Vec::new() });
            order.len() - 1
        });
        let p = &mut order[slot];
        for &i in &feature_idx {
            p.features.push(cell(i, "feature")?);
        }
        p.labels.push(label);
        if let Some(w) = weight {
            p.weights.push(w);
        }
    }
    if order.is_empty() {
        return Err(Error::EmptyDataset("no data rows".into()));
    }
    let groups = order
        .into_iter()
        .map(|p| {
            let weights = weight_idx.map(|_| p.weights);
            Group::new(p.id, d, p.features, p.labels, weights)
        })
        .collect::<Result<Vec<_>>>()?;
    GroupedDataset::new(groups, Some(feature_names))
}

/// Write `group,label[,weight],<features...>` with round-trip exact float text.
pub fn write_csv<W: Write>(ds: &GroupedDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let has_weights = ds.groups().iter().any(|g| g.weights().is_some());
    let mut header = vec!["group".to_string(), "label".to_string()];
    if has_weights {
        header.push("weight".into());
    }
    header.extend(ds.feature_names_or_default());
    w.write_record(&header)?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for g in ds.groups() {
        for i in 0..g.len() {
            rec.clear();
            rec.push(g.id().to_string());
            rec.push(g.labels()[i].to_string());
            if has_weights {
                rec.push(g.weights().map_or(1.0, |w| w[i]).to_string());
            }
            rec.extend(g.row(i).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(ds: &GroupedDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(ds, std::io::BufWriter::new(file))
}

/// One rolling train / validation / test split, as group-position ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub train: Range<usize>,
    pub valid: Range<usize>,
    pub test: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingWindowPlan {
    pub windows: Vec<Window>,
    pub train_len: usize,
    pub valid_len: usize,
    pub test_len: usize,
    pub step: usize,
    /// Set when not even one window fits into the available groups.
    pub insufficient_history: bool,
}

/// Rolling windows over `num_groups` periods. `valid_len` may be zero (plain train/test split).
pub fn rolling_windows(
    num_groups: usize,
    train_len: usize,
    valid_len: usize,
    test_len: usize,
    step: usize,
) -> Result<RollingWindowPlan> {
    if train_len == 0 || test_len == 0 || step == 0 {
        return Err(Error::Domain("train_len, test_len and step must be at least 1".into()));
    }
    let span = train_len + valid_len + test_len;
    let mut windows = Vec::new();
    let mut t = 0;
    while t + span <= num_groups {
        windows.push(Window {
            train: t..t + train_len,
            valid: t + train_len..t + train_len + valid_len,
            test: t + train_len + valid_len..t + span,
        });
        t += step;
    }
    Ok(RollingWindowPlan { insufficient_history: windows.is_empty(), windows, train_len, valid_len, test_len, step })
}
