//! Logged bandit data: in-memory representation, CSV ingestion and summaries.
//!
//! A [`BanditLog`] is stored column-wise. Each event has an arm, a binary
//! reward and one value per feature column. Categorical columns are
//! dictionary-encoded so that binning and replay never touch strings on the
//! hot path.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Token used for empty categorical cells.
pub const MISSING_TOKEN: &str = "__missing__";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot open `{}`: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("invalid log: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureKind::Continuous => write!(f, "continuous"),
            FeatureKind::Categorical => write!(f, "categorical"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub kind: FeatureKind,
    /// Position of the feature within each event's feature vector.
    pub column_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureValue {
    Continuous(f64),
    Categorical(String),
}

/// One row of a log in row-oriented form.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedEvent {
    pub arm: usize,
    pub reward: u8,
    pub features: Vec<FeatureValue>,
}

/// Values of a single feature across all events.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Continuous(Vec<f64>),
    Categorical { levels: Vec<String>, codes: Vec<u32> },
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Continuous(values) => values.len(),
            Column::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> FeatureKind {
        match self {
            Column::Continuous(_) => FeatureKind::Continuous,
            Column::Categorical { .. } => FeatureKind::Categorical,
        }
    }

    /// Dictionary-encodes a list of tokens, levels in first-seen order.
    pub fn categorical<S: AsRef<str>>(tokens: &[S]) -> Column {
        let mut index: HashMap<&str, u32> = HashMap::new();
        let mut levels = Vec::new();
        let mut codes = Vec::with_capacity(tokens.len());
        for token in tokens {
            let token = token.as_ref();
            let code = *index.entry(token).or_insert_with(|| {
                levels.push(token.to_string());
                (levels.len() - 1) as u32
            });
            codes.push(code);
        }
        Column::Categorical { levels, codes }
    }

    fn value(&self, row: usize) -> FeatureValue {
        match self {
            Column::Continuous(values) => FeatureValue::Continuous(values[row]),
            Column::Categorical { levels, codes } => FeatureValue::Categorical(levels[codes[row] as usize].clone()),
        }
    }
}

/// Validated, immutable log of bandit events.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditLog {
    k: usize,
    descriptors: Vec<FeatureDescriptor>,
    arms: Vec<usize>,
    rewards: Vec<u8>,
    columns: Vec<Column>,
}

impl BanditLog {
    /// Builds a log from columnar parts, checking every invariant.
    ///
    /// Descriptors are derived from the column kinds; `names` gives the
    /// feature names in column order.
    pub fn new(
        k: usize,
        names: Vec<String>,
        arms: Vec<usize>,
        rewards: Vec<u8>,
        columns: Vec<Column>,
    ) -> Result<Self, DataError> {
        if k < 2 {
            return Err(DataError::Invalid(format!("need at least 2 arms, got {k}")));
        }
        if names.len() != columns.len() {
            return Err(DataError::Invalid(format!("{} feature names for {} columns", names.len(), columns.len())));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(DataError::Invalid(format!("duplicate feature name `{name}`")));
            }
        }
        if rewards.len() != arms.len() {
            return Err(DataError::Invalid("arm and reward lengths differ".into()));
        }
        let n = arms.len();
        for (row, (&arm, &reward)) in arms.iter().zip(&rewards).enumerate() {
            if arm >= k {
                return Err(DataError::Invalid(format!("event {row}: arm {arm} out of range for k={k}")));
            }
            if reward > 1 {
                return Err(DataError::Invalid(format!("event {row}: reward must be 0 or 1")));
            }
        }
        for (name, column) in names.iter().zip(&columns) {
            if column.len() != n {
                return Err(DataError::Invalid(format!("column `{name}` has {} values for {n} events", column.len())));
            }
            match column {
                Column::Continuous(values) => {
                    if let Some(row) = values.iter().position(|v| !v.is_finite()) {
                        return Err(DataError::Invalid(format!("event {row}: column `{name}` is not finite")));
                    }
                }
                Column::Categorical { levels, codes } => {
                    if codes.iter().any(|&c| c as usize >= levels.len()) {
                        return Err(DataError::Invalid(format!("column `{name}` has a code without a level")));
                    }
                }
            }
        }
        let descriptors = names
            .into_iter()
            .zip(&columns)
            .enumerate()
            .map(|(column_index, (name, column))| FeatureDescriptor { name, kind: column.kind(), column_index })
            .collect();
        Ok(BanditLog { k, descriptors, arms, rewards, columns })
    }

    /// Builds a log from row-oriented events.
    pub fn from_events(
        k: usize,
        descriptors: Vec<FeatureDescriptor>,
        events: &[LoggedEvent],
    ) -> Result<Self, DataError> {
        let mut ordered = descriptors;
        ordered.sort_by_key(|d| d.column_index);
        if ordered.iter().enumerate().any(|(i, d)| d.column_index != i) {
            return Err(DataError::Invalid("column indices must be 0..d without gaps".into()));
        }
        let mut arms = Vec::with_capacity(events.len());
        let mut rewards = Vec::with_capacity(events.len());
        let mut continuous: Vec<Vec<f64>> = vec![Vec::new(); ordered.len()];
        let mut tokens: Vec<Vec<&str>> = vec![Vec::new(); ordered.len()];
        for (row, event) in events.iter().enumerate() {
            if event.features.len() != ordered.len() {
                return Err(DataError::Invalid(format!(
                    "event {row}: {} feature values for {} descriptors",
                    event.features.len(),
                    ordered.len()
                )));
            }
            arms.push(event.arm);
            rewards.push(event.reward);
            for (j, (descriptor, value)) in ordered.iter().zip(&event.features).enumerate() {
                match (descriptor.kind, value) {
                    (FeatureKind::Continuous, FeatureValue::Continuous(v)) => continuous[j].push(*v),
                    (FeatureKind::Categorical, FeatureValue::Categorical(t)) => tokens[j].push(t),
                    _ => {
                        return Err(DataError::Invalid(format!(
                            "event {row}: value kind of `{}` does not match its descriptor",
                            descriptor.name
                        )))
                    }
                }
            }
        }
        let columns = ordered
            .iter()
            .enumerate()
            .map(|(j, d)| match d.kind {
                FeatureKind::Continuous => Column::Continuous(std::mem::take(&mut continuous[j])),
                FeatureKind::Categorical => Column::categorical(&tokens[j]),
            })
            .collect();
        let names = ordered.into_iter().map(|d| d.name).collect();
        BanditLog::new(k, names, arms, rewards, columns)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn descriptors(&self) -> &[FeatureDescriptor] {
        &self.descriptors
    }

    pub fn arms(&self) -> &[usize] {
        &self.arms
    }

    pub fn rewards(&self) -> &[u8] {
        &self.rewards
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, index: usize) -> &Column {
        &self.columns[index]
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.descriptors.iter().position(|d| d.name == name)
    }

    pub fn event(&self, row: usize) -> LoggedEvent {
        LoggedEvent {
            arm: self.arms[row],
            reward: self.rewards[row],
            features: self.columns.iter().map(|c| c.value(row)).collect(),
        }
    }

    pub fn events(&self) -> impl Iterator<Item = LoggedEvent> + '_ {
        (0..self.len()).map(move |row| self.event(row))
    }

    /// Pull count N_i of each arm.
    pub fn arm_pulls(&self) -> Vec<u64> {
        let mut pulls = vec![0u64; self.k];
        for &arm in &self.arms {
            pulls[arm] += 1;
        }
        pulls
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmSummary {
    pub arm: usize,
    pub pulls: u64,
    pub successes: u64,
    /// `None` when the arm was never pulled.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogSummary {
    pub n: usize,
    pub k: usize,
    pub arms: Vec<ArmSummary>,
}

impl LogSummary {
    /// Arm with the highest observed success rate, ties to the lowest id.
    pub fn best_arm(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for summary in &self.arms {
            if let Some(rate) = summary.rate {
                if best.is_none_or(|(_, r)| rate > r) {
                    best = Some((summary.arm, rate));
                }
            }
        }
        best.map(|(arm, _)| arm)
    }
}

pub fn summarize(log: &BanditLog) -> LogSummary {
    let mut pulls = vec![0u64; log.k()];
    let mut successes = vec![0u64; log.k()];
    for (&arm, &reward) in log.arms().iter().zip(log.rewards()) {
        pulls[arm] += 1;
        successes[arm] += u64::from(reward);
    }
    let arms = pulls
        .into_iter()
        .zip(successes)
        .enumerate()
        .map(|(arm, (pulls, successes))| ArmSummary {
            arm,
            pulls,
            successes,
            rate: (pulls > 0).then(|| successes as f64 / pulls as f64),
        })
        .collect();
    LogSummary { n: log.len(), k: log.k(), arms }
}

/// Column roles for CSV ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub arm_column: String,
    pub reward_column: String,
    /// Explicit feature kinds; columns not listed are auto-typed.
    pub kinds: HashMap<String, FeatureKind>,
    /// Arm count override. Without it, k = max arm id + 1 and every id in
    /// 0..k must occur.
    pub arms: Option<usize>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            arm_column: "arm".to_string(),
            reward_column: "reward".to_string(),
            kinds: HashMap::new(),
            arms: None,
        }
    }
}

impl CsvSchema {
    /// Schema that reproduces `log` exactly when reading back what
    /// [`write_csv`] produced.
    pub fn for_log(log: &BanditLog) -> Self {
        CsvSchema {
            kinds: log.descriptors().iter().map(|d| (d.name.clone(), d.kind)).collect(),
            arms: Some(log.k()),
            ..CsvSchema::default()
        }
    }
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<BanditLog, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<BanditLog, DataError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find =
        |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| DataError::MissingColumn(name.to_string()));
    let arm_col = find(&schema.arm_column)?;
    let reward_col = find(&schema.reward_column)?;
    for name in schema.kinds.keys() {
        find(name)?;
    }
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != arm_col && c != reward_col).collect();

    let mut arms = Vec::new();
    let mut rewards = Vec::new();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); feature_cols.len()];
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let arm_cell = record.get(arm_col).unwrap_or("").trim();
        let arm = arm_cell.parse::<usize>().map_err(|_| DataError::Row {
            row,
            message: format!("arm must be a non-negative integer, got `{arm_cell}`"),
        })?;
        let reward = match record.get(reward_col).unwrap_or("").trim() {
            "0" => 0u8,
            "1" => 1u8,
            _ => return Err(DataError::Row { row, message: "reward must be 0 or 1".into() }),
        };
        arms.push(arm);
        rewards.push(reward);
        for (slot, &col) in cells.iter_mut().zip(&feature_cols) {
            slot.push(record.get(col).unwrap_or("").trim().to_string());
        }
    }

    let k = match schema.arms {
        Some(k) => {
            if let Some(row) = arms.iter().position(|&a| a >= k) {
                return Err(DataError::Row {
                    row: row + 1,
                    message: format!("arm {} out of range for {k} arms", arms[row]),
                });
            }
            k
        }
        None => {
            let k = arms.iter().max().map_or(0, |&m| m + 1);
            let mut seen = vec![false; k];
            for &arm in &arms {
                seen[arm] = true;
            }
            if let Some(gap) = seen.iter().position(|&s| !s) {
                return Err(DataError::Invalid(format!("arm ids must be dense 0..{k}; arm {gap} never occurs")));
            }
            k
        }
    };

    let mut names = Vec::with_capacity(feature_cols.len());
    let mut columns = Vec::with_capacity(feature_cols.len());
    for (values, &col) in cells.into_iter().zip(&feature_cols) {
        let name = headers[col].clone();
        let kind = schema.kinds.get(&name).copied().unwrap_or_else(|| auto_kind(&values));
        let column = match kind {
            FeatureKind::Continuous => {
                let mut parsed = Vec::with_capacity(values.len());
                for (i, cell) in values.iter().enumerate() {
                    let message = if cell.is_empty() {
                        format!("column `{name}` is empty; continuous cells cannot be missing")
                    } else {
                        format!("column `{name}` value `{cell}` is not a finite number")
                    };
                    match cell.parse::<f64>() {
                        Ok(v) if v.is_finite() => parsed.push(v),
                        _ => return Err(DataError::Row { row: i + 1, message }),
                    }
                }
                Column::Continuous(parsed)
            }
            FeatureKind::Categorical => {
                let tokens: Vec<&str> =
                    values.iter().map(|v| if v.is_empty() { MISSING_TOKEN } else { v.as_str() }).collect();
                Column::categorical(&tokens)
            }
        };
        names.push(name);
        columns.push(column);
    }
    BanditLog::new(k, names, arms, rewards, columns)
}

/// Continuous iff at least one cell is non-empty and every non-empty cell
/// parses as a finite number.
fn auto_kind(values: &[String]) -> FeatureKind {
    let mut any = false;
    for cell in values.iter().filter(|c| !c.is_empty()) {
        any = true;
        if !cell.parse::<f64>().is_ok_and(f64::is_finite) {
            return FeatureKind::Categorical;
        }
    }
    if any {
        FeatureKind::Continuous
    } else {
        FeatureKind::Categorical
    }
}

pub fn write_csv<W: Write>(log: &BanditLog, writer: W) -> Result<(), DataError> {
    let mut out = csv::WriterBuilder::new().quote_style(csv::QuoteStyle::NonNumeric).from_writer(writer);
    let mut header = vec!["arm".to_string(), "reward".to_string()];
    header.extend(log.descriptors().iter().map(|d| d.name.clone()));
    out.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for row in 0..log.len() {
        record.clear();
        record.push(log.arms()[row].to_string());
        record.push(log.rewards()[row].to_string());
        for column in log.columns() {
            record.push(match column {
                Column::Continuous(values) => values[row].to_string(),
                Column::Categorical { levels, codes } => levels[codes[row] as usize].clone(),
            });
        }
        out.write_record(&record)?;
    }
    out.flush().map_err(|source| DataError::Io { path: PathBuf::from("<writer>"), source })?;
    Ok(())
}

pub fn save_csv(log: &BanditLog, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    write_csv(log, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<BanditLog, DataError> {
        read_csv(text.as_bytes(), &CsvSchema::default())
    }

    #[test]
    fn three_row_file() {
        let log = read("arm,reward,age\n0,1,3.5\n1,0,2\n0,1,7\n").unwrap();
        assert_eq!(log.len(), 3);
        assert_eq!(log.k(), 2);
        assert_eq!(log.descriptors().len(), 1);
        assert_eq!(log.descriptors()[0].kind, FeatureKind::Continuous);
        assert_eq!(log.rewards(), &[1, 0, 1]);
    }

    #[test]
    fn bad_reward_names_row() {
        let text = "arm,reward,x\n0,1,1\n1,0,1\n0,1,1\n1,1,1\n0,2,1\n";
        let err = read(text).unwrap_err();
        assert_eq!(err.to_string(), "row 5: reward must be 0 or 1");
    }

    #[test]
    fn string_tokens_are_categorical() {
        let log = read("arm,reward,country\n0,1,\"US\"\n1,0,CA\n").unwrap();
        assert_eq!(log.descriptors()[0].kind, FeatureKind::Categorical);
        assert_eq!(log.event(1).features, vec![FeatureValue::Categorical("CA".into())]);
    }

    #[test]
    fn missing_cells() {
        let log = read("arm,reward,c\n0,1,a\n1,0,\n").unwrap();
        assert_eq!(log.event(1).features, vec![FeatureValue::Categorical(MISSING_TOKEN.into())]);

        let mut schema = CsvSchema::default();
        schema.kinds.insert("x".into(), FeatureKind::Continuous);
        let err = read_csv("arm,reward,x\n0,1,1.5\n1,0,\n".as_bytes(), &schema).unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("row 2:") && msg.contains("`x`"), "{msg}");

        let err = read_csv("arm,reward,x\n0,1,NaN\n1,0,1\n".as_bytes(), &schema).unwrap_err();
        assert!(err.to_string().starts_with("row 1:"));
    }

    #[test]
    fn nan_tokens_auto_type_as_categorical() {
        let log = read("arm,reward,x\n0,1,NaN\n1,0,1\n").unwrap();
        assert_eq!(log.descriptors()[0].kind, FeatureKind::Categorical);
    }

    #[test]
    fn arm_errors() {
        assert!(matches!(read("arm,reward\n-1,1\n1,0\n"), Err(DataError::Row { row: 1, .. })));
        assert!(matches!(read("arm,reward\n1.5,1\n1,0\n"), Err(DataError::Row { row: 1, .. })));
        assert!(matches!(read("arm,reward\n0,1\n2,0\n"), Err(DataError::Invalid(_))));
        assert!(matches!(read("arm,reward\n0,1\n0,0\n"), Err(DataError::Invalid(_))));
        assert!(matches!(read("arm,x\n0,1\n"), Err(DataError::MissingColumn(c)) if c == "reward"));
    }

    #[test]
    fn missing_file_names_path() {
        let err = ingest_csv("/nonexistent/log.csv", &CsvSchema::default()).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/log.csv"));
    }

    #[test]
    fn summary_rates() {
        let log = read("arm,reward\n0,1\n0,0\n1,1\n").unwrap();
        let summary = summarize(&log);
        let rates: Vec<_> = summary.arms.iter().map(|a| a.rate).collect();
        assert_eq!(rates, vec![Some(0.5), Some(1.0)]);
        assert_eq!(summary.arms.iter().map(|a| a.pulls).sum::<u64>(), 3);
        assert_eq!(summary.best_arm(), Some(1));
    }

    #[test]
    fn summary_absent_arms() {
        let schema = CsvSchema { arms: Some(3), ..CsvSchema::default() };
        let log = read_csv("arm,reward\n0,1\n1,0\n".as_bytes(), &schema).unwrap();
        assert_eq!(summarize(&log).arms[2].rate, None);

        let empty = BanditLog::new(2, vec![], vec![], vec![], vec![]).unwrap();
        let summary = summarize(&empty);
        assert_eq!(summary.n, 0);
        assert!(summary.arms.iter().all(|a| a.rate.is_none()));
        assert_eq!(summary.best_arm(), None);
    }

    #[test]
    fn constructor_rejects_bad_events() {
        assert!(BanditLog::new(1, vec![], vec![0], vec![1], vec![]).is_err());
        assert!(BanditLog::new(2, vec![], vec![2], vec![1], vec![]).is_err());
        assert!(BanditLog::new(2, vec![], vec![0], vec![3], vec![]).is_err());
        let nan = Column::Continuous(vec![f64::NAN]);
        assert!(BanditLog::new(2, vec!["x".into()], vec![0], vec![1], vec![nan]).is_err());
        let dup = vec![Column::Continuous(vec![1.0]), Column::Continuous(vec![1.0])];
        assert!(BanditLog::new(2, vec!["x".into(), "x".into()], vec![0], vec![1], dup).is_err());
    }

    #[test]
    fn write_then_read_round_trip() {
        let descriptors = vec![
            FeatureDescriptor { name: "x".into(), kind: FeatureKind::Continuous, column_index: 0 },
            FeatureDescriptor { name: "c".into(), kind: FeatureKind::Categorical, column_index: 1 },
        ];
        let events = vec![
            LoggedEvent {
                arm: 0,
                reward: 1,
                features: vec![FeatureValue::Continuous(0.1), FeatureValue::Categorical("a, b".into())],
            },
            LoggedEvent {
                arm: 2,
                reward: 0,
                features: vec![FeatureValue::Continuous(-3e-9), FeatureValue::Categorical("7".into())],
            },
        ];
        let log = BanditLog::from_events(4, descriptors, &events).unwrap();
        let mut buf = Vec::new();
        write_csv(&log, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &CsvSchema::for_log(&log)).unwrap();
        assert_eq!(back.events().collect::<Vec<_>>(), events);
        assert_eq!(back.descriptors(), log.descriptors());
        assert_eq!(back.k(), 4);
    }
}
