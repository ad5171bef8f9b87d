//! Call tokens, call sequences, annotated datasets and their JSON Lines form.
//!
//! A call is written `Class.method`; constructors use the method name `new`.
//! A sequence is the space-joined list of its call tokens, e.g.
//! `SecureRandom.getInstance SecureRandom.nextBytes PBEKeySpec.new`.
//!
//! On disk a dataset is UTF-8 JSON Lines, one record per line:
//!
//! ```text
//! {"id":1,"annotation":"encrypts data with aes.","sequence":["Cipher.getInstance","Cipher.init"],"args":{"0":["AES/CBC/PKCS5Padding"],"1":[null,null]},"provenance":{"file":"Enc.java","method":"encrypt"}}
//! ```
//!
//! `args` maps a call index to its captured argument list. A string element is a
//! literal; `null` marks an argument whose value was not a string literal. Calls
//! missing from `args` have no captured argument list at all.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Method name used for constructor calls.
pub const CONSTRUCTOR: &str = "new";

/// One captured argument of a call.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Option<String>", into = "Option<String>")]
pub enum ArgValue {
    Literal(String),
    /// Present in source but not a string literal.
    Opaque,
}

impl From<Option<String>> for ArgValue {
    fn from(v: Option<String>) -> Self {
        v.map_or(ArgValue::Opaque, ArgValue::Literal)
    }
}

impl From<ArgValue> for Option<String> {
    fn from(v: ArgValue) -> Self {
        match v {
            ArgValue::Literal(s) => Some(s),
            ArgValue::Opaque => None,
        }
    }
}

impl ArgValue {
    pub fn as_literal(&self) -> Option<&str> {
        match self {
            ArgValue::Literal(s) => Some(s),
            ArgValue::Opaque => None,
        }
    }
}

/// A single API invocation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ApiCall {
    class_name: String,
    method_name: String,
    args: Option<Vec<ArgValue>>,
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' || c == '$' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || c == '_' || c == '$')
}

fn is_class_name(s: &str) -> bool {
    !s.is_empty() && s.split('.').all(is_identifier)
}

impl ApiCall {
    /// Builds a call, validating both halves of the token. The class name may
    /// be package-qualified (`java.security.SecureRandom`).
    pub fn new(class_name: impl Into<String>, method_name: impl Into<String>) -> Result<Self> {
        let class_name = class_name.into();
        let method_name = method_name.into();
        if !is_class_name(&class_name) || !is_identifier(&method_name) {
            return Err(Error::MalformedToken {
                token: format!("{class_name}.{method_name}"),
            });
        }
        Ok(ApiCall {
            class_name,
            method_name,
            args: None,
        })
    }

    /// Parses one `Class.method` token, splitting at the last dot.
    pub fn parse(token: &str) -> Result<Self> {
        let malformed = || Error::MalformedToken {
            token: token.to_string(),
        };
        let (class, method) = token.rsplit_once('.').ok_or_else(malformed)?;
        ApiCall::new(class, method).map_err(|_| malformed())
    }

    pub fn with_args(mut self, args: Vec<ArgValue>) -> Self {
        self.args = Some(args);
        self
    }

    pub fn set_args(&mut self, args: Option<Vec<ArgValue>>) {
        self.args = args;
    }

    pub fn class_name(&self) -> &str {
        &self.class_name
    }

    /// Class name without its package prefix.
    pub fn simple_class(&self) -> &str {
        self.class_name
            .rsplit_once('.')
            .map_or(self.class_name.as_str(), |(_, c)| c)
    }

    pub fn method_name(&self) -> &str {
        &self.method_name
    }

    pub fn is_constructor(&self) -> bool {
        self.method_name == CONSTRUCTOR
    }

    pub fn token(&self) -> String {
        format!("{}.{}", self.class_name, self.method_name)
    }

    /// Captured argument list, `None` when arguments were never captured.
    pub fn args(&self) -> Option<&[ArgValue]> {
        self.args.as_deref()
    }

    pub fn args_mut(&mut self) -> &mut Option<Vec<ArgValue>> {
        &mut self.args
    }

    /// The string literals among the captured arguments, in order.
    pub fn literal_args(&self) -> impl Iterator<Item = &str> {
        self.args.iter().flatten().filter_map(ArgValue::as_literal)
    }
}

impl fmt::Display for ApiCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.class_name, self.method_name)
    }
}

impl FromStr for ApiCall {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ApiCall::parse(s)
    }
}

/// Where a sequence was mined from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repo: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
}

/// An ordered list of calls.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallSequence {
    pub calls: Vec<ApiCall>,
    pub provenance: Option<Provenance>,
}

impl CallSequence {
    pub fn new(calls: Vec<ApiCall>) -> Self {
        CallSequence {
            calls,
            provenance: None,
        }
    }

    pub fn len(&self) -> usize {
        self.calls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calls.is_empty()
    }

    pub fn tokens(&self) -> Vec<String> {
        self.calls.iter().map(ApiCall::token).collect()
    }

    /// Copy with package prefixes stripped from every class name.
    pub fn normalized(&self) -> CallSequence {
        let calls = self
            .calls
            .iter()
            .map(|c| ApiCall {
                class_name: c.simple_class().to_string(),
                method_name: c.method_name.clone(),
                args: c.args.clone(),
            })
            .collect();
        CallSequence {
            calls,
            provenance: self.provenance.clone(),
        }
    }
}

impl fmt::Display for CallSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, call) in self.calls.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{call}")?;
        }
        Ok(())
    }
}

impl FromStr for CallSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_sequence(s)
    }
}

/// Parses a whitespace-separated token string.
pub fn parse_sequence(text: &str) -> Result<CallSequence> {
    let calls = text
        .split_whitespace()
        .map(ApiCall::parse)
        .collect::<Result<Vec<_>>>()?;
    Ok(CallSequence::new(calls))
}

pub fn serialize_sequence(s: &CallSequence) -> String {
    s.to_string()
}

/// A natural-language annotation paired with a call sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSequence {
    pub id: u64,
    pub annotation: String,
    pub sequence: CallSequence,
}

impl AnnotatedSequence {
    /// Lowercases the annotation; rejects blank ones.
    pub fn new(id: u64, annotation: &str, sequence: CallSequence) -> Result<Self> {
        let annotation = annotation.trim().to_lowercase();
        if annotation.is_empty() {
            return Err(Error::InvalidInput(format!("entry {id}: empty annotation")));
        }
        Ok(AnnotatedSequence {
            id,
            annotation,
            sequence,
        })
    }
}

/// A named collection of annotated sequences with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub name: String,
    entries: Vec<AnnotatedSequence>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, entries: Vec<AnnotatedSequence>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if let Some(first) = seen.insert(e.id, i) {
                return Err(Error::DuplicateId {
                    id: e.id,
                    first_line: first + 1,
                    second_line: i + 1,
                });
            }
        }
        Ok(Dataset {
            name: name.into(),
            entries,
        })
    }

    pub fn empty(name: impl Into<String>) -> Self {
        Dataset {
            name: name.into(),
            entries: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[AnnotatedSequence] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<AnnotatedSequence> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&AnnotatedSequence> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn ids(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.id).collect()
    }

    /// Serializes to JSON Lines, one record per line with a trailing newline.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            if e.sequence.is_empty() {
                warn!("entry {} has an empty sequence", e.id);
            }
            let record = Record::from(e);
            out.push_str(&serde_json::to_string(&record).expect("records always serialize"));
            out.push('\n');
        }
        out
    }

    /// Parses JSON Lines text. Blank lines are skipped.
    pub fn from_jsonl(name: impl Into<String>, text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut lines_by_id: HashMap<u64, usize> = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                line: line_no,
                message: e.to_string(),
            })?;
            if let Some(first) = lines_by_id.insert(record.id, line_no) {
                return Err(Error::DuplicateId {
                    id: record.id,
                    first_line: first,
                    second_line: line_no,
                });
            }
            let entry = record.into_entry().map_err(|e| match e {
                Error::MalformedToken { .. } => e,
                other => Error::MalformedRecord {
                    line: line_no,
                    message: other.to_string(),
                },
            })?;
            if entry.sequence.is_empty() {
                warn!("line {line_no}: entry {} has an empty sequence", entry.id);
            }
            entries.push(entry);
        }
        Ok(Dataset {
            name: name.into(),
            entries,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: u64,
    annotation: String,
    sequence: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    args: BTreeMap<usize, Vec<ArgValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

impl From<&AnnotatedSequence> for Record {
    fn from(e: &AnnotatedSequence) -> Self {
        let args = e
            .sequence
            .calls
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.args.clone().map(|a| (i, a)))
            .collect();
        Record {
            id: e.id,
            annotation: e.annotation.clone(),
            sequence: e.sequence.tokens(),
            args,
            provenance: e.sequence.provenance.clone(),
        }
    }
}

impl Record {
    fn into_entry(self) -> Result<AnnotatedSequence> {
        let mut calls = self
            .sequence
            .iter()
            .map(|t| ApiCall::parse(t))
            .collect::<Result<Vec<_>>>()?;
        for (idx, args) in self.args {
            let call = calls.get_mut(idx).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "args index {idx} out of range for a sequence of {}",
                    self.sequence.len()
                ))
            })?;
            call.args = Some(args);
        }
        let sequence = CallSequence {
            calls,
            provenance: self.provenance,
        };
        AnnotatedSequence::new(self.id, &self.annotation, sequence)
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::from_jsonl(name, &text)
}

pub fn store_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, d.to_jsonl()).map_err(|e| Error::io(path, e))
}

/// Length and vocabulary statistics of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub entry_count: usize,
    pub mean_length: f64,
    pub frac_longer_than: BTreeMap<usize, f64>,
    pub sequence_vocab_size: usize,
    pub annotation_vocab_size: usize,
}

/// Threshold used by [`dataset_stats`].
pub const DEFAULT_LENGTH_THRESHOLD: usize = 7;

pub fn dataset_stats(d: &Dataset) -> Result<StatsReport> {
    dataset_stats_with(d, &[DEFAULT_LENGTH_THRESHOLD])
}

pub fn dataset_stats_with(d: &Dataset, thresholds: &[usize]) -> Result<StatsReport> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = d.len();
    let lengths: Vec<usize> = d.entries().iter().map(|e| e.sequence.len()).collect();
    let total: usize = lengths.iter().sum();
    let frac_longer_than = thresholds
        .iter()
        .map(|&t| {
            let longer = lengths.iter().filter(|&&l| l > t).count();
            (t, longer as f64 / n as f64)
        })
        .collect();
    let seq_vocab: BTreeSet<String> = d.entries().iter().flat_map(|e| e.sequence.tokens()).collect();
    let ann_vocab: BTreeSet<String> = d
        .entries()
        .iter()
        .flat_map(|e| e.annotation.split_whitespace().map(str::to_lowercase))
        .collect();
    Ok(StatsReport {
        entry_count: n,
        mean_length: total as f64 / n as f64,
        frac_longer_than,
        sequence_vocab_size: seq_vocab.len(),
        annotation_vocab_size: ann_vocab.len(),
    })
}
