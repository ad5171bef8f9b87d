//! The bundled rule pack, the planted mini-corpus and its manifest.
//!
//! `assets/corpus` holds twelve small Java files. Eight carry planted misuses,
//! two per category; `assets/manifest.jsonl` records what each file should
//! extract to, which violations it should raise and what it should repair
//! to. [`validate_assets`] re-derives all of it and reports any drift.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analyzer::{check_sequence, MisuseCategory};
use crate::error::{Error, Result};
use crate::extractor::{scan_corpus, CorpusFilter};
use crate::repair::repair_sequence;
use crate::ruledsl::{load_rule_pack, RulePack};
use crate::seqmodel::{load_dataset, parse_sequence};

/// `assets/` of this crate's source tree.
pub fn assets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedViolation {
    pub class: String,
    pub category: MisuseCategory,
}

/// Expected outcome for one corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantEntry {
    pub file: String,
    pub method: String,
    pub annotation: String,
    pub sequence: String,
    pub violations: Vec<PlantedViolation>,
    /// `None` when some violation has no repair.
    pub repaired: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantManifest {
    pub entries: Vec<PlantEntry>,
}

impl PlantManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::MalformedRecord {
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(PlantManifest { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn category_counts(&self) -> BTreeMap<MisuseCategory, usize> {
        let mut counts: BTreeMap<MisuseCategory, usize> = MisuseCategory::ALL.iter().map(|&c| (c, 0)).collect();
        for v in self.entries.iter().flat_map(|e| &e.violations) {
            *counts.get_mut(&v.category).unwrap() += 1;
        }
        counts
    }

    /// Entries with at least one planted violation.
    pub fn misuse_count(&self) -> usize {
        self.entries.iter().filter(|e| !e.violations.is_empty()).count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssetReport {
    pub rules_checked: usize,
    pub entries_checked: usize,
    pub drift: Vec<String>,
}

impl AssetReport {
    pub fn is_consistent(&self) -> bool {
        self.drift.is_empty()
    }
}

impl fmt::Display for AssetReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_consistent() {
            return write!(
                f,
                "all assets consistent ({} rules, {} corpus entries)",
                self.rules_checked, self.entries_checked
            );
        }
        writeln!(f, "{} asset drift(s):", self.drift.len())?;
        for d in &self.drift {
            writeln!(f, "  {d}")?;
        }
        Ok(())
    }
}

/// Classes the pack must cover: those of the PBE key derivation and the
/// IV/cipher examples.
pub const REQUIRED_CLASSES: [&str; 8] = [
    "SecureRandom",
    "PBEKeySpec",
    "SecretKeyFactory",
    "SecretKey",
    "SecretKeySpec",
    "KeyGenerator",
    "IvParameterSpec",
    "Cipher",
];

/// Re-derives every manifest expectation from the files under `dir`
/// (`rules/`, `corpus/`, `manifest.jsonl`, `mini-dataset.jsonl`).
pub fn validate_assets(dir: impl AsRef<Path>) -> Result<AssetReport> {
    let dir = dir.as_ref();
    let pack = load_rule_pack(dir.join("rules"))?;
    let manifest = PlantManifest::load(dir.join("manifest.jsonl"))?;
    let mut report = AssetReport {
        rules_checked: pack.len(),
        ..Default::default()
    };
    for class in REQUIRED_CLASSES {
        if !pack.contains(class) {
            report.drift.push(format!("rule pack lacks {class}"));
        }
    }
    check_corpus(dir, &pack, &manifest, &mut report)?;
    Ok(report)
}

fn check_corpus(dir: &Path, pack: &RulePack, manifest: &PlantManifest, report: &mut AssetReport) -> Result<()> {
    let scanned = scan_corpus(dir.join("corpus"), &CorpusFilter::default(), pack)?;
    if scanned.len() != manifest.entries.len() {
        report.drift.push(format!(
            "corpus yields {} sequences, manifest lists {}",
            scanned.len(),
            manifest.entries.len()
        ));
    }
    for (got, want) in scanned.entries().iter().zip(&manifest.entries) {
        report.entries_checked += 1;
        let prov = got.sequence.provenance.clone().unwrap_or_default();
        let tag = format!("{}#{}", want.file, want.method);
        if prov.file.as_deref() != Some(want.file.as_str()) || prov.method.as_deref() != Some(want.method.as_str()) {
            report
                .drift
                .push(format!("{tag}: extracted from {:?}#{:?}", prov.file, prov.method));
        }
        if got.annotation != want.annotation {
            report.drift.push(format!(
                "{tag}: annotation {:?}, expected {:?}",
                got.annotation, want.annotation
            ));
        }
        let seq = got.sequence.to_string();
        if seq != want.sequence {
            report
                .drift
                .push(format!("{tag}: sequence {seq:?}, expected {:?}", want.sequence));
        }
        let found: Vec<PlantedViolation> = check_sequence(&got.sequence, pack)
            .into_iter()
            .map(|v| PlantedViolation {
                class: v.rule_class,
                category: v.category,
            })
            .collect();
        if found != want.violations {
            report
                .drift
                .push(format!("{tag}: violations {found:?}, expected {:?}", want.violations));
        }
        let repaired = match repair_sequence(&got.sequence, pack) {
            Ok(r) if r.is_clean() => Some(r.sequence.to_string()),
            Ok(_) => None,
            Err(e) => {
                report.drift.push(format!("{tag}: repair failed: {e}"));
                continue;
            }
        };
        if repaired != want.repaired {
            report
                .drift
                .push(format!("{tag}: repaired to {repaired:?}, expected {:?}", want.repaired));
        }
        if let Some(r) = &want.repaired {
            if parse_sequence(r).is_err() {
                report.drift.push(format!("{tag}: manifest repair does not parse"));
            }
        }
    }

    let stored = load_dataset(dir.join("mini-dataset.jsonl"))?;
    if stored.to_jsonl() != scanned.to_jsonl() {
        report
            .drift
            .push("mini-dataset.jsonl differs from a fresh scan of corpus/".to_string());
    }
    Ok(())
}
