//! Sentence-level BLEU over call tokens.
//!
//! Scores use uniform weights over n-gram orders `1..=N`, where `N` is the
//! configured maximum capped at the candidate length. When an order `n >= 2`
//! has no matching n-gram, its precision becomes `1 / (total + 1)` (add-one on
//! both sides) so short or nearly-right candidates do not collapse to zero.
//! Absolute numbers depend on that choice.

use std::collections::{BTreeSet, HashMap};
use std::hash::Hash;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::seqmodel::{CallSequence, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BleuConfig {
    pub n_max: usize,
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig { n_max: 4 }
    }
}

impl BleuConfig {
    pub fn new(n_max: usize) -> Result<Self> {
        if !(1..=9).contains(&n_max) {
            return Err(Error::InvalidInput(format!("n_max must be in 1..=9, got {n_max}")));
        }
        Ok(BleuConfig { n_max })
    }
}

fn ngram_counts<T: Hash + Eq>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    for g in tokens.windows(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// BLEU over arbitrary token slices.
pub fn bleu_tokens<T: Hash + Eq>(candidate: &[T], reference: &[T], cfg: &BleuConfig) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::InvalidInput("BLEU reference is empty".into()));
    }
    if candidate.is_empty() {
        return Ok(0.0);
    }
    let n_eff = cfg.n_max.min(candidate.len());
    let mut log_sum = 0.0;
    for n in 1..=n_eff {
        let cand = ngram_counts(candidate, n);
        let refc = ngram_counts(reference, n);
        let matched: usize = cand
            .iter()
            .map(|(g, &c)| c.min(refc.get(g).copied().unwrap_or(0)))
            .sum();
        let total = candidate.len() + 1 - n;
        let p = if matched == 0 {
            if n == 1 {
                return Ok(0.0);
            }
            1.0 / (total as f64 + 1.0)
        } else {
            matched as f64 / total as f64
        };
        log_sum += p.ln();
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let bp = if c >= r { 1.0 } else { (1.0 - r / c).exp() };
    Ok(bp * (log_sum / n_eff as f64).exp())
}

pub fn sentence_bleu(candidate: &CallSequence, reference: &CallSequence, cfg: &BleuConfig) -> Result<f64> {
    bleu_tokens(&candidate.tokens(), &reference.tokens(), cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuReport {
    /// Scores in candidate id order.
    pub per_pair_scores: Vec<f64>,
    pub ids: Vec<u64>,
    pub mean_score_pct: f64,
    pub perfect_count: usize,
}

impl BleuReport {
    pub fn from_scores(ids: Vec<u64>, scores: Vec<f64>) -> Self {
        let mean = if scores.is_empty() {
            0.0
        } else {
            100.0 * scores.iter().sum::<f64>() / scores.len() as f64
        };
        BleuReport {
            perfect_count: scores.iter().filter(|&&s| s == 1.0).count(),
            per_pair_scores: scores,
            ids,
            mean_score_pct: mean,
        }
    }
}

/// Scores every candidate against the reference with the same id.
pub fn dataset_bleu(candidates: &Dataset, references: &Dataset, cfg: &BleuConfig) -> Result<BleuReport> {
    let missing: Vec<u64> = candidates
        .ids()
        .into_iter()
        .filter(|id| references.get(*id).is_none())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if !missing.is_empty() {
        return Err(Error::IdMismatch { ids: missing });
    }
    let mut ids = candidates.ids();
    ids.sort_unstable();
    let scores = ids
        .iter()
        .map(|&id| {
            let c = &candidates.get(id).expect("listed id").sequence;
            let r = &references.get(id).expect("checked above").sequence;
            sentence_bleu(c, r, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BleuReport::from_scores(ids, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqmodel::{parse_sequence, AnnotatedSequence};

    fn bleu(c: &str, r: &str) -> f64 {
        sentence_bleu(
            &parse_sequence(c).unwrap(),
            &parse_sequence(r).unwrap(),
            &BleuConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn worked_examples() {
        assert_eq!(bleu("A.x B.y C.z D.w E.v", "A.x B.y C.z D.w E.v"), 1.0);
        assert!((bleu("A.x B.y", "A.x C.z") - 0.5).abs() < 1e-12);
        assert!((bleu("A.x B.y", "A.x B.y C.z") - (-0.5f64).exp()).abs() < 1e-12);
        assert!((bleu("A.x B.y", "A.x B.y C.z") - 0.60653).abs() < 1e-5);
    }

    #[test]
    fn edge_cases() {
        assert_eq!(bleu("", "A.x"), 0.0);
        assert_eq!(bleu("B.y", "A.x"), 0.0);
        assert_eq!(bleu("A.x", "A.x"), 1.0);
        let empty = parse_sequence("").unwrap();
        assert!(sentence_bleu(&empty, &empty, &BleuConfig::default()).is_err());
        assert!(BleuConfig::new(0).is_err());
        assert!(BleuConfig::new(10).is_err());
        assert_eq!(BleuConfig::new(9).unwrap().n_max, 9);
    }

    #[test]
    fn clipping() {
        // three A.x in the candidate, one in the reference
        let s = bleu("A.x A.x A.x", "A.x B.y C.z");
        // p1 = 1/3, p2 = 1/3 (smoothed), p3 = 1/2 (smoothed)
        let expected = ((1.0f64 / 3.0).ln() * 2.0 + 0.5f64.ln()) / 3.0;
        assert!((s - expected.exp()).abs() < 1e-12, "{s}");
    }

    fn ds(pairs: &[(u64, &str)]) -> Dataset {
        Dataset::new(
            "t",
            pairs
                .iter()
                .map(|(id, s)| AnnotatedSequence::new(*id, "a", parse_sequence(s).unwrap()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn dataset_level() {
        let refs = ds(&[(1, "A.x B.y"), (2, "A.x C.z")]);
        let r = dataset_bleu(&refs, &refs, &BleuConfig::default()).unwrap();
        assert_eq!((r.mean_score_pct, r.perfect_count), (100.0, 2));
        let cands = ds(&[(2, "A.x B.y"), (1, "A.x B.y")]);
        let r = dataset_bleu(&cands, &refs, &BleuConfig::default()).unwrap();
        assert!((r.mean_score_pct - 75.0).abs() < 1e-9);
        assert_eq!(r.perfect_count, 1);
        assert_eq!(r.ids, vec![1, 2]);
        match dataset_bleu(&ds(&[(3, "A.x"), (1, "A.x")]), &refs, &BleuConfig::default()) {
            Err(Error::IdMismatch { ids }) => assert_eq!(ids, vec![3]),
            other => panic!("{other:?}"),
        }
    }
}
