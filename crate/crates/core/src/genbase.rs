//! A retrieval baseline that maps annotations to call sequences, and the k-fold
//! harness that scores it.
//!
//! The generator indexes training annotations as TF-IDF vectors
//! (`idf = ln(N / df)`, tokens are lowercase alphanumeric runs) and answers a
//! query with the sequence of the most cosine-similar entry. It never invents
//! a sequence.
//!
//! Fold assignment is portable: ids are sorted, shuffled with Fisher-Yates
//! driven by SplitMix64 seeded with `seed`, and the shuffled list is cut into
//! `k` contiguous folds, the first `n % k` of which hold one extra entry.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{dataset_bleu, BleuConfig};
use crate::seqmodel::{AnnotatedSequence, CallSequence, Dataset};

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone)]
pub struct RetrievalIndex {
    pub vocabulary: BTreeMap<String, usize>,
    pub idf: Vec<f64>,
    /// Sparse TF-IDF vectors, one per entry, sorted by dimension.
    pub vectors: Vec<Vec<(usize, f64)>>,
    pub entries: Vec<AnnotatedSequence>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub sequence: CallSequence,
    pub entry_id: u64,
    pub similarity: f64,
    /// Set when no entry shares a token with the query, or when several
    /// entries share the best score.
    pub low_confidence: bool,
}

fn term_counts(text: &str) -> BTreeMap<String, usize> {
    let mut tf = BTreeMap::new();
    for t in tokenize(text) {
        *tf.entry(t).or_insert(0) += 1;
    }
    tf
}

fn norm(v: &[(usize, f64)]) -> f64 {
    v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt()
}

pub fn build_index(training: &[AnnotatedSequence]) -> Result<RetrievalIndex> {
    if training.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut entries = training.to_vec();
    entries.sort_by_key(|e| e.id);
    let counts: Vec<BTreeMap<String, usize>> = entries.iter().map(|e| term_counts(&e.annotation)).collect();

    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for tf in &counts {
        for t in tf.keys() {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let vocabulary: BTreeMap<String, usize> = df.keys().enumerate().map(|(i, t)| (t.to_string(), i)).collect();
    let n = entries.len() as f64;
    let idf: Vec<f64> = df.values().map(|&d| (n / d as f64).ln()).collect();
    let vectors = counts
        .iter()
        .map(|tf| {
            tf.iter()
                .map(|(t, &c)| {
                    let dim = vocabulary[t];
                    (dim, c as f64 * idf[dim])
                })
                .collect()
        })
        .collect();
    Ok(RetrievalIndex {
        vocabulary,
        idf,
        vectors,
        entries,
    })
}

impl RetrievalIndex {
    fn query_vector(&self, query: &str) -> Vec<(usize, f64)> {
        term_counts(query)
            .into_iter()
            .filter_map(|(t, c)| self.vocabulary.get(&t).map(|&d| (d, c as f64 * self.idf[d])))
            .collect()
    }

    pub fn similarities(&self, query: &str) -> Vec<f64> {
        let q: HashMap<usize, f64> = self.query_vector(query).into_iter().collect();
        let qn = q.values().map(|x| x * x).sum::<f64>().sqrt();
        self.vectors
            .iter()
            .map(|v| {
                let vn = norm(v);
                if qn == 0.0 || vn == 0.0 {
                    return 0.0;
                }
                let dot: f64 = v.iter().filter_map(|(d, x)| q.get(d).map(|y| x * y)).sum();
                dot / (qn * vn)
            })
            .collect()
    }

    pub fn generate(&self, query: &str) -> Generation {
        let sims = self.similarities(query);
        // entries are sorted by id, so the first maximum is the lowest id
        let mut best = 0;
        for (i, &s) in sims.iter().enumerate() {
            if s > sims[best] {
                best = i;
            }
        }
        let top = sims[best];
        let ties = sims.iter().filter(|&&s| s == top).count();
        let e = &self.entries[best];
        Generation {
            sequence: e.sequence.clone(),
            entry_id: e.id,
            similarity: top,
            low_confidence: top == 0.0 || ties > 1,
        }
    }
}

pub fn generate(index: &RetrievalIndex, query: &str) -> Generation {
    index.generate(query)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalConfig {
    pub k: usize,
    pub seed: u64,
    pub bleu: BleuConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: 10,
            seed: 0,
            bleu: BleuConfig::default(),
        }
    }
}

/// SplitMix64, as published by Steele, Lea and Flood.
#[derive(Debug, Clone)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `0..bound` by rejection.
    pub fn below(&mut self, bound: u64) -> u64 {
        let zone = u64::MAX - u64::MAX % bound;
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % bound;
            }
        }
    }
}

/// Sorted `ids` shuffled by Fisher-Yates (swapping from the back).
pub fn permutation(ids: &[u64], seed: u64) -> Vec<u64> {
    let mut out = ids.to_vec();
    out.sort_unstable();
    let mut rng = SplitMix64::new(seed);
    for i in (1..out.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        out.swap(i, j);
    }
    out
}

/// Test-fold ids for each of the `k` folds.
pub fn fold_ids(ids: &[u64], k: usize, seed: u64) -> Result<Vec<Vec<u64>>> {
    let n = ids.len();
    if k < 2 || k > n {
        return Err(Error::FoldCount { k, n });
    }
    let perm = permutation(ids, seed);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(perm[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

#[derive(Debug, Clone)]
pub struct Fold {
    pub train: Vec<AnnotatedSequence>,
    pub test: Vec<AnnotatedSequence>,
}

pub fn kfold_split(d: &Dataset, cfg: &EvalConfig) -> Result<Vec<Fold>> {
    let folds = fold_ids(&d.ids(), cfg.k, cfg.seed)?;
    let mut fold_of = HashMap::new();
    for (f, ids) in folds.iter().enumerate() {
        for id in ids {
            fold_of.insert(*id, f);
        }
    }
    Ok((0..folds.len())
        .map(|f| {
            let mut train = Vec::new();
            let mut test = Vec::new();
            for e in d.entries() {
                if fold_of[&e.id] == f {
                    test.push(e.clone());
                } else {
                    train.push(e.clone());
                }
            }
            test.sort_by_key(|e| e.id);
            train.sort_by_key(|e| e.id);
            Fold { train, test }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_size: usize,
    pub accuracy_bleu_pct: f64,
    /// `None` when no test entry of this fold has a corrected counterpart.
    pub security_bleu_pct: Option<f64>,
    pub low_confidence: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub accuracy_bleu_pct: f64,
    pub security_bleu_pct: f64,
    pub pairs_accuracy: usize,
    pub pairs_security: usize,
    pub per_fold: Vec<FoldReport>,
    pub config: EvalConfig,
}

fn restrict(d: &Dataset, name: &str, keep: impl Fn(u64) -> bool) -> Dataset {
    let entries = d.entries().iter().filter(|e| keep(e.id)).cloned().collect();
    Dataset::new(name, entries).expect("subset of a valid dataset")
}

/// Cross-validates the retrieval generator. Accuracy compares generations
/// with the source sequences; security compares them with the corrected
/// sequences, for ids the corrected dataset covers.
pub fn evaluate(source: &Dataset, corrected: &Dataset, cfg: &EvalConfig) -> Result<EvalReport> {
    let stray: Vec<u64> = corrected
        .ids()
        .into_iter()
        .filter(|id| source.get(*id).is_none())
        .collect();
    if !stray.is_empty() {
        return Err(Error::IdMismatch { ids: stray });
    }
    let folds = kfold_split(source, cfg)?;
    let mut generated = Vec::new();
    let mut per_fold = Vec::new();
    for (f, fold) in folds.iter().enumerate() {
        let index = build_index(&fold.train)?;
        let mut fold_gen = Vec::new();
        let mut low = 0;
        for e in &fold.test {
            let g = index.generate(&e.annotation);
            low += usize::from(g.low_confidence);
            fold_gen.push(AnnotatedSequence {
                id: e.id,
                annotation: e.annotation.clone(),
                sequence: g.sequence,
            });
        }
        let fold_ds = Dataset::new("generated", fold_gen.clone())?;
        let acc = dataset_bleu(&fold_ds, source, &cfg.bleu)?;
        let covered = restrict(&fold_ds, "generated", |id| corrected.get(id).is_some());
        let sec = if covered.is_empty() {
            None
        } else {
            Some(dataset_bleu(&covered, corrected, &cfg.bleu)?.mean_score_pct)
        };
        per_fold.push(FoldReport {
            fold: f,
            test_size: fold.test.len(),
            accuracy_bleu_pct: acc.mean_score_pct,
            security_bleu_pct: sec,
            low_confidence: low,
        });
        generated.extend(fold_gen);
    }
    let all = Dataset::new("generated", generated)?;
    let acc = dataset_bleu(&all, source, &cfg.bleu)?;
    let covered = restrict(&all, "generated", |id| corrected.get(id).is_some());
    let sec = dataset_bleu(&covered, corrected, &cfg.bleu)?;
    Ok(EvalReport {
        accuracy_bleu_pct: acc.mean_score_pct,
        security_bleu_pct: sec.mean_score_pct,
        pairs_accuracy: acc.per_pair_scores.len(),
        pairs_security: sec.per_pair_scores.len(),
        per_fold,
        config: *cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqmodel::parse_sequence;

    fn entry(id: u64, ann: &str, seq: &str) -> AnnotatedSequence {
        AnnotatedSequence::new(id, ann, parse_sequence(seq).unwrap()).unwrap()
    }

    #[test]
    fn single_entry_index() {
        let idx = build_index(&[entry(1, "Encrypt data", "Cipher.init")]).unwrap();
        assert_eq!(idx.vocabulary.keys().collect::<Vec<_>>(), vec!["data", "encrypt"]);
        assert_eq!(idx.idf, vec![0.0, 0.0]);
        let g = idx.generate("encrypt data");
        assert_eq!(g.entry_id, 1);
        assert!(g.low_confidence);
        assert!(build_index(&[]).is_err());
    }

    #[test]
    fn retrieval_picks_best_and_lowest_id() {
        let idx = build_index(&[
            entry(5, "hash a password", "MessageDigest.getInstance"),
            entry(2, "encrypt a file", "Cipher.getInstance"),
            entry(9, "encrypt a file", "Cipher.init"),
            entry(7, "generate random bytes", "SecureRandom.nextBytes"),
        ])
        .unwrap();
        let g = idx.generate("hash the password");
        assert_eq!(g.entry_id, 5);
        assert!(!g.low_confidence);
        let g = idx.generate("encrypt file");
        assert_eq!((g.entry_id, g.low_confidence), (2, true));
        let g = idx.generate("nothing matches");
        assert_eq!((g.entry_id, g.similarity, g.low_confidence), (2, 0.0, true));
        // orthogonal entries
        let sims = idx.similarities("random");
        assert_eq!(sims.iter().filter(|&&s| s > 0.0).count(), 1);
    }

    #[test]
    fn splitmix_reference_values() {
        // first outputs for seed 0 from the reference implementation
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn fold_sizes() {
        let ids: Vec<u64> = (1..=213).collect();
        let folds = fold_ids(&ids, 10, 0).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![22, 22, 22, 21, 21, 21, 21, 21, 21, 21]);
        assert!(fold_ids(&ids[..5], 10, 0).is_err());
        assert!(fold_ids(&ids, 1, 0).is_err());
        assert_eq!(fold_ids(&ids, 10, 3).unwrap(), fold_ids(&ids, 10, 3).unwrap());
        assert_ne!(fold_ids(&ids, 10, 3).unwrap(), fold_ids(&ids, 10, 4).unwrap());
    }

    #[test]
    fn identical_corrected_gives_equal_scores() {
        let entries: Vec<AnnotatedSequence> = (0..20)
            .map(|i| {
                entry(
                    i,
                    &format!("task {} variant", i % 4),
                    &format!("A.m{} B.n{}", i % 4, i % 3),
                )
            })
            .collect();
        let d = Dataset::new("d", entries).unwrap();
        let r = evaluate(
            &d,
            &d,
            &EvalConfig {
                k: 5,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.accuracy_bleu_pct, r.security_bleu_pct);
        assert_eq!(r.pairs_accuracy, 20);
        assert_eq!(r.per_fold.len(), 5);
    }

    #[test]
    fn corrected_ids_must_exist_in_source() {
        let d = Dataset::new("d", (0..4).map(|i| entry(i, "x", "A.b")).collect()).unwrap();
        let c = Dataset::new("c", vec![entry(99, "x", "A.b")]).unwrap();
        assert!(matches!(
            evaluate(
                &d,
                &c,
                &EvalConfig {
                    k: 2,
                    ..Default::default()
                }
            ),
            Err(Error::IdMismatch { .. })
        ));
    }
}
