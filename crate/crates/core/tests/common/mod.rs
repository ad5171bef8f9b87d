//! Independent oracles shared by the integration tests and the acceptance
//! runner. Nothing here calls into the code under test except for types.

#![allow(dead_code)]

use std::collections::BTreeSet;

use cryptoseq::ruledsl::order::OrderExpr;
use cryptoseq::seqmodel::parse_sequence;
use cryptoseq::{AnnotatedSequence, Dataset};
use rand::rngs::StdRng;
use rand::Rng;

pub const PBE_DERIVATION: &str = "SecureRandom.getInstance SecureRandom.nextBytes PBEKeySpec.new \
    SecretKeyFactory.getInstance SecretKeyFactory.generateSecret SecretKey.getEncoded \
    SecretKeySpec.new PBEKeySpec.clearPassword";

pub const CIPHER_SETUP: &str =
    "KeyGenerator.getInstance KeyGenerator.generateKey IvParameterSpec.new Cipher.getInstance Cipher.init";

pub const CIPHER_SETUP_FIXED: &str = "KeyGenerator.getInstance KeyGenerator.generateKey \
    SecureRandom.new SecureRandom.nextBytes IvParameterSpec.new Cipher.getInstance Cipher.init Cipher.doFinal";

// BLEU, spelled out the slow way.

fn ngrams(tokens: &[String], n: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + n <= tokens.len() {
        out.push(tokens[i..i + n].to_vec());
        i += 1;
    }
    out
}

fn occurrences(haystack: &[Vec<String>], g: &[String]) -> usize {
    haystack.iter().filter(|h| h.as_slice() == g).count()
}

/// Clipped matches and candidate n-gram total for order `n`.
pub fn modified_precision(candidate: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let cand = ngrams(candidate, n);
    let refs = ngrams(reference, n);
    let mut distinct: Vec<Vec<String>> = Vec::new();
    for g in &cand {
        if !distinct.contains(g) {
            distinct.push(g.clone());
        }
    }
    let matched = distinct
        .iter()
        .map(|g| occurrences(&cand, g).min(occurrences(&refs, g)))
        .sum();
    (matched, cand.len())
}

/// Uniform-weight BLEU with effective order min(4, |c|), add-one smoothing
/// of zero-match orders above 1, and the usual brevity penalty.
pub fn brute_bleu(candidate: &[String], reference: &[String]) -> f64 {
    if candidate.is_empty() {
        return 0.0;
    }
    let order = candidate.len().min(4);
    let mut product = 1.0f64;
    for n in 1..=order {
        let (m, t) = modified_precision(candidate, reference, n);
        let p = match (m, n) {
            (0, 1) => return 0.0,
            (0, _) => 1.0 / (t as f64 + 1.0),
            _ => m as f64 / t as f64,
        };
        product *= p;
    }
    let geo = product.powf(1.0 / order as f64);
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    bp * geo
}

pub fn random_tokens(rng: &mut StdRng, alphabet: usize, len: std::ops::RangeInclusive<usize>) -> Vec<String> {
    let n = rng.gen_range(len);
    (0..n).map(|_| format!("T{}.m", rng.gen_range(0..alphabet))).collect()
}

// Regular expressions, matched by backtracking.

/// All positions where a match of `e` starting at `from` can end.
pub fn match_ends(e: &OrderExpr, word: &[usize], from: usize) -> BTreeSet<usize> {
    match e {
        OrderExpr::Event(s) => {
            if word.get(from) == Some(s) {
                BTreeSet::from([from + 1])
            } else {
                BTreeSet::new()
            }
        }
        OrderExpr::Seq(items) => {
            let mut here = BTreeSet::from([from]);
            for item in items {
                here = here.iter().flat_map(|&p| match_ends(item, word, p)).collect();
            }
            here
        }
        OrderExpr::Alt(items) => items.iter().flat_map(|i| match_ends(i, word, from)).collect(),
        OrderExpr::Opt(inner) => {
            let mut out = match_ends(inner, word, from);
            out.insert(from);
            out
        }
        OrderExpr::Star(inner) => {
            let mut seen = BTreeSet::from([from]);
            let mut frontier = vec![from];
            while let Some(p) = frontier.pop() {
                for q in match_ends(inner, word, p) {
                    if seen.insert(q) {
                        frontier.push(q);
                    }
                }
            }
            seen
        }
        OrderExpr::Plus(inner) => match_ends(
            &OrderExpr::Seq(vec![(**inner).clone(), OrderExpr::Star(inner.clone())]),
            word,
            from,
        ),
    }
}

pub fn regex_matches(e: &OrderExpr, word: &[usize]) -> bool {
    match_ends(e, word, 0).contains(&word.len())
}

pub fn random_expr(rng: &mut StdRng, symbols: usize, depth: usize) -> OrderExpr {
    if depth == 0 || rng.gen_bool(0.3) {
        return OrderExpr::Event(rng.gen_range(0..symbols));
    }
    let child = |rng: &mut StdRng| random_expr(rng, symbols, depth - 1);
    match rng.gen_range(0..5) {
        0 => OrderExpr::Seq((0..rng.gen_range(2..=3)).map(|_| child(rng)).collect()),
        1 => OrderExpr::Alt((0..rng.gen_range(2..=3)).map(|_| child(rng)).collect()),
        2 => OrderExpr::Opt(Box::new(child(rng))),
        3 => OrderExpr::Star(Box::new(child(rng))),
        _ => OrderExpr::Plus(Box::new(child(rng))),
    }
}

/// Every word over `0..symbols` of length at most `max_len`.
pub fn all_words(symbols: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut layer = vec![vec![]];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|w: &Vec<usize>| {
                (0..symbols).map(move |s| {
                    let mut next = w.clone();
                    next.push(s);
                    next
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

// Datasets.

/// `topics` groups of `per_topic` entries. Entries of a group share their
/// annotation and sequence; groups share no annotation words.
pub fn twin_dataset(topics: usize, per_topic: usize) -> Dataset {
    let words = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel"];
    let seqs = [
        "Cipher.getInstance Cipher.init Cipher.doFinal",
        "MessageDigest.getInstance MessageDigest.update MessageDigest.digest",
        "SecureRandom.new SecureRandom.nextBytes",
        "Mac.getInstance Mac.init Mac.doFinal",
        "KeyGenerator.getInstance KeyGenerator.generateKey",
        "SecretKeyFactory.getInstance SecretKeyFactory.generateSecret",
        "SecretKeySpec.new",
        "PBEKeySpec.new PBEKeySpec.clearPassword",
    ];
    assert!(topics <= words.len());
    let mut entries = Vec::new();
    for i in 0..topics * per_topic {
        let t = i % topics;
        let ann = format!("{} {} task", words[t], words[(t + 1) % topics]);
        let seq = parse_sequence(seqs[t]).unwrap();
        entries.push(AnnotatedSequence::new(i as u64 + 1, &ann, seq).unwrap());
    }
    Dataset::new("twins", entries).unwrap()
}

pub fn numbered_dataset(n: usize) -> Dataset {
    let entries = (1..=n as u64)
        .map(|i| AnnotatedSequence::new(i, &format!("entry {i}"), parse_sequence("A.x").unwrap()).unwrap())
        .collect();
    Dataset::new("n", entries).unwrap()
}

/// Disjoint, covering, balanced. Returns a description of the first problem.
pub fn check_partition(all: &[u64], folds: &[Vec<u64>]) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for f in folds {
        for id in f {
            if !seen.insert(*id) {
                return Err(format!("id {id} in two folds"));
            }
        }
    }
    let expected: BTreeSet<u64> = all.iter().copied().collect();
    if seen != expected {
        return Err("folds do not cover the dataset".into());
    }
    let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
    let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
    if hi - lo > 1 {
        return Err(format!("fold sizes {sizes:?}"));
    }
    Ok(())
}

/// Runs the CLI in-process.
pub fn cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cryptoseq::cli::run(
        std::iter::once("cryptoseq").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}
