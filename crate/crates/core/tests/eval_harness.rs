mod common;

use common::{check_partition, numbered_dataset, twin_dataset};
use cryptoseq::assets::assets_dir;
use cryptoseq::genbase::{build_index, evaluate, fold_ids, kfold_split, EvalConfig};
use cryptoseq::seqmodel::load_dataset;

#[test]
fn twins_are_retrieved_perfectly() {
    let d = twin_dataset(5, 12);
    let r = evaluate(&d, &d, &EvalConfig::default()).unwrap();
    assert_eq!(r.accuracy_bleu_pct, 100.0);
    assert_eq!(r.security_bleu_pct, 100.0);
    assert_eq!(r.pairs_accuracy, 60);
}

#[test]
fn reports_are_byte_identical() {
    let d = load_dataset(assets_dir().join("mini-dataset.jsonl")).unwrap();
    let cfg = EvalConfig {
        k: 4,
        seed: 42,
        ..EvalConfig::default()
    };
    let a = serde_json::to_string(&evaluate(&d, &d, &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&evaluate(&d, &d, &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    let r = evaluate(&d, &d, &cfg).unwrap();
    assert_eq!(r.accuracy_bleu_pct, r.security_bleu_pct);
}

#[test]
fn fold_partitions() {
    for n in [10, 50, 213] {
        let d = numbered_dataset(n);
        let ids = d.ids();
        let folds = fold_ids(&ids, 10, 0).unwrap();
        check_partition(&ids, &folds).unwrap();
        assert_eq!(folds, fold_ids(&ids, 10, 0).unwrap());
        let split = kfold_split(&d, &EvalConfig::default()).unwrap();
        for (f, ids_f) in split.iter().zip(&folds) {
            assert_eq!(f.train.len() + f.test.len(), n);
            let mut test: Vec<u64> = f.test.iter().map(|e| e.id).collect();
            let mut want = ids_f.clone();
            test.sort();
            want.sort();
            assert_eq!(test, want);
        }
    }
    let sizes: Vec<usize> = fold_ids(&numbered_dataset(213).ids(), 10, 0)
        .unwrap()
        .iter()
        .map(Vec::len)
        .collect();
    assert_eq!(sizes.iter().filter(|&&s| s == 22).count(), 3);
    assert_eq!(sizes.iter().filter(|&&s| s == 21).count(), 7);
}

#[test]
fn bad_fold_counts() {
    let ids = numbered_dataset(5).ids();
    assert!(fold_ids(&ids, 6, 0).is_err());
    assert!(fold_ids(&ids, 1, 0).is_err());
}

#[test]
fn mini_dataset_vocabulary() {
    // distinct lowercase alphanumeric runs across the twelve annotations,
    // counted by hand: "sha-256" gives "sha" and "256", "user's" gives "s"
    let d = load_dataset(assets_dir().join("mini-dataset.jsonl")).unwrap();
    let index = build_index(d.entries()).unwrap();
    assert_eq!(index.vocabulary.len(), 52);
}
