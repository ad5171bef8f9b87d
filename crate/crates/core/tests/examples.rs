#[path = "../examples/bleu_scores.rs"]
mod bleu_scores;
#[path = "../examples/dataset_stats.rs"]
mod dataset_stats;
#[path = "../examples/extract_corpus.rs"]
mod extract_corpus;
#[path = "../examples/kfold_eval.rs"]
mod kfold_eval;
#[path = "../examples/lint_sequences.rs"]
mod lint_sequences;
#[path = "../examples/repair_sequence.rs"]
mod repair_sequence;
#[path = "../examples/rule_automaton.rs"]
mod rule_automaton;
#[path = "../examples/validate_assets.rs"]
mod validate_assets;

#[test]
fn extract_corpus_runs() {
    assert_eq!(extract_corpus::run_example().unwrap().len(), 12);
}

#[test]
fn lint_sequences_runs() {
    let d = lint_sequences::run_example().unwrap();
    assert_eq!(d.sequences_with_misuse, 8);
}

#[test]
fn repair_sequence_runs() {
    assert!(repair_sequence::run_example().unwrap().is_clean());
}

#[test]
fn bleu_scores_runs() {
    let mean = bleu_scores::run_example().unwrap();
    assert!(mean > 0.0 && mean < 100.0);
}

#[test]
fn kfold_eval_runs() {
    assert_eq!(kfold_eval::run_example().unwrap().per_fold.len(), 4);
}

#[test]
fn rule_automaton_runs() {
    assert!(rule_automaton::run_example().unwrap() > 1);
}

#[test]
fn dataset_stats_runs() {
    assert_eq!(dataset_stats::run_example().unwrap().entry_count, 12);
}

#[test]
fn validate_assets_runs() {
    assert!(validate_assets::run_example().unwrap().is_consistent());
}
