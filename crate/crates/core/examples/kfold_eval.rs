//! Cross-validates the TF-IDF retrieval generator on the mini dataset,
//! scoring it against both the mined and the repaired sequences.

use cryptoseq::assets::assets_dir;
use cryptoseq::cli::eval_table;
use cryptoseq::genbase::{build_index, evaluate, EvalConfig, EvalReport};
use cryptoseq::repair::repair_dataset;
use cryptoseq::seqmodel::load_dataset;
use cryptoseq::RulePack;

pub fn run_example() -> cryptoseq::Result<EvalReport> {
    let mined = load_dataset(assets_dir().join("mini-dataset.jsonl"))?;
    let corrected = repair_dataset(&mined, &RulePack::bundled())?.dataset;

    let index = build_index(mined.entries())?;
    let g = index.generate("derive a key from a password");
    println!("query -> entry {} ({:.3}): {}", g.entry_id, g.similarity, g.sequence);

    let cfg = EvalConfig {
        k: 4,
        seed: 42,
        ..EvalConfig::default()
    };
    let report = evaluate(&mined, &corrected, &cfg)?;
    print!("{}", eval_table(&report));
    assert_eq!(report, evaluate(&mined, &corrected, &cfg)?);
    Ok(report)
}

#[allow(dead_code)]
fn main() -> cryptoseq::Result<()> {
    run_example().map(|_| ())
}
