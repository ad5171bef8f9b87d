//! Sentence BLEU on call sequences, then over whole datasets paired by id.

use cryptoseq::assets::assets_dir;
use cryptoseq::metrics::{dataset_bleu, sentence_bleu, BleuConfig};
use cryptoseq::repair::repair_dataset;
use cryptoseq::seqmodel::{load_dataset, parse_sequence};
use cryptoseq::RulePack;

pub fn run_example() -> cryptoseq::Result<f64> {
    let cfg = BleuConfig::default();
    let pairs = [
        ("A.x B.y", "A.x C.z"),
        ("A.x B.y", "A.x B.y C.z"),
        (
            "Cipher.getInstance Cipher.init Cipher.doFinal",
            "Cipher.getInstance Cipher.init Cipher.doFinal",
        ),
    ];
    for (c, r) in pairs {
        let s = sentence_bleu(&parse_sequence(c)?, &parse_sequence(r)?, &cfg)?;
        println!("{s:.4}  {c}  |  {r}");
    }

    // How far is each mined sequence from its repaired form?
    let mined = load_dataset(assets_dir().join("mini-dataset.jsonl"))?;
    let fixed = repair_dataset(&mined, &RulePack::bundled())?.dataset;
    let report = dataset_bleu(&fixed, &mined, &cfg)?;
    println!(
        "mean {:.2}% over {} pairs, {} unchanged",
        report.mean_score_pct,
        report.ids.len(),
        report.perfect_count
    );
    Ok(report.mean_score_pct)
}

#[allow(dead_code)]
fn main() -> cryptoseq::Result<()> {
    run_example().map(|_| ())
}
