//! Lints the bundled mini dataset and prints each violation next to the
//! misuse distribution.

use cryptoseq::assets::assets_dir;
use cryptoseq::seqmodel::{load_dataset, parse_sequence};
use cryptoseq::{check_sequence, misuse_report, MisuseCategory, MisuseDistribution, RulePack};

pub fn run_example() -> cryptoseq::Result<MisuseDistribution> {
    let pack = RulePack::bundled();

    // A single sequence: the IV is built from bytes nobody randomized and
    // the cipher is never finalized.
    let seq = parse_sequence(
        "KeyGenerator.getInstance KeyGenerator.generateKey IvParameterSpec.new Cipher.getInstance Cipher.init",
    )?;
    let found = check_sequence(&seq, &pack);
    for v in &found {
        println!("{:>4}  {:<16} {}", v.position.to_string(), v.rule_class, v.detail);
    }
    assert_eq!(found.len(), 2);

    let dataset = load_dataset(assets_dir().join("mini-dataset.jsonl"))?;
    let dist = misuse_report(&dataset, &pack)?;
    for c in MisuseCategory::ALL {
        println!("{:<34} {}", c.label(), dist.counts[&c]);
    }
    println!(
        "{} of {} sequences misuse the API",
        dist.sequences_with_misuse, dist.sequences_total
    );
    Ok(dist)
}

#[allow(dead_code)]
fn main() -> cryptoseq::Result<()> {
    run_example().map(|_| ())
}
