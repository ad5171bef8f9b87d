//! Length and vocabulary statistics of a dataset file.
//!
//!     cargo run --example dataset_stats -- data.jsonl

use std::path::PathBuf;

use cryptoseq::assets::assets_dir;
use cryptoseq::seqmodel::{dataset_stats_with, load_dataset, StatsReport};

pub fn stats_for(path: PathBuf) -> cryptoseq::Result<StatsReport> {
    let d = load_dataset(path)?;
    dataset_stats_with(&d, &[3, 5, 7])
}

pub fn run_example() -> cryptoseq::Result<StatsReport> {
    stats_for(assets_dir().join("mini-dataset.jsonl"))
}

#[allow(dead_code)]
fn main() -> cryptoseq::Result<()> {
    let report = match std::env::args().nth(1) {
        Some(p) => stats_for(p.into())?,
        None => run_example()?,
    };
    println!("{} entries, mean length {:.2}", report.entry_count, report.mean_length);
    for (t, f) in &report.frac_longer_than {
        println!("  longer than {t}: {:.1}%", 100.0 * f);
    }
    println!(
        "{} distinct calls, {} distinct annotation words",
        report.sequence_vocab_size, report.annotation_vocab_size
    );
    Ok(())
}
