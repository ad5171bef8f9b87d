//! Mines call sequences from the bundled Java mini-corpus and prints them as
//! JSON Lines. Pass a directory to scan something else.
//!
//!     cargo run --example extract_corpus -- path/to/java/src

use std::path::Path;

use cryptoseq::assets::assets_dir;
use cryptoseq::extractor::{scan_corpus, CorpusFilter};
use cryptoseq::{Dataset, RulePack};

pub fn extract(root: &Path) -> cryptoseq::Result<Dataset> {
    scan_corpus(root, &CorpusFilter::default(), &RulePack::bundled())
}

pub fn run_example() -> cryptoseq::Result<Dataset> {
    let dataset = extract(&assets_dir().join("corpus"))?;
    assert_eq!(dataset.len(), 12);
    let first = &dataset.entries()[0];
    assert_eq!(first.annotation, "encrypts a message with aes in cbc mode.");
    Ok(dataset)
}

#[allow(dead_code)]
fn main() -> cryptoseq::Result<()> {
    let dataset = match std::env::args().nth(1) {
        Some(dir) => extract(Path::new(&dir))?,
        None => run_example()?,
    };
    print!("{}", dataset.to_jsonl());
    for e in dataset.entries() {
        eprintln!("{:>3}  {}", e.id, e.sequence);
    }
    Ok(())
}
