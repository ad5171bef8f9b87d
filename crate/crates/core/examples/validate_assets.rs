//! Re-derives the planted corpus expectations and reports drift.

use cryptoseq::assets::{assets_dir, validate_assets, AssetReport};

pub fn run_example() -> cryptoseq::Result<AssetReport> {
    let report = validate_assets(assets_dir())?;
    println!("{report}");
    Ok(report)
}

#[allow(dead_code)]
fn main() {
    match run_example() {
        Ok(r) if r.is_consistent() => {}
        Ok(_) => std::process::exit(1),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    }
}
