//! Repairs a password-based key derivation that forgot to randomize its
//! salt and to clear the password afterwards.

use cryptoseq::repair::{repair_sequence, Repaired};
use cryptoseq::seqmodel::parse_sequence;
use cryptoseq::RulePack;

const CORRECT: &str = "SecureRandom.getInstance SecureRandom.nextBytes PBEKeySpec.new \
    SecretKeyFactory.getInstance SecretKeyFactory.generateSecret SecretKey.getEncoded \
    SecretKeySpec.new PBEKeySpec.clearPassword";

pub fn run_example() -> cryptoseq::Result<Repaired> {
    let pack = RulePack::bundled();
    let broken = parse_sequence(
        "PBEKeySpec.new SecretKeyFactory.getInstance SecretKeyFactory.generateSecret SecretKey.getEncoded SecretKeySpec.new",
    )?;
    let fixed = repair_sequence(&broken, &pack)?;
    println!("before: {broken}");
    for a in &fixed.actions {
        println!("  {}", serde_json::to_string(a).expect("actions serialize"));
    }
    println!("after:  {}", fixed.sequence);
    assert!(fixed.is_clean());
    assert_eq!(fixed.sequence, parse_sequence(CORRECT)?);
    Ok(fixed)
}

#[allow(dead_code)]
fn main() -> cryptoseq::Result<()> {
    run_example().map(|_| ())
}
