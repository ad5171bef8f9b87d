//! Cryptographic API call sequences mined from Java code: extraction, rule-based
//! misuse detection, mechanical repair, and BLEU-based evaluation of sequence
//! generators.
//!
//! The pieces compose into a pipeline:
//!
//! 1. [`extractor`] walks Java sources and emits annotated call sequences.
//! 2. [`ruledsl`] loads `.crul` usage rules and compiles their ORDER sections.
//! 3. [`analyzer`] checks sequences against a rule pack and classifies misuses.
//! 4. [`repair`] turns incorrect sequences into correct ones.
//! 5. [`metrics`] and [`genbase`] score generated sequences with sentence BLEU
//!    under k-fold cross-validation.
//!
//! Everything speaks the JSON Lines dataset format defined in [`seqmodel`].

pub mod analyzer;
pub mod assets;
pub mod cli;
mod error;
pub mod extractor;
pub mod genbase;
pub mod metrics;
pub mod repair;
pub mod ruledsl;
pub mod seqmodel;

pub use analyzer::{
    check_sequence, classify, misuse_report, MisuseCategory, MisuseDistribution, Violation, ViolationKind,
};
pub use error::{Error, Result};
pub use ruledsl::{load_rule_pack, parse_rule, RulePack, RuleSpec};
pub use seqmodel::{AnnotatedSequence, ApiCall, ArgValue, CallSequence, Dataset};
