//! The `cryptoseq` command line.
//!
//! Machine output (JSON or JSON Lines) goes to stdout, logs and summaries to
//! stderr. Exit codes: 0 success or no findings, 1 `lint` found misuses,
//! 2 usage or input error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analyzer::{check_sequence, MisuseCategory, MisuseDistribution, Violation};
use crate::error::{Error, Result};
use crate::extractor::{scan_corpus, CorpusFilter};
use crate::genbase::{evaluate, EvalConfig, EvalReport};
use crate::metrics::{dataset_bleu, BleuConfig, BleuReport};
use crate::repair::{repair_dataset, RepairAction};
use crate::ruledsl::{load_rule_pack, RulePack};
use crate::seqmodel::{dataset_stats, load_dataset, store_dataset, Dataset};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FINDINGS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "cryptoseq",
    version,
    about = "Mine, lint, repair and score crypto API call sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Silence warnings
    #[arg(long, global = true)]
    quiet: bool,
    /// Print human-readable tables instead of JSON
    #[arg(long, global = true)]
    pretty: bool,
}

#[derive(Args, Debug)]
struct RulesArg {
    /// Rule pack directory (defaults to the bundled pack)
    #[arg(long, value_name = "DIR")]
    rules: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct InputArg {
    /// Dataset file (JSON Lines)
    #[arg(long, value_name = "FILE")]
    dataset: Option<PathBuf>,
    /// Java source tree to extract from
    #[arg(long, value_name = "DIR")]
    dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract call sequences from Java sources
    Extract {
        #[arg(long, value_name = "DIR")]
        dir: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[command(flatten)]
        rules: RulesArg,
    },
    /// Report rule violations
    Lint {
        #[command(flatten)]
        input: InputArg,
        #[command(flatten)]
        rules: RulesArg,
        /// Also write the misuse distribution as JSON here
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Repair a dataset; prints the patch log
    Fix {
        #[command(flatten)]
        input: InputArg,
        #[command(flatten)]
        rules: RulesArg,
        /// Where the corrected dataset goes
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Sentence BLEU between two datasets, paired by id
    Bleu {
        #[arg(long, value_name = "FILE")]
        candidates: PathBuf,
        #[arg(long, value_name = "FILE")]
        references: PathBuf,
        #[arg(long, default_value_t = 4)]
        n_max: usize,
    },
    /// k-fold evaluation of the retrieval generator
    Eval {
        #[arg(long, value_name = "FILE")]
        source: PathBuf,
        #[arg(long, value_name = "FILE")]
        corrected: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Length and vocabulary statistics
    Stats {
        #[arg(long, value_name = "FILE")]
        dataset: PathBuf,
    },
    /// Parse and summarize a rule pack
    Rules {
        #[command(flatten)]
        rules: RulesArg,
    },
}

/// Runs one command line; `argv[0]` is the program name.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    if cli.quiet {
        log::set_max_level(log::LevelFilter::Error);
    }
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn pack_from(arg: &RulesArg) -> Result<RulePack> {
    match &arg.rules {
        Some(dir) => load_rule_pack(dir),
        None => Ok(RulePack::bundled()),
    }
}

fn read_input(input: &InputArg, pack: &RulePack) -> Result<Dataset> {
    match (&input.dataset, &input.dir) {
        (Some(file), _) => load_dataset(file),
        (None, Some(dir)) => scan_corpus(dir, &CorpusFilter::default(), pack),
        (None, None) => unreachable!("clap enforces one input"),
    }
}

fn json_line(out: &mut dyn Write, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string(value).expect("serializable");
    writeln!(out, "{text}").map_err(io_err)
}

fn json_pretty(out: &mut dyn Write, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    writeln!(out, "{text}").map_err(io_err)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Extract { dir, out: file, rules } => {
            let d = scan_corpus(dir, &CorpusFilter::default(), &pack_from(rules)?)?;
            match file {
                Some(f) => store_dataset(&d, f)?,
                None => write!(out, "{}", d.to_jsonl()).map_err(io_err)?,
            }
            writeln!(err, "extracted {} sequences", d.len()).map_err(io_err)?;
            Ok(EXIT_OK)
        }
        Command::Lint {
            input,
            rules,
            out: file,
        } => {
            let pack = pack_from(rules)?;
            lint(&read_input(input, &pack)?, &pack, file.as_deref(), cli.pretty, out, err)
        }
        Command::Fix {
            input,
            rules,
            out: file,
        } => {
            let pack = pack_from(rules)?;
            let d = read_input(input, &pack)?;
            let r = repair_dataset(&d, &pack)?;
            for (id, action) in &r.log {
                json_line(out, &PatchLine { id: *id, action })?;
            }
            for (id, vs) in &r.dropped {
                log::warn!("dropped entry {id}: {} unrepairable violation(s)", vs.len());
            }
            store_dataset(&r.dataset, file)?;
            writeln!(
                err,
                "{} actions, {} entries written, {} dropped",
                r.log.len(),
                r.dataset.len(),
                r.dropped.len()
            )
            .map_err(io_err)?;
            Ok(EXIT_OK)
        }
        Command::Bleu {
            candidates,
            references,
            n_max,
        } => {
            let report = dataset_bleu(
                &load_dataset(candidates)?,
                &load_dataset(references)?,
                &BleuConfig::new(*n_max)?,
            )?;
            if cli.pretty {
                write!(out, "{}", bleu_table(&report)).map_err(io_err)?;
            } else {
                json_line(out, &report)?;
            }
            Ok(EXIT_OK)
        }
        Command::Eval {
            source,
            corrected,
            k,
            seed,
        } => {
            let cfg = EvalConfig {
                k: *k,
                seed: *seed,
                ..EvalConfig::default()
            };
            let report = evaluate(&load_dataset(source)?, &load_dataset(corrected)?, &cfg)?;
            if cli.pretty {
                write!(out, "{}", eval_table(&report)).map_err(io_err)?;
            } else {
                json_line(out, &report)?;
            }
            Ok(EXIT_OK)
        }
        Command::Stats { dataset } => {
            let report = dataset_stats(&load_dataset(dataset)?)?;
            if cli.pretty {
                json_pretty(out, &report)?;
            } else {
                json_line(out, &report)?;
            }
            Ok(EXIT_OK)
        }
        Command::Rules { rules } => {
            let pack = pack_from(rules)?;
            let summary = rules_summary(&pack);
            if cli.pretty {
                for r in &summary.rules {
                    writeln!(
                        out,
                        "{:<36} {:>2} events {:>3} states  {}",
                        r.class, r.events, r.dfa_states, r.source
                    )
                    .map_err(io_err)?;
                }
            } else {
                json_line(out, &summary)?;
            }
            Ok(EXIT_OK)
        }
    }
}

#[derive(Serialize)]
struct LintLine<'a> {
    id: u64,
    #[serde(flatten)]
    violation: &'a Violation,
}

#[derive(Serialize)]
struct PatchLine<'a> {
    id: u64,
    #[serde(flatten)]
    action: &'a RepairAction,
}

fn lint(
    d: &Dataset,
    pack: &RulePack,
    file: Option<&Path>,
    pretty: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    let results: Vec<_> = d
        .entries()
        .iter()
        .map(|e| (e, check_sequence(&e.sequence, pack)))
        .collect();
    for (e, vs) in &results {
        for v in vs {
            json_line(out, &LintLine { id: e.id, violation: v })?;
        }
    }
    let dist = MisuseDistribution::tally(results.iter().map(|(e, vs)| (&e.sequence, vs.as_slice())), pack);
    if !dist.uncovered_classes.is_empty() {
        log::warn!(
            "{} sequence(s) use classes without rules: {}",
            dist.sequences_uncovered,
            dist.uncovered_classes.iter().cloned().collect::<Vec<_>>().join(", ")
        );
    }
    if let Some(f) = file {
        write_file(f, &(serde_json::to_string_pretty(&dist).expect("serializable") + "\n"))?;
    }
    if pretty {
        write!(err, "{}", distribution_table(&dist)).map_err(io_err)?;
    }
    writeln!(
        err,
        "{} sequences with misuses (of {})",
        dist.sequences_with_misuse, dist.sequences_total
    )
    .map_err(io_err)?;
    Ok(if dist.sequences_with_misuse > 0 {
        EXIT_FINDINGS
    } else {
        EXIT_OK
    })
}

/// Category counts, one row each.
pub fn distribution_table(dist: &MisuseDistribution) -> String {
    let total: usize = dist.counts.values().sum();
    let mut s = String::new();
    for c in MisuseCategory::ALL {
        let n = dist.counts[&c];
        let pct = if total == 0 {
            0.0
        } else {
            100.0 * n as f64 / total as f64
        };
        s += &format!("{:<34} {:>5} {:>6.1}%\n", c.label(), n, pct);
    }
    s += &format!(
        "{:<34} {:>5} of {} sequences ({:.1}%)\n",
        "with misuse",
        dist.sequences_with_misuse,
        dist.sequences_total,
        100.0 * dist.misuse_rate
    );
    s
}

fn bar(pct: f64) -> String {
    "#".repeat((pct / 2.5).round() as usize)
}

pub fn bleu_table(r: &BleuReport) -> String {
    let mut s = String::new();
    for (id, score) in r.ids.iter().zip(&r.per_pair_scores) {
        s += &format!("{id:>6} {:>7.2}\n", 100.0 * score);
    }
    s += &format!(
        "mean {:.2}% over {} pairs, {} perfect\n",
        r.mean_score_pct,
        r.ids.len(),
        r.perfect_count
    );
    s
}

pub fn eval_table(r: &EvalReport) -> String {
    let mut s = format!("model: retrieval baseline (k={}, seed={})\n", r.config.k, r.config.seed);
    s += &format!(
        "accuracy {:>6.2}% |{:<40}| {} pairs\n",
        r.accuracy_bleu_pct,
        bar(r.accuracy_bleu_pct),
        r.pairs_accuracy
    );
    s += &format!(
        "security {:>6.2}% |{:<40}| {} pairs\n",
        r.security_bleu_pct,
        bar(r.security_bleu_pct),
        r.pairs_security
    );
    for f in &r.per_fold {
        let sec = f
            .security_bleu_pct
            .map_or_else(|| "   -  ".to_string(), |v| format!("{v:>6.2}"));
        s += &format!(
            "  fold {:>2}: n={:<4} acc {:>6.2}  sec {}  low-confidence {}\n",
            f.fold, f.test_size, f.accuracy_bleu_pct, sec, f.low_confidence
        );
    }
    s
}

#[derive(Serialize)]
struct RuleSummary {
    class: String,
    source: String,
    events: usize,
    dfa_states: usize,
    mandatory: Vec<String>,
}

#[derive(Serialize)]
struct PackSummary {
    count: usize,
    rules: Vec<RuleSummary>,
}

fn rules_summary(pack: &RulePack) -> PackSummary {
    let rules = pack
        .rules()
        .map(|r| RuleSummary {
            class: r.qualified_name.clone(),
            source: pack.source_of(&r.class_name).unwrap_or_default().to_string(),
            events: r.events.len(),
            dfa_states: r.automaton.as_ref().map_or(0, |a| a.state_count()),
            mandatory: r.mandatory_aliases.iter().cloned().collect(),
        })
        .collect();
    PackSummary {
        count: pack.len(),
        rules,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(
            std::iter::once("cryptoseq").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        let (code, out, err) = call(&["frobnicate"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(out.is_empty());
        assert!(err.contains("Usage"), "{err}");
        assert_eq!(call(&["lint", "--bogus"]).0, EXIT_USAGE);
        assert_eq!(call(&[]).0, EXIT_USAGE);
    }

    #[test]
    fn help_goes_to_stdout() {
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("lint"));
    }

    #[test]
    fn rules_lists_bundled_pack() {
        let (code, out, _) = call(&["rules"]);
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["count"], RulePack::bundled().len());
    }

    #[test]
    fn missing_file_is_an_input_error() {
        let (code, _, err) = call(&["stats", "--dataset", "/nonexistent/x.jsonl"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.starts_with("error:"));
    }
}
