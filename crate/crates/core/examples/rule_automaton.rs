//! Parses a small usage rule, then walks its ORDER automaton by hand.

use cryptoseq::ruledsl::order::Run;
use cryptoseq::{parse_rule, RuleSpec};

const RULE: &str = r#"
SPEC java.security.MessageDigest
EVENTS
  g: getInstance(algorithm)
  u: update
  d: digest
  r: reset
ORDER
  g, (u*, d, r?)+
"#;

fn word(rule: &RuleSpec, methods: &[&str]) -> Vec<usize> {
    methods
        .iter()
        .map(|m| rule.symbol_for_method(m).expect("declared event"))
        .collect()
}

pub fn run_example() -> cryptoseq::Result<usize> {
    let rule = parse_rule(RULE)?;
    let dfa = rule.automaton.as_ref().expect("rule has an ORDER");
    println!("{}: {} states", rule.qualified_name, dfa.state_count());

    for methods in [
        &["getInstance", "update", "digest"][..],
        &["getInstance", "digest", "reset", "update", "digest"],
        &["getInstance", "update"],
        &["update", "digest"],
    ] {
        let w = word(&rule, methods);
        let verdict = match dfa.run(&w) {
            Run::Diverged { at } => format!("rejected at {}", methods[at]),
            Run::Ended { state } if dfa.is_accepting(state) => "accepted".to_string(),
            Run::Ended { state } => {
                let rest = dfa
                    .shortest_completion(state, &rule.declaration_order())
                    .expect("completable");
                let names: Vec<_> = rest.iter().map(|&s| rule.method_of_symbol(s)).collect();
                format!("incomplete, needs {}", names.join(" "))
            }
        };
        println!("  {:<50} {verdict}", methods.join(" "));
    }
    Ok(dfa.state_count())
}

#[allow(dead_code)]
fn main() -> cryptoseq::Result<()> {
    run_example().map(|_| ())
}
