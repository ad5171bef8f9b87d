//! Checks call sequences against a rule pack and sorts misuses into six categories.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ruledsl::{ArgConstraint, ConstraintMode, RulePack, RuleSpec, Run};
use crate::seqmodel::{ApiCall, ArgValue, CallSequence, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MisuseCategory {
    MissingPredicate,
    InsecureDefaultImplementation,
    IncorrectEncoding,
    IncorrectRandomization,
    IncorrectMethodCall,
    MissingMethodCall,
}

impl MisuseCategory {
    pub const ALL: [MisuseCategory; 6] = [
        MisuseCategory::MissingPredicate,
        MisuseCategory::InsecureDefaultImplementation,
        MisuseCategory::IncorrectEncoding,
        MisuseCategory::IncorrectRandomization,
        MisuseCategory::IncorrectMethodCall,
        MisuseCategory::MissingMethodCall,
    ];

    pub fn label(self) -> &'static str {
        match self {
            MisuseCategory::MissingPredicate => "missing predicate",
            MisuseCategory::InsecureDefaultImplementation => "insecure default implementation",
            MisuseCategory::IncorrectEncoding => "incorrect encoding",
            MisuseCategory::IncorrectRandomization => "incorrect randomization",
            MisuseCategory::IncorrectMethodCall => "incorrect method call",
            MisuseCategory::MissingMethodCall => "missing method call",
        }
    }
}

impl fmt::Display for MisuseCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    ForbiddenEvent,
    UnknownEvent,
    OrderDiverged,
    PredicateUnmet,
    ConstraintFailed,
    OrderIncomplete,
}

/// A call index, or the point just past the last call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Position {
    Call(usize),
    End,
}

impl Serialize for Position {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Position::Call(i) => s.serialize_u64(*i as u64),
            Position::End => s.serialize_str("end"),
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Call(i) => write!(f, "{i}"),
            Position::End => f.write_str("end"),
        }
    }
}

/// One deviation of a sequence from a rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    #[serde(rename = "class")]
    pub rule_class: String,
    pub position: Position,
    pub category: MisuseCategory,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub missing_aliases: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicate: Option<String>,
    /// Index into the rule's constraints, for constraint failures.
    #[serde(skip)]
    pub constraint: Option<usize>,
}

impl Violation {
    fn raw(kind: ViolationKind, rule: &RuleSpec, position: Position, detail: String) -> Self {
        Violation {
            kind,
            rule_class: rule.class_name.clone(),
            position,
            // overwritten by classify
            category: MisuseCategory::MissingMethodCall,
            detail,
            missing_aliases: None,
            predicate: None,
            constraint: None,
        }
    }

    /// Identity used when counting: one per (rule, kind, position).
    pub fn count_key(&self) -> (&str, ViolationKind, Position) {
        (&self.rule_class, self.kind, self.position)
    }
}

/// Category of a violation. Predicate and constraint failures take the tag
/// declared in the rule; the remaining kinds map structurally.
pub fn classify(v: &Violation, pack: &RulePack) -> MisuseCategory {
    let rule = pack.get(&v.rule_class);
    match v.kind {
        ViolationKind::PredicateUnmet => {
            let pred = v.predicate.as_deref().unwrap_or_default();
            rule.and_then(|r| r.requires.iter().find(|o| o.predicate == pred))
                .map(|o| o.category)
                .unwrap_or(if pred == "randomized" {
                    MisuseCategory::IncorrectRandomization
                } else {
                    MisuseCategory::MissingPredicate
                })
        }
        ViolationKind::ConstraintFailed => rule
            .zip(v.constraint)
            .and_then(|(r, i)| r.constraints.get(i))
            .map_or(MisuseCategory::InsecureDefaultImplementation, |c| c.category),
        ViolationKind::ForbiddenEvent | ViolationKind::UnknownEvent | ViolationKind::OrderDiverged => {
            MisuseCategory::IncorrectMethodCall
        }
        ViolationKind::OrderIncomplete => MisuseCategory::MissingMethodCall,
    }
}

fn eq_ignore_case(set: &BTreeSet<String>, value: &str) -> bool {
    set.iter().any(|s| s.eq_ignore_ascii_case(value))
}

/// `None` when the constraint holds or cannot be judged from the captured
/// arguments; otherwise a description of the failure.
fn constraint_failure(c: &ArgConstraint, call: &ApiCall) -> Option<String> {
    let args = call.args()?;
    match &c.mode {
        ConstraintMode::Present => {
            (args.len() <= c.position).then(|| format!("{} called without argument {}", call.token(), c.position))
        }
        ConstraintMode::OneOf(allowed) => match args.get(c.position) {
            Some(ArgValue::Literal(v)) if !eq_ignore_case(allowed, v) => Some(format!(
                "{} argument {} is \"{v}\", expected one of {allowed:?}",
                call.token(),
                c.position
            )),
            _ => None,
        },
        ConstraintMode::Transformation {
            algorithms,
            modes,
            paddings,
        } => match args.get(c.position) {
            Some(ArgValue::Literal(v)) => {
                let parts: Vec<&str> = v.split('/').map(str::trim).collect();
                let ok = parts.len() == 3
                    && eq_ignore_case(algorithms, parts[0])
                    && eq_ignore_case(modes, parts[1])
                    && eq_ignore_case(paddings, parts[2]);
                (!ok).then(|| {
                    format!(
                        "{} uses transformation \"{v}\"; expected algorithm/mode/padding from {algorithms:?}/{modes:?}/{paddings:?}",
                        call.token()
                    )
                })
            }
            _ => None,
        },
    }
}

fn simple_token(call: &ApiCall) -> String {
    format!("{}.{}", call.simple_class(), call.method_name())
}

/// All violations of `s` against `pack`, sorted by position.
pub fn check_sequence(s: &CallSequence, pack: &RulePack) -> Vec<Violation> {
    let mut out = Vec::new();

    // classes with rules, in order of first appearance
    let mut classes: Vec<&str> = Vec::new();
    for c in &s.calls {
        let class = c.simple_class();
        if pack.contains(class) && !classes.contains(&class) {
            classes.push(class);
        }
    }

    for class in &classes {
        let rule = pack.get(class).expect("filtered above");
        let mut word = Vec::new();
        let mut word_positions = Vec::new();
        for (i, call) in s.calls.iter().enumerate() {
            if call.simple_class() != *class {
                continue;
            }
            if let Some(f) = rule.forbidden_entry(call.method_name()) {
                let detail = match &f.replacement {
                    Some(r) => format!("{} is forbidden; use {r}", simple_token(call)),
                    None => format!("{} is forbidden", simple_token(call)),
                };
                out.push(Violation::raw(
                    ViolationKind::ForbiddenEvent,
                    rule,
                    Position::Call(i),
                    detail,
                ));
                continue;
            }
            match rule.symbol_for_method(call.method_name()) {
                Some(sym) => {
                    word.push(sym);
                    word_positions.push(i);
                }
                None => out.push(Violation::raw(
                    ViolationKind::UnknownEvent,
                    rule,
                    Position::Call(i),
                    format!("{} is not an event of {}", simple_token(call), rule.class_name),
                )),
            }
        }

        let Some(dfa) = &rule.automaton else { continue };
        if word.is_empty() {
            // only forbidden or unknown calls of this class
            continue;
        }
        match dfa.run(&word) {
            Run::Diverged { at } => {
                let pos = word_positions[at];
                out.push(Violation::raw(
                    ViolationKind::OrderDiverged,
                    rule,
                    Position::Call(pos),
                    format!(
                        "{} is not allowed here by the ORDER of {}",
                        simple_token(&s.calls[pos]),
                        rule.class_name
                    ),
                ));
            }
            Run::Ended { state } if !dfa.is_accepting(state) => {
                let completion = dfa
                    .shortest_completion(state, &rule.declaration_order())
                    .unwrap_or_default();
                let aliases: Vec<String> = completion
                    .iter()
                    .map(|&sym| rule.alias_of_symbol(sym).to_string())
                    .collect();
                let methods: Vec<&str> = completion.iter().map(|&sym| rule.method_of_symbol(sym)).collect();
                let mut v = Violation::raw(
                    ViolationKind::OrderIncomplete,
                    rule,
                    Position::End,
                    format!(
                        "{} usage is incomplete; missing {}",
                        rule.class_name,
                        methods.join(", ")
                    ),
                );
                v.missing_aliases = Some(aliases);
                out.push(v);
            }
            Run::Ended { .. } => {}
        }
    }

    // predicate dataflow, left to right
    let mut produced: HashSet<&str> = HashSet::new();
    let mut consumed: HashSet<(&str, usize)> = HashSet::new();
    for (i, call) in s.calls.iter().enumerate() {
        let Some(rule) = pack.get(call.simple_class()) else {
            continue;
        };
        if rule.forbidden_entry(call.method_name()).is_some() {
            continue;
        }
        for (k, ob) in rule.requires.iter().enumerate() {
            if !ob.methods.contains(call.method_name()) || !consumed.insert((&rule.class_name, k)) {
                continue;
            }
            if !produced.contains(ob.predicate.as_str()) {
                let mut v = Violation::raw(
                    ViolationKind::PredicateUnmet,
                    rule,
                    Position::Call(i),
                    format!(
                        "{} requires `{}`, which nothing earlier establishes",
                        simple_token(call),
                        ob.predicate
                    ),
                );
                v.predicate = Some(ob.predicate.clone());
                out.push(v);
            }
        }
        for e in &rule.ensures {
            if e.methods.contains(call.method_name()) {
                produced.insert(&e.predicate);
            }
        }
    }

    // argument constraints
    for (i, call) in s.calls.iter().enumerate() {
        let Some(rule) = pack.get(call.simple_class()) else {
            continue;
        };
        for (k, c) in rule.constraints.iter().enumerate() {
            if c.method != call.method_name() {
                continue;
            }
            if let Some(escape) = &c.escape_event {
                if s.calls[..i].iter().any(|p| &simple_token(p) == escape) {
                    continue;
                }
            }
            if let Some(detail) = constraint_failure(c, call) {
                let mut v = Violation::raw(ViolationKind::ConstraintFailed, rule, Position::Call(i), detail);
                v.constraint = Some(k);
                out.push(v);
            }
        }
    }

    for v in &mut out {
        v.category = classify(v, pack);
    }
    out.sort_by(|a, b| {
        (a.position, a.kind, &a.rule_class, a.constraint, &a.predicate).cmp(&(
            b.position,
            b.kind,
            &b.rule_class,
            b.constraint,
            &b.predicate,
        ))
    });
    out
}

/// Classes in `s` that have no rule in `pack`.
pub fn uncovered_classes(s: &CallSequence, pack: &RulePack) -> BTreeSet<String> {
    s.calls
        .iter()
        .map(ApiCall::simple_class)
        .filter(|c| !pack.contains(c))
        .map(str::to_string)
        .collect()
}

/// Misuse counts over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MisuseDistribution {
    pub counts: BTreeMap<MisuseCategory, usize>,
    pub sequences_total: usize,
    pub sequences_with_misuse: usize,
    pub misuse_rate: f64,
    /// Sequences mentioning at least one class without a rule.
    pub sequences_uncovered: usize,
    pub uncovered_classes: BTreeSet<String>,
}

impl MisuseDistribution {
    /// Aggregates per-sequence results. Violations count once per
    /// (rule, kind, position).
    pub fn tally<'a>(results: impl IntoIterator<Item = (&'a CallSequence, &'a [Violation])>, pack: &RulePack) -> Self {
        let mut counts: BTreeMap<MisuseCategory, usize> = MisuseCategory::ALL.iter().map(|&c| (c, 0)).collect();
        let (mut total, mut with_misuse, mut uncovered_seqs) = (0, 0, 0);
        let mut uncovered = BTreeSet::new();
        for (seq, violations) in results {
            total += 1;
            if !violations.is_empty() {
                with_misuse += 1;
            }
            let mut seen = HashSet::new();
            for v in violations {
                if seen.insert(v.count_key()) {
                    *counts.get_mut(&v.category).unwrap() += 1;
                }
            }
            let missing = uncovered_classes(seq, pack);
            if !missing.is_empty() {
                uncovered_seqs += 1;
                uncovered.extend(missing);
            }
        }
        MisuseDistribution {
            counts,
            sequences_total: total,
            sequences_with_misuse: with_misuse,
            misuse_rate: if total == 0 {
                0.0
            } else {
                with_misuse as f64 / total as f64
            },
            sequences_uncovered: uncovered_seqs,
            uncovered_classes: uncovered,
        }
    }
}

pub fn misuse_report(d: &Dataset, pack: &RulePack) -> Result<MisuseDistribution> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let results: Vec<(&CallSequence, Vec<Violation>)> = d
        .entries()
        .iter()
        .map(|e| (&e.sequence, check_sequence(&e.sequence, pack)))
        .collect();
    Ok(MisuseDistribution::tally(
        results.iter().map(|(s, v)| (*s, v.as_slice())),
        pack,
    ))
}
