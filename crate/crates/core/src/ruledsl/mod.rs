//! The `.crul` usage-rule language.
//!
//! A rule file describes one API class in line-oriented sections:
//!
//! ```text
//! SPEC javax.crypto.spec.PBEKeySpec
//! EVENTS
//!   n: new(password, salt, iterations, keyLength)
//!   c: clearPassword
//!   Getters := gp | gs
//!   gp: getPassword
//!   gs: getSalt
//! ORDER
//!   n, Getters*, c
//! REQUIRES
//!   randomized @ n : randomization
//! ENSURES
//!   speccedKey @ n
//! CONSTRAINTS
//!   getInstance[0] transformation {AES} / {CBC, GCM} / {PKCS5Padding} : default unless BouncyCastleProvider.new fix "AES/CBC/PKCS5Padding"
//!   getBytes[0] present : encoding fix "UTF-8"
//!   getInstance[algorithm] in {SHA-256, SHA-512} : default
//! FORBIDDEN
//!   new => PBEKeySpec.new
//! PRODUCERS
//!   randomized = SecureRandom.getInstance SecureRandom.nextBytes
//! NEGATES
//!   speccedKey @ c
//! ```
//!
//! Lines starting with `//` or `#` are comments. `SPEC` must come first. Every
//! section is optional. Aggregates (`Name := a | b`) expand to alternations.
//! NEGATES entries are kept verbatim and never evaluated.

pub mod order;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use log::warn;
use regex::Regex;

use crate::analyzer::MisuseCategory;
use crate::error::{Error, Result};
use crate::seqmodel::{is_identifier, parse_sequence, ApiCall, CallSequence};

pub use order::{parse_order, OrderAutomaton, OrderExpr, OrderParseError, Run};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventDecl {
    pub alias: String,
    pub method: String,
    /// Named argument positions, `new(password, salt)` style.
    pub params: Vec<String>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregate {
    pub name: String,
    pub members: Vec<String>,
}

/// A predicate that must hold when an event first occurs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateObligation {
    pub predicate: String,
    /// Alias or aggregate the obligation is attached to.
    pub attachment: String,
    /// Methods the attachment expands to.
    pub methods: BTreeSet<String>,
    pub category: MisuseCategory,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ensure {
    pub predicate: String,
    pub alias: String,
    pub methods: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintMode {
    /// The argument slot must exist in the captured argument list.
    Present,
    /// A literal in the slot must be one of the allowed values.
    OneOf(BTreeSet<String>),
    /// A literal in the slot must read `algorithm/mode/padding` with each part allowed.
    Transformation {
        algorithms: BTreeSet<String>,
        modes: BTreeSet<String>,
        paddings: BTreeSet<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintFix {
    SetLiteral(String),
    ReplaceCall(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArgConstraint {
    pub method: String,
    pub position: usize,
    pub mode: ConstraintMode,
    pub category: MisuseCategory,
    /// Token (`Class.method`) whose earlier presence satisfies the constraint.
    pub escape_event: Option<String>,
    pub fix: Option<ConstraintFix>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Forbidden {
    pub method: String,
    pub replacement: Option<String>,
}

/// One parsed rule file.
#[derive(Debug, Clone)]
pub struct RuleSpec {
    /// Simple class name, used to match calls.
    pub class_name: String,
    pub qualified_name: String,
    pub events: Vec<EventDecl>,
    pub aggregates: Vec<Aggregate>,
    pub order: Option<OrderExpr>,
    pub automaton: Option<OrderAutomaton>,
    pub mandatory_aliases: BTreeSet<String>,
    pub requires: Vec<PredicateObligation>,
    pub ensures: Vec<Ensure>,
    pub constraints: Vec<ArgConstraint>,
    pub forbidden: Vec<Forbidden>,
    pub producers: BTreeMap<String, CallSequence>,
    pub negates: Vec<String>,
    /// Event index -> first event index with the same method.
    canonical: Vec<usize>,
}

impl RuleSpec {
    pub fn package(&self) -> &str {
        self.qualified_name.rsplit_once('.').map_or("", |(p, _)| p)
    }

    /// Canonical event index for a method, if the method is declared.
    pub fn symbol_for_method(&self, method: &str) -> Option<usize> {
        self.events
            .iter()
            .position(|e| e.method == method)
            .map(|i| self.canonical[i])
    }

    pub fn alias_of_symbol(&self, symbol: usize) -> &str {
        &self.events[symbol].alias
    }

    pub fn method_of_symbol(&self, symbol: usize) -> &str {
        &self.events[symbol].method
    }

    /// Canonical symbols in declaration order, used to break completion ties.
    pub fn declaration_order(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for &c in &self.canonical {
            if !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }

    pub fn declares_method(&self, method: &str) -> bool {
        self.events.iter().any(|e| e.method == method)
    }

    pub fn forbidden_entry(&self, method: &str) -> Option<&Forbidden> {
        self.forbidden.iter().find(|f| f.method == method)
    }

    pub fn event_methods(&self) -> impl Iterator<Item = &str> {
        self.events.iter().map(|e| e.method.as_str())
    }
}

const SECTIONS: [&str; 8] = [
    "EVENTS",
    "ORDER",
    "REQUIRES",
    "ENSURES",
    "CONSTRAINTS",
    "FORBIDDEN",
    "PRODUCERS",
    "NEGATES",
];

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::RuleParse {
        file: None,
        line,
        message: message.into(),
    }
}

/// Maps a category tag to its category.
pub fn parse_category(tag: &str) -> Option<MisuseCategory> {
    let key: String = tag
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect();
    Some(match key.as_str() {
        "missingpredicate" | "predicate" => MisuseCategory::MissingPredicate,
        "insecuredefaultimplementation" | "insecuredefault" | "default" | "transformation" => {
            MisuseCategory::InsecureDefaultImplementation
        }
        "incorrectencoding" | "encoding" => MisuseCategory::IncorrectEncoding,
        "incorrectrandomization" | "randomization" | "randomized" => MisuseCategory::IncorrectRandomization,
        "incorrectmethodcall" | "methodcall" => MisuseCategory::IncorrectMethodCall,
        "missingmethodcall" | "missingcall" => MisuseCategory::MissingMethodCall,
        _ => return None,
    })
}

fn constraint_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r#"(?x)^
            (?P<method>[A-Za-z_$][\w$]*) \[ \s* (?P<pos>[\w$]+) \s* \] \s+
            (?P<mode> present
              | in \s* \{ (?P<set>[^}]*) \}
              | transformation \s* \{ (?P<alg>[^}]*) \} \s* / \s* \{ (?P<modes>[^}]*) \} \s* / \s* \{ (?P<pad>[^}]*) \}
            )
            (?: \s* : \s* (?P<tag>[\w-]+) )?
            (?: \s+ unless \s+ (?P<escape>\S+) )?
            (?: \s+ fix \s+ (?: "(?P<lit>[^"]*)" | => \s* (?P<repl>\S+) ) )?
            \s*$"#,
        )
        .expect("constraint pattern compiles")
    })
}

fn value_set(text: &str) -> BTreeSet<String> {
    text.split(',')
        .map(|v| v.trim().trim_matches('"').to_string())
        .filter(|v| !v.is_empty())
        .collect()
}

fn parse_token(line: usize, token: &str) -> Result<String> {
    ApiCall::parse(token)
        .map(|c| c.token())
        .map_err(|_| err(line, format!("`{token}` is not a Class.method token")))
}

/// Parses one rule file.
pub fn parse_rule(text: &str) -> Result<RuleSpec> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with("//") && !l.starts_with('#'));

    let (spec_line, header) = lines.next().ok_or_else(|| err(1, "missing SPEC header"))?;
    let qualified_name = match header.strip_prefix("SPEC") {
        Some(rest) if rest.starts_with(char::is_whitespace) => rest.trim().to_string(),
        _ => return Err(err(spec_line, "missing SPEC header")),
    };
    if qualified_name.is_empty() || !qualified_name.split('.').all(is_identifier) {
        return Err(err(spec_line, format!("bad class name `{qualified_name}`")));
    }
    let class_name = qualified_name.rsplit('.').next().unwrap_or(&qualified_name).to_string();

    let mut sections: HashMap<&str, Vec<(usize, &str)>> = HashMap::new();
    let mut current: Option<&str> = None;
    for (n, line) in lines {
        if let Some(&s) = SECTIONS.iter().find(|&&s| s == line) {
            if sections.contains_key(s) {
                return Err(err(n, format!("duplicate {s} section")));
            }
            sections.insert(s, Vec::new());
            current = Some(s);
            continue;
        }
        if line.starts_with("SPEC ") {
            return Err(err(n, "only one SPEC per file"));
        }
        match current {
            Some(s) => sections.get_mut(s).unwrap().push((n, line)),
            None => return Err(err(n, format!("`{line}` outside of any section"))),
        }
    }
    let section = |s: &str| sections.get(s).cloned().unwrap_or_default();

    // EVENTS
    let mut events: Vec<EventDecl> = Vec::new();
    let mut aggregates: Vec<(Aggregate, usize)> = Vec::new();
    let mut declared: HashMap<String, usize> = HashMap::new();
    for (n, line) in section("EVENTS") {
        let (name, rest, is_aggregate) = if let Some((l, r)) = line.split_once(":=") {
            (l.trim(), r.trim(), true)
        } else if let Some((l, r)) = line.split_once(':') {
            (l.trim(), r.trim(), false)
        } else {
            return Err(err(n, format!("expected `alias: method`, got `{line}`")));
        };
        if !is_identifier(name) {
            return Err(err(n, format!("bad alias `{name}`")));
        }
        if let Some(first) = declared.insert(name.to_string(), n) {
            return Err(err(n, format!("duplicate alias `{name}` (first on line {first})")));
        }
        if is_aggregate {
            let members: Vec<String> = rest.split('|').map(|m| m.trim().to_string()).collect();
            if members.iter().any(|m| !is_identifier(m)) {
                return Err(err(n, format!("bad aggregate `{rest}`")));
            }
            aggregates.push((
                Aggregate {
                    name: name.to_string(),
                    members,
                },
                n,
            ));
        } else {
            let (method, params) = match rest.split_once('(') {
                Some((m, p)) => {
                    let p = p
                        .strip_suffix(')')
                        .ok_or_else(|| err(n, "missing `)` in parameter list"))?;
                    let params: Vec<String> = p
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect();
                    (m.trim(), params)
                }
                None => (rest, Vec::new()),
            };
            if !is_identifier(method) {
                return Err(err(n, format!("bad method name `{method}`")));
            }
            events.push(EventDecl {
                alias: name.to_string(),
                method: method.to_string(),
                params,
                line: n,
            });
        }
    }
    let canonical: Vec<usize> = events
        .iter()
        .map(|e| events.iter().position(|o| o.method == e.method).unwrap())
        .collect();

    // name -> expansion, used by ORDER and by REQUIRES/ENSURES attachments
    let mut names: HashMap<String, OrderExpr> = events
        .iter()
        .enumerate()
        .map(|(i, e)| (e.alias.clone(), OrderExpr::Event(canonical[i])))
        .collect();
    let mut pending = aggregates.clone();
    while !pending.is_empty() {
        let before = pending.len();
        pending.retain(|(agg, _)| {
            let members: Option<Vec<OrderExpr>> = agg.members.iter().map(|m| names.get(m).cloned()).collect();
            match members {
                Some(m) => {
                    names.insert(agg.name.clone(), OrderExpr::Alt(m));
                    false
                }
                None => true,
            }
        });
        if pending.len() == before {
            let (agg, n) = &pending[0];
            let missing = agg
                .members
                .iter()
                .find(|m| !names.contains_key(*m) && !pending.iter().any(|(a, _)| &a.name == *m))
                .cloned();
            return Err(match missing {
                Some(m) => err(*n, format!("unknown alias `{m}` in aggregate {}", agg.name)),
                None => err(*n, format!("aggregate {} is cyclic", agg.name)),
            });
        }
    }
    let methods_of = |name: &str, n: usize| -> Result<BTreeSet<String>> {
        let e = names
            .get(name)
            .ok_or_else(|| err(n, format!("unknown alias `{name}`")))?;
        Ok(e.alphabet().into_iter().map(|s| events[s].method.clone()).collect())
    };

    // ORDER
    let order_lines = section("ORDER");
    let order = if order_lines.is_empty() {
        None
    } else {
        let text = order_lines.iter().map(|(_, l)| *l).collect::<Vec<_>>().join(" ");
        let first = order_lines[0].0;
        match parse_order(&text, &names) {
            Ok(e) => Some(e),
            Err(OrderParseError::UnknownName(name)) => {
                let line = order_lines
                    .iter()
                    .find(|(_, l)| l.split(|c: char| !(c.is_alphanumeric() || c == '_')).any(|w| w == name))
                    .map_or(first, |(n, _)| *n);
                return Err(err(line, format!("unknown alias `{name}` in ORDER")));
            }
            Err(OrderParseError::Syntax(m)) => return Err(err(first, format!("ORDER: {m}"))),
        }
    };
    let automaton = order.as_ref().map(OrderAutomaton::compile);
    let mandatory_aliases = automaton
        .as_ref()
        .map(|a| {
            a.mandatory_symbols()
                .into_iter()
                .map(|s| events[s].alias.clone())
                .collect()
        })
        .unwrap_or_default();

    // REQUIRES / ENSURES
    let mut requires = Vec::new();
    for (n, line) in section("REQUIRES") {
        let (body, tag) = match line.split_once(':') {
            Some((b, t)) => (b.trim(), Some(t.trim())),
            None => (line, None),
        };
        let (pred, alias) = body
            .split_once('@')
            .map(|(p, a)| (p.trim(), a.trim()))
            .ok_or_else(|| err(n, "expected `predicate @ alias`"))?;
        if !is_identifier(pred) {
            return Err(err(n, format!("bad predicate `{pred}`")));
        }
        let category = match tag {
            Some(t) => parse_category(t).ok_or_else(|| err(n, format!("unknown category `{t}`")))?,
            None if pred == "randomized" => MisuseCategory::IncorrectRandomization,
            None => MisuseCategory::MissingPredicate,
        };
        requires.push(PredicateObligation {
            predicate: pred.to_string(),
            attachment: alias.to_string(),
            methods: methods_of(alias, n)?,
            category,
        });
    }
    let mut ensures = Vec::new();
    for (n, line) in section("ENSURES") {
        let (pred, alias) = line
            .split_once('@')
            .map(|(p, a)| (p.trim(), a.trim()))
            .ok_or_else(|| err(n, "expected `predicate @ alias`"))?;
        if !is_identifier(pred) {
            return Err(err(n, format!("bad predicate `{pred}`")));
        }
        ensures.push(Ensure {
            predicate: pred.to_string(),
            alias: alias.to_string(),
            methods: methods_of(alias, n)?,
        });
    }

    // CONSTRAINTS
    let mut constraints = Vec::new();
    for (n, line) in section("CONSTRAINTS") {
        let caps = constraint_regex()
            .captures(line)
            .ok_or_else(|| err(n, format!("unparseable constraint `{line}`")))?;
        let method = caps["method"].to_string();
        let decl = events
            .iter()
            .find(|e| e.method == method)
            .ok_or_else(|| err(n, format!("constraint on undeclared method `{method}`")))?;
        let pos_text = &caps["pos"];
        let position = match pos_text.parse::<usize>() {
            Ok(p) => p,
            Err(_) => decl
                .params
                .iter()
                .position(|p| p == pos_text)
                .ok_or_else(|| err(n, format!("`{method}` has no parameter `{pos_text}`")))?,
        };
        let mode_text = &caps["mode"];
        let mode = if mode_text == "present" {
            ConstraintMode::Present
        } else if let Some(set) = caps.name("set") {
            ConstraintMode::OneOf(value_set(set.as_str()))
        } else {
            ConstraintMode::Transformation {
                algorithms: value_set(&caps["alg"]),
                modes: value_set(&caps["modes"]),
                paddings: value_set(&caps["pad"]),
            }
        };
        let category = match caps.name("tag") {
            Some(t) => {
                parse_category(t.as_str()).ok_or_else(|| err(n, format!("unknown category `{}`", t.as_str())))?
            }
            None if matches!(mode, ConstraintMode::Transformation { .. }) => {
                MisuseCategory::InsecureDefaultImplementation
            }
            None => return Err(err(n, "constraint needs a category tag")),
        };
        let escape_event = caps.name("escape").map(|m| parse_token(n, m.as_str())).transpose()?;
        let fix = if let Some(lit) = caps.name("lit") {
            Some(ConstraintFix::SetLiteral(lit.as_str().to_string()))
        } else if let Some(r) = caps.name("repl") {
            Some(ConstraintFix::ReplaceCall(parse_token(n, r.as_str())?))
        } else {
            None
        };
        constraints.push(ArgConstraint {
            method,
            position,
            mode,
            category,
            escape_event,
            fix,
            line: n,
        });
    }

    // FORBIDDEN
    let mut forbidden = Vec::new();
    for (n, line) in section("FORBIDDEN") {
        let (method, replacement) = match line.split_once("=>") {
            Some((m, r)) => (m.trim(), Some(parse_token(n, r.trim())?)),
            None => (line, None),
        };
        if !is_identifier(method) {
            return Err(err(n, format!("bad forbidden method `{method}`")));
        }
        forbidden.push(Forbidden {
            method: method.to_string(),
            replacement,
        });
    }

    // PRODUCERS
    let mut producers = BTreeMap::new();
    for (n, line) in section("PRODUCERS") {
        let (pred, snippet) = line
            .split_once('=')
            .map(|(p, s)| (p.trim(), s.trim()))
            .ok_or_else(|| err(n, "expected `predicate = Class.method ...`"))?;
        let seq = parse_sequence(snippet).map_err(|e| err(n, e.to_string()))?;
        if seq.is_empty() {
            return Err(err(n, format!("empty producer for `{pred}`")));
        }
        producers.insert(pred.to_string(), seq);
    }

    let negates = section("NEGATES").into_iter().map(|(_, l)| l.to_string()).collect();

    Ok(RuleSpec {
        class_name,
        qualified_name,
        events,
        aggregates: aggregates.into_iter().map(|(a, _)| a).collect(),
        order,
        automaton,
        mandatory_aliases,
        requires,
        ensures,
        constraints,
        forbidden,
        producers,
        negates,
        canonical,
    })
}

/// Rules keyed by simple class name.
#[derive(Debug, Clone, Default)]
pub struct RulePack {
    rules: BTreeMap<String, RuleSpec>,
    sources: BTreeMap<String, String>,
}

impl RulePack {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a rule; `source` names where it came from, for error messages.
    pub fn insert(&mut self, rule: RuleSpec, source: impl Into<String>) -> Result<()> {
        let source = source.into();
        if let Some(first) = self.sources.get(&rule.class_name) {
            return Err(Error::DuplicateRule {
                class: rule.class_name.clone(),
                first: first.clone(),
                second: source,
            });
        }
        self.sources.insert(rule.class_name.clone(), source);
        self.rules.insert(rule.class_name.clone(), rule);
        Ok(())
    }

    pub fn get(&self, class: &str) -> Option<&RuleSpec> {
        self.rules.get(class)
    }

    pub fn contains(&self, class: &str) -> bool {
        self.rules.contains_key(class)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.rules.keys().map(String::as_str)
    }

    pub fn rules(&self) -> impl Iterator<Item = &RuleSpec> {
        self.rules.values()
    }

    pub fn source_of(&self, class: &str) -> Option<&str> {
        self.sources.get(class).map(String::as_str)
    }

    /// Snippet that establishes `predicate`: the consumer's own PRODUCERS entry
    /// first, then any other rule's in class-name order.
    pub fn producer_for(&self, predicate: &str, consumer: &str) -> Option<&CallSequence> {
        self.get(consumer)
            .and_then(|r| r.producers.get(predicate))
            .or_else(|| self.rules.values().find_map(|r| r.producers.get(predicate)))
    }

    /// Every method name that appears as an event of some rule.
    pub fn event_methods(&self) -> BTreeSet<&str> {
        self.rules.values().flat_map(|r| r.event_methods()).collect()
    }

    /// The rule pack shipped with this crate.
    pub fn bundled() -> RulePack {
        let mut pack = RulePack::new();
        for (name, text) in BUNDLED_RULES {
            let rule = parse_rule(text).unwrap_or_else(|e| panic!("bundled rule {name}: {e}"));
            pack.insert(rule, *name).expect("bundled rules are unique");
        }
        pack
    }
}

impl fmt::Display for RuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} events, {} automaton states, mandatory {:?})",
            self.qualified_name,
            self.events.len(),
            self.automaton.as_ref().map_or(0, |a| a.state_count()),
            self.mandatory_aliases
        )
    }
}

macro_rules! bundled {
    ($($file:literal),* $(,)?) => {
        &[$(($file, include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/rules/", $file)))),*]
    };
}

/// File name and contents of every bundled rule.
pub const BUNDLED_RULES: &[(&str, &str)] = bundled!(
    "Cipher.crul",
    "DESKeySpec.crul",
    "IvParameterSpec.crul",
    "KeyGenerator.crul",
    "KeyPairGenerator.crul",
    "Mac.crul",
    "MessageDigest.crul",
    "PBEKeySpec.crul",
    "SecretKey.crul",
    "SecretKeyFactory.crul",
    "SecretKeySpec.crul",
    "SecureRandom.crul",
    "String.crul",
);

/// Loads every `.crul` file in `dir` (sorted by file name).
pub fn load_rule_pack(dir: impl AsRef<Path>) -> Result<RulePack> {
    let dir = dir.as_ref();
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "crul") && p.is_file())
        .collect();
    files.sort();
    let mut pack = RulePack::new();
    for path in &files {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let rule = parse_rule(&text).map_err(|e| match e {
            Error::RuleParse { line, message, .. } => Error::RuleParse {
                file: Some(name.clone()),
                line,
                message,
            },
            other => other,
        })?;
        pack.insert(rule, name)?;
    }
    if pack.is_empty() {
        warn!("no .crul rules found in {}", dir.display());
    }
    Ok(pack)
}
