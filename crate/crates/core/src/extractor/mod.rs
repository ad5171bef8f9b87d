//! Call-sequence extraction from Java sources.
//!
//! Parsing is token-level and tolerant. A file is split into classes, fields
//! and methods by brace matching; method bodies are then walked in textual
//! order, emitting one [`ApiCall`] per call whose receiver resolves to a class
//! in the crypto universe. Within an expression, calls follow evaluation
//! order: receiver, then arguments, then the call itself. Control flow is not
//! interpreted, so both branches of an `if` appear and loop bodies appear once.
//!
//! Receivers resolve lexically: declared types of locals, parameters and
//! fields, `var` initialised from `new X(..)` or `X.getInstance(..)`, class
//! names in static calls, and a handful of well-known factory return types.
//! Calls to other methods of the same file are inlined, at most once per call
//! chain.

mod lexer;

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;
use std::path::Path;
use std::sync::OnceLock;

use log::{debug, warn};
use regex::Regex;
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::ruledsl::RulePack;
use crate::seqmodel::{AnnotatedSequence, ApiCall, ArgValue, CallSequence, Dataset, Provenance};

pub use lexer::{tokenize, Tok, Token};

pub const DEFAULT_KEYWORDS: [&str; 3] = ["javax.crypto", "java.security", "org.bouncycastle"];

/// Which files and packages count as crypto code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusFilter {
    pub keywords: Vec<String>,
}

impl Default for CorpusFilter {
    fn default() -> Self {
        CorpusFilter {
            keywords: DEFAULT_KEYWORDS.iter().map(|k| k.to_string()).collect(),
        }
    }
}

impl CorpusFilter {
    pub fn matches_text(&self, text: &str) -> bool {
        self.keywords.iter().any(|k| text.contains(k.as_str()))
    }

    pub fn covers_package(&self, package: &str) -> bool {
        self.keywords.iter().any(|k| {
            package == k || (package.starts_with(k.as_str()) && package.as_bytes().get(k.len()) == Some(&b'.'))
        })
    }
}

/// Classes assumed behind a wildcard import of a keyword package.
const KNOWN_CLASSES: &[(&str, &[&str])] = &[
    (
        "javax.crypto",
        &[
            "Cipher",
            "CipherInputStream",
            "CipherOutputStream",
            "KeyAgreement",
            "KeyGenerator",
            "Mac",
            "SealedObject",
            "SecretKey",
            "SecretKeyFactory",
        ],
    ),
    (
        "javax.crypto.spec",
        &[
            "DESKeySpec",
            "DESedeKeySpec",
            "GCMParameterSpec",
            "IvParameterSpec",
            "PBEKeySpec",
            "PBEParameterSpec",
            "SecretKeySpec",
        ],
    ),
    (
        "java.security",
        &[
            "AlgorithmParameters",
            "Key",
            "KeyFactory",
            "KeyPair",
            "KeyPairGenerator",
            "KeyStore",
            "MessageDigest",
            "PrivateKey",
            "PublicKey",
            "SecureRandom",
            "Security",
            "Signature",
        ],
    ),
    (
        "java.security.spec",
        &[
            "ECGenParameterSpec",
            "PKCS8EncodedKeySpec",
            "RSAKeyGenParameterSpec",
            "X509EncodedKeySpec",
        ],
    ),
    ("org.bouncycastle.jce.provider", &["BouncyCastleProvider"]),
];

/// Known factory results, for chained calls.
const RETURNS: &[(&str, &str, &str)] = &[
    ("KeyGenerator", "generateKey", "SecretKey"),
    ("SecretKeyFactory", "generateSecret", "SecretKey"),
    ("KeyPairGenerator", "generateKeyPair", "KeyPair"),
    ("KeyPairGenerator", "genKeyPair", "KeyPair"),
    ("KeyPair", "getPrivate", "PrivateKey"),
    ("KeyPair", "getPublic", "PublicKey"),
];

fn return_type(class: &str, method: &str) -> Option<String> {
    if method == "getInstance" || method == "getInstanceStrong" {
        return Some(class.to_string());
    }
    RETURNS
        .iter()
        .find(|(c, m, _)| *c == class && *m == method)
        .map(|(_, _, r)| r.to_string())
}

const KEYWORDS: &[&str] = &[
    "abstract",
    "assert",
    "break",
    "case",
    "catch",
    "class",
    "continue",
    "default",
    "do",
    "else",
    "enum",
    "extends",
    "final",
    "finally",
    "for",
    "goto",
    "if",
    "implements",
    "import",
    "instanceof",
    "interface",
    "native",
    "new",
    "package",
    "private",
    "protected",
    "public",
    "return",
    "static",
    "strictfp",
    "super",
    "switch",
    "synchronized",
    "this",
    "throw",
    "throws",
    "transient",
    "try",
    "volatile",
    "while",
    "yield",
    "void",
    "true",
    "false",
    "null",
];

const MODIFIERS: &[&str] = &[
    "public",
    "protected",
    "private",
    "static",
    "final",
    "abstract",
    "strictfp",
    "sealed",
];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

fn starts_upper(s: &str) -> bool {
    s.chars().next().is_some_and(char::is_uppercase)
}

/// Classes whose calls are extracted from one file.
#[derive(Debug, Clone, Default)]
pub struct Universe {
    full: BTreeSet<String>,
    events_only: BTreeMap<String, BTreeSet<String>>,
}

impl Universe {
    /// Rule classes in keyword packages and keyword-package imports admit every
    /// method; other rule classes admit only their declared events.
    pub fn new(pack: &RulePack, filter: &CorpusFilter, imports: &[String]) -> Self {
        let mut u = Universe::default();
        for rule in pack.rules() {
            if filter.covers_package(rule.package()) {
                u.full.insert(rule.class_name.clone());
            } else {
                u.events_only.insert(
                    rule.class_name.clone(),
                    rule.event_methods().map(str::to_string).collect(),
                );
            }
        }
        for imp in imports {
            if let Some(pkg) = imp.strip_suffix(".*") {
                if filter.covers_package(pkg) {
                    for (p, classes) in KNOWN_CLASSES {
                        if *p == pkg {
                            u.full.extend(classes.iter().map(|c| c.to_string()));
                        }
                    }
                }
            } else if let Some((pkg, class)) = imp.rsplit_once('.') {
                if filter.covers_package(pkg) {
                    u.full.insert(class.to_string());
                }
            }
        }
        u
    }

    pub fn admits(&self, class: &str, method: &str) -> bool {
        self.full.contains(class) || self.events_only.get(class).is_some_and(|m| m.contains(method))
    }

    pub fn add(&mut self, class: &str) {
        self.full.insert(class.to_string());
    }
}

/// A method found in a Java file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JavaMethodRecord {
    pub name: String,
    pub class_name: String,
    pub javadoc_first_line: Option<String>,
    pub return_type: Option<String>,
    /// Parameter and local variable name -> simple type name.
    pub declared_types: BTreeMap<String, String>,
    /// String constants declared locally.
    pub constants: BTreeMap<String, String>,
    pub line: usize,
    body: Range<usize>,
}

/// The parsed outline of a Java file.
#[derive(Debug, Clone)]
pub struct JavaFile {
    tokens: Vec<Token>,
    /// Matching closer for each opener, by token index.
    pairs: Vec<Option<usize>>,
    pub package: Option<String>,
    pub imports: Vec<String>,
    pub methods: Vec<JavaMethodRecord>,
    pub fields: BTreeMap<String, String>,
    pub constants: BTreeMap<String, String>,
}

fn javadoc_patterns() -> &'static (Regex, Regex, Regex) {
    static RE: OnceLock<(Regex, Regex, Regex)> = OnceLock::new();
    RE.get_or_init(|| {
        (
            Regex::new(r"\{@\w+\s*([^}]*)\}").unwrap(),
            Regex::new(r"<[^>]*>").unwrap(),
            Regex::new(r"\s+").unwrap(),
        )
    })
}

/// First line of a Javadoc comment, cut at the first sentence end, with
/// inline tags and HTML removed, lowercased.
pub fn javadoc_first_line(raw: &str) -> Option<String> {
    let line = raw
        .lines()
        .map(|l| l.trim().trim_start_matches('*').trim())
        .find(|l| !l.is_empty())?;
    if line.starts_with('@') {
        return None;
    }
    let (inline, html, space) = javadoc_patterns();
    let text = inline.replace_all(line, "$1");
    let text = html.replace_all(&text, "");
    let text = space.replace_all(text.trim(), " ");
    let mut cut = text.len();
    let bytes = text.as_bytes();
    for (i, b) in bytes.iter().enumerate() {
        if *b == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_whitespace) {
            cut = i + 1;
            break;
        }
    }
    let out = text[..cut].trim().to_lowercase();
    (!out.is_empty()).then_some(out)
}

fn pair_up(tokens: &[Token]) -> Result<Vec<Option<usize>>> {
    let mut pairs = vec![None; tokens.len()];
    let mut braces: Vec<usize> = Vec::new();
    let mut parens: Vec<usize> = Vec::new();
    let mut brackets: Vec<usize> = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        match t.tok {
            Tok::Punct('{') => braces.push(i),
            Tok::Punct('}') => match braces.pop() {
                Some(o) => pairs[o] = Some(i),
                None => {
                    return Err(Error::Extraction {
                        line: t.line,
                        message: "unbalanced braces: unexpected `}`".into(),
                    })
                }
            },
            Tok::Punct('(') => parens.push(i),
            Tok::Punct(')') => {
                if let Some(o) = parens.pop() {
                    pairs[o] = Some(i);
                }
            }
            Tok::Punct('[') => brackets.push(i),
            Tok::Punct(']') => {
                if let Some(o) = brackets.pop() {
                    pairs[o] = Some(i);
                }
            }
            _ => {}
        }
    }
    if let Some(&o) = braces.first() {
        return Err(Error::Extraction {
            line: tokens[o].line,
            message: "unbalanced braces: `{` never closed".into(),
        });
    }
    Ok(pairs)
}

impl JavaFile {
    fn tok(&self, i: usize) -> Option<&Tok> {
        self.tokens.get(i).map(|t| &t.tok)
    }

    fn is_punct(&self, i: usize, c: char) -> bool {
        self.tok(i) == Some(&Tok::Punct(c))
    }

    fn ident(&self, i: usize) -> Option<&str> {
        self.tokens.get(i).and_then(Token::ident)
    }

    fn closer(&self, open: usize) -> std::result::Result<usize, String> {
        self.pairs[open].ok_or_else(|| format!("line {}: unmatched `(` or `[`", self.tokens[open].line))
    }

    /// Simple type name written just before the name token at `name_idx`.
    fn type_before(&self, name_idx: usize, floor: usize) -> Option<String> {
        let mut k = name_idx.checked_sub(1)?;
        loop {
            if k < floor {
                return None;
            }
            if self.is_punct(k, ']') && k > floor && self.is_punct(k - 1, '[') {
                k = k.checked_sub(2)?;
            } else if self.is_punct(k, '>') {
                let mut depth = 0usize;
                loop {
                    if self.is_punct(k, '>') {
                        depth += 1;
                    } else if self.is_punct(k, '<') {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    } else if matches!(self.tok(k), Some(Tok::Punct(';' | '{' | '}' | '(' | '='))) {
                        return None;
                    }
                    if k <= floor {
                        return None;
                    }
                    k -= 1;
                }
                k = k.checked_sub(1)?;
            } else if k >= floor + 2 && self.is_punct(k, '.') && self.is_punct(k - 1, '.') && self.is_punct(k - 2, '.')
            {
                k = k.checked_sub(3)?;
            } else {
                break;
            }
        }
        let t = self.ident(k)?;
        if t == "var" {
            return Some(t.to_string());
        }
        (!is_keyword(t) && starts_upper(t)).then(|| t.to_string())
    }

    /// Type of a `var` initialiser starting at `i`: `new X(..)` or `X.getInstance(..)`.
    fn infer_var(&self, i: usize) -> Option<String> {
        let mut k = i;
        let is_new = self.ident(k) == Some("new");
        if is_new {
            k += 1;
        }
        let mut segs = vec![self.ident(k)?];
        while self.is_punct(k + 1, '.') {
            match self.ident(k + 2) {
                Some(s) => {
                    segs.push(s);
                    k += 2;
                }
                None => break,
            }
        }
        if is_new {
            return Some(segs.last()?.to_string());
        }
        let n = segs.len();
        (n >= 2 && matches!(segs[n - 1], "getInstance" | "getInstanceStrong") && self.is_punct(k + 1, '('))
            .then(|| segs[n - 2].to_string())
    }

    /// Declarations (`Type name` followed by `= ; , : )`) in `range`.
    fn collect_decls(&self, range: Range<usize>) -> (BTreeMap<String, String>, BTreeMap<String, String>) {
        let mut types = BTreeMap::new();
        let mut constants = BTreeMap::new();
        for k in range.clone() {
            let Some(name) = self.ident(k) else { continue };
            if is_keyword(name) {
                continue;
            }
            let next = self.tok(k + 1);
            if !matches!(next, Some(Tok::Punct('=' | ';' | ',' | ':' | ')'))) {
                continue;
            }
            // `a == b`
            if self.is_punct(k + 1, '=') && self.is_punct(k + 2, '=') {
                continue;
            }
            let Some(mut ty) = self.type_before(k, range.start) else {
                continue;
            };
            if ty == "var" {
                match self.is_punct(k + 1, '=').then(|| self.infer_var(k + 2)).flatten() {
                    Some(t) => ty = t,
                    None => continue,
                }
            }
            if ty == "String" && self.is_punct(k + 1, '=') && self.is_punct(k + 3, ';') {
                if let Some(Tok::Str(s)) = self.tok(k + 2) {
                    constants.insert(name.to_string(), s.clone());
                }
            }
            types.insert(name.to_string(), ty);
        }
        (types, constants)
    }

    fn skip_annotation(&self, mut i: usize, hi: usize) -> usize {
        i += 1;
        while i < hi && (self.ident(i).is_some() || self.is_punct(i, '.')) {
            i += 1;
            if self.ident(i - 1).is_some() && !self.is_punct(i, '.') {
                break;
            }
        }
        if self.is_punct(i, '(') {
            if let Some(c) = self.pairs[i] {
                return c + 1;
            }
        }
        i
    }

    /// Finds the `{` that opens a type body, from just after the type keyword.
    fn type_body_open(&self, mut i: usize, hi: usize) -> Option<usize> {
        while i < hi {
            if self.is_punct(i, '{') {
                return Some(i);
            }
            if self.is_punct(i, '(') {
                i = self.pairs[i]? + 1;
                continue;
            }
            if self.is_punct(i, ';') {
                return None;
            }
            i += 1;
        }
        None
    }

    fn scan_types(&mut self, lo: usize, hi: usize) {
        let mut i = lo;
        while i < hi {
            match self.tok(i).cloned() {
                Some(Tok::Punct('@')) if self.ident(i + 1) != Some("interface") => {
                    i = self.skip_annotation(i, hi);
                }
                Some(Tok::Ident(kw)) if (kw == "package" || kw == "import") => {
                    let mut j = i + 1;
                    let mut text = String::new();
                    while j < hi && !self.is_punct(j, ';') {
                        match self.tok(j) {
                            Some(Tok::Ident(s)) if s == "static" && j == i + 1 => {}
                            Some(Tok::Ident(s)) => text.push_str(s),
                            Some(Tok::Punct(c)) => text.push(*c),
                            _ => {}
                        }
                        j += 1;
                    }
                    if kw == "package" {
                        self.package = Some(text);
                    } else {
                        self.imports.push(text);
                    }
                    i = j + 1;
                }
                Some(Tok::Ident(_)) if self.is_type_decl(i) => i = self.nested_type(i, hi),
                _ => i += 1,
            }
        }
    }

    /// `class Name`, `enum Name`, ... possibly after modifiers.
    fn is_type_decl(&self, mut i: usize) -> bool {
        while self.ident(i).is_some_and(|m| MODIFIERS.contains(&m)) {
            i += 1;
        }
        self.ident(i)
            .is_some_and(|k| matches!(k, "class" | "interface" | "enum" | "record"))
            && self.ident(i + 1).is_some_and(|n| !is_keyword(n))
    }

    fn nested_type(&mut self, mut i: usize, hi: usize) -> usize {
        while self.ident(i).is_some_and(|m| MODIFIERS.contains(&m)) {
            i += 1;
        }
        let is_enum = self.ident(i) == Some("enum");
        let name = self.ident(i + 1).unwrap_or_default().to_string();
        match self.type_body_open(i + 2, hi) {
            Some(open) => {
                let close = self.pairs[open].unwrap_or(hi);
                self.scan_members(open + 1, close, &name, is_enum);
                close + 1
            }
            None => i + 2,
        }
    }

    fn skip_to_semicolon(&self, mut j: usize, hi: usize) -> usize {
        while j < hi && !self.is_punct(j, ';') {
            if matches!(self.tok(j), Some(Tok::Punct('(' | '[' | '{'))) {
                j = self.pairs[j].unwrap_or(hi);
            }
            j += 1;
        }
        j
    }

    fn scan_members(&mut self, lo: usize, hi: usize, class: &str, is_enum: bool) {
        let mut i = lo;
        if is_enum {
            let semi = self.skip_to_semicolon(lo, hi);
            i = semi + 1;
        }
        let mut pending_doc: Option<String> = None;
        while i < hi {
            match self.tok(i).cloned() {
                Some(Tok::Javadoc(doc)) => {
                    pending_doc = Some(doc);
                    i += 1;
                }
                Some(Tok::Punct('@')) if self.ident(i + 1) != Some("interface") => {
                    i = self.skip_annotation(i, hi);
                }
                Some(Tok::Punct(';')) => {
                    pending_doc = None;
                    i += 1;
                }
                Some(Tok::Punct('{')) => {
                    pending_doc = None;
                    i = self.pairs[i].unwrap_or(hi) + 1;
                }
                Some(Tok::Ident(_)) if self.is_type_decl(i) => {
                    pending_doc = None;
                    i = self.nested_type(i, hi);
                }
                _ => {
                    i = self.scan_member(i, hi, class, pending_doc.take());
                }
            }
        }
    }

    /// One field or method starting at `i`; returns the index after it.
    fn scan_member(&mut self, i: usize, hi: usize, class: &str, doc: Option<String>) -> usize {
        let mut j = i;
        while j < hi {
            match self.tok(j) {
                Some(Tok::Punct('=')) | Some(Tok::Punct(';')) => {
                    let end = self.skip_to_semicolon(j, hi);
                    let (types, constants) = self.collect_decls(i..(j + 1).min(hi));
                    self.fields.extend(types);
                    self.constants.extend(constants);
                    return end + 1;
                }
                Some(Tok::Punct('(')) => {
                    let Some(name) = j.checked_sub(1).and_then(|p| self.ident(p)).map(str::to_string) else {
                        return self.skip_to_semicolon(j, hi) + 1;
                    };
                    let close = self.pairs[j].unwrap_or(hi);
                    let mut k = close + 1;
                    while k < hi && !self.is_punct(k, '{') && !self.is_punct(k, ';') {
                        k += 1;
                    }
                    let line = self.tokens[j - 1].line;
                    let return_type = self.type_before(j - 1, i).filter(|t| t != "var");
                    let (mut declared_types, _) = self.collect_decls(j + 1..close + 1);
                    if !self.is_punct(k, '{') {
                        return k + 1;
                    }
                    let body_end = self.pairs[k].unwrap_or(hi);
                    let (locals, constants) = self.collect_decls(k + 1..body_end);
                    declared_types.extend(locals);
                    self.methods.push(JavaMethodRecord {
                        name,
                        class_name: class.to_string(),
                        javadoc_first_line: doc.as_deref().and_then(javadoc_first_line),
                        return_type,
                        declared_types,
                        constants,
                        line,
                        body: k + 1..body_end,
                    });
                    return body_end + 1;
                }
                Some(Tok::Punct('{')) => {
                    // `static { .. }` and similar
                    return self.pairs[j].unwrap_or(hi) + 1;
                }
                _ => j += 1,
            }
        }
        hi
    }
}

/// Tokenizes `source` and outlines its classes, fields and methods.
pub fn parse_java(source: &str) -> Result<JavaFile> {
    let tokens = tokenize(source)?;
    let pairs = pair_up(&tokens)?;
    let n = tokens.len();
    let mut file = JavaFile {
        tokens,
        pairs,
        package: None,
        imports: Vec::new(),
        methods: Vec::new(),
        fields: BTreeMap::new(),
        constants: BTreeMap::new(),
    };
    file.scan_types(0, n);
    Ok(file)
}

struct Walker<'a> {
    file: &'a JavaFile,
    universe: Universe,
    event_methods: BTreeSet<&'a str>,
    filter: &'a CorpusFilter,
    origin: &'a str,
    stack: Vec<usize>,
    out: Vec<ApiCall>,
}

type Step = std::result::Result<usize, String>;

impl<'a> Walker<'a> {
    fn method(&self) -> &'a JavaMethodRecord {
        &self.file.methods[*self.stack.last().expect("walking inside a method")]
    }

    fn emit(&mut self, class: &str, method: &str, args: Vec<ArgValue>) {
        if self.universe.admits(class, method) {
            let call = ApiCall::new(class, method).expect("identifiers from the lexer");
            self.out.push(call.with_args(args));
        }
    }

    fn walk(&mut self, range: Range<usize>) -> std::result::Result<(), String> {
        let f = self.file;
        let mut i = range.start;
        while i < range.end {
            i = match f.tok(i) {
                Some(Tok::Ident(s)) if s == "new" => self.walk_new(i, range.end)?,
                Some(Tok::Str(_)) if f.is_punct(i + 1, '.') && f.ident(i + 2).is_some() && f.is_punct(i + 3, '(') => {
                    self.chain(i + 1, range.end, Some("String".to_string()))?
                }
                Some(Tok::Ident(s)) if !is_keyword(s) || s == "this" => self.walk_name(i, range.end)?,
                _ => i + 1,
            };
        }
        Ok(())
    }

    /// Captures one value per argument slot, then walks the arguments.
    fn walk_args(&mut self, open: usize) -> std::result::Result<(Vec<ArgValue>, usize), String> {
        let f = self.file;
        let close = f.closer(open)?;
        let mut slots: Vec<Range<usize>> = Vec::new();
        let mut start = open + 1;
        let mut j = open + 1;
        while j < close {
            if matches!(f.tok(j), Some(Tok::Punct('(' | '[' | '{'))) {
                j = f.pairs[j].unwrap_or(close);
            } else if f.is_punct(j, ',') {
                slots.push(start..j);
                start = j + 1;
            }
            j += 1;
        }
        if start < close || !slots.is_empty() {
            slots.push(start..close);
        }
        let m = self.method();
        let args = slots
            .iter()
            .map(|r| {
                if r.len() != 1 {
                    return ArgValue::Opaque;
                }
                match f.tok(r.start) {
                    Some(Tok::Str(s)) => ArgValue::Literal(s.clone()),
                    Some(Tok::Ident(name)) => m
                        .constants
                        .get(name)
                        .or_else(|| f.constants.get(name))
                        .map_or(ArgValue::Opaque, |s| ArgValue::Literal(s.clone())),
                    _ => ArgValue::Opaque,
                }
            })
            .collect();
        self.walk(open + 1..close)?;
        Ok((args, close))
    }

    fn walk_new(&mut self, i: usize, hi: usize) -> Step {
        let f = self.file;
        let mut k = i + 1;
        let mut segs: Vec<&str> = Vec::new();
        while let Some(s) = f.ident(k) {
            segs.push(s);
            if f.is_punct(k + 1, '.') {
                k += 2;
            } else {
                k += 1;
                break;
            }
        }
        let Some(&class) = segs.last() else {
            return Ok(i + 1);
        };
        if f.is_punct(k, '<') {
            let mut depth = 0;
            while k < hi {
                if f.is_punct(k, '<') {
                    depth += 1;
                } else if f.is_punct(k, '>') {
                    depth -= 1;
                    if depth == 0 {
                        k += 1;
                        break;
                    }
                }
                k += 1;
            }
        }
        if !f.is_punct(k, '(') {
            // array creation; its dimensions and initializer are walked normally
            return Ok(k);
        }
        if segs.len() > 1 && self.filter.covers_package(&segs[..segs.len() - 1].join(".")) {
            self.universe.add(class);
        }
        let (args, close) = self.walk_args(k)?;
        self.emit(class, "new", args);
        let mut next = close + 1;
        if f.is_punct(next, '{') {
            // anonymous class body
            let end = f.pairs[next].unwrap_or(hi);
            self.walk(next + 1..end)?;
            next = end + 1;
        }
        self.chain(next, hi, Some(class.to_string()))
    }

    /// Whether the name at `at` is declared here (`Type name(`) rather than called.
    fn is_declaration(&self, at: usize) -> bool {
        let f = self.file;
        match f.tok(at - 1) {
            Some(Tok::Ident(s)) => !is_keyword(s) || s == "void",
            Some(Tok::Punct(']')) => at >= 2 && f.is_punct(at - 2, '['),
            Some(Tok::Punct('>')) => f.type_before(at, 0).is_some(),
            _ => false,
        }
    }

    fn lookup_var(&self, name: &str) -> Option<String> {
        self.method()
            .declared_types
            .get(name)
            .or_else(|| self.file.fields.get(name))
            .cloned()
    }

    fn walk_name(&mut self, i: usize, hi: usize) -> Step {
        let f = self.file;
        let mut segs: Vec<&str> = vec![f.ident(i).unwrap()];
        let mut j = i + 1;
        let mut method_at = None;
        if f.is_punct(j, '(') {
            method_at = Some(i);
            segs.clear();
        } else {
            while j + 1 < hi && f.is_punct(j, '.') {
                let Some(s) = f.ident(j + 1) else { break };
                if f.is_punct(j + 2, '(') {
                    method_at = Some(j + 1);
                    break;
                }
                segs.push(s);
                j += 2;
            }
        }
        let Some(at) = method_at else {
            return Ok(j);
        };
        let name = f.ident(at).unwrap();
        let open = at + 1;

        let unqualified = segs.is_empty() || segs == ["this"];
        if unqualified {
            // a declaration such as `void run() {` inside an anonymous class
            if segs.is_empty() && at > 0 && self.is_declaration(at) {
                return Ok(at + 1);
            }
            let (_, close) = self.walk_args(open)?;
            let callee = f.methods.iter().position(|m| m.name == name);
            let ret = match callee {
                Some(c) if self.stack.contains(&c) => {
                    debug!("{}: recursive call to {name} not inlined", self.origin);
                    None
                }
                Some(c) => {
                    self.stack.push(c);
                    let body = f.methods[c].body.clone();
                    let r = self.walk(body);
                    self.stack.pop();
                    r?;
                    f.methods[c].return_type.clone()
                }
                None => None,
            };
            return self.chain(close + 1, hi, ret);
        }

        let receiver = if segs[0] == "this" {
            (segs.len() == 2)
                .then(|| self.file.fields.get(segs[1]).cloned())
                .flatten()
        } else if segs.len() == 1 {
            self.lookup_var(segs[0])
                .or_else(|| starts_upper(segs[0]).then(|| segs[0].to_string()))
        } else {
            let last = segs[segs.len() - 1];
            if starts_upper(last) {
                if self.filter.covers_package(&segs[..segs.len() - 1].join(".")) {
                    self.universe.add(last);
                }
                Some(last.to_string())
            } else {
                None
            }
        };
        let (args, close) = self.walk_args(open)?;
        match &receiver {
            Some(class) => self.emit(class, name, args),
            None if self.event_methods.contains(name) => warn!(
                "{}:{}: cannot resolve the receiver of {}.{name}(); call dropped",
                self.origin,
                f.tokens[at].line,
                segs.join(".")
            ),
            None => debug!("{}: unresolved receiver for {name}", self.origin),
        }
        let ret = receiver.and_then(|c| return_type(&c, name));
        self.chain(close + 1, hi, ret)
    }

    /// `.m(..).n(..)` after a call or constructor whose result type is `ty`.
    fn chain(&mut self, mut j: usize, hi: usize, mut ty: Option<String>) -> Step {
        let f = self.file;
        while j + 2 < hi && f.is_punct(j, '.') && f.ident(j + 1).is_some() && f.is_punct(j + 2, '(') {
            let name = f.ident(j + 1).unwrap();
            let (args, close) = self.walk_args(j + 2)?;
            match &ty {
                Some(class) => self.emit(class, name, args),
                None if self.event_methods.contains(name) => warn!(
                    "{}:{}: cannot resolve the receiver of chained {name}(); call dropped",
                    self.origin,
                    f.tokens[j + 1].line
                ),
                None => {}
            }
            ty = ty.and_then(|c| return_type(&c, name));
            j = close + 1;
        }
        Ok(j)
    }
}

/// Annotated sequences for every documented method of one file. Ids count
/// from 1 in method order; provenance records the method name.
pub fn extract_sequences(
    source: &str,
    pack: &RulePack,
    filter: &CorpusFilter,
    origin: &str,
) -> Result<Vec<AnnotatedSequence>> {
    let file = parse_java(source)?;
    let mut walker = Walker {
        file: &file,
        universe: Universe::new(pack, filter, &file.imports),
        event_methods: pack.event_methods(),
        filter,
        origin,
        stack: Vec::new(),
        out: Vec::new(),
    };
    let mut out = Vec::new();
    for (idx, m) in file.methods.iter().enumerate() {
        let Some(annotation) = &m.javadoc_first_line else {
            continue;
        };
        walker.out.clear();
        walker.stack = vec![idx];
        if let Err(e) = walker.walk(m.body.clone()) {
            warn!("{origin}: skipping method {}: {e}", m.name);
            continue;
        }
        if walker.out.is_empty() {
            continue;
        }
        let mut seq = CallSequence::new(std::mem::take(&mut walker.out));
        seq.provenance = Some(Provenance {
            repo: None,
            file: None,
            method: Some(m.name.clone()),
        });
        out.push(AnnotatedSequence::new(out.len() as u64 + 1, annotation, seq)?);
    }
    Ok(out)
}

/// Extracts every `.java` file under `root` that mentions a filter keyword.
/// Files are visited in sorted path order and ids are assigned from 1.
pub fn scan_corpus(root: impl AsRef<Path>, filter: &CorpusFilter, pack: &RulePack) -> Result<Dataset> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let name = root
        .file_name()
        .map_or_else(|| "corpus".to_string(), |n| n.to_string_lossy().into_owned());
    let mut entries = Vec::new();
    let mut matched = 0;
    for item in WalkDir::new(root).sort_by_file_name() {
        let item = match item {
            Ok(i) => i,
            Err(e) => {
                warn!("skipping unreadable entry: {e}");
                continue;
            }
        };
        let path = item.path();
        if !item.file_type().is_file() || path.extension().is_none_or(|x| x != "java") {
            continue;
        }
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                warn!("skipping {}: {e}", path.display());
                continue;
            }
        };
        if !filter.matches_text(&text) {
            continue;
        }
        matched += 1;
        let rel = path
            .strip_prefix(root)
            .unwrap_or(path)
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        match extract_sequences(&text, pack, filter, &rel) {
            Ok(found) => {
                for mut e in found {
                    e.id = entries.len() as u64 + 1;
                    if let Some(p) = e.sequence.provenance.as_mut() {
                        p.file = Some(rel.clone());
                    }
                    entries.push(e);
                }
            }
            Err(e) => warn!("skipping {rel}: {e}"),
        }
    }
    if matched == 0 {
        warn!("no Java files under {} mention {:?}", root.display(), filter.keywords);
    }
    Dataset::new(name, entries)
}
