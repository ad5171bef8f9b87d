//! ORDER expressions and the deterministic automata compiled from them.
//!
//! Expressions are regular expressions over event symbols. Precedence from
//! tightest to loosest: postfix `?` `*` `+`, sequence `,`, alternation `|`.
//! Compilation goes syntax tree -> Thompson NFA -> subset construction.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

/// A regular expression over event symbols (canonical alias indices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderExpr {
    Event(usize),
    Seq(Vec<OrderExpr>),
    Alt(Vec<OrderExpr>),
    Opt(Box<OrderExpr>),
    Star(Box<OrderExpr>),
    Plus(Box<OrderExpr>),
}

impl OrderExpr {
    pub fn alphabet(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<usize>) {
        match self {
            OrderExpr::Event(s) => {
                out.insert(*s);
            }
            OrderExpr::Seq(items) | OrderExpr::Alt(items) => items.iter().for_each(|e| e.collect_symbols(out)),
            OrderExpr::Opt(e) | OrderExpr::Star(e) | OrderExpr::Plus(e) => e.collect_symbols(out),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderParseError {
    UnknownName(String),
    Syntax(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Name(String),
    Comma,
    Bar,
    Quest,
    Star,
    Plus,
    Open,
    Close,
}

fn lex(text: &str) -> Result<Vec<Tok>, OrderParseError> {
    let mut toks = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            ',' | '|' | '?' | '*' | '+' | '(' | ')' => {
                chars.next();
                toks.push(match c {
                    ',' => Tok::Comma,
                    '|' => Tok::Bar,
                    '?' => Tok::Quest,
                    '*' => Tok::Star,
                    '+' => Tok::Plus,
                    '(' => Tok::Open,
                    _ => Tok::Close,
                });
            }
            c if c.is_alphanumeric() || c == '_' => {
                let mut name = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        name.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                toks.push(Tok::Name(name));
            }
            other => return Err(OrderParseError::Syntax(format!("unexpected character `{other}`"))),
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    names: &'a HashMap<String, OrderExpr>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn alt(&mut self) -> Result<OrderExpr, OrderParseError> {
        let mut items = vec![self.seq()?];
        while self.peek() == Some(&Tok::Bar) {
            self.pos += 1;
            items.push(self.seq()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            OrderExpr::Alt(items)
        })
    }

    fn seq(&mut self) -> Result<OrderExpr, OrderParseError> {
        let mut items = vec![self.postfix()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            items.push(self.postfix()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            OrderExpr::Seq(items)
        })
    }

    fn postfix(&mut self) -> Result<OrderExpr, OrderParseError> {
        let mut e = self.atom()?;
        loop {
            e = match self.peek() {
                Some(Tok::Quest) => OrderExpr::Opt(Box::new(e)),
                Some(Tok::Star) => OrderExpr::Star(Box::new(e)),
                Some(Tok::Plus) => OrderExpr::Plus(Box::new(e)),
                _ => return Ok(e),
            };
            self.pos += 1;
        }
    }

    fn atom(&mut self) -> Result<OrderExpr, OrderParseError> {
        match self.toks.get(self.pos).cloned() {
            Some(Tok::Name(n)) => {
                self.pos += 1;
                self.names.get(&n).cloned().ok_or(OrderParseError::UnknownName(n))
            }
            Some(Tok::Open) => {
                self.pos += 1;
                let e = self.alt()?;
                if self.peek() != Some(&Tok::Close) {
                    return Err(OrderParseError::Syntax("missing `)`".into()));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(t) => Err(OrderParseError::Syntax(format!("unexpected {t:?}"))),
            None => Err(OrderParseError::Syntax("unexpected end of expression".into())),
        }
    }
}

/// Parses an ORDER expression. `names` maps every usable identifier (event
/// aliases and aggregates) to its expansion.
pub fn parse_order(text: &str, names: &HashMap<String, OrderExpr>) -> Result<OrderExpr, OrderParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, names };
    let e = p.alt()?;
    if p.pos != p.toks.len() {
        return Err(OrderParseError::Syntax(format!("trailing {:?}", p.toks[p.pos])));
    }
    Ok(e)
}

#[derive(Default)]
struct Nfa {
    eps: Vec<Vec<usize>>,
    sym: Vec<Vec<(usize, usize)>>,
}

impl Nfa {
    fn state(&mut self) -> usize {
        self.eps.push(Vec::new());
        self.sym.push(Vec::new());
        self.eps.len() - 1
    }

    fn build(&mut self, e: &OrderExpr) -> (usize, usize) {
        match e {
            OrderExpr::Event(s) => {
                let (a, b) = (self.state(), self.state());
                self.sym[a].push((*s, b));
                (a, b)
            }
            OrderExpr::Seq(items) => {
                let start = self.state();
                let mut cur = start;
                for item in items {
                    let (s, e) = self.build(item);
                    self.eps[cur].push(s);
                    cur = e;
                }
                (start, cur)
            }
            OrderExpr::Alt(items) => {
                let (start, end) = (self.state(), self.state());
                for item in items {
                    let (s, e) = self.build(item);
                    self.eps[start].push(s);
                    self.eps[e].push(end);
                }
                (start, end)
            }
            OrderExpr::Opt(inner) => {
                let (s, e) = self.build(inner);
                self.eps[s].push(e);
                (s, e)
            }
            OrderExpr::Star(inner) => {
                let (start, end) = (self.state(), self.state());
                let (s, e) = self.build(inner);
                self.eps[start].push(s);
                self.eps[start].push(end);
                self.eps[e].push(s);
                self.eps[e].push(end);
                (start, end)
            }
            OrderExpr::Plus(inner) => {
                let (start, end) = (self.state(), self.state());
                let (s, e) = self.build(inner);
                self.eps[start].push(s);
                self.eps[e].push(s);
                self.eps[e].push(end);
                (start, end)
            }
        }
    }

    fn closure(&self, seed: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
        let mut set = BTreeSet::new();
        let mut stack: Vec<usize> = seed.into_iter().collect();
        while let Some(s) = stack.pop() {
            if set.insert(s) {
                stack.extend(self.eps[s].iter().copied());
            }
        }
        set
    }
}

/// Result of feeding a word to an automaton.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Run {
    /// Symbol at this word index had no transition.
    Diverged { at: usize },
    /// Whole word consumed; final state.
    Ended { state: usize },
}

/// A DFA over canonical alias indices. Missing transitions reject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderAutomaton {
    transitions: Vec<BTreeMap<usize, usize>>,
    accepting: Vec<bool>,
    alphabet: BTreeSet<usize>,
}

impl OrderAutomaton {
    pub const START: usize = 0;

    pub fn compile(expr: &OrderExpr) -> Self {
        let mut nfa = Nfa::default();
        let (nstart, nend) = nfa.build(expr);
        let alphabet = expr.alphabet();

        let mut ids: HashMap<BTreeSet<usize>, usize> = HashMap::new();
        let mut subsets = Vec::new();
        let mut transitions: Vec<BTreeMap<usize, usize>> = Vec::new();
        let mut queue = VecDeque::new();

        let start = nfa.closure([nstart]);
        ids.insert(start.clone(), 0);
        subsets.push(start.clone());
        transitions.push(BTreeMap::new());
        queue.push_back(start);

        while let Some(set) = queue.pop_front() {
            let from = ids[&set];
            for &a in &alphabet {
                let targets: Vec<usize> = set
                    .iter()
                    .flat_map(|&s| nfa.sym[s].iter())
                    .filter(|(sym, _)| *sym == a)
                    .map(|&(_, t)| t)
                    .collect();
                if targets.is_empty() {
                    continue;
                }
                let next = nfa.closure(targets);
                let to = match ids.get(&next) {
                    Some(&id) => id,
                    None => {
                        let id = subsets.len();
                        ids.insert(next.clone(), id);
                        subsets.push(next.clone());
                        transitions.push(BTreeMap::new());
                        queue.push_back(next);
                        id
                    }
                };
                transitions[from].insert(a, to);
            }
        }

        let accepting = subsets.iter().map(|s| s.contains(&nend)).collect();
        OrderAutomaton {
            transitions,
            accepting,
            alphabet,
        }
    }

    pub fn state_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn alphabet(&self) -> &BTreeSet<usize> {
        &self.alphabet
    }

    pub fn is_accepting(&self, state: usize) -> bool {
        self.accepting[state]
    }

    pub fn step(&self, state: usize, symbol: usize) -> Option<usize> {
        self.transitions[state].get(&symbol).copied()
    }

    pub fn run(&self, word: &[usize]) -> Run {
        let mut state = Self::START;
        for (i, &sym) in word.iter().enumerate() {
            match self.step(state, sym) {
                Some(next) => state = next,
                None => return Run::Diverged { at: i },
            }
        }
        Run::Ended { state }
    }

    pub fn accepts(&self, word: &[usize]) -> bool {
        matches!(self.run(word), Run::Ended { state } if self.accepting[state])
    }

    /// Shortest symbol string leading from `state` to an accepting state.
    /// Among equally short strings the one that is lexicographically smallest
    /// under `preference` (symbols listed first win) is returned. Symbols not
    /// in `preference` are tried last in numeric order.
    pub fn shortest_completion(&self, state: usize, preference: &[usize]) -> Option<Vec<usize>> {
        let mut order: Vec<usize> = preference
            .iter()
            .copied()
            .filter(|s| self.alphabet.contains(s))
            .collect();
        order.extend(self.alphabet.iter().filter(|s| !preference.contains(s)));

        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.state_count()];
        let mut seen = vec![false; self.state_count()];
        let mut queue = VecDeque::from([state]);
        seen[state] = true;
        while let Some(s) = queue.pop_front() {
            if self.accepting[s] {
                let mut path = Vec::new();
                let mut cur = s;
                while let Some((prev, sym)) = parent[cur] {
                    path.push(sym);
                    cur = prev;
                }
                path.reverse();
                return Some(path);
            }
            for &sym in &order {
                if let Some(t) = self.step(s, sym) {
                    if !seen[t] {
                        seen[t] = true;
                        parent[t] = Some((s, sym));
                        queue.push_back(t);
                    }
                }
            }
        }
        None
    }

    fn accept_reachable_without(&self, banned: Option<usize>) -> bool {
        let mut seen = vec![false; self.state_count()];
        let mut stack = vec![Self::START];
        seen[Self::START] = true;
        while let Some(s) = stack.pop() {
            if self.accepting[s] {
                return true;
            }
            for (&sym, &t) in &self.transitions[s] {
                if Some(sym) != banned && !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        false
    }

    /// Symbols occurring in every accepted word: deleting their transitions
    /// leaves no accepting state reachable from the start.
    pub fn mandatory_symbols(&self) -> BTreeSet<usize> {
        self.alphabet
            .iter()
            .copied()
            .filter(|&a| !self.accept_reachable_without(Some(a)))
            .collect()
    }

    pub fn language_is_empty(&self) -> bool {
        !self.accept_reachable_without(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(list: &[&str]) -> HashMap<String, OrderExpr> {
        list.iter()
            .enumerate()
            .map(|(i, n)| (n.to_string(), OrderExpr::Event(i)))
            .collect()
    }

    fn compile(text: &str, alias: &[&str]) -> OrderAutomaton {
        OrderAutomaton::compile(&parse_order(text, &names(alias)).unwrap())
    }

    #[test]
    fn sequence_then_star() {
        // a=0 b=1
        let dfa = compile("a, b*", &["a", "b"]);
        assert!(dfa.accepts(&[0]));
        assert!(dfa.accepts(&[0, 1]));
        assert!(dfa.accepts(&[0, 1, 1]));
        assert!(!dfa.accepts(&[1]));
        assert!(!dfa.accepts(&[1, 0]));
        assert!(!dfa.accepts(&[]));
    }

    #[test]
    fn grouped_alternation() {
        let dfa = compile("(a | b), c", &["a", "b", "c"]);
        assert!(dfa.accepts(&[0, 2]));
        assert!(dfa.accepts(&[1, 2]));
        assert!(!dfa.accepts(&[0, 1, 2]));
    }

    #[test]
    fn comma_binds_tighter_than_bar() {
        let dfa = compile("a, b | c", &["a", "b", "c"]);
        assert!(dfa.accepts(&[0, 1]));
        assert!(dfa.accepts(&[2]));
        assert!(!dfa.accepts(&[0, 2]));
    }

    #[test]
    fn plus_and_optional() {
        let dfa = compile("a+, b?", &["a", "b"]);
        assert!(dfa.accepts(&[0]));
        assert!(dfa.accepts(&[0, 0, 1]));
        assert!(!dfa.accepts(&[1]));
        assert!(!dfa.accepts(&[0, 1, 1]));
    }

    #[test]
    fn run_reports_divergence_index() {
        let dfa = compile("a, b, c", &["a", "b", "c"]);
        assert_eq!(dfa.run(&[0, 2]), Run::Diverged { at: 1 });
        assert!(matches!(dfa.run(&[0, 1]), Run::Ended { state } if !dfa.is_accepting(state)));
    }

    #[test]
    fn completion_prefers_declaration_order() {
        // g, i, (f | w): after "g i" both f and w complete; preference decides.
        let dfa = compile("g, i, (f | w)", &["g", "i", "f", "w"]);
        let Run::Ended { state } = dfa.run(&[0, 1]) else {
            panic!()
        };
        assert_eq!(dfa.shortest_completion(state, &[0, 1, 2, 3]), Some(vec![2]));
        assert_eq!(dfa.shortest_completion(state, &[3, 2]), Some(vec![3]));
        assert_eq!(
            dfa.shortest_completion(OrderAutomaton::START, &[0, 1, 2, 3]),
            Some(vec![0, 1, 2])
        );
    }

    #[test]
    fn completion_is_shortest() {
        let dfa = compile("a, (b, b, b | c)", &["a", "b", "c"]);
        let Run::Ended { state } = dfa.run(&[0]) else { panic!() };
        assert_eq!(dfa.shortest_completion(state, &[0, 1, 2]), Some(vec![2]));
    }

    #[test]
    fn mandatory_symbols() {
        let dfa = compile("n, g*, c", &["n", "g", "c"]);
        assert_eq!(dfa.mandatory_symbols(), BTreeSet::from([0, 2]));
        let dfa = compile("(a | b), c?", &["a", "b", "c"]);
        assert!(dfa.mandatory_symbols().is_empty());
    }

    #[test]
    fn syntax_errors() {
        let n = names(&["a", "b"]);
        assert_eq!(parse_order("a, x", &n), Err(OrderParseError::UnknownName("x".into())));
        assert!(matches!(parse_order("(a, b", &n), Err(OrderParseError::Syntax(_))));
        assert!(matches!(parse_order("a b", &n), Err(OrderParseError::Syntax(_))));
        assert!(matches!(parse_order("", &n), Err(OrderParseError::Syntax(_))));
        assert!(matches!(parse_order("a; b", &n), Err(OrderParseError::Syntax(_))));
    }
}
