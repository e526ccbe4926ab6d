//! One-way finite automata and transducers.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::search::{shortest_lex, CapExceeded};
use crate::words::{Alphabet, Symbol, Word};

/// Default cap on subset-construction states.
pub const DETERMINIZE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomataError {
    #[error("alphabets differ: {0} vs {1}")]
    AlphabetMismatch(String, String),
    #[error("symbol {0:?} is not in the alphabet")]
    UnknownSymbol(Symbol),
    #[error("unknown state {0}")]
    UnknownState(String),
    #[error("determinization exceeded {0} states")]
    DeterminizeCap(usize),
    #[error(transparent)]
    Cap(#[from] CapExceeded),
    #[error("malformed automaton: {0}")]
    Format(String),
    #[error("regex error at offset {offset}: {msg}")]
    Regex { offset: usize, msg: String },
}

/// Nondeterministic automaton with silent moves. States are `0..num_states()`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Nfa {
    alphabet: Alphabet,
    delta: Vec<Vec<(Option<Symbol>, usize)>>,
    initial: BTreeSet<usize>,
    finals: BTreeSet<usize>,
}

impl Nfa {
    pub fn new(alphabet: Alphabet) -> Self {
        Nfa {
            alphabet,
            delta: Vec::new(),
            initial: BTreeSet::new(),
            finals: BTreeSet::new(),
        }
    }

    pub fn add_state(&mut self) -> usize {
        self.delta.push(Vec::new());
        self.delta.len() - 1
    }

    pub fn add_transition(&mut self, from: usize, label: Option<Symbol>, to: usize) {
        debug_assert!(
            label.is_none_or(|c| self.alphabet.contains(c)),
            "foreign label {label:?}"
        );
        if !self.delta[from].contains(&(label, to)) {
            self.delta[from].push((label, to));
        }
    }

    pub fn set_initial(&mut self, q: usize) {
        self.initial.insert(q);
    }

    pub fn set_final(&mut self, q: usize) {
        self.finals.insert(q);
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn initial(&self) -> &BTreeSet<usize> {
        &self.initial
    }

    pub fn finals(&self) -> &BTreeSet<usize> {
        &self.finals
    }

    pub fn is_final(&self, q: usize) -> bool {
        self.finals.contains(&q)
    }

    pub fn successors(&self, q: usize) -> &[(Option<Symbol>, usize)] {
        &self.delta[q]
    }

    pub fn transitions(&self) -> impl Iterator<Item = (usize, Option<Symbol>, usize)> + '_ {
        self.delta
            .iter()
            .enumerate()
            .flat_map(|(p, out)| out.iter().map(move |&(l, q)| (p, l, q)))
    }

    pub fn num_transitions(&self) -> usize {
        self.delta.iter().map(Vec::len).sum()
    }

    /// The same language over a larger alphabet.
    pub fn with_alphabet(&self, alphabet: &Alphabet) -> Nfa {
        let mut a = self.clone();
        a.alphabet = self.alphabet.union(alphabet);
        a
    }

    pub fn eps_closure(&self, set: &mut BTreeSet<usize>) {
        let mut stack: Vec<usize> = set.iter().copied().collect();
        while let Some(p) = stack.pop() {
            for &(l, q) in &self.delta[p] {
                if l.is_none() && set.insert(q) {
                    stack.push(q);
                }
            }
        }
    }

    pub fn initial_closure(&self) -> BTreeSet<usize> {
        let mut s = self.initial.clone();
        self.eps_closure(&mut s);
        s
    }

    /// Symbol successors followed by the silent closure.
    pub fn step(&self, set: &BTreeSet<usize>, c: Symbol) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for &p in set {
            for &(l, q) in &self.delta[p] {
                if l == Some(c) {
                    out.insert(q);
                }
            }
        }
        self.eps_closure(&mut out);
        out
    }

    pub fn member(&self, w: &Word) -> bool {
        let mut cur = self.initial_closure();
        for c in w.iter() {
            if cur.is_empty() {
                return false;
            }
            cur = self.step(&cur, c);
        }
        cur.iter().any(|q| self.finals.contains(q))
    }

    /// A shortlex-least accepted word, or `None` when the language is empty.
    pub fn shortest_word(&self) -> Option<Word> {
        shortest_lex(
            self.initial.iter().copied(),
            |&q| self.delta[q].clone(),
            |q| self.finals.contains(q),
            usize::MAX,
        )
        .expect("no cap")
        .map(|f| f.word)
    }

    pub fn is_empty(&self) -> bool {
        self.shortest_word().is_none()
    }

    pub fn universal(alphabet: &Alphabet) -> Nfa {
        let mut a = Nfa::new(alphabet.clone());
        let q = a.add_state();
        a.set_initial(q);
        a.set_final(q);
        for c in alphabet.iter() {
            a.add_transition(q, Some(c), q);
        }
        a
    }

    pub fn empty_language(alphabet: &Alphabet) -> Nfa {
        let mut a = Nfa::new(alphabet.clone());
        let q = a.add_state();
        a.set_initial(q);
        a
    }

    pub fn singleton(alphabet: &Alphabet, w: &Word) -> Nfa {
        let mut a = Nfa::new(alphabet.clone());
        let mut q = a.add_state();
        a.set_initial(q);
        for c in w.iter() {
            let r = a.add_state();
            a.add_transition(q, Some(c), r);
            q = r;
        }
        a.set_final(q);
        a
    }

    /// Chain of `|w|+1` states with a self-loop on every symbol: accepts `{w}↑`.
    pub fn upward_closure(alphabet: &Alphabet, w: &Word) -> Nfa {
        let mut a = Nfa::new(alphabet.clone());
        let mut q = a.add_state();
        a.set_initial(q);
        for c in w.iter() {
            for d in alphabet.iter() {
                a.add_transition(q, Some(d), q);
            }
            let r = a.add_state();
            a.add_transition(q, Some(c), r);
            q = r;
        }
        for d in alphabet.iter() {
            a.add_transition(q, Some(d), q);
        }
        a.set_final(q);
        a
    }

    fn check_same_alphabet(&self, other: &Nfa) -> Result<(), AutomataError> {
        if self.alphabet != other.alphabet {
            return Err(AutomataError::AlphabetMismatch(
                self.alphabet.to_string(),
                other.alphabet.to_string(),
            ));
        }
        Ok(())
    }

    /// Asynchronous product: silent moves interleave, symbols synchronize.
    pub fn product(&self, other: &Nfa) -> Result<Nfa, AutomataError> {
        self.check_same_alphabet(other)?;
        let mut out = Nfa::new(self.alphabet.clone());
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut queue = VecDeque::new();
        let mut get = |out: &mut Nfa, queue: &mut VecDeque<(usize, usize)>, k: (usize, usize)| {
            *index.entry(k).or_insert_with(|| {
                queue.push_back(k);
                out.add_state()
            })
        };
        for &p in &self.initial {
            for &q in &other.initial {
                let s = get(&mut out, &mut queue, (p, q));
                out.set_initial(s);
            }
        }
        while let Some((p, q)) = queue.pop_front() {
            let s = get(&mut out, &mut queue, (p, q));
            if self.is_final(p) && other.is_final(q) {
                out.set_final(s);
            }
            for &(l, p2) in &self.delta[p] {
                match l {
                    None => {
                        let t = get(&mut out, &mut queue, (p2, q));
                        out.add_transition(s, None, t);
                    }
                    Some(c) => {
                        for &(m, q2) in &other.delta[q] {
                            if m == Some(c) {
                                let t = get(&mut out, &mut queue, (p2, q2));
                                out.add_transition(s, Some(c), t);
                            }
                        }
                    }
                }
            }
            for &(m, q2) in &other.delta[q] {
                if m.is_none() {
                    let t = get(&mut out, &mut queue, (p, q2));
                    out.add_transition(s, None, t);
                }
            }
        }
        Ok(out)
    }

    pub fn union(&self, other: &Nfa) -> Result<Nfa, AutomataError> {
        self.check_same_alphabet(other)?;
        let mut out = self.clone();
        let shift = out.num_states();
        for _ in 0..other.num_states() {
            out.add_state();
        }
        for (p, l, q) in other.transitions() {
            out.add_transition(p + shift, l, q + shift);
        }
        for &q in &other.initial {
            out.set_initial(q + shift);
        }
        for &q in &other.finals {
            out.set_final(q + shift);
        }
        Ok(out)
    }

    pub fn concat(&self, other: &Nfa) -> Result<Nfa, AutomataError> {
        self.check_same_alphabet(other)?;
        let mut out = self.clone();
        out.finals.clear();
        let shift = out.num_states();
        for _ in 0..other.num_states() {
            out.add_state();
        }
        for (p, l, q) in other.transitions() {
            out.add_transition(p + shift, l, q + shift);
        }
        for &f in &self.finals {
            for &i in &other.initial {
                out.add_transition(f, None, i + shift);
            }
        }
        for &q in &other.finals {
            out.set_final(q + shift);
        }
        Ok(out)
    }

    pub fn star(&self) -> Nfa {
        let mut out = self.clone();
        let hub = out.add_state();
        for &i in &self.initial {
            out.add_transition(hub, None, i);
        }
        for &f in &self.finals {
            out.add_transition(f, None, hub);
        }
        out.initial = [hub].into();
        out.finals = [hub].into();
        out
    }

    /// Equivalent automaton without silent moves, on the same states.
    pub fn remove_epsilon(&self) -> Nfa {
        let mut out = Nfa::new(self.alphabet.clone());
        for _ in 0..self.num_states() {
            out.add_state();
        }
        for p in 0..self.num_states() {
            let mut cl = BTreeSet::from([p]);
            self.eps_closure(&mut cl);
            for &r in &cl {
                if self.is_final(r) {
                    out.set_final(p);
                }
                for &(l, q) in &self.delta[r] {
                    if let Some(c) = l {
                        out.add_transition(p, Some(c), q);
                    }
                }
            }
        }
        out.initial = self.initial.clone();
        out
    }

    /// Subset construction; the result is complete.
    pub fn determinize(&self, cap: usize) -> Result<Dfa, AutomataError> {
        let syms = self.alphabet.symbols();
        let start = self.initial_closure();
        let mut index: HashMap<BTreeSet<usize>, usize> = HashMap::new();
        let mut sets: Vec<BTreeSet<usize>> = vec![start.clone()];
        index.insert(start, 0);
        let mut trans: Vec<Vec<usize>> = Vec::new();
        let mut i = 0;
        while i < sets.len() {
            let mut row = Vec::with_capacity(syms.len());
            for &c in &syms {
                let next = self.step(&sets[i], c);
                let id = match index.get(&next) {
                    Some(&id) => id,
                    None => {
                        if sets.len() >= cap {
                            return Err(AutomataError::DeterminizeCap(cap));
                        }
                        sets.push(next.clone());
                        index.insert(next, sets.len() - 1);
                        sets.len() - 1
                    }
                };
                row.push(id);
            }
            trans.push(row);
            i += 1;
        }
        let finals = sets.iter().map(|s| s.iter().any(|q| self.is_final(*q))).collect();
        Ok(Dfa {
            symbols: syms,
            trans,
            finals,
            initial: 0,
        })
    }

    pub fn complement(&self, cap: usize) -> Result<Nfa, AutomataError> {
        Ok(self.determinize(cap)?.complement().to_nfa())
    }

    /// Thompson construction for the regex-lite syntax: symbols, `|`, `*`, `+`, `?`,
    /// parentheses, `.` for any symbol, `ε` and `∅`.
    pub fn from_regex(pattern: &str, alphabet: &Alphabet) -> Result<Nfa, AutomataError> {
        let chars: Vec<(usize, char)> = pattern.char_indices().filter(|(_, c)| !c.is_whitespace()).collect();
        let mut p = RegexParser {
            chars,
            pos: 0,
            alphabet,
            len: pattern.len(),
        };
        let a = p.alt()?;
        if p.pos < p.chars.len() {
            return Err(p.error("unexpected character"));
        }
        Ok(a)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "states": (0..self.num_states()).collect::<Vec<_>>(),
            "alphabet": self.alphabet,
            "initial": self.initial,
            "final": self.finals,
            "transitions": self.transitions().map(|(p, l, q)| json!([p, l.map(String::from).unwrap_or_default(), q])).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Nfa, AutomataError> {
        let alphabet = parse_alphabet(v.get("alphabet"))?;
        let states = StateNames::from_json(v)?;
        let mut a = Nfa::new(alphabet);
        for _ in 0..states.len() {
            a.add_state();
        }
        for q in states.list(v.get("initial"))? {
            a.set_initial(q);
        }
        for q in states.list(v.get("final"))? {
            a.set_final(q);
        }
        for t in as_array(v.get("transitions"), "transitions")? {
            let parts = t
                .as_array()
                .filter(|p| p.len() == 3)
                .ok_or_else(|| AutomataError::Format(format!("bad transition {t}")))?;
            let p = states.get(&parts[0])?;
            let l = parse_label(&parts[1], &a.alphabet)?;
            let q = states.get(&parts[2])?;
            a.add_transition(p, l, q);
        }
        Ok(a)
    }
}

impl fmt::Display for Nfa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "nfa over {} with {} states, initial {:?}, final {:?}",
            self.alphabet,
            self.num_states(),
            self.initial,
            self.finals
        )?;
        for (p, l, q) in self.transitions() {
            writeln!(f, "  {p} -{}-> {q}", l.map(String::from).unwrap_or("ε".into()))?;
        }
        Ok(())
    }
}

/// Complete deterministic automaton; `trans[q][i]` follows `symbols[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dfa {
    pub symbols: Vec<Symbol>,
    pub trans: Vec<Vec<usize>>,
    pub finals: Vec<bool>,
    pub initial: usize,
}

impl Dfa {
    pub fn num_states(&self) -> usize {
        self.trans.len()
    }

    pub fn symbol_index(&self, c: Symbol) -> Option<usize> {
        self.symbols.binary_search(&c).ok()
    }

    pub fn step(&self, q: usize, c: Symbol) -> Option<usize> {
        self.symbol_index(c).map(|i| self.trans[q][i])
    }

    pub fn accepts(&self, w: &Word) -> bool {
        let mut q = self.initial;
        for c in w.iter() {
            match self.step(q, c) {
                Some(r) => q = r,
                None => return false,
            }
        }
        self.finals[q]
    }

    pub fn complement(&self) -> Dfa {
        let mut d = self.clone();
        for f in d.finals.iter_mut() {
            *f = !*f;
        }
        d
    }

    /// States from which no final state is reachable.
    pub fn dead_states(&self) -> Vec<bool> {
        let n = self.num_states();
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (p, row) in self.trans.iter().enumerate() {
            for &q in row {
                rev[q].push(p);
            }
        }
        let mut live = self.finals.clone();
        let mut stack: Vec<usize> = (0..n).filter(|&q| live[q]).collect();
        while let Some(q) = stack.pop() {
            for &p in &rev[q] {
                if !live[p] {
                    live[p] = true;
                    stack.push(p);
                }
            }
        }
        live.into_iter().map(|l| !l).collect()
    }

    /// Moore partition refinement; unreachable states are dropped first.
    pub fn minimize(&self) -> Dfa {
        let n = self.num_states();
        let mut reach = vec![false; n];
        let mut stack = vec![self.initial];
        reach[self.initial] = true;
        while let Some(q) = stack.pop() {
            for &r in &self.trans[q] {
                if !reach[r] {
                    reach[r] = true;
                    stack.push(r);
                }
            }
        }
        let mut class: Vec<usize> = (0..n).map(|q| usize::from(self.finals[q])).collect();
        loop {
            let mut sigs: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
            let mut next = vec![0; n];
            for q in (0..n).filter(|&q| reach[q]) {
                let sig = (class[q], self.trans[q].iter().map(|&r| class[r]).collect());
                let k = sigs.len();
                next[q] = *sigs.entry(sig).or_insert(k);
            }
            let before = (0..n)
                .filter(|&q| reach[q])
                .map(|q| class[q])
                .collect::<BTreeSet<_>>()
                .len();
            class = next;
            if sigs.len() == before {
                break;
            }
        }
        let count = (0..n)
            .filter(|&q| reach[q])
            .map(|q| class[q])
            .max()
            .map_or(0, |m| m + 1);
        let mut trans = vec![Vec::new(); count];
        let mut finals = vec![false; count];
        for q in (0..n).filter(|&q| reach[q]) {
            trans[class[q]] = self.trans[q].iter().map(|&r| class[r]).collect();
            finals[class[q]] = self.finals[q];
        }
        Dfa {
            symbols: self.symbols.clone(),
            trans,
            finals,
            initial: class[self.initial],
        }
    }

    pub fn to_nfa(&self) -> Nfa {
        let mut a = Nfa::new(Alphabet::new(self.symbols.iter().copied()));
        for _ in 0..self.num_states() {
            a.add_state();
        }
        for (p, row) in self.trans.iter().enumerate() {
            for (i, &q) in row.iter().enumerate() {
                a.add_transition(p, Some(self.symbols[i]), q);
            }
            if self.finals[p] {
                a.set_final(p);
            }
        }
        a.set_initial(self.initial);
        a
    }
}

struct RegexParser<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    alphabet: &'a Alphabet,
    len: usize,
}

impl RegexParser<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|p| p.1)
    }

    fn error(&self, msg: &str) -> AutomataError {
        AutomataError::Regex {
            offset: self.chars.get(self.pos).map_or(self.len, |p| p.0),
            msg: msg.to_string(),
        }
    }

    fn alt(&mut self) -> Result<Nfa, AutomataError> {
        let mut a = self.concat()?;
        while self.peek() == Some('|') {
            self.pos += 1;
            let b = self.concat()?;
            a = a.union(&b)?;
        }
        Ok(a)
    }

    fn concat(&mut self) -> Result<Nfa, AutomataError> {
        let mut a = Nfa::singleton(self.alphabet, &Word::empty());
        while let Some(c) = self.peek() {
            if c == '|' || c == ')' {
                break;
            }
            let b = self.repeat()?;
            a = a.concat(&b)?;
        }
        Ok(a)
    }

    fn repeat(&mut self) -> Result<Nfa, AutomataError> {
        let mut a = self.atom()?;
        while let Some(c) = self.peek() {
            match c {
                '*' => a = a.star(),
                '+' => a = a.concat(&a.star())?,
                '?' => a = a.union(&Nfa::singleton(self.alphabet, &Word::empty()))?,
                _ => break,
            }
            self.pos += 1;
        }
        Ok(a)
    }

    fn atom(&mut self) -> Result<Nfa, AutomataError> {
        let c = self.peek().ok_or_else(|| self.error("unexpected end"))?;
        match c {
            '(' => {
                self.pos += 1;
                let a = self.alt()?;
                if self.peek() != Some(')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(a)
            }
            'ε' => {
                self.pos += 1;
                Ok(Nfa::singleton(self.alphabet, &Word::empty()))
            }
            '∅' => {
                self.pos += 1;
                Ok(Nfa::empty_language(self.alphabet))
            }
            '.' => {
                self.pos += 1;
                let mut a = Nfa::new(self.alphabet.clone());
                let (p, q) = (a.add_state(), a.add_state());
                a.set_initial(p);
                a.set_final(q);
                for d in self.alphabet.iter() {
                    a.add_transition(p, Some(d), q);
                }
                Ok(a)
            }
            '*' | '+' | '?' | '|' | ')' => Err(self.error("misplaced operator")),
            _ => {
                let sym = if c == '\\' {
                    self.pos += 1;
                    self.peek().ok_or_else(|| self.error("dangling escape"))?
                } else {
                    c
                };
                if !self.alphabet.contains(sym) {
                    return Err(self.error(&format!("symbol {sym:?} is not in the alphabet")));
                }
                self.pos += 1;
                Ok(Nfa::singleton(self.alphabet, &Word::new(vec![sym])))
            }
        }
    }
}

fn as_array<'a>(v: Option<&'a Value>, what: &str) -> Result<&'a Vec<Value>, AutomataError> {
    v.and_then(Value::as_array)
        .ok_or_else(|| AutomataError::Format(format!("missing array {what:?}")))
}

pub(crate) fn parse_symbol(v: &Value) -> Result<Symbol, AutomataError> {
    let s = v
        .as_str()
        .ok_or_else(|| AutomataError::Format(format!("symbol {v} is not a string")))?;
    let mut it = s.chars();
    match (it.next(), it.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(AutomataError::Format(format!(
            "symbol {s:?} must be exactly one character"
        ))),
    }
}

pub(crate) fn parse_alphabet(v: Option<&Value>) -> Result<Alphabet, AutomataError> {
    let mut out = Alphabet::default();
    for s in as_array(v, "alphabet")? {
        out.insert(parse_symbol(s)?);
    }
    Ok(out)
}

fn parse_label(v: &Value, alphabet: &Alphabet) -> Result<Option<Symbol>, AutomataError> {
    if v.as_str() == Some("") {
        return Ok(None);
    }
    let c = parse_symbol(v)?;
    if !alphabet.contains(c) {
        return Err(AutomataError::UnknownSymbol(c));
    }
    Ok(Some(c))
}

/// Maps state names (strings or numbers) to dense indices in declaration order.
struct StateNames(HashMap<String, usize>);

impl StateNames {
    fn from_json(v: &Value) -> Result<Self, AutomataError> {
        let mut m = HashMap::new();
        for s in as_array(v.get("states"), "states")? {
            let k = Self::key(s)?;
            let n = m.len();
            m.entry(k).or_insert(n);
        }
        Ok(StateNames(m))
    }

    fn key(v: &Value) -> Result<String, AutomataError> {
        match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            _ => Err(AutomataError::Format(format!("bad state name {v}"))),
        }
    }

    fn len(&self) -> usize {
        self.0.len()
    }

    fn get(&self, v: &Value) -> Result<usize, AutomataError> {
        let k = Self::key(v)?;
        self.0.get(&k).copied().ok_or(AutomataError::UnknownState(k))
    }

    fn list(&self, v: Option<&Value>) -> Result<Vec<usize>, AutomataError> {
        match v {
            None => Ok(vec![]),
            Some(v) => as_array(Some(v), "state list")?.iter().map(|s| self.get(s)).collect(),
        }
    }
}

/// One transducer transition: reads `inp` from the input tape and writes `out`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NftTrans {
    pub from: usize,
    pub inp: Option<Symbol>,
    pub out: Option<Symbol>,
    pub to: usize,
}

/// Finite transducer. Its relation holds pairs `(output, input)`: a constraint
/// `(x, t) ∈ R(T)` relates the value of `x` to an output of `T` on the value of `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Nft {
    in_alphabet: Alphabet,
    out_alphabet: Alphabet,
    delta: Vec<Vec<NftTrans>>,
    initial: BTreeSet<usize>,
    finals: BTreeSet<usize>,
}

impl Nft {
    pub fn new(in_alphabet: Alphabet, out_alphabet: Alphabet) -> Self {
        Nft {
            in_alphabet,
            out_alphabet,
            delta: Vec::new(),
            initial: BTreeSet::new(),
            finals: BTreeSet::new(),
        }
    }

    pub fn add_state(&mut self) -> usize {
        self.delta.push(Vec::new());
        self.delta.len() - 1
    }

    pub fn add_transition(&mut self, from: usize, inp: Option<Symbol>, out: Option<Symbol>, to: usize) {
        debug_assert!(inp.is_none_or(|c| self.in_alphabet.contains(c)));
        debug_assert!(out.is_none_or(|c| self.out_alphabet.contains(c)));
        let t = NftTrans { from, inp, out, to };
        if !self.delta[from].contains(&t) {
            self.delta[from].push(t);
        }
    }

    pub fn set_initial(&mut self, q: usize) {
        self.initial.insert(q);
    }

    pub fn set_final(&mut self, q: usize) {
        self.finals.insert(q);
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn in_alphabet(&self) -> &Alphabet {
        &self.in_alphabet
    }

    pub fn out_alphabet(&self) -> &Alphabet {
        &self.out_alphabet
    }

    pub fn initial(&self) -> &BTreeSet<usize> {
        &self.initial
    }

    pub fn finals(&self) -> &BTreeSet<usize> {
        &self.finals
    }

    pub fn is_final(&self, q: usize) -> bool {
        self.finals.contains(&q)
    }

    pub fn successors(&self, q: usize) -> &[NftTrans] {
        &self.delta[q]
    }

    pub fn transitions(&self) -> impl Iterator<Item = &NftTrans> {
        self.delta.iter().flatten()
    }

    /// Same relation, with both alphabets enlarged.
    pub fn with_alphabets(&self, inp: &Alphabet, out: &Alphabet) -> Nft {
        let mut t = self.clone();
        t.in_alphabet = t.in_alphabet.union(inp);
        t.out_alphabet = t.out_alphabet.union(out);
        t
    }

    /// One state with `(a, a)` loops.
    pub fn identity(alphabet: &Alphabet) -> Nft {
        let mut t = Nft::new(alphabet.clone(), alphabet.clone());
        let q = t.add_state();
        t.set_initial(q);
        t.set_final(q);
        for c in alphabet.iter() {
            t.add_transition(q, Some(c), Some(c), q);
        }
        t
    }

    /// All pairs of distinct words.
    pub fn not_equal(alphabet: &Alphabet) -> Nft {
        let mut t = Nft::new(alphabet.clone(), alphabet.clone());
        let same = t.add_state();
        let differ = t.add_state();
        let out_longer = t.add_state();
        let in_longer = t.add_state();
        t.set_initial(same);
        for q in [differ, out_longer, in_longer] {
            t.set_final(q);
        }
        for c in alphabet.iter() {
            t.add_transition(same, Some(c), Some(c), same);
            t.add_transition(same, Some(c), None, in_longer);
            t.add_transition(in_longer, Some(c), None, in_longer);
            t.add_transition(same, None, Some(c), out_longer);
            t.add_transition(out_longer, None, Some(c), out_longer);
            t.add_transition(differ, Some(c), None, differ);
            t.add_transition(differ, None, Some(c), differ);
            for d in alphabet.iter() {
                if c != d {
                    t.add_transition(same, Some(c), Some(d), differ);
                }
            }
        }
        t
    }

    /// Decides `(out, inp) ∈ R(T)` by search over `(state, i, j)`.
    pub fn member(&self, out: &Word, inp: &Word) -> bool {
        let (o, w) = (out.symbols(), inp.symbols());
        let mut seen: HashSet<(usize, usize, usize)> = HashSet::new();
        let mut stack: Vec<(usize, usize, usize)> = self.initial.iter().map(|&q| (q, 0, 0)).collect();
        while let Some(cfg @ (q, i, j)) = stack.pop() {
            if !seen.insert(cfg) {
                continue;
            }
            if i == w.len() && j == o.len() && self.is_final(q) {
                return true;
            }
            for t in &self.delta[q] {
                let ni = match t.inp {
                    None => i,
                    Some(c) if i < w.len() && w[i] == c => i + 1,
                    _ => continue,
                };
                let nj = match t.out {
                    None => j,
                    Some(c) if j < o.len() && o[j] == c => j + 1,
                    _ => continue,
                };
                stack.push((t.to, ni, nj));
            }
        }
        false
    }

    /// All outputs of length at most `max_len` on input `inp`.
    pub fn outputs(&self, inp: &Word, max_len: usize) -> BTreeSet<Word> {
        let w = inp.symbols();
        let mut seen: HashSet<(usize, usize, Vec<Symbol>)> = HashSet::new();
        let mut stack: Vec<(usize, usize, Vec<Symbol>)> = self.initial.iter().map(|&q| (q, 0, Vec::new())).collect();
        let mut out = BTreeSet::new();
        while let Some(cfg) = stack.pop() {
            if seen.contains(&cfg) {
                continue;
            }
            seen.insert(cfg.clone());
            let (q, i, o) = cfg;
            if i == w.len() && self.is_final(q) {
                out.insert(Word::new(o.clone()));
            }
            for t in &self.delta[q] {
                let ni = match t.inp {
                    None => i,
                    Some(c) if i < w.len() && w[i] == c => i + 1,
                    _ => continue,
                };
                let mut no = o.clone();
                if let Some(c) = t.out {
                    if no.len() == max_len {
                        continue;
                    }
                    no.push(c);
                }
                stack.push((t.to, ni, no));
            }
        }
        out
    }

    /// True iff no input of length at most `max_len` has two outputs.
    /// Outputs are explored up to `out_cap` symbols.
    pub fn functional_upto(&self, max_len: usize, out_cap: usize) -> Result<(), (Word, Word, Word)> {
        for w in self.in_alphabet.words_upto(max_len) {
            let outs = self.outputs(&w, out_cap);
            let mut it = outs.into_iter();
            if let (Some(a), Some(b)) = (it.next(), it.next()) {
                return Err((w, a, b));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let lab = |c: Option<Symbol>| c.map(String::from).unwrap_or_default();
        json!({
            "states": (0..self.num_states()).collect::<Vec<_>>(),
            "alphabet": self.in_alphabet,
            "output_alphabet": self.out_alphabet,
            "initial": self.initial,
            "final": self.finals,
            "transitions": self.transitions().map(|t| json!([t.from, [lab(t.inp), lab(t.out)], t.to])).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Nft, AutomataError> {
        let in_alphabet = parse_alphabet(v.get("alphabet"))?;
        let out_alphabet = match v.get("output_alphabet") {
            Some(_) => parse_alphabet(v.get("output_alphabet"))?,
            None => in_alphabet.clone(),
        };
        let states = StateNames::from_json(v)?;
        let mut t = Nft::new(in_alphabet, out_alphabet);
        for _ in 0..states.len() {
            t.add_state();
        }
        for q in states.list(v.get("initial"))? {
            t.set_initial(q);
        }
        for q in states.list(v.get("final"))? {
            t.set_final(q);
        }
        for tr in as_array(v.get("transitions"), "transitions")? {
            let bad = || AutomataError::Format(format!("bad transition {tr}"));
            let parts = tr.as_array().filter(|p| p.len() == 3).ok_or_else(bad)?;
            let label = parts[1].as_array().filter(|l| l.len() == 2).ok_or_else(bad)?;
            let p = states.get(&parts[0])?;
            let inp = parse_label(&label[0], &t.in_alphabet)?;
            let out = parse_label(&label[1], &t.out_alphabet)?;
            let q = states.get(&parts[2])?;
            t.add_transition(p, inp, out, q);
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Alphabet {
        Alphabet::from_str("ab")
    }

    fn re(p: &str) -> Nfa {
        Nfa::from_regex(p, &ab()).unwrap()
    }

    #[test]
    fn member_examples() {
        let a_star = re("a*");
        assert!(a_star.member(&Word::empty()));
        assert!(!a_star.member(&Word::from("b")));
        let ef = Nfa::from_regex("(e|f)*", &Alphabet::from_str("aef")).unwrap();
        assert!(ef.member(&Word::from("ef")));
    }

    #[test]
    fn emptiness_examples() {
        assert_eq!(Nfa::empty_language(&ab()).shortest_word(), None);
        assert_eq!(re("a*").shortest_word(), Some(Word::empty()));
        let p = re("ab*").product(&re("a*b")).unwrap();
        assert_eq!(p.shortest_word(), Some(Word::from("ab")));
    }

    #[test]
    fn product_examples() {
        let p = re("ab*").product(&re("ba*")).unwrap();
        assert!(!p.member(&Word::from("a")));
        assert!(p.is_empty());
        let q = re("a*").product(&Nfa::universal(&ab())).unwrap();
        for w in ab().words_upto(4) {
            assert_eq!(q.member(&w), re("a*").member(&w));
        }
    }

    #[test]
    fn upward_closure_examples() {
        let u = Nfa::upward_closure(&ab(), &Word::from("ab"));
        assert_eq!(u.num_states(), 3);
        assert!(u.member(&Word::from("bab")));
        assert!(!u.member(&Word::from("ba")));
        let sig = Alphabet::from_str("aef#");
        let v = Nfa::upward_closure(&sig, &Word::from("a#"));
        assert!(v.member(&Word::from("ea#f")));
        assert!(!v.member(&Word::from("#a")));
    }

    #[test]
    fn complement_examples() {
        let c = Nfa::universal(&ab()).complement(DETERMINIZE_CAP).unwrap();
        assert!(c.is_empty());
        let d = Nfa::upward_closure(&ab(), &Word::from("a"))
            .complement(DETERMINIZE_CAP)
            .unwrap();
        for w in ab().words_upto(4) {
            assert_eq!(d.member(&w), w.iter().all(|c| c == 'b'));
        }
    }

    #[test]
    fn determinize_cap_is_reported() {
        // (a|b)*a(a|b)^4 needs 32 subset states
        let a = re("(a|b)*a(a|b)(a|b)(a|b)(a|b)");
        assert_eq!(a.determinize(8).unwrap_err(), AutomataError::DeterminizeCap(8));
        let m = a.determinize(100).unwrap().minimize();
        assert_eq!(m.num_states(), 32);
    }

    #[test]
    fn regex_errors() {
        assert!(Nfa::from_regex("(a", &ab()).is_err());
        assert!(Nfa::from_regex("c", &ab()).is_err());
        assert!(Nfa::from_regex("*", &ab()).is_err());
        assert!(Nfa::from_regex("", &ab()).unwrap().member(&Word::empty()));
        assert!(Nfa::from_regex("∅", &ab()).unwrap().is_empty());
    }

    #[test]
    fn transducer_examples() {
        let id = Nft::identity(&ab());
        assert!(id.member(&Word::from("ab"), &Word::from("ab")));
        assert!(!id.member(&Word::from("ab"), &Word::from("ba")));
        let mut t = Nft::new(ab(), ab());
        let (p, q) = (t.add_state(), t.add_state());
        t.set_initial(p);
        t.set_final(q);
        t.add_transition(p, Some('b'), Some('a'), q);
        assert!(t.member(&Word::from("a"), &Word::from("b")));
        assert!(!t.member(&Word::from("b"), &Word::from("a")));
    }

    #[test]
    fn not_equal_is_inequality() {
        let ne = Nft::not_equal(&ab());
        let words = ab().words_upto(3);
        for u in &words {
            for v in &words {
                assert_eq!(ne.member(u, v), u != v, "{u} {v}");
            }
        }
    }

    #[test]
    fn json_roundtrip() {
        let a = re("a(b|a)*");
        let back = Nfa::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
        let t = Nft::not_equal(&ab());
        assert_eq!(Nft::from_json(&t.to_json()).unwrap(), t);
        let named = serde_json::json!({
            "states": ["p", "q"], "alphabet": ["a"], "initial": ["p"], "final": ["q"],
            "transitions": [["p", "a", "q"], ["q", "", "p"]]
        });
        let n = Nfa::from_json(&named).unwrap();
        assert!(n.member(&Word::from("aa")));
        assert!(!n.member(&Word::empty()));
    }
}
