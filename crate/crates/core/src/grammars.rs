//! Context-free grammars: normal forms, order relations and closure grammars.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::automata::parse_symbol;
use crate::words::{Alphabet, Symbol, Word};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("grammar is not in Chomsky normal form")]
    NotCnf,
    #[error("the empty word is in the language; the upward grammar needs an ε-free core")]
    EpsilonInLanguage,
    #[error("generation budget of {0} words exceeded")]
    Budget(usize),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("malformed grammar: {0}")]
    Format(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sym {
    T(Symbol),
    N(usize),
}

/// A context-free grammar with named nonterminals `0..num_nonterminals()`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cfg {
    names: Vec<String>,
    start: usize,
    productions: Vec<(usize, Vec<Sym>)>,
    terminals: Alphabet,
}

/// `lt1[b][a]` is `B <₁ A`; `lt2[b][a]` is `B <₂ A`; `eq1` is `lt1` intersected with its converse.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderRelations {
    pub lt1: Vec<Vec<bool>>,
    pub lt2: Vec<Vec<bool>>,
    pub eq1: Vec<Vec<bool>>,
}

impl Cfg {
    pub fn new(terminals: Alphabet, start: &str) -> Self {
        Cfg {
            names: vec![start.to_string()],
            start: 0,
            productions: Vec::new(),
            terminals,
        }
    }

    /// Index of the nonterminal called `name`, created on first use.
    pub fn nonterminal(&mut self, name: &str) -> usize {
        if let Some(i) = self.names.iter().position(|n| n == name) {
            return i;
        }
        self.names.push(name.to_string());
        self.names.len() - 1
    }

    /// A new nonterminal whose name starts with `base`.
    pub fn fresh(&mut self, base: &str) -> usize {
        let mut name = base.to_string();
        while self.names.contains(&name) {
            name.push('\'');
        }
        self.names.push(name);
        self.names.len() - 1
    }

    pub fn add(&mut self, lhs: usize, rhs: Vec<Sym>) {
        debug_assert!(rhs.iter().all(|s| match s {
            Sym::T(c) => self.terminals.contains(*c),
            Sym::N(n) => *n < self.names.len(),
        }));
        if !self.productions.iter().any(|(l, r)| *l == lhs && *r == rhs) {
            self.productions.push((lhs, rhs));
        }
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn terminals(&self) -> &Alphabet {
        &self.terminals
    }

    pub fn num_nonterminals(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, n: usize) -> &str {
        &self.names[n]
    }

    pub fn nonterminal_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn productions(&self) -> &[(usize, Vec<Sym>)] {
        &self.productions
    }

    pub fn productions_of(&self, a: usize) -> impl Iterator<Item = &Vec<Sym>> {
        self.productions.iter().filter(move |(l, _)| *l == a).map(|(_, r)| r)
    }

    /// The same grammar over a larger terminal alphabet.
    pub fn with_terminals(&self, extra: &Alphabet) -> Cfg {
        let mut g = self.clone();
        g.terminals = g.terminals.union(extra);
        g
    }

    pub fn has_epsilon_start(&self) -> bool {
        self.productions_of(self.start).any(|r| r.is_empty())
    }

    /// Parses rules such as `S -> a S b | ε; T -> b`.
    ///
    /// A token naming a left-hand side is a nonterminal; any other token is split into terminals.
    pub fn parse(text: &str) -> Result<Cfg, GrammarError> {
        let mut rules: Vec<(String, Vec<Vec<String>>)> = Vec::new();
        for line in text.split([';', '\n']) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (lhs, rhs) = line
                .split_once("->")
                .or_else(|| line.split_once('→'))
                .ok_or_else(|| GrammarError::Format(format!("missing '->' in {line:?}")))?;
            let alts = rhs
                .split('|')
                .map(|alt| alt.split_whitespace().filter(|t| *t != "ε").map(String::from).collect())
                .collect();
            rules.push((lhs.trim().to_string(), alts));
        }
        Self::from_rules(rules, None)
    }

    fn from_rules(rules: Vec<(String, Vec<Vec<String>>)>, declared: Option<Alphabet>) -> Result<Cfg, GrammarError> {
        let first = rules.first().ok_or_else(|| GrammarError::Format("no rules".into()))?;
        let lhs_names: BTreeSet<String> = rules.iter().map(|r| r.0.clone()).collect();
        let mut terminals = declared.clone().unwrap_or_default();
        for (_, alts) in &rules {
            for alt in alts {
                for tok in alt.iter().filter(|t| !lhs_names.contains(*t)) {
                    for c in tok.chars() {
                        if declared.as_ref().is_some_and(|d| !d.contains(c)) {
                            return Err(GrammarError::Format(format!("undeclared terminal {c:?}")));
                        }
                        terminals.insert(c);
                    }
                }
            }
        }
        let mut g = Cfg::new(terminals, &first.0.clone());
        for (lhs, alts) in &rules {
            let l = g.nonterminal(lhs);
            for alt in alts {
                let mut rhs = Vec::new();
                for tok in alt {
                    if lhs_names.contains(tok) {
                        rhs.push(Sym::N(g.nonterminal(tok)));
                    } else {
                        rhs.extend(tok.chars().map(Sym::T));
                    }
                }
                g.add(l, rhs);
            }
        }
        Ok(g)
    }

    /// Reads `{"start": "S", "productions": [["S", ["A", "B"]], ...], "terminals": [...]}`.
    pub fn from_json(v: &Value) -> Result<Cfg, GrammarError> {
        let fmt_err = |m: &str| GrammarError::Format(m.to_string());
        let start = v
            .get("start")
            .and_then(Value::as_str)
            .ok_or_else(|| fmt_err("missing start"))?;
        let prods = v
            .get("productions")
            .and_then(Value::as_array)
            .ok_or_else(|| fmt_err("missing productions"))?;
        let declared = match v.get("terminals") {
            None => None,
            Some(Value::Array(ts)) => Some(Alphabet::new(
                ts.iter()
                    .map(parse_symbol)
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| GrammarError::Format(e.to_string()))?,
            )),
            Some(_) => return Err(fmt_err("terminals must be an array")),
        };
        let mut rules: Vec<(String, Vec<Vec<String>>)> = vec![(start.to_string(), vec![])];
        for p in prods {
            let pair = p
                .as_array()
                .filter(|x| x.len() == 2)
                .ok_or_else(|| fmt_err("production must be [lhs, [symbols]]"))?;
            let lhs = pair[0].as_str().ok_or_else(|| fmt_err("lhs must be a string"))?;
            let rhs: Vec<String> = pair[1]
                .as_array()
                .ok_or_else(|| fmt_err("rhs must be an array"))?
                .iter()
                .map(|s| {
                    s.as_str()
                        .map(String::from)
                        .ok_or_else(|| fmt_err("rhs symbol must be a string"))
                })
                .collect::<Result<_, _>>()?;
            match rules.iter_mut().find(|r| r.0 == lhs) {
                Some(r) => r.1.push(rhs),
                None => rules.push((lhs.to_string(), vec![rhs])),
            }
        }
        Self::from_rules(rules, declared)
    }

    pub fn to_json(&self) -> Value {
        let sym = |s: &Sym| match s {
            Sym::T(c) => c.to_string(),
            Sym::N(n) => self.names[*n].clone(),
        };
        json!({
            "start": self.names[self.start],
            "terminals": self.terminals,
            "productions": self.productions.iter().map(|(l, r)| json!([self.names[*l], r.iter().map(sym).collect::<Vec<_>>()])).collect::<Vec<_>>(),
        })
    }

    pub fn nullable(&self) -> Vec<bool> {
        let mut null = vec![false; self.names.len()];
        loop {
            let mut changed = false;
            for (l, r) in &self.productions {
                if !null[*l] && r.iter().all(|s| matches!(s, Sym::N(n) if null[*n])) {
                    null[*l] = true;
                    changed = true;
                }
            }
            if !changed {
                return null;
            }
        }
    }

    pub fn generating(&self) -> Vec<bool> {
        let mut gen = vec![false; self.names.len()];
        loop {
            let mut changed = false;
            for (l, r) in &self.productions {
                if !gen[*l]
                    && r.iter().all(|s| match s {
                        Sym::T(_) => true,
                        Sym::N(n) => gen[*n],
                    })
                {
                    gen[*l] = true;
                    changed = true;
                }
            }
            if !changed {
                return gen;
            }
        }
    }

    pub fn is_empty_language(&self) -> bool {
        !self.generating()[self.start]
    }

    /// Drops productions using non-generating symbols, then unreachable nonterminals.
    /// The start symbol is always kept.
    pub fn remove_useless(&self) -> Cfg {
        let gen = self.generating();
        let prods: Vec<&(usize, Vec<Sym>)> = self
            .productions
            .iter()
            .filter(|(l, r)| gen[*l] && r.iter().all(|s| !matches!(s, Sym::N(n) if !gen[*n])))
            .collect();
        let mut reach = vec![false; self.names.len()];
        reach[self.start] = true;
        let mut stack = vec![self.start];
        while let Some(a) = stack.pop() {
            for (l, r) in &prods {
                if *l == a {
                    for s in r {
                        if let Sym::N(n) = s {
                            if !reach[*n] {
                                reach[*n] = true;
                                stack.push(*n);
                            }
                        }
                    }
                }
            }
        }
        let mut out = Cfg::new(self.terminals.clone(), &self.names[self.start]);
        let mut map: HashMap<usize, usize> = HashMap::new();
        map.insert(self.start, 0);
        for (i, name) in self.names.iter().enumerate() {
            if reach[i] && i != self.start {
                map.insert(i, out.nonterminal(name));
            }
        }
        for (l, r) in prods {
            if reach[*l] {
                let rhs = r
                    .iter()
                    .map(|s| match s {
                        Sym::N(n) => Sym::N(map[n]),
                        t => *t,
                    })
                    .collect();
                out.add(map[l], rhs);
            }
        }
        out
    }

    /// Rules `A → BC` with `B, C` not the start, `A → a`, and `S → ε`.
    pub fn is_cnf(&self) -> bool {
        self.productions.iter().all(|(l, r)| match r.as_slice() {
            [] => *l == self.start,
            [Sym::T(_)] => true,
            [Sym::N(b), Sym::N(c)] => *b != self.start && *c != self.start,
            _ => false,
        })
    }

    /// Language-preserving Chomsky normal form without useless symbols.
    pub fn to_cnf(&self) -> Cfg {
        let mut g = self.clone();
        // START
        if g.productions.iter().any(|(_, r)| r.contains(&Sym::N(g.start))) {
            let old = g.start;
            let s0 = g.fresh(&format!("{}0", g.names[old]));
            g.add(s0, vec![Sym::N(old)]);
            g.start = s0;
        }
        // TERM
        let mut term_nt: BTreeMap<Symbol, usize> = BTreeMap::new();
        let prods = std::mem::take(&mut g.productions);
        let mut next = Vec::new();
        for (l, r) in prods {
            if r.len() >= 2 {
                let rhs = r
                    .into_iter()
                    .map(|s| match s {
                        Sym::T(c) => {
                            let n = *term_nt.entry(c).or_insert_with(|| g.fresh(&format!("T_{c}")));
                            Sym::N(n)
                        }
                        n => n,
                    })
                    .collect();
                next.push((l, rhs));
            } else {
                next.push((l, r));
            }
        }
        for (c, n) in &term_nt {
            next.push((*n, vec![Sym::T(*c)]));
        }
        // BIN
        let mut binned = Vec::new();
        for (l, r) in next {
            if r.len() <= 2 {
                binned.push((l, r));
                continue;
            }
            let mut lhs = l;
            for i in 0..r.len() - 2 {
                let rest = g.fresh(&format!("{}_{}", g.names[l], i + 1));
                binned.push((lhs, vec![r[i], Sym::N(rest)]));
                lhs = rest;
            }
            binned.push((lhs, r[r.len() - 2..].to_vec()));
        }
        g.productions = Vec::new();
        for (l, r) in binned {
            g.add(l, r);
        }
        // DEL
        let null = g.nullable();
        let prods = std::mem::take(&mut g.productions);
        for (l, r) in prods {
            let opts: Vec<Vec<Sym>> = match r.as_slice() {
                [] => vec![],
                [x] => vec![vec![*x]],
                [x, y] => {
                    let mut v = vec![vec![*x, *y]];
                    if matches!(x, Sym::N(n) if null[*n]) {
                        v.push(vec![*y]);
                    }
                    if matches!(y, Sym::N(n) if null[*n]) {
                        v.push(vec![*x]);
                    }
                    v
                }
                _ => unreachable!("binarized"),
            };
            for o in opts {
                g.add(l, o);
            }
        }
        if null[g.start] {
            g.add(g.start, vec![]);
        }
        // UNIT
        let n = g.names.len();
        let mut unit = vec![vec![false; n]; n];
        for (a, row) in unit.iter_mut().enumerate() {
            row[a] = true;
        }
        loop {
            let mut changed = false;
            for (l, r) in &g.productions {
                if let [Sym::N(b)] = r.as_slice() {
                    for a in 0..n {
                        if unit[a][*l] && !unit[a][*b] {
                            unit[a][*b] = true;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let prods = std::mem::take(&mut g.productions);
        for a in 0..n {
            for (l, r) in &prods {
                if unit[a][*l] && !matches!(r.as_slice(), [Sym::N(_)]) {
                    if r.is_empty() && a != g.start {
                        continue;
                    }
                    g.add(a, r.clone());
                }
            }
        }
        g.remove_useless()
    }

    /// Terminals of each nonterminal's language; empty for non-generating ones.
    pub fn alphabets(&self) -> Vec<Alphabet> {
        let gen = self.generating();
        let mut alph = vec![Alphabet::default(); self.names.len()];
        loop {
            let mut changed = false;
            for (l, r) in &self.productions {
                if !r.iter().all(|s| !matches!(s, Sym::N(n) if !gen[*n])) {
                    continue;
                }
                for s in r {
                    let add: Vec<Symbol> = match s {
                        Sym::T(c) => vec![*c],
                        Sym::N(m) => alph[*m].symbols(),
                    };
                    for c in add {
                        if !alph[*l].contains(c) {
                            alph[*l].insert(c);
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                return alph;
            }
        }
    }

    /// Terminals occurring in some word derivable from the sentential form `m`.
    pub fn alpha(&self, m: &[Sym]) -> Alphabet {
        let gen = self.generating();
        if m.iter().any(|s| matches!(s, Sym::N(n) if !gen[*n])) {
            return Alphabet::default();
        }
        let alph = self.alphabets();
        let mut out = Alphabet::default();
        for s in m {
            match s {
                Sym::T(c) => out.insert(*c),
                Sym::N(n) => out = out.union(&alph[*n]),
            }
        }
        out
    }

    /// `table[a][i][j]`: nonterminal `a` derives `w[i..j]`. Works for any grammar.
    fn span_table(&self, w: &[Symbol]) -> Vec<Vec<Vec<bool>>> {
        let len = w.len();
        let mut t = vec![vec![vec![false; len + 1]; len + 1]; self.names.len()];
        loop {
            let mut changed = false;
            for (l, r) in &self.productions {
                for i in 0..=len {
                    let reach = seq_reach(r, w, i, &t);
                    for j in i..=len {
                        if reach[j - i] && !t[*l][i][j] {
                            t[*l][i][j] = true;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                return t;
            }
        }
    }

    /// Whether the sentential form `m` derives `w`.
    pub fn derives(&self, m: &[Sym], w: &Word) -> bool {
        let t = self.span_table(w.symbols());
        seq_reach(m, w.symbols(), 0, &t)[w.len()]
    }

    pub fn member(&self, w: &Word) -> bool {
        self.derives(&[Sym::N(self.start)], w)
    }

    /// CYK membership; the grammar must be in CNF.
    pub fn cyk_member(&self, w: &Word) -> Result<bool, GrammarError> {
        if !self.is_cnf() {
            return Err(GrammarError::NotCnf);
        }
        let s = w.symbols();
        let n = s.len();
        if n == 0 {
            return Ok(self.has_epsilon_start());
        }
        let k = self.names.len();
        // t[len-1][i][a]
        let mut t = vec![vec![vec![false; k]; n]; n];
        for (i, c) in s.iter().enumerate() {
            for (l, r) in &self.productions {
                if r.as_slice() == [Sym::T(*c)] {
                    t[0][i][*l] = true;
                }
            }
        }
        for len in 2..=n {
            for i in 0..=n - len {
                for split in 1..len {
                    for (l, r) in &self.productions {
                        if let [Sym::N(b), Sym::N(c)] = r.as_slice() {
                            if t[split - 1][i][*b] && t[len - split - 1][i + split][*c] {
                                t[len - 1][i][*l] = true;
                            }
                        }
                    }
                }
            }
        }
        Ok(t[n - 1][0][self.start])
    }

    /// All words of length at most `max_len` in the language, by a bottom-up fixpoint.
    pub fn generate_upto(&self, max_len: usize) -> Result<BTreeSet<Word>, GrammarError> {
        self.generate_from_upto(self.start, max_len)
    }

    pub fn generate_from_upto(&self, a: usize, max_len: usize) -> Result<BTreeSet<Word>, GrammarError> {
        const BUDGET: usize = 2_000_000;
        let mut sets: Vec<BTreeSet<Word>> = vec![BTreeSet::new(); self.names.len()];
        loop {
            let mut changed = false;
            for (l, r) in &self.productions {
                let mut acc: BTreeSet<Word> = [Word::empty()].into();
                for s in r {
                    let part: Vec<Word> = match s {
                        Sym::T(c) => vec![Word::new(vec![*c])],
                        Sym::N(n) => sets[*n].iter().cloned().collect(),
                    };
                    let mut next = BTreeSet::new();
                    for x in &acc {
                        for y in &part {
                            if x.len() + y.len() <= max_len {
                                next.insert(x.concat(y));
                            }
                        }
                    }
                    acc = next;
                    if acc.is_empty() {
                        break;
                    }
                }
                for w in acc {
                    if sets[*l].insert(w) {
                        changed = true;
                    }
                }
                if sets[*l].len() > BUDGET {
                    return Err(GrammarError::Budget(BUDGET));
                }
            }
            if !changed {
                return Ok(std::mem::take(&mut sets[a]));
            }
        }
    }

    /// The order relations, via membership of one or two markers in a marked grammar.
    pub fn order_relations(&self) -> Result<OrderRelations, GrammarError> {
        if !self.is_cnf() {
            return Err(GrammarError::NotCnf);
        }
        let n = self.names.len();
        let (m1, m2) = ('\u{E000}', '\u{E001}');
        let marks = Word::new(vec![m1, m2]);
        let one = Word::new(vec![m1]);
        let mut lt1 = vec![vec![false; n]; n];
        let mut lt2 = vec![vec![false; n]; n];
        for b in 0..n {
            let mut g = Cfg {
                names: self.names.clone(),
                start: self.start,
                productions: Vec::new(),
                terminals: self.terminals.with(m1).with(m2),
            };
            for (l, r) in &self.productions {
                match r.as_slice() {
                    [Sym::T(_)] => g.add(*l, vec![]),
                    _ => g.add(*l, r.clone()),
                }
            }
            g.add(b, vec![Sym::T(m1)]);
            g.add(b, vec![Sym::T(m2)]);
            let t1 = g.span_table(one.symbols());
            let t2 = g.span_table(marks.symbols());
            for (a, r) in &self.productions {
                if seq_reach(r, one.symbols(), 0, &t1)[1] {
                    lt1[b][*a] = true;
                }
                if seq_reach(r, marks.symbols(), 0, &t2)[2] {
                    lt2[b][*a] = true;
                }
            }
        }
        let eq1 = (0..n)
            .map(|b| (0..n).map(|a| lt1[b][a] && lt1[a][b]).collect())
            .collect();
        Ok(OrderRelations { lt1, lt2, eq1 })
    }

    /// Grammar for a subset of the language that contains all its subword-minimal words.
    ///
    /// Nonterminals are pairs `(A, i)` with `i ≤ |N|`, named `A@i`.
    pub fn upward_grammar(&self) -> Result<Cfg, GrammarError> {
        if !self.is_cnf() {
            return Err(GrammarError::NotCnf);
        }
        if self.has_epsilon_start() {
            return Err(GrammarError::EpsilonInLanguage);
        }
        let n = self.names.len();
        let mut g = Cfg::new(self.terminals.clone(), &format!("{}@{}", self.names[self.start], n));
        let idx = |g: &mut Cfg, a: usize, i: usize| g.nonterminal(&format!("{}@{}", self.names[a], i));
        for a in 0..n {
            for i in 0..=n {
                idx(&mut g, a, i);
            }
        }
        for (l, r) in &self.productions {
            match r.as_slice() {
                [Sym::T(c)] => {
                    let x = idx(&mut g, *l, 0);
                    g.add(x, vec![Sym::T(*c)]);
                }
                [Sym::N(b), Sym::N(c)] => {
                    for i in 1..=n {
                        let x = idx(&mut g, *l, i);
                        let y = idx(&mut g, *b, i - 1);
                        let z = idx(&mut g, *c, i - 1);
                        g.add(x, vec![Sym::N(y), Sym::N(z)]);
                    }
                }
                _ => unreachable!("CNF"),
            }
        }
        for a in 0..n {
            for i in 1..=n {
                let x = idx(&mut g, a, i);
                let y = idx(&mut g, a, i - 1);
                g.add(x, vec![Sym::N(y)]);
            }
        }
        Ok(g)
    }

    /// The grammar `G'` of the downward-closure construction, on the ε-free core.
    pub fn downward_grammar(&self) -> Result<DownwardGrammar, GrammarError> {
        if !self.is_cnf() {
            return Err(GrammarError::NotCnf);
        }
        let mut core = self.clone();
        core.productions.retain(|(_, r)| !r.is_empty());
        let core = core.remove_useless();
        let rel = core.order_relations()?;
        let n = core.names.len();
        let alph = core.alphabets();
        // Class membership is taken reflexively.
        let eq = |b: usize, a: usize| a == b || rel.eq1[b][a];

        let mut dummies = Alphabet::default();
        let dummy = |a: usize, k: u32| char::from_u32(0xE100 + 3 * a as u32 + k).expect("private-use range");
        let mut terminals = core.terminals.clone();
        for a in 0..n {
            for k in 0..3 {
                let d = dummy(a, k);
                if core.terminals.contains(d) {
                    return Err(GrammarError::Invariant(format!("terminal {d:?} collides with a dummy")));
                }
                terminals.insert(d);
                dummies.insert(d);
            }
        }
        let down_name = |a: usize| format!("{}↓", core.names[a]);
        let mut g = Cfg::new(terminals, &down_name(core.start));
        let mut down = vec![0; n];
        for a in 0..n {
            down[a] = g.nonterminal(&down_name(a));
        }
        let mut loops = BTreeMap::new();
        let mut alpha_l = vec![Alphabet::default(); n];
        let mut alpha_r = vec![Alphabet::default(); n];
        for a in 0..n {
            let name = &core.names[a];
            let a_alph = g.nonterminal(&format!("{name}_alph"));
            g.add(a_alph, vec![Sym::T(dummy(a, 2))]);
            loops.insert(
                dummy(a, 2),
                LoopInfo {
                    kind: LoopKind::Alph,
                    nonterminal: a,
                    symbols: alph[a].clone(),
                },
            );
            if rel.lt2[a][a] {
                g.add(down[a], vec![Sym::N(a_alph)]);
                continue;
            }
            let a_l = g.nonterminal(&format!("{name}_l"));
            let a_m = g.nonterminal(&format!("{name}_m"));
            let a_r = g.nonterminal(&format!("{name}_r"));
            for b in (0..n).filter(|&b| eq(b, a)) {
                for r in core.productions_of(b) {
                    match r.as_slice() {
                        [Sym::T(c)] => {
                            g.add(a_m, vec![Sym::T(*c)]);
                            g.add(a_m, vec![]);
                        }
                        [Sym::N(x), Sym::N(y)] => match (eq(*x, a), eq(*y, a)) {
                            (false, false) => g.add(a_m, vec![Sym::N(down[*x]), Sym::N(down[*y])]),
                            (true, false) => {
                                alpha_r[a] = alpha_r[a].union(&core.alpha(&[Sym::N(*y)]));
                            }
                            (false, true) => {
                                alpha_l[a] = alpha_l[a].union(&core.alpha(&[Sym::N(*x)]));
                            }
                            (true, true) => {
                                return Err(GrammarError::Invariant(format!(
                                    "production of {} has two nonterminals in the class of {}",
                                    core.names[b], name
                                )))
                            }
                        },
                        _ => unreachable!("ε-free CNF"),
                    }
                }
            }
            g.add(down[a], vec![Sym::N(a_l), Sym::N(a_m), Sym::N(a_r)]);
            g.add(a_l, vec![Sym::T(dummy(a, 0))]);
            g.add(a_r, vec![Sym::T(dummy(a, 1))]);
            loops.insert(
                dummy(a, 0),
                LoopInfo {
                    kind: LoopKind::Left,
                    nonterminal: a,
                    symbols: alpha_l[a].clone(),
                },
            );
            loops.insert(
                dummy(a, 1),
                LoopInfo {
                    kind: LoopKind::Right,
                    nonterminal: a,
                    symbols: alpha_r[a].clone(),
                },
            );
        }
        Ok(DownwardGrammar {
            cfg: g,
            loops,
            alpha_l,
            alpha_r,
            core_nonterminals: n,
            epsilon: self.has_epsilon_start(),
        })
    }
}

/// How many positions of `w` starting at `i` the symbol sequence `m` can cover:
/// `out[k]` is true iff `m` derives `w[i..i+k]`.
fn seq_reach(m: &[Sym], w: &[Symbol], i: usize, t: &[Vec<Vec<bool>>]) -> Vec<bool> {
    let len = w.len();
    let mut cur = vec![false; len + 1 - i];
    cur[0] = true;
    for s in m {
        let mut next = vec![false; len + 1 - i];
        for k in 0..cur.len() {
            if !cur[k] {
                continue;
            }
            let p = i + k;
            match s {
                Sym::T(c) => {
                    if p < len && w[p] == *c {
                        next[k + 1] = true;
                    }
                }
                Sym::N(n) => {
                    for j in p..=len {
                        if t[*n][p][j] {
                            next[j - i] = true;
                        }
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoopKind {
    Left,
    Right,
    Alph,
}

/// What the PDA does when a dummy terminal reaches the top of the stack.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopInfo {
    pub kind: LoopKind,
    pub nonterminal: usize,
    pub symbols: Alphabet,
}

#[derive(Clone, Debug)]
pub struct DownwardGrammar {
    pub cfg: Cfg,
    /// Keyed by dummy terminal.
    pub loops: BTreeMap<Symbol, LoopInfo>,
    pub alpha_l: Vec<Alphabet>,
    pub alpha_r: Vec<Alphabet>,
    /// Nonterminal count of the ε-free core the construction ran on.
    pub core_nonterminals: usize,
    /// Whether the original language contains ε.
    pub epsilon: bool,
}

impl fmt::Display for Cfg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in 0..self.names.len() {
            let alts: Vec<String> = self
                .productions_of(a)
                .map(|r| {
                    if r.is_empty() {
                        return "ε".to_string();
                    }
                    r.iter()
                        .map(|s| match s {
                            Sym::T(c) => c.to_string(),
                            Sym::N(n) => self.names[*n].clone(),
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            if !alts.is_empty() {
                writeln!(f, "{} -> {}", self.names[a], alts.join(" | "))?;
            }
        }
        Ok(())
    }
}
