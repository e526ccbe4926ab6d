//! Text and JSON front ends for constraints.
//!
//! ```text
//! alphabet a, e, f;
//! vars x, y;
//! transducers "example2.json";
//! y in (e|f)*;
//! (x, a y) in T1;
//! ```
//!
//! A term token naming a variable is that variable; any other token is a run of constant
//! symbols. Constants before the first or after the last variable are folded into the
//! transducer; constants between variables become fresh variables with singleton memberships.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Map, Value};

use super::{check_alphabet, ConstraintError, Formula, Relation, SlFormula};
use crate::automata::{parse_alphabet, Nfa, Nft};
use crate::words::{Alphabet, Symbol, Word};

enum Item {
    Var(usize),
    Sym(Symbol),
}

struct Builder {
    formula: Formula,
    transducers: BTreeMap<String, Nft>,
    base: Option<std::path::PathBuf>,
    fresh: usize,
}

fn syntax(context: &str, msg: impl Into<String>) -> ConstraintError {
    ConstraintError::Syntax {
        context: context.to_string(),
        msg: msg.into(),
    }
}

/// Parses the text form, or the JSON form when the input starts with `{`.
///
/// `base` resolves relative `transducers` paths.
pub fn parse_formula(text: &str, base: Option<&Path>) -> Result<Formula, ConstraintError> {
    if text.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(text).map_err(|e| syntax("json", e.to_string()))?;
        return formula_from_json(&v, base);
    }
    let mut b = Builder {
        formula: Formula::new(Vec::new(), Alphabet::default()),
        transducers: BTreeMap::new(),
        base: base.map(Path::to_path_buf),
        fresh: 0,
    };
    let body: String = text
        .lines()
        .map(|l| l.split("//").next().unwrap_or(""))
        .collect::<Vec<_>>()
        .join("\n");
    for stmt in body.split(';') {
        let stmt = stmt.trim();
        if !stmt.is_empty() {
            b.statement(stmt)?;
        }
    }
    Ok(b.formula)
}

pub fn parse_formula_file(path: &Path) -> Result<Formula, ConstraintError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConstraintError::Io(format!("{}: {e}", path.display())))?;
    parse_formula(&text, path.parent())
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    cs.next().is_some_and(|c| c.is_alphabetic() || c == '_') && cs.all(|c| c.is_alphanumeric() || c == '_')
}

fn list(s: &str) -> Vec<String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

impl Builder {
    fn statement(&mut self, stmt: &str) -> Result<(), ConstraintError> {
        if let Some(rest) = stmt.strip_prefix("alphabet") {
            let mut a = Alphabet::default();
            for tok in list(rest) {
                for c in tok.chars() {
                    a.insert(c);
                }
            }
            check_alphabet(&a)?;
            self.formula.alphabet = a;
            return Ok(());
        }
        if let Some(rest) = stmt.strip_prefix("vars") {
            for v in list(rest) {
                if !is_ident(&v) {
                    return Err(syntax(stmt, format!("bad variable name {v:?}")));
                }
                if self.formula.var(&v).is_none() {
                    self.formula.vars.push(v);
                }
            }
            return Ok(());
        }
        if let Some(rest) = stmt.strip_prefix("transducers") {
            let path = rest.trim().trim_matches('"');
            let full = match &self.base {
                Some(b) => b.join(path),
                None => path.into(),
            };
            let text =
                std::fs::read_to_string(&full).map_err(|e| ConstraintError::Io(format!("{}: {e}", full.display())))?;
            let v: Value = serde_json::from_str(&text).map_err(|e| syntax(path, e.to_string()))?;
            return self.load_transducers(&v);
        }
        if stmt.starts_with('(') {
            let close = stmt.find(')').ok_or_else(|| syntax(stmt, "missing ')'"))?;
            let inner = &stmt[1..close];
            let rest = stmt[close + 1..].trim();
            let tname = rest
                .strip_prefix("in")
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .ok_or_else(|| syntax(stmt, "expected 'in <transducer>'"))?;
            let (out, term) = inner
                .split_once(',')
                .ok_or_else(|| syntax(stmt, "expected '(x, term)'"))?;
            let tokens: Vec<String> = term.split_whitespace().map(String::from).collect();
            return self.relation(out.trim(), &tokens, tname);
        }
        if let Some((var, regex)) = stmt.split_once(" in ") {
            let v = self.var(var.trim())?;
            let a = Nfa::from_regex(regex.trim(), &self.formula.alphabet)?;
            self.formula.memberships.push((v, a));
            return Ok(());
        }
        Err(syntax(stmt, "unrecognized statement"))
    }

    fn load_transducers(&mut self, v: &Value) -> Result<(), ConstraintError> {
        let obj = v
            .as_object()
            .ok_or_else(|| syntax("transducers", "expected an object of transducers"))?;
        for (name, t) in obj {
            self.transducers.insert(name.clone(), Nft::from_json(t)?);
        }
        Ok(())
    }

    fn var(&self, name: &str) -> Result<usize, ConstraintError> {
        self.formula
            .var(name)
            .ok_or_else(|| ConstraintError::UndeclaredVariable(name.to_string()))
    }

    fn transducer(&self, name: &str) -> Result<Nft, ConstraintError> {
        let sigma = &self.formula.alphabet;
        let t = match name {
            "Id" if !self.transducers.contains_key(name) => Nft::identity(sigma),
            "Neq" if !self.transducers.contains_key(name) => Nft::not_equal(sigma),
            _ => self
                .transducers
                .get(name)
                .cloned()
                .ok_or_else(|| ConstraintError::UnknownTransducer(name.to_string()))?,
        };
        for c in t.in_alphabet().iter().chain(t.out_alphabet().iter()) {
            if !sigma.contains(c) {
                return Err(ConstraintError::ForeignSymbol(c));
            }
        }
        Ok(t.with_alphabets(sigma, sigma))
    }

    fn relation(&mut self, out: &str, tokens: &[String], tname: &str) -> Result<(), ConstraintError> {
        let output = self.var(out)?;
        let mut items = Vec::new();
        for tok in tokens {
            if tok == "ε" {
                continue;
            }
            match self.formula.var(tok) {
                Some(v) => items.push(Item::Var(v)),
                None => {
                    for c in tok.chars() {
                        if !self.formula.alphabet.contains(c) {
                            return Err(ConstraintError::ForeignSymbol(c));
                        }
                        items.push(Item::Sym(c));
                    }
                }
            }
        }
        let first = items
            .iter()
            .position(|i| matches!(i, Item::Var(_)))
            .unwrap_or(items.len());
        let last = items
            .iter()
            .rposition(|i| matches!(i, Item::Var(_)))
            .map_or(first, |p| p + 1);
        let sym = |i: &Item| match i {
            Item::Sym(c) => Some(*c),
            Item::Var(_) => None,
        };
        let prefix: Vec<Symbol> = items[..first].iter().filter_map(sym).collect();
        let suffix: Vec<Symbol> = items[last..].iter().filter_map(sym).collect();
        let mut inputs = Vec::new();
        let mut run: Vec<Symbol> = Vec::new();
        for item in &items[first..last] {
            match item {
                Item::Sym(c) => run.push(*c),
                Item::Var(v) => {
                    if !run.is_empty() {
                        inputs.push(self.constant(std::mem::take(&mut run)));
                    }
                    inputs.push(*v);
                }
            }
        }
        let mut transducer = self.transducer(tname)?;
        let mut name = tname.to_string();
        if !prefix.is_empty() || !suffix.is_empty() {
            transducer = absorb(&transducer, &prefix, &suffix);
            name = format!(
                "{tname}[{}·{}]",
                prefix.iter().collect::<String>(),
                suffix.iter().collect::<String>()
            );
        }
        self.formula.relations.push(Relation {
            output,
            inputs,
            transducer,
            name,
        });
        Ok(())
    }

    fn constant(&mut self, word: Vec<Symbol>) -> usize {
        loop {
            self.fresh += 1;
            let name = format!("c{}", self.fresh);
            if self.formula.var(&name).is_none() {
                self.formula.vars.push(name);
                break;
            }
        }
        let v = self.formula.vars.len() - 1;
        let a = Nfa::singleton(&self.formula.alphabet, &Word::new(word));
        self.formula.memberships.push((v, a));
        v
    }
}

/// `R(T') = {(o, w) : (o, prefix·w·suffix) ∈ R(T)}`.
///
/// States are `(q, stage)`: stages below `|prefix|` read the prefix silently, stage
/// `|prefix|` reads the real input, later stages read the suffix silently.
pub fn absorb(t: &Nft, prefix: &[Symbol], suffix: &[Symbol]) -> Nft {
    let m = prefix.len();
    let stages = m + suffix.len() + 1;
    let mut out = Nft::new(t.in_alphabet().clone(), t.out_alphabet().clone());
    for _ in 0..t.num_states() * stages {
        out.add_state();
    }
    let id = |q: usize, s: usize| q * stages + s;
    for tr in t.transitions() {
        for s in 0..stages {
            match tr.inp {
                None => out.add_transition(id(tr.from, s), None, tr.out, id(tr.to, s)),
                Some(c) => {
                    if s < m && prefix[s] == c {
                        out.add_transition(id(tr.from, s), None, tr.out, id(tr.to, s + 1));
                    }
                    if s == m {
                        out.add_transition(id(tr.from, s), Some(c), tr.out, id(tr.to, s));
                    }
                    if s >= m && s + 1 < stages && suffix[s - m] == c {
                        out.add_transition(id(tr.from, s), None, tr.out, id(tr.to, s + 1));
                    }
                }
            }
        }
    }
    for &q in t.initial() {
        out.set_initial(id(q, 0));
    }
    for &q in t.finals() {
        out.set_final(id(q, stages - 1));
    }
    out
}

fn formula_from_json(v: &Value, base: Option<&Path>) -> Result<Formula, ConstraintError> {
    let alphabet = parse_alphabet(v.get("alphabet"))?;
    check_alphabet(&alphabet)?;
    let mut b = Builder {
        formula: Formula::new(Vec::new(), alphabet),
        transducers: BTreeMap::new(),
        base: base.map(Path::to_path_buf),
        fresh: 0,
    };
    let strs = |key: &str| -> Result<Vec<String>, ConstraintError> {
        match v.get(key) {
            None => Ok(vec![]),
            Some(Value::Array(xs)) => xs
                .iter()
                .map(|x| {
                    x.as_str()
                        .map(String::from)
                        .ok_or_else(|| syntax(key, "expected strings"))
                })
                .collect(),
            Some(_) => Err(syntax(key, "expected an array")),
        }
    };
    b.formula.vars = strs("vars")?;
    if let Some(ts) = v.get("transducers") {
        b.load_transducers(ts)?;
    }
    let arr = |key: &str| v.get(key).and_then(Value::as_array).cloned().unwrap_or_default();
    for m in arr("memberships") {
        let var = m
            .get("var")
            .and_then(Value::as_str)
            .ok_or_else(|| syntax("memberships", "missing var"))?;
        let x = b.var(var)?;
        let a = match (m.get("regex"), m.get("nfa")) {
            (Some(Value::String(r)), _) => Nfa::from_regex(r, &b.formula.alphabet)?,
            (_, Some(n)) => Nfa::from_json(n)?.with_alphabet(&b.formula.alphabet),
            _ => return Err(syntax("memberships", "need regex or nfa")),
        };
        b.formula.memberships.push((x, a));
    }
    for r in arr("relations") {
        let out = r
            .get("output")
            .and_then(Value::as_str)
            .ok_or_else(|| syntax("relations", "missing output"))?;
        let input: Vec<String> = match r.get("input") {
            Some(Value::Array(xs)) => xs.iter().filter_map(Value::as_str).map(String::from).collect(),
            Some(Value::String(s)) => s.split_whitespace().map(String::from).collect(),
            _ => vec![],
        };
        let t = r
            .get("transducer")
            .and_then(Value::as_str)
            .ok_or_else(|| syntax("relations", "missing transducer"))?;
        b.relation(out, &input, t)?;
    }
    Ok(b.formula)
}

/// JSON form with every transducer inlined under a unique name.
pub fn formula_to_json(f: &Formula) -> Value {
    let mut names: BTreeMap<String, &Nft> = BTreeMap::new();
    let mut rels = Vec::new();
    for r in &f.relations {
        let mut name = r.name.clone();
        let mut i = 1;
        while names.get(&name).is_some_and(|t| **t != r.transducer) {
            i += 1;
            name = format!("{}_{i}", r.name);
        }
        names.insert(name.clone(), &r.transducer);
        rels.push(json!({
            "output": f.vars[r.output],
            "input": r.inputs.iter().map(|&v| f.vars[v].clone()).collect::<Vec<_>>(),
            "transducer": name,
        }));
    }
    let mut ts = Map::new();
    for (n, t) in names {
        ts.insert(n, t.to_json());
    }
    json!({
        "alphabet": f.alphabet,
        "vars": f.vars,
        "memberships": f.memberships.iter().map(|(v, a)| json!({"var": f.vars[*v], "nfa": a.to_json()})).collect::<Vec<_>>(),
        "relations": rels,
        "transducers": ts,
    })
}

impl Formula {
    pub fn to_json(&self) -> Value {
        formula_to_json(self)
    }
}

impl SlFormula {
    pub fn to_json(&self) -> Value {
        formula_to_json(&self.to_formula())
    }
}
