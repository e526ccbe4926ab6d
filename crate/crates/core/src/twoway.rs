//! Two-way nondeterministic transducers over `⊢ w ⊣`, their emptiness check via crossing
//! sequences, minimal pairs of their relations, and the compilation of right-sided
//! straight-line formulas.
//!
//! Relations are sets of `(output, input)` pairs. A run starts on `⊢` and accepts by moving
//! right off `⊣` into a final state.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::hash::Hash;

use serde_json::{json, Value};
use thiserror::Error;

use crate::automata::{parse_alphabet, parse_symbol, AutomataError, Nfa, Nft};
use crate::constraints::{ConstraintError, SlFormula};
use crate::ompa::{block_expansions, decode};
use crate::pda::SeparabilityVerdict;
use crate::search::shortest_lex;
use crate::words::{
    minimize, minor_to_posptl, product_intersection, valk_jantzen_minor, Alphabet, Antichain, MinorError, Piece,
    PosPtl, Symbol, Word, WordTuple, WordsError, LEFT_END, RIGHT_END, SEP,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TwoWayError {
    #[error("crossing search exceeded {0} prefix behaviours")]
    VisitingCap(usize),
    #[error("run search exceeded its budget of {0} steps")]
    Budget(usize),
    #[error("minor computation stopped after {calls} candidates; partial minor {partial:?}")]
    Ceiling { partial: Vec<WordTuple>, calls: usize },
    #[error("pair {pair} exceeds the length bounds ({in_max}, {out_max})")]
    Bound {
        pair: WordTuple,
        in_max: usize,
        out_max: usize,
    },
    #[error("alphabet mismatch: {0} vs {1}")]
    AlphabetMismatch(String, String),
    #[error("formulas have different variables: {0:?} vs {1:?}")]
    VariableMismatch(Vec<String>, Vec<String>),
    #[error("malformed 2NFT: {0}")]
    Format(String),
    #[error("{0}")]
    Internal(String),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Automata(#[from] AutomataError),
    #[error(transparent)]
    Words(#[from] WordsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dir {
    Left,
    Right,
}

impl Dir {
    fn delta(self) -> isize {
        match self {
            Dir::Left => -1,
            Dir::Right => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TwoWayTrans {
    pub from: usize,
    pub read: Symbol,
    pub to: usize,
    pub out: Vec<Symbol>,
    pub dir: Dir,
}

/// A move as written by constructions; `Stay` is expanded into two real moves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    Left,
    Right,
    Stay,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoWayNft {
    in_alphabet: Alphabet,
    out_alphabet: Alphabet,
    delta: Vec<Vec<TwoWayTrans>>,
    /// For intermediaries of stay moves, the state they return to.
    hidden: Vec<Option<usize>>,
    /// Stay moves as written, for serialization.
    stays: Vec<(usize, Symbol, Vec<Symbol>, usize)>,
    intermediary: HashMap<(usize, Dir), usize>,
    initial: BTreeSet<usize>,
    finals: BTreeSet<usize>,
}

impl TwoWayNft {
    pub fn new(in_alphabet: Alphabet, out_alphabet: Alphabet) -> Self {
        TwoWayNft {
            in_alphabet,
            out_alphabet,
            delta: Vec::new(),
            hidden: Vec::new(),
            stays: Vec::new(),
            intermediary: HashMap::new(),
            initial: BTreeSet::new(),
            finals: BTreeSet::new(),
        }
    }

    pub fn add_state(&mut self) -> usize {
        self.delta.push(Vec::new());
        self.hidden.push(None);
        self.delta.len() - 1
    }

    pub fn add_transition(&mut self, from: usize, read: Symbol, out: Vec<Symbol>, dir: Dir, to: usize) {
        assert!(
            !(read == LEFT_END && dir == Dir::Left),
            "left move on the left endmarker"
        );
        let t = TwoWayTrans {
            from,
            read,
            to,
            out,
            dir,
        };
        if !self.delta[from].contains(&t) {
            self.delta[from].push(t);
        }
    }

    /// Reads `read`, writes `out` and stays put, through a hidden intermediary state.
    pub fn add_stay(&mut self, from: usize, read: Symbol, out: Vec<Symbol>, to: usize) {
        let (there, back) = if read == RIGHT_END {
            (Dir::Left, Dir::Right)
        } else {
            (Dir::Right, Dir::Left)
        };
        let h = match self.intermediary.get(&(to, back)) {
            Some(&h) => h,
            None => {
                let h = self.add_state();
                self.hidden[h] = Some(to);
                self.intermediary.insert((to, back), h);
                for s in self.tape_symbols() {
                    let blocked = match back {
                        Dir::Left => LEFT_END,
                        Dir::Right => RIGHT_END,
                    };
                    if s != blocked {
                        self.add_transition(h, s, vec![], back, to);
                    }
                }
                h
            }
        };
        self.add_transition(from, read, out.clone(), there, h);
        let s = (from, read, out, to);
        if !self.stays.contains(&s) {
            self.stays.push(s);
        }
    }

    pub fn add_move(&mut self, from: usize, read: Symbol, out: Vec<Symbol>, mv: Move, to: usize) {
        match mv {
            Move::Left => self.add_transition(from, read, out, Dir::Left, to),
            Move::Right => self.add_transition(from, read, out, Dir::Right, to),
            Move::Stay => self.add_stay(from, read, out, to),
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

    pub fn successors(&self, q: usize) -> &[TwoWayTrans] {
        &self.delta[q]
    }

    pub fn transitions(&self) -> impl Iterator<Item = &TwoWayTrans> {
        self.delta.iter().flatten()
    }

    pub fn num_transitions(&self) -> usize {
        self.delta.iter().map(Vec::len).sum()
    }

    /// The state a stay intermediary returns to.
    pub fn stay_target(&self, q: usize) -> Option<usize> {
        self.hidden[q]
    }

    /// Longest output of a single transition.
    pub fn gamma_max(&self) -> usize {
        self.transitions().map(|t| t.out.len()).max().unwrap_or(0)
    }

    /// Input symbols plus both endmarkers.
    pub fn tape_symbols(&self) -> Vec<Symbol> {
        let mut v = vec![LEFT_END];
        v.extend(self.in_alphabet.iter());
        v.push(RIGHT_END);
        v
    }

    /// Embeds a one-way transducer; its silent input moves become stay moves.
    pub fn from_nft(t: &Nft) -> TwoWayNft {
        let mut a = TwoWayNft::new(t.in_alphabet().clone(), t.out_alphabet().clone());
        let start = a.add_state();
        let states: Vec<usize> = (0..t.num_states()).map(|_| a.add_state()).collect();
        let accept = a.add_state();
        a.set_initial(start);
        a.set_final(accept);
        for &q in t.initial() {
            a.add_transition(start, LEFT_END, vec![], Dir::Right, states[q]);
        }
        let tape: Vec<Symbol> = a.tape_symbols().into_iter().filter(|&s| s != LEFT_END).collect();
        for tr in t.transitions() {
            let out: Vec<Symbol> = tr.out.into_iter().collect();
            match tr.inp {
                Some(c) => a.add_transition(states[tr.from], c, out, Dir::Right, states[tr.to]),
                None => {
                    for &s in &tape {
                        a.add_stay(states[tr.from], s, out.clone(), states[tr.to]);
                    }
                }
            }
        }
        for &q in t.finals() {
            a.add_transition(states[q], RIGHT_END, vec![], Dir::Right, accept);
        }
        a
    }

    /// Embeds an NFA as a transducer with empty outputs.
    pub fn from_nfa(n: &Nfa) -> TwoWayNft {
        let mut t = Nft::new(n.alphabet().clone(), n.alphabet().clone());
        for _ in 0..n.num_states() {
            t.add_state();
        }
        for (p, l, q) in n.transitions() {
            t.add_transition(p, l, None, q);
        }
        for &q in n.initial() {
            t.set_initial(q);
        }
        for &q in n.finals() {
            t.set_final(q);
        }
        TwoWayNft::from_nft(&t)
    }

    pub fn to_json(&self) -> Value {
        let visible: Vec<usize> = (0..self.num_states()).filter(|&q| self.hidden[q].is_none()).collect();
        let index: HashMap<usize, usize> = visible.iter().enumerate().map(|(i, &q)| (q, i)).collect();
        let mut transitions = Vec::new();
        for t in self.transitions() {
            if let (Some(f), Some(to)) = (index.get(&t.from), index.get(&t.to)) {
                transitions.push(json!({
                    "from": f,
                    "read": t.read.to_string(),
                    "to": to,
                    "out": t.out.iter().collect::<String>(),
                    "dir": t.dir.delta(),
                }));
            }
        }
        for (from, read, out, to) in &self.stays {
            transitions.push(json!({
                "from": index[from],
                "read": read.to_string(),
                "to": index[to],
                "out": out.iter().collect::<String>(),
                "dir": 0,
            }));
        }
        json!({
            "input_alphabet": self.in_alphabet,
            "output_alphabet": self.out_alphabet,
            "states": visible.len(),
            "initial": self.initial.iter().map(|q| index[q]).collect::<Vec<_>>(),
            "final": self.finals.iter().map(|q| index[q]).collect::<Vec<_>>(),
            "transitions": transitions,
        })
    }

    pub fn from_json(v: &Value) -> Result<TwoWayNft, TwoWayError> {
        let bad = |m: String| TwoWayError::Format(m);
        let inp = parse_alphabet(v.get("input_alphabet"))?;
        let out = parse_alphabet(v.get("output_alphabet"))?;
        let n = v
            .get("states")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("missing states".into()))? as usize;
        let mut a = TwoWayNft::new(inp, out);
        for _ in 0..n {
            a.add_state();
        }
        let ids = |key: &str| -> Result<Vec<usize>, TwoWayError> {
            v.get(key)
                .and_then(Value::as_array)
                .ok_or_else(|| bad(format!("missing {key}")))?
                .iter()
                .map(|x| {
                    x.as_u64()
                        .map(|x| x as usize)
                        .filter(|&x| x < n)
                        .ok_or_else(|| bad(format!("bad {key}")))
                })
                .collect()
        };
        for q in ids("initial")? {
            a.set_initial(q);
        }
        for q in ids("final")? {
            a.set_final(q);
        }
        let trans = v
            .get("transitions")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing transitions".into()))?;
        for t in trans {
            let num = |k: &str| t.get(k).and_then(Value::as_u64).map(|x| x as usize).filter(|&x| x < n);
            let from = num("from").ok_or_else(|| bad(format!("bad transition {t}")))?;
            let to = num("to").ok_or_else(|| bad(format!("bad transition {t}")))?;
            let read = parse_symbol(t.get("read").ok_or_else(|| bad(format!("bad transition {t}")))?)?;
            if read != LEFT_END && read != RIGHT_END && !a.in_alphabet.contains(read) {
                return Err(bad(format!("symbol {read} outside the input alphabet")));
            }
            let out: Vec<Symbol> = t.get("out").and_then(Value::as_str).unwrap_or("").chars().collect();
            if let Some(c) = out.iter().find(|c| !a.out_alphabet.contains(**c)) {
                return Err(bad(format!("symbol {c} outside the output alphabet")));
            }
            match t.get("dir").and_then(Value::as_i64) {
                Some(-1) if read == LEFT_END => return Err(bad("left move on the left endmarker".into())),
                Some(-1) => a.add_transition(from, read, out, Dir::Left, to),
                Some(1) => a.add_transition(from, read, out, Dir::Right, to),
                Some(0) => a.add_stay(from, read, out, to),
                _ => return Err(bad(format!("bad direction in {t}"))),
            }
        }
        Ok(a)
    }
}

fn tape_of(u: &Word) -> Vec<Symbol> {
    let mut tape = vec![LEFT_END];
    tape.extend(u.iter());
    tape.push(RIGHT_END);
    tape
}

/// `(target, output, new position)` for every move from `(q, pos)`; positions past `⊣` end the run.
fn moves<'a>(
    t: &'a TwoWayNft,
    tape: &'a [Symbol],
    q: usize,
    pos: usize,
) -> impl Iterator<Item = (usize, &'a [Symbol], usize)> + 'a {
    let read = tape.get(pos).copied();
    t.delta[q]
        .iter()
        .filter(move |tr| Some(tr.read) == read)
        .filter_map(move |tr| {
            let p = pos as isize + tr.dir.delta();
            (p >= 0).then_some((tr.to, tr.out.as_slice(), p as usize))
        })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    /// Runs never repeat a `(state, position)` configuration.
    Normalized,
    /// All runs whose output stays within the given length.
    OutputBound(usize),
}

/// Outputs of accepting runs on `⊢ u ⊣`. `budget` bounds the configurations explored.
pub fn twoway_run_search(t: &TwoWayNft, u: &Word, mode: RunMode, budget: usize) -> Result<BTreeSet<Word>, TwoWayError> {
    let tape = tape_of(u);
    let end = tape.len();
    let mut out = BTreeSet::new();
    let mut steps = 0usize;
    match mode {
        RunMode::Normalized => {
            // Depth-first over simple paths of the configuration graph.
            struct Frame {
                q: usize,
                pos: usize,
                next: usize,
                out_len: usize,
            }
            for &q0 in &t.initial {
                let mut on_path: HashSet<(usize, usize)> = HashSet::new();
                let mut buf: Vec<Symbol> = Vec::new();
                let mut stack = vec![Frame {
                    q: q0,
                    pos: 0,
                    next: 0,
                    out_len: 0,
                }];
                on_path.insert((q0, 0));
                while let Some(f) = stack.last_mut() {
                    let (q, pos) = (f.q, f.pos);
                    let succ: Vec<(usize, &[Symbol], usize)> = moves(t, &tape, q, pos).collect();
                    if f.next >= succ.len() {
                        on_path.remove(&(q, pos));
                        buf.truncate(f.out_len);
                        stack.pop();
                        if let Some(parent) = stack.last() {
                            buf.truncate(parent.out_len);
                        }
                        continue;
                    }
                    let (q2, o, p2) = succ[f.next];
                    f.next += 1;
                    let base = f.out_len;
                    steps += 1;
                    if steps > budget {
                        return Err(TwoWayError::Budget(budget));
                    }
                    buf.truncate(base);
                    buf.extend_from_slice(o);
                    if p2 == end {
                        if t.is_final(q2) {
                            out.insert(Word::new(buf.clone()));
                        }
                        continue;
                    }
                    if on_path.insert((q2, p2)) {
                        let out_len = buf.len();
                        stack.push(Frame {
                            q: q2,
                            pos: p2,
                            next: 0,
                            out_len,
                        });
                    }
                }
            }
        }
        RunMode::OutputBound(max) => {
            let mut seen: HashSet<(usize, usize, Vec<Symbol>)> = HashSet::new();
            let mut queue: VecDeque<(usize, usize, Vec<Symbol>)> =
                t.initial.iter().map(|&q| (q, 0, Vec::new())).collect();
            while let Some((q, pos, w)) = queue.pop_front() {
                if !seen.insert((q, pos, w.clone())) {
                    continue;
                }
                if seen.len() > budget {
                    return Err(TwoWayError::Budget(budget));
                }
                for (q2, o, p2) in moves(t, &tape, q, pos) {
                    if w.len() + o.len() > max {
                        continue;
                    }
                    let mut w2 = w.clone();
                    w2.extend_from_slice(o);
                    if p2 == end {
                        if t.is_final(q2) {
                            out.insert(Word::new(w2));
                        }
                    } else {
                        queue.push_back((q2, p2, w2));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Subword-minimal outputs of accepting runs on `⊢ u ⊣`.
///
/// Cutting a loop out of a run drops part of its output, so minimal outputs come from runs
/// without repeated configurations and a per-configuration antichain fixpoint terminates.
pub fn min_outputs(t: &TwoWayNft, u: &Word, budget: usize) -> Result<Vec<Word>, TwoWayError> {
    let tape = tape_of(u);
    let end = tape.len();
    let mut sets: HashMap<(usize, usize), Antichain<Word>> = HashMap::new();
    let mut queue: VecDeque<(usize, usize, Word)> = VecDeque::new();
    for &q in &t.initial {
        sets.entry((q, 0)).or_default().insert(Word::empty());
        queue.push_back((q, 0, Word::empty()));
    }
    let mut results = Antichain::new();
    let mut steps = 0usize;
    while let Some((q, pos, w)) = queue.pop_front() {
        if !sets[&(q, pos)].as_slice().contains(&w) {
            continue;
        }
        for (q2, o, p2) in moves(t, &tape, q, pos) {
            steps += 1;
            if steps > budget {
                return Err(TwoWayError::Budget(budget));
            }
            let mut w2 = w.clone();
            for &c in o {
                w2.push(c);
            }
            if p2 == end {
                if t.is_final(q2) {
                    results.insert(w2);
                }
                continue;
            }
            if sets.entry((q2, p2)).or_default().insert(w2.clone()) {
                queue.push_back((q2, p2, w2));
            }
        }
    }
    Ok(results.into_vec())
}

/// What a prefix `⊢ x` of the tape does to runs: the states in which a run first leaves it
/// to the right, and for each state entering its last cell from the right, the states in
/// which the run can leave it again to the right.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Crossing {
    exits: BTreeSet<usize>,
    back: BTreeMap<usize, BTreeSet<usize>>,
}

/// The crossing behaviour of `prefix · read`. Stay moves are resolved inside the cell.
fn extend_crossing(t: &TwoWayNft, prefix: Option<&Crossing>, read: Symbol, returns: &[usize]) -> Crossing {
    let mut cache: HashMap<usize, BTreeSet<usize>> = HashMap::new();
    let mut leave = |from: usize| -> BTreeSet<usize> {
        if let Some(e) = cache.get(&from) {
            return e.clone();
        }
        let mut exits = BTreeSet::new();
        let mut seen = HashSet::from([from]);
        let mut todo = vec![from];
        while let Some(q) = todo.pop() {
            for tr in t.delta[q].iter().filter(|tr| tr.read == read) {
                let mut next = Vec::new();
                match (t.stay_target(tr.to), tr.dir, prefix) {
                    (Some(to), _, _) => next.push(to),
                    (None, Dir::Right, _) => {
                        exits.insert(tr.to);
                    }
                    (None, Dir::Left, Some(p)) => next.extend(p.back.get(&tr.to).into_iter().flatten()),
                    (None, Dir::Left, None) => {}
                }
                for n in next {
                    if seen.insert(n) {
                        todo.push(n);
                    }
                }
            }
        }
        cache.insert(from, exits.clone());
        exits
    };
    let starts: Vec<usize> = match prefix {
        None => t.initial.iter().copied().collect(),
        Some(p) => p.exits.iter().copied().collect(),
    };
    let exits = starts.into_iter().flat_map(&mut leave).collect();
    let mut back = BTreeMap::new();
    if read != RIGHT_END {
        for &r in returns {
            let e = leave(r);
            if !e.is_empty() {
                back.insert(r, e);
            }
        }
    }
    Crossing { exits, back }
}

/// Shortlex-least input with an accepting run, or `None` if the relation is empty.
///
/// Exact: a one-way search over crossing behaviours of prefixes, `cap` bounding how many are
/// visited.
pub fn twoway_empty(t: &TwoWayNft, cap: usize) -> Result<Option<Word>, TwoWayError> {
    let returns: Vec<usize> = t
        .transitions()
        .filter(|tr| tr.dir == Dir::Left && t.stay_target(tr.to).is_none())
        .map(|tr| tr.to)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let symbols: Vec<Symbol> = t.in_alphabet.symbols();
    let first = extend_crossing(t, None, LEFT_END, &returns);
    let found = shortest_lex(
        [first],
        |c: &Crossing| {
            if c.exits.is_empty() {
                return Vec::new();
            }
            symbols
                .iter()
                .map(|&a| (Some(a), extend_crossing(t, Some(c), a, &returns)))
                .collect()
        },
        |c: &Crossing| {
            !c.exits.is_empty()
                && extend_crossing(t, Some(c), RIGHT_END, &returns)
                    .exits
                    .iter()
                    .any(|&q| t.is_final(q))
        },
        cap,
    )
    .map_err(|e| TwoWayError::VisitingCap(e.cap))?;
    Ok(found.map(|f| f.word))
}

/// Builds a machine by exploring control states from `init`.
fn build<K, F>(inp: &Alphabet, out: &Alphabet, init: Vec<K>, is_final: impl Fn(&K) -> bool, mut step: F) -> TwoWayNft
where
    K: Clone + Eq + Hash,
    F: FnMut(&K) -> Vec<(Symbol, Vec<Symbol>, Move, K)>,
{
    let mut a = TwoWayNft::new(inp.clone(), out.clone());
    let mut ids: HashMap<K, usize> = HashMap::new();
    let mut todo: Vec<K> = Vec::new();
    let intern = |a: &mut TwoWayNft, ids: &mut HashMap<K, usize>, k: K, todo: &mut Vec<K>| -> usize {
        if let Some(&q) = ids.get(&k) {
            return q;
        }
        let q = a.add_state();
        if is_final(&k) {
            a.set_final(q);
        }
        ids.insert(k.clone(), q);
        todo.push(k);
        q
    };
    for k in init {
        let q = intern(&mut a, &mut ids, k, &mut todo);
        a.set_initial(q);
    }
    while let Some(k) = todo.pop() {
        let from = ids[&k];
        for (read, o, mv, k2) in step(&k) {
            let to = intern(&mut a, &mut ids, k2, &mut todo);
            a.add_move(from, read, o, mv, to);
        }
    }
    a
}

fn advance(progress: &mut [usize], pats: &[Word], active: &[bool], c: Symbol) {
    for (m, p) in progress.iter_mut().enumerate() {
        if active[m] && *p < pats[m].len() && pats[m].symbols()[*p] == c {
            *p += 1;
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum Track {
    Scan(Vec<usize>),
    Rewind(Vec<bool>),
    Run(usize, Vec<bool>, Vec<usize>),
}

/// `t` restricted to pairs `(v, u)` with `accept(E, D)`, where `E[m]` says `in_pats[m] ⪯ u`
/// and `D[m]` says `out_pats[m] ⪯ v`. `D[m]` is only tracked when `E[m]` holds.
///
/// The machine first scans the input once to fix `E`, rewinds and then runs `t`.
fn track(t: &TwoWayNft, in_pats: &[Word], out_pats: &[Word], accept: impl Fn(&[bool], &[bool]) -> bool) -> TwoWayNft {
    let k = in_pats.len();
    let all = vec![true; k];
    let done =
        |prog: &[usize], pats: &[Word]| -> Vec<bool> { prog.iter().zip(pats).map(|(&p, w)| p == w.len()).collect() };
    let tape: Vec<Symbol> = t.in_alphabet.iter().collect();
    build(
        &t.in_alphabet,
        &t.out_alphabet,
        vec![Track::Scan(vec![0; k])],
        |s| match s {
            Track::Run(q, e, prog) => t.is_final(*q) && accept(e, &done(prog, out_pats)),
            _ => false,
        },
        |s| {
            let mut v = Vec::new();
            match s {
                Track::Scan(prog) => {
                    v.push((LEFT_END, vec![], Move::Right, s.clone()));
                    for &c in &tape {
                        let mut p2 = prog.clone();
                        advance(&mut p2, in_pats, &all, c);
                        v.push((c, vec![], Move::Right, Track::Scan(p2)));
                    }
                    v.push((RIGHT_END, vec![], Move::Left, Track::Rewind(done(prog, in_pats))));
                }
                Track::Rewind(e) => {
                    for &c in &tape {
                        v.push((c, vec![], Move::Left, s.clone()));
                    }
                    for &q0 in &t.initial {
                        v.push((LEFT_END, vec![], Move::Stay, Track::Run(q0, e.clone(), vec![0; k])));
                    }
                }
                Track::Run(q, e, prog) => {
                    for tr in &t.delta[*q] {
                        let mut p2 = prog.clone();
                        for &c in &tr.out {
                            advance(&mut p2, out_pats, e, c);
                        }
                        let (mv, to) = match (t.stay_target(tr.to), tr.dir) {
                            (Some(to), _) => (Move::Stay, to),
                            (None, Dir::Left) => (Move::Left, tr.to),
                            (None, Dir::Right) => (Move::Right, tr.to),
                        };
                        v.push((tr.read, tr.out.clone(), mv, Track::Run(to, e.clone(), p2)));
                    }
                }
            }
            v
        },
    )
}

/// Caps for the two-way procedures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TwoWayCaps {
    /// Prefix behaviours per emptiness check, also the step budget of output searches.
    pub visiting: usize,
    /// Candidates in a minor computation.
    pub minor: usize,
}

impl Default for TwoWayCaps {
    fn default() -> Self {
        TwoWayCaps {
            visiting: 100_000,
            minor: 10_000,
        }
    }
}

/// Length bounds on minimal pairs: inputs `Σ_{i=1}^{|Q|} (2|Q|)^i · |Σ|`, outputs that times
/// `|Q| · γ_max`. Saturates at `usize::MAX`.
pub fn pair_bounds(t: &TwoWayNft) -> (usize, usize) {
    let q = t.num_states() as u128;
    let sigma = t.in_alphabet.len().max(1) as u128;
    let mut in_max: u128 = 0;
    let mut pow: u128 = 1;
    for _ in 0..q {
        pow = pow.saturating_mul(2 * q);
        in_max = in_max.saturating_add(pow.saturating_mul(sigma));
    }
    let out_max = in_max.saturating_mul(q).saturating_mul(t.gamma_max() as u128);
    let clamp = |x: u128| usize::try_from(x).unwrap_or(usize::MAX);
    (clamp(in_max), clamp(out_max))
}

fn pair(v: Word, u: Word) -> WordTuple {
    WordTuple::new(vec![v, u])
}

/// Minimal elements of the upward closure of `R(t)`, as `(output, input)` pairs.
///
/// Each step asks the emptiness check for a pair outside the current closure; the answer is
/// exact, so the loop ends with the true minor unless `caps.minor` candidates are used up.
pub fn min_pairs(t: &TwoWayNft, caps: TwoWayCaps) -> Result<Vec<WordTuple>, TwoWayError> {
    let result = valk_jantzen_minor(
        |m: &Antichain<WordTuple>| -> Result<Option<WordTuple>, TwoWayError> {
            let outs: Vec<Word> = m.iter().map(|p| p.components()[0].clone()).collect();
            let ins: Vec<Word> = m.iter().map(|p| p.components()[1].clone()).collect();
            let restricted = track(t, &ins, &outs, |e, d| e.iter().zip(d).all(|(&a, &b)| !(a && b)));
            let Some(u) = twoway_empty(&restricted, caps.visiting)? else {
                return Ok(None);
            };
            let v = min_outputs(&restricted, &u, caps.visiting)?
                .into_iter()
                .next()
                .ok_or_else(|| TwoWayError::Internal(format!("no output on accepted input {u}")))?;
            Ok(Some(pair(v, u)))
        },
        caps.minor,
    );
    let minor = match result {
        Ok(m) => m,
        Err(MinorError::Oracle(e)) => return Err(e),
        Err(MinorError::FuelExhausted { partial, calls }) => return Err(TwoWayError::Ceiling { partial, calls }),
        Err(MinorError::Contract(p)) => return Err(TwoWayError::Internal(format!("dominated candidate {p}"))),
    };
    let (in_max, out_max) = pair_bounds(t);
    if let Some(p) = minor
        .iter()
        .find(|p| p.components()[1].len() > in_max || p.components()[0].len() > out_max)
    {
        return Err(TwoWayError::Bound {
            pair: p.clone(),
            in_max,
            out_max,
        });
    }
    Ok(minimize(minor))
}

/// A pair of `R(t2)` above `p = (v, u)`, if any.
pub fn pair_up_witness(p: &WordTuple, t2: &TwoWayNft, caps: TwoWayCaps) -> Result<Option<WordTuple>, TwoWayError> {
    let (v, u) = (&p.components()[0], &p.components()[1]);
    let restricted = track(t2, std::slice::from_ref(u), std::slice::from_ref(v), |e, d| {
        e[0] && d[0]
    });
    let Some(u2) = twoway_empty(&restricted, caps.visiting)? else {
        return Ok(None);
    };
    let v2 = min_outputs(&restricted, &u2, caps.visiting)?
        .into_iter()
        .next()
        .ok_or_else(|| TwoWayError::Internal(format!("no output on accepted input {u2}")))?;
    Ok(Some(pair(v2, u2)))
}

/// Whether `(v, u)↑ ∩ R(t2)` is non-empty.
pub fn pair_up_nonempty(p: &WordTuple, t2: &TwoWayNft, caps: TwoWayCaps) -> Result<bool, TwoWayError> {
    Ok(pair_up_witness(p, t2, caps)?.is_some())
}

fn check_alphabets(t1: &TwoWayNft, t2: &TwoWayNft) -> Result<(), TwoWayError> {
    for (a, b) in [(&t1.in_alphabet, &t2.in_alphabet), (&t1.out_alphabet, &t2.out_alphabet)] {
        if a != b {
            return Err(TwoWayError::AlphabetMismatch(a.to_string(), b.to_string()));
        }
    }
    Ok(())
}

/// Decides whether a 2-ary PosPTL relation contains `R(t1)` and misses `R(t2)`.
pub fn sep_posptl_2nft(t1: &TwoWayNft, t2: &TwoWayNft, caps: TwoWayCaps) -> Result<SeparabilityVerdict, TwoWayError> {
    check_alphabets(t1, t2)?;
    let minor = min_pairs(t1, caps)?;
    for p in &minor {
        if let Some(w) = pair_up_witness(p, t2, caps)? {
            return Ok(SeparabilityVerdict::NotSeparable {
                witness: w,
                dominated: p.clone(),
            });
        }
    }
    Ok(SeparabilityVerdict::Separable {
        separator: minor_to_posptl(2, &minor)?,
    })
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum Ctl {
    Check(usize),
    Rewind {
        var: usize,
        j: usize,
        p: usize,
        r: usize,
    },
    Skip {
        var: usize,
        j: usize,
        p: usize,
        r: usize,
        k: usize,
    },
    Work {
        var: usize,
        j: usize,
        p: usize,
        r: usize,
    },
    Tail {
        var: usize,
        p: usize,
        r: usize,
    },
    Finish,
    Accept,
}

/// How one variable's block of the output is produced.
struct Plan {
    /// Input blocks read, in order.
    blocks: Vec<usize>,
    t: Nft,
    a: Nfa,
}

fn nfa_next(a: &Nfa, r: usize, o: Option<Symbol>) -> Vec<usize> {
    match o {
        None => vec![r],
        Some(c) => a
            .successors(r)
            .iter()
            .filter(|(l, _)| *l == Some(c))
            .map(|&(_, q)| q)
            .collect(),
    }
}

/// Two-way transducer whose relation holds the pairs `(encode(η), u)` where `η` solves `f`
/// (components in declared order) and `u` has `n` blocks, block `i` being `η(x_i)` for each
/// independent `x_i` and arbitrary otherwise.
///
/// The machine checks the number of `#`s, then produces the blocks one by one: an independent
/// variable copies its own input block, a defined one rewinds to `⊢` once per term variable,
/// skips to that block and runs its transducer there. Outputs also drive the membership
/// automaton of the variable.
pub fn sl_to_2nft(f: &SlFormula) -> Result<TwoWayNft, TwoWayError> {
    sl_to_2nft_over(f, f.alphabet())
}

fn sl_to_2nft_over(f: &SlFormula, sigma: &Alphabet) -> Result<TwoWayNft, TwoWayError> {
    f.check_right_sided()?;
    let n = f.n();
    if n == 0 {
        return Err(TwoWayError::Internal("formula without variables".into()));
    }
    let plans: Vec<Plan> = (0..n)
        .map(|v| {
            let (blocks, t) = match f.definition(v) {
                Some(r) => (r.inputs.clone(), r.transducer.clone()),
                None => (vec![v], Nft::identity(f.alphabet())),
            };
            Plan {
                blocks,
                t,
                a: f.membership_nfa(v).remove_epsilon(),
            }
        })
        .collect();
    let tape = sigma.with(SEP);
    let body: Vec<Symbol> = tape.iter().collect();
    let mut everywhere = vec![LEFT_END];
    everywhere.extend(body.iter().copied());
    everywhere.push(RIGHT_END);
    let start = |var: usize| -> Vec<Ctl> {
        let pl = &plans[var];
        let mut v = Vec::new();
        for &p in pl.t.initial() {
            for &r in pl.a.initial() {
                v.push(if pl.blocks.is_empty() {
                    Ctl::Tail { var, p, r }
                } else {
                    Ctl::Rewind { var, j: 0, p, r }
                });
            }
        }
        v
    };
    let enter = |var: usize, j: usize, p: usize, r: usize, k: usize| -> Ctl {
        if plans[var].blocks[j] == k {
            Ctl::Work { var, j, p, r }
        } else {
            Ctl::Skip { var, j, p, r, k }
        }
    };
    Ok(build(
        &tape,
        &tape,
        vec![Ctl::Check(0)],
        |c| *c == Ctl::Accept,
        |c| {
            let mut v: Vec<(Symbol, Vec<Symbol>, Move, Ctl)> = Vec::new();
            match *c {
                Ctl::Check(k) => {
                    if k == 0 {
                        v.push((LEFT_END, vec![], Move::Right, Ctl::Check(0)));
                    }
                    for s in sigma.iter() {
                        v.push((s, vec![], Move::Right, Ctl::Check(k)));
                    }
                    if k + 1 < n {
                        v.push((SEP, vec![], Move::Right, Ctl::Check(k + 1)));
                    }
                    if k == n - 1 {
                        for s in start(0) {
                            v.push((RIGHT_END, vec![], Move::Left, s));
                        }
                    }
                }
                Ctl::Rewind { var, j, p, r } => {
                    for &s in body.iter().chain([RIGHT_END].iter()) {
                        v.push((s, vec![], Move::Left, c.clone()));
                    }
                    v.push((LEFT_END, vec![], Move::Right, enter(var, j, p, r, 0)));
                }
                Ctl::Skip { var, j, p, r, k } => {
                    for s in sigma.iter() {
                        v.push((s, vec![], Move::Right, c.clone()));
                    }
                    v.push((SEP, vec![], Move::Right, enter(var, j, p, r, k + 1)));
                }
                Ctl::Work { var, j, p, r } => {
                    let pl = &plans[var];
                    for tr in pl.t.successors(p) {
                        let out: Vec<Symbol> = tr.out.into_iter().collect();
                        for r2 in nfa_next(&pl.a, r, tr.out) {
                            let next = Ctl::Work {
                                var,
                                j,
                                p: tr.to,
                                r: r2,
                            };
                            match tr.inp {
                                Some(s) if sigma.contains(s) => v.push((s, out.clone(), Move::Right, next)),
                                Some(_) => {}
                                None => {
                                    for &s in body.iter().chain([RIGHT_END].iter()) {
                                        v.push((s, out.clone(), Move::Stay, next.clone()));
                                    }
                                }
                            }
                        }
                    }
                    for s in [SEP, RIGHT_END] {
                        if j + 1 < pl.blocks.len() {
                            v.push((s, vec![], Move::Left, Ctl::Rewind { var, j: j + 1, p, r }));
                        } else {
                            v.push((s, vec![], Move::Stay, Ctl::Tail { var, p, r }));
                        }
                    }
                }
                Ctl::Tail { var, p, r } => {
                    let pl = &plans[var];
                    for tr in pl.t.successors(p).iter().filter(|tr| tr.inp.is_none()) {
                        let out: Vec<Symbol> = tr.out.into_iter().collect();
                        for r2 in nfa_next(&pl.a, r, tr.out) {
                            for &s in &everywhere {
                                v.push((s, out.clone(), Move::Stay, Ctl::Tail { var, p: tr.to, r: r2 }));
                            }
                        }
                    }
                    if pl.t.is_final(p) && pl.a.is_final(r) {
                        for &s in &everywhere {
                            if var + 1 < n {
                                for next in start(var + 1) {
                                    v.push((s, vec![SEP], Move::Stay, next));
                                }
                            } else if s == RIGHT_END {
                                v.push((s, vec![], Move::Right, Ctl::Accept));
                            } else {
                                v.push((s, vec![], Move::Right, Ctl::Finish));
                            }
                        }
                    }
                }
                Ctl::Finish => {
                    for &s in &body {
                        v.push((s, vec![], Move::Right, Ctl::Finish));
                    }
                    v.push((RIGHT_END, vec![], Move::Right, Ctl::Accept));
                }
                Ctl::Accept => {}
            }
            v
        },
    ))
}

/// The n-ary separator induced by a 2-ary one on the diagonal: `t` is kept iff
/// `(encode(t), encode(t))` lies in `p`.
pub fn diagonal_separator(p: &PosPtl, n: usize) -> Result<PosPtl, TwoWayError> {
    let mut products = Vec::new();
    for prod in p.products() {
        let lefts = block_expansions(prod[0].pattern(), n);
        let rights = block_expansions(prod[1].pattern(), n);
        for l in &lefts {
            for r in &rights {
                products.extend(product_intersection(l, r));
            }
        }
    }
    Ok(PosPtl::from_products(n, products)?)
}

/// The 2-ary relation `{(w, u) : w ∈ flat(s)}` for an n-ary separator `s`.
pub fn lift_separator(s: &PosPtl) -> Result<PosPtl, TwoWayError> {
    let products = s.products().map(|prod| {
        let mut w = Vec::new();
        for (i, piece) in prod.iter().enumerate() {
            if i > 0 {
                w.push(SEP);
            }
            w.extend(piece.pattern().iter());
        }
        vec![Piece(Word::new(w)), Piece::any()]
    });
    Ok(PosPtl::from_products(2, products)?)
}

/// Result of separating two right-sided formulas.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlSeparation {
    /// Verdict on tuples, in declared variable order.
    pub verdict: SeparabilityVerdict,
    /// Verdict on the relations of the compiled transducers.
    pub relation_verdict: SeparabilityVerdict,
    /// Minimal pairs of the left transducer.
    pub minor: Vec<WordTuple>,
}

/// Decides PosPTL separability of two right-sided formulas over the same variables.
pub fn sep_posptl_rightsided_sl(f1: &SlFormula, f2: &SlFormula, caps: TwoWayCaps) -> Result<SlSeparation, TwoWayError> {
    if f1.vars() != f2.vars() {
        return Err(TwoWayError::VariableMismatch(f1.vars().to_vec(), f2.vars().to_vec()));
    }
    let sigma = f1.alphabet().union(f2.alphabet());
    let t1 = sl_to_2nft_over(f1, &sigma)?;
    let t2 = sl_to_2nft_over(f2, &sigma)?;
    let minor = min_pairs(&t1, caps)?;
    let mut relation_verdict = None;
    for p in &minor {
        if let Some(w) = pair_up_witness(p, &t2, caps)? {
            relation_verdict = Some(SeparabilityVerdict::NotSeparable {
                witness: w,
                dominated: p.clone(),
            });
            break;
        }
    }
    let n = f1.n();
    let (relation_verdict, verdict) = match relation_verdict {
        None => {
            let separator = minor_to_posptl(2, &minor)?;
            let tuple_sep = diagonal_separator(&separator, n)?;
            (
                SeparabilityVerdict::Separable { separator },
                SeparabilityVerdict::Separable { separator: tuple_sep },
            )
        }
        Some(SeparabilityVerdict::NotSeparable { witness, dominated }) => {
            let v = SeparabilityVerdict::NotSeparable {
                witness: decode(&witness.components()[0]),
                dominated: decode(&dominated.components()[0]),
            };
            (SeparabilityVerdict::NotSeparable { witness, dominated }, v)
        }
        Some(v) => (v.clone(), v),
    };
    Ok(SlSeparation {
        verdict,
        relation_verdict,
        minor,
    })
}

/// Keeps the tuples whose last component is `w` and drops that component.
pub fn fix_last_component(p: &PosPtl, w: &Word, alphabet: &Alphabet) -> Result<PosPtl, TwoWayError> {
    let n = p.arity();
    if n == 0 {
        return Ok(p.clone());
    }
    let products = p
        .products()
        .filter(|prod| crate::words::piece_member(&prod[n - 1], w))
        .filter(|prod| prod[..n - 1].iter().all(|piece| piece.pattern().over(alphabet).is_ok()))
        .map(|prod| prod[..n - 1].to_vec());
    Ok(PosPtl::from_products(n - 1, products)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{parse_formula, validate_sl};

    fn w(s: &str) -> Word {
        Word::from(s)
    }

    fn sl(s: &str) -> SlFormula {
        validate_sl(&parse_formula(s, None).unwrap()).unwrap()
    }

    fn example2() -> (SlFormula, SlFormula) {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../instances");
        let l = crate::constraints::parse_formula_file(&dir.join("example2_left.slc")).unwrap();
        let r = crate::constraints::parse_formula_file(&dir.join("example2_right.slc")).unwrap();
        (validate_sl(&l).unwrap(), validate_sl(&r).unwrap())
    }

    fn identity_ab() -> TwoWayNft {
        TwoWayNft::from_nft(&Nft::identity(&Alphabet::from_str("ab")))
    }

    #[test]
    fn run_search_examples() {
        let id = identity_ab();
        let outs = twoway_run_search(&id, &w("ab"), RunMode::Normalized, 10_000).unwrap();
        assert_eq!(outs, [w("ab")].into_iter().collect());
        let outs = twoway_run_search(&id, &w("ab"), RunMode::OutputBound(5), 10_000).unwrap();
        assert_eq!(outs, [w("ab")].into_iter().collect());
        let mut dead = id.clone();
        dead.finals.clear();
        assert!(twoway_run_search(&dead, &w("ab"), RunMode::Normalized, 10_000)
            .unwrap()
            .is_empty());
        assert_eq!(twoway_empty(&dead, 1000).unwrap(), None);
        assert_eq!(
            min_pairs(&id, TwoWayCaps::default()).unwrap(),
            vec![WordTuple::from_strs(&["", ""])]
        );
    }

    #[test]
    fn reversal_needs_two_passes() {
        // Copies the input reversed: walk to ⊣, then output while moving left, then run off ⊣.
        let sigma = Alphabet::from_str("ab");
        let mut t = TwoWayNft::new(sigma.clone(), sigma.clone());
        let (go, back, out, acc) = (t.add_state(), t.add_state(), t.add_state(), t.add_state());
        t.set_initial(go);
        t.set_final(acc);
        t.add_transition(go, LEFT_END, vec![], Dir::Right, go);
        for c in sigma.iter() {
            t.add_transition(go, c, vec![], Dir::Right, go);
            t.add_transition(back, c, vec![c], Dir::Left, back);
            t.add_transition(out, c, vec![], Dir::Right, out);
        }
        t.add_transition(go, RIGHT_END, vec![], Dir::Left, back);
        t.add_transition(back, LEFT_END, vec![], Dir::Right, out);
        t.add_transition(out, RIGHT_END, vec![], Dir::Right, acc);
        let outs = twoway_run_search(&t, &w("aab"), RunMode::Normalized, 10_000).unwrap();
        assert_eq!(outs, [w("baa")].into_iter().collect());
        assert_eq!(twoway_empty(&t, 1000).unwrap(), Some(w("")));
        assert_eq!(min_outputs(&t, &w("ab"), 1000).unwrap(), vec![w("ba")]);
        let back = TwoWayNft::from_json(&t.to_json()).unwrap();
        assert_eq!(
            twoway_run_search(&back, &w("ab"), RunMode::Normalized, 1000).unwrap(),
            [w("ba")].into_iter().collect()
        );
    }

    #[test]
    fn emptiness_of_embedded_nfa() {
        let sigma = Alphabet::from_str("ab");
        let n = Nfa::from_regex("(ab)*b", &sigma).unwrap();
        assert_eq!(twoway_empty(&TwoWayNft::from_nfa(&n), 1000).unwrap(), Some(w("b")));
        let e = Nfa::from_regex("a∅", &sigma).unwrap();
        assert_eq!(twoway_empty(&TwoWayNft::from_nfa(&e), 1000).unwrap(), None);
    }

    #[test]
    fn stays_survive_serialization() {
        let sigma = Alphabet::from_str("a");
        let mut t = Nft::new(sigma.clone(), sigma.clone());
        let q = t.add_state();
        let r = t.add_state();
        t.set_initial(q);
        t.set_final(r);
        t.add_transition(q, None, Some('a'), r);
        let a = TwoWayNft::from_nft(&t);
        let b = TwoWayNft::from_json(&a.to_json()).unwrap();
        for u in ["", "a"] {
            let x = twoway_run_search(&a, &w(u), RunMode::Normalized, 1000).unwrap();
            let y = twoway_run_search(&b, &w(u), RunMode::Normalized, 1000).unwrap();
            assert_eq!(x, y);
        }
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn example2_relations() {
        let (l, r) = example2();
        let t1 = sl_to_2nft(&l).unwrap();
        let outs = twoway_run_search(&t1, &w("#"), RunMode::Normalized, 1_000_000).unwrap();
        assert!(outs.contains(&w("a#")));
        let outs = twoway_run_search(&t1, &w("#f"), RunMode::OutputBound(4), 1_000_000).unwrap();
        assert!(outs.contains(&w("af#f")));
        assert!(outs.iter().all(|o| o.split(SEP)[1] == w("f")));
        assert_eq!(twoway_empty(&t1, 100_000).unwrap(), Some(w("#")));
        let caps = TwoWayCaps::default();
        assert_eq!(min_pairs(&t1, caps).unwrap(), vec![WordTuple::from_strs(&["a#", "#"])]);
        let t2 = sl_to_2nft(&r).unwrap();
        assert!(!pair_up_nonempty(&WordTuple::from_strs(&["a#", "#"]), &t2, caps).unwrap());
        assert!(pair_up_nonempty(&WordTuple::from_strs(&["", ""]), &t2, caps).unwrap());
        assert!(pair_up_nonempty(&WordTuple::from_strs(&["e#e", "e#"]), &t2, caps).unwrap());
    }

    #[test]
    fn example2_separation() {
        let (l, r) = example2();
        let res = sep_posptl_rightsided_sl(&l, &r, TwoWayCaps::default()).unwrap();
        let want = PosPtl::from_products(2, vec![vec![Piece(w("a")), Piece::any()]]).unwrap();
        assert_eq!(res.verdict, SeparabilityVerdict::Separable { separator: want });
        let rel = PosPtl::from_products(2, vec![vec![Piece(w("a#")), Piece(w("#"))]]).unwrap();
        assert_eq!(res.relation_verdict, SeparabilityVerdict::Separable { separator: rel });
    }

    #[test]
    fn identical_formulas_are_not_separable() {
        let f = sl("alphabet a; vars x; x in a*");
        let res = sep_posptl_rightsided_sl(&f, &f, TwoWayCaps::default()).unwrap();
        assert_eq!(
            res.verdict,
            SeparabilityVerdict::NotSeparable {
                witness: WordTuple::from_strs(&[""]),
                dominated: WordTuple::from_strs(&[""]),
            }
        );
        let g = sl("alphabet a; vars x; x in ∅");
        let res = sep_posptl_rightsided_sl(&g, &f, TwoWayCaps::default()).unwrap();
        assert_eq!(
            res.verdict,
            SeparabilityVerdict::Separable {
                separator: PosPtl::empty(1)
            }
        );
    }

    #[test]
    fn independent_variables_copy_their_blocks() {
        let f = sl("alphabet a, b; vars x, y; x in a*; y in b");
        let t = sl_to_2nft(&f).unwrap();
        let sigma = Alphabet::from_str("ab#");
        for u in sigma.words_upto(3) {
            let outs = twoway_run_search(&t, &u, RunMode::Normalized, 100_000).unwrap();
            let parts = u.split(SEP);
            let ok = parts.len() == 2 && parts[0].iter().all(|c| c == 'a') && parts[1] == w("b");
            let want: BTreeSet<Word> = if ok {
                [u.clone()].into_iter().collect()
            } else {
                BTreeSet::new()
            };
            assert_eq!(outs, want, "input {u}");
        }
    }

    #[test]
    fn separator_translation() {
        let p = PosPtl::from_products(2, vec![vec![Piece(w("a#")), Piece(w("#b"))]]).unwrap();
        let d = diagonal_separator(&p, 2).unwrap();
        let sigma = Alphabet::from_str("ab");
        for x in sigma.words_upto(2) {
            for y in sigma.words_upto(2) {
                let t = WordTuple::new(vec![x.clone(), y.clone()]);
                let e = crate::ompa::encode(&t).unwrap();
                let diag = WordTuple::new(vec![e.clone(), e.clone()]);
                assert_eq!(d.member(&t).unwrap(), p.member(&diag).unwrap());
                let lifted = lift_separator(&d).unwrap();
                assert_eq!(lifted.member(&diag).unwrap(), p.member(&diag).unwrap());
            }
        }
    }

    #[test]
    fn bounds_are_finite_for_small_machines() {
        let (in_max, out_max) = pair_bounds(&identity_ab());
        assert!(in_max > 0 && out_max > 0);
    }
}
