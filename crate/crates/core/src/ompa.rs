//! Ordered multi-pushdown automata and the encoding of straight-line formulas into them.
//!
//! Stacks are numbered from 0 and hold symbols above an implicit bottom marker. A transition
//! may pop only from stack `e` after checking that stacks `0..e` are empty.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::automata::{parse_symbol, AutomataError, Dfa, Nfa, Nft, DETERMINIZE_CAP};
use crate::constraints::{ConstraintError, SlFormula};
use crate::pda::SeparabilityVerdict;
use crate::search::{shortest_lex, Edges};
use crate::words::{
    is_subword, minimize, valk_jantzen_minor, Alphabet, MinorError, Piece, PosPtl, Symbol, Word, WordTuple, WordsError,
    SEP,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OmpaError {
    #[error("component {0} contains '#'")]
    Encode(Word),
    #[error("term variable x{var} is not after x{index}")]
    Indexing { index: usize, var: usize },
    #[error("alphabet mismatch: {0} vs {1}")]
    AlphabetMismatch(String, String),
    #[error("search exceeded {0} configurations")]
    Fuel(usize),
    #[error("malformed OMPA: {0}")]
    Format(String),
    #[error(transparent)]
    Automata(#[from] AutomataError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Words(#[from] WordsError),
}

/// Pops from stack `empty_prefix` (if `pop` is set) once stacks `0..empty_prefix` are empty.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OmpaTrans {
    pub from: usize,
    pub input: Option<Symbol>,
    pub empty_prefix: usize,
    pub pop: Option<Symbol>,
    /// Words pushed onto stacks; the first symbol ends on top.
    pub push: Vec<(usize, Vec<Symbol>)>,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ompa {
    alphabet: Alphabet,
    stacks: usize,
    delta: Vec<Vec<OmpaTrans>>,
    initial: BTreeSet<usize>,
    finals: BTreeSet<usize>,
    /// Per-state bound on total stack height, as a multiple of the input symbols other than
    /// `#` still to be read. Used only to prune simulations.
    height_factor: Vec<Option<usize>>,
}

impl Ompa {
    pub fn new(alphabet: Alphabet, stacks: usize) -> Self {
        Ompa {
            alphabet,
            stacks,
            delta: Vec::new(),
            initial: BTreeSet::new(),
            finals: BTreeSet::new(),
            height_factor: Vec::new(),
        }
    }

    pub fn add_state(&mut self, height_factor: Option<usize>) -> usize {
        self.delta.push(Vec::new());
        self.height_factor.push(height_factor);
        self.delta.len() - 1
    }

    pub fn add_transition(&mut self, t: OmpaTrans) {
        assert!(t.empty_prefix <= self.stacks, "empty prefix beyond the stack count");
        assert!(
            t.pop.is_none() || t.empty_prefix < self.stacks,
            "pop from a missing stack"
        );
        assert!(
            t.push.iter().all(|(s, _)| *s < self.stacks),
            "push onto a missing stack"
        );
        if !self.delta[t.from].contains(&t) {
            self.delta[t.from].push(t);
        }
    }

    /// Plain move with no stack operation.
    fn add_move(&mut self, from: usize, input: Option<Symbol>, to: usize) {
        self.add_transition(OmpaTrans {
            from,
            input,
            empty_prefix: 0,
            pop: None,
            push: vec![],
            to,
        });
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

    pub fn initial(&self) -> &BTreeSet<usize> {
        &self.initial
    }

    pub fn finals(&self) -> &BTreeSet<usize> {
        &self.finals
    }

    pub fn num_stacks(&self) -> usize {
        self.stacks
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn transitions(&self) -> impl Iterator<Item = &OmpaTrans> {
        self.delta.iter().flatten()
    }

    pub fn num_transitions(&self) -> usize {
        self.delta.iter().map(Vec::len).sum()
    }

    fn apply(&self, t: &OmpaTrans, stacks: &[Vec<Symbol>]) -> Option<Vec<Vec<Symbol>>> {
        if stacks[..t.empty_prefix].iter().any(|s| !s.is_empty()) {
            return None;
        }
        let mut st = stacks.to_vec();
        if let Some(a) = t.pop {
            if st[t.empty_prefix].last() != Some(&a) {
                return None;
            }
            st[t.empty_prefix].pop();
        }
        for (s, w) in &t.push {
            st[*s].extend(w.iter().rev());
        }
        Some(st)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "alphabet": self.alphabet,
            "stacks": self.stacks,
            "states": self.num_states(),
            "initial": self.initial,
            "final": self.finals,
            "height_factors": self.height_factor,
            "transitions": self.transitions().map(|t| json!({
                "from": t.from,
                "to": t.to,
                "input": t.input.map(String::from),
                "empty": t.empty_prefix,
                "pop": t.pop.map(String::from),
                "push": t.push.iter().map(|(s, w)| json!([s, w.iter().collect::<String>()])).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Ompa, OmpaError> {
        let bad = |m: &str| OmpaError::Format(m.to_string());
        let alphabet = crate::automata::parse_alphabet(v.get("alphabet"))?;
        let stacks = v
            .get("stacks")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("missing stacks"))? as usize;
        let states = v
            .get("states")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("missing states"))? as usize;
        let mut a = Ompa::new(alphabet, stacks);
        let factors = v.get("height_factors").and_then(Value::as_array);
        for q in 0..states {
            let f = factors
                .and_then(|fs| fs.get(q))
                .and_then(Value::as_u64)
                .map(|x| x as usize);
            a.add_state(f);
        }
        let ids = |key: &str| -> Result<Vec<usize>, OmpaError> {
            v.get(key)
                .and_then(Value::as_array)
                .ok_or_else(|| bad(key))?
                .iter()
                .map(|x| {
                    x.as_u64()
                        .map(|x| x as usize)
                        .filter(|&x| x < states)
                        .ok_or_else(|| bad(key))
                })
                .collect()
        };
        for q in ids("initial")? {
            a.set_initial(q);
        }
        for q in ids("final")? {
            a.set_final(q);
        }
        let sym = |x: Option<&Value>| -> Result<Option<Symbol>, OmpaError> {
            match x {
                None | Some(Value::Null) => Ok(None),
                Some(s) => Ok(Some(parse_symbol(s)?)),
            }
        };
        for t in v
            .get("transitions")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing transitions"))?
        {
            let num = |k: &str| t.get(k).and_then(Value::as_u64).map(|x| x as usize);
            let from = num("from")
                .filter(|&q| q < states)
                .ok_or_else(|| bad("transition from"))?;
            let to = num("to").filter(|&q| q < states).ok_or_else(|| bad("transition to"))?;
            let empty_prefix = num("empty").unwrap_or(0);
            let mut push = Vec::new();
            for p in t.get("push").and_then(Value::as_array).into_iter().flatten() {
                let s = p.get(0).and_then(Value::as_u64).ok_or_else(|| bad("push stack"))? as usize;
                let w = p.get(1).and_then(Value::as_str).ok_or_else(|| bad("push word"))?;
                push.push((s, w.chars().collect()));
            }
            let tr = OmpaTrans {
                from,
                input: sym(t.get("input"))?,
                empty_prefix,
                pop: sym(t.get("pop"))?,
                push,
                to,
            };
            if tr.empty_prefix > stacks
                || (tr.pop.is_some() && tr.empty_prefix >= stacks)
                || tr.push.iter().any(|(s, _)| *s >= stacks)
            {
                return Err(bad("stack index out of range"));
            }
            a.add_transition(tr);
        }
        Ok(a)
    }
}

impl fmt::Display for Ompa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "OMPA with {} states, {} stacks, {} transitions over {}",
            self.num_states(),
            self.stacks,
            self.num_transitions(),
            self.alphabet
        )
    }
}

/// `w_1 # w_2 # … # w_n`.
pub fn encode(t: &WordTuple) -> Result<Word, OmpaError> {
    let mut out = Vec::new();
    for (i, w) in t.components().iter().enumerate() {
        if w.iter().any(|c| c == SEP) {
            return Err(OmpaError::Encode(w.clone()));
        }
        if i > 0 {
            out.push(SEP);
        }
        out.extend(w.iter());
    }
    Ok(Word::new(out))
}

pub fn decode(w: &Word) -> WordTuple {
    WordTuple::new(w.split(SEP))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimResult {
    Accepted,
    Rejected,
    BudgetExhausted,
}

type SimConfig = (usize, usize, Vec<Vec<Symbol>>);

/// Breadth-first search over configurations on input `w`.
///
/// States with a height factor prune configurations that hold more stack symbols than the
/// factor times the non-`#` input left.
pub fn ompa_simulate(a: &Ompa, w: &Word, budget: usize) -> SimResult {
    let s = w.symbols();
    if s.iter().any(|c| !a.alphabet.contains(*c)) {
        return SimResult::Rejected;
    }
    // rest[i]: symbols other than '#' in s[i..]
    let mut rest = vec![0; s.len() + 1];
    for i in (0..s.len()).rev() {
        rest[i] = rest[i + 1] + usize::from(s[i] != SEP);
    }
    let mut seen: HashSet<SimConfig> = HashSet::new();
    let mut queue: VecDeque<SimConfig> = VecDeque::new();
    for &q in &a.initial {
        queue.push_back((q, 0, vec![Vec::new(); a.stacks]));
    }
    while let Some(cfg) = queue.pop_front() {
        if seen.contains(&cfg) {
            continue;
        }
        if seen.len() >= budget {
            return SimResult::BudgetExhausted;
        }
        let (q, i, stacks) = &cfg;
        if *i == s.len() && a.finals.contains(q) && stacks.iter().all(Vec::is_empty) {
            return SimResult::Accepted;
        }
        for t in &a.delta[*q] {
            let j = match t.input {
                None => *i,
                Some(c) if *i < s.len() && s[*i] == c => i + 1,
                Some(_) => continue,
            };
            let Some(st) = a.apply(t, stacks) else {
                continue;
            };
            if let Some(f) = a.height_factor[t.to] {
                let h: usize = st.iter().map(Vec::len).sum();
                if h > f * rest[j] {
                    continue;
                }
            }
            let next = (t.to, j, st);
            if !seen.contains(&next) {
                queue.push_back(next);
            }
        }
        seen.insert(cfg);
    }
    SimResult::Rejected
}

/// Accepted words up to `max_len`, or an error naming the first word whose simulation ran out.
pub fn accepted_upto(a: &Ompa, max_len: usize, budget: usize) -> Result<BTreeSet<Word>, OmpaError> {
    let mut out = BTreeSet::new();
    for w in a.alphabet.words_upto(max_len) {
        match ompa_simulate(a, &w, budget) {
            SimResult::Accepted => {
                out.insert(w);
            }
            SimResult::Rejected => {}
            SimResult::BudgetExhausted => return Err(OmpaError::Fuel(budget)),
        }
    }
    Ok(out)
}

/// The projection onto `b`: other input symbols become silent. Empty if `b ⊄ Σ`.
pub fn b_projection(a: &Ompa, b: &Alphabet) -> Ompa {
    if !b.is_subset(&a.alphabet) {
        let mut e = Ompa::new(b.clone(), a.stacks);
        let q = e.add_state(None);
        e.set_initial(q);
        return e;
    }
    let mut out = a.clone();
    out.alphabet = b.clone();
    for ts in out.delta.iter_mut() {
        let mut kept: Vec<OmpaTrans> = Vec::new();
        for mut t in ts.drain(..) {
            if t.input.is_some_and(|c| !b.contains(c)) {
                t.input = None;
            }
            if !kept.contains(&t) {
                kept.push(t);
            }
        }
        *ts = kept;
    }
    // Silent moves invalidate height pruning based on input length.
    out.height_factor = vec![None; out.num_states()];
    out
}

/// Adds loops on every state reading any symbol of `b` without touching the stacks.
pub fn b_upward_closure(a: &Ompa, b: &Alphabet) -> Ompa {
    let mut out = a.clone();
    out.alphabet = a.alphabet.union(b);
    for q in 0..out.num_states() {
        for c in b.iter() {
            out.add_move(q, Some(c), q);
        }
    }
    if !b.is_empty() {
        out.height_factor = vec![None; out.num_states()];
    }
    out
}

/// Product with an NFA on the control states; stacks are untouched.
pub fn intersect_regular(a: &Ompa, r: &Nfa) -> Result<Ompa, OmpaError> {
    if a.alphabet != *r.alphabet() {
        return Err(OmpaError::AlphabetMismatch(
            a.alphabet.to_string(),
            r.alphabet().to_string(),
        ));
    }
    let nr = r.num_states();
    let mut out = Ompa::new(a.alphabet.clone(), a.stacks);
    for q in 0..a.num_states() {
        for _ in 0..nr {
            out.add_state(a.height_factor[q]);
        }
    }
    let id = |q: usize, p: usize| q * nr + p;
    for q in 0..a.num_states() {
        for p in 0..nr {
            for (l, p2) in r.successors(p) {
                if l.is_none() {
                    out.add_move(id(q, p), None, id(q, *p2));
                }
            }
            for t in &a.delta[q] {
                let targets: Vec<usize> = match t.input {
                    None => vec![p],
                    Some(c) => r
                        .successors(p)
                        .iter()
                        .filter(|(l, _)| *l == Some(c))
                        .map(|(_, p2)| *p2)
                        .collect(),
                };
                for p2 in targets {
                    out.add_transition(OmpaTrans {
                        from: id(q, p),
                        to: id(t.to, p2),
                        ..t.clone()
                    });
                }
            }
        }
    }
    for &q in &a.initial {
        for &p in r.initial() {
            out.set_initial(id(q, p));
        }
    }
    for &q in &a.finals {
        for &p in r.finals() {
            out.set_final(id(q, p));
        }
    }
    Ok(out)
}

/// Number of stacks of the gadget for constraint `i` of `n` variables with a term of length `t`.
pub fn gadget_stacks(n: usize, i: usize, t: usize) -> usize {
    3 * n + t + 2 - 3 * i
}

/// Stacks of the whole encoding: `n − k + Σ (2n − 2i + 2 + |t_i|)`.
pub fn sl_stacks(n: usize, term_lens: &[usize]) -> usize {
    let k = term_lens.len();
    n - k
        + term_lens
            .iter()
            .enumerate()
            .map(|(i, t)| 2 * n - 2 * (i + 1) + 2 + t)
            .sum::<usize>()
}

/// Entry and exit states of a gadget embedded in a larger automaton.
struct GadgetPorts {
    init: usize,
    fin: usize,
}

/// Adds the four-phase gadget for `(x_i, t) ∈ R(T)` with its stacks starting at `off`.
///
/// Variables are numbered `1..=n` in straight-line order; `term` lists positions `> i`.
/// Local stack layout (0-based): inputs `0..n−i`, reversed copies `n−i..2(n−i)`, one stack
/// per term position, two output stacks, then the copies of `x_{i+1} … x_n`.
fn build_gadget(
    a: &mut Ompa,
    off: usize,
    i: usize,
    term: &[usize],
    t: &Nft,
    n: usize,
    sigma: &Alphabet,
) -> Result<GadgetPorts, OmpaError> {
    if let Some(&var) = term.iter().find(|&&v| v <= i || v > n) {
        return Err(OmpaError::Indexing { index: i, var });
    }
    let m = n - i;
    let tl = term.len();
    let factor = Some(tl + 2);
    let o1 = 2 * m + tl;
    let o2 = o1 + 1;
    let tail = |k: usize| o2 + k; // k in 1..=m
    let init = a.add_state(factor);
    let q2 = a.add_state(factor);
    let tstates: Vec<usize> = (0..t.num_states()).map(|_| a.add_state(factor)).collect();
    let q4 = a.add_state(factor);
    let fin = a.add_state(factor);
    let tr = |from, empty: usize, pop: Option<Symbol>, push: Vec<(usize, Vec<Symbol>)>, to| OmpaTrans {
        from,
        input: None,
        empty_prefix: off + empty,
        pop,
        push: push.into_iter().map(|(s, w)| (off + s, w)).collect(),
        to,
    };
    // Phase 1: stack j moves, reversed, to stack m + j.
    for j in 0..m {
        for c in sigma.iter() {
            a.add_transition(tr(init, j, Some(c), vec![(m + j, vec![c])], init));
        }
    }
    a.add_transition(tr(init, m, None, vec![], q2));
    // Phase 2: stack m + k − 1 fans out to the term stacks of x_{i+k} and to its tail stack.
    for k in 1..=m {
        for c in sigma.iter() {
            let mut push: Vec<(usize, Vec<Symbol>)> = term
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == i + k)
                .map(|(j, _)| (2 * m + j, vec![c]))
                .collect();
            push.push((tail(k), vec![c]));
            a.add_transition(tr(q2, m + k - 1, Some(c), push, q2));
        }
    }
    // Phase 3: the transducer reads from the first non-empty term stack and writes to O1.
    for &p0 in t.initial() {
        a.add_transition(tr(q2, 2 * m, None, vec![], tstates[p0]));
    }
    for x in t.transitions() {
        let push = x.out.map(|b| vec![(o1, vec![b])]).unwrap_or_default();
        match x.inp {
            None => a.add_transition(tr(tstates[x.from], 2 * m, None, push, tstates[x.to])),
            Some(c) => {
                for j in 0..tl {
                    a.add_transition(tr(tstates[x.from], 2 * m + j, Some(c), push.clone(), tstates[x.to]));
                }
            }
        }
    }
    // Phase 4: once the term stacks are empty, O1 is reversed into O2.
    for &pf in t.finals() {
        a.add_transition(tr(tstates[pf], 2 * m + tl, None, vec![], q4));
    }
    for c in sigma.iter() {
        a.add_transition(tr(q4, o1, Some(c), vec![(o2, vec![c])], q4));
    }
    a.add_transition(tr(q4, o1 + 1, None, vec![], fin));
    Ok(GadgetPorts { init, fin })
}

/// The gadget for constraint `i` on its own, with `3n + |t| + 2 − 3i` stacks.
pub fn rel_gadget(i: usize, term: &[usize], t: &Nft, n: usize, sigma: &Alphabet) -> Result<Ompa, OmpaError> {
    if i == 0 || i > n {
        return Err(OmpaError::Indexing { index: i, var: i });
    }
    let mut a = Ompa::new(sigma.clone(), gadget_stacks(n, i, term.len()));
    let ports = build_gadget(&mut a, 0, i, term, t, n, sigma)?;
    a.set_initial(ports.init);
    a.set_final(ports.fin);
    Ok(a)
}

/// OMPA accepting the encodings of the solutions, with components in straight-line order.
pub fn sl_to_ompa(f: &SlFormula) -> Result<Ompa, OmpaError> {
    compile(f, false)
}

/// Like [`sl_to_ompa`], but the encoding lists the variables in declared order.
///
/// When the two orders differ, the values are moved through two rounds of `n` extra stacks
/// before the output pass, so the machine has `2n` more stacks than [`sl_stacks`] says.
pub fn sl_to_ompa_declared(f: &SlFormula) -> Result<Ompa, OmpaError> {
    let permute = f.order().iter().enumerate().any(|(i, &v)| i != v);
    compile(f, permute)
}

fn compile(f: &SlFormula, permute: bool) -> Result<Ompa, OmpaError> {
    let n = f.n();
    let k = f.k();
    let sigma = f.alphabet().clone();
    let rank = f.rank();
    let terms: Vec<Vec<usize>> = f
        .relations()
        .iter()
        .map(|r| r.inputs.iter().map(|&v| rank[v] + 1).collect())
        .collect();
    let total = sl_stacks(n, &terms.iter().map(Vec::len).collect::<Vec<_>>());
    let mut a = Ompa::new(sigma.with(SEP), if permute { total + 2 * n } else { total });

    // Guess the independent variables x_{k+1} … x_n into stacks 0 … n−k−1.
    let guess = a.add_state(Some(1));
    a.set_initial(guess);
    for s in 0..n - k {
        for c in sigma.iter() {
            a.add_transition(OmpaTrans {
                from: guess,
                input: None,
                empty_prefix: 0,
                pop: None,
                push: vec![(s, vec![c])],
                to: guess,
            });
        }
    }
    // Gadgets k down to 1, each window overlapping the previous one's result stacks.
    let mut prev = guess;
    let mut off = 0;
    for i in (1..=k).rev() {
        if i < k {
            off += gadget_stacks(n, i + 1, terms[i].len()) - (n - i);
        }
        let r = &f.relations()[i - 1];
        let ports = build_gadget(&mut a, off, i, &terms[i - 1], &r.transducer, n, &sigma)?;
        a.add_move(prev, None, ports.init);
        prev = ports.fin;
    }
    // outputs[j] = (stack, variable) popped j-th by the output pass.
    let mut outputs: Vec<(usize, usize)> = (0..n).map(|j| (total - n + j, f.order()[j])).collect();
    if permute {
        // Round one reverses each value into stack total + j, round two reverses it back into
        // total + n + (declared index), so the output pass sees declared order.
        let round = |a: &mut Ompa, prev: usize, from: &dyn Fn(usize) -> usize, to: &dyn Fn(usize) -> usize| {
            let mut prev = prev;
            for j in 0..n {
                let (src, dst) = (from(j), to(j));
                let q = a.add_state(Some(1));
                a.add_move(prev, None, q);
                for c in sigma.iter() {
                    a.add_transition(OmpaTrans {
                        from: q,
                        input: None,
                        empty_prefix: src,
                        pop: Some(c),
                        push: vec![(dst, vec![c])],
                        to: q,
                    });
                }
                let done = a.add_state(Some(1));
                a.add_transition(OmpaTrans {
                    from: q,
                    input: None,
                    empty_prefix: src + 1,
                    pop: None,
                    push: vec![],
                    to: done,
                });
                prev = done;
            }
            prev
        };
        let order = f.order().to_vec();
        prev = round(&mut a, prev, &|j| total - n + j, &|j| total + j);
        prev = round(&mut a, prev, &|j| total + j, &|j| total + n + order[j]);
        outputs = (0..n).map(|v| (total + n + v, v)).collect();
    }
    // Output pass: pop each value through its membership automaton.
    let mut entry = prev;
    for v in 1..=n {
        let (stack, var) = outputs[v - 1];
        let nfa = f.membership_nfa(var);
        let states: Vec<usize> = (0..nfa.num_states()).map(|_| a.add_state(Some(1))).collect();
        for &q in nfa.initial() {
            a.add_move(entry, None, states[q]);
        }
        for (p, l, q) in nfa.transitions() {
            match l {
                None => a.add_move(states[p], None, states[q]),
                Some(c) => a.add_transition(OmpaTrans {
                    from: states[p],
                    input: Some(c),
                    empty_prefix: stack,
                    pop: Some(c),
                    push: vec![],
                    to: states[q],
                }),
            }
        }
        let done = a.add_state(Some(1));
        for &q in nfa.finals() {
            a.add_transition(OmpaTrans {
                from: states[q],
                input: None,
                empty_prefix: stack + 1,
                pop: None,
                push: vec![],
                to: done,
            });
        }
        if v < n {
            let next = a.add_state(Some(1));
            a.add_move(done, Some(SEP), next);
            entry = next;
        } else {
            a.set_final(done);
        }
    }
    if n == 0 {
        a.set_final(entry);
    }
    Ok(a)
}

/// Flat separator over `Σ ∪ {#}` for the encodings of an n-ary separator.
pub fn tuple_to_flat(p: &PosPtl) -> Result<PosPtl, OmpaError> {
    let products = p.products().map(|prod| {
        let mut w = Vec::new();
        for (i, piece) in prod.iter().enumerate() {
            if i > 0 {
                w.push(SEP);
            }
            w.extend(piece.pattern().iter());
        }
        vec![Piece(Word::new(w))]
    });
    Ok(PosPtl::from_products(1, products)?)
}

/// Ways to cut a flat pattern into `n` blocks after padding it with the missing `#`s.
pub(crate) fn block_expansions(pattern: &Word, n: usize) -> Vec<Vec<Piece>> {
    let have = pattern.count(SEP);
    if n == 0 || have > n - 1 {
        return Vec::new();
    }
    let mut words = vec![pattern.symbols().to_vec()];
    for _ in have..n - 1 {
        let mut next = BTreeSet::new();
        for w in &words {
            for pos in 0..=w.len() {
                let mut x = w.clone();
                x.insert(pos, SEP);
                next.insert(x);
            }
        }
        words = next.into_iter().collect();
    }
    words
        .into_iter()
        .map(|w| Word::new(w).split(SEP).into_iter().map(Piece).collect())
        .collect()
}

/// n-ary separator agreeing with a flat one on words with exactly `n − 1` separators.
pub fn flat_to_tuple(p: &PosPtl, n: usize) -> Result<PosPtl, OmpaError> {
    let products = p.products().flat_map(|prod| block_expansions(prod[0].pattern(), n));
    Ok(PosPtl::from_products(n, products)?)
}

/// Shortlex-least word of `L(A) ∩ L(D)`, or `None` once the configuration space is exhausted.
fn ompa_find(a: &Ompa, d: &Dfa, cap: usize) -> Result<Option<Word>, OmpaError> {
    // Iterative deepening on the word length `bound`. States with a height factor keep at most
    // factor × (bound − symbols read) stack symbols, which every accepting run of a word of
    // length ≤ bound respects, so each round is complete up to `bound`. If every pruned move
    // leads to a (state, DFA state, stacks) triple the round settled, those triples are closed
    // under moves and the intersection is empty.
    let dead = d.dead_states();
    type Node = (usize, usize, usize, Vec<Vec<Symbol>>);
    let mut used = 0;
    let mut bound: usize = 0;
    loop {
        let pruned: RefCell<HashSet<(usize, usize, Vec<Vec<Symbol>>)>> = RefCell::new(HashSet::new());
        let settled: RefCell<HashSet<(usize, usize, Vec<Vec<Symbol>>)>> = RefCell::new(HashSet::new());
        let init: Vec<Node> = a
            .initial
            .iter()
            .map(|&q| (q, d.initial, 0, vec![Vec::new(); a.stacks]))
            .filter(|n| !dead[n.1])
            .collect();
        let found = shortest_lex(
            init,
            |(q, p, read, st): &Node| -> Edges<Node> {
                settled.borrow_mut().insert((*q, *p, st.clone()));
                let mut out = Vec::new();
                for t in &a.delta[*q] {
                    let (p2, read2) = match t.input {
                        None => (*p, *read),
                        Some(c) => match d.step(*p, c) {
                            Some(r) => (r, read + 1),
                            None => continue,
                        },
                    };
                    if dead[p2] {
                        continue;
                    }
                    let Some(s2) = a.apply(t, st) else {
                        continue;
                    };
                    let too_high = a.height_factor[t.to]
                        .is_some_and(|f| s2.iter().map(Vec::len).sum::<usize>() > f * bound.saturating_sub(read2));
                    if read2 > bound || too_high {
                        pruned.borrow_mut().insert((t.to, p2, s2));
                        continue;
                    }
                    out.push((t.input, (t.to, p2, read2, s2)));
                }
                out
            },
            |(q, p, _, st)| a.finals.contains(q) && d.finals[*p] && st.iter().all(Vec::is_empty),
            cap - used,
        )
        .map_err(|_| OmpaError::Fuel(cap))?;
        if let Some(f) = found {
            return Ok(Some(f.word));
        }
        let settled = settled.into_inner();
        if pruned.into_inner().iter().all(|n| settled.contains(n)) {
            return Ok(None);
        }
        used += settled.len();
        if used >= cap {
            return Err(OmpaError::Fuel(cap));
        }
        bound += 1;
    }
}

fn closure_dfa(alphabet: &Alphabet, m: &[Word]) -> Result<Dfa, OmpaError> {
    let mut nfa = Nfa::empty_language(alphabet);
    for w in m {
        nfa = nfa.union(&Nfa::upward_closure(alphabet, w))?;
    }
    Ok(nfa.determinize(DETERMINIZE_CAP)?.minimize())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OmpaSepError {
    #[error("fuel exhausted; candidate minor so far: {partial:?}")]
    FuelExhausted { partial: Vec<Word> },
    #[error(transparent)]
    Ompa(#[from] OmpaError),
}

/// Semi-decision of PosPTL separability for two OMPAs.
///
/// Each minor step and the final intersection test are bounded searches with `fuel`
/// configurations; running out is reported, never guessed.
pub fn posptl_sep_ompa(a1: &Ompa, a2: &Ompa, fuel: usize) -> Result<SeparabilityVerdict, OmpaSepError> {
    if a1.alphabet != a2.alphabet {
        return Err(OmpaError::AlphabetMismatch(a1.alphabet.to_string(), a2.alphabet.to_string()).into());
    }
    let sigma = a1.alphabet.clone();
    let mut ran_out = false;
    let mut last: Vec<Word> = Vec::new();
    let minor = valk_jantzen_minor(
        |m| -> Result<Option<Word>, OmpaError> {
            last = m.as_slice().to_vec();
            let outside = closure_dfa(&sigma, m.as_slice())?.complement();
            match ompa_find(a1, &outside, fuel) {
                Err(OmpaError::Fuel(_)) => {
                    ran_out = true;
                    Err(OmpaError::Fuel(fuel))
                }
                other => other,
            }
        },
        fuel,
    );
    let minor = match minor {
        Ok(m) => m,
        Err(MinorError::FuelExhausted { partial, .. }) => return Err(OmpaSepError::FuelExhausted { partial }),
        Err(MinorError::Oracle(e)) => {
            return Err(match e {
                OmpaError::Fuel(_) if ran_out => OmpaSepError::FuelExhausted { partial: last },
                e => e.into(),
            })
        }
        Err(MinorError::Contract(w)) => {
            return Err(OmpaError::Format(format!("oracle returned dominated word {w}")).into())
        }
    };
    let minor = minimize(minor);
    let inside = closure_dfa(&sigma, &minor)?;
    match ompa_find(a2, &inside, fuel) {
        Ok(None) => {
            let tuples: Vec<WordTuple> = minor.into_iter().map(|w| WordTuple::new(vec![w])).collect();
            Ok(SeparabilityVerdict::Separable {
                separator: crate::words::minor_to_posptl(1, &tuples).map_err(OmpaError::from)?,
            })
        }
        Ok(Some(w)) => {
            let m = minor
                .into_iter()
                .find(|m| is_subword(m, &w))
                .ok_or_else(|| OmpaError::Format(format!("{w} dominates nothing")))?;
            Ok(SeparabilityVerdict::NotSeparable {
                witness: WordTuple::new(vec![w]),
                dominated: WordTuple::new(vec![m]),
            })
        }
        Err(OmpaError::Fuel(_)) => Err(OmpaSepError::FuelExhausted { partial: minor }),
        Err(e) => Err(e.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{parse_formula, validate_sl};

    fn sl(s: &str) -> SlFormula {
        validate_sl(&parse_formula(s, None).unwrap()).unwrap()
    }

    fn w(s: &str) -> Word {
        Word::from(s)
    }

    fn accepts(a: &Ompa, s: &str) -> bool {
        match ompa_simulate(a, &w(s), 1_000_000) {
            SimResult::Accepted => true,
            SimResult::Rejected => false,
            SimResult::BudgetExhausted => panic!("budget on {s}"),
        }
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode(&WordTuple::from_strs(&["ab", "c"])).unwrap(), w("ab#c"));
        assert_eq!(encode(&WordTuple::from_strs(&["", ""])).unwrap(), w("#"));
        assert!(encode(&WordTuple::from_strs(&["a#"])).is_err());
        let t = WordTuple::from_strs(&["", "ab", "b"]);
        assert_eq!(decode(&encode(&t).unwrap()), t);
    }

    fn single_a() -> Ompa {
        let mut a = Ompa::new(Alphabet::from_str("ab"), 1);
        let p = a.add_state(None);
        let q = a.add_state(None);
        a.set_initial(p);
        a.set_final(q);
        a.add_move(p, Some('a'), q);
        a
    }

    #[test]
    fn simulate_examples() {
        let a = single_a();
        assert!(accepts(&a, "a"));
        assert!(!accepts(&a, "x"));
        let f = sl("alphabet a, b; vars x1, x2; x1 in a*; (x1, x2) in Id");
        let o = sl_to_ompa(&f).unwrap();
        assert_eq!(o.num_stacks(), 6);
        assert!(accepts(&o, "a#a"));
        assert!(accepts(&o, "aa#aa"));
        assert!(!accepts(&o, "a#b"));
    }

    #[test]
    fn trio_operations() {
        // accepts exactly "ab"
        let mut a = Ompa::new(Alphabet::from_str("abc"), 1);
        let s: Vec<usize> = (0..3).map(|_| a.add_state(None)).collect();
        a.set_initial(s[0]);
        a.set_final(s[2]);
        a.add_move(s[0], Some('a'), s[1]);
        a.add_move(s[1], Some('b'), s[2]);
        let p = b_projection(&a, &Alphabet::from_str("b"));
        assert!(accepts(&p, "b") && !accepts(&p, "ab"));
        assert!(!accepts(&b_projection(&a, &Alphabet::from_str("bz")), "b"));
        let u = b_upward_closure(&a, &Alphabet::from_str("c"));
        assert!(accepts(&u, "cacbc") && !accepts(&u, "ca"));
        let all = Nfa::universal(a.alphabet());
        let i = intersect_regular(&a, &all).unwrap();
        assert!(accepts(&i, "ab"));
        let none = Nfa::empty_language(a.alphabet());
        assert!(!accepts(&intersect_regular(&a, &none).unwrap(), "ab"));
    }

    /// Final stack contents reachable from `start` without input.
    fn gadget_results(g: &Ompa, start: Vec<Vec<Symbol>>) -> Vec<Vec<Vec<Symbol>>> {
        let mut seen = HashSet::new();
        let mut todo = vec![(*g.initial.iter().next().unwrap(), start)];
        let mut finals = Vec::new();
        while let Some((q, st)) = todo.pop() {
            if !seen.insert((q, st.clone())) || st.iter().map(Vec::len).sum::<usize>() > 6 {
                continue;
            }
            if g.finals.contains(&q) {
                finals.push(st.clone());
            }
            for t in &g.delta[q] {
                if let Some(s2) = g.apply(t, &st) {
                    todo.push((t.to, s2));
                }
            }
        }
        finals
    }

    #[test]
    fn gadget_identity() {
        let sigma = Alphabet::from_str("a");
        let g = rel_gadget(1, &[2], &Nft::identity(&sigma), 2, &sigma).unwrap();
        assert_eq!(g.num_stacks(), 6);
        let start = vec![vec!['a'], vec![], vec![], vec![], vec![], vec![]];
        assert_eq!(
            gadget_results(&g, start.clone()),
            vec![vec![vec![], vec![], vec![], vec![], vec!['a'], vec!['a']]]
        );

        let empty = Nft::new(sigma.clone(), sigma.clone());
        let g = rel_gadget(1, &[2], &empty, 2, &sigma).unwrap();
        assert!(gadget_results(&g, start).is_empty());
        assert!(rel_gadget(2, &[1], &Nft::identity(&sigma), 2, &sigma).is_err());
    }

    #[test]
    fn formulas_without_relations() {
        let f = sl("alphabet a, b; vars x, y; x in a; y in b*");
        let o = sl_to_ompa(&f).unwrap();
        assert_eq!(o.num_stacks(), 2);
        let acc = accepted_upto(&o, 3, 100_000).unwrap();
        let want: BTreeSet<Word> = ["a#", "a#b"].into_iter().map(w).collect();
        assert_eq!(acc, want);
        let f = sl("alphabet a; vars x; x in ∅");
        assert!(accepted_upto(&sl_to_ompa(&f).unwrap(), 3, 100_000).unwrap().is_empty());
    }

    #[test]
    fn declared_order_encoding() {
        // y is defined from x, so the straight-line order is y, x.
        let f = sl("alphabet a, b; vars x, y; x in a b?; (y, x) in Id");
        let plain = accepted_upto(&sl_to_ompa(&f).unwrap(), 5, 200_000).unwrap();
        let declared_ompa = sl_to_ompa_declared(&f).unwrap();
        assert_eq!(declared_ompa.num_stacks(), sl_to_ompa(&f).unwrap().num_stacks() + 4);
        let declared = accepted_upto(&declared_ompa, 5, 200_000).unwrap();
        let want: BTreeSet<Word> = ["a#a", "ab#ab"].into_iter().map(w).collect();
        assert_eq!(plain, want);
        assert_eq!(declared, want);
        let g = sl("alphabet a, b; vars x, y; x in a; (y, x b) in Id");
        let enc: Vec<String> = accepted_upto(&sl_to_ompa_declared(&g).unwrap(), 4, 200_000)
            .unwrap()
            .iter()
            .map(|w| w.to_string())
            .collect();
        assert_eq!(enc, vec!["a#ab".to_string()]);
    }

    #[test]
    fn flat_conversion() {
        let p = PosPtl::from_products(2, vec![vec![Piece(w("a")), Piece::any()]]).unwrap();
        let flat = tuple_to_flat(&p).unwrap();
        assert!(flat.member(&WordTuple::from_strs(&["a#"])).unwrap());
        assert!(flat.member(&WordTuple::from_strs(&["ba#c"])).unwrap());
        assert!(!flat.member(&WordTuple::from_strs(&["b#a"])).unwrap());
        assert_eq!(flat_to_tuple(&flat, 2).unwrap(), p);
        let e = PosPtl::empty(2);
        assert!(tuple_to_flat(&e).unwrap().is_empty());
        let any = PosPtl::universal(2);
        let f = tuple_to_flat(&any).unwrap();
        assert!(f.member(&WordTuple::from_strs(&["ab#b"])).unwrap());
        // "a" alone pads to "a#" or "#a".
        let flat_a = PosPtl::from_products(1, vec![vec![Piece(w("a"))]]).unwrap();
        let t = flat_to_tuple(&flat_a, 2).unwrap();
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn ompa_separation_examples() {
        let mut empty = Ompa::new(Alphabet::from_str("ab"), 1);
        let q = empty.add_state(None);
        empty.set_initial(q);
        let v = posptl_sep_ompa(&empty, &single_a(), 10_000).unwrap();
        assert_eq!(
            v,
            SeparabilityVerdict::Separable {
                separator: PosPtl::empty(1)
            }
        );

        // a b b* against b*: both searches close up although neither language is finite.
        let mut abb = Ompa::new(Alphabet::from_str("ab"), 1);
        let (p, q, r) = (abb.add_state(Some(1)), abb.add_state(Some(1)), abb.add_state(Some(1)));
        abb.set_initial(p);
        abb.set_final(r);
        abb.add_transition(OmpaTrans {
            from: p,
            input: Some('a'),
            empty_prefix: 0,
            pop: None,
            push: vec![(0, vec!['a'])],
            to: q,
        });
        abb.add_transition(OmpaTrans {
            from: q,
            input: Some('b'),
            empty_prefix: 0,
            pop: Some('a'),
            push: vec![],
            to: r,
        });
        abb.add_move(r, Some('b'), r);
        let mut bs = Ompa::new(Alphabet::from_str("ab"), 1);
        let q = bs.add_state(None);
        bs.set_initial(q);
        bs.set_final(q);
        bs.add_move(q, Some('b'), q);
        let v = posptl_sep_ompa(&abb, &bs, 10_000).unwrap();
        let sep = PosPtl::from_products(1, vec![vec![Piece(w("ab"))]]).unwrap();
        assert_eq!(v, SeparabilityVerdict::Separable { separator: sep });
        let v = posptl_sep_ompa(&bs, &abb, 10_000).unwrap();
        assert!(!v.is_separable());

        let mut eps = Ompa::new(Alphabet::from_str("ab"), 1);
        let q = eps.add_state(None);
        eps.set_initial(q);
        eps.set_final(q);
        let v = posptl_sep_ompa(&eps, &eps, 10_000).unwrap();
        assert_eq!(
            v,
            SeparabilityVerdict::NotSeparable {
                witness: WordTuple::from_strs(&[""]),
                dominated: WordTuple::from_strs(&[""]),
            }
        );
    }
}
