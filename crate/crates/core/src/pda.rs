//! Pushdown automata with bounded stacks and PosPTL separability of context-free languages.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde_json::{json, Value};
use thiserror::Error;

use crate::automata::{AutomataError, Dfa, Nfa, DETERMINIZE_CAP};
use crate::grammars::{Cfg, GrammarError, LoopInfo, Sym};
use crate::search::{shortest_lex, CapExceeded, Edges};
use crate::words::{is_subword, minimize, minor_to_posptl, Alphabet, PosPtl, Symbol, Word, WordTuple, WordsError};

/// Default bound on explored configurations.
pub const CONFIG_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PdaError {
    #[error("stack height {height} exceeds the declared bound {bound}")]
    StackBound { bound: usize, height: usize },
    #[error("PDA has no stack bound")]
    Unbounded,
    #[error("exploration exceeded {0} configurations")]
    Cap(usize),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Automata(#[from] AutomataError),
    #[error(transparent)]
    Words(#[from] WordsError),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl From<CapExceeded> for PdaError {
    fn from(e: CapExceeded) -> Self {
        PdaError::Cap(e.cap)
    }
}

pub type StackSym = u32;

/// `push` is written top first: after the move `push[0]` is on top.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PdaTrans {
    pub from: usize,
    pub input: Option<Symbol>,
    pub pop: Option<StackSym>,
    pub push: Vec<StackSym>,
    pub to: usize,
}

/// A configuration: control state and stack, top at the end.
pub type Config = (usize, Vec<StackSym>);

/// Accepts by empty stack in an accepting state.
#[derive(Clone, Debug)]
pub struct Pda {
    alphabet: Alphabet,
    stack_names: Vec<String>,
    delta: Vec<Vec<PdaTrans>>,
    initial: usize,
    initial_stack: Vec<StackSym>,
    finals: BTreeSet<usize>,
    stack_bound: Option<usize>,
}

impl Pda {
    pub fn new(alphabet: Alphabet) -> Self {
        Pda {
            alphabet,
            stack_names: Vec::new(),
            delta: Vec::new(),
            initial: 0,
            initial_stack: Vec::new(),
            finals: BTreeSet::new(),
            stack_bound: None,
        }
    }

    pub fn add_state(&mut self) -> usize {
        self.delta.push(Vec::new());
        self.delta.len() - 1
    }

    pub fn add_stack_symbol(&mut self, name: &str) -> StackSym {
        self.stack_names.push(name.to_string());
        (self.stack_names.len() - 1) as StackSym
    }

    pub fn add_transition(&mut self, t: PdaTrans) {
        if !self.delta[t.from].contains(&t) {
            self.delta[t.from].push(t);
        }
    }

    pub fn set_initial(&mut self, q: usize, stack: Vec<StackSym>) {
        self.initial = q;
        self.initial_stack = stack;
    }

    pub fn set_final(&mut self, q: usize) {
        self.finals.insert(q);
    }

    pub fn set_stack_bound(&mut self, bound: Option<usize>) {
        self.stack_bound = bound;
    }

    pub fn stack_bound(&self) -> Option<usize> {
        self.stack_bound
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn stack_names(&self) -> &[String] {
        &self.stack_names
    }

    pub fn transitions(&self) -> impl Iterator<Item = &PdaTrans> {
        self.delta.iter().flatten()
    }

    pub fn initial_config(&self) -> Config {
        (self.initial, self.initial_stack.clone())
    }

    pub fn accepting(&self, c: &Config) -> bool {
        c.1.is_empty() && self.finals.contains(&c.0)
    }

    /// One-step successors. Fails if a move would break the stack bound.
    pub fn moves(&self, c: &Config) -> Result<Edges<Config>, PdaError> {
        let (q, stack) = c;
        let mut out = Vec::new();
        for t in &self.delta[*q] {
            let mut st = stack.clone();
            if let Some(x) = t.pop {
                if st.last() != Some(&x) {
                    continue;
                }
                st.pop();
            }
            st.extend(t.push.iter().rev());
            if let Some(bound) = self.stack_bound {
                if st.len() > bound {
                    return Err(PdaError::StackBound {
                        bound,
                        height: st.len(),
                    });
                }
            }
            out.push((t.input, (t.to, st)));
        }
        Ok(out)
    }
}

/// The standard top-down PDA of a grammar: one state `q` expanding nonterminals and matching
/// terminals. Dummy terminals listed in `loops` instead hand over to a looping state.
fn top_down(g: &Cfg, alphabet: &Alphabet, loops: &BTreeMap<Symbol, LoopInfo>) -> (Pda, Vec<StackSym>) {
    let mut p = Pda::new(alphabet.clone());
    let q = p.add_state();
    p.set_final(q);
    let nts: Vec<StackSym> = (0..g.num_nonterminals())
        .map(|a| p.add_stack_symbol(g.name(a)))
        .collect();
    let mut terms: HashMap<Symbol, StackSym> = HashMap::new();
    for c in g.terminals().iter() {
        terms.insert(c, p.add_stack_symbol(&c.to_string()));
    }
    let enc = |s: &Sym| match s {
        Sym::N(a) => nts[*a],
        Sym::T(c) => terms[c],
    };
    for (l, r) in g.productions() {
        p.add_transition(PdaTrans {
            from: q,
            input: None,
            pop: Some(nts[*l]),
            push: r.iter().map(enc).collect(),
            to: q,
        });
    }
    for c in g.terminals().iter() {
        match loops.get(&c) {
            None => p.add_transition(PdaTrans {
                from: q,
                input: Some(c),
                pop: Some(terms[&c]),
                push: vec![],
                to: q,
            }),
            Some(info) => {
                let l = p.add_state();
                p.add_transition(PdaTrans {
                    from: q,
                    input: None,
                    pop: Some(terms[&c]),
                    push: vec![],
                    to: l,
                });
                for d in info.symbols.iter() {
                    p.add_transition(PdaTrans {
                        from: l,
                        input: Some(d),
                        pop: None,
                        push: vec![],
                        to: l,
                    });
                }
                p.add_transition(PdaTrans {
                    from: l,
                    input: None,
                    pop: None,
                    push: vec![],
                    to: q,
                });
            }
        }
    }
    p.set_initial(q, vec![nts[g.start()]]);
    (p, nts)
}

/// PDA for the upward closure of `L(G)`; the stack never exceeds `|N| + 1`.
pub fn pda_up(g: &Cfg) -> Result<Pda, PdaError> {
    if !g.is_cnf() {
        return Err(GrammarError::NotCnf.into());
    }
    let alphabet = g.terminals().clone();
    let mut p = if g.has_epsilon_start() {
        let mut p = Pda::new(alphabet.clone());
        let q = p.add_state();
        p.set_final(q);
        let s = p.add_stack_symbol(g.name(g.start()));
        p.add_transition(PdaTrans {
            from: q,
            input: None,
            pop: Some(s),
            push: vec![],
            to: q,
        });
        p.set_initial(q, vec![s]);
        p
    } else {
        top_down(&g.upward_grammar()?, &alphabet, &BTreeMap::new()).0
    };
    for q in 0..p.num_states() {
        for c in alphabet.iter() {
            p.add_transition(PdaTrans {
                from: q,
                input: Some(c),
                pop: None,
                push: vec![],
                to: q,
            });
        }
    }
    p.set_stack_bound(Some(g.num_nonterminals() + 1));
    Ok(p)
}

/// PDA for the downward closure of `L(G)`, with stack bound `2|N| + 1` over the ε-free core.
pub fn pda_down(g: &Cfg) -> Result<Pda, PdaError> {
    let dg = g.downward_grammar()?;
    let (mut p, nts) = top_down(&dg.cfg, g.terminals(), &dg.loops);
    let q = p.initial_config().0;
    if dg.epsilon {
        p.add_transition(PdaTrans {
            from: q,
            input: None,
            pop: Some(nts[dg.cfg.start()]),
            push: vec![],
            to: q,
        });
    }
    p.set_stack_bound(Some(2 * dg.core_nonterminals + 1));
    Ok(p)
}

/// Top-down PDA of a grammar with no stack bound, for bounded simulations.
pub fn pda_of_cfg(g: &Cfg) -> Pda {
    top_down(g, g.terminals(), &BTreeMap::new()).0
}

/// Whether the PDA accepts `w`, exploring at most `cap` configurations.
pub fn pda_member(p: &Pda, w: &Word, cap: usize) -> Result<bool, PdaError> {
    let target = w.symbols();
    let mut err = None;
    let found = shortest_lex(
        [(0usize, p.initial_config())],
        |(i, c)| match p.moves(c) {
            Ok(ms) => ms
                .into_iter()
                .filter_map(|(l, d)| match l {
                    None => Some((None, (*i, d))),
                    Some(x) if *i < target.len() && target[*i] == x => Some((Some(x), (i + 1, d))),
                    Some(_) => None,
                })
                .collect(),
            Err(e) => {
                err.get_or_insert(e);
                vec![]
            }
        },
        |(i, c)| *i == target.len() && p.accepting(c),
        cap,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(found.is_some()),
    }
}

/// Explicit NFA over the reachable configurations of a stack-bounded PDA.
pub fn bounded_pda_to_nfa(p: &Pda, cap: usize) -> Result<Nfa, PdaError> {
    if p.stack_bound.is_none() {
        return Err(PdaError::Unbounded);
    }
    let mut nfa = Nfa::new(p.alphabet.clone());
    let mut index: HashMap<Config, usize> = HashMap::new();
    let init = p.initial_config();
    let s = nfa.add_state();
    nfa.set_initial(s);
    index.insert(init.clone(), s);
    let mut todo = vec![init];
    while let Some(c) = todo.pop() {
        let from = index[&c];
        if p.accepting(&c) {
            nfa.set_final(from);
        }
        for (l, d) in p.moves(&c)? {
            let to = match index.get(&d) {
                Some(&t) => t,
                None => {
                    if index.len() >= cap {
                        return Err(PdaError::Cap(cap));
                    }
                    let t = nfa.add_state();
                    index.insert(d.clone(), t);
                    todo.push(d);
                    t
                }
            };
            nfa.add_transition(from, l, to);
        }
    }
    Ok(nfa)
}

/// Shortlex-least word accepted by both PDAs, searching the synchronized configuration product.
pub fn product_search(p1: &Pda, p2: &Pda, cap: usize) -> Result<Option<Word>, PdaError> {
    if p1.stack_bound.is_none() || p2.stack_bound.is_none() {
        return Err(PdaError::Unbounded);
    }
    let mut err = None;
    let found = shortest_lex(
        [(p1.initial_config(), p2.initial_config())],
        |(c1, c2)| {
            let (m1, m2) = match (p1.moves(c1), p2.moves(c2)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => {
                    err.get_or_insert(e);
                    return vec![];
                }
            };
            let mut out = Vec::new();
            for (l, d) in &m1 {
                if l.is_none() {
                    out.push((None, (d.clone(), c2.clone())));
                }
            }
            for (l, d) in &m2 {
                if l.is_none() {
                    out.push((None, (c1.clone(), d.clone())));
                }
            }
            for (l1, d1) in m1.iter().filter(|m| m.0.is_some()) {
                for (_, d2) in m2.iter().filter(|m| m.0 == *l1) {
                    out.push((*l1, (d1.clone(), d2.clone())));
                }
            }
            out
        },
        |(c1, c2)| p1.accepting(c1) && p2.accepting(c2),
        cap,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(found.map(|f| f.word)),
    }
}

/// Shortlex-least word of `L(G) ∩ L(D)` for a CNF grammar, by a fixpoint over triples `(A, p, q)`.
pub fn cfg_dfa_shortest(g: &Cfg, d: &Dfa) -> Result<Option<Word>, PdaError> {
    if !g.is_cnf() {
        return Err(GrammarError::NotCnf.into());
    }
    let n = d.num_states();
    let k = g.num_nonterminals();
    let mut best: Vec<Vec<Vec<Option<Word>>>> = vec![vec![vec![None; n]; n]; k];
    let improve = |slot: &mut Option<Word>, w: Word| -> bool {
        match slot {
            Some(old) if *old <= w => false,
            _ => {
                *slot = Some(w);
                true
            }
        }
    };
    for (l, r) in g.productions() {
        match r.as_slice() {
            [] => {
                for p in 0..n {
                    improve(&mut best[*l][p][p], Word::empty());
                }
            }
            [Sym::T(c)] => {
                if let Some(i) = d.symbol_index(*c) {
                    for p in 0..n {
                        improve(&mut best[*l][p][d.trans[p][i]], Word::new(vec![*c]));
                    }
                }
            }
            _ => {}
        }
    }
    loop {
        let mut changed = false;
        for (l, r) in g.productions() {
            let [Sym::N(b), Sym::N(c)] = r.as_slice() else {
                continue;
            };
            for p in 0..n {
                for m in 0..n {
                    let Some(x) = best[*b][p][m].clone() else {
                        continue;
                    };
                    for q in 0..n {
                        if let Some(y) = &best[*c][m][q] {
                            let w = x.concat(y);
                            changed |= improve(&mut best[*l][p][q], w);
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok((0..n)
        .filter(|&q| d.finals[q])
        .filter_map(|q| best[g.start()][d.initial][q].clone())
        .min())
}

/// Subword-minimal words of `L(G)`, computed on the upward grammar.
pub fn cfg_upward_minor(g: &Cfg) -> Result<Vec<Word>, PdaError> {
    if !g.is_cnf() {
        return Err(GrammarError::NotCnf.into());
    }
    if g.has_epsilon_start() {
        return Ok(vec![Word::empty()]);
    }
    let up = g.upward_grammar()?;
    // The upward grammar is acyclic apart from the index, so this settles in |N| + 2 rounds.
    let mut sets: Vec<Vec<Word>> = vec![Vec::new(); up.num_nonterminals()];
    loop {
        let mut changed = false;
        for (l, r) in up.productions() {
            let mut acc = vec![Word::empty()];
            for s in r {
                let part: Vec<Word> = match s {
                    Sym::T(c) => vec![Word::new(vec![*c])],
                    Sym::N(n) => sets[*n].clone(),
                };
                acc = minimize(acc.iter().flat_map(|x| part.iter().map(move |y| x.concat(y))));
            }
            let merged = minimize(sets[*l].iter().cloned().chain(acc));
            if merged != sets[*l] {
                sets[*l] = merged;
                changed = true;
            }
        }
        if !changed {
            return Ok(std::mem::take(&mut sets[up.start()]));
        }
    }
}

/// Outcome of a PosPTL separability check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SeparabilityVerdict {
    Separable {
        separator: PosPtl,
    },
    /// `witness` lies in the excluded language and dominates `dominated` from the included one.
    NotSeparable {
        witness: WordTuple,
        dominated: WordTuple,
    },
}

impl SeparabilityVerdict {
    pub fn is_separable(&self) -> bool {
        matches!(self, SeparabilityVerdict::Separable { .. })
    }

    pub fn to_json(&self) -> Value {
        match self {
            SeparabilityVerdict::Separable { separator } => json!({
                "separable": true,
                "separator": separator,
                "separator_text": separator.to_string(),
            }),
            SeparabilityVerdict::NotSeparable { witness, dominated } => json!({
                "separable": false,
                "witness": witness,
                "dominated": dominated,
            }),
        }
    }
}

fn cnf_pair(g1: &Cfg, g2: &Cfg) -> (Cfg, Cfg) {
    let alphabet = g1.terminals().union(g2.terminals());
    (
        g1.with_terminals(&alphabet).to_cnf(),
        g2.with_terminals(&alphabet).to_cnf(),
    )
}

/// Decides whether some PosPTL language contains `L(G1)` and misses `L(G2)`.
pub fn sep_posptl_cfg(g1: &Cfg, g2: &Cfg, cap: usize) -> Result<SeparabilityVerdict, PdaError> {
    let (c1, c2) = cnf_pair(g1, g2);
    let minor = cfg_upward_minor(&c1)?;
    let Some(w) = product_search(&pda_up(&c1)?, &pda_down(&c2)?, cap)? else {
        let tuples: Vec<WordTuple> = minor.into_iter().map(|m| WordTuple::new(vec![m])).collect();
        return Ok(SeparabilityVerdict::Separable {
            separator: minor_to_posptl(1, &tuples)?,
        });
    };
    let up = Nfa::upward_closure(c2.terminals(), &w).determinize(DETERMINIZE_CAP)?;
    let lifted = cfg_dfa_shortest(&c2, &up)?
        .ok_or_else(|| PdaError::Invariant(format!("no word of the right language lies above {w}")))?;
    let m = minor
        .into_iter()
        .find(|m| is_subword(m, &lifted))
        .ok_or_else(|| PdaError::Invariant(format!("{lifted} dominates no minimal word")))?;
    Ok(SeparabilityVerdict::NotSeparable {
        witness: WordTuple::new(vec![lifted]),
        dominated: WordTuple::new(vec![m]),
    })
}

/// Emptiness of `L(G1)↑ ∩ L(G2)`, with the upward closure made finite-state.
pub fn separable_via_upward(g1: &Cfg, g2: &Cfg, cap: usize) -> Result<bool, PdaError> {
    let (c1, c2) = cnf_pair(g1, g2);
    let d = bounded_pda_to_nfa(&pda_up(&c1)?, cap)?
        .determinize(DETERMINIZE_CAP)?
        .minimize();
    Ok(cfg_dfa_shortest(&c2, &d)?.is_none())
}

/// Emptiness of `L(G1) ∩ L(G2)↓`, with the downward closure made finite-state.
pub fn separable_via_downward(g1: &Cfg, g2: &Cfg, cap: usize) -> Result<bool, PdaError> {
    let (c1, c2) = cnf_pair(g1, g2);
    let d = bounded_pda_to_nfa(&pda_down(&c2)?, cap)?
        .determinize(DETERMINIZE_CAP)?
        .minimize();
    Ok(cfg_dfa_shortest(&c1, &d)?.is_none())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cnf(s: &str) -> Cfg {
        Cfg::parse(s).unwrap().to_cnf()
    }

    fn same_language(a: &Nfa, regex: &str, max_len: usize) {
        let r = Nfa::from_regex(regex, a.alphabet()).unwrap();
        for w in a.alphabet().words_upto(max_len) {
            assert_eq!(a.member(&w), r.member(&w), "{w} vs {regex}");
        }
    }

    #[test]
    fn pda_up_examples() {
        let g = cnf("S -> A B; A -> a; B -> b").with_terminals(&Alphabet::from_str("abx"));
        let p = pda_up(&g).unwrap();
        assert!(pda_member(&p, &Word::from("xaxbx"), 10_000).unwrap());
        assert!(!pda_member(&p, &Word::from("ba"), 10_000).unwrap());
        let n = bounded_pda_to_nfa(&p, 10_000).unwrap();
        same_language(&n, "(a|b|x)*a(a|b|x)*b(a|b|x)*", 5);

        let e = cnf("S -> a S | ε");
        let p = pda_up(&e).unwrap();
        for w in e.terminals().words_upto(3) {
            assert!(pda_member(&p, &w, 1000).unwrap());
        }
        let empty = cnf("S -> S");
        let p = pda_up(&empty).unwrap();
        assert!(bounded_pda_to_nfa(&p, 1000).unwrap().is_empty());
    }

    #[test]
    fn pda_down_examples() {
        let n = bounded_pda_to_nfa(&pda_down(&cnf("S -> a S b | ε")).unwrap(), 100_000).unwrap();
        same_language(&n, "a*b*", 6);
        let n = bounded_pda_to_nfa(&pda_down(&cnf("S -> S S | a")).unwrap(), 100_000).unwrap();
        same_language(&n, "a*", 6);
        let n = bounded_pda_to_nfa(&pda_down(&cnf("S -> a")).unwrap(), 100_000).unwrap();
        same_language(&n, "a?", 6);
    }

    #[test]
    fn product_search_examples() {
        let ab = cnf("S -> a b");
        let ba = cnf("S -> b a");
        assert_eq!(
            product_search(&pda_up(&ab).unwrap(), &pda_down(&ba).unwrap(), 100_000).unwrap(),
            None
        );
        let l1 = cnf("S -> a S b | a b");
        let l2 = cnf("S -> a S b | a T b; T -> b T | b");
        let w = product_search(&pda_up(&l1).unwrap(), &pda_down(&l2).unwrap(), 100_000).unwrap();
        assert_eq!(w, Some(Word::from("ab")));
        let empty = cnf("S -> S").with_terminals(&Alphabet::from_str("ab"));
        assert_eq!(
            product_search(&pda_up(&l1).unwrap(), &pda_down(&empty).unwrap(), 100_000).unwrap(),
            None
        );
    }

    #[test]
    fn upward_minor_examples() {
        assert_eq!(
            cfg_upward_minor(&cnf("S -> A B; A -> a; B -> b")).unwrap(),
            vec![Word::from("ab")]
        );
        assert_eq!(cfg_upward_minor(&cnf("S -> a S b | ε")).unwrap(), vec![Word::empty()]);
        assert_eq!(
            cfg_upward_minor(&cnf("S -> a S b | a b")).unwrap(),
            vec![Word::from("ab")]
        );
        assert!(cfg_upward_minor(&cnf("S -> S")).unwrap().is_empty());
    }

    #[test]
    fn sep_cfg_examples() {
        let v = sep_posptl_cfg(
            &Cfg::parse("S -> a b").unwrap(),
            &Cfg::parse("S -> b a").unwrap(),
            CONFIG_CAP,
        )
        .unwrap();
        match v {
            SeparabilityVerdict::Separable { separator } => assert_eq!(separator.to_string(), "Σ*aΣ*bΣ*"),
            other => panic!("{other:?}"),
        }
        let v = sep_posptl_cfg(
            &Cfg::parse("S -> a S b | a b").unwrap(),
            &Cfg::parse("S -> a S b | a T b; T -> b T | b").unwrap(),
            CONFIG_CAP,
        )
        .unwrap();
        assert_eq!(
            v,
            SeparabilityVerdict::NotSeparable {
                witness: WordTuple::from_strs(&["abb"]),
                dominated: WordTuple::from_strs(&["ab"]),
            }
        );
        let v = sep_posptl_cfg(
            &Cfg::parse("S -> S").unwrap(),
            &Cfg::parse("S -> a").unwrap(),
            CONFIG_CAP,
        )
        .unwrap();
        match v {
            SeparabilityVerdict::Separable { separator } => assert!(separator.is_empty()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbounded_pda_is_refused() {
        let p = pda_of_cfg(&cnf("S -> a S b | ε"));
        assert_eq!(bounded_pda_to_nfa(&p, 10).unwrap_err(), PdaError::Unbounded);
    }
}
