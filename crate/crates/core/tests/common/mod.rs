//! Generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sepstr::automata::Nfa;
use sepstr::grammars::{Cfg, Sym};
use sepstr::words::{Alphabet, Symbol, Word};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn w(s: &str) -> Word {
    Word::from(s)
}

/// All words over `symbols` of length at most `n`.
pub fn all_words(symbols: &[Symbol], n: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    let mut layer = vec![Vec::<Symbol>::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in &layer {
            for &c in symbols {
                let mut q = p.clone();
                q.push(c);
                next.push(q);
            }
        }
        out.extend(next.iter().cloned().map(Word::new));
        layer = next;
    }
    out
}

/// Subword test by trying every way of matching the first symbol.
pub fn embeds(u: &[Symbol], v: &[Symbol]) -> bool {
    match u.split_first() {
        None => true,
        Some((c, rest)) => (0..v.len()).any(|i| v[i] == *c && embeds(rest, &v[i + 1..])),
    }
}

/// Minimal elements by pairwise comparison.
pub fn brute_minimize(set: &BTreeSet<Word>) -> BTreeSet<Word> {
    set.iter()
        .filter(|x| !set.iter().any(|y| y != *x && embeds(y.symbols(), x.symbols())))
        .cloned()
        .collect()
}

/// NFA membership by depth-first search over (state, position).
pub fn nfa_accepts(a: &Nfa, word: &Word) -> bool {
    let s = word.symbols();
    let mut seen = HashSet::new();
    let mut stack: Vec<(usize, usize)> = a.initial().iter().map(|&q| (q, 0)).collect();
    while let Some((q, i)) = stack.pop() {
        if !seen.insert((q, i)) {
            continue;
        }
        if i == s.len() && a.is_final(q) {
            return true;
        }
        for &(l, p) in a.successors(q) {
            match l {
                None => stack.push((p, i)),
                Some(c) if i < s.len() && s[i] == c => stack.push((p, i + 1)),
                _ => {}
            }
        }
    }
    false
}

pub fn random_nfa(rng: &mut ChaCha8Rng, symbols: &[Symbol], max_states: usize, eps: bool) -> Nfa {
    let mut a = Nfa::new(Alphabet::new(symbols.iter().copied()));
    let n = rng.gen_range(1..=max_states);
    for _ in 0..n {
        a.add_state();
    }
    a.set_initial(0);
    if rng.gen_bool(0.2) && n > 1 {
        a.set_initial(rng.gen_range(1..n));
    }
    for q in 0..n {
        for &c in symbols {
            for _ in 0..rng.gen_range(0..=2) {
                a.add_transition(q, Some(c), rng.gen_range(0..n));
            }
        }
        if eps && rng.gen_bool(0.2) {
            a.add_transition(q, None, rng.gen_range(0..n));
        }
        if rng.gen_bool(0.35) {
            a.set_final(q);
        }
    }
    a
}

/// Random grammar over `{a, b}` with nonterminals `S, A, B`, no unit rules and no ε-rules
/// except possibly `S → ε`, where `S` occurs on no right-hand side then.
pub fn random_cfg(rng: &mut ChaCha8Rng) -> Cfg {
    let names = ["S", "A", "B"];
    let nts = rng.gen_range(1..=3);
    let eps = rng.gen_bool(0.2);
    let mut g = Cfg::new(Alphabet::from_str("ab"), "S");
    let ids: Vec<usize> = names[..nts].iter().map(|n| g.nonterminal(n)).collect();
    for (i, &x) in ids.iter().enumerate() {
        for _ in 0..rng.gen_range(1..=3) {
            let len = rng.gen_range(1..=3);
            let rhs: Vec<Sym> = if len == 1 {
                vec![Sym::T(*['a', 'b'].choose(rng).unwrap())]
            } else {
                (0..len)
                    .map(|_| {
                        let lo = usize::from(eps);
                        if rng.gen_bool(0.5) && lo < nts {
                            Sym::N(ids[rng.gen_range(lo..nts)])
                        } else {
                            Sym::T(*['a', 'b'].choose(rng).unwrap())
                        }
                    })
                    .collect()
            };
            g.add(x, rhs);
        }
        if i == 0 && eps {
            g.add(x, vec![]);
        }
    }
    g
}

/// Words of length at most `n` derivable from `start`, by exploring sentential forms.
///
/// Only valid for grammars without unit rules and without ε-rules other than a start rule
/// `S → ε` with `S` absent from right-hand sides: forms then never shrink.
pub fn derive_upto(g: &Cfg, start: usize, n: usize) -> BTreeSet<Word> {
    let mut out = BTreeSet::new();
    let mut seen: HashSet<Vec<Sym>> = HashSet::new();
    let mut todo = vec![vec![Sym::N(start)]];
    while let Some(form) = todo.pop() {
        if !seen.insert(form.clone()) {
            continue;
        }
        let Some(pos) = form.iter().position(|s| matches!(s, Sym::N(_))) else {
            out.insert(Word::new(
                form.iter()
                    .map(|s| if let Sym::T(c) = s { *c } else { unreachable!() })
                    .collect(),
            ));
            continue;
        };
        let Sym::N(x) = form[pos] else { unreachable!() };
        for rhs in g.productions_of(x) {
            let mut next = form[..pos].to_vec();
            next.extend(rhs.iter().copied());
            next.extend(form[pos + 1..].iter().copied());
            if next.len() <= n {
                todo.push(next);
            }
        }
    }
    out
}

/// All subwords of the given words.
pub fn downward(words: &BTreeSet<Word>) -> BTreeSet<Word> {
    let mut out = BTreeSet::new();
    for x in words {
        let s = x.symbols();
        for mask in 0u32..(1 << s.len()) {
            out.insert(Word::new(
                (0..s.len()).filter(|i| mask >> i & 1 == 1).map(|i| s[i]).collect(),
            ));
        }
    }
    out
}
