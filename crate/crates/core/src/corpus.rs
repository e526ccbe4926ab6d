//! Seeded generation of small test instances.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::automata::{Nfa, Nft};
use crate::constraints::{Formula, Relation};
use crate::words::{Alphabet, Symbol};

const LETTERS: [Symbol; 3] = ['a', 'b', 'c'];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instance {
    Formula(Formula),
    /// Automata for a `gen-knfa` reduction.
    Automata(Vec<Nfa>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusEntry {
    pub name: String,
    pub instance: Instance,
}

impl CorpusEntry {
    pub fn file_name(&self) -> String {
        format!("{}.json", self.name)
    }

    pub fn to_json(&self) -> Value {
        match &self.instance {
            Instance::Formula(f) => f.to_json(),
            Instance::Automata(auts) => json!({
                "automata": auts.iter().map(Nfa::to_json).collect::<Vec<_>>(),
            }),
        }
    }

    pub fn formula(&self) -> Option<&Formula> {
        match &self.instance {
            Instance::Formula(f) => Some(f),
            Instance::Automata(_) => None,
        }
    }
}

fn alphabet(rng: &mut ChaCha8Rng, min: usize) -> Alphabet {
    let size = rng.gen_range(min..=LETTERS.len());
    Alphabet::new(LETTERS[..size].iter().copied())
}

/// Random NFA with at most `max_states` states, no ε-moves, initial state 0.
pub fn random_nfa(rng: &mut ChaCha8Rng, sigma: &Alphabet, max_states: usize) -> Nfa {
    let mut a = Nfa::new(sigma.clone());
    let n = rng.gen_range(1..=max_states);
    for _ in 0..n {
        a.add_state();
    }
    a.set_initial(0);
    for q in 0..n {
        for c in sigma.iter() {
            if rng.gen_bool(0.45) {
                a.add_transition(q, Some(c), rng.gen_range(0..n));
            }
        }
        if rng.gen_bool(0.4) {
            a.set_final(q);
        }
    }
    if a.finals().is_empty() {
        a.set_final(rng.gen_range(0..n));
    }
    a
}

/// Random transducer with at most `max_states` states; no transition is ε on both tapes.
pub fn random_nft(rng: &mut ChaCha8Rng, sigma: &Alphabet, max_states: usize) -> Nft {
    let mut t = Nft::new(sigma.clone(), sigma.clone());
    let n = rng.gen_range(1..=max_states);
    for _ in 0..n {
        t.add_state();
    }
    t.set_initial(0);
    let syms = sigma.symbols();
    for _ in 0..rng.gen_range(1..=2 * n + 2) {
        let inp = if rng.gen_bool(0.2) {
            None
        } else {
            syms.choose(rng).copied()
        };
        let out = if inp.is_none() || rng.gen_bool(0.8) {
            syms.choose(rng).copied()
        } else {
            None
        };
        t.add_transition(rng.gen_range(0..n), inp, out, rng.gen_range(0..n));
    }
    for q in 0..n {
        if rng.gen_bool(0.5) {
            t.set_final(q);
        }
    }
    if t.finals().is_empty() {
        t.set_final(rng.gen_range(0..n));
    }
    t
}

/// Deterministic transducer without ε-input moves, hence functional.
fn random_sequential(rng: &mut ChaCha8Rng, sigma: &Alphabet, max_states: usize) -> Nft {
    let mut t = Nft::new(sigma.clone(), sigma.clone());
    let n = rng.gen_range(1..=max_states);
    for _ in 0..n {
        t.add_state();
    }
    t.set_initial(0);
    let syms = sigma.symbols();
    for q in 0..n {
        for &c in &syms {
            if rng.gen_bool(0.8) {
                let out = if rng.gen_bool(0.15) {
                    None
                } else {
                    syms.choose(rng).copied()
                };
                t.add_transition(q, Some(c), out, rng.gen_range(0..n));
            }
        }
        if rng.gen_bool(0.6) {
            t.set_final(q);
        }
    }
    t.set_final(0);
    t
}

fn names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

fn right_sided(rng: &mut ChaCha8Rng) -> Formula {
    let sigma = alphabet(rng, 1);
    let n = rng.gen_range(1..=3);
    let k = rng.gen_range(0..n);
    let mut f = Formula::new(names(n), sigma.clone());
    for v in 0..n {
        if rng.gen_bool(0.5) {
            f.memberships.push((v, random_nfa(rng, &sigma, 4)));
        }
    }
    for v in 0..k {
        let len = rng.gen_range(1..=2);
        let inputs = (0..len).map(|_| rng.gen_range(k..n)).collect();
        f.relations.push(Relation {
            output: v,
            inputs,
            transducer: random_nft(rng, &sigma, 3),
            name: format!("T{}", v + 1),
        });
    }
    f
}

fn chain(rng: &mut ChaCha8Rng) -> Formula {
    let sigma = alphabet(rng, 1);
    let mut f = Formula::new(names(3), sigma.clone());
    f.relations.push(Relation {
        output: 0,
        inputs: vec![1],
        transducer: random_sequential(rng, &sigma, 2),
        name: "T1".into(),
    });
    let inputs = if rng.gen_bool(0.5) { vec![2] } else { vec![2, 2] };
    f.relations.push(Relation {
        output: 1,
        inputs,
        transducer: random_sequential(rng, &sigma, 2),
        name: "T2".into(),
    });
    if rng.gen_bool(0.5) {
        f.memberships.push((2, random_nfa(rng, &sigma, 3)));
    }
    f
}

/// `x1` starts with one letter, its copy `x2` with another.
fn unsatisfiable(rng: &mut ChaCha8Rng) -> Formula {
    let sigma = alphabet(rng, 2);
    let mut syms = sigma.symbols();
    syms.shuffle(rng);
    let starts_with = |c: Symbol| {
        let mut a = Nfa::new(sigma.clone());
        let (p, q) = (a.add_state(), a.add_state());
        a.set_initial(p);
        a.set_final(q);
        a.add_transition(p, Some(c), q);
        for d in sigma.iter() {
            a.add_transition(q, Some(d), q);
        }
        a
    };
    let mut f = Formula::new(names(2), sigma.clone());
    f.memberships.push((1, starts_with(syms[0])));
    f.memberships.push((0, starts_with(syms[1])));
    f.relations.push(Relation {
        output: 0,
        inputs: vec![1],
        transducer: Nft::identity(&sigma),
        name: "Id".into(),
    });
    f
}

fn knfa(rng: &mut ChaCha8Rng) -> Vec<Nfa> {
    let sigma = Alphabet::new(LETTERS[..rng.gen_range(1..=2)].iter().copied());
    (0..rng.gen_range(1..=3)).map(|_| random_nfa(rng, &sigma, 3)).collect()
}

/// `count` instances cycling through right-sided formulas, non-right-sided chains with
/// functional transducers, unsatisfiable formulas and automata lists for `gen-knfa`.
pub fn gen_corpus(seed: u64, count: usize) -> Vec<CorpusEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let (kind, instance) = match i % 4 {
                0 => ("right_sided", Instance::Formula(right_sided(&mut rng))),
                1 => ("chain", Instance::Formula(chain(&mut rng))),
                2 => ("unsat", Instance::Formula(unsatisfiable(&mut rng))),
                _ => ("knfa", Instance::Automata(knfa(&mut rng))),
            };
            CorpusEntry {
                name: format!("{i:03}_{kind}"),
                instance,
            }
        })
        .collect()
}

/// Random automata lists for the intersection reduction.
pub fn gen_knfa(seed: u64, k: usize, max_states: usize) -> Vec<Nfa> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = Alphabet::new(LETTERS[..rng.gen_range(1..=2)].iter().copied());
    (0..k).map(|_| random_nfa(&mut rng, &sigma, max_states)).collect()
}

pub fn write_corpus(entries: &[CorpusEntry], dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for e in entries {
        let path = dir.join(e.file_name());
        let text = serde_json::to_string_pretty(&e.to_json()).map_err(io::Error::other)?;
        fs::write(&path, text + "\n")?;
        paths.push(path);
    }
    Ok(paths)
}
