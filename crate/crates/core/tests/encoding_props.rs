mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use common::{all_words, embeds, nfa_accepts, random_nfa, rng};
use sepstr::corpus::random_nft;
use sepstr::ompa::{
    b_projection, b_upward_closure, encode, intersect_regular, ompa_simulate, Ompa, OmpaTrans, SimResult,
};
use sepstr::twoway::{diagonal_separator, lift_separator, min_pairs, pair_bounds, twoway_empty, TwoWayCaps, TwoWayNft};
use sepstr::words::{minor_to_posptl, Alphabet, Symbol, Word, WordTuple};

/// Random OMPA over `{a, b, c}` with stack symbols `x, y`; only moves reading `a` or `b` push.
fn random_ompa(r: &mut ChaCha8Rng) -> Ompa {
    let stacks = r.gen_range(1..=2);
    let mut a = Ompa::new(Alphabet::from_str("abc"), stacks);
    let n = r.gen_range(1..=3);
    for _ in 0..n {
        a.add_state(None);
    }
    a.set_initial(0);
    a.set_final(r.gen_range(0..n));
    for _ in 0..r.gen_range(2..=9) {
        let input = if r.gen_bool(0.2) {
            None
        } else {
            Some(*['a', 'b', 'c'].choose(r).unwrap())
        };
        let (empty_prefix, pop) = if r.gen_bool(0.4) {
            (r.gen_range(0..stacks), Some(*['x', 'y'].choose(r).unwrap()))
        } else {
            (r.gen_range(0..=stacks), None)
        };
        let push = if matches!(input, Some('a' | 'b')) && r.gen_bool(0.6) {
            vec![(r.gen_range(0..stacks), vec![*['x', 'y'].choose(r).unwrap()])]
        } else {
            vec![]
        };
        a.add_transition(OmpaTrans {
            from: r.gen_range(0..n),
            input,
            empty_prefix,
            pop,
            push,
            to: r.gen_range(0..n),
        });
    }
    a
}

/// Acceptance by exhaustive search, reading symbols in `silent` without consuming input.
fn ompa_oracle(a: &Ompa, word: &Word, silent: &[Symbol]) -> bool {
    let s = word.symbols();
    let mut seen: HashSet<(usize, usize, Vec<Vec<Symbol>>)> = HashSet::new();
    let mut todo: Vec<(usize, usize, Vec<Vec<Symbol>>)> = a
        .initial()
        .iter()
        .map(|&q| (q, 0, vec![vec![]; a.num_stacks()]))
        .collect();
    while let Some((q, i, st)) = todo.pop() {
        if !seen.insert((q, i, st.clone())) {
            continue;
        }
        if i == s.len() && a.finals().contains(&q) && st.iter().all(Vec::is_empty) {
            return true;
        }
        for t in a.transitions().filter(|t| t.from == q) {
            let j = match t.input {
                None => i,
                Some(c) if silent.contains(&c) => i,
                Some(c) if i < s.len() && s[i] == c => i + 1,
                Some(_) => continue,
            };
            if st[..t.empty_prefix].iter().any(|x| !x.is_empty()) {
                continue;
            }
            let mut st2 = st.clone();
            if let Some(x) = t.pop {
                if st2[t.empty_prefix].last() != Some(&x) {
                    continue;
                }
                st2[t.empty_prefix].pop();
            }
            for (k, word) in &t.push {
                st2[*k].extend(word.iter().rev());
            }
            todo.push((t.to, j, st2));
        }
    }
    false
}

fn accepted(a: &Ompa, x: &Word) -> bool {
    match ompa_simulate(a, x, 200_000) {
        SimResult::Accepted => true,
        SimResult::Rejected => false,
        SimResult::BudgetExhausted => panic!("budget exhausted on {x}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn simulation_and_trio_operations(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_ompa(&mut r);
        let abc = all_words(&['a', 'b', 'c'], 4);
        for x in &abc {
            prop_assert_eq!(accepted(&a, x), ompa_oracle(&a, x, &[]), "{}", x);
        }
        let proj = b_projection(&a, &Alphabet::from_str("ab"));
        for x in all_words(&['a', 'b'], 4) {
            prop_assert_eq!(accepted(&proj, &x), ompa_oracle(&a, &x, &['c']), "projection {}", x);
        }
        let up = b_upward_closure(&a, &Alphabet::from_str("c"));
        for x in &abc {
            let cs: Vec<usize> = (0..x.len()).filter(|&i| x.symbols()[i] == 'c').collect();
            let want = (0u32..1 << cs.len()).any(|mask| {
                let drop: Vec<usize> = (0..cs.len()).filter(|b| mask >> b & 1 == 1).map(|b| cs[b]).collect();
                let y = Word::new((0..x.len()).filter(|i| !drop.contains(i)).map(|i| x.symbols()[i]).collect());
                ompa_oracle(&a, &y, &[])
            });
            prop_assert_eq!(accepted(&up, x), want, "upward {}", x);
        }
        let reg = random_nfa(&mut r, &['a', 'b', 'c'], 3, true);
        let both = intersect_regular(&a, &reg).unwrap();
        for x in &abc {
            prop_assert_eq!(accepted(&both, x), ompa_oracle(&a, x, &[]) && nfa_accepts(&reg, x), "intersection {}", x);
        }
    }

    #[test]
    fn emptiness_of_one_way_embeddings(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_nfa(&mut r, &['a', 'b'], 4, true);
        let t = TwoWayNft::from_nfa(&a);
        let got = twoway_empty(&t, 100_000).unwrap();
        let any = all_words(&['a', 'b'], a.num_states()).iter().any(|x| nfa_accepts(&a, x));
        prop_assert_eq!(got.is_some(), any);
        if let Some(x) = got {
            prop_assert!(nfa_accepts(&a, &x));
        }
    }

    #[test]
    fn minimal_pairs_of_one_way_transducers(seed in any::<u64>()) {
        let mut r = rng(seed);
        let sigma = Alphabet::from_str("ab");
        let nft = random_nft(&mut r, &sigma, 2);
        let t = TwoWayNft::from_nft(&nft);
        let minor = min_pairs(&t, TwoWayCaps::default()).unwrap();
        let (in_max, out_max) = pair_bounds(&t);
        let below = |p: &WordTuple, q: &WordTuple| {
            p.components().iter().zip(q.components()).all(|(x, y)| embeds(x.symbols(), y.symbols()))
        };
        for (i, m) in minor.iter().enumerate() {
            let (out, inp) = (&m.components()[0], &m.components()[1]);
            prop_assert!(nft.member(out, inp), "{} not in the relation", m);
            prop_assert!(inp.len() <= in_max && out.len() <= out_max);
            for (j, other) in minor.iter().enumerate() {
                prop_assert!(i == j || !below(m, other));
            }
        }
        // Every sampled pair lies above the minor and no sampled pair lies strictly below it.
        for inp in all_words(&['a', 'b'], 3) {
            for out in nft.outputs(&inp, 4) {
                let p = WordTuple::new(vec![out, inp.clone()]);
                prop_assert!(minor.iter().any(|m| below(m, &p)), "{} not covered", p);
                prop_assert!(!minor.iter().any(|m| below(&p, m) && &p != m));
            }
        }
    }

    #[test]
    fn separator_translation_roundtrip(
        pairs in prop::collection::vec(("[ab#]{0,3}", "[ab#]{0,3}"), 0..3),
        t in ("[ab]{0,2}", "[ab]{0,2}"),
    ) {
        let pairs: Vec<WordTuple> = pairs.iter().map(|(x, y)| WordTuple::from_strs(&[x, y])).collect();
        let s = minor_to_posptl(2, &pairs).unwrap();
        let nary = diagonal_separator(&s, 2).unwrap();
        let back = lift_separator(&nary).unwrap();
        let t = WordTuple::from_strs(&[&t.0, &t.1]);
        let e = encode(&t).unwrap();
        let diag = s.member(&WordTuple::new(vec![e.clone(), e.clone()])).unwrap();
        prop_assert_eq!(nary.member(&t).unwrap(), diag);
        for u in ["", "a", "b#a"] {
            prop_assert_eq!(back.member(&WordTuple::new(vec![e.clone(), Word::from(u)])).unwrap(), diag);
        }
    }
}
