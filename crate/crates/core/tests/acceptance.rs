//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero if
//! any fails.

mod common;

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::{all_words, brute_minimize, embeds, nfa_accepts, random_cfg, random_nfa, rng};
use sepstr::automata::{Nfa, DETERMINIZE_CAP};
use sepstr::constraints::{
    functional_to_rightsided, gen_from_nfa_intersection, parse_formula_file, split, validate_sl, SlFormula,
};
use sepstr::corpus::{gen_corpus, gen_knfa, random_nft};
use sepstr::grammars::Cfg;
use sepstr::ompa::{encode, gadget_stacks, ompa_simulate, rel_gadget, sl_stacks, sl_to_ompa, SimResult};
use sepstr::pda::{
    bounded_pda_to_nfa, cfg_upward_minor, pda_down, sep_posptl_cfg, separable_via_downward, separable_via_upward,
    CONFIG_CAP,
};
use sepstr::twoway::{
    min_pairs, pair_bounds, sep_posptl_rightsided_sl, sl_to_2nft, twoway_run_search, RunMode, TwoWayCaps, TwoWayNft,
};
use sepstr::words::{valk_jantzen_minor, Alphabet, Antichain, Symbol, Word, WordTuple};

type Outcome = Result<String, String>;

fn instance(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../instances").join(name)
}

fn load(name: &str) -> SlFormula {
    validate_sl(&parse_formula_file(&instance(name)).unwrap()).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))?;
    Ok(took)
}

/// Tuples of `n` words over `symbols`, each of length at most `max_len`.
fn tuples(symbols: &[Symbol], n: usize, max_len: usize) -> Vec<Vec<Word>> {
    let words = all_words(symbols, max_len);
    let mut out: Vec<Vec<Word>> = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|t| {
                words.iter().map(move |x| {
                    let mut t = t.clone();
                    t.push(x.clone());
                    t
                })
            })
            .collect();
    }
    out
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (l, r) = (load("example2_left.slc"), load("example2_right.slc"));
    let sep = sep_posptl_rightsided_sl(&l, &r, TwoWayCaps::default()).map_err(|e| e.to_string())?;
    let want = vec![WordTuple::from_strs(&["a#", "#"])];
    ensure(sep.minor == want, || format!("minimal pairs {:?}", sep.minor))?;
    let sepstr::pda::SeparabilityVerdict::Separable { separator } = &sep.verdict else {
        return Err(format!("not separable: {:?}", sep.verdict));
    };
    let mut checked = 0;
    for t in tuples(&['a', 'e', 'f'], 2, 3) {
        let got = separator
            .member(&WordTuple::new(t.clone()))
            .map_err(|e| e.to_string())?;
        ensure(got == t[0].iter().any(|c| c == 'a'), || {
            format!("separator disagrees on {t:?}")
        })?;
        checked += 1;
    }
    let took = within(start, Duration::from_secs(30))?;
    Ok(format!(
        "separable, minor (a#, #), {checked} tuples checked, {took:.2?}"
    ))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    for name in ["example1_sat.slc", "example1_unsat.slc"] {
        let f = parse_formula_file(&instance(name)).unwrap();
        let (p1, p2) = split(&f).map_err(|e| e.to_string())?;
        let sep = sep_posptl_rightsided_sl(&p1, &p2, TwoWayCaps::default()).map_err(|e| e.to_string())?;
        let unsat = f.solutions_upto(2, 10_000_000).map_err(|e| e.to_string())?.is_empty();
        let separable = sep.verdict.is_separable();
        ensure(separable == unsat, || {
            format!("{name}: separable {separable}, unsatisfiable {unsat}")
        })?;
        notes.push(format!("{name}: separable={separable}"));
    }
    let took = within(start, Duration::from_secs(60))?;
    Ok(format!("{}, {took:.2?}", notes.join(", ")))
}

fn criterion_3() -> Outcome {
    let mut pairs = 0;
    let mut separable = 0;
    // Small means at most 8 nonterminals after CNF; the upward automaton grows like |N|^(|N|+1).
    for seed in 0u64.. {
        if pairs == 60 {
            break;
        }
        let g1 = random_cfg(&mut rng(2 * seed));
        let g2 = random_cfg(&mut rng(2 * seed + 1));
        if g1.to_cnf().num_nonterminals().max(g2.to_cnf().num_nonterminals()) > 8 {
            continue;
        }
        let up = separable_via_upward(&g1, &g2, CONFIG_CAP).map_err(|e| e.to_string())?;
        let down = separable_via_downward(&g1, &g2, CONFIG_CAP).map_err(|e| e.to_string())?;
        let main = sep_posptl_cfg(&g1, &g2, CONFIG_CAP)
            .map_err(|e| e.to_string())?
            .is_separable();
        ensure(up == down && down == main, || {
            format!("seed {seed}: up {up}, down {down}, product {main}")
        })?;
        pairs += 1;
        separable += usize::from(up);
    }
    Ok(format!("{pairs} pairs agree ({separable} separable)"))
}

/// Language equality of an NFA and a complete DFA given by a table, via subset construction.
fn nfa_equals_dfa(a: &Nfa, symbols: &[Symbol], trans: &[Vec<usize>], finals: &[bool]) -> bool {
    let close = |mut set: BTreeSet<usize>| {
        let mut todo: Vec<usize> = set.iter().copied().collect();
        while let Some(q) = todo.pop() {
            for &(l, p) in a.successors(q) {
                if l.is_none() && set.insert(p) {
                    todo.push(p);
                }
            }
        }
        set
    };
    let start = (close(a.initial().clone()), 0usize);
    let mut seen = HashSet::new();
    let mut todo = VecDeque::from([start]);
    while let Some((set, d)) = todo.pop_front() {
        if !seen.insert((set.clone(), d)) {
            continue;
        }
        if set.iter().any(|&q| a.is_final(q)) != finals[d] {
            return false;
        }
        for (i, &c) in symbols.iter().enumerate() {
            let next: BTreeSet<usize> = set
                .iter()
                .flat_map(|&q| a.successors(q).iter().filter(|(l, _)| *l == Some(c)).map(|&(_, p)| p))
                .collect();
            todo.push_back((close(next), trans[d][i]));
        }
    }
    true
}

fn criterion_4() -> Outcome {
    let down = |text: &str| -> Result<Nfa, String> {
        let c = Cfg::parse(text).map_err(|e| e.to_string())?.to_cnf();
        bounded_pda_to_nfa(&pda_down(&c).map_err(|e| e.to_string())?, CONFIG_CAP).map_err(|e| e.to_string())
    };
    // a*b*: 0 reading a's, 1 reading b's, 2 dead.
    let anbn = down("S -> a S b | ε")?;
    ensure(
        nfa_equals_dfa(
            &anbn,
            &['a', 'b'],
            &[vec![0, 1], vec![2, 1], vec![2, 2]],
            &[true, true, false],
        ),
        || "downward closure of a^n b^n is not a*b*".into(),
    )?;
    let ss = down("S -> S S | a")?;
    ensure(nfa_equals_dfa(&ss, &['a'], &[vec![0]], &[true]), || {
        "downward closure of S -> SS | a is not a*".into()
    })?;
    let cases = [
        ("S -> A B; A -> a; B -> b", vec!["ab"]),
        ("S -> a S b | ε", vec![""]),
        ("S -> a S b | a b", vec!["ab"]),
    ];
    for (text, want) in cases {
        let c = Cfg::parse(text).map_err(|e| e.to_string())?.to_cnf();
        let got = cfg_upward_minor(&c).map_err(|e| e.to_string())?;
        let want: Vec<Word> = want.into_iter().map(Word::from).collect();
        ensure(got == want, || format!("{text}: minor {got:?}"))?;
    }
    Ok("a*b*, a*, minors {ab} {ε} {ab}".into())
}

fn corpus_formulas() -> Vec<(String, SlFormula)> {
    gen_corpus(2024, 28)
        .into_iter()
        .filter_map(|e| e.formula().map(|f| (e.name.clone(), validate_sl(f).unwrap())))
        .collect()
}

fn criterion_5() -> Outcome {
    let formulas = corpus_formulas();
    ensure(formulas.len() >= 20, || format!("only {} formulas", formulas.len()))?;
    let mut gadgets = 0;
    for (name, f) in &formulas {
        let (n, k) = (f.n(), f.k());
        let rank = f.rank();
        let lens: Vec<usize> = f.relations().iter().map(|r| r.inputs.len()).collect();
        let want = n - k
            + lens
                .iter()
                .enumerate()
                .map(|(i, t)| 2 * n - 2 * (i + 1) + 2 + t)
                .sum::<usize>();
        let got = sl_to_ompa(f).map_err(|e| e.to_string())?.num_stacks();
        ensure(got == want && sl_stacks(n, &lens) == want, || {
            format!("{name}: {got} stacks, expected {want}")
        })?;
        for (i, r) in f.relations().iter().enumerate() {
            let i = i + 1;
            let term: Vec<usize> = r.inputs.iter().map(|&v| rank[v] + 1).collect();
            let g = rel_gadget(i, &term, &r.transducer, n, f.alphabet()).map_err(|e| e.to_string())?;
            let want = 3 * n + term.len() + 2 - 3 * i;
            ensure(
                g.num_stacks() == want && gadget_stacks(n, i, term.len()) == want,
                || format!("{name}: gadget {i} has {} stacks, expected {want}", g.num_stacks()),
            )?;
            gadgets += 1;
        }
    }
    Ok(format!("{} formulas, {gadgets} gadgets", formulas.len()))
}

/// Checks the transducer of a right-sided formula on every input with blocks of length ≤ 2:
/// outputs (restricted to blocks of length ≤ 2) are exactly the encoded solutions whose
/// independent variables match the input blocks.
fn check_2nft(name: &str, f: &SlFormula, sols: &BTreeSet<Vec<Word>>) -> Result<usize, String> {
    let t = sl_to_2nft(f).map_err(|e| e.to_string())?;
    let n = f.n();
    let sigma = f.alphabet().symbols();
    let free: Vec<usize> = (0..n).filter(|&v| !f.is_defined(v)).collect();
    let mut runs = 0;
    for u in tuples(&sigma, free.len(), 2) {
        let mut blocks = vec![Word::empty(); n];
        for (&v, x) in free.iter().zip(&u) {
            blocks[v] = x.clone();
        }
        let input = encode(&WordTuple::new(blocks)).unwrap();
        let outs = twoway_run_search(&t, &input, RunMode::OutputBound(3 * n), 10_000_000).map_err(|e| e.to_string())?;
        let got: BTreeSet<Word> = outs
            .into_iter()
            .filter(|o| o.split('#').iter().all(|b| b.len() <= 2))
            .collect();
        let want: BTreeSet<Word> = sols
            .iter()
            .filter(|s| free.iter().zip(&u).all(|(&v, x)| &s[v] == x))
            .map(|s| encode(&WordTuple::new(s.clone())).unwrap())
            .collect();
        ensure(got == want, || {
            format!("{name}: input {input}: outputs {got:?}, expected {want:?}")
        })?;
        runs += 1;
    }
    Ok(runs)
}

fn criterion_6() -> Outcome {
    let mut tuples_checked = 0;
    let mut inputs_checked = 0;
    for (name, f) in corpus_formulas() {
        let sols = f.enumerate_solutions(2).map_err(|e| e.to_string())?;
        let a = sl_to_ompa(&f).map_err(|e| e.to_string())?;
        for t in tuples(&f.alphabet().symbols(), f.n(), 2) {
            let w = encode(&f.to_sl_tuple(&t)).unwrap();
            let accepted = match ompa_simulate(&a, &w, 1_000_000) {
                SimResult::Accepted => true,
                SimResult::Rejected => false,
                SimResult::BudgetExhausted => return Err(format!("{name}: budget exhausted on {w}")),
            };
            ensure(accepted == sols.contains(&t), || {
                format!("{name}: {w} accepted={accepted}")
            })?;
            tuples_checked += 1;
        }
        let rs = if f.is_right_sided() {
            f.clone()
        } else {
            functional_to_rightsided(&f).map_err(|e| e.to_string())?
        };
        let rs_sols = if f.is_right_sided() {
            sols
        } else {
            rs.enumerate_solutions(2).map_err(|e| e.to_string())?
        };
        inputs_checked += check_2nft(&name, &rs, &rs_sols)?;
    }
    Ok(format!(
        "{tuples_checked} OMPA tuples, {inputs_checked} transducer inputs, 0 mismatches"
    ))
}

/// Non-emptiness of the intersection by search over tuples of states.
fn product_nonempty(automata: &[Nfa]) -> bool {
    let symbols: BTreeSet<Symbol> = automata.iter().flat_map(|a| a.alphabet().iter()).collect();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut todo: Vec<Vec<usize>> = vec![vec![]];
    for a in automata {
        todo = todo
            .into_iter()
            .flat_map(|t| {
                a.initial().iter().map(move |&q| {
                    let mut t = t.clone();
                    t.push(q);
                    t
                })
            })
            .collect();
    }
    while let Some(t) = todo.pop() {
        if !seen.insert(t.clone()) {
            continue;
        }
        if t.iter().zip(automata).all(|(&q, a)| a.is_final(q)) {
            return true;
        }
        for (i, a) in automata.iter().enumerate() {
            for &(l, p) in a.successors(t[i]) {
                if l.is_none() {
                    let mut u = t.clone();
                    u[i] = p;
                    todo.push(u);
                }
            }
        }
        for &c in &symbols {
            let mut next: Vec<Vec<usize>> = vec![vec![]];
            for (i, a) in automata.iter().enumerate() {
                let succ: Vec<usize> = a
                    .successors(t[i])
                    .iter()
                    .filter(|(l, _)| *l == Some(c))
                    .map(|&(_, p)| p)
                    .collect();
                next = next
                    .into_iter()
                    .flat_map(|u| {
                        succ.iter().map(move |&p| {
                            let mut u = u.clone();
                            u.push(p);
                            u
                        })
                    })
                    .collect();
            }
            todo.extend(next);
        }
    }
    false
}

fn criterion_7() -> Outcome {
    let mut empty = 0;
    let count = 24u64;
    for seed in 0..count {
        let k = 1 + (seed % 3) as usize;
        let automata = gen_knfa(seed, k, 3);
        let (f1, f2) = gen_from_nfa_intersection(&automata).map_err(|e| e.to_string())?;
        let sep = sep_posptl_rightsided_sl(&f1, &f2, TwoWayCaps::default()).map_err(|e| format!("seed {seed}: {e}"))?;
        let nonempty = product_nonempty(&automata);
        ensure(sep.verdict.is_separable() == !nonempty, || {
            format!(
                "seed {seed}: separable={}, intersection non-empty={nonempty}",
                sep.verdict.is_separable()
            )
        })?;
        empty += usize::from(!nonempty);
    }
    Ok(format!("{count} instances agree ({empty} with empty intersection)"))
}

fn criterion_8() -> Outcome {
    let below = |p: &WordTuple, q: &WordTuple| {
        p.components()
            .iter()
            .zip(q.components())
            .all(|(x, y)| embeds(x.symbols(), y.symbols()))
    };
    let mut machines: Vec<(String, TwoWayNft)> = Vec::new();
    let mut r = rng(8);
    for i in 0..10 {
        machines.push((
            format!("nft {i}"),
            TwoWayNft::from_nft(&random_nft(&mut r, &Alphabet::from_str("ab"), 2)),
        ));
    }
    for (name, f) in corpus_formulas().into_iter().filter(|(_, f)| f.is_right_sided()) {
        machines.push((name, sl_to_2nft(&f).map_err(|e| e.to_string())?));
    }
    for (name, t) in &machines {
        let minor = min_pairs(t, TwoWayCaps::default()).map_err(|e| format!("{name}: {e}"))?;
        let (in_max, out_max) = pair_bounds(t);
        for (i, p) in minor.iter().enumerate() {
            ensure(
                p.components()[1].len() <= in_max && p.components()[0].len() <= out_max,
                || format!("{name}: {p} outside the bounds"),
            )?;
            ensure(minor.iter().enumerate().all(|(j, q)| i == j || !below(p, q)), || {
                format!("{name}: minor is not an antichain")
            })?;
        }
    }
    let mut r = rng(11);
    for i in 0..10 {
        let a = random_nfa(&mut r, &['a', 'b'], 4, true);
        let alphabet = a.alphabet().clone();
        let got = valk_jantzen_minor(
            |m: &Antichain<Word>| -> Result<Option<Word>, String> {
                let mut up = Nfa::empty_language(&alphabet);
                for x in m.iter() {
                    up = up
                        .union(&Nfa::upward_closure(&alphabet, x))
                        .map_err(|e| e.to_string())?;
                }
                let outside = up.complement(DETERMINIZE_CAP).map_err(|e| e.to_string())?;
                Ok(a.product(&outside).map_err(|e| e.to_string())?.shortest_word())
            },
            100,
        )
        .map_err(|e| format!("oracle {i}: {e:?}"))?;
        // Minimal words of an n-state automaton have length below n.
        let lang: BTreeSet<Word> = all_words(&['a', 'b'], a.num_states() - 1)
            .into_iter()
            .filter(|x| nfa_accepts(&a, x))
            .collect();
        let got: BTreeSet<Word> = got.into_iter().collect();
        ensure(got == brute_minimize(&lang), || format!("oracle {i}: {got:?}"))?;
    }
    Ok(format!("{} transducers, 10 regular oracles", machines.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("example 2 end to end", criterion_1),
        ("example 1 via split", criterion_2),
        ("upward/downward duality", criterion_3),
        ("closure correctness", criterion_4),
        ("stack counts", criterion_5),
        ("encoding soundness", criterion_6),
        ("k-NFA reduction", criterion_7),
        ("minor engine", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(note) => println!("criterion {}: PASS  {name}: {note}", i + 1),
            Err(why) => {
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
                failed += 1;
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
