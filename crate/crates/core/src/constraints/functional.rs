//! Rewriting straight-line formulas with functional transducers into right-sided ones.

use super::{dollar_free, validate_sl, ConstraintError, Formula, Relation, SlFormula};
use crate::automata::{Nfa, Nft};
use crate::words::{Word, DOLLAR};

/// Longest input checked when testing functionality.
const FUNCTIONAL_CHECK_LEN: usize = 4;

/// Sequential composition: `(o, w)` is in the result iff `(m, w) ∈ R(f)` and `(o, m) ∈ R(g)`.
pub fn compose(f: &Nft, g: &Nft) -> Nft {
    chunk_compose(std::slice::from_ref(f), g)
}

/// Runs `g` on `f_1(w_1) … f_m(w_m)` given the input `w_1 $ … $ w_m`.
///
/// The state of `g` is carried across each `$`; phase `l` pairs states of `f_l` and `g`.
fn chunk_compose(fs: &[Nft], g: &Nft) -> Nft {
    let mut inp = g.in_alphabet().clone();
    for f in fs {
        inp = inp.union(f.in_alphabet());
    }
    if fs.len() > 1 {
        inp.insert(DOLLAR);
    }
    let mut out = Nft::new(inp, g.out_alphabet().clone());
    let qg = g.num_states();
    let mut base = Vec::new();
    for f in fs {
        base.push(out.num_states());
        for _ in 0..f.num_states() * qg {
            out.add_state();
        }
    }
    let id = |l: usize, p: usize, q: usize| base[l] + p * qg + q;
    for (l, f) in fs.iter().enumerate() {
        for p in 0..f.num_states() {
            for q in 0..qg {
                for t in g.successors(q).iter().filter(|t| t.inp.is_none()) {
                    out.add_transition(id(l, p, q), None, t.out, id(l, p, t.to));
                }
            }
        }
        for tf in f.transitions() {
            for q in 0..qg {
                match tf.out {
                    None => out.add_transition(id(l, tf.from, q), tf.inp, None, id(l, tf.to, q)),
                    Some(d) => {
                        for tg in g.successors(q).iter().filter(|t| t.inp == Some(d)) {
                            out.add_transition(id(l, tf.from, q), tf.inp, tg.out, id(l, tf.to, tg.to));
                        }
                    }
                }
            }
        }
        if l + 1 < fs.len() {
            for &p in f.finals() {
                for &p2 in fs[l + 1].initial() {
                    for q in 0..qg {
                        out.add_transition(id(l, p, q), Some(DOLLAR), None, id(l + 1, p2, q));
                    }
                }
            }
        }
    }
    if let (Some(first), Some(last)) = (fs.first(), fs.last()) {
        for &p in first.initial() {
            for &q in g.initial() {
                out.set_initial(id(0, p, q));
            }
        }
        for &p in last.finals() {
            for &q in g.finals() {
                out.set_final(id(fs.len() - 1, p, q));
            }
        }
    }
    out
}

/// Rewrites `F` so that every defined variable reads only independent variables and a fresh
/// variable `z ∈ {$}` separating the substituted pieces.
///
/// Defined variables that are read by other constraints must have functional transducers;
/// this is checked on inputs up to length 4 only.
pub fn functional_to_rightsided(f: &SlFormula) -> Result<SlFormula, ConstraintError> {
    if f.is_right_sided() {
        return Ok(f.clone());
    }
    dollar_free(f.alphabet())?;
    let sigma = f.alphabet().clone();
    let wide = sigma.with(DOLLAR);
    for r in f.relations() {
        let used = f.relations().iter().any(|s| s.inputs.contains(&r.output));
        if used {
            if let Err((input, first, second)) = r
                .transducer
                .functional_upto(FUNCTIONAL_CHECK_LEN, 2 * FUNCTIONAL_CHECK_LEN + 4)
            {
                return Err(ConstraintError::NotFunctional {
                    name: r.name.clone(),
                    input,
                    first,
                    second,
                });
            }
        }
    }
    let mut vars = f.vars().to_vec();
    let mut z_name = "z".to_string();
    while vars.contains(&z_name) {
        z_name.push('\'');
    }
    vars.push(z_name);
    let z = vars.len() - 1;
    let id = Nft::identity(&sigma);
    let mut rewritten: Vec<Option<(Vec<usize>, Nft)>> = vec![None; f.n()];
    let mut relations = Vec::new();
    for r in f.relations().iter().rev() {
        let (term, t) = if r.inputs.iter().all(|&v| !f.is_defined(v)) {
            (r.inputs.clone(), r.transducer.clone())
        } else {
            let mut pieces: Vec<(Vec<usize>, Nft)> = Vec::new();
            let mut group: Vec<usize> = Vec::new();
            for &v in &r.inputs {
                match &rewritten[v] {
                    Some(p) => {
                        if !group.is_empty() {
                            pieces.push((std::mem::take(&mut group), id.clone()));
                        }
                        pieces.push(p.clone());
                    }
                    None => group.push(v),
                }
            }
            if !group.is_empty() {
                pieces.push((group, id.clone()));
            }
            let mut term = Vec::new();
            for (i, (ts, _)) in pieces.iter().enumerate() {
                if i > 0 {
                    term.push(z);
                }
                term.extend(ts);
            }
            let fs: Vec<Nft> = pieces.into_iter().map(|p| p.1).collect();
            (term, chunk_compose(&fs, &r.transducer))
        };
        rewritten[r.output] = Some((term.clone(), t.clone()));
        relations.push(Relation {
            output: r.output,
            inputs: term,
            transducer: t.with_alphabets(&wide, &sigma),
            name: format!("{}'", r.name),
        });
    }
    relations.reverse();
    let mut out = Formula::new(vars, wide.clone());
    for v in 0..f.n() {
        match f.membership(v) {
            Some(a) => out.memberships.push((v, a.with_alphabet(&wide))),
            None if !f.is_defined(v) => out.memberships.push((v, Nfa::universal(&sigma).with_alphabet(&wide))),
            None => {}
        }
    }
    out.memberships
        .push((z, Nfa::singleton(&wide, &Word::new(vec![DOLLAR]))));
    out.relations = relations;
    let sl = validate_sl(&out)?;
    debug_assert!(sl.is_right_sided());
    Ok(sl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::parse_formula;
    use crate::words::Alphabet;
    use std::collections::BTreeSet;

    fn sl(s: &str) -> SlFormula {
        validate_sl(&parse_formula(s, None).unwrap()).unwrap()
    }

    fn projected(f: &SlFormula, n: usize, max_len: usize) -> BTreeSet<Vec<Word>> {
        f.enumerate_solutions(max_len)
            .unwrap()
            .into_iter()
            .map(|e| e[..n].to_vec())
            .collect()
    }

    #[test]
    fn compose_matches_relational_product() {
        let sigma = Alphabet::from_str("ab");
        let neq = Nft::not_equal(&sigma);
        let mut rev = Nft::new(sigma.clone(), sigma.clone());
        let q = rev.add_state();
        rev.set_initial(q);
        rev.set_final(q);
        rev.add_transition(q, Some('a'), Some('b'), q);
        rev.add_transition(q, Some('b'), Some('a'), q);
        let c = compose(&rev, &neq);
        for w in sigma.words_upto(3) {
            let mid = rev.outputs(&w, 3);
            for o in sigma.words_upto(3) {
                let want = mid.iter().any(|m| neq.member(&o, m));
                assert_eq!(c.member(&o, &w), want);
            }
        }
    }

    #[test]
    fn chain_of_identities() {
        let f = sl("alphabet a, b; vars x1, x2, x3; (x1, x2) in Id; (x2, x3) in Id");
        let g = functional_to_rightsided(&f).unwrap();
        assert!(g.is_right_sided());
        assert_eq!(projected(&f, 3, 2), projected(&g, 3, 2));
    }

    #[test]
    fn substitution_inserts_separator() {
        let f = sl("alphabet a, b; vars x1, x2, x3; (x1, x2 x3) in Id; (x2, x3) in Id");
        let g = functional_to_rightsided(&f).unwrap();
        assert!(g.is_right_sided());
        let r = g.definition(0).unwrap();
        assert_eq!(r.inputs, vec![2, 3, 2]);
        assert_eq!(projected(&f, 3, 2), projected(&g, 3, 2));
    }

    #[test]
    fn right_sided_is_unchanged() {
        let f = sl("alphabet a; vars x, y; (x, y) in Id");
        assert_eq!(functional_to_rightsided(&f).unwrap(), f);
    }

    #[test]
    fn non_functional_is_rejected() {
        let f = sl("alphabet a, b; vars x, y, z; (x, y) in Id; (y, z) in Neq");
        assert!(matches!(
            functional_to_rightsided(&f),
            Err(ConstraintError::NotFunctional { .. })
        ));
    }
}
