//! String constraints: general conjunctions, the straight-line fragment, and their rewritings.

mod dsl;
mod functional;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::automata::{AutomataError, Nfa, Nft};
use crate::words::{Alphabet, Word, WordTuple, DOLLAR};

pub use dsl::{parse_formula, parse_formula_file};
pub use functional::{compose, functional_to_rightsided};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintError {
    #[error("syntax error in {context:?}: {msg}")]
    Syntax { context: String, msg: String },
    #[error("undeclared variable {0:?}")]
    UndeclaredVariable(String),
    #[error("unknown transducer {0:?}")]
    UnknownTransducer(String),
    #[error("reserved symbol {0:?} in the alphabet")]
    Reserved(char),
    #[error("symbol {0:?} is not in the alphabet")]
    ForeignSymbol(char),
    #[error(transparent)]
    Automata(#[from] AutomataError),
    #[error("not straight-line: {0}")]
    NotSl(SlViolation),
    #[error("formula is not right-sided: {0:?} is defined and also used as an input")]
    NotRightSided(String),
    #[error("transducer {name} is not functional: input {input} has outputs {first} and {second}")]
    NotFunctional {
        name: String,
        input: Word,
        first: Word,
        second: Word,
    },
    #[error("the alphabet already contains '$'")]
    DollarInAlphabet,
    #[error("formulas have different variable lists")]
    VariableMismatch,
    #[error("enumeration budget of {0} exceeded")]
    Budget(usize),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlViolation {
    DefinedTwice(String),
    Cycle(Vec<String>),
}

impl fmt::Display for SlViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlViolation::DefinedTwice(x) => write!(f, "{x} is defined by two relational constraints"),
            SlViolation::Cycle(xs) => write!(f, "cyclic dependency among {}", xs.join(", ")),
        }
    }
}

/// `(output, inputs) ∈ R(transducer)`, variables by declared index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub output: usize,
    pub inputs: Vec<usize>,
    pub transducer: Nft,
    pub name: String,
}

impl Relation {
    pub fn holds(&self, eval: &[Word]) -> bool {
        let input: Word = self.inputs.iter().flat_map(|&v| eval[v].iter()).collect();
        self.transducer.member(&eval[self.output], &input)
    }
}

/// A conjunction of memberships and relational constraints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Formula {
    pub vars: Vec<String>,
    pub alphabet: Alphabet,
    pub memberships: Vec<(usize, Nfa)>,
    pub relations: Vec<Relation>,
}

/// A variable assignment, in declared variable order.
pub type Evaluation = Vec<Word>;

impl Formula {
    pub fn new(vars: Vec<String>, alphabet: Alphabet) -> Self {
        Formula {
            vars,
            alphabet,
            memberships: Vec::new(),
            relations: Vec::new(),
        }
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    pub fn satisfies(&self, eval: &[Word]) -> bool {
        self.memberships.iter().all(|(v, a)| a.member(&eval[*v])) && self.relations.iter().all(|r| r.holds(eval))
    }

    /// All solutions with every value of length at most `max_len`, by backtracking.
    pub fn solutions_upto(&self, max_len: usize, budget: usize) -> Result<Vec<Evaluation>, ConstraintError> {
        let words = self.alphabet.words_upto(max_len);
        let n = self.vars.len();
        // Constraints are checked once their last variable is assigned.
        let last = |vs: &mut dyn Iterator<Item = usize>| vs.max().unwrap_or(0);
        let mut mem_at: Vec<Vec<usize>> = vec![Vec::new(); n.max(1)];
        for (i, (v, _)) in self.memberships.iter().enumerate() {
            mem_at[*v].push(i);
        }
        let mut rel_at: Vec<Vec<usize>> = vec![Vec::new(); n.max(1)];
        for (i, r) in self.relations.iter().enumerate() {
            rel_at[last(&mut r.inputs.iter().copied().chain([r.output]))].push(i);
        }
        let mut out = Vec::new();
        let mut eval = vec![Word::empty(); n];
        let mut steps = 0usize;
        self.backtrack(0, &words, &mem_at, &rel_at, &mut eval, &mut out, &mut steps, budget)?;
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn backtrack(
        &self,
        v: usize,
        words: &[Word],
        mem_at: &[Vec<usize>],
        rel_at: &[Vec<usize>],
        eval: &mut Evaluation,
        out: &mut Vec<Evaluation>,
        steps: &mut usize,
        budget: usize,
    ) -> Result<(), ConstraintError> {
        if v == self.vars.len() {
            out.push(eval.clone());
            return Ok(());
        }
        for w in words {
            *steps += 1;
            if *steps > budget {
                return Err(ConstraintError::Budget(budget));
            }
            eval[v] = w.clone();
            let ok = mem_at[v].iter().all(|&i| self.memberships[i].1.member(w))
                && rel_at[v].iter().all(|&i| self.relations[i].holds(eval));
            if ok {
                self.backtrack(v + 1, words, mem_at, rel_at, eval, out, steps, budget)?;
            }
        }
        Ok(())
    }
}

/// A straight-line formula. Variables keep their declared order; `order` lists them so that
/// `relations[i]` defines `order[i]` and only reads variables later in `order`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlFormula {
    vars: Vec<String>,
    alphabet: Alphabet,
    memberships: Vec<Option<Nfa>>,
    relations: Vec<Relation>,
    order: Vec<usize>,
}

impl SlFormula {
    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// Number of variables.
    pub fn n(&self) -> usize {
        self.vars.len()
    }

    /// Number of relational constraints.
    pub fn k(&self) -> usize {
        self.relations.len()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Position of each declared variable in the straight-line order.
    pub fn rank(&self) -> Vec<usize> {
        let mut r = vec![0; self.n()];
        for (p, &v) in self.order.iter().enumerate() {
            r[v] = p;
        }
        r
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn membership(&self, v: usize) -> Option<&Nfa> {
        self.memberships[v].as_ref()
    }

    /// The membership automaton of `v`, universal when unconstrained.
    pub fn membership_nfa(&self, v: usize) -> Nfa {
        self.memberships[v]
            .clone()
            .unwrap_or_else(|| Nfa::universal(&self.alphabet))
    }

    pub fn definition(&self, v: usize) -> Option<&Relation> {
        self.relations.iter().find(|r| r.output == v)
    }

    pub fn is_defined(&self, v: usize) -> bool {
        self.definition(v).is_some()
    }

    /// No defined variable occurs in any input term.
    pub fn is_right_sided(&self) -> bool {
        self.right_sided_violation().is_none()
    }

    fn right_sided_violation(&self) -> Option<usize> {
        self.relations
            .iter()
            .flat_map(|r| r.inputs.iter().copied())
            .find(|&v| self.is_defined(v))
    }

    pub fn check_right_sided(&self) -> Result<(), ConstraintError> {
        match self.right_sided_violation() {
            Some(v) => Err(ConstraintError::NotRightSided(self.vars[v].clone())),
            None => Ok(()),
        }
    }

    pub fn to_formula(&self) -> Formula {
        Formula {
            vars: self.vars.clone(),
            alphabet: self.alphabet.clone(),
            memberships: self
                .memberships
                .iter()
                .enumerate()
                .filter_map(|(v, m)| m.clone().map(|a| (v, a)))
                .collect(),
            relations: self.relations.clone(),
        }
    }

    pub fn satisfies(&self, eval: &[Word]) -> bool {
        self.to_formula().satisfies(eval)
    }

    /// Exact solution set with all values of length at most `max_len`.
    ///
    /// Independent variables are enumerated; defined ones are computed from their inputs.
    pub fn enumerate_solutions(&self, max_len: usize) -> Result<BTreeSet<Evaluation>, ConstraintError> {
        const BUDGET: usize = 2_000_000;
        let words = self.alphabet.words_upto(max_len);
        let free: Vec<usize> = (0..self.n()).filter(|&v| !self.is_defined(v)).collect();
        let candidates: Vec<Vec<Word>> = free
            .iter()
            .map(|&v| match &self.memberships[v] {
                Some(a) => words.iter().filter(|w| a.member(w)).cloned().collect(),
                None => words.clone(),
            })
            .collect();
        let mut out = BTreeSet::new();
        let mut partial: Vec<Evaluation> = vec![vec![Word::empty(); self.n()]];
        for (i, &v) in free.iter().enumerate() {
            let mut next = Vec::new();
            for e in &partial {
                for w in &candidates[i] {
                    let mut e2 = e.clone();
                    e2[v] = w.clone();
                    next.push(e2);
                }
            }
            if next.len() > BUDGET {
                return Err(ConstraintError::Budget(BUDGET));
            }
            partial = next;
        }
        for r in self.relations.iter().rev() {
            let mut next = Vec::new();
            for e in &partial {
                let input: Word = r.inputs.iter().flat_map(|&v| e[v].iter()).collect();
                for o in r.transducer.outputs(&input, max_len) {
                    if self.memberships[r.output].as_ref().is_none_or(|a| a.member(&o)) {
                        let mut e2 = e.clone();
                        e2[r.output] = o;
                        next.push(e2);
                    }
                }
            }
            if next.len() > BUDGET {
                return Err(ConstraintError::Budget(BUDGET));
            }
            partial = next;
        }
        out.extend(partial);
        Ok(out)
    }

    /// Reorders a declared-order evaluation into straight-line order.
    pub fn to_sl_tuple(&self, eval: &[Word]) -> WordTuple {
        WordTuple::new(self.order.iter().map(|&v| eval[v].clone()).collect())
    }
}

/// Finds a straight-line order, merging memberships per variable.
///
/// Among the admissible orders this picks, at each step, the lowest declared index.
pub fn validate_sl(f: &Formula) -> Result<SlFormula, ConstraintError> {
    let n = f.vars.len();
    let mut def: Vec<Option<usize>> = vec![None; n];
    for (i, r) in f.relations.iter().enumerate() {
        if def[r.output].is_some() {
            return Err(ConstraintError::NotSl(SlViolation::DefinedTwice(
                f.vars[r.output].clone(),
            )));
        }
        def[r.output] = Some(i);
    }
    // A defined variable must precede each defined variable it reads.
    let defined: Vec<usize> = (0..n).filter(|&v| def[v].is_some()).collect();
    let mut indeg: HashMap<usize, usize> = defined.iter().map(|&v| (v, 0)).collect();
    let mut succ: HashMap<usize, Vec<usize>> = HashMap::new();
    for &v in &defined {
        let r = &f.relations[def[v].unwrap()];
        let reads: BTreeSet<usize> = r.inputs.iter().copied().filter(|u| def[*u].is_some()).collect();
        for u in reads {
            succ.entry(v).or_default().push(u);
            *indeg.get_mut(&u).unwrap() += 1;
        }
    }
    let mut ready: BTreeSet<usize> = defined.iter().copied().filter(|v| indeg[v] == 0).collect();
    let mut order = Vec::new();
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &u in succ.get(&v).into_iter().flatten() {
            let d = indeg.get_mut(&u).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert(u);
            }
        }
    }
    if order.len() < defined.len() {
        let stuck = defined
            .iter()
            .filter(|v| !order.contains(v))
            .map(|&v| f.vars[v].clone())
            .collect();
        return Err(ConstraintError::NotSl(SlViolation::Cycle(stuck)));
    }
    let relations = order.iter().map(|&v| f.relations[def[v].unwrap()].clone()).collect();
    order.extend((0..n).filter(|&v| def[v].is_none()));

    let mut memberships: Vec<Option<Nfa>> = vec![None; n];
    for (v, a) in &f.memberships {
        let a = a.with_alphabet(&f.alphabet);
        memberships[*v] = Some(match memberships[*v].take() {
            None => a,
            Some(b) => b.product(&a)?,
        });
    }
    Ok(SlFormula {
        vars: f.vars.clone(),
        alphabet: f.alphabet.clone(),
        memberships,
        relations,
        order,
    })
}

/// Splits a conjunction into two straight-line formulas over the same variables whose joint
/// solutions are those of the conjunction, extended with one fresh copy variable per relation.
///
/// The copies `u_1 … u_k` come first in the variable list.
pub fn split(f: &Formula) -> Result<(SlFormula, SlFormula), ConstraintError> {
    let k = f.relations.len();
    let mut vars: Vec<String> = Vec::new();
    for i in 0..k {
        let mut name = format!("u{}", i + 1);
        while f.vars.contains(&name) || vars.contains(&name) {
            name.push('\'');
        }
        vars.push(name);
    }
    vars.extend(f.vars.iter().cloned());
    let id = Nft::identity(&f.alphabet);
    let mut psi1 = Formula::new(vars.clone(), f.alphabet.clone());
    let mut psi2 = Formula::new(vars, f.alphabet.clone());
    for (v, a) in &f.memberships {
        psi1.memberships.push((v + k, a.clone()));
    }
    for (i, r) in f.relations.iter().enumerate() {
        psi1.relations.push(Relation {
            output: i,
            inputs: vec![r.output + k],
            transducer: id.clone(),
            name: "Id".into(),
        });
        psi2.relations.push(Relation {
            output: i,
            inputs: r.inputs.iter().map(|v| v + k).collect(),
            transducer: r.transducer.clone(),
            name: r.name.clone(),
        });
    }
    Ok((validate_sl(&psi1)?, validate_sl(&psi2)?))
}

/// Two formulas over `x_1 … x_k, x` that are PosPTL-separable iff the automata have an empty
/// intersection: the first copies `x` into each `x_i ∈ L(A_i)`, the second is unconstrained.
pub fn gen_from_nfa_intersection(automata: &[Nfa]) -> Result<(SlFormula, SlFormula), ConstraintError> {
    let alphabet = automata
        .iter()
        .fold(Alphabet::default(), |acc, a| acc.union(a.alphabet()));
    let k = automata.len();
    let mut vars: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
    vars.push("x".into());
    let id = Nft::identity(&alphabet);
    let mut psi1 = Formula::new(vars.clone(), alphabet.clone());
    for (i, a) in automata.iter().enumerate() {
        psi1.memberships.push((i, a.with_alphabet(&alphabet)));
        psi1.relations.push(Relation {
            output: i,
            inputs: vec![k],
            transducer: id.clone(),
            name: "Id".into(),
        });
    }
    let psi2 = Formula::new(vars, alphabet);
    Ok((validate_sl(&psi1)?, validate_sl(&psi2)?))
}

pub(crate) fn check_alphabet(alphabet: &Alphabet) -> Result<(), ConstraintError> {
    match alphabet.reserved_in_use() {
        Some(c) => Err(ConstraintError::Reserved(c)),
        None => Ok(()),
    }
}

pub(crate) fn dollar_free(alphabet: &Alphabet) -> Result<(), ConstraintError> {
    if alphabet.contains(DOLLAR) {
        return Err(ConstraintError::DollarInAlphabet);
    }
    Ok(())
}
