//! Words, the subword order, minors, piece languages and PosPTL values.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A single input symbol. Every symbol is one Unicode scalar value.
pub type Symbol = char;

/// Block separator introduced by `Encode`.
pub const SEP: Symbol = '#';
/// Segment separator introduced by the functional rewriting.
pub const DOLLAR: Symbol = '$';
/// Left endmarker of two-way machines.
pub const LEFT_END: Symbol = '⊢';
/// Right endmarker of two-way machines.
pub const RIGHT_END: Symbol = '⊣';
/// Symbols that never belong to a user alphabet.
pub const RESERVED: [Symbol; 4] = [SEP, DOLLAR, LEFT_END, RIGHT_END];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordsError {
    #[error("arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("symbol {0:?} is not in the alphabet")]
    ForeignSymbol(Symbol),
}

/// Ordered set of symbols.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Alphabet(BTreeSet<Symbol>);

impl Alphabet {
    pub fn new<I: IntoIterator<Item = Symbol>>(symbols: I) -> Self {
        Alphabet(symbols.into_iter().collect())
    }

    pub fn from_str(s: &str) -> Self {
        Alphabet::new(s.chars())
    }

    pub fn contains(&self, s: Symbol) -> bool {
        self.0.contains(&s)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.0.iter().copied()
    }

    pub fn symbols(&self) -> Vec<Symbol> {
        self.0.iter().copied().collect()
    }

    pub fn union(&self, other: &Alphabet) -> Alphabet {
        Alphabet(self.0.union(&other.0).copied().collect())
    }

    pub fn with(&self, s: Symbol) -> Alphabet {
        let mut a = self.clone();
        a.0.insert(s);
        a
    }

    pub fn without(&self, s: Symbol) -> Alphabet {
        let mut a = self.clone();
        a.0.remove(&s);
        a
    }

    pub fn is_subset(&self, other: &Alphabet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn insert(&mut self, s: Symbol) {
        self.0.insert(s);
    }

    pub fn reserved_in_use(&self) -> Option<Symbol> {
        RESERVED.iter().copied().find(|r| self.contains(*r))
    }

    /// All words over the alphabet of length at most `max_len`, in shortlex order.
    pub fn words_upto(&self, max_len: usize) -> Vec<Word> {
        let syms = self.symbols();
        let mut out = vec![Word::empty()];
        let mut layer = vec![Word::empty()];
        for _ in 0..max_len {
            let mut next = Vec::with_capacity(layer.len() * syms.len());
            for w in &layer {
                for &s in &syms {
                    next.push(w.pushed(s));
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for Alphabet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
        for s in &self.0 {
            seq.serialize_element(&s.to_string())?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Alphabet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let w = Word::deserialize(deserializer)?;
        Ok(Alphabet::new(w.0))
    }
}

/// A finite word. Ordered shortlex: shorter words first, then lexicographically.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Word(Vec<Symbol>);

impl Word {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        Word(symbols)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn into_symbols(self) -> Vec<Symbol> {
        self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.0.iter().copied()
    }

    pub fn push(&mut self, s: Symbol) {
        self.0.push(s);
    }

    pub fn pushed(&self, s: Symbol) -> Word {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(s);
        Word(v)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    pub fn count(&self, s: Symbol) -> usize {
        self.0.iter().filter(|&&c| c == s).count()
    }

    pub fn over(&self, alphabet: &Alphabet) -> Result<(), WordsError> {
        match self.0.iter().find(|s| !alphabet.contains(**s)) {
            Some(&s) => Err(WordsError::ForeignSymbol(s)),
            None => Ok(()),
        }
    }

    /// Splits at every occurrence of `sep`.
    pub fn split(&self, sep: Symbol) -> Vec<Word> {
        self.0.split(|&c| c == sep).map(|part| Word(part.to_vec())).collect()
    }
}

impl From<&str> for Word {
    fn from(s: &str) -> Self {
        Word(s.chars().collect())
    }
}

impl From<Vec<Symbol>> for Word {
    fn from(v: Vec<Symbol>) -> Self {
        Word(v)
    }
}

impl FromIterator<Symbol> for Word {
    fn from_iter<I: IntoIterator<Item = Symbol>>(iter: I) -> Self {
        Word(iter.into_iter().collect())
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.0.iter().collect();
        write!(f, "{s:?}")
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
        for s in &self.0 {
            seq.serialize_element(&s.to_string())?;
        }
        seq.end()
    }
}

/// Accepts either an array of one-symbol strings or a plain string.
impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct WordVisitor;
        impl<'de> Visitor<'de> for WordVisitor {
            type Value = Word;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a string or an array of one-symbol strings")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Word, E> {
                Ok(Word::from(v))
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Word, A::Error> {
                let mut out = Vec::new();
                while let Some(s) = seq.next_element::<String>()? {
                    let mut chars = s.chars();
                    match (chars.next(), chars.next()) {
                        (Some(c), None) => out.push(c),
                        _ => return Err(de::Error::custom(format!("symbol {s:?} must be exactly one character"))),
                    }
                }
                Ok(Word(out))
            }
        }
        deserializer.deserialize_any(WordVisitor)
    }
}

/// Greedy left-to-right embedding test for `u ⪯ v`.
pub fn is_subword_slice(u: &[Symbol], v: &[Symbol]) -> bool {
    if u.len() > v.len() {
        return false;
    }
    let mut i = 0;
    for &c in v {
        if i == u.len() {
            break;
        }
        if u[i] == c {
            i += 1;
        }
    }
    i == u.len()
}

pub fn is_subword(u: &Word, v: &Word) -> bool {
    is_subword_slice(&u.0, &v.0)
}

/// An n-tuple of words, ordered by total length and then componentwise.
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WordTuple(pub Vec<Word>);

impl WordTuple {
    pub fn new(components: Vec<Word>) -> Self {
        WordTuple(components)
    }

    pub fn from_strs(parts: &[&str]) -> Self {
        WordTuple(parts.iter().map(|p| Word::from(*p)).collect())
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[Word] {
        &self.0
    }

    pub fn total_len(&self) -> usize {
        self.0.iter().map(Word::len).sum()
    }
}

impl Ord for WordTuple {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_len()
            .cmp(&other.total_len())
            .then_with(|| self.0.len().cmp(&other.0.len()))
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for WordTuple {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for WordTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, w) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{w}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for WordTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("").finish()?;
        write!(f, "{:?}", self.0)
    }
}

/// Componentwise subword order on tuples.
pub fn tuple_subword(u: &WordTuple, v: &WordTuple) -> Result<bool, WordsError> {
    if u.arity() != v.arity() {
        return Err(WordsError::ArityMismatch {
            expected: u.arity(),
            found: v.arity(),
        });
    }
    Ok(u.0.iter().zip(&v.0).all(|(a, b)| is_subword(a, b)))
}

/// The quasi-order used by [`minimize`] and the minor engine.
pub trait Embeds {
    fn embeds_in(&self, other: &Self) -> bool;
}

impl Embeds for Word {
    fn embeds_in(&self, other: &Self) -> bool {
        is_subword(self, other)
    }
}

impl Embeds for WordTuple {
    fn embeds_in(&self, other: &Self) -> bool {
        tuple_subword(self, other).unwrap_or(false)
    }
}

/// Minimal elements of `items`, sorted in the element order.
///
/// The element order must refine the embedding: a strict embedding implies strictly smaller.
pub fn minimize<T, I>(items: I) -> Vec<T>
where
    T: Embeds + Ord + Clone,
    I: IntoIterator<Item = T>,
{
    let sorted: BTreeSet<T> = items.into_iter().collect();
    let mut kept: Vec<T> = Vec::new();
    for x in sorted {
        if !kept.iter().any(|m| m.embeds_in(&x)) {
            kept.push(x);
        }
    }
    kept
}

/// A finite antichain, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Antichain<T>(Vec<T>);

impl<T: Embeds + Ord + Clone> Antichain<T> {
    pub fn new() -> Self {
        Antichain(Vec::new())
    }

    pub fn from_items<I: IntoIterator<Item = T>>(items: I) -> Self {
        Antichain(minimize(items))
    }

    /// True iff some element embeds into `x`, i.e. `x` lies in the upward closure.
    pub fn dominates(&self, x: &T) -> bool {
        self.0.iter().any(|m| m.embeds_in(x))
    }

    /// Inserts `x` and drops the elements it dominates. Returns false if `x` was already dominated.
    pub fn insert(&mut self, x: T) -> bool {
        if self.dominates(&x) {
            return false;
        }
        self.0.retain(|m| !x.embeds_in(m));
        let pos = self.0.binary_search(&x).unwrap_or_else(|p| p);
        self.0.insert(pos, x);
        true
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }
}

impl<T: Embeds + Ord + Clone> Default for Antichain<T> {
    fn default() -> Self {
        Antichain::new()
    }
}

impl<T: Serialize> Serialize for Antichain<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

/// The piece language `Σ* a1 Σ* ... Σ* ak Σ*` of its pattern.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Piece(pub Word);

impl Piece {
    pub fn new(pattern: Word) -> Self {
        Piece(pattern)
    }

    pub fn any() -> Self {
        Piece(Word::empty())
    }

    pub fn pattern(&self) -> &Word {
        &self.0
    }
}

impl fmt::Display for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Σ*")?;
        for s in self.0.iter() {
            write!(f, "{s}Σ*")?;
        }
        Ok(())
    }
}

pub fn piece_member(p: &Piece, w: &Word) -> bool {
    is_subword(&p.0, w)
}

/// Minimal common superwords of the two patterns; their pieces cover the intersection exactly.
pub fn piece_intersection(p: &Piece, q: &Piece) -> Vec<Piece> {
    let a = p.0.symbols();
    let b = q.0.symbols();
    let mut memo: Vec<Vec<Option<Vec<Word>>>> = vec![vec![None; b.len() + 1]; a.len() + 1];
    merges(a, b, 0, 0, &mut memo).into_iter().map(Piece).collect()
}

fn merges(a: &[Symbol], b: &[Symbol], i: usize, j: usize, memo: &mut Vec<Vec<Option<Vec<Word>>>>) -> Vec<Word> {
    if let Some(r) = &memo[i][j] {
        return r.clone();
    }
    let result = if i == a.len() {
        vec![Word(b[j..].to_vec())]
    } else if j == b.len() {
        vec![Word(a[i..].to_vec())]
    } else {
        let mut cands = Vec::new();
        let prefix = |c: Symbol, rest: Vec<Word>| {
            rest.into_iter().map(move |w| {
                let mut v = Vec::with_capacity(w.len() + 1);
                v.push(c);
                v.extend(w.0);
                Word(v)
            })
        };
        if a[i] == b[j] {
            cands.extend(prefix(a[i], merges(a, b, i + 1, j + 1, memo)));
        }
        cands.extend(prefix(a[i], merges(a, b, i + 1, j, memo)));
        cands.extend(prefix(b[j], merges(a, b, i, j + 1, memo)));
        minimize(cands)
    };
    memo[i][j] = Some(result.clone());
    result
}

/// Componentwise intersection of two piece products, as a union of piece products.
pub fn product_intersection(p: &[Piece], q: &[Piece]) -> Vec<Vec<Piece>> {
    let mut acc: Vec<Vec<Piece>> = vec![Vec::new()];
    for (a, b) in p.iter().zip(q) {
        let options = piece_intersection(a, b);
        let mut next = Vec::with_capacity(acc.len() * options.len());
        for prefix in &acc {
            for o in &options {
                let mut v = prefix.clone();
                v.push(o.clone());
                next.push(v);
            }
        }
        acc = next;
    }
    acc
}

/// A finite union of n-ary piece products. The empty union denotes the empty language.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PosPtl {
    arity: usize,
    // Minimal products, sorted like the tuples of their patterns.
    union: Vec<Vec<Piece>>,
}

fn product_tuple(p: &[Piece]) -> WordTuple {
    WordTuple(p.iter().map(|x| x.0.clone()).collect())
}

impl PosPtl {
    pub fn empty(arity: usize) -> Self {
        PosPtl {
            arity,
            union: Vec::new(),
        }
    }

    /// `Σ* × ... × Σ*`.
    pub fn universal(arity: usize) -> Self {
        PosPtl::from_products(arity, vec![vec![Piece::any(); arity]]).expect("arity is consistent")
    }

    pub fn from_products<I>(arity: usize, products: I) -> Result<Self, WordsError>
    where
        I: IntoIterator<Item = Vec<Piece>>,
    {
        let mut union = Vec::new();
        for p in products {
            if p.len() != arity {
                return Err(WordsError::ArityMismatch {
                    expected: arity,
                    found: p.len(),
                });
            }
            union.push(p);
        }
        let mut out = PosPtl { arity, union };
        out.normalize();
        Ok(out)
    }

    /// Drops products contained in other products.
    fn normalize(&mut self) {
        let tuples = minimize(self.union.iter().map(|p| product_tuple(p)));
        self.union = tuples
            .into_iter()
            .map(|t| t.0.into_iter().map(Piece).collect())
            .collect();
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn is_empty(&self) -> bool {
        self.union.is_empty()
    }

    pub fn products(&self) -> impl Iterator<Item = &Vec<Piece>> {
        self.union.iter()
    }

    pub fn len(&self) -> usize {
        self.union.len()
    }

    pub fn member(&self, t: &WordTuple) -> Result<bool, WordsError> {
        if t.arity() != self.arity {
            return Err(WordsError::ArityMismatch {
                expected: self.arity,
                found: t.arity(),
            });
        }
        Ok(self
            .union
            .iter()
            .any(|p| p.iter().zip(&t.0).all(|(piece, w)| piece_member(piece, w))))
    }

    pub fn union_with(&self, other: &PosPtl) -> Result<PosPtl, WordsError> {
        if self.arity != other.arity {
            return Err(WordsError::ArityMismatch {
                expected: self.arity,
                found: other.arity,
            });
        }
        PosPtl::from_products(self.arity, self.union.iter().chain(other.union.iter()).cloned())
    }

    pub fn intersect(&self, other: &PosPtl) -> Result<PosPtl, WordsError> {
        if self.arity != other.arity {
            return Err(WordsError::ArityMismatch {
                expected: self.arity,
                found: other.arity,
            });
        }
        let mut products = Vec::new();
        for p in &self.union {
            for q in &other.union {
                products.extend(product_intersection(p, q));
            }
        }
        PosPtl::from_products(self.arity, products)
    }
}

impl fmt::Display for PosPtl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.union.is_empty() {
            return write!(f, "∅");
        }
        for (i, p) in self.union.iter().enumerate() {
            if i > 0 {
                write!(f, " ∪ ")?;
            }
            let many = self.union.len() > 1 && self.arity > 1;
            if many {
                write!(f, "(")?;
            }
            for (j, piece) in p.iter().enumerate() {
                if j > 0 {
                    write!(f, " × ")?;
                }
                write!(f, "{piece}")?;
            }
            if many {
                write!(f, ")")?;
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct PosPtlJson {
    arity: usize,
    union: Vec<Vec<Word>>,
}

impl Serialize for PosPtl {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PosPtlJson {
            arity: self.arity,
            union: self
                .union
                .iter()
                .map(|p| p.iter().map(|x| x.0.clone()).collect())
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PosPtl {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = PosPtlJson::deserialize(deserializer)?;
        PosPtl::from_products(
            raw.arity,
            raw.union.into_iter().map(|p| p.into_iter().map(Piece).collect()),
        )
        .map_err(de::Error::custom)
    }
}

/// One piece product per minor element. The result denotes the upward closure of `minor`.
pub fn minor_to_posptl(arity: usize, minor: &[WordTuple]) -> Result<PosPtl, WordsError> {
    PosPtl::from_products(arity, minor.iter().map(|t| t.0.iter().cloned().map(Piece).collect()))
}

pub fn posptl_member(p: &PosPtl, t: &WordTuple) -> Result<bool, WordsError> {
    p.member(t)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MinorError<T: fmt::Debug, E: fmt::Debug + fmt::Display> {
    #[error("fuel exhausted after {calls} oracle calls with {} candidate minor elements", partial.len())]
    FuelExhausted { partial: Vec<T>, calls: usize },
    #[error("oracle failed: {0}")]
    Oracle(E),
    #[error("oracle returned {0:?}, which is already dominated")]
    Contract(T),
}

/// Computes `min(L↑)` by repeatedly asking `oracle` for an element of `L` outside the current closure.
///
/// `fuel` bounds the number of oracle calls.
pub fn valk_jantzen_minor<T, E, F>(mut oracle: F, fuel: usize) -> Result<Vec<T>, MinorError<T, E>>
where
    T: Embeds + Ord + Clone + fmt::Debug,
    E: fmt::Debug + fmt::Display,
    F: FnMut(&Antichain<T>) -> Result<Option<T>, E>,
{
    let mut m = Antichain::new();
    for _ in 0..fuel {
        match oracle(&m).map_err(MinorError::Oracle)? {
            None => return Ok(m.into_vec()),
            Some(x) => {
                if !m.insert(x.clone()) {
                    return Err(MinorError::Contract(x));
                }
            }
        }
    }
    Err(MinorError::FuelExhausted {
        partial: m.into_vec(),
        calls: fuel,
    })
}
