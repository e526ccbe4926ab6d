//! Shortest, then lexicographically least, word search over labelled graphs.
//!
//! Nodes are explored layer by layer: layer `k` holds the nodes first reachable by a word of
//! length `k`, each tagged with the rank of the least such word. Ranks are dense and ordered
//! like the words they stand for, so the next layer is ranked by sorting `(rank, symbol)` keys.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::hash::Hash;

use thiserror::Error;

use crate::words::{Symbol, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("search exceeded its cap of {cap} nodes")]
pub struct CapExceeded {
    pub cap: usize,
}

#[derive(Debug, Clone)]
pub struct Found<N> {
    pub word: Word,
    pub node: N,
}

/// Edge list of a node: `None` labels are silent moves.
pub type Edges<N> = Vec<(Option<Symbol>, N)>;

/// Returns the shortlex-least word labelling a path from an initial node to an accepting node.
///
/// `cap` bounds the number of distinct nodes settled.
pub fn shortest_lex<N, I, S, A>(
    initial: I,
    mut succ: S,
    mut accept: A,
    cap: usize,
) -> Result<Option<Found<N>>, CapExceeded>
where
    N: Clone + Eq + Hash,
    I: IntoIterator<Item = N>,
    S: FnMut(&N) -> Edges<N>,
    A: FnMut(&N) -> bool,
{
    let mut seen: HashSet<N> = HashSet::new();
    // parents[k][r] = (rank in layer k-1, symbol) of the word with rank r in layer k.
    let mut parents: Vec<Vec<(usize, Symbol)>> = vec![vec![]];
    let mut seeds: Vec<(usize, N)> = initial.into_iter().map(|n| (0, n)).collect();

    loop {
        let mut store: Vec<N> = Vec::new();
        let mut heap: BinaryHeap<Reverse<(usize, usize)>> = BinaryHeap::new();
        for (rank, n) in seeds.drain(..) {
            heap.push(Reverse((rank, store.len())));
            store.push(n);
        }
        let mut next: HashMap<N, (usize, Symbol)> = HashMap::new();
        while let Some(Reverse((rank, idx))) = heap.pop() {
            let node = store[idx].clone();
            if seen.contains(&node) {
                continue;
            }
            seen.insert(node.clone());
            if seen.len() > cap {
                return Err(CapExceeded { cap });
            }
            if accept(&node) {
                let word = rebuild(&parents, rank);
                return Ok(Some(Found { word, node }));
            }
            for (label, m) in succ(&node) {
                if seen.contains(&m) {
                    continue;
                }
                match label {
                    None => {
                        heap.push(Reverse((rank, store.len())));
                        store.push(m);
                    }
                    Some(c) => {
                        let key = (rank, c);
                        next.entry(m)
                            .and_modify(|k| {
                                if key < *k {
                                    *k = key
                                }
                            })
                            .or_insert(key);
                    }
                }
            }
        }
        next.retain(|n, _| !seen.contains(n));
        if next.is_empty() {
            return Ok(None);
        }
        let mut keys: Vec<(usize, Symbol)> = next.values().copied().collect();
        keys.sort_unstable();
        keys.dedup();
        let rank_of: HashMap<(usize, Symbol), usize> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        seeds = next.into_iter().map(|(n, k)| (rank_of[&k], n)).collect();
        parents.push(keys);
    }
}

fn rebuild(parents: &[Vec<(usize, Symbol)>], mut rank: usize) -> Word {
    let mut out = Vec::with_capacity(parents.len());
    for layer in parents.iter().skip(1).rev() {
        let (p, c) = layer[rank];
        out.push(c);
        rank = p;
    }
    out.reverse();
    Word::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Nodes are integers; from n you may read 'a' to 2n or 'b' to 2n+1, or silently go to n+100 once.
    #[test]
    fn finds_shortlex_least() {
        let found = shortest_lex(
            [1u32],
            |&n| {
                if n > 64 {
                    return vec![];
                }
                vec![(Some('b'), 2 * n + 1), (Some('a'), 2 * n)]
            },
            |&n| n == 5 || n == 6,
            1000,
        )
        .unwrap()
        .unwrap();
        // 5 = "ab", 6 = "ba"
        assert_eq!(found.word, Word::from("ab"));
        assert_eq!(found.node, 5);
    }

    #[test]
    fn silent_moves_keep_the_least_word() {
        // 0 -b-> 1, 0 -a-> 2, 2 -ε-> 1, 1 -a-> 3 (accept)
        let g: HashMap<u8, Edges<u8>> = [
            (0, vec![(Some('b'), 1), (Some('a'), 2)]),
            (2, vec![(None, 1)]),
            (1, vec![(Some('a'), 3)]),
        ]
        .into_iter()
        .collect();
        let found = shortest_lex([0u8], |n| g.get(n).cloned().unwrap_or_default(), |&n| n == 3, 10)
            .unwrap()
            .unwrap();
        assert_eq!(found.word, Word::from("aa"));
    }

    #[test]
    fn empty_and_cap() {
        let none = shortest_lex([0u8], |_| vec![], |_| false, 10).unwrap();
        assert!(none.is_none());
        let capped = shortest_lex([0u64], |&n| vec![(Some('a'), n + 1)], |_| false, 50);
        assert_eq!(capped.unwrap_err(), CapExceeded { cap: 50 });
    }
}
