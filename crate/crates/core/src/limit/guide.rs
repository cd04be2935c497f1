use std::collections::BTreeSet;

use serde_json::Value;

use crate::logic::{argument_patterns, QfFormula, Signature};
use crate::morley::{Morleyization, PrenexSentence};

use super::LimitError;

/// An element of the guide model.
pub type Handle = usize;

/// The equality pattern of `tuple` as a restricted growth string, with the
/// first element of each class.
pub fn equality_pattern<T: PartialEq + Copy>(tuple: &[T]) -> (Vec<usize>, Vec<T>) {
    let mut reps: Vec<T> = Vec::new();
    let pattern = tuple
        .iter()
        .map(|x| match reps.iter().position(|r| r == x) {
            Some(i) => i,
            None => {
                reps.push(*x);
                reps.len() - 1
            }
        })
        .collect();
    (pattern, reps)
}

/// Every equality pattern of an `r`-tuple, lexicographically.
pub fn equality_patterns(r: usize) -> Vec<Vec<usize>> {
    fn go(r: usize, cur: &mut Vec<usize>, classes: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for c in 0..=classes {
            cur.push(c);
            go(r, cur, classes.max(c + 1), out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(r, &mut Vec::with_capacity(r), 0, &mut out);
    out
}

/// Number of classes in an equality pattern.
pub fn class_count(pattern: &[usize]) -> usize {
    pattern.iter().max().map_or(0, |m| m + 1)
}

/// The model of the morleyized theory that guides the construction.
///
/// Facts factor through keys: `fact(s, t)` depends only on the equality
/// pattern of `t` and on `key(s, h)` for one representative `h` of each
/// class. The stage checks rely on this to examine every tuple through its
/// key classes.
pub trait GuideModel: Send + Sync {
    fn name(&self) -> String;

    fn morleyization(&self) -> &Morleyization;

    fn language(&self) -> &Signature {
        self.morleyization().language()
    }

    /// Number of free variables of `χ`.
    fn chi_arity(&self) -> usize;

    fn key(&self, symbol: usize, h: Handle) -> u64;

    fn fact_keys(&self, symbol: usize, pattern: &[usize], keys: &[u64]) -> bool;

    fn fact(&self, symbol: usize, tuple: &[Handle]) -> bool {
        let (pattern, reps) = equality_pattern(tuple);
        let keys: Vec<u64> = reps.iter().map(|&h| self.key(symbol, h)).collect();
        self.fact_keys(symbol, &pattern, &keys)
    }

    /// A new element outside everything handed out so far.
    fn fresh(&mut self) -> Handle;

    /// A new element that can replace `tuple[position]` without changing
    /// the quantifier-free type of `tuple` over `sub`.
    fn duplicate(
        &mut self,
        tuple: &[Handle],
        position: usize,
        sub: &[usize],
    ) -> Result<Handle, LimitError>;

    /// A new element `c` with `ρ(tuple, c)` for the pithy `sentence`.
    fn witness(
        &mut self,
        sentence: &PrenexSentence,
        tuple: &[Handle],
    ) -> Result<Handle, LimitError>;

    /// A relation symbol on which the two tuples disagree.
    fn separating_symbol(&mut self, a: &[Handle], b: &[Handle]) -> Option<usize>;

    /// A literal of omitted type `q` that is false on `tuple`.
    fn refuting_formula(&mut self, q: usize, tuple: &[Handle]) -> Result<QfFormula, LimitError>;

    /// The symbols of refuting literals for every tuple from `elements`.
    fn refuting_symbols(
        &mut self,
        q: usize,
        elements: &[Handle],
    ) -> Result<BTreeSet<usize>, LimitError> {
        let r = self.morleyization().omitted()[q].vars.len();
        let mut out = BTreeSet::new();
        for t in argument_patterns(elements.len(), r) {
            let tuple: Vec<Handle> = t.iter().map(|&i| elements[i]).collect();
            out.extend(self.refuting_formula(q, &tuple)?.symbols());
        }
        Ok(out)
    }

    /// The `n`-th symbol in a fixed enumeration of the full language, or
    /// `None` if that slot names no symbol yet.
    fn enumerate_symbol(&mut self, n: usize) -> Option<usize> {
        (n < self.language().len()).then_some(n)
    }

    fn describe(&self) -> Value;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patterns_count_set_partitions() {
        let bell = [1, 1, 2, 5, 15, 52];
        for (r, &b) in bell.iter().enumerate() {
            assert_eq!(equality_patterns(r).len(), b);
        }
        assert_eq!(equality_patterns(2), vec![vec![0, 0], vec![0, 1]]);
    }

    #[test]
    fn pattern_of_tuple() {
        let (p, reps) = equality_pattern(&[7, 3, 7, 9]);
        assert_eq!(p, vec![0, 1, 0, 2]);
        assert_eq!(reps, vec![7, 3, 9]);
        assert_eq!(class_count(&p), 3);
    }
}
