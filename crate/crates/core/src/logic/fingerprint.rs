use std::fmt;

use serde::{Deserialize, Serialize};

use super::{FiniteStructure, LogicError, Permutation};

/// Complete atomic diagram of an `arity`-tuple over a finite sublanguage.
///
/// Bit order: for each symbol of `sublanguage` in order, every argument
/// pattern in `{0..arity-1}^{ar(symbol)}` in lexicographic order; then one
/// equality bit per pair `i < j`, pairs in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypeFingerprint {
    arity: usize,
    sublanguage: Vec<usize>,
    arities: Vec<usize>,
    len: usize,
    words: Vec<u64>,
}

/// All argument patterns of length `k` over `{0..n-1}`, lexicographic.
pub fn argument_patterns(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if n == 0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(n.pow(k as u32));
    let mut cur = vec![0usize; k];
    loop {
        out.push(cur.clone());
        let mut pos = k;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            cur[pos] += 1;
            if cur[pos] < n {
                break;
            }
            cur[pos] = 0;
        }
    }
}

fn pattern_rank(n: usize, pattern: &[usize]) -> usize {
    pattern.iter().fold(0, |acc, &p| acc * n + p)
}

impl TypeFingerprint {
    /// Builds a fingerprint from an atomic oracle. `atom(pos, pattern)` answers
    /// the symbol at position `pos` of `sublanguage`; `equal(i, j)` answers
    /// `x_i = x_j`.
    pub fn build(
        arity: usize,
        sublanguage: Vec<usize>,
        arities: Vec<usize>,
        mut atom: impl FnMut(usize, &[usize]) -> bool,
        mut equal: impl FnMut(usize, usize) -> bool,
    ) -> Self {
        assert_eq!(sublanguage.len(), arities.len());
        let mut bits = Vec::new();
        for (pos, &ar) in arities.iter().enumerate() {
            for pattern in argument_patterns(arity, ar) {
                bits.push(atom(pos, &pattern));
            }
        }
        for i in 0..arity {
            for j in i + 1..arity {
                bits.push(equal(i, j));
            }
        }
        Self::from_bits(arity, sublanguage, arities, &bits)
    }

    fn from_bits(
        arity: usize,
        sublanguage: Vec<usize>,
        arities: Vec<usize>,
        bits: &[bool],
    ) -> Self {
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (i, &b) in bits.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        TypeFingerprint {
            arity,
            sublanguage,
            arities,
            len: bits.len(),
            words,
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn sublanguage(&self) -> &[usize] {
        &self.sublanguage
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.bit(i)).collect()
    }

    fn symbol_offset(&self, pos: usize) -> usize {
        self.arities[..pos]
            .iter()
            .map(|&ar| self.arity.pow(ar as u32))
            .sum()
    }

    fn equality_offset(&self) -> usize {
        self.symbol_offset(self.arities.len())
    }

    /// Truth of the symbol at sublanguage position `pos` on `pattern`.
    pub fn atom(&self, pos: usize, pattern: &[usize]) -> bool {
        assert_eq!(pattern.len(), self.arities[pos]);
        self.bit(self.symbol_offset(pos) + pattern_rank(self.arity, pattern))
    }

    pub fn equal(&self, i: usize, j: usize) -> bool {
        if i == j {
            return true;
        }
        let (i, j) = (i.min(j), i.max(j));
        // pairs (a, b) with a < i come first, each contributing arity-1-a entries
        let before: usize = (0..i).map(|a| self.arity - 1 - a).sum();
        self.bit(self.equality_offset() + before + (j - i - 1))
    }

    /// True when some equality bit is set, i.e. the tuple repeats an element.
    pub fn is_redundant(&self) -> bool {
        (0..self.arity).any(|i| (i + 1..self.arity).any(|j| self.equal(i, j)))
    }

    /// The type of the first `m` coordinates.
    pub fn restrict(&self, m: usize) -> TypeFingerprint {
        assert!(m <= self.arity);
        TypeFingerprint::build(
            m,
            self.sublanguage.clone(),
            self.arities.clone(),
            |pos, pattern| self.atom(pos, pattern),
            |i, j| self.equal(i, j),
        )
    }

    /// The type of `ā∘σ` given that `self` is the type of `ā`:
    /// `φ(x₀..) ∈ σ(p)` iff `φ(x_{σ(0)}..) ∈ p`.
    pub fn permute(&self, sigma: &Permutation) -> TypeFingerprint {
        assert_eq!(sigma.len(), self.arity);
        TypeFingerprint::build(
            self.arity,
            self.sublanguage.clone(),
            self.arities.clone(),
            |pos, pattern| {
                let mapped: Vec<usize> = pattern.iter().map(|&p| sigma.apply(p)).collect();
                self.atom(pos, &mapped)
            },
            |i, j| self.equal(sigma.apply(i), sigma.apply(j)),
        )
    }

    pub fn to_bitstring(&self) -> String {
        (0..self.len)
            .map(|i| if self.bit(i) { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Display for TypeFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.arity, self.to_bitstring())
    }
}

/// Fingerprint of `tuple` in `m` over the symbols `sub` (indices into m's
/// signature).
pub fn qf_fingerprint(
    m: &FiniteStructure,
    tuple: &[usize],
    sub: &[usize],
) -> Result<TypeFingerprint, LogicError> {
    if let Some(&bad) = tuple.iter().find(|&&a| a >= m.domain_size()) {
        return Err(LogicError::ElementOutOfDomain {
            element: bad,
            domain: m.domain_size(),
        });
    }
    let sig = m.signature();
    let mut arities = Vec::with_capacity(sub.len());
    for &s in sub {
        if s >= sig.len() {
            return Err(LogicError::UnknownSymbol(format!("#{s}")));
        }
        arities.push(sig.arity(s));
    }
    let mut args = Vec::new();
    Ok(TypeFingerprint::build(
        tuple.len(),
        sub.to_vec(),
        arities,
        |pos, pattern| {
            args.clear();
            args.extend(pattern.iter().map(|&p| tuple[p]));
            m.holds(sub[pos], &args)
        },
        |i, j| tuple[i] == tuple[j],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::Signature;

    #[test]
    fn pattern_enumeration_is_lexicographic() {
        assert_eq!(
            argument_patterns(2, 2),
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
        );
        assert_eq!(argument_patterns(3, 0), vec![Vec::<usize>::new()]);
        assert!(argument_patterns(0, 1).is_empty());
    }

    #[test]
    fn layout_of_a_binary_symbol() {
        let sig = Signature::indexed("R", 2, 1);
        let mut m = FiniteStructure::new(sig, 3);
        m.add_fact(0, vec![0, 1]).unwrap();
        let fp = qf_fingerprint(&m, &[0, 1, 1], &[0]).unwrap();
        // 9 atom bits then 3 equality bits (0,1) (0,2) (1,2)
        assert_eq!(fp.len(), 12);
        assert_eq!(fp.to_bitstring(), "011000000001");
        assert!(fp.equal(1, 2) && !fp.equal(0, 2));
        assert!(fp.is_redundant());
    }
}
