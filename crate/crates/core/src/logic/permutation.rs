use serde::{Deserialize, Serialize};

use super::{FiniteStructure, LogicError};

/// A bijection of `{0..n-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self, LogicError> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &v in &mapping {
            if v >= n || seen[v] {
                return Err(LogicError::InvalidPermutation(mapping));
            }
            seen[v] = true;
        }
        Ok(Permutation(mapping))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn transposition(n: usize, a: usize, b: usize) -> Self {
        let mut m: Vec<usize> = (0..n).collect();
        m.swap(a, b);
        Permutation(m)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn mapping(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &v)| i == v)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        assert_eq!(
            self.len(),
            other.len(),
            "composing permutations of different sizes"
        );
        Permutation(other.0.iter().map(|&i| self.0[i]).collect())
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.0.len()];
        for (i, &v) in self.0.iter().enumerate() {
            inv[v] = i;
        }
        Permutation(inv)
    }
}

/// The logic action: `σ(M) ⊨ R(ā)` iff `M ⊨ R(σ⁻¹ā)`, i.e. every fact is
/// carried along by `σ`.
pub fn apply_permutation(
    m: &FiniteStructure,
    sigma: &Permutation,
) -> Result<FiniteStructure, LogicError> {
    if sigma.len() != m.domain_size() {
        return Err(LogicError::SizeMismatch {
            expected: m.domain_size(),
            found: sigma.len(),
        });
    }
    let mut out = FiniteStructure::new(m.signature().clone(), m.domain_size());
    for (s, args) in m.facts() {
        out.add_fact(s, args.iter().map(|&a| sigma.apply(a)).collect())?;
    }
    Ok(out)
}
