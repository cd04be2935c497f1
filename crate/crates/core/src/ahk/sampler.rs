use std::cell::RefCell;
use std::collections::HashMap;

use crate::logic::{argument_patterns, FiniteStructure, Signature, TypeFingerprint};

use super::{AhkError, SeedKey, Uniform};

/// The family `(ξ_X)` for `X` ranging over subsets of a finite tuple of
/// distinct labels. Samplers address subsets by position in the tuple.
pub struct XiFamily {
    seed: SeedKey,
    labels: Vec<usize>,
    view: Option<Vec<usize>>,
    cache: RefCell<HashMap<Vec<usize>, Uniform>>,
    reads: Option<RefCell<Vec<Vec<usize>>>>,
}

impl XiFamily {
    pub fn new(seed: SeedKey, labels: Vec<usize>) -> Self {
        XiFamily {
            seed,
            labels,
            view: None,
            cache: RefCell::new(HashMap::new()),
            reads: None,
        }
    }

    /// Like [`XiFamily::new`] but logs every set of positions read.
    pub fn recording(seed: SeedKey, labels: Vec<usize>) -> Self {
        XiFamily {
            reads: Some(RefCell::new(Vec::new())),
            ..XiFamily::new(seed, labels)
        }
    }

    /// The family `X ↦ ξ_{σ[X]}`, keeping the same labels.
    pub fn permuted(&self, sigma: &[usize]) -> Self {
        assert_eq!(sigma.len(), self.labels.len());
        let view = match &self.view {
            Some(v) => sigma.iter().map(|&i| v[i]).collect(),
            None => sigma.to_vec(),
        };
        XiFamily {
            view: Some(view),
            ..XiFamily::new(self.seed, self.labels.clone())
        }
    }

    /// The subfamily on the first `m` positions.
    pub fn truncated(&self, m: usize) -> Self {
        assert!(self.view.is_none(), "truncating a permuted family");
        XiFamily::new(self.seed, self.labels[..m].to_vec())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn seed(&self) -> SeedKey {
        self.seed
    }

    /// Raw label of position `i`. Exchangeable samplers never look at it.
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// `ξ` of the set of positions `positions` (order and repeats ignored).
    pub fn get(&self, positions: &[usize]) -> Uniform {
        let mut key: Vec<usize> = positions.to_vec();
        key.sort_unstable();
        key.dedup();
        if let Some(reads) = &self.reads {
            reads.borrow_mut().push(key.clone());
        }
        if let Some(u) = self.cache.borrow().get(&key) {
            return *u;
        }
        let set: Vec<usize> = key
            .iter()
            .map(|&p| {
                let q = self.view.as_ref().map_or(p, |v| v[p]);
                self.labels[q]
            })
            .collect();
        let u = self.seed.uniform(&set);
        self.cache.borrow_mut().insert(key, u);
        u
    }

    pub fn singleton(&self, i: usize) -> Uniform {
        self.get(&[i])
    }

    pub fn empty_set(&self) -> Uniform {
        self.get(&[])
    }

    pub fn take_reads(&self) -> Vec<Vec<usize>> {
        self.reads
            .as_ref()
            .map(|r| std::mem::take(&mut *r.borrow_mut()))
            .unwrap_or_default()
    }
}

/// An AHK system: for every tuple of distinct elements, the truth of each
/// atomic formula is a function of the `ξ` values on subsets of the tuple.
pub trait AhkSampler: Send + Sync {
    fn signature(&self) -> &Signature;

    /// Truth of `symbol` on the positions `pattern` (which may repeat) of the
    /// distinct tuple underlying `xi`.
    fn holds(&self, symbol: usize, pattern: &[usize], xi: &XiFamily) -> bool;

    fn describe(&self) -> String;
}

/// `f_n(ξ)`: the fingerprint of the positions `0..xi.len()` over the whole
/// signature.
pub fn type_function(sampler: &dyn AhkSampler, xi: &XiFamily) -> TypeFingerprint {
    let sig = sampler.signature();
    let sub = sig.all_indices();
    let arities = sub.iter().map(|&s| sig.arity(s)).collect();
    TypeFingerprint::build(
        xi.len(),
        sub.clone(),
        arities,
        |pos, pattern| sampler.holds(sub[pos], pattern, xi),
        |i, j| i == j,
    )
}

/// Fingerprint of the positions `tuple` (distinct) of a larger family.
pub fn type_at(sampler: &dyn AhkSampler, xi: &XiFamily, tuple: &[usize]) -> TypeFingerprint {
    let sig = sampler.signature();
    let sub = sig.all_indices();
    let arities = sub.iter().map(|&s| sig.arity(s)).collect();
    let mut mapped = Vec::new();
    TypeFingerprint::build(
        tuple.len(),
        sub.clone(),
        arities,
        |pos, pattern| {
            mapped.clear();
            mapped.extend(pattern.iter().map(|&p| tuple[p]));
            sampler.holds(sub[pos], &mapped, xi)
        },
        |i, j| tuple[i] == tuple[j],
    )
}

/// The substructure induced on distinct `labels`; element `i` of the result
/// carries label `labels[i]`.
pub fn sample_on(
    sampler: &dyn AhkSampler,
    seed: SeedKey,
    labels: &[usize],
) -> Result<FiniteStructure, AhkError> {
    let mut sorted = labels.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(AhkError::RepeatedLabel(w[0]));
    }
    let xi = XiFamily::new(seed, labels.to_vec());
    let sig = sampler.signature().clone();
    let mut m = FiniteStructure::new(sig.clone(), labels.len());
    for s in 0..sig.len() {
        for pattern in argument_patterns(labels.len(), sig.arity(s)) {
            if sampler.holds(s, &pattern, &xi) {
                m.add_fact(s, pattern)?;
            }
        }
    }
    Ok(m)
}

/// The structure induced on `{0..n-1}`.
pub fn sample(sampler: &dyn AhkSampler, n: usize, seed: SeedKey) -> FiniteStructure {
    let labels: Vec<usize> = (0..n).collect();
    sample_on(sampler, seed, &labels).expect("labels 0..n are distinct")
}
