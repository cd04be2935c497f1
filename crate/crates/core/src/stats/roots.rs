use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::logic::{
    eval_qf, qf_fingerprint, FiniteStructure, LogicError, QfFormula, TypeFingerprint,
};

/// Realizations of one fingerprint and their common elements.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootReport {
    pub fingerprint: TypeFingerprint,
    pub tuples: Vec<Vec<usize>>,
    pub common: Vec<usize>,
    pub rooted: bool,
    /// No tuple realizes the fingerprint; `rooted` is then vacuously true.
    pub unrealized: bool,
}

impl RootReport {
    fn from_tuples(fingerprint: TypeFingerprint, tuples: Vec<Vec<usize>>) -> Self {
        if tuples.is_empty() {
            return RootReport {
                fingerprint,
                tuples,
                common: Vec::new(),
                rooted: true,
                unrealized: true,
            };
        }
        let mut common: BTreeSet<usize> = tuples[0].iter().copied().collect();
        for t in &tuples[1..] {
            common.retain(|a| t.contains(a));
        }
        let common: Vec<usize> = common.into_iter().collect();
        RootReport {
            fingerprint,
            rooted: !common.is_empty(),
            tuples,
            common,
            unrealized: false,
        }
    }

    /// Number of distinct underlying sets among the realizing tuples.
    pub fn supports(&self) -> usize {
        self.tuples
            .iter()
            .map(|t| t.iter().copied().collect::<BTreeSet<usize>>())
            .collect::<BTreeSet<_>>()
            .len()
    }
}

/// All tuples of `k` distinct elements of `{0..n-1}`, lexicographic.
pub fn injective_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    let mut used = vec![false; n];
    fn go(n: usize, k: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for a in 0..n {
            if !used[a] {
                used[a] = true;
                cur.push(a);
                go(n, k, cur, used, out);
                cur.pop();
                used[a] = false;
            }
        }
    }
    go(n, k, &mut cur, &mut used, &mut out);
    out
}

/// The non-redundant tuples of `m` realizing `fp`, and their common elements.
pub fn find_roots(m: &FiniteStructure, fp: &TypeFingerprint) -> Result<RootReport, LogicError> {
    if fp.arity() > m.domain_size() {
        return Err(LogicError::BoundExceeded {
            size: fp.arity(),
            bound: m.domain_size(),
        });
    }
    let mut tuples = Vec::new();
    for t in injective_tuples(m.domain_size(), fp.arity()) {
        if qf_fingerprint(m, &t, fp.sublanguage())? == *fp {
            tuples.push(t);
        }
    }
    Ok(RootReport::from_tuples(fp.clone(), tuples))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootednessReport {
    pub passed: bool,
    pub tuples_checked: usize,
    pub types: Vec<RootReport>,
}

impl RootednessReport {
    pub fn failures(&self) -> impl Iterator<Item = &RootReport> {
        self.types.iter().filter(|r| !r.rooted)
    }
}

/// Every realized non-redundant fingerprint over `sub` whose tuples satisfy
/// `chi` must have a root.
pub fn rootedness_check(
    m: &FiniteStructure,
    chi: &QfFormula,
    sub: &[usize],
) -> Result<RootednessReport, LogicError> {
    chi.validate(m.signature())?;
    let k = chi.num_vars();
    let mut groups: BTreeMap<TypeFingerprint, Vec<Vec<usize>>> = BTreeMap::new();
    let mut checked = 0;
    if k <= m.domain_size() {
        for t in injective_tuples(m.domain_size(), k) {
            if eval_qf(m, chi, &t)? {
                checked += 1;
                groups
                    .entry(qf_fingerprint(m, &t, sub)?)
                    .or_default()
                    .push(t);
            }
        }
    }
    let types: Vec<RootReport> = groups
        .into_iter()
        .map(|(fp, ts)| RootReport::from_tuples(fp, ts))
        .collect();
    Ok(RootednessReport {
        passed: types.iter().all(|r| r.rooted),
        tuples_checked: checked,
        types,
    })
}
