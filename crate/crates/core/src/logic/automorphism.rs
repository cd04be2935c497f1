use super::{FiniteStructure, LogicError, Permutation};

pub const DEFAULT_AUTOMORPHISM_BOUND: usize = 10;
pub const BRUTE_FORCE_BOUND: usize = 6;

/// All automorphisms of `m`, found by backtracking. Fails when the domain
/// exceeds [`DEFAULT_AUTOMORPHISM_BOUND`].
pub fn automorphisms(m: &FiniteStructure) -> Result<Vec<Permutation>, LogicError> {
    automorphisms_bounded(m, DEFAULT_AUTOMORPHISM_BOUND)
}

pub fn automorphisms_bounded(
    m: &FiniteStructure,
    bound: usize,
) -> Result<Vec<Permutation>, LogicError> {
    search(m, bound, &[], |_| true)
}

/// Automorphisms satisfying `accept`, with `fixed` elements pinned.
fn search(
    m: &FiniteStructure,
    bound: usize,
    fixed: &[usize],
    accept: impl Fn(&[usize]) -> bool,
) -> Result<Vec<Permutation>, LogicError> {
    let n = m.domain_size();
    if n > bound {
        return Err(LogicError::BoundExceeded { size: n, bound });
    }
    // facts grouped by their largest argument: once that element has an
    // image, the fact's image can be checked
    let mut by_max: Vec<Vec<(usize, &[usize])>> = vec![Vec::new(); n];
    for (s, args) in m.facts() {
        if let Some(&top) = args.iter().max() {
            by_max[top].push((s, args));
        }
    }
    let mut pinned = vec![false; n];
    for &a in fixed {
        pinned[a] = true;
    }
    let mut image = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let mut out = Vec::new();
    let mut scratch = Vec::new();
    extend(
        m,
        &by_max,
        &pinned,
        0,
        &mut image,
        &mut used,
        &mut scratch,
        &accept,
        &mut out,
    );
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    m: &FiniteStructure,
    by_max: &[Vec<(usize, &[usize])>],
    pinned: &[bool],
    i: usize,
    image: &mut Vec<usize>,
    used: &mut Vec<bool>,
    scratch: &mut Vec<usize>,
    accept: &impl Fn(&[usize]) -> bool,
    out: &mut Vec<Permutation>,
) {
    let n = image.len();
    if i == n {
        // injective fact map on a finite set of equal size is onto
        if accept(image) {
            out.push(Permutation::new(image.clone()).expect("search builds bijections"));
        }
        return;
    }
    let candidates: Vec<usize> = if pinned[i] { vec![i] } else { (0..n).collect() };
    for v in candidates {
        if used[v] {
            continue;
        }
        image[i] = v;
        let consistent = by_max[i].iter().all(|&(s, args)| {
            scratch.clear();
            scratch.extend(args.iter().map(|&a| image[a]));
            m.holds(s, scratch)
        });
        if consistent {
            used[v] = true;
            extend(m, by_max, pinned, i + 1, image, used, scratch, accept, out);
            used[v] = false;
        }
        image[i] = usize::MAX;
    }
}

/// Reference enumeration over all `n!` permutations, for cross-validation.
pub fn automorphisms_brute_force(m: &FiniteStructure) -> Result<Vec<Permutation>, LogicError> {
    let n = m.domain_size();
    if n > BRUTE_FORCE_BOUND {
        return Err(LogicError::BoundExceeded {
            size: n,
            bound: BRUTE_FORCE_BOUND,
        });
    }
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        let sigma = Permutation::new(perm.clone()).expect("valid");
        let preserves = m.facts().all(|(s, args)| {
            let mapped: Vec<usize> = args.iter().map(|&a| sigma.apply(a)).collect();
            m.holds(s, &mapped)
        });
        if preserves {
            out.push(sigma);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(out)
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Whether some automorphism fixes `fixed` pointwise and moves `b`
/// (group-theoretic dcl of `fixed` does not contain `b`).
pub fn group_dcl_trivial(
    m: &FiniteStructure,
    fixed: &[usize],
    b: usize,
) -> Result<bool, LogicError> {
    group_dcl_trivial_bounded(m, fixed, b, DEFAULT_AUTOMORPHISM_BOUND)
}

pub fn group_dcl_trivial_bounded(
    m: &FiniteStructure,
    fixed: &[usize],
    b: usize,
    bound: usize,
) -> Result<bool, LogicError> {
    let n = m.domain_size();
    if let Some(&bad) = fixed.iter().chain(std::iter::once(&b)).find(|&&a| a >= n) {
        return Err(LogicError::ElementOutOfDomain {
            element: bad,
            domain: n,
        });
    }
    if fixed.contains(&b) {
        return Err(LogicError::InvalidArgument(format!(
            "element {b} lies in the fixed set"
        )));
    }
    let moving = search(m, bound, fixed, |image| image[b] != b)?;
    Ok(!moving.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::Signature;

    fn path3() -> FiniteStructure {
        let mut m = FiniteStructure::new(Signature::indexed("E", 2, 1), 3);
        for (a, b) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            m.add_fact(0, vec![a, b]).unwrap();
        }
        m
    }

    #[test]
    fn next_permutation_counts_factorial() {
        let mut p = vec![0, 1, 2, 3];
        let mut count = 1;
        while next_permutation(&mut p) {
            count += 1;
        }
        assert_eq!(count, 24);
    }

    #[test]
    fn bound_exceeded() {
        let m = FiniteStructure::new(Signature::empty(), 11);
        assert_eq!(
            automorphisms(&m).unwrap_err(),
            LogicError::BoundExceeded {
                size: 11,
                bound: 10
            }
        );
        assert!(automorphisms_brute_force(&FiniteStructure::new(Signature::empty(), 7)).is_err());
    }

    #[test]
    fn dcl_rejects_b_in_fixed_set() {
        assert!(group_dcl_trivial(&path3(), &[1], 1).is_err());
    }
}
