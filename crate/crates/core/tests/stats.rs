use std::collections::BTreeMap;

use ergodic::ahk::{sample, SeedKey, StatReport};
use ergodic::gallery::{Blowup, Constant, Kaleidoscope, MaxGraph};
use ergodic::logic::{argument_patterns, FiniteStructure, QfFormula, Signature, Symbol};
use ergodic::stats::{collision_stat, find_roots, injective_tuples, rootedness_check};
use itertools::Itertools;
use proptest::prelude::*;

const SEED: SeedKey = SeedKey(0x57a7_5000_0000_0000_0000_0000_0000_0003);

fn sig() -> Signature {
    Signature::new(vec![Symbol::new("R", 2), Symbol::new("P", 1)]).unwrap()
}

/// Atomic diagram of `t` over the whole signature, read directly from the
/// facts.
fn diagram(m: &FiniteStructure, t: &[usize]) -> Vec<bool> {
    let mut out = Vec::new();
    for s in 0..m.signature().len() {
        for p in argument_patterns(t.len(), m.signature().arity(s)) {
            let args: Vec<usize> = p.iter().map(|&i| t[i]).collect();
            out.push(m.holds(s, &args));
        }
    }
    out
}

/// Groups the injective tuples of `m` by diagram.
fn naive_groups(m: &FiniteStructure, k: usize) -> BTreeMap<Vec<bool>, Vec<Vec<usize>>> {
    let mut groups: BTreeMap<Vec<bool>, Vec<Vec<usize>>> = BTreeMap::new();
    for t in (0..m.domain_size()).permutations(k) {
        groups.entry(diagram(m, &t)).or_default().push(t);
    }
    groups
}

fn structure(n: usize, edges: &[(usize, usize)]) -> FiniteStructure {
    let mut m = FiniteStructure::new(sig(), n);
    for &(a, b) in edges {
        m.add_fact(0, vec![a, b]).unwrap();
    }
    m
}

fn fingerprint_of(m: &FiniteStructure, t: &[usize]) -> ergodic::logic::TypeFingerprint {
    ergodic::logic::qf_fingerprint(m, t, &[0, 1]).unwrap()
}

#[test]
fn unique_realization_is_rooted() {
    let m = structure(4, &[(0, 1)]);
    let report = find_roots(&m, &fingerprint_of(&m, &[0, 1])).unwrap();
    assert_eq!(report.tuples, vec![vec![0, 1]]);
    assert_eq!(report.common, vec![0, 1]);
    assert!(report.rooted && !report.unrealized);
}

#[test]
fn disjoint_realizations_are_not_rooted() {
    let m = structure(4, &[(0, 1), (2, 3)]);
    let report = find_roots(&m, &fingerprint_of(&m, &[0, 1])).unwrap();
    assert_eq!(report.tuples, vec![vec![0, 1], vec![2, 3]]);
    assert!(report.common.is_empty() && !report.rooted);
}

#[test]
fn unrealized_fingerprint_is_vacuously_rooted() {
    let m = structure(4, &[(0, 1)]);
    let other = structure(2, &[(0, 1), (1, 0)]);
    let report = find_roots(&m, &fingerprint_of(&other, &[0, 1])).unwrap();
    assert!(report.unrealized && report.rooted && report.tuples.is_empty());
    assert!(find_roots(&structure(1, &[]), &fingerprint_of(&m, &[0, 1])).is_err());
}

#[test]
fn empty_structure_passes_rootedness() {
    let chi = QfFormula::not(QfFormula::eq(0, 1));
    let report = rootedness_check(&structure(0, &[]), &chi, &[0, 1]).unwrap();
    assert!(report.passed && report.types.is_empty());
}

#[test]
fn maxgraph_samples_are_rooted() {
    let chi = QfFormula::not(QfFormula::eq(0, 1));
    let g = MaxGraph::new(16);
    let sub: Vec<usize> = (0..16).collect();
    for t in 0..10 {
        let m = sample(&g, 30, SEED.derive(t));
        assert!(rootedness_check(&m, &chi, &sub).unwrap().passed);
    }
}

#[test]
fn shallow_kaleidoscope_is_not_rooted() {
    let chi = QfFormula::not(QfFormula::eq(0, 1));
    let k = Kaleidoscope::new(2, 2);
    let m = sample(&k, 30, SEED);
    let report = rootedness_check(&m, &chi, &[0, 1]).unwrap();
    assert!(!report.passed);
    // 870 ordered pairs over 4 symmetric pair types: every type is realized
    // many times, and scattered pairs share no vertex
    assert!(report.failures().count() >= 3);
    assert_eq!(report.tuples_checked, 870);
}

#[test]
fn constant_sampler_always_collides() {
    let r = collision_stat(&Constant::default(), 2, 500, SEED).unwrap();
    assert_eq!(r.estimate, 1.0);
    assert_eq!(r.stderr, 0.0);
    assert!(collision_stat(&Constant::default(), 2, 0, SEED).is_err());
}

#[test]
fn kaleidoscope_collision_decays_by_quarters() {
    let reports: Vec<StatReport> = [2, 4, 6, 8]
        .iter()
        .map(|&d| collision_stat(&Kaleidoscope::new(2, d), 2, 100_000, SEED).unwrap())
        .collect();
    for (r, d) in reports.iter().zip([2, 4, 6, 8]) {
        assert!(r.within(0.5f64.powi(d), 3.0), "d={d}: {r:?}");
    }
    for w in reports.windows(2) {
        let ratio = w[1].estimate / w[0].estimate;
        let rel =
            ((w[0].stderr / w[0].estimate).powi(2) + (w[1].stderr / w[1].estimate).powi(2)).sqrt();
        assert!((ratio - 0.25).abs() <= 3.0 * ratio * rel, "ratio {ratio}");
    }
}

#[test]
fn blowup_collision_is_depth_stable() {
    for d in [2, 4, 6, 8] {
        let probs = Blowup::new(d).class_probabilities();
        let exact: f64 = probs.iter().map(|p| p * p).sum();
        let r = collision_stat(&Blowup::new(d), 1, 50_000, SEED).unwrap();
        assert!(r.within(exact, 3.0), "d={d}: {r:?} vs {exact}");
        assert!((exact - 1.0 / 3.0).abs() < 0.05);
    }
}

#[test]
fn injective_tuple_counts() {
    assert_eq!(injective_tuples(5, 2).len(), 20);
    assert_eq!(injective_tuples(3, 0), vec![Vec::<usize>::new()]);
    assert!(injective_tuples(2, 3).is_empty());
    assert_eq!(
        injective_tuples(4, 3),
        (0..4).permutations(3).collect::<Vec<_>>()
    );
}

prop_compose! {
    fn random_structure(max_n: usize)(n in 1..=max_n)
        (n in Just(n), r in proptest::collection::vec(prop::bool::weighted(0.3), n * n), p in proptest::collection::vec(any::<bool>(), n))
        -> FiniteStructure
    {
        let mut m = FiniteStructure::new(sig(), n);
        for (i, &b) in r.iter().enumerate() {
            if b {
                m.add_fact(0, vec![i / n, i % n]).unwrap();
            }
        }
        for (i, &b) in p.iter().enumerate() {
            if b {
                m.add_fact(1, vec![i]).unwrap();
            }
        }
        m
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn find_roots_agrees_with_naive_scan(m in random_structure(12), k in 1usize..3) {
        prop_assume!(k <= m.domain_size());
        for (_, tuples) in naive_groups(&m, k) {
            let report = find_roots(&m, &fingerprint_of(&m, &tuples[0])).unwrap();
            prop_assert_eq!(&report.tuples, &tuples);
            let common: Vec<usize> = (0..m.domain_size()).filter(|a| tuples.iter().all(|t| t.contains(a))).collect();
            prop_assert_eq!(&report.common, &common);
            prop_assert_eq!(report.rooted, !common.is_empty());
        }
    }

    #[test]
    fn rootedness_agrees_with_naive_scan(m in random_structure(8)) {
        let chi = QfFormula::not(QfFormula::eq(0, 1));
        let report = rootedness_check(&m, &chi, &[0, 1]).unwrap();
        let groups = naive_groups(&m, 2);
        prop_assert_eq!(report.types.len(), groups.len());
        let naive_pass = groups.values().all(|ts| (0..m.domain_size()).any(|a| ts.iter().all(|t| t.contains(&a))));
        prop_assert_eq!(report.passed, naive_pass);
    }
}
