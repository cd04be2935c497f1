use ergodic::logic::{
    apply_permutation, argument_patterns, automorphisms, automorphisms_bounded,
    automorphisms_brute_force, eval_qf, group_dcl_trivial,
    jsonl::{from_jsonl, to_jsonl},
    qf_fingerprint, FiniteStructure, LogicError, Permutation, QfFormula, Signature, Symbol,
};
use itertools::Itertools;
use proptest::prelude::*;

fn sig() -> Signature {
    Signature::new(vec![Symbol::new("R", 2), Symbol::new("P", 1)]).unwrap()
}

fn graph(n: usize, edges: &[(usize, usize)], symmetric: bool) -> FiniteStructure {
    let mut m = FiniteStructure::new(Signature::indexed("E", 2, 1), n);
    for &(a, b) in edges {
        m.add_fact(0, vec![a, b]).unwrap();
        if symmetric {
            m.add_fact(0, vec![b, a]).unwrap();
        }
    }
    m
}

/// Every permutation of `0..n` preserving all facts, by plain enumeration.
fn naive_automorphisms(m: &FiniteStructure) -> Vec<Vec<usize>> {
    let n = m.domain_size();
    (0..n)
        .permutations(n)
        .filter(|p| {
            (0..m.signature().len()).all(|s| {
                argument_patterns(n, m.signature().arity(s))
                    .into_iter()
                    .all(|t| {
                        let image: Vec<usize> = t.iter().map(|&a| p[a]).collect();
                        m.holds(s, &t) == m.holds(s, &image)
                    })
            })
        })
        .collect()
}

fn sorted_mappings(perms: &[Permutation]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = perms.iter().map(|p| p.mapping().to_vec()).collect();
    out.sort();
    out
}

#[test]
fn swap_moves_the_edge() {
    let m = graph(2, &[(0, 1)], false);
    let swapped = apply_permutation(&m, &Permutation::transposition(2, 0, 1)).unwrap();
    assert!(swapped.holds(0, &[1, 0]));
    assert!(!swapped.holds(0, &[0, 1]));
    assert_eq!(apply_permutation(&m, &Permutation::identity(2)).unwrap(), m);
}

#[test]
fn permutation_size_mismatch() {
    let m = graph(3, &[], false);
    assert!(apply_permutation(&m, &Permutation::identity(2)).is_err());
}

#[test]
fn closed_world_evaluation() {
    let m = graph(2, &[(0, 1)], false);
    let r = QfFormula::rel(0, vec![0, 1]);
    assert!(eval_qf(&m, &r, &[0, 1]).unwrap());
    assert!(!eval_qf(&m, &r, &[1, 0]).unwrap());
    let f = QfFormula::and(vec![
        QfFormula::eq(0, 0),
        QfFormula::not(QfFormula::eq(0, 1)),
    ]);
    assert!(eval_qf(&m, &f, &[0, 1]).unwrap());
    assert!(matches!(
        eval_qf(&m, &r, &[0]),
        Err(LogicError::UnboundVariable { .. })
    ));
    assert!(eval_qf(&m, &QfFormula::rel(0, vec![0]), &[0, 1]).is_err());
}

#[test]
fn parsed_formula_matches_builder() {
    let s = sig();
    let f = QfFormula::parse("(and (rel R x0 x1) (not (= x0 x1)))", &s).unwrap();
    assert_eq!(
        f,
        QfFormula::and(vec![
            QfFormula::rel(0, vec![0, 1]),
            QfFormula::not(QfFormula::eq(0, 1))
        ])
    );
    assert!(QfFormula::parse("(rel Q x0)", &s).is_err());
    assert!(QfFormula::parse("(rel P x0 x1)", &s).is_err());
}

#[test]
fn repeated_element_sets_equality_bit() {
    let m = graph(3, &[(0, 1)], false);
    let fp = qf_fingerprint(&m, &[2, 2], &[0]).unwrap();
    assert!(fp.equal(0, 1));
    assert!(fp.is_redundant());
    assert_eq!(fp, qf_fingerprint(&m, &[2, 2], &[0]).unwrap());
    assert!(!qf_fingerprint(&m, &[0, 1], &[0]).unwrap().is_redundant());
}

#[test]
fn empty_structure_has_full_symmetric_group() {
    let m = FiniteStructure::new(sig(), 3);
    assert_eq!(automorphisms(&m).unwrap().len(), 6);
    assert!(group_dcl_trivial(&m, &[], 0).unwrap());
}

#[test]
fn path_graph_automorphisms() {
    let m = graph(3, &[(0, 1), (1, 2)], true);
    let auts = automorphisms(&m).unwrap();
    assert_eq!(sorted_mappings(&auts), naive_automorphisms(&m));
    assert_eq!(sorted_mappings(&auts), vec![vec![0, 1, 2], vec![2, 1, 0]]);
    assert!(!group_dcl_trivial(&m, &[], 1).unwrap());
    assert!(!group_dcl_trivial(&m, &[0], 2).unwrap());
    assert!(group_dcl_trivial(&m, &[], 0).unwrap());
}

#[test]
fn directed_cycle_has_rotations() {
    let m = graph(3, &[(0, 1), (1, 2), (2, 0)], false);
    let auts = automorphisms(&m).unwrap();
    let expected = naive_automorphisms(&m);
    assert_eq!(expected.len(), 3);
    assert_eq!(sorted_mappings(&auts), expected);
}

#[test]
fn automorphism_bound_enforced() {
    let m = FiniteStructure::new(sig(), 11);
    assert!(matches!(
        automorphisms(&m),
        Err(LogicError::BoundExceeded { .. })
    ));
    assert!(automorphisms_bounded(&FiniteStructure::new(sig(), 4), 3).is_err());
    assert!(automorphisms_brute_force(&FiniteStructure::new(sig(), 7)).is_err());
}

#[test]
fn jsonl_layout() {
    let mut m = FiniteStructure::new(sig(), 3);
    m.add_named("R", vec![2, 0]).unwrap();
    m.add_named("R", vec![0, 1]).unwrap();
    m.add_named("P", vec![1]).unwrap();
    let text = to_jsonl(&m);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    let header: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(header["domain_size"], 3);
    assert_eq!(header["signature"][0]["name"], "R");
    assert_eq!(header["signature"][0]["arity"], 2);
    let first: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
    assert_eq!(first, serde_json::json!({"rel": "R", "args": [0, 1]}));
    assert_eq!(from_jsonl(&text).unwrap(), m);
}

prop_compose! {
    fn structure(max_n: usize)(n in 0..=max_n)
        (n in Just(n), r in proptest::collection::vec(any::<bool>(), n * n), p in proptest::collection::vec(any::<bool>(), n))
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

fn permutation(n: usize) -> impl Strategy<Value = Permutation> {
    Just((0..n).collect::<Vec<usize>>())
        .prop_shuffle()
        .prop_map(|v| Permutation::new(v).unwrap())
}

fn with_perms(max_n: usize) -> impl Strategy<Value = (FiniteStructure, Permutation, Permutation)> {
    structure(max_n).prop_flat_map(|m| {
        let n = m.domain_size();
        (Just(m), permutation(n), permutation(n))
    })
}

fn qf_formula(vars: usize) -> impl Strategy<Value = QfFormula> {
    let leaf = prop_oneof![
        (0..vars, 0..vars).prop_map(|(a, b)| QfFormula::rel(0, vec![a, b])),
        (0..vars).prop_map(|a| QfFormula::rel(1, vec![a])),
        (0..vars, 0..vars).prop_map(|(a, b)| QfFormula::eq(a, b)),
    ];
    leaf.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(QfFormula::not),
            proptest::collection::vec(inner.clone(), 0..3).prop_map(QfFormula::and),
            proptest::collection::vec(inner, 0..3).prop_map(QfFormula::or),
        ]
    })
}

proptest! {
    #[test]
    fn permutation_is_a_group_action((m, s, t) in with_perms(6)) {
        let n = m.domain_size();
        prop_assert_eq!(apply_permutation(&m, &Permutation::identity(n)).unwrap(), m.clone());
        let composed = apply_permutation(&m, &s.compose(&t)).unwrap();
        let stepwise = apply_permutation(&apply_permutation(&m, &t).unwrap(), &s).unwrap();
        prop_assert_eq!(composed, stepwise);
        // σ(M) ⊨ R(a) iff M ⊨ R(σ⁻¹ a)
        let moved = apply_permutation(&m, &s).unwrap();
        let inv = s.inverse();
        for a in 0..n {
            for b in 0..n {
                prop_assert_eq!(moved.holds(0, &[a, b]), m.holds(0, &[inv.apply(a), inv.apply(b)]));
            }
        }
    }

    #[test]
    fn satisfaction_is_invariant((m, s, _t) in with_perms(5), phi in qf_formula(3), pick in proptest::collection::vec(0usize..100, 3)) {
        let n = m.domain_size();
        prop_assume!(n > 0);
        let tuple: Vec<usize> = pick.iter().map(|x| x % n).collect();
        let moved = apply_permutation(&m, &s).unwrap();
        let image: Vec<usize> = tuple.iter().map(|&a| s.apply(a)).collect();
        prop_assert_eq!(eval_qf(&moved, &phi, &image).unwrap(), eval_qf(&m, &phi, &tuple).unwrap());
    }

    #[test]
    fn automorphisms_agree_with_enumeration(m in structure(6)) {
        let auts = automorphisms(&m).unwrap();
        prop_assert_eq!(sorted_mappings(&auts), naive_automorphisms(&m));
        prop_assert_eq!(sorted_mappings(&auts), sorted_mappings(&automorphisms_brute_force(&m).unwrap()));
        for a in &auts {
            prop_assert!(auts.contains(&a.inverse()));
            for b in &auts {
                prop_assert!(auts.contains(&a.compose(b)));
            }
        }
    }

    #[test]
    fn automorphic_tuples_share_fingerprints(m in structure(5), pick in proptest::collection::vec(0usize..100, 2)) {
        let n = m.domain_size();
        prop_assume!(n > 0);
        let tuple: Vec<usize> = pick.iter().map(|x| x % n).collect();
        let fp = qf_fingerprint(&m, &tuple, &[0, 1]).unwrap();
        for a in automorphisms(&m).unwrap() {
            let image: Vec<usize> = tuple.iter().map(|&x| a.apply(x)).collect();
            prop_assert_eq!(&qf_fingerprint(&m, &image, &[0, 1]).unwrap(), &fp);
        }
    }

    #[test]
    fn fingerprint_equality_is_diagram_equality(m in structure(5), x in proptest::collection::vec(0usize..100, 2), y in proptest::collection::vec(0usize..100, 2)) {
        let n = m.domain_size();
        prop_assume!(n > 0);
        let a: Vec<usize> = x.iter().map(|v| v % n).collect();
        let b: Vec<usize> = y.iter().map(|v| v % n).collect();
        let mut atoms = vec![QfFormula::eq(0, 1)];
        for p in argument_patterns(2, 2) {
            atoms.push(QfFormula::rel(0, p));
        }
        for p in argument_patterns(2, 1) {
            atoms.push(QfFormula::rel(1, p));
        }
        let same = atoms.iter().all(|f| eval_qf(&m, f, &a).unwrap() == eval_qf(&m, f, &b).unwrap());
        let fa = qf_fingerprint(&m, &a, &[0, 1]).unwrap();
        let fb = qf_fingerprint(&m, &b, &[0, 1]).unwrap();
        prop_assert_eq!(fa == fb, same);
    }

    #[test]
    fn jsonl_round_trip(m in structure(6)) {
        let text = to_jsonl(&m);
        prop_assert_eq!(from_jsonl(&text).unwrap(), m.clone());
        prop_assert_eq!(to_jsonl(&from_jsonl(&text).unwrap()), text);
    }
}
