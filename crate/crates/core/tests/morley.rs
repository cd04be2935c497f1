use std::collections::{BTreeSet, HashMap};

use ergodic::ahk::{sample, AhkSampler, SeedKey};
use ergodic::gallery::Kaleidoscope;
use ergodic::logic::{argument_patterns, FiniteStructure, QfFormula, Signature, Symbol};
use ergodic::morley::{
    canonical_expand, check_pi2minus, infer_signature, morleyize, morleyize_bounded, realizations,
    satisfies, universal_violations, verify_reduct_roundtrip, FragmentFormula, MorleyError,
    Morleyization, Pi2MinusTheory, PrenexSentence, QPattern,
};
use proptest::prelude::*;

fn base() -> Signature {
    Signature::new(vec![
        Symbol::new("R", 2),
        Symbol::new("P0", 1),
        Symbol::new("P1", 1),
        Symbol::new("P2", 1),
    ])
    .unwrap()
}

fn parse(text: &str) -> Vec<FragmentFormula> {
    FragmentFormula::parse_theory(text).unwrap()
}

/// Tarskian truth of `f` in `m` under `env`, with quantifiers over the
/// finite domain and schemes over their materialized instances.
fn truth(m: &FiniteStructure, f: &FragmentFormula, env: &mut HashMap<String, usize>) -> bool {
    match f {
        FragmentFormula::Atom { rel, args } => {
            let s = m.signature().index_of(&rel.ground_name().unwrap()).unwrap();
            let tuple: Vec<usize> = args.iter().map(|a| env[a]).collect();
            m.holds(s, &tuple)
        }
        FragmentFormula::Eq(a, b) => env[a] == env[b],
        FragmentFormula::Not(g) => !truth(m, g, env),
        FragmentFormula::And(gs) => gs.iter().all(|g| truth(m, g, env)),
        FragmentFormula::Or(gs) => gs.iter().any(|g| truth(m, g, env)),
        FragmentFormula::Forall(v, g) | FragmentFormula::Exists(v, g) => {
            let saved = env.get(v).copied();
            let mut results = Vec::new();
            for a in 0..m.domain_size() {
                env.insert(v.clone(), a);
                results.push(truth(m, g, env));
            }
            match saved {
                Some(a) => env.insert(v.clone(), a),
                None => env.remove(v),
            };
            if matches!(f, FragmentFormula::Forall(..)) {
                results.iter().all(|&b| b)
            } else {
                results.iter().any(|&b| b)
            }
        }
        FragmentFormula::SchemeAnd { index, depth, body } => {
            (0..*depth).all(|i| truth(m, &body.instantiate(index, i), env))
        }
        FragmentFormula::SchemeOr { index, depth, body } => {
            (0..*depth).any(|i| truth(m, &body.instantiate(index, i), env))
        }
    }
}

/// Every `R_φ` of the expansion agrees with the direct evaluation of `φ`.
fn expansion_matches_oracle(m: &FiniteStructure, mz: &Morleyization) -> bool {
    let expanded = canonical_expand(m, mz).unwrap();
    mz.nodes().iter().all(|node| {
        argument_patterns(m.domain_size(), node.free_vars.len())
            .into_iter()
            .all(|t| {
                let mut env: HashMap<String, usize> = node
                    .free_vars
                    .iter()
                    .cloned()
                    .zip(t.iter().copied())
                    .collect();
                expanded.holds(node.symbol, &t) == truth(m, &node.formula, &mut env)
            })
    })
}

/// Distinct subformulas of the input, schemes counted with their
/// materialized instances, and the number of defining axioms they carry.
fn closure_walk(f: &FragmentFormula, seen: &mut BTreeSet<FragmentFormula>) -> usize {
    if !seen.insert(f.clone()) {
        return 0;
    }
    match f {
        FragmentFormula::Atom { .. } | FragmentFormula::Eq(..) => 1,
        FragmentFormula::Not(g) | FragmentFormula::Forall(_, g) | FragmentFormula::Exists(_, g) => {
            1 + closure_walk(g, seen)
        }
        FragmentFormula::And(gs) | FragmentFormula::Or(gs) => {
            1 + gs.iter().map(|g| closure_walk(g, seen)).sum::<usize>()
        }
        FragmentFormula::SchemeAnd { index, depth, body }
        | FragmentFormula::SchemeOr { index, depth, body } => {
            *depth
                + (0..*depth)
                    .map(|i| closure_walk(&body.instantiate(index, i), seen))
                    .sum::<usize>()
        }
    }
}

fn random_structure(sig: &Signature, n: usize, bits: &[bool]) -> FiniteStructure {
    let mut m = FiniteStructure::new(sig.clone(), n);
    let mut k = 0;
    for s in 0..sig.len() {
        for t in argument_patterns(n, sig.arity(s)) {
            if bits[k % bits.len()] {
                m.add_fact(s, t).unwrap();
            }
            k += 1;
        }
    }
    m
}

#[test]
fn extension_axiom_walk() {
    let sentences = parse("(forall x (exists y (rel R x y)))");
    let mz = morleyize(&base(), &sentences).unwrap();
    let mut seen = BTreeSet::new();
    let axioms = closure_walk(&sentences[0], &mut seen);
    assert_eq!(mz.nodes().len(), seen.len());
    assert_eq!(mz.theory().axiom_count(), axioms + 1);
    assert_eq!(mz.theory().axiom_count(), 4);
    let schemas: Vec<u8> = mz.theory().defining.iter().map(|a| a.schema).collect();
    assert_eq!(schemas, vec![1, 8, 7]);
    assert_eq!(mz.theory().pithy().count(), 2);
    assert_eq!(mz.theory().assertions.len(), 1);
    assert!(mz.theory().assertions[0].quantifiers.is_empty());
    assert_eq!(
        mz.language().arity(mz.node(mz.sentence_nodes()[0]).symbol),
        0
    );
    assert!(check_pi2minus(mz.theory()));
}

#[test]
fn atomic_sentence() {
    let mz = morleyize(
        &Signature::new(vec![Symbol::new("Q", 0)]).unwrap(),
        &parse("(rel Q)"),
    )
    .unwrap();
    assert_eq!(mz.theory().defining.len(), 1);
    assert_eq!(mz.theory().defining[0].schema, 1);
    assert_eq!(mz.theory().axiom_count(), 2);
}

#[test]
fn scheme_conjunction_emits_type_five_axioms_and_a_q_type() {
    let sentences = parse("(forall x (schemeAnd n 3 (rel (P n) x)))");
    let mz = morleyize(&base(), &sentences).unwrap();
    let fives = mz
        .theory()
        .defining
        .iter()
        .filter(|a| a.schema == 5)
        .count();
    assert_eq!(fives, 3);
    assert_eq!(mz.omitted().len(), 1);
    let q = &mz.omitted()[0];
    assert_eq!(q.pattern, QPattern::Conjunction);
    assert_eq!(q.instances.len(), 3);
    assert!(q.instances.iter().all(|l| l.positive));
    assert!(!q.head.positive);
    assert_eq!(
        q.instance_formula(3),
        FragmentFormula::parse("(rel (P 3) x)").unwrap()
    );
    let mut seen = BTreeSet::new();
    assert_eq!(
        mz.theory().axiom_count(),
        closure_walk(&sentences[0], &mut seen) + 1
    );
}

#[test]
fn scheme_disjunction_dual() {
    let mz = morleyize(&base(), &parse("(exists x (schemeOr n 2 (rel (P n) x)))")).unwrap();
    let q = &mz.omitted()[0];
    assert_eq!(q.pattern, QPattern::Disjunction);
    assert!(q.head.positive && q.instances.iter().all(|l| !l.positive));
    assert_eq!(
        mz.theory()
            .defining
            .iter()
            .filter(|a| a.schema == 6)
            .count(),
        2
    );
}

#[test]
fn extend_scheme_materializes_more_instances() {
    let gen = Signature::new(vec![])
        .unwrap()
        .with_generator(ergodic::logic::SymbolFamily {
            prefix: "P".into(),
            arity: 1,
        });
    let sentences = parse("(forall x (schemeAnd n 2 (rel (P n) x)))");
    let mut mz = morleyize(&gen, &sentences).unwrap();
    let scheme = mz.omitted()[0].node;
    mz.extend_scheme(scheme, 5).unwrap();
    assert_eq!(mz.omitted()[0].instances.len(), 5);
    assert_eq!(
        mz.theory()
            .defining
            .iter()
            .filter(|a| a.schema == 5)
            .count(),
        5
    );
    assert!(mz.language().index_of("P4").is_some());
    assert!(matches!(
        mz.extend_scheme(0, 3),
        Err(MorleyError::NotAScheme(_))
    ));
}

#[test]
fn expansion_of_atoms_and_negations() {
    let mz = morleyize(&base(), &parse("(forall x (forall y (not (rel R x y))))")).unwrap();
    let mut m = FiniteStructure::new(base(), 3);
    m.add_named("R", vec![0, 1]).unwrap();
    m.add_named("R", vec![2, 2]).unwrap();
    let expanded = canonical_expand(&m, &mz).unwrap();
    let atom = mz
        .node_of(&FragmentFormula::parse("(rel R x y)").unwrap())
        .unwrap();
    let neg = mz
        .node_of(&FragmentFormula::parse("(not (rel R x y))").unwrap())
        .unwrap();
    for t in argument_patterns(3, 2) {
        assert_eq!(expanded.holds(mz.node(atom).symbol, &t), m.holds(0, &t));
        assert_eq!(expanded.holds(mz.node(neg).symbol, &t), !m.holds(0, &t));
    }
    assert!(universal_violations(&expanded, &mz).is_empty());
}

#[test]
fn shape_audit() {
    let empty = Pi2MinusTheory {
        language: base(),
        defining: Vec::new(),
        assertions: Vec::new(),
    };
    assert!(check_pi2minus(&empty));
    let vars = vec!["x".to_string(), "y".to_string()];
    let mut bad = PrenexSentence::pithy(&vars[..1], "y", QfFormula::rel(0, vec![0, 1]));
    bad.quantifiers
        .push((ergodic::morley::Quantifier::Exists, "z".into()));
    let hand = Pi2MinusTheory {
        language: base(),
        defining: Vec::new(),
        assertions: vec![bad],
    };
    assert!(!check_pi2minus(&hand));
}

#[test]
fn errors() {
    assert!(matches!(
        morleyize(&base(), &parse("(rel R x y)")),
        Err(MorleyError::NotASentence(_))
    ));
    assert!(matches!(
        morleyize(&base(), &parse("(forall x (rel S x))")),
        Err(MorleyError::UnknownSymbol(_))
    ));
    assert!(matches!(
        morleyize(&base(), &parse("(forall x (rel R x))")),
        Err(MorleyError::ArityMismatch { .. })
    ));
    let deep = parse("(forall x (forall y (forall z (and (rel R x y) (rel R y z)))))");
    assert!(matches!(
        morleyize_bounded(&base(), &deep, 2),
        Err(MorleyError::FreeVariableBound { .. })
    ));
    assert!(FragmentFormula::parse("(schemeAnd n 0 (rel (P n) x))").is_err());
    assert!(FragmentFormula::parse("(frob x)").is_err());
}

#[test]
fn inferred_signature() {
    let sig = infer_signature(&parse(
        "(forall x (schemeAnd n 2 (rel (P n) x))) (exists y (rel R y y))",
    ))
    .unwrap();
    let names: Vec<&str> = sig.symbols().iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, vec!["P0", "P1", "R"]);
}

#[test]
fn json_lists_the_bijection() {
    let mz = morleyize(&base(), &parse("(forall x (schemeAnd n 3 (rel (P n) x)))")).unwrap();
    let v = mz.to_json();
    assert_eq!(v["table"].as_array().unwrap().len(), mz.nodes().len());
    assert_eq!(v["omitted"][0]["instances"].as_array().unwrap().len(), 3);
    assert_eq!(v["omitted"][0]["tail"]["next"], 3);
    assert_eq!(v["pithy_count"], 1);
}

#[test]
fn gallery_samples_round_trip() {
    let k = Kaleidoscope::new(2, 2);
    let theory = parse(
        "(forall x (forall y (implies (rel R0 x y) (rel R0 y x)))) \
         (exists x (forall y (or (= x y) (rel R1 x y))))",
    );
    let mz = morleyize(k.signature(), &theory).unwrap();
    for n in [0, 1, 5, 20] {
        let m = sample(&k, n, SeedKey(n as u128));
        assert!(verify_reduct_roundtrip(&m, &mz).unwrap());
    }
    let empty = FiniteStructure::new(base(), 0);
    let mz = morleyize(&base(), &parse("(forall x (exists y (rel R x y)))")).unwrap();
    assert!(verify_reduct_roundtrip(&empty, &mz).unwrap());
}

#[test]
fn canonical_expansions_omit_their_q_types() {
    let mz = morleyize(&base(), &parse("(forall x (schemeAnd n 3 (rel (P n) x))) (exists x (schemeOr n 2 (not (rel (P n) x))))"))
        .unwrap();
    for bits in 0u32..64 {
        let pattern: Vec<bool> = (0..6).map(|i| bits >> i & 1 == 1).collect();
        let m = random_structure(&base(), 2, &pattern);
        let expanded = canonical_expand(&m, &mz).unwrap();
        for q in mz.omitted() {
            assert!(realizations(&expanded, &mz, q).is_empty());
        }
    }
}

fn fragment(depth: u32) -> BoxedStrategy<FragmentFormula> {
    let var = prop_oneof![Just("x"), Just("y"), Just("z")];
    let leaf = prop_oneof![
        (var.clone(), var.clone()).prop_map(|(a, b)| FragmentFormula::atom("R", &[a, b])),
        (0usize..3, var.clone()).prop_map(|(i, a)| FragmentFormula::atom(&format!("P{i}"), &[a])),
        (var.clone(), var.clone()).prop_map(|(a, b)| FragmentFormula::Eq(a.into(), b.into())),
        (1usize..4, var.clone(), any::<bool>()).prop_map(|(d, a, conj)| {
            let body = Box::new(FragmentFormula::indexed_atom(
                "P",
                ergodic::morley::IndexTerm::Var("n".into()),
                &[a],
            ));
            if conj {
                FragmentFormula::SchemeAnd {
                    index: "n".into(),
                    depth: d,
                    body,
                }
            } else {
                FragmentFormula::SchemeOr {
                    index: "n".into(),
                    depth: d,
                    body,
                }
            }
        }),
    ];
    leaf.prop_recursive(depth, 24, 3, move |inner| {
        let var = prop_oneof![Just("x"), Just("y"), Just("z")];
        prop_oneof![
            inner.clone().prop_map(FragmentFormula::not),
            proptest::collection::vec(inner.clone(), 1..3).prop_map(FragmentFormula::And),
            proptest::collection::vec(inner.clone(), 1..3).prop_map(FragmentFormula::Or),
            (var.clone(), inner.clone()).prop_map(|(v, f)| FragmentFormula::forall(v, f)),
            (var, inner).prop_map(|(v, f)| FragmentFormula::exists(v, f)),
        ]
    })
    .boxed()
}

fn close(f: FragmentFormula) -> FragmentFormula {
    f.free_vars()
        .into_iter()
        .fold(f, |acc, v| FragmentFormula::forall(&v, acc))
}

fn theory_and_structure() -> impl Strategy<Value = (Vec<FragmentFormula>, FiniteStructure)> {
    (
        proptest::collection::vec(fragment(4).prop_map(close), 1..3),
        0usize..=5,
        proptest::collection::vec(any::<bool>(), 1..64),
    )
        .prop_map(|(t, n, bits)| (t, random_structure(&base(), n, &bits)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn random_round_trips((theory, m) in theory_and_structure()) {
        let mz = morleyize(&base(), &theory).unwrap();
        prop_assert!(check_pi2minus(mz.theory()));
        prop_assert!(verify_reduct_roundtrip(&m, &mz).unwrap());
        prop_assert!(expansion_matches_oracle(&m, &mz));
        let expanded = canonical_expand(&m, &mz).unwrap();
        prop_assert!(universal_violations(&expanded, &mz).is_empty());
        for q in mz.omitted() {
            prop_assert!(realizations(&expanded, &mz, q).is_empty());
        }
    }

    #[test]
    fn bijection_covers_the_closure(theory in proptest::collection::vec(fragment(3).prop_map(close), 1..4)) {
        let mz = morleyize(&base(), &theory).unwrap();
        let mut seen = BTreeSet::new();
        let axioms: usize = theory.iter().map(|s| closure_walk(s, &mut seen)).sum();
        prop_assert_eq!(mz.nodes().len(), seen.len());
        prop_assert_eq!(mz.theory().defining.len(), axioms);
        let symbols: BTreeSet<usize> = mz.nodes().iter().map(|n| n.symbol).collect();
        prop_assert_eq!(symbols.len(), mz.nodes().len());
        for (i, node) in mz.nodes().iter().enumerate() {
            prop_assert_eq!(mz.node_of(&node.formula), Some(i));
            prop_assert_eq!(mz.language().arity(node.symbol), node.free_vars.len());
        }
        prop_assert!(mz.theory().sentences().all(|s| s.is_universal() || s.is_pithy()));
    }

    #[test]
    fn assertions_hold_exactly_when_sentences_do((theory, m) in theory_and_structure()) {
        let mz = morleyize(&base(), &theory).unwrap();
        let expanded = canonical_expand(&m, &mz).unwrap();
        for (s, a) in theory.iter().zip(&mz.theory().assertions) {
            prop_assert_eq!(satisfies(&expanded, a), truth(&m, s, &mut HashMap::new()));
        }
    }
}
