use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, RwLock};

use serde_json::{json, Value};

use crate::ahk::SeedKey;
use crate::logic::{argument_patterns, QfFormula, Signature, SymbolFamily};
use crate::morley::{
    morleyize, FragmentFormula, IndexTerm, Morleyization, PrenexSentence, QPattern, RelRef,
};

use super::guide::{class_count, equality_pattern, equality_patterns, GuideModel, Handle};
use super::LimitError;

pub const PREDICATE_PREFIX: &str = "P";
/// Bits kept inline per element; later bits are recomputed on demand.
const STORED_BITS: usize = 256;
/// How far separation and refutation searches look for a differing bit.
const SEARCH_CAP: usize = 4096;
/// Largest key width (classes × indices) that gets a lookup table.
const TABLE_BITS: usize = 16;
/// Fresh elements range over all assignments of this many bits at most.
const FRESH_BITS: usize = 16;
const INITIAL_SCHEME_DEPTH: usize = 4;

fn family() -> SymbolFamily {
    SymbolFamily {
        prefix: PREDICATE_PREFIX.to_string(),
        arity: 1,
    }
}

fn p(n: usize, var: &str) -> FragmentFormula {
    FragmentFormula::indexed_atom(PREDICATE_PREFIX, IndexTerm::Lit(n), &[var])
}

fn p_index(index: &str, var: &str) -> FragmentFormula {
    FragmentFormula::indexed_atom(PREDICATE_PREFIX, IndexTerm::Var(index.to_string()), &[var])
}

/// The theory of the predicate kaleidoscope used by the shipped guide:
/// distinct elements differ on some `P_n`, every two-bit class has at least
/// two members, and one three-bit pattern is realized.
pub fn kaleidoscope_theory() -> Vec<FragmentFormula> {
    let eq = |a: &str, b: &str| FragmentFormula::Eq(a.into(), b.into());
    let differ = FragmentFormula::SchemeOr {
        index: "n".into(),
        depth: INITIAL_SCHEME_DEPTH,
        body: Box::new(FragmentFormula::not(FragmentFormula::iff(
            p_index("n", "x"),
            p_index("n", "y"),
        ))),
    };
    let separation = FragmentFormula::forall(
        "x",
        FragmentFormula::forall("y", FragmentFormula::Or(vec![eq("x", "y"), differ])),
    );
    let twins = FragmentFormula::forall(
        "x",
        FragmentFormula::exists(
            "y",
            FragmentFormula::And(vec![
                FragmentFormula::not(eq("x", "y")),
                FragmentFormula::iff(p(0, "x"), p(0, "y")),
                FragmentFormula::iff(p(1, "x"), p(1, "y")),
            ]),
        ),
    );
    let pattern = FragmentFormula::exists(
        "y",
        FragmentFormula::And(vec![p(0, "y"), FragmentFormula::not(p(1, "y")), p(2, "y")]),
    );
    vec![separation, twins, pattern]
}

enum PredIndex<'a> {
    Lit(usize),
    Var(&'a str),
}

fn predicate_index(rel: &RelRef) -> Option<PredIndex<'_>> {
    match rel {
        RelRef::Named(name) => family().index_of(name).map(PredIndex::Lit),
        RelRef::Indexed { prefix, index } if prefix == PREDICATE_PREFIX => Some(match index {
            IndexTerm::Lit(n) => PredIndex::Lit(*n),
            IndexTerm::Var(v) => PredIndex::Var(v),
        }),
        RelRef::Indexed { .. } => None,
    }
}

/// Formulas the generic evaluator handles: unary predicates `P_n`, first
/// order connectives, and schemes with quantifier-free bodies.
fn validate(f: &FragmentFormula, scheme_index: Option<&str>) -> Result<(), LimitError> {
    let unsupported = || Err(LimitError::Unsupported(f.to_string()));
    match f {
        FragmentFormula::Atom { rel, args } => {
            if args.len() != 1 {
                return unsupported();
            }
            match predicate_index(rel) {
                Some(PredIndex::Lit(_)) => Ok(()),
                Some(PredIndex::Var(v)) if Some(v) == scheme_index => Ok(()),
                _ => unsupported(),
            }
        }
        FragmentFormula::Eq(..) => Ok(()),
        FragmentFormula::Not(g) => validate(g, scheme_index),
        FragmentFormula::And(gs) | FragmentFormula::Or(gs) => {
            gs.iter().try_for_each(|g| validate(g, scheme_index))
        }
        FragmentFormula::Forall(_, g) | FragmentFormula::Exists(_, g) => {
            if scheme_index.is_some() {
                return unsupported();
            }
            validate(g, None)
        }
        FragmentFormula::SchemeAnd { index, body, .. }
        | FragmentFormula::SchemeOr { index, body, .. } => {
            if scheme_index.is_some() {
                return unsupported();
            }
            validate(body, Some(index))
        }
    }
}

/// The fixed predicate indices a formula mentions.
fn formula_indices(f: &FragmentFormula, out: &mut BTreeSet<usize>) {
    match f {
        FragmentFormula::Atom { rel, .. } => {
            if let Some(PredIndex::Lit(n)) = predicate_index(rel) {
                out.insert(n);
            }
        }
        FragmentFormula::Eq(..) => {}
        FragmentFormula::Not(g) | FragmentFormula::Forall(_, g) | FragmentFormula::Exists(_, g) => {
            formula_indices(g, out)
        }
        FragmentFormula::And(gs) | FragmentFormula::Or(gs) => {
            gs.iter().for_each(|g| formula_indices(g, out))
        }
        FragmentFormula::SchemeAnd { body, .. } | FragmentFormula::SchemeOr { body, .. } => {
            formula_indices(body, out)
        }
    }
}

fn indices_of(f: &FragmentFormula) -> Vec<usize> {
    let mut out = BTreeSet::new();
    formula_indices(f, &mut out);
    out.into_iter().collect()
}

fn lookup(env: &[(String, usize)], v: &str) -> usize {
    env.iter()
        .rev()
        .find(|(w, _)| w == v)
        .map(|&(_, e)| e)
        .expect("free variables are bound")
}

/// Truth in the generic model. Elements carry bits on a fixed index set and
/// are otherwise in general position: quantifiers range over the elements in
/// play plus one fresh element with any bits, a scheme conjunction holds when
/// its body holds under every assignment of the indexed bits, and a scheme
/// disjunction when it holds under some assignment.
struct Evaluator<'a> {
    indices: &'a [usize],
    elems: Vec<Vec<bool>>,
}

impl Evaluator<'_> {
    fn bit(&self, e: usize, n: usize) -> bool {
        let pos = self
            .indices
            .binary_search(&n)
            .expect("index set covers the formula");
        self.elems[e][pos]
    }

    fn eval(
        &mut self,
        f: &FragmentFormula,
        env: &mut Vec<(String, usize)>,
        generic: Option<&[bool]>,
    ) -> bool {
        match f {
            FragmentFormula::Atom { rel, args } => {
                let e = lookup(env, &args[0]);
                match predicate_index(rel).expect("validated") {
                    PredIndex::Lit(n) => self.bit(e, n),
                    PredIndex::Var(_) => generic.expect("indexed atoms sit inside schemes")[e],
                }
            }
            FragmentFormula::Eq(a, b) => lookup(env, a) == lookup(env, b),
            FragmentFormula::Not(g) => !self.eval(g, env, generic),
            FragmentFormula::And(gs) => gs.iter().all(|g| self.eval(g, env, generic)),
            FragmentFormula::Or(gs) => gs.iter().any(|g| self.eval(g, env, generic)),
            FragmentFormula::Forall(v, g) | FragmentFormula::Exists(v, g) => {
                let want = matches!(f, FragmentFormula::Exists(..));
                let existing = self.elems.len();
                for e in 0..existing {
                    env.push((v.clone(), e));
                    let r = self.eval(g, env, generic);
                    env.pop();
                    if r == want {
                        return want;
                    }
                }
                let t = self.indices.len();
                assert!(
                    t <= FRESH_BITS,
                    "too many fixed indices for a fresh element"
                );
                for a in 0..1u64 << t {
                    self.elems.push((0..t).map(|j| a >> j & 1 == 1).collect());
                    env.push((v.clone(), existing));
                    let r = self.eval(g, env, generic);
                    env.pop();
                    self.elems.pop();
                    if r == want {
                        return want;
                    }
                }
                !want
            }
            FragmentFormula::SchemeAnd { body, .. } | FragmentFormula::SchemeOr { body, .. } => {
                let conj = matches!(f, FragmentFormula::SchemeAnd { .. });
                let mut refs: Vec<usize> =
                    body.free_vars().iter().map(|v| lookup(env, v)).collect();
                refs.sort_unstable();
                refs.dedup();
                let mut g = vec![false; self.elems.len()];
                for a in 0..1u64 << refs.len() {
                    for (j, &e) in refs.iter().enumerate() {
                        g[e] = a >> j & 1 == 1;
                    }
                    if self.eval(body, env, Some(&g)) != conj {
                        return !conj;
                    }
                }
                conj
            }
        }
    }
}

/// Evaluates `f` with `vars[j]` bound to class `pattern[j]` whose bits on
/// `indices` are `keys[class]`.
fn evaluate(
    f: &FragmentFormula,
    vars: &[String],
    pattern: &[usize],
    keys: &[u64],
    indices: &[usize],
) -> bool {
    let elems = keys
        .iter()
        .map(|&k| (0..indices.len()).map(|j| k >> j & 1 == 1).collect())
        .collect();
    let mut ev = Evaluator { indices, elems };
    let mut env: Vec<(String, usize)> = vars.iter().cloned().zip(pattern.iter().copied()).collect();
    ev.eval(f, &mut env, None)
}

enum Source {
    Base,
    Node {
        formula: FragmentFormula,
        vars: Vec<String>,
    },
}

struct Compiled {
    indices: Vec<usize>,
    source: Source,
    tables: RwLock<HashMap<Vec<usize>, Arc<Vec<bool>>>>,
}

impl Compiled {
    fn direct(&self, pattern: &[usize], keys: &[u64]) -> bool {
        match &self.source {
            Source::Base => keys[0] & 1 == 1,
            Source::Node { formula, vars } => evaluate(formula, vars, pattern, keys, &self.indices),
        }
    }

    fn eval(&self, pattern: &[usize], keys: &[u64]) -> bool {
        let t = self.indices.len();
        let width = class_count(pattern) * t;
        if width > TABLE_BITS {
            return self.direct(pattern, keys);
        }
        let index = keys
            .iter()
            .enumerate()
            .fold(0usize, |acc, (j, &k)| acc | (k as usize) << (j * t));
        if let Some(table) = self.tables.read().expect("table lock").get(pattern) {
            return table[index];
        }
        let c = class_count(pattern);
        let table: Vec<bool> = (0..1usize << width)
            .map(|i| {
                let keys: Vec<u64> = (0..c)
                    .map(|j| (i >> (j * t) & ((1 << t) - 1)) as u64)
                    .collect();
                self.direct(pattern, &keys)
            })
            .collect();
        let v = table[index];
        self.tables
            .write()
            .expect("table lock")
            .insert(pattern.to_vec(), Arc::new(table));
        v
    }
}

#[derive(Clone, Debug)]
struct HandleInfo {
    parent: Option<Handle>,
    bound: usize,
    forced: Vec<(usize, bool)>,
    words: [u64; STORED_BITS / 64],
}

/// The predicate kaleidoscope as a guide model: each element is a lazily
/// decided bit sequence, bit `n` giving `P_n`. A duplicate copies the bits
/// below the largest index its sublanguage mentions and draws the rest
/// fresh, so bits are pure functions of the element and the index.
pub struct KaleidoscopeGuide {
    seed: SeedKey,
    sentences: Vec<FragmentFormula>,
    mz: Morleyization,
    handles: Vec<HandleInfo>,
    compiled: RwLock<HashMap<usize, Arc<Compiled>>>,
}

impl Clone for KaleidoscopeGuide {
    fn clone(&self) -> Self {
        KaleidoscopeGuide {
            seed: self.seed,
            sentences: self.sentences.clone(),
            mz: self.mz.clone(),
            handles: self.handles.clone(),
            compiled: RwLock::new(HashMap::new()),
        }
    }
}

impl std::fmt::Debug for KaleidoscopeGuide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KaleidoscopeGuide")
            .field("seed", &self.seed)
            .field("handles", &self.handles.len())
            .finish()
    }
}

/// The shipped guide over [`kaleidoscope_theory`].
pub fn kaleidoscope_guide(seed: SeedKey) -> Result<KaleidoscopeGuide, LimitError> {
    KaleidoscopeGuide::new(seed, kaleidoscope_theory())
}

impl KaleidoscopeGuide {
    pub fn new(seed: SeedKey, sentences: Vec<FragmentFormula>) -> Result<Self, LimitError> {
        for s in &sentences {
            validate(s, None)?;
        }
        let base = Signature::indexed(PREDICATE_PREFIX, 1, 0);
        let mz = morleyize(&base, &sentences)?;
        Ok(KaleidoscopeGuide {
            seed,
            sentences,
            mz,
            handles: Vec::new(),
            compiled: RwLock::new(HashMap::new()),
        })
    }

    pub fn seed(&self) -> SeedKey {
        self.seed
    }

    pub fn sentences(&self) -> &[FragmentFormula] {
        &self.sentences
    }

    pub fn handle_count(&self) -> usize {
        self.handles.len()
    }

    pub fn parent(&self, h: Handle) -> Option<Handle> {
        self.handles[h].parent
    }

    /// Bit `n` of element `h`, i.e. whether `P_n(h)`.
    pub fn bit(&self, h: Handle, n: usize) -> bool {
        let info = &self.handles[h];
        if n < STORED_BITS {
            return info.words[n / 64] >> (n % 64) & 1 == 1;
        }
        if let Some(&(_, v)) = info.forced.iter().find(|&&(m, _)| m == n) {
            return v;
        }
        match info.parent {
            Some(parent) if n < info.bound => self.bit(parent, n),
            _ => self.seed.derive(h as u64).uniform(&[]).bit(n),
        }
    }

    pub fn bits(&self, h: Handle, d: usize) -> Vec<bool> {
        (0..d).map(|n| self.bit(h, n)).collect()
    }

    /// The symbol of `P_n`, materialized on first use.
    pub fn predicate(&mut self, n: usize) -> Result<usize, LimitError> {
        Ok(self.mz.base_symbol(&format!("{PREDICATE_PREFIX}{n}"), 1)?)
    }

    /// The predicate indices on which facts of `symbol` depend.
    pub fn relevant_indices(&self, symbol: usize) -> Vec<usize> {
        self.compiled(symbol).indices.clone()
    }

    fn push_handle(
        &mut self,
        parent: Option<Handle>,
        bound: usize,
        forced: Vec<(usize, bool)>,
    ) -> Handle {
        let h = self.handles.len();
        let own = self.seed.derive(h as u64).uniform(&[]);
        let mut words = [0u64; STORED_BITS / 64];
        for n in 0..STORED_BITS {
            let b = match forced.iter().find(|&&(m, _)| m == n) {
                Some(&(_, v)) => v,
                None => match parent {
                    Some(parent) if n < bound => self.bit(parent, n),
                    _ => own.bit(n),
                },
            };
            words[n / 64] |= (b as u64) << (n % 64);
        }
        self.handles.push(HandleInfo {
            parent,
            bound,
            forced,
            words,
        });
        h
    }

    fn compiled(&self, symbol: usize) -> Arc<Compiled> {
        if let Some(c) = self.compiled.read().expect("compile lock").get(&symbol) {
            return c.clone();
        }
        let compiled = match self.mz.node_of_symbol(symbol) {
            Some(node) => {
                let node = self.mz.node(node);
                Compiled {
                    indices: indices_of(&node.formula),
                    source: Source::Node {
                        formula: node.formula.clone(),
                        vars: node.free_vars.clone(),
                    },
                    tables: RwLock::new(HashMap::new()),
                }
            }
            None => {
                let n = family()
                    .index_of(self.mz.language().name(symbol))
                    .expect("base symbols are predicates");
                Compiled {
                    indices: vec![n],
                    source: Source::Base,
                    tables: RwLock::new(HashMap::new()),
                }
            }
        };
        assert!(compiled.indices.len() <= 64, "keys hold at most 64 bits");
        let compiled = Arc::new(compiled);
        self.compiled
            .write()
            .expect("compile lock")
            .insert(symbol, compiled.clone());
        compiled
    }

    fn gather(&self, h: Handle, indices: &[usize]) -> u64 {
        indices
            .iter()
            .enumerate()
            .fold(0, |k, (j, &n)| k | (self.bit(h, n) as u64) << j)
    }

    fn literal(&self, node: usize, positive: bool, vars: &[String]) -> QfFormula {
        let n = self.mz.node(node);
        let args = n
            .free_vars
            .iter()
            .map(|v| vars.iter().position(|w| w == v).expect("literal variables"))
            .collect();
        let atom = QfFormula::rel(n.symbol, args);
        if positive {
            atom
        } else {
            QfFormula::not(atom)
        }
    }

    /// Truth of instance formula `psi` on `tuple`, reading actual bits.
    fn instance_holds(
        &self,
        psi: &FragmentFormula,
        vars: &[String],
        tuple: &[Handle],
        indices: &[usize],
    ) -> bool {
        let (pattern, reps) = equality_pattern(tuple);
        let keys: Vec<u64> = reps.iter().map(|&h| self.gather(h, indices)).collect();
        evaluate(psi, vars, &pattern, &keys, indices)
    }

    /// Materializes instance `i` of the scheme behind omitted type `q` and
    /// returns its symbol.
    fn instance_symbol(&mut self, q: usize, i: usize) -> Result<usize, LimitError> {
        let oq = &self.mz.omitted()[q];
        let (node, psi) = (oq.node, oq.instance_formula(i));
        self.mz.extend_scheme(node, i + 1)?;
        let inst = self.mz.node_of(&psi).expect("materialized instance");
        Ok(self.mz.node(inst).symbol)
    }
}

impl GuideModel for KaleidoscopeGuide {
    fn name(&self) -> String {
        "kaleidoscope-predicate".into()
    }

    fn morleyization(&self) -> &Morleyization {
        &self.mz
    }

    fn chi_arity(&self) -> usize {
        1
    }

    fn key(&self, symbol: usize, h: Handle) -> u64 {
        self.gather(h, &self.compiled(symbol).indices)
    }

    fn fact_keys(&self, symbol: usize, pattern: &[usize], keys: &[u64]) -> bool {
        self.compiled(symbol).eval(pattern, keys)
    }

    fn fresh(&mut self) -> Handle {
        self.push_handle(None, 0, Vec::new())
    }

    fn duplicate(
        &mut self,
        tuple: &[Handle],
        position: usize,
        sub: &[usize],
    ) -> Result<Handle, LimitError> {
        let parent = *tuple
            .get(position)
            .ok_or_else(|| LimitError::InvalidArgument("position out of range".into()))?;
        let bound = sub
            .iter()
            .flat_map(|&s| self.compiled(s).indices.clone())
            .max()
            .map_or(0, |m| m + 1);
        Ok(self.push_handle(Some(parent), bound, Vec::new()))
    }

    fn witness(
        &mut self,
        sentence: &PrenexSentence,
        tuple: &[Handle],
    ) -> Result<Handle, LimitError> {
        if !sentence.is_pithy() || sentence.quantifiers.len() != tuple.len() + 1 {
            return Err(LimitError::InvalidArgument(
                "witness needs a pithy sentence and a matching tuple".into(),
            ));
        }
        let indices: Vec<usize> = sentence
            .symbols()
            .iter()
            .flat_map(|&s| self.compiled(s).indices.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if indices.len() > FRESH_BITS {
            return Err(LimitError::Unsupported(sentence.render(self.language())));
        }
        // the candidate is a new element, distinct from every handle
        let candidate = Handle::MAX;
        let mut env: Vec<Handle> = tuple.to_vec();
        env.push(candidate);
        for a in 0..1u64 << indices.len() {
            let assigned = |n: usize| a >> indices.binary_search(&n).expect("covered") & 1 == 1;
            let holds = sentence.matrix.eval_with(&env, &mut |s, args: &[Handle]| {
                let compiled = self.compiled(s);
                let (pattern, reps) = equality_pattern(args);
                let keys: Vec<u64> = reps
                    .iter()
                    .map(|&h| {
                        if h == candidate {
                            compiled
                                .indices
                                .iter()
                                .enumerate()
                                .fold(0, |k, (j, &n)| k | (assigned(n) as u64) << j)
                        } else {
                            self.gather(h, &compiled.indices)
                        }
                    })
                    .collect();
                compiled.eval(&pattern, &keys)
            });
            if holds {
                let forced = indices
                    .iter()
                    .enumerate()
                    .map(|(j, &n)| (n, a >> j & 1 == 1))
                    .collect();
                return Ok(self.push_handle(None, 0, forced));
            }
        }
        Err(LimitError::NoWitness {
            sentence: sentence.render(self.language()),
            tuple: tuple.to_vec(),
        })
    }

    fn separating_symbol(&mut self, a: &[Handle], b: &[Handle]) -> Option<usize> {
        if a.len() != b.len() || equality_pattern(a).0 != equality_pattern(b).0 {
            return None;
        }
        let i = (0..a.len()).find(|&i| a[i] != b[i])?;
        let n = (0..SEARCH_CAP).find(|&n| self.bit(a[i], n) != self.bit(b[i], n))?;
        self.predicate(n).ok()
    }

    fn refuting_formula(&mut self, q: usize, tuple: &[Handle]) -> Result<QfFormula, LimitError> {
        let oq = self
            .mz
            .omitted()
            .get(q)
            .cloned()
            .ok_or_else(|| LimitError::InvalidArgument(format!("no type {q}")))?;
        if tuple.len() != oq.vars.len() {
            return Err(LimitError::InvalidArgument(format!(
                "type {q} has {} variables",
                oq.vars.len()
            )));
        }
        let head_symbol = self.mz.node(oq.head.node).symbol;
        if self.fact(head_symbol, tuple) != oq.head.positive {
            return Ok(self.literal(oq.head.node, oq.head.positive, &oq.vars));
        }
        let positive = oq.pattern == QPattern::Conjunction;
        let fixed = indices_of(&self.mz.node(oq.node).formula);
        for i in 0..SEARCH_CAP {
            let mut indices = fixed.clone();
            if let Err(pos) = indices.binary_search(&i) {
                indices.insert(pos, i);
            }
            if self.instance_holds(&oq.instance_formula(i), &oq.vars, tuple, &indices) != positive {
                self.instance_symbol(q, i)?;
                let psi = oq.instance_formula(i);
                let node = self.mz.node_of(&psi).expect("materialized instance");
                return Ok(self.literal(node, positive, &oq.vars));
            }
        }
        Err(LimitError::NoRefutation {
            q,
            tuple: tuple.to_vec(),
        })
    }

    /// Refines the tuples level by level: an item is a set of unresolved
    /// tuples whose classes draw from element sets sharing every bit read so
    /// far, so each level costs one evaluation per item and bit choice.
    fn refuting_symbols(
        &mut self,
        q: usize,
        elements: &[Handle],
    ) -> Result<BTreeSet<usize>, LimitError> {
        let oq = self
            .mz
            .omitted()
            .get(q)
            .cloned()
            .ok_or_else(|| LimitError::InvalidArgument(format!("no type {q}")))?;
        let r = oq.vars.len();
        let head_symbol = self.mz.node(oq.head.node).symbol;
        let positive = oq.pattern == QPattern::Conjunction;
        let fixed = indices_of(&self.mz.node(oq.node).formula);

        let mut groups: BTreeMap<u64, Vec<Handle>> = BTreeMap::new();
        for &h in elements {
            groups.entry(self.gather(h, &fixed)).or_default().push(h);
        }
        let mut arena: Vec<Vec<Handle>> = groups.into_values().collect();

        // distinct representatives, one per class, or None if a set is too small
        fn representatives(arena: &[Vec<Handle>], sets: &[usize]) -> Option<Vec<Handle>> {
            let mut used: HashMap<usize, usize> = HashMap::new();
            sets.iter()
                .map(|&s| {
                    let k = used.entry(s).or_insert(0);
                    *k += 1;
                    arena[s].get(*k - 1).copied()
                })
                .collect()
        }

        let mut out = BTreeSet::new();
        let mut items: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        let initial = arena.len();
        for pattern in equality_patterns(r) {
            let c = class_count(&pattern);
            for sets in argument_patterns(initial, c) {
                let Some(reps) = representatives(&arena, &sets) else {
                    continue;
                };
                let tuple: Vec<Handle> = pattern.iter().map(|&j| reps[j]).collect();
                if self.fact(head_symbol, &tuple) != oq.head.positive {
                    out.insert(head_symbol);
                } else {
                    items.push((pattern.clone(), sets));
                }
            }
        }

        let mut levels = BTreeSet::new();
        let mut i = 0;
        while !items.is_empty() {
            if i == SEARCH_CAP {
                let (pattern, sets) = &items[0];
                let reps = representatives(&arena, sets).expect("items are realizable");
                return Err(LimitError::NoRefutation {
                    q,
                    tuple: pattern.iter().map(|&j| reps[j]).collect(),
                });
            }
            let psi = oq.instance_formula(i);
            let mut indices = fixed.clone();
            if let Err(pos) = indices.binary_search(&i) {
                indices.insert(pos, i);
            }
            let mut splits: HashMap<usize, [Option<usize>; 2]> = HashMap::new();
            let mut verdicts: HashMap<(Vec<usize>, Vec<u64>), bool> = HashMap::new();
            let mut next = Vec::new();
            for (pattern, sets) in items {
                let mut options: Vec<[Option<usize>; 2]> = Vec::with_capacity(sets.len());
                for &s in &sets {
                    let split = match splits.get(&s) {
                        Some(split) => *split,
                        None => {
                            let (ones, zeros): (Vec<Handle>, Vec<Handle>) =
                                arena[s].iter().partition(|&&h| self.bit(h, i));
                            let mut split = [None, None];
                            for (b, part) in [zeros, ones].into_iter().enumerate() {
                                if !part.is_empty() {
                                    arena.push(part);
                                    split[b] = Some(arena.len() - 1);
                                }
                            }
                            splits.insert(s, split);
                            split
                        }
                    };
                    options.push(split);
                }
                for choice in 0..1usize << sets.len() {
                    let Some(children) = (0..sets.len())
                        .map(|j| options[j][choice >> j & 1])
                        .collect::<Option<Vec<usize>>>()
                    else {
                        continue;
                    };
                    let Some(reps) = representatives(&arena, &children) else {
                        continue;
                    };
                    let keys: Vec<u64> = reps.iter().map(|&h| self.gather(h, &indices)).collect();
                    let holds = *verdicts
                        .entry((pattern.clone(), keys.clone()))
                        .or_insert_with(|| evaluate(&psi, &oq.vars, &pattern, &keys, &indices));
                    if holds != positive {
                        levels.insert(i);
                    } else {
                        next.push((pattern.clone(), children));
                    }
                }
            }
            items = next;
            i += 1;
        }
        for i in levels {
            out.insert(self.instance_symbol(q, i)?);
        }
        Ok(out)
    }

    /// Even slots walk the materialized language, odd slots the predicates.
    fn enumerate_symbol(&mut self, n: usize) -> Option<usize> {
        if n % 2 == 0 {
            (n / 2 < self.language().len()).then_some(n / 2)
        } else {
            self.predicate((n - 1) / 2).ok()
        }
    }

    fn describe(&self) -> Value {
        json!({
            "name": self.name(),
            "seed": self.seed.to_hex(),
            "theory": self.sentences.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            "chi": "(= x x)",
        })
    }
}
