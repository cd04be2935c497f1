use std::collections::{BTreeMap, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::logic::{argument_patterns, FiniteStructure, Signature, Symbol};
use crate::morley::PrenexSentence;

use super::guide::{GuideModel, Handle};
use super::LimitError;

/// One level `(A_k, ν_k, L_k, g_{k-1})` of the inverse system. Elements are
/// guide handles; their facts are read from the guide. Element `i` of
/// stage `k+1` maps to `parent(i)` in stage `k`, with `None` standing for
/// `*`.
#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub index: usize,
    handles: Vec<Handle>,
    mass_of: Vec<u32>,
    mass_values: Vec<BigRational>,
    star: BigRational,
    language: Vec<usize>,
    parents: Option<Vec<Option<usize>>>,
}

impl Stage {
    /// `A_0 = ∅`, `ν_0(*) = 1`, `L_0 = ∅`.
    pub fn initial() -> Self {
        Stage {
            index: 0,
            handles: Vec::new(),
            mass_of: Vec::new(),
            mass_values: Vec::new(),
            star: BigRational::one(),
            language: Vec::new(),
            parents: None,
        }
    }

    pub fn len(&self) -> usize {
        self.handles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.handles.is_empty()
    }

    pub fn handles(&self) -> &[Handle] {
        &self.handles
    }

    pub fn handle(&self, i: usize) -> Handle {
        self.handles[i]
    }

    /// `L_k` in order of addition.
    pub fn language(&self) -> &[usize] {
        &self.language
    }

    pub fn mass(&self, i: usize) -> &BigRational {
        &self.mass_values[self.mass_of[i] as usize]
    }

    pub fn star_mass(&self) -> &BigRational {
        &self.star
    }

    /// `ν_k` of element `i`, or of `*` for `None`.
    pub fn mass_at(&self, x: Option<usize>) -> &BigRational {
        x.map_or(&self.star, |i| self.mass(i))
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parents.as_ref().and_then(|p| p[i])
    }

    pub fn parents(&self) -> Option<&[Option<usize>]> {
        self.parents.as_deref()
    }

    pub fn total_mass(&self) -> BigRational {
        let mut per_class = vec![0u64; self.mass_values.len()];
        for &c in &self.mass_of {
            per_class[c as usize] += 1;
        }
        per_class
            .iter()
            .zip(&self.mass_values)
            .fold(self.star.clone(), |acc, (&n, v)| {
                acc + v * BigRational::from_integer(BigInt::from(n))
            })
    }

    /// The largest mass, `*` included.
    pub fn max_mass(&self) -> BigRational {
        let mut used = vec![false; self.mass_values.len()];
        for &c in &self.mass_of {
            used[c as usize] = true;
        }
        self.mass_values
            .iter()
            .zip(used)
            .filter(|(_, u)| *u)
            .map(|(v, _)| v)
            .fold(self.star.clone(), |m, v| if *v > m { v.clone() } else { m })
    }

    /// Overwrites one mass, leaving the rest as they are.
    pub fn set_mass(&mut self, i: usize, value: BigRational) {
        self.mass_values.push(value);
        self.mass_of[i] = (self.mass_values.len() - 1) as u32;
    }

    pub fn set_star_mass(&mut self, value: BigRational) {
        self.star = value;
    }

    /// The preimages of each element of the previous stage, and of `*`
    /// (which also contains `*` itself).
    pub fn fibers(&self, previous_len: usize) -> (Vec<Vec<usize>>, Vec<usize>) {
        let mut fibers = vec![Vec::new(); previous_len];
        let mut star = Vec::new();
        for i in 0..self.len() {
            match self.parent(i) {
                Some(p) => fibers[p].push(i),
                None => star.push(i),
            }
        }
        (fibers, star)
    }

    /// `A_k` as a finite structure over `L_k`.
    pub fn structure<G: GuideModel + ?Sized>(
        &self,
        guide: &G,
    ) -> Result<FiniteStructure, LimitError> {
        let lang = guide.language();
        let sig = Signature::new(
            self.language
                .iter()
                .map(|&s| Symbol::new(lang.name(s), lang.arity(s)))
                .collect(),
        )?;
        let mut m = FiniteStructure::new(sig, self.len());
        for (pos, &s) in self.language.iter().enumerate() {
            for args in argument_patterns(self.len(), lang.arity(s)) {
                let tuple: Vec<Handle> = args.iter().map(|&a| self.handles[a]).collect();
                if guide.fact(s, &tuple) {
                    m.add_fact(pos, args)?;
                }
            }
        }
        Ok(m)
    }
}

/// The schedule position used at stage `k`: writing `k + 1 = 2^t (2u + 1)`
/// gives slot `u`, so slot `u` recurs at stages `2u, 4u + 1, 8u + 3, …`.
pub fn schedule_slot(k: usize) -> usize {
    let mut s = k + 1;
    while s % 2 == 0 {
        s /= 2;
    }
    (s - 1) / 2
}

/// What stage `k` works on: the pithy sentence `φ_k`, the omitted type `q_k`
/// and the symbol `R_k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub stage: usize,
    pub slot: usize,
    pub sentence: Option<usize>,
    pub sentence_text: Option<String>,
    pub omitted_type: Option<usize>,
    pub symbol: Option<usize>,
    pub symbol_name: Option<String>,
}

pub fn schedule_entry<G: GuideModel + ?Sized>(guide: &mut G, k: usize) -> ScheduleEntry {
    let slot = schedule_slot(k);
    let symbol = guide.enumerate_symbol(slot);
    let mz = guide.morleyization();
    let pithy: Vec<&PrenexSentence> = mz.theory().pithy().collect();
    let sentence = (!pithy.is_empty()).then(|| slot % pithy.len());
    let q_count = mz.omitted().len();
    ScheduleEntry {
        stage: k,
        slot,
        sentence,
        sentence_text: sentence.map(|i| pithy[i].render(mz.language())),
        omitted_type: (q_count > 0).then(|| slot % q_count),
        symbol,
        symbol_name: symbol.map(|s| mz.language().name(s).to_string()),
    }
}

/// What one advance did.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageLog {
    pub stage: usize,
    pub duplicated: usize,
    /// Tuples of `B_m` (as element indices) that needed a new witness, and
    /// the index of that witness in the new stage.
    pub new_witnesses: Vec<(Vec<usize>, usize)>,
    pub fresh: Option<usize>,
    /// For every tuple of `B_m`, the index of the witness it was given.
    #[serde(skip)]
    pub witness_of: Vec<(Vec<usize>, usize)>,
    pub added_schedule_symbol: Option<usize>,
    pub added_refuting: Vec<usize>,
    pub added_separating: Vec<usize>,
}

fn matrix_holds<G: GuideModel + ?Sized>(
    guide: &G,
    sentence: &PrenexSentence,
    env: &[Handle],
) -> bool {
    sentence
        .matrix
        .eval_with(env, &mut |s, args: &[Handle]| guide.fact(s, args))
}

fn render_fact<G: GuideModel + ?Sized>(guide: &G, s: usize, tuple: &[Handle]) -> String {
    format!(
        "{}{:?} = {}",
        guide.language().name(s),
        tuple,
        guide.fact(s, tuple)
    )
}

/// Checks `(†)` for replacing `b[i]` by `copy`, over every tuple from `b`
/// and every symbol of `lang`.
fn verify_dagger<G: GuideModel + ?Sized>(
    guide: &G,
    b: &[Handle],
    i: usize,
    copy: Handle,
    lang: &[usize],
    stage: usize,
) -> Result<(), LimitError> {
    let a = b[i];
    for &s in lang {
        if guide.key(s, a) == guide.key(s, copy) {
            continue;
        }
        for args in argument_patterns(b.len(), guide.language().arity(s)) {
            if !args.contains(&i) {
                continue;
            }
            let tuple: Vec<Handle> = args.iter().map(|&p| b[p]).collect();
            let swapped: Vec<Handle> = tuple
                .iter()
                .map(|&h| if h == a { copy } else { h })
                .collect();
            if guide.fact(s, &tuple) != guide.fact(s, &swapped) {
                return Err(LimitError::DaggerViolation {
                    stage,
                    original: a,
                    copy,
                    query: format!(
                        "{} but {}",
                        render_fact(guide, s, &tuple),
                        render_fact(guide, s, &swapped)
                    ),
                });
            }
        }
    }
    Ok(())
}

fn halve(v: &BigRational) -> BigRational {
    v / BigRational::from_integer(BigInt::from(2))
}

/// Groups `items` by the facts of `symbols` on each, over all argument
/// patterns of the item's positions.
fn fingerprint<G: GuideModel + ?Sized>(
    guide: &G,
    symbols: &[usize],
    tuple: &[Handle],
) -> Vec<bool> {
    let lang = guide.language();
    let mut out = Vec::new();
    for &s in symbols {
        for args in argument_patterns(tuple.len(), lang.arity(s)) {
            let t: Vec<Handle> = args.iter().map(|&p| tuple[p]).collect();
            out.push(guide.fact(s, &t));
        }
    }
    out
}

/// Step 4(c): adds separating symbols until every two injective
/// `n`-tuples of `handles` with different full types differ on `lang`.
fn separate<G: GuideModel + ?Sized>(
    guide: &mut G,
    handles: &[Handle],
    n: usize,
    lang: &mut Vec<usize>,
    in_lang: &mut HashSet<usize>,
) -> Vec<usize> {
    let tuples: Vec<Vec<Handle>> = argument_patterns(handles.len(), n)
        .into_iter()
        .filter(|t| {
            let mut s = t.clone();
            s.sort_unstable();
            s.windows(2).all(|w| w[0] != w[1])
        })
        .map(|t| t.iter().map(|&i| handles[i]).collect())
        .collect();
    let mut grouped: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
    for (i, t) in tuples.iter().enumerate() {
        grouped
            .entry(fingerprint(&*guide, lang, t))
            .or_default()
            .push(i);
    }
    let mut pending: Vec<Vec<usize>> = grouped.into_values().filter(|g| g.len() > 1).collect();
    pending.reverse();
    let mut added = Vec::new();
    while let Some(mut group) = pending.pop() {
        if group.len() < 2 {
            continue;
        }
        let symbol = guide.separating_symbol(&tuples[group[0]], &tuples[group[1]]);
        let symbol = match symbol {
            Some(s) if !in_lang.contains(&s) => s,
            _ => {
                // same full type, or no new information: keep the first
                group.remove(1);
                pending.push(group);
                continue;
            }
        };
        in_lang.insert(symbol);
        lang.push(symbol);
        added.push(symbol);
        pending.push(group);
        let mut refined = Vec::with_capacity(pending.len());
        for g in pending.drain(..) {
            let mut split: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
            for i in g {
                split
                    .entry(fingerprint(&*guide, &[symbol], &tuples[i]))
                    .or_default()
                    .push(i);
            }
            refined.extend(split.into_values().filter(|g| g.len() > 1));
        }
        refined.reverse();
        pending = refined;
    }
    added
}

/// Builds stage `k + 1` from stage `k` (Steps 1–4).
pub fn advance_stage<G: GuideModel + ?Sized>(
    prev: &Stage,
    guide: &mut G,
    entry: &ScheduleEntry,
) -> Result<(Stage, StageLog), LimitError> {
    let k = prev.index;
    let m = prev.len();
    let mut log = StageLog {
        stage: k + 1,
        duplicated: m,
        ..StageLog::default()
    };

    // Step 1
    let mut b: Vec<Handle> = prev.handles.clone();
    for i in 0..m {
        let copy = guide.duplicate(&b, i, &prev.language)?;
        verify_dagger(&*guide, &b, i, copy, &prev.language, k + 1)?;
        b.push(copy);
    }

    // Step 2
    let bm = b.len();
    let mut w: Vec<Handle> = Vec::new();
    if let Some(si) = entry.sentence {
        let sentence = guide
            .morleyization()
            .theory()
            .pithy()
            .nth(si)
            .expect("scheduled sentence")
            .clone();
        let j = sentence.quantifiers.len() - 1;
        let twin = |p: usize| if p < m { p + m } else { p - m };
        for args in argument_patterns(bm, j) {
            let mut env: Vec<Handle> = args.iter().map(|&p| b[p]).collect();
            env.push(0);
            let candidates = args
                .iter()
                .copied()
                .chain(args.iter().map(|&p| twin(p)))
                .chain(0..bm);
            let mut found = None;
            for c in candidates {
                env[j] = b[c];
                if matrix_holds(&*guide, &sentence, &env) {
                    found = Some(c);
                    break;
                }
            }
            let index = match found {
                Some(c) => c,
                None => {
                    let c = guide.witness(&sentence, &env[..j])?;
                    w.push(c);
                    log.new_witnesses.push((args.clone(), bm + w.len() - 1));
                    bm + w.len() - 1
                }
            };
            log.witness_of.push((args, index));
        }
    }
    if w.is_empty() {
        w.push(guide.fresh());
        log.fresh = Some(bm);
    }

    // Step 3
    let n = BigRational::from_integer(BigInt::from(w.len() + 1));
    let star = &prev.star / &n;
    let mut mass_values: Vec<BigRational> = prev.mass_values.iter().map(halve).collect();
    mass_values.push(star.clone());
    let star_class = (mass_values.len() - 1) as u32;
    let mut mass_of = prev.mass_of.clone();
    mass_of.extend_from_slice(&prev.mass_of);
    mass_of.extend(std::iter::repeat(star_class).take(w.len()));
    let mut parents: Vec<Option<usize>> = (0..m).map(Some).collect();
    parents.extend((0..m).map(Some));
    parents.extend(std::iter::repeat(None).take(w.len()));
    let mut handles = b;
    handles.extend(w);

    // Step 4
    let mut language = prev.language.clone();
    let mut in_lang: HashSet<usize> = language.iter().copied().collect();
    if let Some(s) = entry.symbol {
        if in_lang.insert(s) {
            language.push(s);
            log.added_schedule_symbol = Some(s);
        }
    }
    if let Some(q) = entry.omitted_type {
        for s in guide.refuting_symbols(q, &handles)? {
            if in_lang.insert(s) {
                language.push(s);
                log.added_refuting.push(s);
            }
        }
    }
    let n_chi = guide.chi_arity();
    log.added_separating = separate(guide, &handles, n_chi, &mut language, &mut in_lang);

    let stage = Stage {
        index: k + 1,
        handles,
        mass_of,
        mass_values,
        star,
        language,
        parents: Some(parents),
    };
    Ok((stage, log))
}

/// Result of one family of exact checks.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub checked: u64,
    pub violations: Vec<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn fail(&mut self, v: String) {
        if self.violations.len() < 16 {
            self.violations.push(v);
        }
    }
}

/// Exact invariant checks of one stage against its predecessor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub elements: usize,
    pub language: usize,
    pub total_mass: String,
    pub max_mass: String,
    pub star_mass: String,
    pub mass_sum_one: bool,
    pub masses_positive: bool,
    pub mass_bound: bool,
    pub condition1: CheckOutcome,
    pub condition2: CheckOutcome,
    pub strong_witnesses: Option<CheckOutcome>,
}

impl StageReport {
    pub fn passed(&self) -> bool {
        self.mass_sum_one
            && self.masses_positive
            && self.mass_bound
            && self.condition1.passed()
            && self.condition2.passed()
            && self.strong_witnesses.as_ref().is_none_or(|c| c.passed())
    }
}

fn mass_report(stage: &Stage) -> StageReport {
    let total = stage.total_mass();
    let max = stage.max_mass();
    let bound = BigRational::new(BigInt::one(), BigInt::from(2).pow(stage.index as u32));
    let positive = stage.star > BigRational::zero()
        && (0..stage.len()).all(|i| *stage.mass(i) > BigRational::zero());
    StageReport {
        stage: stage.index,
        elements: stage.len(),
        language: stage.language.len(),
        mass_sum_one: total == BigRational::one(),
        total_mass: total.to_string(),
        mass_bound: max <= bound,
        max_mass: max.to_string(),
        star_mass: stage.star.to_string(),
        masses_positive: positive,
        condition1: CheckOutcome::default(),
        condition2: CheckOutcome::default(),
        strong_witnesses: None,
    }
}

/// Mass checks of a stage with no predecessor.
pub fn initial_report(stage: &Stage) -> StageReport {
    mass_report(stage)
}

/// Checks conditions (1) and (2) for `g : next → prev`, `Σν = 1`,
/// positivity and the `2^{-k}` bound. Condition (2) is decided symbol by
/// symbol through the guide's keys, falling back to the tuples through any
/// element whose key changes.
pub fn stage_invariants<G: GuideModel + ?Sized>(
    prev: &Stage,
    next: &Stage,
    guide: &G,
) -> StageReport {
    let mut report = mass_report(next);
    let Some(parents) = next.parents.as_ref() else {
        report.condition1.fail("stage has no connecting map".into());
        return report;
    };

    // condition (1), on every singleton of A_k ∪ {*}
    let mut pushed = vec![BigRational::zero(); prev.len() + 1];
    for (i, p) in parents.iter().enumerate() {
        match p {
            Some(p) if *p >= prev.len() => report
                .condition1
                .fail(format!("element {i} maps outside the stage")),
            Some(p) => pushed[*p] += next.mass(i),
            None => pushed[prev.len()] += next.mass(i),
        }
    }
    pushed[prev.len()] += &next.star;
    for (x, got) in pushed.iter().enumerate() {
        let (target, name) = if x < prev.len() {
            (prev.mass(x), format!("element {x}"))
        } else {
            (&prev.star, "*".to_string())
        };
        report.condition1.checked += 1;
        if got != target {
            report.condition1.fail(format!(
                "preimage of {name} has mass {got}, expected {target}"
            ));
        }
    }

    // condition (2)
    let lang = guide.language();
    let mapped: Vec<usize> = (0..next.len())
        .filter(|&i| parents[i].is_some_and(|p| p < prev.len()))
        .collect();
    for &s in &prev.language {
        let r = lang.arity(s);
        for &u in &mapped {
            report.condition2.checked += 1;
            let (h, gh) = (next.handles[u], prev.handles[parents[u].expect("mapped")]);
            if guide.key(s, h) == guide.key(s, gh) {
                continue;
            }
            for args in argument_patterns(mapped.len(), r) {
                let elems: Vec<usize> = args.iter().map(|&a| mapped[a]).collect();
                if !elems.contains(&u) {
                    continue;
                }
                let images: Vec<usize> =
                    elems.iter().map(|&e| parents[e].expect("mapped")).collect();
                let distinct = |v: &[usize]| {
                    let mut w = v.to_vec();
                    w.sort_unstable();
                    w.windows(2).all(|p| p[0] != p[1])
                };
                if !distinct(&elems) || !distinct(&images) {
                    continue;
                }
                let tuple: Vec<Handle> = elems.iter().map(|&e| next.handles[e]).collect();
                let image: Vec<Handle> = images.iter().map(|&e| prev.handles[e]).collect();
                if guide.fact(s, &tuple) != guide.fact(s, &image) {
                    report.condition2.fail(format!(
                        "{} on {:?} differs from its image {:?}",
                        lang.name(s),
                        elems,
                        images
                    ));
                }
            }
        }
    }
    report
}

/// Checks that every tuple of `B_m` was given a witness of the scheduled
/// sentence that lies in the tuple or carries positive mass.
pub fn strong_witness_check<G: GuideModel + ?Sized>(
    next: &Stage,
    log: &StageLog,
    entry: &ScheduleEntry,
    guide: &G,
) -> CheckOutcome {
    let mut out = CheckOutcome::default();
    let Some(si) = entry.sentence else { return out };
    let Some(sentence) = guide.morleyization().theory().pithy().nth(si) else {
        out.fail(format!("scheduled sentence {si} is missing"));
        return out;
    };
    let j = sentence.quantifiers.len() - 1;
    let bm = 2 * log.duplicated;
    let expected = (bm as u64).pow(j as u32);
    if log.witness_of.len() as u64 != expected {
        out.fail(format!(
            "{} tuples recorded, expected {expected}",
            log.witness_of.len()
        ));
    }
    for (args, w) in &log.witness_of {
        out.checked += 1;
        let mut env: Vec<Handle> = args.iter().map(|&p| next.handles[p]).collect();
        env.push(next.handles[*w]);
        let placed = args.contains(w) || *next.mass(*w) > BigRational::zero();
        if !placed || !matrix_holds(guide, sentence, &env) {
            out.fail(format!("tuple {args:?} has no valid witness at {w}"));
        }
    }
    out
}

/// JSON summary of a stage for manifests.
pub fn stage_summary(stage: &Stage, report: Option<&StageReport>) -> Value {
    let max = stage.max_mass();
    json!({
        "stage": stage.index,
        "elements": stage.len(),
        "language": stage.language.len(),
        "max_mass": max.to_string(),
        "max_mass_f64": max.to_f64(),
        "star_mass": stage.star.to_string(),
        "checks": report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ahk::SeedKey;
    use crate::limit::kaleidoscope_guide;

    #[test]
    fn slots_recur() {
        let slots: Vec<usize> = (0..8).map(schedule_slot).collect();
        assert_eq!(slots, vec![0, 0, 1, 0, 2, 1, 3, 0]);
        for u in 0..5 {
            let hits: Vec<usize> = (0..200).filter(|&k| schedule_slot(k) == u).collect();
            assert!(hits.len() >= 4, "slot {u} recurs");
        }
    }

    #[test]
    fn first_stage() {
        let mut g = kaleidoscope_guide(SeedKey(3)).unwrap();
        let s0 = Stage::initial();
        assert!(initial_report(&s0).passed());
        let entry = schedule_entry(&mut g, 0);
        let (s1, log) = advance_stage(&s0, &mut g, &entry).unwrap();
        assert!(s1.len() >= 1);
        assert!(*s1.star_mass() <= BigRational::new(1.into(), 2.into()));
        let report = stage_invariants(&s0, &s1, &g);
        assert!(report.passed(), "{report:?}");
        assert!(strong_witness_check(&s1, &log, &entry, &g).passed());
    }

    #[test]
    fn tampered_mass_is_reported() {
        let mut g = kaleidoscope_guide(SeedKey(3)).unwrap();
        let s0 = Stage::initial();
        let e0 = schedule_entry(&mut g, 0);
        let (s1, _) = advance_stage(&s0, &mut g, &e0).unwrap();
        let e1 = schedule_entry(&mut g, 1);
        let (mut s2, _) = advance_stage(&s1, &mut g, &e1).unwrap();
        s2.set_mass(0, BigRational::new(1.into(), 1000.into()));
        let report = stage_invariants(&s1, &s2, &g);
        assert!(!report.condition1.passed());
        assert!(report.condition1.violations[0].contains("element 0"));
        assert!(!report.mass_sum_one);
    }
}
