use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ahk::{AhkSampler, SeedKey, StatReport, Uniform, XiFamily};
use crate::logic::{argument_patterns, FiniteStructure, Signature, Symbol};
use crate::morley::{PrenexSentence, Quantifier};

use super::guide::{GuideModel, Handle};
use super::kaleidoscope::{kaleidoscope_guide, KaleidoscopeGuide};
use super::rescale::Weight;
use super::stage::{
    advance_stage, initial_report, schedule_entry, stage_invariants, stage_summary,
    strong_witness_check, ScheduleEntry, Stage, StageLog, StageReport,
};
use super::LimitError;

/// Restarts allowed when a sampled path is still at `*` at its depth.
const MAX_ATTEMPTS: u64 = 256;

/// A point of the limit, as its projections `π_0 … π_d` (`None` is `*`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathPoint {
    /// The point's own uniform, in hex.
    pub seed: String,
    /// Number of restarts before the path left `*`.
    pub attempt: u64,
    pub path: Vec<Option<usize>>,
}

impl PathPoint {
    pub fn depth(&self) -> usize {
        self.path.len() - 1
    }

    pub fn at(&self, level: usize) -> Option<usize> {
        self.path[level]
    }
}

struct Rescaled {
    weight: Weight,
    cumulative: Vec<f64>,
}

/// A built inverse system together with its guide: stages `0..=depth`,
/// the schedule used, and the exact check report of every stage.
pub struct LimitHandle<G: GuideModel = KaleidoscopeGuide> {
    guide: G,
    stages: Vec<Stage>,
    schedule: Vec<ScheduleEntry>,
    logs: Vec<StageLog>,
    reports: Vec<StageReport>,
    fibers: Vec<(Vec<Vec<usize>>, Vec<usize>)>,
    rescaled: Option<Rescaled>,
}

impl<G: GuideModel + Clone> Clone for LimitHandle<G> {
    fn clone(&self) -> Self {
        LimitHandle {
            guide: self.guide.clone(),
            stages: self.stages.clone(),
            schedule: self.schedule.clone(),
            logs: self.logs.clone(),
            reports: self.reports.clone(),
            fibers: self.fibers.clone(),
            rescaled: self.rescaled.as_ref().map(|r| Rescaled {
                weight: r.weight.clone(),
                cumulative: r.cumulative.clone(),
            }),
        }
    }
}

impl<G: GuideModel> LimitHandle<G> {
    pub fn new(guide: G) -> Self {
        let s0 = Stage::initial();
        let report = initial_report(&s0);
        LimitHandle {
            guide,
            stages: vec![s0],
            schedule: Vec::new(),
            logs: Vec::new(),
            reports: vec![report],
            fibers: Vec::new(),
            rescaled: None,
        }
    }

    /// Builds stages `1..=stages`, checking each one exactly.
    pub fn build(guide: G, stages: usize) -> Result<Self, LimitError> {
        let mut h = LimitHandle::new(guide);
        h.ensure_depth(stages)?;
        Ok(h)
    }

    /// Adds one stage and returns its report.
    pub fn advance(&mut self) -> Result<&StageReport, LimitError> {
        let k = self.depth();
        let entry = schedule_entry(&mut self.guide, k);
        let (next, log) = advance_stage(&self.stages[k], &mut self.guide, &entry)?;
        let mut report = stage_invariants(&self.stages[k], &next, &self.guide);
        report.strong_witnesses = Some(strong_witness_check(&next, &log, &entry, &self.guide));
        self.fibers.push(next.fibers(self.stages[k].len()));
        self.stages.push(next);
        self.schedule.push(entry);
        self.logs.push(log);
        self.reports.push(report);
        Ok(self.reports.last().expect("just pushed"))
    }

    pub fn ensure_depth(&mut self, depth: usize) -> Result<(), LimitError> {
        while self.depth() < depth {
            self.advance()?;
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.stages.len() - 1
    }

    pub fn guide(&self) -> &G {
        &self.guide
    }

    pub fn stage(&self, k: usize) -> &Stage {
        &self.stages[k]
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn schedule(&self) -> &[ScheduleEntry] {
        &self.schedule
    }

    pub fn logs(&self) -> &[StageLog] {
        &self.logs
    }

    pub fn reports(&self) -> &[StageReport] {
        &self.reports
    }

    /// Every stage passed its exact checks.
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed())
    }

    pub fn weight(&self) -> Option<&Weight> {
        self.rescaled.as_ref().map(|r| &r.weight)
    }

    /// The ancestor of `x ∈ A_from ∪ {*}` in stage `to ≤ from`.
    pub fn ancestor(&self, mut x: Option<usize>, from: usize, to: usize) -> Option<usize> {
        for k in (to + 1..=from).rev() {
            x = x.and_then(|i| self.stages[k].parent(i));
        }
        x
    }

    /// `ν_k` of the current measure (rescaled if a weight is set), `*` last.
    pub fn masses(&self, k: usize) -> Result<Vec<BigRational>, LimitError> {
        let stage = &self.stages[k];
        let n = stage.len();
        let Some(r) = &self.rescaled else {
            return Ok((0..=n)
                .map(|x| stage.mass_at((x < n).then_some(x)).clone())
                .collect());
        };
        let l = r.weight.stage;
        let base = r.weight.rescaled_masses(&self.stages[l])?;
        let lstage = &self.stages[l];
        let slot = |x: Option<usize>, len: usize| x.unwrap_or(len);
        if k >= l {
            Ok((0..=n)
                .map(|x| {
                    let x = (x < n).then_some(x);
                    let a = self.ancestor(x, k, l);
                    stage.mass_at(x) * &base[slot(a, lstage.len())] / lstage.mass_at(a)
                })
                .collect())
        } else {
            let mut out = vec![BigRational::zero(); n + 1];
            for (y, m) in base.iter().enumerate() {
                let y = (y < lstage.len()).then_some(y);
                out[slot(self.ancestor(y, l, k), n)] += m;
            }
            Ok(out)
        }
    }

    /// The law of `π_level` for points sampled at `depth`, which are
    /// conditioned on `π_depth ≠ *`.
    pub fn marginal_law(&self, level: usize, depth: usize) -> Result<Vec<BigRational>, LimitError> {
        let deep = self.masses(depth)?;
        let n = self.stages[level].len();
        let dn = self.stages[depth].len();
        let mut out = vec![BigRational::zero(); n + 1];
        let mut kept = BigRational::zero();
        for (y, m) in deep.iter().enumerate().take(dn) {
            out[self.ancestor(Some(y), depth, level).unwrap_or(n)] += m;
            kept += m;
        }
        Ok(out.into_iter().map(|m| m / &kept).collect())
    }

    /// Exact probability that the unary `symbol` holds at a point sampled
    /// at `depth`.
    pub fn unary_probability(
        &self,
        symbol: usize,
        depth: usize,
    ) -> Result<BigRational, LimitError> {
        if depth == 0 || depth > self.depth() {
            return Err(LimitError::InvalidArgument(format!(
                "depth must be in 1..={}",
                self.depth()
            )));
        }
        let masses = self.masses(depth)?;
        let stage = &self.stages[depth];
        let (mut hit, mut kept) = (BigRational::zero(), BigRational::zero());
        for (y, m) in masses.iter().enumerate().take(stage.len()) {
            if self.guide.fact(symbol, &[stage.handle(y)]) {
                hit += m;
            }
            kept += m;
        }
        Ok(hit / kept)
    }

    /// Frequency of the unary `symbol` on `trials` points sampled at `depth`.
    pub fn estimate_unary(
        &self,
        symbol: usize,
        depth: usize,
        trials: u64,
        seed: SeedKey,
    ) -> Result<StatReport, LimitError> {
        if trials == 0 {
            return Err(LimitError::InvalidArgument(
                "trials must be at least 1".into(),
            ));
        }
        let stage = &self.stages[depth.min(self.depth())];
        let hits = (0..trials)
            .map(|t| {
                let p = self.sample_point(seed.uniform(&[t as usize]), depth)?;
                Ok(self
                    .guide
                    .fact(symbol, &[stage.handle(p.path[depth].expect("off *"))])
                    as u64)
            })
            .sum::<Result<u64, LimitError>>()?;
        let name = self.guide.language().name(symbol);
        Ok(StatReport::bernoulli(
            format!("measure_of_{name}"),
            hits,
            trials,
            seed,
        ))
    }

    /// A copy of this handle whose measure is rescaled by `weight`.
    pub fn rescale(&self, weight: &Weight) -> Result<Self, LimitError>
    where
        G: Clone,
    {
        if weight.stage > self.depth() {
            return Err(LimitError::InvalidWeight(format!(
                "stage {} is not built",
                weight.stage
            )));
        }
        let masses = weight.rescaled_masses(&self.stages[weight.stage])?;
        let mut acc = 0.0;
        let cumulative = masses
            .iter()
            .map(|m| {
                acc += m.to_f64().unwrap_or(0.0);
                acc
            })
            .collect();
        let mut out = self.clone();
        out.rescaled = Some(Rescaled {
            weight: weight.clone(),
            cumulative,
        });
        Ok(out)
    }

    fn pick(weights: impl Iterator<Item = f64> + Clone, u: f64) -> usize {
        let total: f64 = weights.clone().sum();
        let target = u * total;
        let mut acc = 0.0;
        let mut last = 0;
        for (i, w) in weights.enumerate() {
            acc += w;
            last = i;
            if target < acc {
                return i;
            }
        }
        last
    }

    /// Steps from `x ∈ A_k ∪ {*}` to a preimage in stage `k + 1`, with
    /// probability proportional to mass.
    fn descend(&self, k: usize, x: Option<usize>, u: f64) -> Option<usize> {
        let next = &self.stages[k + 1];
        let (fibers, star) = &self.fibers[k];
        match x {
            Some(i) => {
                let f = &fibers[i];
                Some(f[Self::pick(f.iter().map(|&c| next.mass(c).to_f64().unwrap_or(0.0)), u)])
            }
            None => {
                let masses = star
                    .iter()
                    .map(|&c| next.mass(c))
                    .chain(std::iter::once(next.star_mass()));
                let i = Self::pick(masses.map(|m| m.to_f64().unwrap_or(0.0)), u);
                star.get(i).copied()
            }
        }
    }

    fn path_from(&self, v: &Uniform, depth: usize) -> Vec<Option<usize>> {
        let (start, first) = match &self.rescaled {
            Some(r) => {
                let l = r.weight.stage;
                let stage = &self.stages[l];
                let u = v.split(u64::MAX).value() * r.cumulative.last().copied().unwrap_or(1.0);
                let i = r
                    .cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(stage.len());
                (l, (i < stage.len()).then_some(i))
            }
            None => (0, None),
        };
        let top = depth.max(start);
        let mut path = vec![None; top + 1];
        path[start] = first;
        for k in (0..start).rev() {
            path[k] = path[k + 1].and_then(|i| self.stages[k + 1].parent(i));
        }
        for k in start..top {
            path[k + 1] = self.descend(k, path[k], v.split(k as u64).value());
        }
        path.truncate(depth + 1);
        path
    }

    /// Samples a point from `u`, restarting while `π_depth = *`.
    pub fn sample_point(&self, u: Uniform, depth: usize) -> Result<PathPoint, LimitError> {
        if depth == 0 || depth > self.depth() {
            return Err(LimitError::InvalidArgument(format!(
                "depth must be in 1..={}",
                self.depth()
            )));
        }
        for attempt in 0..MAX_ATTEMPTS {
            let path = self.path_from(&u.split(attempt), depth);
            if path[depth].is_some() {
                return Ok(PathPoint {
                    seed: u.to_hex(),
                    attempt,
                    path,
                });
            }
        }
        Err(LimitError::InvalidArgument(format!(
            "no point left * within {MAX_ATTEMPTS} attempts"
        )))
    }

    /// Extends a point to a deeper level with the same draws.
    pub fn extend_point(&self, p: &PathPoint, depth: usize) -> Result<PathPoint, LimitError> {
        if depth > self.depth() {
            return Err(LimitError::InvalidArgument(format!(
                "depth {depth} is not built"
            )));
        }
        let u = Uniform::from_hex(&p.seed)
            .ok_or_else(|| LimitError::InvalidArgument("bad point seed".into()))?;
        let path = self.path_from(&u.split(p.attempt), depth.max(p.depth()));
        Ok(PathPoint {
            seed: p.seed.clone(),
            attempt: p.attempt,
            path,
        })
    }

    /// The first pair of points with the same projection at `depth`.
    fn collision(points: &[PathPoint], depth: usize) -> Option<(usize, usize)> {
        let mut seen: BTreeMap<Option<usize>, usize> = BTreeMap::new();
        for (j, p) in points.iter().enumerate() {
            if let Some(&i) = seen.get(&p.path[depth]) {
                return Some((i, j));
            }
            seen.insert(p.path[depth], j);
        }
        None
    }

    /// Samples `m` points from the singleton uniforms of `seed` and reads
    /// their structure off the deepest built stage, up to `cap`, at which
    /// they project injectively. Stages are added while points collide.
    pub fn sample_structure(
        &mut self,
        m: usize,
        cap: usize,
        seed: SeedKey,
    ) -> Result<SampledStructure, LimitError> {
        let mut depth = self.depth().min(cap).max(1);
        self.ensure_depth(depth)?;
        let mut points = (0..m)
            .map(|i| self.sample_point(seed.uniform(&[i]), depth))
            .collect::<Result<Vec<_>, _>>()?;
        while let Some((i, j)) = Self::collision(&points, depth) {
            if depth >= cap {
                return Err(LimitError::Collision { i, j, depth });
            }
            depth += 1;
            self.ensure_depth(depth)?;
            points = points
                .iter()
                .map(|p| self.extend_point(p, depth))
                .collect::<Result<Vec<_>, _>>()?;
        }
        self.read_structure(points, depth)
    }

    /// The same as [`LimitHandle::sample_structure`] without adding stages.
    pub fn sample_structure_frozen(
        &self,
        m: usize,
        cap: usize,
        seed: SeedKey,
    ) -> Result<SampledStructure, LimitError> {
        let mut depth = self.depth().min(cap).max(1);
        let mut points = (0..m)
            .map(|i| self.sample_point(seed.uniform(&[i]), depth.min(self.depth())))
            .collect::<Result<Vec<_>, _>>()?;
        while let Some((i, j)) = Self::collision(&points, depth) {
            if depth >= cap.min(self.depth()) {
                return Err(LimitError::Collision { i, j, depth });
            }
            depth += 1;
            points = points
                .iter()
                .map(|p| self.extend_point(p, depth))
                .collect::<Result<Vec<_>, _>>()?;
        }
        self.read_structure(points, depth)
    }

    fn read_structure(
        &self,
        points: Vec<PathPoint>,
        depth: usize,
    ) -> Result<SampledStructure, LimitError> {
        let stage = &self.stages[depth];
        let handles: Vec<Handle> = points
            .iter()
            .map(|p| stage.handle(p.path[depth].expect("off *")))
            .collect();
        let lang = self.guide.language();
        let language = stage.language().to_vec();
        let sig = Signature::new(
            language
                .iter()
                .map(|&s| Symbol::new(lang.name(s), lang.arity(s)))
                .collect(),
        )?;
        let mut structure = FiniteStructure::new(sig, points.len());
        for (pos, &s) in language.iter().enumerate() {
            for args in argument_patterns(points.len(), lang.arity(s)) {
                let tuple: Vec<Handle> = args.iter().map(|&a| handles[a]).collect();
                if self.guide.fact(s, &tuple) {
                    structure.add_fact(pos, args)?;
                }
            }
        }
        Ok(SampledStructure {
            structure,
            points,
            depth,
            language,
            handles,
        })
    }

    /// Checks a sampled structure against the theory: universal axioms over
    /// its language, the scheduled omitted types, and unique 1-types.
    pub fn audit(&self, s: &SampledStructure) -> StructureAudit {
        let mz = self.guide.morleyization();
        let mut local = vec![None; mz.language().len()];
        for (pos, &sym) in s.language.iter().enumerate() {
            local[sym] = Some(pos);
        }
        let mut audit = StructureAudit::default();
        let n = s.structure.domain_size();

        for sentence in mz.theory().universal() {
            let syms = sentence.symbols();
            if !syms.iter().all(|&x| local[x].is_some()) {
                audit.universal_skipped += 1;
                continue;
            }
            audit.universal_checked += 1;
            if !holds_in(&s.structure, &local, sentence) {
                audit
                    .universal_violations
                    .push(sentence.render(mz.language()));
            }
        }

        for (q, oq) in mz.omitted().iter().enumerate() {
            let handled: Vec<usize> = self
                .schedule
                .iter()
                .filter(|e| e.omitted_type == Some(q))
                .map(|e| e.stage + 1)
                .collect();
            let literals: Vec<(usize, Vec<usize>, bool)> = oq
                .literals()
                .filter_map(|l| {
                    let node = mz.node(l.node);
                    let pos = local[node.symbol]?;
                    let map = node
                        .free_vars
                        .iter()
                        .map(|v| oq.vars.iter().position(|w| w == v).expect("covered"))
                        .collect();
                    Some((pos, map, l.positive))
                })
                .collect();
            for tuple in argument_patterns(n, oq.vars.len()) {
                let injective_at = |level: usize| {
                    let mut seen: BTreeMap<usize, Option<usize>> = BTreeMap::new();
                    tuple.iter().all(|&a| {
                        let img = s.points[a].path.get(level).copied().flatten();
                        img.is_some() && *seen.entry(a).or_insert(img) == img
                    }) && {
                        let mut imgs: Vec<Option<usize>> = seen.values().copied().collect();
                        imgs.sort_unstable();
                        imgs.windows(2).all(|w| w[0] != w[1])
                    }
                };
                if !handled.iter().any(|&l| l <= s.depth && injective_at(l)) {
                    continue;
                }
                audit.omitted_checked += 1;
                let realized = literals.iter().all(|(pos, map, positive)| {
                    let args: Vec<usize> = map.iter().map(|&i| tuple[i]).collect();
                    s.structure.holds(*pos, &args) == *positive
                });
                if realized {
                    audit
                        .omitted_violations
                        .push(format!("type {q} prefix realized by {tuple:?}"));
                }
            }
        }

        let sig = s.structure.signature();
        let mut types: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
        for a in 0..n {
            let fp: Vec<bool> = (0..sig.len())
                .map(|pos| s.structure.holds(pos, &vec![a; sig.arity(pos)]))
                .collect();
            types.entry(fp).or_default().push(a);
        }
        audit.one_types = types.len();
        audit.repeated_one_types = types.into_values().filter(|v| v.len() > 1).collect();
        audit
    }

    pub fn manifest(&self) -> Value {
        json!({
            "guide": self.guide.describe(),
            "stages": self.depth(),
            "schedule": self.schedule,
            "stage_summaries": self.stages.iter().zip(&self.reports).map(|(s, r)| stage_summary(s, Some(r))).collect::<Vec<_>>(),
            "logs": self.logs.iter().map(|l| json!({
                "stage": l.stage,
                "duplicated": l.duplicated,
                "new_witnesses": l.new_witnesses.len(),
                "fresh": l.fresh.is_some(),
                "schedule_symbol": l.added_schedule_symbol,
                "refuting": l.added_refuting,
                "separating": l.added_separating,
            })).collect::<Vec<_>>(),
            "weight": self.weight().map(|w| w.to_json()),
            "passed": self.passed(),
        })
    }
}

impl LimitHandle<KaleidoscopeGuide> {
    /// Rebuilds the handle a manifest describes and checks it reproduces
    /// the recorded stage summaries.
    pub fn from_manifest(v: &Value) -> Result<Self, LimitError> {
        let bad = |what: &str| LimitError::Manifest(format!("missing or invalid {what}"));
        let name = v["guide"]["name"]
            .as_str()
            .ok_or_else(|| bad("guide name"))?;
        if name != "kaleidoscope-predicate" {
            return Err(LimitError::Manifest(format!("unknown guide {name}")));
        }
        let seed = v["guide"]["seed"]
            .as_str()
            .ok_or_else(|| bad("guide seed"))?;
        let seed = u128::from_str_radix(seed, 16).map_err(|_| bad("guide seed"))?;
        let stages = v["stages"].as_u64().ok_or_else(|| bad("stages"))? as usize;
        let mut h = LimitHandle::build(kaleidoscope_guide(SeedKey(seed))?, stages)?;
        let rebuilt = h.manifest();
        if rebuilt["stage_summaries"] != v["stage_summaries"] {
            return Err(LimitError::Manifest(
                "rebuilt stages differ from the manifest".into(),
            ));
        }
        if let Some(w) = v.get("weight").filter(|w| !w.is_null()) {
            h = h.rescale(&Weight::from_json(w)?)?;
        }
        Ok(h)
    }
}

fn holds_in(m: &FiniteStructure, local: &[Option<usize>], s: &PrenexSentence) -> bool {
    fn go(
        m: &FiniteStructure,
        local: &[Option<usize>],
        s: &PrenexSentence,
        env: &mut Vec<usize>,
    ) -> bool {
        let i = env.len();
        if i == s.quantifiers.len() {
            return s.matrix.eval_with(env, &mut |sym, args: &[usize]| {
                m.holds(local[sym].expect("checked"), args)
            });
        }
        let want = s.quantifiers[i].0 == Quantifier::Exists;
        for a in 0..m.domain_size() {
            env.push(a);
            let r = go(m, local, s, env);
            env.pop();
            if r == want {
                return want;
            }
        }
        !want
    }
    go(m, local, s, &mut Vec::new())
}

/// A finite structure read off the limit, with the points behind it.
#[derive(Clone, Debug)]
pub struct SampledStructure {
    /// Over the sublanguage `L_depth`, in stage order.
    pub structure: FiniteStructure,
    pub points: Vec<PathPoint>,
    pub depth: usize,
    /// The symbols of the structure as indices of the full language.
    pub language: Vec<usize>,
    pub handles: Vec<Handle>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureAudit {
    pub universal_checked: usize,
    pub universal_skipped: usize,
    pub universal_violations: Vec<String>,
    pub omitted_checked: usize,
    pub omitted_violations: Vec<String>,
    pub one_types: usize,
    pub repeated_one_types: Vec<Vec<usize>>,
}

impl StructureAudit {
    pub fn passed(&self) -> bool {
        self.universal_violations.is_empty()
            && self.omitted_violations.is_empty()
            && self.repeated_one_types.is_empty()
    }
}

/// Counts of `π_level` over `samples` points drawn at `depth`, `*` last.
pub fn marginal_counts<G: GuideModel>(
    handle: &LimitHandle<G>,
    level: usize,
    depth: usize,
    samples: u64,
    seed: SeedKey,
) -> Result<Vec<u64>, LimitError> {
    let n = handle.stage(level).len();
    let mut counts = vec![0u64; n + 1];
    for t in 0..samples {
        let p = handle.sample_point(seed.uniform(&[t as usize]), depth)?;
        counts[p.path[level].unwrap_or(n)] += 1;
    }
    Ok(counts)
}

/// The limit as an exchangeable sampler: position `i` is the point drawn
/// from `ξ_{i}`, and facts are read at a fixed depth. Positions whose
/// points collide at that depth get no facts.
pub struct LimitSampler<G: GuideModel = KaleidoscopeGuide> {
    handle: LimitHandle<G>,
    depth: usize,
    signature: Signature,
}

impl<G: GuideModel> LimitSampler<G> {
    pub fn new(handle: LimitHandle<G>, depth: usize) -> Result<Self, LimitError> {
        if depth == 0 || depth > handle.depth() {
            return Err(LimitError::InvalidArgument(format!(
                "depth must be in 1..={}",
                handle.depth()
            )));
        }
        let lang = handle.guide().language();
        let signature = Signature::new(
            handle
                .stage(depth)
                .language()
                .iter()
                .map(|&s| Symbol::new(lang.name(s), lang.arity(s)))
                .collect(),
        )?;
        Ok(LimitSampler {
            handle,
            depth,
            signature,
        })
    }

    pub fn handle(&self) -> &LimitHandle<G> {
        &self.handle
    }

    pub fn point(&self, xi: &XiFamily, i: usize) -> PathPoint {
        self.handle
            .sample_point(xi.singleton(i), self.depth)
            .expect("depth checked at construction")
    }
}

impl<G: GuideModel> AhkSampler for LimitSampler<G> {
    fn signature(&self) -> &Signature {
        &self.signature
    }

    fn holds(&self, symbol: usize, pattern: &[usize], xi: &XiFamily) -> bool {
        let stage = self.handle.stage(self.depth);
        let mut positions: Vec<usize> = pattern.to_vec();
        positions.sort_unstable();
        positions.dedup();
        let images: Vec<(usize, usize)> = positions
            .iter()
            .map(|&p| (p, self.point(xi, p).path[self.depth].expect("off *")))
            .collect();
        let mut distinct: Vec<usize> = images.iter().map(|&(_, x)| x).collect();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < images.len() {
            return false;
        }
        let tuple: Vec<Handle> = pattern
            .iter()
            .map(|p| stage.handle(images.iter().find(|(q, _)| q == p).expect("present").1))
            .collect();
        self.handle.guide().fact(stage.language()[symbol], &tuple)
    }

    fn describe(&self) -> String {
        format!(
            "limit of {} stages read at depth {}",
            self.handle.depth(),
            self.depth
        )
    }
}
