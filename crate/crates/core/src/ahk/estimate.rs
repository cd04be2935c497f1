use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::logic::{Permutation, QfFormula, TypeFingerprint};

use super::sampler::{type_function, AhkSampler, XiFamily};
use super::{AhkError, SeedKey};

pub const DEFAULT_SIGMA: f64 = 3.0;

/// A Monte Carlo estimate and the seed that reproduces it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub statistic: String,
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
    pub seed: SeedKey,
}

impl StatReport {
    pub fn bernoulli(
        statistic: impl Into<String>,
        successes: u64,
        trials: u64,
        seed: SeedKey,
    ) -> Self {
        let p = successes as f64 / trials as f64;
        StatReport {
            statistic: statistic.into(),
            estimate: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
            seed,
        }
    }

    /// `|estimate - target| <= k * stderr`. A zero stderr demands equality.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.estimate - target).abs() <= k * self.stderr + 1e-12
    }

    pub fn z_against(&self, target: f64) -> f64 {
        studentize(self.estimate - target, self.stderr)
    }

    pub const CSV_HEADER: &'static str = "statistic,estimate,stderr,trials,seed_hex";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.statistic,
            self.estimate,
            self.stderr,
            self.trials,
            self.seed.to_hex()
        )
    }
}

/// `gap / se`, with `0/0 = 0`.
pub fn studentize(gap: f64, se: f64) -> f64 {
    if se > 0.0 {
        gap / se
    } else if gap == 0.0 {
        0.0
    } else {
        gap.signum() * f64::INFINITY
    }
}

fn check_trials(trials: u64) -> Result<(), AhkError> {
    if trials == 0 {
        return Err(AhkError::InvalidArgument(
            "trials must be at least 1".into(),
        ));
    }
    Ok(())
}

fn eval_on(sampler: &dyn AhkSampler, phi: &QfFormula, xi: &XiFamily, positions: &[usize]) -> bool {
    phi.eval_with(positions, &mut |s, args: &[usize]| {
        sampler.holds(s, args, xi)
    })
}

/// `μ(φ)` estimated on the distinct tuple `(0..m)`, fresh `ξ` per trial.
pub fn estimate_measure(
    sampler: &dyn AhkSampler,
    phi: &QfFormula,
    trials: u64,
    seed: SeedKey,
) -> Result<StatReport, AhkError> {
    check_trials(trials)?;
    phi.validate(sampler.signature())?;
    let m = phi.num_vars();
    let positions: Vec<usize> = (0..m).collect();
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let xi = XiFamily::new(seed.derive(t), positions.clone());
            eval_on(sampler, phi, &xi, &positions) as u64
        })
        .sum();
    Ok(StatReport::bernoulli("measure", hits, trials, seed))
}

/// Result of a paired comparison between two estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub first: StatReport,
    pub second: StatReport,
    pub gap: f64,
    pub gap_stderr: f64,
    pub z: f64,
}

impl GapReport {
    pub fn flagged(&self, k: f64) -> bool {
        self.z.abs() > k
    }

    pub fn gap_report(&self, statistic: &str) -> StatReport {
        StatReport {
            statistic: statistic.into(),
            estimate: self.gap,
            stderr: self.gap_stderr,
            trials: self.first.trials,
            seed: self.first.seed,
        }
    }
}

/// Estimates `μ(φ(ā))` and `μ(φ(σ(ā)))` with `ā = (0..|σ|)` under common
/// randomness, so the identity gives a gap of exactly 0.
pub fn invariance_test(
    sampler: &dyn AhkSampler,
    phi: &QfFormula,
    sigma: &Permutation,
    trials: u64,
    seed: SeedKey,
) -> Result<GapReport, AhkError> {
    check_trials(trials)?;
    phi.validate(sampler.signature())?;
    let m = phi.num_vars();
    if sigma.len() < m {
        return Err(AhkError::InvalidArgument(format!(
            "permutation of {} points cannot act on {m} variables",
            sigma.len()
        )));
    }
    let base: Vec<usize> = (0..sigma.len()).collect();
    let moved: Vec<usize> = base.iter().map(|&i| sigma.apply(i)).collect();
    let positions: Vec<usize> = (0..m).collect();
    let (a, b, d2): (u64, u64, u64) = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = seed.derive(t);
            let x = eval_on(sampler, phi, &XiFamily::new(s, base.clone()), &positions) as i64;
            let y = eval_on(sampler, phi, &XiFamily::new(s, moved.clone()), &positions) as i64;
            (x as u64, y as u64, ((x - y) * (x - y)) as u64)
        })
        .reduce(|| (0, 0, 0), |p, q| (p.0 + q.0, p.1 + q.1, p.2 + q.2));
    let tf = trials as f64;
    let gap = (a as f64 - b as f64) / tf;
    // paired differences D = X - Y: var(D) = E[D²] - gap²
    let var = (d2 as f64 / tf - gap * gap).max(0.0);
    let gap_stderr = (var / tf).sqrt();
    Ok(GapReport {
        first: StatReport::bernoulli("measure_at_a", a, trials, seed),
        second: StatReport::bernoulli("measure_at_sigma_a", b, trials, seed),
        gap,
        gap_stderr,
        z: studentize(gap, gap_stderr),
    })
}

/// Joint and marginal frequencies of `φ` and `ψ` on disjoint tuples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissociationReport {
    pub joint: StatReport,
    pub phi: StatReport,
    pub psi: StatReport,
    pub product: f64,
    pub gap: f64,
    pub gap_stderr: f64,
    pub z: f64,
}

impl DissociationReport {
    pub fn flagged(&self, k: f64) -> bool {
        self.z.abs() > k
    }

    pub fn reports(&self) -> Vec<StatReport> {
        let gap = StatReport {
            statistic: "gap".into(),
            estimate: self.gap,
            stderr: self.gap_stderr,
            trials: self.joint.trials,
            seed: self.joint.seed,
        };
        vec![self.joint.clone(), self.phi.clone(), self.psi.clone(), gap]
    }
}

/// Dissociation test with `φ` on `(0..m₁)` and `ψ` on `(m₁..m₁+m₂)`.
pub fn dissociation_test(
    sampler: &dyn AhkSampler,
    phi: &QfFormula,
    psi: &QfFormula,
    trials: u64,
    seed: SeedKey,
) -> Result<DissociationReport, AhkError> {
    let m1 = phi.num_vars();
    let a: Vec<usize> = (0..m1).collect();
    let b: Vec<usize> = (m1..m1 + psi.num_vars()).collect();
    dissociation_test_on(sampler, phi, &a, psi, &b, trials, seed)
}

/// Dissociation test on explicit label tuples, which must not share labels.
pub fn dissociation_test_on(
    sampler: &dyn AhkSampler,
    phi: &QfFormula,
    a: &[usize],
    psi: &QfFormula,
    b: &[usize],
    trials: u64,
    seed: SeedKey,
) -> Result<DissociationReport, AhkError> {
    check_trials(trials)?;
    phi.validate(sampler.signature())?;
    psi.validate(sampler.signature())?;
    if let Some(&shared) = a.iter().find(|x| b.contains(x)) {
        return Err(AhkError::OverlappingTuples(shared));
    }
    if a.len() < phi.num_vars() || b.len() < psi.num_vars() {
        return Err(AhkError::InvalidArgument(
            "tuple shorter than the formula's variables".into(),
        ));
    }
    let mut labels: Vec<usize> = a.to_vec();
    labels.extend_from_slice(b);
    let mut sorted = labels.clone();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(AhkError::RepeatedLabel(w[0]));
    }
    let pa: Vec<usize> = (0..a.len()).collect();
    let pb: Vec<usize> = (a.len()..labels.len()).collect();
    let (nx, ny, nxy): (u64, u64, u64) = (0..trials)
        .into_par_iter()
        .map(|t| {
            let xi = XiFamily::new(seed.derive(t), labels.clone());
            let x = eval_on(sampler, phi, &xi, &pa) as u64;
            let y = eval_on(sampler, psi, &xi, &pb) as u64;
            (x, y, x * y)
        })
        .reduce(|| (0, 0, 0), |p, q| (p.0 + q.0, p.1 + q.1, p.2 + q.2));
    let tf = trials as f64;
    let (px, py, pxy) = (nx as f64 / tf, ny as f64 / tf, nxy as f64 / tf);
    let gap = pxy - px * py;
    // delta-method variance of p̂xy - p̂x p̂y from the multinomial cell
    // counts: IF = (XY - pxy) - py (X - px) - px (Y - py)
    let cells = [
        (1.0, 1.0, pxy),
        (1.0, 0.0, px - pxy),
        (0.0, 1.0, py - pxy),
        (0.0, 0.0, 1.0 - px - py + pxy),
    ];
    let var: f64 = cells
        .iter()
        .map(|&(x, y, w)| {
            let inf = (x * y - pxy) - py * (x - px) - px * (y - py);
            w.max(0.0) * inf * inf
        })
        .sum();
    let gap_stderr = (var / tf).sqrt();
    Ok(DissociationReport {
        joint: StatReport::bernoulli("joint", nxy, trials, seed),
        phi: StatReport::bernoulli("phi", nx, trials, seed),
        psi: StatReport::bernoulli("psi", ny, trials, seed),
        product: px * py,
        gap,
        gap_stderr,
        z: studentize(gap, gap_stderr),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoherenceCondition {
    Restriction,
    Permutation,
}

/// A single failed coherence check, reproducible from its seed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoherenceFailure {
    pub trial: u64,
    pub seed: SeedKey,
    pub n: usize,
    pub m: usize,
    pub labels: Vec<usize>,
    pub sigma: Vec<usize>,
    pub condition: CoherenceCondition,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub sampler: String,
    pub trials: u64,
    pub seed: SeedKey,
    pub failures: Vec<CoherenceFailure>,
}

impl CoherenceReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

const LABEL_RANGE: usize = 1 << 20;

/// One coherence configuration: the tuple of labels, `ξ` seed and `σ` are
/// drawn from `seed`.
fn coherence_trial(
    sampler: &dyn AhkSampler,
    n: usize,
    m: usize,
    trial: u64,
    seed: SeedKey,
) -> Vec<CoherenceFailure> {
    let mut rng = ChaCha8Rng::from_seed(seed_bytes(seed));
    let labels: Vec<usize> = index::sample(&mut rng, LABEL_RANGE, n).into_vec();
    let mut sigma: Vec<usize> = (0..n).collect();
    sigma.shuffle(&mut rng);
    let xi_seed = seed.derive_label("xi");
    let xi = XiFamily::new(xi_seed, labels.clone());
    let full = type_function(sampler, &xi);
    let mut out = Vec::new();
    let fail = |condition| CoherenceFailure {
        trial,
        seed,
        n,
        m,
        labels: labels.clone(),
        sigma: sigma.clone(),
        condition,
    };
    if type_function(sampler, &xi.truncated(m)) != full.restrict(m) {
        out.push(fail(CoherenceCondition::Restriction));
    }
    let perm = Permutation::new(sigma.clone()).expect("shuffle is a bijection");
    if type_function(sampler, &xi.permuted(&sigma)) != full.permute(&perm) {
        out.push(fail(CoherenceCondition::Permutation));
    }
    out
}

fn seed_bytes(seed: SeedKey) -> [u8; 32] {
    let mut bytes = [0u8; 32];
    bytes[..16].copy_from_slice(&seed.0.to_be_bytes());
    bytes[16..].copy_from_slice(&seed.derive_label("rng").0.to_be_bytes());
    bytes
}

/// Exact coherence at fixed `n` and `m`.
pub fn coherence_check(
    sampler: &dyn AhkSampler,
    n: usize,
    m: usize,
    trials: u64,
    seed: SeedKey,
) -> Result<CoherenceReport, AhkError> {
    if m > n {
        return Err(AhkError::InvalidArgument(format!(
            "m = {m} exceeds n = {n}"
        )));
    }
    let failures = (0..trials)
        .into_par_iter()
        .flat_map_iter(|t| coherence_trial(sampler, n, m, t, seed.derive(t)))
        .collect();
    Ok(CoherenceReport {
        sampler: sampler.describe(),
        trials,
        seed,
        failures,
    })
}

/// Exact coherence over random configurations with `1 ≤ n ≤ max_n` and
/// `0 ≤ m ≤ n`.
pub fn coherence_sweep(
    sampler: &dyn AhkSampler,
    max_n: usize,
    trials: u64,
    seed: SeedKey,
) -> CoherenceReport {
    let failures = (0..trials)
        .into_par_iter()
        .flat_map_iter(|t| {
            let s = seed.derive(t);
            let size = s.derive_label("size").0;
            let n = 1 + (size % max_n.max(1) as u128) as usize;
            let m = ((size >> 64) % (n as u128 + 1)) as usize;
            coherence_trial(sampler, n, m, t, s)
        })
        .collect();
    CoherenceReport {
        sampler: sampler.describe(),
        trials,
        seed,
        failures,
    }
}

/// Empirical quantifier-free types of `(0..n)` with frequency at least `eps`,
/// most frequent first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositiveType {
    pub fingerprint: TypeFingerprint,
    pub frequency: f64,
    pub stderr: f64,
}

pub fn estimate_positive_types(
    sampler: &dyn AhkSampler,
    n: usize,
    eps: f64,
    trials: u64,
    seed: SeedKey,
) -> Result<Vec<PositiveType>, AhkError> {
    check_trials(trials)?;
    if eps <= 0.0 || eps.is_nan() {
        return Err(AhkError::InvalidArgument(
            "threshold must be positive".into(),
        ));
    }
    let labels: Vec<usize> = (0..n).collect();
    let types: Vec<TypeFingerprint> = (0..trials)
        .into_par_iter()
        .map(|t| type_function(sampler, &XiFamily::new(seed.derive(t), labels.clone())))
        .collect();
    let mut counts: BTreeMap<TypeFingerprint, u64> = BTreeMap::new();
    for fp in types {
        *counts.entry(fp).or_default() += 1;
    }
    let tf = trials as f64;
    let mut out: Vec<PositiveType> = counts
        .into_iter()
        .map(|(fingerprint, c)| {
            let p = c as f64 / tf;
            PositiveType {
                fingerprint,
                frequency: p,
                stderr: (p * (1.0 - p) / tf).sqrt(),
            }
        })
        .filter(|t| t.frequency >= eps)
        .collect();
    // stable sort keeps fingerprint order among ties
    out.sort_by(|a, b| b.frequency.total_cmp(&a.frequency));
    Ok(out)
}

/// Structural audit of which `ξ` values a sampler reads.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadAudit {
    pub atoms_checked: u64,
    /// Some atom read `ξ_∅`.
    pub reads_empty_set: bool,
    /// Some atom read a set not contained in its arguments.
    pub reads_outside_arguments: bool,
    /// Every read was of a singleton.
    pub random_free: bool,
}

impl ReadAudit {
    /// Atoms depend only on their own arguments and never on `ξ_∅`.
    pub fn dissociated(&self) -> bool {
        !self.reads_empty_set && !self.reads_outside_arguments
    }
}

/// Records the reads made by every atom on `trials` random tuples of size
/// `n`.
pub fn audit_reads(sampler: &dyn AhkSampler, n: usize, trials: u64, seed: SeedKey) -> ReadAudit {
    let sig = sampler.signature();
    let mut audit = ReadAudit {
        random_free: true,
        ..ReadAudit::default()
    };
    for t in 0..trials {
        let s = seed.derive(t);
        let mut rng = ChaCha8Rng::from_seed(seed_bytes(s));
        let labels = index::sample(&mut rng, LABEL_RANGE, n).into_vec();
        let xi = XiFamily::recording(s.derive_label("xi"), labels);
        for sym in 0..sig.len() {
            for pattern in crate::logic::argument_patterns(n, sig.arity(sym)) {
                sampler.holds(sym, &pattern, &xi);
                audit.atoms_checked += 1;
                for read in xi.take_reads() {
                    audit.reads_empty_set |= read.is_empty();
                    audit.reads_outside_arguments |= read.iter().any(|p| !pattern.contains(p));
                    audit.random_free &= read.len() == 1;
                }
            }
        }
    }
    audit
}
