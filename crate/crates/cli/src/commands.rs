use std::fs;
use std::path::Path;

use ergodic::ahk::{
    coherence_check, coherence_sweep, dissociation_test, estimate_measure, estimate_positive_types,
    invariance_test, sample, AhkSampler, SeedKey, StatReport,
};
use ergodic::gallery::build_sampler;
use ergodic::limit::{
    kaleidoscope_guide, stored_weights, BigRational, GuideModel, KaleidoscopeGuide, LimitError,
    LimitHandle, Weight,
};
use ergodic::logic::jsonl::{from_jsonl, to_jsonl};
use ergodic::logic::{argument_patterns, FiniteStructure, Permutation, QfFormula};
use ergodic::morley::{
    canonical_expand, check_pi2minus, infer_signature, morleyize, universal_violations,
    verify_reduct_roundtrip, FragmentFormula,
};
use ergodic::stats::{collision_stat, rootedness_check};
use serde::Serialize;
use serde_json::{json, Value};

use crate::run::{sha256_hex, CliError, FileHash};
use crate::{
    BuildLimitArgs, CoherenceArgs, CollideArgs, Command, DissocArgs, EstimateArgs, Format, Global,
    InvarianceArgs, LimitSampleArgs, MorleyizeArgs, PostypesArgs, RescaleArgs, RootsArgs,
    SampleArgs,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Flagged,
    Violated,
}

pub struct Outcome {
    pub body: String,
    pub status: Status,
    pub summary: Value,
}

pub struct Ctx {
    pub seed: SeedKey,
    pub trials: u64,
    pub format: Format,
    pub inputs: Vec<FileHash>,
}

impl Ctx {
    pub fn new(g: &Global) -> Self {
        Ctx {
            seed: g.seed,
            trials: g.trials,
            format: g.format,
            inputs: Vec::new(),
        }
    }

    fn read(&mut self, path: &Path) -> Result<String, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        self.inputs.push(FileHash {
            path: path.display().to_string(),
            sha256: sha256_hex(text.as_bytes()),
        });
        Ok(text)
    }

    fn jsonl_only(&self, what: &str) -> Result<(), CliError> {
        match self.format {
            Format::Jsonl => Ok(()),
            Format::Csv => Err(CliError::usage(format!("{what} has no CSV form"))),
        }
    }
}

pub fn dispatch(cmd: &Command, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    match cmd {
        Command::Sample(a) => sample_cmd(a, ctx),
        Command::Estimate(a) => estimate(a, ctx),
        Command::Dissoc(a) => dissoc(a, ctx),
        Command::Invariance(a) => invariance(a, ctx),
        Command::Coherence(a) => coherence(a, ctx),
        Command::Collide(a) => collide(a, ctx),
        Command::Roots(a) => roots(a, ctx),
        Command::Postypes(a) => postypes(a, ctx),
        Command::Morleyize(a) => morleyize_cmd(a, ctx),
        Command::BuildLimit(a) => build_limit(a, ctx),
        Command::LimitSample(a) => limit_sample(a, ctx),
        Command::Rescale(a) => rescale(a, ctx),
        Command::Replay(_) => Err(CliError::usage("replay is handled before dispatch")),
    }
}

fn sampler(spec: &str) -> Result<Box<dyn AhkSampler>, CliError> {
    build_sampler(spec).map_err(CliError::usage)
}

fn json_lines<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| serde_json::to_string(x).expect("serializable") + "\n")
        .collect()
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn stat_body(reports: &[StatReport], format: Format) -> String {
    match format {
        Format::Jsonl => json_lines(reports),
        Format::Csv => {
            let mut out = String::from(StatReport::CSV_HEADER);
            out.push('\n');
            for r in reports {
                out.push_str(&r.csv_row());
                out.push('\n');
            }
            out
        }
    }
}

fn flag_if(flagged: bool) -> Status {
    if flagged {
        Status::Flagged
    } else {
        Status::Pass
    }
}

fn structures_body(ms: &[FiniteStructure], format: Format) -> String {
    match format {
        Format::Jsonl => ms.iter().map(to_jsonl).collect(),
        Format::Csv => {
            let mut out = String::from("structure,rel,args\n");
            for (i, m) in ms.iter().enumerate() {
                for (s, args) in m.facts() {
                    let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                    out.push_str(&format!(
                        "{i},{},{}\n",
                        m.signature().name(s),
                        args.join(" ")
                    ));
                }
            }
            out
        }
    }
}

/// Splits concatenated JSON Lines structures at their header records.
fn parse_structures(text: &str) -> Result<Vec<FiniteStructure>, CliError> {
    let mut chunks: Vec<String> = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let v: Value = serde_json::from_str(line).map_err(CliError::usage)?;
        if v.get("domain_size").is_some() || chunks.is_empty() {
            chunks.push(String::new());
        }
        let last = chunks.last_mut().expect("pushed above");
        last.push_str(line);
        last.push('\n');
    }
    chunks
        .iter()
        .map(|c| from_jsonl(c).map_err(CliError::usage))
        .collect()
}

fn sample_cmd(a: &SampleArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let s = sampler(&a.sampler.sampler)?;
    let ms: Vec<FiniteStructure> = (0..a.count)
        .map(|i| sample(&*s, a.size, ctx.seed.derive(i)))
        .collect();
    let facts: usize = ms.iter().map(|m| m.fact_count()).sum();
    Ok(Outcome {
        body: structures_body(&ms, ctx.format),
        status: Status::Pass,
        summary: json!({"sampler": s.describe(), "structures": ms.len(), "facts": facts}),
    })
}

fn estimate(a: &EstimateArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let s = sampler(&a.sampler.sampler)?;
    let phi = QfFormula::parse(&a.formula, s.signature()).map_err(CliError::usage)?;
    let r = estimate_measure(&*s, &phi, ctx.trials, ctx.seed).map_err(CliError::usage)?;
    let flagged = a.target.is_some_and(|t| !r.within(t, a.k));
    Ok(Outcome {
        summary: json!({"estimate": r.estimate, "stderr": r.stderr, "target": a.target, "flagged": flagged}),
        body: stat_body(std::slice::from_ref(&r), ctx.format),
        status: flag_if(flagged),
    })
}

fn dissoc(a: &DissocArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let s = sampler(&a.sampler.sampler)?;
    let phi = QfFormula::parse(&a.phi, s.signature()).map_err(CliError::usage)?;
    let psi = QfFormula::parse(&a.psi, s.signature()).map_err(CliError::usage)?;
    let r = dissociation_test(&*s, &phi, &psi, ctx.trials, ctx.seed).map_err(CliError::usage)?;
    let body = match ctx.format {
        Format::Jsonl => json_lines(std::slice::from_ref(&r)),
        Format::Csv => stat_body(&r.reports(), Format::Csv),
    };
    Ok(Outcome {
        body,
        status: flag_if(r.flagged(a.k)),
        summary: json!({"gap": r.gap, "gap_stderr": r.gap_stderr, "z": r.z, "flagged": r.flagged(a.k)}),
    })
}

fn invariance(a: &InvarianceArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let s = sampler(&a.sampler.sampler)?;
    let phi = QfFormula::parse(&a.formula, s.signature()).map_err(CliError::usage)?;
    let images = a
        .perm
        .split(',')
        .map(|x| x.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::usage(format!("bad permutation {:?}: {e}", a.perm)))?;
    let sigma = Permutation::new(images).map_err(CliError::usage)?;
    let r = invariance_test(&*s, &phi, &sigma, ctx.trials, ctx.seed).map_err(CliError::usage)?;
    let body = match ctx.format {
        Format::Jsonl => json_lines(std::slice::from_ref(&r)),
        Format::Csv => stat_body(
            &[r.first.clone(), r.second.clone(), r.gap_report("gap")],
            Format::Csv,
        ),
    };
    Ok(Outcome {
        body,
        status: flag_if(r.flagged(a.k)),
        summary: json!({"gap": r.gap, "gap_stderr": r.gap_stderr, "z": r.z, "flagged": r.flagged(a.k)}),
    })
}

fn coherence(a: &CoherenceArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let s = sampler(&a.sampler.sampler)?;
    let r = match a.n {
        Some(n) => coherence_check(&*s, n, a.m.unwrap_or(n), ctx.trials, ctx.seed)
            .map_err(CliError::usage)?,
        None => coherence_sweep(&*s, a.max_n, ctx.trials, ctx.seed),
    };
    let body = match ctx.format {
        Format::Jsonl => json_lines(std::slice::from_ref(&r)),
        Format::Csv => {
            let mut out = String::from("trial,seed_hex,n,m,labels,sigma,condition\n");
            let join = |v: &[usize]| {
                v.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            for f in &r.failures {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{:?}\n",
                    f.trial,
                    f.seed.to_hex(),
                    f.n,
                    f.m,
                    join(&f.labels),
                    join(&f.sigma),
                    f.condition
                ));
            }
            out
        }
    };
    Ok(Outcome {
        body,
        status: if r.passed() {
            Status::Pass
        } else {
            Status::Violated
        },
        summary: json!({
            "sampler": r.sampler,
            "trials": r.trials,
            "failures": r.failures.len(),
            "first_failure_seed": r.failures.first().map(|f| f.seed.to_hex()),
        }),
    })
}

fn collide(a: &CollideArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let s = sampler(&a.sampler.sampler)?;
    let r = collision_stat(&*s, a.arity, ctx.trials, ctx.seed).map_err(CliError::usage)?;
    let flagged = a.target.is_some_and(|t| !r.within(t, a.k));
    Ok(Outcome {
        summary: json!({"estimate": r.estimate, "stderr": r.stderr, "target": a.target, "flagged": flagged}),
        body: stat_body(std::slice::from_ref(&r), ctx.format),
        status: flag_if(flagged),
    })
}

fn roots(a: &RootsArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let ms = match (&a.sampler, &a.input) {
        (_, Some(path)) => parse_structures(&ctx.read(path)?)?,
        (Some(spec), None) => {
            let s = sampler(spec)?;
            (0..a.count)
                .map(|i| sample(&*s, a.size, ctx.seed.derive(i)))
                .collect()
        }
        (None, None) => return Err(CliError::usage("give --sampler or --input")),
    };
    let mut lines = Vec::new();
    let mut failed = 0;
    let mut largest_repeated_root_set = 0;
    for (i, m) in ms.iter().enumerate() {
        let sig = m.signature();
        let chi = QfFormula::parse(&a.chi, sig).map_err(CliError::usage)?;
        let sub: Vec<usize> = match &a.sub {
            Some(names) => names
                .split(',')
                .map(|n| {
                    sig.index_of(n.trim())
                        .ok_or_else(|| CliError::usage(format!("unknown relation {n}")))
                })
                .collect::<Result<_, _>>()?,
            None => (0..sig.len()).collect(),
        };
        let report = rootedness_check(m, &chi, &sub).map_err(CliError::usage)?;
        if !report.passed {
            failed += 1;
        }
        for t in &report.types {
            if t.supports() > 1 {
                largest_repeated_root_set = largest_repeated_root_set.max(t.common.len());
            }
            lines.push(json!({
                "structure": i,
                "fingerprint": t.fingerprint.to_bitstring(),
                "realizations": t.tuples.len(),
                "tuples": t.tuples,
                "common": t.common,
                "rooted": t.rooted,
                "unrealized": t.unrealized,
            }));
        }
    }
    let body = match ctx.format {
        Format::Jsonl => json_lines(&lines),
        Format::Csv => {
            let mut out =
                String::from("structure,fingerprint,realizations,common,rooted,unrealized\n");
            for l in &lines {
                let common: Vec<String> = l["common"]
                    .as_array()
                    .into_iter()
                    .flatten()
                    .map(|c| c.to_string())
                    .collect();
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    l["structure"],
                    l["fingerprint"].as_str().unwrap_or_default(),
                    l["realizations"],
                    common.join(" "),
                    l["rooted"],
                    l["unrealized"]
                ));
            }
            out
        }
    };
    Ok(Outcome {
        body,
        status: if failed == 0 {
            Status::Pass
        } else {
            Status::Violated
        },
        summary: json!({
            "structures": ms.len(),
            "rooted_structures": ms.len() - failed,
            "largest_repeated_root_set": largest_repeated_root_set,
        }),
    })
}

fn postypes(a: &PostypesArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let s = sampler(&a.sampler.sampler)?;
    let types = estimate_positive_types(&*s, a.size, a.eps, ctx.trials, ctx.seed)
        .map_err(CliError::usage)?;
    let captured: f64 = types.iter().map(|t| t.frequency).sum();
    let rows: Vec<Value> = types
        .iter()
        .map(|t| json!({"fingerprint": t.fingerprint.to_bitstring(), "frequency": t.frequency, "stderr": t.stderr}))
        .collect();
    let body = match ctx.format {
        Format::Jsonl => json_lines(&rows),
        Format::Csv => {
            let mut out = String::from("fingerprint,frequency,stderr\n");
            for t in &types {
                out.push_str(&format!(
                    "{},{},{}\n",
                    t.fingerprint.to_bitstring(),
                    t.frequency,
                    t.stderr
                ));
            }
            out
        }
    };
    Ok(Outcome {
        body,
        status: Status::Pass,
        summary: json!({"types": types.len(), "captured": captured}),
    })
}

/// A structure on `1..=max_size` points whose facts are fair coins drawn
/// from `seed`.
fn random_structure(
    sig: &ergodic::logic::Signature,
    max_size: usize,
    seed: SeedKey,
) -> FiniteStructure {
    let n = 1 + (seed.derive_label("size").0 % max_size.max(1) as u128) as usize;
    let mut m = FiniteStructure::new(sig.clone(), n);
    for s in 0..sig.len() {
        for (j, args) in argument_patterns(n, sig.arity(s)).into_iter().enumerate() {
            if seed.uniform(&[s, j]).bit(0) {
                m.add_fact(s, args).expect("arguments in range");
            }
        }
    }
    m
}

fn morleyize_cmd(a: &MorleyizeArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    ctx.jsonl_only("morleyize")?;
    let text = ctx.read(&a.theory)?;
    let sentences = FragmentFormula::parse_theory(&text).map_err(CliError::usage)?;
    let base = infer_signature(&sentences).map_err(CliError::usage)?;
    let mz = morleyize(&base, &sentences).map_err(CliError::usage)?;
    let shape_ok = check_pi2minus(mz.theory());
    let mut structures = match &a.check {
        Some(path) => parse_structures(&ctx.read(path)?)?,
        None => Vec::new(),
    };
    structures
        .extend((0..a.random).map(|i| random_structure(&base, a.max_size, ctx.seed.derive(i))));
    let mut checks = Vec::new();
    let mut bad = 0;
    for (i, m) in structures.iter().enumerate() {
        let roundtrip = verify_reduct_roundtrip(m, &mz).map_err(CliError::usage)?;
        let expanded = canonical_expand(m, &mz).map_err(CliError::usage)?;
        let violations: Vec<String> = universal_violations(&expanded, &mz)
            .iter()
            .map(|s| s.render(mz.language()))
            .collect();
        if !roundtrip || !violations.is_empty() {
            bad += 1;
        }
        checks.push(json!({"structure": i, "size": m.domain_size(), "roundtrip": roundtrip, "violations": violations}));
    }
    let mut out = mz.to_json();
    out["pi2minus"] = json!(shape_ok);
    if !checks.is_empty() {
        out["checks"] = json!(checks);
    }
    Ok(Outcome {
        body: pretty(&out),
        status: if shape_ok && bad == 0 {
            Status::Pass
        } else {
            Status::Violated
        },
        summary: json!({
            "symbols": mz.language().len(),
            "axioms": mz.theory().axiom_count(),
            "omitted_types": mz.omitted().len(),
            "pi2minus": shape_ok,
            "checked": structures.len(),
            "failed": bad,
        }),
    })
}

fn limit_error(e: LimitError) -> CliError {
    match e {
        LimitError::DaggerViolation { .. }
        | LimitError::NoWitness { .. }
        | LimitError::NoRefutation { .. } => CliError::violated(e),
        _ => CliError::usage(e),
    }
}

fn load_handle(path: &Path, ctx: &mut Ctx) -> Result<LimitHandle<KaleidoscopeGuide>, CliError> {
    let v: Value = serde_json::from_str(&ctx.read(path)?).map_err(CliError::usage)?;
    LimitHandle::from_manifest(&v).map_err(limit_error)
}

fn build_limit(a: &BuildLimitArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    ctx.jsonl_only("build-limit")?;
    let h = LimitHandle::build(kaleidoscope_guide(ctx.seed).map_err(limit_error)?, a.stages)
        .map_err(limit_error)?;
    let last = h.stage(h.depth());
    Ok(Outcome {
        body: pretty(&h.manifest()),
        status: if h.passed() {
            Status::Pass
        } else {
            Status::Violated
        },
        summary: json!({
            "stages": h.depth(),
            "passed": h.passed(),
            "elements": last.len(),
            "language": last.language().len(),
            "max_mass": last.max_mass().to_string(),
        }),
    })
}

fn limit_sample(a: &LimitSampleArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    let mut h = load_handle(&a.manifest, ctx)?;
    let mut ms = Vec::new();
    let mut audits = Vec::new();
    let mut depths = Vec::new();
    for i in 0..a.count {
        let s = h
            .sample_structure(a.size, a.depth, ctx.seed.derive(i))
            .map_err(limit_error)?;
        audits.push(h.audit(&s));
        depths.push(s.depth);
        ms.push(s.structure);
    }
    let failed: Vec<usize> = audits
        .iter()
        .enumerate()
        .filter(|(_, a)| !a.passed())
        .map(|(i, _)| i)
        .collect();
    Ok(Outcome {
        body: structures_body(&ms, ctx.format),
        status: if failed.is_empty() {
            Status::Pass
        } else {
            Status::Violated
        },
        summary: json!({
            "structures": ms.len(),
            "depths": depths,
            "universal_checked": audits.iter().map(|a| a.universal_checked).sum::<usize>(),
            "omitted_checked": audits.iter().map(|a| a.omitted_checked).sum::<usize>(),
            "failed_audits": failed,
            "audits": audits.iter().filter(|a| !a.passed()).collect::<Vec<_>>(),
        }),
    })
}

fn rescale(a: &RescaleArgs, ctx: &mut Ctx) -> Result<Outcome, CliError> {
    ctx.jsonl_only("rescale")?;
    let h = load_handle(&a.manifest, ctx)?;
    if let Some(path) = &a.weight {
        let v: Value = serde_json::from_str(&ctx.read(path)?).map_err(CliError::usage)?;
        let w = Weight::from_json(&v).map_err(CliError::usage)?;
        let r = h.rescale(&w).map_err(CliError::usage)?;
        return Ok(Outcome {
            body: pretty(&r.manifest()),
            status: Status::Pass,
            summary: json!({"weight": w.to_json()}),
        });
    }
    let which = a.stored.expect("clap requires --stored or --weight") as usize;
    let found = match a.stage {
        Some(k) if k <= h.depth() => stored_weights(h.stage(k), h.guide()).map(|w| (k, w)),
        Some(k) => return Err(CliError::usage(format!("stage {k} is not built"))),
        None => (0..=h.depth()).find_map(|k| stored_weights(h.stage(k), h.guide()).map(|w| (k, w))),
    };
    let (level, (symbol, weights)) = found
        .ok_or_else(|| CliError::usage("no stage has a unary symbol that splits its elements"))?;
    let w = &weights[which];
    let r = h.rescale(w).map_err(CliError::usage)?;
    let depth = r.depth();
    let exact = r
        .unary_probability(symbol, depth)
        .map_err(CliError::usage)?;
    let exact_f64 = ratio_f64(&exact);
    let est = r
        .estimate_unary(symbol, depth, ctx.trials, ctx.seed)
        .map_err(CliError::usage)?;
    let name = r.guide().language().name(symbol).to_string();
    let mut out = r.manifest();
    out["split"] = json!({
        "symbol": name,
        "stage": level,
        "stored": which,
        "exact": exact.to_string(),
        "exact_f64": exact_f64,
        "estimate": est,
    });
    Ok(Outcome {
        body: pretty(&out),
        status: flag_if(!est.within(exact_f64, 3.0)),
        summary: json!({"symbol": name, "stage": level, "exact": exact.to_string(), "estimate": est.estimate, "stderr": est.stderr}),
    })
}

fn ratio_f64(r: &BigRational) -> f64 {
    let parse = |s: String| s.parse::<f64>().unwrap_or(f64::NAN);
    parse(r.numer().to_string()) / parse(r.denom().to_string())
}
