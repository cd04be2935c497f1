use crate::logic::{argument_patterns, FiniteStructure};

use super::theory::{Morleyization, NodeKind, OmittedType, PrenexSentence, Quantifier};
use super::MorleyError;

/// Truth table of one closure node over `domain^arity`, indexed by the
/// mixed-radix rank of the tuple.
struct Table {
    values: Vec<bool>,
}

fn rank(n: usize, tuple: impl Iterator<Item = usize>) -> usize {
    tuple.fold(0, |acc, a| acc * n + a)
}

/// The canonical expansion of `m` to `L'`: every `R_φ` is interpreted by
/// evaluating `φ` in `m`. Quantifiers range over the finite domain and
/// schemes over their materialized instances.
pub fn canonical_expand(
    m: &FiniteStructure,
    mz: &Morleyization,
) -> Result<FiniteStructure, MorleyError> {
    let lang = mz.language();
    let n = m.domain_size();
    let mut out = FiniteStructure::new(lang.clone(), n);
    // base symbols of m, looked up by name in L'
    let mut base_in_m = vec![None; lang.len()];
    for (s, sym) in m.signature().symbols().iter().enumerate() {
        let t = lang
            .index_of(&sym.name)
            .ok_or_else(|| MorleyError::UnknownSymbol(sym.name.clone()))?;
        base_in_m[t] = Some(s);
    }
    for (s, args) in m.facts() {
        let t = lang.index_of(m.signature().name(s)).expect("checked above");
        out.add_fact(t, args.to_vec())?;
    }

    let mut tables: Vec<Table> = Vec::with_capacity(mz.nodes().len());
    for node in mz.nodes() {
        let k = node.free_vars.len();
        // positions of a child's free variables within this node's
        // variables, extended by the bound variable when there is one
        let child_map = |child: usize, extra: Option<&str>| -> Vec<usize> {
            mz.node(child)
                .free_vars
                .iter()
                .map(|v| {
                    if Some(v.as_str()) == extra {
                        k
                    } else {
                        node.free_vars
                            .iter()
                            .position(|w| w == v)
                            .expect("child variables are covered")
                    }
                })
                .collect()
        };
        let lookup = |tables: &Vec<Table>, child: usize, map: &[usize], env: &[usize]| -> bool {
            tables[child].values[rank(n, map.iter().map(|&p| env[p]))]
        };
        let mut values = Vec::with_capacity(n.pow(k as u32));
        let mut env = vec![0usize; k + 1];
        for tuple in argument_patterns(n, k) {
            env[..k].copy_from_slice(&tuple);
            let v = match &node.kind {
                NodeKind::Rel { symbol, args } => {
                    let s = base_in_m[*symbol].ok_or_else(|| {
                        MorleyError::UnknownSymbol(lang.name(*symbol).to_string())
                    })?;
                    let a: Vec<usize> = args
                        .iter()
                        .map(|v| env[node.free_vars.iter().position(|w| w == v).unwrap()])
                        .collect();
                    m.holds(s, &a)
                }
                NodeKind::Eq(a, b) => {
                    let p = |v: &String| env[node.free_vars.iter().position(|w| w == v).unwrap()];
                    p(a) == p(b)
                }
                NodeKind::Not(c) => !lookup(&tables, *c, &child_map(*c, None), &env),
                NodeKind::And(cs) | NodeKind::SchemeAnd { instances: cs, .. } => cs
                    .iter()
                    .all(|&c| lookup(&tables, c, &child_map(c, None), &env)),
                NodeKind::Or(cs) | NodeKind::SchemeOr { instances: cs, .. } => cs
                    .iter()
                    .any(|&c| lookup(&tables, c, &child_map(c, None), &env)),
                NodeKind::Forall { var, child } | NodeKind::Exists { var, child } => {
                    let map = child_map(*child, Some(var));
                    let mut hits = (0..n).map(|y| {
                        env[k] = y;
                        lookup(&tables, *child, &map, &env)
                    });
                    if matches!(node.kind, NodeKind::Forall { .. }) {
                        hits.all(|b| b)
                    } else {
                        hits.any(|b| b)
                    }
                }
            };
            if v {
                out.add_fact(node.symbol, tuple.clone())?;
            }
            values.push(v);
        }
        tables.push(Table { values });
    }
    Ok(out)
}

/// Expanding and then forgetting the new symbols gives back `m`.
pub fn verify_reduct_roundtrip(
    m: &FiniteStructure,
    mz: &Morleyization,
) -> Result<bool, MorleyError> {
    let expanded = canonical_expand(m, mz)?;
    let back = expanded.reduct(m.signature())?;
    Ok(back.domain_size() == m.domain_size() && back.facts().eq(m.facts()))
}

/// Finite-domain truth of a prenex sentence in a structure over `L'`.
pub fn satisfies(m: &FiniteStructure, sentence: &PrenexSentence) -> bool {
    fn go(m: &FiniteStructure, s: &PrenexSentence, env: &mut Vec<usize>) -> bool {
        let i = env.len();
        if i == s.quantifiers.len() {
            return s
                .matrix
                .eval_with(env, &mut |sym, args: &[usize]| m.holds(sym, args));
        }
        let mut results = (0..m.domain_size()).map(|a| {
            env.push(a);
            let r = go(m, s, env);
            env.pop();
            r
        });
        match s.quantifiers[i].0 {
            Quantifier::Forall => results.all(|b| b),
            Quantifier::Exists => results.any(|b| b),
        }
    }
    go(m, sentence, &mut Vec::new())
}

/// The universal defining axioms that fail in `m` (assertions and pithy
/// axioms are not checked).
pub fn universal_violations<'a>(
    m: &FiniteStructure,
    mz: &'a Morleyization,
) -> Vec<&'a PrenexSentence> {
    mz.theory()
        .defining
        .iter()
        .flat_map(|a| a.sentences.iter())
        .filter(|s| s.is_universal() && !satisfies(m, s))
        .collect()
}

/// Tuples of `m` realizing the materialized part of `q`.
pub fn realizations(m: &FiniteStructure, mz: &Morleyization, q: &OmittedType) -> Vec<Vec<usize>> {
    argument_patterns(m.domain_size(), q.vars.len())
        .into_iter()
        .filter(|t| {
            q.literals().all(|l| {
                let node = mz.node(l.node);
                let args: Vec<usize> = node
                    .free_vars
                    .iter()
                    .map(|v| t[q.vars.iter().position(|w| w == v).expect("covered")])
                    .collect();
                m.holds(node.symbol, &args) == l.positive
            })
        })
        .collect()
}
