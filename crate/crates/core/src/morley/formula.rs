use std::collections::BTreeSet;
use std::fmt;

use crate::sexpr::{self, Sexp};

use super::MorleyError;

/// Index of a symbol inside an indexed family such as `P_n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IndexTerm {
    Lit(usize),
    Var(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelRef {
    Named(String),
    Indexed { prefix: String, index: IndexTerm },
}

impl RelRef {
    /// The concrete symbol name, if no index variable remains.
    pub fn ground_name(&self) -> Option<String> {
        match self {
            RelRef::Named(n) => Some(n.clone()),
            RelRef::Indexed {
                prefix,
                index: IndexTerm::Lit(i),
            } => Some(format!("{prefix}{i}")),
            RelRef::Indexed { .. } => None,
        }
    }
}

/// Formulas of a countable fragment, with countable conjunctions and
/// disjunctions given as schemes: an index variable, a materialized prefix
/// length and a body that generates instance `i` by substitution.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FragmentFormula {
    Atom {
        rel: RelRef,
        args: Vec<String>,
    },
    Eq(String, String),
    Not(Box<FragmentFormula>),
    And(Vec<FragmentFormula>),
    Or(Vec<FragmentFormula>),
    Forall(String, Box<FragmentFormula>),
    Exists(String, Box<FragmentFormula>),
    SchemeAnd {
        index: String,
        depth: usize,
        body: Box<FragmentFormula>,
    },
    SchemeOr {
        index: String,
        depth: usize,
        body: Box<FragmentFormula>,
    },
}

impl FragmentFormula {
    pub fn atom(rel: &str, args: &[&str]) -> Self {
        FragmentFormula::Atom {
            rel: RelRef::Named(rel.into()),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn indexed_atom(prefix: &str, index: IndexTerm, args: &[&str]) -> Self {
        FragmentFormula::Atom {
            rel: RelRef::Indexed {
                prefix: prefix.into(),
                index,
            },
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn not(f: FragmentFormula) -> Self {
        FragmentFormula::Not(Box::new(f))
    }

    pub fn forall(var: &str, f: FragmentFormula) -> Self {
        FragmentFormula::Forall(var.into(), Box::new(f))
    }

    pub fn exists(var: &str, f: FragmentFormula) -> Self {
        FragmentFormula::Exists(var.into(), Box::new(f))
    }

    pub fn implies(a: FragmentFormula, b: FragmentFormula) -> Self {
        FragmentFormula::Or(vec![FragmentFormula::not(a), b])
    }

    pub fn iff(a: FragmentFormula, b: FragmentFormula) -> Self {
        FragmentFormula::And(vec![
            FragmentFormula::implies(a.clone(), b.clone()),
            FragmentFormula::implies(b, a),
        ])
    }

    /// Free first-order variables, sorted by name.
    pub fn free_vars(&self) -> Vec<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out.into_iter().collect()
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        let mut add = |v: &String, bound: &Vec<String>| {
            if !bound.contains(v) {
                out.insert(v.clone());
            }
        };
        match self {
            FragmentFormula::Atom { args, .. } => args.iter().for_each(|a| add(a, bound)),
            FragmentFormula::Eq(a, b) => {
                add(a, bound);
                add(b, bound);
            }
            FragmentFormula::Not(f) => f.collect_free(bound, out),
            FragmentFormula::And(fs) | FragmentFormula::Or(fs) => {
                fs.iter().for_each(|f| f.collect_free(bound, out))
            }
            FragmentFormula::Forall(v, f) | FragmentFormula::Exists(v, f) => {
                bound.push(v.clone());
                f.collect_free(bound, out);
                bound.pop();
            }
            FragmentFormula::SchemeAnd { body, .. } | FragmentFormula::SchemeOr { body, .. } => {
                body.collect_free(bound, out)
            }
        }
    }

    /// Substitutes the literal `value` for the index variable `index`.
    pub fn instantiate(&self, index: &str, value: usize) -> FragmentFormula {
        let sub = |f: &FragmentFormula| Box::new(f.instantiate(index, value));
        match self {
            FragmentFormula::Atom {
                rel:
                    RelRef::Indexed {
                        prefix,
                        index: IndexTerm::Var(v),
                    },
                args,
            } if v == index => FragmentFormula::Atom {
                rel: RelRef::Indexed {
                    prefix: prefix.clone(),
                    index: IndexTerm::Lit(value),
                },
                args: args.clone(),
            },
            FragmentFormula::Atom { .. } | FragmentFormula::Eq(..) => self.clone(),
            FragmentFormula::Not(f) => FragmentFormula::Not(sub(f)),
            FragmentFormula::And(fs) => {
                FragmentFormula::And(fs.iter().map(|f| f.instantiate(index, value)).collect())
            }
            FragmentFormula::Or(fs) => {
                FragmentFormula::Or(fs.iter().map(|f| f.instantiate(index, value)).collect())
            }
            FragmentFormula::Forall(v, f) => FragmentFormula::Forall(v.clone(), sub(f)),
            FragmentFormula::Exists(v, f) => FragmentFormula::Exists(v.clone(), sub(f)),
            // an inner scheme over the same index variable shadows it
            FragmentFormula::SchemeAnd { index: i, .. }
            | FragmentFormula::SchemeOr { index: i, .. }
                if i == index =>
            {
                self.clone()
            }
            FragmentFormula::SchemeAnd {
                index: i,
                depth,
                body,
            } => FragmentFormula::SchemeAnd {
                index: i.clone(),
                depth: *depth,
                body: sub(body),
            },
            FragmentFormula::SchemeOr {
                index: i,
                depth,
                body,
            } => FragmentFormula::SchemeOr {
                index: i.clone(),
                depth: *depth,
                body: sub(body),
            },
        }
    }

    /// Every relation reference in the formula (with index variables left
    /// as they are).
    pub fn relations(&self) -> Vec<(RelRef, usize)> {
        let mut out = Vec::new();
        self.collect_relations(&mut out);
        out
    }

    fn collect_relations(&self, out: &mut Vec<(RelRef, usize)>) {
        match self {
            FragmentFormula::Atom { rel, args } => out.push((rel.clone(), args.len())),
            FragmentFormula::Eq(..) => {}
            FragmentFormula::Not(f)
            | FragmentFormula::Forall(_, f)
            | FragmentFormula::Exists(_, f)
            | FragmentFormula::SchemeAnd { body: f, .. }
            | FragmentFormula::SchemeOr { body: f, .. } => f.collect_relations(out),
            FragmentFormula::And(fs) | FragmentFormula::Or(fs) => {
                fs.iter().for_each(|f| f.collect_relations(out))
            }
        }
    }

    pub fn to_sexp(&self) -> Sexp {
        let a = |s: &str| Sexp::Atom(s.to_string());
        let list = |head: &str, rest: Vec<Sexp>| {
            let mut items = vec![a(head)];
            items.extend(rest);
            Sexp::List(items)
        };
        match self {
            FragmentFormula::Atom { rel, args } => {
                let r = match rel {
                    RelRef::Named(n) => a(n),
                    RelRef::Indexed {
                        prefix,
                        index: IndexTerm::Lit(i),
                    } => Sexp::List(vec![a(prefix), a(&i.to_string())]),
                    RelRef::Indexed {
                        prefix,
                        index: IndexTerm::Var(v),
                    } => Sexp::List(vec![a(prefix), a(v)]),
                };
                let mut rest = vec![r];
                rest.extend(args.iter().map(|v| a(v)));
                list("rel", rest)
            }
            FragmentFormula::Eq(x, y) => list("=", vec![a(x), a(y)]),
            FragmentFormula::Not(f) => list("not", vec![f.to_sexp()]),
            FragmentFormula::And(fs) if fs.is_empty() => a("true"),
            FragmentFormula::Or(fs) if fs.is_empty() => a("false"),
            FragmentFormula::And(fs) => list("and", fs.iter().map(|f| f.to_sexp()).collect()),
            FragmentFormula::Or(fs) => list("or", fs.iter().map(|f| f.to_sexp()).collect()),
            FragmentFormula::Forall(v, f) => list("forall", vec![a(v), f.to_sexp()]),
            FragmentFormula::Exists(v, f) => list("exists", vec![a(v), f.to_sexp()]),
            FragmentFormula::SchemeAnd { index, depth, body } => list(
                "schemeAnd",
                vec![a(index), a(&depth.to_string()), body.to_sexp()],
            ),
            FragmentFormula::SchemeOr { index, depth, body } => list(
                "schemeOr",
                vec![a(index), a(&depth.to_string()), body.to_sexp()],
            ),
        }
    }

    /// Parses one formula. Accepted forms: `(rel R x y)`, `(rel (P n) x)`,
    /// `(= x y)`, `(not φ)`, `(and φ...)`, `(or φ...)`, `(implies φ ψ)`,
    /// `(iff φ ψ)`, `(forall x φ)`, `(exists x φ)`, `(schemeAnd n 3 φ)`,
    /// `(schemeOr n 3 φ)`, `true`, `false`.
    pub fn parse(text: &str) -> Result<FragmentFormula, MorleyError> {
        let e = sexpr::parse(text).map_err(|e| MorleyError::Parse(e.to_string()))?;
        Self::from_sexp(&e)
    }

    /// Parses a whitespace-separated sequence of sentences.
    pub fn parse_theory(text: &str) -> Result<Vec<FragmentFormula>, MorleyError> {
        sexpr::parse_many(text)
            .map_err(|e| MorleyError::Parse(e.to_string()))?
            .iter()
            .map(Self::from_sexp)
            .collect()
    }

    pub fn from_sexp(e: &Sexp) -> Result<FragmentFormula, MorleyError> {
        let bad = |msg: &str| MorleyError::Parse(format!("{msg}: {e}"));
        let items = match e {
            Sexp::Atom(t) if t == "true" => return Ok(FragmentFormula::And(Vec::new())),
            Sexp::Atom(t) if t == "false" => return Ok(FragmentFormula::Or(Vec::new())),
            Sexp::Atom(_) => return Err(bad("expected a formula")),
            Sexp::List(items) => items,
        };
        let head = e.head().ok_or_else(|| bad("expected an operator"))?;
        let rest = &items[1..];
        let name = |s: &Sexp| {
            s.as_atom()
                .map(str::to_string)
                .ok_or_else(|| bad("expected a name"))
        };
        let sub = |i: usize| Self::from_sexp(&rest[i]);
        match (head, rest.len()) {
            ("rel", n) if n >= 1 => {
                let rel = match &rest[0] {
                    Sexp::Atom(r) => RelRef::Named(r.clone()),
                    Sexp::List(parts) if parts.len() == 2 => {
                        let prefix = name(&parts[0])?;
                        let idx = name(&parts[1])?;
                        let index = match idx.parse::<usize>() {
                            Ok(i) => IndexTerm::Lit(i),
                            Err(_) => IndexTerm::Var(idx),
                        };
                        RelRef::Indexed { prefix, index }
                    }
                    _ => return Err(bad("malformed relation reference")),
                };
                let args = rest[1..].iter().map(name).collect::<Result<_, _>>()?;
                Ok(FragmentFormula::Atom { rel, args })
            }
            ("=" | "eq", 2) => Ok(FragmentFormula::Eq(name(&rest[0])?, name(&rest[1])?)),
            ("not", 1) => Ok(FragmentFormula::not(sub(0)?)),
            ("and", _) => Ok(FragmentFormula::And(
                rest.iter().map(Self::from_sexp).collect::<Result<_, _>>()?,
            )),
            ("or", _) => Ok(FragmentFormula::Or(
                rest.iter().map(Self::from_sexp).collect::<Result<_, _>>()?,
            )),
            ("implies", 2) => Ok(FragmentFormula::implies(sub(0)?, sub(1)?)),
            ("iff", 2) => Ok(FragmentFormula::iff(sub(0)?, sub(1)?)),
            ("forall" | "exists", 2) => {
                let body = sub(1)?;
                let vars: Vec<String> = match &rest[0] {
                    Sexp::Atom(v) => vec![v.clone()],
                    Sexp::List(vs) if !vs.is_empty() => {
                        vs.iter().map(name).collect::<Result<_, _>>()?
                    }
                    _ => return Err(bad("expected bound variables")),
                };
                Ok(vars.into_iter().rev().fold(body, |acc, v| {
                    if head == "forall" {
                        FragmentFormula::Forall(v, Box::new(acc))
                    } else {
                        FragmentFormula::Exists(v, Box::new(acc))
                    }
                }))
            }
            ("schemeAnd" | "schemeOr", 3) => {
                let index = name(&rest[0])?;
                let depth: usize = name(&rest[1])?
                    .parse()
                    .map_err(|_| bad("scheme prefix length must be a number"))?;
                if depth == 0 {
                    return Err(bad("scheme prefix length must be at least 1"));
                }
                let body = Box::new(sub(2)?);
                Ok(if head == "schemeAnd" {
                    FragmentFormula::SchemeAnd { index, depth, body }
                } else {
                    FragmentFormula::SchemeOr { index, depth, body }
                })
            }
            _ => Err(bad("unknown or malformed operator")),
        }
    }
}

impl fmt::Display for FragmentFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sexp())
    }
}
