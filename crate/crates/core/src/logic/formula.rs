use std::collections::BTreeSet;

use crate::sexpr::{self, Sexp};

use super::{FiniteStructure, LogicError, Signature};

/// Quantifier-free formula over variables `x0, x1, ...` (by index).
/// `And(vec![])` is true and `Or(vec![])` is false.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum QfFormula {
    Rel { symbol: usize, args: Vec<usize> },
    Eq(usize, usize),
    Not(Box<QfFormula>),
    And(Vec<QfFormula>),
    Or(Vec<QfFormula>),
}

impl QfFormula {
    pub fn rel(symbol: usize, args: Vec<usize>) -> Self {
        QfFormula::Rel { symbol, args }
    }

    pub fn eq(a: usize, b: usize) -> Self {
        QfFormula::Eq(a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: QfFormula) -> Self {
        QfFormula::Not(Box::new(f))
    }

    pub fn and(fs: Vec<QfFormula>) -> Self {
        QfFormula::And(fs)
    }

    pub fn or(fs: Vec<QfFormula>) -> Self {
        QfFormula::Or(fs)
    }

    pub fn implies(a: QfFormula, b: QfFormula) -> Self {
        QfFormula::Or(vec![QfFormula::not(a), b])
    }

    pub fn iff(a: QfFormula, b: QfFormula) -> Self {
        QfFormula::Or(vec![
            QfFormula::And(vec![a.clone(), b.clone()]),
            QfFormula::And(vec![QfFormula::not(a), QfFormula::not(b)]),
        ])
    }

    pub fn truth() -> Self {
        QfFormula::And(Vec::new())
    }

    pub fn falsity() -> Self {
        QfFormula::Or(Vec::new())
    }

    /// One more than the largest variable index mentioned (0 if none).
    pub fn num_vars(&self) -> usize {
        match self {
            QfFormula::Rel { args, .. } => args.iter().map(|a| a + 1).max().unwrap_or(0),
            QfFormula::Eq(a, b) => a.max(b) + 1,
            QfFormula::Not(f) => f.num_vars(),
            QfFormula::And(fs) | QfFormula::Or(fs) => {
                fs.iter().map(|f| f.num_vars()).max().unwrap_or(0)
            }
        }
    }

    pub fn symbols(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<usize>) {
        match self {
            QfFormula::Rel { symbol, .. } => {
                out.insert(*symbol);
            }
            QfFormula::Eq(..) => {}
            QfFormula::Not(f) => f.collect_symbols(out),
            QfFormula::And(fs) | QfFormula::Or(fs) => {
                fs.iter().for_each(|f| f.collect_symbols(out))
            }
        }
    }

    /// Checks symbol indices and arities against `sig`.
    pub fn validate(&self, sig: &Signature) -> Result<(), LogicError> {
        match self {
            QfFormula::Rel { symbol, args } => {
                let sym = sig
                    .symbols()
                    .get(*symbol)
                    .ok_or_else(|| LogicError::UnknownSymbol(format!("#{symbol}")))?;
                if sym.arity != args.len() {
                    return Err(LogicError::ArityMismatch {
                        symbol: sym.name.clone(),
                        expected: sym.arity,
                        found: args.len(),
                    });
                }
                Ok(())
            }
            QfFormula::Eq(..) => Ok(()),
            QfFormula::Not(f) => f.validate(sig),
            QfFormula::And(fs) | QfFormula::Or(fs) => fs.iter().try_for_each(|f| f.validate(sig)),
        }
    }

    /// Renames variable `i` to `map[i]`.
    pub fn substitute(&self, map: &[usize]) -> QfFormula {
        match self {
            QfFormula::Rel { symbol, args } => QfFormula::Rel {
                symbol: *symbol,
                args: args.iter().map(|&a| map[a]).collect(),
            },
            QfFormula::Eq(a, b) => QfFormula::Eq(map[*a], map[*b]),
            QfFormula::Not(f) => QfFormula::not(f.substitute(map)),
            QfFormula::And(fs) => QfFormula::And(fs.iter().map(|f| f.substitute(map)).collect()),
            QfFormula::Or(fs) => QfFormula::Or(fs.iter().map(|f| f.substitute(map)).collect()),
        }
    }

    /// Evaluates against an arbitrary atomic oracle; `assignment[i]` is the
    /// element bound to `x_i`.
    pub fn eval_with<E: Copy + PartialEq>(
        &self,
        assignment: &[E],
        atom: &mut impl FnMut(usize, &[E]) -> bool,
    ) -> bool {
        match self {
            QfFormula::Rel { symbol, args } => {
                let tuple: Vec<E> = args.iter().map(|&a| assignment[a]).collect();
                atom(*symbol, &tuple)
            }
            QfFormula::Eq(a, b) => assignment[*a] == assignment[*b],
            QfFormula::Not(f) => !f.eval_with(assignment, atom),
            QfFormula::And(fs) => fs.iter().all(|f| f.eval_with(assignment, atom)),
            QfFormula::Or(fs) => fs.iter().any(|f| f.eval_with(assignment, atom)),
        }
    }

    pub fn to_sexpr(&self, sig: &Signature) -> String {
        self.to_sexp(sig, &|i| format!("x{i}")).to_string()
    }

    /// Like [`QfFormula::to_sexpr`], printing variable `i` as `names[i]`.
    pub fn to_sexpr_named(&self, sig: &Signature, names: &[String]) -> String {
        self.to_sexp(sig, &|i| {
            names.get(i).cloned().unwrap_or_else(|| format!("x{i}"))
        })
        .to_string()
    }

    fn to_sexp(&self, sig: &Signature, name: &dyn Fn(usize) -> String) -> Sexp {
        let atom = |s: &str| Sexp::Atom(s.to_string());
        let var = |i: usize| Sexp::Atom(name(i));
        match self {
            QfFormula::Rel { symbol, args } => {
                let name = sig
                    .symbols()
                    .get(*symbol)
                    .map(|s| s.name.clone())
                    .unwrap_or(format!("#{symbol}"));
                let mut items = vec![atom("rel"), Sexp::Atom(name)];
                items.extend(args.iter().map(|&a| var(a)));
                Sexp::List(items)
            }
            QfFormula::Eq(a, b) => Sexp::List(vec![atom("="), var(*a), var(*b)]),
            QfFormula::Not(f) => Sexp::List(vec![atom("not"), f.to_sexp(sig, name)]),
            QfFormula::And(fs) => {
                let mut items = vec![atom("and")];
                items.extend(fs.iter().map(|f| f.to_sexp(sig, name)));
                Sexp::List(items)
            }
            QfFormula::Or(fs) => {
                let mut items = vec![atom("or")];
                items.extend(fs.iter().map(|f| f.to_sexp(sig, name)));
                Sexp::List(items)
            }
        }
    }

    /// Parses `(rel R0 x0 x1)`, `(= x0 x1)`, `(not φ)`, `(and φ...)`,
    /// `(or φ...)`, `(implies φ ψ)`, `(iff φ ψ)`, `true`, `false`.
    pub fn parse(text: &str, sig: &Signature) -> Result<QfFormula, LogicError> {
        let e = sexpr::parse(text).map_err(|e| LogicError::Parse(e.to_string()))?;
        let f = Self::from_sexp(&e, sig)?;
        f.validate(sig)?;
        Ok(f)
    }

    fn from_sexp(e: &Sexp, sig: &Signature) -> Result<QfFormula, LogicError> {
        let bad = |msg: &str| LogicError::Parse(format!("{msg}: {e}"));
        match e {
            Sexp::Atom(a) if a == "true" => Ok(QfFormula::truth()),
            Sexp::Atom(a) if a == "false" => Ok(QfFormula::falsity()),
            Sexp::Atom(_) => Err(bad("expected a formula")),
            Sexp::List(items) => {
                let head = e.head().ok_or_else(|| bad("expected an operator"))?;
                let rest = &items[1..];
                let sub = |i: usize| Self::from_sexp(&rest[i], sig);
                match head {
                    "rel" => {
                        let name = rest
                            .first()
                            .and_then(|s| s.as_atom())
                            .ok_or_else(|| bad("missing relation"))?;
                        let symbol = sig
                            .index_of(name)
                            .ok_or_else(|| LogicError::UnknownSymbol(name.to_string()))?;
                        let args = rest[1..]
                            .iter()
                            .map(parse_var)
                            .collect::<Result<Vec<_>, _>>()?;
                        Ok(QfFormula::Rel { symbol, args })
                    }
                    "=" | "eq" if rest.len() == 2 => {
                        Ok(QfFormula::Eq(parse_var(&rest[0])?, parse_var(&rest[1])?))
                    }
                    "not" if rest.len() == 1 => Ok(QfFormula::not(sub(0)?)),
                    "and" => Ok(QfFormula::And(
                        rest.iter()
                            .map(|s| Self::from_sexp(s, sig))
                            .collect::<Result<_, _>>()?,
                    )),
                    "or" => Ok(QfFormula::Or(
                        rest.iter()
                            .map(|s| Self::from_sexp(s, sig))
                            .collect::<Result<_, _>>()?,
                    )),
                    "implies" if rest.len() == 2 => Ok(QfFormula::implies(sub(0)?, sub(1)?)),
                    "iff" if rest.len() == 2 => Ok(QfFormula::iff(sub(0)?, sub(1)?)),
                    _ => Err(bad("unknown or malformed operator")),
                }
            }
        }
    }
}

fn parse_var(e: &Sexp) -> Result<usize, LogicError> {
    e.as_atom()
        .and_then(|a| a.strip_prefix('x'))
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| LogicError::Parse(format!("expected a variable x<i>, found {e}")))
}

/// Tarskian evaluation of `phi` at `tuple` (closed world).
pub fn eval_qf(m: &FiniteStructure, phi: &QfFormula, tuple: &[usize]) -> Result<bool, LogicError> {
    phi.validate(m.signature())?;
    let needed = phi.num_vars();
    if needed > tuple.len() {
        return Err(LogicError::UnboundVariable {
            var: needed - 1,
            tuple_len: tuple.len(),
        });
    }
    if let Some(&bad) = tuple.iter().find(|&&a| a >= m.domain_size()) {
        return Err(LogicError::ElementOutOfDomain {
            element: bad,
            domain: m.domain_size(),
        });
    }
    Ok(phi.eval_with(tuple, &mut |s, args: &[usize]| m.holds(s, args)))
}
