use std::collections::HashMap;
use std::fmt;

use serde_json::{json, Value};

use crate::logic::{QfFormula, Signature, Symbol};

use super::{FragmentFormula, MorleyError, RelRef};

pub const DEFAULT_FREE_VARIABLE_BOUND: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantifier {
    Forall,
    Exists,
}

/// `Q₁v₁ … Qₖvₖ θ` with `θ` quantifier-free; variable `i` of the matrix is
/// the `i`-th quantified variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PrenexSentence {
    pub quantifiers: Vec<(Quantifier, String)>,
    pub matrix: QfFormula,
}

impl PrenexSentence {
    pub fn universal(vars: &[String], matrix: QfFormula) -> Self {
        PrenexSentence {
            quantifiers: vars
                .iter()
                .map(|v| (Quantifier::Forall, v.clone()))
                .collect(),
            matrix,
        }
    }

    /// `∀ vars ∃ witness matrix`.
    pub fn pithy(vars: &[String], witness: &str, matrix: QfFormula) -> Self {
        let mut s = Self::universal(vars, matrix);
        s.quantifiers
            .push((Quantifier::Exists, witness.to_string()));
        s
    }

    pub fn is_universal(&self) -> bool {
        self.quantifiers
            .iter()
            .all(|(q, _)| *q == Quantifier::Forall)
    }

    /// `∀x̄ ∃y θ` with exactly one existential, in last position.
    pub fn is_pithy(&self) -> bool {
        match self.quantifiers.split_last() {
            Some(((Quantifier::Exists, _), rest)) => {
                rest.iter().all(|(q, _)| *q == Quantifier::Forall)
            }
            _ => false,
        }
    }

    pub fn symbols(&self) -> Vec<usize> {
        self.matrix.symbols().into_iter().collect()
    }

    pub fn render(&self, sig: &Signature) -> String {
        let names: Vec<String> = self.quantifiers.iter().map(|(_, v)| v.clone()).collect();
        let body = self.matrix.to_sexpr_named(sig, &names);
        let mut out = body;
        for (q, v) in self.quantifiers.iter().rev() {
            let word = match q {
                Quantifier::Forall => "forall",
                Quantifier::Exists => "exists",
            };
            out = format!("({word} {v} {out})");
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Rel {
        symbol: usize,
        args: Vec<String>,
    },
    Eq(String, String),
    Not(usize),
    And(Vec<usize>),
    Or(Vec<usize>),
    Forall {
        var: String,
        child: usize,
    },
    Exists {
        var: String,
        child: usize,
    },
    SchemeAnd {
        index: String,
        body: FragmentFormula,
        instances: Vec<usize>,
    },
    SchemeOr {
        index: String,
        body: FragmentFormula,
        instances: Vec<usize>,
    },
}

/// One formula of the closure and its relation symbol `R_φ` in `L'`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosureNode {
    pub formula: FragmentFormula,
    pub free_vars: Vec<String>,
    pub kind: NodeKind,
    pub symbol: usize,
}

/// One instance of the defining schema (1)–(8). Schemas (7) and (8) carry a
/// universal half and a pithy half.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DefiningAxiom {
    pub schema: u8,
    pub node: usize,
    pub sentences: Vec<PrenexSentence>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QPattern {
    /// `{R_ψᵢ} ∪ {¬R_φ}` for a countable conjunction.
    Conjunction,
    /// `{¬R_ψᵢ} ∪ {R_φ}` for a countable disjunction.
    Disjunction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Literal {
    pub node: usize,
    pub positive: bool,
}

/// A partial quantifier-free type to omit: the materialized literals plus
/// the scheme that generates the rest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OmittedType {
    pub node: usize,
    pub pattern: QPattern,
    pub vars: Vec<String>,
    pub head: Literal,
    pub instances: Vec<Literal>,
    pub index: String,
    pub body: FragmentFormula,
}

impl OmittedType {
    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        self.instances.iter().chain(std::iter::once(&self.head))
    }

    /// The unmaterialized instance formula `ψᵢ`.
    pub fn instance_formula(&self, i: usize) -> FragmentFormula {
        self.body.instantiate(&self.index, i)
    }
}

/// The `Π₂⁻` theory: the defining axioms plus one assertion `R_ψ` per input
/// sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pi2MinusTheory {
    pub language: Signature,
    pub defining: Vec<DefiningAxiom>,
    pub assertions: Vec<PrenexSentence>,
}

impl Pi2MinusTheory {
    pub fn sentences(&self) -> impl Iterator<Item = &PrenexSentence> {
        self.defining
            .iter()
            .flat_map(|a| a.sentences.iter())
            .chain(self.assertions.iter())
    }

    pub fn universal(&self) -> impl Iterator<Item = &PrenexSentence> {
        self.sentences().filter(|s| s.is_universal())
    }

    pub fn pithy(&self) -> impl Iterator<Item = &PrenexSentence> {
        self.sentences().filter(|s| s.is_pithy())
    }

    pub fn axiom_count(&self) -> usize {
        self.defining.len() + self.assertions.len()
    }
}

/// Every sentence is universal or pithy `Π₂`.
pub fn check_pi2minus(theory: &Pi2MinusTheory) -> bool {
    theory.sentences().all(|s| s.is_universal() || s.is_pithy())
}

/// The output of Morleyization: `L'`, the closure with its bijection to the
/// new symbols, `T'` and `Q`.
#[derive(Clone, Debug)]
pub struct Morleyization {
    base: Signature,
    theory: Pi2MinusTheory,
    nodes: Vec<ClosureNode>,
    lookup: HashMap<FragmentFormula, usize>,
    sentences: Vec<usize>,
    omitted: Vec<OmittedType>,
    free_variable_bound: usize,
}

pub fn morleyize(
    base: &Signature,
    sentences: &[FragmentFormula],
) -> Result<Morleyization, MorleyError> {
    morleyize_bounded(base, sentences, DEFAULT_FREE_VARIABLE_BOUND)
}

pub fn morleyize_bounded(
    base: &Signature,
    sentences: &[FragmentFormula],
    free_variable_bound: usize,
) -> Result<Morleyization, MorleyError> {
    let mut mz = Morleyization {
        base: base.clone(),
        theory: Pi2MinusTheory {
            language: base.clone(),
            defining: Vec::new(),
            assertions: Vec::new(),
        },
        nodes: Vec::new(),
        lookup: HashMap::new(),
        sentences: Vec::new(),
        omitted: Vec::new(),
        free_variable_bound,
    };
    for s in sentences {
        if !s.free_vars().is_empty() {
            return Err(MorleyError::NotASentence(s.to_string()));
        }
        let node = mz.intern(s)?;
        mz.sentences.push(node);
        let symbol = mz.nodes[node].symbol;
        mz.theory.assertions.push(PrenexSentence::universal(
            &[],
            QfFormula::rel(symbol, Vec::new()),
        ));
    }
    Ok(mz)
}

/// The smallest signature covering every relation used by `sentences`
/// (schemes contribute their materialized instances).
pub fn infer_signature(sentences: &[FragmentFormula]) -> Result<Signature, MorleyError> {
    let mut sig = Signature::empty();
    let mut stack: Vec<FragmentFormula> = sentences.to_vec();
    while let Some(f) = stack.pop() {
        match &f {
            FragmentFormula::SchemeAnd { index, depth, body }
            | FragmentFormula::SchemeOr { index, depth, body } => {
                stack.extend((0..*depth).map(|i| body.instantiate(index, i)));
            }
            FragmentFormula::Not(g)
            | FragmentFormula::Forall(_, g)
            | FragmentFormula::Exists(_, g) => stack.push((**g).clone()),
            FragmentFormula::And(gs) | FragmentFormula::Or(gs) => stack.extend(gs.iter().cloned()),
            FragmentFormula::Eq(..) => {}
            FragmentFormula::Atom { rel, args } => {
                let name = rel
                    .ground_name()
                    .ok_or_else(|| MorleyError::UnboundIndex(f.to_string()))?;
                match sig.index_of(&name) {
                    Some(s) if sig.arity(s) != args.len() => {
                        return Err(MorleyError::ArityMismatch {
                            symbol: name,
                            expected: sig.arity(s),
                            found: args.len(),
                        })
                    }
                    Some(_) => {}
                    None => {
                        sig.push(Symbol::new(name, args.len()))?;
                    }
                }
            }
        }
    }
    let mut symbols = sig.symbols().to_vec();
    symbols.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(Signature::new(symbols)?)
}

impl Morleyization {
    pub fn base(&self) -> &Signature {
        &self.base
    }

    pub fn language(&self) -> &Signature {
        &self.theory.language
    }

    pub fn theory(&self) -> &Pi2MinusTheory {
        &self.theory
    }

    pub fn nodes(&self) -> &[ClosureNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &ClosureNode {
        &self.nodes[i]
    }

    pub fn node_of(&self, f: &FragmentFormula) -> Option<usize> {
        self.lookup.get(f).copied()
    }

    /// The closure node whose symbol is `symbol`, if `symbol` is an `R_φ`.
    pub fn node_of_symbol(&self, symbol: usize) -> Option<usize> {
        self.nodes.iter().position(|n| n.symbol == symbol)
    }

    pub fn sentence_nodes(&self) -> &[usize] {
        &self.sentences
    }

    pub fn omitted(&self) -> &[OmittedType] {
        &self.omitted
    }

    fn fresh_name(&self, k: usize) -> String {
        let mut name = format!("Rphi{k}");
        while self.theory.language.index_of(&name).is_some() {
            name.push('\'');
        }
        name
    }

    fn resolve_base(
        &mut self,
        rel: &RelRef,
        arity: usize,
        context: &FragmentFormula,
    ) -> Result<usize, MorleyError> {
        let name = rel
            .ground_name()
            .ok_or_else(|| MorleyError::UnboundIndex(context.to_string()))?;
        let symbol = match self.theory.language.index_of(&name) {
            Some(s) if self.node_of_symbol(s).is_none() => s,
            Some(_) => return Err(MorleyError::UnknownSymbol(name)),
            None => {
                let generated = self
                    .base
                    .resolve_or_generate(&name)
                    .ok_or(MorleyError::UnknownSymbol(name.clone()))?;
                let sym = self.base.symbol(generated).clone();
                self.theory.language.push(sym)?
            }
        };
        let expected = self.theory.language.arity(symbol);
        if expected != arity {
            return Err(MorleyError::ArityMismatch {
                symbol: name,
                expected,
                found: arity,
            });
        }
        Ok(symbol)
    }

    /// The symbol of the base relation `name` in `L'`, materializing it when
    /// the base signature generates it.
    pub fn base_symbol(&mut self, name: &str, arity: usize) -> Result<usize, MorleyError> {
        let rel = RelRef::Named(name.to_string());
        let context = FragmentFormula::Atom {
            rel: rel.clone(),
            args: vec![String::new(); arity],
        };
        self.resolve_base(&rel, arity, &context)
    }

    /// Adds `f` and its subformulas to the closure, emitting their axioms.
    pub fn intern(&mut self, f: &FragmentFormula) -> Result<usize, MorleyError> {
        if let Some(&i) = self.lookup.get(f) {
            return Ok(i);
        }
        let kind = match f {
            FragmentFormula::Atom { rel, args } => NodeKind::Rel {
                symbol: self.resolve_base(rel, args.len(), f)?,
                args: args.clone(),
            },
            FragmentFormula::Eq(a, b) => NodeKind::Eq(a.clone(), b.clone()),
            FragmentFormula::Not(g) => NodeKind::Not(self.intern(g)?),
            FragmentFormula::And(gs) => NodeKind::And(
                gs.iter()
                    .map(|g| self.intern(g))
                    .collect::<Result<_, _>>()?,
            ),
            FragmentFormula::Or(gs) => NodeKind::Or(
                gs.iter()
                    .map(|g| self.intern(g))
                    .collect::<Result<_, _>>()?,
            ),
            FragmentFormula::Forall(v, g) => NodeKind::Forall {
                var: v.clone(),
                child: self.intern(g)?,
            },
            FragmentFormula::Exists(v, g) => NodeKind::Exists {
                var: v.clone(),
                child: self.intern(g)?,
            },
            FragmentFormula::SchemeAnd { index, depth, body }
            | FragmentFormula::SchemeOr { index, depth, body } => {
                let instances = (0..*depth)
                    .map(|i| self.intern(&body.instantiate(index, i)))
                    .collect::<Result<Vec<_>, _>>()?;
                if matches!(f, FragmentFormula::SchemeAnd { .. }) {
                    NodeKind::SchemeAnd {
                        index: index.clone(),
                        body: (**body).clone(),
                        instances,
                    }
                } else {
                    NodeKind::SchemeOr {
                        index: index.clone(),
                        body: (**body).clone(),
                        instances,
                    }
                }
            }
        };
        let free_vars = f.free_vars();
        if free_vars.len() > self.free_variable_bound {
            return Err(MorleyError::FreeVariableBound {
                formula: f.to_string(),
                count: free_vars.len(),
                bound: self.free_variable_bound,
            });
        }
        let name = self.fresh_name(self.nodes.len());
        let symbol = self
            .theory
            .language
            .push(Symbol::new(name, free_vars.len()))?;
        let id = self.nodes.len();
        self.nodes.push(ClosureNode {
            formula: f.clone(),
            free_vars,
            kind,
            symbol,
        });
        self.lookup.insert(f.clone(), id);
        self.emit_axioms(id);
        Ok(id)
    }

    /// `R_ψ` applied to `ψ`'s free variables, as positions in `vars`.
    fn r(&self, node: usize, vars: &[String]) -> QfFormula {
        let n = &self.nodes[node];
        let args = n.free_vars.iter().map(|v| position(vars, v)).collect();
        QfFormula::rel(n.symbol, args)
    }

    fn emit_axioms(&mut self, id: usize) {
        let node = &self.nodes[id];
        let xs = node.free_vars.clone();
        let head = self.r(id, &xs);
        let bicond = |schema: u8, rhs: QfFormula| DefiningAxiom {
            schema,
            node: id,
            sentences: vec![PrenexSentence::universal(
                &xs,
                QfFormula::iff(head.clone(), rhs),
            )],
        };
        let mut new_axioms = Vec::new();
        match &node.kind {
            NodeKind::Rel { symbol, args } => {
                let pos = args.iter().map(|a| position(&xs, a)).collect();
                new_axioms.push(bicond(1, QfFormula::rel(*symbol, pos)));
            }
            NodeKind::Eq(a, b) => {
                new_axioms.push(bicond(1, QfFormula::eq(position(&xs, a), position(&xs, b))))
            }
            NodeKind::Not(c) => new_axioms.push(bicond(2, QfFormula::not(self.r(*c, &xs)))),
            NodeKind::And(cs) => new_axioms.push(bicond(
                3,
                QfFormula::and(cs.iter().map(|&c| self.r(c, &xs)).collect()),
            )),
            NodeKind::Or(cs) => new_axioms.push(bicond(
                4,
                QfFormula::or(cs.iter().map(|&c| self.r(c, &xs)).collect()),
            )),
            NodeKind::SchemeAnd { instances, .. } => {
                for &c in instances {
                    new_axioms.push(self.scheme_axiom(id, c));
                }
            }
            NodeKind::SchemeOr { instances, .. } => {
                for &c in instances {
                    new_axioms.push(self.scheme_axiom(id, c));
                }
            }
            NodeKind::Forall { var, child } | NodeKind::Exists { var, child } => {
                let y = fresh_variable(&xs, var);
                let mut vars = xs.clone();
                vars.push(y.clone());
                let child_formula = self.r_renamed(*child, &vars, var, &y);
                let head = self.r(id, &vars);
                let (schema, sentences) = if matches!(node.kind, NodeKind::Forall { .. }) {
                    (
                        7,
                        vec![
                            PrenexSentence::universal(
                                &vars,
                                QfFormula::implies(head.clone(), child_formula.clone()),
                            ),
                            PrenexSentence::pithy(
                                &xs,
                                &y,
                                QfFormula::or(vec![QfFormula::not(child_formula), head]),
                            ),
                        ],
                    )
                } else {
                    (
                        8,
                        vec![
                            PrenexSentence::universal(
                                &vars,
                                QfFormula::implies(child_formula.clone(), head.clone()),
                            ),
                            PrenexSentence::pithy(&xs, &y, QfFormula::implies(head, child_formula)),
                        ],
                    )
                };
                new_axioms.push(DefiningAxiom {
                    schema,
                    node: id,
                    sentences,
                });
            }
        }
        if let NodeKind::SchemeAnd {
            index,
            body,
            instances,
        }
        | NodeKind::SchemeOr {
            index,
            body,
            instances,
        } = &node.kind
        {
            let conj = matches!(node.kind, NodeKind::SchemeAnd { .. });
            self.omitted.push(OmittedType {
                node: id,
                pattern: if conj {
                    QPattern::Conjunction
                } else {
                    QPattern::Disjunction
                },
                vars: xs.clone(),
                head: Literal {
                    node: id,
                    positive: !conj,
                },
                instances: instances
                    .iter()
                    .map(|&c| Literal {
                        node: c,
                        positive: conj,
                    })
                    .collect(),
                index: index.clone(),
                body: body.clone(),
            });
        }
        self.theory.defining.extend(new_axioms);
    }

    /// `R_ψ` where the bound variable `var` of the parent is renamed `y`.
    fn r_renamed(&self, node: usize, vars: &[String], var: &str, y: &str) -> QfFormula {
        let n = &self.nodes[node];
        let args = n
            .free_vars
            .iter()
            .map(|v| position(vars, if v == var { y } else { v }))
            .collect();
        QfFormula::rel(n.symbol, args)
    }

    fn scheme_axiom(&self, scheme: usize, instance: usize) -> DefiningAxiom {
        let xs = &self.nodes[scheme].free_vars;
        let (head, inst) = (self.r(scheme, xs), self.r(instance, xs));
        let (schema, matrix) = match self.nodes[scheme].kind {
            NodeKind::SchemeAnd { .. } => (5, QfFormula::implies(head, inst)),
            _ => (6, QfFormula::implies(inst, head)),
        };
        DefiningAxiom {
            schema,
            node: scheme,
            sentences: vec![PrenexSentence::universal(xs, matrix)],
        }
    }

    /// Materializes instances of scheme `node` up to index `depth - 1`,
    /// adding their closure nodes, type-(5)/(6) axioms and `Q` literals.
    pub fn extend_scheme(&mut self, node: usize, depth: usize) -> Result<(), MorleyError> {
        let (index, body, have) = match &self.nodes[node].kind {
            NodeKind::SchemeAnd {
                index,
                body,
                instances,
            }
            | NodeKind::SchemeOr {
                index,
                body,
                instances,
            } => (index.clone(), body.clone(), instances.len()),
            _ => {
                return Err(MorleyError::NotAScheme(
                    self.nodes[node].formula.to_string(),
                ))
            }
        };
        for i in have..depth {
            let c = self.intern(&body.instantiate(&index, i))?;
            let conj = match &mut self.nodes[node].kind {
                NodeKind::SchemeAnd { instances, .. } => {
                    instances.push(c);
                    true
                }
                NodeKind::SchemeOr { instances, .. } => {
                    instances.push(c);
                    false
                }
                _ => unreachable!(),
            };
            let axiom = self.scheme_axiom(node, c);
            self.theory.defining.push(axiom);
            let q = self
                .omitted
                .iter_mut()
                .find(|q| q.node == node)
                .expect("every scheme has a Q-type");
            q.instances.push(Literal {
                node: c,
                positive: conj,
            });
        }
        Ok(())
    }

    /// JSON rendering with the `R_φ` bijection table.
    pub fn to_json(&self) -> Value {
        let sig = self.language();
        let table: Vec<Value> = self
            .nodes
            .iter()
            .map(|n| {
                json!({
                    "symbol": sig.name(n.symbol),
                    "arity": n.free_vars.len(),
                    "vars": n.free_vars,
                    "formula": n.formula.to_string(),
                })
            })
            .collect();
        let defining: Vec<Value> = self
            .theory
            .defining
            .iter()
            .map(|a| {
                json!({
                    "schema": a.schema,
                    "node": sig.name(self.nodes[a.node].symbol),
                    "sentences": a.sentences.iter().map(|s| s.render(sig)).collect::<Vec<_>>(),
                })
            })
            .collect();
        let literal = |l: &Literal| {
            let name = sig.name(self.nodes[l.node].symbol);
            if l.positive {
                name.to_string()
            } else {
                format!("(not {name})")
            }
        };
        let omitted: Vec<Value> = self
            .omitted
            .iter()
            .map(|q| {
                json!({
                    "source": sig.name(self.nodes[q.node].symbol),
                    "pattern": match q.pattern { QPattern::Conjunction => "i", QPattern::Disjunction => "ii" },
                    "vars": q.vars,
                    "head": literal(&q.head),
                    "instances": q.instances.iter().map(literal).collect::<Vec<_>>(),
                    "tail": { "index": q.index, "body": q.body.to_string(), "next": q.instances.len() },
                })
            })
            .collect();
        json!({
            "language": sig.symbols(),
            "base": self.base.symbols().iter().map(|s| s.name.clone()).collect::<Vec<_>>(),
            "table": table,
            "defining": defining,
            "assertions": self.theory.assertions.iter().map(|s| s.render(sig)).collect::<Vec<_>>(),
            "universal_count": self.theory.universal().count(),
            "pithy_count": self.theory.pithy().count(),
            "omitted": omitted,
        })
    }
}

impl fmt::Display for Morleyization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.theory.sentences() {
            writeln!(f, "{}", s.render(self.language()))?;
        }
        Ok(())
    }
}

fn position(vars: &[String], v: &str) -> usize {
    vars.iter()
        .position(|w| w == v)
        .expect("free variables are covered by the prefix")
}

/// A name for the bound variable that does not clash with `taken`.
fn fresh_variable(taken: &[String], preferred: &str) -> String {
    let mut v = preferred.to_string();
    while taken.contains(&v) {
        v.push('\'');
    }
    v
}
