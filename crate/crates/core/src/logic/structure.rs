use std::collections::BTreeSet;

use super::{LogicError, Signature};

/// A finite structure with domain `{0..n-1}` under the closed-world reading:
/// a tuple not listed as a fact is false.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FiniteStructure {
    domain_size: usize,
    signature: Signature,
    facts: Vec<BTreeSet<Vec<usize>>>,
}

impl FiniteStructure {
    pub fn new(signature: Signature, domain_size: usize) -> Self {
        let facts = vec![BTreeSet::new(); signature.len()];
        FiniteStructure {
            domain_size,
            signature,
            facts,
        }
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn add_fact(&mut self, symbol: usize, args: Vec<usize>) -> Result<(), LogicError> {
        let sym = self
            .signature
            .symbols()
            .get(symbol)
            .ok_or_else(|| LogicError::UnknownSymbol(format!("#{symbol}")))?;
        if sym.arity != args.len() {
            return Err(LogicError::ArityMismatch {
                symbol: sym.name.clone(),
                expected: sym.arity,
                found: args.len(),
            });
        }
        if let Some(&bad) = args.iter().find(|&&a| a >= self.domain_size) {
            return Err(LogicError::ElementOutOfDomain {
                element: bad,
                domain: self.domain_size,
            });
        }
        self.facts[symbol].insert(args);
        Ok(())
    }

    pub fn add_named(&mut self, name: &str, args: Vec<usize>) -> Result<(), LogicError> {
        let i = self
            .signature
            .index_of(name)
            .ok_or_else(|| LogicError::UnknownSymbol(name.to_string()))?;
        self.add_fact(i, args)
    }

    pub fn holds(&self, symbol: usize, args: &[usize]) -> bool {
        self.facts[symbol].contains(args)
    }

    pub fn facts_of(&self, symbol: usize) -> impl Iterator<Item = &Vec<usize>> {
        self.facts[symbol].iter()
    }

    /// Every fact, in canonical order (symbol index, then argument tuple).
    pub fn facts(&self) -> impl Iterator<Item = (usize, &[usize])> {
        self.facts
            .iter()
            .enumerate()
            .flat_map(|(s, set)| set.iter().map(move |args| (s, args.as_slice())))
    }

    pub fn fact_count(&self) -> usize {
        self.facts.iter().map(|s| s.len()).sum()
    }

    /// Forgets every symbol not named in `target`; symbols are matched by name.
    pub fn reduct(&self, target: &Signature) -> Result<FiniteStructure, LogicError> {
        let mut out = FiniteStructure::new(target.clone(), self.domain_size);
        for (t, sym) in target.symbols().iter().enumerate() {
            let s = self
                .signature
                .index_of(&sym.name)
                .ok_or_else(|| LogicError::UnknownSymbol(sym.name.clone()))?;
            if self.signature.arity(s) != sym.arity {
                return Err(LogicError::ArityMismatch {
                    symbol: sym.name.clone(),
                    expected: sym.arity,
                    found: self.signature.arity(s),
                });
            }
            out.facts[t] = self.facts[s].clone();
        }
        Ok(out)
    }

    /// The substructure induced on `elements`, relabeled so that
    /// `elements[i]` becomes `i`.
    pub fn induced(&self, elements: &[usize]) -> Result<FiniteStructure, LogicError> {
        let mut position = vec![usize::MAX; self.domain_size];
        for (i, &e) in elements.iter().enumerate() {
            if e >= self.domain_size {
                return Err(LogicError::ElementOutOfDomain {
                    element: e,
                    domain: self.domain_size,
                });
            }
            position[e] = i;
        }
        let mut out = FiniteStructure::new(self.signature.clone(), elements.len());
        for (s, set) in self.facts.iter().enumerate() {
            for args in set {
                if args.iter().all(|&a| position[a] != usize::MAX) {
                    out.facts[s].insert(args.iter().map(|&a| position[a]).collect());
                }
            }
        }
        Ok(out)
    }
}
