use serde::{Deserialize, Serialize};

use super::LogicError;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Symbol {
    pub name: String,
    pub arity: usize,
}

impl Symbol {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        Symbol {
            name: name.into(),
            arity,
        }
    }
}

/// Rule for a countably infinite vocabulary: index `k` names `{prefix}{k}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymbolFamily {
    pub prefix: String,
    pub arity: usize,
}

impl SymbolFamily {
    pub fn symbol(&self, k: usize) -> Symbol {
        Symbol::new(format!("{}{}", self.prefix, k), self.arity)
    }

    /// Recovers `k` from a generated name.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        let rest = name.strip_prefix(&self.prefix)?;
        if rest.is_empty() || (rest.len() > 1 && rest.starts_with('0')) {
            return None;
        }
        rest.parse().ok()
    }
}

/// An ordered relational vocabulary, optionally backed by a generator for
/// the infinite tail. Only the materialized `symbols` take part in
/// structures; the generator is consulted when a deeper truncation is
/// requested.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Signature {
    symbols: Vec<Symbol>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator: Option<SymbolFamily>,
}

impl Signature {
    pub fn new(symbols: Vec<Symbol>) -> Result<Self, LogicError> {
        let mut sig = Signature::default();
        for s in symbols {
            sig.push(s)?;
        }
        Ok(sig)
    }

    pub fn empty() -> Self {
        Signature::default()
    }

    /// The truncation `{prefix}0 .. {prefix}{depth-1}` of an indexed family.
    pub fn indexed(prefix: &str, arity: usize, depth: usize) -> Self {
        let family = SymbolFamily {
            prefix: prefix.to_string(),
            arity,
        };
        Signature {
            symbols: (0..depth).map(|k| family.symbol(k)).collect(),
            generator: Some(family),
        }
    }

    pub fn with_generator(mut self, family: SymbolFamily) -> Self {
        self.generator = Some(family);
        self
    }

    pub fn generator(&self) -> Option<&SymbolFamily> {
        self.generator.as_ref()
    }

    pub fn push(&mut self, symbol: Symbol) -> Result<usize, LogicError> {
        if self.index_of(&symbol.name).is_some() {
            return Err(LogicError::DuplicateSymbol(symbol.name));
        }
        self.symbols.push(symbol);
        Ok(self.symbols.len() - 1)
    }

    /// Looks a name up, materializing it from the generator when needed.
    pub fn resolve_or_generate(&mut self, name: &str) -> Option<usize> {
        if let Some(i) = self.index_of(name) {
            return Some(i);
        }
        let family = self.generator.clone()?;
        let k = family.index_of(name)?;
        self.symbols.push(family.symbol(k));
        Some(self.symbols.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn symbol(&self, index: usize) -> &Symbol {
        &self.symbols[index]
    }

    pub fn arity(&self, index: usize) -> usize {
        self.symbols[index].arity
    }

    pub fn name(&self, index: usize) -> &str {
        &self.symbols[index].name
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s.name == name)
    }

    pub fn max_arity(&self) -> usize {
        self.symbols.iter().map(|s| s.arity).max().unwrap_or(0)
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.symbols.len()).collect()
    }
}
