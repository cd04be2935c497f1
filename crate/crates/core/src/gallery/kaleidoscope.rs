use crate::ahk::{AhkSampler, XiFamily};
use crate::logic::{Signature, SymbolFamily};

/// Kaleidoscope random `k`-uniform hypergraph truncated to `d` relations:
/// `R_n` holds on a `k`-set iff bit `n` of its uniform value is 1. For
/// `k = 1` this is the kaleidoscope random predicate, with symbols `P_n`.
#[derive(Clone, Debug)]
pub struct Kaleidoscope {
    k: usize,
    d: usize,
    signature: Signature,
}

impl Kaleidoscope {
    pub fn new(k: usize, d: usize) -> Self {
        assert!(k >= 1 && d >= 1, "kaleidoscope needs k >= 1 and d >= 1");
        let prefix = if k == 1 { "P" } else { "R" };
        let signature = Signature::indexed(prefix, k, d).with_generator(SymbolFamily {
            prefix: prefix.into(),
            arity: k,
        });
        Kaleidoscope { k, d, signature }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn depth(&self) -> usize {
        self.d
    }
}

pub(crate) fn all_distinct(pattern: &[usize]) -> bool {
    pattern
        .iter()
        .enumerate()
        .all(|(i, a)| !pattern[..i].contains(a))
}

impl AhkSampler for Kaleidoscope {
    fn signature(&self) -> &Signature {
        &self.signature
    }

    fn holds(&self, symbol: usize, pattern: &[usize], xi: &XiFamily) -> bool {
        all_distinct(pattern) && xi.get(pattern).bit(symbol)
    }

    fn describe(&self) -> String {
        format!("kaleidoscope:k={},d={}", self.k, self.d)
    }
}
