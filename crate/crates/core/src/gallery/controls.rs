use crate::ahk::{AhkSampler, XiFamily};
use crate::logic::{Signature, Symbol};

/// Blow-up control: `d + 1` classes, class `c < d` with probability
/// `2^-(c+1)` and the last class absorbing the tail. `E` is "same class" and
/// `P_n` reads bit `n` of `c + 1`.
#[derive(Clone, Debug)]
pub struct Blowup {
    d: usize,
    signature: Signature,
}

impl Blowup {
    pub fn new(d: usize) -> Self {
        assert!(d >= 1, "blow-up needs d >= 1");
        let mut symbols = vec![Symbol::new("E", 2)];
        symbols.extend((0..d).map(|n| Symbol::new(format!("P{n}"), 1)));
        Blowup {
            d,
            signature: Signature::new(symbols).expect("names are distinct"),
        }
    }

    pub fn class(&self, xi: &XiFamily, i: usize) -> usize {
        xi.singleton(i).leading_ones(self.d)
    }

    /// Exact class probabilities, summing to 1.
    pub fn class_probabilities(&self) -> Vec<f64> {
        let mut p: Vec<f64> = (0..self.d).map(|c| 0.5f64.powi(c as i32 + 1)).collect();
        p.push(0.5f64.powi(self.d as i32));
        p
    }
}

impl AhkSampler for Blowup {
    fn signature(&self) -> &Signature {
        &self.signature
    }

    fn holds(&self, symbol: usize, pattern: &[usize], xi: &XiFamily) -> bool {
        if symbol == 0 {
            self.class(xi, pattern[0]) == self.class(xi, pattern[1])
        } else {
            (self.class(xi, pattern[0]) + 1) >> (symbol - 1) & 1 == 1
        }
    }

    fn describe(&self) -> String {
        format!("blowup:d={}", self.d)
    }
}

/// Mixture of two Erdős–Rényi laws chosen by `ξ_∅`: invariant but not
/// ergodic.
#[derive(Clone, Debug)]
pub struct Mixture {
    p1: f64,
    p2: f64,
    signature: Signature,
}

impl Mixture {
    pub fn new(p1: f64, p2: f64) -> Self {
        assert!(
            p1 != p2,
            "mixture components must differ; use Mixture::degenerate"
        );
        Self::degenerate_pair(p1, p2)
    }

    /// Both components equal, so the law is a plain Erdős–Rényi graph.
    pub fn degenerate(p: f64) -> Self {
        Self::degenerate_pair(p, p)
    }

    fn degenerate_pair(p1: f64, p2: f64) -> Self {
        assert!(
            p1 > 0.0 && p1 < 1.0 && p2 > 0.0 && p2 < 1.0,
            "rates must lie in (0,1)"
        );
        Mixture {
            p1,
            p2,
            signature: Signature::indexed("R", 2, 1),
        }
    }
}

impl AhkSampler for Mixture {
    fn signature(&self) -> &Signature {
        &self.signature
    }

    fn holds(&self, _symbol: usize, pattern: &[usize], xi: &XiFamily) -> bool {
        let (a, b) = (pattern[0], pattern[1]);
        if a == b {
            return false;
        }
        let p = if xi.empty_set().value() < 0.5 {
            self.p1
        } else {
            self.p2
        };
        xi.get(&[a, b]).value() < p
    }

    fn describe(&self) -> String {
        format!("mixture:p1={},p2={}", self.p1, self.p2)
    }
}

/// Broken fixture: `P(x)` reads `ξ` of the whole tuple, so the type of a
/// sub-tuple disagrees with its restriction.
#[derive(Clone, Debug)]
pub struct BrokenSuperset {
    signature: Signature,
}

impl Default for BrokenSuperset {
    fn default() -> Self {
        BrokenSuperset {
            signature: Signature::indexed("P", 1, 1),
        }
    }
}

impl AhkSampler for BrokenSuperset {
    fn signature(&self) -> &Signature {
        &self.signature
    }

    fn holds(&self, _symbol: usize, _pattern: &[usize], xi: &XiFamily) -> bool {
        let everything: Vec<usize> = (0..xi.len()).collect();
        xi.get(&everything).bit(0)
    }

    fn describe(&self) -> String {
        "broken-superset".into()
    }
}

/// Broken fixture: `R(x, y)` iff the raw label of `x` is below that of `y`.
#[derive(Clone, Debug)]
pub struct BrokenIndex {
    signature: Signature,
}

impl Default for BrokenIndex {
    fn default() -> Self {
        BrokenIndex {
            signature: Signature::indexed("R", 2, 1),
        }
    }
}

impl AhkSampler for BrokenIndex {
    fn signature(&self) -> &Signature {
        &self.signature
    }

    fn holds(&self, _symbol: usize, pattern: &[usize], xi: &XiFamily) -> bool {
        xi.label(pattern[0]) < xi.label(pattern[1])
    }

    fn describe(&self) -> String {
        "broken-index".into()
    }
}

/// All relations empty.
#[derive(Clone, Debug)]
pub struct Constant {
    signature: Signature,
}

impl Default for Constant {
    fn default() -> Self {
        Constant {
            signature: Signature::indexed("R", 2, 1),
        }
    }
}

impl AhkSampler for Constant {
    fn signature(&self) -> &Signature {
        &self.signature
    }

    fn holds(&self, _symbol: usize, _pattern: &[usize], _xi: &XiFamily) -> bool {
        false
    }

    fn describe(&self) -> String {
        "constant".into()
    }
}
