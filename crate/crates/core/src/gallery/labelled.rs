use crate::ahk::{AhkSampler, Uniform, XiFamily};
use crate::logic::{Signature, Symbol};

/// Directed graph encoding the kaleidoscope predicate. Loops mark `O`; an
/// `O`-element picks one of `d` ladder classes (the last absorbs the tail),
/// `O × O` is the class preorder, and `p ∈ P` points at the classes listed
/// by its `d` fair bits.
#[derive(Clone, Debug)]
pub struct KaleidoscopeDigraph {
    d: usize,
    signature: Signature,
}

enum Side {
    O(usize),
    P(Uniform),
}

impl KaleidoscopeDigraph {
    pub fn new(d: usize) -> Self {
        assert!(d >= 1, "digraph needs d >= 1");
        KaleidoscopeDigraph {
            d,
            signature: Signature::new(vec![Symbol::new("R", 2)]).expect("one symbol"),
        }
    }

    fn side(&self, xi: &XiFamily, i: usize) -> Side {
        let u = xi.singleton(i);
        if u.bit(0) {
            Side::O(u.split(1).leading_ones(self.d - 1))
        } else {
            Side::P(u.split(2))
        }
    }

    /// Ladder class of `i`, or `None` when `i ∈ P`.
    pub fn class(&self, xi: &XiFamily, i: usize) -> Option<usize> {
        match self.side(xi, i) {
            Side::O(c) => Some(c),
            Side::P(_) => None,
        }
    }
}

impl AhkSampler for KaleidoscopeDigraph {
    fn signature(&self) -> &Signature {
        &self.signature
    }

    fn holds(&self, _symbol: usize, pattern: &[usize], xi: &XiFamily) -> bool {
        let (x, y) = (pattern[0], pattern[1]);
        match (self.side(xi, x), self.side(xi, y)) {
            (Side::O(a), Side::O(b)) => a <= b,
            (Side::P(_), Side::P(_)) | (Side::O(_), Side::P(_)) => false,
            (Side::P(bits), Side::O(c)) => bits.bit(c),
        }
    }

    fn describe(&self) -> String {
        format!("digraph:d={}", self.d)
    }
}

/// Kaleidoscope-like bipartite graph. Edges go from `P` to `¬P`; each edge
/// gets a geometric label `i` and subscripts `j < k`, where `k` may be
/// infinite only when `i ∈ A_x`. Labels at or beyond `i_depth` fall into a
/// tail bucket that emits no facts.
#[derive(Clone, Debug)]
pub struct BipartiteLabels {
    i_depth: usize,
    j_depth: usize,
    signature: Signature,
}

/// The edge data of a pair: its label and subscript run length (`None` is
/// infinite).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeLabel {
    pub i: usize,
    pub k: Option<usize>,
}

impl BipartiteLabels {
    pub fn new(i_depth: usize, j_depth: usize) -> Self {
        assert!(i_depth >= 1 && j_depth >= 1, "depths must be positive");
        let mut symbols = vec![Symbol::new("P", 1)];
        for i in 0..i_depth {
            for j in 0..j_depth {
                symbols.push(Symbol::new(format!("R{i}_{j}"), 2));
            }
        }
        BipartiteLabels {
            i_depth,
            j_depth,
            signature: Signature::new(symbols).expect("names are distinct"),
        }
    }

    pub fn symbol(&self, i: usize, j: usize) -> usize {
        1 + i * self.j_depth + j
    }

    pub fn in_p(&self, xi: &XiFamily, x: usize) -> bool {
        xi.singleton(x).bit(0)
    }

    /// Whether `i ∈ A_x`.
    pub fn in_a(&self, xi: &XiFamily, x: usize, i: usize) -> bool {
        xi.singleton(x).split(1).bit(i)
    }

    /// Label data of an edge `x → y` with `P(x) ∧ ¬P(y)`, else `None`.
    pub fn edge_label(&self, xi: &XiFamily, x: usize, y: usize) -> Option<EdgeLabel> {
        if x == y || !self.in_p(xi, x) || self.in_p(xi, y) {
            return None;
        }
        let u = xi.get(&[x, y]);
        let i = u.leading_ones(self.i_depth);
        let v = u.split(1);
        let cap = self.j_depth + 1;
        let k = if self.in_a(xi, x, i) {
            if v.bit(0) {
                None
            } else {
                Some(1 + (1..=cap).take_while(|&n| v.bit(n)).count())
            }
        } else {
            Some(1 + v.leading_ones(cap))
        };
        Some(EdgeLabel { i, k })
    }
}

impl AhkSampler for BipartiteLabels {
    fn signature(&self) -> &Signature {
        &self.signature
    }

    fn holds(&self, symbol: usize, pattern: &[usize], xi: &XiFamily) -> bool {
        if symbol == 0 {
            return self.in_p(xi, pattern[0]);
        }
        let (i, j) = ((symbol - 1) / self.j_depth, (symbol - 1) % self.j_depth);
        match self.edge_label(xi, pattern[0], pattern[1]) {
            Some(label) if label.i == i && label.i < self.i_depth => label.k.is_none_or(|k| j < k),
            _ => false,
        }
    }

    fn describe(&self) -> String {
        format!("bipartite:i={},j={}", self.i_depth, self.j_depth)
    }
}
