use serde::{Deserialize, Serialize};

use crate::ahk::{AhkSampler, XiFamily};
use crate::logic::{Signature, SymbolFamily};

/// Max random graph: vertex `i` carries the `d`-bit prefix `A_i` of `ξ_{i}`
/// and `R_n(i, j)` holds iff bit `n` of `max(A_i, A_j)` is set.
#[derive(Clone, Debug)]
pub struct MaxGraph {
    d: usize,
    signature: Signature,
}

impl MaxGraph {
    pub fn new(d: usize) -> Self {
        assert!(d >= 1, "max graph needs d >= 1");
        let signature = Signature::indexed("R", 2, d).with_generator(SymbolFamily {
            prefix: "R".into(),
            arity: 2,
        });
        MaxGraph { d, signature }
    }

    pub fn prefix(&self, xi: &XiFamily, i: usize) -> Vec<bool> {
        xi.singleton(i).prefix(self.d)
    }
}

/// Lexicographic maximum of two bit strings of equal length.
pub fn lex_max(a: Vec<bool>, b: Vec<bool>) -> Vec<bool> {
    if a >= b {
        a
    } else {
        b
    }
}

impl AhkSampler for MaxGraph {
    fn signature(&self) -> &Signature {
        &self.signature
    }

    fn holds(&self, symbol: usize, pattern: &[usize], xi: &XiFamily) -> bool {
        let (a, b) = (pattern[0], pattern[1]);
        a != b && lex_max(self.prefix(xi, a), self.prefix(xi, b))[symbol]
    }

    fn describe(&self) -> String {
        format!("maxgraph:d={}", self.d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Euclidean,
    Sup,
}

impl Norm {
    pub fn distance(&self, u: &[f64], v: &[f64]) -> f64 {
        let diffs = u.iter().zip(v).map(|(a, b)| (a - b).abs());
        match self {
            Norm::Euclidean => diffs.map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Sup => diffs.fold(0.0, f64::max),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Norm::Euclidean => "euclidean",
            Norm::Sup => "sup",
        }
    }
}

/// Random geometric graph on `[0,2]^dim`: an edge needs distance below 1
/// and a weight-`p` coin flip from the pair's own uniform.
#[derive(Clone, Debug)]
pub struct GeometricGraph {
    dim: usize,
    norm: Norm,
    p: f64,
    forced_point: Option<Vec<f64>>,
    signature: Signature,
}

impl GeometricGraph {
    pub fn new(dim: usize, norm: Norm, p: f64) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        assert!(p > 0.0 && p < 1.0, "edge probability must lie in (0,1)");
        GeometricGraph {
            dim,
            norm,
            p,
            forced_point: None,
            signature: Signature::indexed("R", 2, 1),
        }
    }

    /// Test hook: every vertex is placed at `point`.
    pub fn with_forced_point(mut self, point: Vec<f64>) -> Self {
        assert_eq!(point.len(), self.dim);
        self.forced_point = Some(point);
        self
    }

    pub fn point(&self, xi: &XiFamily, i: usize) -> Vec<f64> {
        if let Some(p) = &self.forced_point {
            return p.clone();
        }
        let u = xi.singleton(i);
        (0..self.dim)
            .map(|c| 2.0 * u.split(c as u64).value())
            .collect()
    }

    /// The edge rule on explicit points and coin value.
    pub fn edge(&self, u: &[f64], v: &[f64], coin: f64) -> bool {
        self.norm.distance(u, v) < 1.0 && coin < self.p
    }
}

impl AhkSampler for GeometricGraph {
    fn signature(&self) -> &Signature {
        &self.signature
    }

    fn holds(&self, _symbol: usize, pattern: &[usize], xi: &XiFamily) -> bool {
        let (a, b) = (pattern[0], pattern[1]);
        a != b
            && self.edge(
                &self.point(xi, a),
                &self.point(xi, b),
                xi.get(&[a, b]).value(),
            )
    }

    fn describe(&self) -> String {
        format!(
            "geometric:dim={},norm={},p={}",
            self.dim,
            self.norm.name(),
            self.p
        )
    }
}
