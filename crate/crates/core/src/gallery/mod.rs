//! Example samplers and control fixtures, addressable by spec strings such
//! as `kaleidoscope:k=2,d=8`.

mod controls;
mod graphs;
mod kaleidoscope;
mod labelled;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ahk::AhkSampler;

pub use controls::{Blowup, BrokenIndex, BrokenSuperset, Constant, Mixture};
pub use graphs::{lex_max, GeometricGraph, MaxGraph, Norm};
pub use kaleidoscope::Kaleidoscope;
pub use labelled::{BipartiteLabels, EdgeLabel, KaleidoscopeDigraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GalleryError {
    #[error("unknown sampler {0:?}")]
    UnknownVariant(String),
    #[error("sampler {variant}: missing parameter {param}")]
    MissingParameter { variant: String, param: String },
    #[error("sampler {variant}: unexpected parameter {param}")]
    UnexpectedParameter { variant: String, param: String },
    #[error("sampler {variant}: bad value {value:?} for {param}")]
    BadValue {
        variant: String,
        param: String,
        value: String,
    },
    #[error("sampler {variant}: {reason}")]
    OutOfRange { variant: String, reason: String },
}

/// Configuration of a gallery sampler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum GalleryConfig {
    Kaleidoscope { k: usize, d: usize },
    Maxgraph { d: usize },
    Geometric { dim: usize, norm: Norm, p: f64 },
    Blowup { d: usize },
    Digraph { d: usize },
    Bipartite { i_depth: usize, j_depth: usize },
    Mixture { p1: f64, p2: f64 },
    BrokenSuperset,
    BrokenIndex,
    Constant,
}

impl GalleryConfig {
    pub fn validate(&self) -> Result<(), GalleryError> {
        let out = |variant: &str, reason: &str| {
            Err(GalleryError::OutOfRange {
                variant: variant.into(),
                reason: reason.into(),
            })
        };
        let unit = |p: f64| p > 0.0 && p < 1.0;
        match *self {
            GalleryConfig::Kaleidoscope { k, d } if k == 0 || d == 0 => {
                out("kaleidoscope", "k and d must be at least 1")
            }
            GalleryConfig::Maxgraph { d }
            | GalleryConfig::Blowup { d }
            | GalleryConfig::Digraph { d }
                if d == 0 =>
            {
                out(self.variant(), "d must be at least 1")
            }
            GalleryConfig::Geometric { dim, .. } if dim == 0 => {
                out("geometric", "dim must be at least 1")
            }
            GalleryConfig::Geometric { p, .. } if !unit(p) => {
                out("geometric", "p must lie in (0,1)")
            }
            GalleryConfig::Bipartite { i_depth, j_depth } if i_depth == 0 || j_depth == 0 => {
                out("bipartite", "depths must be at least 1")
            }
            GalleryConfig::Mixture { p1, p2 } if !unit(p1) || !unit(p2) => {
                out("mixture", "rates must lie in (0,1)")
            }
            GalleryConfig::Mixture { p1, p2 } if p1 == p2 => {
                out("mixture", "p1 and p2 must differ")
            }
            _ => Ok(()),
        }
    }

    pub fn variant(&self) -> &'static str {
        match self {
            GalleryConfig::Kaleidoscope { .. } => "kaleidoscope",
            GalleryConfig::Maxgraph { .. } => "maxgraph",
            GalleryConfig::Geometric { .. } => "geometric",
            GalleryConfig::Blowup { .. } => "blowup",
            GalleryConfig::Digraph { .. } => "digraph",
            GalleryConfig::Bipartite { .. } => "bipartite",
            GalleryConfig::Mixture { .. } => "mixture",
            GalleryConfig::BrokenSuperset => "broken-superset",
            GalleryConfig::BrokenIndex => "broken-index",
            GalleryConfig::Constant => "constant",
        }
    }

    /// Whether this is one of the shipped ergodic samplers (as opposed to a
    /// control fixture that is meant to fail some audit).
    pub fn is_ergodic_example(&self) -> bool {
        !matches!(
            self,
            GalleryConfig::Mixture { .. }
                | GalleryConfig::BrokenSuperset
                | GalleryConfig::BrokenIndex
                | GalleryConfig::Constant
        )
    }

    pub fn build(&self) -> Result<Box<dyn AhkSampler>, GalleryError> {
        self.validate()?;
        Ok(match *self {
            GalleryConfig::Kaleidoscope { k, d } => Box::new(Kaleidoscope::new(k, d)),
            GalleryConfig::Maxgraph { d } => Box::new(MaxGraph::new(d)),
            GalleryConfig::Geometric { dim, norm, p } => {
                Box::new(GeometricGraph::new(dim, norm, p))
            }
            GalleryConfig::Blowup { d } => Box::new(Blowup::new(d)),
            GalleryConfig::Digraph { d } => Box::new(KaleidoscopeDigraph::new(d)),
            GalleryConfig::Bipartite { i_depth, j_depth } => {
                Box::new(BipartiteLabels::new(i_depth, j_depth))
            }
            GalleryConfig::Mixture { p1, p2 } => Box::new(Mixture::new(p1, p2)),
            GalleryConfig::BrokenSuperset => Box::new(BrokenSuperset::default()),
            GalleryConfig::BrokenIndex => Box::new(BrokenIndex::default()),
            GalleryConfig::Constant => Box::new(Constant::default()),
        })
    }
}

impl fmt::Display for GalleryConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GalleryConfig::Kaleidoscope { k, d } => write!(f, "kaleidoscope:k={k},d={d}"),
            GalleryConfig::Maxgraph { d } => write!(f, "maxgraph:d={d}"),
            GalleryConfig::Geometric { dim, norm, p } => {
                write!(f, "geometric:dim={dim},norm={},p={p}", norm.name())
            }
            GalleryConfig::Blowup { d } => write!(f, "blowup:d={d}"),
            GalleryConfig::Digraph { d } => write!(f, "digraph:d={d}"),
            GalleryConfig::Bipartite { i_depth, j_depth } => {
                write!(f, "bipartite:i={i_depth},j={j_depth}")
            }
            GalleryConfig::Mixture { p1, p2 } => write!(f, "mixture:p1={p1},p2={p2}"),
            other => f.write_str(other.variant()),
        }
    }
}

struct Params {
    variant: String,
    values: BTreeMap<String, String>,
}

impl Params {
    fn take<T: FromStr>(&mut self, name: &str) -> Result<T, GalleryError> {
        let raw = self
            .values
            .remove(name)
            .ok_or_else(|| GalleryError::MissingParameter {
                variant: self.variant.clone(),
                param: name.into(),
            })?;
        raw.parse().map_err(|_| GalleryError::BadValue {
            variant: self.variant.clone(),
            param: name.into(),
            value: raw,
        })
    }

    fn finish(self) -> Result<(), GalleryError> {
        match self.values.into_keys().next() {
            Some(param) => Err(GalleryError::UnexpectedParameter {
                variant: self.variant,
                param,
            }),
            None => Ok(()),
        }
    }
}

impl FromStr for GalleryConfig {
    type Err = GalleryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (variant, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut values = BTreeMap::new();
        for item in rest.split(',').filter(|x| !x.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| GalleryError::BadValue {
                variant: variant.into(),
                param: item.into(),
                value: String::new(),
            })?;
            values.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut p = Params {
            variant: variant.to_string(),
            values,
        };
        let config = match variant {
            "kaleidoscope" => GalleryConfig::Kaleidoscope {
                k: p.take("k")?,
                d: p.take("d")?,
            },
            "maxgraph" => GalleryConfig::Maxgraph { d: p.take("d")? },
            "geometric" => {
                let dim = p.take("dim")?;
                let norm = match p.take::<String>("norm")?.as_str() {
                    "euclidean" => Norm::Euclidean,
                    "sup" => Norm::Sup,
                    other => {
                        return Err(GalleryError::BadValue {
                            variant: "geometric".into(),
                            param: "norm".into(),
                            value: other.into(),
                        })
                    }
                };
                GalleryConfig::Geometric {
                    dim,
                    norm,
                    p: p.take("p")?,
                }
            }
            "blowup" => GalleryConfig::Blowup { d: p.take("d")? },
            "digraph" => GalleryConfig::Digraph { d: p.take("d")? },
            "bipartite" => GalleryConfig::Bipartite {
                i_depth: p.take("i")?,
                j_depth: p.take("j")?,
            },
            "mixture" => GalleryConfig::Mixture {
                p1: p.take("p1")?,
                p2: p.take("p2")?,
            },
            "broken-superset" => GalleryConfig::BrokenSuperset,
            "broken-index" => GalleryConfig::BrokenIndex,
            "constant" => GalleryConfig::Constant,
            other => return Err(GalleryError::UnknownVariant(other.into())),
        };
        p.finish()?;
        config.validate()?;
        Ok(config)
    }
}

/// Parses a spec string and builds the sampler.
pub fn build_sampler(spec: &str) -> Result<Box<dyn AhkSampler>, GalleryError> {
    spec.parse::<GalleryConfig>()?.build()
}
