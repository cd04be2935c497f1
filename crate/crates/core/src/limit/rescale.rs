use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde_json::{json, Value};

use super::guide::GuideModel;
use super::stage::Stage;
use super::LimitError;

/// One cell of a weight: elements of the weight's stage (`None` is `*`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightCell {
    pub members: Vec<Option<usize>>,
    pub weight: BigRational,
}

/// A finite partition of `A_l ∪ {*}` with target masses. Rescaling moves
/// each cell's mass to its weight and keeps the conditional law inside
/// cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Weight {
    pub stage: usize,
    pub cells: Vec<WeightCell>,
}

impl Weight {
    /// Weights equal to the current cell masses, so rescaling changes
    /// nothing.
    pub fn matching(stage: &Stage, partition: Vec<Vec<Option<usize>>>) -> Weight {
        let cells = partition
            .into_iter()
            .map(|members| {
                let weight = members
                    .iter()
                    .fold(BigRational::zero(), |acc, &x| acc + stage.mass_at(x));
                WeightCell { members, weight }
            })
            .collect();
        Weight {
            stage: stage.index,
            cells,
        }
    }

    /// Checks the partition covers `stage` exactly once and the weights are
    /// positive and sum to 1. Returns the cell of every element, `*` last.
    pub fn validate(&self, stage: &Stage) -> Result<Vec<usize>, LimitError> {
        if stage.index != self.stage {
            return Err(LimitError::InvalidWeight(format!(
                "weight lives on stage {}, got {}",
                self.stage, stage.index
            )));
        }
        let n = stage.len();
        let mut cell_of = vec![usize::MAX; n + 1];
        let mut total = BigRational::zero();
        for (c, cell) in self.cells.iter().enumerate() {
            if cell.weight.is_zero() {
                return Err(LimitError::ZeroWeight { cell: c });
            }
            if cell.weight < BigRational::zero() {
                return Err(LimitError::InvalidWeight(format!(
                    "cell {c} has negative weight"
                )));
            }
            if cell.members.is_empty() {
                return Err(LimitError::InvalidWeight(format!("cell {c} is empty")));
            }
            total += &cell.weight;
            for &x in &cell.members {
                let slot = x.unwrap_or(n);
                if slot > n {
                    return Err(LimitError::InvalidWeight(format!(
                        "cell {c} names element {slot} outside the stage"
                    )));
                }
                if cell_of[slot] != usize::MAX {
                    return Err(LimitError::InvalidWeight(format!(
                        "element {slot} lies in two cells"
                    )));
                }
                cell_of[slot] = c;
            }
        }
        if let Some(missing) = cell_of.iter().position(|&c| c == usize::MAX) {
            return Err(LimitError::InvalidWeight(format!(
                "element {missing} is in no cell"
            )));
        }
        if total != BigRational::one() {
            return Err(LimitError::InvalidWeight(format!("weights sum to {total}")));
        }
        Ok(cell_of)
    }

    /// The rescaled masses on the weight's stage, `*` last.
    pub fn rescaled_masses(&self, stage: &Stage) -> Result<Vec<BigRational>, LimitError> {
        let cell_of = self.validate(stage)?;
        let n = stage.len();
        let mut cell_mass = vec![BigRational::zero(); self.cells.len()];
        for x in 0..=n {
            cell_mass[cell_of[x]] += stage.mass_at((x < n).then_some(x));
        }
        Ok((0..=n)
            .map(|x| {
                let c = cell_of[x];
                stage.mass_at((x < n).then_some(x)) * &self.cells[c].weight / &cell_mass[c]
            })
            .collect())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "stage": self.stage,
            "cells": self.cells.iter().map(|c| json!({
                "members": c.members.iter().map(|m| match m {
                    Some(i) => json!(i),
                    None => json!("*"),
                }).collect::<Vec<_>>(),
                "weight": c.weight.to_string(),
            })).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Weight, LimitError> {
        let bad = |what: &str| LimitError::InvalidWeight(format!("malformed weight: {what}"));
        let stage = v["stage"].as_u64().ok_or_else(|| bad("stage"))? as usize;
        let cells = v["cells"]
            .as_array()
            .ok_or_else(|| bad("cells"))?
            .iter()
            .map(|c| {
                let members = c["members"]
                    .as_array()
                    .ok_or_else(|| bad("members"))?
                    .iter()
                    .map(|m| match m {
                        Value::String(s) if s == "*" => Ok(None),
                        _ => m
                            .as_u64()
                            .map(|i| Some(i as usize))
                            .ok_or_else(|| bad("member")),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let weight = match &c["weight"] {
                    Value::String(s) => BigRational::from_str(s).map_err(|_| bad("weight"))?,
                    Value::Number(n) => {
                        BigRational::from_integer(n.as_i64().ok_or_else(|| bad("weight"))?.into())
                    }
                    _ => return Err(bad("weight")),
                };
                Ok(WeightCell { members, weight })
            })
            .collect::<Result<Vec<_>, LimitError>>()?;
        Ok(Weight { stage, cells })
    }
}

/// The stored formula for rescaling: the first unary symbol of `L_k` whose
/// true set in `A_k` has mass strictly between 0 and 1, with its cells
/// `{φ}` and `{¬φ} ∪ {*}`.
pub fn split_cells<G: GuideModel + ?Sized>(
    stage: &Stage,
    guide: &G,
) -> Option<(usize, Vec<Vec<Option<usize>>>)> {
    let lang = guide.language();
    stage
        .language()
        .iter()
        .copied()
        .filter(|&s| lang.arity(s) == 1)
        .find_map(|s| {
            let (yes, no): (Vec<usize>, Vec<usize>) =
                (0..stage.len()).partition(|&i| guide.fact(s, &[stage.handle(i)]));
            if yes.is_empty() || no.is_empty() {
                return None;
            }
            let mut rest: Vec<Option<usize>> = no.into_iter().map(Some).collect();
            rest.push(None);
            Some((s, vec![yes.into_iter().map(Some).collect(), rest]))
        })
}

/// The two stored weights `(1/4, 3/4)` and `(3/4, 1/4)` on the split cells
/// of `stage`, with the formula they split.
pub fn stored_weights<G: GuideModel + ?Sized>(
    stage: &Stage,
    guide: &G,
) -> Option<(usize, [Weight; 2])> {
    let (symbol, cells) = split_cells(stage, guide)?;
    let make = |a: i64, b: i64| Weight {
        stage: stage.index,
        cells: vec![
            WeightCell {
                members: cells[0].clone(),
                weight: BigRational::new(a.into(), 4.into()),
            },
            WeightCell {
                members: cells[1].clone(),
                weight: BigRational::new(b.into(), 4.into()),
            },
        ],
    };
    Some((symbol, [make(1, 3), make(3, 1)]))
}
