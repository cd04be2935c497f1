//! Rootedness and collision statistics.

mod roots;

use rayon::prelude::*;

use crate::ahk::{type_at, AhkError, AhkSampler, SeedKey, StatReport, XiFamily};

pub use roots::{find_roots, injective_tuples, rootedness_check, RootReport, RootednessReport};

/// Probability that the disjoint tuples `(0..n)` and `(n..2n)` get the same
/// fingerprint.
pub fn collision_stat(
    sampler: &dyn AhkSampler,
    n: usize,
    trials: u64,
    seed: SeedKey,
) -> Result<StatReport, AhkError> {
    if trials == 0 {
        return Err(AhkError::InvalidArgument(
            "trials must be at least 1".into(),
        ));
    }
    let labels: Vec<usize> = (0..2 * n).collect();
    let left: Vec<usize> = (0..n).collect();
    let right: Vec<usize> = (n..2 * n).collect();
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let xi = XiFamily::new(seed.derive(t), labels.clone());
            (type_at(sampler, &xi, &left) == type_at(sampler, &xi, &right)) as u64
        })
        .sum();
    Ok(StatReport::bernoulli("collision", hits, trials, seed))
}
