use crate::scorer::mix_seed;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("airport {airport} has {days} day(s); at least 2 are needed")]
    TooFewDays { airport: String, days: usize },
    #[error("split ratio {0} outside (0, 1)")]
    InvalidRatio(f64),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaySplit {
    pub train_days: BTreeSet<String>,
    pub test_days: BTreeSet<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub airports: BTreeMap<String, DaySplit>,
}

/// Number of training days out of `n`: `⌈ratio·n⌉`, kept within `[1, n−1]` so both sides are nonempty.
pub fn train_count(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64 - 1e-9).ceil() as usize).clamp(1, n - 1)
}

/// Per airport, a seeded uniform shuffle of its days; the first [`train_count`] go to training.
/// Airport `i` in sorted order shuffles with `mix_seed(seed, i)`.
pub fn split_days(days: &BTreeMap<String, Vec<String>>, ratio: f64, seed: u64) -> Result<SplitManifest, SplitError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(SplitError::InvalidRatio(ratio));
    }
    let mut out = SplitManifest::default();
    for (i, (airport, list)) in days.iter().enumerate() {
        let mut unique: Vec<String> = list.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        if unique.len() < 2 {
            return Err(SplitError::TooFewDays { airport: airport.clone(), days: unique.len() });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, i as u64));
        unique.shuffle(&mut rng);
        let n_train = train_count(unique.len(), ratio);
        let test = unique.split_off(n_train);
        out.airports.insert(airport.clone(), DaySplit { train_days: unique.into_iter().collect(), test_days: test.into_iter().collect() });
    }
    Ok(out)
}
