use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetManifest;
use crate::error::{Result, VqaError};

pub const TRAIN_FRACTION: f64 = 0.8;
pub const REPEATS: usize = 10;

/// One random train/test partition of a manifest's record indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub repeat_index: usize,
    pub train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
}

fn repeat_seed(base_seed: u64, repeat: usize) -> u64 {
    // splitmix64 finaliser over (base, repeat)
    let mut z = base_seed ^ (repeat as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Partition `n` records into `round(0.8·n)` train and the rest test.
pub fn make_split(n: usize, base_seed: u64, repeat_index: usize) -> SplitSpec {
    let seed = repeat_seed(base_seed, repeat_index);
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (TRAIN_FRACTION * n as f64).round() as usize;
    let mut train_ids = ids[..n_train].to_vec();
    let mut test_ids = ids[n_train..].to_vec();
    train_ids.sort_unstable();
    test_ids.sort_unstable();
    SplitSpec {
        seed,
        repeat_index,
        train_ids,
        test_ids,
    }
}

/// The ten seeded 80/20 partitions used for median reporting.
pub fn make_splits(manifest: &DatasetManifest, base_seed: u64) -> Result<Vec<SplitSpec>> {
    let n = manifest.len();
    if n < 5 {
        return Err(VqaError::invalid(format!("need at least 5 records to split, got {n}")));
    }
    Ok((0..REPEATS).map(|r| make_split(n, base_seed, r)).collect())
}
