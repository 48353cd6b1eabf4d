//! Deterministic seed fan-out.
//!
//! Every random decision in a run is driven by a seed derived from the
//! run-level seed plus a path of labels (pipeline key, fold, step, ...).
//! Derivation is a pure function of its inputs, so results do not depend
//! on evaluation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The RNG used everywhere in the crate. ChaCha8 is portable across
/// platforms and releases, which keeps artifacts byte-reproducible.
pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives a child seed from `base` and a list of labels.
pub fn derive(base: u64, labels: &[&dyn SeedLabel]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    for label in labels {
        // length prefix keeps ("ab","c") distinct from ("a","bc")
        let bytes = label.seed_bytes();
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    let digest = hasher.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(word)
}

pub trait SeedLabel {
    fn seed_bytes(&self) -> Vec<u8>;
}

impl SeedLabel for u64 {
    fn seed_bytes(&self) -> Vec<u8> {
        self.to_le_bytes().to_vec()
    }
}

impl SeedLabel for usize {
    fn seed_bytes(&self) -> Vec<u8> {
        (*self as u64).to_le_bytes().to_vec()
    }
}

impl SeedLabel for str {
    fn seed_bytes(&self) -> Vec<u8> {
        self.as_bytes().to_vec()
    }
}

impl SeedLabel for &str {
    fn seed_bytes(&self) -> Vec<u8> {
        self.as_bytes().to_vec()
    }
}

impl SeedLabel for String {
    fn seed_bytes(&self) -> Vec<u8> {
        self.as_bytes().to_vec()
    }
}
