use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Dataset, FeatureKind};
use crate::error::{Error, Result};
use crate::seed;

/// Generates a labelled dataset whose favorable rate is `label_bias`
/// lower for the unprivileged group than for the privileged one.
///
/// Groups are split evenly. Within group `a` exactly
/// `round(n_a * (0.5 + (a - 0.5) * label_bias))` rows are favorable, so the
/// label statistical parity difference is `-label_bias` up to rounding.
///
/// Features: `signal = 1.5 y + e1` and `proxy = 0.5 y + a + e2` with
/// standard normal noise; `proxy` leaks the protected attribute.
pub fn synthetic_biased(n: usize, label_bias: f64, seed: u64) -> Result<Dataset> {
    if n < 20 {
        return Err(Error::InvalidConfig(format!("synthetic dataset needs n >= 20, got {n}")));
    }
    if !(0.0..=1.0).contains(&label_bias) {
        return Err(Error::InvalidConfig(format!("label_bias {label_bias} outside [0, 1]")));
    }
    let mut rng = seed::rng(seed::derive(seed, &[&"synthetic_biased"]));

    let n_privileged = n / 2;
    let mut a: Vec<u8> = (0..n).map(|i| u8::from(i < n_privileged)).collect();
    a.shuffle(&mut rng);

    let mut y = vec![0u8; n];
    for group in [0u8, 1] {
        let mut members: Vec<usize> = (0..n).filter(|&i| a[i] == group).collect();
        let rate = 0.5 + (f64::from(group) - 0.5) * label_bias;
        let positives = (members.len() as f64 * rate).round() as usize;
        members.shuffle(&mut rng);
        for &i in &members[..positives] {
            y[i] = 1;
        }
    }

    let mut x = Vec::with_capacity(2 * n);
    for i in 0..n {
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        x.push(1.5 * f64::from(y[i]) + e1);
        x.push(0.5 * f64::from(y[i]) + f64::from(a[i]) + e2);
    }
    Dataset::from_parts(
        x,
        y,
        a,
        vec![1.0; n],
        vec!["signal".into(), "proxy".into()],
        vec![FeatureKind::Numeric; 2],
    )
}
