use super::scale::{distance_space, squared_distance};
use crate::data::Dataset;

/// Greedy one-to-one nearest-neighbor matching across protected groups.
///
/// Rows of the smaller group (group 0 on a tie) are visited in row order;
/// each takes the closest still-unmatched row of the other group, ties
/// going to the lower row index. Distances are Euclidean in the
/// distance space (numeric columns z-scored, one-hot columns as is). A row
/// whose nearest candidate lies farther than `max_distance` stays unmatched.
///
/// Returns (source row, matched row) pairs in visiting order.
pub(super) fn greedy_pairs(ds: &Dataset, max_distance: Option<f64>) -> Vec<(usize, usize)> {
    let d = ds.n_features();
    let space = distance_space(ds);
    let point = |i: usize| &space[i * d..(i + 1) * d];
    let [g0, g1] = ds.group_indices();
    let (source, target) = if g1.len() < g0.len() { (g1, g0) } else { (g0, g1) };
    let limit = max_distance.map(|m| m * m);

    let mut taken = vec![false; target.len()];
    let mut pairs = Vec::new();
    for &s in &source {
        let mut best: Option<(usize, f64)> = None;
        for (slot, &t) in target.iter().enumerate() {
            if taken[slot] {
                continue;
            }
            let dist = squared_distance(point(s), point(t));
            if best.is_none_or(|(_, b)| dist < b) {
                best = Some((slot, dist));
            }
        }
        match best {
            Some((slot, dist)) if limit.is_none_or(|l| dist <= l) => {
                taken[slot] = true;
                pairs.push((s, target[slot]));
            }
            Some(_) => {}
            None => break,
        }
    }
    pairs
}
