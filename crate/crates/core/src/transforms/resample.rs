use rand::seq::IndexedRandom;
use rand::Rng;

use crate::data::Dataset;
use crate::error::Result;
use crate::seed::Rng as SeededRng;

/// Duplicates uniformly drawn rows of every (y, a) cell up to the largest
/// cell count. Original rows keep their positions; duplicates follow.
pub(super) fn oversample(ds: &Dataset, rng: &mut SeededRng) -> Result<Dataset> {
    let cells = ds.cell_indices();
    let target = cells.iter().flatten().map(Vec::len).max().unwrap_or(0);
    let mut order: Vec<usize> = (0..ds.n_rows()).collect();
    for cell in cells.iter().flatten() {
        for _ in cell.len()..target {
            order.push(cell[rng.random_range(0..cell.len())]);
        }
    }
    ds.select_rows(&order)
}

/// Keeps a uniform subset of every (y, a) cell sized to the smallest cell
/// count, in original row order.
pub(super) fn undersample(ds: &Dataset, rng: &mut SeededRng) -> Result<Dataset> {
    let cells = ds.cell_indices();
    let target = cells.iter().flatten().map(Vec::len).min().unwrap_or(0);
    let mut keep: Vec<usize> = cells
        .iter()
        .flatten()
        .flat_map(|cell| cell.choose_multiple(rng, target).copied().collect::<Vec<_>>())
        .collect();
    keep.sort_unstable();
    ds.select_rows(&keep)
}

/// Bootstrap of size n drawn cell by cell, so that each (y, a) cell keeps
/// exactly its original count.
pub(super) fn stratified_bootstrap(ds: &Dataset, rng: &mut SeededRng) -> Result<Dataset> {
    let cells = ds.cell_indices();
    let mut order = Vec::with_capacity(ds.n_rows());
    for cell in cells.iter().flatten() {
        for _ in 0..cell.len() {
            order.push(cell[rng.random_range(0..cell.len())]);
        }
    }
    ds.select_rows(&order)
}
