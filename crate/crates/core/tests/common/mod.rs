//! Naive reference implementations used only by tests.
#![allow(dead_code)]

use itertools::Itertools;

/// Rank sequence of a window (1 = smallest), by sorting.
pub fn ranks(window: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..window.len()).collect();
    idx.sort_by(|&a, &b| window[a].partial_cmp(&window[b]).unwrap());
    let mut r = vec![0; window.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank + 1;
    }
    r
}

/// All permutations of `1..=n` in lexicographic order.
pub fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    (1..=n).permutations(n).collect()
}

/// 1-based lexicographic number of a rank sequence, by table lookup.
pub fn naive_index(window: &[f64]) -> usize {
    let r = ranks(window);
    all_permutations(window.len())
        .iter()
        .position(|p| *p == r)
        .unwrap()
        + 1
}

/// Pattern counts at lag `d`, one window at a time.
pub fn naive_counts(values: &[f64], n: usize, d: usize) -> Vec<u64> {
    let table = all_permutations(n);
    let mut counts = vec![0; table.len()];
    let span = (n - 1) * d;
    for t in 0..values.len().saturating_sub(span) {
        let w: Vec<f64> = (0..n).map(|j| values[t + j * d]).collect();
        let r = ranks(&w);
        counts[table.iter().position(|p| *p == r).unwrap()] += 1;
    }
    counts
}

/// Pattern string such as "132".
pub fn pattern_string(r: &[usize]) -> String {
    r.iter().map(|d| d.to_string()).collect()
}
