//! Integer apportionment shared by the tactical agent and the baselines.
//!
//! Shares are computed by continuous water-filling and rounded with a
//! largest-remainder rule that never breaks ties: if several entries share the
//! cut-off remainder and there are not enough units for all of them, none of
//! them gets the extra unit. The result is exactly permutation-equivariant;
//! the at most `n - 1` units lost this way stay unassigned.

const EPS: f64 = 1e-9;

/// Continuous water-fill of `amount` in proportion to `weights`, saturating
/// entries at `limits`. Zero-weight entries receive nothing.
pub fn water_fill_exact(amount: f64, weights: &[f64], limits: &[f64]) -> Vec<f64> {
    assert_eq!(weights.len(), limits.len());
    let n = weights.len();
    let mut alloc = vec![0.0; n];
    let mut active: Vec<usize> = (0..n)
        .filter(|&i| weights[i] > 0.0 && limits[i] > 0.0)
        .collect();
    let mut remaining = amount.max(0.0);
    while remaining > EPS && !active.is_empty() {
        let wsum: f64 = active.iter().map(|&i| weights[i]).sum();
        let saturated: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&i| remaining * weights[i] / wsum >= limits[i] - alloc[i] - EPS)
            .collect();
        if saturated.is_empty() {
            for &i in &active {
                alloc[i] += remaining * weights[i] / wsum;
            }
            break;
        }
        for &i in &saturated {
            remaining -= limits[i] - alloc[i];
            alloc[i] = limits[i];
        }
        active.retain(|i| !saturated.contains(i));
    }
    alloc
}

/// Rounds exact shares down and hands out the leftover units by largest
/// remainder, skipping any group of tied remainders that cannot be served in
/// full. `limits` bounds each rounded entry.
pub fn round_shares(exact: &[f64], limits: &[u64]) -> Vec<u64> {
    let mut out: Vec<u64> = exact
        .iter()
        .zip(limits)
        .map(|(&x, &lim)| ((x + EPS).floor().max(0.0) as u64).min(lim))
        .collect();
    let total_exact: f64 = exact.iter().sum();
    let target = (total_exact + 1e-6).floor() as u64;
    let assigned: u64 = out.iter().sum();
    let mut seats = target.saturating_sub(assigned);
    if seats == 0 {
        return out;
    }

    let mut order: Vec<(usize, f64)> = exact
        .iter()
        .enumerate()
        .filter(|&(i, _)| out[i] < limits[i])
        .map(|(i, &x)| (i, x - out[i] as f64))
        .filter(|&(_, r)| r > EPS)
        .collect();
    // Stable descending sort on the remainder; index order inside a tie
    // group is irrelevant because groups are granted all-or-nothing.
    order.sort_by(|a, b| b.1.total_cmp(&a.1));

    let mut k = 0;
    while k < order.len() && seats > 0 {
        let mut end = k + 1;
        while end < order.len() && (order[k].1 - order[end].1).abs() <= EPS {
            end += 1;
        }
        let group = (end - k) as u64;
        if group > seats {
            break;
        }
        for &(i, _) in &order[k..end] {
            out[i] += 1;
        }
        seats -= group;
        k = end;
    }
    out
}

/// Integer water-fill: splits `amount` units in proportion to `weights`
/// without exceeding `limits`.
pub fn water_fill(amount: u64, weights: &[f64], limits: &[u64]) -> Vec<u64> {
    let limits_f: Vec<f64> = limits.iter().map(|&l| l as f64).collect();
    let exact = water_fill_exact(amount as f64, weights, &limits_f);
    round_shares(&exact, limits)
}

/// Splits `amount` equally across entries with room, bounded by `limits`.
pub fn equal_split(amount: u64, limits: &[u64]) -> Vec<u64> {
    let weights = vec![1.0; limits.len()];
    water_fill(amount, &weights, limits)
}
