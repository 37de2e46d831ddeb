//! Oracles shared by the integration tests. None of them call into the
//! algorithms they check.

#![allow(dead_code)]

use std::collections::VecDeque;

/// Maximum matching in a bipartite graph by Hopcroft-Karp.
///
/// `adj[u]` lists the right vertices adjacent to left vertex `u`.
pub fn hopcroft_karp(adj: &[Vec<usize>], right_size: usize) -> usize {
    const FREE: usize = usize::MAX;
    let left_size = adj.len();
    let mut match_l = vec![FREE; left_size];
    let mut match_r = vec![FREE; right_size];
    let mut dist = vec![0u32; left_size];
    let mut matching = 0;

    loop {
        // Layer the free left vertices and everything reachable by alternating paths.
        let mut queue = VecDeque::new();
        for u in 0..left_size {
            if match_l[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = u32::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == FREE {
                    found = true;
                } else if dist[w] == u32::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            return matching;
        }
        for u in 0..left_size {
            if match_l[u] == FREE && augment(u, adj, &mut match_l, &mut match_r, &mut dist) {
                matching += 1;
            }
        }
    }
}

fn augment(
    u: usize,
    adj: &[Vec<usize>],
    match_l: &mut [usize],
    match_r: &mut [usize],
    dist: &mut [u32],
) -> bool {
    for &v in &adj[u] {
        let w = match_r[v];
        let ok = w == usize::MAX || (dist[w] == dist[u] + 1 && augment(w, adj, match_l, match_r, dist));
        if ok {
            match_l[u] = v;
            match_r[v] = u;
            return true;
        }
    }
    dist[u] = u32::MAX;
    false
}

/// Sum over `i` of the maximum matching between Hamming levels `i` and `i - 1`
/// of `{0,1}^n`, where an edge turns one `1` into a `0`.
pub fn adjacent_level_matching(n: u32) -> u64 {
    let levels: Vec<Vec<u32>> = (0..=n)
        .map(|i| (0u32..1 << n).filter(|w| w.count_ones() == i).collect())
        .collect();
    let mut total = 0u64;
    for i in 1..=n as usize {
        let lower = &levels[i - 1];
        let position = |w: u32| lower.binary_search(&w).expect("word on lower level");
        let adj: Vec<Vec<usize>> = levels[i]
            .iter()
            .map(|&w| {
                (0..n)
                    .filter(|b| w >> b & 1 == 1)
                    .map(|b| position(w & !(1 << b)))
                    .collect()
            })
            .collect();
        total += hopcroft_karp(&adj, lower.len()) as u64;
    }
    total
}

/// `C(n, k)` by the multiplicative formula.
pub fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// `sum a_n x^n` by a plain loop with `powi`.
pub fn direct_sum(values: &[f64], x: f64) -> f64 {
    values
        .iter()
        .enumerate()
        .map(|(n, &a)| a * x.powi(n as i32 + 1))
        .sum()
}

/// Exact `P(S_l > 0 for all m < l <= len)` for a walk with the given steps and
/// probabilities, by enumerating every path.
pub fn walk_positivity_exact(steps: &[(i64, f64)], m: usize, len: usize) -> f64 {
    fn go(steps: &[(i64, f64)], m: usize, len: usize, l: usize, sum: i64, p: f64) -> f64 {
        if l == len {
            return p;
        }
        steps
            .iter()
            .map(|&(d, q)| {
                let s = sum + d;
                if l + 1 > m && s <= 0 {
                    0.0
                } else {
                    go(steps, m, len, l + 1, s, p * q)
                }
            })
            .sum()
    }
    go(steps, m, len, 0, 0, 1.0)
}
