//! Oracles shared by the integration suites. Everything in this file is
//! independent of the crate; `exhaustive` drives the crate against them.
#![allow(dead_code)]

pub mod exhaustive;

use std::collections::{BTreeSet, VecDeque};

/// `(id, trust)`; `a` belongs above `b` when it has more trust, or equal
/// trust and a smaller id.
pub type Entry = (u64, u64);

pub fn above(a: Entry, b: Entry) -> bool {
    a.1 > b.1 || (a.1 == b.1 && a.0 < b.0)
}

/// Every level-order arrangement of `peers` in which each slot's parent
/// belongs above it. Returned as id sequences.
pub fn valid_layouts(peers: &[Entry], d: usize) -> BTreeSet<Vec<u64>> {
    fn place(
        slot: usize,
        d: usize,
        remaining: &mut Vec<Entry>,
        layout: &mut Vec<Entry>,
        out: &mut BTreeSet<Vec<u64>>,
    ) {
        if remaining.is_empty() {
            out.insert(layout.iter().map(|e| e.0).collect());
            return;
        }
        for i in 0..remaining.len() {
            let candidate = remaining[i];
            if slot > 0 && !above(layout[(slot - 1) / d], candidate) {
                continue;
            }
            remaining.swap_remove(i);
            layout.push(candidate);
            place(slot + 1, d, remaining, layout, out);
            layout.pop();
            remaining.push(candidate);
            let last = remaining.len() - 1;
            remaining.swap(i, last);
        }
    }
    let mut out = BTreeSet::new();
    place(0, d, &mut peers.to_vec(), &mut Vec::new(), &mut out);
    out
}

/// Height by direct search: depth of the deepest of `n` level-order slots.
pub fn height_by_depth(n: u64, d: u64) -> u32 {
    if n <= 1 {
        return 0;
    }
    let mut slot = n - 1;
    let mut depth = 0;
    while slot > 0 {
        slot = (slot - 1) / d;
        depth += 1;
    }
    depth
}

/// Largest `h` with `2 * d^h <= n + 1`, by linear search over `h`.
pub fn bound_by_search(n: u64, d: u64) -> u32 {
    let mut best = 0;
    let mut h = 0u32;
    loop {
        match d.checked_pow(h).and_then(|p| p.checked_mul(2)) {
            Some(v) if v <= n + 1 => best = h,
            _ => return best,
        }
        h += 1;
    }
}

/// `min(n, (d^(t+1) - 1) / (d - 1))` in u128.
pub fn geometric_cover(n: u64, d: u64, t: u32) -> u64 {
    let mut sum: u128 = 0;
    let mut term: u128 = 1;
    for _ in 0..=t {
        sum += term;
        if sum >= n as u128 {
            return n;
        }
        term *= d as u128;
    }
    sum as u64
}

/// Depth of every slot of an `n`-node d-ary layout, found by walking the
/// explicit child lists breadth first.
pub fn bfs_depths(n: usize, d: usize) -> Vec<u32> {
    let mut depth = vec![u32::MAX; n];
    if n == 0 {
        return depth;
    }
    depth[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(v) = queue.pop_front() {
        for k in 1..=d {
            let c = d * v + k;
            if c < n {
                depth[c] = depth[v] + 1;
                queue.push_back(c);
            }
        }
    }
    depth
}
