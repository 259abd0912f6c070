//! Independent oracles shared by the integration tests. Nothing here calls
//! into the planners it checks.
#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rearrange_core::depgraph::DependencyGraph;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random digraph without self-arcs, each ordered pair present with `p`.
pub fn random_digraph(rng: &mut impl Rng, n: usize, p: f64, weights: Vec<f64>) -> DependencyGraph {
    let mut arcs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(p) {
                arcs.push((i, j));
            }
        }
    }
    DependencyGraph::from_arcs(weights, &arcs)
}

/// Kahn's algorithm on the arcs between vertices not in `removed`.
pub fn acyclic_without(n: usize, arcs: &[(usize, usize)], removed: u32) -> bool {
    let keep = |v: usize| removed & (1 << v) == 0;
    let mut indeg = vec![0; n];
    for &(i, j) in arcs {
        if keep(i) && keep(j) {
            indeg[j] += 1;
        }
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| keep(v) && indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = queue.pop_front() {
        seen += 1;
        for &(i, j) in arcs {
            if i == v && keep(j) {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    queue.push_back(j);
                }
            }
        }
    }
    seen == (0..n).filter(|&v| keep(v)).count()
}

/// Exhaustive minimum-weight feedback vertex set over all 2^n subsets. Among
/// sets within 1e-9 (relative) of the optimum, the lexicographically
/// smallest sorted index list is returned. Weights summed in index order.
pub fn brute_force_fvs(g: &DependencyGraph) -> (Vec<usize>, f64) {
    let n = g.len();
    assert!(n <= 20);
    let arcs: Vec<_> = g.arcs().collect();
    let mut feasible = Vec::new();
    for mask in 0u32..(1 << n) {
        if acyclic_without(n, &arcs, mask) {
            let set: Vec<usize> = (0..n).filter(|v| mask & (1 << v) != 0).collect();
            let w: f64 = set.iter().map(|&v| g.weight(v)).sum();
            feasible.push((set, w));
        }
    }
    let best = feasible.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * best.abs().max(1.0);
    feasible
        .into_iter()
        .filter(|f| f.1 <= best + tol)
        .min_by(|a, b| a.0.cmp(&b.0))
        .unwrap()
}

/// Unweighted minimum FVS size by subset enumeration in increasing size.
pub fn brute_force_fvs_size(g: &DependencyGraph) -> usize {
    let n = g.len();
    let arcs: Vec<_> = g.arcs().collect();
    (0u32..(1 << n))
        .filter(|&m| acyclic_without(n, &arcs, m))
        .map(|m| m.count_ones() as usize)
        .min()
        .unwrap()
}

/// Minimum over all move sequences of the peak number of objects parked in
/// buffers, by breadth-first search over the full {start, buffer, goal}^n
/// state space at increasing budgets. Buffer occupancy is weighted by `w`.
/// Any object may be moved to a buffer at any time; an object may go to its
/// goal once every object its goal overlaps has left its start.
pub fn brute_force_running_buffer(g: &DependencyGraph, w: &[u64]) -> u64 {
    let n = g.len();
    let succ: Vec<Vec<usize>> = (0..n).map(|v| g.successors(v).to_vec()).collect();
    let total: u64 = w.iter().sum();
    // state: per object 0 = start, 1 = buffer, 2 = goal
    for budget in 0..=total {
        let start = vec![0u8; n];
        let mut seen: HashSet<Vec<u8>> = HashSet::new();
        let mut queue = VecDeque::from([start.clone()]);
        seen.insert(start);
        while let Some(s) = queue.pop_front() {
            if s.iter().all(|&x| x == 2) {
                return budget;
            }
            let used: u64 = (0..n).filter(|&i| s[i] == 1).map(|i| w[i]).sum();
            for i in 0..n {
                let mut moves = Vec::new();
                if s[i] != 2 && succ[i].iter().all(|&j| s[j] != 0) {
                    moves.push(2u8);
                }
                if s[i] == 0 && used + w[i] <= budget {
                    moves.push(1u8);
                }
                for m in moves {
                    let mut t = s.clone();
                    t[i] = m;
                    if seen.insert(t.clone()) {
                        queue.push_back(t);
                    }
                }
            }
        }
    }
    unreachable!("parking every object is always feasible")
}
