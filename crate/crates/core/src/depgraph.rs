//! Weighted dependency graphs over objects.
//!
//! Arc `i -> j` means the goal pose of object `i` overlaps the start pose of
//! object `j`, so `j` has to leave before `i` can be placed. Cycles have to
//! be broken by parking objects in buffers; a minimum-weight feedback vertex
//! set is the cheapest way to do that.

use std::fmt::Write as _;
use std::time::Instant;

use crate::geometry;
use crate::instance::{Arrangement, Instance};
use crate::weighting::{ObjectCharacteristics, WeightVector};

/// Largest strongly connected component the exact solver accepts.
pub const MAX_COMPONENT: usize = 128;

/// Relative tolerance under which two set weights count as tied.
const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct DependencyGraph {
    weights: Vec<f64>,
    succ: Vec<Vec<usize>>,
}

impl DependencyGraph {
    /// Graph over `weights.len()` vertices with the given arcs. Self-arcs and
    /// duplicates are dropped.
    pub fn from_arcs(weights: Vec<f64>, arcs: &[(usize, usize)]) -> Self {
        let n = weights.len();
        let mut succ = vec![Vec::new(); n];
        for &(i, j) in arcs {
            assert!(i < n && j < n, "arc ({i}, {j}) out of range for {n} vertices");
            if i != j {
                succ[i].push(j);
            }
        }
        for s in &mut succ {
            s.sort_unstable();
            s.dedup();
        }
        DependencyGraph { weights, succ }
    }

    /// Dependencies between `start` and `goal` arrangements of `objects`.
    pub fn from_arrangements(
        objects: &[ObjectCharacteristics],
        start: &Arrangement,
        goal: &Arrangement,
        weights: &WeightVector,
    ) -> Self {
        let n = objects.len();
        assert_eq!(weights.len(), n, "one weight per object");
        let succ = (0..n)
            .map(|i| {
                let fp = &objects[i].footprint;
                (0..n)
                    .filter(|&j| {
                        j != i && geometry::collide(fp, &goal[i], &objects[j].footprint, &start[j])
                    })
                    .collect()
            })
            .collect();
        DependencyGraph {
            weights: weights.as_slice().to_vec(),
            succ,
        }
    }

    pub fn build(inst: &Instance, weights: &WeightVector) -> Self {
        DependencyGraph::from_arrangements(inst.objects(), inst.start(), inst.goal(), weights)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, v: usize) -> f64 {
        self.weights[v]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Objects that `v` waits on.
    pub fn successors(&self, v: usize) -> &[usize] {
        &self.succ[v]
    }

    pub fn has_arc(&self, i: usize, j: usize) -> bool {
        self.succ[i].binary_search(&j).is_ok()
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |&j| (i, j)))
    }

    pub fn arc_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    /// Predecessor lists: `pred[j]` holds every `i` with an arc `i -> j`.
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut pred = vec![Vec::new(); self.len()];
        for (i, j) in self.arcs() {
            pred[j].push(i);
        }
        pred
    }

    /// An order of the vertices not in `removed` in which every vertex comes
    /// after all of its successors (dependencies first). `None` if the
    /// remaining graph has a cycle. Ties resolve to the smallest index.
    pub fn dependency_order(&self, removed: &[bool]) -> Option<Vec<usize>> {
        let n = self.len();
        let mut pending: Vec<usize> = (0..n)
            .map(|v| self.succ[v].iter().filter(|&&j| !removed[j]).count())
            .collect();
        let pred = self.predecessors();
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&v| !removed[v] && pending[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &u in &pred[v] {
                if !removed[u] {
                    pending[u] -= 1;
                    if pending[u] == 0 {
                        ready.insert(u);
                    }
                }
            }
        }
        (order.len() == removed.iter().filter(|r| !**r).count()).then_some(order)
    }

    pub fn is_acyclic_without(&self, removed: &[usize]) -> bool {
        let mut mask = vec![false; self.len()];
        for &v in removed {
            mask[v] = true;
        }
        self.dependency_order(&mask).is_some()
    }

    /// Graphviz rendering, vertices labelled `index:weight`.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph dependencies {\n");
        for (v, w) in self.weights.iter().enumerate() {
            let _ = writeln!(s, "  {v} [label=\"{v}:{w:.4}\"];");
        }
        for (i, j) in self.arcs() {
            let _ = writeln!(s, "  {i} -> {j};");
        }
        s.push_str("}\n");
        s
    }
}

/// Strongly connected components in reverse topological order of the
/// condensation: a component only depends on components listed before it.
/// Vertices inside a component are sorted.
pub fn scc(g: &DependencyGraph) -> Vec<Vec<usize>> {
    // iterative Tarjan
    let n = g.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut edge)) = call.last_mut() {
            if let Some(&w) = g.succ[v].get(*edge) {
                *edge += 1;
                if index[w] == UNSEEN {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }
    comps
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackVertexSet {
    /// Sorted vertex indices.
    pub vertices: Vec<usize>,
    /// Sum of member weights, accumulated in index order.
    pub weight: f64,
}

/// Exact minimum-weight feedback vertex set. Among optimal sets of (within
/// rounding) equal weight the lexicographically smallest index list wins.
pub fn min_weight_fvs(g: &DependencyGraph) -> FeedbackVertexSet {
    min_weight_fvs_until(g, None).expect("no deadline")
}

/// As [`min_weight_fvs`], giving up with `None` once `deadline` passes.
pub fn min_weight_fvs_until(g: &DependencyGraph, deadline: Option<Instant>) -> Option<FeedbackVertexSet> {
    let mut vertices = Vec::new();
    for comp in scc(g) {
        if comp.len() < 2 {
            continue;
        }
        assert!(
            comp.len() <= MAX_COMPONENT,
            "component of {} vertices exceeds the exact solver limit of {MAX_COMPONENT}",
            comp.len()
        );
        let local = LocalGraph::induced(g, &comp);
        let mut solver = BranchAndBound::new(deadline);
        let chosen = solver.canonical_optimum(&local)?;
        vertices.extend(iter_bits(chosen).map(|b| comp[b]));
    }
    vertices.sort_unstable();
    let weight = vertices.iter().map(|&v| g.weights[v]).sum();
    Some(FeedbackVertexSet { vertices, weight })
}

type Mask = u128;

fn bit(v: usize) -> Mask {
    1 << v
}

fn iter_bits(mut m: Mask) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let b = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(b)
        }
    })
}

/// Component re-indexed to `0..k` in ascending global order, adjacency as bitmasks.
#[derive(Clone, Debug)]
struct LocalGraph {
    succ: Vec<Mask>,
    weights: Vec<f64>,
}

impl LocalGraph {
    fn induced(g: &DependencyGraph, comp: &[usize]) -> Self {
        let succ = comp
            .iter()
            .map(|&v| {
                g.succ[v]
                    .iter()
                    .filter_map(|j| comp.binary_search(j).ok())
                    .fold(0, |m, b| m | bit(b))
            })
            .collect();
        LocalGraph {
            succ,
            weights: comp.iter().map(|&v| g.weights[v]).collect(),
        }
    }

    fn all(&self) -> Mask {
        if self.succ.len() == 128 {
            Mask::MAX
        } else {
            bit(self.succ.len()) - 1
        }
    }
}

fn tolerance(x: f64) -> f64 {
    TIE_TOL * x.abs().max(1.0)
}

struct BranchAndBound {
    deadline: Option<Instant>,
    nodes: u64,
    timed_out: bool,
}

impl BranchAndBound {
    fn new(deadline: Option<Instant>) -> Self {
        BranchAndBound {
            deadline,
            nodes: 0,
            timed_out: false,
        }
    }

    /// Optimal set for one strongly connected component, canonicalized to
    /// the lexicographically smallest optimum by fixing vertices in index
    /// order. `None` on timeout.
    fn canonical_optimum(&mut self, g: &LocalGraph) -> Option<Mask> {
        let (best, mut witness) =
            self.solve(&g.succ, &g.weights, g.all(), 0.0, 0, f64::INFINITY)?;
        let mut forced_in: Mask = 0;
        let mut weights = g.weights.clone();
        for v in 0..g.weights.len() {
            if witness & bit(v) != 0 {
                forced_in |= bit(v);
                continue;
            }
            let cost: f64 = iter_bits(forced_in | bit(v)).map(|u| g.weights[u]).sum();
            let found = self.solve(
                &g.succ,
                &weights,
                g.all() & !(forced_in | bit(v)),
                cost,
                forced_in | bit(v),
                best + tolerance(best),
            );
            if self.timed_out {
                return None;
            }
            match found {
                Some((_, set)) => {
                    forced_in |= bit(v);
                    witness = set;
                }
                None => weights[v] = f64::INFINITY,
            }
        }
        Some(forced_in)
    }

    /// Cheapest superset of `chosen` that breaks every cycle among `alive`,
    /// provided its total cost stays within `budget`.
    fn solve(
        &mut self,
        succ: &[Mask],
        weights: &[f64],
        mut alive: Mask,
        mut cost: f64,
        mut chosen: Mask,
        budget: f64,
    ) -> Option<(f64, Mask)> {
        self.nodes += 1;
        if self.nodes % 1024 == 0 {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.timed_out = true;
                }
            }
        }
        if self.timed_out {
            return None;
        }

        // self-loops force inclusion; vertices without in- or out-arcs are on no cycle
        loop {
            let mut changed = false;
            for v in iter_bits(alive) {
                let out = succ[v] & alive;
                if out & bit(v) != 0 {
                    cost += weights[v];
                    chosen |= bit(v);
                    alive &= !bit(v);
                    changed = true;
                } else if out == 0 || !has_pred(succ, alive, v) {
                    alive &= !bit(v);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if cost > budget + tolerance(budget) {
            return None;
        }
        if alive == 0 {
            return Some((cost, chosen));
        }

        let comps = mask_sccs(succ, alive);
        if comps.len() > 1 {
            let bounds: Vec<f64> = comps.iter().map(|&c| cycle_packing_bound(succ, weights, c)).collect();
            let mut remaining_lb: f64 = bounds.iter().sum();
            if cost + remaining_lb > budget + tolerance(budget) {
                return None;
            }
            for (k, &c) in comps.iter().enumerate() {
                remaining_lb -= bounds[k];
                let (c_cost, c_set) =
                    self.solve(succ, weights, c, 0.0, 0, budget - cost - remaining_lb)?;
                cost += c_cost;
                chosen |= c_set;
            }
            return Some((cost, chosen));
        }

        if cost + cycle_packing_bound(succ, weights, alive) > budget + tolerance(budget) {
            return None;
        }

        let v = branch_vertex(succ, weights, alive);
        let mut best: Option<(f64, Mask)> = None;
        let mut bound = budget;
        if weights[v].is_finite() {
            if let Some(found) = self.solve(
                succ,
                weights,
                alive & !bit(v),
                cost + weights[v],
                chosen | bit(v),
                bound,
            ) {
                bound = found.0 - tolerance(found.0);
                best = Some(found);
            }
        }
        // keep v: bypass it so that every path through v becomes a direct arc
        let mut contracted = succ.to_vec();
        let through = succ[v] & alive & !bit(v);
        for u in iter_bits(alive) {
            if u != v && contracted[u] & bit(v) != 0 {
                contracted[u] |= through;
            }
        }
        if let Some(found) = self.solve(&contracted, weights, alive & !bit(v), cost, chosen, bound) {
            best = Some(found);
        }
        best
    }
}

fn has_pred(succ: &[Mask], alive: Mask, v: usize) -> bool {
    iter_bits(alive).any(|u| succ[u] & bit(v) != 0)
}

fn reach(succ: &[Mask], alive: Mask, from: usize) -> Mask {
    let mut seen = bit(from);
    let mut frontier = bit(from);
    while frontier != 0 {
        let mut next = 0;
        for u in iter_bits(frontier) {
            next |= succ[u];
        }
        next &= alive & !seen;
        seen |= next;
        frontier = next;
    }
    seen
}

fn coreach(succ: &[Mask], alive: Mask, to: usize) -> Mask {
    let mut seen = bit(to);
    let mut frontier = bit(to);
    while frontier != 0 {
        let next = iter_bits(alive & !seen)
            .filter(|&u| succ[u] & frontier != 0)
            .fold(0, |m, u| m | bit(u));
        seen |= next;
        frontier = next;
    }
    seen
}

/// Nontrivial strongly connected components of the subgraph on `alive`.
fn mask_sccs(succ: &[Mask], alive: Mask) -> Vec<Mask> {
    let mut rest = alive;
    let mut comps = Vec::new();
    while rest != 0 {
        let v = rest.trailing_zeros() as usize;
        let comp = reach(succ, rest, v) & coreach(succ, rest, v);
        rest &= !comp;
        if comp.count_ones() > 1 || succ[v] & bit(v) != 0 {
            comps.push(comp);
        }
    }
    comps
}

/// Shortest cycle in the subgraph on `alive`, as a vertex list.
fn shortest_cycle(succ: &[Mask], alive: Mask) -> Option<Vec<usize>> {
    let mut best: Option<Vec<usize>> = None;
    let mut parent = [usize::MAX; 128];
    for s in iter_bits(alive) {
        if succ[s] & bit(s) != 0 {
            return Some(vec![s]);
        }
        let limit = best.as_ref().map_or(usize::MAX, Vec::len);
        let mut seen = bit(s);
        let mut frontier = bit(s);
        let mut depth = 0;
        'bfs: while frontier != 0 && depth + 1 < limit {
            depth += 1;
            let mut next = 0;
            for u in iter_bits(frontier) {
                let out = succ[u] & alive;
                if out & bit(s) != 0 {
                    let mut cycle = vec![u];
                    let mut x = u;
                    while x != s {
                        x = parent[x];
                        cycle.push(x);
                    }
                    best = Some(cycle);
                    break 'bfs;
                }
                for w in iter_bits(out & !seen & !next) {
                    parent[w] = u;
                    next |= bit(w);
                }
            }
            seen |= next;
            frontier = next;
        }
        if best.as_ref().is_some_and(|c| c.len() == 2) {
            break;
        }
    }
    best
}

/// Local-ratio lower bound: repeatedly take a shortest cycle, charge its
/// cheapest residual weight to the bound and subtract it along the cycle.
fn cycle_packing_bound(succ: &[Mask], weights: &[f64], alive: Mask) -> f64 {
    let mut residual = weights.to_vec();
    let mut live = alive;
    let mut bound = 0.0;
    while let Some(cycle) = shortest_cycle(succ, live) {
        let m = cycle.iter().map(|&v| residual[v]).fold(f64::INFINITY, f64::min);
        if m.is_infinite() {
            return f64::INFINITY;
        }
        bound += m;
        for &v in &cycle {
            residual[v] -= m;
            if residual[v] <= 0.0 {
                live &= !bit(v);
            }
        }
    }
    bound
}

fn branch_vertex(succ: &[Mask], weights: &[f64], alive: Mask) -> usize {
    let score = |v: usize| {
        let out = (succ[v] & alive).count_ones() as f64;
        let inn = iter_bits(alive).filter(|&u| succ[u] & bit(v) != 0).count() as f64;
        let w = if weights[v].is_finite() { weights[v].max(1e-12) } else { f64::MAX };
        out * inn / w
    };
    iter_bits(alive)
        .map(|v| (v, score(v)))
        .fold((usize::MAX, f64::NEG_INFINITY), |best, (v, s)| if s > best.1 { (v, s) } else { best })
        .0
}
