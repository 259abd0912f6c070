//! Lazy-buffer rearrangement planning.
//!
//! Planning runs in two steps. A *primitive plan* decides, on the dependency
//! graph alone, which objects visit a buffer and in what order objects move;
//! buffer poses are then bound lazily by rejection sampling. When binding
//! fails, a bidirectional search grows trees of partial plans from the start
//! and from the goal and retries the two steps between random pairs of tree
//! nodes until one connects.
//!
//! Four primitive planners are available:
//!
//! | mode | minimizes                               | weights          |
//! |------|-----------------------------------------|------------------|
//! | ETBM | total weight sent to buffers            | HeCP (PP), HeTI (TI) |
//! | ERBM | peak weight concurrently in buffers     | HeCP (PP), HeTI (TI) |
//! | TBM  | number of buffer moves                  | uniform          |
//! | RBM  | peak number of objects in buffers       | uniform          |

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::depgraph::{min_weight_fvs_until, DependencyGraph};
use crate::error::Error;
use crate::geometry::{collide, Pose};
use crate::instance::{random_pose, validate_plan, Action, Arrangement, Instance, Objective, RearrangementPlan};
use crate::weighting::{hecp_weights, heti_weights, WeightVector};

/// Most objects a primitive planner handles (state sets are 128-bit masks).
pub const MAX_OBJECTS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PrimitiveKind {
    ToGoal,
    ToBuffer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PrimitiveAction {
    pub obj: usize,
    pub kind: PrimitiveKind,
}

impl PrimitiveAction {
    fn goal(obj: usize) -> Self {
        PrimitiveAction {
            obj,
            kind: PrimitiveKind::ToGoal,
        }
    }

    fn buffer(obj: usize) -> Self {
        PrimitiveAction {
            obj,
            kind: PrimitiveKind::ToBuffer,
        }
    }
}

/// Symbolic plan: which object moves, to its goal or to some buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimitivePlan {
    pub actions: Vec<PrimitiveAction>,
    /// ETBM/TBM: total weight of buffered objects. ERBM/RBM: the running
    /// buffer budget (in integerized weight units) the plan fits in.
    pub metric: f64,
}

impl PrimitivePlan {
    /// Checks the plan against the dependency graph: every object reaches its
    /// goal exactly once, buffers are visited at most once and only from the
    /// start pose, and an object goes to its goal only after everything its
    /// goal overlaps has left the start.
    pub fn is_consistent(&self, g: &DependencyGraph) -> bool {
        #[derive(Clone, Copy, PartialEq)]
        enum At {
            Start,
            Buffer,
            Goal,
        }
        let mut at = vec![At::Start; g.len()];
        for a in &self.actions {
            if a.obj >= g.len() {
                return false;
            }
            match (a.kind, at[a.obj]) {
                (PrimitiveKind::ToBuffer, At::Start) => at[a.obj] = At::Buffer,
                (PrimitiveKind::ToGoal, At::Start | At::Buffer)
                    if g.successors(a.obj).iter().all(|&j| at[j] != At::Start) =>
                {
                    at[a.obj] = At::Goal
                }
                _ => return false,
            }
        }
        at.iter().all(|&x| x == At::Goal)
    }

    pub fn buffer_count(&self) -> usize {
        self.actions
            .iter()
            .filter(|a| a.kind == PrimitiveKind::ToBuffer)
            .count()
    }
}

/// Primitive plan that parks a minimum-weight feedback vertex set.
pub fn primitive_plan_etbm(g: &DependencyGraph) -> PrimitivePlan {
    primitive_plan_etbm_until(g, None).expect("no deadline")
}

pub fn primitive_plan_etbm_until(g: &DependencyGraph, deadline: Option<Instant>) -> Option<PrimitivePlan> {
    let n = g.len();
    let fvs = min_weight_fvs_until(g, deadline)?;
    let mut in_fvs = vec![false; n];
    for &v in &fvs.vertices {
        in_fvs[v] = true;
    }
    let pred = g.predecessors();
    let mut at_start = vec![true; n];
    let mut at_goal = vec![false; n];
    let mut actions = Vec::with_capacity(n + fvs.vertices.len());
    let mut metric = 0.0;
    while actions.len() < n + fvs.vertices.len() {
        // buffered objects first: the shorter a buffer is held, the fewer goals it must avoid
        let clear = |i: usize| g.successors(i).iter().all(|&j| !at_start[j]);
        let ready = (0..n)
            .find(|&i| !at_start[i] && !at_goal[i] && clear(i))
            .or_else(|| (0..n).find(|&i| at_start[i] && clear(i)));
        if let Some(i) = ready {
            at_start[i] = false;
            at_goal[i] = true;
            actions.push(PrimitiveAction::goal(i));
            continue;
        }
        // stuck: some cycle runs through start poses, and it holds an FVS member
        let park = (0..n)
            .find(|&v| in_fvs[v] && at_start[v] && pred[v].iter().any(|&u| !at_goal[u]))
            .expect("a feedback vertex set member blocks every cycle");
        at_start[park] = false;
        metric += g.weight(park);
        actions.push(PrimitiveAction::buffer(park));
    }
    Some(PrimitivePlan { actions, metric })
}

/// `max(1, round(w_i * resolution / mean(w)))`, so the mean weight maps to
/// `resolution` units and no object occupies a buffer for free.
pub fn integerize_weights(weights: &[f64], resolution: u32) -> Vec<u64> {
    let mean = weights.iter().sum::<f64>() / weights.len().max(1) as f64;
    weights
        .iter()
        .map(|&w| {
            if mean > 0.0 {
                ((w * resolution as f64 / mean).round() as u64).max(1)
            } else {
                1
            }
        })
        .collect()
}

/// Primitive plan minimizing the peak integerized weight parked in buffers.
pub fn primitive_plan_erbm(g: &DependencyGraph, resolution: u32) -> PrimitivePlan {
    primitive_plan_erbm_until(g, resolution, None).expect("no deadline")
}

pub fn primitive_plan_erbm_until(
    g: &DependencyGraph,
    resolution: u32,
    deadline: Option<Instant>,
) -> Option<PrimitivePlan> {
    assert!(resolution >= 1, "resolution must be positive");
    assert!(g.len() <= MAX_OBJECTS, "at most {MAX_OBJECTS} objects");
    let units = integerize_weights(g.weights(), resolution);
    let mut search = RunningBufferSearch::new(g, units, deadline);
    for budget in search.budgets() {
        if let Some(actions) = search.run(budget)? {
            return Some(PrimitivePlan {
                actions,
                metric: budget as f64,
            });
        }
    }
    unreachable!("parking every object fits the total weight")
}

/// Budgets the iterative deepening of [`primitive_plan_erbm`] tries, in order.
pub fn running_buffer_budgets(g: &DependencyGraph, resolution: u32) -> Vec<u64> {
    let units = integerize_weights(g.weights(), resolution);
    RunningBufferSearch::new(g, units, None).budgets().collect()
}

type Mask = u128;

/// Depth-first search over (at-goal, in-buffer) sets with memoized dead ends.
struct RunningBufferSearch<'a> {
    g: &'a DependencyGraph,
    pred: Vec<Vec<usize>>,
    units: Vec<u64>,
    deadline: Option<Instant>,
    expanded: u64,
}

impl<'a> RunningBufferSearch<'a> {
    fn new(g: &'a DependencyGraph, units: Vec<u64>, deadline: Option<Instant>) -> Self {
        RunningBufferSearch {
            g,
            pred: g.predecessors(),
            units,
            deadline,
            expanded: 0,
        }
    }

    /// Budgets tried in order: 0, then every integer from the lightest object
    /// on a cycle up to the total weight.
    fn budgets(&self) -> impl Iterator<Item = u64> {
        let on_cycle = crate::depgraph::scc(self.g)
            .into_iter()
            .filter(|c| c.len() > 1)
            .flatten()
            .map(|v| self.units[v])
            .min();
        let total: u64 = self.units.iter().sum();
        let first = on_cycle.unwrap_or(0);
        std::iter::once(0).chain((first.max(1)..=total).take_while(move |_| on_cycle.is_some()))
    }

    /// `Some(Some(plan))` if a plan fits `budget`, `Some(None)` if none does,
    /// `None` on timeout.
    fn run(&mut self, budget: u64) -> Option<Option<Vec<PrimitiveAction>>> {
        let mut visited = HashSet::new();
        let mut path = Vec::new();
        let found = self.dfs(0, 0, 0, budget, &mut visited, &mut path)?;
        Some(found.then_some(path))
    }

    fn dfs(
        &mut self,
        mut goal: Mask,
        mut buffer: Mask,
        mut used: u64,
        budget: u64,
        visited: &mut HashSet<(Mask, Mask)>,
        path: &mut Vec<PrimitiveAction>,
    ) -> Option<bool> {
        self.expanded += 1;
        if self.expanded % 4096 == 0 && self.deadline.is_some_and(|d| Instant::now() >= d) {
            return None;
        }
        let n = self.g.len();
        let bit = |v: usize| -> Mask { 1 << v };
        let mark = path.len();
        // sending a ready object to its goal never hurts: do it eagerly
        loop {
            let left_start = goal | buffer;
            let clear = |i: usize| self.g.successors(i).iter().all(|&j| left_start & bit(j) != 0);
            let ready = (0..n)
                .find(|&i| buffer & bit(i) != 0 && clear(i))
                .or_else(|| (0..n).find(|&i| left_start & bit(i) == 0 && clear(i)));
            match ready {
                Some(i) => {
                    if buffer & bit(i) != 0 {
                        buffer &= !bit(i);
                        used -= self.units[i];
                    }
                    goal |= bit(i);
                    path.push(PrimitiveAction::goal(i));
                }
                None => break,
            }
        }
        if goal.count_ones() as usize == n {
            return Some(true);
        }
        if visited.insert((goal, buffer)) {
            // parking an object nobody waits on is pointless
            for i in 0..n {
                let at_start = (goal | buffer) & bit(i) == 0;
                if !at_start
                    || used + self.units[i] > budget
                    || !self.pred[i].iter().any(|&u| goal & bit(u) == 0)
                {
                    continue;
                }
                path.push(PrimitiveAction::buffer(i));
                if self.dfs(goal, buffer | bit(i), used + self.units[i], budget, visited, path)? {
                    return Some(true);
                }
                path.pop();
            }
        }
        path.truncate(mark);
        Some(false)
    }
}

/// A bound action prefix and the arrangement it leads to.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialPlan {
    pub actions: Vec<Action>,
    pub arrangement: Arrangement,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AllocationFailure {
    /// Index into the primitive plan of the action that could not be bound.
    pub action_index: usize,
    /// Longest valid prefix reached over all binding attempts.
    pub partial: PartialPlan,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrlbConfig {
    /// ERBM weight resolution (units per mean weight).
    pub resolution: u32,
    /// Candidate poses drawn per buffer action.
    pub buffer_samples: usize,
    /// Fresh-seed retries of the whole binding before giving up.
    pub binding_attempts: usize,
    /// Nodes kept per bidirectional search tree, oldest evicted first.
    pub frontier_cap: usize,
}

impl Default for TrlbConfig {
    fn default() -> Self {
        TrlbConfig {
            resolution: 4,
            buffer_samples: 500,
            binding_attempts: 10,
            frontier_cap: 50,
        }
    }
}

/// Binds the buffer actions of `pp` to concrete poses.
pub fn allocate_buffers(
    inst: &Instance,
    pp: &PrimitivePlan,
    seed: u64,
) -> Result<RearrangementPlan, AllocationFailure> {
    allocate_buffers_with(inst, pp, seed, &TrlbConfig::default())
}

pub fn allocate_buffers_with(
    inst: &Instance,
    pp: &PrimitivePlan,
    seed: u64,
    cfg: &TrlbConfig,
) -> Result<RearrangementPlan, AllocationFailure> {
    // (action index, object) of goal placements made while each buffer is held
    let mut windows: Vec<Vec<(usize, usize)>> = vec![Vec::new(); pp.actions.len()];
    for (k, a) in pp.actions.iter().enumerate() {
        if a.kind == PrimitiveKind::ToBuffer {
            let leave = pp.actions[k + 1..]
                .iter()
                .position(|b| b.obj == a.obj && b.kind == PrimitiveKind::ToGoal)
                .map_or(pp.actions.len(), |p| k + 1 + p);
            windows[k] = (k + 1..leave)
                .filter(|&t| pp.actions[t].kind == PrimitiveKind::ToGoal)
                .map(|t| (t, pp.actions[t].obj))
                .collect();
        }
    }
    // Attempts that needed repair moves are kept only as a fallback.
    let mut shortest: Option<Vec<Action>> = None;
    let mut best: Option<AllocationFailure> = None;
    for attempt in 0..cfg.binding_attempts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        match bind_once(inst, pp, &windows, cfg.buffer_samples, &mut rng) {
            Ok(actions) if actions.len() <= pp.actions.len() => return Ok(RearrangementPlan::new(actions)),
            Ok(actions) => {
                if shortest.as_ref().is_none_or(|s| actions.len() < s.len()) {
                    shortest = Some(actions);
                }
            }
            Err(f) => {
                if best.as_ref().is_none_or(|b| b.action_index < f.action_index) {
                    best = Some(f);
                }
            }
        }
    }
    match shortest {
        Some(actions) => Ok(RearrangementPlan::new(actions)),
        None => Err(best.expect("at least one attempt")),
    }
}

/// One binding pass. A buffer pose that cannot avoid every goal in its
/// window is allowed to block a later one; the blocked placement is then
/// preceded by a move of the buffered object to a fresh buffer.
fn bind_once(
    inst: &Instance,
    pp: &PrimitivePlan,
    windows: &[Vec<(usize, usize)>],
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Action>, AllocationFailure> {
    let mut arr = inst.start().clone();
    let mut actions = Vec::with_capacity(pp.actions.len());
    // buffered object -> primitive index of its to-buffer action
    let mut held: Vec<Option<usize>> = vec![None; inst.len()];
    for (k, a) in pp.actions.iter().enumerate() {
        let fail = |actions: Vec<Action>, arr: Arrangement| AllocationFailure {
            action_index: k,
            partial: PartialPlan {
                actions,
                arrangement: arr,
            },
        };
        match a.kind {
            PrimitiveKind::ToGoal => {
                if inst.at_goal(&arr, a.obj) {
                    held[a.obj] = None;
                    continue;
                }
                let goal = inst.goal()[a.obj];
                for b in inst.blockers(&arr, a.obj, &goal) {
                    let Some(since) = held[b] else {
                        return Err(fail(actions, arr));
                    };
                    let rest: Vec<(usize, usize)> =
                        windows[since].iter().copied().filter(|&(t, _)| t >= k).collect();
                    match buffer_pose(inst, &arr, b, &rest, samples, rng) {
                        Some((pose, avoided)) if avoided >= 1 => {
                            arr.set(b, pose);
                            actions.push(Action::tagged(inst, b, pose));
                        }
                        _ => return Err(fail(actions, arr)),
                    }
                }
                if !inst.pose_valid(&arr, a.obj, &goal) {
                    return Err(fail(actions, arr));
                }
                held[a.obj] = None;
                arr.set(a.obj, goal);
                actions.push(Action::tagged(inst, a.obj, goal));
            }
            PrimitiveKind::ToBuffer => match buffer_pose(inst, &arr, a.obj, &windows[k], samples, rng) {
                Some((pose, _)) => {
                    held[a.obj] = Some(k);
                    arr.set(a.obj, pose);
                    actions.push(Action::tagged(inst, a.obj, pose));
                }
                None => return Err(fail(actions, arr)),
            },
        }
    }
    Ok(actions)
}

/// Samples valid poses for `obj` and keeps the one clearing the longest
/// prefix of `goals`, stopping at the first that clears them all.
fn buffer_pose(
    inst: &Instance,
    arr: &Arrangement,
    obj: usize,
    goals: &[(usize, usize)],
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Option<(Pose, usize)> {
    let fp = inst.footprint(obj);
    let mut best: Option<(Pose, usize)> = None;
    for _ in 0..samples {
        let pose = random_pose(fp, inst.workspace(), rng);
        if !inst.pose_valid(arr, obj, &pose) {
            continue;
        }
        let avoided = goals
            .iter()
            .take_while(|&&(_, j)| j == obj || !collide(fp, &pose, inst.footprint(j), &inst.goal()[j]))
            .count();
        if best.is_none_or(|(_, b)| avoided > b) {
            best = Some((pose, avoided));
            if avoided == goals.len() {
                break;
            }
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Etbm,
    Erbm,
    Tbm,
    Rbm,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Etbm, Mode::Tbm, Mode::Erbm, Mode::Rbm];

    fn weighted(self) -> bool {
        matches!(self, Mode::Etbm | Mode::Erbm)
    }

    fn running_buffer(self) -> bool {
        matches!(self, Mode::Erbm | Mode::Rbm)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Etbm => "ETBM",
            Mode::Erbm => "ERBM",
            Mode::Tbm => "TBM",
            Mode::Rbm => "RBM",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_uppercase().as_str() {
            "ETBM" => Ok(Mode::Etbm),
            "ERBM" => Ok(Mode::Erbm),
            "TBM" => Ok(Mode::Tbm),
            "RBM" => Ok(Mode::Rbm),
            other => Err(Error::Input(format!("unknown TRLB mode `{other}`"))),
        }
    }
}

/// Per-object weights a mode plans with.
pub fn mode_weights(inst: &Instance, objective: Objective, mode: Mode) -> Result<WeightVector, Error> {
    if !mode.weighted() {
        return Ok(WeightVector::uniform(inst.len()));
    }
    match objective {
        Objective::Pp => hecp_weights(inst.objects(), inst.workspace()),
        Objective::Ti => Ok(heti_weights(inst.objects())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureReason {
    Timeout,
    TooManyObjects,
    Weights,
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("planning failed ({reason:?}) after binding {} actions", partial.actions.len())]
pub struct PlanFailure {
    pub reason: FailureReason,
    /// Longest valid prefix from the start arrangement.
    pub partial: PartialPlan,
}

/// Full ETRLB pipeline with the default configuration.
pub fn plan(
    inst: &Instance,
    objective: Objective,
    mode: Mode,
    seed: u64,
    time_budget: Duration,
) -> Result<RearrangementPlan, PlanFailure> {
    plan_with(inst, objective, mode, seed, time_budget, &TrlbConfig::default())
}

pub fn plan_with(
    inst: &Instance,
    objective: Objective,
    mode: Mode,
    seed: u64,
    time_budget: Duration,
    cfg: &TrlbConfig,
) -> Result<RearrangementPlan, PlanFailure> {
    let deadline = Instant::now() + time_budget;
    let fail = |reason, partial: PartialPlan| PlanFailure { reason, partial };
    let empty = PartialPlan {
        actions: Vec::new(),
        arrangement: inst.start().clone(),
    };
    if inst.len() > MAX_OBJECTS {
        return Err(fail(FailureReason::TooManyObjects, empty));
    }
    let weights = mode_weights(inst, objective, mode).map_err(|_| fail(FailureReason::Weights, empty.clone()))?;
    let planner = TwoStep {
        inst,
        weights: &weights,
        mode,
        cfg,
        deadline,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let first = match planner.run(inst.start(), inst.goal(), rng.next_u64()) {
        Step::Done(p) => return Ok(p),
        Step::Timeout => return Err(fail(FailureReason::Timeout, empty)),
        Step::Stuck(partial) => partial,
    };

    // bidirectional search over partial plans
    let mut forward: VecDeque<PartialPlan> = VecDeque::from([empty.clone()]);
    if !first.actions.is_empty() {
        forward.push_back(first);
    }
    let mut backward: VecDeque<PartialPlan> = VecDeque::from([PartialPlan {
        actions: Vec::new(),
        arrangement: inst.goal().clone(),
    }]);
    let best_partial = |forward: &VecDeque<PartialPlan>| {
        forward
            .iter()
            .max_by_key(|p| p.actions.len())
            .cloned()
            .unwrap_or_else(|| empty.clone())
    };
    loop {
        if Instant::now() >= deadline {
            return Err(fail(FailureReason::Timeout, best_partial(&forward)));
        }
        let f = forward[rng.random_range(0..forward.len())].clone();
        let b = backward[rng.random_range(0..backward.len())].clone();

        match planner.run(&f.arrangement, &b.arrangement, rng.next_u64()) {
            Step::Done(mid) => {
                if let Some(p) = join(inst, &f.actions, &mid.actions, &b.actions) {
                    return Ok(p);
                }
            }
            Step::Timeout => return Err(fail(FailureReason::Timeout, best_partial(&forward))),
            Step::Stuck(partial) => {
                if !partial.actions.is_empty() {
                    let mut actions = f.actions.clone();
                    actions.extend(partial.actions);
                    push_capped(&mut forward, PartialPlan {
                        actions,
                        arrangement: partial.arrangement,
                    }, cfg.frontier_cap);
                }
            }
        }

        // grow the backward tree: plan from b toward f and read it in reverse
        match planner.run(&b.arrangement, &f.arrangement, rng.next_u64()) {
            Step::Done(mid) => {
                let back = reverse_actions(inst, &b.arrangement, &mid.actions);
                if let Some(p) = join(inst, &f.actions, &back, &b.actions) {
                    return Ok(p);
                }
            }
            Step::Timeout => return Err(fail(FailureReason::Timeout, best_partial(&forward))),
            Step::Stuck(partial) => {
                if !partial.actions.is_empty() {
                    let mut actions = reverse_actions(inst, &b.arrangement, &partial.actions);
                    actions.extend(b.actions.iter().copied());
                    push_capped(&mut backward, PartialPlan {
                        actions,
                        arrangement: partial.arrangement,
                    }, cfg.frontier_cap);
                }
            }
        }
    }
}

fn push_capped(tree: &mut VecDeque<PartialPlan>, node: PartialPlan, cap: usize) {
    if tree.len() >= cap.max(2) {
        // the root stays; evict the oldest grown node
        tree.remove(1);
    }
    tree.push_back(node);
}

/// Undo sequence for `actions` applied from `from`: replayed from the
/// arrangement `actions` reach, it leads back to `from`.
fn reverse_actions(inst: &Instance, from: &Arrangement, actions: &[Action]) -> Vec<Action> {
    let mut arr = from.clone();
    let mut undo = Vec::with_capacity(actions.len());
    for a in actions {
        undo.push(Action::tagged(inst, a.obj, arr[a.obj]));
        arr.set(a.obj, a.pose);
    }
    undo.reverse();
    undo
}

fn join(inst: &Instance, head: &[Action], mid: &[Action], tail: &[Action]) -> Option<RearrangementPlan> {
    let actions = head
        .iter()
        .chain(mid)
        .chain(tail)
        .map(|a| Action::tagged(inst, a.obj, a.pose))
        .collect();
    let plan = RearrangementPlan::new(actions).compact(inst.start());
    validate_plan(&plan, inst).valid.then_some(plan)
}

enum Step {
    Done(RearrangementPlan),
    Stuck(PartialPlan),
    Timeout,
}

/// Primitive plan plus buffer binding between two arbitrary feasible
/// arrangements of the same objects.
struct TwoStep<'a> {
    inst: &'a Instance,
    weights: &'a WeightVector,
    mode: Mode,
    cfg: &'a TrlbConfig,
    deadline: Instant,
}

impl TwoStep<'_> {
    fn run(&self, from: &Arrangement, to: &Arrangement, seed: u64) -> Step {
        let sub = match self.inst.with_arrangements(from.clone(), to.clone()) {
            Ok(s) => s,
            Err(_) => {
                return Step::Stuck(PartialPlan {
                    actions: Vec::new(),
                    arrangement: from.clone(),
                })
            }
        };
        let g = DependencyGraph::build(&sub, self.weights);
        let pp = if self.mode.running_buffer() {
            primitive_plan_erbm_until(&g, self.cfg.resolution, Some(self.deadline))
        } else {
            primitive_plan_etbm_until(&g, Some(self.deadline))
        };
        let Some(pp) = pp else {
            return Step::Timeout;
        };
        match allocate_buffers_with(&sub, &pp, seed, self.cfg) {
            Ok(p) => Step::Done(p),
            Err(f) => Step::Stuck(f.partial),
        }
    }
}
