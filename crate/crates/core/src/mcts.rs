//! Monte Carlo tree search over arrangements.
//!
//! Each node holds an arrangement. From a node, every object away from its
//! goal proposes actions: straight to the goal if the goal is free, else one
//! relocation per object blocking that goal. Relocation poses are sampled
//! once, when the node is expanded, and frozen into the child edge.
//!
//! Selection is UCT. The weighted variant scales the exploration constant
//! per action by the weight of the object the action serves, `C (1 + w_i /
//! Σw)`; under the TI objective it also rewards goal placements by task
//! impedance instead of by count.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::error::Error;
use crate::instance::{random_pose, validate_plan, Action, Arrangement, Instance, Objective, RearrangementPlan};
use crate::weighting::{hecp_weights, heti_weights, WeightVector};

/// Uniform candidates drawn per relocation before the action is dropped.
pub const RELOCATION_SAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SearchMode {
    /// Plain UCT, reward = objects at goal.
    Mcts,
    /// Weight-scaled exploration and objective-specific reward.
    Emcts,
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchMode::Mcts => "MCTS",
            SearchMode::Emcts => "EMCTS",
        })
    }
}

impl FromStr for SearchMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_uppercase().as_str() {
            "MCTS" => Ok(SearchMode::Mcts),
            "EMCTS" => Ok(SearchMode::Emcts),
            other => Err(Error::Input(format!("unknown search mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MctsConfig {
    pub exploration: f64,
    pub max_iterations: u64,
    pub time_budget: Duration,
    /// Rollout length cap; `None` means twice the object count.
    pub rollout_depth: Option<usize>,
    /// Stop once this many iterations pass without a shorter complete plan.
    pub patience: Option<u64>,
    pub seed: u64,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig {
            exploration: 1.0,
            max_iterations: 1_000_000,
            time_budget: Duration::from_secs(60),
            rollout_depth: None,
            patience: Some(2_000),
            seed: 0,
        }
    }
}

impl MctsConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.exploration > 0.0 && self.exploration.is_finite()) {
            return Err(Error::Input("exploration constant must be positive".into()));
        }
        if self.max_iterations == 0 || self.time_budget.is_zero() || self.rollout_depth == Some(0) || self.patience == Some(0) {
            return Err(Error::Input("search budgets must be positive".into()));
        }
        Ok(())
    }
}

/// An edge out of a node: the action, the object whose goal it serves, and
/// the child once created.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub action: Action,
    pub beneficiary: usize,
    pub child: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchNode {
    pub arrangement: Arrangement,
    pub parent: Option<usize>,
    /// n(s)
    pub visits: u64,
    /// ω(s), in units of the maximal reward so it is on the scale of C.
    pub total_reward: f64,
    /// `None` until the node is first selected.
    pub edges: Option<Vec<Edge>>,
}

/// Statistics of one arm as seen by [`ucb_select`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmStats {
    pub beneficiary: usize,
    pub visits: u64,
    pub total_reward: f64,
}

/// Per-arm exploration constant.
pub fn exploration_constant(c: f64, beneficiary: usize, weights: &WeightVector, mode: SearchMode) -> f64 {
    match mode {
        SearchMode::Mcts => c,
        SearchMode::Emcts => {
            let total = weights.total();
            if total > 0.0 {
                c * (1.0 + weights[beneficiary] / total)
            } else {
                c
            }
        }
    }
}

/// UCT arm choice: unvisited arms first, else the argmax of
/// `ω/n + C_i sqrt(2 ln N / n)`. Ties go to the earliest arm. `None` when
/// there are no arms.
pub fn ucb_select(
    parent_visits: u64,
    arms: &[ArmStats],
    weights: &WeightVector,
    mode: SearchMode,
    c: f64,
) -> Option<usize> {
    if let Some(i) = arms.iter().position(|a| a.visits == 0) {
        return Some(i);
    }
    let ln_n = (parent_visits.max(1) as f64).ln();
    let mut best: Option<(usize, f64)> = None;
    for (i, a) in arms.iter().enumerate() {
        let n = a.visits as f64;
        let ci = exploration_constant(c, a.beneficiary, weights, mode);
        let score = a.total_reward / n + ci * (2.0 * ln_n / n).sqrt();
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((i, score));
        }
    }
    best.map(|(i, _)| i)
}

/// PP: objects at goal. TI: summed `weights` of objects at goal.
pub fn reward(arr: &Arrangement, inst: &Instance, weights: &WeightVector, objective: Objective) -> f64 {
    let at_goal = (0..inst.len()).filter(|&i| inst.at_goal(arr, i));
    match objective {
        Objective::Pp => at_goal.count() as f64,
        Objective::Ti => at_goal.map(|i| weights[i]).sum(),
    }
}

/// Candidate actions from `arr`, in ascending beneficiary order.
pub fn legal_actions(arr: &Arrangement, inst: &Instance, rng: &mut impl Rng) -> Vec<Edge> {
    let mut edges = Vec::new();
    for i in 0..inst.len() {
        if inst.at_goal(arr, i) {
            continue;
        }
        let goal = inst.goal()[i];
        let blockers = inst.blockers(arr, i, &goal);
        if blockers.is_empty() {
            edges.push(Edge {
                action: Action::to_goal(inst, i),
                beneficiary: i,
                child: None,
            });
            continue;
        }
        for j in blockers {
            if let Some(pose) = relocation_pose(arr, inst, j, i, rng) {
                edges.push(Edge {
                    action: Action::tagged(inst, j, pose),
                    beneficiary: i,
                    child: None,
                });
            }
        }
    }
    edges
}

/// A uniform draw from [`legal_actions`] without sampling a pose for every
/// relocation: pick a (beneficiary, mover) pair uniformly, sample a pose for
/// that pair only, and discard the pair if sampling fails.
pub fn random_legal_action(arr: &Arrangement, inst: &Instance, rng: &mut impl Rng) -> Option<Action> {
    let mut pairs: Vec<(usize, Option<usize>)> = Vec::new();
    for i in 0..inst.len() {
        if inst.at_goal(arr, i) {
            continue;
        }
        let blockers = inst.blockers(arr, i, &inst.goal()[i]);
        if blockers.is_empty() {
            pairs.push((i, None));
        }
        pairs.extend(blockers.into_iter().map(|j| (i, Some(j))));
    }
    while !pairs.is_empty() {
        let (i, mover) = pairs.swap_remove(rng.random_range(0..pairs.len()));
        match mover {
            None => return Some(Action::to_goal(inst, i)),
            Some(j) => {
                if let Some(pose) = relocation_pose(arr, inst, j, i, rng) {
                    return Some(Action::tagged(inst, j, pose));
                }
            }
        }
    }
    None
}

/// A valid pose for `obj` that also clears the goal of `beneficiary`.
fn relocation_pose(
    arr: &Arrangement,
    inst: &Instance,
    obj: usize,
    beneficiary: usize,
    rng: &mut impl Rng,
) -> Option<crate::Pose> {
    let fp = inst.footprint(obj);
    let target = (inst.footprint(beneficiary), &inst.goal()[beneficiary]);
    (0..RELOCATION_SAMPLES).find_map(|_| {
        let pose = random_pose(fp, inst.workspace(), rng);
        let ok = inst.pose_valid(arr, obj, &pose) && !crate::geometry::collide(fp, &pose, target.0, target.1);
        ok.then_some(pose)
    })
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("search exhausted its budget after {iterations} iterations (best reward {best_reward})")]
pub struct SearchFailure {
    pub iterations: u64,
    pub best_reward: f64,
    pub best_arrangement: Arrangement,
}

/// What one iteration reached, with the actions from the root if anything.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Open,
    /// A tree node sits at the goal.
    TreeGoal(Vec<Action>),
    /// Only the playout got there.
    RolloutGoal(Vec<Action>),
}

/// Search tree plus the bookkeeping of one run.
pub struct Tree<'a> {
    inst: &'a Instance,
    objective: Objective,
    mode: SearchMode,
    /// Drives exploration scaling.
    explore_weights: WeightVector,
    /// Scores arrangements.
    reward_weights: WeightVector,
    max_reward: f64,
    pub nodes: Vec<SearchNode>,
    pub iterations: u64,
    c: f64,
    depth: usize,
    rng: ChaCha8Rng,
}

impl<'a> Tree<'a> {
    pub fn new(inst: &'a Instance, objective: Objective, mode: SearchMode, cfg: &MctsConfig) -> Result<Self, Error> {
        cfg.validate()?;
        let (explore_weights, reward_objective) = match (mode, objective) {
            (SearchMode::Mcts, _) => (WeightVector::uniform(inst.len()), Objective::Pp),
            (SearchMode::Emcts, Objective::Pp) => (hecp_weights(inst.objects(), inst.workspace())?, Objective::Pp),
            (SearchMode::Emcts, Objective::Ti) => (heti_weights(inst.objects()), Objective::Ti),
        };
        let reward_weights = heti_weights(inst.objects());
        let max_reward = reward(inst.goal(), inst, &reward_weights, reward_objective);
        Ok(Tree {
            inst,
            objective: reward_objective,
            mode,
            explore_weights,
            reward_weights,
            max_reward: if max_reward > 0.0 { max_reward } else { 1.0 },
            nodes: vec![SearchNode {
                arrangement: inst.start().clone(),
                parent: None,
                visits: 0,
                total_reward: 0.0,
                edges: None,
            }],
            iterations: 0,
            c: cfg.exploration,
            depth: cfg.rollout_depth.unwrap_or(2 * inst.len()),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        })
    }

    fn normalized_reward(&self, arr: &Arrangement) -> f64 {
        reward(arr, self.inst, &self.reward_weights, self.objective) / self.max_reward
    }

    fn is_goal(&self, arr: &Arrangement) -> bool {
        (0..self.inst.len()).all(|i| self.inst.at_goal(arr, i))
    }

    /// Actions from the root to `node`.
    fn path_to(&self, mut node: usize) -> Vec<Action> {
        let mut path = Vec::new();
        while let Some(p) = self.nodes[node].parent {
            let edge = self.nodes[p]
                .edges
                .as_ref()
                .and_then(|es| es.iter().find(|e| e.child == Some(node)))
                .expect("child hangs off its parent");
            path.push(edge.action);
            node = p;
        }
        path.reverse();
        path
    }

    /// One select / expand / rollout / backpropagate round.
    pub fn iterate(&mut self) -> Outcome {
        self.iterations += 1;
        let mut node = 0;
        let mut fresh = self.nodes[0].visits == 0;
        while !fresh {
            if self.is_goal(&self.nodes[node].arrangement) {
                break;
            }
            if self.nodes[node].edges.is_none() {
                let edges = legal_actions(&self.nodes[node].arrangement, self.inst, &mut self.rng);
                self.nodes[node].edges = Some(edges);
            }
            let edges = self.nodes[node].edges.as_ref().expect("just expanded");
            let arms: Vec<ArmStats> = edges
                .iter()
                .map(|e| {
                    let (visits, total_reward) =
                        e.child.map_or((0, 0.0), |c| (self.nodes[c].visits, self.nodes[c].total_reward));
                    ArmStats {
                        beneficiary: e.beneficiary,
                        visits,
                        total_reward,
                    }
                })
                .collect();
            let Some(k) = ucb_select(self.nodes[node].visits, &arms, &self.explore_weights, self.mode, self.c) else {
                break; // dead end
            };
            let edge = edges[k].clone();
            node = match edge.child {
                Some(c) => c,
                None => {
                    let mut arr = self.nodes[node].arrangement.clone();
                    arr.set(edge.action.obj, edge.action.pose);
                    let id = self.nodes.len();
                    self.nodes.push(SearchNode {
                        arrangement: arr,
                        parent: Some(node),
                        visits: 0,
                        total_reward: 0.0,
                        edges: None,
                    });
                    self.nodes[node].edges.as_mut().expect("expanded")[k].child = Some(id);
                    fresh = true;
                    id
                }
            };
        }

        let (value, tail) = self.rollout(node);
        let mut cur = Some(node);
        while let Some(c) = cur {
            self.nodes[c].visits += 1;
            self.nodes[c].total_reward += value;
            cur = self.nodes[c].parent;
        }
        if self.is_goal(&self.nodes[node].arrangement) {
            return Outcome::TreeGoal(self.path_to(node));
        }
        match tail {
            Some(tail) => {
                let mut path = self.path_to(node);
                path.extend(tail);
                Outcome::RolloutGoal(path)
            }
            None => Outcome::Open,
        }
    }

    /// Uniform random playout. Returns the best normalized reward seen and,
    /// if the goal was reached, the playout's actions.
    fn rollout(&mut self, node: usize) -> (f64, Option<Vec<Action>>) {
        let mut arr = self.nodes[node].arrangement.clone();
        let mut best = self.normalized_reward(&arr);
        let mut actions = Vec::new();
        if self.is_goal(&arr) {
            return (best, Some(actions));
        }
        for _ in 0..self.depth {
            let Some(a) = random_legal_action(&arr, self.inst, &mut self.rng) else {
                break;
            };
            arr.set(a.obj, a.pose);
            actions.push(a);
            best = best.max(self.normalized_reward(&arr));
            if self.is_goal(&arr) {
                return (best, Some(actions));
            }
        }
        (best, None)
    }

    fn best_node(&self) -> usize {
        (0..self.nodes.len())
            .max_by(|&a, &b| {
                let ra = self.normalized_reward(&self.nodes[a].arrangement);
                let rb = self.normalized_reward(&self.nodes[b].arrangement);
                ra.total_cmp(&rb).then(b.cmp(&a))
            })
            .unwrap_or(0)
    }
}

/// Runs the search until a plan is found or a budget runs out.
pub fn search(
    inst: &Instance,
    objective: Objective,
    mode: SearchMode,
    cfg: &MctsConfig,
) -> Result<Result<RearrangementPlan, SearchFailure>, Error> {
    let mut tree = Tree::new(inst, objective, mode, cfg)?;
    if tree.is_goal(inst.start()) {
        return Ok(Ok(RearrangementPlan::default()));
    }
    let deadline = Instant::now() + cfg.time_budget;
    let finish = |actions: Vec<Action>| {
        let actions = actions.into_iter().map(|a| Action::tagged(inst, a.obj, a.pose)).collect();
        let plan = RearrangementPlan::new(actions).compact(inst.start());
        validate_plan(&plan, inst).valid.then_some(plan)
    };
    // shortest plan completed by a playout, the answer if the tree never gets there
    let mut fallback: Option<RearrangementPlan> = None;
    let mut improved_at = 0;
    while tree.iterations < cfg.max_iterations && Instant::now() < deadline {
        if fallback.is_some() && cfg.patience.is_some_and(|p| tree.iterations - improved_at >= p) {
            break;
        }
        match tree.iterate() {
            Outcome::TreeGoal(actions) => {
                if let Some(plan) = finish(actions) {
                    return Ok(Ok(match fallback {
                        Some(f) if f.len() < plan.len() => f,
                        _ => plan,
                    }));
                }
            }
            Outcome::RolloutGoal(actions) => {
                if let Some(plan) = finish(actions) {
                    if fallback.as_ref().is_none_or(|f| plan.len() < f.len()) {
                        fallback = Some(plan);
                        improved_at = tree.iterations;
                    }
                }
            }
            Outcome::Open => {}
        }
    }
    if let Some(plan) = fallback {
        return Ok(Ok(plan));
    }
    let best = tree.best_node();
    let arr = tree.nodes[best].arrangement.clone();
    Ok(Err(SearchFailure {
        iterations: tree.iterations,
        best_reward: reward(&arr, inst, &tree.reward_weights, tree.objective),
        best_arrangement: arr,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Footprint, Pose, Workspace};
    use crate::weighting::ObjectCharacteristics;

    fn squares(start: &[(f64, f64)], goal: &[(f64, f64)]) -> Instance {
        let objs = vec![ObjectCharacteristics::new(Footprint::square(1.0).unwrap()); start.len()];
        let arr = |ps: &[(f64, f64)]| Arrangement::new(ps.iter().map(|&(x, y)| Pose::new(x, y, 0.0)).collect());
        Instance::new(Workspace::default(), objs, arr(start), arr(goal), 0).unwrap()
    }

    fn swap() -> Instance {
        squares(&[(3.0, 5.0), (7.0, 5.0)], &[(7.0, 5.0), (3.0, 5.0)])
    }

    #[test]
    fn legal_action_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let inst = swap();
        assert!(legal_actions(inst.goal(), &inst, &mut rng).is_empty());

        let edges = legal_actions(inst.start(), &inst, &mut rng);
        assert_eq!(edges.len(), 2);
        assert_eq!((edges[0].action.obj, edges[0].beneficiary), (1, 0));
        assert_eq!((edges[1].action.obj, edges[1].beneficiary), (0, 1));
        for e in &edges {
            assert_eq!(e.action.tag, crate::ActionTag::ToBuffer);
            assert!(inst.pose_valid(inst.start(), e.action.obj, &e.action.pose));
        }

        let one = squares(&[(2.0, 2.0), (5.0, 5.0)], &[(2.0, 8.0), (5.0, 5.0)]);
        let edges = legal_actions(one.start(), &one, &mut rng);
        assert_eq!(edges.len(), 1);
        assert_eq!(edges[0].action, Action::to_goal(&one, 0));
    }

    #[test]
    fn ucb_examples() {
        let w = WeightVector::uniform(3);
        assert!((exploration_constant(1.0, 0, &w, SearchMode::Emcts) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(exploration_constant(1.0, 0, &w, SearchMode::Mcts), 1.0);

        let arm = |b, n, r| ArmStats {
            beneficiary: b,
            visits: n,
            total_reward: r,
        };
        let arms = [arm(0, 4, 2.0), arm(1, 0, 0.0), arm(2, 3, 3.0)];
        assert_eq!(ucb_select(7, &arms, &w, SearchMode::Emcts, 1.0), Some(1));
        assert_eq!(ucb_select(0, &[], &w, SearchMode::Mcts, 1.0), None);

        // N = 10, C = 1, weights {1, 3}: C_0 = 1.25, C_1 = 1.75
        // sqrt(2 ln 10 / 5) = 0.95970
        // weighted: arm 0 0.9 + 1.25 * 0.9597 = 2.0996, arm 1 0.5 + 1.75 * 0.9597 = 2.1795
        // plain: arm 0 0.9 + 0.9597 = 1.8597, arm 1 0.5 + 0.9597 = 1.4597
        let w = WeightVector::new(vec![1.0, 3.0]).unwrap();
        let arms = [arm(0, 5, 4.5), arm(1, 5, 2.5)];
        assert_eq!(ucb_select(10, &arms, &w, SearchMode::Emcts, 1.0), Some(1));
        assert_eq!(ucb_select(10, &arms, &w, SearchMode::Mcts, 1.0), Some(0));
        // a tie goes to the earlier arm
        let arms = [arm(0, 5, 2.0), arm(1, 5, 2.0)];
        assert_eq!(ucb_select(10, &arms, &WeightVector::uniform(2), SearchMode::Mcts, 1.0), Some(0));
    }

    #[test]
    fn reward_examples() {
        let objs: Vec<_> = (1..=5)
            .map(|i| ObjectCharacteristics::new(Footprint::square(1.0).unwrap()).with_impedance(i as f64))
            .collect();
        let goal: Vec<_> = (0..5).map(|i| Pose::new(1.0 + 2.0 * i as f64, 2.0, 0.0)).collect();
        let start: Vec<_> = (0..5).map(|i| Pose::new(1.0 + 2.0 * i as f64, 8.0, 0.0)).collect();
        let inst = Instance::new(
            Workspace::default(),
            objs,
            Arrangement::new(start.clone()),
            Arrangement::new(goal.clone()),
            0,
        )
        .unwrap();
        let w = heti_weights(inst.objects());
        assert_eq!(reward(inst.goal(), &inst, &w, Objective::Pp), 5.0);
        assert_eq!(reward(inst.goal(), &inst, &w, Objective::Ti), 15.0);
        assert_eq!(reward(inst.start(), &inst, &w, Objective::Ti), 0.0);
        // objects 1, 3, 5 at goal
        let mixed = Arrangement::new(vec![goal[0], start[1], goal[2], start[3], goal[4]]);
        assert_eq!(reward(&mixed, &inst, &w, Objective::Ti), 9.0);
        assert_eq!(reward(&mixed, &inst, &w, Objective::Pp), 3.0);
    }

    #[test]
    fn search_trivial_and_swap() {
        let inst = swap();
        let same = inst.with_arrangements(inst.start().clone(), inst.start().clone()).unwrap();
        let cfg = MctsConfig {
            max_iterations: 1000,
            ..MctsConfig::default()
        };
        assert!(search(&same, Objective::Pp, SearchMode::Emcts, &cfg).unwrap().unwrap().is_empty());
        for mode in [SearchMode::Mcts, SearchMode::Emcts] {
            let p = search(&inst, Objective::Pp, mode, &cfg).unwrap().unwrap();
            assert!(validate_plan(&p, &inst).valid);
            assert!(p.len() >= 3);
        }
    }

    #[test]
    fn visit_counts_are_conserved() {
        let inst = crate::instance::gen_rand(8, 0.3, 4, Workspace::default()).unwrap();
        let cfg = MctsConfig::default();
        let mut tree = Tree::new(&inst, Objective::Pp, SearchMode::Emcts, &cfg).unwrap();
        for k in 1..=60 {
            if matches!(tree.iterate(), Outcome::TreeGoal(_)) {
                break;
            }
            assert_eq!(tree.nodes[0].visits, k);
        }
        for node in &tree.nodes {
            let Some(edges) = &node.edges else { continue };
            let below: u64 = edges.iter().filter_map(|e| e.child).map(|c| tree.nodes[c].visits).sum();
            if below > 0 {
                assert_eq!(node.visits, below + 1);
            }
            assert!(node.total_reward >= 0.0);
        }
    }

    #[test]
    fn bad_config_is_rejected() {
        let inst = swap();
        let cfg = MctsConfig {
            exploration: 0.0,
            ..MctsConfig::default()
        };
        assert!(Tree::new(&inst, Objective::Pp, SearchMode::Mcts, &cfg).is_err());
    }
}
