//! Problem and plan model: instances, arrangements, pick-n-place plans, plan
//! validation and cost, the RAND/SQ generators and JSON persistence.

use std::fmt;
use std::ops::Index;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Footprint, Point, Pose, Shape, Workspace};
use crate::weighting::{heti_weights, ObjectCharacteristics};

/// Tolerance for deciding that an object sits at a given pose.
pub const POSE_TOL: f64 = 1e-6;

/// Total pose draws allowed when sampling one arrangement.
pub const ARRANGEMENT_BUDGET: usize = 100_000;

/// Consecutive failures for a single object before the arrangement restarts.
pub const OBJECT_RETRY_LIMIT: usize = 1_000;

/// Per-object poses, indexed like the object list.
#[derive(Clone, Debug, PartialEq)]
pub struct Arrangement(Vec<Pose>);

impl Arrangement {
    pub fn new(poses: Vec<Pose>) -> Self {
        Arrangement(poses)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn poses(&self) -> &[Pose] {
        &self.0
    }

    pub fn set(&mut self, obj: usize, pose: Pose) {
        self.0[obj] = pose;
    }

    pub fn approx_eq(&self, other: &Arrangement, tol: f64) -> bool {
        self.len() == other.len()
            && self.0.iter().zip(&other.0).all(|(a, b)| a.approx_eq(b, tol))
    }
}

impl Index<usize> for Arrangement {
    type Output = Pose;
    fn index(&self, i: usize) -> &Pose {
        &self.0[i]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Objective {
    /// Number of pick-n-place actions.
    #[serde(rename = "pp")]
    Pp,
    /// Total task impedance of the moved objects.
    #[serde(rename = "ti")]
    Ti,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Pp => "pp",
            Objective::Ti => "ti",
        })
    }
}

impl FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pp" => Ok(Objective::Pp),
            "ti" => Ok(Objective::Ti),
            other => Err(Error::Input(format!("unknown objective `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionTag {
    #[serde(rename = "goal")]
    ToGoal,
    #[serde(rename = "buffer")]
    ToBuffer,
}

/// One pick-n-place: move `obj` from wherever it is to `pose`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Action {
    pub obj: usize,
    pub pose: Pose,
    pub tag: ActionTag,
}

impl Action {
    pub fn to_goal(inst: &Instance, obj: usize) -> Self {
        Action {
            obj,
            pose: inst.goal[obj],
            tag: ActionTag::ToGoal,
        }
    }

    pub fn to_buffer(obj: usize, pose: Pose) -> Self {
        Action {
            obj,
            pose,
            tag: ActionTag::ToBuffer,
        }
    }

    /// Tagged `ToGoal` iff `pose` is exactly the object's goal pose.
    pub fn tagged(inst: &Instance, obj: usize, pose: Pose) -> Self {
        let tag = if pose == inst.goal[obj] {
            ActionTag::ToGoal
        } else {
            ActionTag::ToBuffer
        };
        Action { obj, pose, tag }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RearrangementPlan {
    pub actions: Vec<Action>,
}

impl RearrangementPlan {
    pub fn new(actions: Vec<Action>) -> Self {
        RearrangementPlan { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Drops actions that leave their object where it already is and merges
    /// consecutive moves of the same object into the last one. Both rewrites
    /// preserve validity: the arrangement seen by every remaining action is
    /// unchanged apart from the moved object itself.
    pub fn compact(&self, start: &Arrangement) -> RearrangementPlan {
        let mut out: Vec<Action> = Vec::with_capacity(self.actions.len());
        let mut current = start.clone();
        // pose of the last kept action's object before that action
        let mut before_last: Option<Pose> = None;
        for a in &self.actions {
            match out.last_mut() {
                Some(last) if last.obj == a.obj => {
                    *last = *a;
                    current.set(a.obj, a.pose);
                    if before_last.is_some_and(|p| p.approx_eq(&a.pose, POSE_TOL)) {
                        out.pop();
                        before_last = None;
                    }
                }
                _ => {
                    if current[a.obj].approx_eq(&a.pose, POSE_TOL) {
                        continue;
                    }
                    before_last = Some(current[a.obj]);
                    current.set(a.obj, a.pose);
                    out.push(*a);
                }
            }
        }
        RearrangementPlan { actions: out }
    }
}

/// A rearrangement problem: move `objects` from `start` to `goal` inside
/// `workspace`. Both arrangements are feasible by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    workspace: Workspace,
    objects: Vec<ObjectCharacteristics>,
    start: Arrangement,
    goal: Arrangement,
    seed: u64,
}

impl Instance {
    pub fn new(
        workspace: Workspace,
        objects: Vec<ObjectCharacteristics>,
        start: Arrangement,
        goal: Arrangement,
        seed: u64,
    ) -> Result<Self> {
        if objects.is_empty() {
            return Err(Error::Input("instance has no objects".into()));
        }
        for o in &objects {
            o.validate()?;
        }
        for (name, arr) in [("start", &start), ("goal", &goal)] {
            if arr.len() != objects.len() {
                return Err(Error::Input(format!(
                    "{name} has {} poses for {} objects",
                    arr.len(),
                    objects.len()
                )));
            }
            if let Some((i, kind)) = first_infeasibility(&objects, &workspace, arr) {
                return Err(Error::Input(format!(
                    "{name} arrangement is infeasible: object {i} {kind}"
                )));
            }
        }
        Ok(Instance {
            workspace,
            objects,
            start,
            goal,
            seed,
        })
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn objects(&self) -> &[ObjectCharacteristics] {
        &self.objects
    }

    pub fn footprint(&self, obj: usize) -> &Footprint {
        &self.objects[obj].footprint
    }

    pub fn start(&self) -> &Arrangement {
        &self.start
    }

    pub fn goal(&self) -> &Arrangement {
        &self.goal
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Same objects and workspace with different endpoint arrangements.
    pub fn with_arrangements(&self, start: Arrangement, goal: Arrangement) -> Result<Instance> {
        Instance::new(self.workspace, self.objects.clone(), start, goal, self.seed)
    }

    pub fn at_goal(&self, arr: &Arrangement, obj: usize) -> bool {
        arr[obj].approx_eq(&self.goal[obj], POSE_TOL)
    }

    /// Object `obj` may be placed at `pose` given everyone else's poses in `arr`.
    pub fn pose_valid(&self, arr: &Arrangement, obj: usize, pose: &Pose) -> bool {
        pose_violation(&self.objects, &self.workspace, arr, obj, pose).is_none()
    }

    /// Objects other than `obj` whose current pose in `arr` overlaps `obj` at `pose`.
    pub fn blockers(&self, arr: &Arrangement, obj: usize, pose: &Pose) -> Vec<usize> {
        let fp = self.footprint(obj);
        (0..self.len())
            .filter(|&j| j != obj && geometry::collide(fp, pose, self.footprint(j), &arr[j]))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&InstanceDoc::from(self)).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Instance> {
        let doc: InstanceDoc = serde_json::from_str(text)?;
        doc.into_instance()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PoseProblem {
    OutOfWorkspace,
    Collision(usize),
}

impl fmt::Display for PoseProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoseProblem::OutOfWorkspace => f.write_str("leaves the workspace"),
            PoseProblem::Collision(j) => write!(f, "collides with object {j}"),
        }
    }
}

fn pose_violation(
    objects: &[ObjectCharacteristics],
    ws: &Workspace,
    arr: &Arrangement,
    obj: usize,
    pose: &Pose,
) -> Option<PoseProblem> {
    let fp = &objects[obj].footprint;
    if !geometry::in_workspace(fp, pose, ws) {
        return Some(PoseProblem::OutOfWorkspace);
    }
    (0..objects.len())
        .find(|&j| j != obj && geometry::collide(fp, pose, &objects[j].footprint, &arr[j]))
        .map(PoseProblem::Collision)
}

fn first_infeasibility(
    objects: &[ObjectCharacteristics],
    ws: &Workspace,
    arr: &Arrangement,
) -> Option<(usize, PoseProblem)> {
    (0..objects.len()).find_map(|i| pose_violation(objects, ws, arr, i, &arr[i]).map(|p| (i, p)))
}

/// Every pose lies inside the workspace and no two objects overlap.
pub fn is_feasible(arr: &Arrangement, inst: &Instance) -> Result<bool> {
    if arr.len() != inst.len() {
        return Err(Error::Input(format!(
            "arrangement has {} poses for {} objects",
            arr.len(),
            inst.len()
        )));
    }
    Ok(first_infeasibility(&inst.objects, &inst.workspace, arr).is_none())
}

/// Fraction of the workspace covered by the objects' exact footprints.
pub fn density(inst: &Instance) -> f64 {
    inst.objects.iter().map(|o| o.footprint.area()).sum::<f64>() / inst.workspace.area()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ViolationKind {
    UnknownObject,
    OutOfWorkspace,
    Collision { with: usize },
    /// A `ToGoal` action whose pose is not the object's goal pose.
    MislabeledGoal,
    /// Replay finished with `object` away from its goal.
    WrongFinalArrangement { object: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation {
    /// Offending action index; `plan.len()` for a wrong final arrangement.
    pub index: usize,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanReport {
    pub valid: bool,
    pub violation: Option<Violation>,
}

/// Replays `plan` from the start arrangement, reporting the first action that
/// is not a valid pick-n-place or a final arrangement that misses the goal.
pub fn validate_plan(plan: &RearrangementPlan, inst: &Instance) -> PlanReport {
    let fail = |index, kind| PlanReport {
        valid: false,
        violation: Some(Violation { index, kind }),
    };
    let mut arr = inst.start.clone();
    for (k, a) in plan.actions.iter().enumerate() {
        if a.obj >= inst.len() {
            return fail(k, ViolationKind::UnknownObject);
        }
        if a.tag == ActionTag::ToGoal && !a.pose.approx_eq(&inst.goal[a.obj], POSE_TOL) {
            return fail(k, ViolationKind::MislabeledGoal);
        }
        match pose_violation(&inst.objects, &inst.workspace, &arr, a.obj, &a.pose) {
            Some(PoseProblem::OutOfWorkspace) => return fail(k, ViolationKind::OutOfWorkspace),
            Some(PoseProblem::Collision(with)) => {
                return fail(k, ViolationKind::Collision { with })
            }
            None => arr.set(a.obj, a.pose),
        }
    }
    if let Some(object) = (0..inst.len()).find(|&i| !inst.at_goal(&arr, i)) {
        return fail(plan.len(), ViolationKind::WrongFinalArrangement { object });
    }
    PlanReport {
        valid: true,
        violation: None,
    }
}

/// Cost of a valid plan: action count (PP) or summed HeTI weight of the moved
/// object per action (TI).
pub fn plan_cost(plan: &RearrangementPlan, inst: &Instance, objective: Objective) -> Result<f64> {
    let report = validate_plan(plan, inst);
    if let Some(v) = report.violation {
        return Err(Error::Input(format!(
            "plan is invalid at action {}: {:?}",
            v.index, v.kind
        )));
    }
    Ok(match objective {
        Objective::Pp => plan.len() as f64,
        Objective::Ti => {
            let w = heti_weights(&inst.objects);
            plan.actions.iter().map(|a| w[a.obj]).sum()
        }
    })
}

fn check_generator_args(n: usize, min_n: usize, rho: f64) -> Result<()> {
    if n < min_n {
        return Err(Error::Input(format!("need at least {min_n} objects, got {n}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!("density must be in (0, 1), got {rho}")));
    }
    Ok(())
}

/// RAND scenario: each object is an ellipse or a rectangle with aspect ratio
/// in `[1, 3]` and raw area in `[0.05, 1]`; areas are rescaled so that the
/// objects cover `rho` of the workspace. Deterministic in `seed`.
pub fn gen_rand(n: usize, rho: f64, seed: u64, ws: Workspace) -> Result<Instance> {
    check_generator_args(n, 1, rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<(bool, f64, f64)> = (0..n)
        .map(|_| {
            let ellipse = rng.random_bool(0.5);
            let aspect = rng.random_range(1.0..=3.0);
            let area = rng.random_range(0.05..=1.0);
            (ellipse, aspect, area)
        })
        .collect();
    let scale = rho * ws.area() / raw.iter().map(|r| r.2).sum::<f64>();
    let objects = raw
        .into_iter()
        .map(|(ellipse, aspect, area)| {
            let area = area * scale;
            let fp = if ellipse {
                let b = (area / (std::f64::consts::PI * aspect)).sqrt();
                Footprint::ellipse(aspect * b, b)
            } else {
                let w = (area * aspect).sqrt();
                Footprint::rect(w, area / w)
            };
            fp.map(ObjectCharacteristics::new)
        })
        .collect::<Result<Vec<_>>>()?;
    finish_instance(objects, ws, seed, &mut rng)
}

/// SQ scenario: two large squares and `n - 2` small ones with a 9:1 area
/// ratio, jointly covering `rho` of the workspace. Deterministic in `seed`.
pub fn gen_sq(n: usize, rho: f64, seed: u64, ws: Workspace) -> Result<Instance> {
    check_generator_args(n, 3, rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let small = rho * ws.area() / (n as f64 + 16.0);
    // large squares at random indices, so index tie-breaks favor neither size
    let first = rng.random_range(0..n);
    let second = (first + rng.random_range(1..n)) % n;
    let objects = (0..n)
        .map(|i| {
            let area = if i == first || i == second { 9.0 * small } else { small };
            Footprint::square(area.sqrt()).map(ObjectCharacteristics::new)
        })
        .collect::<Result<Vec<_>>>()?;
    finish_instance(objects, ws, seed, &mut rng)
}

fn finish_instance(
    objects: Vec<ObjectCharacteristics>,
    ws: Workspace,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Instance> {
    let start = sample_arrangement(&objects, &ws, rng)?;
    let goal = sample_arrangement(&objects, &ws, rng)?;
    Instance::new(ws, objects, start, goal, seed)
}

/// Rejection-samples a feasible arrangement, placing objects one at a time
/// (largest first) with uniform positions and headings.
pub fn sample_arrangement(
    objects: &[ObjectCharacteristics],
    ws: &Workspace,
    rng: &mut impl Rng,
) -> Result<Arrangement> {
    let mut order: Vec<usize> = (0..objects.len()).collect();
    order.sort_by(|&a, &b| {
        objects[b]
            .footprint
            .area()
            .total_cmp(&objects[a].footprint.area())
            .then(a.cmp(&b))
    });
    let mut draws = 0;
    'restart: loop {
        let mut placed: Vec<(usize, Pose)> = Vec::with_capacity(objects.len());
        for &i in &order {
            let fp = &objects[i].footprint;
            let mut failures = 0;
            loop {
                if draws >= ARRANGEMENT_BUDGET {
                    return Err(Error::Generation(format!(
                        "no feasible arrangement after {ARRANGEMENT_BUDGET} pose draws"
                    )));
                }
                draws += 1;
                let pose = random_pose(fp, ws, rng);
                let ok = geometry::in_workspace(fp, &pose, ws)
                    && placed
                        .iter()
                        .all(|(j, p)| !geometry::collide(fp, &pose, &objects[*j].footprint, p));
                if ok {
                    placed.push((i, pose));
                    break;
                }
                failures += 1;
                if failures >= OBJECT_RETRY_LIMIT {
                    continue 'restart;
                }
            }
        }
        let mut poses = vec![Pose::new(0.0, 0.0, 0.0); objects.len()];
        for (i, p) in placed {
            poses[i] = p;
        }
        return Ok(Arrangement::new(poses));
    }
}

/// Uniform heading and a uniform position over the part of the workspace
/// where `fp` could possibly fit; conditioned on landing inside the
/// workspace this is uniform over all valid poses.
pub fn random_pose(fp: &Footprint, ws: &Workspace, rng: &mut impl Rng) -> Pose {
    let m = fp.inner_margin();
    let coord = |rng: &mut dyn rand::RngCore, extent: f64| {
        if 2.0 * m < extent {
            rng.random_range(m..extent - m)
        } else {
            extent / 2.0
        }
    };
    let x = coord(rng, ws.width);
    let y = coord(rng, ws.height);
    Pose::new(x, y, rng.random_range(0.0..std::f64::consts::TAU))
}

impl Instance {
    /// Rejection-samples a pose for `obj` that is inside the workspace, clear
    /// of every other object in `arr`, and clear of the goal poses of the
    /// objects in `avoid_goals`.
    pub fn sample_free_pose(
        &self,
        arr: &Arrangement,
        obj: usize,
        avoid_goals: &[usize],
        attempts: usize,
        rng: &mut impl Rng,
    ) -> Option<Pose> {
        let fp = self.footprint(obj);
        (0..attempts).find_map(|_| {
            let pose = random_pose(fp, &self.workspace, rng);
            let clear = self.pose_valid(arr, obj, &pose)
                && avoid_goals.iter().all(|&j| {
                    j == obj || !geometry::collide(fp, &pose, self.footprint(j), &self.goal[j])
                });
            clear.then_some(pose)
        })
    }
}

// ---------------------------------------------------------------------------
// JSON documents

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    workspace: Workspace,
    objects: Vec<ObjectDoc>,
    start: Vec<[f64; 3]>,
    goal: Vec<[f64; 3]>,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct ObjectDoc {
    #[serde(flatten)]
    shape: ShapeDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    impedance: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "shape")]
enum ShapeDoc {
    #[serde(rename = "rect")]
    Rect { w: f64, h: f64 },
    #[serde(rename = "ellipse")]
    Ellipse { a: f64, b: f64 },
    #[serde(rename = "disc")]
    Disc { r: f64 },
    #[serde(rename = "poly")]
    Poly { vertices: Vec<[f64; 2]> },
}

impl From<&Instance> for InstanceDoc {
    fn from(inst: &Instance) -> Self {
        let poses = |arr: &Arrangement| arr.poses().iter().map(Pose::to_array).collect();
        InstanceDoc {
            workspace: inst.workspace,
            objects: inst
                .objects
                .iter()
                .map(|o| ObjectDoc {
                    shape: match o.footprint.shape() {
                        Shape::Rect { width, height } => ShapeDoc::Rect {
                            w: *width,
                            h: *height,
                        },
                        Shape::Ellipse { a, b } => ShapeDoc::Ellipse { a: *a, b: *b },
                        Shape::Disc { radius } => ShapeDoc::Disc { r: *radius },
                        Shape::Polygon { vertices } => ShapeDoc::Poly {
                            vertices: vertices.iter().map(|p| [p.x, p.y]).collect(),
                        },
                    },
                    mass: o.mass,
                    impedance: o.impedance,
                })
                .collect(),
            start: poses(&inst.start),
            goal: poses(&inst.goal),
            seed: inst.seed,
        }
    }
}

impl InstanceDoc {
    fn into_instance(self) -> Result<Instance> {
        let ws = Workspace::new(self.workspace.width, self.workspace.height)?;
        let objects = self
            .objects
            .into_iter()
            .map(|o| {
                let shape = match o.shape {
                    ShapeDoc::Rect { w, h } => Shape::Rect {
                        width: w,
                        height: h,
                    },
                    ShapeDoc::Ellipse { a, b } => Shape::Ellipse { a, b },
                    ShapeDoc::Disc { r } => Shape::Disc { radius: r },
                    ShapeDoc::Poly { vertices } => Shape::Polygon {
                        vertices: vertices.into_iter().map(|[x, y]| Point::new(x, y)).collect(),
                    },
                };
                Ok(ObjectCharacteristics {
                    footprint: Footprint::new(shape)?,
                    mass: o.mass,
                    impedance: o.impedance,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let arrangement = |poses: Vec<[f64; 3]>| {
            Arrangement::new(poses.into_iter().map(Pose::from).collect())
        };
        Instance::new(ws, objects, arrangement(self.start), arrangement(self.goal), self.seed)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanDoc {
    actions: Vec<ActionDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionDoc {
    obj: usize,
    pose: [f64; 3],
    tag: ActionTag,
}

impl RearrangementPlan {
    pub fn to_json(&self) -> String {
        let doc = PlanDoc {
            actions: self
                .actions
                .iter()
                .map(|a| ActionDoc {
                    obj: a.obj,
                    pose: a.pose.to_array(),
                    tag: a.tag,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<RearrangementPlan> {
        let doc: PlanDoc = serde_json::from_str(text)?;
        Ok(RearrangementPlan {
            actions: doc
                .actions
                .into_iter()
                .map(|a| Action {
                    obj: a.obj,
                    pose: Pose::from(a.pose),
                    tag: a.tag,
                })
                .collect(),
        })
    }
}
