//! Benchmark harness and SVG rendering.
//!
//! `run_suite` sweeps a grid of (n, ρ) cells. Every planner in a cell sees
//! the same generated instances, so results pair up trial by trial. Rows come
//! out in grid order no matter how the worker pool schedules them; each cell
//! ends with one aggregate row.
//!
//! CSV columns:
//!
//! | column      | trial row                          | aggregate row                    |
//! |-------------|------------------------------------|----------------------------------|
//! | scenario    | `RAND` or `SQ`                     | same                             |
//! | n, rho      | cell                               | same                             |
//! | mode        | planner                            | same                             |
//! | objective   | `pp` or `ti`                       | same                             |
//! | trial       | trial index                        | `mean`                           |
//! | seed        | instance and planner seed          | empty                            |
//! | success     | `1` or `0`                         | successes / trials               |
//! | plan_len    | actions, empty on failure          | mean over successful trials      |
//! | len_per_obj | plan_len / n                       | mean over successful trials      |
//! | ti_cost     | summed task impedance              | mean over successful trials      |
//! | time_s      | wall-clock seconds                 | mean over successful trials      |

use std::fmt;
use std::fmt::Write as _;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{transform, Workspace};
use crate::instance::{gen_rand, gen_sq, plan_cost, Arrangement, Instance, Objective, RearrangementPlan};
use crate::mcts::{self, MctsConfig, SearchMode};
use crate::trlb::{self, Mode};

pub const CSV_HEADER: [&str; 12] = [
    "scenario",
    "n",
    "rho",
    "mode",
    "objective",
    "trial",
    "seed",
    "success",
    "plan_len",
    "len_per_obj",
    "ti_cost",
    "time_s",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    Rand,
    Sq,
}

impl Scenario {
    pub fn generate(self, n: usize, rho: f64, seed: u64, ws: Workspace) -> Result<Instance> {
        match self {
            Scenario::Rand => gen_rand(n, rho, seed, ws),
            Scenario::Sq => gen_sq(n, rho, seed, ws),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Rand => "RAND",
            Scenario::Sq => "SQ",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RAND" => Ok(Scenario::Rand),
            "SQ" => Ok(Scenario::Sq),
            other => Err(Error::Input(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Any of the six planners.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Planner {
    Trlb(Mode),
    Search(SearchMode),
}

impl Planner {
    pub const ALL: [Planner; 6] = [
        Planner::Trlb(Mode::Etbm),
        Planner::Trlb(Mode::Tbm),
        Planner::Trlb(Mode::Erbm),
        Planner::Trlb(Mode::Rbm),
        Planner::Search(SearchMode::Emcts),
        Planner::Search(SearchMode::Mcts),
    ];
}

impl fmt::Display for Planner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Planner::Trlb(m) => m.fmt(f),
            Planner::Search(m) => m.fmt(f),
        }
    }
}

impl FromStr for Planner {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.parse::<Mode>()
            .map(Planner::Trlb)
            .or_else(|_| s.parse::<SearchMode>().map(Planner::Search))
            .map_err(|_| Error::Input(format!("unknown planner `{s}`")))
    }
}

/// Runs one planner. `Ok(None)` is a planning failure (timeout or search
/// exhausted); `Err` is bad input.
pub fn run_planner(
    inst: &Instance,
    planner: Planner,
    objective: Objective,
    seed: u64,
    time_limit: Duration,
) -> Result<Option<RearrangementPlan>> {
    match planner {
        Planner::Trlb(mode) => Ok(trlb::plan(inst, objective, mode, seed, time_limit).ok()),
        Planner::Search(mode) => {
            let cfg = MctsConfig {
                time_budget: time_limit,
                seed,
                ..MctsConfig::default()
            };
            Ok(mcts::search(inst, objective, mode, &cfg)?.ok())
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub scenario: Scenario,
    pub n: usize,
    pub rho: f64,
    pub planner: Planner,
    pub objective: Objective,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub plan_len: Option<usize>,
    pub len_per_obj: Option<f64>,
    pub ti_cost: Option<f64>,
    pub time_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub scenario: Scenario,
    pub ns: Vec<usize>,
    pub rhos: Vec<f64>,
    pub planners: Vec<Planner>,
    pub objective: Objective,
    pub trials: usize,
    pub time_limit: Duration,
    pub seed: u64,
    pub workspace: Workspace,
    /// Worker threads; 0 picks one per core.
    pub workers: usize,
}

impl SuiteConfig {
    fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || self.rhos.is_empty() || self.planners.is_empty() || self.trials == 0 {
            return Err(Error::Input("empty benchmark grid".into()));
        }
        if self.time_limit.is_zero() {
            return Err(Error::Input("time limit must be positive".into()));
        }
        if let Some(r) = self.rhos.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return Err(Error::Input(format!("density must lie in (0, 1), got {r}")));
        }
        Ok(())
    }
}

/// Instance seed of one grid cell and trial.
pub fn trial_seed(master: u64, n_index: usize, rho_index: usize, trial: usize) -> u64 {
    let mut z = master;
    for part in [n_index, rho_index, trial] {
        z = splitmix64(z ^ splitmix64(part as u64));
    }
    z
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs every (cell, trial, planner) job and returns trial records in grid
/// order. Instance generation failures and planner panics count as failed
/// trials.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for (ni, &n) in cfg.ns.iter().enumerate() {
        for (ri, &rho) in cfg.rhos.iter().enumerate() {
            for trial in 0..cfg.trials {
                let seed = trial_seed(cfg.seed, ni, ri, trial);
                for &planner in &cfg.planners {
                    jobs.push((n, rho, trial, seed, planner));
                }
            }
        }
    }
    let run = |&(n, rho, trial, seed, planner): &(usize, f64, usize, u64, Planner)| {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            let inst = cfg.scenario.generate(n, rho, seed, cfg.workspace).ok()?;
            let plan = run_planner(&inst, planner, cfg.objective, seed, cfg.time_limit).ok()??;
            let ti = plan_cost(&plan, &inst, Objective::Ti).ok()?;
            Some((plan.len(), ti))
        }))
        .ok()
        .flatten();
        TrialRecord {
            scenario: cfg.scenario,
            n,
            rho,
            planner,
            objective: cfg.objective,
            trial,
            seed,
            success: outcome.is_some(),
            plan_len: outcome.map(|o| o.0),
            len_per_obj: outcome.map(|o| o.0 as f64 / n as f64),
            ti_cost: outcome.map(|o| o.1),
            time_s: started.elapsed().as_secs_f64(),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Input(format!("worker pool: {e}")))?;
    Ok(pool.install(|| jobs.par_iter().map(run).collect()))
}

/// Per-planner summary of one (n, ρ) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub scenario: Scenario,
    pub n: usize,
    pub rho: f64,
    pub planner: Planner,
    pub objective: Objective,
    pub trials: usize,
    pub successes: usize,
    pub plan_len: Option<f64>,
    pub len_per_obj: Option<f64>,
    pub ti_cost: Option<f64>,
    pub time_s: Option<f64>,
}

impl Aggregate {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Aggregates in first-appearance order of (n, ρ, planner).
pub fn aggregate(records: &[TrialRecord]) -> Vec<Aggregate> {
    let mut keys: Vec<(usize, u64, Planner)> = Vec::new();
    for r in records {
        let k = (r.n, r.rho.to_bits(), r.planner);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(n, rho, planner)| {
            let cell: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.n == n && r.rho.to_bits() == rho && r.planner == planner)
                .collect();
            let ok: Vec<&&TrialRecord> = cell.iter().filter(|r| r.success).collect();
            let mean = |f: &dyn Fn(&TrialRecord) -> f64| {
                (!ok.is_empty()).then(|| ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64)
            };
            Aggregate {
                scenario: cell[0].scenario,
                n,
                rho: f64::from_bits(rho),
                planner,
                objective: cell[0].objective,
                trials: cell.len(),
                successes: ok.len(),
                plan_len: mean(&|r| r.plan_len.unwrap_or(0) as f64),
                len_per_obj: mean(&|r| r.len_per_obj.unwrap_or(0.0)),
                ti_cost: mean(&|r| r.ti_cost.unwrap_or(0.0)),
                time_s: mean(&|r| r.time_s),
            }
        })
        .collect()
}

/// Writes trial rows, each cell followed by its aggregate rows.
pub fn write_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let aggregates = aggregate(records);
    let mut i = 0;
    while i < records.len() {
        let (n, rho) = (records[i].n, records[i].rho);
        let end = records[i..]
            .iter()
            .position(|r| r.n != n || r.rho != rho)
            .map_or(records.len(), |p| i + p);
        for r in &records[i..end] {
            w.write_record([
                r.scenario.to_string(),
                r.n.to_string(),
                r.rho.to_string(),
                r.planner.to_string(),
                r.objective.to_string(),
                r.trial.to_string(),
                r.seed.to_string(),
                (r.success as u8).to_string(),
                r.plan_len.map_or(String::new(), |l| l.to_string()),
                opt(r.len_per_obj),
                opt(r.ti_cost),
                format!("{:.6}", r.time_s),
            ])?;
        }
        for a in aggregates.iter().filter(|a| a.n == n && a.rho == rho) {
            w.write_record([
                a.scenario.to_string(),
                a.n.to_string(),
                a.rho.to_string(),
                a.planner.to_string(),
                a.objective.to_string(),
                "mean".to_string(),
                String::new(),
                a.success_rate().to_string(),
                opt(a.plan_len),
                opt(a.len_per_obj),
                opt(a.ti_cost),
                a.time_s.map_or(String::new(), |t| format!("{t:.6}")),
            ])?;
        }
        i = end;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// SVG

fn color(i: usize) -> String {
    // golden-angle hue spacing keeps neighbors apart
    format!("hsl({:.1},65%,55%)", (i as f64 * 137.508) % 360.0)
}

fn polygon(inst: &Instance, obj: usize, pose: &crate::Pose) -> String {
    let mut points = String::new();
    for (k, p) in transform(inst.footprint(obj), pose).iter().enumerate() {
        if k > 0 {
            points.push(' ');
        }
        let _ = write!(points, "{},{}", p.x, p.y);
    }
    points
}

/// One frame: goal poses outlined, `arr` filled, `highlight` drawn with a
/// heavy black border.
pub fn render_svg(inst: &Instance, arr: &Arrangement, highlight: Option<usize>) -> String {
    let ws = inst.workspace();
    let stroke = ws.width.max(ws.height) / 200.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" width="{pw}" height="{ph}">"#,
        w = ws.width,
        h = ws.height,
        pw = 600.0,
        ph = 600.0 * ws.height / ws.width,
    );
    // world y points up
    let _ = writeln!(s, r#"<g transform="matrix(1 0 0 -1 0 {})">"#, ws.height);
    let _ = writeln!(
        s,
        r##"<rect x="0" y="0" width="{}" height="{}" fill="#f7f7f2" stroke="#333" stroke-width="{stroke}"/>"##,
        ws.width, ws.height
    );
    for i in 0..inst.len() {
        let _ = writeln!(
            s,
            r#"<polygon class="goal" data-obj="{i}" points="{}" fill="none" stroke="{}" stroke-width="{stroke}" stroke-dasharray="{} {}"/>"#,
            polygon(inst, i, &inst.goal()[i]),
            color(i),
            3.0 * stroke,
            2.0 * stroke,
        );
    }
    for i in 0..inst.len() {
        let (edge, width) = if highlight == Some(i) {
            ("#000", 3.0 * stroke)
        } else {
            ("#444", stroke)
        };
        let _ = writeln!(
            s,
            r#"<polygon class="object" data-obj="{i}" points="{}" fill="{}" fill-opacity="0.8" stroke="{edge}" stroke-width="{width}"/>"#,
            polygon(inst, i, &arr[i]),
            color(i),
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}

/// Writes the start arrangement to `out`, or with a plan one frame per
/// arrangement along it (`k + 1` files named `<stem>_<index>.svg` next to
/// `out`). Returns the written paths.
pub fn render(inst: &Instance, plan: Option<&RearrangementPlan>, out: &Path) -> Result<Vec<PathBuf>> {
    let Some(plan) = plan else {
        std::fs::write(out, render_svg(inst, inst.start(), None))?;
        return Ok(vec![out.to_path_buf()]);
    };
    let report = crate::instance::validate_plan(plan, inst);
    if let Some(v) = report.violation {
        return Err(Error::Input(format!("plan does not validate: {v:?}")));
    }
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("frame");
    let dir = out.parent().unwrap_or(Path::new(""));
    let width = plan.len().to_string().len().max(3);
    let mut arr = inst.start().clone();
    let mut paths = Vec::with_capacity(plan.len() + 1);
    for k in 0..=plan.len() {
        let highlight = k.checked_sub(1).map(|j| plan.actions[j].obj);
        if let Some(j) = k.checked_sub(1) {
            let a = plan.actions[j];
            arr.set(a.obj, a.pose);
        }
        let path = dir.join(format!("{stem}_{k:0width$}.svg"));
        std::fs::write(&path, render_svg(inst, &arr, highlight))?;
        paths.push(path);
    }
    Ok(paths)
}
