mod common;

use std::time::Duration;

use common::{brute_force_fvs_size, brute_force_running_buffer, random_digraph, rng};
use rand::Rng;
use rearrange_core::depgraph::DependencyGraph;
use rearrange_core::instance::{gen_rand, validate_plan, Objective};
use rearrange_core::trlb::{
    integerize_weights, plan, primitive_plan_erbm, primitive_plan_etbm, Mode,
};
use rearrange_core::{WeightVector, Workspace};

#[test]
fn erbm_matches_exhaustive_running_buffer() {
    let mut r = rng(11);
    for _ in 0..60 {
        let n = r.random_range(2..=8);
        let p = r.random_range(0.15..0.4);
        let g = random_digraph(&mut r, n, p, vec![1.0; n]);
        let pp = primitive_plan_erbm(&g, 1);
        assert!(pp.is_consistent(&g));
        assert_eq!(pp.metric as u64, brute_force_running_buffer(&g, &vec![1; n]));
    }
}

#[test]
fn weighted_erbm_matches_exhaustive_running_buffer() {
    let mut r = rng(12);
    for _ in 0..40 {
        let n = r.random_range(2..=7);
        let w: Vec<f64> = (0..n).map(|_| r.random_range(0.1..2.0)).collect();
        let g = random_digraph(&mut r, n, 0.3, w.clone());
        let units = integerize_weights(&w, 2);
        let pp = primitive_plan_erbm(&g, 2);
        assert!(pp.is_consistent(&g));
        assert_eq!(pp.metric as u64, brute_force_running_buffer(&g, &units));
    }
}

#[test]
fn uniform_etbm_buffers_a_minimum_fvs() {
    let mut r = rng(13);
    for _ in 0..80 {
        let n = r.random_range(2..=10);
        let p = r.random_range(0.1..0.35);
        let g = random_digraph(&mut r, n, p, vec![1.0; n]);
        let pp = primitive_plan_etbm(&g);
        assert!(pp.is_consistent(&g));
        assert_eq!(pp.buffer_count(), brute_force_fvs_size(&g));
        assert_eq!(pp.metric, pp.buffer_count() as f64);
    }
}

#[test]
fn rand_plans_are_valid_and_respect_the_fvs_bound() {
    let ws = Workspace::default();
    for seed in 0..12 {
        let inst = gen_rand(10, 0.3, seed, ws).unwrap();
        let g = DependencyGraph::build(&inst, &WeightVector::uniform(inst.len()));
        let bound = inst.len() + brute_force_fvs_size(&g);
        for mode in Mode::ALL {
            let p = plan(&inst, Objective::Pp, mode, seed, Duration::from_secs(20))
                .unwrap_or_else(|e| panic!("{mode} seed {seed}: {e}"));
            assert!(validate_plan(&p, &inst).valid);
            assert!(p.len() >= bound, "{mode} seed {seed}");
        }
    }
}

#[test]
fn plans_are_deterministic() {
    let inst = gen_rand(15, 0.4, 5, Workspace::default()).unwrap();
    for mode in Mode::ALL {
        let a = plan(&inst, Objective::Ti, mode, 9, Duration::from_secs(20)).unwrap();
        let b = plan(&inst, Objective::Ti, mode, 9, Duration::from_secs(20)).unwrap();
        assert_eq!(a, b);
    }
}
