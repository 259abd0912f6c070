//! Python module `rearrange`.
//!
//! ```python
//! import rearrange
//! inst = rearrange.Instance.gen_rand(10, 0.3, seed=1)
//! plan = rearrange.plan(inst, "ETBM", "pp", seed=0, time_limit=10.0)
//! assert inst.validate(plan)
//! ```

use std::time::Duration;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use rearrange_core::bench::{run_planner, Planner};
use rearrange_core::depgraph::{min_weight_fvs, DependencyGraph};
use rearrange_core::instance::{density, gen_rand, gen_sq, plan_cost, validate_plan};
use rearrange_core::weighting::{hecp_weights, heti_weights};
use rearrange_core::{Error, Objective, Workspace};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

#[pyclass(frozen, module = "rearrange")]
struct Instance(rearrange_core::Instance);

#[pymethods]
impl Instance {
    #[staticmethod]
    #[pyo3(signature = (n, rho, seed=0, width=10.0, height=10.0))]
    fn gen_rand(n: usize, rho: f64, seed: u64, width: f64, height: f64) -> PyResult<Self> {
        let ws = Workspace::new(width, height).map_err(py_err)?;
        gen_rand(n, rho, seed, ws).map(Instance).map_err(py_err)
    }

    #[staticmethod]
    #[pyo3(signature = (n, rho, seed=0, width=10.0, height=10.0))]
    fn gen_sq(n: usize, rho: f64, seed: u64, width: f64, height: f64) -> PyResult<Self> {
        let ws = Workspace::new(width, height).map_err(py_err)?;
        gen_sq(n, rho, seed, ws).map(Instance).map_err(py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        rearrange_core::Instance::from_json(text).map(Instance).map_err(py_err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn density(&self) -> f64 {
        density(&self.0)
    }

    #[getter]
    fn workspace(&self) -> (f64, f64) {
        (self.0.workspace().width, self.0.workspace().height)
    }

    /// Start poses as `(x, y, theta)` tuples.
    #[getter]
    fn start(&self) -> Vec<(f64, f64, f64)> {
        self.0.start().poses().iter().map(|p| (p.x, p.y, p.theta())).collect()
    }

    #[getter]
    fn goal(&self) -> Vec<(f64, f64, f64)> {
        self.0.goal().poses().iter().map(|p| (p.x, p.y, p.theta())).collect()
    }

    fn hecp_weights(&self) -> PyResult<Vec<f64>> {
        hecp_weights(self.0.objects(), self.0.workspace())
            .map(|w| w.as_slice().to_vec())
            .map_err(py_err)
    }

    fn heti_weights(&self) -> Vec<f64> {
        heti_weights(self.0.objects()).as_slice().to_vec()
    }

    /// Arcs `(i, j)`: the goal of `i` overlaps the start of `j`.
    fn dependency_arcs(&self) -> Vec<(usize, usize)> {
        DependencyGraph::build(&self.0, &rearrange_core::WeightVector::uniform(self.0.len()))
            .arcs()
            .collect()
    }

    /// Minimum feedback vertex set of the dependency graph, uniform weights.
    fn min_fvs(&self) -> Vec<usize> {
        let g = DependencyGraph::build(&self.0, &rearrange_core::WeightVector::uniform(self.0.len()));
        min_weight_fvs(&g).vertices
    }

    fn validate(&self, plan: &Plan) -> bool {
        validate_plan(&plan.0, &self.0).valid
    }

    #[pyo3(signature = (plan, objective="pp"))]
    fn cost(&self, plan: &Plan, objective: &str) -> PyResult<f64> {
        plan_cost(&plan.0, &self.0, parse::<Objective>(objective)?).map_err(py_err)
    }
}

#[pyclass(frozen, module = "rearrange")]
struct Plan(rearrange_core::RearrangementPlan);

#[pymethods]
impl Plan {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        rearrange_core::RearrangementPlan::from_json(text).map(Plan).map_err(py_err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// `(object, (x, y, theta), tag)` per action; tag is "goal" or "buffer".
    fn actions(&self) -> Vec<(usize, (f64, f64, f64), &'static str)> {
        self.0
            .actions
            .iter()
            .map(|a| {
                let tag = match a.tag {
                    rearrange_core::ActionTag::ToGoal => "goal",
                    rearrange_core::ActionTag::ToBuffer => "buffer",
                };
                (a.obj, (a.pose.x, a.pose.y, a.pose.theta()), tag)
            })
            .collect()
    }
}

/// Runs a planner; returns `None` if it finds no plan within `time_limit`
/// seconds.
#[pyfunction]
#[pyo3(signature = (instance, mode="ETBM", objective="pp", seed=0, time_limit=60.0))]
fn plan(
    py: Python<'_>,
    instance: &Instance,
    mode: &str,
    objective: &str,
    seed: u64,
    time_limit: f64,
) -> PyResult<Option<Plan>> {
    let planner = parse::<Planner>(mode)?;
    let objective = parse::<Objective>(objective)?;
    let limit = Duration::try_from_secs_f64(time_limit)
        .map_err(|_| PyValueError::new_err("time_limit must be a positive number of seconds"))?;
    let inst = &instance.0;
    py.detach(|| run_planner(inst, planner, objective, seed, limit))
        .map(|p| p.map(Plan))
        .map_err(py_err)
}

#[pymodule]
fn rearrange(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<Plan>()?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    Ok(())
}
