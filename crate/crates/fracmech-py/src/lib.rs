//! Python bindings: load a problem, derive its canonical structure, run
//! the constraint algorithm, and solve it on a uniform grid.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use fracmech::canonical::{derive_system, reduced_equations};
use fracmech::constraints::{run_constraint_algorithm, ConstraintClass};
use fracmech::fracsolve::{check_constraint_preservation, solve_problem};
use fracmech::problem::{parse_problem, parse_problem_str, serialize_problem};
use fracmech::varproblem::{build_modified_lagrangian, fractional_hessian, hessian_rank};

fn err(e: fracmech::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Canonical structure of a problem, rendered as plain strings.
#[pyclass(frozen)]
struct Derivation {
    #[pyo3(get)]
    hessian_rank: usize,
    #[pyo3(get)]
    momenta: Vec<(String, String)>,
    #[pyo3(get)]
    hamiltonian: String,
    #[pyo3(get)]
    primary_constraints: Vec<String>,
    #[pyo3(get)]
    equations: Vec<String>,
    #[pyo3(get)]
    reduced_equations: Vec<String>,
}

/// Result of the consistency algorithm.
#[pyclass(frozen)]
struct ConstraintAnalysis {
    #[pyo3(get)]
    primary: Vec<String>,
    #[pyo3(get)]
    secondary: Vec<String>,
    #[pyo3(get)]
    multiplier_values: Vec<(String, String)>,
    #[pyo3(get)]
    passes: usize,
    #[pyo3(get)]
    closed: bool,
    #[pyo3(get)]
    log: Vec<String>,
}

/// Trajectory of a numeric solve.
#[pyclass(frozen)]
struct Solution {
    #[pyo3(get)]
    t: Vec<f64>,
    #[pyo3(get)]
    series: BTreeMap<String, Vec<f64>>,
    #[pyo3(get)]
    residual: f64,
    #[pyo3(get)]
    constraint_violation: f64,
}

/// A constrained variational problem of fractional order.
#[pyclass]
struct Problem {
    spec: fracmech::varproblem::ProblemSpec,
}

#[pymethods]
impl Problem {
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Ok(Problem { spec: parse_problem(std::path::Path::new(path)).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Problem { spec: parse_problem_str(text).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        serialize_problem(&self.spec).map_err(err)
    }

    #[getter]
    fn name(&self) -> String {
        self.spec.name.clone()
    }

    #[getter]
    fn variables(&self) -> Vec<String> {
        self.spec.variables.clone()
    }

    #[getter]
    fn alpha(&self) -> String {
        self.spec.alpha.render()
    }

    fn derive(&self) -> PyResult<Derivation> {
        let lbar = build_modified_lagrangian(&self.spec).map_err(err)?;
        let (rank, _) = hessian_rank(&fractional_hessian(&lbar, &self.spec));
        let (_, sys) = derive_system(&self.spec).map_err(err)?;
        let reduced = reduced_equations(&sys).map_err(err)?;
        Ok(Derivation {
            hessian_rank: rank,
            momenta: sys
                .momenta
                .iter()
                .map(|(a, e)| (a.render(), e.render()))
                .collect(),
            hamiltonian: sys.hamiltonian.render(),
            primary_constraints: sys.primary.iter().map(|(e, _)| e.render()).collect(),
            equations: sys.equations.iter().map(|q| q.render()).collect(),
            reduced_equations: reduced.iter().map(|e| format!("{} = 0", e.render())).collect(),
        })
    }

    fn constraints(&self) -> PyResult<ConstraintAnalysis> {
        let (_, sys) = derive_system(&self.spec).map_err(err)?;
        let report = run_constraint_algorithm(&sys, &self.spec).map_err(err)?;
        let render_class = |class: ConstraintClass| {
            report
                .constraints
                .iter()
                .filter(move |c| c.class == class)
                .map(|c| c.expr.render())
                .collect::<Vec<_>>()
        };
        Ok(ConstraintAnalysis {
            primary: render_class(ConstraintClass::Primary),
            secondary: render_class(ConstraintClass::Secondary),
            multiplier_values: report
                .multiplier_values
                .iter()
                .map(|(a, e)| (a.render(), e.render()))
                .collect(),
            passes: report.passes,
            closed: report.closed,
            log: report.log.clone(),
        })
    }

    #[pyo3(signature = (m = 256))]
    fn solve(&self, m: usize) -> PyResult<Solution> {
        let (_, sys) = derive_system(&self.spec).map_err(err)?;
        let report = run_constraint_algorithm(&sys, &self.spec).map_err(err)?;
        let (_, traj) = solve_problem(&self.spec, m).map_err(err)?;
        let violation =
            check_constraint_preservation(&traj, &report, &sys, &self.spec).map_err(err)?;
        Ok(Solution {
            t: (0..=traj.grid.m).map(|k| traj.grid.node(k)).collect(),
            series: traj.series.clone(),
            residual: traj.residual,
            constraint_violation: violation,
        })
    }
}

#[pymodule]
fn fracmech_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_class::<Derivation>()?;
    m.add_class::<ConstraintAnalysis>()?;
    m.add_class::<Solution>()?;
    Ok(())
}
