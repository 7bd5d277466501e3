//! Machine-readable reports with fixed key order and canonical expression
//! text, so repeated runs diff cleanly.

use serde::Serialize;

use crate::canonical::{CanonicalSystem, EquationKind};
use crate::constraints::{ConstraintClass, ConstraintReport};
use crate::error::Result;
use crate::varproblem::{fractional_hessian, hessian_rank, ProblemSpec};

#[derive(Serialize, Clone, Debug)]
pub struct NamedExpr {
    pub symbol: String,
    pub expr: String,
}

#[derive(Serialize, Clone, Debug)]
pub struct EquationEntry {
    pub kind: String,
    pub lhs: String,
    pub rhs: String,
    pub about: String,
}

#[derive(Serialize, Clone, Debug)]
pub struct DerivationSection {
    pub hessian_rank: usize,
    pub momenta: Vec<NamedExpr>,
    pub hamiltonian: String,
    pub momentum_identities: Vec<NamedExpr>,
    pub primary_constraints: Vec<String>,
    pub algebraic_coordinates: Vec<String>,
    pub undetermined_multipliers: Vec<String>,
    pub equations: Vec<EquationEntry>,
    pub reduced_equations: Vec<String>,
}

#[derive(Serialize, Clone, Debug)]
pub struct ConstraintEntry {
    pub class: String,
    pub expr: String,
    pub generation: usize,
    pub origin: String,
}

#[derive(Serialize, Clone, Debug)]
pub struct ConstraintsSection {
    pub primary: Vec<ConstraintEntry>,
    pub secondary: Vec<ConstraintEntry>,
    pub multiplier_values: Vec<NamedExpr>,
    pub passes: usize,
    pub closed: bool,
    pub log: Vec<String>,
}

#[derive(Serialize, Clone, Debug)]
pub struct SolveSection {
    pub m: usize,
    pub alpha: String,
    pub fields: Vec<String>,
    pub residual: f64,
    pub constraint_violation: Option<f64>,
    pub trajectory_file: String,
}

#[derive(Serialize, Clone, Debug)]
pub struct Report {
    pub name: String,
    pub alpha: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derivation: Option<DerivationSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraints: Option<ConstraintsSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSection>,
}

impl Report {
    pub fn new(spec: &ProblemSpec) -> Self {
        Report {
            name: spec.name.clone(),
            alpha: spec.alpha.render(),
            derivation: None,
            constraints: None,
            solve: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

fn kind_name(k: EquationKind) -> &'static str {
    match k {
        EquationKind::MomentumEvolution => "momentum-evolution",
        EquationKind::CoordinateEvolution => "coordinate-evolution",
        EquationKind::Algebraic => "algebraic",
        EquationKind::MultiplierStationarity => "multiplier-stationarity",
        EquationKind::InertMultiplier => "inert-multiplier",
    }
}

pub fn derivation_section(
    spec: &ProblemSpec,
    sys: &CanonicalSystem,
) -> Result<DerivationSection> {
    let lbar = crate::varproblem::build_modified_lagrangian(spec)?;
    let hessian = fractional_hessian(&lbar, spec);
    let (rank, _) = hessian_rank(&hessian);
    let reduced = crate::canonical::reduced_equations(sys)?;
    Ok(DerivationSection {
        hessian_rank: rank,
        momenta: sys
            .momenta
            .iter()
            .map(|(p, e)| NamedExpr { symbol: p.render(), expr: e.render() })
            .collect(),
        hamiltonian: sys.hamiltonian.render(),
        momentum_identities: sys
            .momentum_identities
            .iter()
            .map(|(p, e)| NamedExpr { symbol: p.render(), expr: e.render() })
            .collect(),
        primary_constraints: sys.primary.iter().map(|(e, _)| e.render()).collect(),
        algebraic_coordinates: sys.demoted.clone(),
        undetermined_multipliers: sys.undetermined.iter().map(|a| a.render()).collect(),
        equations: sys
            .equations
            .iter()
            .map(|e| EquationEntry {
                kind: kind_name(e.kind).into(),
                lhs: e.lhs.render(),
                rhs: e.rhs.render(),
                about: e.about.render(),
            })
            .collect(),
        reduced_equations: reduced.iter().map(|e| format!("{} = 0", e.render())).collect(),
    })
}

pub fn constraints_section(report: &ConstraintReport) -> ConstraintsSection {
    let entry = |c: &crate::constraints::Constraint| ConstraintEntry {
        class: match c.class {
            ConstraintClass::Primary => "primary".into(),
            ConstraintClass::Secondary => "secondary".into(),
        },
        expr: c.expr.render(),
        generation: c.generation,
        origin: c.origin.clone(),
    };
    ConstraintsSection {
        primary: report.primary().map(entry).collect(),
        secondary: report.secondary().map(entry).collect(),
        multiplier_values: report
            .multiplier_values
            .iter()
            .map(|(a, e)| NamedExpr { symbol: a.render(), expr: e.render() })
            .collect(),
        passes: report.passes,
        closed: report.closed,
        log: report.log.clone(),
    }
}
