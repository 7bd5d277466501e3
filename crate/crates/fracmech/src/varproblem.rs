//! Declarative fractional variational problems: modified Lagrangian,
//! fractional Hessian, exact rank.

use std::collections::BTreeMap;



use crate::error::{Error, Result};
use crate::fracnum::FracOrder;
use crate::ratlin::RatMat;
use crate::symcore::{Atom, AtomKind, Endpoint, LinExpr, MultKind, OpSide, QuadForm, Rat};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ConstraintKind {
    Dynamical,
    BoundaryPoint,
}

/// One declared constraint with its multiplier name.
#[derive(Clone, Debug)]
pub struct ConstraintDef {
    pub multiplier: String,
    pub kind: ConstraintKind,
    pub expr: LinExpr,
}

#[derive(Clone, Debug)]
pub struct BoundaryCond {
    pub var: String,
    pub at: Endpoint,
    pub value: Rat,
}

/// Validated problem statement.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub name: String,
    pub variables: Vec<String>,
    pub alpha: FracOrder,
    pub beta: FracOrder,
    pub a: Rat,
    pub b: Rat,
    pub max_left_order: u32,
    pub max_right_order: u32,
    pub lagrangian: QuadForm,
    pub constraints: Vec<ConstraintDef>,
    pub boundary: Vec<BoundaryCond>,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.variables.is_empty() {
            return Err(Error::Spec("empty variables list".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for v in &self.variables {
            if !seen.insert(v.clone()) {
                return Err(Error::Spec(format!("duplicate variable {v}")));
            }
        }
        let mut mults = std::collections::BTreeSet::new();
        for c in &self.constraints {
            if seen.contains(&c.multiplier) {
                return Err(Error::Spec(format!(
                    "multiplier {} collides with a variable name",
                    c.multiplier
                )));
            }
            if !mults.insert(c.multiplier.clone()) {
                return Err(Error::Spec(format!("duplicate multiplier name {}", c.multiplier)));
            }
        }
        if self.b <= self.a {
            return Err(Error::Spec("interval requires b > a".into()));
        }
        for atom in self.lagrangian.atoms() {
            self.check_atom(&atom, "lagrangian")?;
        }
        for c in &self.constraints {
            match c.kind {
                ConstraintKind::Dynamical => {
                    for atom in c.expr.atoms() {
                        self.check_atom(atom, "constraint")?;
                    }
                }
                ConstraintKind::BoundaryPoint => {
                    let mut endpoints = std::collections::BTreeSet::new();
                    for atom in c.expr.atoms() {
                        match atom.kind {
                            AtomKind::BoundaryVal(e) => {
                                if !self.variables.contains(&atom.var) {
                                    return Err(Error::Spec(format!(
                                        "boundary constraint references undeclared variable {}",
                                        atom.var
                                    )));
                                }
                                endpoints.insert(e);
                            }
                            _ => {
                                return Err(Error::Spec(format!(
                                    "boundary-point constraint {} may only reference endpoint values",
                                    c.multiplier
                                )))
                            }
                        }
                    }
                    if endpoints.len() != 1 {
                        return Err(Error::Spec(format!(
                            "boundary-point constraint {} must reference exactly one endpoint",
                            c.multiplier
                        )));
                    }
                }
            }
        }
        for b in &self.boundary {
            if !self.variables.contains(&b.var) {
                return Err(Error::Spec(format!(
                    "boundary condition references undeclared variable {}",
                    b.var
                )));
            }
        }
        Ok(())
    }

    fn check_atom(&self, atom: &Atom, ctx: &str) -> Result<()> {
        match atom.kind {
            AtomKind::Coord => {
                if !self.variables.contains(&atom.var) {
                    return Err(Error::Spec(format!(
                        "{ctx} references undeclared variable {}",
                        atom.var
                    )));
                }
                let lefts = atom.word.iter().filter(|o| **o == OpSide::Left).count() as u32;
                let rights = atom.word.iter().filter(|o| **o == OpSide::Right).count() as u32;
                if lefts > self.max_left_order || rights > self.max_right_order {
                    return Err(Error::Spec(format!(
                        "{ctx} atom {} exceeds declared sequential orders",
                        atom.render()
                    )));
                }
                Ok(())
            }
            _ => Err(Error::Spec(format!(
                "{ctx} may only reference coordinate atoms, got {}",
                atom.render()
            ))),
        }
    }

    /// Multiplier atom for a declared constraint.
    pub fn multiplier_atom(&self, c: &ConstraintDef) -> Atom {
        let kind = match c.kind {
            ConstraintKind::Dynamical => MultKind::Constraint,
            ConstraintKind::BoundaryPoint => MultKind::Boundary,
        };
        Atom::multiplier(&c.multiplier, kind)
    }
}

/// Modified Lagrangian: L plus multiplier times constraint for every
/// declared constraint. Boundary-point terms are carried symbolically
/// but are inert downstream.
pub fn build_modified_lagrangian(spec: &ProblemSpec) -> Result<QuadForm> {
    spec.validate()?;
    let mut lbar = spec.lagrangian.clone();
    for c in &spec.constraints {
        let lam = LinExpr::from_atom(spec.multiplier_atom(c));
        lbar = lbar.add(&QuadForm::mul_lin(&lam, &c.expr));
    }
    Ok(lbar)
}

/// Matrix of second partials of the modified Lagrangian with respect to
/// the fractional velocities.
#[derive(Clone, Debug)]
pub struct FracHessian {
    pub basis: Vec<Atom>,
    pub matrix: RatMat,
}

/// Velocity atoms spanning the Hessian basis: the highest-order left
/// word for every declared variable, plus right words when present.
pub fn velocity_basis(spec: &ProblemSpec) -> Vec<Atom> {
    let mut basis = Vec::new();
    let n = spec.max_left_order.max(1) as usize;
    for v in &spec.variables {
        basis.push(Atom::coord_word(v, vec![OpSide::Left; n]));
    }
    if spec.max_right_order > 0 {
        let np = spec.max_right_order as usize;
        for v in &spec.variables {
            basis.push(Atom::coord_word(v, vec![OpSide::Right; np]));
        }
    }
    basis
}

pub fn fractional_hessian(lbar: &QuadForm, spec: &ProblemSpec) -> FracHessian {
    let basis = velocity_basis(spec);
    let n = basis.len();
    let mut matrix = RatMat::zeros(n, n);
    for (i, ai) in basis.iter().enumerate() {
        let di = lbar.partial(ai);
        for (j, aj) in basis.iter().enumerate() {
            matrix.set(i, j, di.coeff(aj));
        }
    }
    FracHessian { basis, matrix }
}

/// Exact rank plus a basis for the null space (velocity directions that
/// cannot be inverted).
pub fn hessian_rank(h: &FracHessian) -> (usize, Vec<Vec<Rat>>) {
    (h.matrix.rank(), h.matrix.null_space())
}

/// Helper used by tests and the PyO3 layer: quadratic form 1/2 (sum of
/// velocity atoms)^2 style Lagrangians are built with plain symcore ops;
/// this utility only evaluates a linear expression at a boundary map.
pub fn eval_constraint_constant(expr: &LinExpr, values: &BTreeMap<Atom, Rat>) -> Rat {
    let mut acc = expr.constant.clone();
    for (a, c) in &expr.terms {
        if let Some(v) = values.get(a) {
            acc += c * v;
        }
    }
    acc
}
