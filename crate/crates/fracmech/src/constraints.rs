//! Constraint classification and consistency propagation: evolve each
//! constraint under the canonical flow until the set closes, determining
//! multipliers along the way.

use std::collections::BTreeMap;

use crate::canonical::{CanonicalSystem, EquationKind};
use crate::error::{Error, Result};
use crate::symcore::{Atom, AtomKind, LinExpr, MultKind, OpSide, Rat};
use crate::ratlin::in_span;
use crate::varproblem::ProblemSpec;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ConstraintClass {
    Primary,
    Secondary,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub expr: LinExpr,
    pub class: ConstraintClass,
    /// Consistency pass that produced it; 0 for primaries.
    pub generation: usize,
    pub origin: String,
}

#[derive(Clone, Debug)]
pub enum ConsistencyOutcome {
    Preserved,
    DeterminesMultiplier { multiplier: Atom, value: LinExpr },
    NewConstraint { expr: LinExpr },
    /// Evolution is not defined through phase space (boundary values,
    /// declared multipliers, demoted coordinates).
    Inert { reason: String },
}

#[derive(Clone, Debug)]
pub struct ConstraintReport {
    pub constraints: Vec<Constraint>,
    pub multiplier_values: BTreeMap<Atom, LinExpr>,
    pub passes: usize,
    pub closed: bool,
    pub log: Vec<String>,
}

impl ConstraintReport {
    pub fn primary(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().filter(|c| c.class == ConstraintClass::Primary)
    }

    pub fn secondary(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().filter(|c| c.class == ConstraintClass::Secondary)
    }
}

fn conjugate_momentum(a: &Atom) -> Atom {
    let side = a.word.first().copied().unwrap_or(OpSide::Left);
    Atom::momentum(&a.var, a.word.len() as u32, side)
}

/// Time evolution of a linear phase-space expression under the canonical
/// flow: coordinates move by dH/dp, momenta by -dH/dq; operator-word
/// atoms evolve their base coordinate and re-apply the word. Determined
/// multipliers are substituted before words are applied.
pub fn constraint_evolution(
    expr: &LinExpr,
    sys: &CanonicalSystem,
    determined: &BTreeMap<Atom, LinExpr>,
) -> Result<LinExpr> {
    let h = &sys.hamiltonian;
    let mut out = LinExpr::zero();
    for (a, c) in &expr.terms {
        let ev = match &a.kind {
            AtomKind::Coord => {
                if sys.demoted.contains(&a.var) {
                    return Err(Error::InertVariable(a.render()));
                }
                if a.word.is_empty() {
                    h.partial(&conjugate_momentum(a))
                } else if a.word.iter().all(|o| *o == a.word[0]) {
                    let base = Atom::coord(&a.var);
                    let mut ev = h.partial(&conjugate_momentum(&base));
                    ev = ev.substitute(determined);
                    for op in a.word.iter().rev() {
                        ev = ev.apply_operator(*op)?;
                    }
                    ev
                } else {
                    return Err(Error::InertVariable(a.render()));
                }
            }
            AtomKind::Momentum { side, level } => {
                let q = Atom::coord_word(&a.var, vec![*side; *level as usize]);
                h.partial(&q).neg()
            }
            AtomKind::Multiplier(_) | AtomKind::BoundaryVal(_) => {
                return Err(Error::InertVariable(a.render()));
            }
        };
        out = out.add(&ev.scale(c));
    }
    Ok(out.substitute(determined))
}

fn atom_basis(exprs: &[&LinExpr]) -> Vec<Atom> {
    let mut set = std::collections::BTreeSet::new();
    for e in exprs {
        for a in e.terms.keys() {
            set.insert(a.clone());
        }
    }
    set.into_iter().collect()
}

fn to_vec(e: &LinExpr, basis: &[Atom]) -> Vec<Rat> {
    let mut v: Vec<Rat> = basis.iter().map(|a| e.coeff(a)).collect();
    v.push(e.constant.clone());
    v
}

/// One consistency check of `phi` against the current constraint set.
pub fn consistency_step(
    phi: &Constraint,
    constraints: &[Constraint],
    sys: &CanonicalSystem,
    determined: &BTreeMap<Atom, LinExpr>,
) -> ConsistencyOutcome {
    let ev = match constraint_evolution(&phi.expr, sys, determined) {
        Ok(e) => e,
        Err(err) => return ConsistencyOutcome::Inert { reason: err.to_string() },
    };
    if ev.is_zero() {
        return ConsistencyOutcome::Preserved;
    }
    // zero modulo the constraint surface: exact span membership
    let exprs: Vec<&LinExpr> = constraints
        .iter()
        .map(|c| &c.expr)
        .chain(std::iter::once(&ev))
        .collect();
    let basis = atom_basis(&exprs);
    let rows: Vec<Vec<Rat>> = constraints.iter().map(|c| to_vec(&c.expr, &basis)).collect();
    if in_span(&rows, &to_vec(&ev, &basis)) {
        return ConsistencyOutcome::Preserved;
    }
    let free = ev.terms.keys().find(|a| {
        a.is_multiplier(MultKind::Velocity) && !determined.contains_key(*a)
    });
    if let Some(m) = free.cloned() {
        if let Some(value) = ev.solve_for(&m) {
            return ConsistencyOutcome::DeterminesMultiplier { multiplier: m, value };
        }
    }
    ConsistencyOutcome::NewConstraint { expr: ev }
}

const MAX_PASSES: usize = 16;

/// Iterate consistency checks to closure. Returns the full constraint
/// set, determined multipliers, and a per-step log.
pub fn run_constraint_algorithm(
    sys: &CanonicalSystem,
    _spec: &ProblemSpec,
) -> Result<ConstraintReport> {
    let mut constraints: Vec<Constraint> = sys
        .primary
        .iter()
        .map(|(expr, origin)| Constraint {
            expr: expr.clone(),
            class: ConstraintClass::Primary,
            generation: 0,
            origin: origin.clone(),
        })
        .collect();
    let mut determined: BTreeMap<Atom, LinExpr> = BTreeMap::new();
    let mut multiplier_values: BTreeMap<Atom, LinExpr> = BTreeMap::new();
    let mut log = Vec::new();

    // algebraic rows that pin a declared multiplier, e.g. 0 = l - x2
    for eq in &sys.equations {
        if eq.kind != EquationKind::Algebraic {
            continue;
        }
        let mult = eq
            .rhs
            .terms
            .keys()
            .find(|a| a.is_multiplier(MultKind::Constraint))
            .cloned();
        if let Some(m) = mult {
            if let Some(v) = eq.rhs.solve_for(&m) {
                log.push(format!("{} = {} (from algebraic row)", m.render(), v.render()));
                multiplier_values.insert(m, v);
            }
        }
    }

    let mut passes = 0;
    let mut closed = false;
    while passes < MAX_PASSES {
        passes += 1;
        let mut changed = false;
        let snapshot = constraints.clone();
        for phi in &snapshot {
            match consistency_step(phi, &constraints, sys, &determined) {
                ConsistencyOutcome::Preserved => {
                    log.push(format!("pass {passes}: {} preserved", phi.expr.render()));
                }
                ConsistencyOutcome::Inert { reason } => {
                    log.push(format!("pass {passes}: {} inert ({reason})", phi.expr.render()));
                }
                ConsistencyOutcome::DeterminesMultiplier { multiplier, value } => {
                    log.push(format!(
                        "pass {passes}: {} determines {} = {}",
                        phi.expr.render(),
                        multiplier.render(),
                        value.render()
                    ));
                    determined.insert(multiplier.clone(), value.clone());
                    multiplier_values.insert(multiplier.clone(), value.clone());
                    changed = true;
                    // the multiplier renames a velocity: record the induced
                    // velocity-level constraint unless already implied
                    if let Some(vel) = sys.multiplier_velocity.get(&multiplier) {
                        let expr = LinExpr::from_atom(vel.clone()).sub(&value);
                        let exprs: Vec<&LinExpr> = constraints
                            .iter()
                            .map(|c| &c.expr)
                            .chain(std::iter::once(&expr))
                            .collect();
                        let basis = atom_basis(&exprs);
                        let rows: Vec<Vec<Rat>> =
                            constraints.iter().map(|c| to_vec(&c.expr, &basis)).collect();
                        if !in_span(&rows, &to_vec(&expr, &basis)) {
                            constraints.push(Constraint {
                                expr,
                                class: ConstraintClass::Secondary,
                                generation: passes,
                                origin: format!("consistency of {}", phi.expr.render()),
                            });
                        }
                    }
                }
                ConsistencyOutcome::NewConstraint { expr } => {
                    log.push(format!(
                        "pass {passes}: {} yields new constraint {}",
                        phi.expr.render(),
                        expr.render()
                    ));
                    constraints.push(Constraint {
                        expr,
                        class: ConstraintClass::Secondary,
                        generation: passes,
                        origin: format!("consistency of {}", phi.expr.render()),
                    });
                    changed = true;
                }
            }
        }
        if !changed {
            closed = true;
            break;
        }
    }

    Ok(ConstraintReport { constraints, multiplier_values, passes, closed, log })
}
