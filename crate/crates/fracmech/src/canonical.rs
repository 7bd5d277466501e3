//! Canonical momenta, degenerate Legendre transform, Hamilton equations
//! and the Poisson bracket for fractional quadratic Lagrangians.

use std::collections::{BTreeMap, BTreeSet};

use num::{One, Zero};

use crate::error::{Error, Result};
use crate::symcore::{
    rat, Atom, AtomKind, LinExpr, MultKind, OpSide, QuadForm, Rat,
};
use crate::varproblem::{build_modified_lagrangian, velocity_basis, ProblemSpec};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EquationKind {
    /// (right op p) = dH/dq
    MomentumEvolution,
    /// (left op q) = dH/dp
    CoordinateEvolution,
    /// 0 = dH/dx for a coordinate without momentum
    Algebraic,
    /// 0 = dH/dm for a multiplier in H
    MultiplierStationarity,
    /// 0 = dH/dm for an inert boundary multiplier
    InertMultiplier,
}

/// One emitted canonical equation, `lhs = rhs`.
#[derive(Clone, Debug)]
pub struct Equation {
    pub kind: EquationKind,
    pub lhs: LinExpr,
    pub rhs: LinExpr,
    /// Which symbol the equation is about.
    pub about: Atom,
}

impl Equation {
    /// Canonical `expr = 0` form (lhs - rhs).
    pub fn residual(&self) -> LinExpr {
        self.lhs.sub(&self.rhs)
    }

    pub fn render(&self) -> String {
        format!("{} = {}", self.lhs.render(), self.rhs.render())
    }
}

/// Output of the degenerate Legendre transform plus the emitted
/// canonical equations.
#[derive(Clone, Debug)]
pub struct CanonicalSystem {
    /// Every derived momentum with its defining expression.
    pub momenta: Vec<(Atom, LinExpr)>,
    /// Hamiltonian over phase atoms only (no velocities).
    pub hamiltonian: QuadForm,
    /// Solvable velocities expressed in phase atoms.
    pub velocity_solutions: BTreeMap<Atom, LinExpr>,
    /// Fresh multipliers standing for non-expressible velocities.
    pub undetermined: Vec<Atom>,
    /// Which velocity each undetermined multiplier renames.
    pub multiplier_velocity: BTreeMap<Atom, Atom>,
    /// Momentum rows that solve a declared multiplier, e.g. p0_1 = l.
    pub momentum_identities: Vec<(Atom, LinExpr)>,
    /// Primary-constraint expressions with their origin label.
    pub primary: Vec<(LinExpr, String)>,
    /// Coordinates demoted to algebraic status (identically-zero momentum
    /// whose conjugate equation carries no undetermined multiplier).
    pub demoted: Vec<String>,
    /// Momenta that remain phase-space variables.
    pub phase_momenta: Vec<Atom>,
    pub equations: Vec<Equation>,
}

/// Momenta for every variable and sequential level:
/// p_n^r = sum_{k=n+1..N} (right op)^{k-n-1} dLbar/dq_k^r, and the right
/// family symmetrically with the left operator.
pub fn canonical_momenta(lbar: &QuadForm, spec: &ProblemSpec) -> Result<Vec<(Atom, LinExpr)>> {
    let mut out = Vec::new();
    let n_max = spec.max_left_order.max(1);
    for var in &spec.variables {
        for n in 0..n_max {
            let mut expr = LinExpr::zero();
            for k in (n + 1)..=n_max {
                let q_k = Atom::coord_word(var, vec![OpSide::Left; k as usize]);
                let mut d = lbar.partial(&q_k);
                for _ in 0..(k - n - 1) {
                    d = d
                        .apply_operator(OpSide::Right)
                        .map_err(|e| Error::Derivation(e.to_string()))?;
                }
                expr = expr.add(&d);
            }
            out.push((Atom::momentum(var, n, OpSide::Left), expr));
        }
    }
    let np_max = spec.max_right_order;
    for var in &spec.variables {
        for n in 0..np_max {
            let mut expr = LinExpr::zero();
            for k in (n + 1)..=np_max {
                let q_k = Atom::coord_word(var, vec![OpSide::Right; k as usize]);
                let mut d = lbar.partial(&q_k);
                for _ in 0..(k - n - 1) {
                    d = d
                        .apply_operator(OpSide::Left)
                        .map_err(|e| Error::Derivation(e.to_string()))?;
                }
                expr = expr.add(&d);
            }
            out.push((Atom::momentum(var, n, OpSide::Right), expr));
        }
    }
    Ok(out)
}

fn velocity_free(e: &LinExpr, basis: &BTreeSet<Atom>) -> LinExpr {
    let mut out = e.clone();
    for v in basis {
        out.terms.remove(v);
    }
    out
}

fn fresh_multiplier_names(spec: &ProblemSpec, count: usize) -> Vec<String> {
    let mut taken: BTreeSet<String> = spec.variables.iter().cloned().collect();
    for c in &spec.constraints {
        taken.insert(c.multiplier.clone());
    }
    let mut names = Vec::new();
    let mut idx = 1usize;
    while names.len() < count {
        let cand = if idx == 1 { "lam".to_string() } else { format!("lam{idx}") };
        if !taken.contains(&cand) {
            taken.insert(cand.clone());
            names.push(cand);
        }
        idx += 1;
    }
    names
}

/// Degenerate Legendre transform. Solvable velocities are eliminated
/// exactly; each velocity surviving in the Hamiltonian is renamed to a
/// fresh multiplier; momentum rows without velocity content become
/// primary-constraint candidates.
pub fn legendre(
    lbar: &QuadForm,
    momenta: &[(Atom, LinExpr)],
    spec: &ProblemSpec,
) -> Result<CanonicalSystem> {
    if spec.max_left_order > 1 || spec.max_right_order > 1 {
        return Err(Error::Derivation(
            "legendre transform supports first sequential order only".into(),
        ));
    }
    let basis: Vec<Atom> = velocity_basis(spec);
    let basis_set: BTreeSet<Atom> = basis.iter().cloned().collect();
    let by_atom: BTreeMap<Atom, LinExpr> = momenta.iter().cloned().collect();

    // top-level momentum relations p = M v + c, rows aligned with basis
    struct Row {
        momentum: Atom,
        coeffs: Vec<Rat>,
        rhs: LinExpr, // p - c, updated during elimination
        defining_zero: bool,
    }
    let mut rows: Vec<Row> = Vec::new();
    for v in &basis {
        let (side, level) = match v.word[0] {
            OpSide::Left => (OpSide::Left, spec.max_left_order.max(1) - 1),
            OpSide::Right => (OpSide::Right, spec.max_right_order - 1),
        };
        let p = Atom::momentum(&v.var, level, side);
        let e = by_atom
            .get(&p)
            .cloned()
            .ok_or_else(|| Error::Internal(format!("missing momentum {}", p.render())))?;
        let coeffs: Vec<Rat> = basis.iter().map(|b| e.coeff(b)).collect();
        let c = velocity_free(&e, &basis_set);
        let rhs = LinExpr::from_atom(p.clone()).sub(&c);
        rows.push(Row { momentum: p, coeffs, rhs, defining_zero: e.is_zero() });
    }

    // exact Gauss-Jordan elimination over the velocity columns
    let ncols = basis.len();
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; ncols];
    let mut r = 0usize;
    for col in 0..ncols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i].coeffs[col].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = Rat::one() / rows[r].coeffs[col].clone();
        for j in 0..ncols {
            rows[r].coeffs[j] *= &inv;
        }
        rows[r].rhs = rows[r].rhs.scale(&inv);
        for i in 0..rows.len() {
            if i != r && !rows[i].coeffs[col].is_zero() {
                let f = rows[i].coeffs[col].clone();
                for j in 0..ncols {
                    let v = rows[i].coeffs[j].clone() - &f * &rows[r].coeffs[j];
                    rows[i].coeffs[j] = v;
                }
                let scaled = rows[r].rhs.scale(&f);
                rows[i].rhs = rows[i].rhs.sub(&scaled);
            }
        }
        pivot_of_col[col] = Some(r);
        r += 1;
    }

    // pivot velocity solutions (may still reference free velocities)
    let mut raw_solutions: BTreeMap<Atom, LinExpr> = BTreeMap::new();
    for (col, pivot) in pivot_of_col.iter().enumerate() {
        let Some(pr) = *pivot else { continue };
        let mut sol = rows[pr].rhs.clone();
        for j in 0..ncols {
            if j != col && !rows[pr].coeffs[j].is_zero() {
                sol = sol.sub(&LinExpr::term(basis[j].clone(), rows[pr].coeffs[j].clone()));
            }
        }
        raw_solutions.insert(basis[col].clone(), sol);
    }

    // primary-constraint candidates: rows with no velocity content left
    let mut candidates: Vec<(Atom, LinExpr, bool)> = Vec::new();
    for row in rows.iter().skip(r) {
        candidates.push((row.momentum.clone(), row.rhs.clone(), row.defining_zero));
    }

    // Hamiltonian: sum p*v over momenta with nonzero defining expression,
    // minus Lbar, then velocities eliminated
    let mut h_raw = lbar.scale(&rat(-1));
    for v in &basis {
        let (side, level) = match v.word[0] {
            OpSide::Left => (OpSide::Left, spec.max_left_order.max(1) - 1),
            OpSide::Right => (OpSide::Right, spec.max_right_order - 1),
        };
        let p = Atom::momentum(&v.var, level, side);
        if !by_atom[&p].is_zero() {
            h_raw = h_raw.add(&QuadForm::mul_lin(
                &LinExpr::from_atom(p),
                &LinExpr::from_atom(v.clone()),
            ));
        }
    }
    let h_mid = h_raw.substitute(&raw_solutions);

    // surviving velocities become fresh multipliers
    let surviving: Vec<Atom> = h_mid
        .atoms()
        .into_iter()
        .filter(|a| basis_set.contains(a))
        .collect();
    let names = fresh_multiplier_names(spec, surviving.len());
    let mut rename: BTreeMap<Atom, LinExpr> = BTreeMap::new();
    let mut undetermined = Vec::new();
    let mut multiplier_velocity = BTreeMap::new();
    for (v, name) in surviving.iter().zip(names) {
        let lam = Atom::multiplier(&name, MultKind::Velocity);
        rename.insert(v.clone(), LinExpr::from_atom(lam.clone()));
        multiplier_velocity.insert(lam.clone(), v.clone());
        undetermined.push(lam);
    }
    let hamiltonian = h_mid.substitute(&rename);
    let velocity_solutions: BTreeMap<Atom, LinExpr> = raw_solutions
        .into_iter()
        .map(|(v, sol)| (v, sol.substitute(&rename)))
        .collect();

    // classify candidates
    let mut momentum_identities = Vec::new();
    let mut primary = Vec::new();
    let mut demoted = Vec::new();
    let mut demoted_momenta: BTreeSet<Atom> = BTreeSet::new();
    for (p, expr, defining_zero) in candidates {
        if defining_zero {
            // expr is exactly the momentum itself
            let g = hamiltonian.partial(&Atom::coord(&p.var));
            let has_velocity_mult = g
                .atoms()
                .any(|a| a.is_multiplier(MultKind::Velocity));
            if !has_velocity_mult && !g.is_zero() {
                demoted.push(p.var.clone());
                demoted_momenta.insert(p.clone());
            } else {
                primary.push((expr, format!("momentum row {}", p.render())));
            }
            continue;
        }
        let has_constraint_mult = expr
            .atoms()
            .any(|a| a.is_multiplier(MultKind::Constraint));
        if has_constraint_mult {
            if let Some(value) = expr.solve_for(&p) {
                momentum_identities.push((p.clone(), value));
                continue;
            }
        }
        primary.push((expr, format!("momentum row {}", p.render())));
    }

    let phase_momenta: Vec<Atom> = momenta
        .iter()
        .map(|(p, _)| p.clone())
        .filter(|p| !demoted_momenta.contains(p))
        .collect();

    Ok(CanonicalSystem {
        momenta: momenta.to_vec(),
        hamiltonian,
        velocity_solutions,
        undetermined,
        multiplier_velocity,
        momentum_identities,
        primary,
        demoted,
        phase_momenta,
        equations: Vec::new(),
    })
}

/// Emit the canonical equations: momentum evolution through the right
/// operator, coordinate evolution through the left operator, algebraic
/// rows for demoted coordinates, stationarity rows for multipliers.
pub fn hamilton_equations(sys: &CanonicalSystem, spec: &ProblemSpec) -> Vec<Equation> {
    let h = &sys.hamiltonian;
    let mut eqs = Vec::new();
    let demoted: BTreeSet<&String> = sys.demoted.iter().collect();
    for var in &spec.variables {
        if demoted.contains(var) {
            continue;
        }
        let p = Atom::momentum(var, 0, OpSide::Left);
        if !sys.phase_momenta.contains(&p) {
            continue;
        }
        eqs.push(Equation {
            kind: EquationKind::CoordinateEvolution,
            lhs: LinExpr::from_atom(Atom::velocity(var)),
            rhs: h.partial(&p).into_lin(),
            about: Atom::coord(var),
        });
        eqs.push(Equation {
            kind: EquationKind::MomentumEvolution,
            lhs: LinExpr::from_atom(p.prefixed(OpSide::Right)),
            rhs: h.partial(&Atom::coord(var)).into_lin(),
            about: p,
        });
    }
    for var in &sys.demoted {
        eqs.push(Equation {
            kind: EquationKind::Algebraic,
            lhs: LinExpr::zero(),
            rhs: h.partial(&Atom::coord(var)).into_lin(),
            about: Atom::coord(var),
        });
    }
    let mut mults: Vec<Atom> = h
        .atoms()
        .into_iter()
        .filter(|a| matches!(a.kind, AtomKind::Multiplier(_)))
        .collect();
    mults.sort();
    for m in mults {
        let kind = match m.kind {
            AtomKind::Multiplier(MultKind::Boundary) => EquationKind::InertMultiplier,
            _ => EquationKind::MultiplierStationarity,
        };
        eqs.push(Equation {
            kind,
            lhs: LinExpr::zero(),
            rhs: h.partial(&m).into_lin(),
            about: m,
        });
    }
    eqs
}

trait IntoLin {
    fn into_lin(self) -> LinExpr;
}
impl IntoLin for LinExpr {
    fn into_lin(self) -> LinExpr {
        self
    }
}

/// Substitute wordless atoms by expressions, re-applying each atom's
/// operator word to the replacement.
pub fn substitute_through_words(
    e: &LinExpr,
    map: &BTreeMap<Atom, LinExpr>,
) -> Result<LinExpr> {
    let mut out = LinExpr::constant(e.constant.clone());
    for (a, c) in &e.terms {
        let mut base = a.clone();
        let word = std::mem::take(&mut base.word);
        match map.get(&base) {
            Some(repl) => {
                let mut val = repl.clone();
                for op in word.iter().rev() {
                    val = val.apply_operator(*op)?;
                }
                out = out.add(&val.scale(c));
            }
            None => out.add_term(a.clone(), c.clone()),
        }
    }
    Ok(out)
}

/// Canonical equations with momentum identities substituted, each
/// normalized to an `expr = 0` residual.
pub fn reduced_equations(sys: &CanonicalSystem) -> Result<Vec<LinExpr>> {
    let map: BTreeMap<Atom, LinExpr> = sys.momentum_identities.iter().cloned().collect();
    let mut out = Vec::new();
    for eq in &sys.equations {
        if matches!(eq.kind, EquationKind::InertMultiplier) {
            continue;
        }
        let res = substitute_through_words(&eq.residual(), &map)?;
        if !res.is_zero() {
            out.push(res);
        }
    }
    Ok(out)
}

/// Full derivation pipeline for a validated problem.
pub fn derive_system(spec: &ProblemSpec) -> Result<(QuadForm, CanonicalSystem)> {
    let lbar = build_modified_lagrangian(spec)?;
    let momenta = canonical_momenta(&lbar, spec)?;
    let mut sys = legendre(&lbar, &momenta, spec)?;
    sys.equations = hamilton_equations(&sys, spec);
    Ok((lbar, sys))
}

/// Conjugate-pair Poisson bracket over all (q_n, p_n) and (Q_n', pi_n')
/// pairs occurring in the arguments.
pub fn poisson_bracket(a: &QuadForm, b: &QuadForm) -> Result<QuadForm> {
    let mut pairs: BTreeSet<(String, u32, OpSide)> = BTreeSet::new();
    for atom in a.atoms().into_iter().chain(b.atoms()) {
        match &atom.kind {
            AtomKind::Coord => {
                if atom.word.iter().all(|o| *o == OpSide::Left) {
                    pairs.insert((atom.var.clone(), atom.word.len() as u32, OpSide::Left));
                } else if !atom.word.is_empty() && atom.word.iter().all(|o| *o == OpSide::Right) {
                    pairs.insert((atom.var.clone(), atom.word.len() as u32, OpSide::Right));
                }
            }
            AtomKind::Momentum { side, level } => {
                pairs.insert((atom.var.clone(), *level, *side));
            }
            _ => {}
        }
    }
    let mut out = QuadForm::zero();
    for (var, level, side) in pairs {
        let q = Atom::coord_word(&var, vec![side; level as usize]);
        let p = Atom::momentum(&var, level, side);
        let da_dq = a.partial(&q);
        let db_dp = b.partial(&p);
        let db_dq = b.partial(&q);
        let da_dp = a.partial(&p);
        out = out
            .add(&QuadForm::mul_lin(&da_dq, &db_dp))
            .sub(&QuadForm::mul_lin(&db_dq, &da_dp));
    }
    Ok(out)
}
