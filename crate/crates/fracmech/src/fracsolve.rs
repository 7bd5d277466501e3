//! Discretization and global solve of the derived linear fractional
//! equations: left operators become lower-triangular GL blocks, right
//! operators upper-triangular ones, and forward–backward couplings are
//! handled by one dense square system (no shooting).

use std::collections::{BTreeMap, BTreeSet};

use crate::canonical::{substitute_through_words, CanonicalSystem, EquationKind};
use crate::constraints::ConstraintReport;
use crate::error::{Error, Result};
use crate::fracnum::{gl_weights, DenseMat, FracOrder, UniformGrid};
use crate::symcore::{rat_to_f64, Atom, AtomKind, LinExpr, MultKind, OpSide};
use crate::varproblem::ProblemSpec;

/// One linear equation `expr = 0` over field atoms, each optionally under
/// a single left/right operator.
#[derive(Clone, Debug)]
pub struct NumEquation {
    pub expr: LinExpr,
    pub origin: String,
}

/// Result of reducing the canonical equations to a closed square system:
/// identities, determined multipliers and algebraic eliminations applied.
#[derive(Clone, Debug)]
pub struct NumSystem {
    pub equations: Vec<NumEquation>,
    /// Wordless unknown field atoms, in deterministic order.
    pub fields: Vec<Atom>,
    /// Eliminated quantities recomputed after the solve, e.g. a demoted
    /// coordinate equal to a multiplier.
    pub recoveries: Vec<(Atom, LinExpr)>,
    /// Multiplier values substituted into the system (determined by
    /// consistency, solved from stationarity rows, or gauge-fixed to 0).
    pub determined: Vec<(Atom, LinExpr)>,
    /// Constraint rows not part of the square system; verified post hoc.
    pub check_rows: Vec<LinExpr>,
}

fn base_of(a: &Atom) -> Atom {
    let mut b = a.clone();
    b.word.clear();
    b
}

/// Reduce the canonical equations for numeric integration.
pub fn reduce_for_numerics(
    sys: &CanonicalSystem,
    report: &ConstraintReport,
) -> Result<NumSystem> {
    let identities: BTreeMap<Atom, LinExpr> =
        sys.momentum_identities.iter().cloned().collect();

    struct Row {
        kind: EquationKind,
        expr: LinExpr,
        origin: String,
    }
    let mut rows: Vec<Row> = Vec::new();
    for eq in &sys.equations {
        if eq.kind == EquationKind::InertMultiplier {
            continue;
        }
        rows.push(Row {
            kind: eq.kind,
            expr: substitute_through_words(&eq.residual(), &identities)?,
            origin: eq.about.render(),
        });
    }

    // multipliers already pinned by the consistency algorithm
    let mut subs: BTreeMap<Atom, LinExpr> = report
        .multiplier_values
        .iter()
        .filter(|(a, _)| a.is_multiplier(MultKind::Velocity))
        .map(|(a, v)| (a.clone(), v.clone()))
        .collect();
    let mut recoveries: BTreeMap<Atom, LinExpr> = BTreeMap::new();
    let demoted: BTreeSet<&String> = sys.demoted.iter().collect();

    loop {
        for row in rows.iter_mut() {
            row.expr = substitute_through_words(&row.expr.substitute(&subs), &recoveries)?;
        }
        let resolve = |e: &LinExpr, subs: &BTreeMap<Atom, LinExpr>, rec: &BTreeMap<Atom, LinExpr>| {
            substitute_through_words(&e.substitute(subs), rec)
        };
        let mut changed = false;
        // stationarity rows that still carry an undetermined multiplier
        // pin it; algebraic rows pin a demoted coordinate
        for row in rows.iter() {
            if row.expr.is_zero() {
                continue;
            }
            match row.kind {
                EquationKind::MultiplierStationarity => {
                    let free = row
                        .expr
                        .terms
                        .keys()
                        .find(|a| a.is_multiplier(MultKind::Velocity) && !subs.contains_key(*a))
                        .cloned();
                    if let Some(m) = free {
                        if let Some(v) = row.expr.solve_for(&m) {
                            subs.insert(m, v);
                            changed = true;
                        }
                    }
                }
                EquationKind::Algebraic => {
                    let target = row
                        .expr
                        .terms
                        .keys()
                        .find(|a| {
                            a.word.is_empty()
                                && matches!(a.kind, AtomKind::Coord)
                                && demoted.contains(&a.var)
                                && !recoveries.contains_key(*a)
                        })
                        .cloned();
                    if let Some(x) = target {
                        if let Some(v) = row.expr.solve_for(&x) {
                            recoveries.insert(x, v);
                            changed = true;
                        }
                    }
                }
                _ => {}
            }
        }
        if !changed {
            // gauge freedom: any multiplier still present is fixed to zero
            let mut gauged = false;
            for row in rows.iter() {
                for a in row.expr.terms.keys() {
                    if a.is_multiplier(MultKind::Velocity) && !subs.contains_key(a) {
                        subs.insert(a.clone(), LinExpr::zero());
                        gauged = true;
                    }
                }
                if gauged {
                    break;
                }
            }
            if !gauged {
                // close substitutions among themselves
                let snapshot = subs.clone();
                for v in subs.values_mut() {
                    *v = resolve(v, &snapshot, &recoveries)?;
                }
                let subs_snapshot = subs.clone();
                let rec_snapshot = recoveries.clone();
                for v in recoveries.values_mut() {
                    *v = resolve(v, &subs_snapshot, &rec_snapshot)?;
                }
                break;
            }
        }
    }

    let mut equations = Vec::new();
    let mut check_rows = Vec::new();
    for row in rows {
        if row.expr.is_zero() {
            continue;
        }
        match row.kind {
            EquationKind::MultiplierStationarity => check_rows.push(row.expr),
            EquationKind::Algebraic => {
                // fully consumed rows vanish above; anything left is a
                // genuine pointwise relation
                equations.push(NumEquation { expr: row.expr, origin: row.origin });
            }
            _ => equations.push(NumEquation { expr: row.expr, origin: row.origin }),
        }
    }

    let mut fields: BTreeSet<Atom> = BTreeSet::new();
    for eq in &equations {
        for a in eq.expr.terms.keys() {
            fields.insert(base_of(a));
        }
    }
    Ok(NumSystem {
        equations,
        fields: fields.into_iter().collect(),
        recoveries: recoveries.into_iter().collect(),
        determined: subs.into_iter().collect(),
        check_rows,
    })
}

/// Assembled global dense system over (field, node) unknowns.
#[derive(Clone, Debug)]
pub struct DiscreteSystem {
    pub grid: UniformGrid,
    pub fields: Vec<Atom>,
    pub matrix: DenseMat,
    pub rhs: Vec<f64>,
    /// (description, node) per row.
    pub row_origin: Vec<(String, usize)>,
}

impl DiscreteSystem {
    pub fn unknowns(&self) -> usize {
        self.fields.len() * self.grid.len()
    }
}

fn plan_equation(eq: &NumEquation) -> Result<Option<(Atom, OpSide)>> {
    let mut ops: Vec<(Atom, OpSide)> = Vec::new();
    for a in eq.expr.terms.keys() {
        match a.word.len() {
            0 => {}
            1 => {
                let pair = (base_of(a), a.word[0]);
                if !ops.contains(&pair) {
                    ops.push(pair);
                }
            }
            _ => {
                return Err(Error::WellPosed(format!(
                    "equation for {} nests operators; only first sequential order is solvable",
                    eq.origin
                )))
            }
        }
    }
    match ops.len() {
        0 => Ok(None),
        1 => Ok(Some(ops.pop().unwrap())),
        _ => Err(Error::WellPosed(format!(
            "equation for {} couples several operator terms in one row",
            eq.origin
        ))),
    }
}

/// Discretize the reduced system on the grid. Each operator-led equation
/// fills the grid rows away from its data end; a declared or natural
/// boundary row pins the remaining node. The endpoint value is subtracted
/// inside every GL sum, so constants are annihilated exactly and the
/// alpha = 1 rows coincide with classical difference quotients.
pub fn assemble(
    num: &NumSystem,
    spec: &ProblemSpec,
    grid: &UniformGrid,
) -> Result<DiscreteSystem> {
    spec.alpha.check_numeric()?;
    spec.beta.check_numeric()?;
    if num.equations.is_empty() {
        return Err(Error::WellPosed("empty equation set".into()));
    }
    let fields = num.fields.clone();
    let n = fields.len() * grid.len();
    let m = grid.m;
    let h = grid.h();
    let findex: BTreeMap<&Atom, usize> =
        fields.iter().enumerate().map(|(i, a)| (a, i)).collect();
    let lookup = |a: &Atom| -> Result<usize> {
        findex
            .get(&base_of(a))
            .copied()
            .ok_or_else(|| Error::Internal(format!("unknown field {}", a.render())))
    };

    let weights = |side: OpSide| -> Result<(Vec<f64>, f64)> {
        let alpha: &FracOrder = match side {
            OpSide::Left => &spec.alpha,
            OpSide::Right => &spec.beta,
        };
        Ok((gl_weights(alpha, m + 1)?, h.powf(-alpha.value())))
    };
    let (wl, sl) = weights(OpSide::Left)?;
    let (wr, sr) = weights(OpSide::Right)?;

    let mut matrix = DenseMat::zeros(n, n);
    let mut rhs = vec![0.0; n];
    let mut row_origin: Vec<(String, usize)> = Vec::new();
    let mut row = 0usize;
    let ds_index = |field: usize, node: usize| field * (m + 1) + node;

    let emit = |matrix: &mut DenseMat,
                    rhs: &mut Vec<f64>,
                    row_origin: &mut Vec<(String, usize)>,
                    row: &mut usize,
                    eq: &NumEquation,
                    k: usize|
     -> Result<()> {
        if *row >= n {
            return Err(Error::WellPosed(format!(
                "more equation rows than unknowns (at {})",
                eq.origin
            )));
        }
        for (a, c) in &eq.expr.terms {
            let f = lookup(a)?;
            let c = rat_to_f64(c);
            match a.word.first() {
                None => matrix.add_to(*row, ds_index(f, k), c),
                Some(OpSide::Left) => {
                    let mut wsum = 0.0;
                    for j in 0..=k {
                        matrix.add_to(*row, ds_index(f, k - j), c * sl * wl[j]);
                        wsum += wl[j];
                    }
                    matrix.add_to(*row, ds_index(f, 0), -c * sl * wsum);
                }
                Some(OpSide::Right) => {
                    let mut wsum = 0.0;
                    for j in 0..=(m - k) {
                        matrix.add_to(*row, ds_index(f, k + j), c * sr * wr[j]);
                        wsum += wr[j];
                    }
                    matrix.add_to(*row, ds_index(f, m), -c * sr * wsum);
                }
            }
        }
        rhs[*row] -= rat_to_f64(&eq.expr.constant);
        row_origin.push((eq.origin.clone(), k));
        *row += 1;
        Ok(())
    };

    let mut led_fields: Vec<(Atom, OpSide)> = Vec::new();
    for eq in &num.equations {
        match plan_equation(eq)? {
            None => {
                for k in 0..=m {
                    emit(&mut matrix, &mut rhs, &mut row_origin, &mut row, eq, k)?;
                }
            }
            Some((field, side)) => {
                if led_fields.iter().any(|(f, _)| *f == field) {
                    return Err(Error::WellPosed(format!(
                        "field {} is led by more than one equation",
                        field.render()
                    )));
                }
                let range: Box<dyn Iterator<Item = usize>> = match side {
                    OpSide::Left => Box::new(1..=m),
                    OpSide::Right => Box::new(0..m),
                };
                for k in range {
                    emit(&mut matrix, &mut rhs, &mut row_origin, &mut row, eq, k)?;
                }
                led_fields.push((field, side));
            }
        }
    }

    // boundary rows: declared data where available, natural zero otherwise
    for (field, side) in &led_fields {
        let (endpoint, node) = match side {
            OpSide::Left => (crate::symcore::Endpoint::A, 0usize),
            OpSide::Right => (crate::symcore::Endpoint::B, m),
        };
        let declared = spec
            .boundary
            .iter()
            .find(|b| matches!(field.kind, AtomKind::Coord) && b.var == field.var && b.at == endpoint);
        let value = declared.map(|b| rat_to_f64(&b.value)).unwrap_or(0.0);
        if row >= n {
            return Err(Error::WellPosed(format!(
                "no room for boundary row of {}",
                field.render()
            )));
        }
        let f = lookup(field)?;
        matrix.set(row, ds_index(f, node), 1.0);
        rhs[row] = value;
        row_origin.push((format!("boundary {}", field.render()), node));
        row += 1;
    }

    if row != n {
        let names: Vec<String> = fields.iter().map(|f| f.render()).collect();
        return Err(Error::WellPosed(format!(
            "{} rows for {} unknowns over fields [{}]",
            row,
            n,
            names.join(", ")
        )));
    }
    Ok(DiscreteSystem { grid: *grid, fields, matrix, rhs, row_origin })
}

/// Solved node series plus residual information.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: UniformGrid,
    pub series: BTreeMap<String, Vec<f64>>,
    /// Max |A x - b| over all rows.
    pub residual: f64,
    /// Max |A x - b| over the rows attached to each node.
    pub node_residual: Vec<f64>,
}

const PIVOT_TOL: f64 = 1e-13;

/// Dense LU solve with partial pivoting. A pivot below 1e-13 of the
/// original row scale reports which equation produced the bad row.
fn lu_solve(ds: &DiscreteSystem) -> Result<Vec<f64>> {
    let n = ds.unknowns();
    let mut a = ds.matrix.data.clone();
    let mut b = ds.rhs.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            ds.matrix.data[i * n..(i + 1) * n]
                .iter()
                .fold(0.0f64, |s, v| s.max(v.abs()))
                .max(1.0)
        })
        .collect();
    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .fold((col, -1.0), |best, cand| if cand.1 > best.1 { cand } else { best });
        if pivot_abs < PIVOT_TOL * scale[perm[pivot_row]] {
            let (origin, node) = ds.row_origin[perm[pivot_row]].clone();
            return Err(Error::Singular {
                row: perm[pivot_row],
                origin: format!("{origin} at node {node}"),
            });
        }
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
            }
            b.swap(col, pivot_row);
            perm.swap(col, pivot_row);
        }
        let pivot = a[col * n + col];
        for r in (col + 1)..n {
            let f = a[r * n + col] / pivot;
            if f == 0.0 {
                continue;
            }
            a[r * n + col] = 0.0;
            for j in (col + 1)..n {
                a[r * n + j] -= f * a[col * n + j];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in (i + 1)..n {
            s -= a[i * n + j] * x[j];
        }
        x[i] = s / a[i * n + i];
    }
    Ok(x)
}

fn eval_lin(e: &LinExpr, series: &BTreeMap<String, Vec<f64>>, k: usize) -> Result<f64> {
    let mut v = rat_to_f64(&e.constant);
    for (a, c) in &e.terms {
        let name = a.render();
        let s = series
            .get(&name)
            .ok_or_else(|| Error::Evaluation(format!("missing series {name}")))?;
        v += rat_to_f64(c) * s[k];
    }
    Ok(v)
}

/// Direct solve of the assembled system; eliminated quantities are
/// recomputed nodewise from their recovery expressions.
pub fn solve(ds: &DiscreteSystem, num: &NumSystem) -> Result<Trajectory> {
    let x = lu_solve(ds)?;
    let ax = ds.matrix.matvec(&x);
    let mut residual = 0.0f64;
    let mut node_residual = vec![0.0f64; ds.grid.len()];
    for (i, (_, node)) in ds.row_origin.iter().enumerate() {
        let r = (ax[i] - ds.rhs[i]).abs();
        residual = residual.max(r);
        node_residual[*node] = node_residual[*node].max(r);
    }
    let len = ds.grid.len();
    let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (f, atom) in ds.fields.iter().enumerate() {
        series.insert(atom.render(), x[f * len..(f + 1) * len].to_vec());
    }
    for (atom, expr) in num.recoveries.iter().chain(num.determined.iter()) {
        let vals: Result<Vec<f64>> = (0..len).map(|k| eval_lin(expr, &series, k)).collect();
        series.insert(atom.render(), vals?);
    }
    Ok(Trajectory { grid: ds.grid, series, residual, node_residual })
}

/// CSV export: `t,<series...>,residual`, one row per node, 17 significant
/// digits.
pub fn trajectory_csv(traj: &Trajectory, order: &[String]) -> Result<String> {
    let mut out = String::from("t");
    for name in order {
        if !traj.series.contains_key(name) {
            return Err(Error::Evaluation(format!("missing series {name}")));
        }
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",residual\n");
    for k in 0..traj.grid.len() {
        out.push_str(&format!("{:.16e}", traj.grid.node(k)));
        for name in order {
            out.push_str(&format!(",{:.16e}", traj.series[name][k]));
        }
        out.push_str(&format!(",{:.16e}\n", traj.node_residual[k]));
    }
    Ok(out)
}

fn apply_subtracted(
    values: &[f64],
    side: OpSide,
    alpha: &FracOrder,
    grid: &UniformGrid,
) -> Result<Vec<f64>> {
    alpha.check_numeric()?;
    let m = grid.m;
    let w = gl_weights(alpha, m + 1)?;
    let scale = grid.h().powf(-alpha.value());
    let anchor = match side {
        OpSide::Left => values[0],
        OpSide::Right => values[m],
    };
    let mut out = vec![0.0; m + 1];
    for k in 0..=m {
        let mut s = 0.0;
        match side {
            OpSide::Left => {
                for j in 0..=k {
                    s += w[j] * (values[k - j] - anchor);
                }
            }
            OpSide::Right => {
                for j in 0..=(m - k) {
                    s += w[j] * (values[k + j] - anchor);
                }
            }
        }
        out[k] = scale * s;
    }
    Ok(out)
}

fn atom_series(
    a: &Atom,
    traj: &Trajectory,
    sys: &CanonicalSystem,
    spec: &ProblemSpec,
) -> Result<Vec<f64>> {
    let base = base_of(a);
    let name = base.render();
    let mut vals = match traj.series.get(&name) {
        Some(s) => s.clone(),
        None => match &base.kind {
            AtomKind::Momentum { .. } => {
                // reconstruct from the defining expression
                let def = sys
                    .momenta
                    .iter()
                    .find(|(p, _)| *p == base)
                    .map(|(_, e)| e.clone())
                    .ok_or_else(|| Error::Evaluation(format!("missing series {name}")))?;
                expr_series(&def, traj, sys, spec)?
            }
            _ => return Err(Error::Evaluation(format!("missing series {name}"))),
        },
    };
    for op in a.word.iter().rev() {
        let alpha = match op {
            OpSide::Left => &spec.alpha,
            OpSide::Right => &spec.beta,
        };
        vals = apply_subtracted(&vals, *op, alpha, &traj.grid)?;
    }
    Ok(vals)
}

fn expr_series(
    e: &LinExpr,
    traj: &Trajectory,
    sys: &CanonicalSystem,
    spec: &ProblemSpec,
) -> Result<Vec<f64>> {
    let mut out = vec![rat_to_f64(&e.constant); traj.grid.len()];
    for (a, c) in &e.terms {
        let c = rat_to_f64(c);
        let s = atom_series(a, traj, sys, spec)?;
        for (o, v) in out.iter_mut().zip(&s) {
            *o += c * v;
        }
    }
    Ok(out)
}

/// Max over nodes and constraints of the absolute constraint value on the
/// trajectory; missing momenta are reconstructed from their definitions.
pub fn check_constraint_preservation(
    traj: &Trajectory,
    report: &ConstraintReport,
    sys: &CanonicalSystem,
    spec: &ProblemSpec,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for c in &report.constraints {
        let s = expr_series(&c.expr, traj, sys, spec)?;
        for v in s {
            worst = worst.max(v.abs());
        }
    }
    Ok(worst)
}

/// Derivation, constraint analysis, reduction, assembly and solve in one
/// call.
pub fn solve_problem(spec: &ProblemSpec, m: usize) -> Result<(NumSystem, Trajectory)> {
    let (_, sys) = crate::canonical::derive_system(spec)?;
    let report = crate::constraints::run_constraint_algorithm(&sys, spec)?;
    let num = reduce_for_numerics(&sys, &report)?;
    let grid = UniformGrid::new(rat_to_f64(&spec.a), rat_to_f64(&spec.b), m)?;
    let ds = assemble(&num, spec, &grid)?;
    let traj = solve(&ds, &num)?;
    Ok((num, traj))
}
