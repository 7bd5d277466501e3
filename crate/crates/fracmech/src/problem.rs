//! JSON problem files: exact-rational encoding of a variational problem,
//! parsed into a validated `ProblemSpec` and serialized back in canonical
//! key order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracnum::FracOrder;
use crate::symcore::{
    parse_rational, rat_to_string, Atom, AtomKind, Endpoint, LinExpr, OpSide, QuadForm, Rat,
};
use crate::varproblem::{BoundaryCond, ConstraintDef, ConstraintKind, ProblemSpec};

fn default_op() -> String {
    "id".into()
}

fn default_pow() -> u32 {
    1
}

fn default_const() -> String {
    "0".into()
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct FactorDto {
    pub var: String,
    #[serde(default = "default_op")]
    pub op: String,
    #[serde(default = "default_pow")]
    pub pow: u32,
    /// Endpoint tag for boundary-value factors, "a" or "b".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<String>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct TermDto {
    pub coeff: String,
    pub factors: Vec<FactorDto>,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct ConstraintDto {
    pub multiplier: String,
    pub kind: String,
    pub terms: Vec<TermDto>,
    #[serde(default = "default_const", rename = "const")]
    pub constant: String,
}

#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct BoundaryDto {
    pub var: String,
    pub at: String,
    pub value: String,
}

/// On-disk problem layout; field order is the serialization order.
#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct ProblemFile {
    pub name: String,
    pub alpha: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<String>,
    pub interval: [String; 2],
    pub variables: Vec<String>,
    pub lagrangian: Vec<TermDto>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<ConstraintDto>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boundary: Vec<BoundaryDto>,
}

fn parse_endpoint(s: &str, field: &str) -> Result<Endpoint> {
    match s {
        "a" => Ok(Endpoint::A),
        "b" => Ok(Endpoint::B),
        other => Err(Error::Parse(format!("{field}: endpoint must be \"a\" or \"b\", got {other:?}"))),
    }
}

fn factor_atom(f: &FactorDto, vars: &[String], field: &str) -> Result<Atom> {
    if !vars.contains(&f.var) {
        return Err(Error::Parse(format!("{field}: undeclared variable {:?}", f.var)));
    }
    if let Some(at) = &f.at {
        if f.op != "id" {
            return Err(Error::Parse(format!(
                "{field}: boundary-value factor for {} cannot carry an operator",
                f.var
            )));
        }
        return Ok(Atom::boundary_val(&f.var, parse_endpoint(at, field)?));
    }
    match f.op.as_str() {
        "id" => Ok(Atom::coord(&f.var)),
        "L" => Ok(Atom::coord_word(&f.var, vec![OpSide::Left])),
        "R" => Ok(Atom::coord_word(&f.var, vec![OpSide::Right])),
        other => Err(Error::Parse(format!("{field}: unknown op {other:?}"))),
    }
}

fn term_atoms(t: &TermDto, vars: &[String], field: &str) -> Result<(Rat, Vec<Atom>)> {
    let coeff = parse_rational(&t.coeff)
        .map_err(|e| Error::Parse(format!("{field}: bad coeff {:?} ({e})", t.coeff)))?;
    if t.factors.len() > 2 {
        return Err(Error::Parse(format!("{field}: more than two factors in a term")));
    }
    let mut atoms = Vec::new();
    for f in &t.factors {
        let a = factor_atom(f, vars, field)?;
        for _ in 0..f.pow {
            atoms.push(a.clone());
        }
    }
    if atoms.len() > 2 {
        return Err(Error::UnsupportedDegree(format!("{field}: term degree {}", atoms.len())));
    }
    Ok((coeff, atoms))
}

fn terms_to_quad(terms: &[TermDto], vars: &[String], field: &str) -> Result<QuadForm> {
    let mut q = QuadForm::zero();
    for t in terms {
        let (coeff, atoms) = term_atoms(t, vars, field)?;
        match atoms.len() {
            0 => q.lin = q.lin.add(&LinExpr::constant(coeff)),
            1 => q.lin.add_term(atoms[0].clone(), coeff),
            _ => q.add_quad_term(atoms[0].clone(), atoms[1].clone(), coeff),
        }
    }
    Ok(q)
}

fn terms_to_lin(terms: &[TermDto], constant: &str, vars: &[String], field: &str) -> Result<LinExpr> {
    let mut e = LinExpr::constant(
        parse_rational(constant)
            .map_err(|err| Error::Parse(format!("{field}: bad const {constant:?} ({err})")))?,
    );
    for t in terms {
        let (coeff, atoms) = term_atoms(t, vars, field)?;
        match atoms.len() {
            0 => e = e.add(&LinExpr::constant(coeff)),
            1 => e.add_term(atoms[0].clone(), coeff),
            _ => {
                return Err(Error::Parse(format!("{field}: constraint terms must be linear")));
            }
        }
    }
    Ok(e)
}

/// Build a validated spec from the file layout.
pub fn problem_from_file(file: &ProblemFile) -> Result<ProblemSpec> {
    let alpha = FracOrder::parse(&file.alpha)
        .map_err(|e| Error::Parse(format!("alpha: {e}")))?;
    let beta = match &file.beta {
        Some(s) => FracOrder::parse(s).map_err(|e| Error::Parse(format!("beta: {e}")))?,
        None => alpha.clone(),
    };
    let a = parse_rational(&file.interval[0])
        .map_err(|e| Error::Parse(format!("interval[0]: {e}")))?;
    let b = parse_rational(&file.interval[1])
        .map_err(|e| Error::Parse(format!("interval[1]: {e}")))?;
    let lagrangian = terms_to_quad(&file.lagrangian, &file.variables, "lagrangian")?;
    let mut constraints = Vec::new();
    let mut any_right = lagrangian
        .atoms()
        .iter()
        .any(|at| at.word.first() == Some(&OpSide::Right));
    for c in &file.constraints {
        let kind = match c.kind.as_str() {
            "dynamical" => ConstraintKind::Dynamical,
            "boundary" => ConstraintKind::BoundaryPoint,
            other => {
                return Err(Error::Parse(format!(
                    "constraint {}: unknown kind {other:?}",
                    c.multiplier
                )))
            }
        };
        let field = format!("constraint {}", c.multiplier);
        let expr = terms_to_lin(&c.terms, &c.constant, &file.variables, &field)?;
        any_right |= expr.atoms().any(|at| at.word.first() == Some(&OpSide::Right));
        constraints.push(ConstraintDef { multiplier: c.multiplier.clone(), kind, expr });
    }
    let mut boundary = Vec::new();
    for bc in &file.boundary {
        boundary.push(BoundaryCond {
            var: bc.var.clone(),
            at: parse_endpoint(&bc.at, "boundary")?,
            value: parse_rational(&bc.value)
                .map_err(|e| Error::Parse(format!("boundary {}: {e}", bc.var)))?,
        });
    }
    let spec = ProblemSpec {
        name: file.name.clone(),
        variables: file.variables.clone(),
        alpha,
        beta,
        a,
        b,
        max_left_order: 1,
        max_right_order: if any_right { 1 } else { 0 },
        lagrangian,
        constraints,
        boundary,
    };
    spec.validate()?;
    Ok(spec)
}

fn atom_factor(a: &Atom, pow: u32, context: &str) -> Result<FactorDto> {
    match &a.kind {
        AtomKind::Coord => {
            let op = match a.word.as_slice() {
                [] => "id",
                [OpSide::Left] => "L",
                [OpSide::Right] => "R",
                _ => {
                    return Err(Error::Internal(format!(
                        "{context}: cannot serialize nested operator atom {}",
                        a.render()
                    )))
                }
            };
            Ok(FactorDto { var: a.var.clone(), op: op.into(), pow, at: None })
        }
        AtomKind::BoundaryVal(e) => Ok(FactorDto {
            var: a.var.clone(),
            op: "id".into(),
            pow,
            at: Some(match e {
                Endpoint::A => "a".into(),
                Endpoint::B => "b".into(),
            }),
        }),
        _ => Err(Error::Internal(format!(
            "{context}: atom {} has no file representation",
            a.render()
        ))),
    }
}

fn quad_to_terms(q: &QuadForm, context: &str) -> Result<Vec<TermDto>> {
    let mut terms = Vec::new();
    for ((a, b), c) in &q.quad {
        let factors = if a == b {
            vec![atom_factor(a, 2, context)?]
        } else {
            vec![atom_factor(a, 1, context)?, atom_factor(b, 1, context)?]
        };
        terms.push(TermDto { coeff: rat_to_string(c), factors });
    }
    for (a, c) in &q.lin.terms {
        terms.push(TermDto { coeff: rat_to_string(c), factors: vec![atom_factor(a, 1, context)?] });
    }
    if !num::Zero::is_zero(&q.lin.constant) {
        terms.push(TermDto { coeff: rat_to_string(&q.lin.constant), factors: vec![] });
    }
    Ok(terms)
}

/// Canonical file layout for a spec (stable ordering, exact rationals).
pub fn problem_to_file(spec: &ProblemSpec) -> Result<ProblemFile> {
    let mut constraints = Vec::new();
    for c in &spec.constraints {
        let context = format!("constraint {}", c.multiplier);
        let mut terms = Vec::new();
        for (a, coeff) in &c.expr.terms {
            terms.push(TermDto {
                coeff: rat_to_string(coeff),
                factors: vec![atom_factor(a, 1, &context)?],
            });
        }
        constraints.push(ConstraintDto {
            multiplier: c.multiplier.clone(),
            kind: match c.kind {
                ConstraintKind::Dynamical => "dynamical".into(),
                ConstraintKind::BoundaryPoint => "boundary".into(),
            },
            terms,
            constant: rat_to_string(&c.expr.constant),
        });
    }
    Ok(ProblemFile {
        name: spec.name.clone(),
        alpha: spec.alpha.render(),
        beta: if spec.beta == spec.alpha { None } else { Some(spec.beta.render()) },
        interval: [rat_to_string(&spec.a), rat_to_string(&spec.b)],
        variables: spec.variables.clone(),
        lagrangian: quad_to_terms(&spec.lagrangian, "lagrangian")?,
        constraints,
        boundary: spec
            .boundary
            .iter()
            .map(|b| BoundaryDto {
                var: b.var.clone(),
                at: match b.at {
                    Endpoint::A => "a".into(),
                    Endpoint::B => "b".into(),
                },
                value: rat_to_string(&b.value),
            })
            .collect(),
    })
}

pub fn parse_problem_str(s: &str) -> Result<ProblemSpec> {
    let file: ProblemFile = serde_json::from_str(s)?;
    problem_from_file(&file)
}

pub fn parse_problem(path: &Path) -> Result<ProblemSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_problem_str(&text)
}

pub fn serialize_problem(spec: &ProblemSpec) -> Result<String> {
    let file = problem_to_file(spec)?;
    let mut s = serde_json::to_string_pretty(&file)?;
    s.push('\n');
    Ok(s)
}
