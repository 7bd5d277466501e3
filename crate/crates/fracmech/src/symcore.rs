//! Exact-rational symbolic expressions over canonical atoms.
//!
//! Expressions are capped at total degree two: every Lagrangian,
//! Hamiltonian and constraint handled by the engine is quadratic, which
//! keeps arithmetic exact and equality decidable.

use std::collections::BTreeMap;
use std::fmt;

use num::bigint::BigInt;
use num::{BigRational, One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rat = BigRational;

/// Rational from an integer.
pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Rational from a numerator/denominator pair.
pub fn ratio(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Parse an exact rational from `a/b`, integer, or decimal (`-1.25`) notation.
pub fn parse_rational(s: &str) -> Result<Rat> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty number".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad rational numerator in {s:?}")))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad rational denominator in {s:?}")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rat::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::Parse(format!("bad decimal {s:?}")));
        }
        let negative = int_part.starts_with('-');
        let int_digits = int_part.trim_start_matches(['-', '+']);
        let int_val: BigInt = if int_digits.is_empty() {
            BigInt::zero()
        } else {
            int_digits
                .parse()
                .map_err(|_| Error::Parse(format!("bad decimal {s:?}")))?
        };
        let frac_val: BigInt = frac_part
            .parse()
            .map_err(|_| Error::Parse(format!("bad decimal {s:?}")))?;
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let mut v = Rat::from_integer(int_val) + Rat::new(frac_val, scale);
        if negative {
            v = -v;
        }
        return Ok(v);
    }
    let n: BigInt = s
        .parse()
        .map_err(|_| Error::Parse(format!("bad number {s:?}")))?;
    Ok(Rat::from_integer(n))
}

/// Render a rational as `n` or `n/d`.
pub fn rat_to_string(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    use num::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Side of a fractional-derivative application.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum OpSide {
    /// Left derivative taken from t = a forward.
    Left,
    /// Right derivative taken from t = b backward.
    Right,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum Endpoint {
    A,
    B,
}

/// What a multiplier atom stands for.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum MultKind {
    /// Multiplier of a dynamical constraint from the problem statement.
    Constraint,
    /// Multiplier of a boundary-point constraint; inert in the dynamics.
    Boundary,
    /// Fresh symbol standing for a velocity the Legendre transform
    /// could not solve for.
    Velocity,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum AtomKind {
    Coord,
    Momentum { side: OpSide, level: u32 },
    Multiplier(MultKind),
    /// Value of a variable at an endpoint, e.g. x1(a). Inert.
    BoundaryVal(Endpoint),
}

/// One canonical symbol: a variable with an operator word, a momentum,
/// a multiplier, or an endpoint value.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct Atom {
    pub kind: AtomKind,
    pub var: String,
    /// Operator word, outermost application first.
    pub word: Vec<OpSide>,
}

impl Atom {
    pub fn coord(var: &str) -> Self {
        Atom { kind: AtomKind::Coord, var: var.to_string(), word: Vec::new() }
    }

    pub fn coord_word(var: &str, word: Vec<OpSide>) -> Self {
        Atom { kind: AtomKind::Coord, var: var.to_string(), word }
    }

    /// q_1-level left velocity atom of a variable.
    pub fn velocity(var: &str) -> Self {
        Atom::coord_word(var, vec![OpSide::Left])
    }

    pub fn momentum(var: &str, level: u32, side: OpSide) -> Self {
        Atom {
            kind: AtomKind::Momentum { side, level },
            var: var.to_string(),
            word: Vec::new(),
        }
    }

    pub fn multiplier(name: &str, kind: MultKind) -> Self {
        Atom {
            kind: AtomKind::Multiplier(kind),
            var: name.to_string(),
            word: Vec::new(),
        }
    }

    pub fn boundary_val(var: &str, at: Endpoint) -> Self {
        Atom { kind: AtomKind::BoundaryVal(at), var: var.to_string(), word: Vec::new() }
    }

    pub fn is_multiplier(&self, kind: MultKind) -> bool {
        self.kind == AtomKind::Multiplier(kind)
    }

    pub fn is_coord(&self) -> bool {
        self.kind == AtomKind::Coord
    }

    /// Prefix the operator word with one more application.
    pub fn prefixed(&self, op: OpSide) -> Self {
        let mut a = self.clone();
        a.word.insert(0, op);
        a
    }

    fn base_name(&self) -> String {
        match &self.kind {
            AtomKind::Coord => self.var.clone(),
            AtomKind::Momentum { side, level } => {
                let idx = momentum_index(&self.var);
                match side {
                    OpSide::Left => format!("p{level}_{idx}"),
                    OpSide::Right => format!("pi{level}_{idx}"),
                }
            }
            AtomKind::Multiplier(_) => self.var.clone(),
            AtomKind::BoundaryVal(at) => {
                let e = match at {
                    Endpoint::A => "a",
                    Endpoint::B => "b",
                };
                format!("{}({})", self.var, e)
            }
        }
    }

    /// Stable text rendering: `x1`, `DL^2 x1`, `DR p0_1`, `lam`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut i = 0;
        while i < self.word.len() {
            let op = self.word[i];
            let mut run = 1;
            while i + run < self.word.len() && self.word[i + run] == op {
                run += 1;
            }
            let tag = match op {
                OpSide::Left => "DL",
                OpSide::Right => "DR",
            };
            if run == 1 {
                out.push_str(tag);
            } else {
                out.push_str(&format!("{tag}^{run}"));
            }
            out.push(' ');
            i += run;
        }
        out.push_str(&self.base_name());
        out
    }
}

/// `x1` -> `1`, anything else stays as-is.
fn momentum_index(var: &str) -> String {
    let digits: String = var.chars().skip_while(|c| !c.is_ascii_digit()).collect();
    if !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit()) {
        digits
    } else {
        var.to_string()
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Linear expression: exact-rational combination of atoms plus a constant.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct LinExpr {
    pub terms: BTreeMap<Atom, Rat>,
    pub constant: Rat,
}

impl LinExpr {
    pub fn zero() -> Self {
        LinExpr::default()
    }

    pub fn constant(c: Rat) -> Self {
        LinExpr { terms: BTreeMap::new(), constant: c }
    }

    pub fn from_atom(a: Atom) -> Self {
        let mut e = LinExpr::zero();
        e.add_term(a, rat(1));
        e
    }

    pub fn term(a: Atom, c: Rat) -> Self {
        let mut e = LinExpr::zero();
        e.add_term(a, c);
        e
    }

    pub fn add_term(&mut self, a: Atom, c: Rat) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(a).or_insert_with(Rat::zero);
        *entry += c;
        if entry.is_zero() {
            // remove the key we just zeroed
            let dead: Vec<Atom> = self
                .terms
                .iter()
                .filter(|(_, v)| v.is_zero())
                .map(|(k, _)| k.clone())
                .collect();
            for k in dead {
                self.terms.remove(&k);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.constant.is_zero()
    }

    pub fn coeff(&self, a: &Atom) -> Rat {
        self.terms.get(a).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.terms.keys()
    }

    pub fn add(&self, other: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        for (a, c) in &other.terms {
            out.add_term(a.clone(), c.clone());
        }
        out.constant += &other.constant;
        out
    }

    pub fn sub(&self, other: &LinExpr) -> LinExpr {
        self.add(&other.scale(&rat(-1)))
    }

    pub fn neg(&self) -> LinExpr {
        self.scale(&rat(-1))
    }

    pub fn scale(&self, c: &Rat) -> LinExpr {
        if c.is_zero() {
            return LinExpr::zero();
        }
        let mut out = LinExpr::zero();
        for (a, v) in &self.terms {
            out.terms.insert(a.clone(), v * c);
        }
        out.constant = &self.constant * c;
        out
    }

    /// Exact substitution of atoms by linear expressions.
    pub fn substitute(&self, bindings: &BTreeMap<Atom, LinExpr>) -> LinExpr {
        let mut out = LinExpr::constant(self.constant.clone());
        for (a, c) in &self.terms {
            match bindings.get(a) {
                Some(repl) => out = out.add(&repl.scale(c)),
                None => out.add_term(a.clone(), c.clone()),
            }
        }
        out
    }

    /// Distribute a fractional operator over the expression, prefixing
    /// every atom's word. Rejects nonzero constants: the fractional
    /// derivative of a constant is not a constant.
    pub fn apply_operator(&self, op: OpSide) -> Result<LinExpr> {
        if !self.constant.is_zero() {
            return Err(Error::NonzeroConstant(self.render()));
        }
        let mut out = LinExpr::zero();
        for (a, c) in &self.terms {
            out.add_term(a.prefixed(op), c.clone());
        }
        Ok(out)
    }

    /// Solve `self = 0` for `target`; requires target present.
    pub fn solve_for(&self, target: &Atom) -> Option<LinExpr> {
        let c = self.terms.get(target)?;
        let mut rest = self.clone();
        rest.terms.remove(target);
        Some(rest.scale(&(-Rat::one() / c)))
    }

    pub fn render(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        let mut first = true;
        for (a, c) in &self.terms {
            push_term(&mut out, &mut first, c, Some(&a.render()));
        }
        if !self.constant.is_zero() {
            push_term(&mut out, &mut first, &self.constant, None);
        }
        out
    }
}

fn push_term(out: &mut String, first: &mut bool, c: &Rat, sym: Option<&str>) {
    let mag = c.abs();
    let sign_neg = c.is_negative();
    if *first {
        if sign_neg {
            out.push('-');
        }
        *first = false;
    } else if sign_neg {
        out.push_str(" - ");
    } else {
        out.push_str(" + ");
    }
    match sym {
        Some(s) => {
            if mag.is_one() {
                out.push_str(s);
            } else {
                out.push_str(&format!("{}*{}", rat_to_string(&mag), s));
            }
        }
        None => out.push_str(&rat_to_string(&mag)),
    }
}

/// Quadratic form: symmetric quadratic part over unordered atom pairs
/// plus a linear part.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct QuadForm {
    /// Coefficient of the monomial a*b, keyed by the sorted pair (a <= b).
    pub quad: BTreeMap<(Atom, Atom), Rat>,
    pub lin: LinExpr,
}

impl QuadForm {
    pub fn zero() -> Self {
        QuadForm::default()
    }

    pub fn from_lin(lin: LinExpr) -> Self {
        QuadForm { quad: BTreeMap::new(), lin }
    }

    pub fn is_zero(&self) -> bool {
        self.quad.is_empty() && self.lin.is_zero()
    }

    pub fn add_quad_term(&mut self, a: Atom, b: Atom, c: Rat) {
        if c.is_zero() {
            return;
        }
        let key = if a <= b { (a, b) } else { (b, a) };
        let entry = self.quad.entry(key.clone()).or_insert_with(Rat::zero);
        *entry += c;
        if entry.is_zero() {
            self.quad.remove(&key);
        }
    }

    pub fn add(&self, other: &QuadForm) -> QuadForm {
        let mut out = self.clone();
        for ((a, b), c) in &other.quad {
            out.add_quad_term(a.clone(), b.clone(), c.clone());
        }
        out.lin = out.lin.add(&other.lin);
        out
    }

    pub fn sub(&self, other: &QuadForm) -> QuadForm {
        self.add(&other.scale(&rat(-1)))
    }

    pub fn scale(&self, c: &Rat) -> QuadForm {
        if c.is_zero() {
            return QuadForm::zero();
        }
        let mut out = QuadForm::zero();
        for ((a, b), v) in &self.quad {
            out.quad.insert((a.clone(), b.clone()), v * c);
        }
        out.lin = self.lin.scale(c);
        out
    }

    /// Product of two linear expressions; always at most quadratic.
    pub fn mul_lin(a: &LinExpr, b: &LinExpr) -> QuadForm {
        let mut out = QuadForm::zero();
        for (xa, ca) in &a.terms {
            for (xb, cb) in &b.terms {
                out.add_quad_term(xa.clone(), xb.clone(), ca * cb);
            }
        }
        out.lin = out
            .lin
            .add(&b.scale(&a.constant))
            .add(&LinExpr {
                terms: a.terms.clone(),
                constant: Rat::zero(),
            }
            .scale(&b.constant));
        out
    }

    /// Exact partial derivative treating each distinct atom as independent.
    pub fn partial(&self, x: &Atom) -> LinExpr {
        let mut out = LinExpr::zero();
        for ((a, b), c) in &self.quad {
            if a == x && b == x {
                out.add_term(a.clone(), c * rat(2));
            } else if a == x {
                out.add_term(b.clone(), c.clone());
            } else if b == x {
                out.add_term(a.clone(), c.clone());
            }
        }
        out.add_term(x.clone(), Rat::zero());
        if let Some(c) = self.lin.terms.get(x) {
            out.constant += c;
        }
        out
    }

    /// Substitute atoms by linear expressions; degree stays at two.
    pub fn substitute(&self, bindings: &BTreeMap<Atom, LinExpr>) -> QuadForm {
        let mut out = QuadForm::from_lin(self.lin.substitute(bindings));
        for ((a, b), c) in &self.quad {
            let ea = bindings
                .get(a)
                .cloned()
                .unwrap_or_else(|| LinExpr::from_atom(a.clone()));
            let eb = bindings
                .get(b)
                .cloned()
                .unwrap_or_else(|| LinExpr::from_atom(b.clone()));
            out = out.add(&QuadForm::mul_lin(&ea, &eb).scale(c));
        }
        out
    }

    pub fn atoms(&self) -> Vec<Atom> {
        let mut set = std::collections::BTreeSet::new();
        for (a, b) in self.quad.keys() {
            set.insert(a.clone());
            set.insert(b.clone());
        }
        for a in self.lin.atoms() {
            set.insert(a.clone());
        }
        set.into_iter().collect()
    }

    /// True if the expression has any term containing one of `atoms`.
    pub fn depends_on(&self, x: &Atom) -> bool {
        !self.partial(x).is_zero() || self.lin.terms.contains_key(x)
    }

    pub fn render(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        let mut first = true;
        for ((a, b), c) in &self.quad {
            let sym = if a == b {
                format!("{}^2", a.render())
            } else {
                format!("{}*{}", a.render(), b.render())
            };
            push_term(&mut out, &mut first, c, Some(&sym));
        }
        for (a, c) in &self.lin.terms {
            push_term(&mut out, &mut first, c, Some(&a.render()));
        }
        if !self.lin.constant.is_zero() {
            push_term(&mut out, &mut first, &self.lin.constant, None);
        }
        out
    }
}

/// Structural equality of canonical forms; exact, no tolerance.
pub fn equal_lin(a: &LinExpr, b: &LinExpr) -> bool {
    a == b
}

pub fn equal_quad(a: &QuadForm, b: &QuadForm) -> bool {
    a == b
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u() -> Atom {
        Atom::coord("u")
    }
    fn v() -> Atom {
        Atom::coord("v")
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("1/2").unwrap(), ratio(1, 2));
        assert_eq!(parse_rational("0.5").unwrap(), ratio(1, 2));
        assert_eq!(parse_rational("-1.25").unwrap(), ratio(-5, 4));
        assert_eq!(parse_rational("3").unwrap(), rat(3));
        assert!(parse_rational("x").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn partial_of_quadratic() {
        // 1/2 u^2 + u v + 3
        let mut q = QuadForm::zero();
        q.add_quad_term(u(), u(), ratio(1, 2));
        q.add_quad_term(u(), v(), rat(1));
        q.lin.constant = rat(3);
        let d = q.partial(&u());
        let expected = LinExpr::from_atom(u()).add(&LinExpr::from_atom(v()));
        assert!(equal_lin(&d, &expected));
        // derivative w.r.t. an absent atom is zero
        assert!(q.partial(&Atom::coord("w")).is_zero());
    }

    #[test]
    fn apply_operator_linearity_and_words() {
        let e = LinExpr::term(Atom::coord("x1"), rat(2))
            .add(&LinExpr::term(Atom::coord("x2"), rat(-3)));
        let d = e.apply_operator(OpSide::Left).unwrap();
        let expected = LinExpr::term(Atom::velocity("x1"), rat(2))
            .add(&LinExpr::term(Atom::velocity("x2"), rat(-3)));
        assert!(equal_lin(&d, &expected));

        // word concatenation: L applied twice
        let x = LinExpr::from_atom(Atom::coord("x"));
        let d2 = x
            .apply_operator(OpSide::Left)
            .unwrap()
            .apply_operator(OpSide::Left)
            .unwrap();
        let ll = Atom::coord_word("x", vec![OpSide::Left, OpSide::Left]);
        assert!(equal_lin(&d2, &LinExpr::from_atom(ll)));

        // operator on momentum
        let p = LinExpr::from_atom(Atom::momentum("x1", 0, OpSide::Left));
        let rp = p.apply_operator(OpSide::Right).unwrap();
        assert_eq!(rp.atoms().next().unwrap().render(), "DR p0_1");

        // strict policy rejects nonzero constants
        let bad = LinExpr::from_atom(u()).add(&LinExpr::constant(rat(1)));
        assert!(matches!(
            bad.apply_operator(OpSide::Left),
            Err(Error::NonzeroConstant(_))
        ));
    }

    #[test]
    fn substitution() {
        // v -> p - u into u + v gives p
        let p = Atom::momentum("x1", 0, OpSide::Left);
        let mut bind = BTreeMap::new();
        bind.insert(
            v(),
            LinExpr::from_atom(p.clone()).sub(&LinExpr::from_atom(u())),
        );
        let e = LinExpr::from_atom(u()).add(&LinExpr::from_atom(v()));
        assert!(equal_lin(&e.substitute(&bind), &LinExpr::from_atom(p)));

        // empty bindings is identity
        let empty = BTreeMap::new();
        assert!(equal_lin(&e.substitute(&empty), &e));
    }

    #[test]
    fn expansion_equality() {
        // 1/2 (u+v)^2 == 1/2 u^2 + uv + 1/2 v^2
        let s = LinExpr::from_atom(u()).add(&LinExpr::from_atom(v()));
        let sq = QuadForm::mul_lin(&s, &s).scale(&ratio(1, 2));
        let mut rhs = QuadForm::zero();
        rhs.add_quad_term(u(), u(), ratio(1, 2));
        rhs.add_quad_term(u(), v(), rat(1));
        rhs.add_quad_term(v(), v(), ratio(1, 2));
        assert!(equal_quad(&sq, &rhs));

        let a = LinExpr::from_atom(u()).sub(&LinExpr::from_atom(v()));
        let b = LinExpr::from_atom(v()).sub(&LinExpr::from_atom(u()));
        assert!(!equal_lin(&a, &b));
    }

    #[test]
    fn mul_lin_with_constants() {
        // (u + 2)(v + 3) = uv + 3u + 2v + 6
        let a = LinExpr::from_atom(u()).add(&LinExpr::constant(rat(2)));
        let b = LinExpr::from_atom(v()).add(&LinExpr::constant(rat(3)));
        let q = QuadForm::mul_lin(&a, &b);
        let mut expected = QuadForm::zero();
        expected.add_quad_term(u(), v(), rat(1));
        expected.lin.add_term(u(), rat(3));
        expected.lin.add_term(v(), rat(2));
        expected.lin.constant = rat(6);
        assert!(equal_quad(&q, &expected));
    }

    #[test]
    fn render_stability() {
        let mut q = QuadForm::zero();
        q.add_quad_term(
            Atom::momentum("x1", 0, OpSide::Left),
            Atom::momentum("x1", 0, OpSide::Left),
            ratio(1, 2),
        );
        assert_eq!(q.render(), "1/2*p0_1^2");
        let a = Atom::coord_word("x1", vec![OpSide::Left, OpSide::Left]);
        assert_eq!(a.render(), "DL^2 x1");
    }
}
