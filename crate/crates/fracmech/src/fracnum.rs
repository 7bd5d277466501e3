//! Grünwald–Letnikov realization of left/right Riemann–Liouville
//! derivatives on uniform grids.

use crate::error::{Error, Result};
use crate::symcore::{parse_rational, rat_to_f64, rat_to_string, OpSide, Rat};

/// Fractional order alpha, stored exactly. Construction admits (0, 2);
/// the apply operations additionally require (0, 1].
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FracOrder(Rat);

impl FracOrder {
    pub fn new(value: Rat) -> Result<Self> {
        let v = rat_to_f64(&value);
        if v <= 0.0 || v >= 2.0 {
            return Err(Error::OrderDomain(rat_to_string(&value), "(0, 2)"));
        }
        Ok(FracOrder(value))
    }

    pub fn parse(s: &str) -> Result<Self> {
        FracOrder::new(parse_rational(s)?)
    }

    pub fn exact(&self) -> &Rat {
        &self.0
    }

    pub fn value(&self) -> f64 {
        rat_to_f64(&self.0)
    }

    pub fn render(&self) -> String {
        rat_to_string(&self.0)
    }

    pub fn is_one(&self) -> bool {
        num::One::is_one(&self.0)
    }

    pub fn check_numeric(&self) -> Result<()> {
        let v = self.value();
        if v <= 0.0 || v > 1.0 {
            return Err(Error::OrderDomain(self.render(), "(0, 1]"));
        }
        Ok(())
    }
}

/// Uniform grid on [a, b] with m intervals, nodes t_k = a + k h.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct UniformGrid {
    pub a: f64,
    pub b: f64,
    pub m: usize,
}

impl UniformGrid {
    pub fn new(a: f64, b: f64, m: usize) -> Result<Self> {
        if !(b > a) {
            return Err(Error::Spec(format!("grid requires b > a, got [{a}, {b}]")));
        }
        if m < 2 {
            return Err(Error::Spec(format!("grid requires m >= 2, got {m}")));
        }
        Ok(UniformGrid { a, b, m })
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.m as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.a + k as f64 * self.h()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.m).map(|k| self.node(k))
    }

    pub fn len(&self) -> usize {
        self.m + 1
    }
}

/// Samples of a function on a uniform grid.
#[derive(Clone, PartialEq, Debug)]
pub struct SampledFunction {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Spec(format!(
                "sample length {} does not match node count {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(SampledFunction { grid, values })
    }

    pub fn from_fn(grid: UniformGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        SampledFunction { grid, values }
    }
}

/// GL weights w_0..w_{count-1}: w_0 = 1, w_j = w_{j-1} (1 - (alpha+1)/j);
/// equal to (-1)^j binomial(alpha, j).
pub fn gl_weights(alpha: &FracOrder, count: usize) -> Result<Vec<f64>> {
    if count < 1 {
        return Err(Error::Spec("gl_weights requires count >= 1".into()));
    }
    let a = alpha.value();
    let mut w = Vec::with_capacity(count);
    w.push(1.0f64);
    for j in 1..count {
        let prev = w[j - 1];
        w.push(prev * (1.0 - (a + 1.0) / j as f64));
    }
    Ok(w)
}

/// Left RL derivative via GL sums: out_k = h^-alpha sum_{j<=k} w_j f_{k-j}.
/// At alpha = 1 this is the backward difference quotient exactly.
pub fn left_rl_apply(f: &SampledFunction, alpha: &FracOrder) -> Result<SampledFunction> {
    alpha.check_numeric()?;
    let m = f.grid.m;
    let w = gl_weights(alpha, m + 1)?;
    let scale = f.grid.h().powf(-alpha.value());
    let mut out = vec![0.0; m + 1];
    for k in 0..=m {
        let mut s = 0.0;
        for j in 0..=k {
            s += w[j] * f.values[k - j];
        }
        out[k] = scale * s;
    }
    SampledFunction::new(f.grid, out)
}

/// Right RL derivative via reflected GL sums:
/// out_k = h^-alpha sum_{j<=m-k} w_j f_{k+j}; at alpha = 1 it is -(forward difference)/h.
pub fn right_rl_apply(f: &SampledFunction, alpha: &FracOrder) -> Result<SampledFunction> {
    alpha.check_numeric()?;
    let m = f.grid.m;
    let w = gl_weights(alpha, m + 1)?;
    let scale = f.grid.h().powf(-alpha.value());
    let mut out = vec![0.0; m + 1];
    for k in 0..=m {
        let mut s = 0.0;
        for j in 0..=(m - k) {
            s += w[j] * f.values[k + j];
        }
        out[k] = scale * s;
    }
    SampledFunction::new(f.grid, out)
}

/// Gamma function via the Lanczos approximation (g = 7, 9 coefficients);
/// accurate to ~1e-13 relative error, used by validation suites.
pub fn gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = C[0];
        for (i, &ci) in C.iter().enumerate().skip(1) {
            a += ci / (x + i as f64);
        }
        let t = x + G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        y
    }
}

/// Dense GL operator matrix on the grid: lower-triangular Toeplitz for the
/// left derivative, upper-triangular Toeplitz for the right one.
pub fn operator_matrix(alpha: &FracOrder, grid: &UniformGrid, side: OpSide) -> Result<DenseMat> {
    alpha.check_numeric()?;
    let m = grid.m;
    let w = gl_weights(alpha, m + 1)?;
    let scale = grid.h().powf(-alpha.value());
    let mut mat = DenseMat::zeros(m + 1, m + 1);
    for k in 0..=m {
        match side {
            OpSide::Left => {
                for j in 0..=k {
                    mat.set(k, k - j, scale * w[j]);
                }
            }
            OpSide::Right => {
                for j in 0..=(m - k) {
                    mat.set(k, k + j, scale * w[j]);
                }
            }
        }
    }
    Ok(mat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symcore::ratio;

    fn order(n: i64, d: i64) -> FracOrder {
        FracOrder::new(ratio(n, d)).unwrap()
    }

    /// Independent oracle: (-1)^j * C(alpha, j) by the falling-factorial
    /// product formula.
    fn binomial_weight(alpha: f64, j: usize) -> f64 {
        let mut num = 1.0;
        for i in 0..j {
            num *= alpha - i as f64;
        }
        let mut fact = 1.0;
        for i in 1..=j {
            fact *= i as f64;
        }
        if j % 2 == 0 { num / fact } else { -num / fact }
    }

    #[test]
    fn weights_examples() {
        let w = gl_weights(&order(1, 1), 3).unwrap();
        assert_eq!(w, vec![1.0, -1.0, 0.0]);
        let w = gl_weights(&order(1, 2), 3).unwrap();
        assert_eq!(w, vec![1.0, -0.5, -0.125]);
        let w = gl_weights(&order(1, 2), 1).unwrap();
        assert_eq!(w, vec![1.0]);
    }

    #[test]
    fn weights_match_binomial_oracle() {
        for (n, d) in [(1i64, 4i64), (1, 2), (3, 4), (9, 10)] {
            let a = order(n, d);
            let w = gl_weights(&a, 12).unwrap();
            for (j, wj) in w.iter().enumerate() {
                let oracle = binomial_weight(a.value(), j);
                assert!((wj - oracle).abs() <= 1e-13 * oracle.abs().max(1.0));
            }
        }
    }

    #[test]
    fn weight_signs_and_partial_sums() {
        // for 0 < alpha < 1: w_0 = 1 > 0, w_j < 0 for j >= 1, |w_j| non-increasing,
        // partial sums positive and decreasing
        for (n, d) in [(1i64, 10i64), (1, 2), (9, 10)] {
            let w = gl_weights(&order(n, d), 40).unwrap();
            assert_eq!(w[0], 1.0);
            let mut partial = 0.0;
            let mut prev_partial = f64::INFINITY;
            for (j, wj) in w.iter().enumerate() {
                if j >= 1 {
                    assert!(*wj < 0.0, "w[{j}] = {wj}");
                    if j >= 2 {
                        assert!(wj.abs() <= w[j - 1].abs() + 1e-15);
                    }
                }
                partial += wj;
                assert!(partial > 0.0);
                assert!(partial < prev_partial);
                prev_partial = partial;
            }
        }
    }

    #[test]
    fn order_domain() {
        assert!(FracOrder::new(ratio(5, 2)).is_err());
        assert!(FracOrder::new(ratio(0, 1)).is_err());
        assert!(FracOrder::new(ratio(3, 2)).is_ok());
        // orders in (1,2) are accepted by gl_weights but rejected by apply
        let a = FracOrder::new(ratio(3, 2)).unwrap();
        assert!(gl_weights(&a, 4).is_ok());
        let g = UniformGrid::new(0.0, 1.0, 8).unwrap();
        let f = SampledFunction::from_fn(g, |t| t);
        assert!(matches!(left_rl_apply(&f, &a), Err(Error::OrderDomain(_, _))));
        assert!(matches!(right_rl_apply(&f, &a), Err(Error::OrderDomain(_, _))));
    }

    /// Analytic left RL derivative of t^p on [0,1]: Gamma(p+1)/Gamma(p+1-alpha) t^(p-alpha).
    fn rl_monomial(p: f64, alpha: f64, t: f64) -> f64 {
        gamma(p + 1.0) / gamma(p + 1.0 - alpha) * t.powf(p - alpha)
    }

    // Lanczos approximation, good to ~1e-13 here.
    fn gamma(x: f64) -> f64 {
        const G: [f64; 9] = [
            0.99999999999980993,
            676.5203681218851,
            -1259.1392167224028,
            771.32342877765313,
            -176.61502916214059,
            12.507343278686905,
            -0.13857109526572012,
            9.9843695780195716e-6,
            1.5056327351493116e-7,
        ];
        if x < 0.5 {
            std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
        } else {
            let x = x - 1.0;
            let mut a = G[0];
            let t = x + 7.5;
            for (i, g) in G.iter().enumerate().skip(1) {
                a += g / (x + i as f64);
            }
            (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
        }
    }

    #[test]
    fn left_apply_matches_analytic_monomials() {
        let g = UniformGrid::new(0.0, 1.0, 1024).unwrap();
        let a = order(1, 2);
        // f(t) = t at t = 1: Gamma(2)/Gamma(1.5) = 1.12838...
        let f = SampledFunction::from_fn(g, |t| t);
        let d = left_rl_apply(&f, &a).unwrap();
        let expect = rl_monomial(1.0, 0.5, 1.0);
        assert!((expect - 1.1283791670955126).abs() < 1e-12);
        assert!((d.values[g.m] - expect).abs() < 0.02);
        // f(t) = t^2 at t = 1: 2/Gamma(2.5) = 1.50451...
        let f2 = SampledFunction::from_fn(g, |t| t * t);
        let d2 = left_rl_apply(&f2, &a).unwrap();
        let expect2 = rl_monomial(2.0, 0.5, 1.0);
        assert!((expect2 - 1.5045055561273502).abs() < 1e-12);
        assert!((d2.values[g.m] - expect2).abs() < 0.02);
        // f = 0 everywhere maps to 0 everywhere
        let z = SampledFunction::from_fn(g, |_| 0.0);
        assert!(left_rl_apply(&z, &a).unwrap().values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn right_apply_examples() {
        let g = UniformGrid::new(0.0, 1.0, 1024).unwrap();
        let a = order(1, 2);
        // f(t) = 1 - t at t = 0 mirrors the left derivative of t at t = 1
        let f = SampledFunction::from_fn(g, |t| 1.0 - t);
        let d = right_rl_apply(&f, &a).unwrap();
        assert!((d.values[0] - 1.1283791670955126).abs() < 0.02);
        // alpha = 1, f(t) = t: right operator is -d/dt, giving -1 at interior nodes
        let one = order(1, 1);
        let ft = SampledFunction::from_fn(g, |t| t);
        let dt = right_rl_apply(&ft, &one).unwrap();
        for k in 1..g.m {
            assert!((dt.values[k] + 1.0).abs() < 1e-10);
        }
        let z = SampledFunction::from_fn(g, |_| 0.0);
        assert!(right_rl_apply(&z, &a).unwrap().values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn classical_limit_is_backward_difference() {
        let g = UniformGrid::new(0.0, 2.0, 16).unwrap();
        let f = SampledFunction::from_fn(g, |t| t * t - 3.0 * t + 1.0);
        let d = left_rl_apply(&f, &order(1, 1)).unwrap();
        let h = g.h();
        for k in 1..=g.m {
            let bd = (f.values[k] - f.values[k - 1]) / h;
            assert_eq!(d.values[k], bd);
        }
    }

    #[test]
    fn linearity() {
        let g = UniformGrid::new(0.0, 1.0, 64).unwrap();
        let a = order(3, 4);
        let f1 = SampledFunction::from_fn(g, |t| (3.0 * t).sin());
        let f2 = SampledFunction::from_fn(g, |t| t * t + 1.0);
        let combo = SampledFunction::new(
            g,
            f1.values
                .iter()
                .zip(&f2.values)
                .map(|(a, b)| 2.0 * a - 0.5 * b)
                .collect(),
        )
        .unwrap();
        let lhs = left_rl_apply(&combo, &a).unwrap();
        let d1 = left_rl_apply(&f1, &a).unwrap();
        let d2 = left_rl_apply(&f2, &a).unwrap();
        for k in 0..=g.m {
            let rhs = 2.0 * d1.values[k] - 0.5 * d2.values[k];
            let scale = rhs.abs().max(1.0);
            assert!((lhs.values[k] - rhs).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn convergence_first_order() {
        // max interior error for t^2 halves (within [1.6, 2.4]) as m doubles
        let a = order(1, 2);
        let mut errs = Vec::new();
        for m in [128usize, 256, 512] {
            let g = UniformGrid::new(0.0, 1.0, m).unwrap();
            let f = SampledFunction::from_fn(g, |t| t * t);
            let d = left_rl_apply(&f, &a).unwrap();
            let mut emax: f64 = 0.0;
            for k in 1..=m {
                let t = g.node(k);
                emax = emax.max((d.values[k] - rl_monomial(2.0, 0.5, t)).abs());
            }
            errs.push(emax);
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.6..=2.4).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn operator_matrix_agrees_with_apply() {
        let g = UniformGrid::new(0.0, 1.0, 24).unwrap();
        let a = order(2, 5);
        let f = SampledFunction::from_fn(g, |t| (t + 0.3).cos());
        for side in [OpSide::Left, OpSide::Right] {
            let mat = operator_matrix(&a, &g, side).unwrap();
            let applied = match side {
                OpSide::Left => left_rl_apply(&f, &a).unwrap(),
                OpSide::Right => right_rl_apply(&f, &a).unwrap(),
            };
            let mv = mat.matvec(&f.values);
            for k in 0..=g.m {
                let scale = applied.values[k].abs().max(1.0);
                assert!(
                    (mv[k] - applied.values[k]).abs() <= 1e-14 * scale,
                    "side {side:?} node {k}: {} vs {}",
                    mv[k],
                    applied.values[k]
                );
            }
        }
    }

    #[test]
    fn operator_matrix_classical_rows() {
        let g = UniformGrid::new(0.0, 1.0, 2).unwrap();
        let mat = operator_matrix(&order(1, 1), &g, OpSide::Left).unwrap();
        let h = g.h();
        // rows k >= 1 realize (f_k - f_{k-1})/h
        assert_eq!(mat.get(1, 1), 1.0 / h);
        assert_eq!(mat.get(1, 0), -1.0 / h);
        assert_eq!(mat.get(2, 2), 1.0 / h);
        assert_eq!(mat.get(2, 1), -1.0 / h);
        assert_eq!(mat.get(2, 0), 0.0);
    }

    #[test]
    fn reflection_identity() {
        // M_right = P M_left P with P the index reversal
        for (n, d, m) in [(1i64, 3i64, 17usize), (7, 10, 9)] {
            let g = UniformGrid::new(0.0, 1.0, m).unwrap();
            let a = order(n, d);
            let left = operator_matrix(&a, &g, OpSide::Left).unwrap();
            let right = operator_matrix(&a, &g, OpSide::Right).unwrap();
            for i in 0..=m {
                for j in 0..=m {
                    assert_eq!(right.get(i, j), left.get(m - i, m - j));
                }
            }
        }
    }
}
