//! Property-based checks of the symbolic and numeric kernels.

use proptest::prelude::*;

use fracmech::fracnum::{gl_weights, left_rl_apply, FracOrder, SampledFunction, UniformGrid};
use fracmech::ratlin::{in_span, RatMat};
use fracmech::symcore::{ratio, Atom, LinExpr, QuadForm, Rat};

fn small_rat() -> impl Strategy<Value = Rat> {
    (-6i64..=6, 1i64..=4).prop_map(|(n, d)| ratio(n, d))
}

fn pool_atom() -> impl Strategy<Value = Atom> {
    prop_oneof![
        (0usize..3).prop_map(|i| Atom::coord(&format!("x{}", i + 1))),
        (0usize..3).prop_map(|i| Atom::momentum(
            &format!("x{}", i + 1),
            0,
            fracmech::symcore::OpSide::Left
        )),
    ]
}

fn lin_expr() -> impl Strategy<Value = LinExpr> {
    (proptest::collection::vec((pool_atom(), small_rat()), 0..4), small_rat()).prop_map(
        |(terms, c)| {
            let mut e = LinExpr::constant(c);
            for (a, r) in terms {
                e.add_term(a, r);
            }
            e
        },
    )
}

proptest! {
    #[test]
    fn weights_satisfy_recursion(n in 1i64..=19, count in 2usize..40) {
        // alpha in (0, 2) in tenths
        let alpha = FracOrder::new(ratio(n, 10)).unwrap();
        let w = gl_weights(&alpha, count).unwrap();
        let a = alpha.value();
        prop_assert_eq!(w[0], 1.0);
        for j in 1..count {
            let expect = w[j - 1] * (1.0 - (a + 1.0) / j as f64);
            prop_assert!((w[j] - expect).abs() <= 1e-15 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn left_apply_is_linear(
        fv in proptest::collection::vec(-10.0f64..10.0, 9),
        gv in proptest::collection::vec(-10.0f64..10.0, 9),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let grid = UniformGrid::new(0.0, 1.0, 8).unwrap();
        let alpha = FracOrder::new(ratio(1, 2)).unwrap();
        let f = SampledFunction::new(grid, fv.clone()).unwrap();
        let g = SampledFunction::new(grid, gv.clone()).unwrap();
        let combo = SampledFunction::new(
            grid,
            fv.iter().zip(&gv).map(|(x, y)| a * x + b * y).collect(),
        )
        .unwrap();
        let lhs = left_rl_apply(&combo, &alpha).unwrap();
        let df = left_rl_apply(&f, &alpha).unwrap();
        let dg = left_rl_apply(&g, &alpha).unwrap();
        for k in 0..=8 {
            let want = a * df.values[k] + b * dg.values[k];
            prop_assert!((lhs.values[k] - want).abs() <= 1e-9);
        }
    }

    #[test]
    fn substitution_distributes_over_sum(e1 in lin_expr(), e2 in lin_expr(), v in lin_expr()) {
        let mut bind = std::collections::BTreeMap::new();
        bind.insert(Atom::coord("x1"), v);
        let lhs = e1.add(&e2).substitute(&bind);
        let rhs = e1.substitute(&bind).add(&e2.substitute(&bind));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn solve_for_inverts(e in lin_expr()) {
        let target = Atom::coord("x1");
        if let Some(value) = e.solve_for(&target) {
            let mut bind = std::collections::BTreeMap::new();
            bind.insert(target, value);
            prop_assert!(e.substitute(&bind).is_zero());
        }
    }

    #[test]
    fn quad_partial_is_additive(e1 in lin_expr(), e2 in lin_expr(), e3 in lin_expr()) {
        let q1 = QuadForm::mul_lin(&e1, &e3);
        let q2 = QuadForm::mul_lin(&e2, &e3);
        let sum = q1.add(&q2);
        let x = Atom::coord("x2");
        prop_assert_eq!(sum.partial(&x), q1.partial(&x).add(&q2.partial(&x)));
    }

    #[test]
    fn rref_fixed_point_and_rank_bounds(
        rows in proptest::collection::vec(
            proptest::collection::vec((-5i64..=5).prop_map(fracmech::symcore::rat), 4),
            1..5,
        ),
    ) {
        let m = RatMat::from_rows(rows.clone());
        let (r, pivots) = m.rref();
        let (rr, pivots2) = r.rref();
        prop_assert_eq!(&r, &rr);
        prop_assert_eq!(pivots, pivots2);
        prop_assert!(m.rank() <= m.rows.min(m.cols));
        // every original row lies in the row space of the reduction
        let reduced: Vec<Vec<Rat>> = (0..r.rows).map(|i| r.row(i).to_vec()).collect();
        for row in &rows {
            prop_assert!(in_span(&reduced, row));
        }
    }
}
