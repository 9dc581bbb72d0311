use nalgebra::{DMatrix, DVector};
use nsoc::nlp::{bfgs_update, minimize, Evaluation, NlpOptions, NlpSpec, NlpStatus};
use proptest::prelude::*;

fn unbounded(n: usize) -> (Vec<f64>, Vec<f64>) {
    (vec![-1e20; n], vec![1e20; n])
}

#[test]
fn shifted_parabola_minimum() {
    let (lo, hi) = unbounded(1);
    let mut spec = NlpSpec::new(
        |p: &[f64]| Ok(Evaluation::unconstrained((p[0] - 3.0).powi(2), vec![2.0 * (p[0] - 3.0)])),
        lo,
        hi,
    );
    let res = minimize(&mut spec, &[0.0]).unwrap();
    assert_eq!(res.status, NlpStatus::Converged);
    assert!((res.p_star[0] - 3.0).abs() < 1e-8, "{:?}", res.p_star);
}

#[test]
fn rosenbrock_from_standard_start() {
    let (lo, hi) = unbounded(2);
    let rosen = |p: &[f64]| {
        let (a, b) = (p[0], p[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a),
        ];
        Ok(Evaluation::unconstrained(f, g))
    };
    let mut spec = NlpSpec::new(rosen, lo, hi).with_options(NlpOptions {
        grad_tol: 1e-9,
        ..NlpOptions::default()
    });
    let res = minimize(&mut spec, &[-1.2, 1.0]).unwrap();
    assert_eq!(res.status, NlpStatus::Converged);
    assert!((res.p_star[0] - 1.0).abs() < 1e-6, "{:?}", res.p_star);
    assert!((res.p_star[1] - 1.0).abs() < 1e-6, "{:?}", res.p_star);
}

#[test]
fn active_lower_bound_is_hit_exactly() {
    let mut spec = NlpSpec::new(
        |p: &[f64]| Ok(Evaluation::unconstrained(p[0] * p[0], vec![2.0 * p[0]])),
        vec![1.0],
        vec![2.0],
    );
    let res = minimize(&mut spec, &[2.0]).unwrap();
    assert_eq!(res.status, NlpStatus::Converged);
    assert_eq!(res.p_star, vec![1.0]);
}

#[test]
fn equality_constraint_enforced() {
    // min p1^2 + p2^2  s.t.  p1 + p2 = 1  ->  (1/2, 1/2)
    let (lo, hi) = unbounded(2);
    let f = |p: &[f64]| {
        Ok(Evaluation {
            phi: p[0] * p[0] + p[1] * p[1],
            grad: vec![2.0 * p[0], 2.0 * p[1]],
            constraints: vec![p[0] + p[1]],
            jacobian: vec![vec![1.0, 1.0]],
        })
    };
    let mut spec = NlpSpec::new(f, lo, hi).with_targets(vec![1.0]);
    let res = minimize(&mut spec, &[0.0, 0.0]).unwrap();
    assert_eq!(res.status, NlpStatus::Converged);
    assert!(res.constraint_violation_final <= 1e-6);
    assert!((res.p_star[0] - 0.5).abs() < 1e-5);
    assert!((res.p_star[1] - 0.5).abs() < 1e-5);
}

#[test]
fn callback_failure_reports_parameters() {
    let (lo, hi) = unbounded(1);
    let f = |p: &[f64]| {
        if p[0] > 0.5 {
            Err(nsoc::Error::Model("blew up".into()))
        } else {
            Ok(Evaluation::unconstrained(-p[0], vec![-1.0]))
        }
    };
    let mut spec = NlpSpec::new(f, lo, hi);
    let res = minimize(&mut spec, &[0.0]).unwrap();
    assert_eq!(res.status, NlpStatus::EvaluationError);
    let (p, msg) = res.failure.unwrap();
    assert_eq!(p, vec![1.0]);
    assert!(msg.contains("blew up"));
}

#[test]
fn inverse_hessian_recovered_on_quadratic() {
    // exact line searches on 1/2 p'Ap generate conjugate steps, after which
    // the inverse update reproduces A^-1
    let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
    let a_inv = a.clone().try_inverse().unwrap();
    let mut h = DMatrix::identity(3, 3);
    let mut p = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    for _ in 0..3 {
        let g = &a * &p;
        let d = -(&h * &g);
        let alpha = -g.dot(&d) / d.dot(&(&a * &d));
        let s = &d * alpha;
        let y = &a * &s;
        assert!(bfgs_update(&mut h, &s, &y));
        p += s;
    }
    assert!((h - a_inv).amax() < 1e-6);
}

#[test]
fn convex_kinks_minimized() {
    // |p1 - 1| + |p2 + 2|: the minimizer sits on both kinks, where single
    // gradient elements give no descent direction
    let (lo, hi) = unbounded(2);
    let sgn = |v: f64| if v >= 0.0 { 1.0 } else { -1.0 };
    let f = move |p: &[f64]| {
        Ok(Evaluation::unconstrained(
            (p[0] - 1.0).abs() + (p[1] + 2.0).abs(),
            vec![sgn(p[0] - 1.0), sgn(p[1] + 2.0)],
        ))
    };
    let mut spec = NlpSpec::new(f, lo, hi);
    let res = minimize(&mut spec, &[-3.0, 5.0]).unwrap();
    assert!(res.phi_star < 1e-6, "{res:?}");
}

#[test]
fn kink_crossing_exercises_skip_rule() {
    // 1 - p on the left of 1, -2 (p - 1) on the right, over [-3, 4]: the step
    // from -3 crosses the concave kink, so s'y < 0 and the update must be
    // skipped; the minimum is the upper bound with phi = -6
    let f = |p: &[f64]| {
        let (phi, g) = if p[0] < 1.0 {
            (1.0 - p[0], -1.0)
        } else {
            (-2.0 * (p[0] - 1.0), -2.0)
        };
        Ok(Evaluation::unconstrained(phi, vec![g]))
    };
    let mut spec = NlpSpec::new(f, vec![-3.0], vec![4.0]);
    let res = minimize(&mut spec, &[-3.0]).unwrap();
    assert!(res.skipped_updates >= 1, "{res:?}");
    assert_eq!(res.p_star, vec![4.0]);
    assert_eq!(res.phi_star, -6.0);
    assert_eq!(res.status, NlpStatus::Converged);
}

fn spd(seed: &[f64], n: usize) -> DMatrix<f64> {
    let b = DMatrix::from_iterator(n, n, seed.iter().copied());
    &b * b.transpose() + DMatrix::identity(n, n) * 0.5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quadratic_converges_within_dimension_plus_five(
        seed in prop::collection::vec(-1.0f64..1.0, 16),
        c in prop::collection::vec(-2.0f64..2.0, 4),
    ) {
        let n = 4;
        let a = spd(&seed, n);
        let cv = DVector::from_vec(c);
        let (lo, hi) = unbounded(n);
        let a2 = a.clone();
        let f = move |p: &[f64]| {
            let pv = DVector::from_column_slice(p);
            let g = &a2 * &pv - &cv;
            Ok(Evaluation::unconstrained(0.5 * pv.dot(&(&a2 * &pv)) - cv.dot(&pv), g.as_slice().to_vec()))
        };
        let mut spec = NlpSpec::new(f, lo, hi).with_options(NlpOptions { grad_tol: 1e-8, ..NlpOptions::default() });
        let res = minimize(&mut spec, &[0.0; 4]).unwrap();
        prop_assert_eq!(res.status, NlpStatus::Converged);
        prop_assert!(res.iterations <= n + 5, "took {} iterations", res.iterations);
    }

    #[test]
    fn iterates_feasible_and_merit_decreasing(
        seed in prop::collection::vec(-1.0f64..1.0, 9),
        c in prop::collection::vec(-5.0f64..5.0, 3),
        lo in prop::collection::vec(-1.0f64..0.0, 3),
        width in prop::collection::vec(0.1f64..2.0, 3),
    ) {
        let a = spd(&seed, 3);
        let cv = DVector::from_vec(c);
        let hi: Vec<f64> = lo.iter().zip(&width).map(|(l, w)| l + w).collect();
        let seen = std::cell::RefCell::new(Vec::new());
        let f = |p: &[f64]| {
            seen.borrow_mut().push(p.to_vec());
            let pv = DVector::from_column_slice(p);
            let g = &a * &pv - &cv;
            Ok(Evaluation::unconstrained(0.5 * pv.dot(&(&a * &pv)) - cv.dot(&pv), g.as_slice().to_vec()))
        };
        let p0: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
        let mut spec = NlpSpec::new(f, lo.clone(), hi.clone());
        let res = minimize(&mut spec, &p0).unwrap();
        for p in seen.borrow().iter() {
            for i in 0..3 {
                prop_assert!(lo[i] <= p[i] && p[i] <= hi[i]);
            }
        }
        prop_assert_eq!(res.history.len(), res.iterations);
        for w in res.history.windows(2) {
            if w[0].outer == w[1].outer {
                prop_assert!(w[1].merit < w[0].merit);
            }
        }
    }
}
