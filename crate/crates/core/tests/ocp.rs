use nsoc::dae::{IntegratorConfig, SemiExplicitDae};
use nsoc::ocp::{ControlGrid, OcpProblem, Sense, TerminalConstraint};
use nsoc::{Error, Result, Scalar};
use proptest::prelude::*;

/// `x' = -x + u`, `0 = y - x`, running cost `y^2 + u^2`.
#[derive(Debug, Clone)]
struct Lq;

impl SemiExplicitDae for Lq {
    fn n_x(&self) -> usize {
        2
    }
    fn n_y(&self) -> usize {
        1
    }
    fn n_u(&self) -> usize {
        1
    }
    fn rhs<T: Scalar>(&self, _t: f64, u: &[T], x: &[T], y: &[T]) -> Result<Vec<T>> {
        Ok(vec![
            -x[0].clone() + u[0].clone(),
            y[0].clone() * y[0].clone() + u[0].clone() * u[0].clone(),
        ])
    }
    fn alg<T: Scalar>(&self, _t: f64, x: &[T], y: &[T]) -> Result<Vec<T>> {
        Ok(vec![y[0].clone() - x[0].clone()])
    }
}

/// `x' = -x + u`, `0 = y - x`, running cost `|y - 1/2|`.
#[derive(Debug, Clone)]
struct KinkedLq;

impl SemiExplicitDae for KinkedLq {
    fn n_x(&self) -> usize {
        2
    }
    fn n_y(&self) -> usize {
        1
    }
    fn n_u(&self) -> usize {
        1
    }
    fn rhs<T: Scalar>(&self, _t: f64, u: &[T], x: &[T], y: &[T]) -> Result<Vec<T>> {
        Ok(vec![-x[0].clone() + u[0].clone(), (y[0].clone() - 0.5).abs()])
    }
    fn alg<T: Scalar>(&self, _t: f64, x: &[T], y: &[T]) -> Result<Vec<T>> {
        Ok(vec![y[0].clone() - x[0].clone()])
    }
}

fn lq_running(u: f64, y: f64) -> f64 {
    y * y + u * u
}

/// Block move with the work integrand `(u x2)^2`, which is smooth.
#[derive(Debug, Clone)]
struct SquareBlock;

impl SemiExplicitDae for SquareBlock {
    fn n_x(&self) -> usize {
        3
    }
    fn n_y(&self) -> usize {
        0
    }
    fn n_u(&self) -> usize {
        1
    }
    fn rhs<T: Scalar>(&self, _t: f64, u: &[T], x: &[T], _y: &[T]) -> Result<Vec<T>> {
        let w = u[0].clone() * x[1].clone();
        Ok(vec![x[1].clone(), u[0].clone(), w.clone() * w])
    }
    fn alg<T: Scalar>(&self, _t: f64, _x: &[T], _y: &[T]) -> Result<Vec<T>> {
        Ok(Vec::new())
    }
}

fn problem<D: SemiExplicitDae>(dae: D, x0: Vec<f64>, y_guess: Vec<f64>, tf: f64, n_s: usize) -> OcpProblem<D> {
    OcpProblem {
        dae,
        x0,
        y_guess,
        t0: 0.0,
        tf,
        n_s,
        lower: vec![-10.0],
        upper: vec![10.0],
        terminal_constraints: vec![],
        sense: Sense::Minimize,
        integrator: IntegratorConfig {
            steps_per_interval: 20,
            ..IntegratorConfig::default()
        },
    }
}

fn lq(n_s: usize) -> OcpProblem<Lq> {
    problem(Lq, vec![1.0, 0.0], vec![1.0], 2.0, n_s)
}

#[test]
fn control_at_follows_half_open_intervals() {
    let g = ControlGrid::new(0.0, 1.0, 2, 1, vec![5.0, 7.0]).unwrap();
    assert_eq!(g.control_at(0.5).unwrap(), &[5.0]);
    assert_eq!(g.control_at(0.50001).unwrap(), &[7.0]);
    assert_eq!(g.control_at(0.0).unwrap(), &[5.0]);
    assert!(matches!(g.control_at(1.5), Err(Error::Range { .. })));
}

#[test]
fn mayer_state_equals_trapezoidal_quadrature() {
    let prob = lq(5);
    let p = [0.3, -1.0, 2.0, 0.0, -0.5];
    let r = prob.evaluate_value(&p).unwrap();
    let tr = &r.trajectory;
    // the control of a step is stored with the sample that ends it
    let mut quad = 0.0;
    for k in 1..tr.t.len() {
        let u = tr.u[k][0];
        let h = tr.t[k] - tr.t[k - 1];
        quad += 0.5 * h * (lq_running(u, tr.y[k - 1][0]) + lq_running(u, tr.y[k][0]));
    }
    assert!((r.phi - quad).abs() <= 1e-8 * quad.abs(), "{} vs {quad}", r.phi);
}

#[test]
fn smooth_lq_recovers_classical_gradient() {
    let prob = lq(4);
    let rep = prob.classical_recovery_check(&[0.5, -0.2, 1.0, 0.1], 1e-6).unwrap();
    assert!(rep.max_rel_err < 1e-5, "{rep:?}");
}

#[test]
fn squared_block_move_recovers_classical_gradient() {
    let prob = problem(SquareBlock, vec![0.0; 3], vec![], 1.0, 4);
    let rep = prob.classical_recovery_check(&[3.0, 1.0, -2.0, -2.5], 1e-6).unwrap();
    assert!(rep.max_rel_err < 1e-5, "{rep:?}");
}

#[test]
fn zero_horizon_is_degenerate() {
    let mut prob = lq(3);
    prob.tf = 0.0;
    let r = prob.evaluate(&[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(r.phi, 0.0);
    assert!(r.mu.iter().all(|m| *m == 0.0));
}

#[test]
fn mu_is_the_accumulator_row() {
    let mut prob = lq(3);
    prob.terminal_constraints = vec![TerminalConstraint { index: 1, target: 0.0 }];
    let r = prob.evaluate(&[1.0, -1.0, 0.5]).unwrap();
    assert_eq!(r.terminal_values, vec![r.phi]);
    assert_eq!(r.terminal_jacobian[0], r.mu);
}

#[test]
fn out_of_bound_parameters_are_rejected_with_context() {
    let prob = lq(2);
    let e = prob.evaluate(&[0.0, 10.5]).unwrap_err();
    match e {
        Error::AtParameters { p, source } => {
            assert_eq!(p, vec![0.0, 10.5]);
            assert!(matches!(*source, Error::Range { .. }));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn maximization_negates_only_inside_the_optimizer() {
    let mut prob = lq(2);
    prob.sense = Sense::Maximize;
    let r = prob.evaluate(&[0.0, 0.0]).unwrap();
    assert!(r.phi > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn evaluation_is_deterministic(p in proptest::collection::vec(-10.0f64..10.0, 3)) {
        let prob = lq(3);
        let a = prob.evaluate(&p).unwrap();
        let b = prob.evaluate(&p).unwrap();
        prop_assert_eq!(a.phi.to_bits(), b.phi.to_bits());
        prop_assert_eq!(a.mu, b.mu);
        prop_assert_eq!(a.branch_log, b.branch_log);
    }

    #[test]
    fn smooth_points_match_central_differences(p in proptest::collection::vec(-1.0f64..3.0, 4)) {
        let prob = problem(KinkedLq, vec![1.0, 0.0], vec![1.0], 2.0, 4);
        let r = prob.evaluate(&p).unwrap();
        prop_assume!(r.switch_count() == 0);
        let fd = prob.fd_gradient(&p, 1e-6).unwrap();
        for (a, b) in r.mu.iter().zip(&fd) {
            prop_assert!((a - b).abs() <= 1e-4 * b.abs().max(1.0), "{:?} vs {:?}", r.mu, fd);
        }
    }

    #[test]
    fn later_intervals_do_not_move_earlier_states(
        p in proptest::collection::vec(-5.0f64..5.0, 4),
        bump in -1.0f64..1.0,
        i in 1usize..4,
    ) {
        let prob = lq(4);
        let a = prob.evaluate_value(&p).unwrap().trajectory;
        let mut q = p.clone();
        q[i] = (q[i] + bump).clamp(-10.0, 10.0);
        let b = prob.evaluate_value(&q).unwrap().trajectory;
        let tau = prob.grid(&p).unwrap().breakpoint(i);
        for k in 0..a.t.len() {
            if a.t[k] <= tau {
                prop_assert_eq!(&a.x[k], &b.x[k]);
            }
        }
    }
}
