//! Bound-constrained quasi-Newton minimization driven by generalized-gradient
//! elements.
//!
//! The inner loop is a projected, damped inverse-BFGS method with Armijo
//! backtracking; equality constraints `c(p) = targets` are handled by an
//! augmented-Lagrangian outer loop on the merit
//!
//! ```text
//!   m(p) = phi(p) + lambda' c(p) + rho/2 |c(p)|^2.
//! ```
//!
//! Bounds are enforced by projection, so every iterate is feasible with
//! respect to them exactly. Nothing assumes `phi` is smooth: curvature pairs
//! that straddle a kink are filtered by the BFGS skip rule.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Armijo sufficient-decrease constant.
pub const ARMIJO_C1: f64 = 1e-4;
/// Backtracking stops after `gamma = 2^-MAX_HALVINGS`.
pub const MAX_HALVINGS: i32 = 20;
/// Curvature threshold of the BFGS skip rule, relative to `|s| |y|`.
pub const CURVATURE_FLOOR: f64 = 1e-10;
/// Default merit stagnation threshold: relative change below this over
/// [`STAGNATION_WINDOW`] consecutive iterations stops the inner loop.
pub const STAGNATION_RTOL: f64 = 1e-12;
pub const STAGNATION_WINDOW: usize = 5;
/// Inner tolerances of the first constrained outer pass; each later pass
/// tightens them tenfold down to the configured
/// floors. Unconstrained problems start at the floors.
pub const INNER_GRAD_TOL0: f64 = 1e-1;
pub const INNER_STAGNATION_RTOL0: f64 = 1e-3;
/// Step doublings tried when the merit keeps decreasing along a direction
/// without positive curvature.
pub const MAX_EXPANSIONS: usize = 30;

/// Objective value, a generalized-gradient element, and equality-constraint
/// values with their Jacobian rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub phi: f64,
    pub grad: Vec<f64>,
    pub constraints: Vec<f64>,
    pub jacobian: Vec<Vec<f64>>,
}

impl Evaluation {
    pub fn unconstrained(phi: f64, grad: Vec<f64>) -> Self {
        Self {
            phi,
            grad,
            constraints: Vec::new(),
            jacobian: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlpOptions {
    pub grad_tol: f64,
    pub step_tol: f64,
    pub constraint_tol: f64,
    /// Total accepted iterations across all outer updates.
    pub max_iter: usize,
    /// Augmented-Lagrangian multiplier updates.
    pub max_outer: usize,
    /// Initial penalty.
    pub rho0: f64,
    /// Relative merit change counted as stagnation.
    pub stagnation_rtol: f64,
}

impl Default for NlpOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            step_tol: 1e-10,
            constraint_tol: 1e-6,
            max_iter: 500,
            max_outer: 30,
            rho0: 10.0,
            stagnation_rtol: STAGNATION_RTOL,
        }
    }
}

/// Problem definition for [`minimize`].
pub struct NlpSpec<F> {
    pub n_p: usize,
    pub callback: F,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Right-hand sides of the equality constraints; their count must match
    /// the constraint values returned by the callback.
    pub targets: Vec<f64>,
    pub options: NlpOptions,
}

impl<F> NlpSpec<F>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    pub fn new(callback: F, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self {
            n_p: lower.len(),
            callback,
            lower,
            upper,
            targets: Vec::new(),
            options: NlpOptions::default(),
        }
    }

    pub fn with_targets(mut self, targets: Vec<f64>) -> Self {
        self.targets = targets;
        self
    }

    pub fn with_options(mut self, options: NlpOptions) -> Self {
        self.options = options;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.n_p || self.upper.len() != self.n_p {
            return Err(Error::Dimension {
                what: "bounds",
                expected: self.n_p,
                got: self.lower.len().min(self.upper.len()),
            });
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Config("lower bound exceeds upper bound".into()));
        }
        let o = &self.options;
        if !(o.grad_tol > 0.0 && o.step_tol > 0.0 && o.constraint_tol > 0.0 && o.rho0 > 0.0 && o.stagnation_rtol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NlpStatus {
    Converged,
    MaxIter,
    LineSearchFailure,
    EvaluationError,
}

/// Which test ended a converged run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Gradient,
    Step,
    Stagnation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateRecord {
    pub iter: usize,
    /// Augmented-Lagrangian update the iterate belongs to; the merit is only
    /// comparable within one outer index.
    pub outer: usize,
    pub phi: f64,
    pub merit: f64,
    pub step: f64,
    pub grad_norm: f64,
    pub constraint_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlpResult {
    pub p_star: Vec<f64>,
    pub phi_star: f64,
    /// Generalized gradient of `phi` at `p_star`.
    pub grad_star: Vec<f64>,
    /// Projected-gradient norm of the merit at `p_star`.
    pub grad_norm_final: f64,
    pub constraint_violation_final: f64,
    pub iterations: usize,
    pub status: NlpStatus,
    pub stop_reason: Option<StopReason>,
    pub history: Vec<IterateRecord>,
    /// Parameters at which the callback failed, with the message.
    pub failure: Option<(Vec<f64>, String)>,
    /// BFGS updates skipped by the curvature rule.
    pub skipped_updates: usize,
}

impl NlpResult {
    /// Iteration log with header `iter,phi,merit,step,grad_norm,constraint_violation`.
    pub fn write_history_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,phi,merit,step,grad_norm,constraint_violation")?;
        for r in &self.history {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.iter, r.phi, r.merit, r.step, r.grad_norm, r.constraint_violation
            )?;
        }
        Ok(())
    }
}

/// Box bounds used for projection.
#[derive(Debug, Clone, Copy)]
pub struct Bounds<'a> {
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

impl Bounds<'_> {
    pub fn project(&self, p: &mut [f64]) {
        for ((v, l), u) in p.iter_mut().zip(self.lower).zip(self.upper) {
            *v = v.clamp(*l, *u);
        }
    }
}

/// Inverse-BFGS update of `h` with step `s` and gradient change `y`, skipped
/// when `s'y <= 1e-10 |s| |y|`. Returns whether the update was applied.
pub fn bfgs_update(h: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) -> bool {
    let sy = s.dot(y);
    if !(sy > CURVATURE_FLOOR * s.norm() * y.norm()) {
        return false;
    }
    let rho = 1.0 / sy;
    let n = s.len();
    let hy = &*h * y;
    let yhy = y.dot(&hy);
    // (I - rho s y') H (I - rho y s') + rho s s', expanded
    let update = (&hy * s.transpose() + s * hy.transpose()) * (-rho)
        + s * s.transpose() * (rho * rho * yhy + rho);
    *h += update;
    debug_assert_eq!(h.nrows(), n);
    true
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LineSearchError {
    #[error("direction is not a descent direction (slope {slope:e})")]
    Ascent { slope: f64 },
    #[error("no Armijo step down to 2^-{MAX_HALVINGS}")]
    Exhausted { last_gamma: f64, last_merit: f64 },
    #[error(transparent)]
    Evaluation(#[from] Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchOutcome {
    pub gamma: f64,
    pub p: Vec<f64>,
    pub merit: f64,
}

/// Largest `gamma` in `{1, 1/2, ..., 2^-20}` with
/// `m(P(p + gamma d)) <= m(p) + c1 grad'(P(p + gamma d) - p)`, where `P`
/// projects onto `bounds` if given.
pub fn line_search<M>(
    mut merit: M,
    p: &[f64],
    m0: f64,
    grad: &[f64],
    direction: &[f64],
    bounds: Option<Bounds<'_>>,
) -> Result<LineSearchOutcome, LineSearchError>
where
    M: FnMut(&[f64]) -> Result<f64>,
{
    let slope: f64 = grad.iter().zip(direction).map(|(g, d)| g * d).sum();
    if !(slope < 0.0) {
        return Err(LineSearchError::Ascent { slope });
    }
    let mut gamma = 1.0;
    let mut last_merit = f64::NAN;
    for _ in 0..=MAX_HALVINGS {
        let mut trial: Vec<f64> = p.iter().zip(direction).map(|(a, d)| a + gamma * d).collect();
        if let Some(b) = bounds {
            b.project(&mut trial);
        }
        let decrease: f64 = grad
            .iter()
            .zip(trial.iter().zip(p))
            .map(|(g, (a, b))| g * (a - b))
            .sum();
        let m = merit(&trial)?;
        last_merit = m;
        if m.is_finite() && m < m0 && m <= m0 + ARMIJO_C1 * decrease {
            return Ok(LineSearchOutcome {
                gamma,
                p: trial,
                merit: m,
            });
        }
        gamma *= 0.5;
    }
    Err(LineSearchError::Exhausted {
        last_gamma: gamma * 2.0,
        last_merit,
    })
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Merit value and gradient at one point.
#[derive(Debug, Clone)]
struct Point {
    p: Vec<f64>,
    eval: Evaluation,
    c: Vec<f64>,
    merit: f64,
    grad: Vec<f64>,
}

struct Merit<'a> {
    targets: &'a [f64],
    lambda: Vec<f64>,
    rho: f64,
}

impl Merit<'_> {
    fn point(&self, p: Vec<f64>, eval: Evaluation) -> Result<Point> {
        let n = p.len();
        if eval.grad.len() != n {
            return Err(Error::Dimension {
                what: "gradient",
                expected: n,
                got: eval.grad.len(),
            });
        }
        if eval.constraints.len() != self.targets.len() || eval.jacobian.len() != self.targets.len()
        {
            return Err(Error::Dimension {
                what: "constraints",
                expected: self.targets.len(),
                got: eval.constraints.len(),
            });
        }
        if !eval.phi.is_finite() || eval.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Model("non-finite objective or gradient".into()));
        }
        let c: Vec<f64> = eval
            .constraints
            .iter()
            .zip(self.targets)
            .map(|(v, t)| v - t)
            .collect();
        let mut merit = eval.phi;
        let mut grad = eval.grad.clone();
        for (j, cj) in c.iter().enumerate() {
            let w = self.lambda[j] + self.rho * cj;
            merit += self.lambda[j] * cj + 0.5 * self.rho * cj * cj;
            if eval.jacobian[j].len() != n {
                return Err(Error::Dimension {
                    what: "constraint jacobian",
                    expected: n,
                    got: eval.jacobian[j].len(),
                });
            }
            for (g, a) in grad.iter_mut().zip(&eval.jacobian[j]) {
                *g += w * a;
            }
        }
        Ok(Point {
            p,
            eval,
            c,
            merit,
            grad,
        })
    }
}

/// Least-norm point of the segment between `a` and `b`.
fn least_norm_combination(a: &[f64], b: &[f64]) -> DVector<f64> {
    let a = DVector::from_column_slice(a);
    let b = DVector::from_column_slice(b);
    let diff = &b - &a;
    let dd = diff.dot(&diff);
    let t = if dd > 0.0 { (-a.dot(&diff) / dd).clamp(0.0, 1.0) } else { 0.0 };
    a + diff * t
}

fn projected_grad_norm(p: &[f64], g: &[f64], b: Bounds<'_>) -> f64 {
    p.iter()
        .zip(g)
        .zip(b.lower.iter().zip(b.upper))
        .map(|((pi, gi), (l, u))| ((pi - gi).clamp(*l, *u) - pi).abs())
        .fold(0.0, f64::max)
}

/// Minimize the problem from `p0` (which must lie within the bounds).
pub fn minimize<F>(spec: &mut NlpSpec<F>, p0: &[f64]) -> Result<NlpResult>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    spec.validate()?;
    if p0.len() != spec.n_p {
        return Err(Error::Dimension {
            what: "initial point",
            expected: spec.n_p,
            got: p0.len(),
        });
    }
    for (i, v) in p0.iter().enumerate() {
        if !(spec.lower[i] <= *v && *v <= spec.upper[i]) {
            return Err(Error::Range {
                what: "initial point component",
                value: *v,
                lo: spec.lower[i],
                hi: spec.upper[i],
            });
        }
    }
    let opts = spec.options.clone();
    let n = spec.n_p;
    let lower = spec.lower.clone();
    let upper = spec.upper.clone();
    let bounds = Bounds {
        lower: &lower,
        upper: &upper,
    };
    let targets = spec.targets.clone();
    let callback = &mut spec.callback;

    let mut history = Vec::new();
    let mut skipped = 0usize;

    let mut merit = Merit {
        targets: &targets,
        lambda: vec![0.0; targets.len()],
        rho: opts.rho0,
    };

    let fail = |p: &[f64], e: &Error, history: Vec<IterateRecord>, best: Option<&Point>, skipped| {
        let (p_star, phi_star, grad_star, viol) = match best {
            Some(b) => (b.p.clone(), b.eval.phi, b.eval.grad.clone(), inf_norm(&b.c)),
            None => (p.to_vec(), f64::NAN, vec![f64::NAN; p.len()], f64::NAN),
        };
        NlpResult {
            p_star,
            phi_star,
            grad_star,
            grad_norm_final: f64::NAN,
            constraint_violation_final: viol,
            iterations: history.len(),
            status: NlpStatus::EvaluationError,
            stop_reason: None,
            history,
            failure: Some((p.to_vec(), e.to_string())),
            skipped_updates: skipped,
        }
    };

    let e0 = match callback(p0) {
        Ok(e) => e,
        Err(e) => return Ok(fail(p0, &e, history, None, skipped)),
    };
    let mut cur = match merit.point(p0.to_vec(), e0) {
        Ok(pt) => pt,
        Err(e) => return Ok(fail(p0, &e, history, None, skipped)),
    };

    let mut h = DMatrix::<f64>::identity(n, n);
    let mut first_update = true;
    let mut iterations = 0usize;
    let mut status = NlpStatus::MaxIter;
    let mut stop_reason = None;
    let mut prev_violation = inf_norm(&cur.c);

    'outer: for outer in 0..opts.max_outer.max(1) {
        let mut recent: Vec<f64> = Vec::new();
        let inner_reason;
        let mut reset_once = false;
        let mut bundle: Option<DVector<f64>> = None;
        let mut bundle_tried = false;
        let mut inner_failed = false;
        let (grad_tol, stagnation_rtol) = if targets.is_empty() {
            (opts.grad_tol, opts.stagnation_rtol)
        } else {
            let k = outer.min(64) as i32;
            (
                (INNER_GRAD_TOL0 * 10f64.powi(-k)).max(opts.grad_tol),
                (INNER_STAGNATION_RTOL0 * 10f64.powi(-k)).max(opts.stagnation_rtol),
            )
        };
        let tight = grad_tol == opts.grad_tol && stagnation_rtol == opts.stagnation_rtol;
        loop {
            let gnorm = projected_grad_norm(&cur.p, &cur.grad, bounds);
            if gnorm < grad_tol {
                inner_reason = Some(StopReason::Gradient);
                break;
            }
            if iterations >= opts.max_iter {
                status = NlpStatus::MaxIter;
                break 'outer;
            }
            // active set: at a bound with the gradient pushing outward
            let active: Vec<bool> = (0..n)
                .map(|i| {
                    (cur.p[i] <= lower[i] && cur.grad[i] > 0.0)
                        || (cur.p[i] >= upper[i] && cur.grad[i] < 0.0)
                })
                .collect();
            let g_free = DVector::from_iterator(
                n,
                (0..n).map(|i| if active[i] { 0.0 } else { cur.grad[i] }),
            );
            let mut d = match bundle.take() {
                Some(gm) => -gm,
                None => -(&h * &g_free),
            };
            for i in 0..n {
                if active[i] {
                    d[i] = 0.0;
                }
            }
            if !(d.dot(&g_free) < 0.0) {
                h.fill_with_identity();
                first_update = true;
                d = -g_free.clone();
            }

            // Rescale d to the minimizer of the quadratic through m(p), the
            // slope and m(p + d); on quadratics this makes the unit trial an
            // exact line search, restoring BFGS finite termination. Along
            // directions of negative curvature the step is expanded instead.
            let mut cache: Option<(Vec<f64>, Evaluation, f64)> = None;
            let mut last_trial: Vec<f64> = cur.p.clone();
            let mut eval_merit = |trial: &[f64],
                                  cache: &mut Option<(Vec<f64>, Evaluation, f64)>,
                                  last_trial: &mut Vec<f64>|
             -> Result<f64> {
                if let Some((q, _, m)) = cache.as_ref() {
                    if q.as_slice() == trial {
                        return Ok(*m);
                    }
                }
                *last_trial = trial.to_vec();
                let e = callback(trial)?;
                let pt = merit.point(trial.to_vec(), e.clone())?;
                *cache = Some((trial.to_vec(), e, pt.merit));
                Ok(pt.merit)
            };
            let unit: Vec<f64> = cur.p.iter().zip(d.iter()).map(|(a, b)| a + b).collect();
            let mut clipped = unit.clone();
            bounds.project(&mut clipped);
            let slope = cur.grad.iter().zip(d.iter()).map(|(g, v)| g * v).sum::<f64>();
            match eval_merit(&clipped, &mut cache, &mut last_trial) {
                Ok(m1) => {
                    let kappa = 2.0 * (m1 - cur.merit - slope);
                    if clipped == unit && kappa > 0.0 && slope < 0.0 {
                        let alpha = -slope / kappa;
                        if (alpha - 1.0).abs() > 1e-8 {
                            d *= alpha;
                        }
                    } else if m1 < cur.merit {
                        // no usable curvature: expand while the merit keeps falling
                        let mut best = (1.0, m1, clipped);
                        let mut scale = 1.0;
                        for _ in 0..MAX_EXPANSIONS {
                            scale *= 2.0;
                            let mut trial: Vec<f64> =
                                cur.p.iter().zip(d.iter()).map(|(a, b)| a + scale * b).collect();
                            bounds.project(&mut trial);
                            if trial == best.2 {
                                break;
                            }
                            match eval_merit(&trial, &mut cache, &mut last_trial) {
                                Ok(m) if m < best.1 => best = (scale, m, trial),
                                Ok(_) => break,
                                Err(e) if matches!(e.root(), Error::Model(_) | Error::Ld(_)) => break,
                                Err(e) => {
                                    return Ok(fail(&last_trial, &e, history, Some(&cur), skipped))
                                }
                            }
                        }
                        if best.0 != 1.0 {
                            d *= best.0;
                            // make the accepted trial the cached one
                            eval_merit(&best.2, &mut cache, &mut last_trial)?;
                        }
                    }
                }
                Err(e) if matches!(e.root(), Error::Model(_) | Error::Ld(_)) => {
                    // leave d alone; backtracking will retreat from it
                }
                Err(e) => {
                    return Ok(fail(&last_trial, &e, history, Some(&cur), skipped));
                }
            }
            let ls = line_search(
                |trial: &[f64]| eval_merit(trial, &mut cache, &mut last_trial),
                &cur.p,
                cur.merit,
                &cur.grad,
                d.as_slice(),
                Some(bounds),
            );
            let outcome = match ls {
                Ok(o) => o,
                Err(LineSearchError::Evaluation(e)) => {
                    return Ok(fail(&last_trial, &e, history, Some(&cur), skipped));
                }
                Err(LineSearchError::Ascent { .. }) => {
                    // the projected direction has no slope left: stationary
                    inner_reason = Some(StopReason::Step);
                    break;
                }
                Err(LineSearchError::Exhausted { last_gamma, .. }) => {
                    if last_gamma * inf_norm(d.as_slice()) < opts.step_tol {
                        inner_reason = Some(StopReason::Step);
                        break;
                    }
                    if !reset_once {
                        reset_once = true;
                        h.fill_with_identity();
                        first_update = true;
                        continue;
                    }
                    if !bundle_tried {
                        // the direction is flat or rising past a kink: combine
                        // the gradient at the nearest trial with the current one
                        // and step along the least-norm element of their hull
                        bundle_tried = true;
                        let near = cache
                            .as_ref()
                            .filter(|(q, _, _)| *q != cur.p)
                            .and_then(|(q, e, _)| merit.point(q.clone(), e.clone()).ok());
                        if let Some(near) = near {
                            let gm = least_norm_combination(&cur.grad, &near.grad);
                            if projected_grad_norm(&cur.p, gm.as_slice(), bounds) < grad_tol {
                                inner_reason = Some(StopReason::Gradient);
                                break;
                            }
                            bundle = Some(gm);
                            continue;
                        }
                    }
                    // no descent along the reset direction either (typically a
                    // kink of the merit); let the multiplier update reshape it
                    inner_failed = true;
                    inner_reason = None;
                    break;
                }
            };
            reset_once = false;
            bundle_tried = false;
            let eval = match cache {
                Some((q, e, _)) if q == outcome.p => e,
                _ => unreachable!("accepted step is the last evaluation"),
            };
            let next = merit.point(outcome.p, eval)?;
            let s = DVector::from_iterator(n, next.p.iter().zip(&cur.p).map(|(a, b)| a - b));
            let y = DVector::from_iterator(n, next.grad.iter().zip(&cur.grad).map(|(a, b)| a - b));
            if first_update {
                let (sy, yy) = (s.dot(&y), y.dot(&y));
                if sy > CURVATURE_FLOOR * s.norm() * y.norm() && yy > 0.0 {
                    h = DMatrix::identity(n, n) * (sy / yy);
                }
            }
            if bfgs_update(&mut h, &s, &y) {
                first_update = false;
            } else {
                skipped += 1;
            }
            let step = s.amax();
            let rel = (cur.merit - next.merit).abs() / cur.merit.abs().max(1.0);
            cur = next;
            iterations += 1;
            history.push(IterateRecord {
                iter: iterations,
                outer,
                phi: cur.eval.phi,
                merit: cur.merit,
                step,
                grad_norm: projected_grad_norm(&cur.p, &cur.grad, bounds),
                constraint_violation: inf_norm(&cur.c),
            });
            if step < opts.step_tol {
                inner_reason = Some(StopReason::Step);
                break;
            }
            recent.push(rel);
            if recent.len() >= STAGNATION_WINDOW
                && recent[recent.len() - STAGNATION_WINDOW..]
                    .iter()
                    .all(|r| *r < stagnation_rtol)
            {
                inner_reason = Some(StopReason::Stagnation);
                break;
            }
        }

        let violation = inf_norm(&cur.c);
        if violation < opts.constraint_tol && tight {
            status = if inner_failed {
                NlpStatus::LineSearchFailure
            } else {
                NlpStatus::Converged
            };
            stop_reason = inner_reason;
            break;
        }
        if outer + 1 == opts.max_outer.max(1) {
            status = if inner_failed {
                NlpStatus::LineSearchFailure
            } else {
                NlpStatus::MaxIter
            };
            break;
        }
        for (l, c) in merit.lambda.iter_mut().zip(&cur.c) {
            *l += merit.rho * c;
        }
        if violation >= opts.constraint_tol && violation > 0.5 * prev_violation {
            merit.rho *= 10.0;
            h.fill_with_identity();
            first_update = true;
        }
        prev_violation = violation;
        let eval = cur.eval.clone();
        cur = merit.point(cur.p.clone(), eval)?;
    }

    Ok(NlpResult {
        grad_norm_final: projected_grad_norm(&cur.p, &cur.grad, bounds),
        constraint_violation_final: inf_norm(&cur.c),
        p_star: cur.p,
        phi_star: cur.eval.phi,
        grad_star: cur.eval.grad,
        iterations,
        status,
        stop_reason,
        history,
        failure: None,
        skipped_updates: skipped,
    })
}
