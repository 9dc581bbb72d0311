//! Benchmark problems and method comparisons: the block-move problem with an
//! absolute-work objective, and smoothing / naive finite-difference baselines
//! against LD gradients on the wind-turbine scenarios.
//!
//! Every reported objective is re-evaluated by one shared nonsmooth evaluator,
//! never taken from a method's internal surrogate.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::dae::{IntegratorConfig, SemiExplicitDae};
use crate::error::{Error, Result};
use crate::nlp::{NlpOptions, NlpStatus, StopReason};
use crate::ocp::{GradientMode, OcpProblem, OcpSolution, Sense, TerminalConstraint, NAIVE_FD_STEP};
use crate::scalar::Scalar;
use crate::wtps::{omega, omega_smoothed, trajectory_table, Objective, WtpsScenario};

/// How gradients reach the optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// LD sensitivities of the nonsmooth problem.
    Ld,
    /// LD (here: classical) sensitivities of a smoothed surrogate with the
    /// given parameter.
    Smoothed(f64),
    /// Central finite differences of the nonsmooth objective.
    NaiveFd,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ld => write!(f, "ld"),
            Self::Smoothed(a) => write!(f, "smoothed:{a}"),
            Self::NaiveFd => write!(f, "naive_fd"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    /// `ld`, `naive_fd`, or `smoothed:<positive parameter>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ld" => Ok(Self::Ld),
            "naive_fd" => Ok(Self::NaiveFd),
            _ => {
                let param = s
                    .strip_prefix("smoothed:")
                    .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))?;
                let v: f64 = param
                    .parse()
                    .map_err(|_| Error::Config(format!("bad smoothing parameter in {s:?}")))?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!(
                        "smoothing parameter must be positive, got {v}"
                    )));
                }
                Ok(Self::Smoothed(v))
            }
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Work integrand of the block-move problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WorkIntegrand {
    /// `|u x2|`
    Abs,
    /// `u x2 tanh(u x2 / alpha)`
    Tanh { alpha: f64 },
}

impl WorkIntegrand {
    pub fn eval<T: Scalar>(&self, w: &T) -> T {
        match self {
            Self::Abs => w.abs(),
            Self::Tanh { alpha } => w.clone() * (w.clone() / *alpha).tanh(),
        }
    }
}

/// Block pushed from rest at 0 to rest at 1 over `[0, 1]`:
/// `x1' = x2, x2' = u, x3' = work(u x2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockMove {
    pub integrand: WorkIntegrand,
}

impl SemiExplicitDae for BlockMove {
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
        let power = u[0].clone() * x[1].clone();
        Ok(vec![x[1].clone(), u[0].clone(), self.integrand.eval(&power)])
    }
    fn alg<T: Scalar>(&self, _t: f64, _x: &[T], _y: &[T]) -> Result<Vec<T>> {
        Ok(Vec::new())
    }
}

/// Force bound of the block-move problem.
pub const BLOCK_FORCE_BOUND: f64 = 10.0;
/// Trapezoidal steps per control interval for the block-move problem. With
/// piecewise-constant force the position, velocity and (away from velocity
/// sign changes) work are integrated exactly by one trapezoidal step.
pub const BLOCK_STEPS_PER_INTERVAL: usize = 1;

/// The block-move optimal control problem with `n_s` control intervals.
pub fn block_move_problem(integrand: WorkIntegrand, n_s: usize) -> OcpProblem<BlockMove> {
    OcpProblem {
        dae: BlockMove { integrand },
        x0: vec![0.0; 3],
        y_guess: Vec::new(),
        t0: 0.0,
        tf: 1.0,
        n_s,
        lower: vec![-BLOCK_FORCE_BOUND],
        upper: vec![BLOCK_FORCE_BOUND],
        terminal_constraints: vec![
            TerminalConstraint {
                index: 0,
                target: 1.0,
            },
            TerminalConstraint {
                index: 1,
                target: 0.0,
            },
        ],
        sense: Sense::Minimize,
        integrator: IntegratorConfig {
            steps_per_interval: BLOCK_STEPS_PER_INTERVAL,
            ..IntegratorConfig::default()
        },
    }
}

/// One trajectory sample kept in a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub u: f64,
    /// Problem-specific values; see [`ComparisonReport::sample_columns`].
    pub values: Vec<f64>,
}

/// Outcome of one method in a comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: Method,
    /// Solver status, or `None` when the run failed before the optimizer
    /// could report.
    pub status: Option<NlpStatus>,
    pub stop_reason: Option<StopReason>,
    pub error: Option<String>,
    pub iterations: usize,
    pub evaluations: usize,
    /// Objective at the returned controls under the nonsmooth functional.
    pub phi_nonsmooth: Option<f64>,
    /// Objective of the surrogate the method optimized.
    pub phi_surrogate: Option<f64>,
    pub grad_norm: Option<f64>,
    /// Largest terminal-constraint violation under the nonsmooth model.
    pub constraint_violation: Option<f64>,
    /// L2-in-time norm of (surrogate integrand - nonsmooth integrand) along
    /// this method's own trajectory; zero for unsmoothed methods.
    pub smoothing_error: Option<f64>,
    pub p_star: Vec<f64>,
    #[serde(skip)]
    pub samples: Vec<Sample>,
}

impl MethodReport {
    fn failed(method: Method, e: &Error) -> Self {
        Self {
            method,
            status: None,
            stop_reason: None,
            error: Some(e.to_string()),
            iterations: 0,
            evaluations: 0,
            phi_nonsmooth: None,
            phi_surrogate: None,
            grad_norm: None,
            constraint_violation: None,
            smoothing_error: None,
            p_star: Vec::new(),
            samples: Vec::new(),
        }
    }
}

/// Smoothing error of a fixed trajectory for one smoothing parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRow {
    pub param: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub problem: String,
    pub entries: Vec<MethodReport>,
    /// Column names of [`Sample::values`].
    pub sample_columns: Vec<String>,
    /// Smoothing error sweep on the reference (first LD, else first
    /// successful) trajectory.
    pub error_table: Vec<ErrorRow>,
}

impl ComparisonReport {
    pub fn entry(&self, method: Method) -> Option<&MethodReport> {
        self.entries.iter().find(|e| e.method == method)
    }

    /// Per-method trajectory CSV with header `t,u,<sample columns>`.
    pub fn write_samples_csv<W: Write>(&self, entry: &MethodReport, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,u,{}", self.sample_columns.join(","))?;
        for s in &entry.samples {
            let vals: Vec<String> = s.values.iter().map(f64::to_string).collect();
            writeln!(w, "{},{},{}", s.t, s.u, vals.join(","))?;
        }
        Ok(())
    }

    /// Error table CSV with header `param,error`.
    pub fn write_error_table_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "param,error")?;
        for r in &self.error_table {
            writeln!(w, "{},{}", r.param, r.error)?;
        }
        Ok(())
    }
}

/// Discrete L2-in-time norm of `f` on the sample times (trapezoid rule).
fn l2_in_time(t: &[f64], f: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 1..t.len() {
        acc += 0.5 * (t[k] - t[k - 1]) * (f[k] * f[k] + f[k - 1] * f[k - 1]);
    }
    acc.sqrt()
}

/// L2 norm of `|u x2| - u x2 tanh(u x2 / alpha)` along sampled `(u, x2)`.
pub fn block_smoothing_error(alpha: f64, t: &[f64], u: &[f64], x2: &[f64]) -> f64 {
    let diff: Vec<f64> = u
        .iter()
        .zip(x2)
        .map(|(a, b)| {
            let w = a * b;
            WorkIntegrand::Abs.eval(&w) - WorkIntegrand::Tanh { alpha }.eval(&w)
        })
        .collect();
    l2_in_time(t, &diff)
}

/// L2 norm of `omega_hat_N - omega` along sampled mechanical power.
pub fn wtps_smoothing_error(n: f64, p_stl: f64, t: &[f64], p_mech: &[f64]) -> f64 {
    let diff: Vec<f64> = p_mech
        .iter()
        .map(|p| omega_smoothed(p_stl, p, n) - omega(p_stl, p))
        .collect();
    l2_in_time(t, &diff)
}

fn mode(method: Method) -> GradientMode {
    match method {
        Method::NaiveFd => GradientMode::NaiveFd { h: NAIVE_FD_STEP },
        _ => GradientMode::Ld,
    }
}

fn fill_from_solution(method: Method, sol: &OcpSolution) -> MethodReport {
    MethodReport {
        method,
        status: Some(sol.nlp.status),
        stop_reason: sol.nlp.stop_reason,
        error: sol.nlp.failure.as_ref().map(|(_, m)| m.clone()),
        iterations: sol.nlp.iterations,
        evaluations: sol.evaluations,
        phi_nonsmooth: None,
        phi_surrogate: Some(sol.phi),
        grad_norm: Some(sol.nlp.grad_norm_final),
        constraint_violation: None,
        smoothing_error: None,
        p_star: sol.nlp.p_star.clone(),
        samples: Vec::new(),
    }
}

/// Solve the block-move problem with `method` from `u = 0` and evaluate the
/// result under the absolute-work functional. Failures are recorded in the
/// entry rather than returned.
pub fn run_block_move(method: Method, n_s: usize, options: &NlpOptions) -> MethodReport {
    match block_move_inner(method, n_s, options) {
        Ok(r) => r,
        Err(e) => MethodReport::failed(method, &e),
    }
}

fn block_move_inner(method: Method, n_s: usize, options: &NlpOptions) -> Result<MethodReport> {
    if n_s < 2 {
        return Err(Error::Config(format!("block move needs n_s >= 2, got {n_s}")));
    }
    let integrand = match method {
        Method::Smoothed(alpha) => WorkIntegrand::Tanh { alpha },
        _ => WorkIntegrand::Abs,
    };
    let problem = block_move_problem(integrand, n_s);
    let p0 = vec![0.0; problem.n_p()];
    let sol = problem.solve(&p0, mode(method), options.clone())?;
    let mut report = fill_from_solution(method, &sol);

    let reference = block_move_problem(WorkIntegrand::Abs, n_s);
    let judged = reference.evaluate_value(&sol.nlp.p_star)?;
    report.phi_nonsmooth = Some(judged.phi);
    report.constraint_violation = Some(
        reference
            .terminal_constraints
            .iter()
            .zip(&judged.terminal_values)
            .map(|(c, v)| (v - c.target).abs())
            .fold(0.0, f64::max),
    );
    let tr = &judged.trajectory;
    let u: Vec<f64> = tr.u.iter().map(|v| v[0]).collect();
    let x2: Vec<f64> = tr.x.iter().map(|x| x[1]).collect();
    report.smoothing_error = Some(match method {
        Method::Smoothed(alpha) => block_smoothing_error(alpha, &tr.t, &u, &x2),
        _ => 0.0,
    });
    report.samples = (0..tr.len())
        .map(|k| Sample {
            t: tr.t[k],
            u: u[k],
            values: tr.x[k].clone(),
        })
        .collect();
    Ok(report)
}

/// Run every method on the block-move problem (concurrently) and sweep the
/// smoothing error over `alphas` on the reference trajectory.
pub fn compare_block_move(
    methods: &[Method],
    n_s: usize,
    options: &NlpOptions,
    alphas: &[f64],
) -> ComparisonReport {
    let entries = run_all(methods, |m| run_block_move(m, n_s, options));
    let error_table = reference_entry(&entries)
        .map(|r| {
            let t: Vec<f64> = r.samples.iter().map(|s| s.t).collect();
            let u: Vec<f64> = r.samples.iter().map(|s| s.u).collect();
            let x2: Vec<f64> = r.samples.iter().map(|s| s.values[1]).collect();
            alphas
                .iter()
                .map(|&a| ErrorRow {
                    param: a,
                    error: block_smoothing_error(a, &t, &u, &x2),
                })
                .collect()
        })
        .unwrap_or_default();
    ComparisonReport {
        problem: "block".into(),
        entries,
        sample_columns: vec!["x1".into(), "x2".into(), "x3".into()],
        error_table,
    }
}

fn reference_entry(entries: &[MethodReport]) -> Option<&MethodReport> {
    let ok = |e: &&MethodReport| !e.samples.is_empty();
    entries
        .iter()
        .filter(ok)
        .find(|e| e.method == Method::Ld)
        .or_else(|| entries.iter().find(ok))
}

/// Run independent methods on scoped threads; results keep `methods` order.
fn run_all<F>(methods: &[Method], run: F) -> Vec<MethodReport>
where
    F: Fn(Method) -> MethodReport + Sync,
{
    std::thread::scope(|s| {
        let handles: Vec<_> = methods
            .iter()
            .map(|&m| {
                let run = &run;
                s.spawn(move || run(m))
            })
            .collect();
        handles
            .into_iter()
            .zip(methods)
            .map(|(h, &m)| {
                h.join().unwrap_or_else(|_| {
                    MethodReport::failed(m, &Error::Model("method run panicked".into()))
                })
            })
            .collect()
    })
}

/// Solve one wind-turbine scenario with `method`, judged under the nonsmooth
/// objective.
pub fn run_wtps(scenario: &WtpsScenario, method: Method, options: &NlpOptions) -> MethodReport {
    match wtps_inner(scenario, method, options) {
        Ok(r) => r,
        Err(e) => MethodReport::failed(method, &e),
    }
}

fn wtps_inner(scenario: &WtpsScenario, method: Method, options: &NlpOptions) -> Result<MethodReport> {
    let mut surrogate = scenario.clone();
    surrogate.objective = match method {
        Method::Smoothed(n) => Objective::Smoothed { n },
        _ => Objective::Nonsmooth,
    };
    let problem = surrogate.problem()?;
    let p0 = surrogate.initial_guess()?;
    let sol = problem.solve(&p0, mode(method), options.clone())?;
    let mut report = fill_from_solution(method, &sol);

    let mut judge = scenario.clone();
    judge.objective = Objective::Nonsmooth;
    let reference = judge.problem()?;
    let judged = reference.evaluate_value(&sol.nlp.p_star)?;
    report.phi_nonsmooth = Some(judged.phi);
    report.constraint_violation = Some(0.0);
    let rows = trajectory_table(&reference.dae, &judged.trajectory)?;
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let pm: Vec<f64> = rows.iter().map(|r| r.p_mech).collect();
    report.smoothing_error = Some(match method {
        Method::Smoothed(n) => wtps_smoothing_error(n, scenario.params.p_stl, &t, &pm),
        _ => 0.0,
    });
    report.samples = rows
        .iter()
        .map(|r| Sample {
            t: r.t,
            u: r.u,
            values: vec![r.v_wind, r.p_mech, r.omega, r.x[10]],
        })
        .collect();
    Ok(report)
}

/// Run every method on the scenario (concurrently) and emit the smoothing
/// error sweep over `ns` on the reference trajectory.
pub fn run_wtps_comparison(
    scenario: &WtpsScenario,
    methods: &[Method],
    options: &NlpOptions,
    ns: &[f64],
) -> ComparisonReport {
    let entries = run_all(methods, |m| run_wtps(scenario, m, options));
    let p_stl = scenario.params.p_stl;
    let error_table = reference_entry(&entries)
        .map(|r| {
            let t: Vec<f64> = r.samples.iter().map(|s| s.t).collect();
            let pm: Vec<f64> = r.samples.iter().map(|s| s.values[1]).collect();
            ns.iter()
                .map(|&n| ErrorRow {
                    param: n,
                    error: wtps_smoothing_error(n, p_stl, &t, &pm),
                })
                .collect()
        })
        .unwrap_or_default();
    ComparisonReport {
        problem: "wtps".into(),
        entries,
        sample_columns: vec!["v_wind".into(), "P_mech".into(), "omega".into(), "x_aux".into()],
        error_table,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_strings_round_trip() {
        for s in ["ld", "naive_fd", "smoothed:0.5", "smoothed:100"] {
            assert_eq!(s.parse::<Method>().unwrap().to_string(), s);
        }
        assert!("smoothed:-1".parse::<Method>().is_err());
        assert!("newton".parse::<Method>().is_err());
    }

    #[test]
    fn zero_force_is_free_but_infeasible() {
        let prob = block_move_problem(WorkIntegrand::Abs, 10);
        let r = prob.evaluate(&[0.0; 10]).unwrap();
        assert_eq!(r.phi, 0.0);
        assert_eq!(r.terminal_values, vec![0.0, 0.0]);
    }

    #[test]
    fn tanh_work_below_abs() {
        for w in [-3.0, -0.1, 0.0, 0.2, 5.0] {
            let a = WorkIntegrand::Abs.eval(&w);
            let s = WorkIntegrand::Tanh { alpha: 1.0 }.eval(&w);
            assert!(s <= a && s >= 0.0);
        }
    }
}
