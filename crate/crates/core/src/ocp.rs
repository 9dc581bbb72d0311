//! Direct single shooting: piecewise-constant controls, Mayer objective and
//! generalized-gradient extraction from the terminal LD sensitivities.

use serde::{Deserialize, Serialize};

use crate::dae::{
    consistent_init, integrate, AugmentedDaeState, BranchEvent, IntegratorConfig,
    SemiExplicitDae, TrajectoryRecord,
};
use crate::error::{Error, Result};
use crate::nlp::{minimize, Evaluation, NlpOptions, NlpResult, NlpSpec};

/// Piecewise-constant control on `n_s` uniform subintervals of `[t0, tf]`.
///
/// `values` holds the decision vector `p = (u_1, ..., u_ns)`, each block of
/// length `n_u`. On `(tau_{i-1}, tau_i]` the control is `u_i`; `t0` itself
/// belongs to the first subinterval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlGrid {
    t0: f64,
    tf: f64,
    n_s: usize,
    n_u: usize,
    values: Vec<f64>,
}

impl ControlGrid {
    pub fn new(t0: f64, tf: f64, n_s: usize, n_u: usize, values: Vec<f64>) -> Result<Self> {
        if !(t0.is_finite() && tf.is_finite()) || tf < t0 {
            return Err(Error::Config(format!(
                "horizon must satisfy t0 <= tf, got [{t0}, {tf}]"
            )));
        }
        if n_s == 0 || n_u == 0 {
            return Err(Error::Config("n_s and n_u must be positive".into()));
        }
        if values.len() != n_s * n_u {
            return Err(Error::Dimension {
                what: "control values",
                expected: n_s * n_u,
                got: values.len(),
            });
        }
        Ok(Self {
            t0,
            tf,
            n_s,
            n_u,
            values,
        })
    }

    /// Every subinterval holds the same control vector.
    pub fn constant(t0: f64, tf: f64, n_s: usize, u: &[f64]) -> Result<Self> {
        let values = u.iter().copied().cycle().take(n_s * u.len()).collect();
        Self::new(t0, tf, n_s, u.len(), values)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn tf(&self) -> f64 {
        self.tf
    }
    pub fn n_s(&self) -> usize {
        self.n_s
    }
    pub fn n_u(&self) -> usize {
        self.n_u
    }
    pub fn n_p(&self) -> usize {
        self.n_s * self.n_u
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn with_values(&self, values: &[f64]) -> Result<Self> {
        Self::new(self.t0, self.tf, self.n_s, self.n_u, values.to_vec())
    }

    /// Subinterval length `(tf - t0) / n_s`.
    pub fn spacing(&self) -> f64 {
        (self.tf - self.t0) / self.n_s as f64
    }

    /// Breakpoint `tau_i`, `i = 0..=n_s`; the last one is exactly `tf`.
    pub fn breakpoint(&self, i: usize) -> f64 {
        if i >= self.n_s {
            self.tf
        } else {
            self.t0 + i as f64 * self.spacing()
        }
    }

    /// Control vector of the (zero-based) subinterval `i`.
    pub fn interval_values(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_u..(i + 1) * self.n_u]
    }

    /// Zero-based subinterval containing `t` under the half-open convention.
    pub fn interval_index(&self, t: f64) -> Result<usize> {
        if !(t >= self.t0 && t <= self.tf) {
            return Err(Error::Range {
                what: "t",
                value: t,
                lo: self.t0,
                hi: self.tf,
            });
        }
        let h = self.spacing();
        if h == 0.0 {
            return Ok(0);
        }
        let mut i = (((t - self.t0) / h).ceil() as usize).clamp(1, self.n_s);
        while i > 1 && t <= self.breakpoint(i - 1) {
            i -= 1;
        }
        while i < self.n_s && t > self.breakpoint(i) {
            i += 1;
        }
        Ok(i - 1)
    }

    /// `u(t)`.
    pub fn control_at(&self, t: f64) -> Result<&[f64]> {
        Ok(self.interval_values(self.interval_index(t)?))
    }

    /// Seed rows for subinterval `i`: `e_i^T (x) I_{n_u}`, as `(row, column)`
    /// positions of the unit entries.
    pub fn seed_columns(&self, i: usize) -> impl Iterator<Item = (usize, usize)> {
        let n_u = self.n_u;
        (0..n_u).map(move |r| (r, i * n_u + r))
    }
}

/// Whether the Mayer state is to be minimized or maximized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Equality `x_index(tf) = target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalConstraint {
    pub index: usize,
    pub target: f64,
}

/// A single-shooting optimal control problem in Mayer form.
///
/// The last differential state of `dae` is the objective accumulator; it must
/// start at zero.
#[derive(Debug, Clone)]
pub struct OcpProblem<D> {
    pub dae: D,
    pub x0: Vec<f64>,
    pub y_guess: Vec<f64>,
    pub t0: f64,
    pub tf: f64,
    pub n_s: usize,
    /// Per-control bounds, length `n_u` each.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub terminal_constraints: Vec<TerminalConstraint>,
    pub sense: Sense,
    pub integrator: IntegratorConfig,
}

/// Outcome of one shooting evaluation.
#[derive(Debug, Clone)]
pub struct ShootingResult {
    /// Mayer objective `x_aux(tf)`.
    pub phi: f64,
    /// Generalized-gradient element of `phi`; empty when sensitivities were
    /// not requested.
    pub mu: Vec<f64>,
    pub terminal_values: Vec<f64>,
    /// One row per terminal constraint, taken from `X(tf)`.
    pub terminal_jacobian: Vec<Vec<f64>>,
    pub trajectory: TrajectoryRecord,
    pub branch_log: Vec<BranchEvent>,
}

impl ShootingResult {
    /// Number of branch switches recorded between consecutive steps.
    pub fn switch_count(&self) -> usize {
        self.branch_log.len().saturating_sub(1)
    }
}

impl<D: SemiExplicitDae> OcpProblem<D> {
    pub fn n_u(&self) -> usize {
        self.dae.n_u()
    }

    pub fn n_p(&self) -> usize {
        self.n_s * self.dae.n_u()
    }

    pub fn aux_index(&self) -> usize {
        self.dae.n_x() - 1
    }

    /// Bounds on the full decision vector.
    pub fn parameter_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let rep = |b: &[f64]| b.iter().copied().cycle().take(self.n_p()).collect();
        (rep(&self.lower), rep(&self.upper))
    }

    pub fn grid(&self, p: &[f64]) -> Result<ControlGrid> {
        ControlGrid::new(self.t0, self.tf, self.n_s, self.dae.n_u(), p.to_vec())
    }

    fn validate(&self, p: &[f64]) -> Result<()> {
        let n_x = self.dae.n_x();
        if self.x0.len() != n_x {
            return Err(Error::Dimension {
                what: "x0",
                expected: n_x,
                got: self.x0.len(),
            });
        }
        if self.x0[n_x - 1] != 0.0 {
            return Err(Error::Config("objective accumulator must start at 0".into()));
        }
        if p.len() != self.n_p() {
            return Err(Error::Dimension {
                what: "p",
                expected: self.n_p(),
                got: p.len(),
            });
        }
        let (lo, hi) = self.parameter_bounds();
        for ((&v, &l), &h) in p.iter().zip(&lo).zip(&hi) {
            if !(v >= l && v <= h) {
                return Err(Error::Range {
                    what: "control parameter",
                    value: v,
                    lo: l,
                    hi: h,
                });
            }
        }
        for c in &self.terminal_constraints {
            if c.index >= n_x {
                return Err(Error::Config(format!(
                    "terminal constraint on state {} but n_x = {n_x}",
                    c.index
                )));
            }
        }
        Ok(())
    }

    /// Shooting evaluation with LD sensitivities.
    pub fn evaluate(&self, p: &[f64]) -> Result<ShootingResult> {
        self.run(p, true)
    }

    /// Objective and terminal values only; skips the sensitivity system.
    pub fn evaluate_value(&self, p: &[f64]) -> Result<ShootingResult> {
        self.run(p, false)
    }

    fn run(&self, p: &[f64], sensitivities: bool) -> Result<ShootingResult> {
        let annotate = |e: Error| Error::AtParameters {
            p: p.to_vec(),
            source: Box::new(e),
        };
        self.validate(p).map_err(annotate)?;
        let grid = self.grid(p).map_err(annotate)?;
        let mut cfg = self.integrator.clone();
        cfg.sensitivities = sensitivities;
        let n_p = grid.n_p();
        let (y0, sy0) =
            consistent_init(&self.dae, &cfg, self.t0, &self.x0, &self.y_guess, n_p)
                .map_err(annotate)?;
        let init = AugmentedDaeState::initial(self.t0, self.x0.clone(), y0, sy0);
        let traj = integrate(&self.dae, &cfg, &grid, init).map_err(annotate)?;

        let fin = &traj.final_state;
        let aux = self.aux_index();
        let phi = fin.x[aux];
        let mu = if sensitivities {
            fin.sx.row(aux).iter().copied().collect()
        } else {
            Vec::new()
        };
        let terminal_values = self
            .terminal_constraints
            .iter()
            .map(|c| fin.x[c.index])
            .collect();
        let terminal_jacobian = if sensitivities {
            self.terminal_constraints
                .iter()
                .map(|c| fin.sx.row(c.index).iter().copied().collect())
                .collect()
        } else {
            Vec::new()
        };
        let branch_log = traj.branch_log.clone();
        Ok(ShootingResult {
            phi,
            mu,
            terminal_values,
            terminal_jacobian,
            trajectory: traj,
            branch_log,
        })
    }

    /// Central finite differences of `phi` with step `h`, clipped to the
    /// bounds (one-sided at an active bound).
    pub fn fd_gradient(&self, p: &[f64], h: f64) -> Result<Vec<f64>> {
        let (lo, hi) = self.parameter_bounds();
        (0..p.len())
            .map(|j| {
                let mut plus = p.to_vec();
                let mut minus = p.to_vec();
                plus[j] = (p[j] + h).min(hi[j]);
                minus[j] = (p[j] - h).max(lo[j]);
                let fp = self.evaluate_value(&plus)?.phi;
                let fm = self.evaluate_value(&minus)?.phi;
                Ok((fp - fm) / (plus[j] - minus[j]))
            })
            .collect()
    }

    /// Compare the LD gradient with central differences of `phi`.
    pub fn classical_recovery_check(&self, p: &[f64], h: f64) -> Result<RecoveryReport> {
        let res = self.evaluate(p)?;
        let fd = self.fd_gradient(p, h)?;
        let switches = res.switch_count();
        Ok(RecoveryReport::new(res.phi, res.mu, fd, switches))
    }
}

/// Source of the gradient handed to the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Terminal LD sensitivities.
    Ld,
    /// Central finite differences of the objective and constraints with step
    /// `h`, ignoring any nonsmoothness.
    NaiveFd { h: f64 },
}

/// Step used by the naive finite-difference gradient.
pub const NAIVE_FD_STEP: f64 = 1e-6;

/// Optimizer output together with the trajectory at the returned controls.
#[derive(Debug, Clone)]
pub struct OcpSolution {
    /// Objective in the problem's own sense (not negated for maximization).
    pub phi: f64,
    pub nlp: NlpResult,
    /// Value-only shooting run at `nlp.p_star`.
    pub shooting: ShootingResult,
    /// Number of shooting evaluations the optimizer requested.
    pub evaluations: usize,
}

impl<D: SemiExplicitDae> OcpProblem<D> {
    fn sign(&self) -> f64 {
        match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        }
    }

    /// Objective, gradient and constraints in minimization form.
    pub fn nlp_evaluation(&self, p: &[f64], mode: GradientMode) -> Result<Evaluation> {
        let sign = self.sign();
        match mode {
            GradientMode::Ld => {
                let r = self.evaluate(p)?;
                Ok(Evaluation {
                    phi: sign * r.phi,
                    grad: r.mu.iter().map(|g| sign * g).collect(),
                    constraints: r.terminal_values,
                    jacobian: r.terminal_jacobian,
                })
            }
            GradientMode::NaiveFd { h } => {
                let base = self.evaluate_value(p)?;
                let (lo, hi) = self.parameter_bounds();
                let m = self.terminal_constraints.len();
                let mut grad = vec![0.0; p.len()];
                let mut jac = vec![vec![0.0; p.len()]; m];
                for j in 0..p.len() {
                    let mut plus = p.to_vec();
                    let mut minus = p.to_vec();
                    plus[j] = (p[j] + h).min(hi[j]);
                    minus[j] = (p[j] - h).max(lo[j]);
                    let width = plus[j] - minus[j];
                    if width == 0.0 {
                        continue;
                    }
                    let fp = self.evaluate_value(&plus)?;
                    let fm = self.evaluate_value(&minus)?;
                    grad[j] = sign * (fp.phi - fm.phi) / width;
                    for (row, (a, b)) in jac
                        .iter_mut()
                        .zip(fp.terminal_values.iter().zip(&fm.terminal_values))
                    {
                        row[j] = (a - b) / width;
                    }
                }
                Ok(Evaluation {
                    phi: sign * base.phi,
                    grad,
                    constraints: base.terminal_values,
                    jacobian: jac,
                })
            }
        }
    }

    /// Optimize the control parameters from `p0`.
    pub fn solve(&self, p0: &[f64], mode: GradientMode, options: NlpOptions) -> Result<OcpSolution> {
        let (lower, upper) = self.parameter_bounds();
        let targets = self.terminal_constraints.iter().map(|c| c.target).collect();
        let mut evaluations = 0usize;
        let callback = |p: &[f64]| {
            evaluations += 1;
            self.nlp_evaluation(p, mode)
        };
        let mut spec = NlpSpec::new(callback, lower, upper)
            .with_targets(targets)
            .with_options(options);
        let nlp = minimize(&mut spec, p0)?;
        drop(spec);
        let shooting = self.evaluate_value(&nlp.p_star)?;
        Ok(OcpSolution {
            phi: shooting.phi,
            nlp,
            shooting,
            evaluations,
        })
    }
}

/// LD gradient versus finite differences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub phi: f64,
    pub mu: Vec<f64>,
    pub fd: Vec<f64>,
    pub max_rel_err: f64,
    pub branch_switches: usize,
}

/// Floor on the denominator of relative errors so exactly-zero gradient
/// components compare absolutely.
pub const REL_ERR_FLOOR: f64 = 1e-8;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(a.abs()).max(REL_ERR_FLOOR)
}

impl RecoveryReport {
    fn new(phi: f64, mu: Vec<f64>, fd: Vec<f64>, branch_switches: usize) -> Self {
        let max_rel_err = mu
            .iter()
            .zip(&fd)
            .map(|(&a, &b)| rel_err(a, b))
            .fold(0.0, f64::max);
        Self {
            phi,
            mu,
            fd,
            max_rel_err,
            branch_switches,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_step() -> ControlGrid {
        ControlGrid::new(0.0, 1.0, 2, 1, vec![5.0, 7.0]).unwrap()
    }

    #[test]
    fn control_at_half_open_intervals() {
        let g = two_step();
        assert_eq!(g.control_at(0.5).unwrap(), &[5.0]);
        assert_eq!(g.control_at(0.50001).unwrap(), &[7.0]);
        assert_eq!(g.control_at(0.0).unwrap(), &[5.0]);
        assert_eq!(g.control_at(1.0).unwrap(), &[7.0]);
    }

    #[test]
    fn control_at_outside_horizon_is_range_error() {
        let g = two_step();
        assert!(matches!(g.control_at(-1e-12), Err(Error::Range { .. })));
        assert!(matches!(g.control_at(1.0 + 1e-12), Err(Error::Range { .. })));
        assert!(matches!(g.control_at(f64::NAN), Err(Error::Range { .. })));
    }

    #[test]
    fn breakpoints_map_to_left_interval() {
        let g = ControlGrid::constant(18.0, 22.0, 20, &[0.0]).unwrap();
        for i in 1..=20 {
            assert_eq!(g.interval_index(g.breakpoint(i)).unwrap(), i - 1);
        }
        assert_eq!(g.breakpoint(20), 22.0);
    }

    #[test]
    fn grid_rejects_reversed_horizon() {
        assert!(ControlGrid::new(1.0, 0.0, 2, 1, vec![0.0; 2]).is_err());
        assert!(ControlGrid::new(0.0, 1.0, 2, 1, vec![0.0; 3]).is_err());
    }

    #[test]
    fn seed_columns_follow_kronecker_layout() {
        let g = ControlGrid::constant(0.0, 1.0, 3, &[0.0, 0.0]).unwrap();
        let cols: Vec<_> = g.seed_columns(1).collect();
        assert_eq!(cols, vec![(0, 2), (1, 3)]);
    }
}
