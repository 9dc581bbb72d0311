//! Fixed-step implicit trapezoidal integration of semi-explicit index-1 DAEs
//!
//! ```text
//!   x' = h(t, u, x, y),    0 = g(t, x, y)
//! ```
//!
//! together with the LD-derivative sensitivities `X = dx/dp`, `Y = dy/dp` for
//! a piecewise-constant control parameterization.
//!
//! Each step solves the coupled trapezoidal residual for `(x+, y+)` with a
//! finite-difference Newton corrector. The sensitivities then follow from one
//! linear solve: the model is evaluated once in LD arithmetic at the new point
//! with the directions `[P_pred | I_q]`, where `P_pred` is an explicit
//! prediction of the sensitivity directions and `I_q` probes every input
//! coordinate. The trailing `q` columns give the Jacobian of the branch the
//! lexicographic rules selected there, which is then frozen for the step and
//! reused as the left-endpoint Jacobian of the next step in the same control
//! subinterval.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ld::{record_branches, LdScalar};
use crate::ocp::ControlGrid;
use crate::scalar::Scalar;

/// A semi-explicit DAE whose right-hand sides can be evaluated on any
/// [`Scalar`].
pub trait SemiExplicitDae {
    fn n_x(&self) -> usize;
    fn n_y(&self) -> usize;
    fn n_u(&self) -> usize;

    /// Differential right-hand side `h(t, u, x, y)`, length `n_x`.
    fn rhs<T: Scalar>(&self, t: f64, u: &[T], x: &[T], y: &[T]) -> Result<Vec<T>>;

    /// Algebraic residual `g(t, x, y)`, length `n_y`.
    fn alg<T: Scalar>(&self, t: f64, x: &[T], y: &[T]) -> Result<Vec<T>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    /// Trapezoidal steps per control subinterval.
    pub steps_per_interval: usize,
    /// Infinity-norm tolerance on the corrector residual.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Smallest admissible pivot magnitude of `dg/dy`.
    pub regularity_floor: f64,
    /// Propagate `X`, `Y` alongside the states.
    pub sensitivities: bool,
    /// Keep `X`, `Y` at every accepted step rather than only at the end.
    pub record_sensitivities: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            steps_per_interval: 100,
            newton_tol: 1e-10,
            newton_max_iter: 25,
            regularity_floor: 1e-8,
            sensitivities: true,
            record_sensitivities: false,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_interval == 0
            || self.newton_max_iter == 0
            || !(self.newton_tol > 0.0)
            || !(self.regularity_floor > 0.0)
        {
            return Err(Error::Config(
                "integrator settings must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// States and LD sensitivities at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDaeState {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `X`, `n_x x n_p`.
    pub sx: DMatrix<f64>,
    /// `Y`, `n_y x n_p`.
    pub sy: DMatrix<f64>,
}

impl AugmentedDaeState {
    /// Initial state with `X(t0) = 0`.
    pub fn initial(t: f64, x: Vec<f64>, y: Vec<f64>, sy: DMatrix<f64>) -> Self {
        let sx = DMatrix::zeros(x.len(), sy.ncols());
        Self { t, x, y, sx, sy }
    }

    pub fn n_p(&self) -> usize {
        self.sx.ncols()
    }
}

/// A change in the sequence of nonsmooth selections along the trajectory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchEvent {
    /// Time of the evaluation that first showed `signature`, as bits so the
    /// record stays `Eq`.
    t_bits: u64,
    pub signature: Vec<i8>,
}

impl BranchEvent {
    pub fn t(&self) -> f64 {
        f64::from_bits(self.t_bits)
    }
}

/// Everything an integration run produced.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    /// Control applied on the step that ends at each sample (the first sample
    /// carries the first subinterval's control).
    pub u: Vec<Vec<f64>>,
    /// `(X, Y)` per sample when [`IntegratorConfig::record_sensitivities`] is
    /// set, otherwise empty.
    pub sens: Vec<(DMatrix<f64>, DMatrix<f64>)>,
    pub final_state: AugmentedDaeState,
    pub branch_log: Vec<BranchEvent>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// CSV with header `t,x1..x{n_x},y1..y{n_y}`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n_x = self.final_state.x.len();
        let n_y = self.final_state.y.len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n_x).map(|i| format!("x{i}")));
        header.extend((1..=n_y).map(|i| format!("y{i}")));
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.t.len() {
            let mut row = vec![self.t[k].to_string()];
            row.extend(self.x[k].iter().map(f64::to_string));
            row.extend(self.y[k].iter().map(f64::to_string));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn finite_or(v: Vec<f64>, what: &str, t: f64) -> Result<Vec<f64>> {
    if v.iter().all(|a| a.is_finite()) {
        Ok(v)
    } else {
        Err(Error::Model(format!("non-finite {what} at t = {t}")))
    }
}

fn eval_h<D: SemiExplicitDae>(dae: &D, t: f64, u: &[f64], x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    finite_or(dae.rhs(t, u, x, y)?, "right-hand side", t)
}

fn eval_g<D: SemiExplicitDae>(dae: &D, t: f64, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    finite_or(dae.alg(t, x, y)?, "algebraic residual", t)
}

/// Model outputs in LD arithmetic.
struct LdEval {
    h: Vec<f64>,
    hd: DMatrix<f64>,
    g: Vec<f64>,
    gd: DMatrix<f64>,
    branches: Vec<i8>,
}

/// Evaluate `h` and `g` with direction rows `dirs` (`q x k`, rows ordered
/// `u`, `x`, `y`).
fn ld_eval<D: SemiExplicitDae>(
    dae: &D,
    t: f64,
    u: &[f64],
    x: &[f64],
    y: &[f64],
    dirs: &DMatrix<f64>,
    with_h: bool,
) -> Result<LdEval> {
    let k = dirs.ncols();
    let lift = |vals: &[f64], offset: usize| -> Result<Vec<LdScalar>> {
        vals.iter()
            .enumerate()
            .map(|(i, &v)| {
                let row: Vec<f64> = dirs.row(offset + i).iter().copied().collect();
                LdScalar::new(v, row).map_err(Error::from)
            })
            .collect()
    };
    let lu = lift(u, 0)?;
    let lx = lift(x, u.len())?;
    let ly = lift(y, u.len() + x.len())?;
    let (out, branches) = record_branches(|| -> Result<_> {
        let h = if with_h {
            dae.rhs(t, &lu, &lx, &ly)?
        } else {
            Vec::new()
        };
        let g = dae.alg(t, &lx, &ly)?;
        Ok((h, g))
    });
    let (h, g) = out?;
    let unpack = |vs: Vec<LdScalar>| -> Result<(Vec<f64>, DMatrix<f64>)> {
        let n = vs.len();
        let mut vals = Vec::with_capacity(n);
        let mut der = DMatrix::zeros(n, k);
        for (i, v) in vs.into_iter().enumerate() {
            let v = v.check()?;
            vals.push(v.val());
            der.row_mut(i).copy_from_slice(v.der());
        }
        Ok((vals, der))
    };
    let (h, hd) = unpack(h)?;
    let (g, gd) = unpack(g)?;
    Ok(LdEval {
        h,
        hd,
        g,
        gd,
        branches,
    })
}

fn min_pivot(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    if m.nrows() == 1 {
        return m[(0, 0)].abs();
    }
    let lu = m.clone().lu();
    lu.u().diagonal().iter().fold(f64::INFINITY, |a, v| a.min(v.abs()))
}

/// Solve `g(t0, x0, y) = 0` for `y` by Newton from `y_guess`, then the
/// algebraic sensitivity condition for `Y(t0)` given `X(t0) = 0`.
pub fn consistent_init<D: SemiExplicitDae>(
    dae: &D,
    cfg: &IntegratorConfig,
    t0: f64,
    x0: &[f64],
    y_guess: &[f64],
    n_p: usize,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    cfg.validate()?;
    let (n_x, n_y) = (dae.n_x(), dae.n_y());
    if x0.len() != n_x || y_guess.len() != n_y {
        return Err(Error::Dimension {
            what: "initial state",
            expected: n_x + n_y,
            got: x0.len() + y_guess.len(),
        });
    }
    if n_y == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, n_p)));
    }
    // probe directions on (x, y); u does not enter g
    let q = n_x + n_y;
    let probe = DMatrix::identity(q, q);
    let mut y = y_guess.to_vec();
    let mut residual = f64::INFINITY;
    for it in 0..=cfg.newton_max_iter {
        let ev = ld_eval(dae, t0, &[], x0, &y, &probe, false)?;
        finite_or(ev.g.clone(), "algebraic residual", t0)?;
        residual = ev.g.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
        let gy = ev.gd.columns(n_x, n_y).into_owned();
        let pivot = min_pivot(&gy);
        if pivot < cfg.regularity_floor {
            return Err(Error::Regularity {
                t: t0,
                pivot,
                floor: cfg.regularity_floor,
            });
        }
        if residual <= cfg.newton_tol {
            let gx = ev.gd.columns(0, n_x).into_owned();
            let sx0 = DMatrix::<f64>::zeros(n_x, n_p);
            let rhs = -(gx * sx0);
            let sy0 = gy
                .lu()
                .solve(&rhs)
                .ok_or(Error::SingularSensitivity { t: t0 })?;
            return Ok((y, sy0));
        }
        if it == cfg.newton_max_iter {
            break;
        }
        let dy = gy
            .lu()
            .solve(&DVector::from_vec(ev.g))
            .ok_or(Error::Init {
                residual,
                iterations: it,
            })?;
        for (yi, d) in y.iter_mut().zip(dy.iter()) {
            *yi -= d;
        }
    }
    Err(Error::Init {
        residual,
        iterations: cfg.newton_max_iter,
    })
}

/// Left-endpoint data reusable while the control stays the same.
struct LeftCache {
    u: Vec<f64>,
    h: Vec<f64>,
    /// Frozen Jacobian `[dh/du dh/dx dh/dy]`, `n_x x q`.
    jac: Option<DMatrix<f64>>,
}

struct Stepper<'a, D> {
    dae: &'a D,
    cfg: &'a IntegratorConfig,
    cache: Option<LeftCache>,
}

struct StepOutcome {
    state: AugmentedDaeState,
    left_branches: Option<Vec<i8>>,
    right_branches: Vec<i8>,
}

impl<'a, D: SemiExplicitDae> Stepper<'a, D> {
    fn new(dae: &'a D, cfg: &'a IntegratorConfig) -> Self {
        Self {
            dae,
            cfg,
            cache: None,
        }
    }

    /// Stack `[S; X_w; Y_w]` for the active columns.
    fn directions(&self, seed: &DMatrix<f64>, sx: &DMatrix<f64>, sy: &DMatrix<f64>) -> DMatrix<f64> {
        let w = seed.ncols();
        let (n_u, n_x, n_y) = (seed.nrows(), sx.nrows(), sy.nrows());
        let mut p = DMatrix::zeros(n_u + n_x + n_y, w);
        p.rows_mut(0, n_u).copy_from(seed);
        p.rows_mut(n_u, n_x).copy_from(&sx.columns(0, w));
        p.rows_mut(n_u + n_x, n_y).copy_from(&sy.columns(0, w));
        p
    }

    /// One trapezoidal step from `state` to `t_next` under control `u`.
    /// `seed` is `n_u x w`; sensitivity columns beyond `w` are zero and stay so.
    fn step(
        &mut self,
        state: &AugmentedDaeState,
        u: &[f64],
        seed: &DMatrix<f64>,
        t_next: f64,
    ) -> Result<StepOutcome> {
        let dae = self.dae;
        let cfg = self.cfg;
        let (n_u, n_x, n_y) = (dae.n_u(), dae.n_x(), dae.n_y());
        let q = n_u + n_x + n_y;
        let w = seed.ncols();
        let t = state.t;
        let dt = t_next - t;
        if !(dt > 0.0) {
            return Err(Error::Config(format!("step size must be positive, got {dt}")));
        }
        let sens = cfg.sensitivities;

        let cached = self.cache.take().filter(|c| c.u == u);
        let mut left_branches = None;
        let (h_left, hp_left) = match cached {
            Some(c) => {
                let hp = match (&c.jac, sens) {
                    (Some(j), true) => Some(j * self.directions(seed, &state.sx, &state.sy)),
                    _ => None,
                };
                (c.h, hp)
            }
            None if sens => {
                let dirs = self.directions(seed, &state.sx, &state.sy);
                let ev = ld_eval(dae, t, u, &state.x, &state.y, &dirs, true)?;
                left_branches = Some(ev.branches);
                (finite_or(ev.h, "right-hand side", t)?, Some(ev.hd))
            }
            None => {
                // values agree bitwise with f64; the LD pass logs the branches
                let probe = DMatrix::identity(q, q);
                let ev = ld_eval(dae, t, u, &state.x, &state.y, &probe, true)?;
                left_branches = Some(ev.branches);
                (finite_or(ev.h, "right-hand side", t)?, None)
            }
        };

        let z = self.corrector(t_next, u, &state.x, &h_left, dt, state)?;
        let x_new: Vec<f64> = z.rows(0, n_x).iter().copied().collect();
        let y_new: Vec<f64> = z.rows(n_x, n_y).iter().copied().collect();

        // right endpoint in LD arithmetic: predicted directions, then probes
        let probe_dirs = match &hp_left {
            Some(hp) => {
                let mut pred = self.directions(seed, &state.sx, &state.sy);
                let shifted = pred.rows(n_u, n_x) + hp * dt;
                pred.rows_mut(n_u, n_x).copy_from(&shifted);
                let mut d = DMatrix::zeros(q, w + q);
                d.columns_mut(0, w).copy_from(&pred);
                d.columns_mut(w, q).fill_with_identity();
                d
            }
            None => DMatrix::identity(q, q),
        };
        let kq = probe_dirs.ncols() - q;
        let ev = ld_eval(dae, t_next, u, &x_new, &y_new, &probe_dirs, true)?;
        let h_right = finite_or(ev.h, "right-hand side", t_next)?;
        let jac = ev.hd.columns(kq, q).into_owned();
        let gjac = ev.gd.columns(kq, q).into_owned();
        let gy = gjac.columns(n_u + n_x, n_y).into_owned();
        let pivot = min_pivot(&gy);
        if pivot < cfg.regularity_floor {
            return Err(Error::Regularity {
                t: t_next,
                pivot,
                floor: cfg.regularity_floor,
            });
        }

        let n_p = state.n_p();
        let (sx_new, sy_new) = match hp_left {
            Some(hp) => {
                let m = n_x + n_y;
                let half = 0.5 * dt;
                let ju = jac.columns(0, n_u);
                let jx = jac.columns(n_u, n_x);
                let jy = jac.columns(n_u + n_x, n_y);
                let mut a = DMatrix::zeros(m, m);
                a.view_mut((0, 0), (n_x, n_x))
                    .copy_from(&(DMatrix::identity(n_x, n_x) - jx * half));
                a.view_mut((0, n_x), (n_x, n_y)).copy_from(&(jy * (-half)));
                a.view_mut((n_x, 0), (n_y, n_x))
                    .copy_from(&gjac.columns(n_u, n_x));
                a.view_mut((n_x, n_x), (n_y, n_y)).copy_from(&gy);
                let mut b = DMatrix::zeros(m, w);
                let top = state.sx.columns(0, w) + (hp + ju * seed) * half;
                b.rows_mut(0, n_x).copy_from(&top);
                let sol = a
                    .lu()
                    .solve(&b)
                    .ok_or(Error::SingularSensitivity { t: t_next })?;
                if sol.iter().any(|v| !v.is_finite()) {
                    return Err(Error::SingularSensitivity { t: t_next });
                }
                let mut sx = DMatrix::zeros(n_x, n_p);
                let mut sy = DMatrix::zeros(n_y, n_p);
                sx.columns_mut(0, w).copy_from(&sol.rows(0, n_x));
                sy.columns_mut(0, w).copy_from(&sol.rows(n_x, n_y));
                (sx, sy)
            }
            None => (state.sx.clone(), state.sy.clone()),
        };

        self.cache = Some(LeftCache {
            u: u.to_vec(),
            h: h_right,
            jac: if sens { Some(jac) } else { None },
        });
        Ok(StepOutcome {
            state: AugmentedDaeState {
                t: t_next,
                x: x_new,
                y: y_new,
                sx: sx_new,
                sy: sy_new,
            },
            left_branches,
            right_branches: ev.branches,
        })
    }

    /// Newton on `[x+ - x - dt/2 (h_left + h(t+, x+, y+)); g(t+, x+, y+)]`
    /// with a forward-difference Jacobian, followed by one polishing
    /// iteration on the last factorization.
    fn corrector(
        &self,
        t_next: f64,
        u: &[f64],
        x: &[f64],
        h_left: &[f64],
        dt: f64,
        state: &AugmentedDaeState,
    ) -> Result<DVector<f64>> {
        let dae = self.dae;
        let cfg = self.cfg;
        let n_x = dae.n_x();
        let n_y = dae.n_y();
        let m = n_x + n_y;
        let half = 0.5 * dt;
        let resid = |z: &DVector<f64>| -> Result<DVector<f64>> {
            let xs = &z.as_slice()[..n_x];
            let ys = &z.as_slice()[n_x..];
            let h = eval_h(dae, t_next, u, xs, ys)?;
            let g = eval_g(dae, t_next, xs, ys)?;
            let mut r = DVector::zeros(m);
            for i in 0..n_x {
                r[i] = xs[i] - x[i] - half * (h_left[i] + h[i]);
            }
            for i in 0..n_y {
                r[n_x + i] = g[i];
            }
            Ok(r)
        };

        let mut z = DVector::zeros(m);
        for i in 0..n_x {
            z[i] = x[i] + dt * h_left[i];
        }
        for i in 0..n_y {
            z[n_x + i] = state.y[i];
        }
        let mut f = resid(&z)?;
        let mut last_lu = None;
        for _ in 0..cfg.newton_max_iter {
            let norm = f.amax();
            if norm <= cfg.newton_tol {
                if let Some(lu) = &last_lu {
                    let lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn> = lu;
                    if let Some(dz) = lu.solve(&f) {
                        let zp = &z - dz;
                        if let Ok(fp) = resid(&zp) {
                            if fp.amax() <= norm {
                                return Ok(zp);
                            }
                        }
                    }
                }
                return Ok(z);
            }
            let mut jac = DMatrix::zeros(m, m);
            for j in 0..m {
                let delta = f64::EPSILON.sqrt() * z[j].abs().max(1.0);
                let mut zp = z.clone();
                zp[j] += delta;
                let fp = resid(&zp)?;
                jac.set_column(j, &((fp - &f) / delta));
            }
            let lu = jac.lu();
            let dz = lu.solve(&f).ok_or(Error::Newton {
                t: t_next,
                residual: norm,
            })?;
            z -= dz;
            f = match resid(&z) {
                Ok(f) => f,
                Err(Error::Model(_)) => {
                    return Err(Error::Newton {
                        t: t_next,
                        residual: f64::INFINITY,
                    })
                }
                Err(e) => return Err(e),
            };
            last_lu = Some(lu);
        }
        Err(Error::Newton {
            t: t_next,
            residual: f.amax(),
        })
    }
}

fn seed_matrix(grid: &ControlGrid, i: usize) -> DMatrix<f64> {
    let n_u = grid.n_u();
    let w = (i + 1) * n_u;
    let mut s = DMatrix::zeros(n_u, w);
    for (r, c) in grid.seed_columns(i) {
        s[(r, c)] = 1.0;
    }
    s
}

/// One trapezoidal step with the sensitivity update, starting from scratch
/// (no cached left-endpoint data).
///
/// `seed` is the `n_u x n_p` direction block of the control (the unit rows of
/// the current subinterval).
pub fn step<D: SemiExplicitDae>(
    dae: &D,
    cfg: &IntegratorConfig,
    state: &AugmentedDaeState,
    u: &[f64],
    seed: &DMatrix<f64>,
    dt: f64,
) -> Result<AugmentedDaeState> {
    cfg.validate()?;
    if seed.ncols() != state.n_p() || seed.nrows() != dae.n_u() {
        return Err(Error::Dimension {
            what: "seed",
            expected: dae.n_u() * state.n_p(),
            got: seed.len(),
        });
    }
    let mut stepper = Stepper::new(dae, cfg);
    Ok(stepper.step(state, u, seed, state.t + dt)?.state)
}

/// Integrate over the control grid.
pub fn integrate<D: SemiExplicitDae>(
    dae: &D,
    cfg: &IntegratorConfig,
    grid: &ControlGrid,
    init: AugmentedDaeState,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let (n_u, n_x, n_y) = (dae.n_u(), dae.n_x(), dae.n_y());
    if grid.n_u() != n_u {
        return Err(Error::Dimension {
            what: "control width",
            expected: n_u,
            got: grid.n_u(),
        });
    }
    if init.x.len() != n_x || init.y.len() != n_y {
        return Err(Error::Dimension {
            what: "initial state",
            expected: n_x + n_y,
            got: init.x.len() + init.y.len(),
        });
    }
    let n_p = grid.n_p();
    if init.sx.shape() != (n_x, n_p) || init.sy.shape() != (n_y, n_p) {
        return Err(Error::Dimension {
            what: "initial sensitivities",
            expected: (n_x + n_y) * n_p,
            got: init.sx.len() + init.sy.len(),
        });
    }

    let record_sens = cfg.record_sensitivities;
    let mut rec = TrajectoryRecord {
        t: vec![init.t],
        x: vec![init.x.clone()],
        y: vec![init.y.clone()],
        u: vec![grid.interval_values(0).to_vec()],
        sens: if record_sens {
            vec![(init.sx.clone(), init.sy.clone())]
        } else {
            Vec::new()
        },
        final_state: init.clone(),
        branch_log: Vec::new(),
    };
    if grid.tf() == grid.t0() {
        return Ok(rec);
    }

    let log = |t: f64, sig: Vec<i8>, rec: &mut TrajectoryRecord| {
        if rec.branch_log.last().map(|e| &e.signature) != Some(&sig) {
            rec.branch_log.push(BranchEvent {
                t_bits: t.to_bits(),
                signature: sig,
            });
        }
    };

    let n = cfg.steps_per_interval;
    let mut stepper = Stepper::new(dae, cfg);
    let mut state = init;
    for i in 0..grid.n_s() {
        let u = grid.interval_values(i).to_vec();
        let seed = seed_matrix(grid, i);
        let tau = grid.breakpoint(i);
        let dt = grid.spacing() / n as f64;
        for j in 0..n {
            let t_next = if j + 1 == n {
                grid.breakpoint(i + 1)
            } else {
                tau + (j + 1) as f64 * dt
            };
            let out = stepper.step(&state, &u, &seed, t_next)?;
            if let Some(sig) = out.left_branches {
                log(state.t, sig, &mut rec);
            }
            log(t_next, out.right_branches, &mut rec);
            state = out.state;
            rec.t.push(state.t);
            rec.x.push(state.x.clone());
            rec.y.push(state.y.clone());
            rec.u.push(u.clone());
            if record_sens {
                rec.sens.push((state.sx.clone(), state.sy.clone()));
            }
        }
    }
    rec.final_state = state;
    Ok(rec)
}
