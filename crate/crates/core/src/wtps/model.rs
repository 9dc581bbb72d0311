use serde::{Deserialize, Serialize};

use super::params::{CpPoly, WtpsParams};
use super::wind::WindProfile;
use crate::dae::SemiExplicitDae;
use crate::error::{Error, Result};
use crate::scalar::{soft_min, Scalar};

/// Differential state names, in storage order.
pub const STATE_NAMES: [&str; 11] = [
    "w_g", "w_t", "dtheta_m", "f1", "P_inp", "P_1elec", "V_ref", "E_qcmd", "E_q", "I_plv", "x_aux",
];

pub const W_G: usize = 0;
pub const W_T: usize = 1;
pub const DTHETA_M: usize = 2;
pub const F1: usize = 3;
pub const P_INP: usize = 4;
pub const P_1ELEC: usize = 5;
pub const V_REF: usize = 6;
pub const E_QCMD: usize = 7;
pub const E_Q: usize = 8;
pub const I_PLV: usize = 9;
pub const X_AUX: usize = 10;

/// Converter time constant of the `E_q` and `I_plv` lags, seconds.
const LAG: f64 = 0.02;

/// Tip-speed ratio `K_b (w_t + w0) / v`.
pub fn tip_ratio<T: Scalar>(p: &WtpsParams, w_t: &T, v_wind: f64) -> T {
    (w_t.clone() + p.w0) * (p.k_b / v_wind)
}

/// Mechanical power `half_rho_Ar Cp(theta, lambda) v^3`.
pub fn pmech<T: Scalar>(p: &WtpsParams, cp: &CpPoly, theta: &T, w_t: &T, v_wind: f64) -> Result<T> {
    if !(v_wind > 0.0) {
        return Err(Error::Model(format!("wind speed must be positive, got {v_wind}")));
    }
    let lambda = tip_ratio(p, w_t, v_wind);
    Ok(cp.eval(theta, &lambda) * (p.half_rho_ar * v_wind.powi(3)))
}

/// Speed reference `min(-0.75 P^2 + 1.59 P + 0.63, w_ref_star)`.
pub fn w_ref_eval<T: Scalar>(p: &WtpsParams, p_elec: &T) -> T {
    let quad = (p_elec.clone() * -0.75 + 1.59) * p_elec.clone() + 0.63;
    quad.min(&p_elec.lift(p.w_ref_star))
}

/// Electrical power at which the speed reference saturates: the smaller root
/// of `-0.75 P^2 + 1.59 P + 0.63 = w_ref_star`.
pub fn w_ref_kink(p: &WtpsParams) -> f64 {
    let (a, b, c) = (-0.75, 1.59, 0.63 - p.w_ref_star);
    let disc = (b * b - 4.0 * a * c).sqrt();
    // roots (-b +- disc) / 2a with a < 0: the smaller one uses +disc
    (-b + disc) / (2.0 * a)
}

/// Objective integrand `min(P_stl, P) - min(0, P_stl - P) (P_stl - P)`.
pub fn omega<T: Scalar>(p_stl: f64, p_mech: &T) -> T {
    let stl = p_mech.lift(p_stl);
    let gap = stl.clone() - p_mech.clone();
    stl.min(p_mech) - gap.lift(0.0).min(&gap) * gap.clone()
}

/// `omega` with both minima replaced by the log-sum-exp approximation of
/// sharpness `n`.
pub fn omega_smoothed<T: Scalar>(p_stl: f64, p_mech: &T, n: f64) -> T {
    let stl = p_mech.lift(p_stl);
    let gap = stl.clone() - p_mech.clone();
    soft_min(&stl, p_mech, n) - soft_min(&gap.lift(0.0), &gap, n) * gap.clone()
}

/// Which integrand accumulates into `x_aux`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    Nonsmooth,
    Smoothed { n: f64 },
}

impl Objective {
    pub fn eval<T: Scalar>(&self, p_stl: f64, p_mech: &T) -> T {
        match self {
            Self::Nonsmooth => omega(p_stl, p_mech),
            Self::Smoothed { n } => omega_smoothed(p_stl, p_mech, *n),
        }
    }
}

/// The wind-turbine power system as a semi-explicit DAE with the pitch angle
/// (degrees) as control and the terminal voltage as algebraic variable.
#[derive(Debug, Clone)]
pub struct WtpsModel {
    pub params: WtpsParams,
    pub cp: CpPoly,
    pub wind: WindProfile,
    pub objective: Objective,
}

/// Intermediate quantities along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs<T> {
    pub p_elec: T,
    pub q_gen: T,
    pub q_cmd: T,
    pub w_ref: T,
    pub p_mech: T,
    pub v_wind: f64,
}

impl WtpsModel {
    pub fn new(params: WtpsParams, wind: WindProfile) -> Self {
        Self {
            params,
            cp: CpPoly::default(),
            wind,
            objective: Objective::Nonsmooth,
        }
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    pub fn outputs<T: Scalar>(&self, t: f64, theta: &T, x: &[T], y: &[T]) -> Result<Outputs<T>> {
        let p = &self.params;
        let v_wind = self.wind.eval(t)?;
        let v = &y[0];
        let p_elec = x[I_PLV].clone() * v.clone();
        let q_gen = v.clone() * (x[E_Q].clone() - v.clone()) / p.x_eq;
        let q_cmd = x[P_1ELEC].clone() * p.pfe.tan();
        let w_ref = w_ref_eval(p, &p_elec);
        let p_mech = pmech(p, &self.cp, theta, &x[W_T], v_wind)?;
        Ok(Outputs {
            p_elec,
            q_gen,
            q_cmd,
            w_ref,
            p_mech,
            v_wind,
        })
    }

    /// Differential right-hand side; `x` may have 10 entries (no accumulator)
    /// or 11.
    fn rhs_impl<T: Scalar>(&self, t: f64, theta: &T, x: &[T], y: &[T]) -> Result<Vec<T>> {
        let p = &self.params;
        let o = self.outputs(t, theta, x, y)?;
        let v = &y[0];
        let wg = x[W_G].clone() + p.w0;
        let wt = x[W_T].clone() + p.w0;
        let slip = x[W_G].clone() - x[W_T].clone();
        let shaft = slip.clone() * p.d_tg + x[DTHETA_M].clone() * p.k_tg;
        let speed_err = wg.clone() - o.w_ref.clone();

        let mut h = Vec::with_capacity(x.len());
        h.push((-(o.p_elec.clone() / wg.clone()) - shaft.clone()) / (2.0 * p.h_g));
        h.push((o.p_mech.clone() / wt + shaft) / (2.0 * p.h));
        h.push(slip * p.w_base);
        h.push(speed_err.clone());
        h.push(
            (wg * (speed_err * p.k_ptrq + x[F1].clone() * p.k_itrq) - x[P_INP].clone()) / p.t_pc,
        );
        h.push((o.p_elec - x[P_1ELEC].clone()) / p.t_pwr);
        h.push((o.q_cmd - o.q_gen) * p.k_qi);
        h.push((x[V_REF].clone() - v.clone()) * p.k_vi);
        h.push((x[E_QCMD].clone() - x[E_Q].clone()) / LAG);
        h.push((x[P_INP].clone() / v.clone() - x[I_PLV].clone()) / LAG);
        if x.len() > X_AUX {
            h.push(self.objective.eval(p.p_stl, &o.p_mech));
        }
        Ok(h)
    }

    /// Network equation relating terminal voltage to the injected powers.
    fn alg_impl<T: Scalar>(&self, x: &[T], y: &[T]) -> Vec<T> {
        let p = &self.params;
        let v = &y[0];
        let p_elec = x[I_PLV].clone() * v.clone();
        let q_gen = v.clone() * (x[E_Q].clone() - v.clone()) / p.x_eq;
        let xx = p.x();
        let v2 = v.clone() * v.clone();
        let coupling = (p_elec.clone() * p.r + q_gen.clone() * xx) * 2.0 + p.e * p.e;
        vec![
            v2.clone() * v2.clone() - coupling * v2
                + (p_elec.clone() * p_elec + q_gen.clone() * q_gen) * (p.r * p.r + xx * xx),
        ]
    }

    /// Steady-state residual `(h_1..h_10, g)` in the unknowns
    /// `(x_1..x_10, V)`.
    pub fn steady_residual(&self, t: f64, theta: f64, z: &[f64]) -> Result<Vec<f64>> {
        let (x, y) = z.split_at(10);
        let mut r = self.rhs_impl(t, &theta, x, y)?;
        r.extend(self.alg_impl(x, y));
        Ok(r)
    }
}

impl SemiExplicitDae for WtpsModel {
    fn n_x(&self) -> usize {
        11
    }

    fn n_y(&self) -> usize {
        1
    }

    fn n_u(&self) -> usize {
        1
    }

    fn rhs<T: Scalar>(&self, t: f64, u: &[T], x: &[T], y: &[T]) -> Result<Vec<T>> {
        self.rhs_impl(t, &u[0], x, y)
    }

    fn alg<T: Scalar>(&self, _t: f64, x: &[T], y: &[T]) -> Result<Vec<T>> {
        Ok(self.alg_impl(x, y))
    }
}
