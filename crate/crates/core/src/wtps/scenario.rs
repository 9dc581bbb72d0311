use std::io::Write;

use super::model::{omega, pmech, Objective, WtpsModel, W_T};
use super::params::{CpPoly, WtpsParams};
use super::steady::{steady_pitch, steady_state, SteadyState, PITCH_RANGE};
use super::wind::WindProfile;
use crate::dae::{IntegratorConfig, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::ocp::{OcpProblem, Sense};

/// Pitch-control problem over `[t0, tf]`: start from the steady state at the
/// initial wind speed and maximize the accumulated objective integrand.
#[derive(Debug, Clone)]
pub struct WtpsScenario {
    pub params: WtpsParams,
    pub cp: CpPoly,
    pub wind: WindProfile,
    pub t0: f64,
    pub tf: f64,
    pub n_s: usize,
    pub objective: Objective,
    pub integrator: IntegratorConfig,
    /// Pitch bounds in degrees.
    pub theta_bounds: (f64, f64),
}

impl WtpsScenario {
    pub fn new(params: WtpsParams, wind: WindProfile, t0: f64, tf: f64, n_s: usize) -> Self {
        Self {
            params,
            cp: CpPoly::default(),
            wind,
            t0,
            tf,
            n_s,
            objective: Objective::Nonsmooth,
            integrator: IntegratorConfig::default(),
            theta_bounds: PITCH_RANGE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tf >= self.t0) {
            return Err(Error::Config(format!(
                "horizon end {} precedes start {}",
                self.tf, self.t0
            )));
        }
        if self.n_s == 0 {
            return Err(Error::Config("n_s must be at least 1".into()));
        }
        let (lo, hi) = self.theta_bounds;
        if !(lo <= hi) {
            return Err(Error::Config("pitch lower bound exceeds upper bound".into()));
        }
        if let Objective::Smoothed { n } = self.objective {
            if !(n > 0.0) {
                return Err(Error::Config(format!("smoothing parameter must be positive, got {n}")));
            }
        }
        self.params.validate()?;
        self.integrator.validate()?;
        self.wind.covers(self.t0, self.tf)
    }

    pub fn model(&self) -> WtpsModel {
        WtpsModel {
            params: self.params.clone(),
            cp: self.cp.clone(),
            wind: self.wind.clone(),
            objective: self.objective,
        }
    }

    /// Steady state at the initial wind speed and its steady-state pitch.
    pub fn initial_state(&self) -> Result<SteadyState> {
        let v = self.wind.eval(self.t0)?;
        let theta = steady_pitch(&self.params, &self.cp, v)?
            .clamp(self.theta_bounds.0, self.theta_bounds.1);
        steady_state(&self.params, &self.cp, v, theta)
    }

    /// Pitch held at its initial steady-state value on every subinterval.
    pub fn initial_guess(&self) -> Result<Vec<f64>> {
        Ok(vec![self.initial_state()?.theta; self.n_s])
    }

    pub fn problem(&self) -> Result<OcpProblem<WtpsModel>> {
        self.validate()?;
        let ss = self.initial_state()?;
        Ok(OcpProblem {
            dae: self.model(),
            x0: ss.x,
            y_guess: vec![ss.v],
            t0: self.t0,
            tf: self.tf,
            n_s: self.n_s,
            lower: vec![self.theta_bounds.0],
            upper: vec![self.theta_bounds.1],
            terminal_constraints: Vec::new(),
            sense: Sense::Maximize,
            integrator: self.integrator.clone(),
        })
    }
}

pub const TRAJECTORY_HEADER: &str =
    "t,w_g,w_t,dtheta_m,f1,P_inp,P_1elec,V_ref,E_qcmd,E_q,I_plv,x_aux,V,u,P_mech,omega";

/// One sample of a simulated trajectory with derived quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: f64,
    pub u: f64,
    pub v_wind: f64,
    pub p_mech: f64,
    /// Nonsmooth integrand, whatever objective the run optimized.
    pub omega: f64,
}

impl TrajectoryRow {
    pub fn write_csv<W: Write>(rows: &[TrajectoryRow], mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        for r in rows {
            let mut cells = vec![r.t.to_string()];
            cells.extend(r.x.iter().map(f64::to_string));
            cells.push(r.v.to_string());
            cells.push(r.u.to_string());
            cells.push(r.p_mech.to_string());
            cells.push(r.omega.to_string());
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Evaluate mechanical power and the nonsmooth integrand at every sample.
pub fn trajectory_table(model: &WtpsModel, traj: &TrajectoryRecord) -> Result<Vec<TrajectoryRow>> {
    (0..traj.len())
        .map(|k| {
            let t = traj.t[k];
            let u = traj.u[k][0];
            let v_wind = model.wind.eval(t)?;
            let p_mech = pmech(&model.params, &model.cp, &u, &traj.x[k][W_T], v_wind)?;
            Ok(TrajectoryRow {
                t,
                x: traj.x[k].clone(),
                v: traj.y[k][0],
                u,
                v_wind,
                p_mech,
                omega: omega(model.params.p_stl, &p_mech),
            })
        })
        .collect()
}
