//! Operating points: closed-form steady state refined by Newton, and the
//! pitch that holds a steady state at rated power.

use nalgebra::{DMatrix, DVector};

use super::model::{
    omega, pmech, w_ref_eval, WtpsModel, DTHETA_M, E_Q, E_QCMD, F1, I_PLV, P_1ELEC, P_INP, V_REF,
    W_G, W_T,
};
use super::params::{CpPoly, WtpsParams};
use super::wind::WindProfile;
use crate::error::{Error, Result};

/// Residual tolerance of the steady-state solve.
pub const STEADY_TOL: f64 = 1e-10;
/// Pitch range searched for the steady-state pitch, degrees.
pub const PITCH_RANGE: (f64, f64) = (0.0, 30.0);

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    /// Differential states including `x_aux = 0`.
    pub x: Vec<f64>,
    /// Terminal voltage.
    pub v: f64,
    pub theta: f64,
    pub v_wind: f64,
    /// Delivered power `P_elec = P_mech`.
    pub power: f64,
    /// Infinity norm of `(h_1..h_10, g)` at the returned point.
    pub residual: f64,
}

/// Steady power: the smallest root of `P = P_mech(theta, w_ref(P) - w0, v)`.
pub fn steady_power(params: &WtpsParams, cp: &CpPoly, v_wind: f64, theta: f64) -> Result<f64> {
    let f = |pw: f64| -> Result<f64> {
        let w_t = w_ref_eval(params, &pw) - params.w0;
        Ok(pmech(params, cp, &theta, &w_t, v_wind)? - pw)
    };
    let mut a = 0.0;
    let mut fa = f(a)?;
    if !fa.is_finite() {
        return Err(Error::Model("non-finite steady power balance".into()));
    }
    if fa <= 0.0 {
        return Err(Error::Init {
            residual: fa.abs(),
            iterations: 0,
        });
    }
    let step = 0.005;
    let mut b = a;
    let mut fb = fa;
    while fb > 0.0 {
        b += step;
        if b > 5.0 {
            return Err(Error::Init {
                residual: fb.abs(),
                iterations: 0,
            });
        }
        a = b - step;
        fa = f(a)?;
        fb = f(b)?;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        if fm > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let _ = fa;
    Ok(0.5 * (a + b))
}

/// Steady state of the model (states 1..10 and V) at constant wind and
/// pitch. The closed-form operating point is polished by Newton on the full
/// residual until its infinity norm is below [`STEADY_TOL`].
pub fn steady_state(params: &WtpsParams, cp: &CpPoly, v_wind: f64, theta: f64) -> Result<SteadyState> {
    params.validate()?;
    let pw = steady_power(params, cp, v_wind, theta)?;
    let w = w_ref_eval(params, &pw);
    let (r, xx, e) = (params.r, params.x(), params.e);
    let b = 2.0 * pw * r + e * e;
    let disc = b * b - 4.0 * (r * r + xx * xx) * pw * pw;
    if disc < 0.0 {
        return Err(Error::Model(format!(
            "no real terminal voltage for P = {pw} (network cannot carry it)"
        )));
    }
    let v = ((b + disc.sqrt()) / 2.0).sqrt();

    let mut z = vec![0.0; 11];
    z[W_G] = w - params.w0;
    z[W_T] = w - params.w0;
    z[DTHETA_M] = -pw / (w * params.k_tg);
    z[F1] = pw / (w * params.k_itrq);
    z[P_INP] = pw;
    z[P_1ELEC] = pw;
    z[V_REF] = v;
    z[E_QCMD] = v;
    z[E_Q] = v;
    z[I_PLV] = pw / v;
    z[10] = v;

    let model = WtpsModel::new(params.clone(), WindProfile::Constant(v_wind));
    let resid = |z: &[f64]| -> Result<DVector<f64>> {
        let r = model.steady_residual(0.0, theta, z)?;
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Model("non-finite steady-state residual".into()));
        }
        Ok(DVector::from_vec(r))
    };
    let mut f = resid(&z)?;
    let mut iterations = 0;
    while f.amax() > STEADY_TOL {
        if iterations == 50 {
            return Err(Error::Init {
                residual: f.amax(),
                iterations,
            });
        }
        let mut jac = DMatrix::zeros(11, 11);
        for j in 0..11 {
            let delta = f64::EPSILON.sqrt() * z[j].abs().max(1.0);
            let mut zp = z.clone();
            zp[j] += delta;
            jac.set_column(j, &((resid(&zp)? - &f) / delta));
        }
        let dz = jac.lu().solve(&f).ok_or(Error::Init {
            residual: f.amax(),
            iterations,
        })?;
        for (zi, d) in z.iter_mut().zip(dz.iter()) {
            *zi -= d;
        }
        f = resid(&z)?;
        iterations += 1;
    }
    let v = z[10];
    let mut x = z[..10].to_vec();
    x.push(0.0);
    Ok(SteadyState {
        x,
        v,
        theta,
        v_wind,
        power: pw,
        residual: f.amax(),
    })
}

/// Pitch in [`PITCH_RANGE`] whose steady state maximizes the objective
/// integrand: zero below rated wind, otherwise the pitch that brings the
/// steady power down to `P_stl` (steady power decreases with pitch).
pub fn steady_pitch(params: &WtpsParams, cp: &CpPoly, v_wind: f64) -> Result<f64> {
    let (lo, hi) = PITCH_RANGE;
    // no positive operating point at all counts as below rated
    let excess = |theta: f64| -> Result<f64> {
        match steady_power(params, cp, v_wind, theta) {
            Ok(pw) => Ok(pw - params.p_stl),
            Err(Error::Init { .. }) => Ok(-params.p_stl),
            Err(e) => Err(e),
        }
    };
    if excess(lo)? <= 0.0 {
        return Ok(lo);
    }
    let mut a = lo;
    let mut b = hi;
    if excess(b)? > 0.0 {
        return Ok(hi);
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if excess(m)? > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    // the bracket ends straddle the kink of omega; keep the better one
    let pick = |t: f64| -> Result<f64> { Ok(omega(params.p_stl, &(excess(t)? + params.p_stl))) };
    Ok(if pick(a)? >= pick(b)? { a } else { b })
}
