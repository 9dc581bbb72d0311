use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Physical parameters of the turbine, drive train, converter controls and
/// grid connection (per-unit unless noted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WtpsParams {
    pub w0: f64,
    #[serde(rename = "X_eq")]
    pub x_eq: f64,
    #[serde(rename = "D_tg")]
    pub d_tg: f64,
    #[serde(rename = "K_tg")]
    pub k_tg: f64,
    pub w_base: f64,
    #[serde(rename = "half_rho_Ar")]
    pub half_rho_ar: f64,
    #[serde(rename = "K_b")]
    pub k_b: f64,
    /// Turbine inertia constant.
    #[serde(rename = "H")]
    pub h: f64,
    /// Generator inertia constant.
    #[serde(rename = "H_g")]
    pub h_g: f64,
    #[serde(rename = "K_itrq")]
    pub k_itrq: f64,
    #[serde(rename = "T_pc")]
    pub t_pc: f64,
    #[serde(rename = "K_ptrq")]
    pub k_ptrq: f64,
    #[serde(rename = "T_pwr")]
    pub t_pwr: f64,
    #[serde(rename = "K_Qi")]
    pub k_qi: f64,
    #[serde(rename = "P_stl")]
    pub p_stl: f64,
    /// Upper clamp on the reference speed.
    pub w_ref_star: f64,
    #[serde(rename = "K_vi")]
    pub k_vi: f64,
    #[serde(rename = "R")]
    pub r: f64,
    /// Infinite-bus voltage.
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "X_l")]
    pub x_l: f64,
    #[serde(rename = "X_tr")]
    pub x_tr: f64,
    /// Power-factor angle in radians.
    #[serde(rename = "PFE")]
    pub pfe: f64,
}

impl Default for WtpsParams {
    fn default() -> Self {
        Self {
            w0: 1.0,
            x_eq: 0.8,
            d_tg: 1.5,
            k_tg: 1.11,
            w_base: 125.66,
            half_rho_ar: 0.00159,
            k_b: 56.6,
            h: 4.94,
            h_g: 0.62,
            k_itrq: 0.6,
            t_pc: 0.05,
            k_ptrq: 3.0,
            t_pwr: 0.05,
            k_qi: 0.1,
            p_stl: 1.0,
            w_ref_star: 1.2,
            k_vi: 40.0,
            r: 0.02,
            e: 1.0164,
            x_l: 0.0243,
            x_tr: 0.00557,
            pfe: 0.0,
        }
    }
}

impl WtpsParams {
    /// Line plus transformer reactance.
    pub fn x(&self) -> f64 {
        self.x_l + self.x_tr
    }

    /// Rejects non-finite entries. Physically meaningless but finite values
    /// (for example `X_eq = 0`) are left for model evaluation to report.
    pub fn validate(&self) -> Result<()> {
        let v = named_values(self);
        if let Some((name, value)) = v.into_iter().find(|(_, x)| !x.is_finite()) {
            return Err(Error::Config(format!("parameter {name} = {value} is not finite")));
        }
        Ok(())
    }
}

fn named_values(p: &WtpsParams) -> Vec<(&'static str, f64)> {
    vec![
        ("w0", p.w0),
        ("X_eq", p.x_eq),
        ("D_tg", p.d_tg),
        ("K_tg", p.k_tg),
        ("w_base", p.w_base),
        ("half_rho_Ar", p.half_rho_ar),
        ("K_b", p.k_b),
        ("H", p.h),
        ("H_g", p.h_g),
        ("K_itrq", p.k_itrq),
        ("T_pc", p.t_pc),
        ("K_ptrq", p.k_ptrq),
        ("T_pwr", p.t_pwr),
        ("K_Qi", p.k_qi),
        ("P_stl", p.p_stl),
        ("w_ref_star", p.w_ref_star),
        ("K_vi", p.k_vi),
        ("R", p.r),
        ("E", p.e),
        ("X_l", p.x_l),
        ("X_tr", p.x_tr),
        ("PFE", p.pfe),
    ]
}

/// Power-coefficient surface `Cp(theta, lambda) = sum alpha[i][j] theta^i lambda^j`
/// with `theta` the pitch in degrees and `lambda` the tip-speed ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpPoly {
    pub alpha: [[f64; 5]; 5],
}

impl Default for CpPoly {
    fn default() -> Self {
        Self {
            alpha: [
                [-4.1909e-1, 2.1808e-1, -1.2406e-2, -1.3365e-4, 1.1524e-5],
                [-6.7606e-2, 6.0405e-2, -1.3934e-2, 1.0683e-3, -2.3895e-5],
                [1.5727e-2, -1.0996e-2, 2.1495e-3, -1.4855e-4, 2.7937e-6],
                [-8.6018e-4, 5.7051e-4, -1.0479e-4, 5.9924e-6, -8.9194e-8],
                [1.4787e-5, -9.4839e-6, 1.6167e-6, -7.1535e-8, 4.9686e-10],
            ],
        }
    }
}

impl CpPoly {
    /// Nested Horner evaluation, outer in `theta`, inner in `lambda`.
    pub fn eval<T: Scalar>(&self, theta: &T, lambda: &T) -> T {
        let row = |i: usize| -> T {
            let a = &self.alpha[i];
            let mut acc = lambda.lift(a[4]);
            for j in (0..4).rev() {
                acc = acc * lambda.clone() + a[j];
            }
            acc
        };
        let mut acc = row(4);
        for i in (0..4).rev() {
            acc = acc * theta.clone() + row(i);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values_spot_check() {
        let p = WtpsParams::default();
        assert_eq!(p.half_rho_ar, 0.00159);
        assert_eq!(p.k_b, 56.6);
        assert!((p.x() - 0.02987).abs() < 1e-15);
        let cp = CpPoly::default();
        assert_eq!(cp.alpha[4][4], 4.9686e-10);
        assert_eq!(cp.alpha[0][0], -4.1909e-1);
        assert_eq!(cp.alpha[2][3], -1.4855e-4);
    }

    #[test]
    fn cp_at_origin_is_constant_term() {
        assert_eq!(CpPoly::default().eval(&0.0, &0.0), -0.41909);
    }
}
