//! Wind speed profiles: a generalized ramp, a Gaussian gust, and sampled data
//! with piecewise-linear interpolation.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Wind speed `v(t)` in m/s.
#[derive(Debug, Clone, PartialEq)]
pub enum WindProfile {
    Constant(f64),
    /// `v0 + m (max(0, t - t_on) - max(0, t - t_off))`.
    Ramp { v0: f64, m: f64, t_on: f64, t_off: f64 },
    /// `v0 + exp(-((t - mu)/sigma)^2 / 2) / (sigma sqrt(2 pi))`.
    Gaussian { v0: f64, mu: f64, sigma: f64 },
    Sampled(SampledWind),
}

impl WindProfile {
    /// Ramp from `v0` to `v_f` between `t_on` and `t_off`.
    pub fn ramp(v0: f64, v_f: f64, t_on: f64, t_off: f64) -> Result<Self> {
        if !(t_off > t_on) {
            return Err(Error::Config(format!(
                "ramp needs t_off > t_on, got t_on = {t_on}, t_off = {t_off}"
            )));
        }
        Ok(Self::Ramp {
            v0,
            m: (v_f - v0) / (t_off - t_on),
            t_on,
            t_off,
        })
    }

    pub fn gaussian(v0: f64, mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::Config(format!("gaussian sigma must be positive, got {sigma}")));
        }
        Ok(Self::Gaussian { v0, mu, sigma })
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.eval_scalar(&t)
    }

    /// Evaluation on any scalar; with an LD-lifted `t` the result carries
    /// `dv/dt` along the directions of `t`.
    pub fn eval_scalar<T: Scalar>(&self, t: &T) -> Result<T> {
        match self {
            Self::Constant(v) => Ok(t.lift(*v)),
            Self::Ramp { v0, m, t_on, t_off } => {
                let zero = t.lift(0.0);
                let on = (t.clone() - *t_on).max(&zero);
                let off = (t.clone() - *t_off).max(&zero);
                Ok((on - off) * *m + *v0)
            }
            Self::Gaussian { v0, mu, sigma } => {
                let z = (t.clone() - *mu) / *sigma;
                let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                Ok((z.clone() * z * -0.5).exp() * norm + *v0)
            }
            Self::Sampled(s) => s.eval_scalar(t),
        }
    }

    /// Check that the profile can be evaluated on `[t0, tf]`.
    pub fn covers(&self, t0: f64, tf: f64) -> Result<()> {
        match self {
            Self::Sampled(s) => {
                s.eval(t0)?;
                s.eval(tf)?;
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Time/speed table, strictly increasing in time.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledWind {
    t: Vec<f64>,
    v: Vec<f64>,
}

impl SampledWind {
    pub fn new(t: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if t.len() != v.len() {
            return Err(Error::Data(format!(
                "time and speed columns differ in length ({} vs {})",
                t.len(),
                v.len()
            )));
        }
        if t.len() < 2 {
            return Err(Error::Data("wind table needs at least two samples".into()));
        }
        if let Some(i) = t.iter().chain(&v).position(|x| !x.is_finite()) {
            return Err(Error::Data(format!("non-finite entry at position {i}")));
        }
        if let Some(i) = t.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Data(format!(
                "time column not strictly increasing at row {} ({} then {})",
                i + 2,
                t[i],
                t[i + 1]
            )));
        }
        if let Some(i) = v.iter().position(|x| !(*x > 0.0)) {
            return Err(Error::Data(format!(
                "wind speed must be positive, row {} has {}",
                i + 1,
                v[i]
            )));
        }
        Ok(Self { t, v })
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn speeds(&self) -> &[f64] {
        &self.v
    }

    pub fn span(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.eval_scalar(&t)
    }

    pub fn eval_scalar<T: Scalar>(&self, t: &T) -> Result<T> {
        let tv = t.value();
        let (lo, hi) = self.span();
        if !(tv >= lo && tv <= hi) {
            return Err(Error::Range {
                what: "wind sample time",
                value: tv,
                lo,
                hi,
            });
        }
        // last segment start not after tv
        let k = self.t.partition_point(|x| *x <= tv).clamp(1, self.t.len() - 1) - 1;
        let slope = (self.v[k + 1] - self.v[k]) / (self.t[k + 1] - self.t[k]);
        Ok((t.clone() - self.t[k]) * slope + self.v[k])
    }

    /// Parse `t_seconds,v_mps` rows; a non-numeric first row is taken as a
    /// header.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut t = Vec::new();
        let mut v = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
            if rec.len() != 2 {
                return Err(Error::Data(format!(
                    "row {} has {} columns, expected 2",
                    row + 1,
                    rec.len()
                )));
            }
            let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
            match parsed {
                (Ok(a), Ok(b)) => {
                    t.push(a);
                    v.push(b);
                }
                _ if row == 0 => continue,
                _ => {
                    return Err(Error::Data(format!(
                        "row {} is not numeric: {:?}",
                        row + 1,
                        rec.iter().collect::<Vec<_>>()
                    )))
                }
            }
        }
        Self::new(t, v)
    }

    /// Write with a `t_seconds,v_mps` header using shortest round-trip float
    /// formatting, so write-read-write is byte-identical.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t_seconds,v_mps")?;
        for (a, b) in self.t.iter().zip(&self.v) {
            writeln!(w, "{a},{b}")?;
        }
        Ok(())
    }
}

/// Parameters of the synthetic turbulent series shipped in place of measured
/// data: an Ornstein-Uhlenbeck process around `mean` with correlation time
/// `tau`, rounded to 0.01 m/s.
#[derive(Debug, Clone, PartialEq)]
pub struct TurbulenceSpec {
    pub seed: u64,
    pub t0: f64,
    pub dt: f64,
    pub samples: usize,
    pub mean: f64,
    /// Stationary standard deviation, m/s.
    pub std_dev: f64,
    /// Correlation time, s.
    pub tau: f64,
}

impl Default for TurbulenceSpec {
    fn default() -> Self {
        Self {
            seed: 20_240_425,
            t0: 0.0,
            dt: 0.1,
            samples: 851,
            mean: 11.6,
            std_dev: 0.8,
            tau: 4.0,
        }
    }
}

/// Deterministic synthetic turbulent wind series.
pub fn synthetic_turbulence(spec: &TurbulenceSpec) -> Result<SampledWind> {
    if spec.samples < 2 || !(spec.dt > 0.0 && spec.tau > 0.0 && spec.std_dev >= 0.0) {
        return Err(Error::Config("invalid turbulence settings".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = (-spec.dt / spec.tau).exp();
    let b = spec.std_dev * (1.0 - a * a).sqrt();
    let mut dev = 0.0f64;
    let mut t = Vec::with_capacity(spec.samples);
    let mut v = Vec::with_capacity(spec.samples);
    for k in 0..spec.samples {
        t.push(((spec.t0 + k as f64 * spec.dt) * 1e6).round() / 1e6);
        v.push(((spec.mean + dev) * 100.0).round() / 100.0);
        let xi: f64 = StandardNormal.sample(&mut rng);
        dev = a * dev + b * xi;
    }
    SampledWind::new(t, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_before_during_after() {
        let w = WindProfile::ramp(10.0, 12.0, 19.0, 21.0).unwrap();
        assert_eq!(w.eval(18.0).unwrap(), 10.0);
        assert_eq!(w.eval(20.0).unwrap(), 11.0);
        assert_eq!(w.eval(22.0).unwrap(), 12.0);
    }

    #[test]
    fn gaussian_peak() {
        let w = WindProfile::gaussian(10.0, 20.0, 0.5).unwrap();
        let expect = 10.0 + 1.0 / (0.5 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((w.eval(20.0).unwrap() - expect).abs() < 1e-14);
        assert!((w.eval(20.0).unwrap() - 10.7979).abs() < 1e-4);
    }

    #[test]
    fn sampled_interpolates_and_rejects_outside() {
        let s = SampledWind::new(vec![0.0, 1.0, 3.0], vec![10.0, 12.0, 11.0]).unwrap();
        assert_eq!(s.eval(0.5).unwrap(), 11.0);
        assert_eq!(s.eval(3.0).unwrap(), 11.0);
        assert_eq!(s.eval(2.0).unwrap(), 11.5);
        assert!(matches!(s.eval(3.5), Err(Error::Range { .. })));
        assert!(matches!(s.eval(-0.1), Err(Error::Range { .. })));
    }

    #[test]
    fn non_monotone_time_rejected() {
        let err = SampledWind::read_csv("t,v\n0,10\n2,11\n1,12\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Data(_)), "{err:?}");
    }

    #[test]
    fn headerless_csv_accepted() {
        let s = SampledWind::read_csv("0,10\n1,11\n".as_bytes()).unwrap();
        assert_eq!(s.times(), &[0.0, 1.0]);
    }

    #[test]
    fn turbulence_is_deterministic() {
        let a = synthetic_turbulence(&TurbulenceSpec::default()).unwrap();
        let b = synthetic_turbulence(&TurbulenceSpec::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.times().len(), 851);
    }
}
