//! Dormand-Prince 5(4) with the 4th-order continuous extension, used to
//! sample solutions onto a uniform grid.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::BenchmarkSystem;
use crate::error::{Error, Result};
use crate::types::{Provenance, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the internal step; `None` means the whole span.
    pub max_step: Option<f64>,
    /// First trial step; `None` uses the usual derivative-based estimate.
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: None,
            initial_step: None,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidArgument("integrator tolerances must be positive".into()));
        }
        if matches!(self.max_step, Some(h) if !(h > 0.0)) {
            return Err(Error::InvalidArgument("max_step must be positive".into()));
        }
        if matches!(self.initial_step, Some(h) if !(h > 0.0)) {
            return Err(Error::InvalidArgument("initial_step must be positive".into()));
        }
        Ok(())
    }
}


const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Integrates `sys` from `ic` and returns `num_samples` uniform samples on
/// `[t0, tf]`.
pub fn integrate(
    sys: &BenchmarkSystem,
    ic: &[f64],
    t_span: (f64, f64),
    num_samples: usize,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    if ic.len() != sys.state_dim() {
        return Err(Error::Dimension(format!(
            "initial condition has {} entries, `{}` has S={}",
            ic.len(),
            sys.id(),
            sys.state_dim()
        )));
    }
    let data = integrate_fn(|x, dx| sys.rhs(x, dx), ic, t_span, num_samples, settings)?;
    let dt = (t_span.1 - t_span.0) / (num_samples - 1) as f64;
    Trajectory::from_flat(ic.len(), data, dt, t_span.0, Provenance::Clean)
}

/// Same as [`integrate`] for any autonomous right-hand side; returns the
/// row-major samples.
pub fn integrate_fn<F>(
    rhs: F,
    ic: &[f64],
    t_span: (f64, f64),
    num_samples: usize,
    settings: &IntegratorSettings,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut out = Vec::with_capacity(num_samples * ic.len());
    integrate_with(rhs, ic, t_span, num_samples, settings, |_, x| {
        out.extend_from_slice(x);
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

/// Drives the integrator and hands each uniform sample to `on_sample`;
/// returning `Break` stops early. Returns the number of samples delivered.
pub fn integrate_with<F, G>(
    mut rhs: F,
    ic: &[f64],
    t_span: (f64, f64),
    num_samples: usize,
    settings: &IntegratorSettings,
    mut on_sample: G,
) -> Result<usize>
where
    F: FnMut(&[f64], &mut [f64]),
    G: FnMut(usize, &[f64]) -> ControlFlow<()>,
{
    settings.validate()?;
    let (t0, tf) = t_span;
    if !(t0.is_finite() && tf.is_finite() && tf > t0) {
        return Err(Error::InvalidArgument(format!(
            "time span must satisfy t0 < tf, got [{t0}, {tf}]"
        )));
    }
    if num_samples < 2 {
        return Err(Error::InvalidArgument("num_samples must be >= 2".into()));
    }
    if ic.is_empty() || ic.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("initial condition must be finite and non-empty".into()));
    }

    let n = ic.len();
    let span = tf - t0;
    let dt = span / (num_samples - 1) as f64;
    let sample_time = |i: usize| {
        if i + 1 == num_samples {
            tf
        } else {
            t0 + i as f64 * dt
        }
    };
    let max_step = settings.max_step.unwrap_or(span).min(span);

    let mut y = ic.to_vec();
    let mut k1 = vec![0.0; n];
    rhs(&y, &mut k1);
    if k1.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integration {
            t: t0,
            reason: "non-finite derivative at the initial condition".into(),
        });
    }

    if on_sample(0, &y).is_break() {
        return Ok(1);
    }
    let mut next_sample = 1;

    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut dense = vec![0.0; n];
    let mut rcont = vec![[0.0; 5]; n];

    let mut t = t0;
    let mut h = settings
        .initial_step
        .unwrap_or_else(|| initial_step(&mut rhs, &y, &k1, settings, max_step))
        .min(max_step);
    let mut rejected_last = false;
    let mut steps = 0usize;

    while next_sample < num_samples {
        steps += 1;
        if steps > settings.max_steps {
            return Err(Error::Integration {
                t,
                reason: format!("exceeded {} steps", settings.max_steps),
            });
        }
        if h < 16.0 * f64::EPSILON * t.abs().max(span) {
            return Err(Error::Integration {
                t,
                reason: format!("step size underflow (h = {h:e})"),
            });
        }
        let last = t + h >= tf;
        if last {
            h = tf - t;
        }

        for i in 0..n {
            stage[i] = y[i] + h * A21 * k1[i];
        }
        rhs(&stage, &mut k2);
        for i in 0..n {
            stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(&stage, &mut k3);
        for i in 0..n {
            stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(&stage, &mut k4);
        for i in 0..n {
            stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(&stage, &mut k5);
        for i in 0..n {
            stage[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(&stage, &mut k6);
        for i in 0..n {
            y_new[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(&y_new, &mut k7);

        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sk = settings.abs_tol + settings.rel_tol * y[i].abs().max(y_new[i].abs());
            err += (e / sk).powi(2);
        }
        let err = (err / n as f64).sqrt();

        if !err.is_finite() {
            h *= FAC_MIN;
            rejected_last = true;
            continue;
        }

        if err <= 1.0 {
            let t_new = if last { tf } else { t + h };
            let mut fac = SAFETY * err.powf(-0.2);
            fac = fac.clamp(FAC_MIN, if rejected_last { 1.0 } else { FAC_MAX });

            // Emit every sample inside (t, t_new].
            let mut have_dense = false;
            while next_sample < num_samples && sample_time(next_sample) <= t_new {
                let ts = sample_time(next_sample);
                let flow = if ts == t_new {
                    on_sample(next_sample, &y_new)
                } else {
                    if !have_dense {
                        for i in 0..n {
                            let ydiff = y_new[i] - y[i];
                            let bspl = h * k1[i] - ydiff;
                            rcont[i] = [
                                y[i],
                                ydiff,
                                bspl,
                                ydiff - h * k7[i] - bspl,
                                h * (D1 * k1[i]
                                    + D3 * k3[i]
                                    + D4 * k4[i]
                                    + D5 * k5[i]
                                    + D6 * k6[i]
                                    + D7 * k7[i]),
                            ];
                        }
                        have_dense = true;
                    }
                    let theta = (ts - t) / h;
                    let theta1 = 1.0 - theta;
                    for i in 0..n {
                        let r = &rcont[i];
                        dense[i] =
                            r[0] + theta * (r[1] + theta1 * (r[2] + theta * (r[3] + theta1 * r[4])));
                    }
                    on_sample(next_sample, &dense)
                };
                next_sample += 1;
                if flow.is_break() {
                    return Ok(next_sample);
                }
            }

            if k7.iter().any(|v| !v.is_finite()) {
                return Err(Error::Integration {
                    t: t_new,
                    reason: "non-finite derivative".into(),
                });
            }
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            h = (h * fac).min(max_step);
            rejected_last = false;
        } else {
            let fac = (SAFETY * err.powf(-0.2)).max(FAC_MIN);
            h *= fac;
            rejected_last = true;
        }
    }
    Ok(next_sample)
}

/// Starting step from the size of `f(y0)` and a finite-difference estimate
/// of the second derivative.
fn initial_step<F>(
    rhs: &mut F,
    y0: &[f64],
    f0: &[f64],
    settings: &IntegratorSettings,
    max_step: f64,
) -> f64
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = y0.len();
    let sk: Vec<f64> = y0
        .iter()
        .map(|v| settings.abs_tol + settings.rel_tol * v.abs())
        .collect();
    let rms = |v: &mut dyn Iterator<Item = f64>| (v.map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    let d0 = rms(&mut y0.iter().zip(&sk).map(|(y, s)| y / s));
    let d1 = rms(&mut f0.iter().zip(&sk).map(|(f, s)| f / s));
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(max_step);

    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; n];
    rhs(&y1, &mut f1);
    let d2 = rms(&mut f1.iter().zip(f0).zip(&sk).map(|((a, b), s)| (a - b) / s)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    let h = (100.0 * h0).min(h1).min(max_step);
    if h.is_finite() && h > 0.0 {
        h
    } else {
        1e-6_f64.min(max_step)
    }
}
