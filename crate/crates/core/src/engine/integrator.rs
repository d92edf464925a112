//! Explicit time integrators: forward Euler, classic RK4 and adaptive
//! Dormand-Prince 5(4).

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParamError, Result};
use crate::units::Seconds;

/// A first-order system `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn rhs(&mut self, t: Seconds, y: &[f64], dy: &mut [f64]) -> Result<()>;

    /// Human-readable name of slot `k`, used in error reports.
    fn slot_name(&self, k: usize) -> String {
        format!("y[{k}]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[serde(alias = "explicit-euler")]
    Euler,
    #[default]
    Rk4,
    #[serde(alias = "adaptive-rk45")]
    Rk45,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "euler" | "explicit-euler" => Ok(Method::Euler),
            "rk4" => Ok(Method::Rk4),
            "rk45" | "adaptive-rk45" => Ok(Method::Rk45),
            other => Err(format!("unknown method `{other}` (euler, rk4, rk45)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step, or the initial step of the adaptive method.
    pub dt: Seconds,
    pub rtol: f64,
    pub atol: f64,
    /// Smallest adaptive step before giving up.
    pub min_step: Seconds,
    /// Controller sampling and snapshot interval.
    pub output_interval: Seconds,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk4,
            dt: 60.0,
            rtol: 1e-6,
            atol: 1e-6,
            min_step: 1e-6,
            output_interval: 60.0,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Vec<ParamError> {
        let mut errs = Vec::new();
        for (name, v) in [
            ("dt", self.dt),
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("min_step", self.min_step),
            ("output_interval", self.output_interval),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(ParamError::new(name, "must be finite and > 0"));
            }
        }
        errs
    }
}

/// Integrator with reusable stage buffers. For the adaptive method the
/// last accepted step size carries over between calls.
#[derive(Debug, Clone)]
pub struct Stepper {
    config: IntegratorConfig,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    err: Vec<f64>,
    h: Seconds,
    /// Accepted and rejected steps so far.
    pub accepted: u64,
    pub rejected: u64,
}

// Dormand-Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

impl Stepper {
    pub fn new(config: IntegratorConfig, n: usize) -> Self {
        Self {
            config,
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            err: vec![0.0; n],
            h: config.dt,
            accepted: 0,
            rejected: 0,
        }
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.config
    }

    /// Integrates `y` in place from `t` to `t_end`.
    pub fn advance<S: OdeSystem + ?Sized>(
        &mut self,
        sys: &mut S,
        t: Seconds,
        y: &mut [f64],
        t_end: Seconds,
    ) -> Result<()> {
        match self.config.method {
            Method::Euler | Method::Rk4 => self.advance_fixed(sys, t, y, t_end),
            Method::Rk45 => self.advance_adaptive(sys, t, y, t_end),
        }
    }

    fn advance_fixed<S: OdeSystem + ?Sized>(
        &mut self,
        sys: &mut S,
        t0: Seconds,
        y: &mut [f64],
        t_end: Seconds,
    ) -> Result<()> {
        let span = t_end - t0;
        if span <= 0.0 {
            return Ok(());
        }
        // equal steps no longer than dt so that output times are hit exactly
        let steps = (span / self.config.dt - 1e-9).ceil().max(1.0) as u64;
        let h = span / steps as f64;
        for s in 0..steps {
            let t = t0 + s as f64 * h;
            match self.config.method {
                Method::Euler => self.euler_step(sys, t, y, h)?,
                _ => self.rk4_step(sys, t, y, h)?,
            }
            self.accepted += 1;
        }
        Ok(())
    }

    fn euler_step<S: OdeSystem + ?Sized>(&mut self, sys: &mut S, t: Seconds, y: &mut [f64], h: Seconds) -> Result<()> {
        sys.rhs(t, y, &mut self.k[0])?;
        for (yi, ki) in y.iter_mut().zip(&self.k[0]) {
            *yi += h * ki;
        }
        Ok(())
    }

    fn rk4_step<S: OdeSystem + ?Sized>(&mut self, sys: &mut S, t: Seconds, y: &mut [f64], h: Seconds) -> Result<()> {
        let [k1, k2, k3, k4, ..] = &mut self.k;
        let tmp = &mut self.tmp;
        sys.rhs(t, y, k1)?;
        for i in 0..y.len() {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        sys.rhs(t + 0.5 * h, tmp, k2)?;
        for i in 0..y.len() {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        sys.rhs(t + 0.5 * h, tmp, k3)?;
        for i in 0..y.len() {
            tmp[i] = y[i] + h * k3[i];
        }
        sys.rhs(t + h, tmp, k4)?;
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(())
    }

    fn advance_adaptive<S: OdeSystem + ?Sized>(
        &mut self,
        sys: &mut S,
        mut t: Seconds,
        y: &mut [f64],
        t_end: Seconds,
    ) -> Result<()> {
        let n = y.len();
        let cfg = self.config;
        while t_end - t > 1e-12 * t_end.abs().max(1.0) {
            let h = self.h.min(t_end - t);
            sys.rhs(t, y, &mut self.k[0])?;
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, a) in A[s].iter().enumerate().take(s) {
                        acc += h * a * self.k[j][i];
                    }
                    self.tmp[i] = acc;
                }
                sys.rhs(t + C[s] * h, &self.tmp, &mut self.k[s])?;
            }
            // tmp holds the 5th-order solution (FSAL row)
            let mut norm = 0.0;
            let mut worst = (0usize, 0.0f64);
            for i in 0..n {
                let mut e = 0.0;
                for s in 0..7 {
                    e += (B5[s] - B4[s]) * self.k[s][i];
                }
                e *= h;
                let scale = cfg.atol + cfg.rtol * y[i].abs().max(self.tmp[i].abs());
                let r = e / scale;
                self.err[i] = r;
                norm += r * r;
                if !(r.abs() <= worst.1) {
                    worst = (i, r.abs());
                }
            }
            let norm = (norm / n.max(1) as f64).sqrt();
            let factor = if norm == 0.0 {
                5.0
            } else if norm.is_finite() {
                (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                0.2
            };
            if norm <= 1.0 {
                y.copy_from_slice(&self.tmp);
                t += h;
                self.accepted += 1;
                // a step clipped to the interval end does not shrink the next one
                if h == self.h || factor < 1.0 {
                    self.h = h * factor;
                }
            } else {
                self.rejected += 1;
                self.h = h * factor.min(1.0);
                if self.h < cfg.min_step {
                    return Err(Error::StepUnderflow {
                        slot: sys.slot_name(worst.0),
                        t,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Snapshots of an integration run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<Seconds>,
    pub states: Vec<Vec<f64>>,
}

/// Integrates over `duration` and calls `hook` at every output boundary,
/// including the start and the end. The hook may change the system (held
/// controls) but not the state.
pub fn integrate_with<S, H>(
    sys: &mut S,
    y0: &[f64],
    t0: Seconds,
    duration: Seconds,
    config: &IntegratorConfig,
    mut hook: H,
) -> Result<Vec<f64>>
where
    S: OdeSystem + ?Sized,
    H: FnMut(&mut S, Seconds, &[f64]) -> Result<()>,
{
    let mut y = y0.to_vec();
    let mut stepper = Stepper::new(*config, y.len());
    let intervals = if duration > 0.0 {
        (duration / config.output_interval - 1e-9).ceil() as u64
    } else {
        0
    };
    hook(sys, t0, &y)?;
    for k in 0..intervals {
        let a = t0 + k as f64 * config.output_interval;
        let b = (t0 + (k + 1) as f64 * config.output_interval).min(t0 + duration);
        stepper.advance(sys, a, &mut y, b)?;
        hook(sys, b, &y)?;
    }
    Ok(y)
}

/// Like [`integrate_with`], recording every output snapshot.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &mut S,
    y0: &[f64],
    t0: Seconds,
    duration: Seconds,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    let mut traj = Trajectory::default();
    integrate_with(sys, y0, t0, duration, config, |_, t, y| {
        traj.times.push(t);
        traj.states.push(y.to_vec());
        Ok(())
    })?;
    Ok(traj)
}
