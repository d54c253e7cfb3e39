//! Explicit Runge-Kutta-Merson integration with automatic step control.
//!
//! Stages are evaluated at `t + {0, 1/3, 1/3, 1/2, 1} dt`. The update is
//! `y + dt (k1 + 4 k4 + k5) / 6` and the local error estimate is
//! `dt |2 k1 - 9 k3 + 8 k4 - k5| / 30`, reduced over all state entries.
//! By default ([`ErrorScale::UnitTime`]) the estimate is divided by `dt`
//! before it is compared with the tolerance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ErrorNorm {
    #[default]
    Max,
    Rms,
}

/// What the tolerance bounds: the error of one step, or that error per
/// unit time. The latter keeps stiff high-frequency noise well below `tol`
/// when steps are limited by stability rather than accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ErrorScale {
    Step,
    #[default]
    UnitTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub tol: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Multiplier on the optimal step factor.
    pub safety: f64,
    /// Lower clamp of the step factor.
    pub min_factor: f64,
    /// Upper clamp of the step factor.
    pub max_factor: f64,
    pub norm: ErrorNorm,
    pub error_scale: ErrorScale,
}

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_DT_MIN: f64 = 1e-12;
pub const DEFAULT_DT_MAX: f64 = 1e-2;

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            dt_init: 1e-4,
            dt_min: DEFAULT_DT_MIN,
            dt_max: DEFAULT_DT_MAX,
            safety: 0.8,
            min_factor: 0.1,
            max_factor: 5.0,
            norm: ErrorNorm::Max,
            error_scale: ErrorScale::UnitTime,
        }
    }
}

impl IntegratorConfig {
    /// Defaults with the initial step `4 h^2`, `h = 1 / m`.
    pub fn for_mesh(m: usize) -> Self {
        let h = 1.0 / m as f64;
        Self {
            dt_init: 4.0 * h * h,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = self.tol > 0.0
            && self.dt_min > 0.0
            && self.dt_min <= self.dt_init
            && self.dt_init <= self.dt_max
            && self.safety > 0.0
            && self.min_factor > 0.0
            && self.min_factor <= 1.0
            && self.max_factor >= 1.0;
        if ok {
            Ok(())
        } else {
            Err(format!(
                "need tol > 0 and 0 < dt_min <= dt_init <= dt_max and sane step factors, got {self:?}"
            ))
        }
    }

    fn step_factor(&self, error: f64) -> f64 {
        if error == 0.0 {
            return self.max_factor;
        }
        (self.safety * (self.tol / error).powf(0.2)).clamp(self.min_factor, self.max_factor)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegratorError<E> {
    #[error("invalid integrator configuration: {0}")]
    Config(String),
    #[error("right-hand side failed at t = {t}: {source}")]
    Rhs { t: f64, source: E },
    #[error("step size fell to dt_min = {dt:e} at t = {t} with error estimate {error:e}; problem too stiff for the tolerance")]
    StepUnderflow { t: f64, dt: f64, error: f64 },
    #[error("observer failed at t = {t}: {source}")]
    Observer { t: f64, source: E },
}

/// Result of one Merson step of a given size.
#[derive(Debug, Clone, PartialEq)]
pub struct MersonStep {
    pub y: Vec<f64>,
    /// Norm of the local error estimate; `NaN` if a stage produced non-finite values.
    pub error: f64,
}

impl MersonStep {
    pub fn is_finite(&self) -> bool {
        self.error.is_finite()
    }
}

/// One unconditional Merson step.
pub fn merson_step<F, E>(
    rhs: &mut F,
    t: f64,
    y: &[f64],
    dt: f64,
    norm: ErrorNorm,
) -> Result<MersonStep, E>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let bad = |k: &[f64]| k.iter().any(|v| !v.is_finite());
    let failed = || MersonStep {
        y: y.to_vec(),
        error: f64::NAN,
    };

    rhs(t, y, &mut k1)?;
    if bad(&k1) {
        return Ok(failed());
    }
    for i in 0..n {
        tmp[i] = y[i] + dt * k1[i] / 3.0;
    }
    rhs(t + dt / 3.0, &tmp, &mut k2)?;
    if bad(&k2) {
        return Ok(failed());
    }
    for i in 0..n {
        tmp[i] = y[i] + dt * (k1[i] + k2[i]) / 6.0;
    }
    rhs(t + dt / 3.0, &tmp, &mut k3)?;
    if bad(&k3) {
        return Ok(failed());
    }
    for i in 0..n {
        tmp[i] = y[i] + dt * (k1[i] + 3.0 * k3[i]) / 8.0;
    }
    rhs(t + dt / 2.0, &tmp, &mut k4)?;
    if bad(&k4) {
        return Ok(failed());
    }
    for i in 0..n {
        tmp[i] = y[i] + dt * (k1[i] - 3.0 * k3[i] + 4.0 * k4[i]) / 2.0;
    }
    rhs(t + dt, &tmp, &mut k5)?;
    if bad(&k5) {
        return Ok(failed());
    }

    let mut y_new = vec![0.0; n];
    let mut max = 0.0_f64;
    let mut sq = 0.0;
    for i in 0..n {
        y_new[i] = y[i] + dt * (k1[i] + 4.0 * k4[i] + k5[i]) / 6.0;
        let e = (dt * (2.0 * k1[i] - 9.0 * k3[i] + 8.0 * k4[i] - k5[i]) / 30.0).abs();
        max = max.max(e);
        sq += e * e;
    }
    let error = match norm {
        ErrorNorm::Max => max,
        ErrorNorm::Rms => (sq / n.max(1) as f64).sqrt(),
    };
    let error = if y_new.iter().all(|v| v.is_finite()) {
        error
    } else {
        f64::NAN
    };
    Ok(MersonStep { y: y_new, error })
}

/// Outcome of an adaptive step attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct StepAttempt {
    pub accepted: bool,
    pub y: Vec<f64>,
    pub error: f64,
    pub dt_next: f64,
}

/// One attempt of the adaptive scheme: accept iff the error estimate is
/// within `tol`, and propose the next step size either way.
pub fn rkm_step<F, E>(
    rhs: &mut F,
    t: f64,
    y: &[f64],
    dt: f64,
    cfg: &IntegratorConfig,
) -> Result<StepAttempt, E>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
{
    let mut step = merson_step(rhs, t, y, dt, cfg.norm)?;
    if cfg.error_scale == ErrorScale::UnitTime {
        step.error /= dt;
    }
    if !step.is_finite() {
        return Ok(StepAttempt {
            accepted: false,
            y: y.to_vec(),
            error: f64::NAN,
            dt_next: (0.5 * dt).clamp(cfg.dt_min, cfg.dt_max),
        });
    }
    let dt_next = (dt * cfg.step_factor(step.error)).clamp(cfg.dt_min, cfg.dt_max);
    Ok(StepAttempt {
        accepted: step.error <= cfg.tol,
        y: step.y,
        error: step.error,
        dt_next,
    })
}

/// Classical fixed-step integration, used for order studies.
pub fn integrate_fixed<F, E>(
    rhs: &mut F,
    y0: &[f64],
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<Vec<f64>, E>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
{
    let dt = (t1 - t0) / steps as f64;
    let mut y = y0.to_vec();
    for i in 0..steps {
        y = merson_step(rhs, t0 + i as f64 * dt, &y, dt, ErrorNorm::Max)?.y;
    }
    Ok(y)
}

/// Record of an accepted or rejected attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub error: f64,
    pub accepted: bool,
    /// The step was shortened to land on an output time.
    pub truncated: bool,
    /// Step size proposed for the next attempt.
    pub dt_next: f64,
}

/// Progress counters handed to observers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RunStats {
    pub steps: usize,
    pub rejections: usize,
    pub rhs_evaluations: usize,
    /// Last accepted step size.
    pub last_dt: f64,
    /// Largest error estimate among accepted steps.
    pub max_accepted_error: f64,
}

pub trait Observer<E> {
    /// Called at the initial time and at each output time.
    fn output(&mut self, index: usize, t: f64, y: &[f64], stats: &RunStats) -> Result<(), E>;

    /// Called after every step attempt.
    fn step(&mut self, _record: &StepRecord) {}
}

/// Observer built from a closure over output events.
pub struct FnObserver<F>(pub F);

impl<E, F> Observer<E> for FnObserver<F>
where
    F: FnMut(usize, f64, &[f64], &RunStats) -> Result<(), E>,
{
    fn output(&mut self, index: usize, t: f64, y: &[f64], stats: &RunStats) -> Result<(), E> {
        (self.0)(index, t, y, stats)
    }
}

/// Observer that ignores everything.
pub struct NoObserver;

impl<E> Observer<E> for NoObserver {
    fn output(&mut self, _: usize, _: f64, _: &[f64], _: &RunStats) -> Result<(), E> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub y: Vec<f64>,
    pub t: f64,
    pub stats: RunStats,
}

/// Integrates from `t0` to `t_final`, landing exactly on every output time in
/// `(t0, t_final]`. The observer sees the initial state with index 0.
pub fn run<F, O, E>(
    mut rhs: F,
    y0: &[f64],
    t0: f64,
    t_final: f64,
    output_times: &[f64],
    cfg: &IntegratorConfig,
    observer: &mut O,
) -> Result<RunSummary, IntegratorError<E>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
    O: Observer<E>,
{
    cfg.validate().map_err(IntegratorError::Config)?;
    if t_final.is_nan() || t0.is_nan() || t_final < t0 {
        return Err(IntegratorError::Config(format!(
            "t_final = {t_final} precedes t0 = {t0}"
        )));
    }
    let mut outputs: Vec<f64> = output_times
        .iter()
        .copied()
        .filter(|&s| s > t0 && s <= t_final)
        .collect();
    outputs.sort_by(f64::total_cmp);
    outputs.dedup();

    let mut stats = RunStats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    observer
        .output(0, t, &y, &stats)
        .map_err(|source| IntegratorError::Observer { t, source })?;

    let mut dt = cfg.dt_init.clamp(cfg.dt_min, cfg.dt_max);
    let mut next_output = 0;
    let evaluations = std::cell::Cell::new(0usize);
    let mut counting_rhs = |s: f64, a: &[f64], b: &mut [f64]| {
        evaluations.set(evaluations.get() + 1);
        rhs(s, a, b)
    };
    let mut output_index = 1;
    while t < t_final {
        let target = outputs.get(next_output).copied().unwrap_or(t_final);
        let remaining = target - t;
        // also snap when t + dt would round onto (or a hair short of) the target
        let truncated = t + dt >= target - 4.0 * f64::EPSILON * target.abs().max(1.0);
        let h = if truncated { remaining } else { dt };

        let attempt = rkm_step(&mut counting_rhs, t, &y, h, cfg)
            .map_err(|source| IntegratorError::Rhs { t, source })?;
        observer.step(&StepRecord {
            t,
            dt: h,
            error: attempt.error,
            accepted: attempt.accepted,
            truncated,
            dt_next: attempt.dt_next,
        });
        if !attempt.accepted {
            stats.rejections += 1;
            if h <= cfg.dt_min {
                return Err(IntegratorError::StepUnderflow {
                    t,
                    dt: h,
                    error: attempt.error,
                });
            }
            dt = attempt.dt_next.min(h);
            continue;
        }

        stats.steps += 1;
        stats.last_dt = h;
        stats.max_accepted_error = stats.max_accepted_error.max(attempt.error);
        y = attempt.y;
        if truncated {
            t = target;
        } else {
            t += h;
            dt = attempt.dt_next;
        }
        stats.rhs_evaluations = evaluations.get();
        if truncated && next_output < outputs.len() {
            observer
                .output(output_index, t, &y, &stats)
                .map_err(|source| IntegratorError::Observer { t, source })?;
            output_index += 1;
            next_output += 1;
        }
    }
    stats.rhs_evaluations = evaluations.get();
    Ok(RunSummary { y, t, stats })
}
