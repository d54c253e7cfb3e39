//! Planar ODE for separated-form solutions: circles of radius `r` carrying
//! `rho(u) = a cos(2 pi u)`.
//!
//! ```text
//! dr/dt = P(r, a),    da/dt = -(a / r) P(r, a) - a / r^2 + 1,
//! P(r, a) = r^2 - lambda a + 1.
//! ```
//!
//! The nontrivial steady state is `r = 1/sqrt(lambda - 1)`, `a = r^2`. Its
//! linearization loses stability through a Hopf bifurcation where the trace
//! vanishes.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3};
use thiserror::Error;

use crate::dynamics::ScalarField;
use crate::geometry::{Curve, GeometryError, Point};
use crate::integrator::{run, FnObserver, IntegratorConfig, IntegratorError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReducedOdeError {
    #[error("lambda must exceed 1, got {0}")]
    LambdaTooSmall(f64),
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("trace does not change sign on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("reduced ODE integration failed: {0}")]
    Integration(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfParams {
    lambda: f64,
}

impl HopfParams {
    pub fn new(lambda: f64) -> Result<Self, ReducedOdeError> {
        if lambda > 1.0 && lambda.is_finite() {
            Ok(Self { lambda })
        } else {
            Err(ReducedOdeError::LambdaTooSmall(lambda))
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    pub r: f64,
    pub a: f64,
}

/// `P(r, a) = r^2 - lambda a + 1`.
pub fn pressure(state: &ReducedState, params: &HopfParams) -> f64 {
    state.r * state.r - params.lambda * state.a + 1.0
}

/// `(dr/dt, da/dt)`.
pub fn hopf_rhs(state: &ReducedState, params: &HopfParams) -> Result<(f64, f64), ReducedOdeError> {
    let ReducedState { r, a } = *state;
    if r.is_nan() || r <= 0.0 {
        return Err(ReducedOdeError::NonPositiveRadius(r));
    }
    let p = pressure(state, params);
    Ok((p, -(a / r) * p - a / (r * r) + 1.0))
}

pub fn steady_state(params: &HopfParams) -> ReducedState {
    let l1 = params.lambda - 1.0;
    ReducedState {
        r: 1.0 / l1.sqrt(),
        a: 1.0 / l1,
    }
}

/// Linearization at the steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linearization {
    /// Jacobian assembled from the partial derivatives of `P`.
    pub matrix: Matrix2<f64>,
    /// `(lambda + 2)/sqrt(lambda - 1) - lambda + 1`.
    pub trace: f64,
    /// `2 (lambda - 1)^(3/2)`.
    pub det: f64,
}

pub fn trace_at_steady_state(lambda: f64) -> f64 {
    (lambda + 2.0) / (lambda - 1.0).sqrt() - lambda + 1.0
}

pub fn det_at_steady_state(lambda: f64) -> f64 {
    2.0 * (lambda - 1.0).powf(1.5)
}

pub fn jacobian_trace_det(params: &HopfParams) -> Linearization {
    let ReducedState { r, a } = steady_state(params);
    let p_r = 2.0 * r;
    let p_a = -params.lambda;
    let matrix = Matrix2::new(
        p_r,
        p_a,
        -(a / r) * p_r + 2.0 * a / (r * r * r),
        -(a / r) * p_a - 1.0 / (r * r),
    );
    Linearization {
        matrix,
        trace: trace_at_steady_state(params.lambda),
        det: det_at_steady_state(params.lambda),
    }
}

/// Root of the steady-state trace on `[lo, hi]` by bisection.
pub fn critical_lambda(lo: f64, hi: f64) -> Result<f64, ReducedOdeError> {
    HopfParams::new(lo)?;
    HopfParams::new(hi)?;
    let (mut lo, mut hi) = (lo.min(hi), lo.max(hi));
    let (mut f_lo, f_hi) = (trace_at_steady_state(lo), trace_at_steady_state(hi));
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(ReducedOdeError::NoSignChange { lo, hi });
    }
    while hi - lo > 1e-13 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        let f_mid = trace_at_steady_state(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Rotation about the `y` axis by `omega`, the plane rotation of the rotating variant.
pub fn rotation(omega: f64) -> Matrix3<f64> {
    let (s, c) = omega.sin_cos();
    Matrix3::new(c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c)
}

fn density(state: &ReducedState, m: usize) -> ScalarField {
    ScalarField::sample(m, |u| state.a * (2.0 * PI * u).cos())
}

/// Circle `r Q(omega) (cos 2 pi u, sin 2 pi u, 0)` with `rho = a cos 2 pi u`.
pub fn reconstruct_rotating(
    state: &ReducedState,
    omega: f64,
    m: usize,
) -> Result<(Curve, ScalarField), ReducedOdeError> {
    if state.r.is_nan() || state.r <= 0.0 {
        return Err(ReducedOdeError::NonPositiveRadius(state.r));
    }
    let q = rotation(omega);
    let curve = Curve::sample(m, |u| {
        q * Point::new((2.0 * PI * u).cos(), (2.0 * PI * u).sin(), 0.0) * state.r
    })?;
    Ok((curve, density(state, m)))
}

/// Circle `(r cos 2 pi u, r sin 2 pi u, r)` with `rho = a cos 2 pi u`.
pub fn reconstruct_parallel(
    state: &ReducedState,
    m: usize,
) -> Result<(Curve, ScalarField), ReducedOdeError> {
    if state.r.is_nan() || state.r <= 0.0 {
        return Err(ReducedOdeError::NonPositiveRadius(state.r));
    }
    let r = state.r;
    let curve = Curve::sample(m, |u| {
        Point::new(r * (2.0 * PI * u).cos(), r * (2.0 * PI * u).sin(), r)
    })?;
    Ok((curve, density(state, m)))
}

/// A sampled trajectory `(t, r, a, omega)`, where `omega` solves `r d(omega)/dt = 1`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub a: Vec<f64>,
    pub omega: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn last_state(&self) -> Option<ReducedState> {
        Some(ReducedState {
            r: *self.r.last()?,
            a: *self.a.last()?,
        })
    }

    /// Local maxima of `r` as `(t, r)` pairs.
    pub fn radius_maxima(&self) -> Vec<(f64, f64)> {
        (1..self.len().saturating_sub(1))
            .filter(|&i| self.r[i] > self.r[i - 1] && self.r[i] >= self.r[i + 1])
            .map(|i| (self.t[i], self.r[i]))
            .collect()
    }
}

/// Integrates the reduced system (plus the rotation phase) with the adaptive
/// Merson scheme, sampling every `sample_dt`.
pub fn integrate_reduced(
    params: &HopfParams,
    start: ReducedState,
    t_final: f64,
    sample_dt: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, ReducedOdeError> {
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<(), ReducedOdeError> {
        let (dr, da) = hopf_rhs(&ReducedState { r: y[0], a: y[1] }, params)?;
        dy[0] = dr;
        dy[1] = da;
        dy[2] = 1.0 / y[0];
        Ok(())
    };
    let samples = (t_final / sample_dt).round() as usize;
    let times: Vec<f64> = (1..=samples)
        .map(|i| (i as f64 * sample_dt).min(t_final))
        .collect();
    let mut traj = Trajectory::default();
    let mut obs = FnObserver(
        |_: usize, t: f64, y: &[f64], _: &_| -> Result<(), ReducedOdeError> {
            traj.t.push(t);
            traj.r.push(y[0]);
            traj.a.push(y[1]);
            traj.omega.push(y[2]);
            Ok(())
        },
    );
    run(
        rhs,
        &[start.r, start.a, 0.0],
        0.0,
        t_final,
        &times,
        cfg,
        &mut obs,
    )
    .map_err(|e: IntegratorError<ReducedOdeError>| match e {
        IntegratorError::Rhs { source, .. } | IntegratorError::Observer { source, .. } => source,
        other => ReducedOdeError::Integration(other.to_string()),
    })?;
    Ok(traj)
}

/// Tight-tolerance settings for the two-dimensional reduced system.
pub fn reduced_integrator_config() -> IntegratorConfig {
    IntegratorConfig {
        tol: 1e-10,
        dt_init: 1e-3,
        dt_min: 1e-14,
        dt_max: 0.05,
        ..IntegratorConfig::default()
    }
}
