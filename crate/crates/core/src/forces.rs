//! Force fields acting on the curve and topological diagnostics.
//!
//! All curve integrals use the segment midpoint rule: segment `j` contributes
//! at its midpoint `m_j` with direction `t_j` and length `l_j`, so that
//! `t_j * l_j = X_j - X_{j-1}`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{frenet, Curve, FrenetData, GeometryError, Point, DEFAULT_KAPPA_THRESHOLD};
use crate::par;

pub const DEFAULT_DELTA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForceError {
    #[error("Biot-Savart regularization delta must be > 0, got {0}")]
    NonPositiveDelta(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiotSavartSpec {
    pub delta: f64,
}

impl BiotSavartSpec {
    pub fn new(delta: f64) -> Result<Self, ForceError> {
        let spec = Self { delta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ForceError> {
        if self.delta > 0.0 && self.delta.is_finite() {
            Ok(())
        } else {
            Err(ForceError::NonPositiveDelta(self.delta))
        }
    }
}

/// Arguments handed to a custom force kernel.
#[derive(Debug, Clone, Copy)]
pub struct KernelInput {
    /// Evaluation point.
    pub x: Point,
    /// Unit tangent at the evaluation point.
    pub tangent: Point,
    /// Integration point on the curve.
    pub y: Point,
    /// Unit tangent at the integration point.
    pub y_tangent: Point,
    pub time: f64,
}

type KernelFn = dyn Fn(&KernelInput) -> Point + Send + Sync;

/// Kernel `f` of a force `F(x, t) = ∫ f(x, t, X(s), T(s)) ds`.
#[derive(Clone)]
pub struct CustomKernel {
    pub name: String,
    kernel: Arc<KernelFn>,
}

impl CustomKernel {
    pub fn new<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&KernelInput) -> Point + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            kernel: Arc::new(f),
        }
    }

    pub fn eval(&self, input: &KernelInput) -> Point {
        (self.kernel)(input)
    }
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel")
            .field("name", &self.name)
            .finish()
    }
}

#[derive(Debug, Clone, Default)]
pub enum ForceSpec {
    #[default]
    None,
    BiotSavart(BiotSavartSpec),
    CustomIntegral(CustomKernel),
}

impl ForceSpec {
    pub fn validate(&self) -> Result<(), ForceError> {
        match self {
            ForceSpec::BiotSavart(spec) => spec.validate(),
            _ => Ok(()),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, ForceSpec::None)
    }
}

/// Regularized Biot-Savart field induced by `curve` at `point`:
/// the integral of `T(s) x (X - X(s)) / (delta^2 + |X - X(s)|^2)^{3/2}`.
/// A counter-clockwise circle is pushed along its binormal.
pub fn biot_savart_at(
    point: &Point,
    curve: &Curve,
    spec: &BiotSavartSpec,
) -> Result<Point, ForceError> {
    spec.validate()?;
    let segments = curve.segments();
    let midpoints = midpoints(curve);
    Ok(biot_savart_sum(
        point,
        &segments,
        &midpoints,
        spec.delta * spec.delta,
    ))
}

fn midpoints(curve: &Curve) -> Vec<Point> {
    let m = curve.len();
    let nodes = curve.nodes();
    (0..m)
        .map(|j| 0.5 * (nodes[j] + nodes[(j + m - 1) % m]))
        .collect()
}

fn biot_savart_sum(point: &Point, segments: &[Point], midpoints: &[Point], delta2: f64) -> Point {
    let mut acc = Point::zeros();
    for (e, m) in segments.iter().zip(midpoints) {
        let r = point - m;
        let q = delta2 + r.norm_squared();
        acc += e.cross(&r) / (q * q.sqrt());
    }
    acc
}

/// Force at every node.
pub fn force_field(curve: &Curve, spec: &ForceSpec, time: f64) -> Result<Vec<Point>, ForceError> {
    match spec {
        ForceSpec::None => Ok(vec![Point::zeros(); curve.len()]),
        _ => {
            let fd = frenet(curve, DEFAULT_KAPPA_THRESHOLD)?;
            force_field_with_frame(curve, &fd, spec, time)
        }
    }
}

/// [`force_field`] reusing an already computed frame.
pub fn force_field_with_frame(
    curve: &Curve,
    fd: &FrenetData,
    spec: &ForceSpec,
    time: f64,
) -> Result<Vec<Point>, ForceError> {
    let m = curve.len();
    match spec {
        ForceSpec::None => Ok(vec![Point::zeros(); m]),
        ForceSpec::BiotSavart(bs) => {
            bs.validate()?;
            let segments = curve.segments();
            let mids = midpoints(curve);
            let delta2 = bs.delta * bs.delta;
            let nodes = curve.nodes();
            Ok(par::map_indexed(m, m * m, |k| {
                biot_savart_sum(&nodes[k], &segments, &mids, delta2)
            }))
        }
        ForceSpec::CustomIntegral(kernel) => {
            let segments = curve.segments();
            let lengths = &fd.lengths.segment;
            let mids = midpoints(curve);
            let nodes = curve.nodes();
            Ok(par::map_indexed(m, m * m, |k| {
                let mut acc = Point::zeros();
                for j in 0..m {
                    let input = KernelInput {
                        x: nodes[k],
                        tangent: fd.tangent[k],
                        y: mids[j],
                        y_tangent: segments[j] / lengths[j],
                        time,
                    };
                    acc += kernel.eval(&input) * lengths[j];
                }
                acc
            }))
        }
    }
}

/// Gauss linking integral of two closed curves.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkingNumber {
    /// Unrounded value of the integral.
    pub value: f64,
    /// Smallest distance between a segment of one curve and a segment of the other.
    pub min_distance: f64,
    /// Set when the curves come closer than the accuracy threshold.
    pub warning: Option<String>,
}

impl LinkingNumber {
    pub fn rounded(&self) -> i64 {
        self.value.round() as i64
    }
}

/// Linking number with the closeness threshold set to the longest segment of either curve.
pub fn linking_number(a: &Curve, b: &Curve) -> LinkingNumber {
    let longest = a
        .segments()
        .iter()
        .chain(b.segments().iter())
        .map(|e| e.norm())
        .fold(0.0, f64::max);
    linking_number_with_epsilon(a, b, longest)
}

pub fn linking_number_with_epsilon(a: &Curve, b: &Curve, epsilon: f64) -> LinkingNumber {
    let (ea, ma) = (a.segments(), midpoints(a));
    let (eb, mb) = (b.segments(), midpoints(b));
    let rows = par::map_indexed(ea.len(), ea.len() * eb.len(), |i| {
        let mut acc = 0.0;
        for (e, m) in eb.iter().zip(&mb) {
            let r = ma[i] - m;
            let d = r.norm();
            acc += ea[i].cross(e).dot(&r) / (d * d * d);
        }
        acc
    });
    let value = rows.iter().sum::<f64>() / (4.0 * PI);
    let min_distance = curve_distance(a, b);
    let warning = (min_distance < epsilon).then(|| {
        format!(
            "curves are {min_distance:e} apart (threshold {epsilon:e}); linking integral may be inaccurate"
        )
    });
    LinkingNumber {
        value,
        min_distance,
        warning,
    }
}

/// Smallest distance between any segment of `a` and any segment of `b`.
pub fn curve_distance(a: &Curve, b: &Curve) -> f64 {
    let (na, nb) = (a.len(), b.len());
    let mut best = f64::INFINITY;
    for i in 0..na {
        for j in 0..nb {
            let d = segment_distance(
                a.node(i as isize - 1),
                a.node(i as isize),
                b.node(j as isize - 1),
                b.node(j as isize),
            );
            best = best.min(d);
        }
    }
    best
}

/// Smallest distance between non-adjacent segments of the curve.
pub fn min_self_distance(curve: &Curve) -> f64 {
    let m = curve.len();
    let nodes = curve.nodes();
    let seg = |j: usize| (&nodes[(j + m - 1) % m], &nodes[j]);
    let rows = par::map_indexed(m, m * m / 2, |i| {
        let (p0, p1) = seg(i);
        let mut best = f64::INFINITY;
        // pairs (i, j) with j > i + 1, skipping the wrap-around neighbour of segment 0
        for j in (i + 2)..m {
            if i == 0 && j == m - 1 {
                continue;
            }
            let (q0, q1) = seg(j);
            best = best.min(segment_distance(p0, p1, q0, q1));
        }
        best
    });
    rows.into_iter().fold(f64::INFINITY, f64::min)
}

/// Distance between segments `[p0, p1]` and `[q0, q1]`.
pub fn segment_distance(p0: &Point, p1: &Point, q0: &Point, q1: &Point) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let eps = f64::EPSILON * (a + e).max(f64::MIN_POSITIVE);
    let (s, t);
    if a <= eps && e <= eps {
        return r.norm();
    }
    if a <= eps {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > eps * (a * e) {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    ((p0 + d1 * s) - (q0 + d2 * t)).norm()
}
