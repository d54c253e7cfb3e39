//! Tangential redistribution of nodes along the curve.
//!
//! The tangential speed `alpha` solves
//! `d(alpha)/ds = eta - <eta> + (L / |dX/du| - 1) * omega` with `eta = kappa * beta`.
//! With `omega = 0` the relative local length `|dX/du| / L` is frozen in time;
//! with `omega > 0` it relaxes to 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Curve, GeometryError, LocalLengths};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RedistributionMode {
    None,
    #[default]
    Uniform,
    AsymptoticallyUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RedistributionSpec {
    pub mode: RedistributionMode,
    /// Relaxation rate, only read in asymptotically uniform mode.
    pub omega: f64,
}

impl Default for RedistributionSpec {
    fn default() -> Self {
        Self {
            mode: RedistributionMode::Uniform,
            omega: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RedistributionError {
    #[error("redistribution rate omega must be finite and >= 0, got {0}")]
    NegativeOmega(f64),
    #[error("eta has {got} entries but the curve has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl RedistributionSpec {
    pub fn none() -> Self {
        Self {
            mode: RedistributionMode::None,
            omega: 0.0,
        }
    }

    pub fn uniform() -> Self {
        Self::default()
    }

    pub fn asymptotically_uniform(omega: f64) -> Self {
        Self {
            mode: RedistributionMode::AsymptoticallyUniform,
            omega,
        }
    }

    pub fn validate(&self) -> Result<(), RedistributionError> {
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(RedistributionError::NegativeOmega(self.omega));
        }
        Ok(())
    }

    pub fn is_active(&self) -> bool {
        self.mode != RedistributionMode::None
    }

    fn effective_omega(&self) -> f64 {
        match self.mode {
            RedistributionMode::AsymptoticallyUniform => self.omega,
            _ => 0.0,
        }
    }
}

/// Tangential speed at the nodes together with its arc-length derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentialVelocity {
    pub alpha: Vec<f64>,
    /// Mean-free right-hand side, i.e. `d(alpha)/ds` at each node.
    pub ds_alpha: Vec<f64>,
}

impl TangentialVelocity {
    fn zero(m: usize) -> Self {
        Self {
            alpha: vec![0.0; m],
            ds_alpha: vec![0.0; m],
        }
    }
}

pub fn tangential_alpha(
    curve: &Curve,
    eta: &[f64],
    spec: &RedistributionSpec,
) -> Result<TangentialVelocity, RedistributionError> {
    let lengths = curve.local_lengths()?;
    tangential_alpha_from_lengths(&lengths, eta, spec)
}

/// Same as [`tangential_alpha`] for precomputed lengths.
///
/// `alpha_0 = 0`. Integration uses the trapezoid rule over primal segments,
/// which after arc-length mean removal closes exactly: `alpha_M = alpha_0`.
pub fn tangential_alpha_from_lengths(
    lengths: &LocalLengths,
    eta: &[f64],
    spec: &RedistributionSpec,
) -> Result<TangentialVelocity, RedistributionError> {
    spec.validate()?;
    let m = lengths.dual.len();
    if eta.len() != m {
        return Err(RedistributionError::LengthMismatch {
            expected: m,
            got: eta.len(),
        });
    }
    if !spec.is_active() {
        return Ok(TangentialVelocity::zero(m));
    }
    let total = lengths.total();
    let dual = &lengths.dual;
    let mean_eta = weighted_sum(eta, dual) / total;
    let omega = spec.effective_omega();
    let mut rhs: Vec<f64> = (0..m)
        .map(|k| {
            let relax = if omega > 0.0 {
                (total / (m as f64 * dual[k]) - 1.0) * omega
            } else {
                0.0
            };
            eta[k] - mean_eta + relax
        })
        .collect();
    let residual = weighted_sum(&rhs, dual) / total;
    for r in &mut rhs {
        *r -= residual;
    }
    let mut alpha = vec![0.0; m];
    for k in 0..m - 1 {
        alpha[k + 1] = alpha[k] + 0.5 * (rhs[k] + rhs[k + 1]) * lengths.forward(k);
    }
    Ok(TangentialVelocity {
        alpha,
        ds_alpha: rhs,
    })
}

/// `M * d_{k+1/2} / L` at each node.
pub fn relative_local_length(curve: &Curve) -> Result<Vec<f64>, GeometryError> {
    Ok(relative_from_lengths(&curve.local_lengths()?))
}

pub(crate) fn relative_from_lengths(lengths: &LocalLengths) -> Vec<f64> {
    let m = lengths.dual.len() as f64;
    let total = lengths.total();
    lengths.dual.iter().map(|d| m * d / total).collect()
}

fn weighted_sum(values: &[f64], weights: &[f64]) -> f64 {
    values.iter().zip(weights).map(|(v, w)| v * w).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{frenet, Point, DEFAULT_KAPPA_THRESHOLD};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn circle(m: usize) -> Curve {
        Curve::sample(m, |u| {
            Point::new((2.0 * PI * u).cos(), (2.0 * PI * u).sin(), 0.0)
        })
        .unwrap()
    }

    fn blob(m: usize, warp: f64) -> Curve {
        Curve::sample(m, |u| {
            let th = 2.0 * PI * u + warp * (2.0 * PI * u).sin();
            let r = 1.0 + 0.3 * (3.0 * th).cos();
            Point::new(r * th.cos(), r * th.sin(), 0.2 * (2.0 * th).sin())
        })
        .unwrap()
    }

    /// Closure of the trapezoid integration step from `alpha_{M-1}` back to `alpha_0`.
    fn closure_gap(lengths: &LocalLengths, tv: &TangentialVelocity) -> f64 {
        let m = tv.alpha.len();
        tv.alpha[m - 1] + 0.5 * (tv.ds_alpha[m - 1] + tv.ds_alpha[0]) * lengths.forward(m - 1)
            - tv.alpha[0]
    }

    #[test]
    fn circle_with_gage_velocity_has_no_tangential_motion() {
        let c = circle(64);
        let fd = frenet(&c, DEFAULT_KAPPA_THRESHOLD).unwrap();
        let l = fd.total_length();
        let eta: Vec<f64> = fd
            .curvature
            .iter()
            .map(|k| k * (k - 2.0 * PI / l))
            .collect();
        let tv = tangential_alpha(&c, &eta, &RedistributionSpec::uniform()).unwrap();
        assert!(tv.alpha.iter().all(|a| a.abs() < 1e-13));
        assert_eq!(tv.alpha[0], 0.0);
    }

    #[test]
    fn none_mode_is_zero() {
        let c = blob(40, 0.3);
        let eta = vec![1.0; 40];
        let tv = tangential_alpha(&c, &eta, &RedistributionSpec::none()).unwrap();
        assert!(tv.alpha.iter().chain(&tv.ds_alpha).all(|a| *a == 0.0));
    }

    #[test]
    fn rejects_negative_omega_and_bad_length() {
        let c = circle(16);
        assert!(matches!(
            tangential_alpha(
                &c,
                &[0.0; 16],
                &RedistributionSpec::asymptotically_uniform(-1.0)
            ),
            Err(RedistributionError::NegativeOmega(_))
        ));
        assert!(matches!(
            tangential_alpha(&c, &[0.0; 15], &RedistributionSpec::uniform()),
            Err(RedistributionError::LengthMismatch {
                expected: 16,
                got: 15
            })
        ));
    }

    #[test]
    fn relaxation_term_has_zero_arc_length_mean() {
        // sum_k (L / (M d_k) - 1) d_k = L - L = 0
        let c = blob(90, 0.5);
        let ll = c.local_lengths().unwrap();
        let (l, m) = (ll.total(), ll.dual.len() as f64);
        let s: f64 = ll.dual.iter().map(|d| (l / (m * d) - 1.0) * d).sum();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn relative_local_length_patterns() {
        assert!(relative_local_length(&circle(50))
            .unwrap()
            .iter()
            .all(|r| (r - 1.0).abs() < 1e-12));
        // 2M/3 nodes on the upper half circle, M/3 on the lower half
        let m = 60;
        let upper = 2 * m / 3;
        let nodes: Vec<Point> = (0..m)
            .map(|k| {
                let th = if k < upper {
                    PI * k as f64 / upper as f64
                } else {
                    PI + PI * (k - upper) as f64 / (m - upper) as f64
                };
                Point::new(th.cos(), th.sin(), 0.0)
            })
            .collect();
        let rel = relative_local_length(&Curve::new(nodes).unwrap()).unwrap();
        // chords on each half are uniform; oracle from the chord lengths directly
        let chord_up = 2.0 * (PI / (2.0 * upper as f64)).sin();
        let chord_lo = 2.0 * (PI / (2.0 * (m - upper) as f64)).sin();
        let total = upper as f64 * chord_up + (m - upper) as f64 * chord_lo;
        assert!((rel[5] - m as f64 * chord_up / total).abs() < 1e-12);
        assert!((rel[upper + 5] - m as f64 * chord_lo / total).abs() < 1e-12);
        assert!((rel[5] - 0.75).abs() < 1e-3);
        assert!((rel[upper + 5] - 1.5).abs() < 2e-3);
    }

    proptest! {
        #[test]
        fn mean_removed_rhs_and_periodic_closure(
            warp in -0.6f64..0.6,
            omega in 0.0f64..20.0,
            eta in proptest::collection::vec(-50.0f64..50.0, 48),
        ) {
            let c = blob(48, warp);
            let ll = c.local_lengths().unwrap();
            let tv = tangential_alpha_from_lengths(
                &ll, &eta, &RedistributionSpec::asymptotically_uniform(omega)).unwrap();
            let s: f64 = tv.ds_alpha.iter().zip(&ll.dual).map(|(r, d)| r * d).sum();
            prop_assert!(s.abs() < 1e-10);
            prop_assert!(closure_gap(&ll, &tv).abs() < 1e-10);
            prop_assert_eq!(tv.alpha[0], 0.0);
        }

        #[test]
        fn adding_a_constant_to_eta_leaves_alpha_unchanged(
            warp in -0.6f64..0.6,
            shift in -100.0f64..100.0,
            eta in proptest::collection::vec(-5.0f64..5.0, 32),
        ) {
            let c = blob(32, warp);
            let spec = RedistributionSpec::uniform();
            let a = tangential_alpha(&c, &eta, &spec).unwrap();
            let shifted: Vec<f64> = eta.iter().map(|e| e + shift).collect();
            let b = tangential_alpha(&c, &shifted, &spec).unwrap();
            for (x, y) in a.alpha.iter().zip(&b.alpha) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
