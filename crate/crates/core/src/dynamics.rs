//! Semi-discrete flowing finite-volume right-hand side.
//!
//! Node velocity:
//! `dX_k/dt = a_k kN_k + b_k T_k x kN_k + beta'_k N_k + gamma_k B_k + F_k + alpha_k T_k`
//! where `kN_k` is the discrete curvature vector, `beta'` the part of the
//! normal velocity prescribed by the normal-velocity law beyond `a kappa`,
//! and `alpha` the tangential redistribution speed.
//!
//! Scalar density:
//! `d(rho_k)/dt = c_k D2(rho)_k - D(v rho)_k + (kappa beta)_k rho_k
//!                - (d alpha/ds)_k rho_k + q_k [+ rho_k^3]`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forces::{force_field_with_frame, ForceError, ForceSpec};
use crate::geometry::{
    frenet_with_lengths, local_lengths, Curve, FrenetData, GeometryError, LocalLengths, Point,
    DEFAULT_KAPPA_THRESHOLD,
};
use crate::redistribution::{
    tangential_alpha_from_lengths, RedistributionError, RedistributionMode, RedistributionSpec,
    TangentialVelocity,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("coefficient {name} must be positive, got {value} at node {index}")]
    NonPositiveCoefficient {
        name: &'static str,
        index: usize,
        value: f64,
    },
    #[error("state has {nodes} nodes but {values} scalar values")]
    SizeMismatch { nodes: usize, values: usize },
    #[error("flat state has length {0}, which is not a multiple of 4")]
    BadFlatLength(usize),
    #[error("non-finite scalar value at node {0}")]
    NonFiniteScalar(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Force(#[from] ForceError),
    #[error(transparent)]
    Redistribution(#[from] RedistributionError),
}

/// Scalar values collocated with the curve nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField(Vec<f64>);

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn sample<F: Fn(f64) -> f64>(m: usize, f: F) -> Self {
        Self((0..m).map(|k| f(k as f64 / m as f64)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(sum rho_k^2 / M)^(1/2)`, the L2 norm in the parameter `u`.
    pub fn l2_norm_u(&self) -> f64 {
        (self.0.iter().map(|r| r * r).sum::<f64>() / self.0.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub curve: Curve,
    pub rho: ScalarField,
    pub t: f64,
}

impl SimState {
    pub fn new(curve: Curve, rho: ScalarField, t: f64) -> Result<Self, DynamicsError> {
        if curve.len() != rho.len() {
            return Err(DynamicsError::SizeMismatch {
                nodes: curve.len(),
                values: rho.len(),
            });
        }
        if let Some(k) = rho.values().iter().position(|r| !r.is_finite()) {
            return Err(DynamicsError::NonFiniteScalar(k));
        }
        Ok(Self { curve, rho, t })
    }

    pub fn len(&self) -> usize {
        self.curve.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curve.is_empty()
    }

    /// Layout: `[x_0, y_0, z_0, ..., x_{M-1}, y_{M-1}, z_{M-1}, rho_0, ..., rho_{M-1}]`.
    pub fn pack(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(4 * self.len());
        for p in self.curve.nodes() {
            out.extend_from_slice(&[p.x, p.y, p.z]);
        }
        out.extend_from_slice(self.rho.values());
        out
    }

    /// Inverse of [`SimState::pack`]. Segment lengths are not checked here.
    pub fn unpack(flat: &[f64], t: f64) -> Result<Self, DynamicsError> {
        if !flat.len().is_multiple_of(4) {
            return Err(DynamicsError::BadFlatLength(flat.len()));
        }
        let m = flat.len() / 4;
        let nodes = flat[..3 * m]
            .chunks_exact(3)
            .map(|c| Point::new(c[0], c[1], c[2]))
            .collect();
        let curve = Curve::new_unchecked(nodes)?;
        Self::new(curve, ScalarField::new(flat[3 * m..].to_vec()), t)
    }

    /// Total scalar mass `sum rho_k d_{k+1/2}`.
    pub fn mass(&self) -> Result<f64, GeometryError> {
        let ll = self.curve.local_lengths()?;
        Ok(mass_with_lengths(self.rho.values(), &ll))
    }
}

pub(crate) fn mass_with_lengths(rho: &[f64], lengths: &LocalLengths) -> f64 {
    rho.iter().zip(&lengths.dual).map(|(r, d)| r * d).sum()
}

/// Local arguments of the coefficient functions `a, b, c, v`.
#[derive(Debug, Clone, Copy)]
pub struct LocalArgs {
    pub x: Point,
    pub tangent: Point,
    pub rho: f64,
    pub ds_rho: f64,
}

/// Arguments of a custom source term.
#[derive(Debug, Clone, Copy)]
pub struct SourceArgs {
    /// Lagrangian label `k / M` of the node.
    pub u: f64,
    pub t: f64,
    pub x: Point,
    pub rho: f64,
}

type LocalFn = dyn Fn(&LocalArgs) -> f64 + Send + Sync;
type SourceFn = dyn Fn(&SourceArgs) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum ScalarLaw {
    Constant(f64),
    Function(Arc<LocalFn>),
}

impl ScalarLaw {
    pub fn function<F: Fn(&LocalArgs) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self::Function(Arc::new(f))
    }

    fn eval(&self, args: &LocalArgs) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::Function(f) => f(args),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Self::Constant(v) => Some(*v),
            Self::Function(_) => None,
        }
    }
}

impl fmt::Debug for ScalarLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(v) => write!(f, "Constant({v})"),
            Self::Function(_) => f.write_str("Function(..)"),
        }
    }
}

#[derive(Clone, Default)]
pub enum Source {
    #[default]
    Zero,
    Constant(f64),
    /// `rho / (sqrt(2) ||rho||_2)`.
    NormalizedDensity,
    Function(Arc<SourceFn>),
}

impl Source {
    pub fn function<F: Fn(&SourceArgs) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self::Function(Arc::new(f))
    }
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => f.write_str("Zero"),
            Self::Constant(v) => write!(f, "Constant({v})"),
            Self::NormalizedDensity => f.write_str("NormalizedDensity"),
            Self::Function(_) => f.write_str("Function(..)"),
        }
    }
}

/// Normal velocity law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum BetaLaw {
    /// `beta = a kappa`.
    Kappa,
    /// `beta = a kappa - 2 pi / L`; area preserving for planar curves.
    KappaMinusMean,
    /// `beta = a kappa - 2 pi / L - P(L, ||rho||_2)` with
    /// `P = L^2 / (4 pi^2) - lambda sqrt(2) ||rho||_2 + 1`.
    KappaMinusMeanMinusP { lambda: f64 },
}

/// Binormal velocity added on top of the `b T x kN` term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum GammaLaw {
    Zero,
    Rho,
    MinusBeta,
    Constant { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdvectionScheme {
    #[default]
    Central,
    Upwind,
}

#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub a: ScalarLaw,
    pub b: ScalarLaw,
    pub c: ScalarLaw,
    pub v: ScalarLaw,
    pub q: Source,
    pub beta_law: BetaLaw,
    pub gamma_law: GammaLaw,
    pub advection: AdvectionScheme,
    /// Adds `rho^3` to the scalar equation.
    pub cubic: bool,
}

impl Default for CoefficientSet {
    fn default() -> Self {
        Self {
            a: ScalarLaw::Constant(1.0),
            b: ScalarLaw::Constant(0.0),
            c: ScalarLaw::Constant(1.0),
            v: ScalarLaw::Constant(0.0),
            q: Source::Zero,
            beta_law: BetaLaw::Kappa,
            gamma_law: GammaLaw::Zero,
            advection: AdvectionScheme::Central,
            cubic: false,
        }
    }
}

/// Everything the right-hand side depends on besides the state.
#[derive(Debug, Clone)]
pub struct Model {
    pub coeffs: CoefficientSet,
    pub force: ForceSpec,
    pub redistribution: RedistributionSpec,
    pub kappa_threshold: f64,
}

impl Default for Model {
    fn default() -> Self {
        Self {
            coeffs: CoefficientSet::default(),
            force: ForceSpec::None,
            redistribution: RedistributionSpec::default(),
            kappa_threshold: DEFAULT_KAPPA_THRESHOLD,
        }
    }
}

/// Geometric quantities the scalar equation needs from the curve equation.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryFeedback {
    /// `(kappa beta)_k`.
    pub eta: Vec<f64>,
    /// `(d alpha / ds)_k`.
    pub ds_alpha: Vec<f64>,
}

/// Time derivative of a [`SimState`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateRate {
    pub velocity: Vec<Point>,
    pub rho: Vec<f64>,
}

impl StateRate {
    pub fn pack_into(&self, out: &mut [f64]) {
        let m = self.velocity.len();
        for (k, v) in self.velocity.iter().enumerate() {
            out[3 * k] = v.x;
            out[3 * k + 1] = v.y;
            out[3 * k + 2] = v.z;
        }
        out[3 * m..4 * m].copy_from_slice(&self.rho);
    }
}

/// Per-evaluation data shared by the curve and scalar right-hand sides.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub frame: FrenetData,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub v: Vec<f64>,
    pub force: Vec<Point>,
    /// Normal velocity `beta_k`.
    pub beta: Vec<f64>,
    /// Part of `beta` beyond `a kappa` that is applied along `N`.
    pub beta_extra: f64,
    pub gamma: Vec<f64>,
    pub tangential: TangentialVelocity,
    pub feedback: GeometryFeedback,
}

impl Model {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        self.force.validate()?;
        self.redistribution.validate()?;
        Ok(())
    }

    /// Computes the frame, coefficients, forces and normal/tangential speeds once.
    pub fn evaluate(&self, state: &SimState) -> Result<Evaluation, DynamicsError> {
        let m = state.len();
        let lengths = local_lengths(&state.curve)?;
        let frame = frenet_with_lengths(&state.curve, lengths, self.kappa_threshold);
        let total = frame.total_length();
        let rho = state.rho.values();
        let nodes = state.curve.nodes();
        let co = &self.coeffs;

        let mut a = Vec::with_capacity(m);
        let mut b = Vec::with_capacity(m);
        let mut c = Vec::with_capacity(m);
        let mut v = Vec::with_capacity(m);
        for k in 0..m {
            let span = frame.lengths.segment[k] + frame.lengths.forward(k);
            let args = LocalArgs {
                x: nodes[k],
                tangent: frame.tangent[k],
                rho: rho[k],
                ds_rho: (rho[(k + 1) % m] - rho[(k + m - 1) % m]) / span,
            };
            a.push(positive("a", k, co.a.eval(&args))?);
            b.push(co.b.eval(&args));
            c.push(positive("c", k, co.c.eval(&args))?);
            v.push(co.v.eval(&args));
        }

        let force = force_field_with_frame(&state.curve, &frame, &self.force, state.t)?;

        let beta_extra = match co.beta_law {
            BetaLaw::Kappa => 0.0,
            BetaLaw::KappaMinusMean => -2.0 * PI / total,
            BetaLaw::KappaMinusMeanMinusP { lambda } => {
                let p = total * total / (4.0 * PI * PI)
                    - lambda * 2f64.sqrt() * state.rho.l2_norm_u()
                    + 1.0;
                -2.0 * PI / total - p
            }
        };

        let mut beta = Vec::with_capacity(m);
        let mut eta = Vec::with_capacity(m);
        for k in 0..m {
            let kappa = frame.curvature[k];
            let f_normal = frame.normal[k].map_or(0.0, |n| force[k].dot(&n));
            beta.push(a[k] * kappa + beta_extra + f_normal);
            eta.push(
                a[k] * kappa * kappa
                    + beta_extra * kappa
                    + force[k].dot(&frame.curvature_vector[k]),
            );
        }

        let gamma = (0..m)
            .map(|k| match co.gamma_law {
                GammaLaw::Zero => 0.0,
                GammaLaw::Rho => rho[k],
                GammaLaw::MinusBeta => -beta[k],
                GammaLaw::Constant { value } => value,
            })
            .collect();

        let tangential = match self.redistribution.mode {
            RedistributionMode::None => force_tangential(&frame, &force),
            _ => tangential_alpha_from_lengths(&frame.lengths, &eta, &self.redistribution)?,
        };
        let feedback = GeometryFeedback {
            eta,
            ds_alpha: tangential.ds_alpha.clone(),
        };
        Ok(Evaluation {
            frame,
            a,
            b,
            c,
            v,
            force,
            beta,
            beta_extra,
            gamma,
            tangential,
            feedback,
        })
    }

    /// Node velocities.
    pub fn curve_rhs(&self, state: &SimState) -> Result<Vec<Point>, DynamicsError> {
        let ev = self.evaluate(state)?;
        Ok(self.assemble_velocity(&ev))
    }

    fn assemble_velocity(&self, ev: &Evaluation) -> Vec<Point> {
        let fr = &ev.frame;
        let redistribute = self.redistribution.is_active();
        (0..fr.len())
            .map(|k| {
                let t = fr.tangent[k];
                let kn = fr.curvature_vector[k];
                let mut vel = kn * ev.a[k] + t.cross(&kn) * ev.b[k];
                if let Some(n) = fr.normal[k] {
                    vel += n * ev.beta_extra;
                }
                if let Some(bn) = fr.binormal[k] {
                    vel += bn * ev.gamma[k];
                }
                let f = ev.force[k];
                if redistribute {
                    // alpha replaces the tangential part of F
                    vel += f - t * t.dot(&f) + t * ev.tangential.alpha[k];
                } else {
                    vel += f;
                }
                vel
            })
            .collect()
    }

    /// Full derivative of the state with one shared frame evaluation.
    pub fn coupled_rhs(&self, state: &SimState) -> Result<StateRate, DynamicsError> {
        let ev = self.evaluate(state)?;
        let velocity = self.assemble_velocity(&ev);
        let rho = scalar_rhs_with(state, &self.coeffs, &ev)?;
        Ok(StateRate { velocity, rho })
    }

    /// Right-hand side on the packed layout of [`SimState::pack`].
    pub fn rhs_flat(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), DynamicsError> {
        let state = SimState::unpack(y, t)?;
        self.coupled_rhs(&state)?.pack_into(dy);
        Ok(())
    }
}

fn positive(name: &'static str, index: usize, value: f64) -> Result<f64, DynamicsError> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(DynamicsError::NonPositiveCoefficient { name, index, value })
    }
}

/// Tangential speed `F . T` and its central arc-length derivative.
fn force_tangential(frame: &FrenetData, force: &[Point]) -> TangentialVelocity {
    let m = frame.len();
    let alpha: Vec<f64> = (0..m).map(|k| force[k].dot(&frame.tangent[k])).collect();
    let ds_alpha = (0..m)
        .map(|k| {
            let span = frame.lengths.segment[k] + frame.lengths.forward(k);
            (alpha[(k + 1) % m] - alpha[(k + m - 1) % m]) / span
        })
        .collect();
    TangentialVelocity { alpha, ds_alpha }
}

/// Scalar right-hand side given the geometric feedback from the curve equation.
pub fn scalar_rhs(
    state: &SimState,
    coeffs: &CoefficientSet,
    frame: &FrenetData,
    feedback: &GeometryFeedback,
) -> Result<Vec<f64>, DynamicsError> {
    let m = state.len();
    let rho = state.rho.values();
    let nodes = state.curve.nodes();
    let mut c = Vec::with_capacity(m);
    let mut v = Vec::with_capacity(m);
    for k in 0..m {
        let span = frame.lengths.segment[k] + frame.lengths.forward(k);
        let args = LocalArgs {
            x: nodes[k],
            tangent: frame.tangent[k],
            rho: rho[k],
            ds_rho: (rho[(k + 1) % m] - rho[(k + m - 1) % m]) / span,
        };
        c.push(positive("c", k, coeffs.c.eval(&args))?);
        v.push(coeffs.v.eval(&args));
    }
    Ok(scalar_terms(state, coeffs, frame, feedback, &c, &v))
}

fn scalar_rhs_with(
    state: &SimState,
    coeffs: &CoefficientSet,
    ev: &Evaluation,
) -> Result<Vec<f64>, DynamicsError> {
    Ok(scalar_terms(
        state,
        coeffs,
        &ev.frame,
        &ev.feedback,
        &ev.c,
        &ev.v,
    ))
}

fn scalar_terms(
    state: &SimState,
    coeffs: &CoefficientSet,
    frame: &FrenetData,
    feedback: &GeometryFeedback,
    c: &[f64],
    v: &[f64],
) -> Vec<f64> {
    let m = state.len();
    let rho = state.rho.values();
    let seg = &frame.lengths.segment;
    let dual = &frame.lengths.dual;

    // advective flux through the interface between node k and node k + 1
    let flux: Vec<f64> = (0..m)
        .map(|k| {
            let kp = (k + 1) % m;
            match coeffs.advection {
                AdvectionScheme::Central => 0.5 * (v[k] * rho[k] + v[kp] * rho[kp]),
                AdvectionScheme::Upwind => {
                    let vi = 0.5 * (v[k] + v[kp]);
                    if vi >= 0.0 {
                        vi * rho[k]
                    } else {
                        vi * rho[kp]
                    }
                }
            }
        })
        .collect();

    let norm = match coeffs.q {
        Source::NormalizedDensity => 2f64.sqrt() * state.rho.l2_norm_u(),
        _ => 0.0,
    };

    (0..m)
        .map(|k| {
            let kp = (k + 1) % m;
            let km = (k + m - 1) % m;
            let diffusion =
                c[k] * ((rho[kp] - rho[k]) / seg[kp] - (rho[k] - rho[km]) / seg[k]) / dual[k];
            let advection = -(flux[k] - flux[km]) / dual[k];
            let reaction = (feedback.eta[k] - feedback.ds_alpha[k]) * rho[k];
            let source = match &coeffs.q {
                Source::Zero => 0.0,
                Source::Constant(q) => *q,
                Source::NormalizedDensity => {
                    if norm > 0.0 {
                        rho[k] / norm
                    } else {
                        0.0
                    }
                }
                Source::Function(f) => f(&SourceArgs {
                    u: k as f64 / m as f64,
                    t: state.t,
                    x: state.curve.nodes()[k],
                    rho: rho[k],
                }),
            };
            let cubic = if coeffs.cubic { rho[k].powi(3) } else { 0.0 };
            diffusion + advection + reaction + source + cubic
        })
        .collect()
}
