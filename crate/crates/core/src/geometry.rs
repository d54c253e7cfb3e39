//! Discrete differential geometry of closed polygonal curves.
//!
//! Node `k` of a [`Curve`] approximates `X(u_k)` with `u_k = k / M`. Indices
//! wrap around, so `X_0` and `X_M` denote the same node. Segment `k` joins
//! node `k - 1` to node `k` and has length `d_k`; the dual length
//! `d_{k+1/2} = (d_k + d_{k+1}) / 2` is the length of the control volume
//! centered at node `k`.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use thiserror::Error;

pub type Point = Vector3<f64>;

/// Minimum node count of a closed polygon.
pub const MIN_NODES: usize = 4;

/// Default curvature threshold below which the normal and binormal are left
/// undefined. Interpreted relative to the `1/L` curvature scale.
pub const DEFAULT_KAPPA_THRESHOLD: f64 = 1e-9;

/// Default tolerance on `max deviation / length` for planar diagnostics.
pub const DEFAULT_PLANARITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("a closed curve needs at least {MIN_NODES} nodes, got {0}")]
    TooFewNodes(usize),
    #[error("node {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("degenerate segment between nodes {prev} and {index} (length {length:e})")]
    DegenerateSegment {
        index: usize,
        prev: usize,
        length: f64,
    },
}

/// A closed polygonal curve in 3D.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    nodes: Vec<Point>,
}

impl Curve {
    /// Builds a curve, rejecting too few nodes, non-finite coordinates and
    /// zero-length segments.
    pub fn new(nodes: Vec<Point>) -> Result<Self, GeometryError> {
        let curve = Self::new_unchecked(nodes)?;
        curve.local_lengths()?;
        Ok(curve)
    }

    /// Builds a curve without the segment-length check. Node count and
    /// finiteness are still enforced.
    pub(crate) fn new_unchecked(nodes: Vec<Point>) -> Result<Self, GeometryError> {
        if nodes.len() < MIN_NODES {
            return Err(GeometryError::TooFewNodes(nodes.len()));
        }
        if let Some(index) = nodes.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::NonFinite { index });
        }
        Ok(Self { nodes })
    }

    /// Samples `f(u_k)` at `u_k = k / m`.
    pub fn sample<F: Fn(f64) -> Point>(m: usize, f: F) -> Result<Self, GeometryError> {
        Self::new((0..m).map(|k| f(k as f64 / m as f64)).collect())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn into_nodes(self) -> Vec<Point> {
        self.nodes
    }

    /// Node `k` with periodic wrap; negative indices allowed.
    pub fn node(&self, k: isize) -> &Point {
        let m = self.nodes.len() as isize;
        &self.nodes[k.rem_euclid(m) as usize]
    }

    /// Applies `x -> rotation * x + shift` to every node.
    pub fn transformed(&self, rotation: &Matrix3<f64>, shift: &Point) -> Self {
        Self {
            nodes: self.nodes.iter().map(|p| rotation * p + shift).collect(),
        }
    }

    pub fn centroid(&self) -> Point {
        self.nodes.iter().sum::<Point>() / self.nodes.len() as f64
    }

    /// Segment vectors `e_k = X_k - X_{k-1}`.
    pub fn segments(&self) -> Vec<Point> {
        let m = self.nodes.len();
        (0..m)
            .map(|k| self.nodes[k] - self.nodes[(k + m - 1) % m])
            .collect()
    }

    pub fn local_lengths(&self) -> Result<LocalLengths, GeometryError> {
        local_lengths(self)
    }

    pub fn total_length(&self) -> Result<f64, GeometryError> {
        total_length(self)
    }
}

/// Primal segment lengths and dual (control volume) lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalLengths {
    /// `d_k = |X_k - X_{k-1}|`.
    pub segment: Vec<f64>,
    /// `d_{k+1/2} = (d_k + d_{k+1}) / 2`.
    pub dual: Vec<f64>,
}

impl LocalLengths {
    pub fn total(&self) -> f64 {
        self.segment.iter().sum()
    }

    /// Length of the segment from node `k` to node `k + 1`.
    pub fn forward(&self, k: usize) -> f64 {
        self.segment[(k + 1) % self.segment.len()]
    }
}

pub fn local_lengths(curve: &Curve) -> Result<LocalLengths, GeometryError> {
    let m = curve.len();
    let scale = curve
        .nodes()
        .iter()
        .map(|p| p.amax())
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let floor = scale * f64::EPSILON;
    let segment = curve
        .segments()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let length = e.norm();
            if length <= floor {
                Err(GeometryError::DegenerateSegment {
                    index: k,
                    prev: (k + m - 1) % m,
                    length,
                })
            } else {
                Ok(length)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let dual = (0..m)
        .map(|k| 0.5 * (segment[k] + segment[(k + 1) % m]))
        .collect();
    Ok(LocalLengths { segment, dual })
}

pub fn total_length(curve: &Curve) -> Result<f64, GeometryError> {
    Ok(local_lengths(curve)?.total())
}

/// Per-node discrete Frenet data.
#[derive(Debug, Clone)]
pub struct FrenetData {
    pub lengths: LocalLengths,
    /// Unit tangents.
    pub tangent: Vec<Point>,
    /// Curvature vector, the discrete `d²X/ds²`. Always defined.
    pub curvature_vector: Vec<Point>,
    /// `|curvature_vector|`.
    pub curvature: Vec<f64>,
    /// Unit normal: the curvature vector with its tangential part removed,
    /// normalized. `None` where the curvature is below the threshold.
    pub normal: Vec<Option<Point>>,
    /// `tangent × normal`, `None` wherever the normal is.
    pub binormal: Vec<Option<Point>>,
}

impl FrenetData {
    pub fn len(&self) -> usize {
        self.tangent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tangent.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.lengths.total()
    }
}

/// Discrete curvature and Frenet frame.
///
/// The curvature vector at node `k` is
/// `2/(d_k + d_{k+1}) * ((X_{k+1}-X_k)/d_{k+1} - (X_k-X_{k-1})/d_k)`.
/// The tangent is the central difference `(X_{k+1}-X_{k-1})/(d_k + d_{k+1})`
/// renormalized to unit length. `kappa_threshold` is scaled by `1/L`.
pub fn frenet(curve: &Curve, kappa_threshold: f64) -> Result<FrenetData, GeometryError> {
    let lengths = local_lengths(curve)?;
    Ok(frenet_with_lengths(curve, lengths, kappa_threshold))
}

pub(crate) fn frenet_with_lengths(
    curve: &Curve,
    lengths: LocalLengths,
    kappa_threshold: f64,
) -> FrenetData {
    let m = curve.len();
    let nodes = curve.nodes();
    let cutoff = kappa_threshold / lengths.total();
    let mut tangent = Vec::with_capacity(m);
    let mut curvature_vector = Vec::with_capacity(m);
    let mut curvature = Vec::with_capacity(m);
    let mut normal = Vec::with_capacity(m);
    let mut binormal = Vec::with_capacity(m);
    for k in 0..m {
        let prev = &nodes[(k + m - 1) % m];
        let next = &nodes[(k + 1) % m];
        let x = &nodes[k];
        let d_back = lengths.segment[k];
        let d_fwd = lengths.forward(k);
        let t = ((next - prev) / (d_back + d_fwd)).normalize();
        let kn = ((next - x) / d_fwd - (x - prev) / d_back) / lengths.dual[k];
        let kappa = kn.norm();
        // on nonuniform meshes kn has a small tangential part; drop it for the frame
        let kn_perp = kn - t * t.dot(&kn);
        let perp = kn_perp.norm();
        if kappa >= cutoff && perp > 0.0 {
            let n = kn_perp / perp;
            normal.push(Some(n));
            binormal.push(Some(t.cross(&n).normalize()));
        } else {
            normal.push(None);
            binormal.push(None);
        }
        tangent.push(t);
        curvature_vector.push(kn);
        curvature.push(kappa);
    }
    FrenetData {
        lengths,
        tangent,
        curvature_vector,
        curvature,
        normal,
        binormal,
    }
}

/// Finite-difference estimate of `tau = kappa^-2 (X' x X'') . X'''`.
///
/// `X'''` is the centered arc-length difference of the curvature vector.
/// Diagnostic only; `None` where the frame is undefined.
pub fn torsion_diagnostic(
    curve: &Curve,
    kappa_threshold: f64,
) -> Result<Vec<Option<f64>>, GeometryError> {
    let fd = frenet(curve, kappa_threshold)?;
    let m = fd.len();
    Ok((0..m)
        .map(|k| {
            fd.normal[k]?;
            let kp = fd.curvature[k];
            let span = fd.lengths.segment[k] + fd.lengths.forward(k);
            let third =
                (fd.curvature_vector[(k + 1) % m] - fd.curvature_vector[(k + m - 1) % m]) / span;
            Some(fd.tangent[k].cross(&fd.curvature_vector[k]).dot(&third) / (kp * kp))
        })
        .collect())
}

/// Area of the projection onto the least-squares plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarArea {
    pub area: f64,
    /// Largest distance of a node from the fitted plane.
    pub max_deviation: f64,
    /// Unit normal of the fitted plane.
    pub normal: Point,
    /// `false` if `max_deviation / L` exceeds the tolerance.
    pub reliable: bool,
}

/// Least-squares plane through the nodes: centroid and unit normal.
pub fn best_fit_plane(curve: &Curve) -> (Point, Point) {
    let c = curve.centroid();
    let mut cov = Matrix3::zeros();
    for p in curve.nodes() {
        let q = p - c;
        cov += q * q.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let imin = eig.eigenvalues.imin();
    let normal = eig.eigenvectors.column(imin).into_owned().normalize();
    (c, normal)
}

/// Largest node distance from the least-squares plane.
pub fn planarity_residual(curve: &Curve) -> f64 {
    let (c, n) = best_fit_plane(curve);
    curve
        .nodes()
        .iter()
        .map(|p| (p - c).dot(&n).abs())
        .fold(0.0, f64::max)
}

pub fn enclosed_area_planar(curve: &Curve, tolerance: f64) -> Result<PlanarArea, GeometryError> {
    let length = total_length(curve)?;
    let (c, normal) = best_fit_plane(curve);
    // any unit vector orthogonal to the normal
    let seed = if normal.x.abs() < 0.9 {
        Point::x()
    } else {
        Point::y()
    };
    let e1 = (seed - normal * normal.dot(&seed)).normalize();
    let e2 = normal.cross(&e1);
    let proj: Vec<(f64, f64)> = curve
        .nodes()
        .iter()
        .map(|p| {
            let q = p - c;
            (q.dot(&e1), q.dot(&e2))
        })
        .collect();
    let m = proj.len();
    let twice: f64 = (0..m)
        .map(|k| {
            let (x0, y0) = proj[k];
            let (x1, y1) = proj[(k + 1) % m];
            x0 * y1 - x1 * y0
        })
        .sum();
    let max_deviation = curve
        .nodes()
        .iter()
        .map(|p| (p - c).dot(&normal).abs())
        .fold(0.0, f64::max);
    Ok(PlanarArea {
        area: 0.5 * twice.abs(),
        max_deviation,
        normal,
        reliable: max_deviation <= tolerance * length,
    })
}

/// Relative spread of the curvature, `(max - min) / mean`.
pub fn curvature_spread(fd: &FrenetData) -> f64 {
    let max = fd.curvature.iter().cloned().fold(f64::MIN, f64::max);
    let min = fd.curvature.iter().cloned().fold(f64::MAX, f64::min);
    let mean = fd.curvature.iter().sum::<f64>() / fd.len() as f64;
    (max - min) / mean
}
