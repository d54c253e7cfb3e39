//! Built-in initial curves and scalar profiles, sampled at `u_k = k / M`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::ScalarField;
use crate::geometry::{Curve, GeometryError, Point};

const TAU: f64 = 2.0 * PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum CurveInit {
    /// `r (cos 2 pi u, sin 2 pi u, 0)`.
    Circle { radius: f64 },
    /// `(p cos 2 pi u, q sin 2 pi u, 0)`.
    Ellipse { semi_x: f64, semi_y: f64 },
    /// `(cos 2 pi u, sin 2 pi u, sin 8 pi u)`.
    Unknotted,
    /// Figure-eight knot given by a short trigonometric series.
    ListingKnot,
    /// `(r cos 2 pi u, r sin 2 pi u, r)`.
    ParallelCircle { radius: f64 },
    /// Explicit nodes; `M` must equal their count.
    Nodes { nodes: Vec<[f64; 3]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum RhoInit {
    Constant {
        value: f64,
    },
    /// `sin 2 pi u + sin 4 pi u`.
    TwoModeSine,
    /// 1 on the open interval `(from, to)`, 0 elsewhere.
    Step {
        from: f64,
        to: f64,
    },
    /// `1 + sin(2 pi n u)`.
    OnePlusSine {
        frequency: u32,
    },
    /// `A cos 2 pi u`.
    Cosine {
        amplitude: f64,
    },
    /// Explicit nodal values; `M` must equal their count.
    Values {
        values: Vec<f64>,
    },
}

pub fn circle_point(u: f64) -> Point {
    Point::new((TAU * u).cos(), (TAU * u).sin(), 0.0)
}

pub fn unknotted_point(u: f64) -> Point {
    Point::new((TAU * u).cos(), (TAU * u).sin(), (4.0 * TAU * u).sin())
}

pub fn listing_knot_point(u: f64) -> Point {
    Point::new(
        (4.0 * PI * u).cos(),
        (6.0 * PI * u + 0.5).sin(),
        0.5 * ((10.0 * PI * u + 0.5).cos() + (6.0 * PI * u + 0.5).sin()),
    )
}

impl CurveInit {
    /// Node count implied by the data itself, if any.
    pub fn fixed_len(&self) -> Option<usize> {
        match self {
            Self::Nodes { nodes } => Some(nodes.len()),
            _ => None,
        }
    }

    pub fn sample(&self, m: usize) -> Result<Curve, GeometryError> {
        match self {
            Self::Circle { radius } => Curve::sample(m, |u| circle_point(u) * *radius),
            Self::Ellipse { semi_x, semi_y } => Curve::sample(m, |u| {
                Point::new(semi_x * (TAU * u).cos(), semi_y * (TAU * u).sin(), 0.0)
            }),
            Self::Unknotted => Curve::sample(m, unknotted_point),
            Self::ListingKnot => Curve::sample(m, listing_knot_point),
            Self::ParallelCircle { radius } => Curve::sample(m, |u| {
                circle_point(u) * *radius + Point::new(0.0, 0.0, *radius)
            }),
            Self::Nodes { nodes } => {
                Curve::new(nodes.iter().map(|p| Point::new(p[0], p[1], p[2])).collect())
            }
        }
    }
}

impl RhoInit {
    pub fn fixed_len(&self) -> Option<usize> {
        match self {
            Self::Values { values } => Some(values.len()),
            _ => None,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::TwoModeSine => (TAU * u).sin() + (2.0 * TAU * u).sin(),
            Self::Step { from, to } => {
                if u > *from && u < *to {
                    1.0
                } else {
                    0.0
                }
            }
            Self::OnePlusSine { frequency } => 1.0 + (TAU * f64::from(*frequency) * u).sin(),
            Self::Cosine { amplitude } => amplitude * (TAU * u).cos(),
            Self::Values { .. } => f64::NAN,
        }
    }

    pub fn sample(&self, m: usize) -> ScalarField {
        match self {
            Self::Values { values } => ScalarField::new(values.clone()),
            _ => ScalarField::sample(m, |u| self.eval(u)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_knot_at_zero() {
        let p = listing_knot_point(0.0);
        assert_eq!(
            p,
            Point::new(1.0, 0.5f64.sin(), (0.5f64.cos() + 0.5f64.sin()) / 2.0)
        );
    }

    #[test]
    fn circle_with_four_nodes_hits_the_axes() {
        let c = CurveInit::Circle { radius: 1.0 }.sample(4).unwrap();
        let expect = [
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(-1.0, 0.0, 0.0),
            Point::new(0.0, -1.0, 0.0),
        ];
        for (a, b) in c.nodes().iter().zip(expect) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn step_profile() {
        let s = RhoInit::Step {
            from: 0.25,
            to: 0.75,
        };
        assert_eq!(s.eval(0.5), 1.0);
        assert_eq!(s.eval(0.0), 0.0);
        assert_eq!(s.eval(0.25), 0.0);
        let v = s.sample(8);
        assert_eq!(v.values(), &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn unknotted_curve_is_not_planar_and_closes() {
        let p = unknotted_point(1.0 / 16.0);
        assert!((p.z - 1.0).abs() < 1e-15);
        assert!((unknotted_point(1.0) - unknotted_point(0.0)).norm() < 1e-14);
    }

    #[test]
    fn parallel_circle_height() {
        let c = CurveInit::ParallelCircle { radius: 0.7 }
            .sample(32)
            .unwrap();
        assert!(c.nodes().iter().all(|p| p.z == 0.7));
    }

    #[test]
    fn explicit_data_keeps_its_length() {
        let c = CurveInit::Nodes {
            nodes: vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [1.0, 1.0, 0.0],
                [0.0, 1.0, 0.0],
            ],
        };
        assert_eq!(c.fixed_len(), Some(4));
        assert_eq!(c.sample(4).unwrap().len(), 4);
        let r = RhoInit::Values {
            values: vec![1.0, 2.0],
        };
        assert_eq!(r.sample(2).values(), &[1.0, 2.0]);
    }

    #[test]
    fn serde_uses_kind_tags() {
        let c: CurveInit =
            serde_json::from_str(r#"{"kind":"ellipse","semi_x":2,"semi_y":1}"#).unwrap();
        assert_eq!(
            c,
            CurveInit::Ellipse {
                semi_x: 2.0,
                semi_y: 1.0
            }
        );
        assert!(
            serde_json::from_str::<CurveInit>(r#"{"kind":"circle","radius":1,"r":2}"#).is_err()
        );
    }
}
