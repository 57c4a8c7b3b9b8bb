//! Reference sources: every compactly supported test source used by the
//! experiment suite, with pure evaluators.

use serde::{Deserialize, Serialize};

use crate::point::{Dim, Point};

/// Library of exact sources. Parameters default to the standard test
/// configurations.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSource {
    /// Smooth two-term "mountain": a sharp peak plus a quadrupole ridge
    /// around the origin.
    Mountain,
    /// Indicator of a disc.
    DiscIndicator {
        #[serde(default = "default_disc_center")]
        center: [f64; 2],
        #[serde(default = "default_disc_radius")]
        radius: f64,
    },
    /// Two truncated Gaussian discs on the x-axis.
    TwoGaussianDiscs,
    /// Disc indicator minus an adjacent rectangle indicator.
    DiscMinusRectangle,
    /// Kidney-shaped indicator plus a Gaussian bump.
    KidneyPlusGauss,
    /// Two C⁰ cones of opposite sign (3-D).
    #[serde(rename = "cone_pair_3d")]
    ConePair3d,
    /// Solid torus indicator (3-D).
    #[serde(rename = "torus_3d")]
    Torus3d,
    /// Four Gaussian peaks at (±0.15, ±0.15).
    FourGaussians,
}

fn default_disc_center() -> [f64; 2] {
    [0.5, 0.5]
}

fn default_disc_radius() -> f64 {
    0.2
}

impl ReferenceSource {
    pub fn dim(&self) -> Dim {
        match self {
            ReferenceSource::ConePair3d | ReferenceSource::Torus3d => Dim::Three,
            _ => Dim::Two,
        }
    }

    /// Quadrature box the source was designed for.
    pub fn default_box(&self) -> (Point, Point) {
        match self {
            ReferenceSource::Mountain | ReferenceSource::FourGaussians => {
                ([-0.3, -0.3, 0.0], [0.3, 0.3, 0.0])
            }
            ReferenceSource::TwoGaussianDiscs => ([-0.3, -0.3, 0.0], [0.3, 0.3, 0.0]),
            ReferenceSource::Torus3d => ([-0.5, -0.5, -0.5], [0.5, 0.5, 0.5]),
            ReferenceSource::ConePair3d => ([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]),
            _ => ([0.0, 0.0, 0.0], [1.0, 1.0, 0.0]),
        }
    }

    pub fn evaluate(&self, p: Point) -> f64 {
        let (x, y, z) = (p[0], p[1], p[2]);
        match self {
            ReferenceSource::Mountain => {
                1.1 * (-200.0 * ((x - 0.01).powi(2) + (y - 0.12).powi(2))).exp()
                    - 100.0 * (y * y - x * x) * (-90.0 * (x * x + y * y)).exp()
            }
            ReferenceSource::DiscIndicator { center, radius } => {
                let d2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
                if d2 <= radius * radius {
                    1.0
                } else {
                    0.0
                }
            }
            ReferenceSource::TwoGaussianDiscs => {
                let r1 = ((x + 0.06).powi(2) + y * y).sqrt();
                let r2 = ((x - 0.08).powi(2) + y * y).sqrt();
                if r1 <= 0.06 {
                    0.5 * (-550.0 * r1 * r1).exp()
                } else if r2 <= 0.06 {
                    0.5 * (-550.0 * r2 * r2).exp()
                } else {
                    0.0
                }
            }
            ReferenceSource::DiscMinusRectangle => {
                let in_disc = (x - 0.7).powi(2) + (y - 0.5).powi(2) <= 0.04;
                let in_rect = (0.29..=0.49).contains(&x) && (0.3..=0.7).contains(&y);
                (in_disc as i32 - in_rect as i32) as f64
            }
            ReferenceSource::KidneyPlusGauss => {
                let a = 0.05f64;
                let (x0, y0) = (0.6, 0.25);
                let q = (x - x0).powi(2) + (y - y0).powi(2);
                let psi = (q - 4.0 * a * a).powi(3) - 108.0 * a.powi(4) * (y - y0).powi(2);
                let kidney = if psi <= 0.0 { 1.0 } else { 0.0 };
                kidney + 1.2 * (-125.0 * ((x - 0.3).powi(2) + (y - 0.6).powi(2))).exp()
            }
            ReferenceSource::ConePair3d => {
                let cone = |c: [f64; 3]| {
                    let r = ((x - c[0]).powi(2) + (y - c[1]).powi(2) + (z - c[2]).powi(2)).sqrt();
                    (0.2 - r).max(0.0)
                };
                cone([0.3, 0.5, 0.3]) - cone([0.5, 0.5, 0.8])
            }
            ReferenceSource::Torus3d => {
                let ring = (x * x + y * y).sqrt() - 0.25;
                if ring * ring + z * z <= 0.15 * 0.15 {
                    1.0
                } else {
                    0.0
                }
            }
            ReferenceSource::FourGaussians => {
                let bump = |cx: f64, cy: f64| {
                    (-300.0 * ((x - cx).powi(2) + (y - cy).powi(2))).exp()
                };
                bump(0.15, 0.15) + bump(-0.15, 0.15) + bump(-0.15, -0.15) + bump(0.15, -0.15)
            }
        }
    }
}
