//! Feature families for representing the unknown source: frozen random
//! features (optionally localized by a partition of unity) and
//! morphology-adapted bases that mimic sharp geometric structure with
//! smooth, differentiable surrogates.
//!
//! Every feature exposes a value and an analytic gradient. Random feature
//! parameters are drawn once from a seeded generator and never move; only
//! the outer (linear) coefficients are ever solved for.
//!
//! Morphology kinds and their shapes:
//!
//! * `SigmoidCircle` — `σ(K (r² - ‖x-c‖²))`, a soft disc indicator.
//! * `SigmoidRectangle` — `σ(-K · max(|x₁-c₁|-w/2, |x₂-c₂|-h/2))`, a soft
//!   box indicator saturating on all four sides.
//! * `TruncatedGaussianCircle` — the disc sigmoid times `exp(-v ‖x-c‖²)`.
//! * `GaussianBump` — `exp(-v ‖x-c‖²)`.
//! * `ReluCone` — `max(r - ‖x-c‖, 0)`; zero subgradient at apex and rim.
//! * `TorusSigmoid` — sigmoid of the solid-torus level set.
//! * `ContourSigmoid` — sigmoid of a (signed or ±1) distance to an offset
//!   of a detected closed contour.
//!
//! Contour features sharing one base polygon reference it through the
//! basis-set contour pool, so a thousand offsets of a 2k-point contour
//! serialize (and evaluate) against a single stored polygon.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::point::{add, dist, dot, norm, scale, sub, Dim, Point};
use crate::{Error, Result};

#[inline]
pub(crate) fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Activation for random features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sin,
    Tanh,
    Relu,
}

/// One frozen random feature `σ(k_m · x + b_m)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomFeature {
    pub direction: Point,
    pub bias: f64,
    pub activation: Activation,
}

impl RandomFeature {
    #[inline]
    pub fn eval(&self, x: Point) -> f64 {
        let t = dot(self.direction, x) + self.bias;
        match self.activation {
            Activation::Sin => t.sin(),
            Activation::Tanh => t.tanh(),
            Activation::Relu => t.max(0.0),
        }
    }

    #[inline]
    pub fn grad(&self, x: Point) -> Point {
        let t = dot(self.direction, x) + self.bias;
        let slope = match self.activation {
            Activation::Sin => t.cos(),
            Activation::Tanh => {
                let th = t.tanh();
                1.0 - th * th
            }
            Activation::Relu => {
                if t > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        };
        scale(self.direction, slope)
    }
}

/// Partition-of-unity window kind: `A` is the box indicator, `B` the C¹
/// sine blend that sums to one across a uniform partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoUKind {
    A,
    B,
}

fn pou_1d(kind: PoUKind, t: f64) -> f64 {
    match kind {
        PoUKind::A => {
            if (-1.0..=1.0).contains(&t) {
                1.0
            } else {
                0.0
            }
        }
        PoUKind::B => {
            if !(-1.25..=1.25).contains(&t) {
                0.0
            } else if t < -0.75 {
                0.5 * (1.0 + (2.0 * std::f64::consts::PI * t).sin())
            } else if t <= 0.75 {
                1.0
            } else {
                0.5 * (1.0 - (2.0 * std::f64::consts::PI * t).sin())
            }
        }
    }
}

fn pou_1d_deriv(kind: PoUKind, t: f64) -> f64 {
    match kind {
        PoUKind::A => 0.0,
        PoUKind::B => {
            if (-1.25..-0.75).contains(&t) {
                std::f64::consts::PI * (2.0 * std::f64::consts::PI * t).cos()
            } else if (0.75..1.25).contains(&t) {
                -std::f64::consts::PI * (2.0 * std::f64::consts::PI * t).cos()
            } else {
                0.0
            }
        }
    }
}

/// Localization window `ψ_n(x) = Π_a ψ((x_a - c_a)/r_a)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoUWindow {
    pub center: Point,
    pub radius: Point,
    pub kind: PoUKind,
    pub dim: Dim,
}

impl PoUWindow {
    pub fn eval(&self, x: Point) -> f64 {
        let mut v = 1.0;
        for a in 0..self.dim.n() {
            v *= pou_1d(self.kind, (x[a] - self.center[a]) / self.radius[a]);
        }
        v
    }

    pub fn grad(&self, x: Point) -> Point {
        let d = self.dim.n();
        let mut vals = [1.0f64; 3];
        let mut ders = [0.0f64; 3];
        for a in 0..d {
            let t = (x[a] - self.center[a]) / self.radius[a];
            vals[a] = pou_1d(self.kind, t);
            ders[a] = pou_1d_deriv(self.kind, t) / self.radius[a];
        }
        let mut g = [0.0f64; 3];
        for a in 0..d {
            let mut prod = ders[a];
            for b in 0..d {
                if b != a {
                    prod *= vals[b];
                }
            }
            g[a] = prod;
        }
        g
    }
}

/// How a contour feature turns geometry into the sigmoid argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContourDistance {
    /// Piecewise ±1 by membership (the offset-region indicator).
    Sign,
    /// Signed Euclidean distance, positive inside.
    Euclidean,
}

/// Offset convention for contour perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetConvention {
    /// `x + ρ n`: shift each point along its unit outward normal.
    Normal,
    /// `x + ρ (n·x) n`: the literal printed rule, a radially scaled shift.
    LiteralScaled,
}

/// A closed base contour with unit outward normals, plus the largest offset
/// magnitude the polygon tolerates before self-intersection becomes likely.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContourFamily {
    pub points: Vec<Point>,
    pub normals: Vec<Point>,
    clearance: f64,
}

impl ContourFamily {
    /// Builds the family from an ordered closed loop (first and last points
    /// must coincide within 1e-9). Normals are averaged edge perpendiculars,
    /// oriented outward.
    pub fn new(points: Vec<Point>) -> Result<ContourFamily> {
        if points.len() < 4 {
            return Err(Error::Contour("need at least 3 distinct vertices".into()));
        }
        let first = points[0];
        let last = *points.last().unwrap();
        if dist(first, last) > 1e-9 {
            return Err(Error::Contour(format!(
                "contour not closed: endpoint gap {:.3e}",
                dist(first, last)
            )));
        }
        let m = points.len() - 1; // distinct vertices
        let verts = &points[..m];

        // Signed area decides orientation; outward = right of travel for CCW.
        let mut area2 = 0.0;
        for i in 0..m {
            let p = verts[i];
            let q = verts[(i + 1) % m];
            area2 += p[0] * q[1] - q[0] * p[1];
        }
        let outward_sign = if area2 >= 0.0 { 1.0 } else { -1.0 };

        let mut normals = Vec::with_capacity(points.len());
        for i in 0..m {
            let prev = verts[(i + m - 1) % m];
            let next = verts[(i + 1) % m];
            let tangent = sub(next, prev);
            let mut n = [tangent[1] * outward_sign, -tangent[0] * outward_sign, 0.0];
            let len = norm(n);
            if len < 1e-14 {
                return Err(Error::Contour(format!("degenerate tangent at vertex {i}")));
            }
            n = scale(n, 1.0 / len);
            normals.push(n);
        }
        normals.push(normals[0]);

        let clearance = polygon_clearance(verts);
        Ok(ContourFamily {
            points,
            normals,
            clearance,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.points.len() - 1
    }

    /// Largest |ρ| accepted by [`offset_contour`] for this polygon.
    pub fn clearance(&self) -> f64 {
        self.clearance
    }

    /// Signed Euclidean distance to the base contour (positive inside) and
    /// its gradient. One call serves every offset of the family.
    pub fn signed_distance(&self, x: Point) -> (f64, Point) {
        let m = self.vertex_count();
        let mut best = f64::INFINITY;
        let mut closest = self.points[0];
        for i in 0..m {
            let a = self.points[i];
            let b = self.points[i + 1];
            let p = closest_on_segment(x, a, b);
            let d = dist(x, p);
            if d < best {
                best = d;
                closest = p;
            }
        }
        let inside = point_in_polygon(x, &self.points[..m]);
        let sign = if inside { 1.0 } else { -1.0 };
        let dir = if best > 1e-14 {
            scale(sub(x, closest), sign / best)
        } else {
            [0.0, 0.0, 0.0]
        };
        (sign * best, dir)
    }
}

/// Local-feature-size proxy bounding safe offset magnitudes: the smaller
/// of the minimum discrete curvature radius and half the narrowest gap
/// between parts of the curve at least a quarter of the polygon apart.
fn polygon_clearance(verts: &[Point]) -> f64 {
    let m = verts.len();
    let mut curv_radius = f64::INFINITY;
    for i in 0..m {
        let a = verts[(i + m - 1) % m];
        let b = verts[i];
        let c = verts[(i + 1) % m];
        let ab = dist(a, b);
        let bc = dist(b, c);
        let ca = dist(c, a);
        let cross = ((b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])).abs();
        if cross > 1e-30 {
            curv_radius = curv_radius.min(ab * bc * ca / (2.0 * cross));
        }
    }
    let far = m / 4;
    let mut min_gap = f64::INFINITY;
    for i in 0..m {
        for j in 0..m {
            let sep = (j + m - i) % m;
            if sep.min(m - sep) <= far {
                continue;
            }
            let d = dist(
                verts[i],
                closest_on_segment(verts[i], verts[j], verts[(j + 1) % m]),
            );
            if d < min_gap {
                min_gap = d;
            }
        }
    }
    curv_radius.min(0.5 * min_gap)
}

fn closest_on_segment(x: Point, a: Point, b: Point) -> Point {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 < 1e-28 {
        return a;
    }
    let t = (dot(sub(x, a), ab) / len2).clamp(0.0, 1.0);
    add(a, scale(ab, t))
}

/// Even-odd ray casting on the horizontal ray from `x`.
fn point_in_polygon(x: Point, verts: &[Point]) -> bool {
    let m = verts.len();
    let mut inside = false;
    let mut j = m - 1;
    for i in 0..m {
        let (xi, yi) = (verts[i][0], verts[i][1]);
        let (xj, yj) = (verts[j][0], verts[j][1]);
        if (yi > x[1]) != (yj > x[1]) {
            let cross = (xj - xi) * (x[1] - yi) / (yj - yi) + xi;
            if x[0] < cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// An explicit offset polygon with its membership predicate.
#[derive(Debug, Clone)]
pub struct OffsetContour {
    pub polygon: Vec<Point>,
    pub rho: f64,
}

impl OffsetContour {
    /// Even-odd membership in the offset region.
    pub fn contains(&self, x: Point) -> bool {
        point_in_polygon(x, &self.polygon[..self.polygon.len() - 1])
    }
}

/// Shifts every contour point along its outward normal (or the literal
/// radially-scaled rule) and returns the offset polygon plus membership
/// test. Offsets larger than the polygon's local feature size are refused.
pub fn offset_contour(
    family: &ContourFamily,
    rho: f64,
    convention: OffsetConvention,
) -> Result<OffsetContour> {
    if rho.abs() >= family.clearance() && rho != 0.0 {
        return Err(Error::Contour(format!(
            "offset {rho:.4e} exceeds the polygon clearance {:.4e}",
            family.clearance()
        )));
    }
    let polygon: Vec<Point> = family
        .points
        .iter()
        .zip(&family.normals)
        .map(|(&p, &n)| match convention {
            OffsetConvention::Normal => add(p, scale(n, rho)),
            OffsetConvention::LiteralScaled => add(p, scale(n, rho * dot(n, p))),
        })
        .collect();
    Ok(OffsetContour { polygon, rho })
}

/// Morphology basis function. Sigmoid kinds carry the sharpness `K`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum MorphBasis {
    SigmoidCircle {
        center: Point,
        radius: f64,
        sharpness: f64,
    },
    SigmoidRectangle {
        center: Point,
        width: f64,
        height: f64,
        sharpness: f64,
    },
    TruncatedGaussianCircle {
        center: Point,
        radius: f64,
        sharpness: f64,
        decay: f64,
    },
    GaussianBump {
        center: Point,
        decay: f64,
    },
    ReluCone {
        center: Point,
        radius: f64,
    },
    TorusSigmoid {
        center: Point,
        major_radius: f64,
        minor_radius: f64,
        sharpness: f64,
    },
    ContourSigmoid {
        /// Index into the owning basis set's contour pool.
        family: usize,
        rho: f64,
        sharpness: f64,
        mode: ContourDistance,
    },
}

impl MorphBasis {
    /// Value at `x`. Contour kinds read the shared `(signed distance,
    /// gradient)` computed once per point from their family.
    fn eval(&self, x: Point, contour: Option<(f64, Point)>) -> f64 {
        match *self {
            MorphBasis::SigmoidCircle {
                center,
                radius,
                sharpness,
            } => {
                let u = dist2(x, center);
                sigmoid(sharpness * (radius * radius - u))
            }
            MorphBasis::SigmoidRectangle {
                center,
                width,
                height,
                sharpness,
            } => sigmoid(-sharpness * box_distance(x, center, width, height).0),
            MorphBasis::TruncatedGaussianCircle {
                center,
                radius,
                sharpness,
                decay,
            } => {
                let u = dist2(x, center);
                sigmoid(sharpness * (radius * radius - u)) * (-decay * u).exp()
            }
            MorphBasis::GaussianBump { center, decay } => (-decay * dist2(x, center)).exp(),
            MorphBasis::ReluCone { center, radius } => (radius - dist(x, center)).max(0.0),
            MorphBasis::TorusSigmoid {
                center,
                major_radius,
                minor_radius,
                sharpness,
            } => sigmoid(sharpness * torus_level(x, center, major_radius, minor_radius).0),
            MorphBasis::ContourSigmoid {
                rho,
                sharpness,
                mode,
                ..
            } => {
                let (d, _) = contour.expect("contour data supplied by the basis set");
                let arg = match mode {
                    ContourDistance::Sign => {
                        if d + rho > 0.0 {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    ContourDistance::Euclidean => d + rho,
                };
                sigmoid(sharpness * arg)
            }
        }
    }

    fn grad(&self, x: Point, contour: Option<(f64, Point)>) -> Point {
        match *self {
            MorphBasis::SigmoidCircle {
                center,
                radius,
                sharpness,
            } => {
                let u = dist2(x, center);
                let s = sigmoid(sharpness * (radius * radius - u));
                scale(sub(x, center), -2.0 * sharpness * s * (1.0 - s))
            }
            MorphBasis::SigmoidRectangle {
                center,
                width,
                height,
                sharpness,
            } => {
                let (d, gd) = box_distance(x, center, width, height);
                let s = sigmoid(-sharpness * d);
                scale(gd, -sharpness * s * (1.0 - s))
            }
            MorphBasis::TruncatedGaussianCircle {
                center,
                radius,
                sharpness,
                decay,
            } => {
                let u = dist2(x, center);
                let s = sigmoid(sharpness * (radius * radius - u));
                let e = (-decay * u).exp();
                let du = -sharpness * s * (1.0 - s) * e - decay * s * e;
                scale(sub(x, center), 2.0 * du)
            }
            MorphBasis::GaussianBump { center, decay } => {
                let v = (-decay * dist2(x, center)).exp();
                scale(sub(x, center), -2.0 * decay * v)
            }
            MorphBasis::ReluCone { center, radius } => {
                let r = dist(x, center);
                if r > 1e-14 && r < radius {
                    scale(sub(x, center), -1.0 / r)
                } else {
                    [0.0; 3] // zero subgradient at apex and rim
                }
            }
            MorphBasis::TorusSigmoid {
                center,
                major_radius,
                minor_radius,
                sharpness,
            } => {
                let (level, glevel) = torus_level(x, center, major_radius, minor_radius);
                let s = sigmoid(sharpness * level);
                scale(glevel, sharpness * s * (1.0 - s))
            }
            MorphBasis::ContourSigmoid {
                rho,
                sharpness,
                mode,
                ..
            } => {
                let (d, gd) = contour.expect("contour data supplied by the basis set");
                match mode {
                    ContourDistance::Sign => [0.0; 3],
                    ContourDistance::Euclidean => {
                        let s = sigmoid(sharpness * (d + rho));
                        scale(gd, sharpness * s * (1.0 - s))
                    }
                }
            }
        }
    }

    fn family_index(&self) -> Option<usize> {
        match self {
            MorphBasis::ContourSigmoid { family, .. } => Some(*family),
            _ => None,
        }
    }
}

#[inline]
fn dist2(x: Point, c: Point) -> f64 {
    let d = sub(x, c);
    dot(d, d)
}

/// Two-sided box distance `max(|x₁-c₁|-w/2, |x₂-c₂|-h/2)` and its gradient
/// (the argmax axis wins; ties go to the first axis).
fn box_distance(x: Point, c: Point, width: f64, height: f64) -> (f64, Point) {
    let d0 = (x[0] - c[0]).abs() - 0.5 * width;
    let d1 = (x[1] - c[1]).abs() - 0.5 * height;
    if d0 >= d1 {
        (d0, [(x[0] - c[0]).signum(), 0.0, 0.0])
    } else {
        (d1, [0.0, (x[1] - c[1]).signum(), 0.0])
    }
}

/// Solid-torus level `r² - ((√(x₁²+x₂²) - R)² + x₃²)` (centered) and its
/// gradient; positive inside the tube.
fn torus_level(x: Point, c: Point, major: f64, minor: f64) -> (f64, Point) {
    let dx = sub(x, c);
    let ring = (dx[0] * dx[0] + dx[1] * dx[1]).sqrt();
    let u = ring - major;
    let level = minor * minor - (u * u + dx[2] * dx[2]);
    let g = if ring > 1e-14 {
        [
            -2.0 * u * dx[0] / ring,
            -2.0 * u * dx[1] / ring,
            -2.0 * dx[2],
        ]
    } else {
        [0.0, 0.0, -2.0 * dx[2]]
    };
    (level, g)
}

/// One member of a basis set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Feature {
    Random(RandomFeature),
    LocalizedRandom {
        window: PoUWindow,
        feature: RandomFeature,
    },
    Morph(MorphBasis),
}

impl Feature {
    pub fn eval(&self, x: Point, pool: &[ContourFamily]) -> f64 {
        match self {
            Feature::Random(f) => f.eval(x),
            Feature::LocalizedRandom { window, feature } => window.eval(x) * feature.eval(x),
            Feature::Morph(m) => {
                let ctx = m.family_index().map(|i| pool[i].signed_distance(x));
                m.eval(x, ctx)
            }
        }
    }

    pub fn grad(&self, x: Point, pool: &[ContourFamily]) -> Point {
        match self {
            Feature::Random(f) => f.grad(x),
            Feature::LocalizedRandom { window, feature } => {
                let w = window.eval(x);
                let f = feature.eval(x);
                add(scale(feature.grad(x), w), scale(window.grad(x), f))
            }
            Feature::Morph(m) => {
                let ctx = m.family_index().map(|i| pool[i].signed_distance(x));
                m.grad(x, ctx)
            }
        }
    }
}

/// Ordered, frozen collection of features plus the contour pool they share.
#[derive(Debug, Clone, Default)]
pub struct BasisSet {
    features: Vec<Feature>,
    contour_pool: Vec<ContourFamily>,
    seed: Option<u64>,
}

impl BasisSet {
    pub fn new() -> BasisSet {
        BasisSet::default()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn contour_pool(&self) -> &[ContourFamily] {
        &self.contour_pool
    }

    pub fn push(&mut self, f: Feature) {
        self.features.push(f);
    }

    /// Registers a contour family, returning its pool index for
    /// `ContourSigmoid` features.
    pub fn add_contour_family(&mut self, family: ContourFamily) -> usize {
        self.contour_pool.push(family);
        self.contour_pool.len() - 1
    }

    pub fn extend(&mut self, other: impl IntoIterator<Item = Feature>) {
        self.features.extend(other);
    }

    /// Appends another set's features, remapping its contour-pool indices
    /// past this set's pool.
    pub fn merge(&mut self, other: BasisSet) {
        let offset = self.contour_pool.len();
        self.contour_pool.extend(other.contour_pool);
        for mut f in other.features {
            if let Feature::Morph(MorphBasis::ContourSigmoid { family, .. }) = &mut f {
                *family += offset;
            }
            self.features.push(f);
        }
    }

    pub fn eval(&self, m: usize, x: Point) -> f64 {
        self.features[m].eval(x, &self.contour_pool)
    }

    pub fn grad(&self, m: usize, x: Point) -> Point {
        self.features[m].grad(x, &self.contour_pool)
    }

    /// Row of feature values at `x`, with the per-family contour geometry
    /// computed once and shared by all offsets.
    pub fn eval_row_into(&self, x: Point, row: &mut [f64]) {
        debug_assert_eq!(row.len(), self.features.len());
        let pool_data: Vec<(f64, Point)> = self
            .contour_pool
            .iter()
            .map(|f| f.signed_distance(x))
            .collect();
        for (slot, feat) in row.iter_mut().zip(&self.features) {
            *slot = match feat {
                Feature::Random(f) => f.eval(x),
                Feature::LocalizedRandom { window, feature } => window.eval(x) * feature.eval(x),
                Feature::Morph(m) => m.eval(x, m.family_index().map(|i| pool_data[i])),
            };
        }
    }

    /// Σ_m s_m φ_m(x) and Σ_m s_m ∇φ_m(x) in one pass.
    pub fn accumulate(&self, x: Point, coeffs: &[f64]) -> (f64, Point) {
        debug_assert_eq!(coeffs.len(), self.features.len());
        let pool_data: Vec<(f64, Point)> = self
            .contour_pool
            .iter()
            .map(|f| f.signed_distance(x))
            .collect();
        let mut value = 0.0;
        let mut grad = [0.0f64; 3];
        for (feat, &s) in self.features.iter().zip(coeffs) {
            if s == 0.0 {
                continue;
            }
            let (v, g) = match feat {
                Feature::Random(f) => (f.eval(x), f.grad(x)),
                Feature::LocalizedRandom { window, feature } => {
                    let w = window.eval(x);
                    let fv = feature.eval(x);
                    (
                        w * fv,
                        add(scale(feature.grad(x), w), scale(window.grad(x), fv)),
                    )
                }
                Feature::Morph(m) => {
                    let ctx = m.family_index().map(|i| pool_data[i]);
                    (m.eval(x, ctx), m.grad(x, ctx))
                }
            };
            value += s * v;
            grad = add(grad, scale(g, s));
        }
        (value, grad)
    }

    /// Serializes as `{seed, contour_pool, features: [{index, ...}, ...]}`;
    /// the explicit index pins the column ordering for resumption.
    pub fn to_json(&self) -> Result<String> {
        let doc = BasisSetDoc {
            seed: self.seed,
            contour_pool: self.contour_pool.clone(),
            features: self
                .features
                .iter()
                .cloned()
                .enumerate()
                .map(|(index, feature)| IndexedFeature { index, feature })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<BasisSet> {
        let doc: BasisSetDoc = serde_json::from_str(text)?;
        let mut features = vec![None; doc.features.len()];
        for item in doc.features {
            if item.index >= features.len() || features[item.index].is_some() {
                return Err(Error::Basis(format!(
                    "bad or duplicate feature index {}",
                    item.index
                )));
            }
            if let Some(fam) = feature_family(&item.feature) {
                if fam >= doc.contour_pool.len() {
                    return Err(Error::Basis(format!(
                        "feature {} references missing contour family {fam}",
                        item.index
                    )));
                }
            }
            features[item.index] = Some(item.feature);
        }
        Ok(BasisSet {
            features: features.into_iter().map(|f| f.unwrap()).collect(),
            contour_pool: doc.contour_pool,
            seed: doc.seed,
        })
    }
}

fn feature_family(f: &Feature) -> Option<usize> {
    match f {
        Feature::Morph(m) => m.family_index(),
        _ => None,
    }
}

#[derive(Serialize, Deserialize)]
struct BasisSetDoc {
    seed: Option<u64>,
    contour_pool: Vec<ContourFamily>,
    features: Vec<IndexedFeature>,
}

#[derive(Serialize, Deserialize)]
struct IndexedFeature {
    index: usize,
    #[serde(flatten)]
    feature: Feature,
}

/// Draws `m` random features with `k ~ U(-r_m, r_m)^d`, `b ~ U(-r_m, r_m)`,
/// frozen thereafter; reproducible for a given seed.
pub fn build_random_set(
    dim: Dim,
    m: usize,
    r_m: f64,
    activation: Activation,
    seed: u64,
) -> Result<BasisSet> {
    if m == 0 {
        return Err(Error::Basis("need at least one random feature".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = BasisSet {
        seed: Some(seed),
        ..BasisSet::default()
    };
    for _ in 0..m {
        let mut direction = [0.0f64; 3];
        for slot in direction.iter_mut().take(dim.n()) {
            *slot = uniform(&mut rng, -r_m, r_m);
        }
        let bias = uniform(&mut rng, -r_m, r_m);
        set.push(Feature::Random(RandomFeature {
            direction,
            bias,
            activation,
        }));
    }
    Ok(set)
}

/// [`build_random_set`] on the standardized coordinate of a box: features
/// read `σ(k · x̃ + b)` with `x̃ = (x - center)/radius` per axis, so `R_m`
/// controls oscillation across the box independently of its physical size.
/// The affine map folds into the stored direction and bias.
pub fn build_random_set_standardized(
    dim: Dim,
    m: usize,
    r_m: f64,
    activation: Activation,
    seed: u64,
    box_lo: Point,
    box_hi: Point,
) -> Result<BasisSet> {
    let mut set = build_random_set(dim, m, r_m, activation, seed)?;
    let mut center = [0.0f64; 3];
    let mut radius = [1.0f64; 3];
    for a in 0..dim.n() {
        center[a] = 0.5 * (box_lo[a] + box_hi[a]);
        radius[a] = 0.5 * (box_hi[a] - box_lo[a]);
        if !(radius[a] > 0.0) {
            return Err(Error::Basis(format!("degenerate box on axis {a}")));
        }
    }
    for feature in &mut set.features {
        if let Feature::Random(f) = feature {
            let mut shift = 0.0;
            for a in 0..dim.n() {
                f.direction[a] /= radius[a];
                shift += f.direction[a] * center[a];
            }
            f.bias -= shift;
        }
    }
    Ok(set)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo // degenerate window: the detected value itself
    } else if lo < hi {
        rng.random_range(lo..hi)
    } else {
        rng.random_range(hi..lo)
    }
}

/// Sampling windows for one group of morphology bases. Windows are closed
/// descriptions (already combining detected statistics with tolerances);
/// degenerate windows reproduce the detected values exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum MorphSampler {
    Circle {
        center: Point,
        center_rel_tol: f64,
        radius: f64,
        radius_rel_tol: f64,
        sharpness: (f64, f64),
    },
    Rectangle {
        center: Point,
        center_rel_tol: f64,
        width: f64,
        width_rel_tol: f64,
        height: f64,
        height_rel_tol: f64,
        sharpness: (f64, f64),
    },
    TruncatedGaussianCircle {
        center: Point,
        center_rel_tol: f64,
        radius: f64,
        radius_rel_tol: f64,
        sharpness: (f64, f64),
        decay: (f64, f64),
    },
    GaussianBump {
        center: Point,
        center_abs_tol: f64,
        decay: (f64, f64),
    },
    ReluCone {
        center: Point,
        center_abs_tol: f64,
        radius: (f64, f64),
    },
    Torus {
        center: Point,
        center_abs_tol: f64,
        major_radius: (f64, f64),
        minor_radius: (f64, f64),
        sharpness: (f64, f64),
    },
    Contour {
        family: usize,
        rho: (f64, f64),
        sharpness: (f64, f64),
        mode: ContourDistance,
    },
}

/// Draws `count` frozen morphology bases from the sampler's windows.
/// Multiplicative windows follow `U((1-ε)v, (1+ε)v)` per component;
/// absolute windows `U(v-a, v+a)`.
pub fn sample_morphology(
    sampler: &MorphSampler,
    count: usize,
    seed: u64,
) -> Result<Vec<MorphBasis>> {
    if count == 0 {
        return Err(Error::Basis("requested zero morphology bases".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(sample_one(sampler, &mut rng)?);
    }
    Ok(out)
}

fn rel_window(rng: &mut ChaCha8Rng, v: f64, eps: f64) -> f64 {
    uniform(rng, (1.0 - eps) * v, (1.0 + eps) * v)
}

fn abs_window(rng: &mut ChaCha8Rng, v: f64, a: f64) -> f64 {
    uniform(rng, v - a, v + a)
}

fn sample_one(sampler: &MorphSampler, rng: &mut ChaCha8Rng) -> Result<MorphBasis> {
    Ok(match *sampler {
        MorphSampler::Circle {
            center,
            center_rel_tol,
            radius,
            radius_rel_tol,
            sharpness,
        } => {
            check_positive("circle radius", radius)?;
            MorphBasis::SigmoidCircle {
                center: [
                    rel_window(rng, center[0], center_rel_tol),
                    rel_window(rng, center[1], center_rel_tol),
                    rel_window(rng, center[2], center_rel_tol),
                ],
                radius: rel_window(rng, radius, radius_rel_tol),
                sharpness: uniform(rng, sharpness.0, sharpness.1),
            }
        }
        MorphSampler::Rectangle {
            center,
            center_rel_tol,
            width,
            width_rel_tol,
            height,
            height_rel_tol,
            sharpness,
        } => {
            check_positive("rectangle width", width)?;
            check_positive("rectangle height", height)?;
            MorphBasis::SigmoidRectangle {
                center: [
                    rel_window(rng, center[0], center_rel_tol),
                    rel_window(rng, center[1], center_rel_tol),
                    0.0,
                ],
                width: rel_window(rng, width, width_rel_tol),
                height: rel_window(rng, height, height_rel_tol),
                sharpness: uniform(rng, sharpness.0, sharpness.1),
            }
        }
        MorphSampler::TruncatedGaussianCircle {
            center,
            center_rel_tol,
            radius,
            radius_rel_tol,
            sharpness,
            decay,
        } => {
            check_positive("circle radius", radius)?;
            MorphBasis::TruncatedGaussianCircle {
                center: [
                    rel_window(rng, center[0], center_rel_tol),
                    rel_window(rng, center[1], center_rel_tol),
                    rel_window(rng, center[2], center_rel_tol),
                ],
                radius: rel_window(rng, radius, radius_rel_tol),
                sharpness: uniform(rng, sharpness.0, sharpness.1),
                decay: uniform(rng, decay.0, decay.1),
            }
        }
        MorphSampler::GaussianBump {
            center,
            center_abs_tol,
            decay,
        } => MorphBasis::GaussianBump {
            center: [
                abs_window(rng, center[0], center_abs_tol),
                abs_window(rng, center[1], center_abs_tol),
                abs_window(rng, center[2], center_abs_tol),
            ],
            decay: uniform(rng, decay.0, decay.1),
        },
        MorphSampler::ReluCone {
            center,
            center_abs_tol,
            radius,
        } => MorphBasis::ReluCone {
            center: [
                abs_window(rng, center[0], center_abs_tol),
                abs_window(rng, center[1], center_abs_tol),
                abs_window(rng, center[2], center_abs_tol),
            ],
            radius: uniform(rng, radius.0, radius.1),
        },
        MorphSampler::Torus {
            center,
            center_abs_tol,
            major_radius,
            minor_radius,
            sharpness,
        } => MorphBasis::TorusSigmoid {
            center: [
                abs_window(rng, center[0], center_abs_tol),
                abs_window(rng, center[1], center_abs_tol),
                abs_window(rng, center[2], center_abs_tol),
            ],
            major_radius: uniform(rng, major_radius.0, major_radius.1),
            minor_radius: uniform(rng, minor_radius.0, minor_radius.1),
            sharpness: uniform(rng, sharpness.0, sharpness.1),
        },
        MorphSampler::Contour {
            family,
            rho,
            sharpness,
            mode,
        } => MorphBasis::ContourSigmoid {
            family,
            rho: uniform(rng, rho.0, rho.1),
            sharpness: uniform(rng, sharpness.0, sharpness.1),
            mode,
        },
    })
}

fn check_positive(what: &'static str, v: f64) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::Basis(format!(
            "{what} must be positive (detected {v}); empty detection region?"
        )))
    }
}
