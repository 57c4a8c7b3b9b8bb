//! Measurement layouts: where boundary data is collected and with which
//! outward normals.

use serde::{Deserialize, Serialize};

use crate::assembly::MeasurementPoint;
use crate::point::Point;
use crate::{Error, Result};

/// Geometry of the measurement set.
///
/// * `RectangleBoundary` — `n_side` points per side including corners;
///   corners are deduplicated (counted once, keeping the left/right side's
///   normal), giving `4 n_side - 4` points.
/// * `BoxSurface` — `n_side × n_side` grid per face of a 3-D box, shared
///   edge points kept once (first face wins, face order -x +x -y +y -z +z).
/// * `CircleArc` — points on `θ ∈ [0, theta_max]` with `n_quarter` points
///   per quarter arc; the full circle is sampled periodically without the
///   duplicate seam point, partial arcs include both endpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasurementLayout {
    RectangleBoundary {
        lo: [f64; 2],
        hi: [f64; 2],
        n_side: usize,
    },
    BoxSurface {
        lo: [f64; 3],
        hi: [f64; 3],
        n_side: usize,
    },
    CircleArc {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
        n_quarter: usize,
        #[serde(default = "default_theta_max")]
        theta_max: f64,
    },
}

fn default_theta_max() -> f64 {
    2.0 * std::f64::consts::PI
}

impl MeasurementLayout {
    /// Builds the measurement points with the requested data kinds.
    pub fn points(&self, dirichlet: bool, neumann: bool) -> Result<Vec<MeasurementPoint>> {
        if !dirichlet && !neumann {
            return Err(Error::Config {
                path: "data.kinds".into(),
                msg: "at least one of dirichlet/neumann must be collected".into(),
            });
        }
        let raw = match self {
            MeasurementLayout::RectangleBoundary { lo, hi, n_side } => {
                rectangle_points(*lo, *hi, *n_side)?
            }
            MeasurementLayout::BoxSurface { lo, hi, n_side } => box_points(*lo, *hi, *n_side)?,
            MeasurementLayout::CircleArc {
                center,
                radius,
                n_quarter,
                theta_max,
            } => arc_points(*center, *radius, *n_quarter, *theta_max)?,
        };
        Ok(raw
            .into_iter()
            .map(|(x, nu)| MeasurementPoint {
                x,
                nu: Some(nu),
                dirichlet,
                neumann,
            })
            .collect())
    }
}

fn rectangle_points(lo: [f64; 2], hi: [f64; 2], n: usize) -> Result<Vec<(Point, Point)>> {
    if n < 2 {
        return Err(Error::Config {
            path: "layout.n_side".into(),
            msg: "need at least 2 points per side".into(),
        });
    }
    let hx = (hi[0] - lo[0]) / (n - 1) as f64;
    let hy = (hi[1] - lo[1]) / (n - 1) as f64;
    let mut out: Vec<(Point, Point)> = Vec::with_capacity(4 * n - 4);
    let push_unique = |p: Point, nu: Point, out: &mut Vec<(Point, Point)>| {
        if !out.iter().any(|(q, _)| *q == p) {
            out.push((p, nu));
        }
    };
    for i in 0..n {
        let y = lo[1] + i as f64 * hy;
        push_unique([lo[0], y, 0.0], [-1.0, 0.0, 0.0], &mut out);
        push_unique([hi[0], y, 0.0], [1.0, 0.0, 0.0], &mut out);
    }
    for i in 0..n {
        let x = lo[0] + i as f64 * hx;
        push_unique([x, lo[1], 0.0], [0.0, -1.0, 0.0], &mut out);
        push_unique([x, hi[1], 0.0], [0.0, 1.0, 0.0], &mut out);
    }
    Ok(out)
}

fn box_points(lo: [f64; 3], hi: [f64; 3], n: usize) -> Result<Vec<(Point, Point)>> {
    if n < 2 {
        return Err(Error::Config {
            path: "layout.n_side".into(),
            msg: "need at least 2 points per edge".into(),
        });
    }
    let mut out: Vec<(Point, Point)> = Vec::new();
    let step = |a: usize, i: usize| lo[a] + (hi[a] - lo[a]) * i as f64 / (n - 1) as f64;
    let push_unique = |p: Point, nu: Point, out: &mut Vec<(Point, Point)>| {
        if !out.iter().any(|(q, _)| *q == p) {
            out.push((p, nu));
        }
    };
    // Face order: -x, +x, -y, +y, -z, +z.
    for (axis, side) in [(0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1)] {
        let (u, v) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let mut nu = [0.0f64; 3];
        nu[axis] = if side == 0 { -1.0 } else { 1.0 };
        let fixed = if side == 0 { lo[axis] } else { hi[axis] };
        for i in 0..n {
            for j in 0..n {
                let mut p = [0.0f64; 3];
                p[axis] = fixed;
                p[u] = step(u, i);
                p[v] = step(v, j);
                push_unique(p, nu, &mut out);
            }
        }
    }
    Ok(out)
}

fn arc_points(
    center: [f64; 2],
    radius: f64,
    n_quarter: usize,
    theta_max: f64,
) -> Result<Vec<(Point, Point)>> {
    if radius <= 0.0 || n_quarter == 0 {
        return Err(Error::Config {
            path: "layout".into(),
            msg: "radius and n_quarter must be positive".into(),
        });
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    if !(theta_max > 0.0 && theta_max <= two_pi + 1e-12) {
        return Err(Error::Config {
            path: "layout.theta_max".into(),
            msg: format!("aperture {theta_max} outside (0, 2π]"),
        });
    }
    let total = ((n_quarter as f64) * theta_max / (0.5 * std::f64::consts::PI)).round() as usize;
    let total = total.max(2);
    let full_circle = (theta_max - two_pi).abs() < 1e-12;
    let mut out = Vec::with_capacity(total);
    for i in 0..total {
        let theta = if full_circle {
            theta_max * i as f64 / total as f64
        } else {
            theta_max * i as f64 / (total - 1) as f64
        };
        let nu = [theta.cos(), theta.sin(), 0.0];
        out.push((
            [
                center[0] + radius * nu[0],
                center[1] + radius * nu[1],
                0.0,
            ],
            nu,
        ));
    }
    Ok(out)
}
