//! Posterior detection of critical regions: threshold the reconstruction
//! (and/or its gradient magnitude) on a test grid, split the surviving
//! points into face-connected components, and summarize each component's
//! shape for the basis samplers.

use serde::{Deserialize, Serialize};

use super::model::{SourceModel, TestGrid};
use crate::point::{dist, Point};
use crate::{Error, Result};

/// Which thresholded set defines the critical region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectMode {
    Abs,
    Grad,
    Intersection,
}

/// Thresholded masks and their connected components over a test grid.
#[derive(Debug, Clone)]
pub struct PosteriorMask {
    pub grid: TestGrid,
    pub t_abs: f64,
    pub t_grad: f64,
    pub mode: DetectMode,
    pub q_abs: Vec<bool>,
    pub q_grad: Vec<bool>,
    /// The active mask per `mode`.
    pub q: Vec<bool>,
    /// Connected components of `q` (face adjacency), each a list of flat
    /// grid indices, ordered by component centroid (lexicographic).
    pub components: Vec<Vec<usize>>,
    /// Model values on the grid (reused by shape estimation).
    pub values: Vec<f64>,
    pub grad_norms: Vec<f64>,
}

/// Thresholds `|S|/‖S‖∞ ≥ t_abs` and `‖∇S‖/‖∇S‖∞ ≥ t_grad` on the grid and
/// labels the face-connected components of the selected mask.
pub fn detect_regions(
    model: &SourceModel,
    grid: &TestGrid,
    t_abs: f64,
    t_grad: f64,
    mode: DetectMode,
) -> Result<PosteriorMask> {
    if !(0.0 < t_abs && t_abs < 1.0) || !(0.0 < t_grad && t_grad < 1.0) {
        return Err(Error::Detection(format!(
            "thresholds must lie in (0,1): t_abs = {t_abs}, t_grad = {t_grad}"
        )));
    }
    let points = grid.points();
    let evals = model.eval_batch(&points);
    let values: Vec<f64> = evals.iter().map(|(v, _)| *v).collect();
    let grad_norms: Vec<f64> = evals
        .iter()
        .map(|(_, g)| (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt())
        .collect();
    let sup_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sup_grad = grad_norms.iter().fold(0.0f64, |m, v| m.max(*v));
    if sup_abs == 0.0 {
        return Err(Error::Detection(
            "reconstruction is identically zero on the test grid".into(),
        ));
    }
    let q_abs: Vec<bool> = values.iter().map(|v| v.abs() / sup_abs >= t_abs).collect();
    let q_grad: Vec<bool> = grad_norms
        .iter()
        .map(|v| sup_grad > 0.0 && v / sup_grad >= t_grad)
        .collect();
    let q: Vec<bool> = match mode {
        DetectMode::Abs => q_abs.clone(),
        DetectMode::Grad => q_grad.clone(),
        DetectMode::Intersection => q_abs
            .iter()
            .zip(&q_grad)
            .map(|(a, g)| *a && *g)
            .collect(),
    };
    if q.iter().all(|v| !v) {
        return Err(Error::Detection(
            "empty detected region; lower t_abs/t_grad".into(),
        ));
    }
    let mut components = connected_components(grid, &q);
    // Deterministic region order: by centroid, lexicographic.
    components.sort_by(|a, b| {
        let ca = centroid(grid, a);
        let cb = centroid(grid, b);
        ca.partial_cmp(&cb).unwrap()
    });
    Ok(PosteriorMask {
        grid: grid.clone(),
        t_abs,
        t_grad,
        mode,
        q_abs,
        q_grad,
        q,
        components,
        values,
        grad_norms,
    })
}

fn centroid(grid: &TestGrid, component: &[usize]) -> Point {
    let mut c = [0.0f64; 3];
    for &i in component {
        let p = grid.point(i);
        for a in 0..3 {
            c[a] += p[a];
        }
    }
    for v in c.iter_mut() {
        *v /= component.len() as f64;
    }
    c
}

/// Breadth-first labeling over face-adjacent grid points.
fn connected_components(grid: &TestGrid, mask: &[bool]) -> Vec<Vec<usize>> {
    let mut label = vec![usize::MAX; mask.len()];
    let mut components = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || label[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = Vec::new();
        label[start] = id;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            members.push(i);
            for n in grid.neighbours(i) {
                if mask[n] && label[n] == usize::MAX {
                    label[n] = id;
                    queue.push_back(n);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

/// What shape statistics to extract for a component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Circle,
    Rectangle,
    GaussianPeak,
    Cone,
    Torus,
    Contour,
}

/// Per-axis slice statistics around the component's peak.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeakStats {
    pub peak: Point,
    pub peak_value: f64,
    pub fwhm: [f64; 3],
    pub v_min: f64,
    pub v_max: f64,
}

/// Bounding-box and kind-specific statistics of one detected component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeEstimate {
    pub kind: ShapeKind,
    pub bbox_lo: Point,
    pub bbox_hi: Point,
    /// Midpoint of the bounding extremes.
    pub center: Point,
    /// Max of the half-extents.
    pub radius: f64,
    pub width: f64,
    pub height: f64,
    pub depth: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak: Option<PeakStats>,
    /// Closed half-max contour (closure point repeated), when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contour: Option<Vec<Point>>,
    /// Torus-specific ring statistics.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ring_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tube_radius: Option<f64>,
}

/// Summarizes one component. Gaussian/cone kinds add peak statistics,
/// contour kinds extract the half-max level line, torus kinds the ring
/// geometry.
pub fn estimate_shape(
    mask: &PosteriorMask,
    component_index: usize,
    model: &SourceModel,
    kind: ShapeKind,
) -> Result<ShapeEstimate> {
    let component = mask
        .components
        .get(component_index)
        .ok_or_else(|| Error::Detection(format!("no component {component_index}")))?;
    if component.is_empty() {
        return Err(Error::Detection("empty component".into()));
    }
    let grid = &mask.grid;
    let d = grid.dim.n();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in component {
        let p = grid.point(i);
        for a in 0..d {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    for a in d..3 {
        lo[a] = 0.0;
        hi[a] = 0.0;
    }
    let mut center = [0.0f64; 3];
    let mut half = [0.0f64; 3];
    for a in 0..d {
        center[a] = 0.5 * (lo[a] + hi[a]);
        half[a] = 0.5 * (hi[a] - lo[a]);
    }
    let radius = half[..d].iter().fold(0.0f64, |m, v| m.max(*v));

    let mut estimate = ShapeEstimate {
        kind,
        bbox_lo: lo,
        bbox_hi: hi,
        center,
        radius,
        width: hi[0] - lo[0],
        height: hi[1] - lo[1],
        depth: if d == 3 { hi[2] - lo[2] } else { 0.0 },
        peak: None,
        contour: None,
        ring_radius: None,
        tube_radius: None,
    };

    match kind {
        ShapeKind::GaussianPeak | ShapeKind::Cone => {
            estimate.peak = Some(peak_stats(mask, component, model)?);
        }
        ShapeKind::Contour => {
            let peak_abs = component
                .iter()
                .map(|&i| mask.values[i].abs())
                .fold(0.0f64, f64::max);
            let level = 0.5 * peak_abs;
            estimate.contour = Some(extract_half_max_contour(mask, component, level)?);
        }
        ShapeKind::Torus => {
            // Ring radius: mean in-plane distance of component points from
            // the center axis; tube radius: half the vertical extent.
            let mut ring = 0.0;
            for &i in component {
                let p = grid.point(i);
                ring += ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt();
            }
            estimate.ring_radius = Some(ring / component.len() as f64);
            estimate.tube_radius = Some(half[2]);
        }
        ShapeKind::Circle | ShapeKind::Rectangle => {}
    }
    Ok(estimate)
}

/// Full width at half maximum per axis on model slices through the peak,
/// and the decay-rate window `v = 2.3548² / (2 FWHM²)` it brackets.
fn peak_stats(
    mask: &PosteriorMask,
    component: &[usize],
    model: &SourceModel,
) -> Result<PeakStats> {
    let grid = &mask.grid;
    let d = grid.dim.n();
    let &peak_idx = component
        .iter()
        .max_by(|&&a, &&b| {
            mask.values[a]
                .abs()
                .partial_cmp(&mask.values[b].abs())
                .unwrap()
        })
        .unwrap();
    let peak = grid.point(peak_idx);
    let peak_value = mask.values[peak_idx];
    let sign = peak_value.signum();
    let mut fwhm = [0.0f64; 3];
    for axis in 0..d {
        let n = grid.shape[axis];
        let mut line = Vec::with_capacity(n);
        for i in 0..n {
            let mut p = peak;
            p[axis] = grid.lo[axis] + (i as f64 + 0.5) * grid.step(axis);
            line.push(sign * model.value(p));
        }
        let max = line.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        let half = 0.5 * max;
        let first = line.iter().position(|&v| v >= half);
        let last = line.iter().rposition(|&v| v >= half);
        match (first, last) {
            (Some(a), Some(b)) if b >= a => {
                fwhm[axis] = (b - a + 1) as f64 * grid.step(axis);
            }
            _ => {
                return Err(Error::Detection(format!(
                    "no half-max crossing on axis {axis}"
                )))
            }
        }
    }
    const FWHM_FACTOR: f64 = 2.354_820_045; // 2 √(2 ln 2)
    let fmax = fwhm[..d].iter().fold(0.0f64, |m, v| m.max(*v));
    let fmin = fwhm[..d].iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if fmin <= 0.0 {
        return Err(Error::Detection("degenerate FWHM".into()));
    }
    Ok(PeakStats {
        peak,
        peak_value,
        fwhm,
        v_min: FWHM_FACTOR * FWHM_FACTOR / (2.0 * fmax * fmax),
        v_max: FWHM_FACTOR * FWHM_FACTOR / (2.0 * fmin * fmin),
    })
}

/// Extracts the closed `|S| = level` contour around a component by marching
/// squares with linear interpolation (2-D only). The loop containing the
/// component peak is returned with its closure point repeated; a chain that
/// leaves the grid is reported as an open-contour error.
pub fn extract_half_max_contour(
    mask: &PosteriorMask,
    component: &[usize],
    level: f64,
) -> Result<Vec<Point>> {
    let grid = &mask.grid;
    if grid.dim.n() != 2 {
        return Err(Error::Detection("contour extraction is 2-D only".into()));
    }
    let [nx, ny, _] = grid.shape;
    let value = |ix: usize, iy: usize| mask.values[grid.flat([ix, iy, 0])].abs();

    // Segment soup over grid cells, endpoints keyed for chaining.
    let mut segments: Vec<(Point, Point)> = Vec::new();
    for iy in 0..ny - 1 {
        for ix in 0..nx - 1 {
            let corners = [
                value(ix, iy),
                value(ix + 1, iy),
                value(ix + 1, iy + 1),
                value(ix, iy + 1),
            ];
            let pos = [
                grid.point(grid.flat([ix, iy, 0])),
                grid.point(grid.flat([ix + 1, iy, 0])),
                grid.point(grid.flat([ix + 1, iy + 1, 0])),
                grid.point(grid.flat([ix, iy + 1, 0])),
            ];
            let mut case = 0usize;
            for (b, &v) in corners.iter().enumerate() {
                if v >= level {
                    case |= 1 << b;
                }
            }
            if case == 0 || case == 15 {
                continue;
            }
            let edge_point = |a: usize, b: usize| -> Point {
                let t = (level - corners[a]) / (corners[b] - corners[a]);
                [
                    pos[a][0] + t * (pos[b][0] - pos[a][0]),
                    pos[a][1] + t * (pos[b][1] - pos[a][1]),
                    0.0,
                ]
            };
            // Edges: 0 = bottom(0-1), 1 = right(1-2), 2 = top(2-3), 3 = left(3-0).
            let e = |idx: usize| -> Point {
                match idx {
                    0 => edge_point(0, 1),
                    1 => edge_point(1, 2),
                    2 => edge_point(2, 3),
                    _ => edge_point(3, 0),
                }
            };
            let segs: &[(usize, usize)] = match case {
                1 => &[(3, 0)],
                2 => &[(0, 1)],
                3 => &[(3, 1)],
                4 => &[(1, 2)],
                5 => &[(3, 2), (1, 0)], // ambiguous saddle, consistent split
                6 => &[(0, 2)],
                7 => &[(3, 2)],
                8 => &[(2, 3)],
                9 => &[(2, 0)],
                10 => &[(0, 3), (2, 1)],
                11 => &[(2, 1)],
                12 => &[(1, 3)],
                13 => &[(1, 0)],
                14 => &[(0, 3)],
                _ => &[],
            };
            for &(a, b) in segs {
                segments.push((e(a), e(b)));
            }
        }
    }
    if segments.is_empty() {
        return Err(Error::Detection("no contour at the requested level".into()));
    }

    // Chain segments into loops (endpoints quantized for matching).
    let quant = |p: Point| -> (i64, i64) {
        let s = 1e9;
        ((p[0] * s).round() as i64, (p[1] * s).round() as i64)
    };
    let mut start_of: std::collections::HashMap<(i64, i64), Vec<usize>> =
        std::collections::HashMap::new();
    for (i, seg) in segments.iter().enumerate() {
        start_of.entry(quant(seg.0)).or_default().push(i);
    }
    let mut used = vec![false; segments.len()];
    let mut loops: Vec<Vec<Point>> = Vec::new();
    for i in 0..segments.len() {
        if used[i] {
            continue;
        }
        let mut chain = vec![segments[i].0, segments[i].1];
        used[i] = true;
        let origin = quant(segments[i].0);
        let mut closed = false;
        loop {
            let tail = quant(*chain.last().unwrap());
            if tail == origin {
                closed = true;
                break;
            }
            let next = start_of
                .get(&tail)
                .and_then(|cands| cands.iter().find(|&&j| !used[j]).copied());
            match next {
                Some(j) => {
                    used[j] = true;
                    chain.push(segments[j].1);
                }
                None => break,
            }
        }
        if closed {
            loops.push(chain);
        } else {
            return Err(Error::Detection(
                "open contour: level line leaves the test grid".into(),
            ));
        }
    }

    // Keep the loop around the component's peak (largest enclosing one).
    let peak_idx = component
        .iter()
        .copied()
        .max_by(|&a, &b| mask.values[a].abs().partial_cmp(&mask.values[b].abs()).unwrap())
        .ok_or_else(|| Error::Detection("empty component".into()))?;
    let peak = grid.point(peak_idx);
    let enclosing: Vec<&Vec<Point>> = loops
        .iter()
        .filter(|lp| polygon_contains(lp, peak))
        .collect();
    let chosen = enclosing
        .into_iter()
        .max_by(|a, b| {
            polygon_area(a)
                .partial_cmp(&polygon_area(b))
                .unwrap()
        })
        .or_else(|| {
            // Fall back to the loop closest to the peak.
            loops.iter().min_by(|a, b| {
                let da = a.iter().map(|&p| dist(p, peak)).fold(f64::INFINITY, f64::min);
                let db = b.iter().map(|&p| dist(p, peak)).fold(f64::INFINITY, f64::min);
                da.partial_cmp(&db).unwrap()
            })
        })
        .ok_or_else(|| Error::Detection("no closed loop found".into()))?;
    Ok(chosen.clone())
}

fn polygon_contains(poly: &[Point], x: Point) -> bool {
    let m = poly.len() - 1;
    let mut inside = false;
    let mut j = m - 1;
    for i in 0..m {
        let (xi, yi) = (poly[i][0], poly[i][1]);
        let (xj, yj) = (poly[j][0], poly[j][1]);
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

fn polygon_area(poly: &[Point]) -> f64 {
    let m = poly.len() - 1;
    let mut area2 = 0.0;
    for i in 0..m {
        let p = poly[i];
        let q = poly[(i + 1) % m];
        area2 += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * area2.abs()
}

/// Component-level summary used by region-to-spec matching.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentStats {
    pub size: usize,
    pub centroid: Point,
}

impl PosteriorMask {
    pub fn component_stats(&self) -> Vec<ComponentStats> {
        self.components
            .iter()
            .map(|c| ComponentStats {
                size: c.len(),
                centroid: centroid(&self.grid, c),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisSet, Feature, MorphBasis};
    use crate::pipeline::model::{Provenance, SourceModel};
    use crate::pipeline::testkit;
    use crate::point::Dim;

    fn grid(n: usize) -> TestGrid {
        TestGrid::regular(Dim::Two, [0.0; 3], [1.0, 1.0, 0.0], n)
    }

    #[test]
    fn single_bump_gives_one_component() {
        let model = testkit::bump_model([0.3, 0.6, 0.0], 80.0);
        let mask = detect_regions(&model, &grid(60), 0.5, 0.5, DetectMode::Abs).unwrap();
        assert_eq!(mask.components.len(), 1);
    }

    #[test]
    fn two_discs_give_two_components() {
        // Two truncated-gaussian discs, split by the gradient mask with
        // t_grad = 1/2.8.
        let mut basis = BasisSet::new();
        for center in [[-0.06, 0.0, 0.0], [0.08, 0.0, 0.0]] {
            basis.push(Feature::Morph(MorphBasis::TruncatedGaussianCircle {
                center,
                radius: 0.06,
                sharpness: 5000.0,
                decay: 550.0,
            }));
        }
        let model = SourceModel::new(basis, vec![0.5, 0.5], Provenance::Initial);
        let g = TestGrid::regular(Dim::Two, [-0.3, -0.3, 0.0], [0.3, 0.3, 0.0], 200);
        let mask = detect_regions(&model, &g, 0.5, 1.0 / 2.8, DetectMode::Grad).unwrap();
        assert_eq!(mask.components.len(), 2);
        // Ordered by centroid: left disc first.
        let stats = mask.component_stats();
        assert!(stats[0].centroid[0] < stats[1].centroid[0]);
    }

    #[test]
    fn bad_thresholds_rejected() {
        let model = testkit::bump_model([0.5, 0.5, 0.0], 50.0);
        assert!(detect_regions(&model, &grid(20), 0.0, 0.5, DetectMode::Abs).is_err());
        assert!(detect_regions(&model, &grid(20), 0.5, 1.0, DetectMode::Abs).is_err());
    }

    #[test]
    fn empty_region_reports_helpfully() {
        // A constant model has zero gradient everywhere: Q_grad is empty.
        let mut basis = BasisSet::new();
        basis.push(Feature::Morph(MorphBasis::GaussianBump {
            center: [0.0; 3],
            decay: 0.0,
        }));
        let model = SourceModel::new(basis, vec![1.0], Provenance::Initial);
        let err = detect_regions(&model, &grid(10), 0.5, 0.5, DetectMode::Grad).unwrap_err();
        assert!(err.to_string().contains("lower t_abs/t_grad"));
    }

    /// Independent union-find component counter.
    fn union_find_count(grid: &TestGrid, mask: &[bool]) -> usize {
        let mut parent: Vec<usize> = (0..mask.len()).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            let mut root = i;
            while parent[root] != root {
                root = parent[root];
            }
            let mut cur = i;
            while parent[cur] != root {
                let next = parent[cur];
                parent[cur] = root;
                cur = next;
            }
            root
        }
        for i in 0..mask.len() {
            if !mask[i] {
                continue;
            }
            for n in grid.neighbours(i) {
                if mask[n] {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, n));
                    if a != b {
                        parent[a] = b;
                    }
                }
            }
        }
        let mut roots = std::collections::BTreeSet::new();
        for i in 0..mask.len() {
            if mask[i] {
                let r = find(&mut parent, i);
                roots.insert(r);
            }
        }
        roots.len()
    }

    #[test]
    fn component_count_matches_union_find_oracle() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let g = grid(24);
        for _ in 0..50 {
            let density = rng.random_range(0.2..0.7);
            let mask: Vec<bool> = (0..g.len()).map(|_| rng.random_bool(density)).collect();
            let mine = super::connected_components(&g, &mask).len();
            let oracle = union_find_count(&g, &mask);
            assert_eq!(mine, oracle);
        }
    }

    #[test]
    fn disc_shape_estimate_center_and_radius() {
        let mut basis = BasisSet::new();
        basis.push(Feature::Morph(MorphBasis::SigmoidCircle {
            center: [0.5, 0.497, 0.0],
            radius: 0.22,
            sharpness: 3000.0,
        }));
        let model = SourceModel::new(basis, vec![1.0], Provenance::Initial);
        let g = grid(200);
        let mask = detect_regions(&model, &g, 0.5, 0.5, DetectMode::Abs).unwrap();
        let est = estimate_shape(&mask, 0, &model, ShapeKind::Circle).unwrap();
        assert!((est.center[0] - 0.5).abs() < 0.01, "center {:?}", est.center);
        assert!((est.center[1] - 0.497).abs() < 0.01);
        assert!((est.radius - 0.22).abs() < 0.01, "radius {}", est.radius);
    }

    #[test]
    fn symmetric_gaussian_fwhm_equal_on_axes() {
        let model = testkit::bump_model([0.5, 0.5, 0.0], 125.0);
        let g = grid(200);
        let mask = detect_regions(&model, &g, 0.4, 0.4, DetectMode::Abs).unwrap();
        let est = estimate_shape(&mask, 0, &model, ShapeKind::GaussianPeak).unwrap();
        let peak = est.peak.unwrap();
        assert!((peak.fwhm[0] - peak.fwhm[1]).abs() <= g.step(0) + 1e-12);
        // Analytic FWHM of exp(-125 r²) is 2.3548/√(2·125) ≈ 0.1489; the
        // decay window with the 0.5x/2x factors must bracket 125.
        let analytic = 2.354_820_045 / (2.0f64 * 125.0).sqrt();
        assert!((peak.fwhm[0] - analytic).abs() <= 2.0 * g.step(0));
        assert!(0.5 * peak.v_min <= 125.0 && 125.0 <= 2.0 * peak.v_max);
        // Without widening, the FWHM-derived window already sits near 125.
        assert!(peak.v_min <= 130.0 && peak.v_max >= 120.0);
    }

    #[test]
    fn contour_extraction_recovers_circle() {
        let model = testkit::bump_model([0.5, 0.5, 0.0], 125.0);
        let g = grid(200);
        let mask = detect_regions(&model, &g, 0.4, 0.4, DetectMode::Abs).unwrap();
        let est = estimate_shape(&mask, 0, &model, ShapeKind::Contour).unwrap();
        let contour = est.contour.unwrap();
        assert!(contour.len() > 20);
        assert!(dist(contour[0], *contour.last().unwrap()) < 1e-9);
        // Half-max level line of the bump: radius √(ln 2 / 125).
        let want_r = (2.0f64.ln() / 125.0).sqrt();
        for p in &contour {
            let r = ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt();
            assert!((r - want_r).abs() < 2.0 * g.step(0), "r = {r}, want {want_r}");
        }
    }

    #[test]
    fn contour_leaving_grid_reports_open() {
        // Bump centered on the domain corner: its half-max circle exits the
        // grid, so the level line cannot close.
        let model = testkit::bump_model([0.0, 0.0, 0.0], 40.0);
        let g = grid(60);
        let mask = detect_regions(&model, &g, 0.3, 0.3, DetectMode::Abs).unwrap();
        let err = estimate_shape(&mask, 0, &model, ShapeKind::Contour).unwrap_err();
        assert!(err.to_string().contains("open contour"), "{err}");
    }

    #[test]
    fn smoothing_stays_within_bound() {
        // Noisy circle: smoothing must keep every point within the bound of
        // its raw position.
        let n = 64;
        let mut raw = Vec::with_capacity(n + 1);
        for i in 0..n {
            let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let jitter = if i % 2 == 0 { 0.004 } else { -0.004 };
            let r = 0.2 + jitter;
            raw.push([0.5 + r * th.cos(), 0.5 + r * th.sin(), 0.0]);
        }
        raw.push(raw[0]);
        let max_dev = 0.01;
        let smooth = crate::pipeline::ma::smooth_closed_contour(&raw, max_dev);
        assert_eq!(smooth.len(), raw.len());
        for (s, r) in smooth.iter().zip(&raw) {
            assert!(dist(*s, *r) <= max_dev + 1e-12);
        }
        // And it actually smooths: total turning variation decreases.
        let rough_var = roughness(&raw);
        let smooth_var = roughness(&smooth);
        assert!(smooth_var < 0.5 * rough_var, "{smooth_var} vs {rough_var}");
    }

    fn roughness(poly: &[Point]) -> f64 {
        let m = poly.len() - 1;
        let mut acc = 0.0;
        for i in 0..m {
            let a = poly[(i + m - 1) % m];
            let b = poly[i];
            let c = poly[(i + 1) % m];
            let second = [
                a[0] - 2.0 * b[0] + c[0],
                a[1] - 2.0 * b[1] + c[1],
                0.0,
            ];
            acc += (second[0] * second[0] + second[1] * second[1]).sqrt();
        }
        acc
    }
}
