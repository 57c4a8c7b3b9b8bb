//! Phase two: morphology-adaptive basis enhancement.
//!
//! Starting from the phase-one reconstruction and its final quadrature
//! mesh, each round thresholds the current solution on the test grid,
//! matches the detected regions to the configured shape specifications
//! (one spec for all regions, or one per region in centroid order),
//! estimates shape statistics, samples frozen morphology bases inside the
//! tolerance windows, appends them as new matrix columns, and re-solves on
//! the same data. The loop stops once the data loss drops under
//! `epsilon_res` or after `i_max` rounds.

use std::time::Instant;

use ndarray::{concatenate, Axis};
use serde::{Deserialize, Serialize};

use super::detect::{detect_regions, estimate_shape, DetectMode, ShapeEstimate, ShapeKind};
use super::ia::{run_ia_rfm, IaRfmOutcome, IterationRecord, LambdaRule, RefineOptions};
use super::model::{l2_relative_error, Provenance, SourceModel, TestGrid};
use super::Problem;
use crate::assembly::{assemble_operator, assemble_rhs};
use crate::basis::{
    sample_morphology, BasisSet, ContourDistance, ContourFamily, Feature, MorphBasis,
    MorphSampler,
};
use crate::point::{dist, Point};
use crate::solver::TikhonovSolver;
use crate::{Error, Result};

/// Circle bases strung along a detected contour (centers on the smoothed
/// boundary points).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryCircles {
    pub count: usize,
    pub radius: (f64, f64),
    pub sharpness: (f64, f64),
}

/// Shape family and sampling windows for one detected region.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionSpec {
    Circle {
        count: usize,
        center_rel_tol: f64,
        radius_rel_tol: f64,
        sharpness: (f64, f64),
    },
    TruncatedGaussianCircle {
        count: usize,
        center_rel_tol: f64,
        radius_rel_tol: f64,
        sharpness: (f64, f64),
        decay: (f64, f64),
    },
    Rectangle {
        count: usize,
        center_rel_tol: f64,
        width_rel_tol: f64,
        height_rel_tol: f64,
        sharpness: (f64, f64),
    },
    GaussianBump {
        count: usize,
        center_abs_tol: f64,
        /// Multipliers widening the FWHM-derived (v_min, v_max) window.
        #[serde(default = "default_decay_scale")]
        decay_scale: (f64, f64),
        /// Pinned decay window; overrides the FWHM-derived one.
        #[serde(default)]
        decay_window: Option<(f64, f64)>,
    },
    ReluCone {
        count: usize,
        center_abs_tol: f64,
        /// Pinned radius window; falls back to the bounding-box radius with
        /// the relative tolerance.
        #[serde(default)]
        radius_window: Option<(f64, f64)>,
        #[serde(default = "default_radius_rel_tol")]
        radius_rel_tol: f64,
    },
    Torus {
        count: usize,
        center_abs_tol: f64,
        #[serde(default)]
        ring_window: Option<(f64, f64)>,
        #[serde(default)]
        tube_window: Option<(f64, f64)>,
        sharpness: (f64, f64),
    },
    Contour {
        count: usize,
        rho: (f64, f64),
        sharpness: (f64, f64),
        mode: ContourDistance,
        #[serde(default)]
        boundary_circles: Option<BoundaryCircles>,
    },
}

fn default_decay_scale() -> (f64, f64) {
    (0.5, 2.0)
}

fn default_radius_rel_tol() -> f64 {
    0.1
}

impl RegionSpec {
    fn shape_kind(&self) -> ShapeKind {
        match self {
            RegionSpec::Circle { .. } | RegionSpec::TruncatedGaussianCircle { .. } => {
                ShapeKind::Circle
            }
            RegionSpec::Rectangle { .. } => ShapeKind::Rectangle,
            RegionSpec::GaussianBump { .. } => ShapeKind::GaussianPeak,
            RegionSpec::ReluCone { .. } => ShapeKind::Cone,
            RegionSpec::Torus { .. } => ShapeKind::Torus,
            RegionSpec::Contour { .. } => ShapeKind::Contour,
        }
    }
}

/// Phase-two knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnhancementOptions {
    pub t_abs: f64,
    pub t_grad: f64,
    pub mode: DetectMode,
    /// One spec applied to every region, or one per region (centroid order).
    pub region_specs: Vec<RegionSpec>,
    /// Residual gate on the data loss.
    pub epsilon_res: f64,
    pub i_max: usize,
    pub morph_seed: u64,
    /// Components smaller than this many grid points are dust and are
    /// dropped before region/spec matching.
    #[serde(default = "default_min_region_size")]
    pub min_region_size: usize,
}

fn default_min_region_size() -> usize {
    4
}

/// Phase-two output.
#[derive(Debug)]
pub struct MaRfmOutcome {
    pub model: SourceModel,
    pub mesh: crate::quadmesh::AdaptiveMesh,
    pub lambda_sq: f64,
    pub history: Vec<IterationRecord>,
    pub enhancement_rounds: usize,
    /// Shape estimates from the most recent detection round.
    pub shape_estimates: Vec<ShapeEstimate>,
    pub grid_values: Vec<f64>,
    /// The most recent L-curve, when selection used one.
    pub lcurve: Option<crate::solver::LCurve>,
}

/// Runs phase one, then the residual-gated enhancement loop.
pub fn run_ma_rfm(
    problem: &Problem,
    ia_opts: &RefineOptions,
    lambda_rule: &LambdaRule,
    eval_grid: &TestGrid,
    enh: &EnhancementOptions,
    reference: Option<&(dyn Fn(Point) -> f64 + Sync)>,
) -> Result<MaRfmOutcome> {
    let IaRfmOutcome {
        model,
        mesh,
        lambda_sq,
        mut history,
        grid_values,
        lcurve,
    } = run_ia_rfm(problem, ia_opts, lambda_rule, eval_grid, reference)?;
    let mut lcurve = lcurve;

    let grid_points = eval_grid.points();
    let reference_values: Option<Vec<f64>> = reference.map(|f| {
        use rayon::prelude::*;
        grid_points.par_iter().map(|&p| f(p)).collect()
    });

    let data_loss_0 = history.last().map(|r| r.data_loss).unwrap_or(f64::INFINITY);
    if data_loss_0 < enh.epsilon_res {
        return Ok(MaRfmOutcome {
            model,
            mesh,
            lambda_sq,
            history,
            enhancement_rounds: 0,
            shape_estimates: Vec::new(),
            grid_values,
            lcurve,
        });
    }

    // The matrix grows by columns only; rows (mesh, wavenumbers, points)
    // stay fixed to the phase-one state.
    let base_sys = assemble_operator(
        &mesh,
        &problem.basis,
        &problem.ks,
        &problem.points,
        problem.dim,
        problem.weights,
    )?;
    let b = assemble_rhs(&base_sys, &problem.data)?;
    let mut a = base_sys.a;
    let mut basis = problem.basis.clone();
    let mut model = model;
    let mut lambda_prev = Some(lambda_sq);
    let mut lambda_sq = lambda_sq;
    let mut values = grid_values;
    let mut rounds = 0;
    let mut estimates = Vec::new();
    let solve_offset = history.len();

    for round in 1..=enh.i_max {
        let t_round = Instant::now();
        let mut mask = detect_regions(&model, eval_grid, enh.t_abs, enh.t_grad, enh.mode)?;
        mask.components.retain(|c| c.len() >= enh.min_region_size);
        if mask.components.is_empty() {
            return Err(Error::Detection(format!(
                "round {round}: every detected region is below min_region_size = {}",
                enh.min_region_size
            )));
        }
        let n_regions = mask.components.len();
        let specs: Vec<&RegionSpec> = if enh.region_specs.len() == 1 {
            std::iter::repeat(&enh.region_specs[0]).take(n_regions).collect()
        } else if enh.region_specs.len() == n_regions {
            enh.region_specs.iter().collect()
        } else {
            return Err(Error::Detection(format!(
                "round {round}: {} detected regions but {} region specs",
                n_regions,
                enh.region_specs.len()
            )));
        };

        estimates.clear();
        let mut fresh = BasisSet::new();
        for (region, spec) in specs.iter().enumerate() {
            let estimate = estimate_shape(&mask, region, &model, spec.shape_kind())
                .map_err(|e| Error::Detection(format!("region {region}: {e}")))?;
            let seed = enh
                .morph_seed
                .wrapping_add(1009 * round as u64)
                .wrapping_add(region as u64);
            append_region_bases(&mut fresh, spec, &estimate, eval_grid, seed)
                .map_err(|e| Error::Detection(format!("region {region}: {e}")))?;
            estimates.push(estimate);
        }

        let new_cols = assemble_operator(
            &mesh,
            &fresh,
            &problem.ks,
            &problem.points,
            problem.dim,
            problem.weights,
        )?;
        a = concatenate(Axis(1), &[a.view(), new_cols.a.view()])
            .map_err(|e| Error::Assembly(format!("column append failed: {e}")))?;
        basis.merge(fresh);

        let solver = TikhonovSolver::new(&a, &b)?;
        let (picked, curve) = lambda_rule.select(&solver, solve_offset + round - 1, lambda_prev)?;
        lambda_sq = picked;
        if curve.is_some() {
            lcurve = curve;
        }
        lambda_prev = Some(lambda_sq);
        let sol = solver.solve(lambda_sq)?;
        model = SourceModel::new(basis.clone(), sol.s.to_vec(), Provenance::MaRfmIter(round));
        values = model.values(&grid_points);
        rounds = round;

        history.push(IterationRecord {
            phase: "ma_rfm".into(),
            iteration: round,
            n_integral: mesh.point_count(),
            leaf_count: mesh.leaf_count(),
            basis_size: basis.len(),
            lambda_sq,
            data_loss: sol.residual_norm * sol.residual_norm,
            residual_norm: sol.residual_norm,
            rel_change: None,
            e_l2: reference_values
                .as_ref()
                .map(|r| l2_relative_error(&values, r))
                .transpose()?,
            refined_cells: 0,
            skipped_max_level: 0,
            elapsed_ms: t_round.elapsed().as_millis() as u64,
        });

        if sol.residual_norm * sol.residual_norm < enh.epsilon_res {
            break;
        }
    }

    Ok(MaRfmOutcome {
        model,
        mesh,
        lambda_sq,
        history,
        enhancement_rounds: rounds,
        shape_estimates: estimates,
        grid_values: values,
        lcurve,
    })
}

/// Builds the sampler for one region from its estimate and draws the bases
/// into `out`.
fn append_region_bases(
    out: &mut BasisSet,
    spec: &RegionSpec,
    estimate: &ShapeEstimate,
    grid: &TestGrid,
    seed: u64,
) -> Result<()> {
    match spec {
        RegionSpec::Circle {
            count,
            center_rel_tol,
            radius_rel_tol,
            sharpness,
        } => {
            let sampler = MorphSampler::Circle {
                center: estimate.center,
                center_rel_tol: *center_rel_tol,
                radius: estimate.radius,
                radius_rel_tol: *radius_rel_tol,
                sharpness: *sharpness,
            };
            out.extend(
                sample_morphology(&sampler, *count, seed)?
                    .into_iter()
                    .map(Feature::Morph),
            );
        }
        RegionSpec::TruncatedGaussianCircle {
            count,
            center_rel_tol,
            radius_rel_tol,
            sharpness,
            decay,
        } => {
            let sampler = MorphSampler::TruncatedGaussianCircle {
                center: estimate.center,
                center_rel_tol: *center_rel_tol,
                radius: estimate.radius,
                radius_rel_tol: *radius_rel_tol,
                sharpness: *sharpness,
                decay: *decay,
            };
            out.extend(
                sample_morphology(&sampler, *count, seed)?
                    .into_iter()
                    .map(Feature::Morph),
            );
        }
        RegionSpec::Rectangle {
            count,
            center_rel_tol,
            width_rel_tol,
            height_rel_tol,
            sharpness,
        } => {
            let sampler = MorphSampler::Rectangle {
                center: estimate.center,
                center_rel_tol: *center_rel_tol,
                width: estimate.width,
                width_rel_tol: *width_rel_tol,
                height: estimate.height,
                height_rel_tol: *height_rel_tol,
                sharpness: *sharpness,
            };
            out.extend(
                sample_morphology(&sampler, *count, seed)?
                    .into_iter()
                    .map(Feature::Morph),
            );
        }
        RegionSpec::GaussianBump {
            count,
            center_abs_tol,
            decay_scale,
            decay_window,
        } => {
            let peak = estimate
                .peak
                .as_ref()
                .ok_or_else(|| Error::Detection("gaussian spec without peak stats".into()))?;
            let decay = decay_window
                .unwrap_or((decay_scale.0 * peak.v_min, decay_scale.1 * peak.v_max));
            let sampler = MorphSampler::GaussianBump {
                center: peak.peak,
                center_abs_tol: *center_abs_tol,
                decay,
            };
            out.extend(
                sample_morphology(&sampler, *count, seed)?
                    .into_iter()
                    .map(Feature::Morph),
            );
        }
        RegionSpec::ReluCone {
            count,
            center_abs_tol,
            radius_window,
            radius_rel_tol,
        } => {
            let center = estimate
                .peak
                .as_ref()
                .map(|p| p.peak)
                .unwrap_or(estimate.center);
            let radius = radius_window.unwrap_or((
                (1.0 - radius_rel_tol) * estimate.radius,
                (1.0 + radius_rel_tol) * estimate.radius,
            ));
            let sampler = MorphSampler::ReluCone {
                center,
                center_abs_tol: *center_abs_tol,
                radius,
            };
            out.extend(
                sample_morphology(&sampler, *count, seed)?
                    .into_iter()
                    .map(Feature::Morph),
            );
        }
        RegionSpec::Torus {
            count,
            center_abs_tol,
            ring_window,
            tube_window,
            sharpness,
        } => {
            let ring = estimate
                .ring_radius
                .ok_or_else(|| Error::Detection("torus spec without ring stats".into()))?;
            let tube = estimate.tube_radius.unwrap_or(ring * 0.5);
            let sampler = MorphSampler::Torus {
                center: estimate.center,
                center_abs_tol: *center_abs_tol,
                major_radius: ring_window.unwrap_or((0.95 * ring, 1.05 * ring)),
                minor_radius: tube_window.unwrap_or((0.9 * tube, 1.1 * tube)),
                sharpness: *sharpness,
            };
            out.extend(
                sample_morphology(&sampler, *count, seed)?
                    .into_iter()
                    .map(Feature::Morph),
            );
        }
        RegionSpec::Contour {
            count,
            rho,
            sharpness,
            mode,
            boundary_circles,
        } => {
            let raw = estimate
                .contour
                .as_ref()
                .ok_or_else(|| Error::Detection("contour spec without extracted contour".into()))?;
            // Smoothing bounded by one test-grid cell of deviation.
            let max_dev = grid.step(0).max(grid.step(1));
            let smoothed = smooth_closed_contour(raw, max_dev);
            let family = ContourFamily::new(smoothed.clone())?;
            let idx = out.add_contour_family(family);
            let sampler = MorphSampler::Contour {
                family: idx,
                rho: *rho,
                sharpness: *sharpness,
                mode: *mode,
            };
            out.extend(
                sample_morphology(&sampler, *count, seed)?
                    .into_iter()
                    .map(Feature::Morph),
            );
            if let Some(bc) = boundary_circles {
                use rand::prelude::*;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
                let verts = &smoothed[..smoothed.len() - 1];
                for j in 0..bc.count {
                    let center = verts[j % verts.len()];
                    let radius = if bc.radius.0 == bc.radius.1 {
                        bc.radius.0
                    } else {
                        rng.random_range(bc.radius.0..bc.radius.1)
                    };
                    let sharp = if bc.sharpness.0 == bc.sharpness.1 {
                        bc.sharpness.0
                    } else {
                        rng.random_range(bc.sharpness.0..bc.sharpness.1)
                    };
                    if radius > 0.0 {
                        out.push(Feature::Morph(MorphBasis::SigmoidCircle {
                            center,
                            radius,
                            sharpness: sharp,
                        }));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Periodic cubic B-spline smoothing sampled at the knots (each pass maps
/// `p_j` to `(p_{j-1} + 4 p_j + p_{j+1})/6`), iterated while the deviation
/// from the raw points stays within `max_dev`.
pub(crate) fn smooth_closed_contour(points: &[Point], max_dev: f64) -> Vec<Point> {
    let m = points.len() - 1; // closure point repeated at the end
    let mut cur: Vec<Point> = points[..m].to_vec();
    for _ in 0..50 {
        let mut next = vec![[0.0f64; 3]; m];
        for j in 0..m {
            let a = cur[(j + m - 1) % m];
            let b = cur[j];
            let c = cur[(j + 1) % m];
            for axis in 0..3 {
                next[j][axis] = (a[axis] + 4.0 * b[axis] + c[axis]) / 6.0;
            }
        }
        let dev = next
            .iter()
            .zip(&points[..m])
            .map(|(p, q)| dist(*p, *q))
            .fold(0.0f64, f64::max);
        if dev > max_dev {
            break;
        }
        cur = next;
    }
    let mut out = cur;
    out.push(out[0]);
    out
}
