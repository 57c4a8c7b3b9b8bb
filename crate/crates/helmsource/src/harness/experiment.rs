//! The experiment driver: builds every piece from a configuration, runs
//! the selected reconstruction path, and writes the report bundle.
//!
//! Outputs per run directory:
//!
//! * `report.json` — the full [`RunReport`].
//! * `metrics.csv` — one-row summary (aggregated by `write_report`).
//! * `history.jsonl` — one JSON record per solver iteration.
//! * `field_approx.csv` / `field_reference.csv` — test-grid dumps.
//! * `heatmap_*.pgm` — 8-bit binary grayscale (P5), row-major, top row at
//!   the maximum y; 3-D fields emit one slice per z index.
//! * `lcurve.csv` — when λ² selection ran an L-curve.
//! * `mesh.csv` — final quadrature mesh.
//! * `basis.json` — frozen feature set, for resumption.
//! * `system.bin` + `row_map.csv` + `col_map.csv` — optional dense dump.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SolverPath};
use super::data::{
    add_noise, assert_no_inverse_crime, circular_extension, forward_data, perturb_stacked,
    synthesize_consistent_data, CircularExtension, NoiseSpec,
};
use super::layout::MeasurementLayout;
use crate::assembly::{
    assemble_operator, assemble_rhs, BlockWeights, BoundaryData, MeasurementPoint, SystemMatrix,
    WavenumberSet,
};
use crate::basis::{build_random_set_standardized, BasisSet};
use crate::pipeline::{
    l2_relative_error, run_ia_rfm, run_ma_rfm, EnhancementOptions, IterationRecord, LambdaRule,
    Problem, Provenance, RefineOptions, SourceModel, TestGrid,
};
use crate::point::{Dim, Point};
use crate::quadmesh::{build_uniform_mesh, gauss_legendre, AdaptiveMesh};
use crate::solver::{error_bound, LCurve, TikhonovSolver};
use crate::{Error, Result};

/// Error-bound block of a synthetic run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub eta_m: f64,
    pub delta_all: f64,
    pub nu: f64,
    pub c_nu: f64,
    pub w_norm: f64,
    pub lambda_opt_sq: f64,
    pub lambda_used_sq: f64,
    pub measured_coeff_error: f64,
    pub bound_at_lambda: f64,
    pub optimal_rate_bound: f64,
    pub bound_over_error: f64,
}

/// Summary of one run, serialized to `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub solver_path: SolverPath,
    pub m_total: usize,
    pub n_integral: usize,
    pub leaf_count: usize,
    pub lambda_sq: f64,
    pub data_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_l2: Option<f64>,
    pub enhancement_rounds: usize,
    pub runtime_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_resolution_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundReport>,
    pub warnings: Vec<String>,
    pub output_dir: String,
}

/// Runs one experiment. `base_dir`, when given, prefixes the config's
/// output directory.
pub fn run_experiment(cfg: &ExperimentConfig, base_dir: Option<&Path>) -> Result<RunReport> {
    cfg.validate()?;
    let t0 = Instant::now();
    let out_dir = match base_dir {
        Some(base) => base.join(&cfg.output_dir),
        None => PathBuf::from(&cfg.output_dir),
    };
    fs::create_dir_all(&out_dir)?;

    let dim = cfg.dim_enum();
    let (lo, hi) = box_points(cfg);
    let mesh = build_uniform_mesh(
        lo,
        hi,
        [cfg.quadrature.cells_per_axis; 3],
        gauss_legendre(cfg.quadrature.rule_n)?,
        dim,
    )?;
    let basis = build_random_set_standardized(
        dim,
        cfg.features.m0,
        cfg.features.r_m,
        cfg.features.activation,
        cfg.features.seed,
        lo,
        hi,
    )?;
    let grid = TestGrid::regular(dim, lo, hi, cfg.p_test_resolution());
    let ks = WavenumberSet::arithmetic(
        cfg.wavenumbers.k_min,
        cfg.wavenumbers.k_delta,
        cfg.wavenumbers.k_max,
    )?;
    let weights = BlockWeights {
        dirichlet: cfg.block_weight_dirichlet.unwrap_or(1.0),
        neumann: cfg.block_weight_neumann.unwrap_or(1.0),
    };
    let lambda_rule = lambda_rule_of(cfg);

    if cfg.synthetic.is_some() {
        return run_synthetic(cfg, &out_dir, dim, mesh, basis, grid, ks, weights, t0);
    }

    // Reconstruction path: forward data on the dense oracle.
    let source = cfg.source.clone().expect("validated");
    let data_cfg = cfg.data.as_ref().expect("validated");
    let oracle_cells = (data_cfg.oracle.points_per_axis / data_cfg.oracle.rule_n).max(1);
    let oracle_mesh = build_uniform_mesh(
        lo,
        hi,
        [oracle_cells; 3],
        gauss_legendre(data_cfg.oracle.rule_n)?,
        dim,
    )?;
    assert_no_inverse_crime(&mesh, &oracle_mesh)?;

    let mut warnings = Vec::new();
    let evaluator = {
        let src = source.clone();
        move |p: Point| src.evaluate(p)
    };

    let (points, data, resolution_gap) = match &data_cfg.extension {
        None => {
            let points = cfg
                .layout
                .points(data_cfg.kinds.dirichlet, data_cfg.kinds.neumann)?;
            let check = if data_cfg.check_oracle {
                Some(double_density(&oracle_mesh, lo, hi, oracle_cells, data_cfg.oracle.rule_n, dim)?)
            } else {
                None
            };
            let fwd = forward_data(&evaluator, &points, &ks, dim, &oracle_mesh, check.as_ref())?;
            let noisy = add_noise(
                &fwd.data,
                NoiseSpec {
                    delta: data_cfg.noise_delta,
                    seed: data_cfg.noise_seed,
                },
            )?;
            (points, noisy, fwd.resolution_gap)
        }
        Some(ext) => {
            // Dirichlet observations on the circle, extended to Cauchy data
            // on the generation ring.
            let obs_points = cfg.layout.points(true, false)?;
            let check = if data_cfg.check_oracle {
                Some(double_density(&oracle_mesh, lo, hi, oracle_cells, data_cfg.oracle.rule_n, dim)?)
            } else {
                None
            };
            let fwd = forward_data(&evaluator, &obs_points, &ks, dim, &oracle_mesh, check.as_ref())?;
            let noisy = add_noise(
                &fwd.data,
                NoiseSpec {
                    delta: data_cfg.noise_delta,
                    seed: data_cfg.noise_seed,
                },
            )?;
            let (center, radius_obs) = match &cfg.layout {
                MeasurementLayout::CircleArc { center, radius, .. } => (*center, *radius),
                _ => unreachable!("validated"),
            };
            let truncation = ext
                .truncation
                .unwrap_or_else(|| super::data::default_truncation(data_cfg.noise_delta));
            let mut gen_points = Vec::with_capacity(ext.n_generate);
            for j in 0..ext.n_generate {
                let theta = 2.0 * std::f64::consts::PI * j as f64 / ext.n_generate as f64;
                let nu = [theta.cos(), theta.sin(), 0.0];
                gen_points.push(MeasurementPoint::cauchy(
                    [
                        center[0] + ext.radius_gen * nu[0],
                        center[1] + ext.radius_gen * nu[1],
                        0.0,
                    ],
                    nu,
                ));
            }
            let mut gen_data = BoundaryData::default();
            let mut total_dropped = 0usize;
            for (ki, &k) in ks.values().iter().enumerate() {
                let samples: Vec<_> = (0..obs_points.len())
                    .map(|pi| noisy.dirichlet[&(ki, pi)])
                    .collect();
                let (values, dropped) = circular_extension(
                    &samples,
                    &CircularExtension {
                        k,
                        radius_obs,
                        radius_gen: ext.radius_gen,
                        truncation,
                        n_generate: ext.n_generate,
                        center,
                    },
                )?;
                total_dropped += dropped;
                for (pi, (u, du)) in values.into_iter().enumerate() {
                    gen_data.dirichlet.insert((ki, pi), u);
                    gen_data.neumann.insert((ki, pi), du);
                }
            }
            if total_dropped > 0 {
                warnings.push(format!(
                    "circular extension dropped {total_dropped} near-singular modes"
                ));
            }
            (gen_points, gen_data, fwd.resolution_gap)
        }
    };
    if let Some(gap) = resolution_gap {
        if gap > 1e-6 {
            warnings.push(format!(
                "oracle resolution check: sampled data moved {gap:.3e} under refinement"
            ));
        }
    }

    let problem = Problem {
        dim,
        mesh,
        basis,
        ks,
        points,
        data,
        weights,
    };
    let refine = RefineOptions {
        gamma_abs: cfg.quadrature.gamma_abs,
        gamma_grad: cfg.quadrature.gamma_grad,
        c: cfg.quadrature.c,
        epsilon: cfg.quadrature.epsilon,
        max_iter: match cfg.solver_path {
            SolverPath::Irfm => 0,
            _ => cfg.quadrature.max_iter,
        },
    };
    let reference_values: Vec<f64> = grid.points().iter().map(|&p| source.evaluate(p)).collect();
    let reference = |p: Point| source.evaluate(p);

    let (model, final_mesh, lambda_sq, history, rounds, grid_values, lcurve) =
        match cfg.solver_path {
            SolverPath::Irfm | SolverPath::IaRfm => {
                let out = run_ia_rfm(&problem, &refine, &lambda_rule, &grid, Some(&reference))?;
                (
                    out.model,
                    out.mesh,
                    out.lambda_sq,
                    out.history,
                    0,
                    out.grid_values,
                    out.lcurve,
                )
            }
            SolverPath::MaRfm => {
                let enh_cfg = cfg.enhancement.as_ref().expect("validated");
                let enh = EnhancementOptions {
                    t_abs: enh_cfg.t_abs,
                    t_grad: enh_cfg.t_grad,
                    mode: enh_cfg.mode,
                    region_specs: enh_cfg.region_specs.clone(),
                    epsilon_res: enh_cfg.epsilon_res,
                    i_max: enh_cfg.i_max,
                    morph_seed: enh_cfg.seed,
                    min_region_size: enh_cfg.min_region_size,
                };
                let out = run_ma_rfm(&problem, &refine, &lambda_rule, &grid, &enh, Some(&reference))?;
                (
                    out.model,
                    out.mesh,
                    out.lambda_sq,
                    out.history,
                    out.enhancement_rounds,
                    out.grid_values,
                    out.lcurve,
                )
            }
        };

    let e_l2 = l2_relative_error(&grid_values, &reference_values)?;
    let last = history.last().expect("at least one record");
    let report = RunReport {
        name: cfg.name.clone(),
        solver_path: cfg.solver_path,
        m_total: model.basis.len(),
        n_integral: final_mesh.point_count(),
        leaf_count: final_mesh.leaf_count(),
        lambda_sq,
        data_loss: last.data_loss,
        e_l2: Some(e_l2),
        enhancement_rounds: rounds,
        runtime_s: t0.elapsed().as_secs_f64(),
        oracle_resolution_gap: resolution_gap,
        bound: None,
        warnings,
        output_dir: out_dir.to_string_lossy().into_owned(),
    };

    write_bundle(
        cfg,
        &out_dir,
        &report,
        &history,
        &grid,
        &grid_values,
        Some(&reference_values),
        &final_mesh,
        &model.basis,
        lcurve.as_ref(),
        &problem,
    )?;
    Ok(report)
}

/// Synthetic path: data built from the operator itself with controlled
/// inconsistency; checks the coefficient-error bound.
#[allow(clippy::too_many_arguments)]
fn run_synthetic(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    dim: Dim,
    mesh: AdaptiveMesh,
    basis: BasisSet,
    grid: TestGrid,
    ks: WavenumberSet,
    weights: BlockWeights,
    t0: Instant,
) -> Result<RunReport> {
    let sy = cfg.synthetic.as_ref().expect("validated");
    let data_kinds = cfg
        .data
        .as_ref()
        .map(|d| d.kinds)
        .unwrap_or_default();
    let points = cfg.layout.points(data_kinds.dirichlet, data_kinds.neumann)?;
    let sys = assemble_operator(&mesh, &basis, &ks, &points, dim, weights)?;
    let spec = synthesize_consistent_data(&sys.a, sy.nu, sy.eta_m, sy.seed)?;
    let (b_noisy, delta_all) = perturb_stacked(&spec.u_true, sy.delta, sy.seed ^ 0x5eed);

    let solver = TikhonovSolver::new(&sys.a, &b_noisy)?;
    let bound0 = error_bound(delta_all, sy.eta_m, sy.nu, sy.c_nu, spec.w_norm, 1.0)?;
    let (lambda_sq, lcurve) = if sy.use_optimal_lambda {
        (bound0.lambda_opt_sq, None)
    } else {
        match lambda_rule_of(cfg) {
            LambdaRule::Pinned { lambda_sq } => (lambda_sq, None),
            rule => {
                let (l, c) = rule.select(&solver, 0, None)?;
                (l, c)
            }
        }
    };
    let sol = solver.solve(lambda_sq)?;
    let diag = error_bound(delta_all, sy.eta_m, sy.nu, sy.c_nu, spec.w_norm, lambda_sq)?;
    let measured = (&sol.s - &spec.s_star)
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();

    // Field-level error of the reconstructed model against S*_M.
    let model = SourceModel::new(basis.clone(), sol.s.to_vec(), Provenance::Initial);
    let reference_model = SourceModel::new(basis.clone(), spec.s_star.to_vec(), Provenance::Initial);
    let grid_points = grid.points();
    let grid_values = model.values(&grid_points);
    let reference_values = reference_model.values(&grid_points);
    let e_l2 = l2_relative_error(&grid_values, &reference_values)?;

    let history = vec![IterationRecord {
        phase: "synthetic".into(),
        iteration: 0,
        n_integral: mesh.point_count(),
        leaf_count: mesh.leaf_count(),
        basis_size: basis.len(),
        lambda_sq,
        data_loss: sol.residual_norm * sol.residual_norm,
        residual_norm: sol.residual_norm,
        rel_change: None,
        e_l2: Some(e_l2),
        refined_cells: 0,
        skipped_max_level: 0,
        elapsed_ms: t0.elapsed().as_millis() as u64,
    }];

    let report = RunReport {
        name: cfg.name.clone(),
        solver_path: cfg.solver_path,
        m_total: basis.len(),
        n_integral: mesh.point_count(),
        leaf_count: mesh.leaf_count(),
        lambda_sq,
        data_loss: sol.residual_norm * sol.residual_norm,
        e_l2: Some(e_l2),
        enhancement_rounds: 0,
        runtime_s: t0.elapsed().as_secs_f64(),
        oracle_resolution_gap: None,
        bound: Some(BoundReport {
            eta_m: sy.eta_m,
            delta_all,
            nu: sy.nu,
            c_nu: sy.c_nu,
            w_norm: spec.w_norm,
            lambda_opt_sq: diag.lambda_opt_sq,
            lambda_used_sq: lambda_sq,
            measured_coeff_error: measured,
            bound_at_lambda: diag.bound_value,
            optimal_rate_bound: diag.optimal_rate_bound,
            bound_over_error: diag.bound_value / measured.max(1e-300),
        }),
        warnings: Vec::new(),
        output_dir: out_dir.to_string_lossy().into_owned(),
    };

    let problem = Problem {
        dim,
        mesh: mesh.clone(),
        basis: basis.clone(),
        ks,
        points,
        data: crate::assembly::unpack_rhs(&sys, &b_noisy)?,
        weights,
    };
    write_bundle(
        cfg,
        out_dir,
        &report,
        &history,
        &grid,
        &grid_values,
        Some(&reference_values),
        &mesh,
        &basis,
        lcurve.as_ref(),
        &problem,
    )?;
    Ok(report)
}

fn box_points(cfg: &ExperimentConfig) -> (Point, Point) {
    let mut lo = [0.0f64; 3];
    let mut hi = [0.0f64; 3];
    for a in 0..cfg.dim {
        lo[a] = cfg.box_lo[a];
        hi[a] = cfg.box_hi[a];
    }
    (lo, hi)
}

fn lambda_rule_of(cfg: &ExperimentConfig) -> LambdaRule {
    match cfg.regularization.pin_lambda_sq {
        Some(l) => LambdaRule::Pinned { lambda_sq: l },
        None => {
            let grid = cfg.lambda_grid();
            if cfg.regularization.reselect_each_solve {
                LambdaRule::LCurveEverySolve { grid }
            } else {
                LambdaRule::LCurveThenReuse { grid }
            }
        }
    }
}

fn double_density(
    _oracle: &AdaptiveMesh,
    lo: Point,
    hi: Point,
    cells: usize,
    rule_n: usize,
    dim: Dim,
) -> Result<AdaptiveMesh> {
    build_uniform_mesh(lo, hi, [cells * 2; 3], gauss_legendre(rule_n)?, dim)
}

#[allow(clippy::too_many_arguments)]
fn write_bundle(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    report: &RunReport,
    history: &[IterationRecord],
    grid: &TestGrid,
    approx: &[f64],
    reference: Option<&[f64]>,
    mesh: &AdaptiveMesh,
    basis: &BasisSet,
    lcurve: Option<&LCurve>,
    problem: &Problem,
) -> Result<()> {
    fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(report)?,
    )?;

    let mut hist = fs::File::create(out_dir.join("history.jsonl"))?;
    for record in history {
        writeln!(hist, "{}", serde_json::to_string(record)?)?;
    }

    let mut metrics = fs::File::create(out_dir.join("metrics.csv"))?;
    writeln!(
        metrics,
        "name,solver_path,m_total,n_integral,lambda_sq,data_loss,e_l2,enhancement_rounds,runtime_s"
    )?;
    writeln!(
        metrics,
        "{},{},{},{},{},{},{},{},{}",
        report.name,
        solver_path_str(report.solver_path),
        report.m_total,
        report.n_integral,
        report.lambda_sq,
        report.data_loss,
        report.e_l2.map(|v| v.to_string()).unwrap_or_default(),
        report.enhancement_rounds,
        report.runtime_s
    )?;

    write_field_csv(&out_dir.join("field_approx.csv"), grid, approx)?;
    write_heatmaps(out_dir, "heatmap_approx", grid, approx)?;
    if let Some(r) = reference {
        write_field_csv(&out_dir.join("field_reference.csv"), grid, r)?;
        write_heatmaps(out_dir, "heatmap_reference", grid, r)?;
    }

    if let Some(curve) = lcurve {
        let file = fs::File::create(out_dir.join("lcurve.csv"))?;
        curve.write_csv(file)?;
    }
    let file = fs::File::create(out_dir.join("mesh.csv"))?;
    mesh.write_csv(file)?;
    fs::write(out_dir.join("basis.json"), basis.to_json()?)?;

    if cfg.dump_system {
        let sys: SystemMatrix = assemble_operator(
            mesh,
            basis,
            &problem.ks,
            &problem.points,
            problem.dim,
            problem.weights,
        )?;
        let b = assemble_rhs(&sys, &problem.data)?;
        sys.write_binary(fs::File::create(out_dir.join("system.bin"))?)?;
        sys.write_row_map_csv(fs::File::create(out_dir.join("row_map.csv"))?)?;
        sys.write_col_map_csv(fs::File::create(out_dir.join("col_map.csv"))?)?;
        let mut bf = fs::File::create(out_dir.join("rhs.bin"))?;
        bf.write_all(&(b.len() as u64).to_le_bytes())?;
        for v in &b {
            bf.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn solver_path_str(p: SolverPath) -> &'static str {
    match p {
        SolverPath::Irfm => "irfm",
        SolverPath::IaRfm => "ia_rfm",
        SolverPath::MaRfm => "ma_rfm",
    }
}

fn write_field_csv(path: &Path, grid: &TestGrid, values: &[f64]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    let d = grid.dim.n();
    writeln!(f, "{}", if d == 2 { "x,y,value" } else { "x,y,z,value" })?;
    for (i, v) in values.iter().enumerate() {
        let p = grid.point(i);
        if d == 2 {
            writeln!(f, "{},{},{}", p[0], p[1], v)?;
        } else {
            writeln!(f, "{},{},{},{}", p[0], p[1], p[2], v)?;
        }
    }
    Ok(())
}

/// 8-bit binary PGM (P5) with min/max scaling; 3-D fields become one file
/// per z slice (`name_z012.pgm`).
fn write_heatmaps(dir: &Path, stem: &str, grid: &TestGrid, values: &[f64]) -> Result<()> {
    let [nx, ny, nz] = grid.shape;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-300);
    for iz in 0..nz {
        let path = if nz == 1 {
            dir.join(format!("{stem}.pgm"))
        } else {
            dir.join(format!("{stem}_z{iz:03}.pgm"))
        };
        let mut f = fs::File::create(path)?;
        write!(f, "P5\n{nx} {ny}\n255\n")?;
        let mut row = Vec::with_capacity(nx);
        for iy in (0..ny).rev() {
            row.clear();
            for ix in 0..nx {
                let v = values[grid.flat([ix, iy, iz])];
                row.push((255.0 * (v - lo) / span).round().clamp(0.0, 255.0) as u8);
            }
            f.write_all(&row)?;
        }
    }
    Ok(())
}

/// Runs the config once per value of a dot-path parameter; each run writes
/// under `<output_dir>/<leaf>_<value>/`.
pub fn sweep_experiment(
    cfg_json: &str,
    param_path: &str,
    values: &[serde_json::Value],
    base_dir: Option<&Path>,
) -> Result<Vec<RunReport>> {
    if values.is_empty() {
        return Err(Error::Config {
            path: param_path.into(),
            msg: "no sweep values given".into(),
        });
    }
    let mut reports = Vec::with_capacity(values.len());
    for value in values {
        let mut doc: serde_json::Value = serde_json::from_str(cfg_json)?;
        set_json_path(&mut doc, param_path, value.clone())?;
        let leaf = param_path.rsplit('.').next().unwrap_or(param_path);
        let suffix = sanitized(&value.to_string());
        let base_out = doc["output_dir"].as_str().unwrap_or("out").to_string();
        doc["output_dir"] = serde_json::Value::String(format!("{base_out}/{leaf}_{suffix}"));
        let cfg = ExperimentConfig::from_json(&doc.to_string())?;
        reports.push(run_experiment(&cfg, base_dir)?);
    }
    Ok(reports)
}

fn sanitized(v: &str) -> String {
    v.chars()
        .map(|c| if c.is_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

fn set_json_path(
    doc: &mut serde_json::Value,
    path: &str,
    value: serde_json::Value,
) -> Result<()> {
    let mut cursor = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        let map = cursor.as_object_mut().ok_or_else(|| Error::Config {
            path: parts[..i].join("."),
            msg: "not an object".into(),
        })?;
        if last {
            map.insert((*part).into(), value);
            return Ok(());
        }
        cursor = map.get_mut(*part).ok_or_else(|| Error::Config {
            path: parts[..=i].join("."),
            msg: "no such field".into(),
        })?;
    }
    unreachable!()
}

/// Aggregates `report.json` files one level under `dir` into a CSV table
/// (sorted by run name).
pub fn write_report(dir: &Path) -> Result<String> {
    let mut rows = Vec::new();
    collect_reports(dir, 0, &mut rows)?;
    rows.sort_by(|a, b| a.output_dir.cmp(&b.output_dir));
    let mut out = String::from(
        "name,solver_path,m_total,n_integral,lambda_sq,e_l2_percent,data_loss,enhancement_rounds,runtime_s,output_dir\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.3e},{},{:.6e},{},{:.2},{}\n",
            r.name,
            solver_path_str(r.solver_path),
            r.m_total,
            r.n_integral,
            r.lambda_sq,
            r.e_l2
                .map(|v| format!("{:.3}", 100.0 * v))
                .unwrap_or_default(),
            r.data_loss,
            r.enhancement_rounds,
            r.runtime_s,
            r.output_dir,
        ));
    }
    Ok(out)
}

fn collect_reports(dir: &Path, depth: usize, rows: &mut Vec<RunReport>) -> Result<()> {
    let report = dir.join("report.json");
    if report.is_file() {
        let text = fs::read_to_string(report)?;
        rows.push(serde_json::from_str(&text)?);
    }
    if depth >= 3 {
        return Ok(());
    }
    if dir.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        entries.sort();
        for sub in entries {
            collect_reports(&sub, depth + 1, rows)?;
        }
    }
    Ok(())
}
