//! Phase one: indicator-driven refinement of the quadrature mesh.
//!
//! Per cell and iteration the indicators are quadrature sums of the current
//! reconstruction,
//!
//! ```text
//! ind_abs  = Σ_j |S(y_j)| w_j,      ind_grad = Σ_j ‖∇S(y_j)‖ w_j,
//! ind_total = γ_abs ind_abs + γ_grad ind_grad,
//! ```
//!
//! and a cell splits when `ind_total` strictly exceeds `δ = c · mean`.
//! The loop stops when the solution stops moving (relative change below
//! `epsilon` on the evaluation grid), when no cell qualifies, or after
//! `max_iter` rounds.

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{l2_relative_error, Provenance, SourceModel, TestGrid};
use super::Problem;
use crate::assembly::{assemble_operator, assemble_rhs};
use crate::point::{norm, Point};
use crate::quadmesh::{AdaptiveMesh, CellId, MAX_LEVEL};
use crate::solver::{lcurve_select, TikhonovSolver};
use crate::{Error, Result};

/// How λ² is chosen across iterations.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LambdaRule {
    /// One fixed λ² everywhere.
    Pinned { lambda_sq: f64 },
    /// Per-iteration values; the last one repeats if iterations run longer.
    PerIteration { lambda_sqs: Vec<f64> },
    /// L-curve on the first solve, the winner reused afterwards.
    LCurveThenReuse { grid: Vec<f64> },
    /// Fresh L-curve selection at every solve.
    LCurveEverySolve { grid: Vec<f64> },
}

impl LambdaRule {
    /// Resolves λ² for solve number `solve_index`, given the previous
    /// selection (if any). Returns the L-curve when one was computed.
    pub(crate) fn select(
        &self,
        solver: &TikhonovSolver,
        solve_index: usize,
        previous: Option<f64>,
    ) -> Result<(f64, Option<crate::solver::LCurve>)> {
        match self {
            LambdaRule::Pinned { lambda_sq } => Ok((*lambda_sq, None)),
            LambdaRule::PerIteration { lambda_sqs } => {
                if lambda_sqs.is_empty() {
                    return Err(Error::Solver("empty per-iteration λ² list".into()));
                }
                Ok((lambda_sqs[solve_index.min(lambda_sqs.len() - 1)], None))
            }
            LambdaRule::LCurveThenReuse { grid } => match previous {
                Some(l) => Ok((l, None)),
                None => {
                    let curve = lcurve_select(solver, grid)?;
                    Ok((curve.selected_lambda_sq, Some(curve)))
                }
            },
            LambdaRule::LCurveEverySolve { grid } => {
                let curve = lcurve_select(solver, grid)?;
                Ok((curve.selected_lambda_sq, Some(curve)))
            }
        }
    }
}

/// Refinement knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefineOptions {
    pub gamma_abs: f64,
    pub gamma_grad: f64,
    /// Threshold safety factor: δ = c · mean(ind_total).
    pub c: f64,
    /// Relative-change stopping tolerance.
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            gamma_abs: 1.0,
            gamma_grad: 1.0,
            c: 1.0,
            epsilon: 5e-2,
            max_iter: 10,
        }
    }
}

/// Indicator triple for one cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellIndicator {
    pub id: u64,
    pub ind_abs: f64,
    pub ind_grad: f64,
    pub ind_total: f64,
}

/// All per-cell indicators plus the marking threshold.
#[derive(Debug, Clone)]
pub struct RefinementIndicator {
    pub cells: Vec<CellIndicator>,
    pub gamma_abs: f64,
    pub gamma_grad: f64,
    pub c: f64,
    pub threshold: f64,
}

impl RefinementIndicator {
    /// Ids of cells strictly above the threshold (ties stay unrefined).
    pub fn marked(&self) -> BTreeSet<CellId> {
        self.cells
            .iter()
            .filter(|c| c.ind_total > self.threshold)
            .map(|c| CellId(c.id))
            .collect()
    }
}

/// Quadrature sums of `|S|` and `‖∇S‖` per leaf, with `δ = c · mean`.
pub fn compute_indicators(
    mesh: &AdaptiveMesh,
    model: &SourceModel,
    gamma_abs: f64,
    gamma_grad: f64,
    c: f64,
) -> RefinementIndicator {
    let cells: Vec<CellIndicator> = mesh
        .leaves()
        .par_iter()
        .map(|leaf| {
            let mut ind_abs = 0.0;
            let mut ind_grad = 0.0;
            for (&p, &w) in leaf.points.iter().zip(&leaf.weights) {
                let (v, g) = model.value_and_grad(p);
                ind_abs += v.abs() * w;
                ind_grad += norm(g) * w;
            }
            CellIndicator {
                id: leaf.cell.id.0,
                ind_abs,
                ind_grad,
                ind_total: gamma_abs * ind_abs + gamma_grad * ind_grad,
            }
        })
        .collect();
    let mean = cells.iter().map(|c| c.ind_total).sum::<f64>() / cells.len().max(1) as f64;
    RefinementIndicator {
        cells,
        gamma_abs,
        gamma_grad,
        c,
        threshold: c * mean,
    }
}

/// One line of the run history (serialized as JSON-lines by the harness).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub phase: String,
    pub iteration: usize,
    pub n_integral: usize,
    pub leaf_count: usize,
    pub basis_size: usize,
    pub lambda_sq: f64,
    pub data_loss: f64,
    pub residual_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_change: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_l2: Option<f64>,
    pub refined_cells: usize,
    pub skipped_max_level: usize,
    pub elapsed_ms: u64,
}

/// Phase-one output.
#[derive(Debug)]
pub struct IaRfmOutcome {
    pub model: SourceModel,
    pub mesh: AdaptiveMesh,
    pub lambda_sq: f64,
    pub history: Vec<IterationRecord>,
    /// Values of the final model on the evaluation grid (reused by callers).
    pub grid_values: Vec<f64>,
    /// The most recent L-curve, when selection used one.
    pub lcurve: Option<crate::solver::LCurve>,
}

/// Runs the refinement loop. `reference` (when known) only feeds the
/// history's error column.
pub fn run_ia_rfm(
    problem: &Problem,
    opts: &RefineOptions,
    lambda_rule: &LambdaRule,
    eval_grid: &TestGrid,
    reference: Option<&(dyn Fn(Point) -> f64 + Sync)>,
) -> Result<IaRfmOutcome> {
    let grid_points = eval_grid.points();
    let reference_values: Option<Vec<f64>> =
        reference.map(|f| grid_points.par_iter().map(|&p| f(p)).collect());

    let mut mesh = problem.mesh.clone();
    let mut history = Vec::new();
    let mut lambda_prev: Option<f64> = None;

    let solve = |mesh: &AdaptiveMesh,
                 solve_index: usize,
                 lambda_prev: Option<f64>|
     -> Result<(SourceModel, f64, f64, Option<crate::solver::LCurve>)> {
        let sys = assemble_operator(
            mesh,
            &problem.basis,
            &problem.ks,
            &problem.points,
            problem.dim,
            problem.weights,
        )?;
        let b = assemble_rhs(&sys, &problem.data)?;
        let solver = TikhonovSolver::new(&sys.a, &b)?;
        let (lambda_sq, curve) = lambda_rule.select(&solver, solve_index, lambda_prev)?;
        let sol = solver.solve(lambda_sq)?;
        if !sol.s.iter().all(|v| v.is_finite()) {
            return Err(Error::Solver(format!(
                "non-finite coefficients at solve {solve_index} (λ² = {lambda_sq:.3e})"
            )));
        }
        let provenance = if solve_index == 0 {
            Provenance::Initial
        } else {
            Provenance::IaRfmIter(solve_index)
        };
        let model = SourceModel::new(
            problem.basis.clone(),
            sol.s.to_vec(),
            provenance,
        );
        Ok((model, lambda_sq, sol.residual_norm, curve))
    };

    let t0 = Instant::now();
    let (mut model, mut lambda_sq, mut residual_norm, mut lcurve) = solve(&mesh, 0, lambda_prev)?;
    lambda_prev = Some(lambda_sq);
    let mut values = model.values(&grid_points);
    history.push(IterationRecord {
        phase: "ia_rfm".into(),
        iteration: 0,
        n_integral: mesh.point_count(),
        leaf_count: mesh.leaf_count(),
        basis_size: problem.basis.len(),
        lambda_sq,
        data_loss: residual_norm * residual_norm,
        residual_norm,
        rel_change: None,
        e_l2: reference_values
            .as_ref()
            .map(|r| l2_relative_error(&values, r))
            .transpose()?,
        refined_cells: 0,
        skipped_max_level: 0,
        elapsed_ms: t0.elapsed().as_millis() as u64,
    });

    for iter in 1..=opts.max_iter {
        let t_iter = Instant::now();
        let ind = compute_indicators(&mesh, &model, opts.gamma_abs, opts.gamma_grad, opts.c);
        let mut marked = ind.marked();
        let total_marked = marked.len();
        // Depth guard: cells already at the maximum level stay put.
        let by_id: std::collections::BTreeMap<u64, u32> = mesh
            .leaves()
            .iter()
            .map(|l| (l.cell.id.0, l.cell.level))
            .collect();
        marked.retain(|id| by_id.get(&id.0).copied().unwrap_or(0) < MAX_LEVEL);
        let skipped = total_marked - marked.len();
        if marked.is_empty() {
            break;
        }
        mesh = mesh.refine(&marked)?;

        let (next_model, next_lambda, next_residual, next_curve) =
            solve(&mesh, iter, lambda_prev)?;
        model = next_model;
        lambda_sq = next_lambda;
        residual_norm = next_residual;
        if next_curve.is_some() {
            lcurve = next_curve;
        }
        lambda_prev = Some(lambda_sq);

        let next_values = model.values(&grid_points);
        let denom = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = values
            .iter()
            .zip(&next_values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let rel_change = if denom > 0.0 { diff / denom } else { f64::INFINITY };
        values = next_values;

        history.push(IterationRecord {
            phase: "ia_rfm".into(),
            iteration: iter,
            n_integral: mesh.point_count(),
            leaf_count: mesh.leaf_count(),
            basis_size: problem.basis.len(),
            lambda_sq,
            data_loss: residual_norm * residual_norm,
            residual_norm,
            rel_change: Some(rel_change),
            e_l2: reference_values
                .as_ref()
                .map(|r| l2_relative_error(&values, r))
                .transpose()?,
            refined_cells: marked.len(),
            skipped_max_level: skipped,
            elapsed_ms: t_iter.elapsed().as_millis() as u64,
        });

        if rel_change < opts.epsilon {
            break;
        }
    }

    Ok(IaRfmOutcome {
        model,
        mesh,
        lambda_sq,
        history,
        grid_values: values,
        lcurve,
    })
}
