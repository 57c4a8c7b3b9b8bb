//! Discretized radiation operators over all wavenumbers, stacked with the
//! measured data into one real least-squares system.
//!
//! For each wavenumber `k` the Dirichlet and Neumann operators are
//!
//! ```text
//! (Ψ_k⁽¹⁾)_{d,m} = Σ_i Σ_j w_j^i Φ(k‖x_d - y_j^i‖) φ_m(y_j^i)
//! (Ψ_k⁽²⁾)_{d,m} = Σ_i Σ_j w_j^i ∂Φ(k‖x_d - y_j^i‖)/∂ν(x_d) φ_m(y_j^i)
//! ```
//!
//! and the real system stacks `[Re D; Im D; Re N; Im N]`, each block
//! k-major then measurement-point order. The stacking preserves complex
//! 2-norms, so the real residual `‖A s - b‖²` equals the per-wavenumber
//! complex data loss.
//!
//! Assembly factors into a kernel sweep (independent of the basis) times a
//! weighted basis-value matrix (independent of `k`), so each block is one
//! dense matrix product. Distances from measurement points to quadrature
//! points are computed once and shared across wavenumbers.

use ndarray::{s, Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::io::Write;

use crate::basis::BasisSet;
use crate::point::{dist, dot, norm, sub, Dim, Point};
use crate::quadmesh::AdaptiveMesh;
use crate::specfun::{phi_dr_from_r, phi_from_r};
use crate::{Error, Result};

/// Boundary measurement site. `nu` must be present (unit, 1e-12) whenever
/// Neumann data is collected at the point.
#[derive(Debug, Clone)]
pub struct MeasurementPoint {
    pub x: Point,
    pub nu: Option<Point>,
    pub dirichlet: bool,
    pub neumann: bool,
}

impl MeasurementPoint {
    pub fn dirichlet(x: Point) -> Self {
        MeasurementPoint {
            x,
            nu: None,
            dirichlet: true,
            neumann: false,
        }
    }

    pub fn cauchy(x: Point, nu: Point) -> Self {
        MeasurementPoint {
            x,
            nu: Some(nu),
            dirichlet: true,
            neumann: true,
        }
    }
}

/// Strictly increasing positive wavenumbers.
#[derive(Debug, Clone)]
pub struct WavenumberSet(Vec<f64>);

impl WavenumberSet {
    pub fn new(values: Vec<f64>) -> Result<WavenumberSet> {
        if values.is_empty() {
            return Err(Error::Assembly("empty wavenumber set".into()));
        }
        for pair in values.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(Error::Assembly(format!(
                    "wavenumbers must increase strictly: {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if values[0] <= 0.0 {
            return Err(Error::Assembly("wavenumbers must be positive".into()));
        }
        Ok(WavenumberSet(values))
    }

    /// `k_min, k_min + k_delta, ...` up to and including `k_max` (within a
    /// half-step tolerance).
    pub fn arithmetic(k_min: f64, k_delta: f64, k_max: f64) -> Result<WavenumberSet> {
        if k_delta <= 0.0 {
            return Err(Error::Assembly("k_delta must be positive".into()));
        }
        let mut values = Vec::new();
        let mut k = k_min;
        while k <= k_max + 0.5 * k_delta {
            values.push(k);
            k += k_delta;
        }
        WavenumberSet::new(values)
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
}

/// Which stacked block a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    ReD,
    ImD,
    ReN,
    ImN,
}

/// Provenance of one matrix row.
#[derive(Debug, Clone, Copy)]
pub struct RowInfo {
    pub k_index: usize,
    pub k: f64,
    pub point_index: usize,
    pub kind: RowKind,
}

/// Relative weighting of the Dirichlet and Neumann blocks (rows are scaled
/// by the square roots so the loss picks up the plain factors).
#[derive(Debug, Clone, Copy)]
pub struct BlockWeights {
    pub dirichlet: f64,
    pub neumann: f64,
}

impl Default for BlockWeights {
    fn default() -> Self {
        BlockWeights {
            dirichlet: 1.0,
            neumann: 1.0,
        }
    }
}

/// The real-stacked measurement matrix with its row/column bookkeeping.
#[derive(Debug, Clone)]
pub struct SystemMatrix {
    pub a: Array2<f64>,
    pub row_map: Vec<RowInfo>,
    /// Basis index behind each column.
    pub col_map: Vec<usize>,
    pub ks: WavenumberSet,
    /// Indices (into the caller's point list) of Dirichlet rows, in order.
    pub dirichlet_points: Vec<usize>,
    /// Indices of Neumann rows, in order.
    pub neumann_points: Vec<usize>,
    pub weights: BlockWeights,
}

impl SystemMatrix {
    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    /// Dense binary dump: `u64 n, u64 m`, then row-major f64 entries.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.rows() as u64).to_le_bytes())?;
        w.write_all(&(self.cols() as u64).to_le_bytes())?;
        for row in self.a.rows() {
            for v in row {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Row map as CSV: `row,k_index,k,point,kind`.
    pub fn write_row_map_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "row,k_index,k,point,kind")?;
        for (i, info) in self.row_map.iter().enumerate() {
            let kind = match info.kind {
                RowKind::ReD => "re_d",
                RowKind::ImD => "im_d",
                RowKind::ReN => "re_n",
                RowKind::ImN => "im_n",
            };
            writeln!(
                w,
                "{},{},{},{},{}",
                i, info.k_index, info.k, info.point_index, kind
            )?;
        }
        Ok(())
    }

    /// Column map as CSV: `column,basis_index`.
    pub fn write_col_map_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "column,basis_index")?;
        for (c, m) in self.col_map.iter().enumerate() {
            writeln!(w, "{c},{m}")?;
        }
        Ok(())
    }
}

/// Weighted basis-value matrix `B[j, m] = w_j φ_m(y_j)` over the mesh
/// points; shared by every wavenumber and kernel block.
pub fn weighted_basis_matrix(mesh: &AdaptiveMesh, basis: &BasisSet) -> Array2<f64> {
    let points: Vec<(Point, f64)> = mesh.points().collect();
    let m = basis.len();
    let mut b = Array2::zeros((points.len(), m));
    let rows: Vec<_> = b.axis_iter_mut(ndarray::Axis(0)).collect();
    points
        .par_iter()
        .zip(rows)
        .for_each(|(&(p, w), mut row)| {
            let slice = row.as_slice_mut().expect("contiguous row");
            basis.eval_row_into(p, slice);
            for v in slice.iter_mut() {
                *v *= w;
            }
        });
    b
}

/// Assembles the stacked operator for the given mesh, basis, wavenumbers
/// and measurement points.
pub fn assemble_operator(
    mesh: &AdaptiveMesh,
    basis: &BasisSet,
    ks: &WavenumberSet,
    points: &[MeasurementPoint],
    dim: Dim,
    weights: BlockWeights,
) -> Result<SystemMatrix> {
    if basis.is_empty() {
        return Err(Error::Assembly("empty basis".into()));
    }
    if mesh.point_count() == 0 {
        return Err(Error::Assembly("empty mesh".into()));
    }
    let (lo, hi) = mesh.domain();
    for (i, p) in points.iter().enumerate() {
        let mut inside = true;
        for a in 0..dim.n() {
            if p.x[a] <= lo[a] || p.x[a] >= hi[a] {
                inside = false;
            }
        }
        if inside {
            return Err(Error::Assembly(format!(
                "measurement point {i} lies inside the quadrature box"
            )));
        }
        if p.neumann {
            let nu = p.nu.ok_or_else(|| {
                Error::Assembly(format!("point {i} collects Neumann data but has no normal"))
            })?;
            if (norm(nu) - 1.0).abs() > 1e-12 {
                return Err(Error::Assembly(format!(
                    "normal at point {i} is not unit length"
                )));
            }
        }
    }

    let dirichlet_points: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.dirichlet)
        .map(|(i, _)| i)
        .collect();
    let neumann_points: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.neumann)
        .map(|(i, _)| i)
        .collect();
    if dirichlet_points.is_empty() && neumann_points.is_empty() {
        return Err(Error::Assembly("no measurement rows requested".into()));
    }

    let quad: Vec<(Point, f64)> = mesh.points().collect();
    let n_quad = quad.len();
    let bmat = weighted_basis_matrix(mesh, basis);
    let m = basis.len();
    let nk = ks.len();
    let n_d = dirichlet_points.len();
    let n_n = neumann_points.len();
    let rows_total = 2 * nk * (n_d + n_n);
    let mut a = Array2::zeros((rows_total, m));
    let mut row_map = Vec::with_capacity(rows_total);

    // Distances (and normal projections) are k-independent.
    let dist_d = pairwise_distances(points, &dirichlet_points, &quad);
    let (dist_n, proj_n) = neumann_geometry(points, &neumann_points, &quad);

    let sqrt_wd = weights.dirichlet.sqrt();
    let sqrt_wn = weights.neumann.sqrt();

    let re_d0 = 0;
    let im_d0 = nk * n_d;
    let re_n0 = 2 * nk * n_d;
    let im_n0 = 2 * nk * n_d + nk * n_n;

    for (ki, &k) in ks.values().iter().enumerate() {
        if n_d > 0 {
            let (kre, kim) = kernel_matrices(&dist_d, None, k, dim, n_quad)?;
            let block_re = kre.dot(&bmat);
            let block_im = kim.dot(&bmat);
            a.slice_mut(s![re_d0 + ki * n_d..re_d0 + (ki + 1) * n_d, ..])
                .assign(&(&block_re * sqrt_wd));
            a.slice_mut(s![im_d0 + ki * n_d..im_d0 + (ki + 1) * n_d, ..])
                .assign(&(&block_im * sqrt_wd));
        }
        if n_n > 0 {
            let (kre, kim) = kernel_matrices(&dist_n, Some(&proj_n), k, dim, n_quad)?;
            let block_re = kre.dot(&bmat);
            let block_im = kim.dot(&bmat);
            a.slice_mut(s![re_n0 + ki * n_n..re_n0 + (ki + 1) * n_n, ..])
                .assign(&(&block_re * sqrt_wn));
            a.slice_mut(s![im_n0 + ki * n_n..im_n0 + (ki + 1) * n_n, ..])
                .assign(&(&block_im * sqrt_wn));
        }
    }

    for (ki, &k) in ks.values().iter().enumerate() {
        for &pi in &dirichlet_points {
            row_map.push(RowInfo {
                k_index: ki,
                k,
                point_index: pi,
                kind: RowKind::ReD,
            });
        }
    }
    for (ki, &k) in ks.values().iter().enumerate() {
        for &pi in &dirichlet_points {
            row_map.push(RowInfo {
                k_index: ki,
                k,
                point_index: pi,
                kind: RowKind::ImD,
            });
        }
    }
    for (ki, &k) in ks.values().iter().enumerate() {
        for &pi in &neumann_points {
            row_map.push(RowInfo {
                k_index: ki,
                k,
                point_index: pi,
                kind: RowKind::ReN,
            });
        }
    }
    for (ki, &k) in ks.values().iter().enumerate() {
        for &pi in &neumann_points {
            row_map.push(RowInfo {
                k_index: ki,
                k,
                point_index: pi,
                kind: RowKind::ImN,
            });
        }
    }
    Ok(SystemMatrix {
        a,
        row_map,
        col_map: (0..m).collect(),
        ks: ks.clone(),
        dirichlet_points,
        neumann_points,
        weights,
    })
}

fn pairwise_distances(
    points: &[MeasurementPoint],
    selected: &[usize],
    quad: &[(Point, f64)],
) -> Array2<f64> {
    let n_quad = quad.len();
    let mut d = Array2::zeros((selected.len(), n_quad));
    let rows: Vec<_> = d.axis_iter_mut(ndarray::Axis(0)).collect();
    selected.par_iter().zip(rows).for_each(|(&pi, mut row)| {
        let x = points[pi].x;
        for (slot, &(y, _)) in row.iter_mut().zip(quad) {
            *slot = dist(x, y);
        }
    });
    d
}

/// Distances plus `((x - y)·ν)/r` projections for Neumann rows.
fn neumann_geometry(
    points: &[MeasurementPoint],
    selected: &[usize],
    quad: &[(Point, f64)],
) -> (Array2<f64>, Array2<f64>) {
    let n_quad = quad.len();
    let mut d = Array2::zeros((selected.len(), n_quad));
    let mut proj = Array2::zeros((selected.len(), n_quad));
    let rows: Vec<(_, _)> = d
        .axis_iter_mut(ndarray::Axis(0))
        .zip(proj.axis_iter_mut(ndarray::Axis(0)))
        .collect();
    selected.par_iter().zip(rows).for_each(|(&pi, (mut dr, mut pr))| {
        let x = points[pi].x;
        let nu = points[pi].nu.expect("validated above");
        for ((ds, ps), &(y, _)) in dr.iter_mut().zip(pr.iter_mut()).zip(quad) {
            let diff = sub(x, y);
            let r = norm(diff);
            *ds = r;
            *ps = dot(diff, nu) / r;
        }
    });
    (d, proj)
}

/// Re/Im kernel sweeps for one wavenumber. `proj` switches to the normal
/// derivative kernel.
fn kernel_matrices(
    dists: &Array2<f64>,
    proj: Option<&Array2<f64>>,
    k: f64,
    dim: Dim,
    n_quad: usize,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let n_pts = dists.nrows();
    let mut kre = Array2::zeros((n_pts, n_quad));
    let mut kim = Array2::zeros((n_pts, n_quad));
    let r_min = crate::specfun::DEFAULT_R_MIN;
    let any_singular = dists.iter().any(|&r| r <= r_min);
    if any_singular {
        return Err(Error::Singularity {
            r: dists.iter().copied().fold(f64::INFINITY, f64::min),
            r_min,
        });
    }
    let rows: Vec<(_, _)> = kre
        .axis_iter_mut(ndarray::Axis(0))
        .zip(kim.axis_iter_mut(ndarray::Axis(0)))
        .collect();
    rows.into_par_iter().enumerate().for_each(|(i, (mut re, mut im))| {
        for j in 0..n_quad {
            let r = dists[(i, j)];
            let v: Complex64 = match proj {
                None => phi_from_r(k, r, dim),
                Some(p) => phi_dr_from_r(k, r, dim) * p[(i, j)],
            };
            re[j] = v.re;
            im[j] = v.im;
        }
    });
    Ok((kre, kim))
}

/// Complex boundary data keyed by `(k_index, point_index)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryData {
    pub dirichlet: BTreeMap<(usize, usize), Complex64>,
    pub neumann: BTreeMap<(usize, usize), Complex64>,
}

/// Packs complex data into the stacked real vector in row order.
/// Coverage must match the matrix row map exactly.
pub fn assemble_rhs(matrix: &SystemMatrix, data: &BoundaryData) -> Result<Array1<f64>> {
    let nk = matrix.ks.len();
    let expected_d = nk * matrix.dirichlet_points.len();
    let expected_n = nk * matrix.neumann_points.len();
    if data.dirichlet.len() != expected_d {
        return Err(Error::Assembly(format!(
            "dirichlet data entries {} do not match required {expected_d}",
            data.dirichlet.len()
        )));
    }
    if data.neumann.len() != expected_n {
        return Err(Error::Assembly(format!(
            "neumann data entries {} do not match required {expected_n}",
            data.neumann.len()
        )));
    }
    let mut b = Array1::zeros(matrix.rows());
    let sqrt_wd = matrix.weights.dirichlet.sqrt();
    let sqrt_wn = matrix.weights.neumann.sqrt();
    for (row, info) in matrix.row_map.iter().enumerate() {
        let key = (info.k_index, info.point_index);
        let value = match info.kind {
            RowKind::ReD | RowKind::ImD => data.dirichlet.get(&key),
            RowKind::ReN | RowKind::ImN => data.neumann.get(&key),
        }
        .ok_or_else(|| {
            Error::Assembly(format!(
                "missing data for k index {} point {}",
                info.k_index, info.point_index
            ))
        })?;
        b[row] = match info.kind {
            RowKind::ReD => value.re * sqrt_wd,
            RowKind::ImD => value.im * sqrt_wd,
            RowKind::ReN => value.re * sqrt_wn,
            RowKind::ImN => value.im * sqrt_wn,
        };
    }
    Ok(b)
}

/// Inverse of [`assemble_rhs`]: reads the complex data back out of the
/// stacked vector.
pub fn unpack_rhs(matrix: &SystemMatrix, b: &Array1<f64>) -> Result<BoundaryData> {
    if b.len() != matrix.rows() {
        return Err(Error::Assembly("rhs length mismatch".into()));
    }
    let mut data = BoundaryData::default();
    let sqrt_wd = matrix.weights.dirichlet.sqrt();
    let sqrt_wn = matrix.weights.neumann.sqrt();
    for (row, info) in matrix.row_map.iter().enumerate() {
        let key = (info.k_index, info.point_index);
        let (map, scale) = match info.kind {
            RowKind::ReD | RowKind::ImD => (&mut data.dirichlet, sqrt_wd),
            RowKind::ReN | RowKind::ImN => (&mut data.neumann, sqrt_wn),
        };
        let entry = map.entry(key).or_insert(Complex64::new(0.0, 0.0));
        match info.kind {
            RowKind::ReD | RowKind::ReN => entry.re = b[row] / scale,
            RowKind::ImD | RowKind::ImN => entry.im = b[row] / scale,
        }
    }
    Ok(data)
}

/// Residual `r = A s - b` and data loss `‖r‖²`.
pub fn predict(matrix: &SystemMatrix, s: &Array1<f64>, b: &Array1<f64>) -> (Array1<f64>, f64) {
    let r = matrix.a.dot(s) - b;
    let loss = r.iter().map(|v| v * v).sum();
    (r, loss)
}
