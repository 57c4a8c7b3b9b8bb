//! The reconstructed source as a coefficient vector over a basis set, plus
//! the regular evaluation grids used by detection and error metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSet;
use crate::point::{Dim, Point};
use crate::{Error, Result};

/// Which stage produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Initial,
    IaRfmIter(usize),
    MaRfmIter(usize),
}

/// `S(x) = Σ_m s_m φ_m(x)` with its gradient.
#[derive(Debug, Clone)]
pub struct SourceModel {
    pub basis: BasisSet,
    pub coeffs: Vec<f64>,
    pub provenance: Provenance,
}

impl SourceModel {
    pub fn new(basis: BasisSet, coeffs: Vec<f64>, provenance: Provenance) -> SourceModel {
        assert_eq!(basis.len(), coeffs.len());
        SourceModel {
            basis,
            coeffs,
            provenance,
        }
    }

    pub fn value(&self, x: Point) -> f64 {
        self.basis.accumulate(x, &self.coeffs).0
    }

    pub fn value_and_grad(&self, x: Point) -> (f64, Point) {
        self.basis.accumulate(x, &self.coeffs)
    }

    /// Values and gradients over many points, in input order.
    pub fn eval_batch(&self, points: &[Point]) -> Vec<(f64, Point)> {
        points
            .par_iter()
            .map(|&p| self.basis.accumulate(p, &self.coeffs))
            .collect()
    }

    /// Values only.
    pub fn values(&self, points: &[Point]) -> Vec<f64> {
        self.eval_batch(points).into_iter().map(|(v, _)| v).collect()
    }
}

/// Cell-centered regular grid over a box: point `(i, j, k)` sits at
/// `lo + (i + 1/2) h`, strictly interior. Flat index is x-fastest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestGrid {
    pub dim: Dim,
    pub lo: Point,
    pub hi: Point,
    pub shape: [usize; 3],
}

impl TestGrid {
    pub fn regular(dim: Dim, lo: Point, hi: Point, n_per_axis: usize) -> TestGrid {
        let mut shape = [1usize; 3];
        for a in 0..dim.n() {
            shape[a] = n_per_axis;
        }
        TestGrid { dim, lo, hi, shape }
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.shape[axis] as f64
    }

    pub fn point(&self, flat: usize) -> Point {
        let [nx, ny, _] = self.shape;
        let ix = flat % nx;
        let iy = (flat / nx) % ny;
        let iz = flat / (nx * ny);
        let idx = [ix, iy, iz];
        let mut p = [0.0f64; 3];
        for a in 0..self.dim.n() {
            p[a] = self.lo[a] + (idx[a] as f64 + 0.5) * self.step(a);
        }
        p
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    pub fn coords(&self, flat: usize) -> [usize; 3] {
        let [nx, ny, _] = self.shape;
        [flat % nx, (flat / nx) % ny, flat / (nx * ny)]
    }

    pub fn flat(&self, c: [usize; 3]) -> usize {
        c[0] + self.shape[0] * (c[1] + self.shape[1] * c[2])
    }

    /// Face neighbours (4 in 2-D, 6 in 3-D).
    pub fn neighbours(&self, flat: usize) -> Vec<usize> {
        let c = self.coords(flat);
        let mut out = Vec::with_capacity(2 * self.dim.n());
        for a in 0..self.dim.n() {
            if c[a] > 0 {
                let mut d = c;
                d[a] -= 1;
                out.push(self.flat(d));
            }
            if c[a] + 1 < self.shape[a] {
                let mut d = c;
                d[a] += 1;
                out.push(self.flat(d));
            }
        }
        out
    }
}

/// Relative l² error `√Σ(v - r)² / √Σ r²` over matched samples.
pub fn l2_relative_error(values: &[f64], reference: &[f64]) -> Result<f64> {
    if values.len() != reference.len() {
        return Err(Error::Data(format!(
            "sample count mismatch: {} vs {}",
            values.len(),
            reference.len()
        )));
    }
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for (v, r) in values.iter().zip(reference) {
        num += (v - r) * (v - r);
        den += r * r;
    }
    if den == 0.0 {
        return Err(Error::Data("identically-zero reference".into()));
    }
    Ok((num / den).sqrt())
}
