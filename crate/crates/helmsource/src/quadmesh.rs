//! Tensor-product Gauss–Legendre quadrature on a hierarchy of axis-aligned
//! cells, with dyadic refinement into `2^d` children.
//!
//! A mesh starts as a uniform grid of level-0 cells over the quadrature box
//! `V0`. Refinement replaces marked leaves by their `2^d` children (each
//! child inherits `level + 1`); unmarked leaves and their point sets are
//! untouched. Every leaf carries `n^d` mapped Gauss points and weights, so
//! the mesh is simultaneously the integration rule
//!
//! ```text
//! ∫_V0 f ≈ Σ_i Σ_j w_j^i f(y_j^i)
//! ```
//!
//! and the spatial record the refinement indicators are computed on.
//!
//! Leaves stay ordered lexicographically by `(level, lo)`, and ids are
//! assigned deterministically, so identical inputs reproduce identical
//! meshes, point orderings, and downstream matrix layouts.

use std::collections::BTreeSet;
use std::io::Write;

use crate::point::{Dim, Point};
use crate::{Error, Result};

/// Refinement depth guard; marking a cell at this level is an error.
pub const MAX_LEVEL: u32 = 12;

/// Largest supported one-dimensional rule size.
pub const MAX_RULE_SIZE: usize = 128;

/// One-dimensional Gauss–Legendre rule on `(-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Nodes are the roots of the degree-`n` Legendre polynomial, found by
/// Newton iteration from cosine initial guesses (tolerance 1e-14); weights
/// are `2 / ((1 - t²) P_n'(t)²)`.
pub fn gauss_legendre(n: usize) -> Result<QuadRule> {
    if n < 1 || n > MAX_RULE_SIZE {
        return Err(Error::Mesh(format!(
            "rule size {n} outside supported range 1..={MAX_RULE_SIZE}"
        )));
    }
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // i-th root from the top; Chebyshev-type initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-14 {
                let (p, d) = legendre_and_derivative(n, x);
                dp = d;
                x -= p / d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_and_derivative(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    Ok(QuadRule { nodes, weights })
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0f64;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Stable identifier of a cell within one mesh lineage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId(pub u64);

/// Axis-aligned cell of the refinement hierarchy.
#[derive(Debug, Clone)]
pub struct Cell {
    pub id: CellId,
    pub level: u32,
    pub lo: Point,
    pub hi: Point,
}

impl Cell {
    pub fn volume(&self, dim: Dim) -> f64 {
        (0..dim.n()).map(|a| self.hi[a] - self.lo[a]).product()
    }

    pub fn center(&self, dim: Dim) -> Point {
        let mut c = [0.0; 3];
        for a in 0..dim.n() {
            c[a] = 0.5 * (self.lo[a] + self.hi[a]);
        }
        c
    }
}

/// Leaf cell together with its mapped Gauss points and weights.
#[derive(Debug, Clone)]
pub struct Leaf {
    pub cell: Cell,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

/// Hierarchical quadrature mesh over the box `V0`.
#[derive(Debug, Clone)]
pub struct AdaptiveMesh {
    dim: Dim,
    lo: Point,
    hi: Point,
    rule: QuadRule,
    leaves: Vec<Leaf>,
    next_id: u64,
}

impl AdaptiveMesh {
    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn domain(&self) -> (Point, Point) {
        (self.lo, self.hi)
    }

    pub fn rule(&self) -> &QuadRule {
        &self.rule
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    /// Total number of quadrature points across all leaves.
    pub fn point_count(&self) -> usize {
        self.leaves.iter().map(|l| l.points.len()).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.leaves
            .iter()
            .map(|l| l.weights.iter().sum::<f64>())
            .sum()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim.n()).map(|a| self.hi[a] - self.lo[a]).product()
    }

    /// Iterates `(point, weight)` in the fixed leaf-then-point order.
    pub fn points(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        self.leaves
            .iter()
            .flat_map(|l| l.points.iter().copied().zip(l.weights.iter().copied()))
    }

    /// Σ_i Σ_j w_j^i f(y_j^i), with a fixed reduction order.
    pub fn integrate<T, F>(&self, f: F) -> T
    where
        T: ScaleWeight + std::iter::Sum<T>,
        F: Fn(Point) -> T,
    {
        self.points().map(|(p, w)| f(p).scale(w)).sum()
    }

    /// Replaces each marked leaf by its `2^d` dyadic children. Point and
    /// weight sets are regenerated for the new leaves only.
    pub fn refine(&self, marked: &BTreeSet<CellId>) -> Result<AdaptiveMesh> {
        let known: BTreeSet<CellId> = self.leaves.iter().map(|l| l.cell.id).collect();
        for id in marked {
            if !known.contains(id) {
                return Err(Error::Mesh(format!(
                    "marked id {id:?} is not a current leaf"
                )));
            }
        }
        let mut leaves = Vec::with_capacity(self.leaves.len() + marked.len() * 3);
        let mut next_id = self.next_id;
        for leaf in &self.leaves {
            if !marked.contains(&leaf.cell.id) {
                leaves.push(leaf.clone());
                continue;
            }
            if leaf.cell.level >= MAX_LEVEL {
                return Err(Error::Mesh(format!(
                    "cell {:?} already at max refinement level {MAX_LEVEL}",
                    leaf.cell.id
                )));
            }
            let d = self.dim.n();
            for child in 0..(1usize << d) {
                let mut lo = leaf.cell.lo;
                let mut hi = leaf.cell.hi;
                for axis in 0..d {
                    let mid = 0.5 * (leaf.cell.lo[axis] + leaf.cell.hi[axis]);
                    if child >> axis & 1 == 0 {
                        hi[axis] = mid;
                    } else {
                        lo[axis] = mid;
                    }
                }
                let cell = Cell {
                    id: CellId(next_id),
                    level: leaf.cell.level + 1,
                    lo,
                    hi,
                };
                next_id += 1;
                leaves.push(make_leaf(cell, self.dim, &self.rule));
            }
        }
        sort_leaves(&mut leaves);
        Ok(AdaptiveMesh {
            dim: self.dim,
            lo: self.lo,
            hi: self.hi,
            rule: self.rule.clone(),
            leaves,
            next_id,
        })
    }

    /// Multiplies every quadrature weight; only linearity tests use this.
    #[cfg(test)]
    pub(crate) fn scale_weights_for_test(&mut self, alpha: f64) {
        for leaf in &mut self.leaves {
            for w in &mut leaf.weights {
                *w *= alpha;
            }
        }
    }

    /// One row per leaf: `id,level,lo...,hi...` (active axes only).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.dim.n();
        let axes = ["x", "y", "z"];
        write!(w, "id,level")?;
        for a in 0..d {
            write!(w, ",lo_{}", axes[a])?;
        }
        for a in 0..d {
            write!(w, ",hi_{}", axes[a])?;
        }
        writeln!(w)?;
        for leaf in &self.leaves {
            write!(w, "{},{}", leaf.cell.id.0, leaf.cell.level)?;
            for a in 0..d {
                write!(w, ",{}", leaf.cell.lo[a])?;
            }
            for a in 0..d {
                write!(w, ",{}", leaf.cell.hi[a])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Weighting hook for integrands returning real or complex values.
pub trait ScaleWeight {
    fn scale(self, w: f64) -> Self;
}

impl ScaleWeight for f64 {
    fn scale(self, w: f64) -> Self {
        self * w
    }
}

impl ScaleWeight for num_complex::Complex64 {
    fn scale(self, w: f64) -> Self {
        self * w
    }
}

/// Uniform level-0 mesh: `cells_per_axis` cells along each active axis.
pub fn build_uniform_mesh(
    lo: Point,
    hi: Point,
    cells_per_axis: [usize; 3],
    rule: QuadRule,
    dim: Dim,
) -> Result<AdaptiveMesh> {
    let d = dim.n();
    for a in 0..d {
        if !(hi[a] > lo[a]) {
            return Err(Error::Mesh(format!(
                "degenerate box: axis {a} has extent {}",
                hi[a] - lo[a]
            )));
        }
        if cells_per_axis[a] == 0 {
            return Err(Error::Mesh(format!("cells_per_axis[{a}] must be >= 1")));
        }
    }
    let mut counts = [1usize; 3];
    counts[..d].copy_from_slice(&cells_per_axis[..d]);

    let mut leaves = Vec::with_capacity(counts.iter().product());
    let mut next_id = 0u64;
    let mut idx = [0usize; 3];
    loop {
        let mut clo = [0.0f64; 3];
        let mut chi = [0.0f64; 3];
        for a in 0..d {
            let h = (hi[a] - lo[a]) / counts[a] as f64;
            clo[a] = lo[a] + idx[a] as f64 * h;
            chi[a] = if idx[a] + 1 == counts[a] {
                hi[a]
            } else {
                lo[a] + (idx[a] + 1) as f64 * h
            };
        }
        let cell = Cell {
            id: CellId(next_id),
            level: 0,
            lo: clo,
            hi: chi,
        };
        next_id += 1;
        leaves.push(make_leaf(cell, dim, &rule));

        // Odometer over active axes, last axis fastest.
        let mut a = d;
        loop {
            if a == 0 {
                break;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < counts[a] {
                break;
            }
            idx[a] = 0;
        }
        if idx == [0, 0, 0] {
            break;
        }
    }
    sort_leaves(&mut leaves);
    Ok(AdaptiveMesh {
        dim,
        lo,
        hi,
        rule,
        leaves,
        next_id,
    })
}

fn make_leaf(cell: Cell, dim: Dim, rule: &QuadRule) -> Leaf {
    let d = dim.n();
    let n = rule.len();
    let total = n.pow(d as u32);
    let mut points = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    let mut half = [0.0f64; 3];
    let mut mid = [0.0f64; 3];
    for a in 0..d {
        half[a] = 0.5 * (cell.hi[a] - cell.lo[a]);
        mid[a] = 0.5 * (cell.hi[a] + cell.lo[a]);
    }
    let mut idx = [0usize; 3];
    for _ in 0..total {
        let mut p = [0.0f64; 3];
        let mut w = 1.0f64;
        for a in 0..d {
            p[a] = mid[a] + half[a] * rule.nodes[idx[a]];
            w *= half[a] * rule.weights[idx[a]];
        }
        points.push(p);
        weights.push(w);
        let mut a = d;
        loop {
            if a == 0 {
                break;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < n {
                break;
            }
            idx[a] = 0;
        }
    }
    Leaf {
        cell,
        points,
        weights,
    }
}

fn sort_leaves(leaves: &mut [Leaf]) {
    leaves.sort_by(|a, b| {
        a.cell
            .level
            .cmp(&b.cell.level)
            .then_with(|| a.cell.lo.partial_cmp(&b.cell.lo).expect("finite lo"))
    });
}
