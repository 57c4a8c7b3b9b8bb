//! The two-phase reconstruction pipeline.
//!
//! Phase one (`run_ia_rfm`) alternates Tikhonov solves with quadrature-mesh
//! refinement driven by per-cell indicators of the current reconstruction's
//! magnitude and gradient. Phase two (`run_ma_rfm`) thresholds the phase-one
//! solution on a test grid, splits the highlighted points into connected
//! regions, estimates shape statistics per region, samples morphology bases
//! inside the tolerance windows, appends them as new columns, and re-solves;
//! a residual gate stops the enhancement loop.

mod detect;
mod ia;
mod ma;
mod model;

pub use detect::{
    detect_regions, estimate_shape, extract_half_max_contour, ComponentStats, DetectMode,
    PeakStats, PosteriorMask, ShapeEstimate, ShapeKind,
};
pub use ia::{
    compute_indicators, run_ia_rfm, CellIndicator, IaRfmOutcome, IterationRecord, LambdaRule,
    RefineOptions, RefinementIndicator,
};
pub use ma::{run_ma_rfm, EnhancementOptions, MaRfmOutcome, RegionSpec};
pub use model::{l2_relative_error, Provenance, SourceModel, TestGrid};

use crate::assembly::{BlockWeights, BoundaryData, MeasurementPoint, WavenumberSet};
use crate::basis::BasisSet;
use crate::point::Dim;
use crate::quadmesh::AdaptiveMesh;

/// Everything a reconstruction needs: geometry, data, and the initial
/// approximation space.
pub struct Problem {
    pub dim: Dim,
    pub mesh: AdaptiveMesh,
    pub basis: BasisSet,
    pub ks: WavenumberSet,
    pub points: Vec<MeasurementPoint>,
    pub data: BoundaryData,
    pub weights: BlockWeights,
}
