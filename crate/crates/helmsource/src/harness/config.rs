//! Experiment configuration: one JSON document describing the domain, the
//! data pipeline, the approximation space, and the solver path. A JSON
//! schema for this format ships at `schemas/experiment.schema.json`.

use serde::{Deserialize, Serialize};

use super::layout::MeasurementLayout;
use super::source::ReferenceSource;
use crate::basis::Activation;
use crate::pipeline::{DetectMode, RegionSpec};
use crate::point::Dim;
use crate::{Error, Result};

/// Which reconstruction path a run takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    /// Single solve on the fixed uniform quadrature.
    Irfm,
    /// Indicator-driven adaptive quadrature.
    IaRfm,
    /// Adaptive quadrature plus morphology enhancement.
    MaRfm,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavenumberSection {
    pub k_min: f64,
    pub k_delta: f64,
    pub k_max: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataKinds {
    #[serde(default = "default_true")]
    pub dirichlet: bool,
    #[serde(default = "default_true")]
    pub neumann: bool,
}

fn default_true() -> bool {
    true
}

impl Default for DataKinds {
    fn default() -> Self {
        DataKinds {
            dirichlet: true,
            neumann: true,
        }
    }
}

/// Dense tensor rule for data generation: `points_per_axis` total points
/// along each axis, in cells of `rule_n` Gauss points.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "default_oracle_points")]
    pub points_per_axis: usize,
    #[serde(default = "default_oracle_rule")]
    pub rule_n: usize,
}

fn default_oracle_points() -> usize {
    400
}

fn default_oracle_rule() -> usize {
    10
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            points_per_axis: default_oracle_points(),
            rule_n: default_oracle_rule(),
        }
    }
}

/// Dirichlet observations on a circle extended to Cauchy data on a larger
/// ring before assembly.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtensionSection {
    pub radius_gen: f64,
    pub n_generate: usize,
    /// Harmonic truncation; defaults to `2⌊δ^{-1/3}⌋` from the noise level.
    #[serde(default)]
    pub truncation: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default)]
    pub kinds: DataKinds,
    #[serde(default)]
    pub noise_delta: f64,
    #[serde(default)]
    pub noise_seed: u64,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub extension: Option<ExtensionSection>,
    /// Spot-check the oracle resolution by doubling its density on a few
    /// sampled data points.
    #[serde(default = "default_true")]
    pub check_oracle: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSection {
    pub m0: usize,
    pub r_m: f64,
    pub activation: Activation,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    pub cells_per_axis: usize,
    pub rule_n: usize,
    #[serde(default = "default_gamma")]
    pub gamma_abs: f64,
    #[serde(default = "default_gamma")]
    pub gamma_grad: f64,
    #[serde(default = "default_gamma")]
    pub c: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_gamma() -> f64 {
    1.0
}

fn default_epsilon() -> f64 {
    5e-2
}

fn default_max_iter() -> usize {
    10
}

/// λ² selection: pinned value, or an L-curve over a log grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizationSection {
    #[serde(default)]
    pub pin_lambda_sq: Option<f64>,
    #[serde(default = "default_grid_lo")]
    pub grid_lo: f64,
    #[serde(default = "default_grid_hi")]
    pub grid_hi: f64,
    #[serde(default = "default_grid_count")]
    pub grid_count: usize,
    /// Re-run the L-curve at every solve instead of reusing the first pick.
    #[serde(default)]
    pub reselect_each_solve: bool,
}

fn default_grid_lo() -> f64 {
    1e-34
}

fn default_grid_hi() -> f64 {
    1e-1
}

fn default_grid_count() -> usize {
    40
}

impl Default for RegularizationSection {
    fn default() -> Self {
        RegularizationSection {
            pin_lambda_sq: None,
            grid_lo: default_grid_lo(),
            grid_hi: default_grid_hi(),
            grid_count: default_grid_count(),
            reselect_each_solve: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnhancementSection {
    pub t_abs: f64,
    pub t_grad: f64,
    pub mode: DetectMode,
    pub region_specs: Vec<RegionSpec>,
    pub epsilon_res: f64,
    #[serde(default = "default_i_max")]
    pub i_max: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_min_region")]
    pub min_region_size: usize,
}

fn default_i_max() -> usize {
    3
}

fn default_min_region() -> usize {
    4
}

/// Synthetic-system path: data is built from the assembled operator with a
/// controlled model inconsistency instead of a forward PDE source.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub nu: f64,
    pub c_nu: f64,
    pub eta_m: f64,
    #[serde(default)]
    pub seed: u64,
    /// Per-entry multiplicative noise on the stacked data vector.
    #[serde(default)]
    pub delta: f64,
    /// Solve at the bound-optimal λ² instead of the L-curve pick.
    #[serde(default = "default_true")]
    pub use_optimal_lambda: bool,
}

/// The whole experiment document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub dim: usize,
    /// Quadrature box V0 (lo/hi per active axis).
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    #[serde(default)]
    pub source: Option<ReferenceSource>,
    pub wavenumbers: WavenumberSection,
    pub layout: MeasurementLayout,
    #[serde(default)]
    pub data: Option<DataSection>,
    pub features: FeatureSection,
    pub quadrature: QuadratureSection,
    #[serde(default)]
    pub regularization: RegularizationSection,
    pub solver_path: SolverPath,
    #[serde(default)]
    pub enhancement: Option<EnhancementSection>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSection>,
    /// Test-grid resolution per axis (defaults: 200 in 2-D, 60 in 3-D).
    #[serde(default)]
    pub p_test: Option<usize>,
    #[serde(default)]
    pub block_weight_dirichlet: Option<f64>,
    #[serde(default)]
    pub block_weight_neumann: Option<f64>,
    /// Dump the assembled system in the dense binary format.
    #[serde(default)]
    pub dump_system: bool,
    pub output_dir: String,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config {
            path: format!("line {} column {}", e.line(), e.column()),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dim_enum(&self) -> Dim {
        Dim::from_usize(self.dim).expect("validated")
    }

    pub fn p_test_resolution(&self) -> usize {
        self.p_test.unwrap_or(match self.dim {
            3 => 60,
            _ => 200,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |path: &str, msg: String| -> Result<()> {
            Err(Error::Config {
                path: path.into(),
                msg,
            })
        };
        if Dim::from_usize(self.dim).is_none() {
            return fail("dim", format!("dimension {} is not 2 or 3", self.dim));
        }
        let d = self.dim;
        if self.box_lo.len() != d || self.box_hi.len() != d {
            return fail(
                "box_lo/box_hi",
                format!("expected {d} components, got {}/{}", self.box_lo.len(), self.box_hi.len()),
            );
        }
        for a in 0..d {
            if !(self.box_hi[a] > self.box_lo[a]) {
                return fail("box_hi", format!("axis {a} has nonpositive extent"));
            }
        }
        let w = &self.wavenumbers;
        if !(w.k_min > 0.0 && w.k_delta > 0.0 && w.k_max >= w.k_min) {
            return fail(
                "wavenumbers",
                format!(
                    "need 0 < k_min <= k_max and k_delta > 0 (got {}, {}, {})",
                    w.k_min, w.k_delta, w.k_max
                ),
            );
        }
        if self.features.m0 == 0 {
            return fail("features.m0", "need at least one feature".into());
        }
        if self.features.r_m <= 0.0 {
            return fail("features.r_m", "feature range must be positive".into());
        }
        if self.quadrature.cells_per_axis == 0 {
            return fail("quadrature.cells_per_axis", "must be at least 1".into());
        }
        if self.quadrature.rule_n == 0 || self.quadrature.rule_n > crate::quadmesh::MAX_RULE_SIZE {
            return fail(
                "quadrature.rule_n",
                format!("must lie in 1..={}", crate::quadmesh::MAX_RULE_SIZE),
            );
        }
        match (self.source.is_some(), self.synthetic.is_some()) {
            (false, false) => {
                return fail("source", "either a source or a synthetic section is required".into())
            }
            (true, true) => {
                return fail(
                    "synthetic",
                    "source and synthetic sections are mutually exclusive".into(),
                )
            }
            _ => {}
        }
        if let Some(src) = &self.source {
            if src.dim().n() != d {
                return fail(
                    "source",
                    format!("source is {}-dimensional but dim = {d}", src.dim().n()),
                );
            }
            if self.data.is_none() {
                return fail("data", "reconstruction runs need a data section".into());
            }
        }
        if let Some(data) = &self.data {
            if data.noise_delta < 0.0 {
                return fail("data.noise_delta", "noise level must be nonnegative".into());
            }
            if data.oracle.rule_n == 0 || data.oracle.points_per_axis < data.oracle.rule_n {
                return fail(
                    "data.oracle",
                    "points_per_axis must be at least rule_n".into(),
                );
            }
            if let Some(ext) = &data.extension {
                if ext.n_generate < 2 {
                    return fail("data.extension.n_generate", "need at least 2 points".into());
                }
                match &self.layout {
                    MeasurementLayout::CircleArc { radius, theta_max, .. } => {
                        if ext.radius_gen <= *radius {
                            return fail(
                                "data.extension.radius_gen",
                                "generation radius must exceed the observation radius".into(),
                            );
                        }
                        if (*theta_max - 2.0 * std::f64::consts::PI).abs() > 1e-12 {
                            return fail(
                                "data.extension",
                                "circular extension requires full-circle observations".into(),
                            );
                        }
                    }
                    _ => {
                        return fail(
                            "data.extension",
                            "circular extension requires a circle_arc layout".into(),
                        )
                    }
                }
                if !data.kinds.dirichlet {
                    return fail(
                        "data.kinds",
                        "circular extension consumes Dirichlet observations".into(),
                    );
                }
            }
        }
        if self.solver_path == SolverPath::MaRfm {
            let enh = self.enhancement.as_ref();
            match enh {
                None => return fail("enhancement", "ma_rfm runs need an enhancement section".into()),
                Some(e) => {
                    if e.region_specs.is_empty() {
                        return fail("enhancement.region_specs", "need at least one spec".into());
                    }
                    if !(0.0 < e.t_abs && e.t_abs < 1.0 && 0.0 < e.t_grad && e.t_grad < 1.0) {
                        return fail(
                            "enhancement",
                            format!("thresholds must lie in (0,1): {} / {}", e.t_abs, e.t_grad),
                        );
                    }
                }
            }
        }
        if let Some(sy) = &self.synthetic {
            if !(sy.nu > 0.0 && sy.nu <= 1.0) {
                return fail("synthetic.nu", format!("ν = {} outside (0, 1]", sy.nu));
            }
            if sy.c_nu <= 0.0 {
                return fail("synthetic.c_nu", "must be positive".into());
            }
            if sy.eta_m < 0.0 {
                return fail("synthetic.eta_m", "must be nonnegative".into());
            }
        }
        if let Some(reg) = self.regularization.pin_lambda_sq {
            if reg < 0.0 {
                return fail("regularization.pin_lambda_sq", "must be nonnegative".into());
            }
        }
        if self.regularization.grid_count < 5 {
            return fail("regularization.grid_count", "need at least 5 grid points".into());
        }
        if self.output_dir.is_empty() {
            return fail("output_dir", "must not be empty".into());
        }
        Ok(())
    }

    /// The descending λ² grid for L-curve selection.
    pub fn lambda_grid(&self) -> Vec<f64> {
        let n = self.regularization.grid_count;
        let (lo, hi) = (self.regularization.grid_lo, self.regularization.grid_hi);
        (0..n)
            .map(|i| hi * (lo / hi).powf(i as f64 / (n - 1) as f64))
            .collect()
    }
}
