//! Synthetic data generation, the reference source library, and the
//! experiment driver behind the command-line interface.

mod config;
mod data;
mod experiment;
mod layout;
mod source;

pub use config::{
    DataKinds, DataSection, EnhancementSection, ExperimentConfig, ExtensionSection,
    FeatureSection, OracleSection, QuadratureSection, RegularizationSection, SolverPath,
    SyntheticSection, WavenumberSection,
};
pub use data::{
    add_noise, assert_no_inverse_crime, circular_extension, default_truncation, forward_data,
    perturb_stacked, synthesize_consistent_data, synthesize_from_factors, CircularExtension,
    ForwardData, NoiseSpec, SynthSpec,
};
pub use experiment::{run_experiment, sweep_experiment, write_report, RunReport};
pub use layout::MeasurementLayout;
pub use source::ReferenceSource;
