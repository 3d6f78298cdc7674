//! Experiment orchestration: configuration, campaigns, statistical tests
//! and report plumbing.

pub mod bootstrap;
pub mod campaign;
pub mod config;
pub mod report;
pub mod stats;
pub mod thresholds;

pub use bootstrap::{run_bootstrap, BootstrapParams, BootstrapPhase, BootstrapReport};
pub use campaign::{
    collapse_campaign, derivative_campaign, majorization_campaign, random_family, spread_campaign,
    CollapseCampaign, DerivativeSummary, MajorizationCampaign, ProfiledGraph, SpreadCampaign,
};
pub use config::{ExperimentConfig, ExperimentKind, ProfileVariant};
pub use report::{Report, ReportMeta, REPORT_SCHEMA};
pub use stats::{
    exclusion_duality_test, mean_cut_test, permutation_rank, rewiring_test, uniformity_test,
    DualityReport, MeanCutReport, RewiringReport, UniformityReport,
};
