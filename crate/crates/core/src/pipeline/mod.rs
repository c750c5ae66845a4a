//! End-to-end recovery of a potential from simulated boundary data.

mod assemble;
mod config;
mod moments;
mod recover;
mod run;

pub use config::{
    CgoConfig, ExperimentConfig, GeometryConfig, LambdaConfig, NoiseConfig, OutputConfig, PotentialSpec, ProbeConfig,
    XrayConfig, DEMO_CONFIG,
};
pub use moments::{
    amplitude_norm, check_budget, extract_moments, model_moment, ForwardPair, MomentEngine, MomentPair, MomentRecord,
    SplitNorms, TraceMap,
};
pub use assemble::{assemble_f_lambda, dirichlet_kernel, fan_thetas, FLambdaField, GRAM_CONDITION_LIMIT};
pub use recover::{invert_fields, inverse_fourier_x1, relative_errors, FanOperator, LambdaSlice};
pub use run::{moments_csv, recover_potential, run_experiment, write_error_record, ReconErrors, ReconReport, ReportSummary, StageLog};
