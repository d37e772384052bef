//! Distance correlation between datasets held by two parties, under
//! differential privacy.
//!
//! Alice holds `X`, Bob holds `Y`. Alice releases K noisy random projections
//! of `X` (Gaussian mechanism) and a Laplace-privatized distance variance;
//! Bob averages projected distance covariances against his own projections
//! of `Y` and assembles the private distance correlation.

pub mod bench;
pub mod bounds;
pub mod data;
pub mod error;
pub mod estimators;
pub mod privacy;
pub mod protocol;
pub mod rng;

pub use data::{DataMatrix, DistanceMatrix, KernelMatrix, SquareMatrix};
pub use error::{Error, Phase, Result};
pub use estimators::{
    dcov_via_hsic, hsic, induced_kernel, induced_metric, pairwise_distances, projected_dcov,
    projection_constant, sample_unit_projections, unbiased_dcorr, unbiased_dcov, Bijection,
    EstimateKind, EstimateRecord, ProjectionSet,
};
pub use privacy::{
    compose_budget, gaussian_sigma, hsic_global_sensitivity, l2_sensitivity, privatize_dvar,
    privatize_projection, BudgetLedger, DvarStatistic, NoiseSpec, PrivacyBudget, Variant,
};
pub use protocol::{
    alice_prepare, bob_compute, partition_rows, run_session, DcorrResult, NoiseMode,
    ProtocolConfig, ProtocolMessage, Transport,
};

#[cfg(test)]
#[path = "../tests/common/oracle.rs"]
mod oracle;
