//! Differentially private distribution estimation: minimax lower-bound
//! evaluators (Le Cam, Fano, Assouad), the hard-instance families behind
//! them, explicit couplings, DP estimators with an exact finite-mechanism
//! auditor, and a Monte Carlo harness that checks the resulting
//! sample-complexity behaviour.

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod codes;
pub mod couplings;
pub mod dist;
pub mod error;
pub mod harness;
pub mod mechanisms;
pub mod packings;
pub mod rng;

pub use bounds::{
    assouad_bound, fano_bound, fano_sample_complexity, group_privacy_factor, le_cam_bound, packing_bound,
    sample_complexity_table, BoundReport, Problem, SampleThresholds, TableParams, TableRow,
};
pub use codes::{gv_constant_weight, gv_qary, min_distance, Code, CodeOptions, Construction};
pub use couplings::{
    assouad_kary_coupling, empirical_hamming, marginal_check, maximal_coupling_iid, product_flip_coupling,
    CouplingSampler, RecordLaw, Side,
};
pub use dist::{
    distance, gaussian_component_kl, mixture_tv_mc, product_kl, product_tv_exact, sample_dataset, Dataset,
    Distribution, GaussianMixtureSpec, McEstimate, Metric, PrivacyBudget, ProbVector, ProductDist,
};
pub use error::{Error, Result};
pub use harness::{
    monte_carlo_risk, run_experiment, scaling_check, Band, BandResult, EstimatorSpec, ExperimentConfig,
    ExperimentOutcome, FamilyDescriptor, RiskReport, ScalingAxis, ScalingConfig, ScalingProblem, ScalingVerdict,
    CONFIG_SCHEMA,
};
pub use mechanisms::{
    check_dp, empirical_estimator, group_dp_check, laplace_estimator, laplace_from_frequencies, project_simplex,
    randomized_response, EstimatorConfig, EstimatorKind, FiniteMechanism, NeighborRelation,
};
pub use packings::{
    assouad_kary_family, assouad_product_family, gaussian_mixture_packing, kary_l2_packing, kary_tv_packing,
    product_packing, HypercubeFamily, HypercubeKind, Loss, PackingFamily, VerificationReport,
};
