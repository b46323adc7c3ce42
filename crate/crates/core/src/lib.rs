//! Whittle index scheduling for egalitarian processor-sharing queues.
//!
//! A single Bernoulli arrival stream is routed, one slot at a time, to exactly
//! one of several processor-sharing queues. Each queue `i` serves its `x` jobs
//! with per-job completion probability `q_i / x`, so the number of departures
//! is `Binomial(x, q_i / x)` with mean `q_i`. Holding a job costs `C_i` per slot.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: configuration, transition laws, stage costs and the Lyapunov
//!   drift certificate.
//! - [`threshold`]: chains induced by single-queue threshold policies, their
//!   stationary laws, average costs and the stochastic-dominance check.
//! - [`whittle`]: the threshold-structured linear system, the incremental
//!   index iteration and per-server index tables.
//! - [`dp`]: relative value iteration for one queue and for the joint system,
//!   a brute-force policy oracle and the convexity diagnostic on solved values.
//! - [`policies`]: Whittle, Cμ, random and exact-table server selection.
//! - [`sim`]: seeded discrete-time simulation and multi-seed comparison.
//! - [`verify`]: the structural property suite shared by the acceptance tests
//!   and the command-line `properties` workflow.

pub mod dp;
pub mod error;
pub mod markov;
pub mod model;
pub mod policies;
pub mod sim;
pub mod threshold;
pub mod verify;
pub mod whittle;

pub use dp::{
    appendix_f_diagnostic, brute_force_policy_search, joint_rvi, single_queue_rvi, AppendixDiagnostic,
    BruteForceResult, JointSolution, JointSpace, RviOptions, SingleQueueSolution,
};
pub use error::{Error, Result};
pub use model::{
    departure_pmf, lyapunov_certificate, next_state_pmf, stage_cost, validate_config, LyapunovCertificate,
    Pmf, ServerParams, SystemConfig, ValidationReport, Violation,
};
pub use policies::{cmu_select, exact_select, random_select, whittle_select, JointState, PolicyKind};
pub use sim::{compare, simulate, ComparisonTable, PolicySummary, SimReport};
pub use threshold::{
    cumulative_active_mass, dominance_check, stationary_distribution, threshold_average_cost, threshold_chain,
    RecurrentChain, StationaryDistribution, ThresholdPolicy,
};
pub use whittle::{
    build_index_table, compute_index, index_residual, solve_value, IndexIterationConfig, IndexTable,
    ValueSolution,
};
