//! Exact machinery for small finite CMDPs: dynamic-programming successor
//! features, policy evaluation, policy iteration, the occupation-measure
//! linear program and the transfer bound. Everything here is deterministic.

mod bound;
mod checks;
mod cmdp;
mod exact;
mod library;

pub use bound::{gpi_bound, BoundParams, BoundTask};
pub use checks::{
    check_gpi_improvement, check_strong_duality, check_transfer_bound, check_value_gap, run_oracle_checks, CheckCounts,
    CheckSummary, OracleCheckReport,
};
pub use cmdp::{random_cmdp, RandomCmdpSpec, TabularCmdp};
pub use exact::{
    action_values, dp_successor_features, dual_value, exact_policy_evaluation, lagrangian_solution,
    policy_action_values, random_feasible_cmdp, solve_cmdp_exact, solve_mdp, utility_range, CmdpSolution,
    ExactSolution, MdpSolution, TabularPolicy,
};
pub use library::{consistency_instance, greedy_policy, source_library, SourceLibrary, CONSISTENCY_MULTIPLIERS};
