//! Tensor power method, restarts with deflation, restart planning and
//! recovery matching.

mod power;
mod recovery;
mod restarts;

pub use power::{
    default_iteration_count, tpm, tpm_tracked, tpmr, tpmr_run, Extracted, RestartRecord, RoundRecord,
    TpmOutcome, TpmrRun, TpmrSettings, DEGENERATE_NORM, EARLY_EXIT_TOL,
};
pub use recovery::{deflation_residual_norm, match_components, RecoveryReport};
pub use restarts::{
    is_good_initialization, ln_abs_correlation_survival, plan_restarts, restart_conditions,
    sample_best_restart, ConditionsMet, RestartCount, RestartPlan,
};
