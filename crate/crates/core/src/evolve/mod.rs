//! Time evolution, blow-up detection and the balance-law audit.

pub mod blowup;
pub mod initial;
pub mod run;
pub mod scheme;

pub use run::{balance_audit, lambda_proxy, run, run_with, step, AuditRecord, AuditSummary, DtRule, EvolveConfig, Outcome, SimState, Snapshot, Trajectory};
pub use scheme::{FvOperator, Scheme, SolverTolerance};
pub use initial::{admissibility, make_initial_data, AdmissibilityReport};
pub use blowup::{detect_blowup, estimate_t_max, fit_blowup_rate, lambda_sq_linearity, BlowupDetection, RateFit};
