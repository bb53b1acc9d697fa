//! Cost functions, computable approximations and total-cost ledgers.
//!
//! A [`CostFn`] is evaluated stagewise; an [`ApproximationTrace`] is a
//! finite event log of `⟨A_s⟩`; [`cost_of_trace`] charges each stage at the
//! least changed `x < s`. Checks over a finite horizon are proxies for the
//! corresponding limit properties, and are named and documented as such.

mod checks;
mod function;
mod ledger;
mod trace;

pub use checks::{
    benign_witness, check_monotone, check_proper, dominance_violations, limit_estimate, limit_estimate_window,
    proper_witness, Chain, MonotoneReport, LIMIT_WINDOW_DIVISOR,
};
pub use function::{CostEval, CostFn, Props};
pub use ledger::{cost_of_trace, obeys_at_horizon, Charge, CostLedger};
pub use trace::{ApproximationTrace, EnumerationTrace, Event, TraceBuilder, TraceError};
