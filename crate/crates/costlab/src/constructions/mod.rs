//! Construction engines run over a finite horizon.
//!
//! Each engine is a deterministic stage loop over explicit mock inputs
//! (universes of enumerations, scripted approximations, convergence
//! schedules). Ties are broken by least requirement, then least number.

mod complete;
mod nonimplication;
mod separation;
mod simple;
mod sjt;
mod slow;

pub use complete::{build_complete_model, CompleteModel, CompleteModelReport, MarkerEvent, MarkerReason};
pub use nonimplication::{diagonalize_nonimplication, Action, Epoch, MockApprox, NonImplication};
pub use separation::{separation_run, ClaimEntry, Opponent, SeparationRun, SeparationStatus};
pub use simple::{build_prompt_simple, build_simple, qualifying, SimpleRun};
pub use sjt::{sjt_reduction, weak_ktrivial_requests, SjtReport, SjtViolation, StringTable, WeakKTrivial};
pub use slow::{infinite_ce_divergence, slow_enum_n, Divergence, IntervalCost, SlowEnumeration};

use crate::cost::{ApproximationTrace, EnumerationTrace, TraceError};
use crate::machine::MachineError;
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConstructionError {
    #[error("provider lacks a short description of 2^{j}: K = {len:?}, need ≤ {need}")]
    ScheduleInsufficient { j: u32, len: Option<u32>, need: u32 },
    #[error("horizon {horizon} too short, need {needed}")]
    HorizonTooShort { needed: u64, horizon: u64 },
    #[error("function table repeats the value {value} at {i} and {j}")]
    NotInjective { value: u64, i: usize, j: usize },
    #[error("function table has {len} entries, need {needed}")]
    TableTooShort { needed: usize, len: usize },
    #[error("no x < {horizon} with c(x, S) < 2^-{k} and 2^{k} c(x, S) < d(x, S)")]
    NoWitness { k: u32, horizon: u64 },
    #[error("two computations converge at stage {stage}")]
    ComputationClash { stage: u64 },
    #[error("computation for {k} converges at stage {stage} with value {value} > stage")]
    LateValue { k: u64, stage: u64, value: u64 },
    #[error("ledger {ledger} exceeds the budget {budget}")]
    BudgetExceeded { ledger: Rational, budget: Rational },
    #[error("not erasing: change at x = {x}, stage {s} leaves {y} in the set")]
    NotErasing { s: u64, x: u64, y: u64 },
    #[error("length {len} out of range")]
    LengthOutOfRange { len: u64 },
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// An indexed family `W_0, …, W_{E-1}` of enumerations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Universe {
    sets: Vec<EnumerationTrace>,
}

impl Universe {
    pub fn new(sets: Vec<EnumerationTrace>) -> Self {
        Universe { sets }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn get(&self, e: usize) -> &EnumerationTrace {
        &self.sets[e]
    }

    pub fn sets(&self) -> &[EnumerationTrace] {
        &self.sets
    }

    /// Elements entering `W_e` exactly at stage `s`.
    pub fn arrivals(&self, e: usize, s: u64) -> impl Iterator<Item = u64> + '_ {
        self.sets[e].events_at(s).iter().map(|ev| ev.x)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (e, w) in self.sets.iter().enumerate() {
            out.push_str(&format!("set {e}\n"));
            out.push_str(&w.to_text());
        }
        out
    }

    /// Inverse of [`Universe::to_text`]. Sets must appear as `set 0`,
    /// `set 1`, … in order; line numbers in errors refer to the whole text.
    pub fn from_text(text: &str) -> Result<Self, TraceError> {
        let lines: Vec<&str> = text.lines().collect();
        let mut starts = Vec::new();
        for (i, raw) in lines.iter().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if let Some(rest) = line.strip_prefix("set ") {
                let e: usize = rest
                    .trim()
                    .parse()
                    .map_err(|_| TraceError::Parse { line: i + 1, msg: format!("bad set index `{rest}`") })?;
                if e != starts.len() {
                    return Err(TraceError::Parse { line: i + 1, msg: format!("expected `set {}`", starts.len()) });
                }
                starts.push(i);
            } else if !line.is_empty() && starts.is_empty() {
                return Err(TraceError::Parse { line: i + 1, msg: "event before the first `set` line".into() });
            }
        }
        let mut sets = Vec::with_capacity(starts.len());
        for (k, &lo) in starts.iter().enumerate() {
            let hi = starts.get(k + 1).copied().unwrap_or(lines.len());
            let chunk: String = (0..hi).map(|i| if i > lo { lines[i] } else { "" }).collect::<Vec<_>>().join("\n");
            sets.push(EnumerationTrace::try_from(ApproximationTrace::from_text(&chunk)?)?);
        }
        Ok(Universe { sets })
    }
}

/// State of one requirement.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RequirementRecord {
    pub met: bool,
    /// Stage at which the requirement was declared met.
    pub met_stage: Option<u64>,
    /// Witness number chosen when met.
    pub witness: Option<u64>,
    /// Number of initializations, `b`.
    pub init_count: u64,
    /// Progress `α_s(e)` in the current epoch.
    pub alpha: Rational,
    pub init_stage: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RequirementLedger {
    pub records: Vec<RequirementRecord>,
}

impl RequirementLedger {
    pub fn new(n: usize) -> Self {
        RequirementLedger { records: vec![RequirementRecord::default(); n] }
    }

    pub fn met_count(&self) -> usize {
        self.records.iter().filter(|r| r.met).count()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `e,met,met_stage,witness,b,alpha_num,alpha_den,init_stage` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("e,met,met_stage,witness,b,alpha_num,alpha_den,init_stage\n");
        for (e, r) in self.records.iter().enumerate() {
            let (n, d) = r.alpha.parts();
            let opt = |v: Option<u64>| v.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{e},{},{},{},{},{n},{d},{}\n",
                u8::from(r.met),
                opt(r.met_stage),
                opt(r.witness),
                r.init_count,
                r.init_stage
            ));
        }
        out
    }
}
