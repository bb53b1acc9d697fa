use std::fmt::Write as _;

use super::function::CostFn;
use super::trace::ApproximationTrace;
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Charge {
    pub s: u64,
    pub x: u64,
    pub amount: Rational,
}

/// Per-stage charges of a trace against a cost function.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CostLedger {
    charges: Vec<Charge>,
    total: Rational,
}

impl CostLedger {
    pub fn charges(&self) -> &[Charge] {
        &self.charges
    }

    pub fn total(&self) -> &Rational {
        &self.total
    }

    /// Sum of charges at stages `≤ t`.
    pub fn partial_total(&self, t: u64) -> Rational {
        self.charges.iter().take_while(|c| c.s <= t).map(|c| &c.amount).sum()
    }

    /// Recomputes the total from the charge list.
    pub fn replay_total(&self) -> Rational {
        self.charges.iter().map(|c| &c.amount).sum()
    }

    /// `stage,x,num,den` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,x,num,den\n");
        for c in &self.charges {
            let (n, d) = c.amount.parts();
            let _ = writeln!(out, "{},{},{},{}", c.s, c.x, n, d);
        }
        out
    }
}

/// Total cost `c⟨A_s⟩`. At each stage `s > 0`, the charge is `c(x, s)` for
/// the least `x < s` with `A_{s-1}(x) ≠ A_s(x)`; changes at `x ≥ s` are free.
pub fn cost_of_trace(c: &CostFn, a: &ApproximationTrace) -> CostLedger {
    let mut charges = Vec::new();
    let mut total = Rational::zero();
    let events = a.events();
    let mut i = 0;
    while i < events.len() {
        let s = events[i].s;
        // Events within a stage are ascending in x.
        let x = events[i].x;
        if x < s {
            let amount = c.eval(x, s);
            total += &amount;
            charges.push(Charge { s, x, amount });
        }
        while i < events.len() && events[i].s == s {
            i += 1;
        }
    }
    CostLedger { charges, total }
}

/// Finite-horizon proxy for obedience: the recorded total is at most `bound`.
pub fn obeys_at_horizon(c: &CostFn, a: &ApproximationTrace, bound: &Rational) -> bool {
    cost_of_trace(c, a).total() <= bound
}
