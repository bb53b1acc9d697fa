use super::{RequirementLedger, Universe};
use crate::cost::{CostFn, EnumerationTrace, TraceBuilder};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleRun {
    pub set: EnumerationTrace,
    pub ledger: RequirementLedger,
    pub prompt: bool,
}

/// Simple-set construction. At stage `s > 0`, each unmet `S_e` with `e < s`
/// enumerates the least `x ≥ 2e` in `W_{e,s}` with `c(x, s) ≤ 2^{-e}`.
pub fn build_simple(c: &CostFn, u: &Universe, horizon: u64) -> SimpleRun {
    run(c, u, horizon, false)
}

/// As [`build_simple`], restricted to `x ∈ W_{e,s} - W_{e,s-1}`. The met
/// stage and witness of each requirement are its promptness witness.
pub fn build_prompt_simple(c: &CostFn, u: &Universe, horizon: u64) -> SimpleRun {
    run(c, u, horizon, true)
}

fn run(c: &CostFn, u: &Universe, horizon: u64, prompt: bool) -> SimpleRun {
    let n = u.len();
    let mut ledger = RequirementLedger::new(n);
    let mut a = TraceBuilder::new(horizon);
    // Sorted members of W_{e,s} that are ≥ 2e.
    let mut avail: Vec<Vec<u64>> = vec![Vec::new(); n];
    let bounds: Vec<Rational> = (0..n).map(|e| Rational::pow2_neg(e as u32)).collect();
    let monotone = c.props().monotone_main;
    for s in 0..=horizon {
        let mut fresh: Vec<Vec<u64>> = vec![Vec::new(); n];
        for e in 0..n {
            for x in u.arrivals(e, s) {
                if x >= 2 * e as u64 {
                    let list = &mut avail[e];
                    let pos = list.partition_point(|&y| y < x);
                    list.insert(pos, x);
                    fresh[e].push(x);
                }
            }
        }
        if s == 0 {
            continue;
        }
        for e in 0..n.min(s as usize) {
            if ledger.records[e].met {
                continue;
            }
            let ok = |x: u64| c.eval(x, s) <= bounds[e];
            let pick = if prompt {
                fresh[e].iter().copied().find(|&x| ok(x))
            } else if monotone {
                let list = &avail[e];
                let i = list.partition_point(|&x| !ok(x));
                list.get(i).copied()
            } else {
                avail[e].iter().copied().find(|&x| ok(x))
            };
            if let Some(x) = pick {
                a.set(s, x, true).expect("stages ascend");
                let r = &mut ledger.records[e];
                r.met = true;
                r.met_stage = Some(s);
                r.witness = Some(x);
            }
        }
    }
    let set = EnumerationTrace::try_from(a.finish()).expect("insertions only");
    SimpleRun { set, ledger, prompt }
}

/// Requirements that some stage `s ≤ horizon` lets act: `e < s` and some
/// `x ≥ 2e` in `W_{e,s}` (new at `s` when `prompt`) has `c(x, s) ≤ 2^{-e}`.
/// For stage-monotone `c` only the earliest admissible stage per element is
/// inspected.
pub fn qualifying(c: &CostFn, u: &Universe, horizon: u64, prompt: bool) -> Vec<bool> {
    (0..u.len())
        .map(|e| {
            let bound = Rational::pow2_neg(e as u32);
            u.get(e).events().iter().filter(|ev| ev.x >= 2 * e as u64 && ev.s <= horizon).any(|ev| {
                let first = ev.s.max(e as u64 + 1);
                if prompt {
                    ev.s > e as u64 && c.eval(ev.x, ev.s) <= bound
                } else if c.props().monotone_stage {
                    first <= horizon && c.eval(ev.x, first) <= bound
                } else {
                    (first..=horizon).any(|s| c.eval(ev.x, s) <= bound)
                }
            })
        })
        .collect()
}
