use std::collections::BTreeSet;

use super::{ConstructionError, RequirementLedger};
use crate::cost::{cost_of_trace, ApproximationTrace, CostFn, Event, TraceBuilder};
use crate::rational::Rational;

/// A scripted opponent: a possibly partial approximation `t ↦ Φ(t)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockApprox {
    /// `Φ(t)` converges at stage `t + lag` with value `A_t`. `lag ≥ 1`.
    Copy { lag: u64 },
    /// Never converges.
    Silent,
    /// `Φ(t)` converges at stage `t + 1` with the given set.
    Constant(BTreeSet<u64>),
    /// As `Copy` for `t < until`; diverges from then on.
    CopyUntil { lag: u64, until: u64 },
}

impl MockApprox {
    fn conv(&self, t: u64) -> Option<u64> {
        match self {
            MockApprox::Copy { lag } => Some(t + (*lag).max(1)),
            MockApprox::Silent => None,
            MockApprox::Constant(_) => Some(t + 1),
            MockApprox::CopyUntil { lag, until } => (t < *until).then(|| t + (*lag).max(1)),
        }
    }

    /// `Φ(t)↾u = A_u↾u`.
    fn matches(&self, a: &TraceBuilder, t: u64, u: u64) -> bool {
        match self {
            MockApprox::Copy { .. } | MockApprox::CopyUntil { .. } => {
                (0..u).all(|x| a.value_at(x, t) == a.value_at(x, u))
            }
            MockApprox::Silent => false,
            MockApprox::Constant(set) => (0..u).all(|x| set.contains(&x) == a.value_at(x, u)),
        }
    }
}

/// `R_e` acted at stage `s` on `x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub s: u64,
    pub e: usize,
    pub x: u64,
    pub cost: Rational,
}

/// One initialization epoch of `R_e`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Epoch {
    pub e: usize,
    pub b: u64,
    pub start: u64,
    pub end: Option<u64>,
    pub alpha: Rational,
    pub actions: u64,
}

#[derive(Debug, Clone)]
pub struct NonImplication {
    pub trace: ApproximationTrace,
    pub ledger: RequirementLedger,
    pub actions: Vec<Action>,
    pub epochs: Vec<Epoch>,
    pub expansionary: Vec<Vec<u64>>,
    /// The approximation each opponent produced within the horizon.
    pub phi_traces: Vec<Option<ApproximationTrace>>,
    pub phi_d_costs: Vec<Rational>,
}

impl NonImplication {
    /// Exact upper bound `2^{-b-e+1}` per epoch on `α` at any stage.
    pub fn epoch_bound(e: usize, b: u64) -> Rational {
        Rational::pow2_neg((b + e as u64 - 1) as u32)
    }
}

struct ReqState {
    u: u64,
    next_t: u64,
    epoch: usize,
}

/// Builds `A` obeying `c` while driving the `d`-cost of each opponent that
/// tracks `A` above 1. Every requirement counts as initialized at stage 0,
/// so `b ≥ 1` and the total cost is at most `Σ_e 2^{-e+1} = 4`.
pub fn diagonalize_nonimplication(
    c: &CostFn,
    d: &CostFn,
    phis: &[MockApprox],
    horizon: u64,
) -> Result<NonImplication, ConstructionError> {
    let witnessed = (0..horizon).any(|x| {
        let cx = c.eval(x, horizon);
        cx < Rational::pow2_neg(1) && cx.mul_int(2) < d.eval(x, horizon)
    });
    if !witnessed {
        return Err(ConstructionError::NoWitness { k: 1, horizon });
    }
    let n = phis.len();
    let mut ledger = RequirementLedger::new(n);
    let mut epochs = Vec::new();
    let mut states = Vec::with_capacity(n);
    for (e, r) in ledger.records.iter_mut().enumerate() {
        r.init_count = 1;
        epochs.push(Epoch { e, b: 1, start: 0, end: None, alpha: Rational::zero(), actions: 0 });
        states.push(ReqState { u: 0, next_t: 0, epoch: e });
    }
    let mut expansionary: Vec<Vec<u64>> = vec![vec![0]; n];
    let mut a = TraceBuilder::new(horizon);
    let mut members: BTreeSet<u64> = BTreeSet::new();
    let mut actions = Vec::new();

    for s in 1..=horizon {
        let mut exp = vec![false; n];
        for e in 0..n {
            let st = &mut states[e];
            let phi = &phis[e];
            let mut t = st.next_t;
            while t < s && phi.conv(t).is_some_and(|cs| cs <= s) {
                if phi.matches(&a, t, st.u) {
                    exp[e] = true;
                    break;
                }
                t += 1;
            }
            st.next_t = t;
            if exp[e] {
                st.u = s;
                st.next_t = s;
                expansionary[e].push(s);
            }
        }
        let chosen = (0..n).find(|&e| {
            let r = &ledger.records[e];
            exp[e] && r.alpha <= Rational::pow2_neg((r.init_count + e as u64) as u32)
        });
        let Some(e) = chosen else { continue };
        let k = (ledger.records[e].init_count + e as u64) as u32;
        let bound = Rational::pow2_neg(k);
        let init = ledger.records[e].init_stage;
        let pick = (init..s).find_map(|x| {
            let cx = c.eval(x, s);
            (cx < bound && Rational::pow2(k) * cx.clone() < d.eval(x, s)).then_some((x, cx))
        });
        let Some((x, cost)) = pick else { continue };
        let flipped = !a.get(x);
        a.set(s, x, flipped)?;
        if flipped {
            members.insert(x);
        } else {
            members.remove(&x);
        }
        let above: Vec<u64> = members.range(x + 1..s).copied().collect();
        for y in above {
            a.set(s, y, false)?;
            members.remove(&y);
        }
        let r = &mut ledger.records[e];
        r.alpha += &cost;
        if r.alpha > bound && !r.met {
            r.met = true;
            r.met_stage = Some(s);
            r.witness = Some(x);
        }
        let ep = &mut epochs[states[e].epoch];
        ep.alpha = r.alpha.clone();
        ep.actions += 1;
        actions.push(Action { s, e, x, cost });
        for i in e + 1..n {
            let r = &mut ledger.records[i];
            r.alpha = Rational::zero();
            r.init_count += 1;
            r.init_stage = s;
            r.met = false;
            r.met_stage = None;
            r.witness = None;
            epochs[states[i].epoch].end = Some(s);
            states[i] = ReqState { u: s, next_t: s, epoch: epochs.len() };
            epochs.push(Epoch { e: i, b: r.init_count, start: s, end: None, alpha: Rational::zero(), actions: 0 });
            expansionary[i].push(s);
        }
    }
    let trace = a.finish();
    let mut phi_traces = Vec::with_capacity(n);
    let mut phi_d_costs = Vec::with_capacity(n);
    for phi in phis {
        let t = opponent_trace(phi, &trace, horizon);
        phi_d_costs.push(t.as_ref().map(|t| cost_of_trace(d, t).total().clone()).unwrap_or_else(Rational::zero));
        phi_traces.push(t);
    }
    Ok(NonImplication { trace, ledger, actions, epochs, expansionary, phi_traces, phi_d_costs })
}

/// `⟨B_t⟩` for the arguments `t` on which `Φ` converged by the horizon.
fn opponent_trace(phi: &MockApprox, a: &ApproximationTrace, horizon: u64) -> Option<ApproximationTrace> {
    let last = (0..=horizon).take_while(|&t| phi.conv(t).is_some_and(|cs| cs <= horizon)).last()?;
    let events = match phi {
        MockApprox::Copy { .. } | MockApprox::CopyUntil { .. } => {
            a.events().iter().filter(|ev| ev.s <= last).copied().collect()
        }
        MockApprox::Constant(set) => set.iter().map(|&x| Event { s: 0, x, v: true }).collect(),
        MockApprox::Silent => return None,
    };
    Some(ApproximationTrace::new(last, events).expect("events within horizon"))
}
