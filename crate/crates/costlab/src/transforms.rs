//! Look-ahead transformations between approximations.
//!
//! The stage-sequence transforms (`ibt_transfer`, `conjoin`,
//! `implication_transfer`) emit traces whose horizon is the last output
//! stage `s(K)`. Numbers the sequence does not reach are fixed at stage 0
//! to their value at the input horizon; such changes are free.

use std::collections::{BTreeMap, BTreeSet};

use num::BigUint;

use crate::cost::{cost_of_trace, ApproximationTrace, CostFn, EnumerationTrace, Event, TraceError};
use crate::pairing;
use crate::rational::Rational;
use crate::zoo::LeftCEReal;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransformError {
    #[error("no cutoff reaches the bound; least residual {residual}")]
    CutoffNotFound { residual: Rational },
    #[error("final sets differ at x = {x}")]
    Mismatch { x: u64 },
    #[error("stage sequence `{rule}` reaches {reached}, needs {needed}")]
    StageSeqExhausted { rule: &'static str, reached: u64, needed: u64 },
    #[error("properness unwitnessed for x = {x} at the horizon")]
    Unwitnessed { x: u64 },
    #[error("no decision stage for x = {x} at the horizon")]
    NoWitness { x: u64 },
    #[error(transparent)]
    Trace(#[from] TraceError),
}

type Result<T> = std::result::Result<T, TransformError>;

/// Strictly increasing stages `s(0) < s(1) < …` with the name of the rule
/// that produced them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageSeq {
    stages: Vec<u64>,
    rule: &'static str,
}

impl StageSeq {
    pub fn new(stages: Vec<u64>, rule: &'static str) -> Option<Self> {
        stages.windows(2).all(|w| w[0] < w[1]).then_some(StageSeq { stages, rule })
    }

    pub fn stages(&self) -> &[u64] {
        &self.stages
    }

    pub fn rule(&self) -> &'static str {
        self.rule
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn get(&self, i: usize) -> u64 {
        self.stages[i]
    }

    pub fn last(&self) -> Option<u64> {
        self.stages.last().copied()
    }

    /// Greatest `i` with `s(i) ≤ s`.
    pub fn index_at(&self, s: u64) -> Option<usize> {
        self.stages.partition_point(|&t| t <= s).checked_sub(1)
    }

    /// Least `i` with `s(i) ≥ s`.
    pub fn index_from(&self, s: u64) -> Option<usize> {
        let i = self.stages.partition_point(|&t| t < s);
        (i < self.stages.len()).then_some(i)
    }
}

/// Result of a stage-sequence transform.
#[derive(Debug, Clone)]
pub struct LookAhead {
    pub trace: ApproximationTrace,
    pub seq: StageSeq,
    /// Numbers below this bound follow the look-ahead rule; the rest are
    /// fixed at stage 0.
    pub covered: u64,
}

/// Records `(stage, value)` points for one `x` as events, skipping repeats.
fn emit(events: &mut Vec<Event>, x: u64, points: impl IntoIterator<Item = (u64, bool)>) {
    let mut cur = false;
    for (s, v) in points {
        if v != cur {
            events.push(Event { s, x, v });
            cur = v;
        }
    }
}

fn last_change(a: &ApproximationTrace) -> u64 {
    a.events().last().map_or(0, |e| e.s)
}

fn final_mismatch(a: &ApproximationTrace, b: &ApproximationTrace) -> Option<u64> {
    a.final_set().symmetric_difference(&b.final_set()).next().copied()
}

// --- trimming and decision ---------------------------------------------------

#[derive(Debug, Clone)]
pub struct Trimmed {
    pub trace: ApproximationTrace,
    pub cutoff: u64,
    pub total: Rational,
}

/// `A` with every `x < x0` fixed to its final value from stage 0 on.
fn preset_below(a: &ApproximationTrace, x0: u64) -> ApproximationTrace {
    let mut events: Vec<Event> = a.events().iter().filter(|e| e.x >= x0).copied().collect();
    events.extend(a.touched().filter(|&x| x < x0 && a.final_value(x)).map(|x| Event { s: 0, x, v: true }));
    ApproximationTrace::new(a.horizon(), events).expect("preset events are distinct")
}

/// Least cutoff `x0` such that fixing `A(x)` for `x < x0` brings the total
/// below `eps`. Changes at `x ≥ horizon` are never charged, so some
/// `x0 ≤ horizon` works whenever `eps > 0`.
pub fn trim(a: &ApproximationTrace, c: &CostFn, eps: &Rational) -> Result<Trimmed> {
    let mut cands: Vec<u64> = std::iter::once(0).chain(a.touched().map(|x| x + 1)).collect();
    cands.retain(|&x| x <= a.horizon());
    cands.push(a.horizon());
    cands.sort_unstable();
    cands.dedup();
    let eval = |x0: u64| {
        let t = preset_below(a, x0);
        let total = cost_of_trace(c, &t).total().clone();
        (t, total)
    };
    let pick = |x0: u64, (trace, total): (ApproximationTrace, Rational)| Trimmed { trace, cutoff: x0, total };
    if c.props().monotone_main {
        // The total is antitone in the cutoff.
        let (lo, hi) = (0usize, cands.len() - 1);
        let (t, total) = eval(cands[hi]);
        if &total >= eps {
            return Err(TransformError::CutoffNotFound { residual: total });
        }
        let mut best = (hi, (t, total));
        let (mut lo, mut hi) = (lo, hi);
        while lo < hi {
            let mid = (lo + hi) / 2;
            let r = eval(cands[mid]);
            if &r.1 < eps {
                best = (mid, r);
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        return Ok(pick(cands[best.0], best.1));
    }
    let mut residual: Option<Rational> = None;
    for &x0 in &cands {
        let r = eval(x0);
        if &r.1 < eps {
            return Ok(pick(x0, r));
        }
        residual = Some(match residual {
            Some(q) if q <= r.1 => q,
            _ => r.1,
        });
    }
    Err(TransformError::CutoffNotFound { residual: residual.unwrap_or_else(Rational::zero) })
}

/// Reads `A(x)` off the first stage `t` whose cost `δ = c(x, t) > 0`
/// exceeds the charges still to come after `t`.
pub fn decide_from_cost(c: &CostFn, a: &ApproximationTrace, total: &Rational, x: u64) -> Result<bool> {
    let ledger = cost_of_trace(c, a);
    let charges = ledger.charges();
    let mut spent = Rational::zero();
    let mut i = 0;
    for t in 0..=a.horizon().min(c.horizon()) {
        while i < charges.len() && charges[i].s <= t {
            spent += &charges[i].amount;
            i += 1;
        }
        let delta = c.eval(x, t);
        if delta.is_zero() {
            continue;
        }
        if total.monus(&spent) < delta {
            return Ok(a.value(x, t));
        }
    }
    Err(TransformError::NoWitness { x })
}

// --- enumeration, change set, join ------------------------------------------

/// Converts `A` into an enumeration using a second enumeration `B` of the
/// same set. `x` enters at the start of the first 1-run of `A(x)` that
/// lasts until `B` enumerates `x`, so every entry coincides with an
/// `A`-change at the same stage.
pub fn to_enumeration(a: &ApproximationTrace, b: &EnumerationTrace) -> Result<EnumerationTrace> {
    if let Some(x) = final_mismatch(a, b) {
        return Err(TransformError::Mismatch { x });
    }
    let mut events = Vec::new();
    for x in a.touched() {
        let Some(entry_b) = b.entry_stage(x) else { continue };
        let hist = a.history(x);
        for (idx, &(r, v)) in hist.iter().enumerate() {
            if !v {
                continue;
            }
            let end = hist.get(idx + 1).map_or(u64::MAX, |&(t, _)| t);
            if entry_b < end {
                events.push(Event { s: r, x, v: true });
                break;
            }
        }
    }
    let t = ApproximationTrace::new(a.horizon().max(b.horizon()), events)?;
    Ok(EnumerationTrace::try_from(t)?)
}

/// A pairing function with its inverse.
#[derive(Debug, Clone, Copy)]
pub struct Pairing {
    pub pair: fn(u64, u64) -> u64,
    pub unpair: fn(u64) -> (u64, u64),
}

impl Pairing {
    pub fn cantor() -> Self {
        Pairing { pair: pairing::pair, unpair: pairing::unpair }
    }
}

/// The change set: the `i`-th change of `A(x)` (counting from 0) enumerates
/// `⟨x, i⟩` at the stage it happens.
pub fn change_set(a: &ApproximationTrace, p: Pairing) -> EnumerationTrace {
    let mut events = Vec::with_capacity(a.events().len());
    for x in a.touched() {
        for (i, &(s, _)) in a.history(x).iter().enumerate() {
            events.push(Event { s, x: (p.pair)(x, i as u64), v: true });
        }
    }
    let t = ApproximationTrace::new(a.horizon(), events).expect("pairs are distinct");
    EnumerationTrace::try_from(t).expect("insertions only")
}

/// `A(x)` is the parity of the number of recorded changes of `x`.
pub fn decode_change_set(c: &EnumerationTrace, p: Pairing) -> BTreeSet<u64> {
    let mut parity: BTreeMap<u64, bool> = BTreeMap::new();
    for z in c.final_set() {
        let (x, _) = (p.unpair)(z);
        *parity.entry(x).or_default() ^= true;
    }
    parity.into_iter().filter(|&(_, v)| v).map(|(x, _)| x).collect()
}

/// `A ⊕ B = 2A ∪ (2B + 1)`.
pub fn join(a: &ApproximationTrace, b: &ApproximationTrace) -> ApproximationTrace {
    let events = a
        .events()
        .iter()
        .map(|e| Event { x: 2 * e.x, ..*e })
        .chain(b.events().iter().map(|e| Event { x: 2 * e.x + 1, ..*e }))
        .collect();
    ApproximationTrace::new(a.horizon().max(b.horizon()), events).expect("disjoint codings")
}

// --- ibT transfer -------------------------------------------------------------

/// How an [`IbTFunctional`] turns oracle bits into an answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IbTRule {
    /// `Γ^B(x) = B(x)`.
    Identity,
    /// Ignores the oracle.
    Constant(BTreeSet<u64>),
    /// Truth table over the bits `B(x+1-width) … B(x)`; table `x mod len`
    /// is used for input `x`.
    Window { width: u32, tables: Vec<Vec<bool>> },
}

/// Table-driven Turing functional with use at most `x`. `Γ(x)[s]`
/// converges once `s ≥ conv[x]` (0 when absent), reading the oracle as
/// approximated at stage `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IbTFunctional {
    pub rule: IbTRule,
    pub conv: Vec<u64>,
}

impl IbTFunctional {
    pub fn identity() -> Self {
        IbTFunctional { rule: IbTRule::Identity, conv: Vec::new() }
    }

    pub fn constant(set: BTreeSet<u64>) -> Self {
        IbTFunctional { rule: IbTRule::Constant(set), conv: Vec::new() }
    }

    pub fn window(width: u32, tables: Vec<Vec<bool>>) -> Self {
        assert!(width >= 1 && !tables.is_empty());
        assert!(tables.iter().all(|t| t.len() == 1 << width));
        IbTFunctional { rule: IbTRule::Window { width, tables }, conv: Vec::new() }
    }

    pub fn with_conv(mut self, conv: Vec<u64>) -> Self {
        self.conv = conv;
        self
    }

    pub fn conv_stage(&self, x: u64) -> u64 {
        self.conv.get(x as usize).copied().unwrap_or(0)
    }

    /// Oracle positions read on input `x`.
    pub fn window_of(&self, x: u64) -> std::ops::RangeInclusive<u64> {
        match &self.rule {
            IbTRule::Identity => x..=x,
            #[allow(clippy::reversed_empty_ranges)]
            IbTRule::Constant(_) => 1..=0,
            IbTRule::Window { width, .. } => x.saturating_sub(*width as u64 - 1)..=x,
        }
    }

    /// `Γ^B(x)[s]`.
    pub fn eval(&self, b: &ApproximationTrace, x: u64, s: u64) -> Option<bool> {
        if s < self.conv_stage(x) {
            return None;
        }
        Some(match &self.rule {
            IbTRule::Identity => b.value(x, s),
            IbTRule::Constant(set) => set.contains(&x),
            IbTRule::Window { width, tables } => {
                let table = &tables[(x % tables.len() as u64) as usize];
                let mut idx = 0usize;
                for (bit, y) in (x + 1 - (*width as u64).min(x + 1)..=x).enumerate() {
                    if b.value(y, s) {
                        idx |= 1 << bit;
                    }
                }
                table[idx]
            }
        })
    }

    /// Stages at which the oracle window of `x` changes.
    fn oracle_changes(&self, b: &ApproximationTrace, x: u64) -> Vec<u64> {
        let mut out: Vec<u64> = self.window_of(x).flat_map(|y| b.history(y).iter().map(|&(s, _)| s)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Approximation of `A = Γ^B` along `s(i+1) = μs > s(i) [Γ^B↾s(i)[s]↓]`.
/// For `s(i) ≤ x < s(i+1)` the value at `s(k)` is `Γ^B(x)[s(i+2)]` for
/// `k ≤ i` and `Γ^B(x)[s(k+2)]` afterwards. Computes `Γ^B(x)` for
/// `x < horizon` (plus the finite set of a constant functional).
pub fn ibt_transfer(g: &IbTFunctional, b: &ApproximationTrace) -> Result<LookAhead> {
    const RULE: &str = "Γ^B↾s(i) converged";
    let horizon = b.horizon();
    let mut stages = vec![0u64];
    let mut conv_max = 0u64; // max conv over x < s(i)
    let mut next_x = 0u64;
    loop {
        let si = *stages.last().unwrap();
        while next_x < si {
            conv_max = conv_max.max(g.conv_stage(next_x));
            next_x += 1;
        }
        let s = (si + 1).max(conv_max);
        if s > horizon {
            break;
        }
        stages.push(s);
    }
    let seq = StageSeq::new(stages, RULE).expect("increasing");
    if seq.len() < 3 {
        return Err(TransformError::StageSeqExhausted { rule: RULE, reached: seq.last().unwrap(), needed: 2 });
    }
    let k_top = seq.len() - 3; // s(K+2) is the last stage
    let look = seq.get(k_top + 2);
    if last_change(b) > look {
        return Err(TransformError::StageSeqExhausted { rule: RULE, reached: look, needed: last_change(b) });
    }
    let covered = seq.get(k_top + 1);
    let mut xs: BTreeSet<u64> = (0..horizon).collect();
    if let IbTRule::Constant(set) = &g.rule {
        xs.extend(set.iter().copied());
    }
    let mut events = Vec::new();
    for x in xs {
        if x >= covered {
            emit(&mut events, x, [(0, g.eval(b, x, horizon).unwrap_or(false))]);
            continue;
        }
        let i = seq.index_at(x).unwrap();
        let val = |k: usize| g.eval(b, x, seq.get(k + 2)).expect("converged by s(i+2)");
        let mut points = vec![(0u64, val(i))];
        // Γ(x)[s(k+2)] can only move when the oracle window does.
        let mut ks: Vec<usize> = g
            .oracle_changes(b, x)
            .into_iter()
            .filter_map(|t| seq.index_from(t))
            .filter_map(|j| j.checked_sub(2))
            .filter(|&k| k > i && k <= k_top)
            .collect();
        ks.dedup();
        points.extend(ks.into_iter().map(|k| (seq.get(k), val(k))));
        emit(&mut events, x, points);
    }
    let trace = ApproximationTrace::new(seq.get(k_top), events)?;
    Ok(LookAhead { trace, seq, covered })
}

// --- conjunction --------------------------------------------------------------

/// Drops changes at stages `s < x` so that `A_s(x) = 0` for `s < x`, and
/// sets `A_x(x)` to its original value. Numbers above the horizon vanish.
/// The total cost under any cost function is unchanged.
pub fn normalize_late(a: &ApproximationTrace) -> ApproximationTrace {
    let h = a.horizon();
    let mut events = Vec::new();
    for x in a.touched().filter(|&x| x <= h) {
        let mut points = vec![(x, a.value(x, x))];
        points.extend(a.history(x).iter().copied().filter(|&(s, _)| s > x));
        emit(&mut events, x, points);
    }
    ApproximationTrace::new(h, events).expect("normalized events are distinct")
}

/// An approximation of the common final set of `E` and `F` whose cost is
/// bounded by both ledgers. Both inputs are normalized first. Along
/// `s(i+1) = μs > s(i) [E_s↾s(i) = F_s↾s(i)]`, for `s(i) ≤ x < s(i+1)`
/// the value is 0 before `s(i)`, then the first agreed value
/// `E_{s(j+1)}(x) = F_{s(j+1)}(x)` with `j ≥ i`, then `E_{s(k+1)}(x)`.
pub fn conjoin(e: &ApproximationTrace, f: &ApproximationTrace) -> Result<LookAhead> {
    const RULE: &str = "E_s↾s(i) = F_s↾s(i)";
    let horizon = e.horizon().min(f.horizon());
    let e = normalize_late(&e.extended(horizon));
    let f = normalize_late(&f.extended(horizon));
    if let Some(x) = e.touched().chain(f.touched()).find(|&x| e.value(x, horizon) != f.value(x, horizon)) {
        return Err(TransformError::Mismatch { x });
    }
    let mut disagree: BTreeSet<u64> = BTreeSet::new();
    let mut stages = vec![0u64];
    let (mut ie, mut jf) = (0usize, 0usize);
    let (ev, fv) = (e.events(), f.events());
    for s in 0..=horizon {
        let mut touched = Vec::new();
        while ie < ev.len() && ev[ie].s == s {
            touched.push(ev[ie].x);
            ie += 1;
        }
        while jf < fv.len() && fv[jf].s == s {
            touched.push(fv[jf].x);
            jf += 1;
        }
        for x in touched {
            if e.value(x, s) != f.value(x, s) {
                disagree.insert(x);
            } else {
                disagree.remove(&x);
            }
        }
        let si = *stages.last().unwrap();
        if s > si && disagree.first().is_none_or(|&m| m >= si) {
            stages.push(s);
        }
    }
    let seq = StageSeq::new(stages, RULE).expect("increasing");
    if seq.len() < 2 {
        return Err(TransformError::StageSeqExhausted { rule: RULE, reached: 0, needed: 1 });
    }
    let k_top = seq.len() - 2; // s(K+1) = horizon
    let covered = seq.get(k_top);
    let xs: BTreeSet<u64> = e.touched().chain(f.touched()).collect();
    let mut events = Vec::new();
    for x in xs {
        if x >= covered {
            emit(&mut events, x, [(0, e.value(x, horizon))]);
            continue;
        }
        let i = seq.index_at(x).unwrap();
        let agreed = |j: usize| {
            let t = seq.get(j + 1);
            let v = e.value(x, t);
            (v == f.value(x, t)).then_some(v)
        };
        let (j, v) = match agreed(i) {
            Some(v) => (i, v),
            None => (i + 1, agreed(i + 1).expect("agreement by s(i+2)")),
        };
        let mut points = vec![(seq.get(i), v)];
        let mut ks: Vec<usize> = e
            .history(x)
            .iter()
            .filter_map(|&(t, _)| seq.index_from(t))
            .filter_map(|m| m.checked_sub(1))
            .filter(|&k| k > j && k <= k_top)
            .collect();
        ks.dedup();
        points.extend(ks.into_iter().map(|k| (seq.get(k), e.value(x, seq.get(k + 1)))));
        emit(&mut events, x, points);
    }
    let trace = ApproximationTrace::new(seq.get(k_top), events)?;
    Ok(LookAhead { trace, seq, covered })
}

// --- implication ----------------------------------------------------------------

/// Re-approximates `A` so that its `d`-cost is at most `N` times its
/// `c`-cost. Along `s(i+1) = μs > s(i) ∀x < s(i) [N c(x,s) ≥ d(x,s)]`, for
/// `s(i) ≤ x < s(i+1)` the value at `s(k)` is `A_{s(i+2)}(x)` for `k ≤ i`
/// and `A_{s(k+1)}(x)` afterwards.
pub fn implication_transfer(a: &ApproximationTrace, c: &CostFn, d: &CostFn, n: u64) -> Result<LookAhead> {
    const RULE: &str = "N c(x,s) ≥ d(x,s) for x < s(i)";
    let horizon = a.horizon().min(c.horizon()).min(d.horizon());
    let mut stages = vec![0u64];
    for s in 1..=horizon {
        let si = *stages.last().unwrap();
        let ok = si == 0 || {
            let (cr, dr) = (c.row(s, si - 1), d.row(s, si - 1));
            cr.iter().zip(&dr).all(|(p, q)| &p.mul_int(n) >= q)
        };
        if ok {
            stages.push(s);
        }
    }
    let seq = StageSeq::new(stages, RULE).expect("increasing");
    if seq.len() < 2 {
        return Err(TransformError::StageSeqExhausted { rule: RULE, reached: 0, needed: 1 });
    }
    let k_top = seq.len() - 2;
    let look = seq.get(k_top + 1);
    if last_change(a) > look {
        return Err(TransformError::StageSeqExhausted { rule: RULE, reached: look, needed: last_change(a) });
    }
    let covered = seq.get(k_top);
    let mut events = Vec::new();
    for x in a.touched() {
        if x >= covered {
            emit(&mut events, x, [(0, a.final_value(x))]);
            continue;
        }
        let i = seq.index_at(x).unwrap();
        let mut points = vec![(0u64, a.value(x, seq.get(i + 2)))];
        let mut ks: Vec<usize> = a
            .history(x)
            .iter()
            .filter_map(|&(t, _)| seq.index_from(t))
            .filter_map(|m| m.checked_sub(1))
            .filter(|&k| k > i && k <= k_top)
            .collect();
        ks.dedup();
        points.extend(ks.into_iter().map(|k| (seq.get(k), a.value(x, seq.get(k + 1)))));
        emit(&mut events, x, points);
    }
    let trace = ApproximationTrace::new(seq.get(k_top), events)?;
    Ok(LookAhead { trace, seq, covered })
}

// --- ω-c.e. bound ---------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct OmegaBound {
    /// `A(x)` frozen at its value at `h(x) = max(g(x), x+1)` before that stage.
    pub normalized: ApproximationTrace,
    /// `g(x)`, the least stage with `c(x, g(x)) > 0`.
    pub first_positive: Vec<u64>,
    /// `⌈total / c(x, g(x))⌉`.
    pub bounds: Vec<BigUint>,
}

impl OmegaBound {
    /// Changes of `x` in the normalized trace after stage 0.
    pub fn changes(&self, x: u64) -> usize {
        self.normalized.history(x).iter().filter(|&&(s, _)| s > 0).count()
    }

    /// The `x ≤ X` whose change count exceeds its bound.
    pub fn violations(&self) -> Vec<u64> {
        (0..self.bounds.len() as u64).filter(|&x| BigUint::from(self.changes(x)) > self.bounds[x as usize]).collect()
    }
}

/// Computable change bound for `x ≤ xmax` from a proper monotone `c`.
pub fn omega_ce_bound(a: &ApproximationTrace, c: &CostFn, xmax: u64) -> Result<OmegaBound> {
    let total = cost_of_trace(c, a).total().clone();
    let mut g = Vec::with_capacity(xmax as usize + 1);
    let mut bounds = Vec::with_capacity(xmax as usize + 1);
    for x in 0..=xmax {
        let t = (0..=c.horizon()).find(|&t| !c.eval(x, t).is_zero()).ok_or(TransformError::Unwitnessed { x })?;
        bounds.push(total.ceil_div(&c.eval(x, t)).expect("positive divisor"));
        g.push(t);
    }
    let mut events = Vec::new();
    for x in a.touched() {
        let h = match g.get(x as usize) {
            Some(&t) => t.max(x + 1),
            None => x + 1,
        };
        let mut points = vec![(0, a.value(x, h))];
        points.extend(a.history(x).iter().copied().filter(|&(s, _)| s > h));
        emit(&mut events, x, points);
    }
    let normalized = ApproximationTrace::new(a.horizon(), events)?;
    Ok(OmegaBound { normalized, first_positive: g, bounds })
}

// --- same real ----------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SameReal {
    pub trace: ApproximationTrace,
    pub seq: StageSeq,
    /// `f(x)`, strictly increasing with `α_x ≤ β_{f(x)}`; `None` once `β`
    /// never reaches `α_x` within the horizon.
    pub f: Vec<Option<u64>>,
    /// Members of `A` not coded into `B`.
    pub exceptions: BTreeSet<u64>,
}

fn abs_diff(p: &Rational, q: &Rational) -> Rational {
    if p >= q {
        p.monus(q)
    } else {
        q.monus(p)
    }
}

/// Transfers `A` obeying `c_⟨α⟩` to `B` obeying `c_⟨β⟩` at extra cost at
/// most 2, for two approximations of the same real. Uses stages with
/// `|α_{s_i} − β_{s_i}| ≤ 2^{-i}`. For an enumeration, `x` entering at `s`
/// with `s_i ≤ s < s_{i+1}` puts `f(x)` into `B` at `s_i` when
/// `f(x) ≤ s_i`, and joins the exception set otherwise. For a general
/// approximation, `B(f(x))` copies `A(x)` at the stages `s_i`.
pub fn same_real_transfer(a: &LeftCEReal, b: &LeftCEReal, ta: &ApproximationTrace) -> Result<SameReal> {
    const RULE: &str = "|α_s − β_s| ≤ 2^-i";
    let horizon = ta.horizon().min(a.horizon()).min(b.horizon());
    let mut stages = Vec::new();
    for s in 0..=horizon {
        let i = stages.len() as u32;
        if abs_diff(a.at(s), b.at(s)) <= Rational::pow2_neg(i) {
            stages.push(s);
        }
    }
    let seq = StageSeq::new(stages, RULE).expect("increasing");
    if seq.is_empty() {
        return Err(TransformError::StageSeqExhausted { rule: RULE, reached: 0, needed: 0 });
    }
    let xmax = ta.max_x().unwrap_or(0);
    let mut f = Vec::with_capacity(xmax as usize + 1);
    let mut y = 0u64;
    for x in 0..=xmax {
        let cur = (y..=b.horizon()).find(|&t| b.at(t) >= a.at(x));
        f.push(cur);
        match cur {
            Some(t) => y = t + 1,
            None => {
                f.resize(xmax as usize + 1, None);
                break;
            }
        }
    }
    let mut events = Vec::new();
    if ta.is_enumeration() {
        for x in ta.touched() {
            let s = ta.history(x)[0].0;
            let fx = f[x as usize];
            if let (Some(i), Some(fx)) = (seq.index_at(s), fx) {
                if fx <= seq.get(i) {
                    events.push(Event { s: seq.get(i), x: fx, v: true });
                }
            }
        }
    } else {
        for x in ta.touched() {
            let Some(fx) = f[x as usize] else { continue };
            let points: Vec<(u64, bool)> = match seq.index_from(fx) {
                None => vec![(0, ta.value(x, horizon))],
                Some(i) => std::iter::once((0, ta.value(x, seq.get(i))))
                    .chain(seq.stages()[i + 1..].iter().map(|&t| (t, ta.value(x, t))))
                    .collect(),
            };
            emit(&mut events, fx, points);
        }
    }
    let trace = ApproximationTrace::new(horizon, events)?;
    let fb = trace.final_set();
    let exceptions =
        ta.touched().filter(|&x| ta.value(x, horizon) && f[x as usize].is_none_or(|y| !fb.contains(&y))).collect();
    Ok(SameReal { trace, seq, f, exceptions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::Props;
    use crate::zoo::additive_from_real;
    use proptest::prelude::*;

    fn ev(s: u64, x: u64, v: bool) -> Event {
        Event { s, x, v }
    }

    fn tr(h: u64, evs: &[(u64, u64, bool)]) -> ApproximationTrace {
        ApproximationTrace::new(h, evs.iter().map(|&(s, x, v)| ev(s, x, v)).collect()).unwrap()
    }

    fn pow_cost(h: u64) -> CostFn {
        CostFn::from_fn("2^-x[x<s]", h, Props::monotone().with_proper(true), |x, s| {
            if x < s {
                Rational::pow2_neg(x as u32)
            } else {
                Rational::zero()
            }
        })
    }

    /// `c(x, s) = [x < s] u(s) 2^{-v(x)}` with `u` nondecreasing and `v`
    /// nondecreasing, from small integer steps.
    fn table_cost(h: u64, du: &[u8], dv: &[u8]) -> CostFn {
        let mut u = Vec::new();
        let mut acc = 1u64;
        for s in 0..=h {
            acc += du[s as usize % du.len()] as u64 % 3;
            u.push(acc);
        }
        let mut v = Vec::new();
        let mut acc = 0u32;
        for x in 0..=h {
            acc += dv[x as usize % dv.len()] as u32 % 2;
            v.push(acc.min(60));
        }
        CostFn::from_fn("table", h, Props::monotone(), move |x, s| {
            if x < s && s <= h {
                Rational::from_int(u[s as usize]) * Rational::pow2_neg(v[x as usize] + 4)
            } else {
                Rational::zero()
            }
        })
    }

    fn arb_trace(h: u64, xmax: u64, n: usize) -> impl Strategy<Value = ApproximationTrace> {
        prop::collection::vec((1..=h, 0..=xmax, any::<bool>()), 0..n).prop_map(move |v| {
            let mut seen = BTreeSet::new();
            let evs = v.into_iter().filter(|&(s, x, _)| seen.insert((s, x))).map(|(s, x, b)| ev(s, x, b)).collect();
            ApproximationTrace::new(h, evs).unwrap()
        })
    }

    /// Trace with random flicker before `h/2` that settles on `target`.
    fn settle(h: u64, flick: &[(u64, u64, bool)], target: &BTreeSet<u64>, at: u64) -> ApproximationTrace {
        let mut b = crate::cost::TraceBuilder::new(h);
        let mut evs: Vec<_> = flick.iter().filter(|e| e.0 < at).copied().collect();
        evs.sort();
        for (s, x, v) in evs {
            b.set(s, x, v).unwrap();
        }
        let current: BTreeSet<u64> = b.members().collect();
        for &x in current.union(target) {
            b.set(at, x, target.contains(&x)).unwrap();
        }
        b.finish()
    }

    #[test]
    fn trim_examples() {
        let c = pow_cost(20);
        let a = tr(20, &[(5, 0, true)]);
        let t = trim(&a, &c, &Rational::new(1, 2).unwrap()).unwrap();
        assert_eq!(t.cutoff, 1);
        assert!(t.total.is_zero());
        assert_eq!(t.trace.final_set(), a.final_set());
        let same = trim(&a, &c, &Rational::from_int(2)).unwrap();
        assert_eq!(same.trace, a);
        let empty = ApproximationTrace::empty(20);
        assert_eq!(trim(&empty, &c, &Rational::one()).unwrap().trace, empty);
        assert!(matches!(trim(&a, &c, &Rational::zero()), Err(TransformError::CutoffNotFound { .. })));
    }

    #[test]
    fn decide_examples() {
        let c = pow_cost(30);
        let a = tr(30, &[(4, 2, true)]);
        let total = cost_of_trace(&c, &a).total().clone();
        assert_eq!(total, Rational::new(1, 4).unwrap());
        assert!(decide_from_cost(&c, &a, &total, 2).unwrap());
        assert!(!decide_from_cost(&c, &a, &total, 7).unwrap());
        // Tight: residual 1/4 - 0 at t = 3 is not below c(2,3) = 1/4.
        let tight = tr(30, &[(3, 1, true), (6, 2, true)]);
        let t2 = cost_of_trace(&c, &tight).total().clone();
        assert!(decide_from_cost(&c, &tight, &t2, 2).unwrap());
        assert!(matches!(
            decide_from_cost(&CostFn::zero(5), &a, &Rational::zero(), 1),
            Err(TransformError::NoWitness { x: 1 })
        ));
    }

    #[test]
    fn enumeration_from_flicker() {
        let a = tr(20, &[(2, 3, true), (4, 3, false), (6, 3, true)]);
        let b = EnumerationTrace::from_pairs(20, &[(9, 3)]).unwrap();
        let e = to_enumeration(&a, &b).unwrap();
        assert_eq!(e.change_count(3), 1);
        assert_eq!(e.entry_stage(3), Some(6));
        let same = EnumerationTrace::from_pairs(20, &[(2, 1), (5, 4)]).unwrap();
        assert_eq!(to_enumeration(&same, &same).unwrap(), same);
        let other = EnumerationTrace::from_pairs(20, &[(2, 2)]).unwrap();
        assert!(matches!(to_enumeration(&a, &other), Err(TransformError::Mismatch { .. })));
    }

    /// The look-ahead rule that copies `A_t(x)` from the first agreement
    /// stage `t ≥ s` can enter `x` before `A` changes, and then costs more.
    #[test]
    fn literal_agreement_rule_can_overcharge() {
        let c = pow_cost(20);
        let a = tr(20, &[(10, 0, true), (10, 1, true)]);
        let b = EnumerationTrace::from_pairs(20, &[(2, 0), (5, 1)]).unwrap();
        let literal = |x: u64| {
            (1..=20).find(|&s| (s..=20).find(|&t| a.value(x, t) == b.value(x, t)).is_some_and(|t| a.value(x, t)))
        };
        let lit = EnumerationTrace::from_pairs(20, &[(literal(0).unwrap(), 0), (literal(1).unwrap(), 1)]).unwrap();
        assert!(cost_of_trace(&c, &lit).total() > cost_of_trace(&c, &a).total());
        let ours = to_enumeration(&a, &b).unwrap();
        assert!(cost_of_trace(&c, &ours).total() <= cost_of_trace(&c, &a).total());
    }

    #[test]
    fn change_set_examples() {
        let p = Pairing::cantor();
        assert!(change_set(&ApproximationTrace::empty(5), p).is_degenerate());
        let a = tr(10, &[(2, 4, true), (5, 4, false)]);
        let cs = change_set(&a, p);
        assert!(cs.final_set().contains(&pairing::pair(4, 0)));
        assert!(cs.final_set().contains(&pairing::pair(4, 1)));
        assert!(decode_change_set(&cs, p).is_empty());
    }

    #[test]
    fn join_examples() {
        let a = tr(10, &[(6, 2, true)]);
        let j = join(&a, &ApproximationTrace::empty(10));
        assert_eq!(j.final_set(), BTreeSet::from([4]));
        let b = tr(10, &[(5, 1, true)]);
        let c = pow_cost(10);
        let l = cost_of_trace(&c, &join(&a, &b));
        assert_eq!(l.charges().iter().map(|c| c.x).collect::<Vec<_>>(), vec![3, 4]);
    }

    #[test]
    fn ibt_identity_and_constant() {
        let c = pow_cost(40);
        let b = tr(40, &[(3, 1, true), (6, 1, false), (9, 4, true)]);
        let r = ibt_transfer(&IbTFunctional::identity(), &b).unwrap();
        assert_eq!(r.trace.final_set(), b.final_set());
        assert!(cost_of_trace(&c, &r.trace).total() <= cost_of_trace(&c, &b).total());
        let k = ibt_transfer(&IbTFunctional::constant(BTreeSet::from([2, 7])), &b).unwrap();
        assert_eq!(k.trace.final_set(), BTreeSet::from([2, 7]));
        assert!(cost_of_trace(&c, &k.trace).total().is_zero());
    }

    #[test]
    fn ibt_exhausts_on_late_oracle() {
        let b = tr(10, &[(10, 1, true)]);
        let slow = IbTFunctional::identity().with_conv(vec![11; 10]);
        assert!(matches!(ibt_transfer(&slow, &b), Err(TransformError::StageSeqExhausted { .. })));
    }

    #[test]
    fn normalization_keeps_cost() {
        let c = pow_cost(30);
        let a = tr(30, &[(1, 5, true), (2, 5, false), (3, 5, true), (7, 2, true), (8, 9, true)]);
        let n = normalize_late(&a);
        assert_eq!(cost_of_trace(&c, &n).total(), cost_of_trace(&c, &a).total());
        assert!(!n.value(5, 4));
        assert!(n.value(5, 5));
    }

    #[test]
    fn conjoin_equal_inputs() {
        let c = pow_cost(50);
        let d = pow_cost(50).halved(1);
        let e = tr(50, &[(3, 1, true), (8, 1, false), (12, 1, true), (20, 6, true)]);
        let r = conjoin(&e, &e).unwrap();
        assert_eq!(r.trace.final_set(), e.final_set());
        let lhs = cost_of_trace(&c.plus(&d), &r.trace).total().clone();
        let rhs = Rational::from_int(4) + cost_of_trace(&c, &e).total() + cost_of_trace(&d, &e).total();
        assert!(lhs <= rhs);
        let z = conjoin(&ApproximationTrace::empty(9), &ApproximationTrace::empty(9)).unwrap();
        assert!(z.trace.is_degenerate());
    }

    #[test]
    fn implication_examples() {
        let c = pow_cost(60);
        let a = tr(60, &[(4, 1, true), (9, 1, false), (15, 2, true), (20, 0, true)]);
        let r = implication_transfer(&a, &c, &c, 2).unwrap();
        assert_eq!(r.trace.final_set(), a.final_set());
        assert!(cost_of_trace(&c, &r.trace).total() <= &cost_of_trace(&c, &a).total().mul_int(2));
        let z = implication_transfer(&a, &c, &CostFn::zero(60), 1).unwrap();
        assert!(cost_of_trace(&CostFn::zero(60), &z.trace).total().is_zero());
        let late = tr(60, &[(59, 0, true)]);
        let big = pow_cost(60).scaled(1000);
        assert!(matches!(implication_transfer(&late, &c, &big, 1), Err(TransformError::StageSeqExhausted { .. })));
    }

    #[test]
    fn omega_bound_geometric() {
        let c = CostFn::geometric(40);
        let a = tr(40, &[(1, 0, true)]);
        let ob = omega_ce_bound(&a, &c, 6).unwrap();
        assert_eq!(ob.bounds[3], BigUint::from(8u32));
        assert!(ob.violations().is_empty());
        let none = omega_ce_bound(&ApproximationTrace::empty(40), &c, 5).unwrap();
        assert!(none.bounds.iter().all(|b| *b == BigUint::from(0u32)));
        // x = 3 changes exactly bound(3) = 2 times, each charged 1/8.
        let tight = tr(40, &[(5, 3, true), (7, 3, false)]);
        let t = omega_ce_bound(&tight, &c, 3).unwrap();
        assert_eq!(t.bounds[3], BigUint::from(2u32));
        assert_eq!(t.changes(3), 2);
        assert!(matches!(omega_ce_bound(&a, &CostFn::zero(5), 0), Err(TransformError::Unwitnessed { x: 0 })));
    }

    fn real(seq: Vec<Rational>) -> LeftCEReal {
        LeftCEReal::new(seq, Rational::one()).unwrap()
    }

    #[test]
    fn same_real_identity_and_shift() {
        let h = 30u64;
        let alpha: Vec<Rational> = (0..=h).map(|s| Rational::one().monus(&Rational::pow2_neg(s as u32))).collect();
        let a = real(alpha.clone());
        let ta = EnumerationTrace::from_pairs(h, &[(5, 2), (9, 4), (20, 7)]).unwrap().into_inner();
        let r = same_real_transfer(&a, &a, &ta).unwrap();
        assert!(r.f.iter().enumerate().all(|(x, y)| *y == Some(x as u64)));
        assert_eq!(r.trace.final_set(), ta.final_set());
        assert!(r.exceptions.is_empty());
        let mut shifted = vec![Rational::zero()];
        shifted.extend(alpha[..h as usize].iter().cloned());
        let b = real(shifted);
        let s = same_real_transfer(&a, &b, &ta).unwrap();
        assert_eq!(s.f[0], Some(0));
        assert!(s.f.iter().enumerate().skip(1).all(|(x, y)| *y == Some(x as u64 + 1)));
        let ca = additive_from_real(&a);
        let cb = additive_from_real(&b);
        let lhs = cost_of_trace(&cb, &s.trace).total().clone();
        assert!(lhs <= cost_of_trace(&ca, &ta).total().clone() + Rational::from_int(2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn trim_reaches_eps(a in arb_trace(60, 30, 40), k in 0u32..6) {
            let c = pow_cost(60);
            let eps = Rational::pow2_neg(k);
            let t = trim(&a, &c, &eps).unwrap();
            prop_assert_eq!(t.trace.final_set(), a.final_set());
            prop_assert!(cost_of_trace(&c, &t.trace).total() < &eps);
        }

        #[test]
        fn decide_matches_final(a in arb_trace(60, 20, 30), x in 0u64..20) {
            let c = pow_cost(60);
            let total = cost_of_trace(&c, &a).total().clone();
            prop_assert_eq!(decide_from_cost(&c, &a, &total, x).unwrap(), a.final_value(x));
        }

        #[test]
        fn enumeration_ledger(flick in prop::collection::vec((1u64..40, 0u64..25, any::<bool>()), 0..40),
                              target in prop::collection::btree_set(0u64..25, 0..10),
                              entries in prop::collection::vec(1u64..80, 25),
                              du in prop::collection::vec(any::<u8>(), 1..8),
                              dv in prop::collection::vec(any::<u8>(), 1..8)) {
            let h = 80;
            let a = settle(h, &flick, &target, 40);
            let pairs: Vec<(u64, u64)> = target.iter().map(|&x| (entries[x as usize], x)).collect();
            let b = EnumerationTrace::from_pairs(h, &pairs).unwrap();
            let e = to_enumeration(&a, &b).unwrap();
            prop_assert_eq!(e.final_set(), a.final_set());
            let c = table_cost(h, &du, &dv);
            prop_assert!(cost_of_trace(&c, &e).total() <= cost_of_trace(&c, &a).total());
        }

        #[test]
        fn change_set_and_join_ledgers(a in arb_trace(60, 25, 40), b in arb_trace(60, 25, 40),
                                       du in prop::collection::vec(any::<u8>(), 1..8),
                                       dv in prop::collection::vec(any::<u8>(), 1..8)) {
            let c = table_cost(60, &du, &dv);
            let p = Pairing::cantor();
            let cs = change_set(&a, p);
            prop_assert_eq!(decode_change_set(&cs, p), a.final_set());
            prop_assert!(cost_of_trace(&c, &cs).total() <= cost_of_trace(&c, &a).total());
            let j = join(&a, &b);
            let lhs = cost_of_trace(&c, &j).total().clone();
            prop_assert!(lhs <= cost_of_trace(&c, &a).total().clone() + cost_of_trace(&c, &b).total().clone());
        }

        #[test]
        fn ibt_ledger(flick in prop::collection::vec((1u64..60, 0u64..40, any::<bool>()), 0..50),
                      target in prop::collection::btree_set(0u64..40, 0..12),
                      width in 1u32..4,
                      bits in prop::collection::vec(any::<bool>(), 8),
                      conv in prop::collection::vec(0u64..20, 0..40),
                      du in prop::collection::vec(any::<u8>(), 1..8),
                      dv in prop::collection::vec(any::<u8>(), 1..8)) {
            let h = 150;
            let b = settle(h, &flick, &target, 60);
            let size = 1usize << width;
            let tables = vec![(0..size).map(|i| bits[i % 8] ^ (i % 3 == 0)).collect::<Vec<_>>()];
            let g = IbTFunctional::window(width, tables).with_conv(conv.iter().enumerate().map(|(x, d)| x as u64 + d).collect());
            let r = ibt_transfer(&g, &b).unwrap();
            let want: BTreeSet<u64> = (0..h).filter(|&x| g.eval(&b, x, h) == Some(true)).collect();
            prop_assert_eq!(r.trace.final_set(), want);
            let c = table_cost(h, &du, &dv);
            prop_assert!(cost_of_trace(&c, &r.trace).total() <= cost_of_trace(&c, &b).total());
        }

        #[test]
        fn conjoin_bound(fe in prop::collection::vec((1u64..60, 0u64..40, any::<bool>()), 0..50),
                         ff in prop::collection::vec((1u64..60, 0u64..40, any::<bool>()), 0..50),
                         target in prop::collection::btree_set(0u64..40, 0..12),
                         du in prop::collection::vec(any::<u8>(), 1..8),
                         dv in prop::collection::vec(any::<u8>(), 1..8)) {
            let h = 120;
            let e = settle(h, &fe, &target, 60);
            let f = settle(h, &ff, &target, 70);
            let r = conjoin(&e, &f).unwrap();
            prop_assert_eq!(r.trace.final_set(), e.final_set());
            let c = table_cost(h, &du, &dv);
            let d = pow_cost(h);
            let lhs = cost_of_trace(&c.plus(&d), &r.trace).total().clone();
            let rhs = Rational::from_int(4) + cost_of_trace(&c, &e).total() + cost_of_trace(&d, &f).total();
            prop_assert!(lhs <= rhs);
        }

        #[test]
        fn implication_ledger(flick in prop::collection::vec((1u64..50, 0u64..40, any::<bool>()), 0..50),
                              target in prop::collection::btree_set(0u64..40, 0..12),
                              n in 1u64..4,
                              du in prop::collection::vec(any::<u8>(), 1..8),
                              dv in prop::collection::vec(any::<u8>(), 1..8)) {
            let h = 120;
            let a = settle(h, &flick, &target, 50);
            let c = table_cost(h, &du, &dv);
            let d = c.scaled(n);
            let r = implication_transfer(&a, &c, &d, n).unwrap();
            prop_assert_eq!(r.trace.final_set(), a.final_set());
            let lhs = cost_of_trace(&d, &r.trace).total().clone();
            prop_assert!(lhs <= cost_of_trace(&c, &a).total().mul_int(n));
        }

        #[test]
        fn omega_bound_respected(a in arb_trace(50, 20, 40)) {
            let c = CostFn::geometric(50);
            let ob = omega_ce_bound(&a, &c, 20).unwrap();
            prop_assert!(ob.violations().is_empty());
            prop_assert_eq!(ob.normalized.final_set(), a.final_set());
        }

        #[test]
        fn same_real_ledger(steps in prop::collection::vec(0u64..4, 60),
                            lag in prop::collection::vec(0u64..3, 60),
                            entries in prop::collection::vec((1u64..60, 0u64..30), 0..20),
                            flick in prop::collection::vec((1u64..50, 0u64..30, any::<bool>()), 0..30)) {
            let h = 59u64;
            let mut acc = 0u64;
            let alpha: Vec<Rational> = steps.iter().map(|d| { acc += d; Rational::new(acc, 4 * 60 * 4).unwrap() }).collect();
            // β trails α by a few stages and meets it at the end.
            let mut idx = 0usize;
            let beta: Vec<Rational> = (0..=h as usize)
                .map(|s| {
                    idx = idx.max(if s == h as usize { s } else { s.saturating_sub(lag[s] as usize) });
                    alpha[idx].clone()
                })
                .collect();
            let a = real(alpha);
            let b = real(beta);
            let ca = additive_from_real(&a);
            let cb = additive_from_real(&b);
            let ta = EnumerationTrace::from_pairs(h, &entries).unwrap().into_inner();
            let r = same_real_transfer(&a, &b, &ta).unwrap();
            let coded: BTreeSet<u64> = ta.final_set().difference(&r.exceptions).map(|&x| r.f[x as usize].unwrap()).collect();
            prop_assert_eq!(r.trace.final_set(), coded);
            let bound = cost_of_trace(&ca, &ta).total().clone() + Rational::from_int(2);
            prop_assert!(cost_of_trace(&cb, &r.trace).total() <= &bound);
            let dt = settle(h, &flick, &BTreeSet::from([1, 3]), 45);
            let r2 = same_real_transfer(&a, &b, &dt).unwrap();
            let bound2 = cost_of_trace(&ca, &dt).total().clone() + Rational::from_int(2);
            prop_assert!(cost_of_trace(&cb, &r2.trace).total() <= &bound2);
        }
    }
}
