//! Cost functionals relative to an oracle, hat computations over a c.e.
//! oracle, and the dual construction of `D` with `∅' ⊨^D c^D`.

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::cost::{CostFn, EnumerationTrace, TraceError};
use crate::rational::Rational;

/// A converged run of a functional.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Computation {
    pub value: Rational,
    pub steps: u64,
}

type Body = dyn Fn(&dyn Fn(u64) -> bool, u64, u64) -> Option<Computation> + Send + Sync;

/// `c^Z(x, t)` for a membership oracle `Z`.
#[derive(Clone)]
pub struct CostFunctional {
    name: String,
    body: Arc<Body>,
    monotone_main: bool,
    monotone_stage: bool,
    support: Option<u64>,
}

impl std::fmt::Debug for CostFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CostFunctional").field("name", &self.name).field("support", &self.support).finish()
    }
}

/// Result of `c^Z(x, t)[steps]` with the use actually queried.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Eval {
    pub value: Option<Rational>,
    pub use_: u64,
}

impl CostFunctional {
    pub fn from_fn<F>(name: &str, monotone_main: bool, monotone_stage: bool, f: F) -> Self
    where
        F: Fn(&dyn Fn(u64) -> bool, u64, u64) -> Option<Computation> + Send + Sync + 'static,
    {
        CostFunctional { name: name.to_string(), body: Arc::new(f), monotone_main, monotone_stage, support: None }
    }

    /// Declares `c^Z(x, t) = 0` for `x ≥ bound` and every oracle.
    pub fn with_support(mut self, bound: u64) -> Self {
        self.support = Some(bound);
        self
    }

    /// An oracle-free cost function, converging in zero steps.
    pub fn computable(c: CostFn) -> Self {
        let p = c.props();
        let name = c.name().to_string();
        CostFunctional::from_fn(&name, p.monotone_main, p.monotone_stage, move |_, x, t| {
            Some(Computation { value: c.eval(x, t), steps: 0 })
        })
    }

    /// `c^Z(x, t) = 2^{-x} - 2^{-m}` for `x < m`, else 0, where
    /// `m = min(t, width - k)` and `k = |Z ∩ [0, span·(x+1))|`; the run takes
    /// `t + delay·k` steps. Monotone in both arguments for every oracle, and
    /// its totalization satisfies `Σ_{y ≥ v} c̃(y, s) ≤ 2 c̃(v, s)`.
    pub fn delayed_geometric(width: u32, span: u64, delay: u64) -> Self {
        let name = format!("delayed_geometric({width},{span},{delay})");
        CostFunctional::from_fn(&name, true, true, move |z, x, t| {
            let k = (0..span * (x + 1)).filter(|&q| z(q)).count() as u64;
            let m = t.min(u64::from(width).saturating_sub(k));
            let value = if x < m {
                Rational::pow2_neg(x as u32).monus(&Rational::pow2_neg(m as u32))
            } else {
                Rational::zero()
            };
            Some(Computation { value, steps: t + delay * k })
        })
        .with_support(u64::from(width))
    }

    /// Never converges.
    pub fn silent() -> Self {
        CostFunctional::from_fn("silent", true, true, |_, _, _| None)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn monotone_main(&self) -> bool {
        self.monotone_main
    }

    pub fn monotone_stage(&self) -> bool {
        self.monotone_stage
    }

    pub fn support(&self) -> Option<u64> {
        self.support
    }

    /// `c^Z(x, t)[steps]`. The use is one more than the largest query.
    pub fn eval(&self, z: &dyn Fn(u64) -> bool, x: u64, t: u64, steps: u64) -> Eval {
        let used = Cell::new(0u64);
        let probe = |q: u64| {
            used.set(used.get().max(q + 1));
            z(q)
        };
        let out = (self.body)(&probe, x, t);
        let value = out.filter(|c| c.steps <= steps).map(|c| c.value);
        Eval { value, use_: used.get() }
    }
}

/// `c̃^Z(x, s) = c^Z(x, t)` for the largest `t ≤ s` with `c^Z(x, t)[s]↓`,
/// and 0 when there is none.
pub fn totalize(c: &CostFunctional) -> CostFunctional {
    let inner = c.clone();
    let name = format!("total({})", c.name);
    let mut out = CostFunctional::from_fn(&name, c.monotone_main, c.monotone_stage, move |z, x, s| {
        let value = (0..=s)
            .rev()
            .find_map(|t| (inner.body)(z, x, t).filter(|r| r.steps <= s).map(|r| r.value))
            .unwrap_or_else(Rational::zero);
        Some(Computation { value, steps: 0 })
    });
    out.support = c.support;
    out
}

/// Stages `s` at which some `x` enters `D` with `D_s↾x = D↾x` at the horizon.
pub fn nondeficiency_stages(d: &EnumerationTrace) -> Vec<u64> {
    let mut least: BTreeMap<u64, u64> = BTreeMap::new();
    for ev in d.events() {
        let e = least.entry(ev.s).or_insert(ev.x);
        *e = (*e).min(ev.x);
    }
    let mut later = u64::MAX;
    let mut out = Vec::new();
    for (&s, &x) in least.iter().rev() {
        if x < later {
            out.push(s);
        }
        later = later.min(x);
    }
    out.reverse();
    out
}

/// `sup_{s ∈ N_D} c̃^{D_s}(x, s)`, keeping only hat computations: the use is
/// at most the least number entering `D` at `s`.
pub fn hat_sup(c: &CostFunctional, d: &EnumerationTrace, x: u64) -> Rational {
    let ct = totalize(c);
    let mut best = Rational::zero();
    for s in nondeficiency_stages(d) {
        let least = d.events_at(s).iter().map(|ev| ev.x).min().unwrap_or(0);
        let oracle = |q: u64| d.value(q, s);
        let r = ct.eval(&oracle, x, s, 0);
        if r.use_ <= least {
            if let Some(v) = r.value {
                best = Rational::max_of(best, v);
            }
        }
    }
    best
}

/// A scripted `Φ_e`, read relative to the run's own history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockPhi {
    /// Diverges everywhere.
    Silent,
    /// `Φ^Z(y) = 0` with use 0.
    Zero,
    /// `Φ^Z(y) = F_{t-1}(y)` with use `q = base_use + y`, where `t` is the
    /// least stage with `D_t↾q = Z↾q`.
    Mirror { base_use: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Removal {
    /// `u - 1` was enumerated into `D`.
    Marker,
    /// `D↾r` changed below the use of the computation behind the wish.
    Injury,
}

/// `⟨x, α⟩^u`, depending on `D↾r` and on the marker `u - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wish {
    pub x: u64,
    pub alpha: Rational,
    pub u: u64,
    pub r: u64,
    pub born: u64,
    pub removed: Option<(u64, Removal)>,
    pub holder: Option<usize>,
}

impl Wish {
    fn alive_at(&self, s: u64) -> bool {
        self.born <= s && self.removed.is_none_or(|(t, _)| t > s)
    }
}

/// One run `N_e(v)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Activation {
    pub e: usize,
    pub v: u64,
    pub x: u64,
    pub stage: u64,
    pub took_over: usize,
    /// `(stage, n)`: cancelled when `n < v` entered `∅'`.
    pub cancelled: Option<(u64, u64)>,
}

#[derive(Debug, Clone)]
pub struct DualState {
    pub d: EnumerationTrace,
    pub f: EnumerationTrace,
    pub wishes: Vec<Wish>,
    pub activations: Vec<Activation>,
    /// Active run per requirement at the horizon.
    pub active: Vec<Option<usize>>,
    /// Largest held total per requirement over all stage ends.
    pub ledgers: Vec<Rational>,
    /// `(stage, e, total)` whenever a held total changed.
    pub held_log: Vec<(u64, usize, Rational)>,
    /// Real stage of each construction step; index 0 is stage 0.
    pub stages: Vec<u64>,
    /// `(real stage, n)` for each number entering `∅'` after stage 0.
    pub arrivals: Vec<(u64, u64)>,
    pub phis: Vec<MockPhi>,
    pub horizon: u64,
    by_x: BTreeMap<u64, Vec<usize>>,
    /// `(element, stage)` of `D` sorted by element, with prefix maxima of stages.
    d_sorted: Vec<(u64, u64)>,
    d_prefix: Vec<u64>,
}

/// Outcome per requirement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagonalization {
    pub e: usize,
    pub activations: usize,
    /// An `x ∈ F` with `Φ_e^D(x) = 0` at the horizon.
    pub witness: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct DualReport {
    pub held_bounds_ok: bool,
    pub gamma_decreases: usize,
    pub gamma_cost: Rational,
    pub cancellations_justified: bool,
    pub settle_failures: Vec<u64>,
    pub diagonalization: Vec<Diagonalization>,
}

impl DualReport {
    pub fn gamma_cost_ok(&self) -> bool {
        self.gamma_cost <= Rational::new(3, 2).expect("nonzero")
    }

    /// Every requirement that reached an activation has a witness.
    pub fn diagonalized(&self) -> bool {
        self.diagonalization.iter().all(|d| d.activations == 0 || d.witness.is_some())
    }

    pub fn passed(&self) -> bool {
        self.held_bounds_ok
            && self.gamma_decreases == 0
            && self.gamma_cost_ok()
            && self.cancellations_justified
            && self.settle_failures.is_empty()
            && self.diagonalized()
    }
}

fn checked_pair(x: u64, y: u64) -> Option<u64> {
    let t = x.checked_add(y)?;
    t.checked_mul(t.checked_add(1)?).map(|p| p / 2)?.checked_add(y)
}

struct Run<'a> {
    c: CostFunctional,
    phis: &'a [MockPhi],
    wishes: Vec<Wish>,
    live: BTreeMap<u64, Vec<usize>>,
    by_x: BTreeMap<u64, Vec<usize>>,
    d: BTreeMap<u64, u64>,
    d_pairs: Vec<(u64, u64)>,
    f: BTreeMap<u64, u64>,
    hw: u64,
    max_r: u64,
    held: Vec<BTreeMap<u64, Vec<usize>>>,
    activations: Vec<Activation>,
    active: Vec<Option<usize>>,
}

impl Run<'_> {
    fn d_has(&self, q: u64) -> bool {
        self.d.contains_key(&q)
    }

    /// Least stage `t` with `D_t↾q` equal to the current `D↾q`.
    fn settled(&self, q: u64) -> u64 {
        self.d.range(..q).map(|(_, &s)| s).max().unwrap_or(0)
    }

    /// `Φ_e^{D}↾(x+1) = F↾(x+1)` against the current `D` and `F`.
    fn agrees(&mut self, e: usize, x: u64) -> bool {
        match &self.phis[e] {
            MockPhi::Silent => false,
            MockPhi::Zero => self.f.range(..=x).next().is_none(),
            MockPhi::Mirror { base_use } => {
                self.hw = self.hw.max(base_use + x);
                let ys: Vec<(u64, u64)> = self.f.range(..=x).map(|(&y, &s)| (y, s)).collect();
                ys.into_iter().all(|(y, entered)| entered < self.settled(base_use + y))
            }
        }
    }

    fn release(&mut self, id: usize) {
        if let Some(e) = self.wishes[id].holder.take() {
            let x = self.wishes[id].x;
            if let Some(list) = self.held[e].get_mut(&x) {
                list.retain(|&w| w != id);
                if list.is_empty() {
                    self.held[e].remove(&x);
                }
            }
        }
    }

    fn remove(&mut self, id: usize, s: u64, why: Removal) {
        self.release(id);
        let w = &mut self.wishes[id];
        w.removed = Some((s, why));
        if let Some(list) = self.live.get_mut(&w.x) {
            list.retain(|&v| v != id);
        }
    }

    fn held_total(&self, e: usize) -> Rational {
        self.held[e]
            .values()
            .map(|ids| ids.iter().map(|&i| self.wishes[i].alpha.clone()).max().unwrap_or_else(Rational::zero))
            .sum()
    }
}

/// Runs the dual construction for the construction steps of `zp`. Step `i`
/// happens at real stage `s_i`, the first stage above every number
/// mentioned so far; `∅'` receives step `i`'s arrivals at `s_i`.
pub fn dual_construct(c: &CostFunctional, zp: &EnumerationTrace, phis: &[MockPhi]) -> Result<DualState, TraceError> {
    let ct = totalize(c);
    let n_req = phis.len();
    let mut run = Run {
        c: ct,
        phis,
        wishes: Vec::new(),
        live: BTreeMap::new(),
        by_x: BTreeMap::new(),
        d: BTreeMap::new(),
        d_pairs: Vec::new(),
        f: BTreeMap::new(),
        hw: 0,
        max_r: 0,
        held: vec![BTreeMap::new(); n_req],
        activations: Vec::new(),
        active: vec![None; n_req],
    };
    let mut zp_now: BTreeSet<u64> = zp.events_at(0).iter().map(|ev| ev.x).collect();
    let mut stages = vec![0u64];
    let mut arrivals = Vec::new();
    let mut ledgers = vec![Rational::zero(); n_req];
    let mut held_log = Vec::new();
    let mut s = 0u64;
    for step in 1..=zp.horizon() {
        s = (s + 1).max(run.hw + 1);
        stages.push(s);
        let new: Vec<u64> = zp.events_at(step).iter().map(|ev| ev.x).collect();
        for &n in &new {
            zp_now.insert(n);
            arrivals.push((s, n));
        }
        // Without an arrival the stage behaves as if `s` itself arrived.
        let n = new.iter().copied().min().unwrap_or(s);
        let mut dirty = vec![false; n_req];

        // 1. Cancel runs with v > n.
        for (e, flag) in dirty.iter_mut().enumerate() {
            if let Some(a) = run.active[e] {
                if run.activations[a].v > n {
                    run.activations[a].cancelled = Some((s, n));
                    run.active[e] = None;
                    let ids: Vec<usize> = run.held[e].values().flatten().copied().collect();
                    for id in ids {
                        run.release(id);
                    }
                    *flag = true;
                }
            }
        }

        // 2. Remove unheld wishes about x ≥ n by enumerating their markers.
        let stale: Vec<usize> = run
            .live
            .range(n..)
            .flat_map(|(_, ids)| ids.iter().copied())
            .filter(|&id| run.wishes[id].holder.is_none() && run.wishes[id].born < s)
            .collect();
        let mut entered = Vec::new();
        for id in stale {
            let marker = run.wishes[id].u - 1;
            run.remove(id, s, Removal::Marker);
            run.d.insert(marker, s);
            run.d_pairs.push((s, marker));
            entered.push(marker);
        }
        if let Some(&least) = entered.iter().min() {
            let injured: Vec<usize> = if least < run.max_r {
                run.live
                    .values()
                    .flatten()
                    .copied()
                    .filter(|&id| run.wishes[id].r > least && run.wishes[id].born < s)
                    .collect()
            } else {
                Vec::new()
            };
            for id in injured {
                if let Some(e) = run.wishes[id].holder {
                    dirty[e] = true;
                }
                run.remove(id, s, Removal::Injury);
            }
        }

        // 3. Add a wish about each x < s within the support.
        let bound = run.c.support().map_or(s, |b| b.min(s));
        let mut costs = Vec::with_capacity(bound as usize);
        for x in 0..bound {
            let r = {
                let oracle = |q: u64| run.d_has(q);
                run.c.eval(&oracle, x, s, 0)
            };
            let alpha = r.value.unwrap_or_else(Rational::zero);
            run.hw = run.hw.max(r.use_).max(x);
            run.max_r = run.max_r.max(r.use_);
            let u = run.hw + 2;
            run.hw = u;
            let id = run.wishes.len();
            run.wishes.push(Wish { x, alpha: alpha.clone(), u, r: r.use_, born: s, removed: None, holder: None });
            run.live.entry(x).or_default().push(id);
            run.by_x.entry(x).or_default().push(id);
            costs.push(alpha);
        }

        // 4. Activate requirements.
        for e in 0..n_req.min(s as usize) {
            if run.active[e].is_some() {
                continue;
            }
            let lo =
                (0..e).filter_map(|i| run.active[i].map(|a| run.activations[a].v + 1)).max().unwrap_or(0).max(e as u64);
            let threshold = Rational::pow3_neg(e as u32) * Rational::new(1, 2).expect("nonzero");
            let mut v = lo;
            let mut chosen = None;
            while v <= n {
                let cost = match costs.get(v as usize) {
                    Some(a) => a.clone(),
                    None if run.c.support().is_some_and(|b| v >= b) => Rational::zero(),
                    None => {
                        let oracle = |q: u64| run.d_has(q);
                        run.c.eval(&oracle, v, s, 0).value.unwrap_or_else(Rational::zero)
                    }
                };
                if cost <= threshold {
                    let m = zp_now.range(..v).count() as u64;
                    let Some(x) = checked_pair(e as u64, v).and_then(|p| checked_pair(p, m)) else { break };
                    if run.agrees(e, x) {
                        chosen = Some((v, x));
                        break;
                    }
                    // Agreement below x + 1 fails for every larger x too.
                    if run.c.monotone_main() {
                        break;
                    }
                }
                v += 1;
            }
            let Some((v, x)) = chosen else { continue };
            run.hw = run.hw.max(x).max(v);
            run.f.insert(x, s);
            let take: Vec<usize> = run
                .live
                .range(v..)
                .flat_map(|(_, ids)| ids.iter().copied())
                .filter(|&id| run.wishes[id].holder.is_none_or(|h| h > e))
                .collect();
            for &id in &take {
                if let Some(h) = run.wishes[id].holder {
                    dirty[h] = true;
                }
                run.release(id);
                run.wishes[id].holder = Some(e);
                let wx = run.wishes[id].x;
                run.held[e].entry(wx).or_default().push(id);
            }
            run.activations.push(Activation { e, v, x, stage: s, took_over: take.len(), cancelled: None });
            run.active[e] = Some(run.activations.len() - 1);
            dirty[e] = true;
        }
        for e in (0..n_req).filter(|&e| dirty[e]) {
            let total = run.held_total(e);
            if total > ledgers[e] {
                ledgers[e] = total.clone();
            }
            held_log.push((s, e, total));
        }
        run.hw = run.hw.max(s);
    }
    let horizon = s;
    let d = EnumerationTrace::from_pairs(horizon, &run.d_pairs)?;
    let f_pairs: Vec<(u64, u64)> = run.f.iter().map(|(&x, &s)| (s, x)).collect();
    let f = EnumerationTrace::from_pairs(horizon, &f_pairs)?;
    let mut d_sorted: Vec<(u64, u64)> = run.d.iter().map(|(&x, &s)| (x, s)).collect();
    d_sorted.sort_unstable();
    let mut d_prefix = Vec::with_capacity(d_sorted.len());
    let mut m = 0;
    for &(_, st) in &d_sorted {
        m = m.max(st);
        d_prefix.push(m);
    }
    Ok(DualState {
        d,
        f,
        wishes: run.wishes,
        activations: run.activations,
        active: run.active,
        ledgers,
        held_log,
        stages,
        arrivals,
        phis: phis.to_vec(),
        horizon,
        by_x: run.by_x,
        d_sorted,
        d_prefix,
    })
}

impl DualState {
    /// Least stage at which `D↾t` has its final value.
    pub fn settled(&self, t: u64) -> u64 {
        let k = self.d_sorted.partition_point(|&(x, _)| x < t);
        if k == 0 {
            0
        } else {
            self.d_prefix[k - 1]
        }
    }

    /// The stage `Γ^D(x, t)` reads: least `s ≥ t` with `D_s↾t` final.
    pub fn reading_stage(&self, t: u64) -> u64 {
        t.max(self.settled(t))
    }

    /// Least `t` with `reading_stage(t) ≥ s`.
    fn first_t_reading(&self, s: u64) -> u64 {
        let k = self.d_prefix.partition_point(|&m| m < s);
        self.d_sorted.get(k).map_or(s, |&(x, _)| (x + 1).min(s))
    }

    pub fn wishes_about(&self, x: u64) -> impl Iterator<Item = &Wish> + '_ {
        self.by_x.get(&x).into_iter().flatten().map(|&i| &self.wishes[i])
    }

    /// `Γ^D(x, t)` with `D` as at the horizon.
    pub fn gamma_eval(&self, x: u64, t: u64) -> Rational {
        let s = self.reading_stage(t);
        self.wishes_about(x)
            .filter(|w| w.u <= t && w.alive_at(s))
            .map(|w| w.alpha.clone())
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// `t ↦ Γ^D(x, t)` as `(t, value)` at each `t` where it may change; the
    /// value holds until the next breakpoint.
    pub fn gamma_curve(&self, x: u64) -> Vec<(u64, Rational)> {
        // Each wish counts on the interval [a, b) of t.
        let mut spans: Vec<(u64, Option<u64>, usize)> = Vec::new();
        for &i in self.by_x.get(&x).into_iter().flatten() {
            let w = &self.wishes[i];
            let a = self.first_t_reading(w.born).max(w.u);
            let b = w.removed.map(|(r, _)| self.first_t_reading(r));
            if b.is_none_or(|b| a < b) {
                spans.push((a, b, i));
            }
        }
        let mut points: Vec<u64> = spans.iter().flat_map(|&(a, b, _)| std::iter::once(a).chain(b)).collect();
        points.push(0);
        points.sort_unstable();
        points.dedup();
        spans.sort_unstable_by_key(|&(a, _, _)| a);
        let mut heap: BinaryHeap<(Rational, u64)> = BinaryHeap::new();
        let mut next = 0;
        let mut out = Vec::with_capacity(points.len());
        for t in points {
            while next < spans.len() && spans[next].0 <= t {
                let (_, b, i) = spans[next];
                heap.push((self.wishes[i].alpha.clone(), b.unwrap_or(u64::MAX)));
                next += 1;
            }
            while heap.peek().is_some_and(|&(_, b)| b <= t) {
                heap.pop();
            }
            out.push((t, heap.peek().map_or_else(Rational::zero, |(a, _)| a.clone())));
        }
        out
    }

    /// `Φ_e^D(x)` at the horizon, when it converges.
    pub fn phi_at_horizon(&self, e: usize, x: u64) -> Option<bool> {
        match &self.phis[e] {
            MockPhi::Silent => None,
            MockPhi::Zero => Some(false),
            MockPhi::Mirror { base_use } => {
                let t = self.settled(base_use + x);
                Some(self.f.entry_stage(x).is_some_and(|s| s < t))
            }
        }
    }

    pub fn report(&self) -> DualReport {
        let held_bounds_ok = self.ledgers.iter().enumerate().all(|(e, l)| *l <= Rational::pow3_neg(e as u32));
        let mut gamma_decreases = 0;
        for &x in self.by_x.keys() {
            let curve = self.gamma_curve(x);
            gamma_decreases += curve.windows(2).filter(|p| p[1].1 < p[0].1).count();
        }
        // Charge the least number arriving at each stage.
        let mut least: BTreeMap<u64, u64> = BTreeMap::new();
        for &(s, n) in &self.arrivals {
            let e = least.entry(s).or_insert(n);
            *e = (*e).min(n);
        }
        let gamma_cost: Rational = least.iter().filter(|&(&s, &n)| n < s).map(|(&s, &n)| self.gamma_eval(n, s)).sum();
        let cancellations_justified = self
            .activations
            .iter()
            .all(|a| a.cancelled.is_none_or(|(s, n)| n < a.v && self.arrivals.contains(&(s, n))));
        let settle_failures = self.settle_failures();
        let diagonalization = (0..self.phis.len())
            .map(|e| {
                let acts: Vec<&Activation> = self.activations.iter().filter(|a| a.e == e).collect();
                let witness = acts.iter().map(|a| a.x).find(|&x| self.phi_at_horizon(e, x) == Some(false));
                Diagonalization { e, activations: acts.len(), witness }
            })
            .collect();
        DualReport {
            held_bounds_ok,
            gamma_decreases,
            gamma_cost,
            cancellations_justified,
            settle_failures,
            diagonalization,
        }
    }

    /// Numbers `x` for which a hat computation `c̃^{D_s}(x, s)` at a
    /// nondeficiency stage after `∅'↾(x+1)` settled exceeds `Γ^D(x)`.
    fn settle_failures(&self) -> Vec<u64> {
        let nd: BTreeSet<u64> = nondeficiency_stages(&self.d).into_iter().collect();
        let t_max = self.wishes.iter().map(|w| w.u).max().unwrap_or(0) + 1;
        let t_max = t_max.max(self.d_sorted.last().map_or(0, |&(x, _)| x + 1));
        let mut out = Vec::new();
        for (&x, ids) in &self.by_x {
            let settle = self.arrivals.iter().filter(|&&(_, n)| n <= x).map(|&(s, _)| s).max().unwrap_or(0);
            let top = self.gamma_eval(x, t_max);
            let bad = ids.iter().map(|&i| &self.wishes[i]).any(|w| {
                w.born > settle && nd.contains(&w.born) && {
                    let least = self.d.events_at(w.born).iter().map(|ev| ev.x).min().unwrap_or(0);
                    w.r <= least && w.alpha > top
                }
            });
            if bad {
                out.push(x);
            }
        }
        out
    }

    /// `born,x,alpha_num,alpha_den,u,removed,holder`.
    pub fn wish_csv(&self) -> String {
        let mut out = String::from("born,x,alpha_num,alpha_den,u,removed,holder\n");
        for w in &self.wishes {
            let (num, den) = w.alpha.parts();
            let removed = w.removed.map(|(s, _)| s.to_string()).unwrap_or_default();
            let holder = w.holder.map(|h| h.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{},{},{}", w.born, w.x, num, den, w.u, removed, holder);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zp_of(horizon: u64, seq: &[u64]) -> EnumerationTrace {
        let pairs: Vec<(u64, u64)> = seq.iter().enumerate().map(|(i, &n)| (i as u64 + 1, n)).collect();
        EnumerationTrace::from_pairs(horizon, &pairs).unwrap()
    }

    #[test]
    fn totalization_replays_step_counts() {
        let c = CostFunctional::computable(CostFn::geometric(50));
        let ct = totalize(&c);
        let none = |_: u64| false;
        assert_eq!(ct.eval(&none, 3, 20, 0).value, c.eval(&none, 3, 20, 0).value);
        let silent = totalize(&CostFunctional::silent());
        assert_eq!(silent.eval(&none, 2, 10, 0).value, Some(Rational::zero()));
        let late = CostFunctional::from_fn("late", true, true, |_, _, t| {
            Some(Computation { value: Rational::pow2_neg(2), steps: t.max(5) })
        });
        let lt = totalize(&late);
        assert!(lt.eval(&none, 0, 4, 0).value.unwrap().is_zero());
        assert_eq!(lt.eval(&none, 0, 5, 0).value, Some(Rational::pow2_neg(2)));
    }

    #[test]
    fn use_is_recorded() {
        let c = CostFunctional::delayed_geometric(16, 2, 1);
        let z = |q: u64| q == 3;
        let r = c.eval(&z, 2, 10, 100);
        assert_eq!(r.use_, 6);
        assert!(c.eval(&z, 2, 10, 5).value.is_none());
    }

    #[test]
    fn nondeficiency_excludes_out_of_order() {
        let d = EnumerationTrace::from_pairs(10, &[(1, 1), (2, 2), (3, 3)]).unwrap();
        assert_eq!(nondeficiency_stages(&d), vec![1, 2, 3]);
        let d = EnumerationTrace::from_pairs(10, &[(1, 5), (2, 1), (3, 7)]).unwrap();
        assert_eq!(nondeficiency_stages(&d), vec![2, 3]);
        assert!(nondeficiency_stages(&EnumerationTrace::empty(5)).is_empty());
    }

    #[test]
    fn hat_sup_drops_injured_values() {
        let plain = CostFunctional::computable(CostFn::geometric(20));
        let d = EnumerationTrace::from_pairs(20, &[(4, 0), (9, 1)]).unwrap();
        assert_eq!(hat_sup(&plain, &d, 2), CostFn::geometric(20).eval(2, 9));
        // Value 1/2 while 5 ∉ Z, reading Z(5).
        let sensitive = CostFunctional::from_fn("bit5", true, true, |z, _, _| {
            let v = if z(5) { Rational::pow2_neg(3) } else { Rational::pow2_neg(1) };
            Some(Computation { value: v, steps: 0 })
        });
        let d = EnumerationTrace::from_pairs(20, &[(3, 9), (6, 5), (8, 12)]).unwrap();
        // Stage 3 is deficient. At stage 6 the use 6 exceeds the entering 5;
        // only stage 8 carries a hat computation, after 5 entered.
        assert_eq!(hat_sup(&sensitive, &d, 0), Rational::pow2_neg(3));
        assert!(hat_sup(&plain, &EnumerationTrace::empty(20), 1).is_zero());
    }

    #[test]
    fn empty_oracle_run_removes_nothing() {
        let c = CostFunctional::delayed_geometric(12, 1, 1);
        let run = dual_construct(&c, &EnumerationTrace::empty(30), &[MockPhi::Zero, MockPhi::Silent]).unwrap();
        assert!(run.d.final_set().is_empty());
        assert!(run.wishes.iter().all(|w| w.removed.is_none()));
        assert_eq!(run.f.final_set().len(), 1);
        let rep = run.report();
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.diagonalization[0].activations, 1);
        assert!(rep.gamma_cost.is_zero());
    }

    #[test]
    fn gamma_curve_matches_definition() {
        let c = CostFunctional::delayed_geometric(10, 2, 2);
        let zp = zp_of(40, &[7, 3, 12, 0, 15, 5, 20, 1, 22, 9, 25, 2, 30, 31, 4]);
        let run = dual_construct(&c, &zp, &[MockPhi::Mirror { base_use: 3 }, MockPhi::Zero]).unwrap();
        let t_max = run.wishes.iter().map(|w| w.u).max().unwrap() + 2;
        for x in 0..10 {
            let curve = run.gamma_curve(x);
            let mut k = 0;
            for t in 0..=t_max {
                while k + 1 < curve.len() && curve[k + 1].0 <= t {
                    k += 1;
                }
                assert_eq!(run.gamma_eval(x, t), curve[k].1, "x={x} t={t}");
            }
        }
        let rep = run.report();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn granted_wish_is_visible() {
        let c = CostFunctional::delayed_geometric(4, 1, 0);
        let run = dual_construct(&c, &EnumerationTrace::empty(3), &[]).unwrap();
        let w = run.wishes_about(0).find(|w| !w.alpha.is_zero()).unwrap().clone();
        assert_eq!(run.gamma_eval(0, w.u), w.alpha);
        assert!(run.gamma_eval(0, w.u - 1) <= w.alpha);
        assert!(run.gamma_eval(7, 1000).is_zero());
    }

    #[test]
    fn wish_csv_has_one_row_per_wish() {
        let c = CostFunctional::delayed_geometric(6, 1, 1);
        let run = dual_construct(&c, &zp_of(10, &[2, 0, 5]), &[MockPhi::Zero]).unwrap();
        assert_eq!(run.wish_csv().lines().count(), run.wishes.len() + 1);
    }
}
