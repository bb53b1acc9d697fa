use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::ConstructionError;
use crate::cost::{cost_of_trace, ApproximationTrace};
use crate::machine::{KProvider, RequestSet};
use crate::rational::Rational;
use crate::zoo::{cost_from_approx, cost_max, Order};

/// Interns binary strings as request targets, numbered by first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StringTable {
    index: BTreeMap<Vec<bool>, u64>,
    strings: Vec<Vec<bool>>,
}

impl StringTable {
    pub fn intern(&mut self, sigma: Vec<bool>) -> u64 {
        if let Some(&i) = self.index.get(&sigma) {
            return i;
        }
        let i = self.strings.len() as u64;
        self.index.insert(sigma.clone(), i);
        self.strings.push(sigma);
        i
    }

    pub fn get(&self, i: u64) -> Option<&[bool]> {
        self.strings.get(i as usize).map(Vec::as_slice)
    }

    pub fn lookup(&self, sigma: &[bool]) -> Option<u64> {
        self.index.get(sigma).copied()
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }
}

/// A change of `A(x)` at stage `s` after the stage `t` at which `Y↾x` has
/// settled. `e` is the number used by the request made for this change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SjtViolation {
    pub x: u64,
    pub t: u64,
    pub s: u64,
    pub e: u64,
    /// `L` holds a request of length `u + h(e)` for the final `Y↾e`, so
    /// `K(Y↾e) ≤ u + h(e) + d`.
    pub described: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SjtReport {
    pub ledger: Rational,
    pub budget: Rational,
    /// Weight of requests made at the least changed `x < s` with `e < x`;
    /// at most `2^{-u}` times the ledger.
    pub backed_weight: Rational,
    pub other_weight: Rational,
    pub e0: Option<u64>,
    pub s0: Option<u64>,
    pub checked: u64,
    pub violations: Vec<SjtViolation>,
}

/// Request set for the ibT reduction of `A` to `Y`. Whenever `A(x)` changes
/// at stage `s`, with `e ≤ x` least such that `e = x` or `Y(e)` changes at a
/// stage in `(x, s]`, the request `⟨u + h(e), Y_s↾e⟩` is added unless
/// already present. The window `(x, s]` is the one the cost function
/// `c_Y(x, s)` charges. At the horizon, every `x ≥ s₀` is checked:
/// `A(x) = A_t(x)` where `t > x` is least with `Y_t↾x = Y_S↾x`.
pub fn sjt_reduction(
    y: &ApproximationTrace,
    h: Order,
    a: &ApproximationTrace,
    u: u32,
    d: u32,
) -> Result<(RequestSet, SjtReport, StringTable), ConstructionError> {
    let horizon = a.horizon();
    let y = y.extended(horizon);
    let c = cost_from_approx(&y, h.clone());
    let ledger = cost_of_trace(&c, a).total().clone();
    let budget = Rational::pow2(u);
    if ledger > budget {
        return Err(ConstructionError::BudgetExceeded { ledger, budget });
    }
    // (t, least changed e_t) for the stages t ≥ 1 at which Y changes.
    let changes: Vec<(u64, u64)> =
        y.change_stages().into_iter().filter(|&t| t >= 1 && t <= horizon).map(|t| (t, y.events_at(t)[0].x)).collect();
    let rmq = MinTable::new(changes.iter().map(|&(_, e)| e).collect());
    let least_in = |lo: u64, hi: u64| {
        // Least changed number over change stages in (lo, hi].
        let i = changes.partition_point(|&(t, _)| t <= lo);
        let j = changes.partition_point(|&(t, _)| t <= hi);
        rmq.min(i, j)
    };

    let mut table = StringTable::default();
    let mut seen = HashSet::new();
    let mut rs = RequestSet::new();
    let mut backed = Rational::zero();
    let mut other = Rational::zero();
    let prefix = |s: u64, e: u64| (0..e).map(|i| y.value(i, s)).collect::<Vec<bool>>();
    for s in a.change_stages() {
        if s == 0 {
            continue;
        }
        let evs = a.events_at(s);
        for (idx, ev) in evs.iter().enumerate() {
            let x = ev.x;
            let e = least_in(x, s).map_or(x, |m| m.min(x));
            let len = u + h(e);
            let target = table.intern(prefix(s, e));
            if !seen.insert((len, target)) {
                continue;
            }
            rs.push(len, target, s)?;
            let w = Rational::pow2_neg(len);
            if idx == 0 && x < s && e < x {
                backed += &w;
            } else {
                other += &w;
            }
        }
    }

    // e₀: least e with h(e') > u + d for every e' in [e, S].
    let mut e0 = None;
    for e in (0..=horizon).rev() {
        if h(e) > u + d {
            e0 = Some(e);
        } else {
            break;
        }
    }
    let s0 = e0.map(|e0| {
        let last = changes
            .iter()
            .filter(|&&(t, _)| y.events_at(t).iter().any(|ev| ev.x < e0))
            .map(|&(t, _)| t)
            .max()
            .unwrap_or(0);
        last.max(e0)
    });

    let mut violations = Vec::new();
    let mut checked = 0;
    if let Some(s0) = s0 {
        let mut by_e: Vec<(u64, u64)> = changes.iter().map(|&(t, e)| (e, t)).collect();
        by_e.sort();
        let mut ptr = 0;
        let mut last_below = 0u64;
        for x in s0..horizon {
            while ptr < by_e.len() && by_e[ptr].0 < x {
                last_below = last_below.max(by_e[ptr].1);
                ptr += 1;
            }
            let t = (x + 1).max(last_below);
            checked += 1;
            let later = a.history(x).iter().find(|&&(s, _)| s > t).map(|&(s, _)| s);
            if let Some(s) = later {
                let e = least_in(x, s).map_or(x, |m| m.min(x));
                let sigma = prefix(s, e);
                let described =
                    sigma == prefix(horizon, e) && table.lookup(&sigma).is_some_and(|i| seen.contains(&(u + h(e), i)));
                violations.push(SjtViolation { x, t, s, e, described });
            }
        }
    }
    let report = SjtReport { ledger, budget, backed_weight: backed, other_weight: other, e0, s0, checked, violations };
    Ok((rs, report, table))
}

/// Sparse table for range minima.
struct MinTable {
    levels: Vec<Vec<u64>>,
}

impl MinTable {
    fn new(base: Vec<u64>) -> Self {
        let mut levels = vec![base];
        let mut width = 1;
        while 2 * width <= levels[0].len() {
            let prev = levels.last().expect("nonempty");
            let next = (0..prev.len() - width).map(|i| prev[i].min(prev[i + width])).collect();
            levels.push(next);
            width *= 2;
        }
        MinTable { levels }
    }

    /// Minimum over `[i, j)`.
    fn min(&self, i: usize, j: usize) -> Option<u64> {
        if i >= j {
            return None;
        }
        let k = (usize::BITS - 1 - (j - i).leading_zeros()) as usize;
        Some(self.levels[k][i].min(self.levels[k][j - (1 << k)]))
    }
}

#[derive(Debug, Clone)]
pub struct WeakKTrivial {
    pub requests: RequestSet,
    /// Request targets: each is `g(σ)` for some `σ = A_s↾n`, stored as its
    /// set of 1-positions.
    pub targets: Vec<Vec<u64>>,
    pub drop_weight: Rational,
    pub change_weight: Rational,
    pub cmax_ledger: Rational,
}

/// Requests that make `A` weakly K-trivial. When `K_s(n)` drops to `r`,
/// request `⟨r+1, g(A_s↾n)⟩`; when `A` changes at stage `s` with least
/// changed `x` and `c_max(x, s) = 2^{-r}`, request `⟨r+1, g(A_s↾x+1)⟩`.
/// Here `g(σ)` is the longest prefix of `σ` ending in 1. Because `a` is
/// erasing, changes above the least `x` at a stage ask for the same string
/// with a longer length, so only the least one is requested.
/// The weight is at most `Ω_S + c_max⟨A⟩ / 2`.
pub fn weak_ktrivial_requests(
    a: &ApproximationTrace,
    p: &std::sync::Arc<KProvider>,
) -> Result<WeakKTrivial, ConstructionError> {
    let horizon = a.horizon().min(p.horizon());
    let mut drops: Vec<(u64, u64, u32)> = Vec::new();
    for n in 0..horizon {
        for &(conv, len) in p.improvements(n) {
            if conv <= horizon {
                drops.push((conv, n, len));
            }
        }
    }
    drops.sort();
    let mut stages: BTreeSet<u64> = drops.iter().map(|d| d.0).collect();
    stages.extend(a.change_stages().into_iter().filter(|&s| s <= horizon));

    let mut members: BTreeSet<u64> = BTreeSet::new();
    let mut index: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
    let mut targets: Vec<Vec<u64>> = Vec::new();
    let mut seen = HashSet::new();
    let mut requests = RequestSet::new();
    let mut drop_weight = Rational::zero();
    let mut change_weight = Rational::zero();
    let mut di = 0;
    let mut g_of = |members: &BTreeSet<u64>, n: u64| -> u64 {
        let key: Vec<u64> = match members.range(..n).next_back() {
            Some(&m) => members.range(..=m).copied().collect(),
            None => Vec::new(),
        };
        *index.entry(key.clone()).or_insert_with(|| {
            targets.push(key);
            targets.len() as u64 - 1
        })
    };
    for s in stages {
        let evs = a.events_at(s);
        for ev in evs {
            if ev.v {
                members.insert(ev.x);
            } else {
                members.remove(&ev.x);
            }
        }
        if let Some(first) = evs.first() {
            let x = first.x;
            if s > 0 {
                if let Some(&y) = members.range(x + 1..=s).next() {
                    return Err(ConstructionError::NotErasing { s, x, y });
                }
            }
            if s > 0 && x < s {
                if let Some(r) = (x + 1..s).filter_map(|w| p.k(w, s)).min() {
                    let target = g_of(&members, x + 1);
                    if seen.insert((r + 1, target)) {
                        requests.push(r + 1, target, s)?;
                        change_weight += &Rational::pow2_neg(r + 1);
                    }
                }
            }
        }
        while di < drops.len() && drops[di].0 == s {
            let (_, n, len) = drops[di];
            di += 1;
            let target = g_of(&members, n);
            if seen.insert((len + 1, target)) {
                requests.push(len + 1, target, s)?;
                drop_weight += &Rational::pow2_neg(len + 1);
            }
        }
    }
    let cmax_ledger = cost_of_trace(&cost_max(p), a).total().clone();
    Ok(WeakKTrivial { requests, targets, drop_weight, change_weight, cmax_ledger })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::Event;
    use crate::machine::{baseline_provider, BaselineConfig};
    use crate::zoo::{identity_order, order_from_table};
    use std::sync::Arc;

    fn ev(s: u64, x: u64, v: bool) -> Event {
        Event { s, x, v }
    }

    #[test]
    fn no_changes_no_requests() {
        let y = ApproximationTrace::new(30, vec![ev(3, 1, true)]).unwrap();
        let a = ApproximationTrace::empty(30);
        let (rs, report, _) = sjt_reduction(&y, identity_order(), &a, 0, 0).unwrap();
        assert!(rs.is_empty());
        assert!(report.violations.is_empty());
    }

    #[test]
    fn change_after_y_change() {
        // Y(2) changes at stage 6; A(5) changes at 8: e = 2, request ⟨u + h(2), Y_8↾2⟩.
        let y = ApproximationTrace::new(20, vec![ev(0, 0, true), ev(6, 2, true), ev(6, 3, true)]).unwrap();
        let a = ApproximationTrace::new(20, vec![ev(8, 5, true)]).unwrap();
        let h = order_from_table(vec![1, 2, 3, 4, 5, 6]);
        let (rs, report, table) = sjt_reduction(&y, h, &a, 1, 0).unwrap();
        assert_eq!(rs.len(), 1);
        let q = rs.entries()[0];
        assert_eq!((q.r, q.stage), (4, 8));
        assert_eq!(table.get(q.y), Some(&[true, false][..]));
        // c(5, 8) = 2^{-h(2)} = 1/8, so the backed weight is 2^{-1} · 1/8.
        assert_eq!(report.ledger, Rational::new(1, 8).unwrap());
        assert_eq!(report.backed_weight, Rational::new(1, 16).unwrap());
        assert!(rs.weight() <= &(Rational::pow2_neg(1) * report.ledger.clone()));
    }

    #[test]
    fn budget_enforced() {
        let y = ApproximationTrace::new(20, vec![ev(4, 0, true), ev(9, 0, false)]).unwrap();
        let a = ApproximationTrace::new(20, vec![ev(5, 3, true), ev(12, 3, false), ev(13, 3, true)]).unwrap();
        let h = order_from_table(vec![0, 1, 2]);
        assert!(matches!(sjt_reduction(&y, h, &a, 0, 0), Err(ConstructionError::BudgetExceeded { .. })));
    }

    #[test]
    fn violations_are_described() {
        // A(12) flips after Y↾12 settled, with Y(7) changing in between.
        let y = ApproximationTrace::new(40, vec![ev(20, 7, true)]).unwrap();
        let a = ApproximationTrace::new(40, vec![ev(13, 12, true), ev(25, 12, false)]).unwrap();
        let h: Order = Arc::new(|e| 2 * e as u32);
        let (_, report, _) = sjt_reduction(&y, h, &a, 1, 1).unwrap();
        assert_eq!(report.e0, Some(2));
        let v = report.violations.iter().find(|v| v.x == 12).expect("A(12) changes after t = 20");
        assert_eq!((v.t, v.s, v.e), (20, 25, 7));
        assert!(v.described);
    }

    #[test]
    fn weak_requests_basics() {
        let p = Arc::new(baseline_provider(40, BaselineConfig::default()).unwrap());
        let empty = weak_ktrivial_requests(&ApproximationTrace::empty(40), &p).unwrap();
        assert!(empty.change_weight.is_zero());
        assert!(empty.drop_weight <= p.omega(40).clone());
        // One change at x = 3, stage 10: c_max(3, 10) = 2^{-K_10(4)}.
        let a = ApproximationTrace::new(40, vec![ev(10, 3, true)]).unwrap();
        let run = weak_ktrivial_requests(&a, &p).unwrap();
        let r = (4..10).filter_map(|w| p.k(w, 10)).min().unwrap();
        let q = run.requests.entries().iter().find(|q| q.stage == 10 && q.r == r + 1).unwrap();
        assert_eq!(run.targets[q.y as usize], vec![3]);
        assert!(run.requests.weight() <= &(p.omega(40) + &(run.cmax_ledger.clone() * Rational::new(1, 2).unwrap())));
    }

    #[test]
    fn erasing_enforced() {
        let p = Arc::new(baseline_provider(30, BaselineConfig::default()).unwrap());
        let a = ApproximationTrace::new(30, vec![ev(5, 4, true), ev(8, 2, true)]).unwrap();
        assert_eq!(weak_ktrivial_requests(&a, &p).unwrap_err(), ConstructionError::NotErasing { s: 8, x: 2, y: 4 });
    }
}
