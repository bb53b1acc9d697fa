use std::collections::HashMap;

use super::ConstructionError;
use crate::machine::{
    baseline_provider, register_requests, schedule_provider, BaselineConfig, KProvider, MachineError, RequestSet,
    MAX_LENGTH,
};
use crate::rational::Rational;

/// Who supplies the descriptions besides our request set `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Opponent {
    /// The baseline schedule, which ignores the run.
    Honest(BaselineConfig),
    /// No baseline. Whenever the wait condition would fail at the next
    /// stage, describes the current stage with the longest length that
    /// restores it, while Kraft room remains.
    Responsive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparationStatus {
    /// All `N = 2^k` points were defined.
    Completed,
    /// The stage budget ran out while waiting.
    BudgetExhausted,
    /// The responsive opponent had no Kraft room left at this stage.
    OpponentExhausted { stage: u64 },
}

/// One entry of the separation inequality: `Σ_{x_p < w ≤ s} min(2^{-K_s(w)}, 2^{-k-b-d+r})
/// ≥ (r+1) 2^{-k-b-d+r-1}` with `s = x_{p+2^r}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimEntry {
    pub p: usize,
    pub r: u32,
    pub s: u64,
    pub lhs: Rational,
    pub rhs: Rational,
}

impl ClaimEntry {
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs
    }
}

#[derive(Debug, Clone)]
pub struct SeparationRun {
    pub b: u32,
    pub d: u32,
    /// `k = 2^{b+d+1}`; the run aims for `N = 2^k` points.
    pub k: u32,
    pub points: Vec<u64>,
    pub requests: RequestSet,
    pub opponent: RequestSet,
    pub provider: KProvider,
    pub claim: Vec<ClaimEntry>,
    pub status: SeparationStatus,
    pub stages: u64,
    /// A point `x_i` at which the wait condition still fails at the last
    /// stage: there `c_K(x_i, s) > 2^b c_max(x_i, s)`.
    pub witness: Option<u64>,
}

enum Phase {
    WaitT,
    WaitS { t: u64 },
}

/// Running `c_K(x_i, s)` and `c_max(x_i, s)` in units of `2^{-MAX_LENGTH}`.
struct Tracker {
    points: Vec<u64>,
    sum: Vec<u128>,
    max: Vec<u128>,
    best: HashMap<u64, u32>,
}

impl Tracker {
    fn apply(&mut self, y: u64, len: u32) {
        let old = self.best.get(&y).copied();
        if old.is_some_and(|l| l <= len) {
            return;
        }
        self.best.insert(y, len);
        let new = 1u128 << (MAX_LENGTH - len);
        let delta = new - old.map_or(0, |l| 1u128 << (MAX_LENGTH - l));
        for (i, &x) in self.points.iter().enumerate() {
            if x < y {
                self.sum[i] += delta;
                self.max[i] = self.max[i].max(new);
            }
        }
    }

    fn condition(&self, i: usize, b: u32) -> bool {
        self.sum[i] <= self.max[i] << b
    }
}

/// The construction behind `c_K(x) ≥ 2^b c_max(x)` for some `x`, run for at
/// most `budget` stages. With `x_v` defined, `⟨k, x_v + 1⟩` goes into `L`;
/// the run waits for `t > x_v` with `c_K(x_v, t) ≥ 2^{-k-d}`, then for
/// `s > t` such that every `i ≤ v` has `w ∈ (x_i, s]` with
/// `c_K(x_i, s) ≤ 2^{b - K_s(w)}`, and sets `x_{v+1} = s`.
pub fn separation_run(b: u32, opponent: Opponent, d: u32, budget: u64) -> Result<SeparationRun, ConstructionError> {
    let k_big = 1u64 << (b + d + 1).min(63);
    if k_big + u64::from(b) + u64::from(d) + 1 > u64::from(MAX_LENGTH) || b > 6 {
        return Err(ConstructionError::LengthOutOfRange { len: k_big + u64::from(b + d) + 1 });
    }
    let k = k_big as u32;
    let goal = 1u64 << k;
    let horizon = budget + 2;
    let mut l = RequestSet::new();
    let mut o = RequestSet::new();
    let build = |l: &RequestSet, o: &RequestSet| -> Result<KProvider, MachineError> {
        match opponent {
            Opponent::Honest(cfg) => register_requests(&baseline_provider(horizon, cfg)?, l, d),
            Opponent::Responsive => schedule_provider(horizon, &[(l.clone(), d), (o.clone(), 0)]),
        }
    };
    l.push(k, 1, 0)?;
    let mut provider = build(&l, &o)?;
    let mut ptr = 0usize;
    let mut tr = Tracker { points: vec![0], sum: vec![0], max: vec![0], best: HashMap::new() };
    let threshold = 1u128 << (MAX_LENGTH - k - d);
    let mut phase = Phase::WaitT;
    let mut status = SeparationStatus::BudgetExhausted;
    let mut last = 0;
    for s in 1..=budget {
        last = s;
        let honored = provider.honored();
        while ptr < honored.len() && honored[ptr].conv <= s {
            tr.apply(honored[ptr].y, honored[ptr].len);
            ptr += 1;
        }
        let v = tr.points.len() - 1;
        match phase {
            Phase::WaitT => {
                if s > tr.points[v] && tr.sum[v] >= threshold {
                    phase = Phase::WaitS { t: s };
                }
            }
            Phase::WaitS { t } => {
                if s > t && (0..=v).all(|i| tr.condition(i, b)) {
                    tr.points.push(s);
                    tr.sum.push(0);
                    tr.max.push(0);
                    if tr.points.len() as u64 > goal {
                        status = SeparationStatus::Completed;
                        break;
                    }
                    l.push(k, s + 1, s)?;
                    provider = build(&l, &o)?;
                    phase = Phase::WaitT;
                }
            }
        }
        if let (Opponent::Responsive, Phase::WaitS { .. }) = (opponent, &phase) {
            // Predict the sums at stage s + 1 without a response.
            let honored = provider.honored();
            let mut next =
                Tracker { points: tr.points.clone(), sum: tr.sum.clone(), max: tr.max.clone(), best: tr.best.clone() };
            let mut q = ptr;
            while q < honored.len() && honored[q].conv <= s + 1 {
                next.apply(honored[q].y, honored[q].len);
                q += 1;
            }
            let n = next.points.len();
            if !(0..n).all(|i| next.condition(i, b)) {
                let need = next.sum.iter().copied().max().unwrap_or(0);
                let factor = (1u128 << b) - 1;
                let len = (1..=MAX_LENGTH).rev().find(|&len| factor << (MAX_LENGTH - len) >= need);
                let Some(len) = len else {
                    status = SeparationStatus::OpponentExhausted { stage: s };
                    break;
                };
                let mut o2 = o.clone();
                let fits = o2.push(len, s, s).is_ok();
                match fits.then(|| build(&l, &o2)) {
                    Some(Ok(p)) => {
                        o = o2;
                        provider = p;
                    }
                    _ => {
                        status = SeparationStatus::OpponentExhausted { stage: s };
                        break;
                    }
                }
            }
        }
    }
    let witness = match phase {
        Phase::WaitS { .. } if status != SeparationStatus::Completed => {
            (0..tr.points.len()).find(|&i| !tr.condition(i, b)).map(|i| tr.points[i])
        }
        _ => None,
    };
    let claim = claim_ledger(&provider, &tr.points, k, b, d);
    Ok(SeparationRun {
        b,
        d,
        k,
        points: tr.points,
        requests: l,
        opponent: o,
        provider,
        claim,
        status,
        stages: last,
        witness,
    })
}

/// Claim instances for `r ≤ min(2, k)` and every `p` with `p + 2^r` defined.
fn claim_ledger(p: &KProvider, points: &[u64], k: u32, b: u32, d: u32) -> Vec<ClaimEntry> {
    let mut out = Vec::new();
    for r in 0..=k.min(2) {
        let big_r = 1usize << r;
        let cap_len = k + b + d - r;
        let cap = 1u128 << (MAX_LENGTH - cap_len);
        for pi in 0..points.len() {
            if pi + big_r >= points.len() {
                break;
            }
            let s = points[pi + big_r];
            let units: u128 = (points[pi] + 1..=s).map(|w| p.weight_units(w, s).min(cap)).sum();
            let lhs = Rational::dyadic(units, MAX_LENGTH);
            let rhs = Rational::pow2_neg(cap_len + 1).mul_int(u64::from(r) + 1);
            out.push(ClaimEntry { p: pi, r, s, lhs, rhs });
        }
    }
    out
}
