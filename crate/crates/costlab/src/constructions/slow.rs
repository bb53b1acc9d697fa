use super::ConstructionError;
use crate::cost::{EnumerationTrace, TraceBuilder};
use crate::machine::{baseline_provider, register_requests, BaselineConfig, KProvider, RequestSet, MAX_LENGTH};
use crate::rational::Rational;

/// `c_K`-cost of the elements of `(2^{j-1}, 2^j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalCost {
    pub j: u32,
    pub lo: u64,
    pub hi: u64,
    /// Whether the interval waited for the short description of `2^j`.
    pub delayed: bool,
    pub cost: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlowEnumeration {
    pub trace: EnumerationTrace,
    pub j0: u32,
    pub intervals: Vec<IntervalCost>,
    pub total: Rational,
}

/// Enumerates `0, 1, …, 2^J` in order, one element per stage. For `j ≥ j₀`
/// the elements of `(2^{j-1}, 2^j]` wait until the short description of
/// `2^j`, requested at `f(j)`, has converged; each of them then costs at
/// least `2^{-(j-1)}`.
pub fn slow_enum_n(p: &KProvider, big_j: u32) -> Result<SlowEnumeration, ConstructionError> {
    let cfg = p.config();
    let j0 = cfg.short_power_threshold();
    let top = 1u64 << big_j;
    let mut stages = Vec::with_capacity(top as usize + 1);
    let mut prev = 0u64;
    for x in 0..=top {
        let mut t = (prev + 1).max(x + 1);
        if x >= 2 {
            let j = 64 - (x - 1).leading_zeros();
            if j >= j0 {
                t = t.max(cfg.delay(j) + 1);
            }
        }
        stages.push(t);
        prev = t;
    }
    if prev > p.horizon() {
        return Err(ConstructionError::HorizonTooShort { needed: prev, horizon: p.horizon() });
    }
    for j in j0..=big_j {
        let len = p.k(1u64 << j, cfg.delay(j) + 1);
        if len.is_none_or(|l| l + 1 > j) {
            return Err(ConstructionError::ScheduleInsufficient { j, len, need: j - 1 });
        }
    }
    let mut b = TraceBuilder::new(prev);
    let mut costs = Vec::with_capacity(stages.len());
    for (x, &t) in stages.iter().enumerate() {
        let x = x as u64;
        b.set(t, x, true)?;
        let units: u128 = (x + 1..t).map(|w| p.weight_units(w, t)).sum();
        costs.push(Rational::dyadic(units, MAX_LENGTH));
    }
    let trace = EnumerationTrace::try_from(b.finish())?;
    let mut intervals = Vec::new();
    for j in 1..=big_j {
        let lo = (1u64 << (j - 1)) + 1;
        let hi = 1u64 << j;
        let cost = (lo..=hi).map(|x| &costs[x as usize]).sum();
        intervals.push(IntervalCost { j, lo, hi, delayed: j >= j0, cost });
    }
    let total = costs.iter().sum();
    Ok(SlowEnumeration { trace, j0, intervals, total })
}

#[derive(Debug, Clone)]
pub struct Divergence {
    pub requests: RequestSet,
    pub provider: KProvider,
    /// `Σ_{x ∈ A_r} c_K(x, S)` with `A_r = {f(i) : i ≤ 2^{r+1}}`.
    pub partial_sums: Vec<Rational>,
    /// What the requests alone guarantee for each partial sum.
    pub lower_bounds: Vec<Rational>,
}

/// Requests `⟨r+1, max_{i ≤ 2^{r+1}} f(i)⟩` for `r ≤ R`, enumerated at stage
/// `2^{r+1}`, registered on a baseline provider with coding constant `d`.
/// Lengths are one more than `r` so that the set is bounded.
pub fn infinite_ce_divergence(
    f: &[u64],
    r_max: u32,
    config: BaselineConfig,
    d: u32,
) -> Result<Divergence, ConstructionError> {
    let needed = (1usize << (r_max + 1)) + 1;
    if f.len() < needed {
        return Err(ConstructionError::TableTooShort { needed, len: f.len() });
    }
    let table = &f[..needed];
    let mut seen = std::collections::BTreeMap::new();
    for (i, &v) in table.iter().enumerate() {
        if let Some(&j) = seen.get(&v) {
            return Err(ConstructionError::NotInjective { value: v, i: j, j: i });
        }
        seen.insert(v, i);
    }
    let mut requests = RequestSet::new();
    let mut ys = Vec::new();
    for r in 0..=r_max {
        let stage = 1u64 << (r + 1);
        let y = *table[..=stage as usize].iter().max().expect("nonempty");
        requests.push(r + 1, y, stage)?;
        ys.push(y);
    }
    let horizon = ys.iter().copied().max().unwrap_or(0).max(1u64 << (r_max + 1)) + 2;
    let provider = register_requests(&baseline_provider(horizon, config)?, &requests, d)?;
    // suffix[x] = Σ_{x < w < S} 2^{-K_S(w)} in units.
    let mut suffix = vec![0u128; horizon as usize + 1];
    for x in (0..horizon).rev() {
        let w = x + 1;
        suffix[x as usize] = suffix[x as usize + 1] + if w < horizon { provider.weight_units(w, horizon) } else { 0 };
    }
    let mut partial_sums = Vec::new();
    let mut lower_bounds = Vec::new();
    let mut acc = 0u128;
    let mut low = Rational::zero();
    let mut done = 0usize;
    for r in 0..=r_max {
        let upto = (1usize << (r + 1)) + 1;
        for &x in &table[done..upto] {
            acc += suffix[x.min(horizon) as usize];
        }
        done = upto;
        partial_sums.push(Rational::dyadic(acc, MAX_LENGTH));
        let block = (1u64 << r) - 1;
        low += Rational::pow2_neg(r + 1 + d).mul_int(block);
        lower_bounds.push(low.clone());
    }
    Ok(Divergence { requests, provider, partial_sums, lower_bounds })
}
