//! Seeded generators for scenario inputs. Every generator draws from a
//! `ChaCha8Rng`, so output is a pure function of the seed and parameters.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constructions::Universe;
use crate::cost::{ApproximationTrace, CostFn, EnumerationTrace, Event, Props};
use crate::dual::MockPhi;
use crate::machine::RequestSet;
use crate::rational::Rational;
use crate::transforms::IbTFunctional;
use crate::zoo::LeftCEReal;

pub type GenRng = ChaCha8Rng;

pub fn rng(seed: u64) -> GenRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` independent instance seeds drawn from `seed`, so instance `i` does
/// not depend on how many instances follow it.
pub fn instance_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.gen()).collect()
}

/// `sets` c.e. sets. Set `e` gets a uniform count in `[0, max_events]` of
/// distinct elements, each uniform in `[0, xmax)`, entering at a uniform
/// stage in `[1, horizon]`.
pub fn universe(rng: &mut GenRng, sets: usize, horizon: u64, max_events: usize, xmax: u64) -> Universe {
    let traces = (0..sets)
        .map(|_| {
            let count = rng.gen_range(0..=max_events);
            enumeration(rng, horizon, count, xmax)
        })
        .collect();
    Universe::new(traces)
}

/// `count` distinct elements below `xmax` at uniform stages in `[1, horizon]`.
pub fn enumeration(rng: &mut GenRng, horizon: u64, count: usize, xmax: u64) -> EnumerationTrace {
    let count = count.min(xmax as usize);
    let mut chosen = BTreeSet::new();
    while chosen.len() < count {
        chosen.insert(rng.gen_range(0..xmax));
    }
    let pairs: Vec<(u64, u64)> = chosen.into_iter().map(|x| (rng.gen_range(1..=horizon.max(1)), x)).collect();
    EnumerationTrace::from_pairs(horizon, &pairs).expect("stages within horizon")
}

/// `changes` flips at uniform `(s, x) ∈ [0, horizon] × [0, xmax)`.
pub fn trace(rng: &mut GenRng, horizon: u64, xmax: u64, changes: usize) -> ApproximationTrace {
    let mut picks: Vec<(u64, u64)> =
        (0..changes).map(|_| (rng.gen_range(0..=horizon), rng.gen_range(0..xmax))).collect();
    picks.sort_unstable();
    picks.dedup();
    let mut state = BTreeSet::new();
    let mut events = Vec::with_capacity(picks.len());
    for (s, x) in picks {
        let v = state.insert(x) || !state.remove(&x);
        events.push(Event { s, x, v });
    }
    ApproximationTrace::new(horizon, events).expect("events within horizon")
}

/// Two traces with the same final set. Each `x < xmax` is a member with
/// probability 1/2 and changes up to `max_flips` times per trace, the
/// number of flips having the parity of its final value.
pub fn paired_traces(
    rng: &mut GenRng,
    horizon: u64,
    xmax: u64,
    max_flips: u32,
) -> (ApproximationTrace, ApproximationTrace) {
    let finals: Vec<bool> = (0..xmax).map(|_| rng.gen_bool(0.5)).collect();
    let mut one = || {
        let mut events = Vec::new();
        for (x, &fin) in finals.iter().enumerate() {
            let mut flips = rng.gen_range(0..=max_flips);
            if (flips % 2 == 1) != fin {
                flips = if flips < max_flips { flips + 1 } else { flips.saturating_sub(1) };
            }
            if (flips % 2 == 1) != fin {
                flips += 1;
            }
            let mut stages: BTreeSet<u64> = BTreeSet::new();
            while (stages.len() as u32) < flips.min(horizon as u32 + 1) {
                stages.insert(rng.gen_range(0..=horizon));
            }
            for (i, s) in stages.into_iter().enumerate() {
                events.push(Event { s, x: x as u64, v: i % 2 == 0 });
            }
        }
        ApproximationTrace::new(horizon, events).expect("events within horizon")
    };
    let a = one();
    let b = one();
    (a, b)
}

/// A random monotone cost function. Half the time additive,
/// `c(x, s) = Σ_{x<w≤s} 2^{-k_w}` with `k_w` uniform in `[1, 12]`;
/// otherwise `2^{-j}` times the geometric cost `2^{-x}` for `x < s`, with
/// `j` uniform in `[0, 4]`.
pub fn monotone_cost(rng: &mut GenRng, horizon: u64) -> CostFn {
    if rng.gen_bool(0.5) {
        let weights: Vec<Rational> = (0..=horizon).map(|_| Rational::pow2_neg(rng.gen_range(1..=12))).collect();
        let mut prefix = vec![Rational::zero()];
        for w in &weights {
            let next = prefix.last().expect("nonempty") + w;
            prefix.push(next);
        }
        CostFn::from_fn("random_additive", horizon, Props::additive(), move |x, s| {
            if x >= s || s > horizon {
                return Rational::zero();
            }
            // Σ_{x<w≤s} = prefix[s+1] - prefix[x+1].
            prefix[s as usize + 1].monus(&prefix[x as usize + 1])
        })
    } else {
        CostFn::geometric(horizon).halved(rng.gen_range(0..=4))
    }
}

/// A pair `(c, d, N)` with `d ≤ N·c` pointwise. When `c` is additive, half
/// the time `d` is `2^{-j}` times the geometric cost with `N = 2^{12}`, which
/// suffices because every additive weight is at least `2^{-12}`. Otherwise
/// `d = 2^{-j} N c` with `N` uniform in `[1, n_max]` and `j` in `[0, 3]`.
pub fn dominated_pair(rng: &mut GenRng, horizon: u64, n_max: u64) -> (CostFn, CostFn, u64) {
    let c = monotone_cost(rng, horizon);
    if c.props().additive && rng.gen_bool(0.5) {
        let d = CostFn::geometric(horizon).halved(rng.gen_range(0..=4));
        return (c, d, 1 << 12);
    }
    let n = rng.gen_range(1..=n_max.max(1));
    let d = c.scaled(n).halved(rng.gen_range(0..=3));
    (c, d, n)
}

/// Up to `count` requests with lengths uniform in `[1, max_len]`, targets
/// uniform below `horizon` and sorted uniform stages in `[0, horizon]`.
/// Requests that would push the weight past 1 are skipped.
pub fn request_set(rng: &mut GenRng, horizon: u64, count: usize, max_len: u32) -> RequestSet {
    let mut stages: Vec<u64> = (0..count).map(|_| rng.gen_range(0..=horizon)).collect();
    stages.sort_unstable();
    let mut rs = RequestSet::new();
    for s in stages {
        let r = rng.gen_range(1..=max_len.max(1));
        let y = rng.gen_range(0..horizon.max(1));
        if rs.weight() + &Rational::pow2_neg(r) <= Rational::one() {
            rs.push(r, y, s).expect("stages sorted, weight checked");
        }
    }
    rs
}

/// Increments `2^{-k}` with `k` uniform in `[1, 16]` at each stage with
/// probability 1/4, clamped so the real never exceeds 1.
pub fn left_ce_real(rng: &mut GenRng, horizon: u64) -> LeftCEReal {
    let cap = Rational::one();
    let mut cur = Rational::zero();
    let mut seq = Vec::with_capacity(horizon as usize + 1);
    seq.push(cur.clone());
    for _ in 1..=horizon {
        if rng.gen_bool(0.25) {
            let next = &cur + &Rational::pow2_neg(rng.gen_range(1..=16));
            cur = if next > cap { cap.clone() } else { next };
        }
        seq.push(cur.clone());
    }
    LeftCEReal::new(seq, cap).expect("nondecreasing and capped")
}

/// A window functional of width in `[1, 3]` with `tables` random truth
/// tables and convergence stages uniform in `[0, conv_max]` for `x < xmax`.
pub fn ibt_functional(rng: &mut GenRng, tables: usize, xmax: u64, conv_max: u64) -> IbTFunctional {
    let width = rng.gen_range(1..=3u32);
    let tabs = (0..tables.max(1)).map(|_| (0..1usize << width).map(|_| rng.gen_bool(0.5)).collect()).collect();
    let conv = (0..xmax).map(|_| rng.gen_range(0..=conv_max)).collect();
    IbTFunctional::window(width, tabs).with_conv(conv)
}

/// A mock `∅'` with one new number per stage `1..=horizon`. With
/// probability `p_small` the least non-member arrives, otherwise a number
/// `1..=spread` above the current maximum.
pub fn halting_schedule(rng: &mut GenRng, horizon: u64, p_small: f64, spread: u64) -> EnumerationTrace {
    let mut members = BTreeSet::new();
    let mut least_out = 0u64;
    let mut top = 0u64;
    let mut pairs = Vec::with_capacity(horizon as usize);
    for s in 1..=horizon {
        let n = if rng.gen_bool(p_small) { least_out } else { top.max(least_out) + rng.gen_range(1..=spread.max(1)) };
        members.insert(n);
        top = top.max(n);
        while members.contains(&least_out) {
            least_out += 1;
        }
        pairs.push((s, n));
    }
    EnumerationTrace::from_pairs(horizon, &pairs).expect("stages within horizon")
}

/// Convergence of `φ_k(k)` for `k < count`: each converges with probability
/// `p` at a distinct uniform stage in `[1, horizon]`, with value uniform in
/// `[0, stage]`.
pub fn halting_phis(rng: &mut GenRng, count: usize, horizon: u64, p: f64) -> Vec<Option<(u64, u64)>> {
    let mut stages: Vec<u64> = (1..=horizon).collect();
    stages.shuffle(rng);
    let mut next = stages.into_iter();
    (0..count).map(|_| if rng.gen_bool(p) { next.next().map(|s| (s, rng.gen_range(0..=s))) } else { None }).collect()
}

/// Scripted opponents: `Mirror` with base use in `[0, 8]` (weight 3),
/// `Zero` (weight 1), `Silent` (weight 1).
pub fn dual_phis(rng: &mut GenRng, count: usize) -> Vec<MockPhi> {
    (0..count)
        .map(|_| match rng.gen_range(0..5) {
            0..=2 => MockPhi::Mirror { base_use: rng.gen_range(0..=8) },
            3 => MockPhi::Zero,
            _ => MockPhi::Silent,
        })
        .collect()
}
