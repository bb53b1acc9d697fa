use super::function::CostFn;
use crate::par;
use crate::rational::Rational;

/// Grid points where a monotonicity axiom fails.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MonotoneReport {
    /// `c(x+1, s) > c(x, s)`, listed as `(x, s)`.
    pub main: Vec<(u64, u64)>,
    /// `c(x, s) > c(x, s+1)`, listed as `(x, s)`.
    pub stage: Vec<(u64, u64)>,
    /// `c(x, s) ≠ 0` with `x > s`.
    pub zero: Vec<(u64, u64)>,
}

impl MonotoneReport {
    pub fn passed(&self) -> bool {
        self.main.is_empty() && self.stage.is_empty() && self.zero.is_empty()
    }
}

/// Exhaustive scan of both monotonicity axes on `[0, X] × [0, S]`.
pub fn check_monotone(c: &CostFn, xmax: u64, smax: u64) -> MonotoneReport {
    let per_stage = par::map_range(0, smax + 1, |s| {
        let row = c.row(s, xmax + 1);
        let mut main = Vec::new();
        let mut stage = Vec::new();
        let mut zero = Vec::new();
        for x in 0..=xmax {
            if row[x as usize + 1] > row[x as usize] {
                main.push((x, s));
            }
            if x > s && !row[x as usize].is_zero() {
                zero.push((x, s));
            }
        }
        if s < smax {
            let next = c.row(s + 1, xmax);
            for x in 0..=xmax {
                if row[x as usize] > next[x as usize] {
                    stage.push((x, s));
                }
            }
        }
        (main, stage, zero)
    });
    let mut report = MonotoneReport::default();
    for (m, st, z) in per_stage {
        report.main.extend(m);
        report.stage.extend(st);
        report.zero.extend(z);
    }
    report
}

/// For each `x ≤ X`, the least `t ≤ horizon` with `c(x, t) > 0`, or `None`
/// when properness is unwitnessed at the horizon.
pub fn check_proper(c: &CostFn, xmax: u64) -> Vec<Option<u64>> {
    par::map_range(0, xmax + 1, |x| proper_witness(c, x))
}

pub fn proper_witness(c: &CostFn, x: u64) -> Option<u64> {
    (0..=c.horizon()).find(|&t| !c.eval(x, t).is_zero())
}

/// Default tail window for the liminf proxy: stages `[S/2, S]`.
pub const LIMIT_WINDOW_DIVISOR: u64 = 2;

/// Finite-horizon proxy for `liminf_s c(x, s)`. For stage-monotone `c` this
/// is `c(x, S)`; otherwise the minimum over `[S/2, S]`.
pub fn limit_estimate(c: &CostFn, x: u64) -> Rational {
    limit_estimate_window(c, x, LIMIT_WINDOW_DIVISOR)
}

/// As [`limit_estimate`], with window `[S - S/divisor, S]` for non-monotone `c`.
pub fn limit_estimate_window(c: &CostFn, x: u64, divisor: u64) -> Rational {
    let s = c.horizon();
    if x >= s {
        return Rational::zero();
    }
    if c.props().monotone_stage {
        return c.eval(x, s);
    }
    let lo = s - s / divisor.max(1);
    (lo..=s).map(|t| c.eval(x, t)).min().unwrap_or_else(Rational::zero)
}

/// Interval chain `x_0 < … < x_k` with `c(x_i, x_{i+1}) ≥ 2^{-n}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub points: Vec<u64>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Greedy chain from `x_0 = 0`, each `x_{i+1}` least possible. For monotone
/// `c` no chain within `[0, S]` is longer.
pub fn benign_witness(c: &CostFn, n: u32, smax: u64) -> Chain {
    let q = Rational::pow2_neg(n);
    let mut points = vec![0u64];
    let mut x = 0u64;
    'outer: loop {
        for y in x + 1..=smax {
            if c.eval(x, y) >= q {
                points.push(y);
                x = y;
                continue 'outer;
            }
        }
        break;
    }
    Chain { points }
}

/// Points `(x, s)` with `x ≤ s ≤ S` where `lo(x, s) > hi(x, s)`.
pub fn dominance_violations(lo: &CostFn, hi: &CostFn, smax: u64) -> Vec<(u64, u64)> {
    let per_stage = par::map_range(0, smax + 1, |s| {
        let a = lo.row(s, s);
        let b = hi.row(s, s);
        (0..=s).filter(|&x| a[x as usize] > b[x as usize]).map(|x| (x, s)).collect::<Vec<_>>()
    });
    per_stage.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::Props;

    /// Longest chain by dynamic programming over all start points.
    fn brute_longest(c: &CostFn, n: u32, smax: u64) -> usize {
        let q = Rational::pow2_neg(n);
        let mut best = vec![0usize; smax as usize + 1];
        for x in (0..=smax).rev() {
            for y in x + 1..=smax {
                if c.eval(x, y) >= q {
                    best[x as usize] = best[x as usize].max(1 + best[y as usize]);
                }
            }
        }
        best.into_iter().max().unwrap_or(0)
    }

    #[test]
    fn geometric_is_monotone_and_proper() {
        let c = CostFn::geometric(30);
        assert!(check_monotone(&c, 25, 30).passed());
        let w = check_proper(&c, 10);
        assert!(w.iter().enumerate().all(|(x, t)| *t == Some(x as u64)));
        assert_eq!(limit_estimate(&c, 3), Rational::pow2_neg(3));
        assert!(limit_estimate(&c, 30).is_zero());
    }

    #[test]
    fn zero_cost() {
        let c = CostFn::zero(20);
        assert!(check_proper(&c, 5).iter().all(Option::is_none));
        assert_eq!(benign_witness(&c, 3, 20).len(), 0);
    }

    #[test]
    fn violations_reported() {
        let c = CostFn::from_fn("bad", 10, Props::NONE, |x, s| Rational::from_int(x + 10 - s.min(10)));
        let r = check_monotone(&c, 5, 5);
        assert!(!r.main.is_empty());
        assert!(!r.stage.is_empty());
        assert!(!r.zero.is_empty());
    }

    #[test]
    fn non_monotone_window() {
        let c = CostFn::from_fn("osc", 20, Props::NONE, |_, s| Rational::from_int(s % 3));
        assert!(limit_estimate(&c, 0).is_zero());
    }

    #[test]
    fn greedy_is_optimal_on_small_instances() {
        for k in 0..6u32 {
            let c = CostFn::from_fn("shifted", 24, Props::monotone(), move |x, s| {
                if x < s {
                    Rational::new(s - x, 8 * (x + 1 + k as u64)).unwrap()
                } else {
                    Rational::zero()
                }
            });
            for n in 0..5 {
                assert_eq!(benign_witness(&c, n, 24).len(), brute_longest(&c, n, 24), "k={k} n={n}");
            }
        }
    }
}
