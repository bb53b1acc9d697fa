//! Bounded request sets, the Kraft–Chaitin machine builder, and a
//! schedule-driven provider of `K_s` and `Ω_s`.
//!
//! A request `(r, y, t)` enumerated at stage `t` converges at stage
//! `max(t, y) + 1`: from then on `K_s(y) ≤ r + d`, and its weight
//! `2^{-(r+d)}` is part of `Ω_s`. Outputs below the convergence stage keep
//! `K_s(w) = ∞` for `w ≥ s`, and every description of `w > x` is counted in
//! `Ω_s - Ω_x`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::rational::Rational;

/// Longest description length the provider accepts. Weights are kept as
/// integer multiples of `2^{-MAX_LENGTH}` internally.
pub const MAX_LENGTH: u32 = 120;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MachineError {
    #[error("request weight would reach {weight}, above 1")]
    WeightOverflow { weight: Rational },
    #[error("request stage {stage} precedes previous stage {previous}")]
    StageOrder { stage: u64, previous: u64 },
    #[error("description length {len} exceeds the supported maximum {MAX_LENGTH}")]
    LengthOutOfRange { len: u32 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Request {
    pub r: u32,
    pub y: u64,
    pub stage: u64,
}

/// Append-only list of requests with exact weight `Σ 2^{-r} ≤ 1`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RequestSet {
    entries: Vec<Request>,
    weight: Rational,
}

impl RequestSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Consuming form of [`RequestSet::push`].
    pub fn kc_add(mut self, r: u32, y: u64, stage: u64) -> Result<Self, MachineError> {
        self.push(r, y, stage)?;
        Ok(self)
    }

    pub fn push(&mut self, r: u32, y: u64, stage: u64) -> Result<(), MachineError> {
        if let Some(last) = self.entries.last() {
            if stage < last.stage {
                return Err(MachineError::StageOrder { stage, previous: last.stage });
            }
        }
        let weight = &self.weight + &Rational::pow2_neg(r);
        if weight > Rational::one() {
            return Err(MachineError::WeightOverflow { weight });
        }
        self.weight = weight;
        self.entries.push(Request { r, y, stage });
        Ok(())
    }

    pub fn entries(&self) -> &[Request] {
        &self.entries
    }

    pub fn weight(&self) -> &Rational {
        &self.weight
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `stage r y` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for q in &self.entries {
            let _ = writeln!(out, "{} {} {}", q.stage, q.r, q.y);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, MachineError> {
        let mut rs = RequestSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let err = |msg: String| MachineError::Parse { line: i + 1, msg };
            if fields.len() != 3 {
                return Err(err(format!("expected `stage r y`, found {} fields", fields.len())));
            }
            let stage: u64 = fields[0].parse().map_err(|_| err(format!("bad stage `{}`", fields[0])))?;
            let r: u32 = fields[1].parse().map_err(|_| err(format!("bad length `{}`", fields[1])))?;
            let y: u64 = fields[2].parse().map_err(|_| err(format!("bad target `{}`", fields[2])))?;
            rs.push(r, y, stage).map_err(|e| err(e.to_string()))?;
        }
        Ok(rs)
    }
}

/// Free dyadic intervals of pairwise distinct lengths. A request of length
/// `ℓ` takes the leftmost subinterval of the smallest free block that fits,
/// and the remainder of that block splits into blocks of lengths
/// `L+1, …, ℓ`, none of which was free before.
#[derive(Debug, Clone)]
struct Allocator {
    free: BTreeMap<u32, String>,
}

impl Allocator {
    fn new() -> Self {
        let mut free = BTreeMap::new();
        free.insert(0, String::new());
        Allocator { free }
    }

    fn allocate(&mut self, len: u32) -> Option<String> {
        let (&l, _) = self.free.range(..=len).next_back()?;
        let block = self.free.remove(&l)?;
        let mut prefix = block;
        for i in l..len {
            let mut sibling = prefix.clone();
            sibling.push('1');
            self.free.insert(i + 1, sibling);
            prefix.push('0');
        }
        Some(prefix)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixMachine {
    descriptions: BTreeMap<String, u64>,
    coding_constant: u32,
}

/// Builds a prefix-free machine honoring every request of `rs` with a
/// description of length `r + d`, in entry order.
pub fn kc_machine(rs: &RequestSet, d: u32) -> Result<PrefixMachine, MachineError> {
    let mut alloc = Allocator::new();
    let mut descriptions = BTreeMap::new();
    for q in rs.entries() {
        let len = q.r + d;
        let sigma = alloc.allocate(len).ok_or_else(|| MachineError::WeightOverflow { weight: rs.weight().clone() })?;
        descriptions.insert(sigma, q.y);
    }
    Ok(PrefixMachine { descriptions, coding_constant: d })
}

impl PrefixMachine {
    pub fn descriptions(&self) -> &BTreeMap<String, u64> {
        &self.descriptions
    }

    pub fn coding_constant(&self) -> u32 {
        self.coding_constant
    }

    pub fn run(&self, sigma: &str) -> Option<u64> {
        self.descriptions.get(sigma).copied()
    }

    pub fn kraft_sum(&self) -> Rational {
        self.descriptions.keys().map(|s| Rational::pow2_neg(s.len() as u32)).sum()
    }

    /// Pairs `(σ, τ)` with `σ` a proper prefix of `τ`. In lexicographic
    /// order a string is immediately followed by its extensions, so checking
    /// neighbours is exhaustive.
    pub fn prefix_violations(&self) -> Vec<(String, String)> {
        let keys: Vec<&String> = self.descriptions.keys().collect();
        keys.windows(2).filter(|w| w[1].starts_with(w[0].as_str())).map(|w| (w[0].clone(), w[1].clone())).collect()
    }

    pub fn is_prefix_free(&self) -> bool {
        self.prefix_violations().is_empty()
    }
}

/// Constants of the baseline schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineConfig {
    /// `ℓ(w) = 2⌊log₂(w+2)⌋ + main_offset`.
    pub main_offset: u32,
    /// Length `2⌊log₂(j+2)⌋ + power_offset` for `w = 2^j`.
    pub power_offset: u32,
    /// The power-of-two request for `2^j` is enumerated at `f(j) = 2^{j + delay_shift}`.
    pub delay_shift: u32,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { main_offset: 3, power_offset: 5, delay_shift: 1 }
    }
}

impl BaselineConfig {
    /// Exact weight of the whole infinite schedule. For each `m ≥ 1` there
    /// are `2^m` arguments with `⌊log₂(·+2)⌋ = m`, each of weight
    /// `2^{-2m-a}`, so a family with offset `a` weighs `2^{-a}`.
    pub fn kraft_bound(&self) -> Rational {
        Rational::pow2_neg(self.main_offset) + Rational::pow2_neg(self.power_offset)
    }

    pub fn main_length(&self, w: u64) -> u32 {
        2 * floor_log2(w + 2) + self.main_offset
    }

    pub fn power_length(&self, j: u32) -> u32 {
        2 * floor_log2(j as u64 + 2) + self.power_offset
    }

    pub fn delay(&self, j: u32) -> u64 {
        1u64 << (j + self.delay_shift)
    }

    /// Least `j₀` such that the power-of-two length is at most `j - 1` for
    /// every `j ≥ j₀`. The length grows logarithmically, so the condition
    /// is monotone once it holds at a power-of-two boundary.
    pub fn short_power_threshold(&self) -> u32 {
        let holds = |j: u32| self.power_length(j) < j;
        let mut j0 = 1u32;
        for j in 1..=64u32 {
            if !holds(j) {
                j0 = j + 1;
            }
        }
        j0
    }
}

pub fn floor_log2(n: u64) -> u32 {
    63 - n.max(1).leading_zeros()
}

/// Where a provider entry came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Baseline,
    PowerOfTwo,
    Registered(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Honored {
    pub len: u32,
    pub y: u64,
    pub conv: u64,
    pub source: Source,
    pub description: String,
}

/// Immutable table of `K_s(w)` and `Ω_s` for `s ≤ horizon`.
#[derive(Debug, Clone)]
pub struct KProvider {
    horizon: u64,
    config: BaselineConfig,
    baseline: bool,
    registered: Vec<(RequestSet, u32)>,
    honored: Vec<Honored>,
    /// Per `w < horizon`: convergence stages with strictly improving lengths.
    improvements: Vec<Vec<(u64, u32)>>,
    omega_units: Vec<u128>,
    omega: Vec<Rational>,
    machine: PrefixMachine,
}

pub fn baseline_provider(horizon: u64, config: BaselineConfig) -> Result<KProvider, MachineError> {
    KProvider::build(horizon, config, true, Vec::new())
}

/// A provider driven only by the given request sets, without the baseline
/// schedule. Used for opponents in adversarial runs.
pub fn schedule_provider(horizon: u64, sets: &[(RequestSet, u32)]) -> Result<KProvider, MachineError> {
    KProvider::build(horizon, BaselineConfig::default(), false, sets.to_vec())
}

/// Adds `rs` with coding constant `d` to the provider's schedule.
pub fn register_requests(p: &KProvider, rs: &RequestSet, d: u32) -> Result<KProvider, MachineError> {
    if rs.is_empty() {
        return Ok(p.clone());
    }
    let mut registered = p.registered.clone();
    registered.push((rs.clone(), d));
    KProvider::build(p.horizon, p.config, p.baseline, registered)
}

impl KProvider {
    fn build(
        horizon: u64,
        config: BaselineConfig,
        baseline: bool,
        registered: Vec<(RequestSet, u32)>,
    ) -> Result<Self, MachineError> {
        let mut reserved = if baseline { config.kraft_bound() } else { Rational::zero() };
        for (rs, d) in &registered {
            reserved += &(rs.weight() * &Rational::pow2_neg(*d));
        }
        if reserved > Rational::one() {
            return Err(MachineError::WeightOverflow { weight: reserved });
        }

        let mut pending: Vec<(u32, u64, u64, Source)> = Vec::new();
        let base_range = if baseline { 0..horizon } else { 0..0 };
        for w in base_range {
            pending.push((config.main_length(w), w, w + 1, Source::Baseline));
        }
        let mut j = 0u32;
        while baseline && j < 63 && config.delay(j) < horizon {
            let target = 1u64 << j;
            let conv = config.delay(j).max(target) + 1;
            pending.push((config.power_length(j), target, conv, Source::PowerOfTwo));
            j += 1;
        }
        for (i, (rs, d)) in registered.iter().enumerate() {
            for q in rs.entries() {
                let conv = q.stage.max(q.y).saturating_add(1);
                if conv <= horizon {
                    pending.push((q.r + d, q.y, conv, Source::Registered(i)));
                }
            }
        }
        // Stable sort keeps source order within a convergence stage.
        pending.sort_by_key(|&(_, _, conv, _)| conv);

        let mut alloc = Allocator::new();
        let mut honored = Vec::with_capacity(pending.len());
        let mut descriptions = BTreeMap::new();
        let mut improvements: Vec<Vec<(u64, u32)>> = vec![Vec::new(); horizon as usize];
        let mut delta = vec![0u128; horizon as usize + 1];
        for (len, y, conv, source) in pending {
            if len > MAX_LENGTH {
                return Err(MachineError::LengthOutOfRange { len });
            }
            let description =
                alloc.allocate(len).ok_or_else(|| MachineError::WeightOverflow { weight: reserved.clone() })?;
            descriptions.insert(description.clone(), y);
            delta[conv as usize] += 1u128 << (MAX_LENGTH - len);
            if let Some(list) = improvements.get_mut(y as usize) {
                match list.last() {
                    Some(&(c, l)) if c == conv && len < l => {
                        list.pop();
                        list.push((conv, len));
                    }
                    Some(&(_, l)) if len >= l => {}
                    _ => list.push((conv, len)),
                }
            }
            honored.push(Honored { len, y, conv, source, description });
        }
        let mut omega_units = Vec::with_capacity(horizon as usize + 1);
        let mut acc = 0u128;
        for d in delta {
            acc += d;
            omega_units.push(acc);
        }
        let omega = omega_units.iter().map(|&u| Rational::dyadic(u, MAX_LENGTH)).collect();
        Ok(KProvider {
            horizon,
            config,
            baseline,
            registered,
            honored,
            improvements,
            omega_units,
            omega,
            machine: PrefixMachine { descriptions, coding_constant: 0 },
        })
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn config(&self) -> &BaselineConfig {
        &self.config
    }

    pub fn has_baseline(&self) -> bool {
        self.baseline
    }

    pub fn honored(&self) -> &[Honored] {
        &self.honored
    }

    pub fn machine(&self) -> &PrefixMachine {
        &self.machine
    }

    pub fn registered(&self) -> &[(RequestSet, u32)] {
        &self.registered
    }

    /// `K_s(w)`, with `None` standing for `∞`.
    pub fn k(&self, w: u64, s: u64) -> Option<u32> {
        if w >= s {
            return None;
        }
        let list = self.improvements.get(w as usize)?;
        let idx = list.partition_point(|&(conv, _)| conv <= s);
        if idx == 0 {
            None
        } else {
            Some(list[idx - 1].1)
        }
    }

    /// Convergence stages at which `K(w)` strictly improves, with the new length.
    pub fn improvements(&self, w: u64) -> &[(u64, u32)] {
        self.improvements.get(w as usize).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `Ω_s`; stages past the horizon report `Ω_S`.
    pub fn omega(&self, s: u64) -> &Rational {
        &self.omega[s.min(self.horizon) as usize]
    }

    /// `Ω_s` in units of `2^{-MAX_LENGTH}`.
    pub fn omega_units(&self, s: u64) -> u128 {
        self.omega_units[s.min(self.horizon) as usize]
    }

    /// `2^{-K_s(w)}` in units of `2^{-MAX_LENGTH}`, zero for `∞`.
    pub fn weight_units(&self, w: u64, s: u64) -> u128 {
        match self.k(w, s) {
            Some(len) => 1u128 << (MAX_LENGTH - len),
            None => 0,
        }
    }

    /// Exact `Σ 2^{-|σ|}` over the requests honored by the horizon.
    pub fn honored_weight(&self) -> Rational {
        self.honored.iter().map(|h| Rational::pow2_neg(h.len)).sum()
    }

    /// Violations of the monotonicity invariants over the full table.
    pub fn monotonicity_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (w, list) in self.improvements.iter().enumerate() {
            for pair in list.windows(2) {
                if pair[1].0 <= pair[0].0 || pair[1].1 >= pair[0].1 {
                    out.push(format!("K({w}) improvement list not strictly improving: {pair:?}"));
                }
            }
            if let Some(&(conv, _)) = list.first() {
                if conv <= w as u64 {
                    out.push(format!("K({w}) finite at stage {conv} ≤ {w}"));
                }
            }
        }
        for s in 0..self.horizon as usize {
            if self.omega_units[s + 1] < self.omega_units[s] {
                out.push(format!("omega decreases at stage {s}"));
            }
        }
        if self.omega(self.horizon) > &Rational::one() {
            out.push("omega exceeds 1".to_string());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairwise_prefix_free(m: &PrefixMachine) -> bool {
        let keys: Vec<&String> = m.descriptions().keys().collect();
        for (i, a) in keys.iter().enumerate() {
            for (j, b) in keys.iter().enumerate() {
                if i != j && b.starts_with(a.as_str()) {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn add_single_request() {
        let rs = RequestSet::new().kc_add(1, 7, 0).unwrap();
        assert_eq!(rs.weight(), &Rational::new(1, 2).unwrap());
    }

    #[test]
    fn overflow_detected() {
        let rs = RequestSet::new().kc_add(1, 0, 0).unwrap().kc_add(1, 1, 0).unwrap();
        assert!(matches!(rs.kc_add(2, 2, 0), Err(MachineError::WeightOverflow { .. })));
    }

    #[test]
    fn geometric_weights() {
        let mut rs = RequestSet::new();
        for r in 1..=10u32 {
            rs.push(r, r as u64, 0).unwrap();
        }
        // Independent oracle: 1 - 2^{-10} = 1023/1024.
        assert_eq!(rs.weight(), &Rational::new(1023, 1024).unwrap());
    }

    #[test]
    fn stage_order_enforced() {
        let rs = RequestSet::new().kc_add(3, 0, 5).unwrap();
        assert!(matches!(rs.kc_add(3, 1, 4), Err(MachineError::StageOrder { .. })));
    }

    #[test]
    fn machine_shapes() {
        let rs = RequestSet::new().kc_add(1, 9, 0).unwrap();
        let m = kc_machine(&rs, 0).unwrap();
        assert_eq!(m.descriptions().keys().map(String::len).collect::<Vec<_>>(), vec![1]);

        let rs = RequestSet::new().kc_add(1, 10, 0).unwrap().kc_add(2, 11, 0).unwrap().kc_add(2, 12, 0).unwrap();
        let m = kc_machine(&rs, 0).unwrap();
        let mut lens: Vec<usize> = m.descriptions().keys().map(String::len).collect();
        lens.sort();
        assert_eq!(lens, vec![1, 2, 2]);
        assert!(pairwise_prefix_free(&m));
        assert_eq!(m.kraft_sum(), Rational::one());

        let m3 = kc_machine(&rs, 3).unwrap();
        let mut lens: Vec<usize> = m3.descriptions().keys().map(String::len).collect();
        lens.sort();
        assert_eq!(lens, vec![4, 5, 5]);
    }

    #[test]
    fn worst_order_fills_exactly() {
        // Small requests first, then the large one: weight exactly 1.
        let mut rs = RequestSet::new();
        for y in 0..4 {
            rs.push(3, y, 0).unwrap();
        }
        rs.push(1, 99, 0).unwrap();
        let m = kc_machine(&rs, 0).unwrap();
        assert!(pairwise_prefix_free(&m));
        assert_eq!(m.kraft_sum(), Rational::one());
    }

    #[test]
    fn request_text_roundtrip() {
        let rs = RequestSet::new().kc_add(4, 100, 2).unwrap().kc_add(5, 3, 2).unwrap();
        assert_eq!(RequestSet::from_text(&rs.to_text()).unwrap(), rs);
        let err = RequestSet::from_text("1 2 3\n1 2\n").unwrap_err();
        assert!(matches!(err, MachineError::Parse { line: 2, .. }));
    }

    #[test]
    fn baseline_basics() {
        let p = baseline_provider(64, BaselineConfig::default()).unwrap();
        for s in 0..=64 {
            for w in s..70 {
                assert_eq!(p.k(w, s), None);
            }
        }
        assert!(p.omega(0).is_zero());
        assert!(p.monotonicity_violations().is_empty());
        assert!(p.machine().is_prefix_free());
        assert!(pairwise_prefix_free(p.machine()));
        assert_eq!(p.omega(64), &p.honored_weight());
    }

    #[test]
    fn power_of_two_shortcut() {
        let cfg = BaselineConfig::default();
        let f10 = cfg.delay(10);
        assert_eq!(f10, 2048);
        let p = baseline_provider(f10 + 2, cfg).unwrap();
        // Hand evaluation: 2⌊log₂ 12⌋ + 5 = 11, against 2⌊log₂ 1026⌋ + 3 = 23.
        assert_eq!(cfg.power_length(10), 11);
        assert_eq!(cfg.main_length(1024), 23);
        assert_eq!(p.k(1024, f10 + 1), Some(11));
        assert_eq!(p.k(1024, f10), Some(23));
        assert_eq!(cfg.short_power_threshold(), 12);
    }

    #[test]
    fn kraft_bound_closed_form() {
        assert_eq!(BaselineConfig::default().kraft_bound(), Rational::new(5, 32).unwrap());
        let greedy = BaselineConfig { main_offset: 0, power_offset: 1, delay_shift: 1 };
        assert!(baseline_provider(8, greedy).is_err());
    }

    #[test]
    fn registering() {
        let p = baseline_provider(200, BaselineConfig::default()).unwrap();
        let same = register_requests(&p, &RequestSet::new(), 2).unwrap();
        assert_eq!(same.honored().len(), p.honored().len());

        let rs = RequestSet::new().kc_add(4, 100, 10).unwrap();
        let q = register_requests(&p, &rs, 2).unwrap();
        for s in 101..=200 {
            assert!(q.k(100, s).unwrap() <= 6);
        }
        for s in 0..=200 {
            let jump = q.omega(s).signed_sub(p.omega(s));
            let expected = if s > 100 { Rational::pow2_neg(6) } else { Rational::zero() };
            assert_eq!(jump, expected.into_big());
        }
    }
}
