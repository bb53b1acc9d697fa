use super::ConstructionError;
use crate::cost::{cost_of_trace, EnumerationTrace, TraceBuilder};
use crate::rational::Rational;
use crate::zoo::{additive_from_real, LeftCEReal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerReason {
    /// `k` entered `∅'`; the marker value was enumerated.
    Halting,
    /// `φ_k(k)` converged; the marker value was enumerated.
    Requirement,
    /// The marker moved to a fresh value.
    Moved,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerEvent {
    pub s: u64,
    pub k: usize,
    pub value: u64,
    pub reason: MarkerReason,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompleteModelReport {
    /// `(s, k)` with `β_s - β_{γ_{k,s}} > 2^{-k}`.
    pub invariant_violations: Vec<(u64, usize)>,
    /// `(k, Γ^A(k), ∅'(k))` at the horizon.
    pub decode: Vec<(usize, bool, bool)>,
    /// `(k, β - β_{φ_k(k)} ≥ 2^{-k})` for each converging `φ_k(k)`.
    pub requirements: Vec<(usize, bool)>,
    pub total_cost: Rational,
}

impl CompleteModelReport {
    pub fn decode_exact(&self) -> bool {
        self.decode.iter().all(|&(_, g, z)| g == z)
    }

    pub fn passed(&self) -> bool {
        self.invariant_violations.is_empty()
            && self.decode_exact()
            && self.requirements.iter().all(|&(_, ok)| ok)
            && self.total_cost <= Rational::from_int(4)
    }
}

#[derive(Debug, Clone)]
pub struct CompleteModel {
    /// `β_0, …, β_{S+1}`.
    pub beta: LeftCEReal,
    pub set: EnumerationTrace,
    pub markers: Vec<MarkerEvent>,
    /// Final `γ_k` and the stage it was assigned.
    pub gamma: Vec<(u64, u64)>,
    pub report: CompleteModelReport,
}

/// A c.e. set `A` obeying `c_⟨β⟩` that computes the mock `∅'` through movable
/// markers `γ_k`, with `γ_{k,0} = k`. When `k` enters `∅'` at stage `s`,
/// `γ_{k,s}` is enumerated. When `φ_k(k)` converges at `s`, `γ_{k,s}` is
/// enumerated, `β` gains `2^{-k}` from stage `s + 1` on, and `γ_i` for
/// `i ≥ k` move to fresh increasing values above `s + 1`. Delaying the
/// increase by one stage keeps each requirement's own enumeration within
/// `2^{-k}`, for a total cost of at most 4.
///
/// `phis[k]` is `Some((stage, value))` when `φ_k(k)` converges at `stage`
/// with `value ≤ stage`. At most one computation converges per stage.
pub fn build_complete_model(
    zp: &EnumerationTrace,
    phis: &[Option<(u64, u64)>],
    horizon: u64,
) -> Result<CompleteModel, ConstructionError> {
    let mut by_stage: Vec<Option<usize>> = vec![None; horizon as usize + 1];
    for (k, conv) in phis.iter().enumerate() {
        if let Some((s, v)) = *conv {
            if v > s {
                return Err(ConstructionError::LateValue { k: k as u64, stage: s, value: v });
            }
            if s > horizon {
                continue;
            }
            if by_stage[s as usize].replace(k).is_some() {
                return Err(ConstructionError::ComputationClash { stage: s });
            }
        }
    }
    let n = phis.len().max(zp.max_x().map_or(0, |m| m as usize + 1));
    let mut gamma: Vec<u64> = (0..n as u64).collect();
    let mut assigned = vec![0u64; n];
    let mut high = n as u64;
    let mut beta = Vec::with_capacity(horizon as usize + 2);
    let mut cur = Rational::zero();
    let mut a = TraceBuilder::new(horizon);
    let mut markers = Vec::new();
    let mut violations = Vec::new();
    for s in 0..=horizon {
        beta.push(cur.clone());
        for ev in zp.events_at(s) {
            let k = ev.x as usize;
            a.set(s, gamma[k], true)?;
            markers.push(MarkerEvent { s, k, value: gamma[k], reason: MarkerReason::Halting });
        }
        let mut bump = None;
        if let Some(k) = by_stage[s as usize] {
            a.set(s, gamma[k], true)?;
            markers.push(MarkerEvent { s, k, value: gamma[k], reason: MarkerReason::Requirement });
            bump = Some(Rational::pow2_neg(k as u32));
            high = high.max(s + 1);
            for i in k..n {
                high += 1;
                gamma[i] = high;
                assigned[i] = s;
                markers.push(MarkerEvent { s, k: i, value: high, reason: MarkerReason::Moved });
            }
        }
        for (k, &g) in gamma.iter().enumerate() {
            if g < s && cur.monus(&beta[g as usize]) > Rational::pow2_neg(k as u32) {
                violations.push((s, k));
            }
        }
        if let Some(b) = bump {
            cur += &b;
        }
    }
    beta.push(cur.clone());
    let beta = LeftCEReal::new(beta, Rational::from_int(2)).expect("nondecreasing and below 2");
    let set = EnumerationTrace::try_from(a.finish())?;

    let decode = (0..n)
        .map(|k| {
            let g = gamma[k];
            let last_change = set.events().iter().filter(|ev| ev.x <= g).map(|ev| ev.s).max().unwrap_or(0);
            let at = last_change.max(assigned[k]);
            (k, zp.value(k as u64, at), zp.final_value(k as u64))
        })
        .collect();
    let limit = beta.at(horizon + 1).clone();
    let requirements = phis
        .iter()
        .enumerate()
        .filter_map(|(k, conv)| {
            let (s, v) = (*conv)?;
            (s <= horizon).then(|| (k, limit.monus(beta.at(v)) >= Rational::pow2_neg(k as u32)))
        })
        .collect();
    let total_cost = cost_of_trace(&additive_from_real(&beta), &set).total().clone();
    let report = CompleteModelReport { invariant_violations: violations, decode, requirements, total_cost };
    let gamma = gamma.into_iter().zip(assigned).collect();
    Ok(CompleteModel { beta, set, markers, gamma, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nothing_happens() {
        let run = build_complete_model(&EnumerationTrace::empty(30), &[None, None], 30).unwrap();
        assert!(run.set.is_degenerate());
        assert!(run.beta.seq().iter().all(Rational::is_zero));
        assert!(run.report.passed());
    }

    #[test]
    fn single_requirement() {
        let phis = [None, None, None, Some((5, 2))];
        let run = build_complete_model(&EnumerationTrace::empty(20), &phis, 20).unwrap();
        assert_eq!(run.set.entry_stage(3), Some(5));
        assert_eq!(run.beta.at(5), &Rational::zero());
        assert_eq!(run.beta.at(6), &Rational::new(1, 8).unwrap());
        // γ_3 moved to a fresh value above stage 6.
        assert!(run.gamma[3].0 > 6);
        assert!(run.report.passed());
    }

    #[test]
    fn halting_after_move_uses_new_marker() {
        let zp = EnumerationTrace::from_pairs(30, &[(9, 1), (12, 0)]).unwrap();
        let phis = [None, Some((4, 3))];
        let run = build_complete_model(&zp, &phis, 30).unwrap();
        let g1 = run.gamma[1].0;
        assert_eq!(run.set.entry_stage(g1), Some(9));
        assert_eq!(run.set.entry_stage(0), Some(12));
        assert!(run.report.decode_exact());
        assert!(run.report.passed());
    }

    #[test]
    fn clashes_rejected() {
        let e = EnumerationTrace::empty(10);
        assert!(matches!(
            build_complete_model(&e, &[Some((3, 1)), Some((3, 0))], 10),
            Err(ConstructionError::ComputationClash { stage: 3 })
        ));
        assert!(matches!(build_complete_model(&e, &[Some((3, 4))], 10), Err(ConstructionError::LateValue { .. })));
    }
}
