use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::ops::Deref;

/// One change of a computable approximation: `A_s(x) = v` while
/// `A_{s-1}(x) ≠ v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Event {
    pub s: u64,
    pub x: u64,
    pub v: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("event at stage {s} beyond horizon {horizon}")]
    BeyondHorizon { s: u64, horizon: u64 },
    #[error("two events for x = {x} at stage {s}")]
    Duplicate { s: u64, x: u64 },
    #[error("stage {s} precedes the builder's current stage {current}")]
    OutOfOrder { s: u64, current: u64 },
    #[error("not an enumeration: x = {x} leaves the set at stage {s}")]
    NotEnumeration { s: u64, x: u64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Finite event log of an approximation `⟨A_s⟩_{s ≤ horizon}`. Events at
/// stage 0 give the initial set `A_0` (relative to `∅`) and are never
/// charged. Only genuine changes are stored; events are sorted by stage,
/// then by `x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApproximationTrace {
    horizon: u64,
    events: Vec<Event>,
    by_x: BTreeMap<u64, Vec<(u64, bool)>>,
}

impl ApproximationTrace {
    pub fn empty(horizon: u64) -> Self {
        ApproximationTrace { horizon, events: Vec::new(), by_x: BTreeMap::new() }
    }

    /// Builds a trace from arbitrary-order events. Events that would not
    /// change the current value are dropped.
    pub fn new(horizon: u64, mut events: Vec<Event>) -> Result<Self, TraceError> {
        events.sort();
        if let Some(w) = events.windows(2).find(|w| w[0].s == w[1].s && w[0].x == w[1].x) {
            return Err(TraceError::Duplicate { s: w[0].s, x: w[0].x });
        }
        let mut b = TraceBuilder::new(horizon);
        for e in events {
            b.set(e.s, e.x, e.v)?;
        }
        Ok(b.finish())
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_degenerate(&self) -> bool {
        self.events.is_empty()
    }

    /// The same events viewed up to a larger horizon.
    pub fn extended(&self, horizon: u64) -> Self {
        let mut t = self.clone();
        t.horizon = t.horizon.max(horizon);
        t
    }

    /// Events at stage `s`, ascending in `x`.
    pub fn events_at(&self, s: u64) -> &[Event] {
        let lo = self.events.partition_point(|e| e.s < s);
        let hi = self.events.partition_point(|e| e.s <= s);
        &self.events[lo..hi]
    }

    /// Stages carrying at least one event, ascending.
    pub fn change_stages(&self) -> Vec<u64> {
        let mut out: Vec<u64> = self.events.iter().map(|e| e.s).collect();
        out.dedup();
        out
    }

    /// `A_s(x)`.
    pub fn value(&self, x: u64, s: u64) -> bool {
        match self.by_x.get(&x) {
            None => false,
            Some(list) => {
                let idx = list.partition_point(|&(t, _)| t <= s);
                idx > 0 && list[idx - 1].1
            }
        }
    }

    pub fn final_value(&self, x: u64) -> bool {
        self.value(x, self.horizon)
    }

    /// Changes of `A(x)` as `(stage, new value)`.
    pub fn history(&self, x: u64) -> &[(u64, bool)] {
        self.by_x.get(&x).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn change_count(&self, x: u64) -> usize {
        self.history(x).len()
    }

    /// Every `x` that ever changes.
    pub fn touched(&self) -> impl Iterator<Item = u64> + '_ {
        self.by_x.keys().copied()
    }

    pub fn max_x(&self) -> Option<u64> {
        self.by_x.keys().next_back().copied()
    }

    pub fn set_at(&self, s: u64) -> BTreeSet<u64> {
        self.by_x.keys().copied().filter(|&x| self.value(x, s)).collect()
    }

    pub fn final_set(&self) -> BTreeSet<u64> {
        self.set_at(self.horizon)
    }

    /// `A_s` as a bit vector of length `len`.
    pub fn snapshot(&self, s: u64, len: u64) -> Vec<bool> {
        (0..len).map(|x| self.value(x, s)).collect()
    }

    /// `A_s↾n = B_t↾n`.
    pub fn agrees_below(&self, s: u64, other: &ApproximationTrace, t: u64, n: u64) -> bool {
        let xs: BTreeSet<u64> =
            self.by_x.range(..n).map(|(&x, _)| x).chain(other.by_x.range(..n).map(|(&x, _)| x)).collect();
        xs.into_iter().all(|x| self.value(x, s) == other.value(x, t))
    }

    pub fn is_enumeration(&self) -> bool {
        self.events.iter().all(|e| e.v)
    }

    /// `s x v` lines preceded by a `horizon S` line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "horizon {}", self.horizon);
        for e in &self.events {
            let _ = writeln!(out, "{} {} {}", e.s, e.x, u8::from(e.v));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TraceError> {
        let mut horizon: Option<u64> = None;
        let mut events = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| TraceError::Parse { line: i + 1, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields[0] == "horizon" {
                if fields.len() != 2 {
                    return Err(err("expected `horizon S`".into()));
                }
                horizon = Some(fields[1].parse().map_err(|_| err(format!("bad horizon `{}`", fields[1])))?);
                continue;
            }
            if fields.len() != 3 {
                return Err(err(format!("expected `s x v`, found {} fields", fields.len())));
            }
            let s: u64 = fields[0].parse().map_err(|_| err(format!("bad stage `{}`", fields[0])))?;
            let x: u64 = fields[1].parse().map_err(|_| err(format!("bad x `{}`", fields[1])))?;
            let v = match fields[2] {
                "0" => false,
                "1" => true,
                other => return Err(err(format!("bad bit `{other}`"))),
            };
            events.push(Event { s, x, v });
        }
        let horizon = horizon.unwrap_or_else(|| events.iter().map(|e| e.s).max().unwrap_or(0));
        ApproximationTrace::new(horizon, events)
    }
}

/// Stage-ordered builder. Calls must come in nondecreasing stage order;
/// setting a bit to its current value is a no-op, and a second write to the
/// same bit within a stage replaces the first.
#[derive(Debug, Clone)]
pub struct TraceBuilder {
    horizon: u64,
    events: Vec<Event>,
    by_x: BTreeMap<u64, Vec<(u64, bool)>>,
    current: u64,
}

impl TraceBuilder {
    pub fn new(horizon: u64) -> Self {
        TraceBuilder { horizon, events: Vec::new(), by_x: BTreeMap::new(), current: 0 }
    }

    pub fn get(&self, x: u64) -> bool {
        self.by_x.get(&x).and_then(|l| l.last()).map(|&(_, v)| v).unwrap_or(false)
    }

    /// `A_s(x)` for a stage `s` already reached.
    pub fn value_at(&self, x: u64, s: u64) -> bool {
        match self.by_x.get(&x) {
            None => false,
            Some(list) => {
                let idx = list.partition_point(|&(t, _)| t <= s);
                idx > 0 && list[idx - 1].1
            }
        }
    }

    /// Returns whether the value changed.
    pub fn set(&mut self, s: u64, x: u64, v: bool) -> Result<bool, TraceError> {
        if s > self.horizon {
            return Err(TraceError::BeyondHorizon { s, horizon: self.horizon });
        }
        if s < self.current {
            return Err(TraceError::OutOfOrder { s, current: self.current });
        }
        self.current = s;
        let list = self.by_x.entry(x).or_default();
        if let Some(&(t, w)) = list.last() {
            if t == s {
                // Last write within a stage wins.
                if w != v {
                    list.pop();
                    let empty = list.is_empty();
                    if empty {
                        self.by_x.remove(&x);
                    }
                    if let Some(i) = self.events.iter().rposition(|e| e.s == s && e.x == x) {
                        self.events.remove(i);
                    }
                }
                return Ok(false);
            }
        }
        let old = list.last().map(|&(_, v)| v).unwrap_or(false);
        if old == v {
            if list.is_empty() {
                self.by_x.remove(&x);
            }
            return Ok(false);
        }
        list.push((s, v));
        self.events.push(Event { s, x, v });
        Ok(true)
    }

    /// Elements currently in the set.
    pub fn members(&self) -> impl Iterator<Item = u64> + '_ {
        self.by_x.iter().filter(|(_, l)| l.last().map(|&(_, v)| v).unwrap_or(false)).map(|(&x, _)| x)
    }

    pub fn finish(mut self) -> ApproximationTrace {
        self.events.sort();
        ApproximationTrace { horizon: self.horizon, events: self.events, by_x: self.by_x }
    }
}

/// An approximation whose events are all insertions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumerationTrace(ApproximationTrace);

impl EnumerationTrace {
    pub fn empty(horizon: u64) -> Self {
        EnumerationTrace(ApproximationTrace::empty(horizon))
    }

    /// From `(stage, element)` pairs; repeats of an element are ignored.
    pub fn from_pairs(horizon: u64, pairs: &[(u64, u64)]) -> Result<Self, TraceError> {
        let mut first: BTreeMap<u64, u64> = BTreeMap::new();
        for &(s, x) in pairs {
            let e = first.entry(x).or_insert(s);
            *e = (*e).min(s);
        }
        let events = first.into_iter().map(|(x, s)| Event { s, x, v: true }).collect();
        Ok(EnumerationTrace(ApproximationTrace::new(horizon, events)?))
    }

    /// Stage at which `x` is enumerated.
    pub fn entry_stage(&self, x: u64) -> Option<u64> {
        self.0.history(x).first().map(|&(s, _)| s)
    }

    pub fn into_inner(self) -> ApproximationTrace {
        self.0
    }

    pub fn as_trace(&self) -> &ApproximationTrace {
        &self.0
    }
}

impl TryFrom<ApproximationTrace> for EnumerationTrace {
    type Error = TraceError;

    fn try_from(t: ApproximationTrace) -> Result<Self, TraceError> {
        match t.events().iter().find(|e| !e.v) {
            Some(e) => Err(TraceError::NotEnumeration { s: e.s, x: e.x }),
            None => Ok(EnumerationTrace(t)),
        }
    }
}

impl Deref for EnumerationTrace {
    type Target = ApproximationTrace;
    fn deref(&self) -> &ApproximationTrace {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: u64, x: u64, v: bool) -> Event {
        Event { s, x, v }
    }

    #[test]
    fn values_and_noops() {
        let t = ApproximationTrace::new(10, vec![ev(3, 1, true), ev(2, 1, false), ev(5, 1, false)]).unwrap();
        // The stage-2 event sets an already-zero bit and is dropped.
        assert_eq!(t.events().len(), 2);
        assert!(!t.value(1, 2));
        assert!(t.value(1, 4));
        assert!(!t.final_value(1));
        assert!(t.final_set().is_empty());
        assert!(!t.is_enumeration());
    }

    #[test]
    fn rejects_bad_events() {
        assert!(ApproximationTrace::new(5, vec![ev(0, 1, true)]).unwrap().value(1, 0));
        assert!(matches!(ApproximationTrace::new(5, vec![ev(6, 1, true)]), Err(TraceError::BeyondHorizon { .. })));
        assert!(matches!(
            ApproximationTrace::new(5, vec![ev(2, 1, true), ev(2, 1, false)]),
            Err(TraceError::Duplicate { .. })
        ));
    }

    #[test]
    fn text_roundtrip_and_errors() {
        let t = ApproximationTrace::new(9, vec![ev(1, 4, true), ev(3, 4, false), ev(3, 0, true)]).unwrap();
        assert_eq!(ApproximationTrace::from_text(&t.to_text()).unwrap(), t);
        let e = ApproximationTrace::from_text("horizon 5\n1 2 1\n2 x 1\n").unwrap_err();
        assert!(matches!(e, TraceError::Parse { line: 3, .. }));
    }

    #[test]
    fn enumeration_checks() {
        let e = EnumerationTrace::from_pairs(10, &[(4, 2), (2, 2), (5, 7)]).unwrap();
        assert_eq!(e.entry_stage(2), Some(2));
        assert!(e.is_enumeration());
        let t = ApproximationTrace::new(9, vec![ev(1, 4, true), ev(3, 4, false)]).unwrap();
        assert!(EnumerationTrace::try_from(t).is_err());
    }

    #[test]
    fn agreement() {
        let a = ApproximationTrace::new(9, vec![ev(1, 4, true), ev(3, 1, true)]).unwrap();
        let b = ApproximationTrace::new(9, vec![ev(2, 4, true)]).unwrap();
        assert!(a.agrees_below(2, &b, 2, 9));
        assert!(!a.agrees_below(3, &b, 3, 9));
        assert!(a.agrees_below(3, &b, 3, 1));
    }
}
