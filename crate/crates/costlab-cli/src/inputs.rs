//! Seeded scenario inputs and CSV exports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use costlab::cost::{cost_of_trace, ApproximationTrace, CostFn};
use costlab::gen;
use costlab::machine::{baseline_provider, BaselineConfig};
use costlab::zoo::{cost_k, cost_omega};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InputError {
    #[error("unknown input kind `{0}`; try universe, trace, real, requests, halting")]
    Kind(String),
    #[error("parameter `{0}`: expected key=value with an integer or decimal value")]
    Param(String),
    #[error("unknown parameter `{key}` for `{kind}`")]
    Unknown { kind: String, key: String },
    #[error("{0}")]
    Source(String),
}

/// Parses `key=value` words.
pub fn parse_params(words: &[String]) -> Result<BTreeMap<String, f64>, InputError> {
    words
        .iter()
        .map(|w| {
            let (k, v) = w.split_once('=').ok_or_else(|| InputError::Param(w.clone()))?;
            let v: f64 = v.trim().parse().map_err(|_| InputError::Param(w.clone()))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

/// One generated input file: `(file name, contents)`.
pub fn generate(
    kind: &str,
    seed: u64,
    horizon: u64,
    params: &BTreeMap<String, f64>,
) -> Result<(String, String), InputError> {
    let allowed: &[&str] = match kind {
        "universe" => &["sets", "max_events", "xmax"],
        "trace" => &["xmax", "changes"],
        "real" => &[],
        "requests" => &["count", "max_len"],
        "halting" => &["p_small", "spread"],
        other => return Err(InputError::Kind(other.to_string())),
    };
    if let Some(key) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(InputError::Unknown { kind: kind.to_string(), key: key.clone() });
    }
    let get = |k: &str, d: f64| params.get(k).copied().unwrap_or(d);
    let int = |k: &str, d: u64| get(k, d as f64).max(0.0) as u64;
    let mut g = gen::rng(seed);
    let text = match kind {
        "universe" => {
            gen::universe(&mut g, int("sets", 8) as usize, horizon, int("max_events", 32) as usize, int("xmax", 256))
                .to_text()
        }
        "trace" => gen::trace(&mut g, horizon, int("xmax", 24), int("changes", 30) as usize).to_text(),
        "real" => gen::left_ce_real(&mut g, horizon).to_text(),
        "requests" => gen::request_set(&mut g, horizon, int("count", 32) as usize, int("max_len", 10) as u32).to_text(),
        _ => gen::halting_schedule(&mut g, horizon, get("p_small", 0.3).clamp(0.0, 1.0), int("spread", 3))
            .as_trace()
            .to_text(),
    };
    Ok((format!("{kind}.txt"), text))
}

/// `s,x,v` rows of a trace file, or its `c`-ledger when `cost` is given.
pub fn export(trace_text: &str, cost: Option<&str>) -> Result<String, InputError> {
    let t = ApproximationTrace::from_text(trace_text).map_err(|e| InputError::Source(e.to_string()))?;
    let Some(name) = cost else {
        let mut out = String::from("s,x,v\n");
        for e in t.events() {
            let _ = writeln!(out, "{},{},{}", e.s, e.x, u8::from(e.v));
        }
        return Ok(out);
    };
    let h = t.horizon();
    let c = match name {
        "geometric" => CostFn::geometric(h),
        "omega" | "ck" => {
            let p = std::sync::Arc::new(
                baseline_provider(h, BaselineConfig::default()).map_err(|e| InputError::Source(e.to_string()))?,
            );
            if name == "omega" {
                cost_omega(&p)
            } else {
                cost_k(&p)
            }
        }
        other => return Err(InputError::Source(format!("unknown cost `{other}`; try geometric, omega, ck"))),
    };
    Ok(cost_of_trace(&c, &t).to_csv())
}
