//! Line-oriented scenario descriptors.
//!
//! ```text
//! # comment
//! name = conjunction-bound
//! kind = conjunction
//! seed = 4
//! horizon = 60
//! const X = 24
//! xmax = $X
//! input universe = universe.txt
//! ```
//!
//! One `key = value` per line. `const NAME = v …` declares an integer table
//! that values may reference as `$NAME`; `input NAME = path` names a file
//! relative to the descriptor. Every key is checked against the kind's
//! schema when the descriptor is loaded.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("missing `{0}`")]
    Missing(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Kind {
    Simple,
    Domination,
    Additive,
    Conjunction,
    Implication,
    ChangeJoin,
    Kraft,
    Slow,
    Benign,
    Complete,
    Separation,
    Dual,
    Nonimplication,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Int,
    Prob,
    Word,
    Words,
    Flag,
}

const COMMON: &[(&str, Ty)] =
    &[("name", Ty::Word), ("kind", Ty::Word), ("seed", Ty::Int), ("horizon", Ty::Int), ("instances", Ty::Int)];

impl Kind {
    pub const ALL: [Kind; 13] = [
        Kind::Simple,
        Kind::Domination,
        Kind::Additive,
        Kind::Conjunction,
        Kind::Implication,
        Kind::ChangeJoin,
        Kind::Kraft,
        Kind::Slow,
        Kind::Benign,
        Kind::Complete,
        Kind::Separation,
        Kind::Dual,
        Kind::Nonimplication,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Simple => "simple",
            Kind::Domination => "domination",
            Kind::Additive => "additive",
            Kind::Conjunction => "conjunction",
            Kind::Implication => "implication",
            Kind::ChangeJoin => "change-join",
            Kind::Kraft => "kraft",
            Kind::Slow => "slow",
            Kind::Benign => "benign",
            Kind::Complete => "complete",
            Kind::Separation => "separation",
            Kind::Dual => "dual",
            Kind::Nonimplication => "nonimplication",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Kind-specific keys and their types.
    pub fn keys(self) -> &'static [(&'static str, Ty)] {
        use Ty::*;
        match self {
            Kind::Simple => &[("sets", Int), ("max_events", Int), ("xmax", Int), ("cost", Word), ("prompt", Flag)],
            Kind::Domination => &[],
            Kind::Additive => &[("triples", Int)],
            Kind::Conjunction => &[("xmax", Int), ("max_flips", Int)],
            Kind::Implication => &[("xmax", Int), ("changes", Int), ("n_max", Int)],
            Kind::ChangeJoin => &[("xmax", Int), ("changes", Int)],
            Kind::Kraft => &[("requests", Int), ("max_len", Int), ("d", Int)],
            Kind::Slow => &[("j", Int)],
            Kind::Benign => &[("n_max", Int)],
            Kind::Complete => &[("requirements", Int), ("p_small", Prob), ("spread", Int), ("p_conv", Prob)],
            Kind::Separation => &[("b", Int), ("d", Int), ("opponent", Word), ("budget", Int), ("min_points", Int)],
            Kind::Dual => &[
                ("requirements", Int),
                ("width", Int),
                ("span", Int),
                ("delay", Int),
                ("p_small", Prob),
                ("spread", Int),
                ("log_instance", Int),
            ],
            Kind::Nonimplication => &[("opponents", Words)],
        }
    }

    /// Named input files the kind accepts.
    pub fn inputs(self) -> &'static [&'static str] {
        match self {
            Kind::Simple => &["universe"],
            Kind::Additive => &["real"],
            Kind::Conjunction | Kind::ChangeJoin => &["trace", "other"],
            Kind::Implication => &["trace"],
            Kind::Kraft => &["requests"],
            Kind::Complete | Kind::Dual => &["halting"],
            _ => &[],
        }
    }

    fn ty(self, key: &str) -> Option<Ty> {
        COMMON.iter().chain(self.keys()).find(|(k, _)| *k == key).map(|&(_, t)| t)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Int(u64),
    Prob(f64),
    Word(String),
    Words(Vec<String>),
    Flag(bool),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    pub seed: u64,
    pub horizon: Option<u64>,
    params: BTreeMap<String, Value>,
    consts: BTreeMap<String, Vec<u64>>,
    inputs: BTreeMap<String, (PathBuf, String)>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        Scenario::parse(&text, base, stem)
    }

    /// Parses `text`, resolving `input` paths against `base`. `default_name`
    /// is used when the descriptor has no `name` line.
    pub fn parse(text: &str, base: &Path, default_name: &str) -> Result<Scenario, ScenarioError> {
        let mut raw: Vec<(usize, String, String)> = Vec::new();
        let mut consts = BTreeMap::new();
        let mut inputs = BTreeMap::new();
        for (i, full) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| ScenarioError::Parse { line, msg };
            let body = full.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((lhs, rhs)) = body.split_once('=') else {
                return Err(err(format!("expected `key = value`, found `{body}`")));
            };
            let (lhs, rhs) = (lhs.trim(), rhs.trim());
            if rhs.is_empty() {
                return Err(err(format!("`{lhs}` has no value")));
            }
            let words: Vec<&str> = lhs.split_whitespace().collect();
            match words.as_slice() {
                ["const", name] => {
                    if !is_ident(name) {
                        return Err(err(format!("bad constant name `{name}`")));
                    }
                    let table = rhs
                        .split_whitespace()
                        .map(|w| {
                            w.parse::<u64>().map_err(|_| err(format!("constant `{name}`: `{w}` is not an integer")))
                        })
                        .collect::<Result<Vec<u64>, _>>()?;
                    if consts.insert(name.to_string(), table).is_some() {
                        return Err(err(format!("constant `{name}` declared twice")));
                    }
                }
                ["input", name] => {
                    let path = base.join(rhs);
                    let content = fs::read_to_string(&path)
                        .map_err(|e| err(format!("input `{name}`: {}: {e}", path.display())))?;
                    if inputs.insert(name.to_string(), (PathBuf::from(rhs), content)).is_some() {
                        return Err(err(format!("input `{name}` declared twice")));
                    }
                }
                [key] if is_ident(key) => {
                    if raw.iter().any(|(_, k, _)| k == key) {
                        return Err(err(format!("`{key}` set twice")));
                    }
                    raw.push((line, key.to_string(), rhs.to_string()));
                }
                _ => return Err(err(format!("bad key `{lhs}`"))),
            }
        }
        let (kline, kind_word) = raw
            .iter()
            .find(|(_, k, _)| k == "kind")
            .map(|(l, _, v)| (*l, v.clone()))
            .ok_or(ScenarioError::Missing("kind"))?;
        let kind = Kind::parse(&kind_word).ok_or_else(|| ScenarioError::Parse {
            line: kline,
            msg: format!("unknown kind `{kind_word}`; expected one of {}", Kind::ALL.map(|k| k.name()).join(", ")),
        })?;
        for name in inputs.keys() {
            if !kind.inputs().contains(&name.as_str()) {
                let line = input_line(text, name);
                return Err(ScenarioError::Parse {
                    line,
                    msg: format!("kind `{}` takes no input `{name}`", kind.name()),
                });
            }
        }
        let mut params = BTreeMap::new();
        for (line, key, value) in raw {
            let err = |msg: String| ScenarioError::Parse { line, msg };
            let ty = kind.ty(&key).ok_or_else(|| err(format!("unknown key `{key}` for kind `{}`", kind.name())))?;
            let value = resolve(&value, &consts).map_err(err)?;
            let parsed = match ty {
                Ty::Int => {
                    Value::Int(value.parse().map_err(|_| err(format!("`{key}` needs an integer, found `{value}`")))?)
                }
                Ty::Prob => {
                    let p: f64 = value.parse().map_err(|_| err(format!("`{key}` needs a number, found `{value}`")))?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(err(format!("`{key}` must lie in [0, 1], found {p}")));
                    }
                    Value::Prob(p)
                }
                Ty::Word => Value::Word(value),
                Ty::Words => Value::Words(value.split_whitespace().map(str::to_string).collect()),
                Ty::Flag => Value::Flag(match value.as_str() {
                    "true" | "yes" | "1" => true,
                    "false" | "no" | "0" => false,
                    _ => return Err(err(format!("`{key}` needs true or false, found `{value}`"))),
                }),
            };
            params.insert(key, (line, parsed));
        }
        let name = match params.remove("name") {
            Some((_, Value::Word(w))) => w,
            _ => default_name.to_string(),
        };
        params.remove("kind");
        let seed = match params.remove("seed") {
            Some((_, Value::Int(s))) => s,
            _ => 0,
        };
        let horizon = match params.remove("horizon") {
            Some((line, Value::Int(0))) => {
                return Err(ScenarioError::Parse { line, msg: "horizon must be at least 1".into() })
            }
            Some((_, Value::Int(h))) => Some(h),
            _ => None,
        };
        let params = params.into_iter().map(|(k, (_, v))| (k, v)).collect();
        Ok(Scenario { name, kind, seed, horizon, params, consts, inputs })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = Some(horizon.max(1));
        self
    }

    pub fn horizon_or(&self, default: u64) -> u64 {
        self.horizon.unwrap_or(default)
    }

    pub fn int(&self, key: &str, default: u64) -> u64 {
        match self.params.get(key) {
            Some(Value::Int(v)) => *v,
            _ => default,
        }
    }

    pub fn prob(&self, key: &str, default: f64) -> f64 {
        match self.params.get(key) {
            Some(Value::Prob(v)) => *v,
            _ => default,
        }
    }

    pub fn word<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        match self.params.get(key) {
            Some(Value::Word(v)) => v,
            _ => default,
        }
    }

    pub fn words(&self, key: &str) -> Vec<String> {
        match self.params.get(key) {
            Some(Value::Words(v)) => v.clone(),
            _ => Vec::new(),
        }
    }

    pub fn flag(&self, key: &str, default: bool) -> bool {
        match self.params.get(key) {
            Some(Value::Flag(v)) => *v,
            _ => default,
        }
    }

    pub fn constant(&self, name: &str) -> Option<&[u64]> {
        self.consts.get(name).map(Vec::as_slice)
    }

    /// Contents of a named input file.
    pub fn input(&self, name: &str) -> Option<&str> {
        self.inputs.get(name).map(|(_, text)| text.as_str())
    }

    /// Canonical descriptor text: every resolved setting, one per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "name = {}", self.name);
        let _ = writeln!(out, "kind = {}", self.kind.name());
        let _ = writeln!(out, "seed = {}", self.seed);
        if let Some(h) = self.horizon {
            let _ = writeln!(out, "horizon = {h}");
        }
        for (name, table) in &self.consts {
            let vals: Vec<String> = table.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "const {name} = {}", vals.join(" "));
        }
        for (name, (path, _)) in &self.inputs {
            let _ = writeln!(out, "input {name} = {}", path.display());
        }
        for (key, v) in &self.params {
            let shown = match v {
                Value::Int(n) => n.to_string(),
                Value::Prob(p) => p.to_string(),
                Value::Word(w) => w.clone(),
                Value::Words(ws) => ws.join(" "),
                Value::Flag(b) => b.to_string(),
            };
            let _ = writeln!(out, "{key} = {shown}");
        }
        out
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Replaces each `$NAME` word by the constant's values.
fn resolve(value: &str, consts: &BTreeMap<String, Vec<u64>>) -> Result<String, String> {
    let mut out = Vec::new();
    for w in value.split_whitespace() {
        match w.strip_prefix('$') {
            Some(name) => {
                let table = consts.get(name).ok_or_else(|| format!("undefined constant `{name}`"))?;
                out.extend(table.iter().map(u64::to_string));
            }
            None => out.push(w.to_string()),
        }
    }
    Ok(out.join(" "))
}

fn input_line(text: &str, name: &str) -> usize {
    text.lines()
        .position(|l| {
            let w: Vec<&str> = l.split('=').next().unwrap_or("").split_whitespace().collect();
            w == ["input", name]
        })
        .map_or(0, |i| i + 1)
}

fn io_err(path: &Path, e: std::io::Error) -> ScenarioError {
    ScenarioError::Io { path: path.display().to_string(), msg: e.to_string() }
}
