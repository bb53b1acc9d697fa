//! Check results and run directories.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use costlab::Rational;
use sha2::{Digest, Sha256};

use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }
}

/// Per-instance outcomes of one check, folded into a single line.
#[derive(Debug, Clone)]
pub struct Tally {
    name: String,
    total: usize,
    failed: Vec<(usize, String)>,
}

impl Tally {
    pub fn new(name: impl Into<String>) -> Self {
        Tally { name: name.into(), total: 0, failed: Vec::new() }
    }

    pub fn record(&mut self, instance: usize, pass: bool, detail: impl FnOnce() -> String) {
        self.total += 1;
        if !pass {
            self.failed.push((instance, detail()));
        }
    }

    pub fn finish(self) -> Check {
        let passed = self.total - self.failed.len();
        let mut detail = format!("{passed}/{} instances", self.total);
        if let Some((i, d)) = self.failed.first() {
            let _ = write!(detail, "; first failure at instance {i}: {d}");
        }
        Check::new(self.name, self.failed.is_empty(), detail)
    }
}

/// `lhs ≤ rhs` over instances, remembering the tightest case exactly.
#[derive(Debug, Clone)]
pub struct BoundTally {
    name: String,
    total: usize,
    failures: usize,
    tightest: Option<(usize, Rational, Rational)>,
}

impl BoundTally {
    pub fn new(name: impl Into<String>) -> Self {
        BoundTally { name: name.into(), total: 0, failures: 0, tightest: None }
    }

    pub fn record(&mut self, instance: usize, lhs: &Rational, rhs: &Rational) {
        self.total += 1;
        if lhs > rhs {
            self.failures += 1;
        }
        let slack = rhs.signed_sub(lhs);
        let tighter = match &self.tightest {
            None => true,
            Some((_, l, r)) => slack < r.signed_sub(l),
        };
        if tighter {
            self.tightest = Some((instance, lhs.clone(), rhs.clone()));
        }
    }

    pub fn finish(self) -> Check {
        let mut detail = format!("{}/{} instances", self.total - self.failures, self.total);
        if let Some((i, l, r)) = &self.tightest {
            let op = if l <= r { "<=" } else { ">" };
            let _ = write!(detail, "; tightest instance {i}: {l} {op} {r}");
        }
        Check::new(self.name, self.failures == 0, detail)
    }
}

/// What a runner produced: checks, informational lines and output files.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub info: Vec<(String, String)>,
    pub files: Vec<(String, String)>,
}

impl Outcome {
    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn info(&mut self, key: &str, value: impl ToString) {
        self.info.push((key.to_string(), value.to_string()));
    }

    pub fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn summary(&self, sc: &Scenario) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario {}", sc.name);
        let _ = writeln!(out, "kind {}", sc.kind.name());
        let _ = writeln!(out, "seed {}", sc.seed);
        for (k, v) in &self.info {
            let _ = writeln!(out, "{k} {v}");
        }
        for c in &self.checks {
            let _ = writeln!(out, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let passed = self.checks.iter().filter(|c| c.pass).count();
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "result {verdict} ({passed}/{} checks)", self.checks.len());
        out
    }
}

/// Run directory name for a scenario and seed.
pub fn run_dir_name(sc: &Scenario) -> String {
    format!("{}-seed{}", sc.name, sc.seed)
}

/// Writes `scenario.txt`, `summary.txt`, the runner's files and a
/// `manifest.txt` with the size and SHA-256 of every other file.
pub fn write_run(root: &Path, sc: &Scenario, out: &Outcome) -> std::io::Result<PathBuf> {
    let dir = root.join(run_dir_name(sc));
    fs::create_dir_all(&dir)?;
    let mut files: Vec<(String, &str)> = Vec::with_capacity(out.files.len() + 2);
    let scenario = sc.to_text();
    let summary = out.summary(sc);
    files.push(("scenario.txt".into(), &scenario));
    files.push(("summary.txt".into(), &summary));
    files.extend(out.files.iter().map(|(n, c)| (n.clone(), c.as_str())));
    let mut manifest = String::new();
    let _ = writeln!(manifest, "costlab {}", costlab_version());
    let _ = writeln!(manifest, "scenario {}", sc.name);
    let _ = writeln!(manifest, "kind {}", sc.kind.name());
    let _ = writeln!(manifest, "seed {}", sc.seed);
    let _ = writeln!(manifest, "result {}", if out.passed() { "PASS" } else { "FAIL" });
    for (name, contents) in &files {
        fs::write(dir.join(name), contents)?;
        let digest = Sha256::digest(contents.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        let _ = writeln!(manifest, "file {name} {} {hex}", contents.len());
    }
    fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(dir)
}

fn costlab_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// `name,num,den` style header fragment for an exact rational column.
pub fn q_cols(name: &str) -> String {
    format!("{name}_num,{name}_den")
}

/// `num,den` for a CSV row.
pub fn q(r: &Rational) -> String {
    let (n, d) = r.parts();
    format!("{n},{d}")
}
