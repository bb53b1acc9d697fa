use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn costlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_costlab")).args(args).current_dir(cwd).output().unwrap()
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn malformed_descriptor_reports_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.scn"), "kind = conjunction\nseed = 1\nmax_flips = lots\n").unwrap();
    let o = costlab(&["check", "bad.scn"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    fs::write(tmp.path().join("typo.scn"), "kind = conjunction\n\nmax_flip = 2\n").unwrap();
    let o = costlab(&["run", "typo.scn"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn check_accepts_every_shipped_scenario() {
    let mut paths: Vec<String> = fs::read_dir(scenarios())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "scn"))
        .map(|p| p.to_string_lossy().into_owned())
        .collect();
    paths.sort();
    let args: Vec<&str> = std::iter::once("check").chain(paths.iter().map(String::as_str)).collect();
    let o = costlab(&args, Path::new(env!("CARGO_MANIFEST_DIR")));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), paths.len());
}

#[test]
fn run_writes_summary_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = scenarios().join("existence.scn");
    let o = costlab(&["run", scn.to_str().unwrap(), "--horizon", "2000", "--out-dir", "out"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = stdout(&o);
    assert!(summary.contains("PASS total cost <= 2: 100/100 instances"), "{summary}");
    assert!(summary.ends_with("result PASS (6/6 checks)\n"));

    let dir = tmp.path().join("out/existence-seed1");
    assert_eq!(fs::read_to_string(dir.join("summary.txt")).unwrap(), summary);
    let manifest = fs::read_to_string(dir.join("manifest.txt")).unwrap();
    for line in manifest.lines().filter(|l| l.starts_with("file ")) {
        let parts: Vec<&str> = line.split(' ').collect();
        let bytes: u64 = parts[2].parse().unwrap();
        assert_eq!(fs::metadata(dir.join(parts[1])).unwrap().len(), bytes);
        assert_eq!(parts[3].len(), 64);
    }
    assert!(manifest.contains("file scenario.txt "));
    assert!(fs::read_to_string(dir.join("scenario.txt")).unwrap().contains("horizon = 2000"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = scenarios().join("change-join.scn");
    for out in ["a", "b"] {
        let o = costlab(&["run", scn.to_str().unwrap(), "--seed", "77", "--out-dir", out], tmp.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = tmp.path().join("a/change-join-seed77");
    let b = tmp.path().join("b/change-join-seed77");
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 3);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn generated_inputs_feed_scenarios() {
    let tmp = tempfile::tempdir().unwrap();
    let o = costlab(&["generate", "universe", "--seed", "3", "--horizon", "500", "sets=6", "xmax=300"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "./universe.txt");
    fs::write(
        tmp.path().join("mine.scn"),
        "name = mine\nkind = simple\nhorizon = 500\ninput universe = universe.txt\n",
    )
    .unwrap();
    let o = costlab(&["run", "mine.scn"], tmp.path());
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("universes 1\n"));
    assert!(tmp.path().join("runs/mine-seed0/manifest.txt").exists());
}

#[test]
fn export_events_and_ledger() {
    let tmp = tempfile::tempdir().unwrap();
    let o = costlab(&["generate", "trace", "--seed", "9", "--horizon", "40"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));

    let o = costlab(&["export", "trace.txt"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let events = stdout(&o);
    assert!(events.starts_with("s,x,v\n"));
    assert!(events.lines().count() > 1);

    let o = costlab(&["export", "trace.txt", "--cost", "geometric", "--out", "ledger.csv"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let ledger = fs::read_to_string(tmp.path().join("ledger.csv")).unwrap();
    assert!(ledger.lines().count() > 1);

    let o = costlab(&["export", "trace.txt", "--cost", "wobbly"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_check_exits_one() {
    let o = costlab(
        &["run", scenarios().join("separation-b0-honest.scn").to_str().unwrap(), "--out-dir", "out"],
        tempfile::tempdir().unwrap().path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL at least 3 sequence elements"));
}
