use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use devlab::dn::DevNetwork;

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

fn devlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_devlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn audit_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let cfg = corpus("demo_audit.toml");
    for out in [&a, &b] {
        let o = devlab(&["audit", "--config", path(&cfg), "--out", path(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["error_table.csv", "summary.csv", "audit_repeats.csv", "config.toml", "report.txt"] {
        assert_eq!(read(&a, f), read(&b, f), "{f} differs between runs");
    }
    let table = read(&a, "error_table.csv");
    assert!(table.starts_with(
        "arch_id,seed_id,arch_params,fit_err,val_err,test_err,audit_err,wall_time_s,status\n"
    ));
    assert_eq!(table.lines().count(), 1 + 4 * 8);
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = corpus("demo_audit.toml");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(devlab(&["audit", "--config", path(&cfg), "--out", path(&a)]).status.success());
    let o = devlab(&["audit", "--config", path(&cfg), "--seed", "7", "--out", path(&b)]);
    assert!(o.status.success());
    assert!(read(&b, "report.txt").contains("master seed: 7"));
    assert_ne!(read(&a, "error_table.csv"), read(&b, "error_table.csv"));
}

#[test]
fn report_rerenders_saved_table() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let again = tmp.path().join("again");
    let cfg = corpus("demo_audit.toml");
    assert!(devlab(&["audit", "--config", path(&cfg), "--out", path(&run)]).status.success());
    let table = run.join("error_table.csv");
    let o = devlab(&["report", path(&table), "--out", path(&again)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(&run, "summary.csv"), read(&again, "summary.csv"));
    let original = read(&run, "report.txt");
    let rendered = read(&again, "report.txt");
    let selections = |s: &str| {
        s.lines()
            .skip_while(|l| !l.starts_with("== Error table"))
            .take_while(|l| !l.starts_with("== Luckiest"))
            .map(str::to_owned)
            .collect::<Vec<_>>()
    };
    let rendered = selections(&rendered);
    for line in selections(&original) {
        assert!(rendered.contains(&line), "missing from re-rendered report: {line}");
    }
}

#[test]
fn unknown_config_field_exits_with_path() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(corpus("tiny_audit.toml"))
        .unwrap()
        .replace("spread = 0.8", "spread = 0.8\nsprad = 1.0");
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, text).unwrap();
    let o = devlab(&["audit", "--config", path(&cfg), "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("dataset") && err.contains("sprad"), "{err}");
}

#[test]
fn out_of_range_value_names_field() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(corpus("demo_audit.toml"))
        .unwrap()
        .replace("repeats = 20", "repeats = 3");
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, text).unwrap();
    let o = devlab(&["audit", "--config", path(&cfg), "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("audit.repeats"));
}

#[test]
fn malformed_machine_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let m = tmp.path().join("bad.fa");
    fs::write(&m, "kind: fa\nstates: a b\nalphabet: 0\ninitial: a\na 0 => b\n").unwrap();
    let o = devlab(&["teach-fa", path(&m), "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 5"), "{err}");
}

#[test]
fn teach_fa_writes_loadable_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let o = devlab(&["teach-fa", path(&corpus("parity.fa")), "--shuffle", "3", "--out", path(tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read(tmp.path(), "report.txt");
    assert!(report.contains("epoch 2 developmental error: 0\n"), "{report}");
    assert!(read(tmp.path(), "equivalence.txt").starts_with("0 mismatches"));
    let snap = read(tmp.path(), "snapshot.json");
    let net = DevNetwork::from_snapshot(&snap).unwrap();
    assert_eq!(net.to_snapshot(), snap);
    let lifetime = read(tmp.path(), "lifetime.csv");
    assert_eq!(lifetime.lines().count(), 1 + 2 * 4);
}

#[test]
fn small_capacity_is_flagged() {
    let tmp = tempfile::tempdir().unwrap();
    let o = devlab(&["teach-fa", path(&corpus("parity.fa")), "--capacity", "2", "--out", path(tmp.path())]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("GUARANTEE-VOID"));
}

#[test]
fn run_tm_prints_both_tapes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = devlab(&["run-tm", path(&corpus("unary_increment.tm")), "--tape", "111", "--out", path(tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8_lossy(&o.stdout), "symbolic: 1111\ndn:       1111\n");
}

#[test]
fn overlap_banner_leads_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = devlab(&["audit", "--config", path(&corpus("overlap_audit.toml")), "--out", path(tmp.path())]);
    assert!(o.status.success());
    let report = read(tmp.path(), "report.txt");
    assert!(report.starts_with("!!! WARNING: VALIDATION-VANISHED"), "{report}");
}

#[test]
fn gen_data_and_crossval_write_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let o = devlab(&["gen-data", "--config", path(&corpus("tiny_audit.toml")), "--out", path(tmp.path())]);
    assert!(o.status.success());
    let data = read(tmp.path(), "dataset.csv");
    assert_eq!(data.lines().next(), Some("x0,x1,label"));
    assert_eq!(data.lines().count(), 41);

    let o = devlab(&["crossval", "--config", path(&corpus("parity_corpus.toml")), "--out", path(tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cv = read(tmp.path(), "crossval.csv");
    assert_eq!(cv.lines().next(), Some("fold,size,error"));
    assert_eq!(cv.lines().count(), 6);
}

#[test]
fn compare_writes_both_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let o = devlab(&["compare", "--config", path(&corpus("compare.toml")), "--out", path(tmp.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(tmp.path(), "compare.csv");
    assert_eq!(csv.lines().next(), Some("system,epoch,fit_error"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("dn,")).count(), 10);
    assert_eq!(csv.lines().filter(|l| l.starts_with("backprop-psuvs,")).count(), 10);
}

#[test]
fn missing_config_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = devlab(&["audit", "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--config"));
}
