use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_adjunct-cc"));
    c.env("ADJUNCT_CC_COLOR", "0");
    c
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(rel)
}

fn copy_in(dir: &Path, rel: &str) -> PathBuf {
    let src = fixture(rel);
    let dest = dir.join(src.file_name().unwrap());
    fs::copy(&src, &dest).unwrap();
    dest
}

fn run(cmd: &mut Command) -> (i32, Value, String) {
    let Output { status, stdout, stderr } = cmd.output().unwrap();
    let text = String::from_utf8(stdout).unwrap();
    let json = if text.trim().is_empty() { Value::Null } else { serde_json::from_str(&text).expect(&text) };
    (status.code().unwrap(), json, String::from_utf8(stderr).unwrap())
}

fn validate(schema: &str, report: &Value) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas");
    let load = |name: &str| -> Value { serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap() };
    let common = load("common.schema.json");
    let resource = jsonschema::Resource::from_contents(common).unwrap();
    let validator = jsonschema::options()
        .with_resource("https://adjunct-cc.invalid/schemas/common.schema.json", resource)
        .build(&load(schema))
        .unwrap();
    let errors: Vec<String> = validator.iter_errors(report).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{schema}: {errors:#?}\n{report:#}");
}

fn loop_at(report: &Value, line: u64) -> &Value {
    report["files"][0]["loops"].as_array().unwrap().iter().find(|l| l["span"]["line"] == line).unwrap()
}

#[test]
fn transform_matches_golden_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let input = copy_in(dir.path(), "transform/figures/pbkdf2.c");
    let (code, report, _) = run(bin().arg("transform").arg(&input));
    assert_eq!(code, 0);
    validate("transform.schema.json", &report);
    let out = fs::read_to_string(dir.path().join("pbkdf2.adjunct.c")).unwrap();
    assert_eq!(out, fs::read_to_string(fixture("transform/figures/pbkdf2.adjunct.c")).unwrap());
    let mapping = report["files"][0]["plan"]["mapping"].as_array().unwrap();
    assert!(mapping.iter().any(|m| m["pointer"] == "p" && m["adjunct"] == "p_adj"));
}

#[test]
fn transform_out_flag_and_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = copy_in(dir.path(), "transform/rows/move.c");
    let out = dir.path().join("elsewhere.c");
    let report = dir.path().join("report.json");
    let (code, stdout, _) = run(bin().arg("transform").arg(&input).arg("--out").arg(&out).arg("--report").arg(&report));
    assert_eq!(code, 0);
    assert_eq!(stdout, Value::Null);
    assert_eq!(fs::read_to_string(&out).unwrap(), fs::read_to_string(fixture("transform/rows/move.adjunct.c")).unwrap());
    validate("transform.schema.json", &serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap());
}

#[test]
fn undecidable_pointer_is_left_alone() {
    let dir = tempfile::tempdir().unwrap();
    let input = copy_in(dir.path(), "transform/figures/undecidable.c");
    let (code, report, _) = run(bin().arg("transform").arg(&input));
    assert_eq!(code, 0);
    validate("transform.schema.json", &report);
    let backed = &report["files"][0]["diagnostics"]["backed_off"];
    assert_eq!(backed[0]["pointer"], "p");
    assert_eq!(backed[0]["verdict"], "conditional-reassignment");
    let out = fs::read_to_string(dir.path().join("undecidable.adjunct.c")).unwrap();
    assert!(out.contains("p[i] = 5;") && !out.contains("p_adj"));
}

#[test]
fn empty_file_gives_empty_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.c");
    fs::write(&input, "").unwrap();
    let (code, report, _) = run(bin().arg("transform").arg(&input));
    assert_eq!(code, 0);
    validate("transform.schema.json", &report);
    assert_eq!(fs::read_to_string(dir.path().join("empty.adjunct.c")).unwrap(), "");
}

#[test]
fn parse_and_type_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.c");
    fs::write(&bad, "int f( {").unwrap();
    let (code, _, stderr) = run(bin().arg("transform").arg(&bad));
    assert_eq!(code, 1);
    assert!(stderr.contains("bad.c:1:"), "{stderr}");
    let ill = dir.path().join("ill.c");
    fs::write(&ill, "int f(int* p) { return p; }").unwrap();
    assert_eq!(run(bin().arg("analyze").arg(&ill)).0, 1);
    assert_eq!(run(bin().arg("transform").arg(dir.path().join("missing.c"))).0, 1);
}

#[test]
fn bad_flags_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let a = copy_in(dir.path(), "transform/rows/move.c");
    let b = copy_in(dir.path(), "transform/rows/deref.c");
    assert_eq!(run(bin().arg("transform").arg(&a).arg(&b).arg("--out").arg(dir.path().join("x.c"))).0, 1);
    assert_eq!(run(bin().arg("frobnicate")).0, 1);
    assert_eq!(run(bin().args(["run-diff", "a.c"])).0, 1);
    assert_eq!(run(bin().arg("analyze").arg(&a).arg("--effects").arg(dir.path().join("none.json"))).0, 1);
    assert!(bin().arg("--help").output().unwrap().status.success());
}

#[test]
fn multiple_inputs_are_reported_in_path_order() {
    let dir = tempfile::tempdir().unwrap();
    let b = copy_in(dir.path(), "transform/rows/subscript.c");
    let a = copy_in(dir.path(), "transform/rows/assign.c");
    let (code, report, _) = run(bin().arg("transform").arg(&b).arg(&a));
    assert_eq!(code, 0);
    let inputs: Vec<&str> = report["files"].as_array().unwrap().iter().map(|f| f["input"].as_str().unwrap()).collect();
    assert_eq!(inputs, [a.display().to_string(), b.display().to_string()]);
    assert!(dir.path().join("assign.adjunct.c").exists() && dir.path().join("subscript.adjunct.c").exists());
}

#[test]
fn analyze_pbkdf2_with_and_without_transform() {
    let input = fixture("depend/pbkdf2.c");
    let (code, before, _) = run(bin().arg("analyze").arg(&input));
    assert_eq!(code, 0);
    validate("analyze.schema.json", &before);
    assert_eq!(loop_at(&before, 12)["verdict"], "unknown");
    let (code, after, _) = run(bin().arg("analyze").arg("--pre-transform").arg(&input));
    assert_eq!(code, 0);
    validate("analyze.schema.json", &after);
    assert_eq!(after["files"][0]["transformed"], true);
    assert_eq!(loop_at(&after, 12)["verdict"], "parallel");
}

#[test]
fn analyze_memcpy_depends_on_effects() {
    let input = fixture("depend/memcpy_right.c");
    let (_, with, _) = run(bin().arg("analyze").arg(&input).args(["--effects", "builtin"]));
    assert_eq!(loop_at(&with, 5)["verdict"], "parallel");
    let (_, without, _) = run(bin().arg("analyze").arg(&input).args(["--effects", "none"]));
    assert_ne!(loop_at(&without, 5)["verdict"], "parallel");
    let dir = tempfile::tempdir().unwrap();
    let custom = dir.path().join("effects.json");
    fs::write(&custom, r#"[{"function": "memcpy", "params": [{"index": 0, "effect": "readwrite"}, {"index": 1, "effect": "read"}]}]"#).unwrap();
    let (code, layered, stderr) = run(bin().arg("analyze").arg(&input).arg("--effects").arg(&custom));
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(loop_at(&layered, 5)["verdict"], "parallel");
}

#[test]
fn analyze_with_lil_reports_matches() {
    let (code, report, _) = run(bin().arg("analyze").arg("--enable-lil").arg(fixture("lil/matvec.c")));
    assert_eq!(code, 0);
    validate("analyze.schema.json", &report);
    assert_eq!(report["files"][0]["lil_matches"].as_array().unwrap().len(), 1);
}

#[test]
fn transform_with_lil_is_stable_under_a_second_transform() {
    let dir = tempfile::tempdir().unwrap();
    let input = copy_in(dir.path(), "lil/matvec.c");
    let (code, report, _) = run(bin().arg("transform").arg("--enable-lil").arg(&input));
    assert_eq!(code, 0);
    validate("transform.schema.json", &report);
    assert_eq!(report["files"][0]["lil_matches"].as_array().unwrap().len(), 1);
    let out = dir.path().join("matvec.adjunct.c");
    assert!(!fs::read_to_string(&out).unwrap().contains("curvalptr"));
    let again = dir.path().join("again.c");
    assert_eq!(run(bin().arg("transform").arg(&out).arg("--out").arg(&again)).0, 0);
    let (code, diff, _) = run(bin().arg("run-diff").arg(&out).arg(&again).args(["--entry", "matvec", "-i", "4"]));
    assert_eq!(code, 0, "{diff:#}");
    validate("run-diff.schema.json", &diff);
}

#[test]
fn scan_corpus_matches_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.json");
    let (code, _, stderr) = run(bin().arg("scan").arg(fixture("scan/corpus")).arg("--json").arg(&out));
    assert_eq!(code, 0);
    assert!(stderr.contains("unparsed"), "{stderr}");
    let report: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    validate("scan.schema.json", &report);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(fixture("scan/manifest.json")).unwrap()).unwrap();
    for (key, field) in [("loc", "loc"), ("applicable", "applicable"), ("non-applicable", "non-applicable"), ("unparsed", "unparsed")] {
        assert_eq!(report["total"][field], manifest["total"][key], "{key}");
    }
    for f in report["files"].as_array().unwrap() {
        let name = Path::new(f["path"].as_str().unwrap()).file_name().unwrap().to_str().unwrap().to_string();
        let m = &manifest["files"][&name];
        assert_eq!(f["applicable"], m["applicable"], "{name}");
        assert_eq!(f["exemptions"]["argv"], m["argv"], "{name}");
        assert_eq!(f["exemptions"]["allocation-delegation"], m["allocation-delegation"], "{name}");
    }
}

#[test]
fn scan_is_order_independent_and_lists_missing_files() {
    let corpus = fixture("scan/corpus");
    let mut files: Vec<PathBuf> = fs::read_dir(&corpus).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    let (_, forward, _) = run(bin().arg("scan").args(&files));
    files.reverse();
    let (_, backward, _) = run(bin().arg("scan").args(&files));
    assert_eq!(forward, backward);
    let (code, with_missing, _) = run(bin().arg("scan").args(&files).arg(corpus.join("nope.c")));
    assert_eq!(code, 0);
    validate("scan.schema.json", &with_missing);
    assert_eq!(with_missing["skipped"].as_array().unwrap().len(), 1);
    assert_eq!(with_missing["total"], forward["total"]);
}

#[test]
fn run_diff_equal_and_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = copy_in(dir.path(), "depend/pbkdf2.c");
    run(bin().arg("transform").arg(&input));
    let out = dir.path().join("pbkdf2.adjunct.c");
    let (code, report, _) = run(bin().arg("run-diff").arg(&input).arg(&out).args(["--entry", "pbkdf2", "-i", "3"]));
    assert_eq!(code, 0);
    validate("run-diff.schema.json", &report);
    assert_eq!(report["equal"], true);
    let (code, _, _) = run(bin().arg("run-diff").arg(&input).arg(&input).args(["--entry", "pbkdf2", "-i", "3"]));
    assert_eq!(code, 0);
}

#[test]
fn run_diff_reports_missing_adjunct() {
    let dir = tempfile::tempdir().unwrap();
    let input = copy_in(dir.path(), "depend/pbkdf2.c");
    run(bin().arg("transform").arg(&input));
    let good = fs::read_to_string(dir.path().join("pbkdf2.adjunct.c")).unwrap();
    let broken = good.replacen("p[k + p_adj] = ", "p[k] = ", 1);
    assert_ne!(good, broken);
    let mutant = dir.path().join("mutant.c");
    fs::write(&mutant, broken).unwrap();
    let (code, report, stderr) = run(bin().arg("run-diff").arg(&input).arg(&mutant).args(["--entry", "pbkdf2", "-i", "2"]));
    assert_eq!(code, 3);
    validate("run-diff.schema.json", &report);
    assert_eq!(report["equal"], false);
    let d = &report["divergence"];
    assert_eq!(d["left"]["kind"], "write");
    assert_ne!(d["left"]["offset"], d["right"]["offset"]);
    assert!(stderr.contains("diverge"), "{stderr}");
}

#[test]
fn run_diff_reports_traps() {
    let dir = tempfile::tempdir().unwrap();
    let ok = dir.path().join("ok.c");
    let oob = dir.path().join("oob.c");
    fs::write(&ok, "int f(int n) { int* a = new int[4]; a[0] = n; return a[0]; }").unwrap();
    fs::write(&oob, "int f(int n) { int* a = new int[4]; a[n] = n; return a[0]; }").unwrap();
    let (code, report, stderr) = run(bin().arg("run-diff").arg(&ok).arg(&oob).args(["--entry", "f", "-i", "9"]));
    assert_eq!(code, 3);
    validate("run-diff.schema.json", &report);
    assert_eq!(report["right"]["trap"]["kind"], "out-of-bounds");
    assert!(report["right"]["trap"]["span"].as_str().unwrap().contains("oob.c:1:"));
    assert!(stderr.contains("trap"), "{stderr}");
    assert_eq!(run(bin().arg("run-diff").arg(&ok).arg(&ok).args(["--entry", "g"])).0, 1);
    assert_eq!(run(bin().arg("run-diff").arg(&ok).arg(&ok).args(["--entry", "f", "-i", "x"])).0, 1);
}

#[test]
fn generate_is_deterministic_and_transformable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.c");
    let out = bin().args(["generate", "--seed", "11", "--size", "12"]).output().unwrap();
    assert!(out.status.success());
    run(bin().args(["generate", "--seed", "11", "--size", "12", "--out"]).arg(&a));
    assert_eq!(fs::read(&a).unwrap(), out.stdout);
    assert_eq!(run(bin().arg("transform").arg(&a)).0, 0);
    let (code, report, _) =
        run(bin().arg("run-diff").arg(&a).arg(dir.path().join("a.adjunct.c")).args(["--entry", "generated_main"]));
    assert_eq!(code, 0, "{report:#}");
}
