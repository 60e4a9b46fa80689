//! Acceptance criteria, one pass/fail line each. Runs as a plain binary so
//! the lines appear in `cargo test` output.

use std::fs;
use std::path::{Path, PathBuf};

use adjunct_core::adjunct::{transform, Verdict};
use adjunct_core::cast::{parse, print, structural_equal, TranslationUnit};
use adjunct_core::depend::{analyze, permutation_check, LoopVerdict};
use adjunct_core::effects::EffectDatabase;
use adjunct_core::interp::{self, run, trace_equal, CompareMode, Value, GENERATED_ENTRY};
use adjunct_core::patterns::{find_lil, rewrite_all_lil, rewrite_lil};
use adjunct_core::scan::{scan, ApplicabilityReport};
use rayon::prelude::*;
use serde_json::Value as Json;

const FUEL: u64 = 2_000_000;
const GENERATED: u64 = 10_000;

type Outcome = Result<String, String>;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn load(path: &Path) -> Result<(String, TranslationUnit), String> {
    let src = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let name = path.file_name().unwrap_or_default().to_string_lossy().to_string();
    let tu = parse(&name, &src).map_err(|e| e.to_string())?;
    Ok((src, tu))
}

fn adjunct(tu: &TranslationUnit) -> Result<TranslationUnit, String> {
    transform(tu, &EffectDatabase::builtin()).map(|o| o.tu).map_err(|e| e.to_string())
}

/// Compares `printed` with the golden file both textually and structurally.
fn check_golden(printed: &str, golden: &Path) -> Result<(), String> {
    let (expected, golden_tu) = load(golden)?;
    if printed != expected {
        return Err(format!("{} differs from the transform output:\n{printed}", golden.display()));
    }
    let reparsed = parse("out.c", printed).map_err(|e| e.to_string())?;
    if !structural_equal(&reparsed, &golden_tu) {
        return Err(format!("{} is not structurally equal", golden.display()));
    }
    Ok(())
}

fn table_rows() -> Outcome {
    let rows = ["decl", "deref", "subscript", "move", "assign", "combined", "call", "callee", "addr_of"];
    let dir = fixtures().join("transform/rows");
    for row in rows {
        let (_, tu) = load(&dir.join(format!("{row}.c")))?;
        check_golden(&print(&adjunct(&tu)?), &dir.join(format!("{row}.adjunct.c"))).map_err(|e| format!("{row}: {e}"))?;
    }
    Ok(format!("{} rows match their goldens", rows.len()))
}

fn figures() -> Outcome {
    let dir = fixtures().join("transform/figures");
    for fig in ["pbkdf2", "double_pointer", "branch"] {
        let (_, tu) = load(&dir.join(format!("{fig}.c")))?;
        check_golden(&print(&adjunct(&tu)?), &dir.join(format!("{fig}.adjunct.c"))).map_err(|e| format!("{fig}: {e}"))?;
    }
    let (_, tu) = load(&dir.join("lil_init.c"))?;
    let found = find_lil(&tu);
    if found.len() != 1 {
        return Err(format!("expected one LIL match, found {}", found.len()));
    }
    let lil = rewrite_lil(&tu, &found[0]).map_err(|e| e.to_string())?;
    check_golden(&print(&lil), &dir.join("lil_init.lil.c"))?;
    check_golden(&print(&adjunct(&lil)?), &dir.join("lil_init.adjunct.c"))?;
    Ok("pbkdf2, double pointer, branch and LIL goldens match".into())
}

fn generated_equivalence() -> Outcome {
    let failures: Vec<String> = (0..GENERATED)
        .into_par_iter()
        .filter_map(|seed| {
            let tu = interp::generate_program(seed, 8 + (seed % 33) as usize);
            let check = || -> Result<(), String> {
                let out = adjunct(&tu)?;
                let a = run(&tu, GENERATED_ENTRY, &[], FUEL).map_err(|t| format!("original: {t}"))?;
                let b = run(&out, GENERATED_ENTRY, &[], FUEL).map_err(|t| format!("transformed: {t}"))?;
                if trace_equal(&a, &b, CompareMode::Strict) {
                    Ok(())
                } else {
                    Err("traces differ".into())
                }
            };
            check().err().map(|e| format!("seed {seed}: {e}"))
        })
        .collect();
    match failures.first() {
        None => Ok(format!("{GENERATED} generated programs are strict-trace-equal to their transforms")),
        Some(f) => Err(format!("{} failures, first {f}", failures.len())),
    }
}

fn idempotence() -> Outcome {
    let mut count = 0;
    let seeds: Vec<u64> = (0..2_000).map(|s| s * 7 + 3).collect();
    let failures: Vec<String> = seeds
        .par_iter()
        .filter_map(|&seed| {
            let tu = interp::generate_program(seed, 24);
            let check = || -> Result<(), String> {
                let once = adjunct(&tu)?;
                let twice = adjunct(&once)?;
                let a = run(&once, GENERATED_ENTRY, &[], FUEL).map_err(|t| t.to_string())?;
                let b = run(&twice, GENERATED_ENTRY, &[], FUEL).map_err(|t| t.to_string())?;
                if trace_equal(&a, &b, CompareMode::Strict) {
                    Ok(())
                } else {
                    Err("second transform changes the trace".into())
                }
            };
            check().err().map(|e| format!("seed {seed}: {e}"))
        })
        .collect();
    if let Some(f) = failures.first() {
        return Err(format!("{} failures, first {f}", failures.len()));
    }
    count += seeds.len();
    let dir = fixtures().join("depend");
    for name in ["pbkdf2.c", "memcpy_right.c", "hmac.c", "matvec.c"] {
        let (_, tu) = load(&dir.join(name))?;
        let once = adjunct(&tu)?;
        let twice = adjunct(&once)?;
        let entry = tu.functions[0].name.clone();
        let a = run(&once, &entry, &[Value::Int(5)], FUEL).map_err(|t| t.to_string())?;
        let b = run(&twice, &entry, &[Value::Int(5)], FUEL).map_err(|t| t.to_string())?;
        if !trace_equal(&a, &b, CompareMode::Strict) {
            return Err(format!("{name}: second transform changes the trace"));
        }
        count += 1;
    }
    Ok(format!("{count} programs keep their trace under a second transform"))
}

fn verdicts() -> Outcome {
    let db = EffectDatabase::builtin();
    let dir = fixtures().join("depend");
    let verdict_at = |tu: &TranslationUnit, line: u32| {
        analyze(tu, &db).at_line(line).map(|l| l.verdict).ok_or_else(|| format!("no loop on line {line}"))
    };
    let expect = |what: &str, got: LoopVerdict, want: LoopVerdict| {
        if got == want {
            Ok(())
        } else {
            Err(format!("{what}: expected {}, got {}", want.as_str(), got.as_str()))
        }
    };
    let (_, pbkdf2) = load(&dir.join("pbkdf2.c"))?;
    expect("pbkdf2 before transform", verdict_at(&pbkdf2, 12)?, LoopVerdict::Unknown)?;
    expect("pbkdf2 after transform", verdict_at(&adjunct(&pbkdf2)?, 12)?, LoopVerdict::Parallel)?;
    let (_, left) = load(&dir.join("memcpy_left.c"))?;
    expect("memcpy left", verdict_at(&left, 4)?, LoopVerdict::Serial)?;
    let (_, right) = load(&dir.join("memcpy_right.c"))?;
    expect("memcpy right", verdict_at(&right, 5)?, LoopVerdict::Parallel)?;
    let (_, hmac) = load(&dir.join("hmac.c"))?;
    expect("hmac", verdict_at(&hmac, 10)?, LoopVerdict::Parallel)?;
    let (_, same) = load(&dir.join("same_cell.c"))?;
    expect("same-cell write", verdict_at(&same, 4)?, LoopVerdict::Serial)?;
    Ok("pbkdf2 unknown then parallel, memcpy serial/parallel, hmac parallel, same-cell serial".into())
}

fn permutation_oracle() -> Outcome {
    let db = EffectDatabase::builtin();
    let sizes: Vec<Vec<Value>> = [1, 3, 8, 13].iter().map(|n| vec![Value::Int(*n)]).collect();
    let mut programs = Vec::new();
    for name in ["pbkdf2.c", "memcpy_left.c", "memcpy_right.c", "hmac.c", "same_cell.c", "matvec.c"] {
        let (_, tu) = load(&fixtures().join("depend").join(name))?;
        programs.push((name.to_string(), adjunct(&tu)?, tu));
    }
    let (_, lil) = load(&fixtures().join("lil/matvec.c"))?;
    let (lil_out, _) = rewrite_all_lil(&lil).map_err(|e| e.to_string())?;
    programs.push(("lil/matvec.c".into(), adjunct(&lil_out)?, lil));
    let mut checked = 0;
    for (name, after, before) in &programs {
        for tu in [after, before] {
            let entry = tu.functions.last().map(|f| f.name.clone()).unwrap_or_default();
            for l in analyze(tu, &db).loops.iter().filter(|l| l.verdict == LoopVerdict::Parallel) {
                permutation_check(tu, &entry, &l.span, &sizes, FUEL).map_err(|e| format!("{name}: {e}"))?;
                checked += 1;
            }
        }
    }
    let generated: Vec<Result<usize, String>> = (0..1_000u64)
        .into_par_iter()
        .map(|seed| {
            let tu = interp::generate_program(seed, 8 + (seed % 33) as usize);
            let out = adjunct(&tu)?;
            let mut n = 0;
            for t in [&tu, &out] {
                for l in analyze(t, &db).loops.iter().filter(|l| l.verdict == LoopVerdict::Parallel) {
                    permutation_check(t, GENERATED_ENTRY, &l.span, &[vec![]], FUEL).map_err(|e| format!("seed {seed}: {e}"))?;
                    n += 1;
                }
            }
            Ok(n)
        })
        .collect();
    let mut from_generated = 0;
    for r in generated {
        from_generated += r?;
    }
    Ok(format!(
        "{checked} parallel fixture loops agree in order, reversed and shuffled for 4 sizes; so do {from_generated} loops of generated programs"
    ))
}

fn lil_matvec() -> Outcome {
    let (_, tu) = load(&fixtures().join("lil/matvec.c"))?;
    let (out, applied) = rewrite_all_lil(&tu).map_err(|e| e.to_string())?;
    if applied.is_empty() {
        return Err("the LIL initialization was not matched".into());
    }
    let out = adjunct(&out)?;
    for n in [1, 4, 27] {
        let a = run(&tu, "matvec", &[Value::Int(n)], FUEL).map_err(|t| t.to_string())?;
        let b = run(&out, "matvec", &[Value::Int(n)], FUEL).map_err(|t| t.to_string())?;
        let (ya, yb) = (a.returned_values(), b.returned_values());
        if ya.is_none() || ya != yb {
            return Err(format!("nrow {n}: y differs"));
        }
        if ya.map_or(0, |v| v.len()) != n as usize {
            return Err(format!("nrow {n}: y has the wrong length"));
        }
    }
    Ok("y is identical for nrow 1, 4 and 27".into())
}

fn counts_of(report: &ApplicabilityReport) -> Json {
    let mut files = serde_json::Map::new();
    for f in &report.files {
        let name = Path::new(&f.path).file_name().unwrap_or_default().to_string_lossy().to_string();
        files.insert(
            name,
            serde_json::json!({
                "loc": f.loc,
                "applicable": f.applicable,
                "non-applicable": f.non_applicable,
                "allocation-delegation": f.exemptions.allocation_delegation,
                "argv": f.exemptions.argv,
                "parses": f.error.is_none(),
            }),
        );
    }
    let t = &report.total;
    serde_json::json!({
        "files": files,
        "total": {
            "files": t.files,
            "loc": t.loc,
            "applicable": t.applicable,
            "non-applicable": t.non_applicable,
            "allocation-delegation": t.exemptions.allocation_delegation,
            "argv": t.exemptions.argv,
            "unparsed": t.unparsed,
        }
    })
}

fn scanner() -> Outcome {
    let dir = fixtures().join("scan");
    let manifest: Json = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir.join("corpus"))
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    paths.sort();
    let report = scan(&paths);
    if counts_of(&report) != manifest {
        return Err(format!("counts differ from the manifest: {}", counts_of(&report)));
    }
    let mut reversed = paths.clone();
    reversed.reverse();
    let mut rotated = paths.clone();
    rotated.rotate_left(2);
    for order in [reversed, rotated] {
        if scan(&order) != report {
            return Err("report depends on the input order".into());
        }
    }
    Ok(format!("{} files match the manifest in every order", paths.len()))
}

fn back_off() -> Outcome {
    let path = fixtures().join("transform/figures/undecidable.c");
    let (src, tu) = load(&path)?;
    let out = transform(&tu, &EffectDatabase::builtin()).map_err(|e| e.to_string())?;
    let printed = print(&out.tu);
    let mentions_p = |line: &str| line.split(|c: char| !(c.is_alphanumeric() || c == '_')).any(|w| w == "p");
    let original: Vec<&str> = src.lines().map(str::trim).filter(|l| mentions_p(l)).collect();
    let rewritten: Vec<&str> = printed.lines().map(str::trim).filter(|l| mentions_p(l)).collect();
    if original != rewritten {
        return Err(format!("lines using p changed: {original:?} vs {rewritten:?}"));
    }
    let diag = out.diagnostics.backed_off.iter().find(|b| b.pointer == "p").ok_or("no diagnostic for p")?;
    if diag.verdict != Verdict::ConditionalReassignment || diag.verdict.as_str() != "conditional-reassignment" {
        return Err(format!("diagnostic says {}", diag.verdict));
    }
    if out.plan.adjunct_of(&diag.function, "p").is_some() {
        return Err("p received an adjunct".into());
    }
    Ok(format!("{} lines using p are unchanged; diagnostic says conditional-reassignment", original.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("transformation table rows", table_rows),
        ("figure goldens", figures),
        ("generated program equivalence", generated_equivalence),
        ("idempotence", idempotence),
        ("dependence verdicts", verdicts),
        ("permutation oracle", permutation_oracle),
        ("LIL matvec", lil_matvec),
        ("scanner corpus", scanner),
        ("back-off safety", back_off),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
