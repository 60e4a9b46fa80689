use super::*;
use crate::adjunct::transform;
use crate::cast::parse;

fn fixture(name: &str) -> TranslationUnit {
    let path = format!("{}/fixtures/depend/{name}", env!("CARGO_MANIFEST_DIR"));
    let src = std::fs::read_to_string(&path).unwrap();
    parse(name, &src).unwrap()
}

fn verdicts(tu: &TranslationUnit) -> Vec<(u32, LoopVerdict)> {
    analyze(tu, &EffectDatabase::builtin()).loops.iter().map(|l| (l.span.line, l.verdict)).collect()
}

fn transformed(tu: &TranslationUnit) -> TranslationUnit {
    transform(tu, &EffectDatabase::builtin()).unwrap().tu
}

#[test]
fn pbkdf2_outer_loop_needs_the_transform() {
    let tu = fixture("pbkdf2.c");
    let before = analyze(&tu, &EffectDatabase::builtin());
    assert_eq!(before.at_line(12).unwrap().verdict, LoopVerdict::Unknown, "{before:#?}");
    let after_tu = transformed(&tu);
    let after = analyze(&after_tu, &EffectDatabase::builtin());
    let outer = after.loops.iter().find(|l| l.induction.iter().any(|v| v == "p_adj")).unwrap();
    assert_eq!(outer.verdict, LoopVerdict::Parallel, "{after:#?}\n{}", crate::cast::print(&after_tu));
    assert!(outer.induction.contains(&"i".to_string()));
}

#[test]
fn pbkdf2_inner_loop_induction() {
    let tu = transformed(&fixture("pbkdf2.c"));
    let f = &tu.functions[0];
    let outer = f.body.as_ref().unwrap().iter().filter(|s| s.is_loop()).nth(2).unwrap();
    let ivs = find_induction(outer);
    let names: Vec<&str> = ivs.iter().map(|iv| iv.variable.as_str()).collect();
    assert_eq!(names, ["i", "p_adj"]);
    assert!(ivs.iter().all(|iv| print_expr(&iv.stride) == "cplen"));
    let StmtKind::For { body, .. } = &outer.kind else { panic!() };
    let inner = &body[0];
    let ivs = find_induction(inner);
    assert_eq!(ivs.len(), 1);
    assert_eq!(ivs[0].variable, "k");
    assert_eq!(print_expr(&ivs[0].stride), "1");
    let acc = summarize_accesses(f, inner, &EffectDatabase::builtin());
    let shown: Vec<(String, AccessKind)> = acc.iter().map(|a| (a.container.clone(), a.kind)).collect();
    assert!(shown.contains(&("p".into(), AccessKind::Write)));
    assert!(shown.contains(&("p".into(), AccessKind::Read)));
    assert!(shown.contains(&("data".into(), AccessKind::Read)));
}

#[test]
fn memcpy_loops() {
    assert_eq!(verdicts(&fixture("memcpy_left.c")), [(4, LoopVerdict::Serial)]);
    assert_eq!(verdicts(&fixture("memcpy_right.c")), [(5, LoopVerdict::Parallel)]);
}

#[test]
fn memcpy_summaries_are_whole_container() {
    let tu = fixture("memcpy_left.c");
    let f = &tu.functions[0];
    let lp = &f.body.as_ref().unwrap()[2];
    let acc = summarize_accesses(f, lp, &EffectDatabase::builtin());
    assert!(acc.iter().any(|a| a.container == "p" && a.kind == AccessKind::Write && a.range == AccessRange::Whole));
}

#[test]
fn unannotated_memcpy_blocks_the_right_loop() {
    assert_ne!(
        analyze(&fixture("memcpy_right.c"), &EffectDatabase::empty()).loops[0].verdict,
        LoopVerdict::Parallel
    );
}

#[test]
fn hmac_context_is_private() {
    let v = verdicts(&fixture("hmac.c"));
    assert_eq!(v, [(3, LoopVerdict::Parallel), (10, LoopVerdict::Parallel)]);
    let mut db = EffectDatabase::builtin();
    db.remove("HMAC_CTX_copy");
    let r = analyze(&fixture("hmac.c"), &db);
    assert_eq!(r.at_line(10).unwrap().verdict, LoopVerdict::Serial);
}

#[test]
fn same_cell_write_is_serial() {
    assert_eq!(verdicts(&fixture("same_cell.c")), [(4, LoopVerdict::Serial)]);
}

#[test]
fn matvec_reduction() {
    let r = analyze(&fixture("matvec.c"), &EffectDatabase::builtin());
    let v: Vec<LoopVerdict> = r.loops.iter().map(|l| l.verdict).collect();
    use LoopVerdict::*;
    assert_eq!(v, [Parallel, Parallel, Parallel, Parallel, Parallel], "{r:#?}");
    assert_eq!(r.at_line(19).unwrap().reductions, ["total"]);
}

#[test]
fn non_invariant_stride_is_excluded() {
    let tu = parse("t.c", "void f(long* p, int n) { long p_adj = 0; for (int i = 0; i < n; i++) { int x = i; p_adj += x; p[p_adj] = 1; } }").unwrap();
    let lp = &tu.functions[0].body.as_ref().unwrap()[1];
    let names: Vec<String> = find_induction(lp).into_iter().map(|iv| iv.variable).collect();
    assert_eq!(names, ["i"]);
}

#[test]
fn scalar_carried_value_is_serial() {
    let tu = parse("t.c", "void f(long* p, int n) { long s = 1; for (int i = 0; i < n; i++) { s = s * 2 + i; p[i] = s; } }").unwrap();
    assert_eq!(verdicts(&tu)[0].1, LoopVerdict::Serial);
}

#[test]
fn shifted_read_is_serial_and_stride_two_is_parallel() {
    let tu = parse("t.c", "void f(long* p, int n) { for (int i = 1; i < n; i++) { p[i] = p[i - 1] + 1; } }").unwrap();
    assert_eq!(verdicts(&tu)[0].1, LoopVerdict::Serial);
    let tu = parse("t.c", "void f(long* p, int n) { for (int i = 0; i < n; i += 2) { p[i] = p[i + 1]; } }").unwrap();
    assert_eq!(verdicts(&tu)[0].1, LoopVerdict::Parallel);
}

#[test]
fn offset_alias_is_not_compared_by_index() {
    let src = "void f(long* p, int n) { long* q = p + 1; for (int i = 0; i < n; i++) { q[i] = p[i]; } }";
    assert_eq!(verdicts(&parse("t.c", src).unwrap())[0].1, LoopVerdict::Unknown);
    let src = "void f(long* p, int n) { long* q = p; for (int i = 0; i < n; i++) { q[i] = p[i]; } }";
    assert_eq!(verdicts(&parse("t.c", src).unwrap())[0].1, LoopVerdict::Parallel);
}

#[test]
fn symbolic_overlap_is_unknown() {
    let tu = parse("t.c", "void f(long* p, int n, int m) { for (int i = 0; i < n; i++) { p[i] = p[i + m]; } }").unwrap();
    assert_eq!(verdicts(&tu)[0].1, LoopVerdict::Unknown);
}

#[test]
fn every_loop_is_reported_once() {
    let tu = fixture("pbkdf2.c");
    let r = analyze(&tu, &EffectDatabase::builtin());
    assert_eq!(r.loops.len(), 4);
    let mut lines: Vec<u32> = r.loops.iter().map(|l| l.span.line).collect();
    lines.dedup();
    assert_eq!(lines.len(), 4);
}

#[test]
fn parallel_fixture_loops_survive_reordering() {
    use crate::interp::Value;
    let sizes: Vec<Vec<Value>> = [1, 3, 8].iter().map(|n| vec![Value::Int(*n)]).collect();
    for name in ["pbkdf2.c", "memcpy_right.c", "hmac.c", "matvec.c"] {
        let tu = transformed(&fixture(name));
        let entry = tu.functions[0].name.clone();
        let report = analyze(&tu, &EffectDatabase::builtin());
        let mut checked = 0;
        for l in report.loops.iter().filter(|l| l.verdict == LoopVerdict::Parallel) {
            permutation_check(&tu, &entry, &l.span, &sizes, 1_000_000).unwrap();
            checked += 1;
        }
        assert!(checked > 0, "{name}");
    }
}

#[test]
fn reordering_exposes_a_serial_loop() {
    use crate::interp::Value;
    let tu = fixture("same_cell.c");
    let span = analyze(&tu, &EffectDatabase::builtin()).loops[0].span.clone();
    let sizes = vec![vec![Value::Int(5)]];
    assert!(permutation_check(&tu, "same_cell", &span, &sizes, 100_000).is_err());
}
