use super::*;
use crate::cast::parse;

fn trace(src: &str) -> Result<Trace, Trap> {
    let tu = parse("t.c", src).unwrap();
    run(&tu, "f", &[], 10_000)
}

fn returned(src: &str) -> Scalar {
    trace(src).unwrap().returned.unwrap()
}

#[test]
fn arithmetic_and_narrowing() {
    assert_eq!(returned("int f() { int x = 2147483647; x += 1; return x; }"), Scalar::Int(-2147483648));
    assert_eq!(returned("long f() { char c = 300; return c; }"), Scalar::Int(44));
    assert_eq!(returned("double f() { return 7 / 2.0; }"), Scalar::Float(3.5));
    assert_eq!(returned("int f() { return -7 % 3; }"), Scalar::Int(-1));
}

#[test]
fn array_accesses_are_traced() {
    let t = trace("int f() { int a[2]; a[0] = 5; a[1] = a[0] + 1; return a[1]; }").unwrap();
    let shown: Vec<String> = t.events.iter().map(|e| e.to_string()).collect();
    assert_eq!(
        shown,
        ["#0 alloc c0[2]", "#1 write c0[0] = 5", "#2 read c0[0] = 5", "#3 write c0[1] = 6", "#4 read c0[1] = 6"]
    );
    assert_eq!(t.final_state.containers[0].values, vec![Some(Scalar::Int(5)), Some(Scalar::Int(6))]);
}

#[test]
fn scalar_variables_are_not_traced() {
    let t = trace("int f() { int x = 1; int* p = &x; *p = 4; return x; }").unwrap();
    assert!(t.events.is_empty());
    assert_eq!(t.returned, Some(Scalar::Int(4)));
}

#[test]
fn pointer_formation_past_the_end_traps() {
    assert!(trace("int f() { int* p = new int[2]; p += 2; return 0; }").is_ok());
    let err = trace("int f() { int* p = new int[2]; p += 3; return 0; }").unwrap_err();
    assert_eq!(err.kind, TrapKind::OutOfBounds);
    let err = trace("int f() { int* p = new int[2]; p--; return 0; }").unwrap_err();
    assert_eq!(err.kind, TrapKind::OutOfBounds);
}

#[test]
fn traps_keep_the_partial_trace() {
    let err = trace("int f() { int* p = new int[2]; p[0] = 1; return p[1]; }").unwrap_err();
    assert_eq!(err.kind, TrapKind::UninitializedRead);
    assert_eq!(err.partial.len(), 2);
}

#[test]
fn cross_container_ordering_traps() {
    let err = trace("long f() { int* p = new int[2]; int* q = new int[2]; return p - q; }").unwrap_err();
    assert_eq!(err.kind, TrapKind::CrossContainer);
    assert_eq!(returned("long f() { int* p = new int[2]; int* q = new int[2]; return p == q; }"), Scalar::Int(0));
}

#[test]
fn fuel_bounds_execution() {
    let err = trace("int f() { while (1) { } return 0; }").unwrap_err();
    assert_eq!(err.kind, TrapKind::FuelExhausted);
}

#[test]
fn free_then_use_traps() {
    let err = trace("int f() { int* p = new int[1]; p[0] = 1; free(p); return p[0]; }").unwrap_err();
    assert_eq!(err.kind, TrapKind::UseAfterFree);
}

#[test]
fn records_copy_field_by_field() {
    let src = "struct P { int x; long y; };
        long f() { struct P* a = new struct P[2]; a[0].x = 1; a->y = 2; a[1] = a[0]; return a[1].x + a[1].y; }";
    let t = trace(src).unwrap();
    assert_eq!(t.returned, Some(Scalar::Int(3)));
    assert_eq!(t.events.iter().filter(|e| e.field.as_deref() == Some("y")).count(), 4);
}

#[test]
fn builtins_copy_elements() {
    let src = "int f() { char* a = malloc(3); char* b = malloc(3);
        a[0] = 4; a[1] = 2; a[2] = 0; memcpy(b, a, 3); return atoi(b); }";
    assert_eq!(returned(src), Scalar::Int(0));
    let src = "int f() { char* a = malloc(3); a[0] = 52; a[1] = 50; a[2] = 0; return atoi(a); }";
    assert_eq!(returned(src), Scalar::Int(42));
}

#[test]
fn calls_without_bodies_trap() {
    let err = trace("int g(int x); int f() { return g(1); }").unwrap_err();
    assert_eq!(err.kind, TrapKind::UnknownFunction);
}

#[test]
fn reversed_schedule_reorders_iterations() {
    let src = "int* f() { int* a = new int[3]; for (int i = 0; i < 3; i++) { a[i] = i; } return a; }";
    let tu = parse("t.c", src).unwrap();
    let stride = Expr::int(1, SourceSpan::synthetic());
    let at = &tu.functions[0].body.as_ref().unwrap()[1].span;
    let schedule = LoopSchedule { line: at.line, column: at.column, induction: vec![("i".into(), stride)], order: IterationOrder::Reversed };
    let options = RunOptions { fuel: 1000, schedule: Some(schedule) };
    let plain = run(&tu, "f", &[], 1000).unwrap();
    let reversed = run_with(&tu, "f", &[], &options).unwrap();
    let writes = |t: &Trace| -> Vec<i64> {
        t.events.iter().filter(|e| e.kind == EventKind::Write).map(|e| e.offset).collect()
    };
    assert_eq!(writes(&plain), [0, 1, 2]);
    assert_eq!(writes(&reversed), [2, 1, 0]);
    assert!(!trace_equal(&plain, &reversed, CompareMode::Strict));
    assert_eq!(plain.final_state, reversed.final_state);
}

#[test]
fn value_level_ignores_container_numbering() {
    let a = trace("int f() { int* x = new int[1]; int* y = new int[1]; y[0] = 3; return y[0]; }").unwrap();
    let b = trace("int f() { int* y = new int[1]; int* x = new int[1]; y[0] = 3; return y[0]; }").unwrap();
    assert!(!trace_equal(&a, &b, CompareMode::Strict));
    assert!(trace_equal(&a, &b, CompareMode::ValueLevel));
}

#[test]
fn generated_programs_run_cleanly() {
    for seed in 0..200 {
        let tu = generate_program(seed, 24);
        if let Err(t) = run(&tu, GENERATED_ENTRY, &[], 1_000_000) {
            panic!("seed {seed}: {t}\n{}", crate::cast::print(&tu));
        }
    }
}
