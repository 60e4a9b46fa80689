use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use adjunct_core::adjunct::{fresh_name, normalize_derefs, transform};
use adjunct_core::cast::{parse, print, structural_equal, TranslationUnit};
use adjunct_core::depend::{analyze, permutation_check, LoopVerdict};
use adjunct_core::effects::EffectDatabase;
use adjunct_core::interp::{generate_program, run, trace_equal, CompareMode, GENERATED_ENTRY};
use adjunct_core::scan::scan;
use proptest::prelude::*;
use proptest::sample::subsequence;

const FUEL: u64 = 2_000_000;

fn fixture(rel: &str) -> TranslationUnit {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel);
    let src = std::fs::read_to_string(&path).unwrap();
    parse(rel, &src).unwrap()
}

const DEPEND_FIXTURES: [&str; 6] = [
    "depend/pbkdf2.c",
    "depend/memcpy_left.c",
    "depend/memcpy_right.c",
    "depend/hmac.c",
    "depend/same_cell.c",
    "depend/matvec.c",
];

fn verdicts(tu: &TranslationUnit, db: &EffectDatabase) -> Vec<(String, LoopVerdict)> {
    analyze(tu, db).loops.into_iter().map(|l| (l.function, l.verdict)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn print_parse_round_trips(seed in any::<u64>(), size in 4usize..40) {
        let tu = generate_program(seed, size);
        let printed = print(&tu);
        let again = parse("again.c", &printed).unwrap();
        prop_assert!(structural_equal(&tu, &again));
        prop_assert_eq!(print(&again), printed);
    }

    #[test]
    fn transform_preserves_strict_trace(seed in any::<u64>(), size in 4usize..40) {
        let tu = generate_program(seed, size);
        let out = transform(&tu, &EffectDatabase::builtin()).unwrap().tu;
        let a = run(&tu, GENERATED_ENTRY, &[], FUEL).unwrap();
        let b = run(&out, GENERATED_ENTRY, &[], FUEL).unwrap();
        prop_assert!(trace_equal(&a, &b, CompareMode::Strict));
    }

    #[test]
    fn normalize_is_idempotent(seed in any::<u64>()) {
        let once = normalize_derefs(generate_program(seed, 24));
        let twice = normalize_derefs(once.clone());
        prop_assert_eq!(print(&once), print(&twice));
    }

    #[test]
    fn fresh_name_avoids_taken(base in "[a-z][a-z0-9_]{0,6}", extra in prop::collection::vec(0u8..6, 0..6)) {
        let mut taken: BTreeSet<String> = extra
            .iter()
            .map(|n| if *n == 0 { format!("{base}_adj") } else { format!("{base}_adj{n}") })
            .collect();
        let before = taken.clone();
        let name = fresh_name(&base, &mut taken);
        prop_assert!(!before.contains(&name));
        prop_assert!(taken.contains(&name));
        let stem = format!("{base}_adj");
        prop_assert!(name.starts_with(&stem));
        let second = fresh_name(&base, &mut taken);
        prop_assert_ne!(name, second);
    }

    #[test]
    fn scan_ignores_order(order in Just(corpus()).prop_shuffle()) {
        prop_assert_eq!(scan(&order), scan(&corpus()));
    }

    #[test]
    fn fewer_annotations_never_add_parallel_loops(
        which in 0usize..DEPEND_FIXTURES.len(),
        dropped in subsequence(EffectDatabase::builtin().functions().map(str::to_string).collect::<Vec<_>>(), 0..=4),
    ) {
        let full = EffectDatabase::builtin();
        let mut partial = full.clone();
        for f in &dropped {
            partial.remove(f);
        }
        let tu = fixture(DEPEND_FIXTURES[which]);
        for ((_, with), (_, without)) in verdicts(&tu, &full).iter().zip(verdicts(&tu, &partial)) {
            if without == LoopVerdict::Parallel {
                prop_assert_eq!(*with, LoopVerdict::Parallel);
            }
        }
    }

    #[test]
    fn generated_parallel_loops_survive_reordering(seed in any::<u64>()) {
        let db = EffectDatabase::builtin();
        let tu = generate_program(seed, 24);
        let out = transform(&tu, &db).unwrap().tu;
        for t in [&tu, &out] {
            for l in analyze(t, &db).loops.iter().filter(|l| l.verdict == LoopVerdict::Parallel) {
                let checked = permutation_check(t, GENERATED_ENTRY, &l.span, &[vec![]], FUEL);
                prop_assert!(checked.is_ok(), "{:?}", checked);
            }
        }
    }

    #[test]
    fn transform_never_loses_parallel_loops(seed in any::<u64>()) {
        let db = EffectDatabase::builtin();
        let tu = generate_program(seed, 24);
        let out = transform(&tu, &db).unwrap().tu;
        let (before, after) = (verdicts(&tu, &db), verdicts(&out, &db));
        prop_assert_eq!(before.len(), after.len());
        for (b, a) in before.iter().zip(&after) {
            if b.1 == LoopVerdict::Parallel {
                prop_assert_eq!(a.1, LoopVerdict::Parallel);
            }
        }
    }
}

fn corpus() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scan/corpus");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths
}

#[test]
fn transform_never_loses_parallel_loops_on_fixtures() {
    let db = EffectDatabase::builtin();
    for rel in DEPEND_FIXTURES {
        let tu = fixture(rel);
        let out = transform(&tu, &db).unwrap().tu;
        let (before, after) = (verdicts(&tu, &db), verdicts(&out, &db));
        assert_eq!(before.len(), after.len(), "{rel}");
        for (b, a) in before.iter().zip(&after) {
            if b.1 == LoopVerdict::Parallel {
                assert_eq!(a.1, LoopVerdict::Parallel, "{rel}");
            }
        }
    }
}
