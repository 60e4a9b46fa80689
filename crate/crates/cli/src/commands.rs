use std::fs;
use std::path::{Path, PathBuf};

use adjunct_core::adjunct::{transform as adjunct_transform, AdjunctPlan, TransformDiagnostics, TransformError};
use adjunct_core::cast::{parse, print, TranslationUnit};
use adjunct_core::depend::{analyze as depend_analyze, LoopReport};
use adjunct_core::effects::EffectDatabase;
use adjunct_core::interp::{first_divergence, generate_program, run, CompareMode, Divergence, Scalar, Trace, Trap, Value};
use adjunct_core::patterns::{rewrite_all_lil, LilSummary, PatternError};
use adjunct_core::scan::{scan_file, ApplicabilityReport};
use rayon::prelude::*;
use serde::Serialize;

use crate::{note, AnalyzeArgs, Failure, GenerateArgs, Mode, RunDiffArgs, ScanArgs, TransformArgs};

fn effects(choice: &str) -> Result<EffectDatabase, Failure> {
    match choice {
        "builtin" => Ok(EffectDatabase::builtin()),
        "none" => Ok(EffectDatabase::empty()),
        path => EffectDatabase::load(Path::new(path)).map_err(|e| Failure::Input(e.to_string())),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<TranslationUnit, Failure> {
    let src = read(path)?;
    parse(&path.display().to_string(), &src).map_err(|e| Failure::Input(e.to_string()))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(report: &T, dest: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Failure::Internal(e.to_string()))? + "\n";
    match dest {
        Some(p) => write(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn from_transform(e: TransformError) -> Failure {
    Failure::Internal(e.to_string())
}

fn from_pattern(e: PatternError) -> Failure {
    Failure::Internal(e.to_string())
}

/// Runs `work` over every input concurrently, keeping input order, and
/// merges failures into one carrying the most severe exit code.
fn per_input<T: Send>(inputs: &[PathBuf], work: impl Fn(&Path) -> Result<T, Failure> + Sync) -> Result<Vec<T>, Failure> {
    let results: Vec<Result<T, Failure>> = inputs.par_iter().map(|p| work(p)).collect();
    let mut ok = Vec::new();
    let mut worst: Option<Failure> = None;
    let mut messages = Vec::new();
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(f) => {
                messages.push(f.message().to_string());
                if worst.as_ref().is_none_or(|w| f.code() > w.code()) {
                    worst = Some(f);
                }
            }
        }
    }
    match worst {
        None => Ok(ok),
        Some(Failure::Input(_)) => Err(Failure::Input(messages.join("\n"))),
        Some(Failure::Internal(_)) => Err(Failure::Internal(messages.join("\n"))),
        Some(Failure::Mismatch(_)) => Err(Failure::Mismatch(messages.join("\n"))),
    }
}

fn sorted(mut inputs: Vec<PathBuf>) -> Vec<PathBuf> {
    inputs.sort();
    inputs.dedup();
    inputs
}

#[derive(Serialize)]
struct TransformedFile {
    input: String,
    output: String,
    lil_matches: Vec<LilSummary>,
    plan: AdjunctPlan,
    diagnostics: TransformDiagnostics,
}

#[derive(Serialize)]
struct TransformReport {
    files: Vec<TransformedFile>,
}

/// `dir/name.c` becomes `dir/name.adjunct.c`.
fn default_output(input: &Path) -> PathBuf {
    let stem = input.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
    input.with_file_name(format!("{stem}.adjunct.c"))
}

pub fn transform(a: TransformArgs) -> Result<(), Failure> {
    if a.out.is_some() && a.inputs.len() != 1 {
        return Err(Failure::Input("--out requires exactly one input".into()));
    }
    let db = effects(&a.effects.effects)?;
    let inputs = sorted(a.inputs);
    let files = per_input(&inputs, |input| {
        let mut tu = load(input)?;
        let mut lil_matches = Vec::new();
        if a.enable_lil {
            (tu, lil_matches) = rewrite_all_lil(&tu).map_err(from_pattern)?;
        }
        let out = adjunct_transform(&tu, &db).map_err(from_transform)?;
        let dest = a.out.clone().unwrap_or_else(|| default_output(input));
        write(&dest, &print(&out.tu))?;
        Ok(TransformedFile {
            input: input.display().to_string(),
            output: dest.display().to_string(),
            lil_matches,
            plan: out.plan,
            diagnostics: out.diagnostics,
        })
    })?;
    for f in &files {
        let s = &f.diagnostics.rewritten_sites;
        note(
            "transform",
            &format!(
                "{} -> {}: {} adjuncts, {} backed off, {} sites rewritten",
                f.input,
                f.output,
                f.plan.mapping.len(),
                f.diagnostics.backed_off.len(),
                s.deref + s.subscript + s.moves + s.pointer_assign + s.call_site
            ),
        );
    }
    emit(&TransformReport { files }, a.report.as_deref())
}

#[derive(Serialize)]
struct AnalyzedFile {
    input: String,
    transformed: bool,
    lil_matches: Vec<LilSummary>,
    loops: Vec<LoopReport>,
}

#[derive(Serialize)]
struct AnalyzeReport {
    files: Vec<AnalyzedFile>,
}

pub fn analyze(a: AnalyzeArgs) -> Result<(), Failure> {
    let db = effects(&a.effects.effects)?;
    let inputs = sorted(a.inputs);
    let files = per_input(&inputs, |input| {
        let mut tu = load(input)?;
        let mut lil_matches = Vec::new();
        if a.enable_lil {
            (tu, lil_matches) = rewrite_all_lil(&tu).map_err(from_pattern)?;
        }
        if a.pre_transform {
            tu = adjunct_transform(&tu, &db).map_err(from_transform)?.tu;
        }
        Ok(AnalyzedFile {
            input: input.display().to_string(),
            transformed: a.pre_transform,
            lil_matches,
            loops: depend_analyze(&tu, &db).loops,
        })
    })?;
    for f in &files {
        for l in &f.loops {
            note("analyze", &format!("{}:{} in `{}`: {}", f.input, l.span.line, l.function, l.verdict.as_str()));
        }
    }
    emit(&AnalyzeReport { files }, a.report.as_deref())
}

fn is_source(p: &Path) -> bool {
    matches!(p.extension().and_then(|e| e.to_str()), Some("c" | "h"))
}

/// Expands directories into the C sources below them.
fn expand(paths: &[PathBuf]) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            // Unreadable entries surface later as skipped files.
            for entry in walkdir::WalkDir::new(p).sort_by_file_name() {
                match entry {
                    Ok(e) if e.file_type().is_file() && is_source(e.path()) => out.push(e.into_path()),
                    Ok(_) => {}
                    Err(e) => out.push(e.path().map(Path::to_path_buf).unwrap_or_else(|| p.clone())),
                }
            }
        } else {
            out.push(p.clone());
        }
    }
    sorted(out)
}

pub fn scan(a: ScanArgs) -> Result<(), Failure> {
    let paths = expand(&a.paths);
    let (files, skipped): (Vec<_>, Vec<_>) = paths.par_iter().map(|p| scan_file(p)).partition(Result::is_ok);
    let report = ApplicabilityReport::from_parts(
        files.into_iter().filter_map(Result::ok).collect(),
        skipped.into_iter().filter_map(Result::err).collect(),
    );
    for s in &report.skipped {
        note("skipped", &format!("{}: {}", s.path, s.error));
    }
    for f in report.files.iter().filter(|f| f.error.is_some()) {
        note("unparsed", &format!("{}: {}", f.path, f.error.as_deref().unwrap_or_default()));
    }
    let t = &report.total;
    note(
        "scan",
        &format!(
            "{} files, {} LoC, {} applicable, {} non-applicable, {} exempt",
            t.files,
            t.loc,
            t.applicable,
            t.non_applicable,
            t.exemptions.allocation_delegation + t.exemptions.argv
        ),
    );
    emit(&report, a.json.as_deref())
}

fn parse_input(text: &str) -> Result<Value, Failure> {
    if let Ok(v) = text.parse::<i64>() {
        return Ok(Value::Int(v));
    }
    text.parse::<f64>()
        .map(Value::Float)
        .map_err(|_| Failure::Input(format!("input `{text}` is not a number")))
}

#[derive(Serialize)]
struct TrapReport {
    kind: String,
    message: String,
    span: String,
    events: usize,
}

#[derive(Serialize)]
struct Side {
    path: String,
    events: usize,
    returned: Option<Scalar>,
    trap: Option<TrapReport>,
}

#[derive(Serialize)]
struct RunDiffReport {
    equal: bool,
    mode: &'static str,
    left: Side,
    right: Side,
    divergence: Option<Divergence>,
}

fn side(path: &Path, outcome: &Result<Trace, Trap>) -> Side {
    match outcome {
        Ok(t) => Side { path: path.display().to_string(), events: t.events.len(), returned: t.returned, trap: None },
        Err(t) => Side {
            path: path.display().to_string(),
            events: t.partial.len(),
            returned: None,
            trap: Some(TrapReport {
                kind: serde_json::to_value(t.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
                message: t.message.clone(),
                span: t.span.to_string(),
                events: t.partial.len(),
            }),
        },
    }
}

/// A trap is compared as the events before it plus the trap itself.
fn compare(a: &Result<Trace, Trap>, b: &Result<Trace, Trap>, mode: CompareMode) -> Option<Divergence> {
    let partial = |t: &Trap| Trace { events: t.partial.clone(), ..Trace::default() };
    match (a, b) {
        (Ok(x), Ok(y)) => first_divergence(x, y, mode),
        (Err(x), Err(y)) => {
            let d = first_divergence(&partial(x), &partial(y), mode);
            if d.is_none() && x.kind != y.kind {
                return Some(Divergence { index: x.partial.len(), left: None, right: None, reason: "traps differ".into() });
            }
            d
        }
        (Err(x), Ok(y)) | (Ok(y), Err(x)) => {
            let d = first_divergence(&partial(x), &Trace { events: y.events.clone(), ..Trace::default() }, mode);
            Some(d.unwrap_or(Divergence {
                index: x.partial.len(),
                left: None,
                right: None,
                reason: "only one program traps".into(),
            }))
        }
    }
}

pub fn run_diff(a: RunDiffArgs) -> Result<(), Failure> {
    let inputs = a.inputs.iter().map(|t| parse_input(t)).collect::<Result<Vec<_>, _>>()?;
    let (left, right) = (load(&a.left)?, load(&a.right)?);
    for (tu, path) in [(&left, &a.left), (&right, &a.right)] {
        if !tu.functions.iter().any(|f| f.name == a.entry && f.body.is_some()) {
            return Err(Failure::Input(format!("{}: no function `{}` with a body", path.display(), a.entry)));
        }
    }
    let (mode, mode_name) = match a.mode {
        Mode::Strict => (CompareMode::Strict, "strict"),
        Mode::Value => (CompareMode::ValueLevel, "value"),
    };
    let (l, r) = rayon::join(|| run(&left, &a.entry, &inputs, a.fuel), || run(&right, &a.entry, &inputs, a.fuel));
    let divergence = compare(&l, &r, mode);
    for (path, outcome) in [(&a.left, &l), (&a.right, &r)] {
        if let Err(t) = outcome {
            note("trap", &format!("{}: {t}", path.display()));
        }
    }
    let report = RunDiffReport {
        equal: divergence.is_none(),
        mode: mode_name,
        left: side(&a.left, &l),
        right: side(&a.right, &r),
        divergence: divergence.clone(),
    };
    emit(&report, a.report.as_deref())?;
    match divergence {
        None => {
            note("run-diff", "traces are equal");
            Ok(())
        }
        Some(d) => {
            let show = |e: &Option<adjunct_core::interp::TraceEvent>| e.as_ref().map_or("(none)".to_string(), |e| e.to_string());
            Err(Failure::Mismatch(format!(
                "traces diverge at event {}: {}\n  left:  {}\n  right: {}",
                d.index,
                d.reason,
                show(&d.left),
                show(&d.right)
            )))
        }
    }
}

pub fn generate(a: GenerateArgs) -> Result<(), Failure> {
    let text = print(&generate_program(a.seed, a.size));
    match &a.out {
        Some(p) => write(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
