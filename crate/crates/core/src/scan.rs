//! Applicability statistics: lines of code, single-pointer candidates and
//! higher-order pointers that iterate, with the allocation-handoff and
//! `argv` exemptions.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Serialize;

use crate::adjunct::{delegation_params, normalize_derefs};
use crate::cast::{parse, AssignOp, BinaryOp, CType, Expr, ExprKind, Function, StmtKind, TranslationUnit};
use crate::effects::EffectDatabase;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct Exemptions {
    pub allocation_delegation: usize,
    pub argv: usize,
}

impl Exemptions {
    fn add(&mut self, o: &Exemptions) {
        self.allocation_delegation += o.allocation_delegation;
        self.argv += o.argv;
    }
}

/// Counts for one file. Every pointer variable lands in exactly one of
/// `applicable`, `non_applicable` or `exemptions`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct FileCounts {
    pub path: String,
    pub loc: usize,
    pub applicable: usize,
    pub non_applicable: usize,
    pub exemptions: Exemptions,
    /// Parse or type error; such files contribute only their line count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct Totals {
    pub files: usize,
    pub loc: usize,
    pub applicable: usize,
    pub non_applicable: usize,
    pub exemptions: Exemptions,
    pub unparsed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Skipped {
    pub path: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ApplicabilityReport {
    pub files: Vec<FileCounts>,
    pub total: Totals,
    pub skipped: Vec<Skipped>,
}

impl ApplicabilityReport {
    /// Merges per-file results; the order of `files` does not matter.
    pub fn from_parts(mut files: Vec<FileCounts>, mut skipped: Vec<Skipped>) -> Self {
        files.sort_by(|a, b| a.path.cmp(&b.path));
        skipped.sort_by(|a, b| a.path.cmp(&b.path));
        let mut total = Totals::default();
        for f in &files {
            total.files += 1;
            total.loc += f.loc;
            total.applicable += f.applicable;
            total.non_applicable += f.non_applicable;
            total.exemptions.add(&f.exemptions);
            total.unparsed += usize::from(f.error.is_some());
        }
        ApplicabilityReport { files, total, skipped }
    }
}

/// Scans each file independently; unreadable files are reported as skipped.
pub fn scan(paths: &[impl AsRef<Path>]) -> ApplicabilityReport {
    let mut files = Vec::new();
    let mut skipped = Vec::new();
    for p in paths {
        match scan_file(p.as_ref()) {
            Ok(c) => files.push(c),
            Err(s) => skipped.push(s),
        }
    }
    ApplicabilityReport::from_parts(files, skipped)
}

pub fn scan_file(path: &Path) -> Result<FileCounts, Skipped> {
    let shown = path.display().to_string();
    let src = std::fs::read_to_string(path).map_err(|e| Skipped { path: shown.clone(), error: e.to_string() })?;
    Ok(scan_source(&shown, &src))
}

pub fn scan_source(path: &str, src: &str) -> FileCounts {
    let mut counts = FileCounts { path: path.to_string(), loc: count_loc(src), ..Default::default() };
    match parse(path, src) {
        Ok(tu) => classify_pointers(&normalize_derefs(tu), &mut counts),
        Err(e) => counts.error = Some(e.to_string()),
    }
    counts
}

/// Non-blank lines that hold something besides comments.
pub fn count_loc(src: &str) -> usize {
    let mut in_block = false;
    let mut loc = 0;
    for line in src.lines() {
        let mut code = false;
        let mut rest = line;
        loop {
            if in_block {
                match rest.find("*/") {
                    Some(i) => {
                        in_block = false;
                        rest = &rest[i + 2..];
                    }
                    None => break,
                }
            }
            let t = rest.trim_start();
            if t.is_empty() || t.starts_with("//") {
                break;
            }
            if let Some(body) = t.strip_prefix("/*") {
                in_block = true;
                rest = body;
                continue;
            }
            code = true;
            match t.find("/*") {
                Some(i) if !t[..i].contains("//") => {
                    in_block = true;
                    rest = &t[i + 2..];
                }
                _ => break,
            }
        }
        loc += usize::from(code);
    }
    loc
}

fn classify_pointers(tu: &TranslationUnit, counts: &mut FileCounts) {
    let delegation = delegation_params(tu, &EffectDatabase::builtin());
    for f in &tu.functions {
        let iterated = iterated_vars(f);
        for (k, p) in f.params.iter().enumerate() {
            if p.ty.order() == 0 {
                continue;
            }
            if f.name == "main" && k == 1 && p.ty.order() == 2 {
                counts.exemptions.argv += 1;
            } else if p.ty.order() >= 2 && delegation.is_delegation(&f.name, k) {
                counts.exemptions.allocation_delegation += 1;
            } else {
                count_var(&p.ty, iterated.contains(&p.name), counts);
            }
        }
        for s in f.body.iter().flatten() {
            s.walk(&mut |s| {
                if let StmtKind::Decl { name, ty, .. } = &s.kind {
                    if ty.order() > 0 {
                        count_var(ty, iterated.contains(name), counts);
                    }
                }
            });
        }
    }
}

fn count_var(ty: &CType, iterated: bool, counts: &mut FileCounts) {
    if ty.order() >= 2 && iterated {
        counts.non_applicable += 1;
    } else {
        counts.applicable += 1;
    }
}

/// Variables of pointer order two or more that are moved, offset or
/// indexed at a non-zero position.
fn iterated_vars(f: &Function) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let higher = |e: &Expr| e.ty.order() >= 2;
    let note = |e: &Expr, out: &mut BTreeSet<String>| {
        if let Some(v) = e.as_ident().filter(|_| higher(e)) {
            out.insert(v.to_string());
        }
    };
    for s in f.body.iter().flatten() {
        s.walk(&mut |s| match &s.kind {
            StmtKind::IncDec { target, .. } => note(target, &mut out),
            StmtKind::Assign { lhs, op, rhs } => {
                if *op != AssignOp::Set {
                    note(lhs, &mut out);
                } else if let ExprKind::Binary { op: BinaryOp::Add | BinaryOp::Sub, lhs: a, .. } = &rhs.kind {
                    if a.as_ident().is_some() && a.as_ident() == lhs.as_ident() {
                        note(lhs, &mut out);
                    }
                }
            }
            _ => {}
        });
        s.walk_exprs(&mut |e| match &e.kind {
            ExprKind::IncDec { target, .. } => note(target, &mut out),
            ExprKind::Binary { op: BinaryOp::Add | BinaryOp::Sub, lhs, rhs } => {
                note(lhs, &mut out);
                note(rhs, &mut out);
            }
            ExprKind::Index { base, index } if !index.is_zero() => note(base, &mut out),
            _ => {}
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const HANDOFF: &str = "void init_pointer(char** p, int n) {\n  *p = malloc(n);\n  memset(*p, 0, n);\n}\n\nint main(int argc, char** argv) {\n  char* buf;\n  init_pointer(&buf, atoi(argv[1]));\n\n  return 0;\n}\n";

    #[test]
    fn handoff_is_exempt() {
        let c = scan_source("handoff.c", HANDOFF);
        assert_eq!(c.error, None);
        assert_eq!(c.non_applicable, 0);
        assert_eq!(c.exemptions, Exemptions { allocation_delegation: 1, argv: 1 });
        assert_eq!(c.applicable, 1);
        assert_eq!(c.loc, 9);
    }

    #[test]
    fn iterated_double_pointer_is_not_applicable() {
        let src = "void f(int i) {\n  int* a = new int[10];\n  int* b = new int[10];\n  int** p = new int*[2];\n  p[0] = a;\n  p[1] = b;\n  if (i > 0) {\n    p++;\n  }\n  int x = (*p)[i];\n}\n";
        let c = scan_source("aop.c", src);
        assert_eq!(c.error, None);
        assert_eq!((c.applicable, c.non_applicable), (2, 1));
    }

    #[test]
    fn comments_and_blanks_are_not_code() {
        let src = "// head\n\n/* a\n b */ int x;\nint y; /* tail\n*/\n  /* only */  \nint z; // trailing\n";
        assert_eq!(count_loc(src), 3);
    }

    #[test]
    fn unparsable_files_keep_their_line_count() {
        let c = scan_source("bad.c", "int f( {\n}\n");
        assert!(c.error.is_some());
        assert_eq!(c.loc, 2);
    }
}
