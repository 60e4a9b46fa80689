//! Pointer disaggregation: every statically decidable pointer `p` is split
//! into its container handle `p` and a signed `long` adjunct `p_adj` that
//! absorbs all pointer movement.

mod analysis;
mod rename;
mod rewrite;

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::cast::{self, Expr, ExprKind, SourceSpan, TranslationUnit};
use crate::effects::EffectDatabase;

pub(crate) use analysis::{analyze_function, delegation_params};
pub(crate) use rename::{display_name, for_each_expr_mut, uniquify};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Decidable,
    ConditionalReassignment,
    AddressTakenEscape,
    HigherOrderIterated,
    UnsupportedArithmetic,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Decidable => "decidable",
            Verdict::ConditionalReassignment => "conditional-reassignment",
            Verdict::AddressTakenEscape => "address-taken-escape",
            Verdict::HigherOrderIterated => "higher-order-iterated",
            Verdict::UnsupportedArithmetic => "unsupported-arithmetic",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Verdict for one pointer variable (parameter or local) of one function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PointerClass {
    pub function: String,
    pub variable: String,
    pub verdict: Verdict,
    /// Declaration span for decidable pointers, offending sites otherwise.
    pub evidence: Vec<SourceSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdjunctEntry {
    pub function: String,
    pub pointer: String,
    pub adjunct: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AdjunctPlan {
    /// One entry per decidable pointer, in declaration order.
    pub mapping: Vec<AdjunctEntry>,
    pub adjunct_type: &'static str,
    pub classes: Vec<PointerClass>,
}

impl AdjunctPlan {
    pub fn adjunct_of(&self, function: &str, pointer: &str) -> Option<&str> {
        self.mapping
            .iter()
            .find(|e| e.function == function && e.pointer == pointer)
            .map(|e| e.adjunct.as_str())
    }

    pub fn class_of(&self, function: &str, pointer: &str) -> Option<&PointerClass> {
        self.classes.iter().find(|c| c.function == function && c.variable == pointer)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BackOff {
    pub function: String,
    pub pointer: String,
    pub verdict: Verdict,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SiteCounts {
    pub deref: usize,
    pub subscript: usize,
    #[serde(rename = "move")]
    pub moves: usize,
    pub pointer_assign: usize,
    pub call_site: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TransformDiagnostics {
    pub backed_off: Vec<BackOff>,
    pub rewritten_sites: SiteCounts,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("no fresh adjunct name available for `{0}`")]
    NameExhausted(String),
    #[error("internal error: transformed program does not type-check: {0}")]
    IllTyped(String),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Clone)]
pub struct TransformOutput {
    pub tu: TranslationUnit,
    pub plan: AdjunctPlan,
    pub diagnostics: TransformDiagnostics,
}

/// `base_adj`, or `base_adjN` with the smallest N ≥ 1 not in `taken`.
/// The result is inserted into `taken`.
pub fn fresh_name(base: &str, taken: &mut BTreeSet<String>) -> String {
    let stem = format!("{base}_adj");
    let name = if !taken.contains(&stem) {
        stem
    } else {
        (1u64..)
            .map(|n| format!("{stem}{n}"))
            .find(|candidate| !taken.contains(candidate))
            .expect("counter space is unbounded")
    };
    taken.insert(name.clone());
    name
}

/// Rewrites every `*e` into `e[0]`.
pub fn normalize_derefs(mut tu: TranslationUnit) -> TranslationUnit {
    for f in &mut tu.functions {
        for s in f.body.iter_mut().flatten() {
            normalize_stmt(s);
        }
    }
    tu
}

fn normalize_expr(e: &mut Expr) {
    e.walk_mut(&mut |node| {
        if let ExprKind::Deref(inner) = &mut node.kind {
            let inner = std::mem::replace(inner.as_mut(), Expr::int(0, node.span.clone()));
            let zero = Expr::int(0, node.span.clone());
            node.kind = ExprKind::Index { base: Box::new(inner), index: Box::new(zero) };
        }
    });
}

pub(crate) fn normalize_stmt(s: &mut cast::Stmt) {
    use cast::StmtKind::*;
    match &mut s.kind {
        Decl { init, .. } => init.iter_mut().for_each(normalize_expr),
        Assign { lhs, rhs, .. } => {
            normalize_expr(lhs);
            normalize_expr(rhs);
        }
        Expr(e) | IncDec { target: e, .. } => normalize_expr(e),
        For { init, cond, step, body } => {
            init.iter_mut().for_each(|s| normalize_stmt(s));
            cond.iter_mut().for_each(normalize_expr);
            step.iter_mut().for_each(|s| normalize_stmt(s));
            body.iter_mut().for_each(normalize_stmt);
        }
        While { cond, body } => {
            normalize_expr(cond);
            body.iter_mut().for_each(normalize_stmt);
        }
        If { cond, then_body, else_body } => {
            normalize_expr(cond);
            then_body.iter_mut().chain(else_body.iter_mut()).for_each(normalize_stmt);
        }
        Return(e) => e.iter_mut().for_each(normalize_expr),
        Block(body) => body.iter_mut().for_each(normalize_stmt),
    }
}

/// Classifies every pointer parameter and local of every function.
pub fn classify(tu: &TranslationUnit, effects: &EffectDatabase) -> Vec<PointerClass> {
    let tu = normalize_derefs(tu.clone());
    let delegation = delegation_params(&tu, effects);
    let mut out = Vec::new();
    for f in &tu.functions {
        if f.body.is_none() {
            continue;
        }
        let (f, _) = uniquify(f);
        let analysis = analyze_function(&f, &delegation);
        out.extend(analysis.classes(&f.name));
    }
    out
}

/// Applies the adjunct transformation to every function of `tu`.
pub fn transform(tu: &TranslationUnit, effects: &EffectDatabase) -> Result<TransformOutput, TransformError> {
    rewrite::transform_unit(tu, effects)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cast::{parse, print};

    #[test]
    fn fresh_name_counts_up() {
        let mut taken = BTreeSet::new();
        assert_eq!(fresh_name("p", &mut taken), "p_adj");
        assert_eq!(fresh_name("p", &mut taken), "p_adj1");
        assert_eq!(fresh_name("p", &mut taken), "p_adj2");
        let mut taken: BTreeSet<String> = ["p_adj".to_string()].into();
        assert_eq!(fresh_name("p", &mut taken), "p_adj1");
        assert!(taken.contains("p_adj1"));
    }

    #[test]
    fn derefs_become_subscripts() {
        let tu = parse("t.c", "void f(int* p, int** q, int i) { *p = 1; int x = *(p); int y = (*q)[i]; }").unwrap();
        let out = print(&normalize_derefs(tu));
        assert!(out.contains("p[0] = 1;"), "{out}");
        assert!(out.contains("int x = p[0];"), "{out}");
        assert!(out.contains("int y = q[0][i];"), "{out}");
    }

    fn verdicts(src: &str) -> Vec<(String, Verdict)> {
        let tu = parse("t.c", src).unwrap();
        classify(&tu, &EffectDatabase::builtin()).into_iter().map(|c| (c.variable, c.verdict)).collect()
    }

    #[test]
    fn straight_line_rebinding_is_decidable() {
        let v = verdicts("void f(int i) { int a[8]; int b[8]; int* p; p = a; p[i] = 5; p = b; p[i] = 2; }");
        assert_eq!(v, vec![("p".into(), Verdict::Decidable)]);
    }

    #[test]
    fn branch_rebinding_is_conditional() {
        let v = verdicts(
            "void f(int c, int i) { int a[8]; int b[8]; int* p; if (c) { p = a; } else { p = b; } p[i] = 5; }",
        );
        assert_eq!(v, vec![("p".into(), Verdict::ConditionalReassignment)]);
    }

    #[test]
    fn pointee_binding_keeps_both_decidable() {
        let v = verdicts("void f(int i) { int* a = new int[10]; int** p = &a; int x = (*p)[i]; a++; int y = (*p)[i]; }");
        assert_eq!(v, vec![("a".into(), Verdict::Decidable), ("p".into(), Verdict::Decidable)]);
    }

    #[test]
    fn escapes_and_iterated_double_pointers() {
        let v = verdicts("void g(int** q); void f() { int* a = new int[4]; g(&a); }");
        assert_eq!(v, vec![("a".into(), Verdict::AddressTakenEscape)]);
        let v = verdicts("void f(int c, int i) { int** p = new int*[2]; if (c) { p++; } int x = (*p)[i]; }");
        assert_eq!(v, vec![("p".into(), Verdict::HigherOrderIterated)]);
    }
}
