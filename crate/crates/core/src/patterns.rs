//! Restructuring of list-of-lists (LIL) initialization. A contiguous value
//! buffer walked by a cursor, with each row's start recorded in a record
//! member, becomes one allocation per row plus a row adjunct.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::adjunct::fresh_name;
use crate::cast::{
    self, print_expr, AllocStyle, AssignOp, BinaryOp, CType, Expr, ExprKind, Function, SourceSpan, Stmt, StmtKind,
    TranslationUnit,
};

/// One recognized LIL initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct LilMatch {
    pub function: String,
    /// Span of the row loop.
    pub scope: SourceSpan,
    pub cursors: Vec<String>,
    /// `(member lvalue, cursor)` for each `lvalue = cursor;` in the row loop.
    pub row_bindings: Vec<(Expr, String)>,
    pub row_length: Expr,
    pub buffer_decls: Vec<Stmt>,
}

/// Printable form of a match for reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LilSummary {
    pub function: String,
    pub scope: SourceSpan,
    pub cursors: Vec<String>,
    pub row_bindings: Vec<(String, String)>,
    pub row_length: String,
}

impl LilMatch {
    pub fn summary(&self) -> LilSummary {
        LilSummary {
            function: self.function.clone(),
            scope: self.scope.clone(),
            cursors: self.cursors.clone(),
            row_bindings: self.row_bindings.iter().map(|(lv, c)| (print_expr(lv), c.clone())).collect(),
            row_length: print_expr(&self.row_length),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PatternError {
    #[error("match no longer applies to this unit: {0}")]
    Stale(String),
    #[error("internal error: rewritten program does not type-check: {0}")]
    IllTyped(String),
}

/// Finds every LIL initialization in `tu`.
pub fn find_lil(tu: &TranslationUnit) -> Vec<LilMatch> {
    let mut out = Vec::new();
    for f in &tu.functions {
        if let Some(body) = &f.body {
            visit_lists(body, &mut |list| out.extend(matches_in_list(f, list)));
        }
    }
    out
}

/// Rewrites every LIL initialization in `tu`, returning the matches applied.
pub fn rewrite_all_lil(tu: &TranslationUnit) -> Result<(TranslationUnit, Vec<LilSummary>), PatternError> {
    let mut out = tu.clone();
    let mut applied = Vec::new();
    while let Some(m) = find_lil(&out).into_iter().next() {
        if applied.len() > tu.functions.len() * 64 {
            return Err(PatternError::Stale(format!("rewriting {} does not remove the pattern", m.scope)));
        }
        out = rewrite_lil(&out, &m)?;
        applied.push(m.summary());
    }
    Ok((out, applied))
}

/// Rewrites one match produced by [`find_lil`] on the same unit.
pub fn rewrite_lil(tu: &TranslationUnit, m: &LilMatch) -> Result<TranslationUnit, PatternError> {
    if !find_lil(tu).contains(m) {
        return Err(PatternError::Stale(format!("no LIL initialization at {}", m.scope)));
    }
    let mut taken = tu.identifiers();
    let mut out = tu.clone();
    let f = out
        .functions
        .iter_mut()
        .find(|f| f.name == m.function && f.body.is_some())
        .ok_or_else(|| PatternError::Stale(format!("no function `{}`", m.function)))?;
    let plan = RowPlan::new(m, &mut taken);
    let body = f.body.as_mut().expect("checked above");
    if !rewrite_lists(body, m, &plan) {
        return Err(PatternError::Stale(format!("row loop at {} not found", m.scope)));
    }
    cast::check(&mut out).map_err(|e| PatternError::IllTyped(e.to_string()))?;
    Ok(out)
}

fn visit_lists<'a>(list: &'a [Stmt], f: &mut dyn FnMut(&'a [Stmt])) {
    f(list);
    for s in list {
        match &s.kind {
            StmtKind::For { body, .. } | StmtKind::While { body, .. } | StmtKind::Block(body) => visit_lists(body, f),
            StmtKind::If { then_body, else_body, .. } => {
                visit_lists(then_body, f);
                visit_lists(else_body, f);
            }
            _ => {}
        }
    }
}

struct Buffer<'a> {
    decl: &'a Stmt,
    name: &'a str,
    factors: (&'a Expr, &'a Expr),
}

/// `T* name = <alloc of a * b>;`
fn buffer_decl(s: &Stmt) -> Option<Buffer<'_>> {
    let StmtKind::Decl { name, ty: CType::Pointer(_), init: Some(init) } = &s.kind else { return None };
    let ExprKind::Alloc { count, .. } = &init.kind else { return None };
    let ExprKind::Binary { op: BinaryOp::Mul, lhs, rhs } = &count.kind else { return None };
    Some(Buffer { decl: s, name, factors: (lhs, rhs) })
}

/// Upper bound `N` of a `for (v = ..; v < N; ..)` loop.
fn row_count(s: &Stmt) -> Option<&Expr> {
    let StmtKind::For { cond: Some(cond), .. } = &s.kind else { return None };
    match &cond.kind {
        ExprKind::Binary { op: BinaryOp::Lt, rhs, .. } => Some(rhs),
        ExprKind::Binary { op: BinaryOp::Gt, lhs, .. } => Some(lhs),
        _ => None,
    }
}

fn loop_body(s: &Stmt) -> &[Stmt] {
    match &s.kind {
        StmtKind::For { body, .. } | StmtKind::While { body, .. } => body,
        _ => &[],
    }
}

fn matches_in_list(f: &Function, list: &[Stmt]) -> Vec<LilMatch> {
    let mut out = Vec::new();
    for (j, row_loop) in list.iter().enumerate() {
        let Some(rows) = row_count(row_loop) else { continue };
        let body = loop_body(row_loop);
        let mut found: Vec<(Expr, &Buffer, Expr)> = Vec::new();
        let buffers: Vec<Buffer> = list[..j].iter().filter_map(buffer_decl).collect();
        for buf in &buffers {
            let row_length = if buf.factors.0 == rows {
                buf.factors.1
            } else if buf.factors.1 == rows {
                buf.factors.0
            } else {
                continue;
            };
            let Some(pos) = binding_position(body, buf.name) else { continue };
            let StmtKind::Assign { lhs, .. } = &body[pos].kind else { continue };
            if cursor_is_confined(f, body, pos, buf.name) && row_is_stable(body, pos, lhs, row_length) {
                found.push((lhs.clone(), buf, row_length.clone()));
            }
        }
        let mut lengths: Vec<Expr> = Vec::new();
        for (_, _, len) in &found {
            if !lengths.contains(len) {
                lengths.push(len.clone());
            }
        }
        for len in lengths {
            let group: Vec<&(Expr, &Buffer, Expr)> = found.iter().filter(|g| g.2 == len).collect();
            out.push(LilMatch {
                function: f.name.clone(),
                scope: row_loop.span.clone(),
                cursors: group.iter().map(|g| g.1.name.to_string()).collect(),
                row_bindings: group.iter().map(|g| (g.0.clone(), g.1.name.to_string())).collect(),
                row_length: len,
                buffer_decls: group.iter().map(|g| g.1.decl.clone()).collect(),
            });
        }
    }
    out
}

/// Index of the single top-level `lvalue = cursor;` in the row loop body.
fn binding_position(body: &[Stmt], cursor: &str) -> Option<usize> {
    let mut hits = body.iter().enumerate().filter(|(_, s)| match &s.kind {
        StmtKind::Assign { lhs, op: AssignOp::Set, rhs } => {
            rhs.as_ident() == Some(cursor)
                && matches!(lhs.kind, ExprKind::Index { .. } | ExprKind::Member { .. })
                && !lhs.mentions(&|n| n == cursor)
        }
        _ => false,
    });
    let (pos, _) = hits.next()?;
    hits.next().is_none().then_some(pos)
}

fn count_mentions(s: &Stmt, name: &str) -> usize {
    let mut n = 0;
    s.walk_exprs(&mut |e| {
        if e.as_ident() == Some(name) {
            n += 1;
        }
    });
    n
}

/// Occurrences of `cursor` in `s` that the rewrite knows how to replace.
fn sanctioned_uses(s: &Stmt, cursor: &str) -> usize {
    let is_cursor = |e: &Expr| e.as_ident() == Some(cursor);
    let mut n = 0;
    s.walk(&mut |st| match &st.kind {
        StmtKind::IncDec { target, .. } if is_cursor(target) => n += 1,
        StmtKind::Assign { lhs, op: AssignOp::Add | AssignOp::Sub, rhs }
            if is_cursor(lhs) && !rhs.mentions(&|v| v == cursor) =>
        {
            n += 1;
            n += access_uses(rhs, cursor);
        }
        _ => {
            for e in st.own_exprs() {
                n += access_uses(e, cursor);
            }
        }
    });
    n
}

fn access_uses(e: &Expr, cursor: &str) -> usize {
    let mut n = 0;
    e.walk(&mut |node| match &node.kind {
        ExprKind::Deref(inner) if inner.as_ident() == Some(cursor) => n += 1,
        ExprKind::Index { base, index } if base.as_ident() == Some(cursor) && !index.mentions(&|v| v == cursor) => {
            n += 1
        }
        _ => {}
    });
    n
}

/// The cursor is declared once, bound once, and afterwards only
/// dereferenced or advanced inside the row loop.
fn cursor_is_confined(f: &Function, body: &[Stmt], pos: usize, cursor: &str) -> bool {
    let all = f.body.iter().flatten();
    let declared = all
        .clone()
        .map(|s| {
            let mut n = 0;
            s.walk(&mut |st| {
                if matches!(&st.kind, StmtKind::Decl { name, .. } if name == cursor) {
                    n += 1;
                }
            });
            n
        })
        .sum::<usize>()
        + f.params.iter().filter(|p| p.name == cursor).count();
    if declared != 1 {
        return false;
    }
    let total: usize = all.map(|s| count_mentions(s, cursor)).sum();
    let allowed: usize = 1 + body[pos + 1..].iter().map(|s| sanctioned_uses(s, cursor)).sum::<usize>();
    let before: usize = body[..pos].iter().map(|s| count_mentions(s, cursor)).sum();
    before == 0 && total == allowed
}

fn written_names(s: &Stmt, out: &mut BTreeSet<String>) {
    fn root(e: &Expr) -> Option<&str> {
        match &e.kind {
            ExprKind::Ident(n) => Some(n),
            ExprKind::Index { base, .. } | ExprKind::Member { base, .. } | ExprKind::Deref(base) => root(base),
            _ => None,
        }
    }
    s.walk(&mut |st| match &st.kind {
        StmtKind::Decl { name, .. } => {
            out.insert(name.clone());
        }
        StmtKind::Assign { lhs, .. } | StmtKind::IncDec { target: lhs, .. } => {
            if let ExprKind::Ident(n) = &lhs.kind {
                out.insert(n.clone());
            }
            if let ExprKind::Member { field, .. } = &lhs.kind {
                out.insert(format!(".{field}"));
            }
            if let ExprKind::Index { base, .. } = &lhs.kind {
                if let ExprKind::Member { field, .. } = &base.kind {
                    out.insert(format!(".{field}"));
                }
            }
        }
        _ => {}
    });
    s.walk_exprs(&mut |e| match &e.kind {
        ExprKind::IncDec { target, .. } | ExprKind::AddrOf(target) => {
            if let Some(n) = root(target) {
                out.insert(n.to_string());
            }
        }
        _ => {}
    });
}

/// Nothing the rewritten accesses depend on changes after the binding.
fn row_is_stable(body: &[Stmt], pos: usize, lvalue: &Expr, row_length: &Expr) -> bool {
    let mut written = BTreeSet::new();
    for s in &body[pos + 1..] {
        written_names(s, &mut written);
    }
    let mut deps = BTreeSet::new();
    for e in [lvalue, row_length] {
        e.walk(&mut |node| match &node.kind {
            ExprKind::Ident(n) => {
                deps.insert(n.clone());
            }
            ExprKind::Member { field, .. } => {
                deps.insert(format!(".{field}"));
            }
            _ => {}
        });
    }
    deps.is_disjoint(&written)
}

struct RowPlan {
    /// cursor, member lvalue, adjunct name
    rows: Vec<(String, Expr, String)>,
    row_length: Expr,
    /// Element type and allocation style of each cursor's buffer.
    allocs: Vec<(String, CType, AllocStyle)>,
}

impl RowPlan {
    fn new(m: &LilMatch, taken: &mut BTreeSet<String>) -> RowPlan {
        let rows = m
            .row_bindings
            .iter()
            .map(|(lv, cursor)| {
                let stem = member_stem(lv).unwrap_or_else(|| cursor.clone());
                (cursor.clone(), lv.clone(), fresh_name(&stem, taken))
            })
            .collect();
        let allocs = m
            .buffer_decls
            .iter()
            .filter_map(|d| match &d.kind {
                StmtKind::Decl { name, init: Some(init), .. } => match &init.kind {
                    ExprKind::Alloc { elem, style, .. } => Some((name.clone(), elem.clone(), *style)),
                    _ => None,
                },
                _ => None,
            })
            .collect();
        RowPlan { rows, row_length: m.row_length.clone(), allocs }
    }

    fn row(&self, cursor: &str) -> Option<&(String, Expr, String)> {
        self.rows.iter().find(|r| r.0 == cursor)
    }
}

/// `A->ptr_to_vals[r]` yields `vals`.
fn member_stem(lv: &Expr) -> Option<String> {
    let mut e = lv;
    loop {
        match &e.kind {
            ExprKind::Index { base, .. } => e = base,
            ExprKind::Member { field, .. } => {
                let stem = field.strip_prefix("ptr_to_").unwrap_or(field);
                return Some(stem.to_string());
            }
            _ => return None,
        }
    }
}

fn rewrite_lists(list: &mut Vec<Stmt>, m: &LilMatch, plan: &RowPlan) -> bool {
    if let Some(j) = list.iter().position(|s| s.is_loop() && s.span == m.scope) {
        list.retain(|s| !m.buffer_decls.iter().any(|d| d == s && d.span == s.span));
        let j = list.iter().position(|s| s.is_loop() && s.span == m.scope).unwrap_or(j);
        if let StmtKind::For { body, .. } | StmtKind::While { body, .. } = &mut list[j].kind {
            rewrite_row_body(body, plan);
        }
        return true;
    }
    for s in list.iter_mut() {
        let done = match &mut s.kind {
            StmtKind::For { body, .. } | StmtKind::While { body, .. } | StmtKind::Block(body) => {
                rewrite_lists(body, m, plan)
            }
            StmtKind::If { then_body, else_body, .. } => {
                rewrite_lists(then_body, m, plan) || rewrite_lists(else_body, m, plan)
            }
            _ => false,
        };
        if done {
            return true;
        }
    }
    false
}

fn rewrite_row_body(body: &mut Vec<Stmt>, plan: &RowPlan) {
    let mut out = Vec::with_capacity(body.len() + plan.rows.len());
    for mut s in body.drain(..) {
        let binding = match &s.kind {
            StmtKind::Assign { op: AssignOp::Set, rhs, .. } => rhs.as_ident().and_then(|c| plan.row(c)),
            _ => None,
        };
        if let Some((cursor, _, adj)) = binding {
            let (_, elem, style) = plan.allocs.iter().find(|a| &a.0 == cursor).cloned().expect("buffer of a bound cursor");
            let StmtKind::Assign { lhs, rhs, .. } = &mut s.kind else { unreachable!() };
            let span = s.span.clone();
            *rhs = Expr::new(
                ExprKind::Alloc { elem, count: Box::new(plan.row_length.clone()), style },
                lhs.ty.clone(),
                span.clone(),
            );
            out.push(s);
            let zero = Expr::int(0, span.clone());
            out.push(Stmt::new(StmtKind::Decl { name: adj.clone(), ty: CType::long(), init: Some(zero) }, span));
            continue;
        }
        rewrite_uses(&mut s, plan);
        out.push(s);
    }
    *body = out;
}

fn rewrite_uses(s: &mut Stmt, plan: &RowPlan) {
    let adj_of = |e: &Expr| e.as_ident().and_then(|c| plan.row(c));
    match &mut s.kind {
        StmtKind::IncDec { target, .. } => {
            if let Some((_, _, adj)) = adj_of(target) {
                *target = Expr::ident(adj.clone(), CType::long(), target.span.clone());
                return;
            }
        }
        StmtKind::Assign { lhs, op: AssignOp::Add | AssignOp::Sub, .. } => {
            if let Some((_, _, adj)) = adj_of(lhs) {
                *lhs = Expr::ident(adj.clone(), CType::long(), lhs.span.clone());
            }
        }
        _ => {}
    }
    crate::adjunct::for_each_expr_mut(s, &mut |e| rewrite_accesses(e, plan));
    match &mut s.kind {
        StmtKind::For { init, step, body, .. } => {
            for st in init.iter_mut().chain(step.iter_mut()) {
                rewrite_uses(st, plan);
            }
            body.iter_mut().for_each(|st| rewrite_uses(st, plan));
        }
        StmtKind::While { body, .. } | StmtKind::Block(body) => body.iter_mut().for_each(|st| rewrite_uses(st, plan)),
        StmtKind::If { then_body, else_body, .. } => {
            then_body.iter_mut().chain(else_body.iter_mut()).for_each(|st| rewrite_uses(st, plan))
        }
        _ => {}
    }
}

fn rewrite_accesses(e: &mut Expr, plan: &RowPlan) {
    e.walk_mut(&mut |node| {
        let cursor = match &node.kind {
            ExprKind::Deref(inner) => inner.as_ident(),
            ExprKind::Index { base, .. } => base.as_ident(),
            _ => None,
        };
        let Some((_, lv, adj)) = cursor.and_then(|c| plan.row(c)) else { return };
        let adj = Expr::ident(adj.clone(), CType::long(), node.span.clone());
        let offset = match std::mem::replace(&mut node.kind, ExprKind::IntLit(0)) {
            ExprKind::Index { index, .. } if !index.is_zero() => Expr::binary(BinaryOp::Add, *index, adj, CType::long()),
            _ => adj,
        };
        *node = Expr::index(lv.clone(), offset);
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cast::{parse, print};

    const INIT: &str = "struct M { double** ptr_to_vals; int** ptr_to_inds; };
void init(struct M* A, int nrow, int max_nnz) {
    double* curvalptr = new double[max_nnz * nrow];
    int* curindptr = new int[max_nnz * nrow];
    for (int currow = 0; currow < nrow; currow++) {
        A->ptr_to_vals[currow] = curvalptr;
        A->ptr_to_inds[currow] = curindptr;
        for (int curcol = 0; curcol < max_nnz; curcol++) {
            *curvalptr = 27.0;
            *curindptr = curcol;
            curvalptr++;
            curindptr++;
        }
    }
}
";

    #[test]
    fn finds_both_cursors() {
        let tu = parse("t.c", INIT).unwrap();
        let found = find_lil(&tu);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].cursors, ["curvalptr", "curindptr"]);
        assert_eq!(print_expr(&found[0].row_length), "max_nnz");
    }

    #[test]
    fn rewrite_allocates_rows() {
        let tu = parse("t.c", INIT).unwrap();
        let m = &find_lil(&tu)[0];
        let out = print(&rewrite_lil(&tu, m).unwrap());
        assert!(!out.contains("curvalptr"), "{out}");
        assert!(out.contains("A->ptr_to_vals[currow] = new double[max_nnz];\n        long vals_adj = 0;"), "{out}");
        assert!(out.contains("A->ptr_to_inds[currow][inds_adj] = curcol;"), "{out}");
        assert!(out.contains("vals_adj++;"), "{out}");
    }

    #[test]
    fn escaping_cursor_blocks_the_match() {
        let src = INIT.replace("    }\n}\n", "    }\n    curvalptr[0] = 1.0;\n}\n");
        let tu = parse("t.c", &src).unwrap();
        let found = find_lil(&tu);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].cursors, ["curindptr"]);
    }

    #[test]
    fn stale_match_is_rejected() {
        let tu = parse("t.c", INIT).unwrap();
        let mut m = find_lil(&tu).remove(0);
        m.cursors.push("other".into());
        assert!(matches!(rewrite_lil(&tu, &m), Err(PatternError::Stale(_))));
    }
}
