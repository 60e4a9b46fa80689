//! Source rewriting once the analysis has decided which pointers to split.

use std::collections::{BTreeMap, BTreeSet};

use super::analysis::{base_var, is_pointer_pair, site, FunctionAnalysis};
use super::rename::{display_name, restore};
use super::{
    analyze_function, delegation_params, fresh_name, normalize_derefs, uniquify, AdjunctEntry, AdjunctPlan,
    BackOff, SiteCounts, TransformDiagnostics, TransformError, TransformOutput, Verdict,
};
use crate::cast::{
    self, AssignOp, BinaryOp, CType, Expr, ExprKind, Function, SourceSpan, Stmt, StmtKind, TranslationUnit,
    UnaryOp,
};
use crate::effects::EffectDatabase;

pub(crate) fn transform_unit(tu: &TranslationUnit, effects: &EffectDatabase) -> Result<TransformOutput, TransformError> {
    let normalized = normalize_derefs(tu.clone());
    let delegation = delegation_params(&normalized, effects);
    let mut taken = tu.identifiers();
    let mut plan = AdjunctPlan { adjunct_type: "long", ..Default::default() };
    let mut diagnostics = TransformDiagnostics::default();
    let mut functions = Vec::with_capacity(normalized.functions.len());

    for (original, f) in tu.functions.iter().zip(&normalized.functions) {
        if f.body.is_none() {
            functions.push(f.clone());
            continue;
        }
        let (unique, _) = uniquify(f);
        let analysis = analyze_function(&unique, &delegation);
        let classes = analysis.classes(&f.name);
        for c in &classes {
            if c.verdict != Verdict::Decidable {
                diagnostics.backed_off.push(BackOff {
                    function: c.function.clone(),
                    pointer: c.variable.clone(),
                    verdict: c.verdict,
                    span: c.evidence.first().cloned().unwrap_or_else(SourceSpan::synthetic),
                });
            }
        }
        plan.classes.extend(classes);

        let mut adj = BTreeMap::new();
        for p in &analysis.pointers {
            if analysis.is_mapped(&p.name) {
                let name = fresh_name(display_name(&p.name), &mut taken);
                plan.mapping.push(AdjunctEntry {
                    function: f.name.clone(),
                    pointer: display_name(&p.name).to_string(),
                    adjunct: name.clone(),
                });
                adj.insert(p.name.clone(), name);
            }
        }

        let derefs = count_derefs(original, &analysis);
        let mut rw = Rewriter { an: &analysis, adj: &adj, counts: SiteCounts::default(), offset_sites: 0, pending: Vec::new() };
        let mut out = unique.clone();
        let mut body = Vec::new();
        for p in &unique.params {
            if let Some(a) = adj.get(&p.name) {
                body.push(decl_adjunct(a, Expr::int(0, p.span.clone()), &p.span));
            }
        }
        for s in unique.body.as_deref().unwrap_or_default() {
            body.extend(rw.stmt(s)?);
        }
        out.body = Some(body);
        restore(&mut out);
        functions.push(out);

        let c = &mut diagnostics.rewritten_sites;
        c.deref += derefs;
        c.subscript += rw.offset_sites.saturating_sub(derefs);
        c.moves += rw.counts.moves;
        c.pointer_assign += rw.counts.pointer_assign;
        c.call_site += rw.counts.call_site;
    }

    let mut out = TranslationUnit { records: tu.records.clone(), functions };
    cast::check(&mut out).map_err(|e| TransformError::IllTyped(e.to_string()))?;
    Ok(TransformOutput { tu: out, plan, diagnostics })
}

/// `*e` nodes in the source whose operand derives from a split pointer.
fn count_derefs(original: &Function, an: &FunctionAnalysis) -> usize {
    let (unique, _) = uniquify(original);
    let mut n = 0;
    for s in unique.body.iter().flatten() {
        s.walk_exprs(&mut |e| {
            if let ExprKind::Deref(inner) = &e.kind {
                if base_var(inner).is_some_and(|v| an.is_mapped(v)) {
                    n += 1;
                }
            }
        });
    }
    n
}

fn decl_adjunct(name: &str, init: Expr, span: &SourceSpan) -> Stmt {
    Stmt::new(StmtKind::Decl { name: name.to_string(), ty: CType::long(), init: Some(init) }, span.clone())
}

fn assign(lhs: Expr, op: AssignOp, rhs: Expr, span: &SourceSpan) -> Stmt {
    Stmt::new(StmtKind::Assign { lhs, op, rhs }, span.clone())
}

fn add(a: Expr, b: Expr) -> Expr {
    if a.is_zero() {
        b
    } else if b.is_zero() {
        a
    } else {
        Expr::binary(BinaryOp::Add, a, b, CType::long())
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if b.is_zero() {
        a
    } else if a.is_zero() {
        let span = b.span.clone();
        Expr::new(ExprKind::Unary { op: UnaryOp::Neg, operand: Box::new(b) }, CType::long(), span)
    } else {
        Expr::binary(BinaryOp::Sub, a, b, CType::long())
    }
}

struct Rewriter<'a> {
    an: &'a FunctionAnalysis,
    adj: &'a BTreeMap<String, String>,
    counts: SiteCounts,
    /// Subscripts and member accesses that received an adjunct offset.
    offset_sites: usize,
    /// Extracted `p++`/`--p` on split pointers: (pointer, delta, prefix).
    pending: Vec<(String, i8, bool)>,
}

impl Rewriter<'_> {
    fn adjunct(&self, p: &str, span: &SourceSpan) -> Expr {
        Expr::ident(self.adj[p].clone(), CType::long(), span.clone())
    }

    fn mapped<'e>(&self, e: &'e Expr) -> Option<&'e str> {
        e.as_ident().filter(|p| self.adj.contains_key(*p))
    }

    /// Adjunct of the pointer `a` that `pp[k]` reads, for a pointee-bound `pp`.
    fn pointee_adjunct(&self, e: &Expr) -> Option<&str> {
        match &e.kind {
            ExprKind::Index { base, .. } if e.ty.is_pointer() => {
                let a = self.an.pointee.get(base.as_ident()?)?;
                self.adj.get(a).map(String::as_str)
            }
            _ => None,
        }
    }

    /// The innermost expression a pointer-valued expression is offset from.
    fn leaf<'e>(&self, e: &'e Expr) -> &'e Expr {
        match &e.kind {
            ExprKind::Binary { op: BinaryOp::Add, lhs, rhs } => {
                if lhs.ty.decay().is_pointer() {
                    self.leaf(lhs)
                } else if rhs.ty.decay().is_pointer() {
                    self.leaf(rhs)
                } else {
                    e
                }
            }
            ExprKind::Binary { op: BinaryOp::Sub, lhs, rhs } if lhs.ty.decay().is_pointer() && rhs.ty.is_integer() => {
                self.leaf(lhs)
            }
            ExprKind::AddrOf(inner) => match &inner.kind {
                ExprKind::Index { base, .. } => self.leaf(base),
                _ => e,
            },
            ExprKind::IncDec { target, .. } => self.leaf(target),
            _ => e,
        }
    }

    fn leaf_is_split(&self, e: &Expr) -> bool {
        let leaf = self.leaf(e);
        self.mapped(leaf).is_some() || self.pointee_adjunct(leaf).is_some()
    }

    fn leaf_is_adjunctable(&self, e: &Expr) -> bool {
        let leaf = self.leaf(e);
        self.leaf_is_split(e) || (leaf.ty.is_array() && leaf.as_ident().is_some_and(|a| self.an.arrays.contains(a)))
    }

    /// Splits a pointer-valued expression into container handle and offset.
    fn split(&mut self, e: &Expr) -> (Expr, Option<Expr>) {
        match &e.kind {
            ExprKind::Ident(p) if self.adj.contains_key(p) => (e.clone(), Some(self.adjunct(p, &e.span))),
            ExprKind::IncDec { target, delta, prefix } if self.mapped(target).is_some() => {
                let p = target.as_ident().unwrap_or_default().to_string();
                self.pending.push((p.clone(), *delta, *prefix));
                ((**target).clone(), Some(self.adjunct(&p, &e.span)))
            }
            ExprKind::Binary { op: BinaryOp::Add, lhs, rhs } if lhs.ty.decay().is_pointer() => {
                let (c, off) = self.split(lhs);
                let i = self.rw(rhs);
                (c, Some(match off {
                    Some(o) => add(o, i),
                    None => i,
                }))
            }
            ExprKind::Binary { op: BinaryOp::Add, lhs, rhs } if rhs.ty.decay().is_pointer() => {
                let i = self.rw(lhs);
                let (c, off) = self.split(rhs);
                (c, Some(match off {
                    Some(o) => add(i, o),
                    None => i,
                }))
            }
            ExprKind::Binary { op: BinaryOp::Sub, lhs, rhs } if lhs.ty.decay().is_pointer() && rhs.ty.is_integer() => {
                let (c, off) = self.split(lhs);
                let i = self.rw(rhs);
                (c, Some(sub(off.unwrap_or_else(|| Expr::int(0, e.span.clone())), i)))
            }
            ExprKind::AddrOf(inner) => match &inner.kind {
                ExprKind::Index { base, index } => {
                    let (c, off) = self.split(base);
                    let i = self.rw(index);
                    (c, Some(match off {
                        Some(o) => add(i, o),
                        None => i,
                    }))
                }
                _ => (self.rw(e), None),
            },
            _ => match self.pointee_adjunct(e).map(str::to_string) {
                Some(a) => (self.rw(e), Some(Expr::ident(a, CType::long(), e.span.clone()))),
                None => (self.rw(e), None),
            },
        }
    }

    /// A pointer expression rewritten to denote the same address.
    fn value(&mut self, e: &Expr) -> Expr {
        if let Some(a) = self.pointee_adjunct(e).map(str::to_string) {
            let c = self.rw(e);
            let ty = c.ty.clone();
            return Expr::binary(BinaryOp::Add, c, Expr::ident(a, CType::long(), e.span.clone()), ty);
        }
        self.rw(e)
    }

    fn rw(&mut self, e: &Expr) -> Expr {
        let span = e.span.clone();
        let kind = match &e.kind {
            ExprKind::Ident(p) if self.adj.contains_key(p) => {
                let a = self.adjunct(p, &span);
                return Expr::binary(BinaryOp::Add, e.clone(), a, e.ty.clone());
            }
            ExprKind::IncDec { target, .. } if self.mapped(target).is_some() => {
                let (c, off) = self.split(e);
                let ty = c.ty.clone();
                return Expr::binary(BinaryOp::Add, c, off.expect("split pointer has an offset"), ty);
            }
            ExprKind::Index { base, index } if self.leaf_is_split(base) => {
                let (c, off) = self.split(base);
                let i = self.rw(index);
                self.offset_sites += 1;
                let i = match off {
                    Some(o) => add(i, o),
                    None => i,
                };
                ExprKind::Index { base: Box::new(c), index: Box::new(i) }
            }
            ExprKind::Member { base, field, arrow: true } if self.leaf_is_split(base) => {
                let (c, off) = self.split(base);
                self.offset_sites += 1;
                let zero = Expr::int(0, span.clone());
                let elem = Expr::index(c, off.unwrap_or(zero));
                ExprKind::Member { base: Box::new(elem), field: field.clone(), arrow: false }
            }
            ExprKind::Binary { op, lhs, rhs }
                if is_pointer_pair(*op, lhs, rhs)
                    && self.leaf_is_adjunctable(lhs)
                    && self.leaf_is_adjunctable(rhs)
                    && (self.leaf_is_split(lhs) || self.leaf_is_split(rhs)) =>
            {
                let (_, l) = self.split(lhs);
                let (_, r) = self.split(rhs);
                let l = l.unwrap_or_else(|| Expr::int(0, span.clone()));
                let r = r.unwrap_or_else(|| Expr::int(0, span.clone()));
                if *op == BinaryOp::Sub {
                    return if r.is_zero() { l } else { Expr::binary(BinaryOp::Sub, l, r, CType::long()) };
                }
                return Expr::binary(*op, l, r, CType::int());
            }
            // Null checks only look at the handle.
            ExprKind::Binary { op: op @ (BinaryOp::Eq | BinaryOp::Ne), lhs, rhs }
                if (self.mapped(lhs).is_some() && rhs.is_zero()) || (self.mapped(rhs).is_some() && lhs.is_zero()) =>
            {
                ExprKind::Binary { op: *op, lhs: lhs.clone(), rhs: rhs.clone() }
            }
            ExprKind::Index { base, index } => {
                ExprKind::Index { base: Box::new(self.rw(base)), index: Box::new(self.rw(index)) }
            }
            ExprKind::Member { base, field, arrow } => {
                ExprKind::Member { base: Box::new(self.rw(base)), field: field.clone(), arrow: *arrow }
            }
            ExprKind::AddrOf(inner) if inner.as_ident().is_some() => e.kind.clone(),
            ExprKind::AddrOf(inner) => ExprKind::AddrOf(Box::new(self.rw(inner))),
            ExprKind::Deref(inner) => ExprKind::Deref(Box::new(self.rw(inner))),
            ExprKind::Unary { op, operand } => ExprKind::Unary { op: *op, operand: Box::new(self.rw(operand)) },
            ExprKind::Binary { op, lhs, rhs } => {
                ExprKind::Binary { op: *op, lhs: Box::new(self.rw(lhs)), rhs: Box::new(self.rw(rhs)) }
            }
            ExprKind::Call { callee, args } => {
                let delegated = self.an.delegation_calls.get(&site(e));
                let args = args
                    .iter()
                    .map(|a| {
                        let passes_delegated = matches!(&a.kind, ExprKind::AddrOf(x)
                            if x.as_ident().is_some_and(|x| delegated.is_some_and(|d| d.iter().any(|v| v == x))));
                        if passes_delegated {
                            a.clone()
                        } else {
                            if a.ty.decay().is_pointer() && self.leaf_is_split(a) {
                                self.counts.call_site += 1;
                            }
                            self.value(a)
                        }
                    })
                    .collect();
                ExprKind::Call { callee: callee.clone(), args }
            }
            ExprKind::Alloc { elem, count, style } => {
                ExprKind::Alloc { elem: elem.clone(), count: Box::new(self.rw(count)), style: *style }
            }
            ExprKind::IncDec { target, delta, prefix } => {
                ExprKind::IncDec { target: Box::new(self.rw(target)), delta: *delta, prefix: *prefix }
            }
            ExprKind::IntLit(_) | ExprKind::FloatLit(_) | ExprKind::Ident(_) => e.kind.clone(),
        };
        Expr::new(kind, e.ty.clone(), span)
    }

    fn stmts(&mut self, stmts: &[Stmt]) -> Result<Vec<Stmt>, TransformError> {
        let mut out = Vec::with_capacity(stmts.len());
        for s in stmts {
            out.extend(self.stmt(s)?);
        }
        Ok(out)
    }

    /// Rewrites one statement; simple statements may expand to several.
    fn stmt(&mut self, s: &Stmt) -> Result<Vec<Stmt>, TransformError> {
        let span = &s.span;
        let mut out = Vec::new();
        match &s.kind {
            StmtKind::Decl { name, ty, init } => match self.adj.get(name).cloned() {
                Some(a) => {
                    let (c, off) = match init {
                        Some(e) => {
                            let (c, off) = self.split(e);
                            (Some(c), off)
                        }
                        None => (None, None),
                    };
                    out.push(Stmt::new(StmtKind::Decl { name: name.clone(), ty: ty.clone(), init: c }, span.clone()));
                    out.push(decl_adjunct(&a, off.unwrap_or_else(|| Expr::int(0, span.clone())), span));
                }
                None => {
                    let init = init.as_ref().map(|e| self.rw(e));
                    out.push(Stmt::new(StmtKind::Decl { name: name.clone(), ty: ty.clone(), init }, span.clone()));
                }
            },
            StmtKind::Assign { lhs, op, rhs } => match self.mapped(lhs).map(str::to_string) {
                Some(p) => {
                    let a = self.adjunct(&p, span);
                    match op {
                        AssignOp::Set => {
                            let (c, off) = self.split(rhs);
                            if base_var(rhs) == Some(p.as_str()) {
                                self.counts.moves += 1;
                                out.push(assign(a, AssignOp::Set, off.expect("self move has an offset"), span));
                            } else {
                                self.counts.pointer_assign += 1;
                                out.push(assign(lhs.clone(), AssignOp::Set, c, span));
                                out.push(assign(a, AssignOp::Set, off.unwrap_or_else(|| Expr::int(0, span.clone())), span));
                            }
                        }
                        AssignOp::Add | AssignOp::Sub => {
                            self.counts.moves += 1;
                            let rhs = self.rw(rhs);
                            out.push(assign(a, *op, rhs, span));
                        }
                        _ => return Err(TransformError::Internal(format!("unexpected `{}` on a pointer", op.symbol()))),
                    }
                }
                None => {
                    let lhs = self.rw(lhs);
                    let rhs = self.rw(rhs);
                    out.push(assign(lhs, *op, rhs, span));
                }
            },
            StmtKind::IncDec { target, delta } => match self.mapped(target).map(str::to_string) {
                Some(p) => {
                    self.counts.moves += 1;
                    out.push(Stmt::new(StmtKind::IncDec { target: self.adjunct(&p, span), delta: *delta }, span.clone()));
                }
                None => {
                    let target = self.rw(target);
                    out.push(Stmt::new(StmtKind::IncDec { target, delta: *delta }, span.clone()));
                }
            },
            StmtKind::Expr(e) => {
                let e = self.rw(e);
                out.push(Stmt::new(StmtKind::Expr(e), span.clone()));
            }
            StmtKind::Return(e) => {
                let e = e.as_ref().map(|e| self.rw(e));
                out.push(Stmt::new(StmtKind::Return(e), span.clone()));
            }
            StmtKind::Block(body) => out.push(Stmt::new(StmtKind::Block(self.stmts(body)?), span.clone())),
            StmtKind::While { cond, body } => {
                let cond = self.rw(cond);
                out.push(Stmt::new(StmtKind::While { cond, body: self.stmts(body)? }, span.clone()));
            }
            StmtKind::If { cond, then_body, else_body } => {
                let cond = self.rw(cond);
                let then_body = self.stmts(then_body)?;
                let else_body = self.stmts(else_body)?;
                out.push(Stmt::new(StmtKind::If { cond, then_body, else_body }, span.clone()));
            }
            StmtKind::For { init, cond, step, body } => {
                let mut init = match init {
                    Some(i) => self.stmt(i)?,
                    None => Vec::new(),
                };
                let cond = cond.as_ref().map(|c| self.rw(c));
                let step = match step {
                    Some(st) => {
                        let mut v = self.stmt(st)?;
                        if v.len() != 1 {
                            return Err(TransformError::Internal("for-step expands to several statements".into()));
                        }
                        v.pop().map(Box::new)
                    }
                    None => None,
                };
                self.check_pending()?;
                let body = self.stmts(body)?;
                let single = if init.len() == 1 { init.pop().map(Box::new) } else { None };
                let scoped = init.first().is_some_and(|s| matches!(s.kind, StmtKind::Decl { .. }));
                let looped = Stmt::new(StmtKind::For { init: single, cond, step, body }, span.clone());
                if init.is_empty() {
                    out.push(looped);
                } else if scoped {
                    init.push(looped);
                    out.push(Stmt::new(StmtKind::Block(init), span.clone()));
                } else {
                    out.extend(init);
                    out.push(looped);
                }
                return Ok(out);
            }
        }
        if !s.is_loop() && !matches!(s.kind, StmtKind::If { .. } | StmtKind::Block(_)) {
            self.finish_simple(s, &mut out);
        }
        self.check_pending()?;
        Ok(out)
    }

    /// Places extracted increments around the statement and resets the
    /// adjuncts of pointers rebound by allocation delegation.
    fn finish_simple(&mut self, s: &Stmt, out: &mut Vec<Stmt>) {
        let span = &s.span;
        let pending = std::mem::take(&mut self.pending);
        let mut before = Vec::new();
        for (p, delta, prefix) in pending {
            self.counts.moves += 1;
            let st = Stmt::new(StmtKind::IncDec { target: self.adjunct(&p, span), delta }, span.clone());
            if prefix {
                before.push(st);
            } else {
                out.push(st);
            }
        }
        let mut reset: Vec<String> = Vec::new();
        for e in s.own_exprs() {
            e.walk(&mut |n| {
                if let Some(vars) = self.an.delegation_calls.get(&site(n)) {
                    reset.extend(vars.iter().filter(|v| self.adj.contains_key(*v)).cloned());
                }
            });
        }
        let reset: BTreeSet<String> = reset.into_iter().collect();
        for v in reset {
            out.push(assign(self.adjunct(&v, span), AssignOp::Set, Expr::int(0, span.clone()), span));
        }
        if !before.is_empty() {
            before.append(out);
            *out = before;
        }
    }

    fn check_pending(&mut self) -> Result<(), TransformError> {
        if self.pending.is_empty() {
            Ok(())
        } else {
            self.pending.clear();
            Err(TransformError::Internal("increment of a split pointer outside a simple statement".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::adjunct::transform;
    use crate::cast::{parse, print};
    use crate::effects::EffectDatabase;

    fn run(src: &str) -> String {
        let tu = parse("t.c", src).unwrap();
        print(&transform(&tu, &EffectDatabase::builtin()).unwrap().tu)
    }

    #[test]
    fn moves_land_on_the_adjunct() {
        let out = run("void f(int* q, int x, int i) { int* p = q; p = q + x; p = &q[i]; p -= 2; *p = 3; }");
        for line in ["int* p = q;", "long p_adj = q_adj;", "p_adj = q_adj + x;", "p_adj = i + q_adj;", "p_adj -= 2;", "p[p_adj] = 3;"] {
            assert!(out.contains(line), "missing `{line}` in\n{out}");
        }
    }

    #[test]
    fn extracted_increments_keep_their_order() {
        let out = run("void f(int* c) { *c++ = 2; *++c = 3; }");
        assert!(out.contains("c[c_adj] = 2;\n    c_adj++;\n    c_adj++;\n    c[c_adj] = 3;"), "{out}");
    }

    #[test]
    fn calls_materialize_the_pointer() {
        let out = run("void g(int* p); void f(int* p) { p++; g(p); }");
        assert!(out.contains("g(p + p_adj);"), "{out}");
    }

    #[test]
    fn delegated_allocation_resets_the_adjunct() {
        let out = run("void init(char** p, int n) { *p = malloc(n); } void f() { char* b; init(&b, 4); b[1] = 0; }");
        assert!(out.contains("init(&b, 4);\n    b_adj = 0;"), "{out}");
        assert!(out.contains("p[p_adj] = malloc(n);"), "{out}");
    }
}
