//! Makes every variable name unique within a function so the analyses can
//! key facts by name. Renamed variables get a `name#n` spelling that cannot
//! occur in source; `restore` maps them back after rewriting.

use std::collections::{BTreeSet, HashMap};

use crate::cast::{Expr, ExprKind, Function, Stmt, StmtKind};

/// Source spelling of a possibly renamed variable.
pub(crate) fn display_name(name: &str) -> &str {
    name.split('#').next().unwrap_or(name)
}

/// Returns a copy of `f` where shadowing and repeated declarations are
/// renamed, and whether anything changed.
pub(crate) fn uniquify(f: &Function) -> (Function, bool) {
    let mut r = Renamer { seen: BTreeSet::new(), scopes: vec![HashMap::new()], counter: 0, changed: false };
    let mut f = f.clone();
    for p in &mut f.params {
        p.name = r.declare(&p.name);
    }
    if let Some(body) = f.body.as_mut() {
        r.scopes.push(HashMap::new());
        r.stmts(body);
    }
    (f, r.changed)
}

/// Drops the `#n` suffixes introduced by [`uniquify`].
pub(crate) fn restore(f: &mut Function) {
    for p in &mut f.params {
        strip(&mut p.name);
    }
    for s in f.body.iter_mut().flatten() {
        restore_stmt(s);
    }
}

fn strip(name: &mut String) {
    if let Some(pos) = name.find('#') {
        name.truncate(pos);
    }
}

fn restore_expr(e: &mut Expr) {
    e.walk_mut(&mut |node| {
        if let ExprKind::Ident(name) = &mut node.kind {
            strip(name);
        }
    });
}

fn restore_stmt(s: &mut Stmt) {
    for_each_expr_mut(s, &mut restore_expr);
    if let StmtKind::Decl { name, .. } = &mut s.kind {
        strip(name);
    }
    match &mut s.kind {
        StmtKind::For { init, step, body, .. } => {
            init.iter_mut().for_each(|s| restore_stmt(s));
            step.iter_mut().for_each(|s| restore_stmt(s));
            body.iter_mut().for_each(restore_stmt);
        }
        StmtKind::While { body, .. } | StmtKind::Block(body) => body.iter_mut().for_each(restore_stmt),
        StmtKind::If { then_body, else_body, .. } => {
            then_body.iter_mut().chain(else_body.iter_mut()).for_each(restore_stmt)
        }
        _ => {}
    }
}

/// Applies `f` to the expressions owned directly by `s`.
pub(crate) fn for_each_expr_mut(s: &mut Stmt, f: &mut dyn FnMut(&mut Expr)) {
    match &mut s.kind {
        StmtKind::Decl { init, .. } => init.iter_mut().for_each(|e| f(e)),
        StmtKind::Assign { lhs, rhs, .. } => {
            f(lhs);
            f(rhs);
        }
        StmtKind::Expr(e) | StmtKind::IncDec { target: e, .. } => f(e),
        StmtKind::For { cond, .. } => cond.iter_mut().for_each(|e| f(e)),
        StmtKind::While { cond, .. } | StmtKind::If { cond, .. } => f(cond),
        StmtKind::Return(e) => e.iter_mut().for_each(|e| f(e)),
        StmtKind::Block(_) => {}
    }
}

struct Renamer {
    seen: BTreeSet<String>,
    scopes: Vec<HashMap<String, String>>,
    counter: usize,
    changed: bool,
}

impl Renamer {
    fn declare(&mut self, name: &str) -> String {
        let unique = if self.seen.insert(name.to_string()) {
            name.to_string()
        } else {
            self.counter += 1;
            self.changed = true;
            format!("{name}#{}", self.counter)
        };
        self.scopes.last_mut().expect("scope").insert(name.to_string(), unique.clone());
        unique
    }

    fn resolve(&self, e: &mut Expr) {
        e.walk_mut(&mut |node| {
            if let ExprKind::Ident(name) = &mut node.kind {
                if let Some(unique) = self.scopes.iter().rev().find_map(|s| s.get(name.as_str())) {
                    *name = unique.clone();
                }
            }
        });
    }

    fn scoped(&mut self, f: impl FnOnce(&mut Self)) {
        self.scopes.push(HashMap::new());
        f(self);
        self.scopes.pop();
    }

    fn stmts(&mut self, stmts: &mut [Stmt]) {
        for s in stmts {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &mut Stmt) {
        match &mut s.kind {
            StmtKind::Decl { name, init, .. } => {
                if let Some(e) = init {
                    self.resolve(e);
                }
                *name = self.declare(name);
            }
            StmtKind::For { init, cond, step, body } => self.scoped(|r| {
                if let Some(init) = init {
                    r.stmt(init);
                }
                if let Some(cond) = cond {
                    r.resolve(cond);
                }
                if let Some(step) = step {
                    r.stmt(step);
                }
                r.scoped(|r| r.stmts(body));
            }),
            StmtKind::While { cond, body } => {
                self.resolve(cond);
                self.scoped(|r| r.stmts(body));
            }
            StmtKind::If { cond, then_body, else_body } => {
                self.resolve(cond);
                self.scoped(|r| r.stmts(then_body));
                self.scoped(|r| r.stmts(else_body));
            }
            StmtKind::Block(body) => self.scoped(|r| r.stmts(body)),
            _ => for_each_expr_mut(s, &mut |e| self.resolve(e)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cast::{parse, print, TranslationUnit};

    #[test]
    fn shadowed_names_are_split_and_restored() {
        let tu = parse("t.c", "void f(int* p) { p[0] = 1; { int* p = new int[2]; p[1] = 2; } p[0] = 3; }").unwrap();
        let (mut g, changed) = uniquify(&tu.functions[0]);
        assert!(changed);
        let body = print(&TranslationUnit { records: vec![], functions: vec![g.clone()] });
        assert!(body.contains("p#1[1] = 2;"), "{body}");
        assert!(body.contains("    p[0] = 3;"), "{body}");
        restore(&mut g);
        assert_eq!(g, tu.functions[0]);
    }
}
