//! Collects the memory and scalar events of one loop iteration.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::linear::{linearize, Lin};
use super::{Ctx, Iv, Update};
use crate::adjunct::display_name;
use crate::cast::{print_expr, AssignOp, BinaryOp, Expr, ExprKind, SourceSpan, Stmt, StmtKind};
use crate::effects::Effect;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Key {
    /// Containers reachable from one alias class of pointer variables.
    Class(String),
    /// Container designated by a member or subscript chain.
    Path(String),
    /// Container behind an expression we cannot name.
    Opaque,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Range {
    /// Closed interval of element offsets touched in one iteration.
    Span { lo: Lin, hi: Lin },
    Whole,
    NonAffine(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    Read,
    Write,
}

#[derive(Debug, Clone)]
pub(crate) struct Access {
    pub key: Key,
    pub label: String,
    pub kind: Kind,
    pub range: Range,
    /// Pointer variable the element offsets are relative to.
    pub base: Option<String>,
    pub site: SourceSpan,
    /// Unconditional write-only whole-container write.
    pub kill: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ScalarEvent {
    Read,
    /// Plain assignment; `unconditional` when it runs in every iteration.
    Set { unconditional: bool },
    /// `v op= e` where `e` does not mention `v`.
    Reduce(BinaryOp),
    /// Any other write.
    Write,
}

/// Variable range of an inner counted loop, as a closed interval.
struct Inner {
    var: String,
    lo: Lin,
    hi: Lin,
}

/// Variables assigned by a list of statements, with their write counts,
/// and the variables declared by them.
#[derive(Debug, Default)]
pub(crate) struct Writes {
    pub counts: HashMap<String, usize>,
    pub declared: BTreeSet<String>,
}

impl Writes {
    pub fn of<'a>(stmts: impl IntoIterator<Item = &'a Stmt>, exprs: impl IntoIterator<Item = &'a Expr>) -> Writes {
        let mut w = Writes::default();
        for e in exprs {
            w.expr(e);
        }
        for s in stmts {
            s.walk(&mut |s| {
                match &s.kind {
                    StmtKind::Decl { name, .. } => {
                        w.declared.insert(name.clone());
                        w.bump(name);
                    }
                    StmtKind::Assign { lhs, .. } | StmtKind::IncDec { target: lhs, .. } => {
                        if let Some(v) = lhs.as_ident() {
                            w.bump(v);
                        }
                    }
                    _ => {}
                }
                for e in s.own_exprs() {
                    w.expr(e);
                }
            });
        }
        w
    }

    fn bump(&mut self, v: &str) {
        *self.counts.entry(v.to_string()).or_default() += 1;
    }

    fn expr(&mut self, e: &Expr) {
        e.walk(&mut |e| match &e.kind {
            ExprKind::IncDec { target, .. } => {
                if let Some(v) = target.as_ident() {
                    self.bump(v);
                }
            }
            ExprKind::AddrOf(inner) => {
                if let Some(v) = inner.as_ident() {
                    self.bump(v);
                }
            }
            _ => {}
        });
    }

    pub fn written(&self, v: &str) -> bool {
        self.counts.contains_key(v)
    }
}

pub(crate) struct Walker<'c> {
    ctx: &'c Ctx<'c>,
    ivs: &'c [Iv],
    writes: &'c Writes,
    shift: HashMap<String, i64>,
    inner: Vec<Option<Inner>>,
    depth: usize,
    pub accesses: Vec<Access>,
    pub scalars: BTreeMap<String, Vec<ScalarEvent>>,
    pub returns: Vec<SourceSpan>,
}

impl<'c> Walker<'c> {
    pub fn new(ctx: &'c Ctx<'c>, ivs: &'c [Iv], writes: &'c Writes) -> Self {
        Walker {
            ctx,
            ivs,
            writes,
            shift: HashMap::new(),
            inner: Vec::new(),
            depth: 0,
            accesses: Vec::new(),
            scalars: BTreeMap::new(),
            returns: Vec::new(),
        }
    }

    /// One iteration: condition, body, then step.
    pub fn iteration(&mut self, lp: &Stmt) {
        match &lp.kind {
            StmtKind::For { cond, step, body, .. } => {
                if let Some(c) = cond {
                    self.read(c);
                }
                self.top_level(body);
                if let Some(s) = step {
                    self.stmt(s);
                }
            }
            StmtKind::While { cond, body } => {
                self.read(cond);
                self.top_level(body);
            }
            _ => {}
        }
    }

    fn top_level(&mut self, body: &[Stmt]) {
        for (idx, s) in body.iter().enumerate() {
            self.stmt(s);
            for iv in self.ivs {
                if iv.update == Update::Body(idx) {
                    *self.shift.entry(iv.name.clone()).or_default() += 1;
                }
            }
        }
    }

    fn block(&mut self, body: &[Stmt]) {
        for s in body {
            self.stmt(s);
        }
    }

    fn is_iv(&self, v: &str) -> bool {
        self.ivs.iter().any(|iv| iv.name == v)
    }

    fn event(&mut self, v: &str, ev: ScalarEvent) {
        if self.is_iv(v) || self.ctx.is_array(v) {
            return;
        }
        self.scalars.entry(v.to_string()).or_default().push(ev);
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Decl { name, init, .. } => {
                if let Some(e) = init {
                    self.read(e);
                    self.event(name, ScalarEvent::Set { unconditional: self.depth == 0 });
                }
            }
            StmtKind::Assign { lhs, op, rhs } => self.assign(lhs, *op, rhs),
            StmtKind::Expr(e) => self.read(e),
            StmtKind::IncDec { target, .. } => match target.as_ident() {
                Some(v) if target.ty.is_pointer() => self.event(v, ScalarEvent::Write),
                Some(v) => self.event(v, ScalarEvent::Reduce(BinaryOp::Add)),
                None => {
                    self.location(target, Kind::Read);
                    self.location(target, Kind::Write);
                }
            },
            StmtKind::If { cond, then_body, else_body } => {
                self.read(cond);
                self.depth += 1;
                self.block(then_body);
                self.block(else_body);
                self.depth -= 1;
            }
            StmtKind::For { init, cond, step, body } => {
                if let Some(i) = init {
                    self.stmt(i);
                }
                if let Some(c) = cond {
                    self.read(c);
                }
                let range = self.inner_range(s);
                self.inner.push(range);
                self.depth += 1;
                self.block(body);
                if let Some(st) = step {
                    self.stmt(st);
                }
                self.depth -= 1;
                self.inner.pop();
            }
            StmtKind::While { cond, body } => {
                self.read(cond);
                self.depth += 1;
                self.block(body);
                self.depth -= 1;
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.read(e);
                }
                self.returns.push(s.span.clone());
            }
            StmtKind::Block(body) => self.block(body),
        }
    }

    fn assign(&mut self, lhs: &Expr, op: AssignOp, rhs: &Expr) {
        if let Some(v) = lhs.as_ident() {
            if op == AssignOp::Set {
                self.read(rhs);
                self.event(v, ScalarEvent::Set { unconditional: self.depth == 0 });
            } else if !rhs.mentions(&|n| n == v) && !lhs.ty.is_pointer() {
                self.read(rhs);
                self.event(v, ScalarEvent::Reduce(op.binary().unwrap_or(BinaryOp::Add)));
            } else {
                self.event(v, ScalarEvent::Read);
                self.read(rhs);
                self.event(v, ScalarEvent::Write);
            }
            return;
        }
        if op != AssignOp::Set {
            self.location(lhs, Kind::Read);
        }
        self.read(rhs);
        self.location(lhs, Kind::Write);
    }

    /// Records the reads performed while evaluating `e` as a value.
    fn read(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::IntLit(_) | ExprKind::FloatLit(_) => {}
            ExprKind::Ident(v) => self.event(v, ScalarEvent::Read),
            ExprKind::Index { .. } | ExprKind::Member { .. } | ExprKind::Deref(_) => self.location(e, Kind::Read),
            ExprKind::AddrOf(inner) => match &inner.kind {
                ExprKind::Ident(v) => {
                    self.event(v, ScalarEvent::Read);
                    self.event(v, ScalarEvent::Write);
                }
                ExprKind::Index { base, index } => {
                    self.read(base);
                    self.read(index);
                }
                _ => self.read(inner),
            },
            ExprKind::Unary { operand, .. } => self.read(operand),
            ExprKind::Binary { lhs, rhs, .. } => {
                self.read(lhs);
                self.read(rhs);
            }
            ExprKind::Call { callee, args } => {
                for (k, a) in args.iter().enumerate() {
                    if a.ty.decay().is_pointer() {
                        self.call_arg(callee, k, a);
                    } else {
                        self.read(a);
                    }
                }
            }
            ExprKind::Alloc { count, .. } => self.read(count),
            ExprKind::IncDec { target, .. } => match target.as_ident() {
                Some(v) => {
                    self.event(v, ScalarEvent::Read);
                    self.event(v, ScalarEvent::Write);
                }
                None => {
                    self.location(target, Kind::Read);
                    self.location(target, Kind::Write);
                }
            },
        }
    }

    fn call_arg(&mut self, callee: &str, k: usize, a: &Expr) {
        let effect = self.ctx.db.effect_of(callee, k);
        if let ExprKind::AddrOf(inner) = &a.kind {
            if let Some(v) = inner.as_ident() {
                if effect.reads() {
                    self.event(v, ScalarEvent::Read);
                }
                if effect == Effect::Write {
                    self.event(v, ScalarEvent::Set { unconditional: self.depth == 0 });
                } else if effect.writes() {
                    self.event(v, ScalarEvent::Write);
                }
                return;
            }
        }
        self.read(a);
        let Some((key, label)) = self.key_of_pointer(a) else { return };
        if effect.reads() {
            self.push(key.clone(), label.clone(), Kind::Read, Range::Whole, a, false);
        }
        if effect.writes() {
            let kill = effect == Effect::Write && self.depth == 0;
            self.push(key, label, Kind::Write, Range::Whole, a, kill);
        }
    }

    fn push(&mut self, key: Key, label: String, kind: Kind, range: Range, at: &Expr, kill: bool) {
        self.accesses.push(Access { key, label, kind, range, base: None, site: at.span.clone(), kill });
    }

    /// Container named by a pointer-valued expression.
    fn key_of_pointer(&self, a: &Expr) -> Option<(Key, String)> {
        let (root, _) = split_pointer(a);
        match &root.kind {
            ExprKind::IntLit(_) => None,
            ExprKind::Ident(v) => Some((Key::Class(self.ctx.class_of(v)), display_name(v).to_string())),
            ExprKind::Index { .. } | ExprKind::Member { .. } => {
                let text = print_expr(root);
                Some((Key::Path(text.clone()), text))
            }
            _ => Some((Key::Opaque, print_expr(root))),
        }
    }

    /// Records an element access through `e` plus the reads needed to locate it.
    fn location(&mut self, e: &Expr, kind: Kind) {
        match &e.kind {
            ExprKind::Index { base, index } => {
                self.read(index);
                self.element(e, base, Some(index), kind);
            }
            ExprKind::Deref(inner) => self.element(e, inner, None, kind),
            ExprKind::Member { base, arrow: true, .. } => self.element(e, base, None, kind),
            ExprKind::Member { base, arrow: false, .. } => match base.as_ident() {
                Some(v) => match kind {
                    Kind::Read => self.event(v, ScalarEvent::Read),
                    Kind::Write => {
                        self.event(v, ScalarEvent::Read);
                        self.event(v, ScalarEvent::Write);
                    }
                },
                None => self.location(base, kind),
            },
            _ => self.read(e),
        }
    }

    /// Access to element `base[index]`, `index` defaulting to zero.
    fn element(&mut self, at: &Expr, base: &Expr, index: Option<&Expr>, kind: Kind) {
        let (root, offsets) = split_pointer(base);
        for (o, _) in &offsets {
            self.read(o);
        }
        let mut lin = Ok(Lin::default());
        for (o, sign) in &offsets {
            lin = lin.and_then(|l| Ok(l.add(&linearize(o)?.scale(*sign))));
        }
        if let Some(i) = index {
            lin = lin.and_then(|l| Ok(l.add(&linearize(i)?)));
        }
        let (key, label, moved) = match &root.kind {
            ExprKind::Ident(v) => {
                self.event(v, ScalarEvent::Read);
                let moved = !self.ctx.is_array(v) && self.writes.written(v);
                let label = display_name(v).to_string();
                let reason = format!("pointer `{label}` moves inside the loop");
                (Key::Class(self.ctx.class_of(v)), label, moved.then_some(reason))
            }
            ExprKind::Index { .. } | ExprKind::Member { .. } => {
                self.location(root, Kind::Read);
                let text = print_expr(root);
                let moved = root.mentions(&|n| self.writes.written(n) || self.is_iv(n));
                let reason = format!("container `{text}` changes between iterations");
                (Key::Path(text.clone()), text, moved.then_some(reason))
            }
            _ => {
                self.read(root);
                (Key::Opaque, print_expr(root), Some("untracked pointer expression".to_string()))
            }
        };
        let range = match (moved, lin) {
            (Some(reason), _) | (None, Err(reason)) => Range::NonAffine(reason),
            (None, Ok(lin)) => self.range_of(lin),
        };
        self.push(key, label, kind, range, at, false);
        if let (Some(a), ExprKind::Ident(v)) = (self.accesses.last_mut(), &root.kind) {
            a.base = Some(v.clone());
        }
    }

    /// Interval covered by an affine index over the inner loops.
    fn range_of(&self, mut lin: Lin) -> Range {
        for iv in self.ivs {
            let k = self.shift.get(&iv.name).copied().unwrap_or(0);
            let c = lin.coeff(&iv.name);
            if k != 0 && c != 0 {
                match &iv.stride_lin {
                    Some(s) => lin = lin.add(&s.scale(c * k)),
                    None => return Range::NonAffine(format!("stride of `{}` is not affine", display_name(&iv.name))),
                }
            }
        }
        let (mut lo, mut hi) = (lin.clone(), lin);
        for inner in self.inner.iter().rev().flatten() {
            let (cl, ch) = (lo.coeff(&inner.var), hi.coeff(&inner.var));
            lo = lo.without(&inner.var).add(&if cl > 0 { inner.lo.scale(cl) } else { inner.hi.scale(cl) });
            hi = hi.without(&inner.var).add(&if ch > 0 { inner.hi.scale(ch) } else { inner.lo.scale(ch) });
        }
        for v in lo.vars().chain(hi.vars()) {
            if !self.is_iv(v) && self.writes.written(v) {
                return Range::NonAffine(format!("`{}` changes inside the loop", display_name(v)));
            }
        }
        Range::Span { lo, hi }
    }

    /// Closed range of a counted inner loop's variable, when it has one.
    fn inner_range(&self, s: &Stmt) -> Option<Inner> {
        let StmtKind::For { init: Some(init), cond: Some(cond), step: Some(step), body } = &s.kind else {
            return None;
        };
        let (var, start) = match &init.kind {
            StmtKind::Decl { name, init: Some(e), .. } => (name.as_str(), e),
            StmtKind::Assign { lhs, op: AssignOp::Set, rhs } => (lhs.as_ident()?, rhs),
            _ => return None,
        };
        let step = match &step.kind {
            StmtKind::IncDec { target, delta } if target.as_ident() == Some(var) => *delta as i64,
            StmtKind::Assign { lhs, op, rhs } if lhs.as_ident() == Some(var) => {
                let c = linearize(rhs).ok()?.as_constant()?;
                match op {
                    AssignOp::Add => c,
                    AssignOp::Sub => -c,
                    _ => return None,
                }
            }
            _ => return None,
        };
        let ExprKind::Binary { op, lhs, rhs } = &cond.kind else { return None };
        if lhs.as_ident() != Some(var) || step == 0 {
            return None;
        }
        let inner_writes = Writes::of(body, []);
        if inner_writes.written(var) || rhs.mentions(&|n| inner_writes.written(n)) {
            return None;
        }
        let shifted = |e: &Expr| -> Option<Lin> {
            let mut l = linearize(e).ok()?;
            for iv in self.ivs {
                let k = self.shift.get(&iv.name).copied().unwrap_or(0);
                let c = l.coeff(&iv.name);
                if k != 0 && c != 0 {
                    l = l.add(&iv.stride_lin.as_ref()?.scale(c * k));
                }
            }
            Some(l)
        };
        let (start, bound) = (shifted(start)?, shifted(rhs)?);
        let one = Lin::constant(1);
        let (lo, hi) = match (op, step > 0) {
            (BinaryOp::Lt, true) => (start, bound.sub(&one)),
            (BinaryOp::Le, true) => (start, bound),
            (BinaryOp::Gt, false) => (bound.add(&one), start),
            (BinaryOp::Ge, false) => (bound, start),
            _ => return None,
        };
        Some(Inner { var: var.to_string(), lo, hi })
    }
}

/// Splits `p + a - b` into the pointer root and signed integer offsets.
pub(crate) fn split_pointer(e: &Expr) -> (&Expr, Vec<(&Expr, i64)>) {
    match &e.kind {
        ExprKind::Binary { op: BinaryOp::Add, lhs, rhs } if lhs.ty.decay().is_pointer() => {
            let (root, mut offs) = split_pointer(lhs);
            offs.push((rhs, 1));
            (root, offs)
        }
        ExprKind::Binary { op: BinaryOp::Add, lhs, rhs } if rhs.ty.decay().is_pointer() => {
            let (root, mut offs) = split_pointer(rhs);
            offs.push((lhs, 1));
            (root, offs)
        }
        ExprKind::Binary { op: BinaryOp::Sub, lhs, rhs } if lhs.ty.decay().is_pointer() && rhs.ty.is_integer() => {
            let (root, mut offs) = split_pointer(lhs);
            offs.push((rhs, -1));
            (root, offs)
        }
        ExprKind::AddrOf(inner) => match &inner.kind {
            ExprKind::Index { base, index } => {
                let (root, mut offs) = split_pointer(base);
                offs.push((index, 1));
                (root, offs)
            }
            _ => (e, vec![]),
        },
        _ => (e, vec![]),
    }
}
