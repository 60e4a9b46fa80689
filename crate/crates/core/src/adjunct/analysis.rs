//! Decidability analysis for one function: a syntactic scan for escapes,
//! iterated double pointers and unsupported arithmetic, plus a forward
//! dataflow tracking which container root every pointer is bound to.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{display_name, PointerClass, Verdict};
use crate::cast::{AssignOp, BinaryOp, CType, Expr, ExprKind, Function, SourceSpan, Stmt, StmtKind, TranslationUnit};
use crate::effects::EffectDatabase;

/// Identity of an expression node within one borrowed tree.
pub(crate) type Site = usize;

pub(crate) fn site(e: &Expr) -> Site {
    e as *const Expr as usize
}

/// What a pointer's container handle was derived from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Root {
    Array(String),
    Alloc(Site),
    Param(String),
    AddrOf(String),
    Opaque(Site),
    Null,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Binding {
    Uninit,
    Bound(Root),
    Conflict,
}

impl Binding {
    fn join(&self, other: &Binding) -> Binding {
        match (self, other) {
            (Binding::Uninit, x) | (x, Binding::Uninit) => x.clone(),
            (Binding::Bound(a), Binding::Bound(b)) if a == b => self.clone(),
            _ => Binding::Conflict,
        }
    }
}

/// Functions that only allocate through a `T**` argument.
#[derive(Debug, Clone, Default)]
pub(crate) struct DelegationTable {
    any_param: BTreeSet<String>,
    params: BTreeMap<String, BTreeSet<usize>>,
}

impl DelegationTable {
    pub(crate) fn is_delegation(&self, callee: &str, index: usize) -> bool {
        self.any_param.contains(callee) || self.params.get(callee).is_some_and(|s| s.contains(&index))
    }
}

/// Whitelisted delegation functions plus user functions whose `T**`
/// parameter is only used as `p[0]` and is assigned an allocation.
pub(crate) fn delegation_params(tu: &TranslationUnit, effects: &EffectDatabase) -> DelegationTable {
    let mut table = DelegationTable::default();
    for name in effects.functions() {
        if effects.is_allocation_delegation(name) {
            table.any_param.insert(name.to_string());
        }
    }
    for f in &tu.functions {
        let Some(body) = &f.body else { continue };
        for (k, p) in f.params.iter().enumerate() {
            if p.ty.order() != 2 {
                continue;
            }
            let (mut total, mut deref, mut allocs) = (0, 0, 0);
            for s in body {
                s.walk(&mut |s| {
                    if let StmtKind::Decl { name, .. } = &s.kind {
                        if *name == p.name {
                            total += 1000;
                        }
                    }
                    if let StmtKind::Assign { lhs, op: AssignOp::Set, rhs } = &s.kind {
                        if is_zero_index_of(lhs, &p.name) && matches!(rhs.kind, ExprKind::Alloc { .. }) {
                            allocs += 1;
                        }
                    }
                });
                s.walk_exprs(&mut |e| match &e.kind {
                    ExprKind::Ident(n) if *n == p.name => total += 1,
                    _ if is_zero_index_of(e, &p.name) => deref += 1,
                    _ => {}
                });
            }
            if total == deref && allocs > 0 {
                table.params.entry(f.name.clone()).or_default().insert(k);
            }
        }
    }
    table
}

fn is_zero_index_of(e: &Expr, var: &str) -> bool {
    matches!(&e.kind, ExprKind::Index { base, index } if base.as_ident() == Some(var) && index.is_zero())
}

/// The variable a pointer-valued expression is derived from, if any.
pub(crate) fn base_var(e: &Expr) -> Option<&str> {
    match &e.kind {
        ExprKind::Ident(name) => Some(name),
        ExprKind::Binary { op: BinaryOp::Add, lhs, rhs } => {
            if lhs.ty.decay().is_pointer() {
                base_var(lhs)
            } else if rhs.ty.decay().is_pointer() {
                base_var(rhs)
            } else {
                None
            }
        }
        ExprKind::Binary { op: BinaryOp::Sub, lhs, rhs } if lhs.ty.decay().is_pointer() && rhs.ty.is_integer() => {
            base_var(lhs)
        }
        ExprKind::AddrOf(inner) => match &inner.kind {
            ExprKind::Index { base, .. } => base_var(base),
            _ => None,
        },
        ExprKind::IncDec { target, .. } => base_var(target),
        _ => None,
    }
}

/// True for `p - q` and pointer comparisons between two pointer operands.
pub(crate) fn is_pointer_pair(op: BinaryOp, lhs: &Expr, rhs: &Expr) -> bool {
    (op == BinaryOp::Sub || op.is_comparison()) && lhs.ty.decay().is_pointer() && rhs.ty.decay().is_pointer()
}

#[derive(Debug, Clone)]
pub(crate) struct PointerVar {
    pub name: String,
    pub ty: CType,
    pub span: SourceSpan,
    pub is_param: bool,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct FunctionAnalysis {
    /// Pointer parameters then locals, in declaration order.
    pub pointers: Vec<PointerVar>,
    pub arrays: BTreeSet<String>,
    /// Double pointer → the single pointer whose address it always holds.
    pub pointee: BTreeMap<String, String>,
    pub verdicts: BTreeMap<String, (Verdict, Vec<SourceSpan>)>,
    /// Delegation call sites and the pointers whose address they receive.
    pub delegation_calls: BTreeMap<Site, Vec<String>>,
    /// Binding of every pointer identifier occurrence, after the fixpoint.
    pub ident_roots: HashMap<Site, Binding>,
    pub sites_in_loop: BTreeSet<Site>,
    pub arrays_in_loop: BTreeSet<String>,
}

impl FunctionAnalysis {
    pub(crate) fn is_mapped(&self, name: &str) -> bool {
        matches!(self.verdicts.get(name), Some((Verdict::Decidable, _)))
    }

    pub(crate) fn classes(&self, function: &str) -> Vec<PointerClass> {
        self.pointers
            .iter()
            .map(|p| {
                let (verdict, evidence) = self.verdicts[&p.name].clone();
                PointerClass {
                    function: function.to_string(),
                    variable: display_name(&p.name).to_string(),
                    verdict,
                    evidence,
                }
            })
            .collect()
    }
}

type Spans = BTreeMap<String, Vec<SourceSpan>>;

fn push(map: &mut Spans, var: &str, span: &SourceSpan) {
    map.entry(var.to_string()).or_default().push(span.clone());
}

/// Runs the full analysis on a function whose names are unique.
pub(crate) fn analyze_function(f: &Function, delegation: &DelegationTable) -> FunctionAnalysis {
    let mut out = FunctionAnalysis::default();
    let Some(body) = &f.body else { return out };
    for p in &f.params {
        if p.ty.is_pointer() {
            out.pointers.push(PointerVar { name: p.name.clone(), ty: p.ty.clone(), span: p.span.clone(), is_param: true });
        }
    }
    for s in body {
        s.walk(&mut |s| {
            if let StmtKind::Decl { name, ty, .. } = &s.kind {
                if ty.is_pointer() {
                    out.pointers.push(PointerVar { name: name.clone(), ty: ty.clone(), span: s.span.clone(), is_param: false });
                } else if ty.is_array() {
                    out.arrays.insert(name.clone());
                }
            }
        });
    }
    let orders: BTreeMap<String, usize> = out.pointers.iter().map(|p| (p.name.clone(), p.ty.order())).collect();
    let params: BTreeSet<String> = out.pointers.iter().filter(|p| p.is_param).map(|p| p.name.clone()).collect();
    out.pointee = find_pointees(body, &orders, &params);

    let mut scan = Scan {
        orders: &orders,
        pointee: &out.pointee,
        delegation,
        escape: Spans::new(),
        iterated: Spans::new(),
        arith: Spans::new(),
        delegation_calls: BTreeMap::new(),
    };
    scan.stmts(body);
    out.delegation_calls = scan.delegation_calls;

    let syntactic: BTreeSet<String> =
        scan.escape.keys().chain(scan.iterated.keys()).chain(scan.arith.keys()).cloned().collect();
    let mut backoff = syntactic;
    let flow = loop {
        let mut flow = Flow::new(&orders, &out.arrays, &out.pointee, &backoff, &out.delegation_calls);
        for p in &f.params {
            if p.ty.is_pointer() {
                flow.state.insert(p.name.clone(), Binding::Bound(Root::Param(p.name.clone())));
            }
        }
        flow.stmts(body);
        let mut next = backoff.clone();
        next.extend(flow.conflicts.keys().cloned());
        next.extend(flow.unproven.keys().cloned());
        if next == backoff {
            break flow;
        }
        backoff = next;
    };

    for p in &out.pointers {
        let pick = |m: &Spans| m.get(&p.name).filter(|v| !v.is_empty()).cloned();
        let mut arith = pick(&scan.arith).unwrap_or_default();
        arith.extend(pick(&flow.unproven).unwrap_or_default());
        let verdict = if let Some(ev) = pick(&scan.escape) {
            (Verdict::AddressTakenEscape, ev)
        } else if let Some(ev) = pick(&scan.iterated) {
            (Verdict::HigherOrderIterated, ev)
        } else if !arith.is_empty() {
            (Verdict::UnsupportedArithmetic, arith)
        } else if let Some(ev) = pick(&flow.conflicts) {
            (Verdict::ConditionalReassignment, ev)
        } else {
            (Verdict::Decidable, vec![p.span.clone()])
        };
        out.verdicts.insert(p.name.clone(), verdict);
    }
    out.ident_roots = flow.ident_roots;
    out.sites_in_loop = flow.sites_in_loop;
    out.arrays_in_loop = flow.arrays_in_loop;
    out
}

/// Double pointers whose every definition is `&a` for one pointer `a`
/// and which are otherwise only subscripted for reading.
fn find_pointees(body: &[Stmt], orders: &BTreeMap<String, usize>, params: &BTreeSet<String>) -> BTreeMap<String, String> {
    let candidates: BTreeSet<String> =
        orders.iter().filter(|(n, o)| **o == 2 && !params.contains(*n)).map(|(n, _)| n.clone()).collect();
    let mut target: BTreeMap<String, String> = BTreeMap::new();
    let mut bad: BTreeSet<String> = BTreeSet::new();

    fn uses(e: &Expr, lvalue: bool, cands: &BTreeSet<String>, bad: &mut BTreeSet<String>) {
        match &e.kind {
            ExprKind::Index { base, index } => {
                match base.as_ident() {
                    Some(pp) if cands.contains(pp) => {
                        if lvalue {
                            bad.insert(pp.to_string());
                        }
                    }
                    _ => uses(base, false, cands, bad),
                }
                uses(index, false, cands, bad);
            }
            ExprKind::Ident(name) => {
                if cands.contains(name) {
                    bad.insert(name.clone());
                }
            }
            ExprKind::AddrOf(inner) | ExprKind::IncDec { target: inner, .. } => uses(inner, true, cands, bad),
            ExprKind::Deref(inner) => uses(inner, false, cands, bad),
            ExprKind::Member { base, .. } => uses(base, false, cands, bad),
            ExprKind::Unary { operand, .. } => uses(operand, false, cands, bad),
            ExprKind::Binary { lhs, rhs, .. } => {
                uses(lhs, false, cands, bad);
                uses(rhs, false, cands, bad);
            }
            ExprKind::Call { args, .. } => args.iter().for_each(|a| uses(a, false, cands, bad)),
            ExprKind::Alloc { count, .. } => uses(count, false, cands, bad),
            ExprKind::IntLit(_) | ExprKind::FloatLit(_) => {}
        }
    }

    let define = |pp: &str, rhs: &Expr, target: &mut BTreeMap<String, String>, bad: &mut BTreeSet<String>| {
        let a = match &rhs.kind {
            ExprKind::AddrOf(inner) => inner.as_ident().filter(|a| orders.get(*a) == Some(&1)),
            _ => None,
        };
        match a {
            Some(a) => match target.get(pp) {
                Some(prev) if prev != a => {
                    bad.insert(pp.to_string());
                }
                _ => {
                    target.insert(pp.to_string(), a.to_string());
                }
            },
            None => {
                bad.insert(pp.to_string());
                uses(rhs, false, &candidates, bad);
            }
        }
    };

    for s in body {
        s.walk(&mut |s| match &s.kind {
            StmtKind::Decl { name, init: Some(init), .. } if candidates.contains(name) => {
                define(name, init, &mut target, &mut bad)
            }
            StmtKind::Assign { lhs, op, rhs } => match lhs.as_ident() {
                Some(pp) if candidates.contains(pp) => {
                    if *op == AssignOp::Set {
                        define(pp, rhs, &mut target, &mut bad);
                    } else {
                        bad.insert(pp.to_string());
                        uses(rhs, false, &candidates, &mut bad);
                    }
                }
                _ => {
                    uses(lhs, true, &candidates, &mut bad);
                    uses(rhs, false, &candidates, &mut bad);
                }
            },
            StmtKind::IncDec { target: t, .. } => uses(t, true, &candidates, &mut bad),
            _ => {
                for e in s.own_exprs() {
                    uses(e, false, &candidates, &mut bad);
                }
            }
        });
    }
    target.retain(|pp, _| !bad.contains(pp));
    target
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Pos {
    /// Declaration, assignment or expression statement (including for-init).
    Simple,
    /// For-loop step: must stay a single statement.
    Step,
    /// Conditions and return values.
    Other,
}

struct Scan<'a> {
    orders: &'a BTreeMap<String, usize>,
    pointee: &'a BTreeMap<String, String>,
    delegation: &'a DelegationTable,
    escape: Spans,
    iterated: Spans,
    arith: Spans,
    delegation_calls: BTreeMap<Site, Vec<String>>,
}

fn mention_counts(s: &Stmt) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for e in s.own_exprs() {
        e.walk(&mut |n| {
            if let ExprKind::Ident(name) = &n.kind {
                *counts.entry(name.clone()).or_insert(0) += 1;
            }
        });
    }
    counts
}

impl Scan<'_> {
    fn order(&self, name: &str) -> usize {
        self.orders.get(name).copied().unwrap_or(0)
    }

    fn stmts(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            self.stmt(s, Pos::Simple);
        }
    }

    fn stmt(&mut self, s: &Stmt, pos: Pos) {
        let counts = mention_counts(s);
        match &s.kind {
            StmtKind::Decl { name, init, .. } => {
                if let Some(e) = init {
                    if !self.is_pointee_def(name, e) {
                        self.expr(e, pos, &counts);
                    }
                }
            }
            StmtKind::Assign { lhs, op, rhs } => {
                if let Some(p) = lhs.as_ident() {
                    let order = self.order(p);
                    let self_based = base_var(rhs) == Some(p);
                    let is_move = matches!(op, AssignOp::Add | AssignOp::Sub) || (*op == AssignOp::Set && self_based);
                    if order == 2 && is_move {
                        push(&mut self.iterated, p, &s.span);
                    }
                    if order == 1 && pos == Pos::Step && *op == AssignOp::Set && !self_based {
                        push(&mut self.arith, p, &s.span);
                    }
                    if *op == AssignOp::Set && self.is_pointee_def(p, rhs) {
                        return;
                    }
                }
                self.expr(lhs, pos, &counts);
                self.expr(rhs, pos, &counts);
            }
            StmtKind::IncDec { target, .. } => {
                if let Some(p) = target.as_ident() {
                    if self.order(p) == 2 {
                        push(&mut self.iterated, p, &s.span);
                    }
                }
                self.expr(target, pos, &counts);
            }
            StmtKind::Expr(e) => self.expr(e, pos, &counts),
            StmtKind::For { init, cond, step, body } => {
                if let Some(init) = init {
                    self.stmt(init, Pos::Simple);
                }
                if let Some(cond) = cond {
                    self.expr(cond, Pos::Other, &counts);
                }
                if let Some(step) = step {
                    self.stmt(step, Pos::Step);
                }
                self.stmts(body);
            }
            StmtKind::While { cond, body } => {
                self.expr(cond, Pos::Other, &counts);
                self.stmts(body);
            }
            StmtKind::If { cond, then_body, else_body } => {
                self.expr(cond, Pos::Other, &counts);
                self.stmts(then_body);
                self.stmts(else_body);
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.expr(e, Pos::Other, &counts);
                }
            }
            StmtKind::Block(body) => self.stmts(body),
        }
    }

    fn is_pointee_def(&self, pp: &str, rhs: &Expr) -> bool {
        match (&rhs.kind, self.pointee.get(pp)) {
            (ExprKind::AddrOf(inner), Some(a)) => inner.as_ident() == Some(a.as_str()),
            _ => false,
        }
    }

    fn expr(&mut self, e: &Expr, pos: Pos, counts: &BTreeMap<String, usize>) {
        match &e.kind {
            ExprKind::AddrOf(inner) => {
                if let Some(x) = inner.as_ident() {
                    if self.order(x) >= 1 {
                        push(&mut self.escape, x, &e.span);
                    }
                } else {
                    self.expr(inner, pos, counts);
                }
            }
            ExprKind::Call { callee, args } => {
                for (i, a) in args.iter().enumerate() {
                    let delegated = match &a.kind {
                        ExprKind::AddrOf(inner) => inner
                            .as_ident()
                            .filter(|x| self.order(x) == 1 && pos == Pos::Simple && self.delegation.is_delegation(callee, i)),
                        _ => None,
                    };
                    match delegated {
                        Some(x) => self.delegation_calls.entry(site(e)).or_default().push(x.to_string()),
                        None => self.expr(a, pos, counts),
                    }
                }
            }
            ExprKind::IncDec { target, .. } => {
                if let Some(p) = target.as_ident() {
                    match self.order(p) {
                        2 => push(&mut self.iterated, p, &e.span),
                        1 if pos != Pos::Simple || counts.get(p) != Some(&1) => push(&mut self.arith, p, &e.span),
                        _ => {}
                    }
                }
                self.expr(target, pos, counts);
            }
            ExprKind::Index { base, index } => {
                self.expr(base, pos, counts);
                self.expr(index, pos, counts);
            }
            ExprKind::Deref(inner) => self.expr(inner, pos, counts),
            ExprKind::Member { base, .. } => self.expr(base, pos, counts),
            ExprKind::Unary { operand, .. } => self.expr(operand, pos, counts),
            ExprKind::Binary { lhs, rhs, .. } => {
                self.expr(lhs, pos, counts);
                self.expr(rhs, pos, counts);
            }
            ExprKind::Alloc { count, .. } => self.expr(count, pos, counts),
            ExprKind::IntLit(_) | ExprKind::FloatLit(_) | ExprKind::Ident(_) => {}
        }
    }
}

struct Flow<'a> {
    orders: &'a BTreeMap<String, usize>,
    arrays: &'a BTreeSet<String>,
    pointee: &'a BTreeMap<String, String>,
    backoff: &'a BTreeSet<String>,
    delegation_calls: &'a BTreeMap<Site, Vec<String>>,
    state: BTreeMap<String, Binding>,
    loop_depth: usize,
    sites_in_loop: BTreeSet<Site>,
    arrays_in_loop: BTreeSet<String>,
    conflicts: Spans,
    unproven: Spans,
    ident_roots: HashMap<Site, Binding>,
}

impl<'a> Flow<'a> {
    fn new(
        orders: &'a BTreeMap<String, usize>,
        arrays: &'a BTreeSet<String>,
        pointee: &'a BTreeMap<String, String>,
        backoff: &'a BTreeSet<String>,
        delegation_calls: &'a BTreeMap<Site, Vec<String>>,
    ) -> Self {
        Flow {
            orders,
            arrays,
            pointee,
            backoff,
            delegation_calls,
            state: BTreeMap::new(),
            loop_depth: 0,
            sites_in_loop: BTreeSet::new(),
            arrays_in_loop: BTreeSet::new(),
            conflicts: Spans::new(),
            unproven: Spans::new(),
            ident_roots: HashMap::new(),
        }
    }

    fn is_pointer(&self, name: &str) -> bool {
        self.orders.contains_key(name)
    }

    fn fresh_site(&mut self, e: &Expr) -> Root {
        let s = site(e);
        if self.loop_depth > 0 {
            self.sites_in_loop.insert(s);
        }
        Root::Opaque(s)
    }

    fn var_binding(&mut self, name: &str, e: &Expr) -> Binding {
        if self.backoff.contains(name) {
            Binding::Bound(self.fresh_site(e))
        } else {
            self.state.get(name).cloned().unwrap_or(Binding::Uninit)
        }
    }

    fn root_of(&mut self, e: &Expr) -> Binding {
        match &e.kind {
            ExprKind::Ident(q) if self.is_pointer(q) => self.var_binding(q, e),
            ExprKind::Ident(a) if self.arrays.contains(a) => Binding::Bound(Root::Array(a.clone())),
            ExprKind::Binary { op: BinaryOp::Add, lhs, rhs } if lhs.ty.decay().is_pointer() => self.root_of(lhs),
            ExprKind::Binary { op: BinaryOp::Add, lhs: _, rhs } if rhs.ty.decay().is_pointer() => self.root_of(rhs),
            ExprKind::Binary { op: BinaryOp::Sub, lhs, .. } if lhs.ty.decay().is_pointer() => self.root_of(lhs),
            ExprKind::AddrOf(inner) => match &inner.kind {
                ExprKind::Index { base, .. } => self.root_of(base),
                ExprKind::Ident(x) => Binding::Bound(Root::AddrOf(x.clone())),
                _ => Binding::Bound(self.fresh_site(e)),
            },
            ExprKind::Alloc { .. } => {
                let s = site(e);
                if self.loop_depth > 0 {
                    self.sites_in_loop.insert(s);
                }
                Binding::Bound(Root::Alloc(s))
            }
            ExprKind::IncDec { target, .. } => self.root_of(target),
            ExprKind::IntLit(0) => Binding::Bound(Root::Null),
            ExprKind::Index { base, .. } if e.ty.is_pointer() => {
                match base.as_ident().and_then(|pp| self.pointee.get(pp)).cloned() {
                    Some(a) => self.var_binding(&a, e),
                    None => Binding::Bound(self.fresh_site(e)),
                }
            }
            _ => Binding::Bound(self.fresh_site(e)),
        }
    }

    fn proven(&self, a: &Binding, b: &Binding, analysis_stable: impl Fn(&Root) -> bool) -> bool {
        matches!((a, b), (Binding::Bound(x), Binding::Bound(y)) if x == y && analysis_stable(x))
    }

    fn stable(&self, root: &Root) -> bool {
        match root {
            Root::Array(a) => !self.arrays_in_loop.contains(a),
            Root::Alloc(s) | Root::Opaque(s) => !self.sites_in_loop.contains(s),
            _ => true,
        }
    }

    /// Records pointer uses in `e`: conflicted bindings and unproven pairs.
    fn scan(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Ident(p) if self.is_pointer(p) => {
                let b = self.state.get(p).cloned().unwrap_or(Binding::Uninit);
                if b == Binding::Conflict {
                    push(&mut self.conflicts, p, &e.span);
                }
                self.ident_roots.insert(site(e), b);
            }
            ExprKind::Binary { op, lhs, rhs } => {
                if is_pointer_pair(*op, lhs, rhs) {
                    let (l, r) = (self.root_of(lhs), self.root_of(rhs));
                    if !self.proven(&l, &r, |root| self.stable(root)) {
                        for v in [base_var(lhs), base_var(rhs)].into_iter().flatten() {
                            if self.is_pointer(v) {
                                push(&mut self.unproven, v, &e.span);
                            }
                        }
                    }
                }
                self.scan(lhs);
                self.scan(rhs);
            }
            ExprKind::Index { base, index } => {
                self.scan(base);
                self.scan(index);
            }
            ExprKind::Deref(x) | ExprKind::AddrOf(x) => self.scan(x),
            ExprKind::Member { base, .. } => self.scan(base),
            ExprKind::Unary { operand, .. } => self.scan(operand),
            ExprKind::Call { args, .. } => args.iter().for_each(|a| self.scan(a)),
            ExprKind::Alloc { count, .. } => self.scan(count),
            ExprKind::IncDec { target, .. } => self.scan(target),
            ExprKind::Ident(_) | ExprKind::IntLit(_) | ExprKind::FloatLit(_) => {}
        }
    }

    fn after_delegation(&mut self, s: &Stmt) {
        for e in s.own_exprs() {
            e.walk(&mut |n| {
                if let Some(vars) = self.delegation_calls.get(&site(n)) {
                    for v in vars {
                        let root = Root::Opaque(site(n));
                        if self.loop_depth > 0 {
                            self.sites_in_loop.insert(site(n));
                        }
                        self.state.insert(v.clone(), Binding::Bound(root));
                    }
                }
            });
        }
    }

    fn stmts(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            self.stmt(s);
        }
    }

    fn join_into(&mut self, other: &BTreeMap<String, Binding>) {
        let keys: BTreeSet<String> = self.state.keys().chain(other.keys()).cloned().collect();
        for k in keys {
            let a = self.state.get(&k).cloned().unwrap_or(Binding::Uninit);
            let b = other.get(&k).cloned().unwrap_or(Binding::Uninit);
            self.state.insert(k, a.join(&b));
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Decl { name, init, ty } => {
                if let Some(e) = init {
                    self.scan(e);
                }
                if self.is_pointer(name) {
                    let b = match init {
                        Some(e) => self.root_of(e),
                        None => Binding::Uninit,
                    };
                    self.state.insert(name.clone(), b);
                } else if ty.is_array() && self.loop_depth > 0 {
                    self.arrays_in_loop.insert(name.clone());
                }
                self.after_delegation(s);
            }
            StmtKind::Assign { lhs, op, rhs } => {
                self.scan(rhs);
                let rebind = match lhs.as_ident() {
                    Some(p) if self.is_pointer(p) && *op == AssignOp::Set && base_var(rhs) != Some(p) => Some(p),
                    _ => None,
                };
                match rebind {
                    Some(p) => {
                        let b = self.root_of(rhs);
                        self.ident_roots.insert(site(lhs), b.clone());
                        self.state.insert(p.to_string(), b);
                    }
                    None => self.scan(lhs),
                }
                self.after_delegation(s);
            }
            StmtKind::IncDec { target, .. } => self.scan(target),
            StmtKind::Expr(e) => {
                self.scan(e);
                self.after_delegation(s);
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.scan(e);
                }
            }
            StmtKind::Block(body) => self.stmts(body),
            StmtKind::If { cond, then_body, else_body } => {
                self.scan(cond);
                let before = self.state.clone();
                self.stmts(then_body);
                let after_then = std::mem::replace(&mut self.state, before);
                self.stmts(else_body);
                self.join_into(&after_then);
            }
            StmtKind::While { cond, body } => self.fixpoint(Some(cond), None, body),
            StmtKind::For { init, cond, step, body } => {
                if let Some(init) = init {
                    self.stmt(init);
                }
                self.fixpoint(cond.as_ref(), step.as_deref(), body);
            }
        }
    }

    fn fixpoint(&mut self, cond: Option<&Expr>, step: Option<&Stmt>, body: &[Stmt]) {
        self.loop_depth += 1;
        loop {
            let head = self.state.clone();
            if let Some(c) = cond {
                self.scan(c);
            }
            self.stmts(body);
            if let Some(step) = step {
                self.stmt(step);
            }
            self.join_into(&head);
            if self.state == head {
                break;
            }
        }
        if let Some(c) = cond {
            self.scan(c);
        }
        self.loop_depth -= 1;
    }
}
