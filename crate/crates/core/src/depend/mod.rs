//! Loop-dependence analysis. Each loop gets a verdict from an interval
//! test over per-iteration access ranges that are affine in the loop's
//! induction variables, plus scalar reduction and privatization checks.

mod linear;
mod oracle;
mod walk;

pub use oracle::permutation_check;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::adjunct::{display_name, normalize_derefs, uniquify};
use crate::cast::{print_expr, AssignOp, BinaryOp, CType, Expr, ExprKind, Function, SourceSpan, Stmt, StmtKind, TranslationUnit, UnaryOp};
use crate::effects::{Effect, EffectDatabase};

use linear::{linearize, Lin};
use walk::{Access, Key, Kind, Range, ScalarEvent, Walker, Writes};

/// A variable advanced by a loop-invariant stride exactly once per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct InductionVar {
    pub variable: String,
    pub loop_span: SourceSpan,
    pub start: Expr,
    pub stride: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessKind {
    Read,
    Write,
}

/// Element range touched by one access in one iteration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum AccessRange {
    /// Half-open interval `[lo, hi)` in induction variables and invariants.
    Affine { lo: String, hi: String },
    Whole,
    NonAffine { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AccessSummary {
    pub container: String,
    pub kind: AccessKind,
    pub range: AccessRange,
    pub site: SourceSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LoopVerdict {
    Parallel,
    Unknown,
    Serial,
}

impl LoopVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            LoopVerdict::Parallel => "parallel",
            LoopVerdict::Unknown => "unknown",
            LoopVerdict::Serial => "serial",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopReport {
    pub function: String,
    pub span: SourceSpan,
    pub verdict: LoopVerdict,
    pub induction: Vec<String>,
    pub reductions: Vec<String>,
    pub evidence: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DependenceReport {
    pub loops: Vec<LoopReport>,
}

impl DependenceReport {
    /// The loop starting on `line`, if exactly one does.
    pub fn at_line(&self, line: u32) -> Option<&LoopReport> {
        let mut hits = self.loops.iter().filter(|l| l.span.line == line);
        let first = hits.next()?;
        hits.next().is_none().then_some(first)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Update {
    Step,
    Body(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct Iv {
    pub name: String,
    pub start: Expr,
    pub stride: Expr,
    pub stride_lin: Option<Lin>,
    pub update: Update,
}

/// Iteration-carried state: condition, body and step, but not the init.
fn loop_writes(lp: &Stmt) -> Writes {
    match &lp.kind {
        StmtKind::For { cond, step, body, .. } => {
            Writes::of(body.iter().chain(step.as_deref()), cond.iter())
        }
        StmtKind::While { cond, body } => Writes::of(body, [cond]),
        _ => Writes::default(),
    }
}

fn is_arith(e: &Expr) -> bool {
    let mut ok = true;
    e.walk(&mut |n| {
        if !matches!(
            n.kind,
            ExprKind::IntLit(_) | ExprKind::Ident(_) | ExprKind::Unary { .. } | ExprKind::Binary { .. }
        ) {
            ok = false;
        }
    });
    ok
}

/// Update `v += s` encoded by a statement, as `(v, s)`.
fn stride_update(s: &Stmt) -> Option<(&str, Expr)> {
    match &s.kind {
        StmtKind::IncDec { target, delta } => {
            let v = target.as_ident()?;
            Some((v, Expr::int(*delta as i64, s.span.clone())))
        }
        StmtKind::Assign { lhs, op, rhs } => {
            let v = lhs.as_ident()?;
            match op {
                AssignOp::Add => Some((v, rhs.clone())),
                AssignOp::Sub => Some((v, negate(rhs))),
                AssignOp::Set => match &rhs.kind {
                    ExprKind::Binary { op: BinaryOp::Add, lhs: a, rhs: b } if a.as_ident() == Some(v) => {
                        Some((v, (**b).clone()))
                    }
                    ExprKind::Binary { op: BinaryOp::Add, lhs: a, rhs: b } if b.as_ident() == Some(v) => {
                        Some((v, (**a).clone()))
                    }
                    ExprKind::Binary { op: BinaryOp::Sub, lhs: a, rhs: b } if a.as_ident() == Some(v) => {
                        Some((v, negate(b)))
                    }
                    _ => None,
                },
                _ => None,
            }
        }
        _ => None,
    }
}

fn negate(e: &Expr) -> Expr {
    if let ExprKind::IntLit(c) = e.kind {
        return Expr::new(ExprKind::IntLit(c.wrapping_neg()), e.ty.clone(), e.span.clone());
    }
    Expr::new(ExprKind::Unary { op: UnaryOp::Neg, operand: Box::new(e.clone()) }, e.ty.clone(), e.span.clone())
}

fn induction(lp: &Stmt) -> Vec<Iv> {
    let (init, step, body) = match &lp.kind {
        StmtKind::For { init, step, body, .. } => (init.as_deref(), step.as_deref(), body),
        StmtKind::While { body, .. } => (None, None, body),
        _ => return vec![],
    };
    let writes = loop_writes(lp);
    let candidates = step
        .map(|s| (s, Update::Step))
        .into_iter()
        .chain(body.iter().enumerate().map(|(i, s)| (s, Update::Body(i))));
    let mut out = Vec::new();
    for (s, update) in candidates {
        let Some((v, stride)) = stride_update(s) else { continue };
        let ty = match &s.kind {
            StmtKind::IncDec { target, .. } | StmtKind::Assign { lhs: target, .. } => &target.ty,
            _ => continue,
        };
        if !ty.is_integer()
            || writes.counts.get(v) != Some(&1)
            || writes.declared.contains(v)
            || !is_arith(&stride)
            || stride.mentions(&|n| writes.written(n))
        {
            continue;
        }
        let start = match init.map(|i| &i.kind) {
            Some(StmtKind::Decl { name, init: Some(e), .. }) if name == v => e.clone(),
            Some(StmtKind::Assign { lhs, op: AssignOp::Set, rhs }) if lhs.as_ident() == Some(v) => rhs.clone(),
            _ => Expr::ident(v, ty.clone(), s.span.clone()),
        };
        out.push(Iv { name: v.to_string(), stride_lin: linearize(&stride).ok(), start, stride, update });
    }
    out
}

/// Induction variables of a `for` or `while` loop.
pub fn find_induction(lp: &Stmt) -> Vec<InductionVar> {
    induction(lp)
        .into_iter()
        .map(|iv| InductionVar { variable: iv.name, loop_span: lp.span.clone(), start: iv.start, stride: iv.stride })
        .collect()
}

/// Per-function facts: variable types and pointer alias classes.
pub(crate) struct Ctx<'a> {
    pub db: &'a EffectDatabase,
    types: HashMap<String, CType>,
    params: HashSet<String>,
    rep: HashMap<String, String>,
    members: HashMap<String, Vec<String>>,
    /// Classes whose pointers may come from outside the function.
    external: HashSet<String>,
    /// Classes whose members always hold the same address.
    anchored: HashSet<String>,
}

impl<'a> Ctx<'a> {
    fn new(f: &Function, db: &'a EffectDatabase) -> Self {
        let mut types = HashMap::new();
        for p in &f.params {
            types.insert(p.name.clone(), p.ty.clone());
        }
        // `drifting` names may hold an address other than their class's origin.
        struct Bindings {
            edges: Vec<(String, String)>,
            outside: Vec<String>,
            origins: Vec<String>,
            drifting: Vec<String>,
        }
        let mut g = Bindings { edges: Vec::new(), outside: Vec::new(), origins: Vec::new(), drifting: Vec::new() };
        let bind = |name: &str, e: &Expr, g: &mut Bindings| {
            let (root, offsets) = walk::split_pointer(e);
            if !offsets.is_empty() {
                g.drifting.push(name.to_string());
            }
            match &root.kind {
                ExprKind::Ident(v) => g.edges.push((name.to_string(), v.clone())),
                ExprKind::AddrOf(inner) if inner.as_ident().is_some() => {
                    g.origins.push(name.to_string());
                    g.edges.push((name.to_string(), inner.as_ident().unwrap_or_default().to_string()))
                }
                ExprKind::IntLit(_) => {}
                ExprKind::Alloc { .. } | ExprKind::Call { .. } => g.origins.push(name.to_string()),
                _ => {
                    g.origins.push(name.to_string());
                    g.outside.push(name.to_string());
                }
            }
        };
        for p in &f.params {
            g.origins.push(p.name.clone());
        }
        for s in f.body.iter().flatten() {
            s.walk(&mut |s| match &s.kind {
                StmtKind::Decl { name, ty, init } => {
                    types.insert(name.clone(), ty.clone());
                    if ty.is_array() {
                        g.origins.push(name.clone());
                    }
                    if let Some(e) = init.as_ref().filter(|_| ty.order() > 0) {
                        bind(name, e, &mut g);
                    }
                }
                StmtKind::Assign { lhs, op: AssignOp::Set, rhs } if lhs.ty.order() > 0 => {
                    if let Some(v) = lhs.as_ident() {
                        bind(v, rhs, &mut g);
                    }
                }
                StmtKind::Assign { lhs, .. } | StmtKind::IncDec { target: lhs, .. } if lhs.ty.order() > 0 => {
                    g.drifting.extend(lhs.as_ident().map(str::to_string));
                }
                _ => {}
            });
            s.walk_exprs(&mut |e| match &e.kind {
                ExprKind::AddrOf(inner) | ExprKind::IncDec { target: inner, .. } => {
                    g.drifting.extend(inner.as_ident().map(str::to_string));
                }
                _ => {}
            });
        }
        let mut parent: HashMap<String, String> = HashMap::new();
        fn find(parent: &mut HashMap<String, String>, v: &str) -> String {
            let mut cur = v.to_string();
            while let Some(p) = parent.get(&cur).filter(|p| **p != cur) {
                cur = p.clone();
            }
            parent.insert(v.to_string(), cur.clone());
            cur
        }
        let Bindings { edges, outside, origins, drifting } = g;
        for (a, b) in &edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                parent.insert(hi, lo);
            }
        }
        let names: Vec<String> = types.keys().cloned().collect();
        let mut rep = HashMap::new();
        let mut members: HashMap<String, Vec<String>> = HashMap::new();
        for n in names {
            let r = find(&mut parent, &n);
            members.entry(r.clone()).or_default().push(n.clone());
            rep.insert(n, r);
        }
        for m in members.values_mut() {
            m.sort();
        }
        let params: HashSet<String> = f.params.iter().map(|p| p.name.clone()).collect();
        let mut external = HashSet::new();
        for n in outside.iter().chain(params.iter()) {
            if let Some(r) = rep.get(n) {
                external.insert(r.clone());
            }
        }
        let mut origin_count: HashMap<String, usize> = HashMap::new();
        for n in &origins {
            if let Some(r) = rep.get(n) {
                *origin_count.entry(r.clone()).or_default() += 1;
            }
        }
        let mut anchored: HashSet<String> = members.keys().filter(|r| origin_count.get(*r).copied().unwrap_or(0) <= 1).cloned().collect();
        for n in &drifting {
            if let Some(r) = rep.get(n) {
                anchored.remove(r);
            }
        }
        Ctx { db, types, params, rep, members, external, anchored }
    }

    pub fn class_of(&self, v: &str) -> String {
        self.rep.get(v).cloned().unwrap_or_else(|| v.to_string())
    }

    pub fn is_array(&self, v: &str) -> bool {
        self.types.get(v).is_some_and(CType::is_array)
    }

    fn is_pointer(&self, v: &str) -> bool {
        self.types.get(v).is_some_and(CType::is_pointer)
    }

    fn class_members(&self, rep: &str) -> Vec<String> {
        self.members.get(rep).cloned().unwrap_or_else(|| vec![rep.to_string()])
    }
}

/// Statements that can observe a variable after the loop finishes.
struct After<'t> {
    stmts: Vec<&'t Stmt>,
    skip: *const Stmt,
}

fn path_to<'t>(list: &'t [Stmt], target: *const Stmt, out: &mut Vec<(&'t [Stmt], usize)>) -> bool {
    for (i, s) in list.iter().enumerate() {
        out.push((list, i));
        if std::ptr::eq(s, target) {
            return true;
        }
        let nested: Vec<&'t [Stmt]> = match &s.kind {
            StmtKind::For { body, .. } | StmtKind::While { body, .. } | StmtKind::Block(body) => vec![body],
            StmtKind::If { then_body, else_body, .. } => vec![then_body, else_body],
            _ => vec![],
        };
        for l in nested {
            if path_to(l, target, out) {
                return true;
            }
        }
        out.pop();
    }
    false
}

impl<'t> After<'t> {
    fn new(body: &'t [Stmt], lp: &'t Stmt) -> After<'t> {
        let mut path = Vec::new();
        path_to(body, lp, &mut path);
        let mut stmts = Vec::new();
        for (list, i) in &path {
            stmts.extend(list[i + 1..].iter());
        }
        if let Some((list, i)) = path.iter().find(|(list, i)| list[*i].is_loop() && !std::ptr::eq(&list[*i], lp)) {
            stmts.push(&list[*i]);
        }
        After { stmts, skip: lp }
    }

    fn reads_any(&self, names: &[String], db: &EffectDatabase) -> bool {
        let mut found = false;
        for s in &self.stmts {
            stmt_reads(s, names, db, self.skip, &mut found);
        }
        found
    }
}

fn stmt_reads(s: &Stmt, names: &[String], db: &EffectDatabase, skip: *const Stmt, found: &mut bool) {
    if std::ptr::eq(s, skip) || *found {
        return;
    }
    let hit = |n: &str| names.iter().any(|x| x == n);
    *found |= match &s.kind {
        StmtKind::Assign { lhs, op: AssignOp::Set, rhs } if lhs.as_ident().is_some() => expr_reads(rhs, &hit, db),
        _ => s.own_exprs().into_iter().any(|e| expr_reads(e, &hit, db)),
    };
    for c in s.children() {
        stmt_reads(c, names, db, skip, found);
    }
}

/// True if evaluating `e` may read a variable matching `hit`; variables
/// passed to write-only parameters, possibly offset, do not count.
fn expr_reads(e: &Expr, hit: &dyn Fn(&str) -> bool, db: &EffectDatabase) -> bool {
    match &e.kind {
        ExprKind::IntLit(_) | ExprKind::FloatLit(_) => false,
        ExprKind::Ident(v) => hit(v),
        ExprKind::Call { callee, args } => args.iter().enumerate().any(|(k, a)| {
            let (root, offsets) = walk::split_pointer(a);
            if db.effect_of(callee, k) == Effect::Write && root.as_ident().is_some() {
                offsets.iter().any(|(o, _)| expr_reads(o, hit, db))
            } else {
                expr_reads(a, hit, db)
            }
        }),
        ExprKind::Index { base, index } => expr_reads(base, hit, db) || expr_reads(index, hit, db),
        ExprKind::Binary { lhs, rhs, .. } => expr_reads(lhs, hit, db) || expr_reads(rhs, hit, db),
        ExprKind::Deref(x) | ExprKind::AddrOf(x) | ExprKind::Member { base: x, .. } => expr_reads(x, hit, db),
        ExprKind::Unary { operand: x, .. } | ExprKind::Alloc { count: x, .. } | ExprKind::IncDec { target: x, .. } => {
            expr_reads(x, hit, db)
        }
    }
}

struct Outcome {
    verdict: LoopVerdict,
    serial: Vec<String>,
    unknown: Vec<String>,
    notes: Vec<String>,
}

impl Outcome {
    fn serial(&mut self, why: String) {
        self.serial.push(why);
    }
    fn unknown(&mut self, why: String) {
        self.unknown.push(why);
    }
}

fn fmt_range(lo: &Lin, hi: &Lin) -> (String, String) {
    (lo.to_string(), hi.add(&Lin::constant(1)).to_string())
}

fn delta(lin: &Lin, ivs: &[Iv]) -> Option<Lin> {
    let mut d = Lin::default();
    for iv in ivs {
        let c = lin.coeff(&iv.name);
        if c != 0 {
            d = d.add(&iv.stride_lin.as_ref()?.scale(c));
        }
    }
    Some(d)
}

enum Pair {
    Disjoint,
    Overlap,
    Unproven,
}

/// Whether distinct iterations of two accesses touch disjoint intervals.
fn disjoint(a: (&Lin, &Lin), b: (&Lin, &Lin), ivs: &[Iv]) -> Pair {
    let deltas = [delta(a.0, ivs), delta(a.1, ivs), delta(b.0, ivs), delta(b.1, ivs)];
    let [Some(d), rest @ ..] = deltas else { return Pair::Unproven };
    if rest.iter().any(|x| x.as_ref() != Some(&d)) {
        return Pair::Unproven;
    }
    let one = Lin::constant(1);
    let gap = |d: &Lin, h: &Lin, l: &Lin| d.sub(&h.sub(l)).sub(&one);
    for dir in [d.clone(), d.scale(-1)] {
        let (g1, g2) = (gap(&dir, a.1, b.0), gap(&dir, b.1, a.0));
        if g1.nonnegative() && g2.nonnegative() {
            return Pair::Disjoint;
        }
    }
    let concrete = d.as_constant().is_some()
        && a.1.sub(b.0).as_constant().is_some()
        && b.1.sub(a.0).as_constant().is_some();
    if concrete {
        Pair::Overlap
    } else {
        Pair::Unproven
    }
}

fn reduction_op(events: &[ScalarEvent]) -> Option<BinaryOp> {
    let family = |op: BinaryOp| match op {
        BinaryOp::Sub => BinaryOp::Add,
        other => other,
    };
    let mut op = None;
    for ev in events {
        let ScalarEvent::Reduce(o) = ev else { return None };
        let o = family(*o);
        if !matches!(o, BinaryOp::Add | BinaryOp::Mul | BinaryOp::BitAnd | BinaryOp::BitOr | BinaryOp::BitXor) {
            return None;
        }
        if op.is_some_and(|p| p != o) {
            return None;
        }
        op = Some(o);
    }
    op
}

fn loop_report(f: &Function, body: &[Stmt], lp: &Stmt, ctx: &Ctx) -> LoopReport {
    let ivs = induction(lp);
    let writes = loop_writes(lp);
    let mut walker = Walker::new(ctx, &ivs, &writes);
    walker.iteration(lp);
    let after = After::new(body, lp);
    let mut out = Outcome { verdict: LoopVerdict::Parallel, serial: vec![], unknown: vec![], notes: vec![] };

    for r in &walker.returns {
        out.serial(format!("loop body can return early at {r}"));
    }
    let mut reductions = Vec::new();
    for (v, events) in &walker.scalars {
        let shown = display_name(v);
        let writes_it = events.iter().any(|e| !matches!(e, ScalarEvent::Read));
        if writes.declared.contains(v) || !writes_it {
            continue;
        }
        if ctx.is_pointer(v) {
            out.unknown(format!("pointer `{shown}` is reassigned inside the loop"));
        } else if let Some(op) = reduction_op(events) {
            reductions.push(shown.to_string());
            out.notes.push(format!("`{shown}` is a `{}` reduction", op.symbol()));
        } else if matches!(events[0], ScalarEvent::Set { unconditional: true })
            && !after.reads_any(std::slice::from_ref(v), ctx.db)
        {
            out.notes.push(format!("`{shown}` is assigned before use in every iteration and dead after the loop"));
        } else {
            out.serial(format!("scalar `{shown}` carries a value between iterations"));
        }
    }

    let mut by_key: BTreeMap<&Key, Vec<&Access>> = BTreeMap::new();
    for a in &walker.accesses {
        by_key.entry(&a.key).or_default().push(a);
    }
    let written: BTreeSet<&Key> =
        by_key.iter().filter(|(_, v)| v.iter().any(|a| a.kind == Kind::Write)).map(|(k, _)| *k).collect();
    let mut shared_writes = false;
    for (key, accesses) in &by_key {
        if !written.contains(key) {
            continue;
        }
        let label = &accesses[0].label;
        let members = match key {
            Key::Class(rep) => ctx.class_members(rep),
            _ => vec![],
        };
        if !members.is_empty() && members.iter().all(|m| writes.declared.contains(m)) {
            continue;
        }
        if **key == Key::Opaque {
            out.unknown(format!("write through untracked pointer `{label}`"));
            continue;
        }
        let dead = matches!(key, Key::Class(rep) if !ctx.external.contains(rep))
            && !members.iter().any(|m| ctx.params.contains(m))
            && !after.reads_any(&members, ctx.db);
        if accesses[0].kill && dead {
            out.notes.push(format!("`{label}` is overwritten before use in every iteration and dead after the loop"));
            continue;
        }
        shared_writes = true;
        let anchored = matches!(key, Key::Class(rep) if ctx.anchored.contains(rep));
        check_container(label, accesses, &ivs, anchored, &mut out);
    }
    if shared_writes && by_key.contains_key(&Key::Opaque) {
        out.unknown("read through untracked pointer may alias a written container".into());
    }

    let verdict = if !out.serial.is_empty() {
        LoopVerdict::Serial
    } else if !out.unknown.is_empty() {
        LoopVerdict::Unknown
    } else {
        LoopVerdict::Parallel
    };
    out.verdict = verdict;
    let mut evidence: Vec<String> = ivs
        .iter()
        .map(|iv| {
            format!(
                "induction `{}` starts at {} with stride {}",
                display_name(&iv.name),
                shown_expr(&iv.start),
                shown_expr(&iv.stride)
            )
        })
        .collect();
    evidence.extend(match verdict {
        LoopVerdict::Serial => out.serial,
        LoopVerdict::Unknown => out.unknown,
        LoopVerdict::Parallel => out.notes,
    });
    evidence.dedup();
    LoopReport {
        function: f.name.clone(),
        span: lp.span.clone(),
        verdict,
        induction: ivs.iter().map(|iv| display_name(&iv.name).to_string()).collect(),
        reductions,
        evidence,
    }
}

fn check_container(label: &str, accesses: &[&Access], ivs: &[Iv], anchored: bool, out: &mut Outcome) {
    let mut proved = Vec::new();
    for w in accesses.iter().filter(|a| a.kind == Kind::Write) {
        for x in accesses {
            match (&w.range, &x.range) {
                (Range::Whole, _) => {
                    out.serial(format!("call at {} writes all of `{label}`, which outlives the iteration", w.site));
                }
                (_, Range::Whole) => {
                    out.serial(format!("call at {} accesses all of `{label}` while it is written", x.site));
                }
                (Range::NonAffine(why), _) | (_, Range::NonAffine(why)) => {
                    out.unknown(format!("access to `{label}` is not affine: {why}"));
                }
                (Range::Span { .. }, Range::Span { .. }) if !anchored && w.base != x.base => {
                    out.unknown(format!(
                        "accesses at {} and {} go through pointers to `{label}` that may differ",
                        w.site, x.site
                    ));
                }
                (Range::Span { lo: wl, hi: wh }, Range::Span { lo: xl, hi: xh }) => {
                    match disjoint((wl, wh), (xl, xh), ivs) {
                        Pair::Disjoint => {
                            if std::ptr::eq(*w, *x) {
                                let (lo, hi) = fmt_range(wl, wh);
                                let step = delta(wl, ivs).map_or_else(String::new, |d| d.to_string());
                                proved.push(format!(
                                    "writes to `{label}` cover [{lo}, {hi}) and advance by {step} per iteration"
                                ));
                            }
                        }
                        Pair::Overlap => out.serial(format!(
                            "write at {} and access at {} reach the same element of `{label}` in different iterations",
                            w.site, x.site
                        )),
                        Pair::Unproven => out.unknown(format!(
                            "cannot prove accesses at {} and {} to `{label}` are disjoint across iterations",
                            w.site, x.site
                        )),
                    }
                }
            }
        }
    }
    out.notes.extend(proved);
}

fn shown_expr(e: &Expr) -> String {
    let mut e = e.clone();
    e.walk_mut(&mut |n| {
        if let ExprKind::Ident(v) = &mut n.kind {
            *v = display_name(v).to_string();
        }
    });
    print_expr(&e)
}

fn loops_of(body: &[Stmt]) -> Vec<&Stmt> {
    let mut out = Vec::new();
    for s in body {
        s.walk(&mut |s| {
            if s.is_loop() {
                out.push(s);
            }
        });
    }
    out
}

fn prepare(f: &Function) -> Function {
    let tu = TranslationUnit { records: vec![], functions: vec![f.clone()] };
    let tu = normalize_derefs(tu);
    uniquify(&tu.functions[0]).0
}

/// Access summaries for one iteration of `lp`, a loop inside `f`.
pub fn summarize_accesses(f: &Function, lp: &Stmt, db: &EffectDatabase) -> Vec<AccessSummary> {
    let uf = prepare(f);
    let Some(body) = &uf.body else { return vec![] };
    let Some(target) = loops_of(body).into_iter().find(|l| l.span == lp.span) else { return vec![] };
    let ctx = Ctx::new(&uf, db);
    let ivs = induction(target);
    let writes = loop_writes(target);
    let mut walker = Walker::new(&ctx, &ivs, &writes);
    walker.iteration(target);
    walker
        .accesses
        .into_iter()
        .map(|a| AccessSummary {
            container: a.label,
            kind: match a.kind {
                Kind::Read => AccessKind::Read,
                Kind::Write => AccessKind::Write,
            },
            range: match a.range {
                Range::Span { lo, hi } => {
                    let (lo, hi) = fmt_range(&lo, &hi);
                    AccessRange::Affine { lo, hi }
                }
                Range::Whole => AccessRange::Whole,
                Range::NonAffine(reason) => AccessRange::NonAffine { reason },
            },
            site: a.site,
        })
        .collect()
}

/// Verdicts for every loop of every function, in source order.
pub fn analyze(tu: &TranslationUnit, db: &EffectDatabase) -> DependenceReport {
    let mut loops = Vec::new();
    for f in &tu.functions {
        let uf = prepare(f);
        let Some(body) = &uf.body else { continue };
        let ctx = Ctx::new(&uf, db);
        for lp in loops_of(body) {
            loops.push(loop_report(&uf, body, lp, &ctx));
        }
    }
    DependenceReport { loops }
}

#[cfg(test)]
mod tests;
