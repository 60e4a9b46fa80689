use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    builtins, ContainerState, EventKind, FinalState, IterationOrder, LoopSchedule, Pointer, RunOptions, Scalar, Trace,
    TraceEvent, Trap, TrapKind, Value,
};
use crate::cast::{
    AllocStyle, AssignOp, BinaryOp, CType, Expr, ExprKind, Function, SourceSpan, Stmt, StmtKind, TranslationUnit,
    UnaryOp,
};

const MAX_DEPTH: usize = 256;

pub(super) struct Fault {
    pub kind: TrapKind,
    pub span: SourceSpan,
    pub message: String,
}

pub(super) type R<T> = Result<T, Fault>;

pub(super) fn fault<T>(kind: TrapKind, span: &SourceSpan, message: impl Into<String>) -> R<T> {
    Err(Fault { kind, span: span.clone(), message: message.into() })
}

pub(super) struct Container {
    /// Set for arrays and allocations; plain variables have none and are not traced.
    pub data_id: Option<usize>,
    pub element: CType,
    /// Field name and type of each slot within one element.
    pub slots_per_elem: Vec<(Option<String>, CType)>,
    pub len: usize,
    pub slots: Vec<Option<Value>>,
    pub freed: bool,
}

/// A memory location: element `offset` of a container, optionally one field.
#[derive(Clone, Copy)]
pub(super) struct Place {
    pub container: usize,
    pub offset: i64,
    pub field: Option<usize>,
}

enum Flow {
    Normal,
    Return(Option<Value>),
}

#[derive(Clone, Copy)]
struct Var {
    container: usize,
    is_array: bool,
}

#[derive(Default)]
struct Frame {
    scopes: Vec<HashMap<String, Var>>,
}

pub(super) struct Machine<'a> {
    functions: HashMap<&'a str, &'a Function>,
    records: HashMap<&'a str, Vec<(String, CType)>>,
    pub containers: Vec<Container>,
    next_data: usize,
    pub events: Vec<TraceEvent>,
    fuel: u64,
    schedule: Option<&'a LoopSchedule>,
    scheduled_runs: u64,
    frames: Vec<Frame>,
}

impl<'a> Machine<'a> {
    pub fn new(tu: &'a TranslationUnit, options: &'a RunOptions) -> Self {
        let mut functions = HashMap::new();
        for f in &tu.functions {
            if f.body.is_some() || !functions.contains_key(f.name.as_str()) {
                functions.insert(f.name.as_str(), f);
            }
        }
        let records = tu.records.iter().map(|r| (r.name.as_str(), r.fields.clone())).collect();
        Machine {
            functions,
            records,
            containers: Vec::new(),
            next_data: 0,
            events: Vec::new(),
            fuel: options.fuel,
            schedule: options.schedule.as_ref(),
            scheduled_runs: 0,
            frames: Vec::new(),
        }
    }

    pub fn run(mut self, entry: &str, inputs: &[Value]) -> Result<Trace, Trap> {
        match self.run_entry(entry, inputs) {
            Ok(trace) => Ok(trace),
            Err(f) => Err(Trap { kind: f.kind, span: f.span, message: f.message, partial: self.events }),
        }
    }

    fn run_entry(&mut self, entry: &str, inputs: &[Value]) -> R<Trace> {
        let synthetic = SourceSpan::synthetic();
        let Some(f) = self.functions.get(entry).copied() else {
            return fault(TrapKind::BadEntry, &synthetic, format!("no function `{entry}`"));
        };
        let Some(body) = &f.body else {
            return fault(TrapKind::BadEntry, &f.span, format!("`{entry}` has no body"));
        };
        if f.params.len() != inputs.len() {
            return fault(
                TrapKind::BadEntry,
                &f.span,
                format!("`{entry}` takes {} inputs, got {}", f.params.len(), inputs.len()),
            );
        }
        self.frames.push(Frame { scopes: vec![HashMap::new()] });
        for (p, v) in f.params.iter().zip(inputs) {
            let v = self.convert(*v, &p.ty);
            self.declare_cell(&p.name, &p.ty, Some(v));
        }
        let flow = self.block(body, false)?;
        let returned = match flow {
            Flow::Return(v) => v.map(|v| self.convert(v, &f.ret)),
            Flow::Normal => None,
        };
        let final_state = self.reachable(returned);
        Ok(Trace {
            events: std::mem::take(&mut self.events),
            returned: returned.map(|v| self.scalar(v)),
            final_state,
        })
    }

    fn reachable(&self, returned: Option<Value>) -> FinalState {
        let mut work: Vec<usize> = Vec::new();
        if let Some(Value::Ptr(Pointer { target: Some(c), .. })) = returned {
            work.push(c);
        }
        for frame in &self.frames {
            for scope in &frame.scopes {
                work.extend(scope.values().map(|v| v.container));
            }
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        while let Some(c) = work.pop() {
            if !seen.insert(c) {
                continue;
            }
            let container = &self.containers[c];
            if container.freed {
                continue;
            }
            for v in container.slots.iter().flatten() {
                if let Value::Ptr(Pointer { target: Some(t), .. }) = v {
                    work.push(*t);
                }
            }
            if let Some(id) = container.data_id {
                out.push(ContainerState {
                    container: id,
                    element: container.element.to_string(),
                    values: container.slots.iter().map(|v| v.map(|v| self.scalar(v))).collect(),
                });
            }
        }
        out.sort_by_key(|c| c.container);
        FinalState { containers: out }
    }

    pub fn scalar(&self, v: Value) -> Scalar {
        match v {
            Value::Int(i) => Scalar::Int(i),
            Value::Float(f) => Scalar::Float(f),
            Value::Ptr(Pointer { target: None, .. }) => Scalar::Null,
            Value::Ptr(Pointer { target: Some(c), offset }) => match self.containers[c].data_id {
                Some(id) => Scalar::Pointer { container: id, offset },
                None => Scalar::Variable { offset },
            },
        }
    }

    fn slots_of(&self, ty: &CType) -> Vec<(Option<String>, CType)> {
        match ty {
            CType::Record(name) => self
                .records
                .get(name.as_str())
                .map(|fields| fields.iter().map(|(n, t)| (Some(n.clone()), t.clone())).collect())
                .unwrap_or_default(),
            other => vec![(None, other.clone())],
        }
    }

    fn new_container(&mut self, element: &CType, len: usize, data: bool) -> usize {
        let slots_per_elem = self.slots_of(element);
        let data_id = data.then(|| {
            self.next_data += 1;
            self.next_data - 1
        });
        let n = slots_per_elem.len().max(1) * len;
        self.containers.push(Container {
            data_id,
            element: element.clone(),
            slots_per_elem,
            len,
            slots: vec![None; n],
            freed: false,
        });
        let c = self.containers.len() - 1;
        if let Some(id) = data_id {
            self.push_event(id, len as i64, None, EventKind::Alloc, None);
        }
        c
    }

    /// Allocates a traced data container of `len` elements.
    pub fn alloc_data(&mut self, element: &CType, len: usize) -> usize {
        self.new_container(element, len, true)
    }

    fn push_event(&mut self, id: usize, offset: i64, field: Option<String>, kind: EventKind, value: Option<Scalar>) {
        let seq = self.events.len();
        self.events.push(TraceEvent { seq, container: id, offset, field, kind, value });
    }

    fn declare_cell(&mut self, name: &str, ty: &CType, init: Option<Value>) -> usize {
        let c = self.new_container(ty, 1, false);
        if let Some(v) = init {
            self.containers[c].slots[0] = Some(v);
        }
        self.bind(name, Var { container: c, is_array: false });
        c
    }

    fn bind(&mut self, name: &str, var: Var) {
        let frame = self.frames.last_mut().expect("active frame");
        frame.scopes.last_mut().expect("active scope").insert(name.to_string(), var);
    }

    fn lookup(&self, name: &str, span: &SourceSpan) -> R<Var> {
        let frame = self.frames.last().expect("active frame");
        match frame.scopes.iter().rev().find_map(|s| s.get(name)) {
            Some(v) => Ok(*v),
            None => fault(TrapKind::BadEntry, span, format!("unknown variable `{name}`")),
        }
    }

    fn tick(&mut self, span: &SourceSpan) -> R<()> {
        if self.fuel == 0 {
            return fault(TrapKind::FuelExhausted, span, "statement budget used up");
        }
        self.fuel -= 1;
        Ok(())
    }

    // ---- memory -------------------------------------------------------

    fn slot_index(&self, pl: Place, span: &SourceSpan) -> R<usize> {
        let c = &self.containers[pl.container];
        if c.freed {
            return fault(TrapKind::UseAfterFree, span, "access to a freed container");
        }
        if pl.offset < 0 || pl.offset as u64 >= c.len as u64 {
            return fault(
                TrapKind::OutOfBounds,
                span,
                format!("offset {} outside container of length {}", pl.offset, c.len),
            );
        }
        let stride = c.slots_per_elem.len().max(1);
        Ok(pl.offset as usize * stride + pl.field.unwrap_or(0))
    }

    fn field_name(&self, pl: Place) -> Option<String> {
        pl.field.and_then(|f| self.containers[pl.container].slots_per_elem[f].0.clone())
    }

    pub fn read(&mut self, pl: Place, span: &SourceSpan) -> R<Value> {
        let i = self.slot_index(pl, span)?;
        let Some(v) = self.containers[pl.container].slots[i] else {
            return fault(TrapKind::UninitializedRead, span, format!("element {} was never written", pl.offset));
        };
        if let Some(id) = self.containers[pl.container].data_id {
            let s = self.scalar(v);
            let field = self.field_name(pl);
            self.push_event(id, pl.offset, field, EventKind::Read, Some(s));
        }
        Ok(v)
    }

    pub fn write(&mut self, pl: Place, v: Value, span: &SourceSpan) -> R<()> {
        let i = self.slot_index(pl, span)?;
        let stride = self.containers[pl.container].slots_per_elem.len().max(1);
        let ty = self.containers[pl.container].slots_per_elem[i % stride].1.clone();
        let v = self.convert(v, &ty);
        self.containers[pl.container].slots[i] = Some(v);
        if let Some(id) = self.containers[pl.container].data_id {
            let s = self.scalar(v);
            let field = self.field_name(pl);
            self.push_event(id, pl.offset, field, EventKind::Write, Some(s));
        }
        Ok(())
    }

    pub fn free(&mut self, p: Pointer, span: &SourceSpan) -> R<()> {
        let Some(c) = p.target else { return Ok(()) };
        let container = &self.containers[c];
        let Some(id) = container.data_id else {
            return fault(TrapKind::OutOfBounds, span, "free of a variable");
        };
        if container.freed {
            return fault(TrapKind::UseAfterFree, span, "double free");
        }
        if p.offset != 0 {
            return fault(TrapKind::OutOfBounds, span, "free of an interior pointer");
        }
        self.containers[c].freed = true;
        self.push_event(id, 0, None, EventKind::Free, None);
        Ok(())
    }

    pub fn deref_place(&self, p: Pointer, index: i64, span: &SourceSpan) -> R<Place> {
        let Some(c) = p.target else {
            return fault(TrapKind::NullDereference, span, "dereference of a null pointer");
        };
        let Some(offset) = p.offset.checked_add(index) else {
            return fault(TrapKind::OffsetOverflow, span, "offset overflows");
        };
        Ok(Place { container: c, offset, field: None })
    }

    /// `p + delta`, trapping when the result leaves `[0, len]`.
    pub fn offset_ptr(&self, p: Pointer, delta: i64, span: &SourceSpan) -> R<Pointer> {
        let Some(c) = p.target else {
            if delta == 0 {
                return Ok(p);
            }
            return fault(TrapKind::NullDereference, span, "arithmetic on a null pointer");
        };
        let Some(offset) = p.offset.checked_add(delta) else {
            return fault(TrapKind::OffsetOverflow, span, "offset overflows");
        };
        let len = self.containers[c].len as i64;
        if offset < 0 || offset > len {
            return fault(TrapKind::OutOfBounds, span, format!("pointer offset {offset} outside [0, {len}]"));
        }
        Ok(Pointer { target: Some(c), offset })
    }

    // ---- values -------------------------------------------------------

    pub fn convert(&self, v: Value, ty: &CType) -> Value {
        match (ty, v) {
            (CType::Int { bits, signed }, Value::Int(i)) => Value::Int(wrap(i, *bits, *signed)),
            (CType::Int { bits, signed }, Value::Float(f)) => Value::Int(wrap(f as i64, *bits, *signed)),
            (CType::Float { bits }, Value::Int(i)) => Value::Float(round_float(i as f64, *bits)),
            (CType::Float { bits }, Value::Float(f)) => Value::Float(round_float(f, *bits)),
            (CType::Pointer(_), Value::Int(_)) => Value::Ptr(Pointer::NULL),
            _ => v,
        }
    }

    fn int(&self, v: Value, span: &SourceSpan) -> R<i64> {
        match v {
            Value::Int(i) => Ok(i),
            Value::Float(f) => Ok(f as i64),
            Value::Ptr(_) => fault(TrapKind::BadEntry, span, "pointer used as an integer"),
        }
    }

    pub fn pointer(&self, v: Value, span: &SourceSpan) -> R<Pointer> {
        match v {
            Value::Ptr(p) => Ok(p),
            Value::Int(0) => Ok(Pointer::NULL),
            _ => fault(TrapKind::BadEntry, span, "integer used as a pointer"),
        }
    }

    fn truthy(v: Value) -> bool {
        match v {
            Value::Int(i) => i != 0,
            Value::Float(f) => f != 0.0,
            Value::Ptr(p) => p.target.is_some(),
        }
    }

    fn record_fields(&self, ty: &CType) -> Option<&Vec<(String, CType)>> {
        match ty {
            CType::Record(name) => self.records.get(name.as_str()),
            _ => None,
        }
    }

    fn place_of(&mut self, e: &Expr) -> R<Place> {
        match &e.kind {
            ExprKind::Ident(name) => {
                let var = self.lookup(name, &e.span)?;
                Ok(Place { container: var.container, offset: 0, field: None })
            }
            ExprKind::Index { base, index } => {
                let b = self.eval(base)?;
                let b = self.pointer(b, &base.span)?;
                let i = self.eval(index)?;
                let i = self.int(i, &index.span)?;
                self.deref_place(b, i, &e.span)
            }
            ExprKind::Deref(inner) => {
                let p = self.eval(inner)?;
                let p = self.pointer(p, &inner.span)?;
                self.deref_place(p, 0, &e.span)
            }
            ExprKind::Member { base, field, arrow } => {
                let (mut pl, record_ty) = if *arrow {
                    let p = self.eval(base)?;
                    let p = self.pointer(p, &base.span)?;
                    (self.deref_place(p, 0, &e.span)?, base.ty.element().cloned().unwrap_or(CType::Void))
                } else {
                    (self.place_of(base)?, base.ty.clone())
                };
                let index = self
                    .record_fields(&record_ty)
                    .and_then(|fields| fields.iter().position(|(n, _)| n == field));
                match index {
                    Some(i) => {
                        pl.field = Some(i);
                        Ok(pl)
                    }
                    None => fault(TrapKind::BadEntry, &e.span, format!("no field `{field}`")),
                }
            }
            _ => fault(TrapKind::BadEntry, &e.span, "expression is not an lvalue"),
        }
    }

    fn copy_record(&mut self, dst: Place, src: Place, ty: &CType, span: &SourceSpan) -> R<()> {
        let n = self.record_fields(ty).map_or(0, Vec::len);
        for f in 0..n {
            let v = self.read(Place { field: Some(f), ..src }, span)?;
            self.write(Place { field: Some(f), ..dst }, v, span)?;
        }
        Ok(())
    }

    pub fn eval(&mut self, e: &Expr) -> R<Value> {
        match &e.kind {
            ExprKind::IntLit(v) => Ok(Value::Int(*v)),
            ExprKind::FloatLit(v) => Ok(Value::Float(*v)),
            ExprKind::Ident(name) => {
                let var = self.lookup(name, &e.span)?;
                if var.is_array {
                    return Ok(Value::Ptr(Pointer { target: Some(var.container), offset: 0 }));
                }
                self.read(Place { container: var.container, offset: 0, field: None }, &e.span)
            }
            ExprKind::Index { .. } | ExprKind::Deref(_) | ExprKind::Member { .. } => {
                let pl = self.place_of(e)?;
                self.read(pl, &e.span)
            }
            ExprKind::AddrOf(inner) => {
                if let ExprKind::Ident(name) = &inner.kind {
                    let var = self.lookup(name, &inner.span)?;
                    return Ok(Value::Ptr(Pointer { target: Some(var.container), offset: 0 }));
                }
                let pl = self.place_of(inner)?;
                if pl.field.is_some() {
                    return fault(TrapKind::BadEntry, &e.span, "address of a record field is not modelled");
                }
                let p = Pointer { target: Some(pl.container), offset: 0 };
                Ok(Value::Ptr(self.offset_ptr(p, pl.offset, &e.span)?))
            }
            ExprKind::Unary { op, operand } => {
                let v = self.eval(operand)?;
                Ok(match (op, v) {
                    (UnaryOp::Neg, Value::Int(i)) => self.convert(Value::Int(i.wrapping_neg()), &e.ty),
                    (UnaryOp::Neg, Value::Float(f)) => Value::Float(-f),
                    (UnaryOp::Not, v) => Value::Int(!Self::truthy(v) as i64),
                    (UnaryOp::BitNot, Value::Int(i)) => self.convert(Value::Int(!i), &e.ty),
                    _ => return fault(TrapKind::BadEntry, &e.span, "bad operand"),
                })
            }
            ExprKind::Binary { op: BinaryOp::LogAnd, lhs, rhs } => {
                let l = self.eval(lhs)?;
                if !Self::truthy(l) {
                    return Ok(Value::Int(0));
                }
                let r = self.eval(rhs)?;
                Ok(Value::Int(Self::truthy(r) as i64))
            }
            ExprKind::Binary { op: BinaryOp::LogOr, lhs, rhs } => {
                let l = self.eval(lhs)?;
                if Self::truthy(l) {
                    return Ok(Value::Int(1));
                }
                let r = self.eval(rhs)?;
                Ok(Value::Int(Self::truthy(r) as i64))
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                self.binary(*op, l, r, &e.ty, &e.span)
            }
            ExprKind::Call { callee, args } => {
                let mut values = Vec::with_capacity(args.len());
                for a in args {
                    values.push(self.eval(a)?);
                }
                Ok(self.call(callee, values, &e.span)?.unwrap_or(Value::Int(0)))
            }
            ExprKind::Alloc { elem, count, style } => {
                let n = self.eval(count)?;
                let n = self.int(n, &count.span)?;
                if n < 0 {
                    return fault(TrapKind::OutOfBounds, &e.span, format!("negative allocation size {n}"));
                }
                let elem = if *style == AllocStyle::MallocBytes { CType::char() } else { elem.clone() };
                let c = self.alloc_data(&elem, n as usize);
                Ok(Value::Ptr(Pointer { target: Some(c), offset: 0 }))
            }
            ExprKind::IncDec { target, delta, prefix } => {
                let pl = self.place_of(target)?;
                let old = self.read(pl, &e.span)?;
                let new = self.step(old, *delta, &target.ty, &e.span)?;
                self.write(pl, new, &e.span)?;
                Ok(if *prefix { new } else { old })
            }
        }
    }

    fn step(&self, v: Value, delta: i8, ty: &CType, span: &SourceSpan) -> R<Value> {
        match v {
            Value::Ptr(p) => Ok(Value::Ptr(self.offset_ptr(p, delta as i64, span)?)),
            Value::Int(i) => Ok(self.convert(Value::Int(i.wrapping_add(delta as i64)), ty)),
            Value::Float(f) => Ok(Value::Float(f + delta as f64)),
        }
    }

    pub fn binary(&self, op: BinaryOp, l: Value, r: Value, ty: &CType, span: &SourceSpan) -> R<Value> {
        use BinaryOp::*;
        match (l, r) {
            (Value::Ptr(p), Value::Int(i)) if matches!(op, Add | Sub) => {
                let d = if op == Add { Some(i) } else { i.checked_neg() };
                match d {
                    Some(d) => Ok(Value::Ptr(self.offset_ptr(p, d, span)?)),
                    None => fault(TrapKind::OffsetOverflow, span, "offset overflows"),
                }
            }
            (Value::Int(i), Value::Ptr(p)) if op == Add => Ok(Value::Ptr(self.offset_ptr(p, i, span)?)),
            (Value::Ptr(a), Value::Ptr(b)) => match op {
                Eq => Ok(Value::Int((a == b) as i64)),
                Ne => Ok(Value::Int((a != b) as i64)),
                _ => {
                    if a.target != b.target || a.target.is_none() {
                        return fault(TrapKind::CrossContainer, span, "operands point into different containers");
                    }
                    let v = match op {
                        Sub => a.offset - b.offset,
                        Lt => (a.offset < b.offset) as i64,
                        Le => (a.offset <= b.offset) as i64,
                        Gt => (a.offset > b.offset) as i64,
                        Ge => (a.offset >= b.offset) as i64,
                        _ => return fault(TrapKind::BadEntry, span, "bad pointer operation"),
                    };
                    Ok(Value::Int(v))
                }
            },
            (Value::Ptr(p), Value::Int(0)) | (Value::Int(0), Value::Ptr(p)) if matches!(op, Eq | Ne) => {
                Ok(Value::Int(((p.target.is_none()) == (op == Eq)) as i64))
            }
            (Value::Ptr(_), _) | (_, Value::Ptr(_)) => fault(TrapKind::BadEntry, span, "bad pointer operation"),
            (Value::Float(_), _) | (_, Value::Float(_)) => {
                let (a, b) = (as_f64(l), as_f64(r));
                let v = match op {
                    Add => a + b,
                    Sub => a - b,
                    Mul => a * b,
                    Div => a / b,
                    Lt => return Ok(Value::Int((a < b) as i64)),
                    Le => return Ok(Value::Int((a <= b) as i64)),
                    Gt => return Ok(Value::Int((a > b) as i64)),
                    Ge => return Ok(Value::Int((a >= b) as i64)),
                    Eq => return Ok(Value::Int((a == b) as i64)),
                    Ne => return Ok(Value::Int((a != b) as i64)),
                    _ => return fault(TrapKind::BadEntry, span, "bad floating-point operation"),
                };
                Ok(self.convert(Value::Float(v), ty))
            }
            (Value::Int(a), Value::Int(b)) => {
                let v = match op {
                    Add => a.wrapping_add(b),
                    Sub => a.wrapping_sub(b),
                    Mul => a.wrapping_mul(b),
                    Div | Rem if b == 0 => return fault(TrapKind::DivisionByZero, span, "division by zero"),
                    Div => a.wrapping_div(b),
                    Rem => a.wrapping_rem(b),
                    Shl => a.wrapping_shl((b & 63) as u32),
                    Shr => a.wrapping_shr((b & 63) as u32),
                    BitAnd => a & b,
                    BitOr => a | b,
                    BitXor => a ^ b,
                    Lt => (a < b) as i64,
                    Le => (a <= b) as i64,
                    Gt => (a > b) as i64,
                    Ge => (a >= b) as i64,
                    Eq => (a == b) as i64,
                    Ne => (a != b) as i64,
                    LogAnd | LogOr => unreachable!("short-circuit operators are evaluated lazily"),
                };
                Ok(self.convert(Value::Int(v), ty))
            }
        }
    }

    fn call(&mut self, callee: &str, args: Vec<Value>, span: &SourceSpan) -> R<Option<Value>> {
        let f = self.functions.get(callee).copied();
        match f {
            Some(f) if f.body.is_some() => {
                if self.frames.len() >= MAX_DEPTH {
                    return fault(TrapKind::StackOverflow, span, format!("call depth {MAX_DEPTH} exceeded"));
                }
                self.frames.push(Frame { scopes: vec![HashMap::new()] });
                for (p, v) in f.params.iter().zip(args) {
                    let v = self.convert(v, &p.ty);
                    self.declare_cell(&p.name, &p.ty, Some(v));
                }
                let flow = self.block(f.body.as_deref().unwrap_or_default(), false);
                self.frames.pop();
                match flow? {
                    Flow::Return(v) => Ok(v.map(|v| self.convert(v, &f.ret))),
                    Flow::Normal => Ok(None),
                }
            }
            _ => match builtins::call(self, callee, &args, span) {
                Some(result) => result,
                None => fault(TrapKind::UnknownFunction, span, format!("`{callee}` has no body")),
            },
        }
    }

    // ---- statements ---------------------------------------------------

    fn push_scope(&mut self) {
        self.frames.last_mut().expect("active frame").scopes.push(HashMap::new());
    }

    fn pop_scope(&mut self) {
        self.frames.last_mut().expect("active frame").scopes.pop();
    }

    /// Runs `stmts`, in a fresh scope when `scoped`. Scopes stay in place on
    /// return so the entry function's final state still sees them.
    fn block(&mut self, stmts: &[Stmt], scoped: bool) -> R<Flow> {
        if scoped {
            self.push_scope();
        }
        for s in stmts {
            if let Flow::Return(v) = self.stmt(s)? {
                return Ok(Flow::Return(v));
            }
        }
        if scoped {
            self.pop_scope();
        }
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, s: &Stmt) -> R<Flow> {
        self.tick(&s.span)?;
        match &s.kind {
            StmtKind::Decl { name, ty, init } => {
                if let CType::Array(elem, len) = ty {
                    let c = self.alloc_data(elem, *len as usize);
                    self.bind(name, Var { container: c, is_array: true });
                    return Ok(Flow::Normal);
                }
                match init {
                    Some(e) if ty.is_record() => {
                        let src = self.place_of(e)?;
                        let c = self.declare_cell(name, ty, None);
                        self.copy_record(Place { container: c, offset: 0, field: None }, src, ty, &s.span)?;
                    }
                    Some(e) => {
                        let v = self.eval(e)?;
                        let v = self.convert(v, ty);
                        self.declare_cell(name, ty, Some(v));
                    }
                    None => {
                        self.declare_cell(name, ty, None);
                    }
                }
            }
            StmtKind::Assign { lhs, op, rhs } => {
                if *op == AssignOp::Set {
                    if lhs.ty.is_record() {
                        let src = self.place_of(rhs)?;
                        let dst = self.place_of(lhs)?;
                        self.copy_record(dst, src, &lhs.ty, &s.span)?;
                    } else {
                        let v = self.eval(rhs)?;
                        let pl = self.place_of(lhs)?;
                        self.write(pl, v, &s.span)?;
                    }
                } else {
                    let pl = self.place_of(lhs)?;
                    let old = self.read(pl, &lhs.span)?;
                    let r = self.eval(rhs)?;
                    let bin = op.binary().expect("compound assignment has an operator");
                    let new = self.binary(bin, old, r, &lhs.ty, &s.span)?;
                    self.write(pl, new, &s.span)?;
                }
            }
            StmtKind::Expr(e) => {
                self.eval(e)?;
            }
            StmtKind::IncDec { target, delta } => {
                let pl = self.place_of(target)?;
                let old = self.read(pl, &s.span)?;
                let new = self.step(old, *delta, &target.ty, &s.span)?;
                self.write(pl, new, &s.span)?;
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => Some(self.eval(e)?),
                    None => None,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::Block(body) => return self.block(body, true),
            StmtKind::If { cond, then_body, else_body } => {
                let c = self.eval(cond)?;
                let body = if Self::truthy(c) { then_body } else { else_body };
                return self.block(body, true);
            }
            StmtKind::While { cond, body } => {
                if let Some(schedule) = self.schedule_for(&s.span) {
                    return self.scheduled(schedule, None, Some(cond), None, body, &s.span);
                }
                loop {
                    self.tick(&s.span)?;
                    let c = self.eval(cond)?;
                    if !Self::truthy(c) {
                        break;
                    }
                    if let Flow::Return(v) = self.block(body, true)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            StmtKind::For { init, cond, step, body } => {
                if let Some(schedule) = self.schedule_for(&s.span) {
                    return self.scheduled(schedule, init.as_deref(), cond.as_ref(), step.as_deref(), body, &s.span);
                }
                self.push_scope();
                if let Some(init) = init {
                    self.stmt(init)?;
                }
                loop {
                    self.tick(&s.span)?;
                    if let Some(cond) = cond {
                        let c = self.eval(cond)?;
                        if !Self::truthy(c) {
                            break;
                        }
                    }
                    if let Flow::Return(v) = self.block(body, true)? {
                        return Ok(Flow::Return(v));
                    }
                    if let Some(step) = step {
                        self.stmt(step)?;
                    }
                }
                self.pop_scope();
            }
        }
        Ok(Flow::Normal)
    }

    fn schedule_for(&self, span: &SourceSpan) -> Option<&'a LoopSchedule> {
        self.schedule.filter(|s| s.line == span.line && s.column == span.column)
    }

    fn read_var(&mut self, name: &str, span: &SourceSpan) -> R<Value> {
        let var = self.lookup(name, span)?;
        self.read(Place { container: var.container, offset: 0, field: None }, span)
    }

    fn write_var(&mut self, name: &str, v: Value, span: &SourceSpan) -> R<()> {
        let var = self.lookup(name, span)?;
        self.write(Place { container: var.container, offset: 0, field: None }, v, span)
    }

    /// Runs a loop with its iterations reordered; see [`LoopSchedule`].
    fn scheduled(
        &mut self,
        schedule: &LoopSchedule,
        init: Option<&Stmt>,
        cond: Option<&Expr>,
        step: Option<&Stmt>,
        body: &[Stmt],
        span: &SourceSpan,
    ) -> R<Flow> {
        let _ = step;
        self.push_scope();
        if let Some(init) = init {
            self.stmt(init)?;
        }
        let mut states: Vec<Vec<Value>> = Vec::new();
        loop {
            self.tick(span)?;
            if let Some(cond) = cond {
                let c = self.eval(cond)?;
                if !Self::truthy(c) {
                    break;
                }
            }
            let mut state = Vec::with_capacity(schedule.induction.len());
            for (v, _) in &schedule.induction {
                state.push(self.read_var(v, span)?);
            }
            states.push(state);
            for (v, stride) in &schedule.induction {
                let s = self.eval(stride)?;
                let old = self.read_var(v, span)?;
                let new = self.binary(BinaryOp::Add, old, s, &CType::long(), span)?;
                self.write_var(v, new, span)?;
            }
        }
        let mut exit = Vec::new();
        for (v, _) in &schedule.induction {
            exit.push(self.read_var(v, span)?);
        }
        let mut order: Vec<usize> = (0..states.len()).collect();
        match schedule.order {
            IterationOrder::InOrder => {}
            IterationOrder::Reversed => order.reverse(),
            IterationOrder::Shuffled(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(self.scheduled_runs));
                order.shuffle(&mut rng);
            }
        }
        self.scheduled_runs += 1;
        for k in order {
            for ((v, _), value) in schedule.induction.iter().zip(&states[k]) {
                self.write_var(v, *value, span)?;
            }
            if let Flow::Return(v) = self.block(body, true)? {
                return Ok(Flow::Return(v));
            }
        }
        for ((v, _), value) in schedule.induction.iter().zip(exit) {
            self.write_var(v, value, span)?;
        }
        self.pop_scope();
        Ok(Flow::Normal)
    }
}

fn wrap(i: i64, bits: u8, signed: bool) -> i64 {
    if bits >= 64 {
        return i;
    }
    let shift = 64 - bits as u32;
    if signed {
        (i << shift) >> shift
    } else {
        ((i as u64) << shift >> shift) as i64
    }
}

fn round_float(f: f64, bits: u8) -> f64 {
    if bits == 32 {
        f as f32 as f64
    } else {
        f
    }
}

fn as_f64(v: Value) -> f64 {
    match v {
        Value::Int(i) => i as f64,
        Value::Float(f) => f,
        Value::Ptr(_) => f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::wrap;

    #[test]
    fn narrow_stores_wrap() {
        assert_eq!(wrap(200, 8, true), -56);
        assert_eq!(wrap(-1, 8, false), 255);
        assert_eq!(wrap(1 << 40, 32, true), 0);
        assert_eq!(wrap(i64::MIN, 64, true), i64::MIN);
    }
}
