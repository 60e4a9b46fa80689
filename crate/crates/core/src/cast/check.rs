//! Type checker. Resolves the type of every expression in place and rejects
//! programs that are ill-typed under the subset's rules.

use std::collections::{BTreeSet, HashMap};

use super::ast::*;
use super::ParseError;

/// Parameter and return types of a callable.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    pub params: Vec<CType>,
    pub ret: CType,
}

fn void_ptr() -> CType {
    CType::pointer_to(CType::Void)
}

/// Signatures of the library functions the interpreter models.
pub fn builtin_signature(name: &str) -> Option<Signature> {
    let sig = |params: Vec<CType>, ret: CType| Some(Signature { params, ret });
    match name {
        "memcpy" => sig(vec![void_ptr(), void_ptr(), CType::long()], CType::Void),
        "memset" => sig(vec![void_ptr(), CType::int(), CType::long()], CType::Void),
        "free" => sig(vec![void_ptr()], CType::Void),
        "atoi" => sig(vec![CType::pointer_to(CType::char())], CType::int()),
        "HMAC_CTX_new" => sig(vec![], void_ptr()),
        "HMAC_CTX_copy" => sig(vec![void_ptr(), void_ptr()], CType::int()),
        "HMAC_Update" => sig(vec![void_ptr(), void_ptr(), CType::long()], CType::int()),
        "HMAC_Final" => sig(vec![void_ptr()], CType::long()),
        "HMAC_CTX_free" => sig(vec![void_ptr()], CType::Void),
        _ => None,
    }
}

/// Type-checks `tu`, filling in `Expr::ty` everywhere.
pub fn check(tu: &mut TranslationUnit) -> Result<(), ParseError> {
    let records = check_records(tu)?;
    let mut sigs: HashMap<String, (Signature, bool)> = HashMap::new();
    for f in &tu.functions {
        let sig = Signature { params: f.params.iter().map(|p| p.ty.clone()).collect(), ret: f.ret.clone() };
        for ty in sig.params.iter().chain(std::iter::once(&sig.ret)) {
            check_type_exists(ty, &records, &f.span)?;
        }
        if let Some(p) = f.params.iter().find(|p| p.ty.is_record() || p.ty == CType::Void) {
            return Err(type_error(&p.span, format!("parameter `{}` must be scalar or pointer", p.name)));
        }
        if f.ret.is_record() {
            return Err(type_error(&f.span, "functions may not return records"));
        }
        let defined = f.body.is_some();
        match sigs.get_mut(&f.name) {
            Some((prev, prev_defined)) => {
                if *prev != sig {
                    return Err(type_error(&f.span, format!("conflicting declarations of `{}`", f.name)));
                }
                if *prev_defined && defined {
                    return Err(type_error(&f.span, format!("redefinition of `{}`", f.name)));
                }
                *prev_defined |= defined;
            }
            None => {
                sigs.insert(f.name.clone(), (sig, defined));
            }
        }
    }
    let sigs: HashMap<String, Signature> = sigs.into_iter().map(|(k, (s, _))| (k, s)).collect();
    for f in &mut tu.functions {
        let Some(body) = f.body.as_mut() else { continue };
        let mut cx = Checker { records: &records, sigs: &sigs, scopes: vec![HashMap::new()], ret: f.ret.clone() };
        let mut seen = BTreeSet::new();
        for p in &f.params {
            if !seen.insert(p.name.clone()) {
                return Err(type_error(&p.span, format!("duplicate parameter `{}`", p.name)));
            }
            cx.scopes[0].insert(p.name.clone(), p.ty.clone());
        }
        cx.scopes.push(HashMap::new());
        cx.stmts(body)?;
    }
    Ok(())
}

type Records = HashMap<String, Vec<(String, CType)>>;

fn type_error(span: &SourceSpan, message: impl Into<String>) -> ParseError {
    ParseError::Type { span: span.clone(), message: message.into() }
}

fn check_records(tu: &TranslationUnit) -> Result<Records, ParseError> {
    let mut out = Records::new();
    for r in &tu.records {
        let mut names = BTreeSet::new();
        for (name, _) in &r.fields {
            if !names.insert(name) {
                return Err(type_error(&r.span, format!("duplicate field `{name}` in `struct {}`", r.name)));
            }
        }
        if out.insert(r.name.clone(), r.fields.clone()).is_some() {
            return Err(type_error(&r.span, format!("redefinition of `struct {}`", r.name)));
        }
    }
    for r in &tu.records {
        for (name, ty) in &r.fields {
            check_type_exists(ty, &out, &r.span)?;
            if *ty == CType::Void || ty.is_record() {
                return Err(type_error(&r.span, format!("field `{name}` must be scalar or pointer")));
            }
        }
    }
    Ok(out)
}

fn check_type_exists(ty: &CType, records: &Records, span: &SourceSpan) -> Result<(), ParseError> {
    match ty {
        CType::Record(name) if !records.contains_key(name) => {
            Err(type_error(span, format!("unknown type `struct {name}`")))
        }
        CType::Pointer(inner) | CType::Array(inner, _) => check_type_exists(inner, records, span),
        _ => Ok(()),
    }
}

/// Usual arithmetic conversions.
fn promote(a: &CType, b: &CType) -> CType {
    match (a, b) {
        (CType::Float { bits: x }, CType::Float { bits: y }) => CType::Float { bits: (*x).max(*y) },
        (CType::Float { .. }, _) => a.clone(),
        (_, CType::Float { .. }) => b.clone(),
        (CType::Int { bits: x, signed: sx }, CType::Int { bits: y, signed: sy }) => {
            let bits = (*x).max(*y).max(32);
            let unsigned_wins = |b: u8, s: bool| b == bits && !s && b >= 32;
            let signed = !(unsigned_wins(*x, *sx) || unsigned_wins(*y, *sy));
            CType::Int { bits, signed }
        }
        _ => CType::int(),
    }
}

fn promote1(a: &CType) -> CType {
    promote(a, &CType::int())
}

fn is_scalar(ty: &CType) -> bool {
    ty.is_arithmetic() || ty.is_addressable()
}

fn is_lvalue(e: &Expr) -> bool {
    matches!(e.kind, ExprKind::Ident(_) | ExprKind::Index { .. } | ExprKind::Deref(_) | ExprKind::Member { .. })
}

/// Whether a value of type `from` (expression `e`) may be stored into `to`.
fn assignable(to: &CType, e: &Expr) -> bool {
    let from = e.ty.decay();
    match to {
        CType::Int { .. } | CType::Float { .. } => from.is_arithmetic(),
        CType::Pointer(inner) => match &from {
            CType::Pointer(src) => {
                src == inner || **inner == CType::Void || **src == CType::Void
            }
            _ => e.is_zero(),
        },
        CType::Record(name) => matches!(&from, CType::Record(n) if n == name),
        CType::Array(..) | CType::Void => false,
    }
}

struct Checker<'a> {
    records: &'a Records,
    sigs: &'a HashMap<String, Signature>,
    scopes: Vec<HashMap<String, CType>>,
    ret: CType,
}

impl Checker<'_> {
    fn lookup(&self, name: &str) -> Option<&CType> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn scoped<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T, ParseError>) -> Result<T, ParseError> {
        self.scopes.push(HashMap::new());
        let out = f(self);
        self.scopes.pop();
        out
    }

    fn stmts(&mut self, stmts: &mut [Stmt]) -> Result<(), ParseError> {
        stmts.iter_mut().try_for_each(|s| self.stmt(s))
    }

    fn cond(&mut self, e: &mut Expr) -> Result<(), ParseError> {
        self.expr(e)?;
        if !is_scalar(&e.ty) {
            return Err(type_error(&e.span, format!("condition of type `{}` is not scalar", e.ty)));
        }
        Ok(())
    }

    fn stmt(&mut self, s: &mut Stmt) -> Result<(), ParseError> {
        let span = s.span.clone();
        match &mut s.kind {
            StmtKind::Decl { name, ty, init } => {
                check_type_exists(ty, self.records, &span)?;
                if *ty == CType::Void {
                    return Err(type_error(&span, format!("variable `{name}` has type void")));
                }
                if let CType::Array(elem, len) = ty {
                    if *len == 0 || elem.is_array() || **elem == CType::Void {
                        return Err(type_error(&span, format!("invalid array `{name}`")));
                    }
                }
                if let Some(e) = init {
                    self.expr(e)?;
                    if !assignable(ty, e) {
                        return Err(type_error(
                            &e.span,
                            format!("cannot initialize `{name}` of type `{ty}` with `{}`", e.ty),
                        ));
                    }
                }
                let scope = self.scopes.last_mut().expect("scope");
                if scope.contains_key(name.as_str()) {
                    return Err(type_error(&span, format!("redeclaration of `{name}`")));
                }
                scope.insert(name.clone(), ty.clone());
            }
            StmtKind::Assign { lhs, op, rhs } => {
                self.expr(lhs)?;
                self.expr(rhs)?;
                if !is_lvalue(lhs) || lhs.ty.is_array() {
                    return Err(type_error(&lhs.span, "left side of assignment is not assignable"));
                }
                let ok = match op {
                    AssignOp::Set => assignable(&lhs.ty, rhs),
                    AssignOp::Add | AssignOp::Sub if lhs.ty.is_pointer() => rhs.ty.is_integer(),
                    AssignOp::Add | AssignOp::Sub | AssignOp::Mul | AssignOp::Div => {
                        lhs.ty.is_arithmetic() && rhs.ty.is_arithmetic()
                    }
                    _ => lhs.ty.is_integer() && rhs.ty.is_integer(),
                };
                if !ok {
                    return Err(type_error(
                        &span,
                        format!("invalid operands to `{}`: `{}` and `{}`", op.symbol(), lhs.ty, rhs.ty),
                    ));
                }
            }
            StmtKind::Expr(e) => self.expr(e)?,
            StmtKind::IncDec { target, .. } => {
                self.expr(target)?;
                self.check_incdec(target)?;
            }
            StmtKind::For { init, cond, step, body } => self.scoped(|cx| {
                if let Some(init) = init {
                    cx.stmt(init)?;
                }
                if let Some(cond) = cond {
                    cx.cond(cond)?;
                }
                if let Some(step) = step {
                    if matches!(step.kind, StmtKind::Decl { .. }) {
                        return Err(type_error(&step.span, "declaration in for-loop step"));
                    }
                    cx.stmt(step)?;
                }
                cx.scoped(|cx| cx.stmts(body))
            })?,
            StmtKind::While { cond, body } => {
                self.cond(cond)?;
                self.scoped(|cx| cx.stmts(body))?;
            }
            StmtKind::If { cond, then_body, else_body } => {
                self.cond(cond)?;
                self.scoped(|cx| cx.stmts(then_body))?;
                self.scoped(|cx| cx.stmts(else_body))?;
            }
            StmtKind::Return(value) => {
                let ret = self.ret.clone();
                match value {
                    None if ret == CType::Void => {}
                    None => return Err(type_error(&span, format!("missing return value of type `{ret}`"))),
                    Some(e) => {
                        self.expr(e)?;
                        if ret == CType::Void || !assignable(&ret, e) {
                            return Err(type_error(
                                &e.span,
                                format!("cannot return `{}` from a function returning `{ret}`", e.ty),
                            ));
                        }
                    }
                }
            }
            StmtKind::Block(body) => self.scoped(|cx| cx.stmts(body))?,
        }
        Ok(())
    }

    fn check_incdec(&self, target: &Expr) -> Result<(), ParseError> {
        if !is_lvalue(target) || !(target.ty.is_integer() || target.ty.is_pointer()) {
            return Err(type_error(&target.span, format!("cannot increment or decrement `{}`", target.ty)));
        }
        Ok(())
    }

    fn expr(&mut self, e: &mut Expr) -> Result<(), ParseError> {
        let span = e.span.clone();
        let ty = match &mut e.kind {
            ExprKind::IntLit(v) => {
                if i32::try_from(*v).is_ok() {
                    CType::int()
                } else {
                    CType::long()
                }
            }
            ExprKind::FloatLit(_) => CType::double(),
            ExprKind::Ident(name) => match self.lookup(name) {
                Some(ty) => ty.clone(),
                None => return Err(type_error(&span, format!("use of undeclared identifier `{name}`"))),
            },
            ExprKind::Index { base, index } => {
                self.expr(base)?;
                self.expr(index)?;
                if !index.ty.is_integer() {
                    return Err(type_error(&index.span, format!("array index has type `{}`", index.ty)));
                }
                match base.ty.element() {
                    Some(elem) if *elem != CType::Void => elem.clone(),
                    _ => return Err(type_error(&span, format!("cannot subscript `{}`", base.ty))),
                }
            }
            ExprKind::Deref(inner) => {
                self.expr(inner)?;
                match inner.ty.element() {
                    Some(elem) if *elem != CType::Void => elem.clone(),
                    _ => return Err(type_error(&span, format!("cannot dereference `{}`", inner.ty))),
                }
            }
            ExprKind::AddrOf(inner) => {
                self.expr(inner)?;
                if !is_lvalue(inner) {
                    return Err(type_error(&span, "cannot take the address of an rvalue"));
                }
                if inner.ty.is_array() {
                    return Err(ParseError::Unsupported { span, construct: "address of array".into() });
                }
                let ty = CType::pointer_to(inner.ty.clone());
                if ty.order() > 2 {
                    return Err(ParseError::Unsupported {
                        span,
                        construct: "pointer of order greater than 2".into(),
                    });
                }
                ty
            }
            ExprKind::Member { base, field, arrow } => {
                self.expr(base)?;
                let record = match (&base.ty, *arrow) {
                    (CType::Record(name), false) => name.clone(),
                    (CType::Pointer(inner), true) => match inner.as_ref() {
                        CType::Record(name) => name.clone(),
                        _ => return Err(type_error(&span, format!("`->` on `{}`", base.ty))),
                    },
                    _ => {
                        let op = if *arrow { "->" } else { "." };
                        return Err(type_error(&span, format!("`{op}` on `{}`", base.ty)));
                    }
                };
                let fields = &self.records[&record];
                match fields.iter().find(|(n, _)| n == field) {
                    Some((_, ty)) => ty.clone(),
                    None => return Err(type_error(&span, format!("`struct {record}` has no field `{field}`"))),
                }
            }
            ExprKind::Unary { op, operand } => {
                self.expr(operand)?;
                match op {
                    UnaryOp::Neg if operand.ty.is_arithmetic() => promote1(&operand.ty),
                    UnaryOp::BitNot if operand.ty.is_integer() => promote1(&operand.ty),
                    UnaryOp::Not if is_scalar(&operand.ty) => CType::int(),
                    _ => return Err(type_error(&span, format!("invalid operand type `{}`", operand.ty))),
                }
            }
            ExprKind::Binary { op, lhs, rhs } => {
                self.expr(lhs)?;
                self.expr(rhs)?;
                binary_type(*op, lhs, rhs).ok_or_else(|| {
                    type_error(
                        &span,
                        format!("invalid operands to `{}`: `{}` and `{}`", op.symbol(), lhs.ty, rhs.ty),
                    )
                })?
            }
            ExprKind::Call { callee, args } => {
                let sig = match self.sigs.get(callee.as_str()).cloned().or_else(|| builtin_signature(callee)) {
                    Some(sig) => sig,
                    None => return Err(type_error(&span, format!("call to undeclared function `{callee}`"))),
                };
                if sig.params.len() != args.len() {
                    return Err(type_error(
                        &span,
                        format!("`{callee}` expects {} arguments, got {}", sig.params.len(), args.len()),
                    ));
                }
                for (arg, pty) in args.iter_mut().zip(&sig.params) {
                    self.expr(arg)?;
                    if !assignable(pty, arg) {
                        return Err(type_error(
                            &arg.span,
                            format!("argument of type `{}` does not match parameter `{pty}`", arg.ty),
                        ));
                    }
                }
                sig.ret
            }
            ExprKind::Alloc { elem, count, style } => {
                self.expr(count)?;
                if !count.ty.is_integer() {
                    return Err(type_error(&count.span, "allocation count must be an integer"));
                }
                check_type_exists(elem, self.records, &span)?;
                if *elem == CType::Void {
                    return Err(type_error(&span, "allocation of void elements"));
                }
                match style {
                    AllocStyle::MallocBytes => void_ptr(),
                    _ => CType::pointer_to(elem.clone()),
                }
            }
            ExprKind::IncDec { target, .. } => {
                self.expr(target)?;
                self.check_incdec(target)?;
                target.ty.clone()
            }
        };
        e.ty = ty;
        Ok(())
    }
}

fn binary_type(op: BinaryOp, lhs: &Expr, rhs: &Expr) -> Option<CType> {
    use BinaryOp::*;
    let (l, r) = (lhs.ty.decay(), rhs.ty.decay());
    let null = |p: &CType, e: &Expr| p.is_pointer() && e.is_zero();
    match op {
        Add if l.is_pointer() && r.is_integer() => Some(l),
        Add if l.is_integer() && r.is_pointer() => Some(r),
        Sub if l.is_pointer() && r.is_integer() => Some(l),
        Sub if l.is_pointer() && r.is_pointer() => (l == r).then(CType::long),
        Add | Sub | Mul | Div if l.is_arithmetic() && r.is_arithmetic() => Some(promote(&l, &r)),
        Rem | BitAnd | BitOr | BitXor if l.is_integer() && r.is_integer() => Some(promote(&l, &r)),
        Shl | Shr if l.is_integer() && r.is_integer() => Some(promote1(&l)),
        Lt | Le | Gt | Ge | Eq | Ne => {
            let ok = (l.is_arithmetic() && r.is_arithmetic())
                || (l.is_pointer() && r.is_pointer() && l == r)
                || (matches!(op, Eq | Ne) && (null(&l, rhs) || null(&r, lhs)));
            ok.then(CType::int)
        }
        LogAnd | LogOr if is_scalar(&l) && is_scalar(&r) => Some(CType::int()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use crate::cast::{parse, ExprKind, StmtKind};

    #[test]
    fn pointer_difference_is_long() {
        let tu = parse("t.c", "long f(int* p, int* q) { return p - q; }").unwrap();
        let body = tu.functions[0].body.as_ref().unwrap();
        let StmtKind::Return(Some(e)) = &body[0].kind else { panic!() };
        assert_eq!(e.ty.to_string(), "long");
    }

    #[test]
    fn arrays_decay_in_arithmetic() {
        let tu = parse("t.c", "void f() { long a[4]; long* p = a + 1; p[0] = 2; }").unwrap();
        let body = tu.functions[0].body.as_ref().unwrap();
        let StmtKind::Decl { init: Some(e), .. } = &body[1].kind else { panic!() };
        assert!(matches!(e.kind, ExprKind::Binary { .. }));
        assert_eq!(e.ty.to_string(), "long*");
    }

    #[test]
    fn mismatched_pointer_kinds_are_rejected() {
        assert!(parse("t.c", "void f(int* p) { long* q = p; }").is_err());
        assert!(parse("t.c", "void f(int* p) { long** q = &p; }").is_err());
        assert!(parse("t.c", "void f(int* p) { int** q = &p; }").is_ok());
    }

    #[test]
    fn calls_are_checked() {
        assert!(parse("t.c", "int g(int a); void f() { g(1, 2); }").is_err());
        assert!(parse("t.c", "void f() { h(1); }").is_err());
        assert!(parse("t.c", "int g(int a); void f() { g(1); }").is_ok());
        assert!(parse("t.c", "void f(long* d, long* s) { memcpy(d, s, 4); }").is_ok());
    }

    #[test]
    fn scopes_shadow_and_close() {
        assert!(parse("t.c", "void f() { int x = 1; { int x = 2; } x = 3; }").is_ok());
        assert!(parse("t.c", "void f() { { int y = 2; } y = 3; }").is_err());
        assert!(parse("t.c", "void f() { int x = 1; int x = 2; }").is_err());
    }
}
