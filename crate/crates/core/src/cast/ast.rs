//! Typed syntax tree for the supported C subset.
//!
//! Every node carries a [`SourceSpan`]. Equality on nodes is structural:
//! spans and resolved types are ignored, so two trees compare equal when
//! they print to the same canonical text.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

/// Location of a node in its source file. Lines and columns are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SourceSpan {
    pub file: Arc<str>,
    pub line: u32,
    pub column: u32,
    pub length: u32,
}

impl SourceSpan {
    pub fn new(file: Arc<str>, line: u32, column: u32, length: u32) -> Self {
        SourceSpan {
            file,
            line: line.max(1),
            column: column.max(1),
            length,
        }
    }

    /// Placeholder span for synthesized nodes with no source origin.
    pub fn synthetic() -> Self {
        SourceSpan::new(Arc::from("<synthetic>"), 1, 1, 0)
    }

    /// Smallest span starting at `self` and covering `end` when both are on the same line.
    pub fn to(&self, end: &SourceSpan) -> SourceSpan {
        let length = if end.line == self.line && end.column >= self.column {
            end.column - self.column + end.length
        } else {
            self.length
        };
        SourceSpan::new(self.file.clone(), self.line, self.column, length)
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CType {
    Int { bits: u8, signed: bool },
    Float { bits: u8 },
    Pointer(Box<CType>),
    /// Fixed-size local array; decays to a pointer in value contexts.
    Array(Box<CType>, u64),
    Record(String),
    Void,
}

impl CType {
    pub fn int() -> CType {
        CType::Int { bits: 32, signed: true }
    }

    pub fn long() -> CType {
        CType::Int { bits: 64, signed: true }
    }

    pub fn char() -> CType {
        CType::Int { bits: 8, signed: true }
    }

    pub fn double() -> CType {
        CType::Float { bits: 64 }
    }

    pub fn pointer_to(pointee: CType) -> CType {
        CType::Pointer(Box::new(pointee))
    }

    /// Pointer depth: 0 for non-pointers, 1 + pointee order otherwise.
    /// Arrays count like the pointer they decay to.
    pub fn order(&self) -> usize {
        match self {
            CType::Pointer(inner) | CType::Array(inner, _) => 1 + inner.order(),
            _ => 0,
        }
    }

    pub fn is_pointer(&self) -> bool {
        matches!(self, CType::Pointer(_))
    }

    pub fn is_array(&self) -> bool {
        matches!(self, CType::Array(..))
    }

    /// Pointer or array: something that can be subscripted.
    pub fn is_addressable(&self) -> bool {
        matches!(self, CType::Pointer(_) | CType::Array(..))
    }

    pub fn is_integer(&self) -> bool {
        matches!(self, CType::Int { .. })
    }

    pub fn is_arithmetic(&self) -> bool {
        matches!(self, CType::Int { .. } | CType::Float { .. })
    }

    pub fn is_record(&self) -> bool {
        matches!(self, CType::Record(_))
    }

    /// Element type of a pointer or array.
    pub fn element(&self) -> Option<&CType> {
        match self {
            CType::Pointer(inner) | CType::Array(inner, _) => Some(inner),
            _ => None,
        }
    }

    /// Arrays become pointers to their element; everything else is unchanged.
    pub fn decay(&self) -> CType {
        match self {
            CType::Array(inner, _) => CType::Pointer(inner.clone()),
            other => other.clone(),
        }
    }

    fn base_name(&self) -> String {
        match self {
            CType::Int { bits, signed } => {
                let base = match bits {
                    8 => "char",
                    16 => "short",
                    32 => "int",
                    _ => "long",
                };
                if *signed {
                    base.to_string()
                } else if *bits == 32 {
                    "unsigned int".to_string()
                } else {
                    format!("unsigned {base}")
                }
            }
            CType::Float { bits: 32 } => "float".to_string(),
            CType::Float { .. } => "double".to_string(),
            CType::Record(name) => format!("struct {name}"),
            CType::Void => "void".to_string(),
            CType::Pointer(inner) | CType::Array(inner, _) => inner.base_name(),
        }
    }

    /// Renders a declaration of `name` with this type, e.g. `int* p` or `long a[4]`.
    pub fn declare(&self, name: &str) -> String {
        match self {
            CType::Array(inner, len) => format!("{} {}[{}]", inner, name, len),
            other => format!("{} {}", other, name),
        }
    }
}

impl fmt::Display for CType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CType::Pointer(inner) => write!(f, "{}*", inner),
            CType::Array(inner, len) => write!(f, "{}[{}]", inner, len),
            other => f.write_str(&other.base_name()),
        }
    }
}

impl Serialize for CType {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
    BitNot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Shl,
    Shr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    BitAnd,
    BitXor,
    BitOr,
    LogAnd,
    LogOr,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        use BinaryOp::*;
        match self {
            Add => "+",
            Sub => "-",
            Mul => "*",
            Div => "/",
            Rem => "%",
            Shl => "<<",
            Shr => ">>",
            Lt => "<",
            Le => "<=",
            Gt => ">",
            Ge => ">=",
            Eq => "==",
            Ne => "!=",
            BitAnd => "&",
            BitXor => "^",
            BitOr => "|",
            LogAnd => "&&",
            LogOr => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        use BinaryOp::*;
        match self {
            Mul | Div | Rem => 10,
            Add | Sub => 9,
            Shl | Shr => 8,
            Lt | Le | Gt | Ge => 7,
            Eq | Ne => 6,
            BitAnd => 5,
            BitXor => 4,
            BitOr => 3,
            LogAnd => 2,
            LogOr => 1,
        }
    }

    pub fn is_comparison(self) -> bool {
        use BinaryOp::*;
        matches!(self, Lt | Le | Gt | Ge | Eq | Ne)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    BitAnd,
    BitOr,
    BitXor,
    Shl,
    Shr,
}

impl AssignOp {
    pub fn symbol(self) -> &'static str {
        match self {
            AssignOp::Set => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
            AssignOp::Mul => "*=",
            AssignOp::Div => "/=",
            AssignOp::Rem => "%=",
            AssignOp::BitAnd => "&=",
            AssignOp::BitOr => "|=",
            AssignOp::BitXor => "^=",
            AssignOp::Shl => "<<=",
            AssignOp::Shr => ">>=",
        }
    }

    /// The arithmetic operator of a compound assignment.
    pub fn binary(self) -> Option<BinaryOp> {
        Some(match self {
            AssignOp::Set => return None,
            AssignOp::Add => BinaryOp::Add,
            AssignOp::Sub => BinaryOp::Sub,
            AssignOp::Mul => BinaryOp::Mul,
            AssignOp::Div => BinaryOp::Div,
            AssignOp::Rem => BinaryOp::Rem,
            AssignOp::BitAnd => BinaryOp::BitAnd,
            AssignOp::BitOr => BinaryOp::BitOr,
            AssignOp::BitXor => BinaryOp::BitXor,
            AssignOp::Shl => BinaryOp::Shl,
            AssignOp::Shr => BinaryOp::Shr,
        })
    }
}

/// Surface form of an allocation, kept so printing round-trips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AllocStyle {
    /// `new T[n]`
    New,
    /// `malloc(sizeof(T) * n)`
    MallocSized,
    /// `malloc(n)`: `n` bytes, typed as `void*`.
    MallocBytes,
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    /// Resolved by the type checker; `Void` until then.
    pub ty: CType,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    IntLit(i64),
    FloatLit(f64),
    Ident(String),
    Index { base: Box<Expr>, index: Box<Expr> },
    Deref(Box<Expr>),
    AddrOf(Box<Expr>),
    Member { base: Box<Expr>, field: String, arrow: bool },
    Unary { op: UnaryOp, operand: Box<Expr> },
    Binary { op: BinaryOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Call { callee: String, args: Vec<Expr> },
    Alloc { elem: CType, count: Box<Expr>, style: AllocStyle },
    /// `x++`, `x--`, `++x`, `--x` used as a value.
    IncDec { target: Box<Expr>, delta: i8, prefix: bool },
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    pub fn new(kind: ExprKind, ty: CType, span: SourceSpan) -> Expr {
        Expr { kind, ty, span }
    }

    pub fn int(value: i64, span: SourceSpan) -> Expr {
        Expr::new(ExprKind::IntLit(value), CType::int(), span)
    }

    pub fn ident(name: impl Into<String>, ty: CType, span: SourceSpan) -> Expr {
        Expr::new(ExprKind::Ident(name.into()), ty, span)
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr, ty: CType) -> Expr {
        let span = lhs.span.clone();
        Expr::new(
            ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) },
            ty,
            span,
        )
    }

    pub fn index(base: Expr, index: Expr) -> Expr {
        let ty = base.ty.element().cloned().unwrap_or(CType::Void);
        let span = base.span.clone();
        Expr::new(
            ExprKind::Index { base: Box::new(base), index: Box::new(index) },
            ty,
            span,
        )
    }

    pub fn as_ident(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Ident(name) => Some(name),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, ExprKind::IntLit(0))
    }

    /// Pre-order traversal of this expression and all subexpressions.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::IntLit(_) | ExprKind::FloatLit(_) | ExprKind::Ident(_) => {}
            ExprKind::Index { base, index } => {
                base.walk(f);
                index.walk(f);
            }
            ExprKind::Deref(e) | ExprKind::AddrOf(e) => e.walk(f),
            ExprKind::Member { base, .. } => base.walk(f),
            ExprKind::Unary { operand, .. } => operand.walk(f),
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            ExprKind::Call { args, .. } => args.iter().for_each(|a| a.walk(f)),
            ExprKind::Alloc { count, .. } => count.walk(f),
            ExprKind::IncDec { target, .. } => target.walk(f),
        }
    }

    /// Post-order mutable traversal.
    pub fn walk_mut(&mut self, f: &mut dyn FnMut(&mut Expr)) {
        match &mut self.kind {
            ExprKind::IntLit(_) | ExprKind::FloatLit(_) | ExprKind::Ident(_) => {}
            ExprKind::Index { base, index } => {
                base.walk_mut(f);
                index.walk_mut(f);
            }
            ExprKind::Deref(e) | ExprKind::AddrOf(e) => e.walk_mut(f),
            ExprKind::Member { base, .. } => base.walk_mut(f),
            ExprKind::Unary { operand, .. } => operand.walk_mut(f),
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.walk_mut(f);
                rhs.walk_mut(f);
            }
            ExprKind::Call { args, .. } => args.iter_mut().for_each(|a| a.walk_mut(f)),
            ExprKind::Alloc { count, .. } => count.walk_mut(f),
            ExprKind::IncDec { target, .. } => target.walk_mut(f),
        }
        f(self);
    }

    /// True if any identifier in the expression satisfies `pred`.
    pub fn mentions(&self, pred: &dyn Fn(&str) -> bool) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            if let ExprKind::Ident(name) = &e.kind {
                if pred(name) {
                    found = true;
                }
            }
        });
        found
    }
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Decl { name: String, ty: CType, init: Option<Expr> },
    Assign { lhs: Expr, op: AssignOp, rhs: Expr },
    Expr(Expr),
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        step: Option<Box<Stmt>>,
        body: Vec<Stmt>,
    },
    While { cond: Expr, body: Vec<Stmt> },
    If { cond: Expr, then_body: Vec<Stmt>, else_body: Vec<Stmt> },
    Return(Option<Expr>),
    Block(Vec<Stmt>),
    /// Statement-level `x++` / `x--`.
    IncDec { target: Expr, delta: i8 },
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Stmt {
    pub fn new(kind: StmtKind, span: SourceSpan) -> Stmt {
        Stmt { kind, span }
    }

    pub fn is_loop(&self) -> bool {
        matches!(self.kind, StmtKind::For { .. } | StmtKind::While { .. })
    }

    /// Expressions owned directly by this statement (not by nested statements).
    pub fn own_exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Decl { init, .. } => init.iter().collect(),
            StmtKind::Assign { lhs, rhs, .. } => vec![lhs, rhs],
            StmtKind::Expr(e) => vec![e],
            StmtKind::For { cond, .. } => cond.iter().collect(),
            StmtKind::While { cond, .. } => vec![cond],
            StmtKind::If { cond, .. } => vec![cond],
            StmtKind::Return(e) => e.iter().collect(),
            StmtKind::Block(_) => vec![],
            StmtKind::IncDec { target, .. } => vec![target],
        }
    }

    /// Statements nested directly inside this one, in execution order.
    pub fn children(&self) -> Vec<&Stmt> {
        match &self.kind {
            StmtKind::For { init, step, body, .. } => {
                let mut out: Vec<&Stmt> = init.iter().map(|s| s.as_ref()).collect();
                out.extend(body.iter());
                out.extend(step.iter().map(|s| s.as_ref()));
                out
            }
            StmtKind::While { body, .. } | StmtKind::Block(body) => body.iter().collect(),
            StmtKind::If { then_body, else_body, .. } => {
                then_body.iter().chain(else_body.iter()).collect()
            }
            _ => vec![],
        }
    }

    /// Pre-order traversal over this statement and every nested statement.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Stmt)) {
        f(self);
        for child in self.children() {
            child.walk(f);
        }
    }

    /// Visits every expression reachable from this statement, nested statements included.
    pub fn walk_exprs<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        self.walk(&mut |s| {
            for e in s.own_exprs() {
                e.walk(f);
            }
        });
    }
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub ty: CType,
    pub span: SourceSpan,
}

impl PartialEq for Param {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.ty == other.ty
    }
}

#[derive(Debug, Clone)]
pub struct Function {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: CType,
    /// `None` for a prototype without a body.
    pub body: Option<Vec<Stmt>>,
    pub span: SourceSpan,
}

impl PartialEq for Function {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.params == other.params
            && self.ret == other.ret
            && self.body == other.body
    }
}

#[derive(Debug, Clone)]
pub struct RecordDef {
    pub name: String,
    pub fields: Vec<(String, CType)>,
    pub span: SourceSpan,
}

impl PartialEq for RecordDef {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.fields == other.fields
    }
}

impl RecordDef {
    pub fn field_index(&self, field: &str) -> Option<usize> {
        self.fields.iter().position(|(name, _)| name == field)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TranslationUnit {
    pub records: Vec<RecordDef>,
    pub functions: Vec<Function>,
}

impl TranslationUnit {
    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn record(&self, name: &str) -> Option<&RecordDef> {
        self.records.iter().find(|r| r.name == name)
    }

    /// Every identifier spelled anywhere in the unit: functions, records,
    /// fields, parameters, locals and referenced names.
    pub fn identifiers(&self) -> std::collections::BTreeSet<String> {
        let mut out = std::collections::BTreeSet::new();
        for r in &self.records {
            out.insert(r.name.clone());
            out.extend(r.fields.iter().map(|(n, _)| n.clone()));
        }
        for f in &self.functions {
            out.insert(f.name.clone());
            out.extend(f.params.iter().map(|p| p.name.clone()));
            for s in f.body.iter().flatten() {
                s.walk(&mut |s| {
                    if let StmtKind::Decl { name, .. } = &s.kind {
                        out.insert(name.clone());
                    }
                });
                s.walk_exprs(&mut |e| match &e.kind {
                    ExprKind::Ident(n) => {
                        out.insert(n.clone());
                    }
                    ExprKind::Call { callee, .. } => {
                        out.insert(callee.clone());
                    }
                    ExprKind::Member { field, .. } => {
                        out.insert(field.clone());
                    }
                    _ => {}
                });
            }
        }
        out
    }
}
