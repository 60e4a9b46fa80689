//! Recursive-descent parser producing an untyped [`TranslationUnit`].
//! Types on expressions are filled in afterwards by `check`.

use std::sync::Arc;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

const TYPE_WORDS: &[&str] = &[
    "void", "char", "short", "int", "long", "unsigned", "signed", "float", "double", "size_t",
    "struct", "const", "volatile",
];

const UNSUPPORTED_WORDS: &[&str] = &[
    "goto", "switch", "case", "default", "do", "break", "continue", "typedef", "union", "enum",
    "sizeof",
];

pub fn parse_unit(file: &str, source: &str) -> Result<TranslationUnit, ParseError> {
    let file: Arc<str> = Arc::from(file);
    let tokens = tokenize(&file, source)?;
    let mut parser = Parser { tokens, pos: 0 };
    parser.unit()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

fn is_type_word(tok: &Tok) -> bool {
    matches!(tok, Tok::Ident(w) if TYPE_WORDS.contains(&w.as_str()))
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let idx = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn span(&self) -> SourceSpan {
        self.tokens[self.pos].span.clone()
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == w)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        ParseError::Syntax {
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn unsupported(&self, construct: &str) -> ParseError {
        ParseError::Unsupported { span: self.span(), construct: construct.to_string() }
    }

    fn expect_punct(&mut self, p: &'static str) -> Result<SourceSpan, ParseError> {
        if self.is_punct(p) {
            Ok(self.bump().span)
        } else {
            Err(self.error(&[&format!("`{p}`")]))
        }
    }

    fn expect_ident(&mut self) -> Result<(String, SourceSpan), ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) if !is_type_word(self.peek()) => {
                if UNSUPPORTED_WORDS.contains(&name.as_str()) {
                    return Err(self.unsupported(&name));
                }
                let span = self.bump().span;
                Ok((name, span))
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn unit(&mut self) -> Result<TranslationUnit, ParseError> {
        let mut tu = TranslationUnit::default();
        while *self.peek() != Tok::Eof {
            if let Tok::Ident(w) = self.peek() {
                if UNSUPPORTED_WORDS.contains(&w.as_str()) {
                    return Err(self.unsupported(&w.clone()));
                }
            }
            if self.is_word("struct")
                && matches!(self.peek_at(1), Tok::Ident(_))
                && matches!(self.peek_at(2), Tok::Punct("{"))
            {
                tu.records.push(self.record()?);
                continue;
            }
            tu.functions.push(self.function()?);
        }
        Ok(tu)
    }

    fn record(&mut self) -> Result<RecordDef, ParseError> {
        let span = self.span();
        self.bump();
        let (name, _) = self.expect_ident()?;
        self.expect_punct("{")?;
        let mut fields = Vec::new();
        while !self.eat_punct("}") {
            let base = self.base_type()?;
            loop {
                let ty = self.stars(base.clone());
                let (fname, _) = self.expect_ident()?;
                if self.is_punct("[") {
                    return Err(self.unsupported("array field"));
                }
                fields.push((fname, ty));
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(";")?;
        }
        self.expect_punct(";")?;
        Ok(RecordDef { name, fields, span })
    }

    fn function(&mut self) -> Result<Function, ParseError> {
        while self.eat_word("static") || self.eat_word("inline") || self.eat_word("extern") {}
        let span = self.span();
        if !is_type_word(self.peek()) {
            return Err(self.error(&["type"]));
        }
        let ret = self.full_type()?;
        let (name, _) = self.expect_ident()?;
        if !self.is_punct("(") {
            if self.is_punct("=") || self.is_punct(";") || self.is_punct("[") {
                return Err(self.unsupported("global variable"));
            }
            return Err(self.error(&["`(`"]));
        }
        self.bump();
        let mut params = Vec::new();
        if self.is_word("void") && matches!(self.peek_at(1), Tok::Punct(")")) {
            self.bump();
        }
        if !self.is_punct(")") {
            loop {
                if self.is_punct("...") {
                    return Err(self.unsupported("variadic parameters"));
                }
                let pspan = self.span();
                let ty = self.full_type()?;
                let (pname, _) = self.expect_ident()?;
                if self.is_punct("[") {
                    return Err(self.unsupported("array parameter"));
                }
                params.push(Param { name: pname, ty, span: pspan });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        let body = if self.eat_punct(";") {
            None
        } else {
            self.expect_punct("{")?;
            Some(self.block_tail()?)
        };
        Ok(Function { name, params, ret, body, span })
    }

    fn base_type(&mut self) -> Result<CType, ParseError> {
        while self.eat_word("const") || self.eat_word("volatile") {}
        let mut signed: Option<bool> = None;
        let mut longs = 0;
        let mut base: Option<&str> = None;
        loop {
            let Tok::Ident(w) = self.peek().clone() else { break };
            match w.as_str() {
                "const" | "volatile" => {}
                "unsigned" => signed = Some(false),
                "signed" => signed = Some(true),
                "long" => longs += 1,
                "char" | "short" | "int" | "float" | "double" | "void" | "size_t" => {
                    if base.is_some() {
                        return Err(self.error(&["declarator"]));
                    }
                    base = Some(match w.as_str() {
                        "char" => "char",
                        "short" => "short",
                        "int" => "int",
                        "float" => "float",
                        "double" => "double",
                        "void" => "void",
                        _ => "size_t",
                    });
                }
                "struct" => {
                    if base.is_some() || signed.is_some() || longs > 0 {
                        return Err(self.error(&["declarator"]));
                    }
                    self.bump();
                    let (name, _) = self.expect_ident()?;
                    while self.eat_word("const") {}
                    return Ok(CType::Record(name));
                }
                _ => break,
            }
            self.bump();
        }
        let signed_flag = signed.unwrap_or(true);
        let ty = match (base, longs) {
            (Some("void"), 0) if signed.is_none() => CType::Void,
            (Some("float"), 0) if signed.is_none() => CType::Float { bits: 32 },
            (Some("double"), _) if signed.is_none() => CType::Float { bits: 64 },
            (Some("size_t"), 0) if signed.is_none() => CType::Int { bits: 64, signed: false },
            (Some("char"), 0) => CType::Int { bits: 8, signed: signed_flag },
            (Some("short"), 0) => CType::Int { bits: 16, signed: signed_flag },
            (Some("int") | None, 0) if base.is_some() || signed.is_some() => {
                CType::Int { bits: 32, signed: signed_flag }
            }
            (Some("int") | None, 1 | 2) => CType::Int { bits: 64, signed: signed_flag },
            _ => return Err(self.error(&["type"])),
        };
        Ok(ty)
    }

    fn stars(&mut self, mut ty: CType) -> CType {
        loop {
            if self.eat_punct("*") {
                ty = CType::pointer_to(ty);
            } else if self.eat_word("const") || self.eat_word("restrict") || self.eat_word("volatile") {
            } else {
                return ty;
            }
        }
    }

    fn full_type(&mut self) -> Result<CType, ParseError> {
        let base = self.base_type()?;
        let ty = self.stars(base);
        if ty.order() > 2 {
            return Err(self.unsupported("pointer of order greater than 2"));
        }
        Ok(ty)
    }

    fn block_tail(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let mut out = Vec::new();
        while !self.eat_punct("}") {
            if *self.peek() == Tok::Eof {
                return Err(self.error(&["`}`"]));
            }
            self.statement_into(&mut out)?;
        }
        Ok(out)
    }

    fn body(&mut self) -> Result<Vec<Stmt>, ParseError> {
        if self.eat_punct("{") {
            self.block_tail()
        } else {
            let mut out = Vec::new();
            self.statement_into(&mut out)?;
            Ok(out)
        }
    }

    fn statement_into(&mut self, out: &mut Vec<Stmt>) -> Result<(), ParseError> {
        let span = self.span();
        if let Tok::Ident(w) = self.peek() {
            if UNSUPPORTED_WORDS.contains(&w.as_str()) {
                return Err(self.unsupported(&w.clone()));
            }
        }
        if self.eat_punct("{") {
            let body = self.block_tail()?;
            out.push(Stmt::new(StmtKind::Block(body), span));
            return Ok(());
        }
        if self.eat_punct(";") {
            out.push(Stmt::new(StmtKind::Block(vec![]), span));
            return Ok(());
        }
        if self.eat_word("for") {
            self.expect_punct("(")?;
            let init = if self.is_punct(";") {
                None
            } else if is_type_word(self.peek()) {
                let mut decls = self.declaration()?;
                if decls.len() != 1 {
                    return Err(ParseError::Unsupported {
                        span,
                        construct: "multiple declarations in for-loop header".into(),
                    });
                }
                Some(Box::new(decls.remove(0)))
            } else {
                Some(Box::new(self.simple()?))
            };
            self.expect_punct(";")?;
            let cond = if self.is_punct(";") { None } else { Some(self.expr()?) };
            self.expect_punct(";")?;
            let step = if self.is_punct(")") { None } else { Some(Box::new(self.simple()?)) };
            self.expect_punct(")")?;
            let body = self.body()?;
            out.push(Stmt::new(StmtKind::For { init, cond, step, body }, span));
            return Ok(());
        }
        if self.eat_word("while") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let body = self.body()?;
            out.push(Stmt::new(StmtKind::While { cond, body }, span));
            return Ok(());
        }
        if self.eat_word("if") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then_body = self.body()?;
            let else_body = if self.eat_word("else") {
                if self.is_word("if") {
                    let mut nested = Vec::new();
                    self.statement_into(&mut nested)?;
                    nested
                } else {
                    self.body()?
                }
            } else {
                Vec::new()
            };
            out.push(Stmt::new(StmtKind::If { cond, then_body, else_body }, span));
            return Ok(());
        }
        if self.eat_word("return") {
            let value = if self.is_punct(";") { None } else { Some(self.expr()?) };
            self.expect_punct(";")?;
            out.push(Stmt::new(StmtKind::Return(value), span));
            return Ok(());
        }
        if is_type_word(self.peek()) {
            let decls = self.declaration()?;
            self.expect_punct(";")?;
            out.extend(decls);
            return Ok(());
        }
        let stmt = self.simple()?;
        self.expect_punct(";")?;
        out.push(stmt);
        Ok(())
    }

    /// `T a = e, *b, c[4]` without the trailing `;`.
    fn declaration(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let base = self.base_type()?;
        let mut out = Vec::new();
        loop {
            let span = self.span();
            let mut ty = self.stars(base.clone());
            let (name, _) = self.expect_ident()?;
            if self.eat_punct("[") {
                let len = match self.peek().clone() {
                    Tok::Int(v) if v >= 0 => {
                        self.bump();
                        v as u64
                    }
                    _ => return Err(self.error(&["array length literal"])),
                };
                self.expect_punct("]")?;
                if self.is_punct("[") {
                    return Err(self.unsupported("multidimensional array"));
                }
                ty = CType::Array(Box::new(ty), len);
            }
            if ty.order() > 2 {
                return Err(ParseError::Unsupported {
                    span,
                    construct: "pointer of order greater than 2".into(),
                });
            }
            let init = if self.eat_punct("=") {
                if self.is_punct("{") {
                    return Err(self.unsupported("initializer list"));
                }
                Some(self.expr()?)
            } else {
                None
            };
            out.push(Stmt::new(StmtKind::Decl { name, ty, init }, span));
            if !self.eat_punct(",") {
                break;
            }
        }
        Ok(out)
    }

    /// Assignment, increment/decrement or expression statement, no `;`.
    fn simple(&mut self) -> Result<Stmt, ParseError> {
        let span = self.span();
        let lhs = self.expr()?;
        const OPS: &[(&str, AssignOp)] = &[
            ("=", AssignOp::Set),
            ("+=", AssignOp::Add),
            ("-=", AssignOp::Sub),
            ("*=", AssignOp::Mul),
            ("/=", AssignOp::Div),
            ("%=", AssignOp::Rem),
            ("&=", AssignOp::BitAnd),
            ("|=", AssignOp::BitOr),
            ("^=", AssignOp::BitXor),
            ("<<=", AssignOp::Shl),
            (">>=", AssignOp::Shr),
        ];
        for (sym, op) in OPS {
            if self.eat_punct(sym) {
                let rhs = self.expr()?;
                return Ok(Stmt::new(StmtKind::Assign { lhs, op: *op, rhs }, span));
            }
        }
        match lhs.kind {
            ExprKind::IncDec { target, delta, .. } => {
                Ok(Stmt::new(StmtKind::IncDec { target: *target, delta }, span))
            }
            _ => Ok(Stmt::new(StmtKind::Expr(lhs), span)),
        }
    }

    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.unary()?;
        self.binary_rhs(lhs, 1)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        let Tok::Punct(p) = self.peek() else { return None };
        use BinaryOp::*;
        Some(match *p {
            "*" => Mul,
            "/" => Div,
            "%" => Rem,
            "+" => Add,
            "-" => Sub,
            "<<" => Shl,
            ">>" => Shr,
            "<" => Lt,
            "<=" => Le,
            ">" => Gt,
            ">=" => Ge,
            "==" => Eq,
            "!=" => Ne,
            "&" => BitAnd,
            "^" => BitXor,
            "|" => BitOr,
            "&&" => LogAnd,
            "||" => LogOr,
            _ => return None,
        })
    }

    fn binary_rhs(&mut self, mut lhs: Expr, min_prec: u8) -> Result<Expr, ParseError> {
        loop {
            if self.is_punct("?") {
                return Err(self.unsupported("conditional operator"));
            }
            let Some(op) = self.binary_op() else { return Ok(lhs) };
            let prec = op.precedence();
            if prec < min_prec {
                return Ok(lhs);
            }
            self.bump();
            let first = self.unary()?;
            let rhs = self.binary_rhs(first, prec + 1)?;
            let span = lhs.span.to(&rhs.span);
            lhs = Expr::new(
                ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) },
                CType::Void,
                span,
            );
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let span = self.span();
        let make = |kind: ExprKind, end: &SourceSpan| Expr::new(kind, CType::Void, span.to(end));
        if self.eat_punct("-") {
            // Fold a directly following literal into a negative literal.
            if let Tok::Int(v) = self.peek().clone() {
                if !self.postfix_follows(1) {
                    let end = self.bump().span;
                    let value = i64::try_from(-v).map_err(|_| ParseError::Syntax {
                        span: end.clone(),
                        expected: vec!["64-bit integer".into()],
                        found: format!("-{v}"),
                    })?;
                    return Ok(make(ExprKind::IntLit(value), &end));
                }
            }
            if let Tok::Float(v) = self.peek().clone() {
                if !self.postfix_follows(1) {
                    let end = self.bump().span;
                    return Ok(make(ExprKind::FloatLit(-v), &end));
                }
            }
            let operand = self.unary()?;
            let end = operand.span.clone();
            return Ok(make(ExprKind::Unary { op: UnaryOp::Neg, operand: Box::new(operand) }, &end));
        }
        if self.eat_punct("+") {
            return self.unary();
        }
        for (p, op) in [("!", UnaryOp::Not), ("~", UnaryOp::BitNot)] {
            if self.eat_punct(p) {
                let operand = self.unary()?;
                let end = operand.span.clone();
                return Ok(make(ExprKind::Unary { op, operand: Box::new(operand) }, &end));
            }
        }
        if self.eat_punct("*") {
            let operand = self.unary()?;
            let end = operand.span.clone();
            return Ok(make(ExprKind::Deref(Box::new(operand)), &end));
        }
        if self.eat_punct("&") {
            let operand = self.unary()?;
            let end = operand.span.clone();
            return Ok(make(ExprKind::AddrOf(Box::new(operand)), &end));
        }
        for (p, delta) in [("++", 1i8), ("--", -1i8)] {
            if self.eat_punct(p) {
                let operand = self.unary()?;
                let end = operand.span.clone();
                return Ok(make(
                    ExprKind::IncDec { target: Box::new(operand), delta, prefix: true },
                    &end,
                ));
            }
        }
        if self.is_punct("(") && is_type_word(self.peek_at(1)) {
            return Err(self.unsupported("cast"));
        }
        if self.is_word("new") {
            self.bump();
            let elem = self.full_type()?;
            self.expect_punct("[")?;
            let count = self.expr()?;
            let end = self.expect_punct("]")?;
            return Ok(make(
                ExprKind::Alloc { elem, count: Box::new(count), style: AllocStyle::New },
                &end,
            ));
        }
        self.postfix()
    }

    fn postfix_follows(&self, ahead: usize) -> bool {
        matches!(self.peek_at(ahead), Tok::Punct("[" | "(" | "." | "->" | "++" | "--"))
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        loop {
            let start = e.span.clone();
            if self.eat_punct("[") {
                let index = self.expr()?;
                let end = self.expect_punct("]")?;
                e = Expr::new(
                    ExprKind::Index { base: Box::new(e), index: Box::new(index) },
                    CType::Void,
                    start.to(&end),
                );
            } else if self.is_punct(".") || self.is_punct("->") {
                let arrow = self.is_punct("->");
                self.bump();
                let (field, end) = self.expect_ident()?;
                e = Expr::new(
                    ExprKind::Member { base: Box::new(e), field, arrow },
                    CType::Void,
                    start.to(&end),
                );
            } else if self.is_punct("++") || self.is_punct("--") {
                let delta = if self.is_punct("++") { 1 } else { -1 };
                let end = self.bump().span;
                e = Expr::new(
                    ExprKind::IncDec { target: Box::new(e), delta, prefix: false },
                    CType::Void,
                    start.to(&end),
                );
            } else if self.is_punct("(") {
                return Err(self.unsupported("call through an expression"));
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                let value = i64::try_from(v).map_err(|_| ParseError::Syntax {
                    span: span.clone(),
                    expected: vec!["64-bit integer".into()],
                    found: v.to_string(),
                })?;
                Ok(Expr::new(ExprKind::IntLit(value), CType::Void, span))
            }
            Tok::Float(v) => {
                self.bump();
                Ok(Expr::new(ExprKind::FloatLit(v), CType::Void, span))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(name) if name == "malloc" && matches!(self.peek_at(1), Tok::Punct("(")) => {
                self.bump();
                self.bump();
                self.malloc_args(span)
            }
            Tok::Ident(_) => {
                let (name, name_span) = self.expect_ident()?;
                if self.eat_punct("(") {
                    let mut args = Vec::new();
                    if !self.is_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    let end = self.expect_punct(")")?;
                    return Ok(Expr::new(
                        ExprKind::Call { callee: name, args },
                        CType::Void,
                        name_span.to(&end),
                    ));
                }
                Ok(Expr::new(ExprKind::Ident(name), CType::Void, name_span))
            }
            _ => Err(self.error(&["expression"])),
        }
    }

    fn sizeof_type(&mut self) -> Result<CType, ParseError> {
        self.bump();
        self.expect_punct("(")?;
        let ty = self.full_type()?;
        self.expect_punct(")")?;
        Ok(ty)
    }

    /// After `malloc(`: `sizeof(T) * n`, `n * sizeof(T)`, or a raw byte count.
    fn malloc_args(&mut self, span: SourceSpan) -> Result<Expr, ParseError> {
        let (elem, count, style) = if self.is_word("sizeof") {
            let elem = self.sizeof_type()?;
            self.expect_punct("*")?;
            (elem, self.expr()?, AllocStyle::MallocSized)
        } else {
            let first = self.unary()?;
            let first = self.binary_rhs(first, BinaryOp::Mul.precedence() + 1)?;
            if self.is_punct("*") && matches!(self.peek_at(1), Tok::Ident(w) if w == "sizeof") {
                self.bump();
                let elem = self.sizeof_type()?;
                (elem, first, AllocStyle::MallocSized)
            } else {
                let count = self.binary_rhs(first, 1)?;
                (CType::char(), count, AllocStyle::MallocBytes)
            }
        };
        let end = self.expect_punct(")")?;
        Ok(Expr::new(
            ExprKind::Alloc { elem, count: Box::new(count), style },
            CType::Void,
            span.to(&end),
        ))
    }
}
