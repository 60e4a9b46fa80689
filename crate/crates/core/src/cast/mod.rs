//! Front end for the C subset: lexer, parser, type checker and canonical printer.

mod ast;
mod check;
mod lexer;
mod parser;
mod print;

pub use ast::*;
pub use check::{builtin_signature, check, Signature};
pub use print::{print, print_expr, print_stmt};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{span}: error: expected {}, found {found}", .expected.join(" or "))]
    Syntax { span: SourceSpan, expected: Vec<String>, found: String },
    #[error("{span}: error: unsupported construct: {construct}")]
    Unsupported { span: SourceSpan, construct: String },
    #[error("{span}: error: {message}")]
    Type { span: SourceSpan, message: String },
}

impl ParseError {
    pub fn span(&self) -> &SourceSpan {
        match self {
            ParseError::Syntax { span, .. }
            | ParseError::Unsupported { span, .. }
            | ParseError::Type { span, .. } => span,
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            ParseError::Syntax { .. } => "syntax",
            ParseError::Unsupported { .. } => "unsupported",
            ParseError::Type { .. } => "type",
        }
    }
}

/// Parses and type-checks `source`; `file` is only used for spans.
pub fn parse(file: &str, source: &str) -> Result<TranslationUnit, ParseError> {
    let mut tu = parser::parse_unit(file, source)?;
    check(&mut tu)?;
    Ok(tu)
}

/// True iff the trees are identical ignoring spans and resolved types.
pub fn structural_equal(a: &TranslationUnit, b: &TranslationUnit) -> bool {
    a == b
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body(src: &str) -> Vec<Stmt> {
        let tu = parse("t.c", src).unwrap();
        tu.functions[0].body.clone().unwrap()
    }

    #[test]
    fn minimal_declaration() {
        let stmts = body("void f() { int x = 0; }");
        assert_eq!(stmts.len(), 1);
        match &stmts[0].kind {
            StmtKind::Decl { name, ty, init } => {
                assert_eq!(name, "x");
                assert_eq!(*ty, CType::Int { bits: 32, signed: true });
                assert!(init.as_ref().unwrap().is_zero());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    const PBKDF2: &str = "
void derive(char* p, char* digtmp, int tkeylen, int cplen) {
    for (int i = 0; i < tkeylen; i += cplen) {
        for (int k = 0; k < cplen; k++) {
            p[k] ^= digtmp[k];
        }
        p += cplen;
    }
}";

    #[test]
    fn nested_loop_shape() {
        let stmts = body(PBKDF2);
        let StmtKind::For { body: outer, .. } = &stmts[0].kind else { panic!() };
        let StmtKind::For { body: inner, .. } = &outer[0].kind else { panic!() };
        assert!(matches!(inner[0].kind, StmtKind::Assign { op: AssignOp::BitXor, .. }));
        let StmtKind::Assign { lhs, op, .. } = &outer[1].kind else { panic!() };
        assert_eq!(*op, AssignOp::Add);
        assert_eq!(lhs.as_ident(), Some("p"));
    }

    #[test]
    fn branch_with_pointer_arithmetic() {
        let stmts = body(
            "void f(int exp, int* ptr) { int* x; int* y; if (exp) { x = ptr++; } else { y = ptr + 2; } }",
        );
        let StmtKind::If { then_body, else_body, .. } = &stmts[2].kind else { panic!() };
        let StmtKind::Assign { rhs, .. } = &then_body[0].kind else { panic!() };
        assert!(matches!(rhs.kind, ExprKind::IncDec { delta: 1, prefix: false, .. }));
        let StmtKind::Assign { rhs, .. } = &else_body[0].kind else { panic!() };
        assert!(matches!(rhs.kind, ExprKind::Binary { op: BinaryOp::Add, .. }));
        assert!(rhs.ty.is_pointer());
    }

    #[test]
    fn round_trip_and_sum_index() {
        let tu = parse("t.c", PBKDF2).unwrap();
        let text = print(&tu);
        assert!(structural_equal(&parse("t.c", &text).unwrap(), &tu));
        let tu = parse("t.c", "void f(int* p, long p_adj, int k) { p[k + p_adj] = 1; }").unwrap();
        assert!(print(&tu).contains("p[k + p_adj]"));
    }

    #[test]
    fn operand_order_is_significant() {
        let a = parse("t.c", "void f(int* p, long p_adj, int i) { p[i + p_adj] = 1; }").unwrap();
        let b = parse("t.c", "void f(int* p, long p_adj, int i) { p[p_adj + i] = 1; }").unwrap();
        assert!(structural_equal(&a, &a));
        assert!(!structural_equal(&a, &b));
    }

    #[test]
    fn unsupported_constructs_are_named() {
        for (src, what) in [
            ("void f() { goto x; }", "goto"),
            ("void f(int x) { switch (x) { } }", "switch"),
            ("void f(long* p) { int* q = (int*) p; }", "cast"),
            ("void f(int a) { int b = a ? 1 : 2; }", "conditional operator"),
            ("int g;", "global variable"),
        ] {
            let err = parse("u.c", src).unwrap_err();
            match &err {
                ParseError::Unsupported { construct, .. } => assert_eq!(construct, what),
                other => panic!("{src}: {other}"),
            }
        }
    }

    #[test]
    fn diagnostics_carry_location() {
        let err = parse("bad.c", "void f() {\n  int x = ;\n}").unwrap_err();
        assert!(err.to_string().starts_with("bad.c:2:11: error: expected expression"), "{err}");
        let err = parse("bad.c", "void f() { y = 1; }").unwrap_err();
        assert_eq!(err.kind(), "type");
    }
}
