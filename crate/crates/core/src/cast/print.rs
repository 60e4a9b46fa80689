//! Canonical C printer: four-space indentation, braces on every body,
//! one statement per line and only the parentheses precedence requires.

use std::fmt::Write;

use super::ast::*;

const PREC_UNARY: u8 = 11;
const PREC_POSTFIX: u8 = 12;

pub fn print(tu: &TranslationUnit) -> String {
    let mut out = String::new();
    let mut first = true;
    for r in &tu.records {
        if !first {
            out.push('\n');
        }
        first = false;
        let _ = writeln!(out, "struct {} {{", r.name);
        for (name, ty) in &r.fields {
            let _ = writeln!(out, "    {};", ty.declare(name));
        }
        out.push_str("};\n");
    }
    for f in &tu.functions {
        if !first {
            out.push('\n');
        }
        first = false;
        let params: Vec<String> = f.params.iter().map(|p| p.ty.declare(&p.name)).collect();
        let _ = write!(out, "{} {}({})", f.ret, f.name, params.join(", "));
        match &f.body {
            None => out.push_str(";\n"),
            Some(body) => {
                out.push_str(" {\n");
                block(&mut out, body, 1);
                out.push_str("}\n");
            }
        }
    }
    out
}

pub fn print_stmt(s: &Stmt) -> String {
    let mut out = String::new();
    stmt(&mut out, s, 0);
    out
}

pub fn print_expr(e: &Expr) -> String {
    expr(e, 0)
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn block(out: &mut String, body: &[Stmt], depth: usize) {
    for s in body {
        stmt(out, s, depth);
    }
}

/// A statement without its trailing `;`, for use in `for` headers.
fn simple(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::Decl { name, ty, init } => match init {
            Some(e) => format!("{} = {}", ty.declare(name), expr(e, 0)),
            None => ty.declare(name),
        },
        StmtKind::Assign { lhs, op, rhs } => {
            format!("{} {} {}", expr(lhs, 0), op.symbol(), expr(rhs, 0))
        }
        StmtKind::Expr(e) => expr(e, 0),
        StmtKind::IncDec { target, delta } => {
            format!("{}{}", expr(target, PREC_POSTFIX), if *delta > 0 { "++" } else { "--" })
        }
        // Only simple statements appear in for headers.
        _ => String::new(),
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::Decl { .. } | StmtKind::Assign { .. } | StmtKind::Expr(_) | StmtKind::IncDec { .. } => {
            out.push_str(&simple(s));
            out.push_str(";\n");
        }
        StmtKind::For { init, cond, step, body } => {
            let init = init.as_deref().map(simple).unwrap_or_default();
            let cond = cond.as_ref().map(|c| format!(" {}", expr(c, 0))).unwrap_or_default();
            let step = step.as_deref().map(|s| format!(" {}", simple(s))).unwrap_or_default();
            let _ = writeln!(out, "for ({init};{cond};{step}) {{");
            block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "while ({}) {{", expr(cond, 0));
            block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::If { .. } => if_chain(out, s, depth),
        StmtKind::Return(value) => match value {
            Some(e) => {
                let _ = writeln!(out, "return {};", expr(e, 0));
            }
            None => out.push_str("return;\n"),
        },
        StmtKind::Block(body) => {
            out.push_str("{\n");
            block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
    }
}

fn if_chain(out: &mut String, s: &Stmt, depth: usize) {
    let StmtKind::If { cond, then_body, else_body } = &s.kind else { return };
    let _ = writeln!(out, "if ({}) {{", expr(cond, 0));
    block(out, then_body, depth + 1);
    indent(out, depth);
    match else_body.as_slice() {
        [] => out.push_str("}\n"),
        [nested] if matches!(nested.kind, StmtKind::If { .. }) => {
            out.push_str("} else ");
            if_chain(out, nested, depth);
        }
        _ => {
            out.push_str("} else {\n");
            block(out, else_body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
    }
}

fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary { op, .. } => op.precedence(),
        ExprKind::Unary { .. } | ExprKind::Deref(_) | ExprKind::AddrOf(_) => PREC_UNARY,
        ExprKind::IncDec { prefix: true, .. } => PREC_UNARY,
        ExprKind::Alloc { style: AllocStyle::New, .. } => PREC_UNARY,
        _ => PREC_POSTFIX,
    }
}

fn float(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'E']) {
        s
    } else {
        format!("{s}.0")
    }
}

fn expr(e: &Expr, min: u8) -> String {
    let text = match &e.kind {
        ExprKind::IntLit(v) => v.to_string(),
        ExprKind::FloatLit(v) => float(*v),
        ExprKind::Ident(name) => name.clone(),
        ExprKind::Index { base, index } => format!("{}[{}]", expr(base, PREC_POSTFIX), expr(index, 0)),
        ExprKind::Deref(inner) => format!("*{}", expr(inner, PREC_UNARY)),
        ExprKind::AddrOf(inner) => format!("&{}", expr(inner, PREC_UNARY)),
        ExprKind::Member { base, field, arrow } => {
            format!("{}{}{}", expr(base, PREC_POSTFIX), if *arrow { "->" } else { "." }, field)
        }
        ExprKind::Unary { op, operand } => {
            let sym = match op {
                UnaryOp::Neg => "-",
                UnaryOp::Not => "!",
                UnaryOp::BitNot => "~",
            };
            let inner = expr(operand, PREC_UNARY);
            // Keep `-(5)` apart from the literal `-5`, and `-(-x)` apart from `--x`.
            let literal = matches!(operand.kind, ExprKind::IntLit(_) | ExprKind::FloatLit(_));
            if *op == UnaryOp::Neg && (inner.starts_with('-') || literal) && !inner.starts_with('(') {
                format!("-({inner})")
            } else {
                format!("{sym}{inner}")
            }
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            format!("{} {} {}", expr(lhs, p), op.symbol(), expr(rhs, p + 1))
        }
        ExprKind::Call { callee, args } => {
            let args: Vec<String> = args.iter().map(|a| expr(a, 0)).collect();
            format!("{callee}({})", args.join(", "))
        }
        ExprKind::Alloc { elem, count, style } => match style {
            AllocStyle::New => format!("new {elem}[{}]", expr(count, 0)),
            AllocStyle::MallocSized => format!("malloc(sizeof({elem}) * {})", expr(count, PREC_UNARY)),
            AllocStyle::MallocBytes => format!("malloc({})", expr(count, 0)),
        },
        ExprKind::IncDec { target, delta, prefix } => {
            let sym = if *delta > 0 { "++" } else { "--" };
            if *prefix {
                format!("{sym}{}", expr(target, PREC_UNARY))
            } else {
                format!("{}{sym}", expr(target, PREC_POSTFIX))
            }
        }
    };
    if prec(e) < min {
        format!("({text})")
    } else {
        text
    }
}

#[cfg(test)]
mod tests {
    use crate::cast::{parse, print, structural_equal};

    fn canon(src: &str) -> String {
        print(&parse("t.c", src).unwrap())
    }

    #[test]
    fn minimal_parentheses() {
        let out = canon("int f(int a, int b, int c) { return (a + (b * c)) - (a - (b - c)); }");
        assert!(out.contains("return a + b * c - (a - (b - c));"), "{out}");
    }

    #[test]
    fn canonical_layout() {
        let out = canon("void f(int*p){for(int i=0;i<4;i++)p[i]=0;if(p[0])p++;else if(p[1]){p--;}}");
        let expected = "\
void f(int* p) {
    for (int i = 0; i < 4; i++) {
        p[i] = 0;
    }
    if (p[0]) {
        p++;
    } else if (p[1]) {
        p--;
    }
}
";
        assert_eq!(out, expected);
    }

    #[test]
    fn negation_round_trips() {
        for src in [
            "int f(int a) { return -(5) + -5 - -a; }",
            "int f(int a) { return -(-a); }",
            "double f() { return -2.5 * 1e-7; }",
            "int f(int a) { return -(a * 2); }",
        ] {
            let tu = parse("t.c", src).unwrap();
            let again = parse("t.c", &print(&tu)).unwrap();
            assert!(structural_equal(&tu, &again), "{}", print(&tu));
        }
    }

    #[test]
    fn allocations_round_trip() {
        let src = "void f(int n) { long* a = new long[n + 1]; int* b = malloc(sizeof(int) * (n * 2)); \
                   int* c = malloc(n * sizeof(int)); char* d = malloc(16); }";
        let tu = parse("t.c", src).unwrap();
        let text = print(&tu);
        assert!(text.contains("malloc(sizeof(int) * n)"), "{text}");
        assert!(structural_equal(&parse("t.c", &text).unwrap(), &tu));
    }
}
