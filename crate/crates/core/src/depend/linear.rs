//! Affine forms over named integer variables.

use std::collections::BTreeMap;
use std::fmt;

use crate::adjunct::display_name;
use crate::cast::{BinaryOp, Expr, ExprKind, UnaryOp};

/// `Σ coeff·var + constant`, with no zero coefficients stored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct Lin {
    terms: BTreeMap<String, i64>,
    constant: i64,
}

impl Lin {
    pub fn constant(c: i64) -> Lin {
        Lin { terms: BTreeMap::new(), constant: c }
    }

    pub fn var(name: &str) -> Lin {
        Lin { terms: BTreeMap::from([(name.to_string(), 1)]), constant: 0 }
    }

    pub fn add(&self, o: &Lin) -> Lin {
        let mut out = self.clone();
        for (v, c) in &o.terms {
            let e = out.terms.entry(v.clone()).or_insert(0);
            *e = e.wrapping_add(*c);
            if *e == 0 {
                out.terms.remove(v);
            }
        }
        out.constant = out.constant.wrapping_add(o.constant);
        out
    }

    pub fn sub(&self, o: &Lin) -> Lin {
        self.add(&o.scale(-1))
    }

    pub fn scale(&self, k: i64) -> Lin {
        if k == 0 {
            return Lin::default();
        }
        Lin {
            terms: self.terms.iter().map(|(v, c)| (v.clone(), c.wrapping_mul(k))).collect(),
            constant: self.constant.wrapping_mul(k),
        }
    }

    pub fn coeff(&self, name: &str) -> i64 {
        self.terms.get(name).copied().unwrap_or(0)
    }

    pub fn without(&self, name: &str) -> Lin {
        let mut out = self.clone();
        out.terms.remove(name);
        out
    }

    pub fn as_constant(&self) -> Option<i64> {
        self.terms.is_empty().then_some(self.constant)
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.terms.keys().map(String::as_str)
    }

    /// Provably `>= 0` for every value of the variables.
    pub fn nonnegative(&self) -> bool {
        self.as_constant().is_some_and(|c| c >= 0)
    }
}

impl fmt::Display for Lin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.terms {
            let v = display_name(v);
            let (sign, mag) = if *c < 0 { ("-", -c) } else { ("+", *c) };
            match (first, sign) {
                (true, "-") => f.write_str("-")?,
                (true, _) => {}
                (false, s) => write!(f, " {s} ")?,
            }
            if mag == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{mag}*{v}")?;
            }
            first = false;
        }
        match (first, self.constant) {
            (true, c) => write!(f, "{c}"),
            (false, 0) => Ok(()),
            (false, c) if c < 0 => write!(f, " - {}", -c),
            (false, c) => write!(f, " + {c}"),
        }
    }
}

/// Affine form of an integer expression, or the reason it has none.
pub(crate) fn linearize(e: &Expr) -> Result<Lin, String> {
    match &e.kind {
        ExprKind::IntLit(c) => Ok(Lin::constant(*c)),
        ExprKind::Ident(v) if e.ty.is_integer() => Ok(Lin::var(v)),
        ExprKind::Unary { op: UnaryOp::Neg, operand } => Ok(linearize(operand)?.scale(-1)),
        ExprKind::Binary { op: BinaryOp::Add, lhs, rhs } => Ok(linearize(lhs)?.add(&linearize(rhs)?)),
        ExprKind::Binary { op: BinaryOp::Sub, lhs, rhs } => Ok(linearize(lhs)?.sub(&linearize(rhs)?)),
        ExprKind::Binary { op: BinaryOp::Mul, lhs, rhs } => {
            let (l, r) = (linearize(lhs)?, linearize(rhs)?);
            match (l.as_constant(), r.as_constant()) {
                (Some(k), _) => Ok(r.scale(k)),
                (_, Some(k)) => Ok(l.scale(k)),
                _ => Err(format!("`{}` is not affine", crate::cast::print_expr(e))),
            }
        }
        _ => Err(format!("`{}` is not affine", crate::cast::print_expr(e))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forms_combine_and_print() {
        let a = Lin::var("p_adj").add(&Lin::var("cplen")).add(&Lin::constant(-1));
        assert_eq!(a.to_string(), "cplen + p_adj - 1");
        assert_eq!(a.sub(&a), Lin::default());
        assert_eq!(Lin::var("k").scale(-2).to_string(), "-2*k");
        assert!(Lin::var("x").sub(&Lin::var("x")).add(&Lin::constant(3)).nonnegative());
        assert!(!Lin::var("x").nonnegative());
    }
}
