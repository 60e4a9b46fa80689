//! Models of the library functions a program may call without defining.

use super::machine::{fault, Machine, R};
use super::{Pointer, TrapKind, Value};
use crate::cast::{CType, SourceSpan};

const CTX_WORDS: i64 = 4;

/// Runs builtin `name`, or returns `None` when it is not modelled.
pub(super) fn call(m: &mut Machine<'_>, name: &str, args: &[Value], span: &SourceSpan) -> Option<R<Option<Value>>> {
    let result = match name {
        "memcpy" => memcpy(m, args, span),
        "memset" => memset(m, args, span),
        "free" => m.pointer(args[0], span).and_then(|p| m.free(p, span)).map(|_| None),
        "atoi" => atoi(m, args[0], span),
        "HMAC_CTX_new" => ctx_new(m, span),
        "HMAC_CTX_copy" => ctx_copy(m, args, span),
        "HMAC_Update" => ctx_update(m, args, span),
        "HMAC_Final" => ctx_final(m, args[0], span),
        "HMAC_CTX_free" => m.pointer(args[0], span).and_then(|p| m.free(p, span)).map(|_| None),
        _ => return None,
    };
    Some(result)
}

fn count(v: Value, span: &SourceSpan) -> R<i64> {
    match v {
        Value::Int(n) if n >= 0 => Ok(n),
        _ => fault(TrapKind::OutOfBounds, span, "bad element count"),
    }
}

/// Copies `n` elements, one read and one write per element.
fn memcpy(m: &mut Machine<'_>, args: &[Value], span: &SourceSpan) -> R<Option<Value>> {
    let dst = m.pointer(args[0], span)?;
    let src = m.pointer(args[1], span)?;
    let n = count(args[2], span)?;
    for k in 0..n {
        let from = m.deref_place(src, k, span)?;
        let v = m.read(from, span)?;
        let to = m.deref_place(dst, k, span)?;
        m.write(to, v, span)?;
    }
    Ok(None)
}

fn memset(m: &mut Machine<'_>, args: &[Value], span: &SourceSpan) -> R<Option<Value>> {
    let dst = m.pointer(args[0], span)?;
    let n = count(args[2], span)?;
    for k in 0..n {
        let to = m.deref_place(dst, k, span)?;
        m.write(to, args[1], span)?;
    }
    Ok(None)
}

fn atoi(m: &mut Machine<'_>, s: Value, span: &SourceSpan) -> R<Option<Value>> {
    let p = m.pointer(s, span)?;
    let mut text = String::new();
    for k in 0.. {
        let pl = m.deref_place(p, k, span)?;
        match m.read(pl, span)? {
            Value::Int(0) => break,
            Value::Int(c) => text.push(u8::try_from(c).map(char::from).unwrap_or('?')),
            _ => return fault(TrapKind::BadEntry, span, "atoi of a non-character string"),
        }
    }
    let t = text.trim_start();
    let end = t
        .char_indices()
        .find(|&(i, c)| !(c.is_ascii_digit() || (i == 0 && (c == '-' || c == '+'))))
        .map_or(t.len(), |(i, _)| i);
    let v = t[..end].parse::<i64>().unwrap_or(0);
    Ok(Some(Value::Int(v as i32 as i64)))
}

fn mix(acc: i64, v: i64) -> i64 {
    (acc ^ v).wrapping_mul(0x0100_0000_01b3).rotate_left(13)
}

fn ctx_new(m: &mut Machine<'_>, span: &SourceSpan) -> R<Option<Value>> {
    let c = m.alloc_data(&CType::long(), CTX_WORDS as usize);
    let p = Pointer { target: Some(c), offset: 0 };
    for k in 0..CTX_WORDS {
        let pl = m.deref_place(p, k, span)?;
        m.write(pl, Value::Int(0), span)?;
    }
    Ok(Some(Value::Ptr(p)))
}

fn ctx_copy(m: &mut Machine<'_>, args: &[Value], span: &SourceSpan) -> R<Option<Value>> {
    let dst = m.pointer(args[0], span)?;
    let src = m.pointer(args[1], span)?;
    memcpy(m, &[Value::Ptr(dst), Value::Ptr(src), Value::Int(CTX_WORDS)], span)?;
    Ok(Some(Value::Int(1)))
}

fn ctx_update(m: &mut Machine<'_>, args: &[Value], span: &SourceSpan) -> R<Option<Value>> {
    let ctx = m.pointer(args[0], span)?;
    let data = m.pointer(args[1], span)?;
    let n = count(args[2], span)?;
    for i in 0..n {
        let from = m.deref_place(data, i, span)?;
        let d = match m.read(from, span)? {
            Value::Int(v) => v,
            Value::Float(f) => f.to_bits() as i64,
            Value::Ptr(_) => return fault(TrapKind::BadEntry, span, "cannot hash a pointer"),
        };
        let slot = m.deref_place(ctx, i % CTX_WORDS, span)?;
        let old = match m.read(slot, span)? {
            Value::Int(v) => v,
            _ => 0,
        };
        m.write(slot, Value::Int(mix(old, d)), span)?;
    }
    Ok(Some(Value::Int(1)))
}

fn ctx_final(m: &mut Machine<'_>, ctx: Value, span: &SourceSpan) -> R<Option<Value>> {
    let ctx = m.pointer(ctx, span)?;
    let mut acc = 0x6a09_e667;
    for k in 0..CTX_WORDS {
        let slot = m.deref_place(ctx, k, span)?;
        if let Value::Int(v) = m.read(slot, span)? {
            acc = mix(acc, v);
        }
    }
    Ok(Some(Value::Int(acc)))
}
