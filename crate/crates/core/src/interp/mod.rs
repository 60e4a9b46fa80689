//! Deterministic interpreter for the C subset. Memory is a set of data
//! containers addressed by (container, offset) pairs, and every element
//! access is recorded so two runs can be compared event by event.

mod builtins;
mod generate;
mod machine;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::cast::{Expr, SourceSpan, TranslationUnit};

pub use generate::{generate_program, GeneratorConfig, GENERATED_ENTRY};

/// A runtime value. Pointers name a container by its internal index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Ptr(Pointer),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pointer {
    /// Internal container index; `None` is the null pointer.
    pub(crate) target: Option<usize>,
    pub(crate) offset: i64,
}

impl Pointer {
    pub const NULL: Pointer = Pointer { target: None, offset: 0 };
}

/// A value as it appears in a trace: pointers refer to the container's
/// data id, or to a plain variable when they point at one.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scalar {
    Int(i64),
    Float(f64),
    Pointer { container: usize, offset: i64 },
    Variable { offset: i64 },
    Null,
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Self) -> bool {
        use Scalar::*;
        match (self, other) {
            (Int(a), Int(b)) => a == b,
            (Float(a), Float(b)) => a.to_bits() == b.to_bits(),
            (Pointer { container: c1, offset: o1 }, Pointer { container: c2, offset: o2 }) => c1 == c2 && o1 == o2,
            (Variable { offset: a }, Variable { offset: b }) => a == b,
            (Null, Null) => true,
            _ => false,
        }
    }
}

impl Scalar {
    fn is_pointer(&self) -> bool {
        matches!(self, Scalar::Pointer { .. } | Scalar::Variable { .. } | Scalar::Null)
    }

    /// Equality that ignores which container a pointer designates.
    fn value_eq(&self, other: &Scalar) -> bool {
        if self.is_pointer() && other.is_pointer() {
            matches!(self, Scalar::Null) == matches!(other, Scalar::Null)
        } else {
            self == other
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Int(v) => write!(f, "{v}"),
            Scalar::Float(v) => write!(f, "{v:?}"),
            Scalar::Pointer { container, offset } => write!(f, "&c{container}[{offset}]"),
            Scalar::Variable { offset } => write!(f, "&var[{offset}]"),
            Scalar::Null => f.write_str("null"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Read,
    Write,
    Alloc,
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvent {
    pub seq: usize,
    /// Data id: containers are numbered in allocation order.
    pub container: usize,
    /// Element offset; for `alloc` events this is the container length.
    pub offset: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub kind: EventKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<Scalar>,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            EventKind::Read => "read",
            EventKind::Write => "write",
            EventKind::Alloc => "alloc",
            EventKind::Free => "free",
        };
        write!(f, "#{} {kind} c{}[{}]", self.seq, self.container, self.offset)?;
        if let Some(field) = &self.field {
            write!(f, ".{field}")?;
        }
        if let Some(v) = &self.value {
            write!(f, " = {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContainerState {
    pub container: usize,
    pub element: String,
    /// One entry per scalar slot; records contribute one slot per field.
    pub values: Vec<Option<Scalar>>,
}

/// Data containers reachable from the entry function's variables and
/// return value when it returns, sorted by data id.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FinalState {
    pub containers: Vec<ContainerState>,
}

impl FinalState {
    pub fn container(&self, id: usize) -> Option<&ContainerState> {
        self.containers.iter().find(|c| c.container == id)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
    pub returned: Option<Scalar>,
    pub final_state: FinalState,
}

impl Trace {
    /// Values of the container the entry function returned a pointer into,
    /// from the pointed-to element to the end.
    pub fn returned_values(&self) -> Option<Vec<Option<Scalar>>> {
        match self.returned? {
            Scalar::Pointer { container, offset } => {
                let c = self.final_state.container(container)?;
                Some(c.values.iter().skip(offset.max(0) as usize).cloned().collect())
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrapKind {
    OutOfBounds,
    UninitializedRead,
    FuelExhausted,
    OffsetOverflow,
    CrossContainer,
    NullDereference,
    UseAfterFree,
    DivisionByZero,
    UnknownFunction,
    StackOverflow,
    BadEntry,
}

impl fmt::Display for TrapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TrapKind::OutOfBounds => "out-of-bounds access",
            TrapKind::UninitializedRead => "read of uninitialized value",
            TrapKind::FuelExhausted => "fuel exhausted",
            TrapKind::OffsetOverflow => "pointer offset overflow",
            TrapKind::CrossContainer => "pointers into different containers",
            TrapKind::NullDereference => "null dereference",
            TrapKind::UseAfterFree => "use after free",
            TrapKind::DivisionByZero => "division by zero",
            TrapKind::UnknownFunction => "call to a function without a body",
            TrapKind::StackOverflow => "call depth exceeded",
            TrapKind::BadEntry => "bad entry point",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{span}: trap: {kind}: {message}")]
pub struct Trap {
    pub kind: TrapKind,
    pub span: SourceSpan,
    pub message: String,
    /// Events recorded before the trap.
    pub partial: Vec<TraceEvent>,
}

/// Order in which a scheduled loop runs its iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterationOrder {
    InOrder,
    Reversed,
    Shuffled(u64),
}

/// Reorders the iterations of one loop. The iteration space is found by
/// evaluating the condition while advancing each induction variable by its
/// stride; every iteration then runs the body with those values installed.
#[derive(Debug, Clone)]
pub struct LoopSchedule {
    pub line: u32,
    pub column: u32,
    pub induction: Vec<(String, Expr)>,
    pub order: IterationOrder,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub fuel: u64,
    pub schedule: Option<LoopSchedule>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { fuel: 1_000_000, schedule: None }
    }
}

/// Runs `entry` with scalar `inputs` and at most `fuel` executed statements.
pub fn run(tu: &TranslationUnit, entry: &str, inputs: &[Value], fuel: u64) -> Result<Trace, Trap> {
    run_with(tu, entry, inputs, &RunOptions { fuel, schedule: None })
}

pub fn run_with(tu: &TranslationUnit, entry: &str, inputs: &[Value], options: &RunOptions) -> Result<Trace, Trap> {
    machine::Machine::new(tu, options).run(entry, inputs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompareMode {
    /// Event-by-event identity, including containers and offsets.
    Strict,
    /// Read/write values in order plus the returned data; layouts may differ.
    ValueLevel,
}

/// Where two traces first disagree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Divergence {
    pub index: usize,
    pub left: Option<TraceEvent>,
    pub right: Option<TraceEvent>,
    pub reason: String,
}

pub fn trace_equal(a: &Trace, b: &Trace, mode: CompareMode) -> bool {
    first_divergence(a, b, mode).is_none()
}

fn read_writes(t: &Trace) -> Vec<&TraceEvent> {
    t.events.iter().filter(|e| matches!(e.kind, EventKind::Read | EventKind::Write)).collect()
}

pub fn first_divergence(a: &Trace, b: &Trace, mode: CompareMode) -> Option<Divergence> {
    let (left, right): (Vec<&TraceEvent>, Vec<&TraceEvent>) = match mode {
        CompareMode::Strict => (a.events.iter().collect(), b.events.iter().collect()),
        CompareMode::ValueLevel => {
            (read_writes(a), read_writes(b))
        }
    };
    for i in 0..left.len().max(right.len()) {
        let (l, r) = (left.get(i).copied(), right.get(i).copied());
        let same = match (l, r) {
            (Some(l), Some(r)) => match mode {
                CompareMode::Strict => l == r,
                CompareMode::ValueLevel => {
                    l.kind == r.kind
                        && match (&l.value, &r.value) {
                            (Some(x), Some(y)) => x.value_eq(y),
                            (x, y) => x.is_none() && y.is_none(),
                        }
                }
            },
            _ => false,
        };
        if !same {
            return Some(Divergence { index: i, left: l.cloned(), right: r.cloned(), reason: "events differ".into() });
        }
    }
    let returned_same = match mode {
        CompareMode::Strict => a.returned == b.returned && a.final_state == b.final_state,
        CompareMode::ValueLevel => {
            let values_same = match (a.returned_values(), b.returned_values()) {
                (Some(x), Some(y)) => {
                    x.len() == y.len()
                        && x.iter().zip(&y).all(|(p, q)| match (p, q) {
                            (Some(p), Some(q)) => p.value_eq(q),
                            (p, q) => p.is_none() && q.is_none(),
                        })
                }
                (None, None) => match (&a.returned, &b.returned) {
                    (Some(x), Some(y)) => x.value_eq(y),
                    (x, y) => x.is_none() && y.is_none(),
                },
                _ => false,
            };
            values_same
        }
    };
    if returned_same {
        None
    } else {
        Some(Divergence {
            index: left.len(),
            left: None,
            right: None,
            reason: "return value or final state differs".into(),
        })
    }
}

#[cfg(test)]
mod tests;
