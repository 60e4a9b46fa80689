//! Checks a `parallel` verdict by running the loop's iterations out of order.

use crate::cast::{SourceSpan, Stmt, TranslationUnit};
use crate::interp::{run_with, IterationOrder, LoopSchedule, RunOptions, Trace, Value};

use super::find_induction;

fn find_loop<'t>(tu: &'t TranslationUnit, span: &SourceSpan) -> Option<&'t Stmt> {
    let mut found = None;
    for f in &tu.functions {
        for s in f.body.iter().flatten() {
            s.walk(&mut |s| {
                if s.is_loop() && s.span == *span {
                    found = Some(s);
                }
            });
        }
    }
    found
}

/// Runs `entry` once per input set with the loop at `span` executed in
/// order, reversed and shuffled, and checks that the returned value and
/// final memory agree with an unscheduled run.
pub fn permutation_check(
    tu: &TranslationUnit,
    entry: &str,
    span: &SourceSpan,
    inputs: &[Vec<Value>],
    fuel: u64,
) -> Result<(), String> {
    let lp = find_loop(tu, span).ok_or_else(|| format!("no loop at {span}"))?;
    let induction: Vec<_> = find_induction(lp).into_iter().map(|iv| (iv.variable, iv.stride)).collect();
    if induction.is_empty() {
        return Err(format!("loop at {span} has no induction variable"));
    }
    let outcome = |t: &Trace| (t.returned, t.final_state.clone());
    for args in inputs {
        let plain = RunOptions { fuel, schedule: None };
        let base = run_with(tu, entry, args, &plain).map_err(|t| t.to_string())?;
        for (k, order) in
            [IterationOrder::InOrder, IterationOrder::Reversed, IterationOrder::Shuffled(0x5eed), IterationOrder::Shuffled(7)]
                .into_iter()
                .enumerate()
        {
            let schedule = LoopSchedule { line: span.line, column: span.column, induction: induction.clone(), order };
            let opts = RunOptions { fuel, schedule: Some(schedule) };
            let t = run_with(tu, entry, args, &opts).map_err(|t| format!("order {k}: {t}"))?;
            if outcome(&t) != outcome(&base) {
                return Err(format!("loop at {span}: {order:?} run with inputs {args:?} changes the result"));
            }
        }
    }
    Ok(())
}
