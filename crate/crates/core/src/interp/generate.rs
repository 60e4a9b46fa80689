//! Seeded generator of trap-free pointer programs. The generator tracks,
//! for every pointer, the container it designates and an interval of
//! possible offsets, and only emits accesses the interval proves in bounds.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cast::{parse, TranslationUnit};

/// Name of the entry function of every generated program. It takes no
/// arguments and returns a checksum of its scalar locals.
pub const GENERATED_ENTRY: &str = "generated_main";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorConfig {
    /// Statements to emit, not counting initialization loops.
    pub statements: usize,
    pub max_depth: usize,
    /// Upper bound on loop trip counts.
    pub max_trip: i64,
    /// Upper bound on container lengths.
    pub max_len: i64,
}

impl GeneratorConfig {
    pub fn with_size(size: usize) -> Self {
        GeneratorConfig { statements: size.max(1), max_depth: 3, max_trip: 5, max_len: 24 }
    }
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self::with_size(24)
    }
}

/// Generates a well-typed program that runs without trapping.
pub fn generate_program(seed: u64, size: usize) -> TranslationUnit {
    generate_with(seed, &GeneratorConfig::with_size(size))
}

pub fn generate_with(seed: u64, config: &GeneratorConfig) -> TranslationUnit {
    let src = generate_source(seed, config);
    match parse("generated.c", &src) {
        Ok(tu) => tu,
        Err(e) => panic!("generator produced an invalid program ({e}):\n{src}"),
    }
}

/// Source text of the program `generate_with` would return.
pub fn generate_source(seed: u64, config: &GeneratorConfig) -> String {
    let mut g = Gen::new(seed, config);
    g.program()
}

const HELPERS: &str = "\
long gen_sum(int* a, long n) {
    long s = 0;
    while (n > 0) {
        s += *a;
        a++;
        n--;
    }
    return s;
}

void gen_fill(int* d, long n, long v) {
    for (long k = 0; k < n; k++) {
        *d = v + k;
        d += 1;
    }
}

";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Elem {
    Int,
    Long,
    Char,
}

impl Elem {
    fn name(self) -> &'static str {
        match self {
            Elem::Int => "int",
            Elem::Long => "long",
            Elem::Char => "char",
        }
    }
}

struct Container {
    len: i64,
}

/// Possible offsets of a pointer into one container.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Range {
    container: usize,
    lo: i64,
    hi: i64,
}

impl Range {
    fn shift(self, d: i64) -> Range {
        Range { lo: self.lo + d, hi: self.hi + d, ..self }
    }

    fn hull(self, o: Range) -> Option<Range> {
        (self.container == o.container).then(|| Range { lo: self.lo.min(o.lo), hi: self.hi.max(o.hi), ..self })
    }
}

#[derive(Clone)]
struct Ptr {
    name: String,
    elem: Elem,
    at: Option<Range>,
    /// Nonzero while an enclosing construct relies on this pointer not moving.
    frozen: u32,
}

struct Gen<'c> {
    rng: ChaCha8Rng,
    cfg: &'c GeneratorConfig,
    out: String,
    indent: usize,
    fresh: usize,
    containers: Vec<Container>,
    ptrs: Vec<Ptr>,
    ints: Vec<String>,
    /// Enclosing loop variables and their trip counts.
    loops: Vec<(String, i64)>,
    depth: usize,
    budget: usize,
}

impl<'c> Gen<'c> {
    fn new(seed: u64, cfg: &'c GeneratorConfig) -> Self {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            cfg,
            out: String::new(),
            indent: 0,
            fresh: 0,
            containers: Vec::new(),
            ptrs: Vec::new(),
            ints: Vec::new(),
            loops: Vec::new(),
            depth: 0,
            budget: cfg.statements,
        }
    }

    fn name(&mut self, prefix: &str) -> String {
        self.fresh += 1;
        format!("{prefix}{}", self.fresh)
    }

    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("    ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn program(&mut self) -> String {
        self.out.push_str(HELPERS);
        self.out.push_str(&format!("long {GENERATED_ENTRY}() {{\n"));
        self.indent = 1;
        for _ in 0..self.rng.gen_range(1..=3) {
            let v = self.name("v");
            let init = self.rng.gen_range(-4..10);
            self.line(&format!("long {v} = {init};"));
            self.ints.push(v);
        }
        self.alloc_stmt();
        while self.budget > 0 {
            self.stmt();
        }
        let sum = self.ints.join(" + ");
        self.line(&format!("return {sum};"));
        self.out.push_str("}\n");
        std::mem::take(&mut self.out)
    }

    fn pick_elem(&mut self) -> Elem {
        *[Elem::Int, Elem::Int, Elem::Long, Elem::Char].choose(&mut self.rng).expect("nonempty")
    }

    /// Declares a fresh container, fills it, and points a new pointer at it.
    fn alloc_stmt(&mut self) {
        let elem = if self.rng.gen_bool(0.6) { Elem::Int } else { self.pick_elem() };
        let len = self.rng.gen_range(4..=self.cfg.max_len);
        let p = self.name("p");
        let t = elem.name();
        let holder = match self.rng.gen_range(0..3) {
            0 => {
                let a = self.name("a");
                self.line(&format!("{t} {a}[{len}];"));
                Some(a)
            }
            1 if elem == Elem::Char => {
                self.line(&format!("char* {p} = malloc({len});"));
                None
            }
            1 => {
                self.line(&format!("{t}* {p} = malloc({len} * sizeof({t}));"));
                None
            }
            _ => {
                self.line(&format!("{t}* {p} = new {t}[{len}];"));
                None
            }
        };
        let base = holder.clone().unwrap_or_else(|| p.clone());
        let k = self.name("k");
        let mul = self.rng.gen_range(1..7);
        let add = self.rng.gen_range(-3..9);
        self.line(&format!("for (long {k} = 0; {k} < {len}; {k}++) {{"));
        self.line(&format!("    {base}[{k}] = {k} * {mul} + {add};"));
        self.line("}");
        if let Some(a) = holder {
            self.line(&format!("{t}* {p} = {a};"));
        }
        self.containers.push(Container { len });
        let container = self.containers.len() - 1;
        self.ptrs.push(Ptr { name: p, elem, at: Some(Range { container, lo: 0, hi: 0 }), frozen: 0 });
    }

    fn len_of(&self, r: Range) -> i64 {
        self.containers[r.container].len
    }

    fn usable(&self) -> Vec<usize> {
        (0..self.ptrs.len()).filter(|&i| self.ptrs[i].at.is_some()).collect()
    }

    fn movable(&self) -> Vec<usize> {
        (0..self.ptrs.len()).filter(|&i| self.ptrs[i].frozen == 0).collect()
    }

    fn pick(&mut self, from: &[usize]) -> Option<usize> {
        from.choose(&mut self.rng).copied()
    }

    /// An index expression valid for every offset in `r`, optionally using
    /// an enclosing loop variable.
    fn index(&mut self, r: Range) -> Option<(String, Option<i64>)> {
        let len = self.len_of(r);
        let looped = if !self.loops.is_empty() && self.rng.gen_bool(0.5) {
            self.loops.choose(&mut self.rng).cloned()
        } else {
            None
        };
        let span = looped.as_ref().map_or(0, |(_, k)| k - 1);
        let (lo, hi) = (-r.lo, len - 1 - r.hi - span);
        if lo > hi {
            return None;
        }
        let c = self.rng.gen_range(lo..=hi);
        Some(match looped {
            Some((v, _)) if c > 0 => (format!("{v} + {c}"), None),
            Some((v, _)) if c < 0 => (format!("{v} - {}", -c), None),
            Some((v, _)) => (v, None),
            None => (c.to_string(), Some(c)),
        })
    }

    fn access(&mut self, p: usize) -> Option<String> {
        let r = self.ptrs[p].at?;
        let name = self.ptrs[p].name.clone();
        let (idx, constant) = self.index(r)?;
        Some(match constant {
            Some(0) if self.rng.gen_bool(0.5) => format!("*{name}"),
            Some(c) if c > 0 && self.rng.gen_bool(0.2) => format!("*({name} + {c})"),
            _ => format!("{name}[{idx}]"),
        })
    }

    fn value(&mut self, depth: usize) -> String {
        let roll = self.rng.gen_range(0..10);
        match roll {
            0..=1 => self.rng.gen_range(-5..20).to_string(),
            2..=3 => self.ints.choose(&mut self.rng).cloned().unwrap_or_else(|| "1".into()),
            4..=6 => {
                let usable = self.usable();
                match self.pick(&usable).and_then(|p| self.access(p)) {
                    Some(a) => a,
                    None => "2".into(),
                }
            }
            7 if !self.loops.is_empty() => self.loops.choose(&mut self.rng).map(|l| l.0.clone()).unwrap_or_default(),
            _ if depth < 2 => {
                let op = *["+", "-", "^", "&", "|", "*"].choose(&mut self.rng).expect("nonempty");
                let l = self.value(depth + 1);
                let r = self.value(depth + 1);
                format!("({l} {op} {r})")
            }
            _ => self.rng.gen_range(0..9).to_string(),
        }
    }

    fn stmt(&mut self) {
        self.budget = self.budget.saturating_sub(1);
        for _ in 0..8 {
            let nested = self.depth < self.cfg.max_depth;
            let done = match self.rng.gen_range(0..26) {
                0..=3 => self.write_stmt(),
                4..=5 => self.int_stmt(),
                6..=8 => self.move_stmt(),
                9..=11 => self.assign_stmt(),
                12..=13 => self.decl_stmt(),
                14 if self.containers.len() < 5 => {
                    self.alloc_stmt();
                    true
                }
                15..=16 if nested => self.if_stmt(),
                17..=19 if nested => self.for_stmt(),
                20 => self.balanced_stmt(),
                21 => self.call_stmt(),
                22 => self.double_stmt(),
                23 => self.diff_stmt(),
                24 => self.postinc_stmt(),
                25 => self.null_check_stmt(),
                _ => false,
            };
            if done {
                return;
            }
        }
        self.int_stmt();
    }

    fn write_stmt(&mut self) -> bool {
        let usable = self.usable();
        let Some(p) = self.pick(&usable) else { return false };
        let Some(lhs) = self.access(p) else { return false };
        let rhs = self.value(0);
        let op = *["=", "=", "=", "+=", "-=", "^="].choose(&mut self.rng).expect("nonempty");
        self.line(&format!("{lhs} {op} {rhs};"));
        true
    }

    fn int_stmt(&mut self) -> bool {
        let Some(v) = self.ints.choose(&mut self.rng).cloned() else { return false };
        let rhs = self.value(0);
        let op = *["=", "+=", "^="].choose(&mut self.rng).expect("nonempty");
        self.line(&format!("{v} {op} {rhs};"));
        true
    }

    fn move_stmt(&mut self) -> bool {
        let candidates: Vec<usize> = self.movable().into_iter().filter(|&i| self.ptrs[i].at.is_some()).collect();
        let Some(p) = self.pick(&candidates) else { return false };
        let r = self.ptrs[p].at.expect("usable");
        let len = self.len_of(r);
        let (lo, hi) = (-r.lo, len - r.hi);
        let d = self.rng.gen_range(lo.max(-3)..=hi.min(3));
        if d == 0 {
            return false;
        }
        let name = self.ptrs[p].name.clone();
        let text = match (d, self.rng.gen_bool(0.5)) {
            (1, true) => format!("{name}++;"),
            (-1, true) => format!("{name}--;"),
            (d, _) if d > 0 => format!("{name} += {d};"),
            (d, _) => format!("{name} -= {};", -d),
        };
        self.line(&text);
        self.ptrs[p].at = Some(r.shift(d));
        true
    }

    /// A pointer-valued expression based on pointer `q`, and its range.
    fn derived(&mut self, q: usize) -> Option<(String, Range)> {
        let r = self.ptrs[q].at?;
        let len = self.len_of(r);
        let name = self.ptrs[q].name.clone();
        if !self.loops.is_empty() && self.rng.gen_bool(0.3) {
            let (v, k) = self.loops.choose(&mut self.rng).cloned()?;
            if r.hi + k - 1 <= len {
                let text = if self.rng.gen_bool(0.5) { format!("{name} + {v}") } else { format!("{v} + {name}") };
                return Some((text, Range { hi: r.hi + k - 1, ..r }));
            }
        }
        let d = self.rng.gen_range((-r.lo).max(-4)..=(len - r.hi).min(4));
        let text = match d {
            0 => name,
            d if d > 0 => format!("{name} + {d}"),
            d => format!("{name} - {}", -d),
        };
        Some((text, r.shift(d)))
    }

    fn assign_stmt(&mut self) -> bool {
        let targets = self.movable();
        let Some(p) = self.pick(&targets) else { return false };
        let elem = self.ptrs[p].elem;
        let sources: Vec<usize> =
            self.usable().into_iter().filter(|&q| q != p && self.ptrs[q].elem == elem).collect();
        let Some(q) = self.pick(&sources) else { return false };
        let Some((text, r)) = self.derived(q) else { return false };
        let name = self.ptrs[p].name.clone();
        self.line(&format!("{name} = {text};"));
        self.ptrs[p].at = Some(r);
        true
    }

    fn decl_stmt(&mut self) -> bool {
        let usable = self.usable();
        let Some(q) = self.pick(&usable) else { return false };
        let Some((text, r)) = self.derived(q) else { return false };
        let elem = self.ptrs[q].elem;
        let name = self.name("p");
        self.line(&format!("{}* {name} = {text};", elem.name()));
        self.ptrs.push(Ptr { name, elem, at: Some(r), frozen: 0 });
        true
    }

    fn block(&mut self, body: impl FnOnce(&mut Self)) {
        let (np, ni) = (self.ptrs.len(), self.ints.len());
        self.indent += 1;
        self.depth += 1;
        body(self);
        self.depth -= 1;
        self.indent -= 1;
        self.ptrs.truncate(np);
        self.ints.truncate(ni);
    }

    fn body(&mut self, n: usize) {
        for _ in 0..n {
            if self.budget == 0 {
                break;
            }
            self.stmt();
        }
    }

    fn cond(&mut self) -> String {
        let l = self.value(1);
        let r = self.value(1);
        let op = *["<", "<=", ">", ">=", "==", "!="].choose(&mut self.rng).expect("nonempty");
        format!("{l} {op} {r}")
    }

    fn if_stmt(&mut self) -> bool {
        let cond = self.cond();
        self.line(&format!("if ({cond}) {{"));
        let before: Vec<Option<Range>> = self.ptrs.iter().map(|p| p.at).collect();
        let n = self.rng.gen_range(1..=3);
        self.block(|g| g.body(n));
        let then_at: Vec<Option<Range>> = self.ptrs.iter().map(|p| p.at).collect();
        for (p, at) in self.ptrs.iter_mut().zip(&before) {
            p.at = *at;
        }
        if self.rng.gen_bool(0.5) {
            self.line("} else {");
            let n = self.rng.gen_range(1..=2);
            self.block(|g| g.body(n));
        }
        self.line("}");
        for (p, t) in self.ptrs.iter_mut().zip(then_at) {
            p.at = match (p.at, t) {
                (Some(a), Some(b)) => a.hull(b),
                _ => None,
            };
        }
        true
    }

    fn for_stmt(&mut self) -> bool {
        let trip = self.rng.gen_range(1..=self.cfg.max_trip);
        let i = self.name("i");
        // Pointers advanced once per iteration, after the body.
        let mut strides = Vec::new();
        for p in self.movable() {
            let Some(r) = self.ptrs[p].at else { continue };
            if !self.rng.gen_bool(0.3) {
                continue;
            }
            let len = self.len_of(r);
            let d = *[-2i64, -1, 1, 1, 2].choose(&mut self.rng).expect("nonempty");
            let end = r.shift(d * trip);
            if end.lo >= 0 && end.hi <= len {
                strides.push((p, d));
            }
        }
        let entry: Vec<Option<Range>> = self.ptrs.iter().map(|p| p.at).collect();
        for &(p, d) in &strides {
            let r = entry[p].expect("strided pointers are usable");
            let last = r.shift(d * (trip - 1));
            self.ptrs[p].at = r.hull(last);
        }
        let n_outer = self.ptrs.len();
        for p in &mut self.ptrs {
            p.frozen += 1;
        }
        self.line(&format!("for (long {i} = 0; {i} < {trip}; {i}++) {{"));
        self.loops.push((i, trip));
        let n = self.rng.gen_range(1..=3);
        self.block(|g| {
            g.body(n);
            for &(p, d) in &strides {
                let name = g.ptrs[p].name.clone();
                let text = match d {
                    1 => format!("{name}++;"),
                    -1 => format!("{name}--;"),
                    d if d > 0 => format!("{name} += {d};"),
                    d => format!("{name} -= {};", -d),
                };
                g.line(&text);
            }
        });
        self.loops.pop();
        self.line("}");
        for p in &mut self.ptrs[..n_outer] {
            p.frozen -= 1;
        }
        for (p, at) in self.ptrs.iter_mut().zip(&entry) {
            p.at = *at;
        }
        for (p, d) in strides {
            self.ptrs[p].at = entry[p].map(|r| r.shift(d * trip));
        }
        true
    }

    /// `p += s; ...; p -= s;` around a few statements.
    fn balanced_stmt(&mut self) -> bool {
        let candidates: Vec<usize> = self.movable().into_iter().filter(|&i| self.ptrs[i].at.is_some()).collect();
        let Some(p) = self.pick(&candidates) else { return false };
        let r = self.ptrs[p].at.expect("usable");
        let len = self.len_of(r);
        let (lo, hi) = ((-r.lo).max(-3), (len - r.hi).min(3));
        if lo > hi {
            return false;
        }
        let s = self.rng.gen_range(lo..=hi);
        if s == 0 {
            return false;
        }
        let name = self.ptrs[p].name.clone();
        let (fwd, back) = if s > 0 {
            (format!("{name} += {s};"), format!("{name} -= {s};"))
        } else {
            (format!("{name} -= {};", -s), format!("{name} += {};", -s))
        };
        self.line(&fwd);
        self.ptrs[p].at = Some(r.shift(s));
        self.ptrs[p].frozen += 1;
        let n = self.rng.gen_range(1..=2);
        for _ in 0..n {
            if !self.write_stmt() {
                self.int_stmt();
            }
        }
        self.ptrs[p].frozen -= 1;
        self.line(&back);
        self.ptrs[p].at = Some(r);
        true
    }

    fn call_stmt(&mut self) -> bool {
        let candidates: Vec<usize> = self.usable().into_iter().filter(|&i| self.ptrs[i].elem == Elem::Int).collect();
        let Some(p) = self.pick(&candidates) else { return false };
        let Some((text, r)) = self.derived(p) else { return false };
        let room = self.len_of(r) - r.hi;
        if room < 0 {
            return false;
        }
        let n = self.rng.gen_range(0..=room.min(6));
        if self.rng.gen_bool(0.5) {
            let Some(v) = self.ints.choose(&mut self.rng).cloned() else { return false };
            self.line(&format!("{v} += gen_sum({text}, {n});"));
        } else {
            let val = self.value(1);
            self.line(&format!("gen_fill({text}, {n}, {val});"));
        }
        true
    }

    /// Reads through a pointer to a pointer: `T** r = &p; v = r[0][x];`.
    fn double_stmt(&mut self) -> bool {
        let usable = self.usable();
        let Some(p) = self.pick(&usable) else { return false };
        let Some(v) = self.ints.choose(&mut self.rng).cloned() else { return false };
        let r = self.ptrs[p].at.expect("usable");
        let Some((idx, _)) = self.index(r) else { return false };
        let (name, t) = (self.ptrs[p].name.clone(), self.ptrs[p].elem.name());
        let pp = self.name("pp");
        self.line("{");
        self.line(&format!("    {t}** {pp} = &{name};"));
        self.line(&format!("    {v} += {pp}[0][{idx}];"));
        self.line("}");
        true
    }

    fn diff_stmt(&mut self) -> bool {
        let usable = self.usable();
        let Some(p) = self.pick(&usable) else { return false };
        let c = self.ptrs[p].at.expect("usable").container;
        let same: Vec<usize> = usable
            .into_iter()
            .filter(|&q| q != p && self.ptrs[q].at.is_some_and(|r| r.container == c))
            .collect();
        let Some(q) = self.pick(&same) else { return false };
        let Some(v) = self.ints.choose(&mut self.rng).cloned() else { return false };
        let (a, b) = (self.ptrs[p].name.clone(), self.ptrs[q].name.clone());
        let text = match self.rng.gen_range(0..3) {
            0 => format!("{v} += {a} - {b};"),
            1 => format!("{v} += {a} < {b};"),
            _ => format!("{v} += {a} == {b};"),
        };
        self.line(&text);
        true
    }

    /// `v = *p++;`, which forces the pointer to stay a plain pointer.
    fn postinc_stmt(&mut self) -> bool {
        let candidates: Vec<usize> = self
            .movable()
            .into_iter()
            .filter(|&i| self.ptrs[i].at.is_some_and(|r| r.lo >= 0 && r.hi < self.len_of(r)))
            .collect();
        let Some(p) = self.pick(&candidates) else { return false };
        let Some(v) = self.ints.choose(&mut self.rng).cloned() else { return false };
        let name = self.ptrs[p].name.clone();
        self.line(&format!("{v} += *{name}++;"));
        self.ptrs[p].at = self.ptrs[p].at.map(|r| r.shift(1));
        true
    }

    fn null_check_stmt(&mut self) -> bool {
        let usable = self.usable();
        let Some(p) = self.pick(&usable) else { return false };
        let Some(v) = self.ints.choose(&mut self.rng).cloned() else { return false };
        let name = self.ptrs[p].name.clone();
        self.line(&format!("if ({name} != 0) {{"));
        self.line(&format!("    {v} += 1;"));
        self.line("}");
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_program() {
        let cfg = GeneratorConfig::default();
        assert_eq!(generate_source(7, &cfg), generate_source(7, &cfg));
        assert_ne!(generate_source(7, &cfg), generate_source(8, &cfg));
    }

    #[test]
    fn generated_programs_parse() {
        for seed in 0..50 {
            let tu = generate_program(seed, 20);
            assert!(tu.function(GENERATED_ENTRY).is_some());
        }
    }
}
