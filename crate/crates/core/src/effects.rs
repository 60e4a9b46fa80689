//! Effect whitelist for external calls: which pointer arguments a function
//! reads, writes or both. Extents are always the whole container.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Effect {
    Read,
    Write,
    ReadWrite,
}

impl Effect {
    pub fn reads(self) -> bool {
        matches!(self, Effect::Read | Effect::ReadWrite)
    }

    pub fn writes(self) -> bool {
        matches!(self, Effect::Write | Effect::ReadWrite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Special {
    /// The callee only allocates and rebinds `*p` for a `T**` argument.
    #[serde(rename = "allocation-delegation")]
    AllocationDelegation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamEffect {
    pub index: usize,
    pub effect: Effect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectAnnotation {
    pub function: String,
    #[serde(default)]
    pub params: Vec<ParamEffect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub special: Option<Special>,
}

impl EffectAnnotation {
    pub fn new(function: &str, params: &[(usize, Effect)]) -> Self {
        EffectAnnotation {
            function: function.to_string(),
            params: params.iter().map(|&(index, effect)| ParamEffect { index, effect }).collect(),
            special: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum EffectsError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{origin}:{line}:{column}: error: {message}")]
    Malformed { origin: String, line: usize, column: usize, message: String },
    #[error("{origin}: error: duplicate entry for function `{function}`")]
    Duplicate { origin: String, function: String },
    #[error("{origin}: error: `{function}` annotates parameter {index} twice")]
    DuplicateParam { origin: String, function: String, index: usize },
}

/// Lookup table from function name to its annotation. Unknown functions
/// read and write every pointer argument.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EffectDatabase {
    entries: BTreeMap<String, EffectAnnotation>,
}

impl EffectDatabase {
    /// A database with no entries; every call is maximally conservative.
    pub fn empty() -> Self {
        Self::default()
    }

    /// The built-in whitelist of library functions.
    pub fn builtin() -> Self {
        use Effect::*;
        let mut db = Self::empty();
        for ann in [
            EffectAnnotation::new("memcpy", &[(0, Write), (1, Read)]),
            EffectAnnotation::new("memset", &[(0, Write)]),
            EffectAnnotation::new("free", &[(0, Write)]),
            EffectAnnotation::new("malloc", &[]),
            EffectAnnotation::new("atoi", &[(0, Read)]),
            EffectAnnotation::new("HMAC_CTX_new", &[]),
            EffectAnnotation::new("HMAC_CTX_copy", &[(0, Write), (1, Read)]),
            EffectAnnotation::new("HMAC_CTX_free", &[(0, Write)]),
            EffectAnnotation::new("HMAC_Update", &[(0, ReadWrite), (1, Read)]),
            EffectAnnotation::new("HMAC_Final", &[(0, Read)]),
        ] {
            db.entries.insert(ann.function.clone(), ann);
        }
        db
    }

    /// Reads a JSON whitelist and layers it over the built-ins.
    pub fn load(path: &Path) -> Result<Self, EffectsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| EffectsError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// Parses whitelist text; `origin` names the source in diagnostics.
    pub fn from_json(text: &str, origin: &str) -> Result<Self, EffectsError> {
        let list: Vec<EffectAnnotation> = serde_json::from_str(text).map_err(|e| EffectsError::Malformed {
            origin: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let mut db = Self::builtin();
        let mut seen = BTreeSet::new();
        for ann in list {
            if !seen.insert(ann.function.clone()) {
                return Err(EffectsError::Duplicate { origin: origin.to_string(), function: ann.function });
            }
            let mut indices = BTreeSet::new();
            for p in &ann.params {
                if !indices.insert(p.index) {
                    return Err(EffectsError::DuplicateParam {
                        origin: origin.to_string(),
                        function: ann.function.clone(),
                        index: p.index,
                    });
                }
            }
            db.entries.insert(ann.function.clone(), ann);
        }
        Ok(db)
    }

    /// Serializes every entry, sorted by function name.
    pub fn to_json(&self) -> String {
        let list: Vec<&EffectAnnotation> = self.entries.values().collect();
        serde_json::to_string_pretty(&list).expect("annotations serialize")
    }

    pub fn insert(&mut self, ann: EffectAnnotation) {
        self.entries.insert(ann.function.clone(), ann);
    }

    pub fn remove(&mut self, function: &str) -> Option<EffectAnnotation> {
        self.entries.remove(function)
    }

    pub fn get(&self, function: &str) -> Option<&EffectAnnotation> {
        self.entries.get(function)
    }

    pub fn functions(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn is_allocation_delegation(&self, function: &str) -> bool {
        self.get(function).is_some_and(|a| a.special == Some(Special::AllocationDelegation))
    }

    /// Effect of `callee` on its `index`-th argument; readwrite unless annotated.
    pub fn effect_of(&self, callee: &str, index: usize) -> Effect {
        self.get(callee)
            .and_then(|a| a.params.iter().find(|p| p.index == index))
            .map_or(Effect::ReadWrite, |p| p.effect)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_memcpy_and_hmac() {
        let db = EffectDatabase::builtin();
        assert_eq!(db.effect_of("memcpy", 0), Effect::Write);
        assert_eq!(db.effect_of("memcpy", 1), Effect::Read);
        assert!(db.get("memcpy").unwrap().params.iter().all(|p| p.index != 2));
        assert_eq!(db.effect_of("HMAC_CTX_copy", 0), Effect::Write);
        assert_eq!(db.effect_of("HMAC_CTX_copy", 1), Effect::Read);
        assert!(db.get("HMAC_CTX_new").is_some());
    }

    #[test]
    fn unknown_functions_are_conservative() {
        let db = EffectDatabase::builtin();
        assert_eq!(db.effect_of("qsort", 0), Effect::ReadWrite);
        assert_eq!(db.effect_of("unknown_fn", 3), Effect::ReadWrite);
        assert_eq!(EffectDatabase::empty().effect_of("memcpy", 1), Effect::ReadWrite);
    }

    #[test]
    fn file_entries_layer_over_builtins() {
        let text = r#"[
            {"function": "init_pointer", "params": [{"index": 0, "effect": "write"}],
             "special": "allocation-delegation"},
            {"function": "memcpy", "params": [{"index": 0, "effect": "readwrite"}]}
        ]"#;
        let db = EffectDatabase::from_json(text, "fx.json").unwrap();
        assert!(db.is_allocation_delegation("init_pointer"));
        assert_eq!(db.effect_of("memcpy", 0), Effect::ReadWrite);
        assert_eq!(db.effect_of("HMAC_CTX_copy", 0), Effect::Write);
    }

    #[test]
    fn duplicates_and_malformed_input_are_errors() {
        let dup = r#"[{"function": "f"}, {"function": "f"}]"#;
        assert!(matches!(EffectDatabase::from_json(dup, "d.json"), Err(EffectsError::Duplicate { .. })));
        let bad = "[\n  {\"function\": \"f\", \"effect\": 1}\n]";
        match EffectDatabase::from_json(bad, "b.json") {
            Err(EffectsError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let twice = r#"[{"function": "f", "params": [{"index": 0, "effect": "read"}, {"index": 0, "effect": "write"}]}]"#;
        assert!(EffectDatabase::from_json(twice, "t.json").is_err());
    }

    #[test]
    fn json_round_trip() {
        let db = EffectDatabase::builtin();
        let again = EffectDatabase::from_json(&db.to_json(), "rt.json").unwrap();
        assert_eq!(db, again);
    }
}
