//! Concept and verb symbols, their pairwise overlaps, and overlay algebra.
//!
//! A dictionary file is line based:
//!
//! ```text
//! # comment
//! concept man
//! verb waves
//! overlap man boy 0.6
//! ```
//!
//! Overlaps are symmetric, implicitly 1 on the diagonal and 0 when absent.
//! Overlay similarity is the kernel cosine
//! `C(a,b) / sqrt(C(a,a) * C(b,b))` with the overlap table as kernel,
//! clamped to `[0, 1]`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Concept,
    Verb,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Concept => f.write_str("concept"),
            Kind::Verb => f.write_str("verb"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictEntry {
    pub name: String,
    pub kind: Kind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DictError {
    #[error("line {line}: malformed line: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: invalid token `{token}`")]
    BadToken { line: usize, token: String },
    #[error("line {line}: name `{name}` declared twice")]
    DuplicateName { line: usize, name: String },
    #[error("line {line}: overlap between `{a}` and `{b}` declared twice")]
    DuplicateOverlap { line: usize, a: String, b: String },
    #[error("line {line}: overlap references undeclared name `{name}`")]
    UnknownOverlapTarget { line: usize, name: String },
    #[error("weight {weight} out of range")]
    BadWeight { weight: f64 },
    #[error("kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: Kind, found: Kind },
    #[error("unknown name `{0}`")]
    UnknownName(String),
}

/// Returns true for tokens of the form `[a-z][a-z0-9_-]*`.
pub fn is_valid_token(token: &str) -> bool {
    let mut chars = token.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
}

/// Immutable conceptual and dictionary knowledge.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dictionary {
    entries: BTreeMap<String, Kind>,
    // Stored in both directions so lookups borrow `&str`.
    overlaps: BTreeMap<String, BTreeMap<String, f64>>,
}

impl Dictionary {
    /// Parses the line-based dictionary format.
    ///
    /// Overlap lines may reference names declared further down the file.
    pub fn load(source: &str) -> Result<Self, DictError> {
        let mut entries: BTreeMap<String, Kind> = BTreeMap::new();
        let mut pending = Vec::new();

        for (idx, raw) in source.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            match fields.as_slice() {
                [decl @ ("concept" | "verb"), name] => {
                    if !is_valid_token(name) {
                        return Err(DictError::BadToken {
                            line,
                            token: name.to_string(),
                        });
                    }
                    let kind = if *decl == "concept" {
                        Kind::Concept
                    } else {
                        Kind::Verb
                    };
                    if entries.insert(name.to_string(), kind).is_some() {
                        return Err(DictError::DuplicateName {
                            line,
                            name: name.to_string(),
                        });
                    }
                }
                ["overlap", a, b, weight] => {
                    let w: f64 = weight.parse().map_err(|_| DictError::Malformed {
                        line,
                        message: format!("`{weight}` is not a number"),
                    })?;
                    pending.push((line, a.to_string(), b.to_string(), w));
                }
                _ => {
                    return Err(DictError::Malformed {
                        line,
                        message: format!("unrecognized declaration `{content}`"),
                    })
                }
            }
        }

        let mut dict = Dictionary {
            entries,
            overlaps: BTreeMap::new(),
        };
        for (line, a, b, w) in pending {
            dict.insert_overlap(&a, &b, w).map_err(|e| match e {
                DictError::UnknownName(name) => DictError::UnknownOverlapTarget { line, name },
                DictError::DuplicateOverlap { a, b, .. } => {
                    DictError::DuplicateOverlap { line, a, b }
                }
                other => other,
            })?;
        }
        Ok(dict)
    }

    /// Builds a dictionary from explicit entries and overlap triples.
    pub fn from_parts(
        entries: impl IntoIterator<Item = DictEntry>,
        overlaps: impl IntoIterator<Item = (String, String, f64)>,
    ) -> Result<Self, DictError> {
        let mut dict = Dictionary::default();
        for entry in entries {
            if !is_valid_token(&entry.name) {
                return Err(DictError::BadToken {
                    line: 0,
                    token: entry.name,
                });
            }
            if dict
                .entries
                .insert(entry.name.clone(), entry.kind)
                .is_some()
            {
                return Err(DictError::DuplicateName {
                    line: 0,
                    name: entry.name,
                });
            }
        }
        for (a, b, w) in overlaps {
            dict.insert_overlap(&a, &b, w)?;
        }
        Ok(dict)
    }

    fn insert_overlap(&mut self, a: &str, b: &str, w: f64) -> Result<(), DictError> {
        let ka = self
            .kind_of(a)
            .ok_or_else(|| DictError::UnknownName(a.to_string()))?;
        let kb = self
            .kind_of(b)
            .ok_or_else(|| DictError::UnknownName(b.to_string()))?;
        if !(0.0..=1.0).contains(&w) {
            return Err(DictError::BadWeight { weight: w });
        }
        if ka != kb {
            return Err(DictError::KindMismatch {
                expected: ka,
                found: kb,
            });
        }
        if a == b {
            // The diagonal is fixed at 1.
            if w == 1.0 {
                return Ok(());
            }
            return Err(DictError::BadWeight { weight: w });
        }
        if self.overlaps.get(a).is_some_and(|m| m.contains_key(b)) {
            return Err(DictError::DuplicateOverlap {
                line: 0,
                a: a.to_string(),
                b: b.to_string(),
            });
        }
        self.overlaps
            .entry(a.to_string())
            .or_default()
            .insert(b.to_string(), w);
        self.overlaps
            .entry(b.to_string())
            .or_default()
            .insert(a.to_string(), w);
        Ok(())
    }

    pub fn kind_of(&self, name: &str) -> Option<Kind> {
        self.entries.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in name order.
    pub fn entries(&self) -> impl Iterator<Item = DictEntry> + '_ {
        self.entries.iter().map(|(name, kind)| DictEntry {
            name: name.clone(),
            kind: *kind,
        })
    }

    /// Each unordered overlap pair once, as `(a, b, w)` with `a < b`.
    pub fn overlap_pairs(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        self.overlaps.iter().flat_map(|(a, row)| {
            row.iter()
                .filter(move |(b, _)| a.as_str() < b.as_str())
                .map(move |(b, w)| (a.as_str(), b.as_str(), *w))
        })
    }

    /// Pairwise overlap; 1 on the diagonal, 0 when not declared.
    pub fn overlap(&self, a: &str, b: &str) -> f64 {
        if a == b {
            return 1.0;
        }
        self.overlaps
            .get(a)
            .and_then(|row| row.get(b))
            .copied()
            .unwrap_or(0.0)
    }

    /// Returns `o` with `name` set to `max(previous, w)`.
    pub fn overlay_add(&self, o: &Overlay, name: &str, w: f64) -> Result<Overlay, DictError> {
        let mut out = o.clone();
        self.overlay_insert(&mut out, name, w)?;
        Ok(out)
    }

    pub fn overlay_insert(&self, o: &mut Overlay, name: &str, w: f64) -> Result<(), DictError> {
        let kind = self
            .kind_of(name)
            .ok_or_else(|| DictError::UnknownName(name.to_string()))?;
        if kind != o.kind {
            return Err(DictError::KindMismatch {
                expected: o.kind,
                found: kind,
            });
        }
        if !(w > 0.0 && w <= 1.0) {
            return Err(DictError::BadWeight { weight: w });
        }
        let slot = o.weights.entry(name.to_string()).or_insert(w);
        if w > *slot {
            *slot = w;
        }
        Ok(())
    }

    /// Builds an overlay with every name at weight 1.
    pub fn overlay_of<'a>(
        &self,
        kind: Kind,
        names: impl IntoIterator<Item = &'a str>,
    ) -> Result<Overlay, DictError> {
        let mut o = Overlay::empty(kind);
        for name in names {
            self.overlay_insert(&mut o, name, 1.0)?;
        }
        Ok(o)
    }

    /// Checks that every member exists with the overlay's kind and a weight in (0, 1].
    pub fn validate(&self, o: &Overlay) -> Result<(), DictError> {
        for (name, w) in &o.weights {
            let kind = self
                .kind_of(name)
                .ok_or_else(|| DictError::UnknownName(name.clone()))?;
            if kind != o.kind {
                return Err(DictError::KindMismatch {
                    expected: o.kind,
                    found: kind,
                });
            }
            if !(*w > 0.0 && *w <= 1.0) {
                return Err(DictError::BadWeight { weight: *w });
            }
        }
        Ok(())
    }

    fn cross(&self, a: &Overlay, b: &Overlay) -> f64 {
        let mut total = 0.0;
        for (c, wc) in &a.weights {
            for (d, wd) in &b.weights {
                let ov = self.overlap(c, d);
                if ov != 0.0 {
                    total += wc * wd * ov;
                }
            }
        }
        total
    }

    /// Kernel-cosine similarity in `[0, 1]`; 0 when either side is empty.
    pub fn similarity(&self, a: &Overlay, b: &Overlay) -> Result<f64, DictError> {
        if a.kind != b.kind {
            return Err(DictError::KindMismatch {
                expected: a.kind,
                found: b.kind,
            });
        }
        Ok(self.similarity_unchecked(a, b))
    }

    pub(crate) fn similarity_unchecked(&self, a: &Overlay, b: &Overlay) -> f64 {
        if a.is_empty() || b.is_empty() {
            return 0.0;
        }
        // Evaluate in a canonical argument order so sim(a,b) == sim(b,a) bit for bit.
        let (first, second) = if a.canonical_cmp(b) == Ordering::Greater {
            (b, a)
        } else {
            (a, b)
        };
        let cross = self.cross(first, second);
        let norm = self.cross(first, first) * self.cross(second, second);
        if norm <= 0.0 || cross <= 0.0 {
            return 0.0;
        }
        (cross / norm.sqrt()).clamp(0.0, 1.0)
    }
}

/// Weighted set of dictionary symbols of a single kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overlay {
    pub kind: Kind,
    weights: BTreeMap<String, f64>,
}

impl Overlay {
    pub fn empty(kind: Kind) -> Self {
        Overlay {
            kind,
            weights: BTreeMap::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, name: &str) -> f64 {
        self.weights.get(name).copied().unwrap_or(0.0)
    }

    /// Members in ascending name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.weights.iter().map(|(n, w)| (n.as_str(), *w))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.weights.keys().map(String::as_str)
    }

    pub fn weights(&self) -> &BTreeMap<String, f64> {
        &self.weights
    }

    /// Members with weight at least `floor`.
    pub fn filtered(&self, floor: f64) -> Overlay {
        Overlay {
            kind: self.kind,
            weights: self
                .weights
                .iter()
                .filter(|(_, w)| **w >= floor)
                .map(|(n, w)| (n.clone(), *w))
                .collect(),
        }
    }

    pub(crate) fn from_weights_unchecked(kind: Kind, weights: BTreeMap<String, f64>) -> Self {
        Overlay { kind, weights }
    }

    fn canonical_cmp(&self, other: &Overlay) -> Ordering {
        let lhs = self.weights.iter().map(|(n, w)| (n, w.to_bits()));
        let rhs = other.weights.iter().map(|(n, w)| (n, w.to_bits()));
        lhs.cmp(rhs)
    }
}

impl fmt::Display for Overlay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (name, w)) in self.weights.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{name}:{w}")?;
        }
        f.write_str("}")
    }
}
