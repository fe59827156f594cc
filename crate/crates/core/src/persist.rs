//! Canonical state serialization, state hashing, snapshots and the memory
//! hash chain.
//!
//! The canonical form is compact JSON with object keys in ascending byte
//! order, entities as arrays in id order, and floats in shortest
//! round-trip notation. The snapshot file wraps the canonical state in a
//! versioned envelope; `docs/snapshot-format.md` documents the schema.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::EngineConfig;
use crate::dictionary::{DictEntry, Dictionary, Kind, Overlay};
use crate::engine::{ChainLink, Engine, EntityId, Instance, Provenance, VerbInstance};
use crate::shadow::Shadow;

pub const SNAPSHOT_FORMAT: &str = "shadowtale-snapshot";
pub const SNAPSHOT_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot format version {found} is not supported (expected {SNAPSHOT_VERSION})")]
    FormatVersionMismatch { found: u64 },
    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
}

fn corrupt(msg: impl Into<String>) -> SnapshotError {
    SnapshotError::Corrupt(msg.into())
}

/// Writes `value` as compact JSON with sorted object keys.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                write_canonical(&map[key], out);
            }
            out.push('}');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn chain_step(prev: &str, record_hash: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prev.as_bytes());
    hasher.update(record_hash.as_bytes());
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct DictionaryDoc {
    entries: Vec<DictEntry>,
    overlaps: Vec<(String, String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ClockDoc {
    tick: u64,
    next_id: u64,
    story_id: u64,
    epoch: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct InstanceDoc {
    id: EntityId,
    overlay: BTreeMap<String, f64>,
    created_tick: u64,
    focus_salience: f64,
    demoted: bool,
    last_referenced_tick: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct VerbInstanceDoc {
    id: EntityId,
    verbs: BTreeMap<String, f64>,
    subject: EntityId,
    object: Option<EntityId>,
    tick: u64,
    story_id: u64,
    provenance: Provenance,
    focus_salience: f64,
    demoted: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct SaliencesDoc {
    residency: Vec<(EntityId, f64)>,
    memory: Vec<(EntityId, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ChainLinkDoc {
    entity: EntityId,
    record_hash: String,
    chain_hash: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ShadowDoc {
    owner: EntityId,
    weights: Vec<(EntityId, f64)>,
}

/// The complete persisted state. Nothing else is stored: no rules, no
/// schemas, no cached candidates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct StateDoc {
    config: EngineConfig,
    dictionary: DictionaryDoc,
    clock: ClockDoc,
    instances: Vec<InstanceDoc>,
    verb_instances: Vec<VerbInstanceDoc>,
    /// VI ids of each story in tick order; successor/predecessor links.
    links: Vec<Vec<EntityId>>,
    saliences: SaliencesDoc,
    memory_chain: Vec<ChainLinkDoc>,
    shadows: Vec<ShadowDoc>,
}

/// Top-level keys of the persisted state.
pub const STATE_KEYS: &[&str] = &[
    "clock",
    "config",
    "dictionary",
    "instances",
    "links",
    "memoryChain",
    "saliences",
    "shadows",
    "verbInstances",
];

fn instance_doc(i: &Instance) -> InstanceDoc {
    InstanceDoc {
        id: i.id,
        overlay: i.overlay.weights().clone(),
        created_tick: i.created_tick,
        focus_salience: i.focus_salience,
        demoted: i.demoted,
        last_referenced_tick: i.last_referenced_tick,
    }
}

fn vi_doc(v: &VerbInstance) -> VerbInstanceDoc {
    VerbInstanceDoc {
        id: v.id,
        verbs: v.verbs.weights().clone(),
        subject: v.subject,
        object: v.object,
        tick: v.tick,
        story_id: v.story_id,
        provenance: v.provenance,
        focus_salience: v.focus_salience,
        demoted: v.demoted,
    }
}

fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value)
        .expect("state documents contain only finite numbers and string keys")
}

impl Engine {
    fn state_doc(&self) -> StateDoc {
        StateDoc {
            config: self.config.clone(),
            dictionary: DictionaryDoc {
                entries: self.dict.entries().collect(),
                overlaps: self
                    .dict
                    .overlap_pairs()
                    .map(|(a, b, w)| (a.to_string(), b.to_string(), w))
                    .collect(),
            },
            clock: ClockDoc {
                tick: self.tick,
                next_id: self.next_id,
                story_id: self.story_id,
                epoch: self.epoch,
            },
            instances: self.instances.values().map(instance_doc).collect(),
            verb_instances: self.vis.values().map(vi_doc).collect(),
            links: self.stories.clone(),
            saliences: SaliencesDoc {
                residency: self.residency.iter().map(|(k, v)| (*k, *v)).collect(),
                memory: self.memory_salience.iter().map(|(k, v)| (*k, *v)).collect(),
            },
            memory_chain: self
                .chain
                .iter()
                .map(|l| ChainLinkDoc {
                    entity: l.entity,
                    record_hash: l.record_hash.clone(),
                    chain_hash: l.chain_hash.clone(),
                })
                .collect(),
            shadows: self
                .shadows
                .iter()
                .map(|(owner, s)| ShadowDoc {
                    owner: *owner,
                    weights: s.iter().collect(),
                })
                .collect(),
        }
    }

    /// Canonical serialization of the whole engine state.
    pub fn canonical_state(&self) -> String {
        canonical_json(&to_value(&self.state_doc()))
    }

    /// SHA-256 of the canonical state, as 64 lowercase hex digits.
    pub fn state_hash(&self) -> String {
        sha256_hex(self.canonical_state().as_bytes())
    }

    /// Canonical JSON record of a memory entity, as hashed into the chain.
    pub fn memory_record(&self, id: EntityId) -> Option<Value> {
        let memory_salience = self.memory_salience.get(&id).copied();
        if let Some(v) = self.vis.get(&id) {
            let mut value = to_value(&vi_doc(v));
            value["kind"] = json!("vi");
            value["memorySalience"] = json!(memory_salience);
            Some(value)
        } else {
            self.instances.get(&id).map(|i| {
                let mut value = to_value(&instance_doc(i));
                value["kind"] = json!("instance");
                value["memorySalience"] = json!(memory_salience);
                value
            })
        }
    }

    pub(crate) fn record_hash(&self, id: EntityId) -> String {
        let record = self.memory_record(id).unwrap_or(Value::Null);
        sha256_hex(canonical_json(&record).as_bytes())
    }

    /// The versioned snapshot document.
    pub fn snapshot_string(&self) -> String {
        let doc = json!({
            "format": SNAPSHOT_FORMAT,
            "formatVersion": SNAPSHOT_VERSION,
            "state": to_value(&self.state_doc()),
        });
        canonical_json(&doc)
    }

    pub fn save_snapshot(&self, path: impl AsRef<Path>) -> Result<(), SnapshotError> {
        fs::write(path, self.snapshot_string() + "\n")?;
        Ok(())
    }

    pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Engine, SnapshotError> {
        let text = fs::read_to_string(path)?;
        Engine::from_snapshot_str(&text)
    }

    pub fn from_snapshot_str(text: &str) -> Result<Engine, SnapshotError> {
        let doc: Value = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
        let version = doc
            .get("formatVersion")
            .ok_or_else(|| corrupt("missing formatVersion"))?
            .as_u64()
            .ok_or_else(|| corrupt("formatVersion is not an integer"))?;
        if version != SNAPSHOT_VERSION {
            return Err(SnapshotError::FormatVersionMismatch { found: version });
        }
        if doc.get("format").and_then(Value::as_str) != Some(SNAPSHOT_FORMAT) {
            return Err(corrupt("not a shadowtale snapshot"));
        }
        let state = doc.get("state").ok_or_else(|| corrupt("missing state"))?;
        let state: StateDoc =
            serde_json::from_value(state.clone()).map_err(|e| corrupt(e.to_string()))?;
        rebuild(state)
    }
}

fn rebuild(state: StateDoc) -> Result<Engine, SnapshotError> {
    state
        .config
        .validate()
        .map_err(|e| corrupt(format!("config: {e}")))?;
    let dict = Dictionary::from_parts(state.dictionary.entries, state.dictionary.overlaps)
        .map_err(|e| corrupt(format!("dictionary: {e}")))?;

    let mut engine = Engine::new(Arc::new(dict), state.config);
    engine.tick = state.clock.tick;
    engine.next_id = state.clock.next_id;
    engine.story_id = state.clock.story_id;
    engine.epoch = state.clock.epoch;

    let overlay = |kind: Kind, weights: BTreeMap<String, f64>| -> Result<Overlay, SnapshotError> {
        let o = Overlay::from_weights_unchecked(kind, weights);
        engine
            .dict
            .validate(&o)
            .map_err(|e| corrupt(format!("overlay: {e}")))?;
        Ok(o)
    };

    let mut instances = BTreeMap::new();
    for doc in state.instances {
        let inst = Instance {
            id: doc.id,
            overlay: overlay(Kind::Concept, doc.overlay)?,
            created_tick: doc.created_tick,
            focus_salience: doc.focus_salience,
            demoted: doc.demoted,
            last_referenced_tick: doc.last_referenced_tick,
        };
        if instances.insert(doc.id, inst).is_some() {
            return Err(corrupt(format!("duplicate instance {}", doc.id)));
        }
    }

    if state.links.len() as u64 != state.clock.story_id + 1 {
        return Err(corrupt("story links do not match the story counter"));
    }
    let mut positions = BTreeMap::new();
    for (story, ids) in state.links.iter().enumerate() {
        for (pos, id) in ids.iter().enumerate() {
            if positions.insert(*id, (story as u64, pos)).is_some() {
                return Err(corrupt(format!("VI {id} linked twice")));
            }
        }
    }

    let mut vis = BTreeMap::new();
    let mut expected_tick = 0;
    for doc in state.verb_instances {
        expected_tick += 1;
        if doc.tick != expected_tick {
            return Err(corrupt(format!(
                "VI {} has tick {}, expected {expected_tick}",
                doc.id, doc.tick
            )));
        }
        for role in std::iter::once(doc.subject).chain(doc.object) {
            match instances.get(&role) {
                Some(i) if i.created_tick <= doc.tick => {}
                _ => return Err(corrupt(format!("VI {} has invalid role {role}", doc.id))),
            }
        }
        let Some(&(story, position)) = positions.get(&doc.id) else {
            return Err(corrupt(format!("VI {} missing from links", doc.id)));
        };
        if story != doc.story_id {
            return Err(corrupt(format!(
                "VI {} linked into the wrong story",
                doc.id
            )));
        }
        let vi = VerbInstance {
            id: doc.id,
            verbs: overlay(Kind::Verb, doc.verbs)?,
            subject: doc.subject,
            object: doc.object,
            tick: doc.tick,
            story_id: doc.story_id,
            provenance: doc.provenance,
            focus_salience: doc.focus_salience,
            demoted: doc.demoted,
            position,
        };
        if instances.contains_key(&doc.id) || vis.insert(doc.id, vi).is_some() {
            return Err(corrupt(format!("duplicate entity {}", doc.id)));
        }
    }
    if expected_tick != state.clock.tick || positions.len() != vis.len() {
        return Err(corrupt("clock and verb instances disagree"));
    }
    for ids in &state.links {
        if ids.windows(2).any(|w| vis[&w[0]].tick >= vis[&w[1]].tick) {
            return Err(corrupt("story links out of tick order"));
        }
    }

    let ids: BTreeSet<EntityId> = instances.keys().chain(vis.keys()).copied().collect();
    if ids.last().is_some_and(|id| id.0 >= state.clock.next_id) || ids.contains(&EntityId(0)) {
        return Err(corrupt("entity id outside the allocated range"));
    }
    let focus: BTreeSet<EntityId> = instances
        .values()
        .filter(|i| !i.demoted)
        .map(|i| i.id)
        .chain(vis.values().filter(|v| !v.demoted).map(|v| v.id))
        .collect();
    let memory: BTreeSet<EntityId> = ids.difference(&focus).copied().collect();

    let residency: BTreeMap<EntityId, f64> = state.saliences.residency.into_iter().collect();
    let memory_salience: BTreeMap<EntityId, f64> = state.saliences.memory.into_iter().collect();
    if residency.keys().copied().collect::<BTreeSet<_>>() != focus
        || memory_salience.keys().copied().collect::<BTreeSet<_>>() != memory
    {
        return Err(corrupt("salience maps do not match focus membership"));
    }

    let mut shadows = BTreeMap::new();
    for doc in state.shadows {
        if !focus.contains(&doc.owner) {
            return Err(corrupt(format!(
                "shadow owner {} is not in focus",
                doc.owner
            )));
        }
        let owner_is_vi = vis.contains_key(&doc.owner);
        for (m, w) in &doc.weights {
            if !memory.contains(m) || vis.contains_key(m) != owner_is_vi || w.is_nan() || *w < 0.0 {
                return Err(corrupt(format!(
                    "shadow of {} has invalid entry {m}",
                    doc.owner
                )));
            }
        }
        shadows.insert(doc.owner, Shadow::from_entries(doc.weights));
    }
    if shadows.keys().copied().collect::<BTreeSet<_>>() != focus {
        return Err(corrupt("shadow set does not match focus"));
    }

    engine.log = ids.into_iter().collect();
    engine.instances = instances;
    engine.vis = vis;
    engine.stories = state.links;
    engine.residency = residency;
    engine.memory_salience = memory_salience;
    engine.shadows = shadows;
    engine.chain = state
        .memory_chain
        .into_iter()
        .map(|l| ChainLink {
            entity: l.entity,
            record_hash: l.record_hash,
            chain_hash: l.chain_hash,
        })
        .collect();
    if engine.chain.len() != memory.len() || !engine.verify_chain() {
        return Err(corrupt("memory hash chain does not verify"));
    }
    Ok(engine)
}
