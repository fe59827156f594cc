//! Instances, verb instances, the focus and the episodic memory.
//!
//! Every mutation goes through `&mut Engine`, so the engine is a single
//! serialized command stream. Entities share one id space: instance and
//! verb-instance ids are drawn from the same monotone counter.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::EngineConfig;
use crate::dictionary::{DictError, Dictionary, Kind, Overlay};
use crate::pidgin::{FocusView, Referent, RoleRef, ViTemplate};
use crate::shadow::{Shadow, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u64);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Narrated,
    Confabulated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: EntityId,
    pub overlay: Overlay,
    pub created_tick: u64,
    pub focus_salience: f64,
    pub demoted: bool,
    pub last_referenced_tick: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerbInstance {
    pub id: EntityId,
    pub verbs: Overlay,
    pub subject: EntityId,
    pub object: Option<EntityId>,
    pub tick: u64,
    pub story_id: u64,
    pub provenance: Provenance,
    pub focus_salience: f64,
    pub demoted: bool,
    /// Index within its story.
    pub(crate) position: usize,
}

impl VerbInstance {
    pub fn role(&self, role: crate::pidgin::Role) -> Option<EntityId> {
        match role {
            crate::pidgin::Role::Subject => Some(self.subject),
            crate::pidgin::Role::Object => self.object,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLink {
    pub entity: EntityId,
    pub record_hash: String,
    pub chain_hash: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("kind mismatch: expected {expected} overlay, found {found}")]
    KindMismatch { expected: Kind, found: Kind },
    #[error("invalid overlay: {0}")]
    InvalidOverlay(#[from] DictError),
    #[error("instance {0} is not in focus")]
    UnknownInstance(EntityId),
    #[error("entity {0} has no shadow")]
    UnknownOwner(EntityId),
    #[error("candidate was built before the latest mutation")]
    StaleCandidate,
    #[error("gap position {position} is outside the focus story of length {len}")]
    BadPosition { position: usize, len: usize },
    #[error("{0}")]
    InvalidArgument(String),
}

pub(crate) const GENESIS_HASH: &str =
    "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Clone)]
pub struct Engine {
    pub(crate) dict: Arc<Dictionary>,
    pub(crate) config: EngineConfig,
    pub(crate) next_id: u64,
    pub(crate) tick: u64,
    pub(crate) story_id: u64,
    pub(crate) epoch: u64,
    pub(crate) instances: BTreeMap<EntityId, Instance>,
    pub(crate) vis: BTreeMap<EntityId, VerbInstance>,
    /// Creation order of every entity.
    pub(crate) log: Vec<EntityId>,
    /// VI ids of each story in tick order.
    pub(crate) stories: Vec<Vec<EntityId>>,
    /// Accumulated salience of entities still in focus.
    pub(crate) residency: BTreeMap<EntityId, f64>,
    /// Frozen at demotion.
    pub(crate) memory_salience: BTreeMap<EntityId, f64>,
    pub(crate) chain: Vec<ChainLink>,
    pub(crate) shadows: BTreeMap<EntityId, Shadow>,
    pub(crate) trace: Option<Vec<TraceEvent>>,
}

impl Engine {
    pub fn new(dict: Arc<Dictionary>, config: EngineConfig) -> Self {
        debug_assert!(config.validate().is_ok());
        Engine {
            dict,
            config,
            next_id: 1,
            tick: 0,
            story_id: 0,
            epoch: 0,
            instances: BTreeMap::new(),
            vis: BTreeMap::new(),
            log: Vec::new(),
            stories: vec![Vec::new()],
            residency: BTreeMap::new(),
            memory_salience: BTreeMap::new(),
            chain: Vec::new(),
            shadows: BTreeMap::new(),
            trace: None,
        }
    }

    pub fn dictionary(&self) -> &Arc<Dictionary> {
        &self.dict
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Tick of the most recent insertion; 0 on a fresh engine.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn story_id(&self) -> u64 {
        self.story_id
    }

    /// Bumped on every mutation; candidates remember the epoch they were built in.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn instance(&self, id: EntityId) -> Option<&Instance> {
        self.instances.get(&id)
    }

    pub fn vi(&self, id: EntityId) -> Option<&VerbInstance> {
        self.vis.get(&id)
    }

    pub fn instances(&self) -> impl Iterator<Item = &Instance> + '_ {
        self.instances.values()
    }

    /// All verb instances in tick order.
    pub fn vis(&self) -> impl Iterator<Item = &VerbInstance> + '_ {
        self.vis.values()
    }

    pub fn log(&self) -> &[EntityId] {
        &self.log
    }

    pub fn focus_vis(&self) -> Vec<&VerbInstance> {
        self.vis.values().filter(|v| !v.demoted).collect()
    }

    pub fn focus_instances(&self) -> Vec<&Instance> {
        self.instances.values().filter(|i| !i.demoted).collect()
    }

    pub fn in_focus(&self, id: EntityId) -> bool {
        self.instances
            .get(&id)
            .map(|i| !i.demoted)
            .or_else(|| self.vis.get(&id).map(|v| !v.demoted))
            .unwrap_or(false)
    }

    pub fn is_demoted(&self, id: EntityId) -> bool {
        self.instances
            .get(&id)
            .map(|i| i.demoted)
            .or_else(|| self.vis.get(&id).map(|v| v.demoted))
            .unwrap_or(false)
    }

    pub fn memory_salience(&self, id: EntityId) -> Option<f64> {
        self.memory_salience.get(&id).copied()
    }

    pub fn chain(&self) -> &[ChainLink] {
        &self.chain
    }

    /// The `d`-th successor of `id` within its story.
    pub fn successor(&self, id: EntityId, d: usize) -> Option<EntityId> {
        let v = self.vis.get(&id)?;
        self.stories
            .get(v.story_id as usize)?
            .get(v.position + d)
            .copied()
    }

    /// The `d`-th predecessor of `id` within its story.
    pub fn predecessor(&self, id: EntityId, d: usize) -> Option<EntityId> {
        let v = self.vis.get(&id)?;
        let pos = v.position.checked_sub(d)?;
        self.stories.get(v.story_id as usize)?.get(pos).copied()
    }

    /// Starts collecting spike/diffusion trace events.
    pub fn set_tracing(&mut self, on: bool) {
        self.trace = if on { Some(Vec::new()) } else { None };
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    fn allocate_id(&mut self) -> EntityId {
        let id = EntityId(self.next_id);
        self.next_id += 1;
        id
    }

    fn check_overlay(&self, overlay: &Overlay, kind: Kind) -> Result<(), EngineError> {
        if overlay.kind != kind {
            return Err(EngineError::KindMismatch {
                expected: kind,
                found: overlay.kind,
            });
        }
        self.dict.validate(overlay)?;
        Ok(())
    }

    /// Creates a standalone focus instance.
    pub fn create_instance(&mut self, overlay: Overlay) -> Result<EntityId, EngineError> {
        self.check_overlay(&overlay, Kind::Concept)?;
        Ok(self.create_instance_unchecked(overlay))
    }

    fn create_instance_unchecked(&mut self, overlay: Overlay) -> EntityId {
        let id = self.allocate_id();
        self.instances.insert(
            id,
            Instance {
                id,
                overlay,
                created_tick: self.tick,
                focus_salience: 1.0,
                demoted: false,
                last_referenced_tick: self.tick,
            },
        );
        self.log.push(id);
        self.residency.insert(id, 1.0);
        self.shadows.insert(id, Shadow::default());
        self.epoch += 1;
        id
    }

    fn check_role(&self, role: &RoleRef) -> Result<(), EngineError> {
        match role {
            RoleRef::Existing(id) => match self.instances.get(id) {
                Some(i) if !i.demoted => Ok(()),
                _ => Err(EngineError::UnknownInstance(*id)),
            },
            RoleRef::New(overlay) => self.check_overlay(overlay, Kind::Concept),
        }
    }

    fn materialize(&mut self, role: RoleRef) -> EntityId {
        match role {
            RoleRef::Existing(id) => id,
            RoleRef::New(overlay) => self.create_instance_unchecked(overlay),
        }
    }

    /// Inserts a narrated verb instance.
    pub fn insert_vi(&mut self, template: ViTemplate) -> Result<EntityId, EngineError> {
        self.insert_vi_with(template, Provenance::Narrated)
    }

    /// Runs the full insertion pipeline: role creation, focus decay,
    /// demotion, spike activity, one diffusion pass.
    pub fn insert_vi_with(
        &mut self,
        template: ViTemplate,
        provenance: Provenance,
    ) -> Result<EntityId, EngineError> {
        self.check_overlay(&template.verbs, Kind::Verb)?;
        if template.verbs.is_empty() {
            return Err(EngineError::InvalidArgument("empty verb overlay".into()));
        }
        self.check_role(&template.subject)?;
        if let Some(object) = &template.object {
            self.check_role(object)?;
        }

        let subject = self.materialize(template.subject);
        let object = template.object.map(|o| self.materialize(o));

        self.tick += 1;
        let id = self.allocate_id();
        let story = self.stories.last_mut().expect("current story");
        let position = story.len();
        story.push(id);
        self.vis.insert(
            id,
            VerbInstance {
                id,
                verbs: template.verbs,
                subject,
                object,
                tick: self.tick,
                story_id: self.story_id,
                provenance,
                focus_salience: 1.0,
                demoted: false,
                position,
            },
        );
        self.log.push(id);
        self.residency.insert(id, 1.0);
        self.shadows.insert(id, Shadow::default());

        let mut refreshed = BTreeSet::new();
        refreshed.insert(subject);
        refreshed.extend(object);
        for rid in &refreshed {
            let inst = self.instances.get_mut(rid).expect("role instance");
            inst.focus_salience = 1.0;
            inst.last_referenced_tick = self.tick;
        }

        self.decay_focus(id, &refreshed);
        self.demote_below_threshold();
        for (eid, acc) in self.residency.iter_mut() {
            if *eid == id {
                continue;
            }
            let salience = match self.instances.get(eid) {
                Some(i) => i.focus_salience,
                None => self.vis[eid].focus_salience,
            };
            *acc += salience;
        }

        self.spike(id);
        self.diffuse();
        self.epoch += 1;
        Ok(id)
    }

    fn decay_focus(&mut self, new_vi: EntityId, refreshed: &BTreeSet<EntityId>) {
        let gamma = self.config.focus_decay;
        for v in self.vis.values_mut() {
            if !v.demoted && v.id != new_vi {
                v.focus_salience *= gamma;
            }
        }
        for inst in self.instances.values_mut() {
            if !inst.demoted && !refreshed.contains(&inst.id) {
                inst.focus_salience *= gamma;
            }
        }
    }

    fn demote_below_threshold(&mut self) {
        let floor = self.config.focus_demote;
        let vis: Vec<EntityId> = self
            .vis
            .values()
            .filter(|v| !v.demoted && v.focus_salience < floor)
            .map(|v| v.id)
            .collect();
        for id in vis {
            self.demote(id);
        }
        let referenced: BTreeSet<EntityId> = self
            .vis
            .values()
            .filter(|v| !v.demoted)
            .flat_map(|v| std::iter::once(v.subject).chain(v.object))
            .collect();
        let instances: Vec<EntityId> = self
            .instances
            .values()
            .filter(|i| !i.demoted && i.focus_salience < floor && !referenced.contains(&i.id))
            .map(|i| i.id)
            .collect();
        for id in instances {
            self.demote(id);
        }
    }

    fn demote(&mut self, id: EntityId) {
        if let Some(v) = self.vis.get_mut(&id) {
            v.demoted = true;
        } else if let Some(i) = self.instances.get_mut(&id) {
            i.demoted = true;
        } else {
            return;
        }
        let acc = self.residency.remove(&id).unwrap_or(0.0);
        self.memory_salience.insert(id, acc);
        self.shadows.remove(&id);
        let record_hash = self.record_hash(id);
        let prev = self
            .chain
            .last()
            .map_or(GENESIS_HASH, |l| l.chain_hash.as_str());
        let chain_hash = crate::persist::chain_step(prev, &record_hash);
        self.chain.push(ChainLink {
            entity: id,
            record_hash,
            chain_hash,
        });
    }

    /// Demotes every focus entity and opens a new story.
    pub fn story_break(&mut self) {
        let vis: Vec<EntityId> = self.focus_vis().iter().map(|v| v.id).collect();
        for id in vis {
            self.demote(id);
        }
        let instances: Vec<EntityId> = self.focus_instances().iter().map(|i| i.id).collect();
        for id in instances {
            self.demote(id);
        }
        self.story_id += 1;
        self.stories.push(Vec::new());
        self.epoch += 1;
    }

    /// Recomputes the memory hash chain from the current records.
    pub fn verify_chain(&self) -> bool {
        let mut prev = GENESIS_HASH.to_string();
        for link in &self.chain {
            if !self.is_demoted(link.entity) {
                return false;
            }
            let record_hash = self.record_hash(link.entity);
            if record_hash != link.record_hash {
                return false;
            }
            let chain_hash = crate::persist::chain_step(&prev, &record_hash);
            if chain_hash != link.chain_hash {
                return false;
            }
            prev = chain_hash;
        }
        true
    }
}

impl FocusView for Engine {
    fn referents(&self) -> Vec<Referent<'_>> {
        self.instances
            .values()
            .filter(|i| !i.demoted)
            .map(|i| Referent {
                id: i.id,
                overlay: &i.overlay,
                last_referenced_tick: i.last_referenced_tick,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dict() -> Arc<Dictionary> {
        Arc::new(
            Dictionary::load("concept man\nconcept dog\nverb waves\nverb sits\nverb hits\n")
                .unwrap(),
        )
    }

    fn engine() -> Engine {
        Engine::new(dict(), EngineConfig::default())
    }

    fn concept(e: &Engine, name: &str) -> Overlay {
        e.dictionary().overlay_of(Kind::Concept, [name]).unwrap()
    }

    fn template(e: &Engine, verb: &str, subject: RoleRef) -> ViTemplate {
        ViTemplate {
            verbs: e.dictionary().overlay_of(Kind::Verb, [verb]).unwrap(),
            subject,
            object: None,
        }
    }

    #[test]
    fn create_instance_ids() {
        let mut e = engine();
        let a = e.create_instance(concept(&e, "man")).unwrap();
        let b = e.create_instance(concept(&e, "dog")).unwrap();
        assert_eq!(a, EntityId(1));
        assert_eq!(b, EntityId(2));
        assert_eq!(e.instance(a).unwrap().focus_salience, 1.0);
        assert!(e.in_focus(a));
        assert_eq!(e.log(), &[a, b]);
    }

    #[test]
    fn create_instance_rejects_verb_overlay() {
        let mut e = engine();
        let verbs = e.dictionary().overlay_of(Kind::Verb, ["waves"]).unwrap();
        assert!(matches!(
            e.create_instance(verbs),
            Err(EngineError::KindMismatch { .. })
        ));
    }

    #[test]
    fn first_insertion() {
        let mut e = engine();
        let t = template(&e, "waves", RoleRef::New(concept(&e, "man")));
        let v = e.insert_vi(t).unwrap();
        assert_eq!(e.tick(), 1);
        let focus: Vec<_> = e.focus_vis().iter().map(|v| v.id).collect();
        assert_eq!(focus, vec![v]);
        assert_eq!(e.vi(v).unwrap().subject, EntityId(1));
    }

    #[test]
    fn unknown_role_instance() {
        let mut e = engine();
        let t = template(&e, "waves", RoleRef::Existing(EntityId(999)));
        assert_eq!(
            e.insert_vi(t),
            Err(EngineError::UnknownInstance(EntityId(999)))
        );
        assert_eq!(e.tick(), 0);
        assert!(e.log().is_empty());
    }

    #[test]
    fn demotion_after_twenty_two_insertions() {
        // Independent recurrence: salience after k untouched insertions is 0.9^k.
        let mut s = 1.0f64;
        let mut first_below = None;
        for k in 1..=40 {
            s *= 0.9;
            if s < 0.1 && first_below.is_none() {
                first_below = Some(k);
            }
        }
        assert_eq!(first_below, Some(22));

        let mut e = engine();
        let first = e
            .insert_vi(template(&e, "waves", RoleRef::New(concept(&e, "man"))))
            .unwrap();
        for k in 1..=22 {
            e.insert_vi(template(&e, "sits", RoleRef::New(concept(&e, "dog"))))
                .unwrap();
            let v = e.vi(first).unwrap();
            if k < 22 {
                assert!(!v.demoted, "demoted early at {k}");
            } else {
                assert!(v.demoted);
                assert!((v.focus_salience - 0.9f64.powi(22)).abs() < 1e-12);
            }
        }
        // The man is no longer referenced and decayed just as long.
        assert!(e.instance(EntityId(1)).unwrap().demoted);
        let expected: f64 = (0..22).map(|k| 0.9f64.powi(k)).sum();
        assert!((e.memory_salience(first).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn referenced_instance_stays_in_focus() {
        let mut e = engine();
        let man = e.create_instance(concept(&e, "man")).unwrap();
        for _ in 0..30 {
            e.insert_vi(template(&e, "waves", RoleRef::Existing(man)))
                .unwrap();
        }
        assert!(e.in_focus(man));
        assert_eq!(e.instance(man).unwrap().last_referenced_tick, 30);
        assert_eq!(e.focus_vis().len(), 22);
    }

    #[test]
    fn story_break_demotes_everything() {
        let mut e = engine();
        e.story_break();
        assert_eq!(e.story_id(), 1);
        assert!(e.chain().is_empty());

        let man = e.create_instance(concept(&e, "man")).unwrap();
        let mut ids = Vec::new();
        for verb in ["waves", "sits", "hits"] {
            ids.push(
                e.insert_vi(template(&e, verb, RoleRef::Existing(man)))
                    .unwrap(),
            );
        }
        let log_before = e.log().to_vec();
        e.story_break();
        assert_eq!(e.story_id(), 2);
        assert!(e.focus_vis().is_empty());
        assert!(e.focus_instances().is_empty());
        assert_eq!(e.log(), log_before.as_slice());
        let demoted: Vec<_> = e.chain().iter().map(|l| l.entity).collect();
        assert_eq!(demoted, vec![ids[0], ids[1], ids[2], man]);
        assert_eq!(e.successor(ids[0], 1), Some(ids[1]));
        assert_eq!(e.successor(ids[2], 1), None);
        assert_eq!(e.predecessor(ids[0], 1), None);

        let v = e
            .insert_vi(template(&e, "waves", RoleRef::New(concept(&e, "man"))))
            .unwrap();
        assert_eq!(e.successor(ids[2], 1), None);
        assert_eq!(e.predecessor(v, 1), None);
        assert!(e.verify_chain());
    }

    #[test]
    fn ticks_are_gapless() {
        let mut e = engine();
        for i in 0..10 {
            if i % 3 == 0 {
                e.story_break();
            }
            e.insert_vi(template(&e, "waves", RoleRef::New(concept(&e, "man"))))
                .unwrap();
        }
        let ticks: Vec<u64> = e.vis().map(|v| v.tick).collect();
        assert_eq!(ticks, (1..=10).collect::<Vec<_>>());
    }
}
