//! Headless shadows: transient clusters of memory VIs that support a VI the
//! focus does not contain yet. They back continuation, cloze inference,
//! confabulation and recall, and are dropped as soon as the query or the
//! instantiation that produced them is over.

use std::collections::BTreeMap;

use crate::dictionary::Overlay;
use crate::engine::{Engine, EngineError, EntityId, Provenance};
use crate::pidgin::{RoleRef, ViTemplate};

/// Where a memory role instance lands in the focus.
#[derive(Debug, Clone, PartialEq)]
pub enum RoleBinding {
    Focus(EntityId),
    /// No focus counterpart; instantiation creates one with this overlay.
    New(Overlay),
}

impl RoleBinding {
    fn agrees(&self, other: &RoleBinding) -> bool {
        match (self, other) {
            (RoleBinding::Focus(a), RoleBinding::Focus(b)) => a == b,
            (RoleBinding::New(_), RoleBinding::New(_)) => true,
            _ => false,
        }
    }

    fn to_role_ref(&self) -> RoleRef {
        match self {
            RoleBinding::Focus(id) => RoleRef::Existing(*id),
            RoleBinding::New(o) => RoleRef::New(o.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoleMap {
    pub subject: RoleBinding,
    pub object: Option<RoleBinding>,
}

impl RoleMap {
    fn agrees(&self, other: &RoleMap) -> bool {
        self.subject.agrees(&other.subject)
            && match (&self.object, &other.object) {
                (Some(a), Some(b)) => a.agrees(b),
                (None, None) => true,
                _ => false,
            }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HlsCandidate {
    /// Verbs of the first supporter.
    pub prototype_verbs: Overlay,
    pub supporters: BTreeMap<EntityId, f64>,
    pub role_map: RoleMap,
    pub score: f64,
    pub created_order: usize,
    /// Tick of the earliest supporter.
    pub earliest_tick: u64,
    epoch: u64,
}

impl HlsCandidate {
    /// Supporters by support descending, then id ascending.
    pub fn ranked_supporters(&self) -> Vec<(EntityId, f64)> {
        let mut out: Vec<_> = self.supporters.iter().map(|(k, v)| (*k, *v)).collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out
    }

    pub fn lowest_supporter(&self) -> EntityId {
        *self
            .supporters
            .keys()
            .next()
            .expect("candidates have supporters")
    }
}

enum Direction {
    Successor,
    Predecessor,
}

struct Builder<'e> {
    engine: &'e Engine,
    candidates: Vec<HlsCandidate>,
    bindings: BTreeMap<EntityId, RoleBinding>,
    /// Focus instances with their shadows, in id order.
    focus_instances: Vec<(EntityId, Option<&'e crate::shadow::Shadow>)>,
}

impl<'e> Builder<'e> {
    fn new(engine: &'e Engine) -> Self {
        Builder {
            engine,
            candidates: Vec::new(),
            bindings: BTreeMap::new(),
            focus_instances: engine
                .focus_instances()
                .into_iter()
                .map(|i| (i.id, engine.shadow(i.id)))
                .collect(),
        }
    }

    /// Focus counterpart of a memory instance: the focus instance whose
    /// shadow holds it most strongly (lower id on ties), provided that
    /// instance's share of all focus weight on it reaches `instance_threshold`.
    fn binding(&mut self, memory: EntityId) -> RoleBinding {
        if let Some(b) = self.bindings.get(&memory) {
            return b.clone();
        }
        let engine = self.engine;
        let binding = if engine.in_focus(memory) {
            RoleBinding::Focus(memory)
        } else {
            let mut best: Option<(EntityId, f64)> = None;
            let mut total = 0.0;
            for (id, shadow) in &self.focus_instances {
                let w = shadow.map_or(0.0, |s| s.get(memory));
                total += w;
                if w > 0.0 && best.is_none_or(|(_, bw)| w > bw) {
                    best = Some((*id, w));
                }
            }
            match best {
                Some((id, w)) if w / total >= engine.config.instance_threshold => {
                    RoleBinding::Focus(id)
                }
                _ => {
                    let overlay = &engine.instances[&memory].overlay;
                    RoleBinding::New(overlay.filtered(engine.config.attribute_floor))
                }
            }
        };
        self.bindings.insert(memory, binding.clone());
        binding
    }

    fn vote(&mut self, supporter: EntityId, support: f64) {
        let engine = self.engine;
        let m = &engine.vis[&supporter];
        let role_map = RoleMap {
            subject: self.binding(m.subject),
            object: m.object.map(|o| self.binding(o)),
        };
        let threshold = engine.config.cluster_threshold;
        let existing = self.candidates.iter_mut().find(|c| {
            engine
                .dict
                .similarity_unchecked(&c.prototype_verbs, &m.verbs)
                >= threshold
                && c.role_map.agrees(&role_map)
        });
        match existing {
            Some(c) => *c.supporters.entry(supporter).or_insert(0.0) += support,
            None => {
                let created_order = self.candidates.len();
                self.candidates.push(HlsCandidate {
                    prototype_verbs: m.verbs.clone(),
                    supporters: BTreeMap::from([(supporter, support)]),
                    role_map,
                    score: 0.0,
                    created_order,
                    earliest_tick: m.tick,
                    epoch: engine.epoch,
                });
            }
        }
    }

    fn finish(self, top: usize) -> Vec<HlsCandidate> {
        let engine = self.engine;
        let mut out = self.candidates;
        for c in &mut out {
            c.score = c.supporters.values().sum();
            c.earliest_tick = c
                .supporters
                .keys()
                .map(|id| engine.vis[id].tick)
                .min()
                .unwrap_or(0);
        }
        out.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.earliest_tick.cmp(&b.earliest_tick))
                .then(a.lowest_supporter().cmp(&b.lowest_supporter()))
        });
        out.truncate(top);
        out
    }
}

impl Engine {
    /// Focus VI shadows; a memory VI weighted at `matched_threshold` in any
    /// of them already has a focus counterpart.
    fn focus_shadows(&self) -> Vec<&crate::shadow::Shadow> {
        self.vis
            .values()
            .filter(|v| !v.demoted)
            .filter_map(|v| self.shadows.get(&v.id))
            .collect()
    }

    fn linked(&self, id: EntityId, d: usize, dir: &Direction) -> Option<EntityId> {
        let next = match dir {
            Direction::Successor => self.successor(id, d),
            Direction::Predecessor => self.predecessor(id, d),
        }?;
        // Only memory VIs can support a candidate.
        self.is_demoted(next).then_some(next)
    }

    /// Ranked candidates for the next event, voted by the successors of
    /// whatever the most recent focus VIs shadow.
    pub fn build_continuations(&self, top: usize) -> Vec<HlsCandidate> {
        let mut builder = Builder::new(self);
        let focus = self.focus_vis();
        let window = self.config.continuation_window;
        let recent = &focus[focus.len().saturating_sub(window)..];
        let matched = self.focus_shadows();
        let threshold = self.config.matched_threshold;
        for v in recent {
            let Some(shadow) = self.shadows.get(&v.id) else {
                continue;
            };
            let u = v.focus_salience;
            for (m, w) in shadow.ranked() {
                let mut discount = 1.0;
                for d in 1..=self.config.successor_depth {
                    if let Some(next) = self.linked(m, d, &Direction::Successor) {
                        if !matched.iter().any(|s| s.get(next) >= threshold) {
                            builder.vote(next, u * w * discount);
                        }
                    }
                    discount *= self.config.successor_discount;
                }
            }
        }
        builder.finish(top)
    }

    /// Focus VIs of the current story in tick order.
    pub fn focus_story(&self) -> Vec<EntityId> {
        self.vis
            .values()
            .filter(|v| !v.demoted && v.story_id == self.story_id)
            .map(|v| v.id)
            .collect()
    }

    /// Ranked fillers for a gap at `position` of the current focus story.
    ///
    /// VIs before the gap vote through successor links and VIs after it
    /// through predecessor links, each at its distance from the gap. Votes
    /// are not weighted by focus salience.
    pub fn cloze_infer(
        &self,
        position: usize,
        top: usize,
    ) -> Result<Vec<HlsCandidate>, EngineError> {
        let story = self.focus_story();
        if position > story.len() || story.is_empty() {
            return Err(EngineError::BadPosition {
                position,
                len: story.len(),
            });
        }
        let depth = self.config.successor_depth;
        let mut builder = Builder::new(self);
        for (index, vid) in story.iter().enumerate() {
            let (distance, dir) = if index < position {
                (position - index, Direction::Successor)
            } else {
                (index - position + 1, Direction::Predecessor)
            };
            if distance > depth {
                continue;
            }
            let discount = self.config.successor_discount.powi(distance as i32 - 1);
            let Some(shadow) = self.shadows.get(vid) else {
                continue;
            };
            for (m, w) in shadow.ranked() {
                if let Some(next) = self.linked(m, distance, &dir) {
                    builder.vote(next, w * discount);
                }
            }
        }
        Ok(builder.finish(top))
    }

    /// Inserts the candidate's VI into the focus as a confabulated event.
    pub fn instantiate(&mut self, candidate: &HlsCandidate) -> Result<EntityId, EngineError> {
        if candidate.epoch != self.epoch {
            return Err(EngineError::StaleCandidate);
        }
        let template = ViTemplate {
            verbs: candidate.prototype_verbs.clone(),
            subject: candidate.role_map.subject.to_role_ref(),
            object: candidate
                .role_map
                .object
                .as_ref()
                .map(RoleBinding::to_role_ref),
        };
        self.insert_vi_with(template, Provenance::Confabulated)
    }

    /// Greedily instantiates the top continuation up to `steps` times.
    pub fn confabulate(&mut self, steps: usize) -> Result<Vec<EntityId>, EngineError> {
        if steps == 0 {
            return Err(EngineError::InvalidArgument(
                "steps must be at least 1".into(),
            ));
        }
        let mut inserted = Vec::new();
        for _ in 0..steps {
            let Some(best) = self.build_continuations(1).into_iter().next() else {
                break;
            };
            inserted.push(self.instantiate(&best)?);
        }
        Ok(inserted)
    }
}
