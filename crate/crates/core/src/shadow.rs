//! Shadows: per-focus-entity weighted maps onto memory entities, kept up to
//! date by a spike activity on every insertion and one diffusion pass per tick.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::engine::{Engine, EngineError, EntityId};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Shadow {
    weights: BTreeMap<EntityId, f64>,
}

impl Shadow {
    pub fn get(&self, memory: EntityId) -> f64 {
        self.weights.get(&memory).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Sum of weights, accumulated in memory-id order.
    pub fn total(&self) -> f64 {
        self.weights.values().sum()
    }

    /// Largest single weight, 0 when empty.
    pub fn peak(&self) -> f64 {
        self.weights.values().copied().fold(0.0, f64::max)
    }

    /// Entries in memory-id order.
    pub fn iter(&self) -> impl Iterator<Item = (EntityId, f64)> + '_ {
        self.weights.iter().map(|(k, v)| (*k, *v))
    }

    /// Entries sorted by weight descending, then memory id ascending.
    pub fn ranked(&self) -> Vec<(EntityId, f64)> {
        let mut entries: Vec<_> = self.iter().collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        entries
    }

    fn add(&mut self, memory: EntityId, delta: f64) -> f64 {
        let slot = self.weights.entry(memory).or_insert(0.0);
        *slot += delta;
        *slot
    }

    pub(crate) fn from_entries(entries: impl IntoIterator<Item = (EntityId, f64)>) -> Self {
        Shadow {
            weights: entries.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Activity {
    Spike,
    Diffuse,
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activity::Spike => "spike",
            Activity::Diffuse => "diffuse",
        })
    }
}

/// One shadow update, emitted when tracing is on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvent {
    pub tick: u64,
    pub activity: Activity,
    pub owner: EntityId,
    pub memory: EntityId,
    pub delta: f64,
    pub weight: f64,
}

impl fmt::Display for TraceEvent {
    /// Tab separated: tick, activity, owner, memory, delta, new weight.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.tick, self.activity, self.owner, self.memory, self.delta, self.weight
        )
    }
}

impl Engine {
    fn bump(&mut self, activity: Activity, owner: EntityId, memory: EntityId, delta: f64) {
        let Some(shadow) = self.shadows.get_mut(&owner) else {
            return;
        };
        let weight = shadow.add(memory, delta);
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceEvent {
                tick: self.tick,
                activity,
                owner,
                memory,
                delta,
                weight,
            });
        }
    }

    /// Spike activity for the VI just inserted: every sufficiently similar
    /// memory VI gains weight in its shadow, scaled by how consistent the
    /// role bindings were before the spike, and part of that weight spills onto the
    /// role instances' shadows.
    pub(crate) fn spike(&mut self, v: EntityId) {
        let new = self.vis[&v].clone();
        let floor = self.config.consistency_floor;
        let spill = self.config.argument_spill;
        // Role weights as they stood before this spike.
        let roles: BTreeMap<EntityId, Shadow> = [Some(new.subject), new.object]
            .into_iter()
            .flatten()
            .filter_map(|r| self.shadows.get(&r).map(|s| (r, s.clone())))
            .collect();
        let consistency = |focus: EntityId, memory: EntityId| {
            roles.get(&focus).map_or(0.0, |s| s.get(memory)).max(floor)
        };
        let memory: Vec<EntityId> = self
            .vis
            .values()
            .filter(|m| m.demoted)
            .map(|m| m.id)
            .collect();

        for mid in memory {
            let m = &self.vis[&mid];
            let s = self.dict.similarity_unchecked(&new.verbs, &m.verbs);
            if s < self.config.match_floor {
                continue;
            }
            let mut kappa = consistency(new.subject, m.subject);
            let mut pairs = vec![(new.subject, m.subject)];
            match (new.object, m.object) {
                (Some(a), Some(b)) => {
                    kappa *= consistency(a, b);
                    pairs.push((a, b));
                }
                (None, None) => {}
                _ => kappa *= floor,
            }
            let delta = s * kappa;
            if delta <= 0.0 {
                continue;
            }
            self.bump(Activity::Spike, v, mid, delta);
            for (focus_role, memory_role) in pairs {
                // Entities still in focus are never shadowed.
                if self.is_demoted(memory_role) {
                    self.bump(Activity::Spike, focus_role, memory_role, spill * delta);
                }
            }
        }
    }

    /// Diffusion activity: decay, diffuse VI weights onto role instances,
    /// cap totals at 1, prune.
    pub(crate) fn diffuse(&mut self) {
        let decay = self.config.shadow_decay;
        for shadow in self.shadows.values_mut() {
            for w in shadow.weights.values_mut() {
                *w *= decay;
            }
        }

        let rate = self.config.diffusion_rate;
        if rate > 0.0 {
            let mut contributions = Vec::new();
            for v in self.vis.values().filter(|v| !v.demoted) {
                let Some(shadow) = self.shadows.get(&v.id) else {
                    continue;
                };
                for (mid, w) in shadow.ranked() {
                    let m = &self.vis[&mid];
                    let mut pairs = vec![(v.subject, m.subject)];
                    if let (Some(a), Some(b)) = (v.object, m.object) {
                        pairs.push((a, b));
                    }
                    for (owner, memory) in pairs {
                        if self.is_demoted(memory) && rate * w > 0.0 {
                            contributions.push((owner, memory, rate * w));
                        }
                    }
                }
            }
            for (owner, memory, delta) in contributions {
                self.bump(Activity::Diffuse, owner, memory, delta);
            }
        }

        let prune = self.config.shadow_prune;
        for shadow in self.shadows.values_mut() {
            let total = shadow.total();
            if total > 1.0 {
                for w in shadow.weights.values_mut() {
                    *w /= total;
                }
            }
            shadow.weights.retain(|_, w| *w >= prune);
        }
    }

    /// Shadow of a focus entity, strongest first.
    pub fn get_shadow(&self, owner: EntityId) -> Result<Vec<(EntityId, f64)>, EngineError> {
        self.shadows
            .get(&owner)
            .map(Shadow::ranked)
            .ok_or(EngineError::UnknownOwner(owner))
    }

    pub fn shadow(&self, owner: EntityId) -> Option<&Shadow> {
        self.shadows.get(&owner)
    }

    pub fn shadows(&self) -> impl Iterator<Item = (EntityId, &Shadow)> + '_ {
        self.shadows.iter().map(|(k, v)| (*k, v))
    }
}
