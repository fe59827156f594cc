//! JSON views of engine state shared by the CLI, the REPL and the HTTP API.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::engine::{Engine, EngineError, EntityId, Instance, Provenance, VerbInstance};
use crate::hls::{HlsCandidate, RoleBinding};

/// Supporters listed per candidate.
pub const TOP_SUPPORTERS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct InstanceView {
    pub id: EntityId,
    pub overlay: BTreeMap<String, f64>,
    pub salience: f64,
    pub created_tick: u64,
    pub last_referenced_tick: u64,
    pub demoted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ViView {
    pub id: EntityId,
    pub verbs: BTreeMap<String, f64>,
    pub subject: EntityId,
    pub object: Option<EntityId>,
    pub tick: u64,
    pub story_id: u64,
    pub provenance: Provenance,
    pub salience: f64,
    pub demoted: bool,
    /// Pidgin rendering, e.g. `The man / hits / the dog.`
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FocusListing {
    pub tick: u64,
    pub story_id: u64,
    pub instances: Vec<InstanceView>,
    pub vis: Vec<ViView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightEntry {
    pub id: EntityId,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowListing {
    pub owner: EntityId,
    pub entries: Vec<WeightEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BindingView {
    Focus { id: EntityId },
    New { overlay: BTreeMap<String, f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoleMapView {
    pub subject: BindingView,
    pub object: Option<BindingView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportEntry {
    pub id: EntityId,
    pub support: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CandidateView {
    pub rank: usize,
    pub score: f64,
    pub verbs: BTreeMap<String, f64>,
    pub roles: RoleMapView,
    pub supporters: Vec<SupportEntry>,
    pub supporter_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MemoryRecordView {
    Instance {
        #[serde(flatten)]
        instance: InstanceView,
        #[serde(rename = "memorySalience")]
        memory_salience: Option<f64>,
    },
    Vi {
        #[serde(flatten)]
        vi: ViView,
        #[serde(rename = "memorySalience")]
        memory_salience: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemoryListing {
    pub records: Vec<MemoryRecordView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NarrateResponse {
    pub inserted: Vec<EntityId>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateListing {
    pub candidates: Vec<CandidateView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfabulateResponse {
    pub inserted: Vec<EntityId>,
    pub vis: Vec<ViView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HashResponse {
    pub hash: String,
}

fn noun_phrase(engine: &Engine, id: EntityId) -> String {
    let names: Vec<&str> = engine
        .instance(id)
        .map(|i| i.overlay.names().collect())
        .unwrap_or_default();
    if names.is_empty() {
        format!("the entity-{id}")
    } else {
        format!("the {}", names.join(" "))
    }
}

pub fn sentence(engine: &Engine, v: &VerbInstance) -> String {
    let mut subject = noun_phrase(engine, v.subject);
    subject.replace_range(0..1, "T");
    let verbs: Vec<&str> = v.verbs.names().collect();
    let mut out = format!("{subject} / {}", verbs.join(" "));
    if let Some(object) = v.object {
        out.push_str(" / ");
        out.push_str(&noun_phrase(engine, object));
    }
    out.push('.');
    out
}

pub fn instance_view(i: &Instance) -> InstanceView {
    InstanceView {
        id: i.id,
        overlay: i.overlay.weights().clone(),
        salience: i.focus_salience,
        created_tick: i.created_tick,
        last_referenced_tick: i.last_referenced_tick,
        demoted: i.demoted,
    }
}

pub fn vi_view(engine: &Engine, v: &VerbInstance) -> ViView {
    ViView {
        id: v.id,
        verbs: v.verbs.weights().clone(),
        subject: v.subject,
        object: v.object,
        tick: v.tick,
        story_id: v.story_id,
        provenance: v.provenance,
        salience: v.focus_salience,
        demoted: v.demoted,
        text: sentence(engine, v),
    }
}

pub fn vi_views(engine: &Engine, ids: &[EntityId]) -> Vec<ViView> {
    ids.iter()
        .filter_map(|id| engine.vi(*id))
        .map(|v| vi_view(engine, v))
        .collect()
}

pub fn focus(engine: &Engine) -> FocusListing {
    FocusListing {
        tick: engine.tick(),
        story_id: engine.story_id(),
        instances: engine
            .focus_instances()
            .into_iter()
            .map(instance_view)
            .collect(),
        vis: engine
            .focus_vis()
            .into_iter()
            .map(|v| vi_view(engine, v))
            .collect(),
    }
}

pub fn shadow(engine: &Engine, owner: EntityId) -> Result<ShadowListing, EngineError> {
    Ok(ShadowListing {
        owner,
        entries: engine
            .get_shadow(owner)?
            .into_iter()
            .map(|(id, weight)| WeightEntry { id, weight })
            .collect(),
    })
}

fn binding_view(b: &RoleBinding) -> BindingView {
    match b {
        RoleBinding::Focus(id) => BindingView::Focus { id: *id },
        RoleBinding::New(o) => BindingView::New {
            overlay: o.weights().clone(),
        },
    }
}

pub fn candidates(list: &[HlsCandidate]) -> CandidateListing {
    CandidateListing {
        candidates: list
            .iter()
            .enumerate()
            .map(|(i, c)| CandidateView {
                rank: i + 1,
                score: c.score,
                verbs: c.prototype_verbs.weights().clone(),
                roles: RoleMapView {
                    subject: binding_view(&c.role_map.subject),
                    object: c.role_map.object.as_ref().map(binding_view),
                },
                supporters: c
                    .ranked_supporters()
                    .into_iter()
                    .take(TOP_SUPPORTERS)
                    .map(|(id, support)| SupportEntry { id, support })
                    .collect(),
                supporter_count: c.supporters.len(),
            })
            .collect(),
    }
}

/// Log records with ids in `[from, to]`.
pub fn memory(engine: &Engine, from: u64, to: u64) -> MemoryListing {
    let records = engine
        .log()
        .iter()
        .filter(|id| (from..=to).contains(&id.0))
        .filter_map(|id| {
            let memory_salience = engine.memory_salience(*id);
            if let Some(v) = engine.vi(*id) {
                Some(MemoryRecordView::Vi {
                    vi: vi_view(engine, v),
                    memory_salience,
                })
            } else {
                engine.instance(*id).map(|i| MemoryRecordView::Instance {
                    instance: instance_view(i),
                    memory_salience,
                })
            }
        })
        .collect();
    MemoryListing { records }
}

/// Plain-text table of ranked candidates.
pub fn candidates_table(list: &[HlsCandidate]) -> String {
    let mut out = String::from("rank\tscore\tverbs\tsubject\tobject\tsupporters\n");
    for (i, c) in list.iter().enumerate() {
        let binding = |b: &RoleBinding| match b {
            RoleBinding::Focus(id) => format!("#{id}"),
            RoleBinding::New(o) => format!("new{o}"),
        };
        let supporters: Vec<String> = c
            .ranked_supporters()
            .into_iter()
            .take(TOP_SUPPORTERS)
            .map(|(id, s)| format!("{id}:{s:.4}"))
            .collect();
        out.push_str(&format!(
            "{}\t{:.6}\t{}\t{}\t{}\t{}\n",
            i + 1,
            c.score,
            c.prototype_verbs,
            binding(&c.role_map.subject),
            c.role_map.object.as_ref().map_or("-".to_string(), binding),
            supporters.join(" ")
        ));
    }
    out
}
