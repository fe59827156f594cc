//! A deterministic narrative reasoning engine.
//!
//! Stories arrive as pidgin sentences and become verb instances in a
//! salience-decayed focus. Demoted entities form an append-only episodic
//! memory. Every focus entity keeps a shadow onto memory, and headless
//! shadows built from those shadows and the stories' temporal links drive
//! continuation, cloze inference and confabulation.

pub mod config;
pub mod dictionary;
pub mod engine;
pub mod hls;
pub mod persist;
pub mod pidgin;
pub mod render;
pub mod script;
pub mod shadow;

pub use config::{ConfigError, EngineConfig};
pub use dictionary::{DictError, Dictionary, Kind, Overlay};
pub use engine::{Engine, EngineError, EntityId, Provenance};
pub use hls::{HlsCandidate, RoleBinding};
pub use persist::SnapshotError;
pub use pidgin::{parse_line, Line, SentenceAst, ViTemplate};
pub use script::Session;
