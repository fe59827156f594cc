//! Batch execution of a scenario file into a versioned result document.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};
use shadowtale::render::{self, ViView};
use shadowtale::script::{LineError, Outcome, Session};

pub const RESULT_FORMAT: &str = "shadowtale-result";
pub const RESULT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Insertion {
    pub line: usize,
    pub vi: ViView,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectiveRecord {
    pub line: usize,
    pub directive: &'static str,
    pub result: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ResultDoc {
    pub format: &'static str,
    pub version: u32,
    pub insertions: Vec<Insertion>,
    pub directives: Vec<DirectiveRecord>,
    pub state_hash: String,
}

/// A scenario that stopped at `line`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFailure {
    pub line: usize,
    pub error: LineError,
}

impl ScenarioFailure {
    /// `file:line:col: error[code]: message`
    pub fn diagnostic(&self, file: &str) -> String {
        format!(
            "{file}:{}:{}: error[{}]: {}",
            self.line,
            self.error.column,
            self.error.code(),
            self.error.kind
        )
    }

    /// Snapshot write failures are I/O errors; everything else is the
    /// scenario's fault.
    pub fn exit_code(&self) -> u8 {
        if self.error.code() == "io_error" {
            crate::EXIT_IO
        } else {
            crate::EXIT_SCENARIO
        }
    }
}

/// Result document plus its plain-text rendering.
#[derive(Debug, Clone)]
pub struct Report {
    pub doc: ResultDoc,
    pub pretty: String,
}

/// Executes `text` line by line. Trace lines, if requested, go to `trace`.
pub fn run_scenario(
    session: &mut Session,
    text: &str,
    mut trace: Option<&mut dyn Write>,
) -> Result<Report, ScenarioFailure> {
    if trace.is_some() {
        session.engine_mut().set_tracing(true);
    }
    let mut insertions = Vec::new();
    let mut directives = Vec::new();
    let mut pretty = String::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let outcome = session
            .exec_line(raw)
            .map_err(|error| ScenarioFailure { line, error })?;
        if let Some(out) = trace.as_deref_mut() {
            for event in session.engine_mut().take_trace() {
                // Trace output is best effort.
                let _ = writeln!(out, "{event}");
            }
        }
        let engine = session.engine();
        let (directive, result) = match outcome {
            Outcome::Skipped | Outcome::SceneBreak => continue,
            Outcome::Inserted(id) => {
                let vi = render::vi_view(engine, engine.vi(id).expect("inserted VI"));
                pretty.push_str(&format!("{line:>4}  #{id}  {}\n", vi.text));
                insertions.push(Insertion { line, vi });
                continue;
            }
            Outcome::Confabulated(ids) => {
                let vis = render::vi_views(engine, &ids);
                pretty.push_str(&format!("{line:>4}  !confabulate\n"));
                for v in &vis {
                    pretty.push_str(&format!("      #{}  {} (confabulated)\n", v.id, v.text));
                }
                ("confabulate", json!({ "inserted": ids, "vis": vis }))
            }
            Outcome::Cloze {
                position,
                candidates,
            } => {
                pretty.push_str(&format!("{line:>4}  !cloze {position}\n"));
                pretty.push_str(&render::candidates_table(&candidates));
                let listing = render::candidates(&candidates);
                (
                    "cloze",
                    json!({ "position": position, "candidates": listing.candidates }),
                )
            }
            Outcome::Hls(candidates) => {
                pretty.push_str(&format!("{line:>4}  !hls\n"));
                pretty.push_str(&render::candidates_table(&candidates));
                ("hls", json!(render::candidates(&candidates)))
            }
            Outcome::Dumped(path) => {
                pretty.push_str(&format!("{line:>4}  !dump {}\n", path.display()));
                ("dump", json!({ "path": path }))
            }
        };
        directives.push(DirectiveRecord {
            line,
            directive,
            result,
        });
    }
    let state_hash = session.engine().state_hash();
    pretty.push_str(&format!("state hash {state_hash}\n"));
    Ok(Report {
        doc: ResultDoc {
            format: RESULT_FORMAT,
            version: RESULT_VERSION,
            insertions,
            directives,
            state_hash,
        },
        pretty,
    })
}
