#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use shadowtale::script::{Outcome, Session};
use shadowtale::{Dictionary, Engine, EngineConfig, Line};

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn scenarios_dir() -> PathBuf {
    repo_root().join("scenarios")
}

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn read(path: PathBuf) -> String {
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn restaurant_dict() -> Arc<Dictionary> {
    Arc::new(Dictionary::load(&read(scenarios_dir().join("restaurant.dict"))).unwrap())
}

pub fn oracle_session() -> Session {
    Session::new(Engine::new(restaurant_dict(), EngineConfig::oracle()))
}

/// Executes every line, failing on the first error.
pub fn run(session: &mut Session, text: &str) -> Vec<Outcome> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            session
                .exec_line(line)
                .unwrap_or_else(|e| panic!("line {}: {line:?}: {e}", i + 1))
        })
        .collect()
}

pub fn run_file(session: &mut Session, name: &str) -> Vec<Outcome> {
    run(session, &read(scenarios_dir().join(name)))
}

pub fn verb_of(engine: &Engine, vi: shadowtale::EntityId) -> String {
    engine
        .vi(vi)
        .unwrap()
        .verbs
        .names()
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn candidate_verb(c: &shadowtale::HlsCandidate) -> String {
    c.prototype_verbs.names().collect::<Vec<_>>().join(" ")
}

/// Five-event restaurant telling with participant variant `i`; the event
/// at `skip` is left out.
pub fn restaurant_story(i: usize, skip: Option<usize>) -> String {
    const SUBJECTS: [&str; 5] = ["customer", "man", "woman", "student", "tourist"];
    const ATTRIBUTES: [&str; 4] = ["hungry", "tired", "young", "old"];
    const FOODS: [&str; 3] = ["soup", "pasta", "salad"];
    let s = SUBJECTS[i % 5];
    let a = ATTRIBUTES[i % 4];
    let f = FOODS[i % 3];
    let food_known = skip != Some(1);
    let events = [
        format!("A {a} {s} / enters."),
        format!("The {s} / orders / a {f}."),
        format!(
            "The {s} / eats / {} {f}.",
            if food_known { "the" } else { "a" }
        ),
        format!("The {s} / pays / a bill."),
        format!("The {s} / leaves."),
    ];
    let mut out = String::new();
    for (k, e) in events.iter().enumerate() {
        if Some(k) != skip {
            out.push_str(e);
            out.push('\n');
        }
    }
    out
}

/// One-line rendering used by the parser conformance table.
pub fn render_line(raw: &str) -> String {
    match Session::classify(raw) {
        Ok(None) => "skip".into(),
        Ok(Some(Line::SceneBreak)) => "break".into(),
        Ok(Some(Line::Sentence(ast))) => format!(
            "sentence\t{}\t{}\t{}",
            ast.subject,
            ast.verbs.join(" "),
            ast.object
                .as_ref()
                .map_or("-".to_string(), |o| o.to_string())
        ),
        Ok(Some(Line::Directive(d))) => {
            use shadowtale::pidgin::Directive::*;
            let args = match d {
                Confabulate { steps } => steps.to_string(),
                Cloze { position, top } => {
                    format!(
                        "{position}\t{}",
                        top.map_or("-".to_string(), |t| t.to_string())
                    )
                }
                Hls { top } => top.to_string(),
                Dump { ref path } => path.clone(),
            };
            format!("directive\t{}\t{args}", d.name())
        }
        Err(e) => format!("error\t{}", e.column),
    }
}
