//! Line-by-line execution of scenario text against an engine.

use std::path::PathBuf;

use thiserror::Error;

use crate::engine::{Engine, EngineError, EntityId};
use crate::hls::HlsCandidate;
use crate::pidgin::{self, Directive, Line, ResolveError};

pub const DEFAULT_TOP: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// Blank or comment-only line.
    Skipped,
    Inserted(EntityId),
    SceneBreak,
    Confabulated(Vec<EntityId>),
    Cloze {
        position: usize,
        candidates: Vec<HlsCandidate>,
    },
    Hls(Vec<HlsCandidate>),
    Dumped(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LineErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown word `{0}`")]
    UnknownWord(String),
    #[error("no referent in focus for `{0}`")]
    NoReferent(String),
    #[error("{0}")]
    Engine(EngineError),
    #[error("cannot write snapshot: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{column}: {kind}")]
pub struct LineError {
    pub column: usize,
    pub kind: LineErrorKind,
}

impl LineError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match &self.kind {
            LineErrorKind::Syntax(_) => "parse_error",
            LineErrorKind::UnknownWord(_) => "unknown_word",
            LineErrorKind::NoReferent(_) => "no_referent",
            LineErrorKind::Engine(EngineError::BadPosition { .. }) => "bad_position",
            LineErrorKind::Engine(EngineError::UnknownInstance(_))
            | LineErrorKind::Engine(EngineError::UnknownOwner(_)) => "unknown_id",
            LineErrorKind::Engine(_) => "bad_request",
            LineErrorKind::Io(_) => "io_error",
        }
    }
}

/// Text after `#` is a comment.
pub fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("")
}

/// An engine plus the line interpreter around it.
#[derive(Debug, Clone)]
pub struct Session {
    engine: Engine,
}

impl Session {
    pub fn new(engine: Engine) -> Self {
        Session { engine }
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn engine_mut(&mut self) -> &mut Engine {
        &mut self.engine
    }

    pub fn into_engine(self) -> Engine {
        self.engine
    }

    /// Parses `line` without executing it.
    pub fn classify(line: &str) -> Result<Option<Line>, LineError> {
        let content = strip_comment(line);
        if content.trim().is_empty() {
            return Ok(None);
        }
        pidgin::parse_line(content)
            .map(Some)
            .map_err(|e| LineError {
                column: e.column,
                kind: LineErrorKind::Syntax(e.message),
            })
    }

    pub fn exec_line(&mut self, line: &str) -> Result<Outcome, LineError> {
        match Session::classify(line)? {
            None => Ok(Outcome::Skipped),
            Some(parsed) => self.exec_parsed(line, parsed),
        }
    }

    pub fn exec_parsed(&mut self, line: &str, parsed: Line) -> Result<Outcome, LineError> {
        let engine_err = |column: usize| {
            move |e: EngineError| LineError {
                column,
                kind: LineErrorKind::Engine(e),
            }
        };
        let first_column = line.chars().take_while(|c| c.is_whitespace()).count() + 1;
        match parsed {
            Line::SceneBreak => {
                self.engine.story_break();
                Ok(Outcome::SceneBreak)
            }
            Line::Sentence(ast) => {
                let threshold = self.engine.config().reference_threshold;
                let dict = self.engine.dictionary().clone();
                let template =
                    pidgin::resolve(&ast, &self.engine, &dict, threshold).map_err(|e| match e {
                        ResolveError::UnknownWord { token, .. } => LineError {
                            column: pidgin::column_of_word(line, &token).unwrap_or(first_column),
                            kind: LineErrorKind::UnknownWord(token),
                        },
                        ResolveError::NoReferent { role, phrase } => LineError {
                            column: pidgin::column_of_role(line, role).unwrap_or(first_column),
                            kind: LineErrorKind::NoReferent(phrase),
                        },
                    })?;
                let id = self
                    .engine
                    .insert_vi(template)
                    .map_err(engine_err(first_column))?;
                Ok(Outcome::Inserted(id))
            }
            Line::Directive(directive) => match directive {
                Directive::Confabulate { steps } => self
                    .engine
                    .confabulate(steps)
                    .map(Outcome::Confabulated)
                    .map_err(engine_err(first_column)),
                Directive::Cloze { position, top } => self
                    .engine
                    .cloze_infer(position, top.unwrap_or(DEFAULT_TOP))
                    .map(|candidates| Outcome::Cloze {
                        position,
                        candidates,
                    })
                    .map_err(engine_err(first_column)),
                Directive::Hls { top } => Ok(Outcome::Hls(self.engine.build_continuations(top))),
                Directive::Dump { path } => {
                    let path = PathBuf::from(path);
                    self.engine.save_snapshot(&path).map_err(|e| LineError {
                        column: first_column,
                        kind: LineErrorKind::Io(e.to_string()),
                    })?;
                    Ok(Outcome::Dumped(path))
                }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::config::EngineConfig;
    use crate::dictionary::Dictionary;

    fn session() -> Session {
        let dict = Dictionary::load("concept man\nconcept dog\nverb waves\nverb sits\nverb hits\n")
            .unwrap();
        Session::new(Engine::new(Arc::new(dict), EngineConfig::default()))
    }

    #[test]
    fn sentences_and_references() {
        let mut s = session();
        assert_eq!(s.exec_line("# just a comment").unwrap(), Outcome::Skipped);
        assert_eq!(s.exec_line("   ").unwrap(), Outcome::Skipped);
        let Outcome::Inserted(first) = s.exec_line("A man / waves.  # hello").unwrap() else {
            panic!()
        };
        let Outcome::Inserted(second) = s.exec_line("The man / hits / a dog.").unwrap() else {
            panic!()
        };
        let e = s.engine();
        assert_eq!(e.vi(first).unwrap().subject, e.vi(second).unwrap().subject);
        assert!(e.vi(second).unwrap().object.is_some());
    }

    #[test]
    fn error_columns_and_codes() {
        let mut s = session();
        let err = s.exec_line("A man / hits / a xyzzy.").unwrap_err();
        assert_eq!((err.column, err.code()), (18, "unknown_word"));
        let err = s.exec_line("A man / waves / the dog.").unwrap_err();
        assert_eq!((err.column, err.code()), (17, "no_referent"));
        let err = s.exec_line("man waves").unwrap_err();
        assert_eq!((err.column, err.code()), (1, "parse_error"));
        let err = s.exec_line("!cloze 3").unwrap_err();
        assert_eq!(err.code(), "bad_position");
        // Failed lines leave no trace.
        assert_eq!(s.engine().tick(), 0);
        assert!(s.engine().log().is_empty());
    }

    #[test]
    fn dump_directive_writes_snapshot() {
        let mut s = session();
        s.exec_line("A man / waves.").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dump.json");
        let out = s.exec_line(&format!("!dump {}", path.display())).unwrap();
        assert_eq!(out, Outcome::Dumped(path.clone()));
        let loaded = Engine::load_snapshot(&path).unwrap();
        assert_eq!(loaded.state_hash(), s.engine().state_hash());
    }
}
