//! Interactive session. Every response is printed as one line of JSON in
//! the same shape the HTTP API returns.

use std::io::{self, BufRead, Write};

use serde::Serialize;
use serde_json::json;
use shadowtale::render;
use shadowtale::script::{Outcome, Session, DEFAULT_TOP};
use shadowtale::EntityId;
use shadowtale_service::ApiError;

pub const HELP: &str = "\
pidgin sentences, `----` and `!directives` are executed as in scenario files
:focus            focus instances and VIs
:shadows <id>     shadow of a focus entity
:hls [n]          top continuation candidates (default 5)
:confab <n>       confabulate n steps
:cloze <p>        fill a gap at position p of the current story
:save <path>      write a snapshot
:quit             leave";

pub struct Repl<R, W> {
    session: Session,
    input: R,
    output: W,
    prompt: bool,
    line: usize,
}

impl<R: BufRead, W: Write> Repl<R, W> {
    pub fn new(session: Session, input: R, output: W) -> Self {
        Repl {
            session,
            input,
            output,
            prompt: false,
            line: 0,
        }
    }

    /// Print `> ` before reading each line.
    pub fn with_prompt(mut self, prompt: bool) -> Self {
        self.prompt = prompt;
        self
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn into_session(self) -> Session {
        self.session
    }

    /// Reads until `:quit` or end of input.
    pub fn run(&mut self) -> io::Result<()> {
        let mut buf = String::new();
        loop {
            if self.prompt {
                write!(self.output, "> ")?;
                self.output.flush()?;
            }
            buf.clear();
            if self.input.read_line(&mut buf)? == 0 {
                return Ok(());
            }
            self.line += 1;
            let text = buf.trim_end_matches(['\n', '\r']).to_string();
            if !self.handle(&text)? {
                return Ok(());
            }
        }
    }

    fn emit<T: Serialize>(&mut self, value: &T) -> io::Result<()> {
        let text = serde_json::to_string(value).map_err(io::Error::other)?;
        writeln!(self.output, "{text}")
    }

    /// Returns false on `:quit`.
    fn handle(&mut self, text: &str) -> io::Result<bool> {
        let trimmed = text.trim();
        let Some(command) = trimmed.strip_prefix(':') else {
            self.narrate(text)?;
            return Ok(true);
        };
        let mut parts = command.split_whitespace();
        let name = parts.next().unwrap_or("");
        let args: Vec<&str> = parts.collect();
        let engine = self.session.engine();
        match (name, args.as_slice()) {
            ("quit" | "q", []) => return Ok(false),
            ("help", []) => writeln!(self.output, "{HELP}")?,
            ("focus", []) => {
                let listing = render::focus(engine);
                self.emit(&listing)?;
            }
            ("shadows", [id]) => match id.parse::<u64>() {
                Ok(id) => match render::shadow(engine, EntityId(id)) {
                    Ok(listing) => self.emit(&listing)?,
                    Err(e) => self.emit(&ApiError::from(e))?,
                },
                Err(_) => self.usage("`:shadows` takes an entity id")?,
            },
            ("hls", rest) if rest.len() <= 1 => {
                match rest.first().map_or(Ok(DEFAULT_TOP), |n| n.parse::<usize>()) {
                    Ok(top) => {
                        let listing = render::candidates(&engine.build_continuations(top));
                        self.emit(&listing)?;
                    }
                    Err(_) => self.usage("`:hls` takes a count")?,
                }
            }
            ("confab", [n]) => match n.parse::<usize>() {
                Ok(steps) => match self.session.engine_mut().confabulate(steps) {
                    Ok(inserted) => {
                        let vis = render::vi_views(self.session.engine(), &inserted);
                        self.emit(&render::ConfabulateResponse { inserted, vis })?;
                    }
                    Err(e) => self.emit(&ApiError::from(e))?,
                },
                Err(_) => self.usage("`:confab` takes a step count")?,
            },
            ("cloze", [p]) => match p.parse::<usize>() {
                Ok(position) => match engine.cloze_infer(position, DEFAULT_TOP) {
                    Ok(c) => self.emit(&render::candidates(&c))?,
                    Err(e) => self.emit(&ApiError::from(e))?,
                },
                Err(_) => self.usage("`:cloze` takes a position")?,
            },
            ("save", [path]) => match engine.save_snapshot(path) {
                Ok(()) => self.emit(&json!({ "saved": path }))?,
                Err(e) => self.usage(&format!("cannot save: {e}"))?,
            },
            _ => self.usage(&format!("unknown command `:{command}`; try :help"))?,
        }
        Ok(true)
    }

    fn usage(&mut self, message: &str) -> io::Result<()> {
        let e = ApiError::bad_request(message).at(self.line, 1);
        self.emit(&e)
    }

    fn narrate(&mut self, text: &str) -> io::Result<()> {
        match self.session.exec_line(text) {
            Ok(Outcome::Skipped) => Ok(()),
            Ok(Outcome::Inserted(id)) => self.emit(&render::NarrateResponse {
                inserted: vec![id],
                diagnostics: Vec::new(),
            }),
            Ok(Outcome::SceneBreak) => self.emit(&render::NarrateResponse {
                inserted: Vec::new(),
                diagnostics: Vec::new(),
            }),
            Ok(Outcome::Confabulated(inserted)) => {
                let vis = render::vi_views(self.session.engine(), &inserted);
                self.emit(&render::ConfabulateResponse { inserted, vis })
            }
            Ok(Outcome::Cloze { candidates, .. }) | Ok(Outcome::Hls(candidates)) => {
                self.emit(&render::candidates(&candidates))
            }
            Ok(Outcome::Dumped(path)) => self.emit(&json!({ "saved": path })),
            Err(e) => {
                let e = ApiError::from_line(self.line, e);
                self.emit(&e)
            }
        }
    }
}
