//! The controlled pidgin story language.
//!
//! ```text
//! sentence := np '/' vp ('/' np)? '.'
//! np       := ('a' | 'the') word+
//! vp       := word+
//! ```
//!
//! A line consisting of `----` is a scene break and a line starting with
//! `!` is a directive. Tokens are case-insensitive.

use std::fmt;

use thiserror::Error;

use crate::dictionary::{DictError, Dictionary, Kind, Overlay};
use crate::engine::EntityId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Determiner {
    A,
    The,
}

impl Determiner {
    fn as_str(self) -> &'static str {
        match self {
            Determiner::A => "a",
            Determiner::The => "the",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NounPhrase {
    pub determiner: Determiner,
    /// The last attribute is the head noun.
    pub attributes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceAst {
    pub subject: NounPhrase,
    pub verbs: Vec<String>,
    pub object: Option<NounPhrase>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Directive {
    Confabulate { steps: usize },
    Cloze { position: usize, top: Option<usize> },
    Hls { top: usize },
    Dump { path: String },
}

impl Directive {
    pub fn name(&self) -> &'static str {
        match self {
            Directive::Confabulate { .. } => "confabulate",
            Directive::Cloze { .. } => "cloze",
            Directive::Hls { .. } => "hls",
            Directive::Dump { .. } => "dump",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Line {
    Sentence(SentenceAst),
    Directive(Directive),
    SceneBreak,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("column {column}: {message}")]
pub struct SyntaxError {
    /// 1-based column of the first offending token.
    pub column: usize,
    pub message: String,
}

impl SyntaxError {
    fn new(column: usize, message: impl Into<String>) -> Self {
        SyntaxError {
            column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Word(String),
    Slash,
    Period,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// 1-based character column.
    pub column: usize,
}

/// Splits a sentence line into words, slashes and periods.
pub fn tokenize(line: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = line.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c == '/' {
            tokens.push(Token {
                kind: TokenKind::Slash,
                column,
            });
            i += 1;
        } else if c == '.' {
            tokens.push(Token {
                kind: TokenKind::Period,
                column,
            });
            i += 1;
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '-')
            {
                i += 1;
            }
            let word: String = chars[start..i]
                .iter()
                .collect::<String>()
                .to_ascii_lowercase();
            tokens.push(Token {
                kind: TokenKind::Word(word),
                column,
            });
        } else {
            return Err(SyntaxError::new(
                column,
                format!("unexpected character `{c}`"),
            ));
        }
    }
    Ok(tokens)
}

/// Classifies and parses one line. Blank lines and comments are the
/// caller's concern and come back as syntax errors here.
pub fn parse_line(line: &str) -> Result<Line, SyntaxError> {
    let trimmed = line.trim();
    let offset = line.chars().take_while(|c| c.is_whitespace()).count();
    if trimmed == "----" {
        return Ok(Line::SceneBreak);
    }
    if let Some(rest) = trimmed.strip_prefix('!') {
        return parse_directive(rest, offset + 2).map(Line::Directive);
    }
    parse_sentence(line).map(Line::Sentence)
}

fn parse_directive(rest: &str, base_column: usize) -> Result<Directive, SyntaxError> {
    // (word, column) pairs; columns relative to the full line.
    let mut parts = Vec::new();
    let chars: Vec<char> = rest.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        parts.push((
            chars[start..i].iter().collect::<String>(),
            base_column + start,
        ));
    }
    let Some((name, name_col)) = parts.first() else {
        return Err(SyntaxError::new(base_column, "expected directive name"));
    };
    let args = &parts[1..];
    let end_col = base_column + chars.len();

    let count = |idx: usize| -> Result<usize, SyntaxError> {
        match args.get(idx) {
            Some((arg, col)) => arg.parse::<usize>().map_err(|_| {
                SyntaxError::new(
                    *col,
                    format!("expected a nonnegative integer, found `{arg}`"),
                )
            }),
            None => Err(SyntaxError::new(end_col, "missing argument")),
        }
    };
    let arity = |max: usize| -> Result<(), SyntaxError> {
        match args.get(max) {
            Some((_, col)) => Err(SyntaxError::new(*col, "too many arguments")),
            None => Ok(()),
        }
    };

    match name.to_ascii_lowercase().as_str() {
        "confabulate" => {
            arity(1)?;
            Ok(Directive::Confabulate { steps: count(0)? })
        }
        "cloze" => {
            arity(2)?;
            let position = count(0)?;
            let top = if args.len() > 1 {
                Some(count(1)?)
            } else {
                None
            };
            Ok(Directive::Cloze { position, top })
        }
        "hls" => {
            arity(1)?;
            Ok(Directive::Hls { top: count(0)? })
        }
        "dump" => {
            arity(1)?;
            match args.first() {
                Some((path, _)) => Ok(Directive::Dump { path: path.clone() }),
                None => Err(SyntaxError::new(end_col, "missing argument")),
            }
        }
        other => Err(SyntaxError::new(
            *name_col,
            format!("unknown directive `{other}`"),
        )),
    }
}

struct Cursor {
    tokens: Vec<Token>,
    pos: usize,
    end_column: usize,
}

impl Cursor {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn column(&self) -> usize {
        self.peek().map_or(self.end_column, |t| t.column)
    }

    fn words(&mut self) -> Vec<String> {
        let mut out = Vec::new();
        while let Some(Token {
            kind: TokenKind::Word(w),
            ..
        }) = self.peek()
        {
            out.push(w.clone());
            self.pos += 1;
        }
        out
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<(), SyntaxError> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(SyntaxError::new(self.column(), format!("expected {what}"))),
        }
    }

    fn noun_phrase(&mut self) -> Result<NounPhrase, SyntaxError> {
        let determiner = match self.peek() {
            Some(Token {
                kind: TokenKind::Word(w),
                ..
            }) if w == "a" => Determiner::A,
            Some(Token {
                kind: TokenKind::Word(w),
                ..
            }) if w == "the" => Determiner::The,
            _ => return Err(SyntaxError::new(self.column(), "expected determiner")),
        };
        self.pos += 1;
        let attributes = self.words();
        if attributes.is_empty() {
            return Err(SyntaxError::new(self.column(), "expected noun"));
        }
        Ok(NounPhrase {
            determiner,
            attributes,
        })
    }
}

fn parse_sentence(line: &str) -> Result<SentenceAst, SyntaxError> {
    let tokens = tokenize(line)?;
    let mut cur = Cursor {
        tokens,
        pos: 0,
        end_column: line.chars().count() + 1,
    };
    let subject = cur.noun_phrase()?;
    cur.expect(TokenKind::Slash, "`/`")?;
    let verbs = cur.words();
    if verbs.is_empty() {
        return Err(SyntaxError::new(cur.column(), "expected verb"));
    }
    let object = match cur.peek().map(|t| &t.kind) {
        Some(TokenKind::Slash) => {
            cur.pos += 1;
            Some(cur.noun_phrase()?)
        }
        _ => None,
    };
    cur.expect(TokenKind::Period, "`.`")?;
    if let Some(t) = cur.peek() {
        return Err(SyntaxError::new(t.column, "unexpected token after `.`"));
    }
    Ok(SentenceAst {
        subject,
        verbs,
        object,
    })
}

impl fmt::Display for NounPhrase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.determiner.as_str())?;
        for attr in &self.attributes {
            write!(f, " {attr}")?;
        }
        Ok(())
    }
}

impl fmt::Display for SentenceAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let subject = self.subject.to_string();
        let mut chars = subject.chars();
        if let Some(first) = chars.next() {
            write!(f, "{}{}", first.to_ascii_uppercase(), chars.as_str())?;
        }
        write!(f, " / {}", self.verbs.join(" "))?;
        if let Some(object) = &self.object {
            write!(f, " / {object}")?;
        }
        f.write_str(".")
    }
}

/// How a role of a verb-instance template is filled.
#[derive(Debug, Clone, PartialEq)]
pub enum RoleRef {
    Existing(EntityId),
    New(Overlay),
}

/// An insertion request for the engine.
#[derive(Debug, Clone, PartialEq)]
pub struct ViTemplate {
    pub verbs: Overlay,
    pub subject: RoleRef,
    pub object: Option<RoleRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Subject,
    Object,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Subject => "subject",
            Role::Object => "object",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResolveError {
    #[error("unknown word `{token}`")]
    UnknownWord { token: String, expected: Kind },
    #[error("no referent in focus for `{phrase}`")]
    NoReferent { role: Role, phrase: String },
}

/// One referable instance of the focus.
#[derive(Debug, Clone, Copy)]
pub struct Referent<'a> {
    pub id: EntityId,
    pub overlay: &'a Overlay,
    pub last_referenced_tick: u64,
}

/// Read access to the instances currently in focus.
pub trait FocusView {
    fn referents(&self) -> Vec<Referent<'_>>;
}

fn word_overlay(dict: &Dictionary, kind: Kind, words: &[String]) -> Result<Overlay, ResolveError> {
    let mut o = Overlay::empty(kind);
    for w in words {
        dict.overlay_insert(&mut o, w, 1.0).map_err(|e| match e {
            DictError::UnknownName(token) => ResolveError::UnknownWord {
                token,
                expected: kind,
            },
            _ => ResolveError::UnknownWord {
                token: w.clone(),
                expected: kind,
            },
        })?;
    }
    Ok(o)
}

fn resolve_np(
    np: &NounPhrase,
    role: Role,
    focus: &dyn FocusView,
    dict: &Dictionary,
    threshold: f64,
) -> Result<RoleRef, ResolveError> {
    let overlay = word_overlay(dict, Kind::Concept, &np.attributes)?;
    match np.determiner {
        Determiner::A => Ok(RoleRef::New(overlay)),
        Determiner::The => {
            let mut best: Option<(f64, u64, EntityId)> = None;
            for r in focus.referents() {
                let sim = dict.similarity_unchecked(r.overlay, &overlay);
                if sim < threshold {
                    continue;
                }
                let key = (sim, r.last_referenced_tick, r.id);
                let better = match best {
                    None => true,
                    Some(b) => key.0 > b.0 || (key.0 == b.0 && (key.1, key.2) > (b.1, b.2)),
                };
                if better {
                    best = Some(key);
                }
            }
            best.map(|(_, _, id)| RoleRef::Existing(id))
                .ok_or_else(|| ResolveError::NoReferent {
                    role,
                    phrase: np.to_string(),
                })
        }
    }
}

/// Turns a parsed sentence into an insertion template without touching the focus.
pub fn resolve(
    ast: &SentenceAst,
    focus: &dyn FocusView,
    dict: &Dictionary,
    reference_threshold: f64,
) -> Result<ViTemplate, ResolveError> {
    // Check every word up front so the first unknown word in source order is reported.
    let subject_words = &ast.subject.attributes;
    word_overlay(dict, Kind::Concept, subject_words)?;
    let verbs = word_overlay(dict, Kind::Verb, &ast.verbs)?;
    if let Some(object) = &ast.object {
        word_overlay(dict, Kind::Concept, &object.attributes)?;
    }
    let subject = resolve_np(
        &ast.subject,
        Role::Subject,
        focus,
        dict,
        reference_threshold,
    )?;
    let object = ast
        .object
        .as_ref()
        .map(|np| resolve_np(np, Role::Object, focus, dict, reference_threshold))
        .transpose()?;
    Ok(ViTemplate {
        verbs,
        subject,
        object,
    })
}

/// Column of the first word token equal to `word` (case-insensitive).
pub fn column_of_word(line: &str, word: &str) -> Option<usize> {
    tokenize(line).ok()?.into_iter().find_map(|t| match t.kind {
        TokenKind::Word(w) if w == word => Some(t.column),
        _ => None,
    })
}

/// Column where the noun phrase of `role` starts.
pub fn column_of_role(line: &str, role: Role) -> Option<usize> {
    let tokens = tokenize(line).ok()?;
    match role {
        Role::Subject => tokens.first().map(|t| t.column),
        Role::Object => {
            let mut slashes = 0;
            for (i, t) in tokens.iter().enumerate() {
                if t.kind == TokenKind::Slash {
                    slashes += 1;
                    if slashes == 2 {
                        return tokens.get(i + 1).map(|t| t.column);
                    }
                }
            }
            None
        }
    }
}
