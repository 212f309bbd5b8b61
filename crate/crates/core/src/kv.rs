//! Line-oriented `key = value` text format used by manifests, phantom specs
//! and pipeline configs.
//!
//! ```text
//! # comment
//! fps = 10
//! width = 320
//! [frames]
//! frames/frame_00000.pgm
//! ```
//!
//! Blank lines and lines whose first non-blank character is `#` are skipped.
//! A header line splits on its first `=`; keys are `[A-Za-z0-9_]+`. Repeating
//! a key is only allowed where the document type says so. The optional
//! `[frames]` marker ends the header; each later line is one path, kept
//! verbatim after trimming.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fmt::{Display, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

const FRAMES_MARKER: &str = "[frames]";

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

/// A parsed document. Typed getters record which keys were read so that
/// [`KvDoc::finish`] can reject unknown keys.
#[derive(Debug)]
pub struct KvDoc {
    origin: PathBuf,
    entries: Vec<Entry>,
    frames: Option<Vec<(usize, String)>>,
    used: RefCell<BTreeSet<String>>,
}

impl KvDoc {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        let mut frames: Option<Vec<(usize, String)>> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(list) = frames.as_mut() {
                list.push((line_no, line.to_string()));
                continue;
            }
            if line == FRAMES_MARKER {
                frames = Some(Vec::new());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(parse_err(origin, line_no, format!("expected `key = value`, got `{line}`")));
            };
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(parse_err(origin, line_no, format!("invalid key `{key}`")));
            }
            entries.push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line: line_no,
            });
        }
        Ok(KvDoc {
            origin: origin.to_path_buf(),
            entries,
            frames,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    pub fn origin(&self) -> &Path {
        &self.origin
    }

    /// Frame list following the `[frames]` marker, if the document has one.
    pub fn frames(&self) -> Option<&[(usize, String)]> {
        self.frames.as_deref()
    }

    fn entry(&self, key: &str) -> Result<Option<&Entry>> {
        self.used.borrow_mut().insert(key.to_string());
        let mut found = self.entries.iter().filter(|e| e.key == key);
        let first = found.next();
        if let Some(dup) = found.next() {
            return Err(parse_err(&self.origin, dup.line, format!("duplicate key `{key}`")));
        }
        Ok(first)
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.iter().any(|e| e.key == key)
    }

    /// Raw string value of a single-valued key.
    pub fn raw(&self, key: &str) -> Result<Option<&str>> {
        Ok(self.entry(key)?.map(|e| e.value.as_str()))
    }

    pub fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.entry(key)? {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|err| {
                parse_err(&self.origin, e.line, format!("bad value for `{key}`: {err}"))
            }),
        }
    }

    pub fn required<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        self.optional(key)?
            .ok_or_else(|| parse_err(&self.origin, 0, format!("missing required key `{key}`")))
    }

    pub fn or_default<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.optional(key)?.unwrap_or(default))
    }

    /// All values of a repeatable key, with their line numbers.
    pub fn all(&self, key: &str) -> Vec<(usize, &str)> {
        self.used.borrow_mut().insert(key.to_string());
        self.entries
            .iter()
            .filter(|e| e.key == key)
            .map(|e| (e.line, e.value.as_str()))
            .collect()
    }

    pub fn error_at(&self, line: usize, msg: impl Into<String>) -> Error {
        parse_err(&self.origin, line, msg.into())
    }

    /// Fails on the first key no getter asked for.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.entries.iter().find(|e| !used.contains(&e.key)) {
            Some(e) => Err(parse_err(&self.origin, e.line, format!("unknown key `{}`", e.key))),
            None => Ok(()),
        }
    }
}

fn parse_err(origin: &Path, line: usize, msg: String) -> Error {
    Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    }
}

/// Builds a document in the same grammar.
#[derive(Debug, Default)]
pub struct KvWriter {
    out: String,
}

impl KvWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn comment(&mut self, text: &str) -> &mut Self {
        for line in text.lines() {
            let _ = writeln!(self.out, "# {line}");
        }
        self
    }

    pub fn entry(&mut self, key: &str, value: impl Display) -> &mut Self {
        let _ = writeln!(self.out, "{key} = {value}");
        self
    }

    pub fn frames<I, P>(&mut self, paths: I) -> &mut Self
    where
        I: IntoIterator<Item = P>,
        P: AsRef<str>,
    {
        self.out.push_str(FRAMES_MARKER);
        self.out.push('\n');
        for p in paths {
            self.out.push_str(p.as_ref());
            self.out.push('\n');
        }
        self
    }

    pub fn finish(&self) -> String {
        self.out.clone()
    }
}
