//! Deterministic output plumbing: primary output (JSON or CSV) and the JSON
//! summary either go to files or to stdout, with floats printed in Rust's
//! shortest round-trip form so reruns are byte-identical.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

pub struct Sink<'a> {
    out: Option<&'a Path>,
    summary: Option<&'a Path>,
}

impl<'a> Sink<'a> {
    pub fn new(out: Option<&'a Path>, summary: Option<&'a Path>) -> Self {
        Self { out, summary }
    }

    pub fn write_primary(&self, content: &str) -> Result<()> {
        match self.out {
            Some(path) => {
                fs::write(path, content).with_context(|| format!("writing {}", path.display()))
            }
            None => {
                print!("{content}");
                Ok(())
            }
        }
    }

    pub fn write_json<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_primary(&text)
    }

    pub fn write_summary<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        match self.summary {
            Some(path) => {
                fs::write(path, &text).with_context(|| format!("writing {}", path.display()))
            }
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

/// CSV rows with a header; fields are plain Display values.
pub struct Csv {
    lines: Vec<String>,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        Self {
            lines: vec![header.to_string()],
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.lines.push(fields.join(","));
    }

    pub fn finish(self) -> String {
        let mut text = self.lines.join("\n");
        text.push('\n');
        text
    }
}

/// Shortest round-trip representation of a float.
pub fn fmt(v: f64) -> String {
    format!("{v}")
}
