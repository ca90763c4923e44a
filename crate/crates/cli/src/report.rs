//! Ordered key/value reports rendered as text or as a JSON-like object.

use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    #[value(name = "json-like")]
    JsonLike,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Val {
    Str(String),
    Int(usize),
    Bool(bool),
    List(Vec<String>),
    /// Multi-line text such as a tree dump.
    Block(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    fields: Vec<(&'static str, Val)>,
}

impl Report {
    pub fn new() -> Report {
        Report::default()
    }

    pub fn str(mut self, key: &'static str, v: impl Into<String>) -> Report {
        self.fields.push((key, Val::Str(v.into())));
        self
    }

    pub fn int(mut self, key: &'static str, v: usize) -> Report {
        self.fields.push((key, Val::Int(v)));
        self
    }

    pub fn flag(mut self, key: &'static str, v: bool) -> Report {
        self.fields.push((key, Val::Bool(v)));
        self
    }

    pub fn list<I, S>(mut self, key: &'static str, items: I) -> Report
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        self.fields
            .push((key, Val::List(items.into_iter().map(|s| s.to_string()).collect())));
        self
    }

    pub fn block(mut self, key: &'static str, text: impl Into<String>) -> Report {
        self.fields.push((key, Val::Block(text.into())));
        self
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.text(),
            Format::JsonLike => self.json(),
        }
    }

    fn text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.fields {
            match v {
                Val::Str(s) => writeln!(out, "{k}: {s}"),
                Val::Int(n) => writeln!(out, "{k}: {n}"),
                Val::Bool(b) => writeln!(out, "{k}: {}", if *b { "yes" } else { "no" }),
                Val::List(items) if items.is_empty() => writeln!(out, "{k}: (none)"),
                Val::List(items) => {
                    let _ = writeln!(out, "{k}:");
                    items.iter().try_for_each(|i| writeln!(out, "  {i}"))
                }
                Val::Block(text) => {
                    let _ = writeln!(out, "{k}:");
                    text.lines().try_for_each(|l| writeln!(out, "  {l}"))
                }
            }
            .expect("writing to a string");
        }
        out
    }

    fn json(&self) -> String {
        let mut out = String::from("{\n");
        for (i, (k, v)) in self.fields.iter().enumerate() {
            let value = match v {
                Val::Str(s) | Val::Block(s) => quote(s),
                Val::Int(n) => n.to_string(),
                Val::Bool(b) => b.to_string(),
                Val::List(items) if items.is_empty() => "[]".to_string(),
                Val::List(items) => {
                    let inner: Vec<String> = items.iter().map(|s| format!("    {}", quote(s))).collect();
                    format!("[\n{}\n  ]", inner.join(",\n"))
                }
            };
            let comma = if i + 1 < self.fields.len() { "," } else { "" };
            let _ = writeln!(out, "  {}: {value}{comma}", quote(k));
        }
        out.push_str("}\n");
        out
    }
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
