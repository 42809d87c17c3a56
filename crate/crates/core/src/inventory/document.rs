//! Indentation-based configuration documents.
//!
//! The syntax is the one used by the testbed inventory files:
//!
//! ```text
//! - sierra_ue
//!     - plmn: "00105"
//!     - foxconn01:
//!           distance: close
//!           avg_rsrp_dBm: -75
//! ```
//!
//! Every non-blank, non-comment line is one node: an optional `- ` list
//! marker, a key, and an optional `: value`. Lines indented deeper than the
//! preceding node become its children. Siblings must share one indentation
//! column. Values are either bare text (rest of the line) or a double-quoted
//! string with `\"` and `\\` escapes. Tabs are not allowed in indentation.

use super::ConfigError;

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub key: String,
    pub value: Option<String>,
    pub children: Vec<Node>,
    /// Written with a leading `- ` marker.
    pub dashed: bool,
    /// Value was (or should be rendered as) a quoted string.
    pub quoted: bool,
    /// 1-based source line, 0 for synthesized nodes.
    pub line: usize,
}

impl Node {
    pub fn leaf(key: impl Into<String>, value: impl Into<String>) -> Self {
        Node {
            key: key.into(),
            value: Some(value.into()),
            children: Vec::new(),
            dashed: false,
            quoted: false,
            line: 0,
        }
    }

    pub fn branch(key: impl Into<String>, children: Vec<Node>) -> Self {
        Node {
            key: key.into(),
            value: None,
            children,
            dashed: false,
            quoted: false,
            line: 0,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }

    pub fn quoted(mut self) -> Self {
        self.quoted = true;
        self
    }

    pub fn parse_err(&self, msg: impl Into<String>) -> ConfigError {
        ConfigError::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    /// The scalar value, or a parse error naming the key.
    pub fn scalar(&self) -> Result<&str, ConfigError> {
        if !self.children.is_empty() {
            return Err(self.parse_err(format!("`{}` must be a scalar, found a block", self.key)));
        }
        self.value
            .as_deref()
            .ok_or_else(|| self.parse_err(format!("`{}` is missing a value", self.key)))
    }

    pub fn number(&self) -> Result<f64, ConfigError> {
        let raw = self.scalar()?;
        let v: f64 = raw
            .parse()
            .map_err(|_| self.parse_err(format!("`{}`: expected a number, found `{raw}`", self.key)))?;
        if !v.is_finite() {
            return Err(self.parse_err(format!("`{}`: number must be finite", self.key)));
        }
        Ok(v)
    }

    pub fn unsigned(&self) -> Result<u64, ConfigError> {
        let raw = self.scalar()?;
        raw.parse().map_err(|_| {
            self.parse_err(format!(
                "`{}`: expected an unsigned integer, found `{raw}`",
                self.key
            ))
        })
    }

    pub fn boolean(&self) -> Result<bool, ConfigError> {
        match self.scalar()? {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(self.parse_err(format!(
                "`{}`: expected true or false, found `{other}`",
                self.key
            ))),
        }
    }

    /// A node that must carry children and no value.
    pub fn block(&self) -> Result<&[Node], ConfigError> {
        if self.value.is_some() {
            return Err(self.parse_err(format!("`{}` must be a block, found a value", self.key)));
        }
        Ok(&self.children)
    }
}

struct RawLine {
    no: usize,
    indent: usize,
    dashed: bool,
    key: String,
    value: Option<String>,
    quoted: bool,
}

pub fn parse(text: &str) -> Result<Vec<Node>, ConfigError> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if let Some(l) = lex_line(i + 1, raw)? {
            lines.push(l);
        }
    }
    if lines.is_empty() {
        return Ok(Vec::new());
    }
    let mut pos = 0;
    let first_indent = lines[0].indent;
    let nodes = parse_block(&lines, &mut pos, first_indent)?;
    if pos < lines.len() {
        return Err(ConfigError::Parse {
            line: lines[pos].no,
            msg: "indentation does not match any enclosing block".into(),
        });
    }
    Ok(nodes)
}

fn parse_block(lines: &[RawLine], pos: &mut usize, indent: usize) -> Result<Vec<Node>, ConfigError> {
    let mut out = Vec::new();
    while *pos < lines.len() && lines[*pos].indent == indent {
        let l = &lines[*pos];
        *pos += 1;
        let mut node = Node {
            key: l.key.clone(),
            value: l.value.clone(),
            children: Vec::new(),
            dashed: l.dashed,
            quoted: l.quoted,
            line: l.no,
        };
        if *pos < lines.len() && lines[*pos].indent > indent {
            let child_indent = lines[*pos].indent;
            node.children = parse_block(lines, pos, child_indent)?;
        }
        out.push(node);
    }
    if *pos < lines.len() && lines[*pos].indent > indent {
        return Err(ConfigError::Parse {
            line: lines[*pos].no,
            msg: "unexpected indentation".into(),
        });
    }
    Ok(out)
}

fn lex_line(no: usize, raw: &str) -> Result<Option<RawLine>, ConfigError> {
    let raw = raw.trim_end_matches('\r');
    let content = raw.trim_start_matches(' ');
    let indent = raw.len() - content.len();
    let trimmed = content.trim_end();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let err = |msg: &str| ConfigError::Parse {
        line: no,
        msg: msg.to_string(),
    };
    if content.starts_with('\t') {
        return Err(err("tabs are not allowed in indentation"));
    }
    let (dashed, body) = if trimmed == "-" {
        return Err(err("list marker without a key"));
    } else if let Some(rest) = trimmed.strip_prefix("- ") {
        (true, rest.trim_start())
    } else {
        (false, trimmed)
    };
    let (key, value) = match body.find(':') {
        Some(i) => {
            let v = body[i + 1..].trim();
            (body[..i].trim_end(), if v.is_empty() { None } else { Some(v) })
        }
        None => (body, None),
    };
    if key.is_empty() {
        return Err(err("empty key"));
    }
    if !key
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
    {
        return Err(err(&format!("invalid key `{key}`")));
    }
    let (value, quoted) = match value {
        Some(v) if v.starts_with('"') => (Some(unquote(v).map_err(|m| err(&m))?), true),
        Some(v) => (Some(v.to_string()), false),
        None => (None, false),
    };
    Ok(Some(RawLine {
        no,
        indent,
        dashed,
        key: key.to_string(),
        value,
        quoted,
    }))
}

fn unquote(v: &str) -> Result<String, String> {
    let inner = &v[1..];
    let mut out = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '"' => {
                if chars.as_str().trim().is_empty() {
                    return Ok(out);
                }
                return Err("unexpected text after closing quote".into());
            }
            '\\' => match chars.next() {
                Some('"') => out.push('"'),
                Some('\\') => out.push('\\'),
                Some(other) => return Err(format!("unknown escape `\\{other}`")),
                None => break,
            },
            c => out.push(c),
        }
    }
    Err("unterminated quoted string".into())
}

fn needs_quotes(v: &str) -> bool {
    v.is_empty() || v.starts_with('"') || v.starts_with('#') || v != v.trim()
}

/// Renders nodes back to text with four-space indentation per level.
pub fn render(nodes: &[Node]) -> String {
    let mut out = String::new();
    render_into(&mut out, nodes, 0);
    out
}

fn render_into(out: &mut String, nodes: &[Node], indent: usize) {
    for n in nodes {
        out.push_str(&" ".repeat(indent));
        if n.dashed {
            out.push_str("- ");
        }
        out.push_str(&n.key);
        match &n.value {
            Some(v) if n.quoted || needs_quotes(v) => {
                let esc = v.replace('\\', "\\\\").replace('"', "\\\"");
                out.push_str(&format!(": \"{esc}\""));
            }
            Some(v) => {
                out.push_str(": ");
                out.push_str(v);
            }
            None if !n.children.is_empty() => out.push(':'),
            None => {}
        }
        out.push('\n');
        render_into(out, &n.children, indent + 4);
    }
}
