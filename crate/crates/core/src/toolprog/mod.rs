//! The tool-program language an agent writes in its `<code>` block.
//!
//! A program is a pipeline of calls, separated by `|` or newlines:
//!
//! ```text
//! crop(x0=10, y0=20, x1=50, y1=80) | grayscale()
//! ```
//!
//! Arguments are always named and are integers, floats or double-quoted
//! strings. There are no variables, loops or conditionals; every program is a
//! straight-line sequence of registered image operations.

mod exec;
mod parse;
mod registry;

pub use exec::{AppliedTool, CropMode, ExecErrorKind, ExecFailure, ExecOutcome, Interpreter};
pub use parse::{parse, ParseError};
pub use registry::{ArgKind, ArgSpec, BoundArgs, CustomToolFn, DuplicateTool, Registry, ToolSpec};
pub(crate) use exec::{format_error as exec_format_error, format_ok as exec_format_ok};

use std::fmt::Write as _;

/// A literal argument value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Str(String),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "string",
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Int(i) => Some(i as f64),
            Value::Float(f) => Some(f),
            Value::Str(_) => None,
        }
    }

    fn render(&self, out: &mut String) {
        match self {
            Value::Int(i) => write!(out, "{i}").unwrap(),
            // Debug formatting is the shortest text that parses back to the same f64
            Value::Float(f) => write!(out, "{f:?}").unwrap(),
            Value::Str(s) => {
                out.push('"');
                for c in s.chars() {
                    match c {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        '\t' => out.push_str("\\t"),
                        c => out.push(c),
                    }
                }
                out.push('"');
            }
        }
    }
}

/// Location of a call or token in the program source. Lines and columns are
/// 1-based; columns count characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub offset: usize,
    pub len: usize,
    pub line: usize,
    pub col: usize,
}

/// One call in a program. `name` is stored in canonical form (underscores
/// folded to hyphens); whether it names a registered tool is decided at
/// execution time.
#[derive(Debug, Clone)]
pub struct ToolCall {
    pub name: String,
    pub args: Vec<(String, Value)>,
    pub span: Span,
}

impl ToolCall {
    pub fn new(name: impl Into<String>, args: Vec<(String, Value)>) -> Self {
        Self {
            name: name.into().replace('_', "-"),
            args,
            span: Span::default(),
        }
    }

    pub fn arg(&self, name: &str) -> Option<&Value> {
        self.args.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

// Spans are provenance, not meaning: two calls are equal when they say the same thing.
impl PartialEq for ToolCall {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.args == other.args
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToolProgram {
    calls: Vec<ToolCall>,
}

impl ToolProgram {
    /// Returns `None` for an empty call list.
    pub fn new(calls: Vec<ToolCall>) -> Option<Self> {
        (!calls.is_empty()).then_some(Self { calls })
    }

    pub fn calls(&self) -> &[ToolCall] {
        &self.calls
    }

    /// Canonical source text: `name(k=v, k=v) | name()`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, call) in self.calls.iter().enumerate() {
            if i > 0 {
                out.push_str(" | ");
            }
            out.push_str(&call.name);
            out.push('(');
            for (j, (name, value)) in call.args.iter().enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                out.push_str(name);
                out.push('=');
                value.render(&mut out);
            }
            out.push(')');
        }
        out
    }
}

impl std::fmt::Display for ToolProgram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.render())
    }
}

impl std::str::FromStr for ToolProgram {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
