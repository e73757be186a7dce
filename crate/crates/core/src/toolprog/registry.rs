use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use super::Value;
use crate::raster::{Raster, ToolId, DEFAULT_BLUR_RADIUS, DEFAULT_BRIGHTNESS, DEFAULT_CONTRAST};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    Int,
    /// Accepts ints too.
    Float,
    /// Pixel coordinate: an int, or a float that is rounded; four floats in
    /// `[0, 1]` are read as fractions of the image size.
    Coord,
    Str,
}

impl ArgKind {
    fn name(self) -> &'static str {
        match self {
            ArgKind::Int => "int",
            ArgKind::Float => "float",
            ArgKind::Coord => "int",
            ArgKind::Str => "string",
        }
    }

    fn accepts(self, v: &Value) -> bool {
        matches!(
            (self, v),
            (ArgKind::Int, Value::Int(_))
                | (ArgKind::Float | ArgKind::Coord, Value::Int(_) | Value::Float(_))
                | (ArgKind::Str, Value::Str(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArgSpec {
    pub name: String,
    pub kind: ArgKind,
    pub required: bool,
    pub default: Option<Value>,
}

impl ArgSpec {
    pub fn required(name: &str, kind: ArgKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
            required: true,
            default: None,
        }
    }

    pub fn optional(name: &str, kind: ArgKind, default: Value) -> Self {
        Self {
            name: name.to_string(),
            kind,
            required: false,
            default: Some(default),
        }
    }
}

/// Arguments after schema checking, with defaults filled in.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundArgs(BTreeMap<String, Value>);

impl BoundArgs {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(name)
    }

    pub fn f64(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(Value::as_f64)
    }

    pub fn int(&self, name: &str) -> Option<i64> {
        match self.get(name) {
            Some(Value::Int(i)) => Some(*i),
            _ => None,
        }
    }

    pub fn str(&self, name: &str) -> Option<&str> {
        match self.get(name) {
            Some(Value::Str(s)) => Some(s),
            _ => None,
        }
    }
}

/// Implementation of a caller-registered tool. An `Err` string becomes a
/// runtime error in the execution log.
pub type CustomToolFn = Arc<dyn Fn(&Raster, &BoundArgs) -> Result<Raster, String> + Send + Sync>;

#[derive(Clone)]
pub struct ToolSpec {
    pub id: ToolId,
    pub args: Vec<ArgSpec>,
    pub doc: String,
    pub(crate) custom: Option<CustomToolFn>,
}

impl std::fmt::Debug for ToolSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ToolSpec")
            .field("id", &self.id)
            .field("args", &self.args)
            .field("doc", &self.doc)
            .finish_non_exhaustive()
    }
}

impl ToolSpec {
    /// Checks `args` against the schema. Errors are stable messages prefixed
    /// with the tool name.
    pub fn bind(&self, args: &[(String, Value)]) -> Result<BoundArgs, String> {
        let tool = self.id.name();
        let mut bound = BTreeMap::new();
        for (name, value) in args {
            let Some(spec) = self.args.iter().find(|a| a.name == *name) else {
                return Err(format!("{tool}: unexpected argument '{name}'"));
            };
            if !spec.kind.accepts(value) {
                return Err(format!(
                    "{tool}: argument '{name}' expects {}, got {}",
                    spec.kind.name(),
                    value.type_name()
                ));
            }
            bound.insert(name.clone(), value.clone());
        }
        for spec in &self.args {
            if bound.contains_key(&spec.name) {
                continue;
            }
            match &spec.default {
                Some(v) => {
                    bound.insert(spec.name.clone(), v.clone());
                }
                None => return Err(format!("{tool}: missing required argument '{}'", spec.name)),
            }
        }
        Ok(BoundArgs(bound))
    }

    /// One-line signature plus doc, e.g. `crop(x0: int, y0: int, ...) - ...`.
    pub fn signature(&self) -> String {
        let mut s = format!("{}(", self.id);
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            write!(s, "{}: {}", a.name, a.kind.name()).unwrap();
            if let Some(d) = &a.default {
                s.push_str(" = ");
                match d {
                    Value::Int(i) => write!(s, "{i}").unwrap(),
                    Value::Float(f) => write!(s, "{f:?}").unwrap(),
                    Value::Str(v) => write!(s, "{v:?}").unwrap(),
                }
            }
        }
        s.push(')');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("tool '{0}' is already registered")]
pub struct DuplicateTool(pub String);

/// The tools a program may call, in stable registration order.
#[derive(Debug, Clone)]
pub struct Registry {
    tools: Vec<ToolSpec>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Registry {
    pub fn builtin() -> Self {
        use ArgKind::*;
        let spec = |id: ToolId, args: Vec<ArgSpec>, doc: &str| ToolSpec {
            id,
            args,
            doc: doc.to_string(),
            custom: None,
        };
        let tools = vec![
            spec(ToolId::Rotate90, vec![], "rotate the image 90 degrees clockwise"),
            spec(ToolId::Rotate180, vec![], "rotate the image 180 degrees"),
            spec(ToolId::Rotate270, vec![], "rotate the image 270 degrees clockwise (90 counter-clockwise)"),
            spec(ToolId::FlipHorizontal, vec![], "mirror the image left-to-right"),
            spec(ToolId::FlipVertical, vec![], "mirror the image top-to-bottom"),
            spec(
                ToolId::Crop,
                vec![
                    ArgSpec::required("x0", Coord),
                    ArgSpec::required("y0", Coord),
                    ArgSpec::required("x1", Coord),
                    ArgSpec::required("y1", Coord),
                ],
                "keep the half-open pixel box [x0,x1)x[y0,y1); four fractions in [0,1] are relative",
            ),
            spec(
                ToolId::Brightness,
                vec![ArgSpec::optional("factor", Float, Value::Float(DEFAULT_BRIGHTNESS))],
                "multiply all channels by factor (> 0)",
            ),
            spec(
                ToolId::Contrast,
                vec![ArgSpec::optional("factor", Float, Value::Float(DEFAULT_CONTRAST))],
                "scale channel distance from mid-gray by factor (> 0)",
            ),
            spec(ToolId::Grayscale, vec![], "convert to luma gray"),
            spec(
                ToolId::Blur,
                vec![ArgSpec::optional("radius", Int, Value::Int(DEFAULT_BLUR_RADIUS as i64))],
                "box blur with the given integer radius (>= 1)",
            ),
            spec(ToolId::Sharpen, vec![], "unsharp mask against a radius-1 blur"),
            spec(ToolId::EdgeDetect, vec![], "Sobel edge magnitude"),
        ];
        Self { tools }
    }

    /// Adds a caller-defined tool. Its category is always enhancement.
    pub fn register(
        &mut self,
        name: &str,
        args: Vec<ArgSpec>,
        doc: &str,
        imp: CustomToolFn,
    ) -> Result<(), DuplicateTool> {
        let canonical = name.replace('_', "-");
        if self.lookup(&canonical).is_some() {
            return Err(DuplicateTool(canonical));
        }
        self.tools.push(ToolSpec {
            id: ToolId::Custom(canonical),
            args,
            doc: doc.to_string(),
            custom: Some(imp),
        });
        Ok(())
    }

    pub fn lookup(&self, name: &str) -> Option<&ToolSpec> {
        let canonical = name.replace('_', "-");
        self.tools.iter().find(|t| t.id.name() == canonical)
    }

    pub fn tools(&self) -> &[ToolSpec] {
        &self.tools
    }

    pub fn names(&self) -> Vec<&str> {
        self.tools.iter().map(|t| t.id.name()).collect()
    }

    /// Human-readable tool list shown to agents at reset.
    pub fn doc(&self) -> String {
        let mut out = String::from("Available tools:\n");
        for t in &self.tools {
            writeln!(out, "  {} - {}", t.signature(), t.doc).unwrap();
        }
        out
    }
}
