use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{parse, ParseError, Registry, Span, ToolCall, ToolProgram, Value};
use crate::raster::{enhance, BBox, EnhanceOp, Raster, ToolId};

/// Largest blur radius the interpreter accepts.
pub const MAX_BLUR_RADIUS: i64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CropMode {
    /// Out-of-range coordinates are clamped to the image; only an empty
    /// result is an error.
    #[default]
    Clip,
    /// Any coordinate outside the image is a runtime error.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExecErrorKind {
    ParseError,
    UnknownTool,
    BadArgs,
    RuntimeError,
}

impl std::fmt::Display for ExecErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExecErrorKind::ParseError => "ParseError",
            ExecErrorKind::UnknownTool => "UnknownTool",
            ExecErrorKind::BadArgs => "BadArgs",
            ExecErrorKind::RuntimeError => "RuntimeError",
        })
    }
}

/// A call that ran to completion. `crop` is the box actually cut, in the
/// pixel coordinates of that call's input image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedTool {
    pub tool: ToolId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<BBox>,
}

impl AppliedTool {
    pub fn new(tool: ToolId) -> Self {
        Self { tool, crop: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecFailure {
    pub kind: ExecErrorKind,
    pub message: String,
    pub span: Span,
    /// Calls that completed before the failing one. Their effect is discarded.
    pub applied_prefix: Vec<AppliedTool>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExecOutcome {
    Success {
        result: Raster,
        applied: Vec<AppliedTool>,
        log: String,
    },
    Failure(ExecFailure),
}

impl ExecOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, ExecOutcome::Success { .. })
    }

    /// Tools whose effect was kept (empty on failure).
    pub fn applied(&self) -> &[AppliedTool] {
        match self {
            ExecOutcome::Success { applied, .. } => applied,
            ExecOutcome::Failure(_) => &[],
        }
    }

    pub fn result(&self) -> Option<&Raster> {
        match self {
            ExecOutcome::Success { result, .. } => Some(result),
            ExecOutcome::Failure(_) => None,
        }
    }

    /// The text fed back to the agent:
    /// `EXEC OK applied=[a, b]` or `EXEC ERROR <kind>: <message> at <line>:<col>`.
    pub fn feedback(&self) -> String {
        match self {
            ExecOutcome::Success { applied, .. } => format_ok(applied),
            ExecOutcome::Failure(f) => format_error(f.kind, &f.message, f.span.line, f.span.col),
        }
    }
}

pub(crate) fn format_ok(applied: &[AppliedTool]) -> String {
    let names: Vec<&str> = applied.iter().map(|a| a.tool.name()).collect();
    format!("EXEC OK applied=[{}]", names.join(", "))
}

pub(crate) fn format_error(kind: ExecErrorKind, message: &str, line: usize, col: usize) -> String {
    format!("EXEC ERROR {kind}: {message} at {line}:{col}")
}

impl From<ParseError> for ExecFailure {
    fn from(e: ParseError) -> Self {
        ExecFailure {
            kind: ExecErrorKind::ParseError,
            span: e.span(),
            message: e.message,
            applied_prefix: Vec::new(),
        }
    }
}

/// Runs programs against a registry. Cheap to clone; holds no mutable state.
#[derive(Debug, Clone)]
pub struct Interpreter {
    registry: Arc<Registry>,
    crop_mode: CropMode,
}

impl Default for Interpreter {
    fn default() -> Self {
        Self::new(Arc::new(Registry::builtin()))
    }
}

impl Interpreter {
    pub fn new(registry: Arc<Registry>) -> Self {
        Self {
            registry,
            crop_mode: CropMode::Clip,
        }
    }

    pub fn with_crop_mode(mut self, mode: CropMode) -> Self {
        self.crop_mode = mode;
        self
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    /// Parse then execute; syntax errors come back as `ParseError` failures.
    pub fn run(&self, source: &str, img: &Raster) -> ExecOutcome {
        match parse(source) {
            Ok(program) => self.execute(&program, img),
            Err(e) => ExecOutcome::Failure(e.into()),
        }
    }

    /// Applies the calls left to right. Stops at the first failure.
    pub fn execute(&self, program: &ToolProgram, img: &Raster) -> ExecOutcome {
        let mut current: Option<Raster> = None;
        let mut applied = Vec::new();
        let mut log = String::new();
        for call in program.calls() {
            let input = current.as_ref().unwrap_or(img);
            match self.call(call, input) {
                Ok((out, done)) => {
                    match done.crop {
                        Some(b) => writeln!(
                            log,
                            "{}: box ({},{},{},{}) {}x{} -> {}x{}",
                            done.tool, b.x0, b.y0, b.x1, b.y1, input.width(), input.height(), out.width(), out.height()
                        ),
                        None => writeln!(
                            log,
                            "{}: {}x{} -> {}x{}",
                            done.tool,
                            input.width(),
                            input.height(),
                            out.width(),
                            out.height()
                        ),
                    }
                    .unwrap();
                    applied.push(done);
                    current = Some(out);
                }
                Err((kind, message)) => {
                    return ExecOutcome::Failure(ExecFailure {
                        kind,
                        message,
                        span: call.span,
                        applied_prefix: applied,
                    })
                }
            }
        }
        ExecOutcome::Success {
            result: current.unwrap_or_else(|| img.clone()),
            applied,
            log,
        }
    }

    fn call(&self, call: &ToolCall, img: &Raster) -> Result<(Raster, AppliedTool), (ExecErrorKind, String)> {
        let Some(spec) = self.registry.lookup(&call.name) else {
            return Err((
                ExecErrorKind::UnknownTool,
                format!(
                    "unknown tool '{}'; registered tools: {}",
                    call.name,
                    self.registry.names().join(", ")
                ),
            ));
        };
        let args = spec.bind(&call.args).map_err(|m| (ExecErrorKind::BadArgs, m))?;
        let tool = spec.id.clone();
        let bad_args = |m: String| (ExecErrorKind::BadArgs, m);
        let out = match &tool {
            ToolId::Crop => {
                let (x0, y0, x1, y1) = crop_coords(&call.args, img);
                let (out, used) = self.crop(img, x0, y0, x1, y1)?;
                return Ok((out, AppliedTool { tool, crop: Some(used) }));
            }
            ToolId::Custom(_) => {
                let imp = spec.custom.as_ref().expect("custom tools carry an implementation");
                imp(img, &args).map_err(|m| (ExecErrorKind::RuntimeError, format!("{tool}: {m}")))?
            }
            t if t.is_orientation() => {
                let kind = t.transform().expect("orientation tool");
                crate::raster::apply_transform(img, kind)
            }
            _ => {
                let op = match tool {
                    ToolId::Brightness => EnhanceOp::Brightness {
                        factor: args.f64("factor").expect("bound"),
                    },
                    ToolId::Contrast => EnhanceOp::Contrast {
                        factor: args.f64("factor").expect("bound"),
                    },
                    ToolId::Grayscale => EnhanceOp::Grayscale,
                    ToolId::Blur => {
                        let r = args.int("radius").expect("bound");
                        if !(1..=MAX_BLUR_RADIUS).contains(&r) {
                            return Err(bad_args(format!(
                                "blur: radius must be an integer between 1 and {MAX_BLUR_RADIUS}, got {r}"
                            )));
                        }
                        EnhanceOp::Blur { radius: r as u32 }
                    }
                    ToolId::Sharpen => EnhanceOp::Sharpen,
                    ToolId::EdgeDetect => EnhanceOp::EdgeDetect,
                    _ => unreachable!("every builtin is handled"),
                };
                enhance(img, &op).map_err(|e| bad_args(e.to_string()))?
            }
        };
        Ok((out, AppliedTool::new(tool)))
    }

    fn crop(
        &self,
        img: &Raster,
        x0: i64,
        y0: i64,
        x1: i64,
        y1: i64,
    ) -> Result<(Raster, BBox), (ExecErrorKind, String)> {
        let runtime = |m: String| (ExecErrorKind::RuntimeError, m);
        let (w, h) = img.dims();
        match self.crop_mode {
            CropMode::Clip => img.crop_clipped(x0, y0, x1, y1).map_err(|_| {
                runtime(format!("crop: box ({x0},{y0},{x1},{y1}) is empty after clipping to {w}x{h}"))
            }),
            CropMode::Strict => {
                if x0 >= x1 || y0 >= y1 {
                    return Err(runtime(format!(
                        "crop: invalid box ({x0},{y0},{x1},{y1}): need x0 < x1 and y0 < y1"
                    )));
                }
                if x0 < 0 || y0 < 0 || x1 > w as i64 || y1 > h as i64 {
                    return Err(runtime(format!(
                        "crop: box ({x0},{y0},{x1},{y1}) exceeds image bounds {w}x{h}"
                    )));
                }
                let b = BBox::new(x0 as u32, y0 as u32, x1 as u32, y1 as u32).expect("checked");
                Ok((img.crop(b).expect("checked"), b))
            }
        }
    }
}

/// Crop coordinates in pixels. Four floats within `[0, 1]` are fractions of
/// the image size; otherwise floats are rounded half away from zero.
fn crop_coords(args: &[(String, Value)], img: &Raster) -> (i64, i64, i64, i64) {
    let get = |n: &str| args.iter().find(|(k, _)| k == n).map(|(_, v)| v).expect("bound");
    let vals = [get("x0"), get("y0"), get("x1"), get("y1")];
    let relative = vals
        .iter()
        .all(|v| matches!(v, Value::Float(f) if (0.0..=1.0).contains(f)));
    let dims = [img.width(), img.height(), img.width(), img.height()];
    let mut out = [0i64; 4];
    for i in 0..4 {
        out[i] = match *vals[i] {
            Value::Int(v) => v,
            Value::Float(f) if relative => (f * dims[i] as f64).round() as i64,
            Value::Float(f) => f.round() as i64,
            Value::Str(_) => unreachable!("schema admits numbers only"),
        };
    }
    (out[0], out[1], out[2], out[3])
}
