use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::TransformKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ToolCategory {
    Orientation,
    Crop,
    Enhancement,
}

/// Canonical tool identity. The first six variants are the must-use
/// vocabulary; the enhancement tools and any caller-registered tools are
/// optional.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ToolId {
    Rotate90,
    Rotate180,
    Rotate270,
    FlipHorizontal,
    FlipVertical,
    Crop,
    Brightness,
    Contrast,
    Grayscale,
    Blur,
    Sharpen,
    EdgeDetect,
    /// A caller-registered tool. Always in the enhancement category.
    Custom(String),
}

impl ToolId {
    pub const BUILTIN: [ToolId; 12] = [
        ToolId::Rotate90,
        ToolId::Rotate180,
        ToolId::Rotate270,
        ToolId::FlipHorizontal,
        ToolId::FlipVertical,
        ToolId::Crop,
        ToolId::Brightness,
        ToolId::Contrast,
        ToolId::Grayscale,
        ToolId::Blur,
        ToolId::Sharpen,
        ToolId::EdgeDetect,
    ];

    pub const ORIENTATION: [ToolId; 5] = [
        ToolId::Rotate90,
        ToolId::Rotate180,
        ToolId::Rotate270,
        ToolId::FlipHorizontal,
        ToolId::FlipVertical,
    ];

    pub fn name(&self) -> &str {
        match self {
            ToolId::Rotate90 => "rotate90",
            ToolId::Rotate180 => "rotate180",
            ToolId::Rotate270 => "rotate270",
            ToolId::FlipHorizontal => "flip-horizontal",
            ToolId::FlipVertical => "flip-vertical",
            ToolId::Crop => "crop",
            ToolId::Brightness => "brightness",
            ToolId::Contrast => "contrast",
            ToolId::Grayscale => "grayscale",
            ToolId::Blur => "blur",
            ToolId::Sharpen => "sharpen",
            ToolId::EdgeDetect => "edge-detect",
            ToolId::Custom(name) => name,
        }
    }

    /// Resolves a builtin by canonical name or underscore alias.
    pub fn builtin(name: &str) -> Option<ToolId> {
        let canonical = name.replace('_', "-");
        ToolId::BUILTIN.into_iter().find(|t| t.name() == canonical)
    }

    /// Builtin lookup, falling back to a custom id (used when decoding records).
    pub fn from_name(name: &str) -> ToolId {
        ToolId::builtin(name).unwrap_or_else(|| ToolId::Custom(name.replace('_', "-")))
    }

    pub fn category(&self) -> ToolCategory {
        match self {
            ToolId::Rotate90
            | ToolId::Rotate180
            | ToolId::Rotate270
            | ToolId::FlipHorizontal
            | ToolId::FlipVertical => ToolCategory::Orientation,
            ToolId::Crop => ToolCategory::Crop,
            _ => ToolCategory::Enhancement,
        }
    }

    pub fn is_orientation(&self) -> bool {
        self.category() == ToolCategory::Orientation
    }

    /// Member of the must-use vocabulary (orientation tools and crop).
    pub fn is_must_use(&self) -> bool {
        self.category() != ToolCategory::Enhancement
    }

    pub fn transform(&self) -> Option<TransformKind> {
        match self {
            ToolId::Rotate90 => Some(TransformKind::Rot90),
            ToolId::Rotate180 => Some(TransformKind::Rot180),
            ToolId::Rotate270 => Some(TransformKind::Rot270),
            ToolId::FlipHorizontal => Some(TransformKind::FlipH),
            ToolId::FlipVertical => Some(TransformKind::FlipV),
            _ => None,
        }
    }
}

impl std::fmt::Display for ToolId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for ToolId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ToolId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        Ok(ToolId::from_name(&name))
    }
}
