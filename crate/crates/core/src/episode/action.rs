use serde::{Deserialize, Serialize};

/// What a turn asks the environment to do.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionKind {
    Code(String),
    Answer(String),
    /// Neither a `<code>` nor an `<answer>` block could be found.
    Malformed,
}

/// A full assistant turn. The raw text is the source of truth; everything
/// else is derived from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentAction {
    pub raw_text: String,
}

impl AgentAction {
    pub fn new(raw_text: impl Into<String>) -> Self {
        Self {
            raw_text: raw_text.into(),
        }
    }

    pub fn code(think: &str, program: &str) -> Self {
        Self::new(format!("<think>{think}</think>\n<code>{program}</code>"))
    }

    pub fn answer(think: &str, answer: &str) -> Self {
        Self::new(format!("<think>{think}</think>\n<answer>{answer}</answer>"))
    }

    /// Reasoning text, if a `<think>` block is present.
    pub fn think(&self) -> Option<&str> {
        block(&self.raw_text, "think").map(|(inner, _, _)| inner)
    }

    /// Lenient extraction used for execution: the earliest complete `<code>`
    /// or `<answer>` block wins, regardless of surrounding format.
    pub fn kind(&self) -> ActionKind {
        let code = block(&self.raw_text, "code");
        let answer = block(&self.raw_text, "answer");
        match (code, answer) {
            (Some((c, cs, _)), Some((a, as_, _))) => {
                if cs < as_ {
                    ActionKind::Code(c.to_string())
                } else {
                    ActionKind::Answer(a.to_string())
                }
            }
            (Some((c, _, _)), None) => ActionKind::Code(c.to_string()),
            (None, Some((a, _, _))) => ActionKind::Answer(a.to_string()),
            (None, None) => ActionKind::Malformed,
        }
    }

    /// Strict format check: `<think>…</think>` then exactly one `<code>` or
    /// `<answer>` block, with only whitespace around and between them.
    pub fn well_formed(&self) -> bool {
        let text = self.raw_text.trim();
        let Some(rest) = text.strip_prefix("<think>") else {
            return false;
        };
        let Some(end) = rest.find("</think>") else {
            return false;
        };
        if contains_tag(&rest[..end]) {
            return false;
        }
        let rest = rest[end + "</think>".len()..].trim_start();
        for tag in ["code", "answer"] {
            let open = format!("<{tag}>");
            let close = format!("</{tag}>");
            if let Some(body) = rest.strip_prefix(open.as_str()) {
                return match body.find(close.as_str()) {
                    Some(i) => !contains_tag(&body[..i]) && body[i + close.len()..].trim().is_empty(),
                    None => false,
                };
            }
        }
        false
    }
}

const TAGS: [&str; 6] = ["<think>", "</think>", "<code>", "</code>", "<answer>", "</answer>"];

fn contains_tag(s: &str) -> bool {
    TAGS.iter().any(|t| s.contains(t))
}

/// First `<tag>…</tag>` block: (inner text, start offset, end offset).
fn block<'a>(text: &'a str, tag: &str) -> Option<(&'a str, usize, usize)> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = text.find(open.as_str())?;
    let inner_start = start + open.len();
    let len = text[inner_start..].find(close.as_str())?;
    Some((
        &text[inner_start..inner_start + len],
        start,
        inner_start + len + close.len(),
    ))
}

/// Trim, collapse internal whitespace, casefold, and drop trailing `.,;:!?`.
pub fn normalize_answer(s: &str) -> String {
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    collapsed
        .trim_end_matches(['.', ',', ';', ':', '!', '?'])
        .trim_end()
        .to_string()
}

pub fn check_answer(pred: &str, gold: &str) -> bool {
    normalize_answer(pred) == normalize_answer(gold)
}
