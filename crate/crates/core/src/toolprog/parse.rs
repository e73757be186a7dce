use thiserror::Error;

use super::{Span, ToolCall, ToolProgram, Value};

/// Syntax error with a 1-based position and the offending token.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at {line}:{col}")]
pub struct ParseError {
    pub message: String,
    pub token: String,
    pub offset: usize,
    pub line: usize,
    pub col: usize,
}

impl ParseError {
    pub fn span(&self) -> Span {
        Span {
            offset: self.offset,
            len: self.token.len(),
            line: self.line,
            col: self.col,
        }
    }
}

/// Parses program text. Grammar:
///
/// ```text
/// program := call (sep call)*        sep: "|" or newline, surrounded by whitespace
/// call    := IDENT "(" arglist? ")"
/// arglist := arg ("," arg)*
/// arg     := IDENT "=" (INT | FLOAT | DQSTRING)
/// IDENT   := [a-z][a-z0-9_-]*
/// ```
///
/// Spaces and tabs are allowed around `(`, `)`, `,` and `=`.
pub fn parse(text: &str) -> Result<ToolProgram, ParseError> {
    let mut p = Parser { src: text, pos: 0 };
    let mut calls = Vec::new();
    p.skip_ws_and_newlines();
    if p.at_end() {
        return Err(p.error_here("empty program: expected a tool call"));
    }
    loop {
        calls.push(p.call()?);
        let sep_start = p.pos;
        let mut pipes = 0;
        let mut newlines = 0;
        while let Some(c) = p.peek() {
            match c {
                '|' => {
                    if pipes == 1 {
                        return Err(p.error_here("expected a tool call after '|'"));
                    }
                    pipes += 1;
                }
                '\n' => newlines += 1,
                c if c.is_whitespace() => {}
                _ => break,
            }
            p.bump();
        }
        if p.at_end() {
            if pipes > 0 {
                return Err(p.error_here("expected a tool call after '|'"));
            }
            break;
        }
        if pipes == 0 && newlines == 0 {
            p.pos = sep_start;
            p.skip_hws();
            return Err(p.error_here("expected '|' or a newline between tool calls"));
        }
    }
    Ok(ToolProgram { calls })
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn skip_hws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t' | '\r')) {
            self.bump();
        }
    }

    fn skip_ws_and_newlines(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn line_col(&self, offset: usize) -> (usize, usize) {
        let before = &self.src[..offset];
        let line = before.matches('\n').count() + 1;
        let line_start = before.rfind('\n').map_or(0, |i| i + 1);
        (line, before[line_start..].chars().count() + 1)
    }

    fn span(&self, offset: usize, len: usize) -> Span {
        let (line, col) = self.line_col(offset);
        Span {
            offset,
            len,
            line,
            col,
        }
    }

    fn token_at(&self, offset: usize) -> String {
        match self.src[offset..].chars().next() {
            None => "end of input".to_string(),
            Some('\n') => "newline".to_string(),
            Some(c) => c.to_string(),
        }
    }

    fn error_at(&self, offset: usize, message: impl Into<String>) -> ParseError {
        let (line, col) = self.line_col(offset);
        let token = self.token_at(offset);
        let mut message = message.into();
        message.push_str(&format!(", found {}", quote_token(&token)));
        ParseError {
            message,
            token,
            offset,
            line,
            col,
        }
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        self.error_at(self.pos, message)
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_lowercase() => {}
            _ => return Err(self.error_here(format!("expected {what}"))),
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_')
        {
            self.bump();
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn call(&mut self) -> Result<ToolCall, ParseError> {
        let start = self.pos;
        let name = self.ident("a tool name")?.replace('_', "-");
        self.skip_hws();
        let open = self.pos;
        if self.peek() != Some('(') {
            return Err(self.error_here(format!("expected '(' after tool name '{name}'")));
        }
        self.bump();
        let mut args: Vec<(String, Value)> = Vec::new();
        self.skip_hws();
        if self.peek() == Some(')') {
            self.bump();
        } else {
            loop {
                self.skip_hws();
                if self.at_end() {
                    return Err(self.unclosed(open, &name));
                }
                let arg_start = self.pos;
                let (arg_name, value) = self.arg(&name, open)?;
                if args.iter().any(|(n, _)| *n == arg_name) {
                    return Err(self.error_at(
                        arg_start,
                        format!("duplicate argument '{arg_name}' in call to '{name}'"),
                    ));
                }
                args.push((arg_name, value));
                self.skip_hws();
                match self.peek() {
                    Some(',') => {
                        self.bump();
                    }
                    Some(')') => {
                        self.bump();
                        break;
                    }
                    None | Some('\n') => return Err(self.unclosed(open, &name)),
                    Some(_) => {
                        return Err(self.error_here(format!(
                            "expected ',' or ')' in call to '{name}'"
                        )))
                    }
                }
            }
        }
        Ok(ToolCall {
            name,
            args,
            span: self.span(start, self.pos - start),
        })
    }

    fn unclosed(&self, open: usize, name: &str) -> ParseError {
        let (line, col) = self.line_col(open);
        ParseError {
            message: format!("unclosed '(' in call to '{name}'"),
            token: "(".to_string(),
            offset: open,
            line,
            col,
        }
    }

    fn arg(&mut self, tool: &str, open: usize) -> Result<(String, Value), ParseError> {
        let name = self.ident(&format!("an argument name in call to '{tool}'"))?;
        self.skip_hws();
        if self.peek() != Some('=') {
            if self.at_end() {
                return Err(self.unclosed(open, tool));
            }
            return Err(self.error_here(format!("expected '=' after argument '{name}' in call to '{tool}'")));
        }
        self.bump();
        self.skip_hws();
        let value = match self.peek() {
            Some('"') => self.string(tool)?,
            Some(c) if c == '-' || c.is_ascii_digit() => self.number(&name)?,
            None => return Err(self.unclosed(open, tool)),
            Some(_) => {
                return Err(self.error_here(format!("expected a value for argument '{name}'")))
            }
        };
        Ok((name, value))
    }

    fn digits(&mut self) -> usize {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        self.pos - start
    }

    fn number(&mut self, arg: &str) -> Result<Value, ParseError> {
        let start = self.pos;
        if self.peek() == Some('-') {
            self.bump();
        }
        if self.digits() == 0 {
            return Err(self.error_here(format!("expected digits in value for argument '{arg}'")));
        }
        let mut is_float = false;
        if self.peek() == Some('.') {
            self.bump();
            is_float = true;
            if self.digits() == 0 {
                return Err(self.error_here(format!("expected digits after '.' in value for argument '{arg}'")));
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            self.bump();
            is_float = true;
            if matches!(self.peek(), Some('+' | '-')) {
                self.bump();
            }
            if self.digits() == 0 {
                return Err(self.error_here(format!("expected exponent digits in value for argument '{arg}'")));
            }
        }
        let text = &self.src[start..self.pos];
        if is_float {
            match text.parse::<f64>() {
                Ok(f) if f.is_finite() => Ok(Value::Float(f)),
                _ => Err(self.error_at(start, format!("float literal out of range for argument '{arg}'"))),
            }
        } else {
            text.parse::<i64>()
                .map(Value::Int)
                .map_err(|_| self.error_at(start, format!("integer literal out of range for argument '{arg}'")))
        }
    }

    fn string(&mut self, tool: &str) -> Result<Value, ParseError> {
        let quote = self.pos;
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None => {
                    return Err(self.error_at(quote, format!("unterminated string in call to '{tool}'")))
                }
                Some('"') => break,
                Some('\\') => {
                    let esc = self.pos;
                    match self.bump() {
                        Some('"') => out.push('"'),
                        Some('\\') => out.push('\\'),
                        Some('n') => out.push('\n'),
                        Some('t') => out.push('\t'),
                        None => {
                            return Err(self.error_at(quote, format!("unterminated string in call to '{tool}'")))
                        }
                        Some(_) => return Err(self.error_at(esc, "unknown escape sequence in string")),
                    }
                }
                Some(c) => out.push(c),
            }
        }
        Ok(Value::Str(out))
    }
}

fn quote_token(token: &str) -> String {
    if token == "end of input" || token == "newline" {
        token.to_string()
    } else {
        format!("'{token}'")
    }
}
