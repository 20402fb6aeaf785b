use std::fmt;

use serde::Serialize;

/// 1-based source position of a token or declaration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub len: u32,
}

impl Span {
    pub fn new(line: u32, col: u32, len: u32) -> Span {
        Span { line, col, len }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// Codes: `Pxxx` lexing/parsing, `Kxxx` kinding, `Txxx` typing, `Wxxx` lints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: &'static str,
    pub severity: Severity,
    pub span: Span,
    pub msg: String,
}

#[derive(Serialize)]
struct Wire<'a> {
    code: &'a str,
    severity: Severity,
    line: u32,
    col: u32,
    len: u32,
    msg: &'a str,
}

impl Diagnostic {
    pub fn error(code: &'static str, span: Span, msg: impl Into<String>) -> Diagnostic {
        Diagnostic { code, severity: Severity::Error, span, msg: msg.into() }
    }

    pub fn warning(code: &'static str, span: Span, msg: impl Into<String>) -> Diagnostic {
        Diagnostic { code, severity: Severity::Warning, span, msg: msg.into() }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(Wire {
            code: self.code,
            severity: self.severity,
            line: self.span.line,
            col: self.span.col,
            len: self.span.len,
            msg: &self.msg,
        })
        .expect("diagnostic serialises")
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}[{}]: {}", self.span.line, self.span.col, self.code, self.msg)
    }
}

pub fn has_errors(ds: &[Diagnostic]) -> bool {
    ds.iter().any(Diagnostic::is_error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let d = Diagnostic::error("T003", Span::new(3, 7, 2), "mismatch");
        let v = d.to_json();
        assert_eq!(v["code"], "T003");
        assert_eq!(v["severity"], "error");
        assert_eq!(v["line"], 3);
        assert_eq!(v["col"], 7);
        assert_eq!(v["len"], 2);
        assert_eq!(v["msg"], "mismatch");
    }
}
