use crate::diagnostics::{Diagnostic, Span};

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    LIdent(String),
    UIdent(String),
    Int(i64),
    Str(String),
    Char(char),
    Protocol,
    Data,
    Type,
    Forall,
    Match,
    Case,
    With,
    Of,
    Let,
    In,
    Rec,
    Select,
    Fork,
    New,
    Send,
    Receive,
    Wait,
    Terminate,
    If,
    Then,
    Else,
    Dual,
    EndWait,
    EndTerm,
    Unit,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Dot,
    Arrow,
    Equals,
    Bar,
    Backslash,
    Bang,
    Question,
    Minus,
    Plus,
    Star,
    Slash,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Pipe,
    Eof,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

fn keyword(s: &str) -> Option<Tok> {
    Some(match s {
        "protocol" => Tok::Protocol,
        "data" => Tok::Data,
        "type" => Tok::Type,
        "forall" => Tok::Forall,
        "match" => Tok::Match,
        "case" => Tok::Case,
        "with" => Tok::With,
        "of" => Tok::Of,
        "let" => Tok::Let,
        "in" => Tok::In,
        "rec" => Tok::Rec,
        "select" => Tok::Select,
        "fork" => Tok::Fork,
        "new" => Tok::New,
        "send" => Tok::Send,
        "receive" => Tok::Receive,
        "wait" => Tok::Wait,
        "terminate" => Tok::Terminate,
        "if" => Tok::If,
        "then" => Tok::Then,
        "else" => Tok::Else,
        "Dual" => Tok::Dual,
        "EndW" => Tok::EndWait,
        "EndT" => Tok::EndTerm,
        "Unit" => Tok::Unit,
        _ => return None,
    })
}

pub fn is_reserved(s: &str) -> bool {
    keyword(s).is_some() || s == "End"
}

pub fn lex(src: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut diags = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0, i0) = (line, col, i);
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '-' && chars.get(i + 1).copied() == Some('-') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '{' && chars.get(i + 1).copied() == Some('-') {
            let mut depth = 0usize;
            loop {
                if i >= chars.len() {
                    diags.push(Diagnostic::error("P002", Span::new(l0, c0, 2), "unterminated block comment"));
                    break;
                }
                if chars[i] == '{' && chars.get(i + 1).copied() == Some('-') {
                    depth += 1;
                    bump!();
                    bump!();
                } else if chars[i] == '-' && chars.get(i + 1).copied() == Some('}') {
                    depth -= 1;
                    bump!();
                    bump!();
                    if depth == 0 {
                        break;
                    }
                } else {
                    bump!();
                }
            }
            continue;
        }
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                bump!();
            }
            let word: String = chars[i0..i].iter().collect();
            if word == "End" && matches!(chars.get(i), Some('?') | Some('!')) {
                let t = if chars[i] == '?' { Tok::EndWait } else { Tok::EndTerm };
                bump!();
                t
            } else if let Some(k) = keyword(&word) {
                k
            } else if c.is_ascii_uppercase() {
                Tok::UIdent(word)
            } else {
                Tok::LIdent(word)
            }
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            let digits: String = chars[i0..i].iter().collect();
            match digits.parse::<i64>() {
                Ok(n) => Tok::Int(n),
                Err(_) => {
                    diags.push(Diagnostic::error(
                        "P003",
                        Span::new(l0, c0, (i - i0) as u32),
                        "integer literal out of range",
                    ));
                    Tok::Int(0)
                }
            }
        } else if c == '"' {
            bump!();
            let mut s = String::new();
            let mut closed = false;
            while i < chars.len() && chars[i] != '\n' {
                let ch = chars[i];
                bump!();
                if ch == '"' {
                    closed = true;
                    break;
                }
                if ch == '\\' && i < chars.len() {
                    let e = chars[i];
                    bump!();
                    s.push(unescape(e));
                } else {
                    s.push(ch);
                }
            }
            if !closed {
                diags.push(Diagnostic::error("P002", Span::new(l0, c0, 1), "unterminated string literal"));
            }
            Tok::Str(s)
        } else if c == '\'' {
            bump!();
            let mut ch = None;
            if i < chars.len() && chars[i] != '\'' && chars[i] != '\n' {
                let x = chars[i];
                bump!();
                ch = Some(if x == '\\' && i < chars.len() {
                    let e = chars[i];
                    bump!();
                    unescape(e)
                } else {
                    x
                });
            }
            if ch.is_some() && i < chars.len() && chars[i] == '\'' {
                bump!();
            } else {
                ch = None;
            }
            match ch {
                Some(x) => Tok::Char(x),
                None => {
                    diags.push(Diagnostic::error("P002", Span::new(l0, c0, 1), "malformed character literal"));
                    continue;
                }
            }
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let t2 = match two.as_str() {
                "->" => Some(Tok::Arrow),
                "==" => Some(Tok::EqEq),
                "/=" => Some(Tok::NotEq),
                "<=" => Some(Tok::Le),
                ">=" => Some(Tok::Ge),
                "|>" => Some(Tok::Pipe),
                _ => None,
            };
            if let Some(t) = t2 {
                bump!();
                bump!();
                t
            } else {
                let t = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ',' => Tok::Comma,
                    ':' => Tok::Colon,
                    '.' => Tok::Dot,
                    '=' => Tok::Equals,
                    '|' => Tok::Bar,
                    '\\' => Tok::Backslash,
                    '!' => Tok::Bang,
                    '?' => Tok::Question,
                    '-' => Tok::Minus,
                    '+' => Tok::Plus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '<' => Tok::Lt,
                    '>' => Tok::Gt,
                    _ => {
                        diags.push(Diagnostic::error(
                            "P001",
                            Span::new(l0, c0, 1),
                            format!("unexpected character {c:?}"),
                        ));
                        bump!();
                        continue;
                    }
                };
                bump!();
                t
            }
        };
        let len = if line == l0 { col - c0 } else { 1 };
        toks.push(Token { tok, span: Span::new(l0, c0, len.max(1)) });
    }
    (toks, diags)
}

fn unescape(e: char) -> char {
    match e {
        'n' => '\n',
        't' => '\t',
        '0' => '\0',
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex(s).0.into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn session_punctuation() {
        assert_eq!(
            toks("?-Int.End! -> End?"),
            vec![Tok::Question, Tok::Minus, Tok::UIdent("Int".into()), Tok::Dot, Tok::EndTerm, Tok::Arrow, Tok::EndWait]
        );
    }

    #[test]
    fn comments_and_positions() {
        let (ts, d) = lex("a -- note\n  b'1 {- x -} \"s\\n\"");
        assert!(d.is_empty());
        assert_eq!(ts[1].tok, Tok::LIdent("b'1".into()));
        assert_eq!(ts[1].span, Span::new(2, 3, 3));
        assert_eq!(ts[2].tok, Tok::Str("s\n".into()));
    }

    #[test]
    fn bad_characters_are_reported() {
        let (_, d) = lex("a # b");
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].span.col, 3);
    }
}
