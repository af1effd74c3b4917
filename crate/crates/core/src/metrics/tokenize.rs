//! Longest-match lexer for Python source.
//!
//! The lexer is total: every input produces a token stream whose spans cover
//! all non-whitespace text exactly. Gaps between tokens contain only spaces,
//! tabs, form feeds and backslash line continuations.

use std::ops::Range;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Identifier,
    NumberLiteral,
    StringLiteral,
    Operator,
    Delimiter,
    Keyword,
    Comment,
    Newline,
    /// Leading whitespace of a logical line that carries code.
    IndentMarker,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    pub span: Range<usize>,
}

impl Token<'_> {
    pub fn is_keyword(&self, word: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text == word
    }

    pub fn is_trivia(&self) -> bool {
        matches!(self.kind, TokenKind::Comment | TokenKind::Newline | TokenKind::IndentMarker)
    }
}

pub const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "**", "//", "<<", ">>", "<=", ">=", "==", "!=", "+=", "-=", "*=",
    "/=", "%=", "&=", "|=", "^=", "@=", ":=", "+", "-", "*", "/", "%", "@", "&", "|", "^", "~",
    "<", ">", "=",
];

const DELIMITERS: &[&str] = &["...", "->", "(", ")", "[", "]", "{", "}", ",", ":", ".", ";"];

/// Language-dependent lexing knobs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub comment_marker: String,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon { comment_marker: "#".to_string() }
    }
}

pub fn tokenize(source: &str) -> Vec<Token<'_>> {
    tokenize_with(source, &Lexicon::default())
}

pub fn tokenize_with<'a>(source: &'a str, lexicon: &Lexicon) -> Vec<Token<'a>> {
    Lexer { src: source, pos: 0, depth: 0, marker: &lexicon.comment_marker, out: Vec::new() }.run()
}

struct Lexer<'a, 'm> {
    src: &'a str,
    pos: usize,
    depth: usize,
    marker: &'m str,
    out: Vec<Token<'a>>,
}

impl<'a> Lexer<'a, '_> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn push(&mut self, kind: TokenKind, len: usize) {
        let span = self.pos..self.pos + len;
        self.out.push(Token { kind, text: &self.src[span.clone()], span });
        self.pos += len;
    }

    fn run(mut self) -> Vec<Token<'a>> {
        let mut at_line_start = true;
        while self.pos < self.src.len() {
            if at_line_start {
                at_line_start = false;
                self.indentation();
                continue;
            }
            let rest = self.rest();
            let c = rest.chars().next().expect("pos < len");
            match c {
                '\n' => {
                    self.push(TokenKind::Newline, 1);
                    at_line_start = true;
                }
                '\r' => {
                    let len = if rest.starts_with("\r\n") { 2 } else { 1 };
                    self.push(TokenKind::Newline, len);
                    at_line_start = true;
                }
                ' ' | '\t' | '\x0c' => self.pos += 1,
                '\\' if rest[1..].starts_with('\n') => self.pos += 2,
                '\\' if rest[1..].starts_with("\r\n") => self.pos += 3,
                _ if !self.marker.is_empty() && rest.starts_with(self.marker) => {
                    let len = rest.find(['\n', '\r']).unwrap_or(rest.len());
                    self.push(TokenKind::Comment, len);
                }
                _ => {
                    if let Some(len) = string_len(rest) {
                        self.push(TokenKind::StringLiteral, len);
                    } else if c == '_' || c.is_alphabetic() {
                        let len = rest
                            .char_indices()
                            .find(|&(_, ch)| !(ch == '_' || ch.is_alphanumeric()))
                            .map_or(rest.len(), |(i, _)| i);
                        let kind = if KEYWORDS.contains(&&rest[..len]) {
                            TokenKind::Keyword
                        } else {
                            TokenKind::Identifier
                        };
                        self.push(kind, len);
                    } else if c.is_ascii_digit()
                        || (c == '.' && rest[1..].starts_with(|d: char| d.is_ascii_digit()))
                    {
                        self.push(TokenKind::NumberLiteral, number_len(rest));
                    } else if let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(**op)) {
                        // "..." and "->" are delimiters and outrank "." and "-".
                        if let Some(d) = DELIMITERS.iter().find(|d| d.len() > op.len() && rest.starts_with(**d)) {
                            self.push(TokenKind::Delimiter, d.len());
                        } else {
                            self.push(TokenKind::Operator, op.len());
                        }
                    } else if let Some(d) = DELIMITERS.iter().find(|d| rest.starts_with(**d)) {
                        match *d {
                            "(" | "[" | "{" => self.depth += 1,
                            ")" | "]" | "}" => self.depth = self.depth.saturating_sub(1),
                            _ => {}
                        }
                        self.push(TokenKind::Delimiter, d.len());
                    } else {
                        self.push(TokenKind::Delimiter, c.len_utf8());
                    }
                }
            }
        }
        self.out
    }

    /// Consumes leading whitespace, emitting an indent marker when the line
    /// starts a logical line with code on it.
    fn indentation(&mut self) {
        let rest = self.rest();
        let width = rest.find(|c| !matches!(c, ' ' | '\t' | '\x0c')).unwrap_or(rest.len());
        if width == 0 {
            return;
        }
        let after = &rest[width..];
        let carries_code = !after.is_empty()
            && !after.starts_with(['\n', '\r'])
            && !(!self.marker.is_empty() && after.starts_with(self.marker));
        if carries_code && self.depth == 0 {
            self.push(TokenKind::IndentMarker, width);
        } else {
            self.pos += width;
        }
    }
}

fn string_len(s: &str) -> Option<usize> {
    let b = s.as_bytes();
    let prefix_len = b.iter().take(3).position(|c| *c == b'\'' || *c == b'"')?;
    let prefix = s[..prefix_len].to_ascii_lowercase();
    if !matches!(prefix.as_str(), "" | "r" | "u" | "b" | "f" | "br" | "rb" | "fr" | "rf") {
        return None;
    }
    let body = &b[prefix_len..];
    let q = body[0];
    let triple = [q, q, q];
    if body.starts_with(&triple) {
        let mut i = 3;
        while i < body.len() {
            if body[i] == b'\\' {
                i += 2;
            } else if body[i..].starts_with(&triple) {
                return Some(prefix_len + i + 3);
            } else {
                i += 1;
            }
        }
        return Some(s.len());
    }
    let mut i = 1;
    while i < body.len() {
        match body[i] {
            b'\\' => {
                // An escaped CRLF continues the literal as well.
                i += if body[i + 1..].starts_with(b"\r\n") { 3 } else { 2 };
            }
            b'\n' | b'\r' => return Some(prefix_len + i),
            c if c == q => return Some(prefix_len + i + 1),
            _ => i += 1,
        }
    }
    Some(s.len())
}

fn number_len(s: &str) -> usize {
    let b = s.as_bytes();
    let lower = s.get(..2).map(str::to_ascii_lowercase);
    if matches!(lower.as_deref(), Some("0x" | "0o" | "0b")) {
        return 2 + b[2..].iter().take_while(|c| c.is_ascii_alphanumeric() || **c == b'_').count();
    }
    let digits = |from: usize| b[from..].iter().take_while(|c| c.is_ascii_digit() || **c == b'_').count();
    let mut i = digits(0);
    if b.get(i) == Some(&b'.') {
        i += 1;
        i += digits(i);
    }
    if matches!(b.get(i), Some(b'e' | b'E')) {
        let mut j = i + 1;
        if matches!(b.get(j), Some(b'+' | b'-')) {
            j += 1;
        }
        if b.get(j).is_some_and(u8::is_ascii_digit) {
            i = j + digits(j);
        }
    }
    if matches!(b.get(i), Some(b'j' | b'J')) {
        i += 1;
    }
    i
}

/// Classification of one physical line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineClass {
    Blank,
    CommentOnly,
    Code,
}

/// Physical lines of `source` with their byte ranges (terminator included).
pub fn physical_lines(source: &str) -> Vec<Range<usize>> {
    let mut lines = Vec::new();
    let mut start = 0;
    for (i, b) in source.bytes().enumerate() {
        if b == b'\n' {
            lines.push(start..i + 1);
            start = i + 1;
        }
    }
    if start < source.len() {
        lines.push(start..source.len());
    }
    lines
}

/// Classifies each physical line using the token stream, so comment markers
/// inside string literals never make a line comment-only.
pub fn classify_lines(source: &str, lexicon: &Lexicon) -> Vec<LineClass> {
    let lines = physical_lines(source);
    let line_of = |offset: usize| lines.partition_point(|r| r.end <= offset);
    let mut first: Vec<Option<TokenKind>> = vec![None; lines.len()];
    let mut inside_string = vec![false; lines.len()];
    for tok in tokenize_with(source, lexicon) {
        if matches!(tok.kind, TokenKind::Newline | TokenKind::IndentMarker) {
            continue;
        }
        let line = line_of(tok.span.start);
        if first[line].is_none() {
            first[line] = Some(tok.kind);
        }
        if tok.kind == TokenKind::StringLiteral {
            let last = line_of(tok.span.end.saturating_sub(1).max(tok.span.start));
            for flag in &mut inside_string[line + 1..=last.min(lines.len() - 1)] {
                *flag = true;
            }
        }
    }
    lines
        .iter()
        .enumerate()
        .map(|(i, range)| {
            let text = &source[range.clone()];
            if text.trim().is_empty() {
                LineClass::Blank
            } else if inside_string[i] {
                LineClass::Code
            } else if first[i] == Some(TokenKind::Comment) {
                LineClass::CommentOnly
            } else {
                LineClass::Code
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use TokenKind::*;

    fn kinds(src: &str) -> Vec<(TokenKind, &str)> {
        tokenize(src).into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn simple_assignment() {
        assert_eq!(kinds("x = 1"), vec![(Identifier, "x"), (Operator, "="), (NumberLiteral, "1")]);
    }

    #[test]
    fn hash_inside_string_is_not_a_comment() {
        let toks = kinds(r##"s = "# not a comment""##);
        assert_eq!(toks[2], (StringLiteral, "\"# not a comment\""));
        assert!(toks.iter().all(|(k, _)| *k != Comment));
    }

    #[test]
    fn strings_with_prefixes_and_triples() {
        let toks = kinds("a = rb'x\\'y' + f\"\"\"multi\nline\"\"\" + u'z'");
        let strings: Vec<_> = toks.iter().filter(|(k, _)| *k == StringLiteral).map(|(_, t)| *t).collect();
        assert_eq!(strings, vec!["rb'x\\'y'", "f\"\"\"multi\nline\"\"\"", "u'z'"]);
    }

    #[test]
    fn unterminated_strings_are_total() {
        assert_eq!(kinds("'abc\nx"), vec![(StringLiteral, "'abc"), (Newline, "\n"), (Identifier, "x")]);
        assert_eq!(kinds("'''abc"), vec![(StringLiteral, "'''abc")]);
        assert_eq!(kinds("'é"), vec![(StringLiteral, "'é")]);
    }

    #[test]
    fn longest_match_operators_and_delimiters() {
        assert_eq!(
            kinds("a **= b // c -> ... :="),
            vec![
                (Identifier, "a"),
                (Operator, "**="),
                (Identifier, "b"),
                (Operator, "//"),
                (Identifier, "c"),
                (Delimiter, "->"),
                (Delimiter, "..."),
                (Operator, ":="),
            ]
        );
    }

    #[test]
    fn numbers() {
        for n in ["0x1F", "1_000", "3.14", ".5", "1e-3", "2j", "1.5E+10"] {
            assert_eq!(kinds(n), vec![(NumberLiteral, n)], "{n}");
        }
    }

    #[test]
    fn unknown_characters_become_delimiters() {
        assert_eq!(kinds("$?"), vec![(Delimiter, "$"), (Delimiter, "?")]);
        assert_eq!(kinds("a ! b")[1], (Delimiter, "!"));
    }

    #[test]
    fn indentation_and_comments() {
        let src = "if x:\n    y = 1  # note\n    # only\n";
        let toks = kinds(src);
        assert!(toks.contains(&(IndentMarker, "    ")));
        assert!(toks.contains(&(Comment, "# note")));
        assert!(toks.contains(&(Comment, "# only")));
        // one marker: comment-only lines get none
        assert_eq!(toks.iter().filter(|(k, _)| *k == IndentMarker).count(), 1);
    }

    #[test]
    fn no_indent_marker_inside_brackets() {
        let toks = kinds("f(a,\n    b)\n");
        assert!(toks.iter().all(|(k, _)| *k != IndentMarker));
    }

    #[test]
    fn line_continuation_is_whitespace() {
        assert_eq!(kinds("a = \\\n  1"), vec![(Identifier, "a"), (Operator, "="), (NumberLiteral, "1")]);
    }

    #[test]
    fn line_classes() {
        let src = "x = 1  # c\n# comment\n\n  s = '''\n# in string\n'''\n";
        let lex = Lexicon::default();
        assert_eq!(
            classify_lines(src, &lex),
            vec![
                LineClass::Code,
                LineClass::CommentOnly,
                LineClass::Blank,
                LineClass::Code,
                LineClass::Code,
                LineClass::Code
            ]
        );
    }

    #[test]
    fn custom_comment_marker() {
        let lex = Lexicon { comment_marker: "//".into() };
        let toks = tokenize_with("x = 1 // note", &lex);
        assert_eq!(toks.last().unwrap().kind, Comment);
        assert_eq!(classify_lines("// hi\nx\n", &lex), vec![LineClass::CommentOnly, LineClass::Code]);
    }
}
