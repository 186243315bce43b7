//! Lossless C/C++ lexer.
//!
//! Every byte of the input ends up in exactly one token, so concatenating
//! the lexemes reproduces the source. `#pragma` lines are split into a
//! `#pragma` preprocessor token followed by ordinary word tokens; every
//! other preprocessor line is kept as a single token.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Punctuation,
    Number,
    String,
    Comment,
    Preprocessor,
    Whitespace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Token {
    pub lexeme: String,
    pub kind: TokenKind,
    pub byte_offset: usize,
    /// 1-based line of the first byte.
    pub line: usize,
}

impl Token {
    pub fn is_trivia(&self) -> bool {
        matches!(self.kind, TokenKind::Whitespace | TokenKind::Comment)
    }

    pub fn end(&self) -> usize {
        self.byte_offset + self.lexeme.len()
    }

    /// Whitespace that terminates a logical line (a newline not escaped by a backslash).
    pub(crate) fn ends_logical_line(&self) -> bool {
        self.kind == TokenKind::Whitespace && !self.lexeme.starts_with('\\') && self.lexeme.contains('\n')
    }
}

const KEYWORDS: &[&str] = &[
    "alignas",
    "alignof",
    "auto",
    "bool",
    "break",
    "case",
    "catch",
    "char",
    "char16_t",
    "char32_t",
    "class",
    "const",
    "const_cast",
    "constexpr",
    "continue",
    "decltype",
    "default",
    "delete",
    "do",
    "double",
    "dynamic_cast",
    "else",
    "enum",
    "explicit",
    "extern",
    "false",
    "float",
    "for",
    "friend",
    "goto",
    "if",
    "inline",
    "int",
    "long",
    "mutable",
    "namespace",
    "new",
    "noexcept",
    "nullptr",
    "operator",
    "private",
    "protected",
    "public",
    "register",
    "reinterpret_cast",
    "restrict",
    "return",
    "short",
    "signed",
    "sizeof",
    "static",
    "static_assert",
    "static_cast",
    "struct",
    "switch",
    "template",
    "this",
    "thread_local",
    "throw",
    "true",
    "try",
    "typedef",
    "typename",
    "union",
    "unsigned",
    "using",
    "virtual",
    "void",
    "volatile",
    "wchar_t",
    "while",
    "_Bool",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

// Longest first so maximal munch works with a linear scan.
const PUNCTUATORS: &[&str] = &[
    "<<=", ">>=", "...", "->*", "<=>", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "::", ".*", "##",
];

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    tokens: Vec<Token>,
    /// Only whitespace seen since the last logical newline.
    at_line_start: bool,
    in_pragma: bool,
}

pub fn tokenize(src: &str) -> Vec<Token> {
    let mut lx = Lexer {
        src,
        bytes: src.as_bytes(),
        pos: 0,
        line: 1,
        tokens: Vec::new(),
        at_line_start: true,
        in_pragma: false,
    };
    lx.run();
    lx.tokens
}

impl<'a> Lexer<'a> {
    fn peek(&self, ahead: usize) -> Option<u8> {
        self.bytes.get(self.pos + ahead).copied()
    }

    fn push(&mut self, end: usize, kind: TokenKind) {
        let lexeme = &self.src[self.pos..end];
        let newlines = lexeme.bytes().filter(|&b| b == b'\n').count();
        self.tokens.push(Token {
            lexeme: lexeme.to_string(),
            kind,
            byte_offset: self.pos,
            line: self.line,
        });
        if kind == TokenKind::Whitespace {
            let escaped = lexeme.starts_with('\\');
            if newlines > 0 && !escaped {
                self.at_line_start = true;
                self.in_pragma = false;
            }
        } else if kind != TokenKind::Comment {
            self.at_line_start = false;
        }
        self.line += newlines;
        self.pos = end;
    }

    /// Advance `end` to the next char boundary after `end`.
    fn next_boundary(&self, mut end: usize) -> usize {
        end += 1;
        while end < self.bytes.len() && !self.src.is_char_boundary(end) {
            end += 1;
        }
        end
    }

    fn run(&mut self) {
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            match c {
                b'\\' if matches!(self.peek(1), Some(b'\n')) => self.push(self.pos + 2, TokenKind::Whitespace),
                b'\\' if matches!(self.peek(1), Some(b'\r')) && matches!(self.peek(2), Some(b'\n')) => {
                    self.push(self.pos + 3, TokenKind::Whitespace)
                }
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => {
                    let mut end = self.pos;
                    while end < self.bytes.len()
                        && matches!(self.bytes[end], b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
                    {
                        end += 1;
                    }
                    self.push(end, TokenKind::Whitespace);
                }
                b'/' if self.peek(1) == Some(b'/') => {
                    let end = self.src[self.pos..]
                        .find('\n')
                        .map_or(self.bytes.len(), |n| self.pos + n);
                    self.push(end, TokenKind::Comment);
                }
                b'/' if self.peek(1) == Some(b'*') => {
                    let end = self.src[self.pos + 2..]
                        .find("*/")
                        .map_or(self.bytes.len(), |n| self.pos + 2 + n + 2);
                    self.push(end, TokenKind::Comment);
                }
                b'#' if self.at_line_start && !self.in_pragma => self.preprocessor(),
                b'"' | b'\'' => self.quoted(c),
                b'0'..=b'9' => self.number(),
                b'.' if matches!(self.peek(1), Some(b'0'..=b'9')) => self.number(),
                c if c == b'_' || c.is_ascii_alphabetic() || c >= 0x80 => self.word(),
                _ => self.punct(),
            }
        }
    }

    fn preprocessor(&mut self) {
        // `#` [spaces] name
        let mut end = self.pos + 1;
        while end < self.bytes.len() && matches!(self.bytes[end], b' ' | b'\t') {
            end += 1;
        }
        let name_start = end;
        while end < self.bytes.len() && (self.bytes[end].is_ascii_alphanumeric() || self.bytes[end] == b'_') {
            end += 1;
        }
        if &self.src[name_start..end] == "pragma" {
            self.push(end, TokenKind::Preprocessor);
            self.in_pragma = true;
            return;
        }
        // Whole logical line, honouring backslash continuations.
        let mut i = end;
        while i < self.bytes.len() {
            match self.bytes[i] {
                b'\\' if self.bytes.get(i + 1) == Some(&b'\n') => i += 2,
                b'\\' if self.bytes.get(i + 1) == Some(&b'\r') && self.bytes.get(i + 2) == Some(&b'\n') => i += 3,
                b'\n' => break,
                _ => i += 1,
            }
        }
        // Keep a trailing '\r' with the newline whitespace.
        if i > end && self.bytes[i - 1] == b'\r' && i < self.bytes.len() {
            i -= 1;
        }
        self.push(i, TokenKind::Preprocessor);
    }

    fn quoted(&mut self, quote: u8) {
        let mut end = self.pos + 1;
        while end < self.bytes.len() {
            match self.bytes[end] {
                b'\\' => end += 2,
                b'\n' => break,
                b if b == quote => {
                    end += 1;
                    break;
                }
                _ => end += 1,
            }
        }
        let mut end = end.min(self.bytes.len());
        while !self.src.is_char_boundary(end) {
            end += 1;
        }
        self.push(end, TokenKind::String);
    }

    fn number(&mut self) {
        let mut end = self.pos;
        while end < self.bytes.len() {
            let b = self.bytes[end];
            let exp_sign = matches!(b, b'+' | b'-')
                && end > self.pos
                && matches!(self.bytes[end - 1], b'e' | b'E' | b'p' | b'P')
                && !self.src[self.pos..end].starts_with("0x");
            if b.is_ascii_alphanumeric() || b == b'.' || b == b'_' || b == b'\'' || exp_sign {
                end += 1;
            } else {
                break;
            }
        }
        self.push(end, TokenKind::Number);
    }

    fn word(&mut self) {
        let mut end = self.pos;
        while end < self.bytes.len() {
            let b = self.bytes[end];
            if b == b'_' || b.is_ascii_alphanumeric() {
                end += 1;
            } else if b >= 0x80 {
                end = self.next_boundary(end);
            } else {
                break;
            }
        }
        // String prefixes: L"..", u8"..", R"(..)" is treated as a plain string.
        if end < self.bytes.len() && matches!(self.bytes[end], b'"' | b'\'') {
            let prefix = &self.src[self.pos..end];
            if matches!(prefix, "L" | "u" | "U" | "u8" | "R" | "LR" | "uR" | "UR" | "u8R") {
                let start = self.pos;
                self.pos = end;
                let quote = self.bytes[end];
                self.quoted(quote);
                let tok = self.tokens.last_mut().expect("just pushed");
                tok.lexeme.insert_str(0, &self.src[start..end]);
                tok.byte_offset = start;
                return;
            }
        }
        let kind = if is_keyword(&self.src[self.pos..end]) {
            TokenKind::Keyword
        } else {
            TokenKind::Identifier
        };
        self.push(end, kind);
    }

    fn punct(&mut self) {
        let rest = &self.src[self.pos..];
        for p in PUNCTUATORS {
            if rest.starts_with(p) {
                self.push(self.pos + p.len(), TokenKind::Punctuation);
                return;
            }
        }
        let end = self.next_boundary(self.pos);
        self.push(end, TokenKind::Punctuation);
    }
}
