//! Syntax-structure annotation: one role tag per non-whitespace token.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::syntax::{parse_pragma_body, pragma_ranges, SourceUnit, Token, TokenKind};

const BUILTIN_TAGS: &str = include_str!("../../data/ssa_tags.txt");

#[derive(Debug, Error)]
pub enum TagVocabularyError {
    #[error("line {line}: expected `<id> <name>`")]
    Syntax { line: usize },
    #[error("line {line}: id {id} breaks the dense 0.. numbering")]
    NotDense { line: usize, id: u32 },
    #[error("duplicate tag name `{0}`")]
    Duplicate(String),
    #[error("id 0 must be `none`")]
    MissingNone,
    #[error("cannot read tag vocabulary {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagVocabulary {
    ids: BTreeMap<String, u32>,
    names: Vec<String>,
}

impl TagVocabulary {
    pub fn parse(text: &str) -> Result<Self, TagVocabularyError> {
        let mut ids = BTreeMap::new();
        let mut names = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(id), Some(name), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(TagVocabularyError::Syntax { line: n + 1 });
            };
            let id: u32 = id.parse().map_err(|_| TagVocabularyError::Syntax { line: n + 1 })?;
            if id as usize != names.len() {
                return Err(TagVocabularyError::NotDense { line: n + 1, id });
            }
            if ids.insert(name.to_string(), id).is_some() {
                return Err(TagVocabularyError::Duplicate(name.to_string()));
            }
            names.push(name.to_string());
        }
        if names.first().map(String::as_str) != Some("none") {
            return Err(TagVocabularyError::MissingNone);
        }
        Ok(TagVocabulary { ids, names })
    }

    pub fn load(path: &Path) -> Result<Self, TagVocabularyError> {
        let text = std::fs::read_to_string(path).map_err(|source| TagVocabularyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_TAGS).expect("built-in tag vocabulary is well formed")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Id of `name`, or 0 when the vocabulary has no such tag.
    pub fn id(&self, name: &str) -> u32 {
        self.ids.get(name).copied().unwrap_or(0)
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }
}

impl Default for TagVocabulary {
    fn default() -> Self {
        Self::builtin()
    }
}

fn keyword_role(word: &str) -> &'static str {
    match word {
        "int" | "long" | "short" | "char" | "float" | "double" | "void" | "bool" | "_Bool" | "signed" | "unsigned"
        | "wchar_t" | "char16_t" | "char32_t" | "auto" => "primitive_type",
        "const" | "volatile" | "static" | "extern" | "inline" | "register" | "restrict" | "mutable" | "constexpr"
        | "thread_local" => "type_qualifier",
        "struct" | "union" | "enum" | "class" | "typedef" | "typename" => "type_specifier_keyword",
        "for" => "for_statement",
        "while" => "while_statement",
        "do" => "do_statement",
        "if" => "if_statement",
        "else" => "else_clause",
        "switch" => "switch_statement",
        "case" | "default" => "case_statement",
        "return" => "return_statement",
        "break" => "break_statement",
        "continue" => "continue_statement",
        "goto" => "goto_statement",
        "sizeof" => "sizeof_expression",
        _ => "other_keyword",
    }
}

fn punct_role(p: &str) -> &'static str {
    match p {
        "=" | "+=" | "-=" | "*=" | "/=" | "%=" | "&=" | "|=" | "^=" | "<<=" | ">>=" => "assignment_operator",
        "+" | "-" | "*" | "/" | "%" => "arithmetic_operator",
        "==" | "!=" | "<" | ">" | "<=" | ">=" | "<=>" => "comparison_operator",
        "&&" | "||" | "!" => "logical_operator",
        "&" | "|" | "^" | "~" | "<<" | ">>" => "bitwise_operator",
        "++" | "--" => "update_operator",
        "[" | "]" => "subscript_bracket",
        "(" | ")" => "parenthesis",
        "{" | "}" => "brace",
        ";" => "semicolon",
        "," => "comma",
        "." | "->" | "::" | ".*" | "->*" => "field_operator",
        "?" | ":" => "conditional_operator",
        _ => "none",
    }
}

fn directive_role(word: &str) -> &'static str {
    match word {
        "parallel" => "omp_directive_parallel",
        "for" | "do" | "loop" => "omp_directive_for",
        "simd" => "omp_directive_simd",
        "sections" | "section" => "omp_directive_sections",
        "single" => "omp_directive_single",
        "master" | "masked" => "omp_directive_master",
        "critical" => "omp_directive_critical",
        "atomic" => "omp_directive_atomic",
        "barrier" => "omp_directive_barrier",
        "task" | "taskloop" | "taskwait" | "taskgroup" | "taskyield" => "omp_directive_task",
        "target" | "teams" | "distribute" | "data" | "enter" | "exit" | "update" => "omp_directive_target",
        _ => "omp_directive_other",
    }
}

fn clause_role(name: &str) -> &'static str {
    match name {
        "private" => "omp_clause_private",
        "shared" => "omp_clause_shared",
        "firstprivate" => "omp_clause_firstprivate",
        "lastprivate" => "omp_clause_lastprivate",
        "reduction" | "in_reduction" | "task_reduction" => "omp_clause_reduction",
        "schedule" | "dist_schedule" => "omp_clause_schedule",
        "collapse" => "omp_clause_collapse",
        "num_threads" => "omp_clause_num_threads",
        "default" => "omp_clause_default",
        "nowait" => "omp_clause_nowait",
        _ => "omp_clause_other",
    }
}

const REDUCTION_OPS: &[&str] = &["+", "-", "*", "&", "|", "^", "&&", "||", "max", "min"];
const SCHEDULE_KINDS: &[&str] = &["static", "dynamic", "guided", "auto", "runtime"];

fn is_word(t: &Token) -> bool {
    matches!(t.kind, TokenKind::Identifier | TokenKind::Keyword)
}

/// Role names for the significant tokens of one `#pragma omp` line.
fn omp_roles(tokens: &[&Token], kinds: &[String]) -> Vec<&'static str> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut next_kind = 0;
    let mut clause = String::new();
    let mut depth = 0usize;
    let mut colon_seen = false;
    for (i, t) in tokens.iter().enumerate() {
        let lex = t.lexeme.as_str();
        let role = if i == 0 {
            "preproc_call"
        } else if i == 1 {
            "omp_keyword"
        } else if lex == "(" {
            depth += 1;
            if depth == 1 {
                colon_seen = false;
            }
            "parenthesis"
        } else if lex == ")" {
            depth = depth.saturating_sub(1);
            "parenthesis"
        } else if depth == 0 && is_word(t) && next_kind < kinds.len() && kinds[next_kind] == lex {
            next_kind += 1;
            clause.clear();
            directive_role(lex)
        } else if depth == 0 && is_word(t) {
            next_kind = kinds.len();
            clause = lex.to_string();
            clause_role(lex)
        } else if depth == 0 {
            punct_role(lex)
        } else if lex == ":" && depth == 1 {
            colon_seen = true;
            "conditional_operator"
        } else if clause.ends_with("reduction") && !colon_seen && REDUCTION_OPS.contains(&lex) {
            "omp_reduction_operator"
        } else if clause == "schedule" && SCHEDULE_KINDS.contains(&lex) {
            "omp_schedule_kind"
        } else if is_word(t) || t.kind == TokenKind::Number {
            "omp_clause_argument"
        } else {
            punct_role(lex)
        };
        out.push(role);
    }
    out
}

/// Tag id per non-whitespace token (comments included), in token order.
pub fn ssa_annotate(unit: &SourceUnit, vocab: &TagVocabulary) -> Vec<u32> {
    let tokens = unit.tokens();
    let mut roles: Vec<Option<&'static str>> = vec![None; tokens.len()];

    for (s, e) in pragma_ranges(tokens) {
        let sig: Vec<usize> = (s..e).filter(|&i| !tokens[i].is_trivia()).collect();
        if unit.in_omp_pragma[s] {
            let body = unit.omp_pragma_body(s, e).unwrap_or_default();
            let kinds = parse_pragma_body(&body).kinds;
            let toks: Vec<&Token> = sig.iter().map(|&i| &tokens[i]).collect();
            for (&i, role) in sig.iter().zip(omp_roles(&toks, &kinds)) {
                roles[i] = Some(role);
            }
        } else {
            roles[s] = Some("preproc_call");
            for &i in &sig[1..] {
                roles[i] = Some("preproc_arg");
            }
        }
    }

    let sig: Vec<usize> = (0..tokens.len())
        .filter(|&i| tokens[i].kind != TokenKind::Whitespace)
        .collect();
    let mut brace_depth = 0usize;
    let mut out = Vec::with_capacity(sig.len());
    for (k, &i) in sig.iter().enumerate() {
        let t = &tokens[i];
        let role = match roles[i] {
            Some(r) => r,
            None => {
                let next = sig[k + 1..]
                    .iter()
                    .map(|&j| &tokens[j])
                    .find(|t| t.kind != TokenKind::Comment);
                let prev = sig[..k]
                    .iter()
                    .rev()
                    .map(|&j| &tokens[j])
                    .find(|t| t.kind != TokenKind::Comment);
                match t.kind {
                    TokenKind::Comment => "comment",
                    TokenKind::Number => "number_literal",
                    TokenKind::String if t.lexeme.ends_with('\'') => "char_literal",
                    TokenKind::String => "string_literal",
                    TokenKind::Preprocessor => {
                        let head = t.lexeme.trim_start_matches('#').trim_start();
                        if head.starts_with("include") {
                            "preproc_include"
                        } else if head.starts_with("define") {
                            "preproc_define"
                        } else {
                            "preproc_directive"
                        }
                    }
                    TokenKind::Keyword => keyword_role(&t.lexeme),
                    TokenKind::Identifier if next.is_some_and(|n| n.lexeme == "(") => {
                        if brace_depth == 0 {
                            "function_declarator"
                        } else {
                            "call_expression"
                        }
                    }
                    TokenKind::Identifier if prev.is_some_and(|p| p.lexeme == "." || p.lexeme == "->") => {
                        "field_identifier"
                    }
                    TokenKind::Identifier => "identifier",
                    TokenKind::Punctuation => {
                        match t.lexeme.as_str() {
                            "{" => brace_depth += 1,
                            "}" => brace_depth = brace_depth.saturating_sub(1),
                            _ => {}
                        }
                        punct_role(&t.lexeme)
                    }
                    TokenKind::Whitespace => unreachable!("whitespace is filtered out"),
                }
            }
        };
        out.push(vocab.id(role));
    }
    out
}

/// Comma-separated ids, the on-disk annotation format.
pub fn format_tags(tags: &[u32]) -> String {
    tags.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}
