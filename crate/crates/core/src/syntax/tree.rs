//! Lightweight statement tree over the token stream.
//!
//! This is not a C++ parser. It recovers just enough structure to locate
//! compound statements, `for` loops and their bodies, control statements,
//! and the statement a pragma is attached to.

use super::token::{Token, TokenKind};

pub(crate) type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum NodeKind {
    Root,
    Compound,
    For {
        header_open: usize,
        header_close: usize,
        body: Option<NodeId>,
    },
    Control,
    Simple,
    Preproc,
    Pragma {
        attached: Option<NodeId>,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub kind: NodeKind,
    /// Token index of the first token.
    pub first: usize,
    /// Token index of the last token (inclusive).
    pub last: usize,
    pub depth: usize,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

#[derive(Debug, Clone)]
enum Elem {
    Tok(usize),
    /// Token range `[start, end)` of a whole `#pragma` logical line.
    Pragma(usize, usize),
}

#[derive(Debug, Clone)]
pub(crate) struct SyntaxTree {
    pub nodes: Vec<Node>,
    pub degraded: bool,
}

/// Predicate deciding whether a pragma (token range) takes the following statement.
pub(crate) type AssociatedFn<'a> = &'a dyn Fn(usize, usize) -> bool;

pub(crate) fn is_pragma_token(tok: &Token) -> bool {
    tok.kind == TokenKind::Preprocessor && tok.lexeme.trim_start_matches('#').trim_start() == "pragma"
}

/// Token ranges `[start, end)` of every `#pragma` logical line.
pub(crate) fn pragma_ranges(tokens: &[Token]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if is_pragma_token(&tokens[i]) {
            let start = i;
            i += 1;
            while i < tokens.len() && !tokens[i].ends_logical_line() {
                i += 1;
            }
            out.push((start, i));
        } else {
            i += 1;
        }
    }
    out
}

struct Parser<'a> {
    tokens: &'a [Token],
    elems: Vec<Elem>,
    pos: usize,
    nodes: Vec<Node>,
    degraded: bool,
    associated: AssociatedFn<'a>,
}

pub(crate) fn build(tokens: &[Token], associated: AssociatedFn<'_>) -> SyntaxTree {
    let mut elems = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if is_pragma_token(&tokens[i]) {
            let start = i;
            i += 1;
            while i < tokens.len() && !tokens[i].ends_logical_line() {
                i += 1;
            }
            elems.push(Elem::Pragma(start, i));
        } else {
            if !tokens[i].is_trivia() {
                elems.push(Elem::Tok(i));
            }
            i += 1;
        }
    }
    let mut p = Parser {
        tokens,
        elems,
        pos: 0,
        nodes: vec![Node {
            kind: NodeKind::Root,
            first: 0,
            last: tokens.len().saturating_sub(1),
            depth: 0,
            parent: None,
            children: Vec::new(),
        }],
        degraded: false,
        associated,
    };
    while p.pos < p.elems.len() {
        if p.parse_stmt(0, 1).is_none() {
            // Stray closing brace at file scope.
            p.degraded = true;
            p.pos += 1;
        }
    }
    SyntaxTree {
        nodes: p.nodes,
        degraded: p.degraded,
    }
}

impl<'a> Parser<'a> {
    fn lexeme(&self, at: usize) -> Option<&'a str> {
        match self.elems.get(at)? {
            Elem::Tok(i) => Some(self.tokens[*i].lexeme.as_str()),
            Elem::Pragma(..) => None,
        }
    }

    fn is_punct(&self, at: usize, p: &str) -> bool {
        matches!(self.elems.get(at), Some(Elem::Tok(i))
            if self.tokens[*i].kind == TokenKind::Punctuation && self.tokens[*i].lexeme == p)
    }

    fn is_keyword(&self, at: usize, k: &str) -> bool {
        matches!(self.elems.get(at), Some(Elem::Tok(i))
            if self.tokens[*i].kind == TokenKind::Keyword && self.tokens[*i].lexeme == k)
    }

    fn first_tok(&self, at: usize) -> usize {
        match self.elems[at] {
            Elem::Tok(i) => i,
            Elem::Pragma(s, _) => s,
        }
    }

    fn last_tok(&self, at: usize) -> usize {
        match self.elems[at] {
            Elem::Tok(i) => i,
            Elem::Pragma(_, e) => e - 1,
        }
    }

    fn push(&mut self, kind: NodeKind, first: usize, parent: NodeId, depth: usize) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node {
            kind,
            first,
            last: first,
            depth,
            parent: Some(parent),
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    fn finish(&mut self, id: NodeId) {
        let last = if self.pos == 0 { 0 } else { self.last_tok(self.pos - 1) };
        self.nodes[id].last = last.max(self.nodes[id].first);
    }

    /// Index of the elem holding the bracket that closes the one at `at`.
    fn matching(&self, at: usize, open: &str, close: &str) -> Option<usize> {
        let mut depth = 0usize;
        for k in at..self.elems.len() {
            if self.is_punct(k, open) {
                depth += 1;
            } else if self.is_punct(k, close) {
                depth -= 1;
                if depth == 0 {
                    return Some(k);
                }
            }
        }
        None
    }

    fn at_block_end(&self) -> bool {
        self.pos >= self.elems.len() || self.is_punct(self.pos, "}")
    }

    fn parse_stmt(&mut self, parent: NodeId, depth: usize) -> Option<NodeId> {
        if self.pos >= self.elems.len() || self.is_punct(self.pos, "}") {
            return None;
        }
        if let Elem::Pragma(s, e) = self.elems[self.pos] {
            let id = self.push(NodeKind::Pragma { attached: None }, s, parent, depth);
            self.pos += 1;
            self.finish(id);
            if (self.associated)(s, e) && !self.at_block_end() {
                let attached = self.parse_stmt(id, depth);
                self.nodes[id].kind = NodeKind::Pragma { attached };
            }
            return Some(id);
        }
        let first = self.first_tok(self.pos);
        if self.tokens[first].kind == TokenKind::Preprocessor {
            let id = self.push(NodeKind::Preproc, first, parent, depth);
            self.pos += 1;
            self.finish(id);
            return Some(id);
        }
        if self.is_punct(self.pos, "{") {
            return Some(self.compound(parent, depth));
        }
        let header_closes = self.is_punct(self.pos + 1, "(") && self.matching(self.pos + 1, "(", ")").is_some();
        if self.is_keyword(self.pos, "for") && header_closes {
            return Some(self.for_loop(parent, depth));
        }
        for kw in ["while", "if", "switch"] {
            if self.is_keyword(self.pos, kw) && header_closes {
                return Some(self.control(parent, depth));
            }
        }
        if self.pos + 1 < self.elems.len() && self.is_punct(self.pos + 1, "(") && !header_closes {
            self.degraded = true;
        }
        if self.is_keyword(self.pos, "do") {
            return Some(self.do_while(parent, depth));
        }
        if self.is_keyword(self.pos, "case") || self.is_keyword(self.pos, "default") {
            return Some(self.label(parent, depth));
        }
        Some(self.simple(parent, depth))
    }

    fn compound(&mut self, parent: NodeId, depth: usize) -> NodeId {
        let first = self.first_tok(self.pos);
        let id = self.push(NodeKind::Compound, first, parent, depth);
        self.pos += 1;
        loop {
            if self.pos >= self.elems.len() {
                self.degraded = true;
                break;
            }
            if self.is_punct(self.pos, "}") {
                self.pos += 1;
                break;
            }
            self.parse_stmt(id, depth + 1);
        }
        self.finish(id);
        id
    }

    fn for_loop(&mut self, parent: NodeId, depth: usize) -> NodeId {
        let first = self.first_tok(self.pos);
        let open_elem = self.pos + 1;
        let id = self.push(NodeKind::Simple, first, parent, depth);
        let Some(close_elem) = self.matching(open_elem, "(", ")") else {
            self.degraded = true;
            self.pos = self.elems.len();
            self.finish(id);
            return id;
        };
        let header_open = self.first_tok(open_elem);
        let header_close = self.first_tok(close_elem);
        self.pos = close_elem + 1;
        let body = self.parse_stmt(id, depth + 1);
        self.nodes[id].kind = NodeKind::For {
            header_open,
            header_close,
            body,
        };
        self.finish(id);
        id
    }

    fn control(&mut self, parent: NodeId, depth: usize) -> NodeId {
        let first = self.first_tok(self.pos);
        let is_if = self.is_keyword(self.pos, "if");
        let id = self.push(NodeKind::Control, first, parent, depth);
        let Some(close) = self.matching(self.pos + 1, "(", ")") else {
            self.degraded = true;
            self.pos = self.elems.len();
            self.finish(id);
            return id;
        };
        self.pos = close + 1;
        self.parse_stmt(id, depth + 1);
        if is_if && self.is_keyword(self.pos, "else") {
            self.pos += 1;
            self.parse_stmt(id, depth + 1);
        }
        self.finish(id);
        id
    }

    fn do_while(&mut self, parent: NodeId, depth: usize) -> NodeId {
        let first = self.first_tok(self.pos);
        let id = self.push(NodeKind::Control, first, parent, depth);
        self.pos += 1;
        self.parse_stmt(id, depth + 1);
        if self.is_keyword(self.pos, "while") && self.is_punct(self.pos + 1, "(") {
            if let Some(close) = self.matching(self.pos + 1, "(", ")") {
                self.pos = close + 1;
                if self.is_punct(self.pos, ";") {
                    self.pos += 1;
                }
            }
        }
        self.finish(id);
        id
    }

    fn label(&mut self, parent: NodeId, depth: usize) -> NodeId {
        let first = self.first_tok(self.pos);
        let id = self.push(NodeKind::Simple, first, parent, depth);
        while self.pos < self.elems.len() && !self.is_punct(self.pos, ":") && !self.at_block_end() {
            self.pos += 1;
        }
        if self.is_punct(self.pos, ":") {
            self.pos += 1;
        }
        self.finish(id);
        id
    }

    /// Expression statement, declaration, or a definition with a brace body.
    fn simple(&mut self, parent: NodeId, depth: usize) -> NodeId {
        let first = self.first_tok(self.pos);
        let id = self.push(NodeKind::Simple, first, parent, depth);
        let mut nesting = 0usize;
        let mut prev: Option<&str> = None;
        while self.pos < self.elems.len() {
            if let Elem::Pragma(s, _) = self.elems[self.pos] {
                // Pragma in an expression position: recorded, never attached.
                let pid = self.push(NodeKind::Pragma { attached: None }, s, id, depth + 1);
                self.pos += 1;
                self.finish(pid);
                continue;
            }
            let lex = self.lexeme(self.pos).unwrap_or("");
            let punct = self.tokens[self.first_tok(self.pos)].kind == TokenKind::Punctuation;
            match (punct, lex) {
                (true, "(") | (true, "[") => nesting += 1,
                (true, ")") | (true, "]") => nesting = nesting.saturating_sub(1),
                (true, ";") if nesting == 0 => {
                    self.pos += 1;
                    break;
                }
                (true, "}") if nesting == 0 => break,
                (true, "{") => {
                    let initializer = nesting > 0
                        || matches!(
                            prev,
                            Some("=") | Some(",") | Some("(") | Some("[") | Some("return") | Some("?") | Some(":")
                        );
                    if initializer {
                        match self.matching(self.pos, "{", "}") {
                            Some(close) => {
                                self.pos = close + 1;
                                prev = Some("}");
                                continue;
                            }
                            None => {
                                self.degraded = true;
                                self.pos += 1;
                                prev = Some("{");
                                continue;
                            }
                        }
                    }
                    self.compound(id, depth + 1);
                    if self.is_punct(self.pos, ";") {
                        self.pos += 1;
                    }
                    break;
                }
                _ => {}
            }
            prev = Some(lex);
            self.pos += 1;
        }
        self.finish(id);
        id
    }
}

impl SyntaxTree {
    /// Next sibling of `id` that is not itself a pragma.
    pub fn next_statement(&self, id: NodeId) -> Option<NodeId> {
        let parent = self.nodes[id].parent?;
        let siblings = &self.nodes[parent].children;
        let at = siblings.iter().position(|&c| c == id)?;
        siblings[at + 1..]
            .iter()
            .copied()
            .find(|&c| !matches!(self.nodes[c].kind, NodeKind::Pragma { .. }))
    }

    pub fn for_loops(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.kind, NodeKind::For { .. }))
            .map(|(i, _)| i)
    }
}
