use std::collections::BTreeSet;
use std::ops::Range;

use serde::Serialize;

use super::directive::{extract_directives, AttachedConstruct, CollapseTag, Directive};
use super::token::TokenKind;
use super::tree::{NodeId, NodeKind};
use super::SourceUnit;

/// One `for` loop of a unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoopContext {
    /// Loop header and body as written.
    pub context_text: String,
    /// Ordinal among all `for` loops of the unit, in source order.
    pub loop_index: usize,
    /// Number of perfectly nested loops rooted here (at least 1).
    pub nesting_depth: usize,
    #[serde(skip)]
    pub span: Range<usize>,
}

/// Code governed by a parallel-family directive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegionBlock {
    pub block_text: String,
    pub decision_count: usize,
    /// Index of the governing directive in `extract_directives` order.
    pub directive_index: usize,
}

impl RegionBlock {
    pub fn complexity(&self) -> usize {
        self.decision_count + 1
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RegionScan {
    pub blocks: Vec<RegionBlock>,
    pub diagnostics: Vec<String>,
}

pub fn loop_contexts(unit: &SourceUnit) -> Vec<LoopContext> {
    unit.tree
        .for_loops()
        .enumerate()
        .map(|(loop_index, id)| {
            let span = unit.node_span(id);
            LoopContext {
                context_text: unit.text()[span.clone()].to_string(),
                loop_index,
                nesting_depth: nesting_depth_of(unit, id),
                span,
            }
        })
        .collect()
}

/// The inner loop when `for_id` is immediately and perfectly nested around another loop.
///
/// The body must be that loop, or a compound holding exactly one loop plus
/// optional bare declarations (`int j;`).
fn perfect_inner(unit: &SourceUnit, for_id: NodeId) -> Option<NodeId> {
    let nodes = &unit.tree.nodes;
    let NodeKind::For { body: Some(body), .. } = nodes[for_id].kind else {
        return None;
    };
    match nodes[body].kind {
        NodeKind::For { .. } => Some(body),
        NodeKind::Compound => {
            let mut inner = None;
            for &c in &nodes[body].children {
                match nodes[c].kind {
                    NodeKind::For { .. } if inner.is_none() => inner = Some(c),
                    NodeKind::Simple if is_bare_declaration(unit, c) => {}
                    _ => return None,
                }
            }
            inner
        }
        _ => None,
    }
}

fn is_bare_declaration(unit: &SourceUnit, id: NodeId) -> bool {
    let n = &unit.tree.nodes[id];
    let toks: Vec<_> = unit.tokens()[n.first..=n.last]
        .iter()
        .filter(|t| !t.is_trivia())
        .collect();
    toks.len() >= 3
        && toks.last().is_some_and(|t| t.lexeme == ";")
        && toks[..toks.len() - 1]
            .iter()
            .all(|t| matches!(t.kind, TokenKind::Identifier | TokenKind::Keyword) || t.lexeme == ",")
}

pub(crate) fn nesting_depth_of(unit: &SourceUnit, for_id: NodeId) -> usize {
    let mut depth = 1;
    let mut cur = for_id;
    while let Some(inner) = perfect_inner(unit, cur) {
        depth += 1;
        cur = inner;
    }
    depth
}

/// Counters of the first `count` loops of the perfect nest rooted at `for_id`.
pub(crate) fn induction_vars_of(unit: &SourceUnit, for_id: NodeId, count: usize) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut cur = Some(for_id);
    for _ in 0..count.max(1) {
        let Some(id) = cur else { break };
        out.extend(loop_counters(unit, id));
        cur = perfect_inner(unit, id);
    }
    out
}

/// Variables declared or assigned in the init part of a loop header.
fn loop_counters(unit: &SourceUnit, for_id: NodeId) -> Vec<String> {
    let NodeKind::For {
        header_open,
        header_close,
        ..
    } = unit.tree.nodes[for_id].kind
    else {
        return Vec::new();
    };
    let toks: Vec<_> = unit.tokens()[header_open + 1..header_close]
        .iter()
        .filter(|t| !t.is_trivia())
        .collect();
    let init_end = toks.iter().position(|t| t.lexeme == ";");
    let init = &toks[..init_end.unwrap_or(toks.len())];
    let mut out = Vec::new();
    let mut depth = 0i32;
    for (k, t) in init.iter().enumerate() {
        match t.lexeme.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            "=" | ":" if depth == 0 && k > 0 && init[k - 1].kind == TokenKind::Identifier => {
                out.push(init[k - 1].lexeme.clone());
            }
            _ => {}
        }
    }
    out
}

pub fn collapse_validity(d: &Directive, attached_loop: &LoopContext) -> CollapseTag {
    match (d.collapse_n(), d.attached_construct) {
        (None, _) if d.collapse_tag == CollapseTag::NotApplicable => CollapseTag::NotApplicable,
        (Some(n), AttachedConstruct::ForLoop { .. }) if n as usize <= attached_loop.nesting_depth => {
            CollapseTag::CollapseValid
        }
        _ => CollapseTag::CollapseInvalid,
    }
}

const DECISION_KEYWORDS: &[&str] = &["if", "for", "while", "case"];
const DECISION_OPERATORS: &[&str] = &["&&", "||"];

fn decision_count(unit: &SourceUnit, span: &Range<usize>) -> usize {
    unit.tokens()
        .iter()
        .enumerate()
        .filter(|(_, t)| t.byte_offset >= span.start && t.end() <= span.end)
        .filter(|&(i, _)| !unit.in_omp_pragma[i])
        .filter(|(_, t)| match t.kind {
            TokenKind::Keyword => DECISION_KEYWORDS.contains(&t.lexeme.as_str()),
            TokenKind::Punctuation => DECISION_OPERATORS.contains(&t.lexeme.as_str()),
            _ => false,
        })
        .count()
}

/// Blocks governed by every directive containing `parallel`.
///
/// Loop-associated parallel directives only govern a `for` loop; when the
/// attached construct is anything else the block is omitted.
pub fn parallel_region_blocks(unit: &SourceUnit) -> RegionScan {
    let mut scan = RegionScan::default();
    for (idx, d) in extract_directives(unit).iter().enumerate() {
        if !d.is_parallel_family() {
            continue;
        }
        let span = match (&d.attached_span, d.attached_construct) {
            (Some(s), AttachedConstruct::ForLoop { .. }) => s.clone(),
            (Some(s), _) if !d.is_loop_related() => s.clone(),
            (Some(_), _) => {
                scan.diagnostics
                    .push(format!("line {}: `{}` is not attached to a for loop", d.line, d.name()));
                continue;
            }
            (None, _) => {
                scan.diagnostics
                    .push(format!("line {}: `{}` has no following block", d.line, d.name()));
                continue;
            }
        };
        scan.blocks.push(RegionBlock {
            block_text: unit.text()[span.clone()].to_string(),
            decision_count: decision_count(unit, &span),
            directive_index: idx,
        });
    }
    scan
}

/// Remove every OpenMP pragma line (with its continuations and newline); all other bytes are kept.
pub fn strip_openmp(unit: &SourceUnit) -> SourceUnit {
    let text = unit.text();
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for &(s, e) in &unit.omp_ranges {
        let mut start = unit.tokens()[s].byte_offset;
        while start > 0 && matches!(bytes[start - 1], b' ' | b'\t') {
            start -= 1;
        }
        if start > 0 && bytes[start - 1] != b'\n' {
            // Something other than indentation precedes the pragma on its line.
            start = unit.tokens()[s].byte_offset;
        }
        let last_end = unit.tokens()[e - 1].end();
        let end = match text[last_end..].find('\n') {
            Some(n) => last_end + n + 1,
            None => text.len(),
        };
        let start = start.max(cursor);
        out.push_str(&text[cursor..start]);
        cursor = end;
    }
    out.push_str(&text[cursor.min(text.len())..]);
    SourceUnit::with_options(out, unit.options())
}
