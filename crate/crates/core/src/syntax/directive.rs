use std::collections::{BTreeSet, HashMap};
use std::ops::Range;

use serde::Serialize;

use super::clause::{parse_pragma_body, Clause, ClauseKind};
use super::region::{induction_vars_of, nesting_depth_of};
use super::tree::NodeKind;
use super::{omp_body, SourceUnit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttachedConstruct {
    ForLoop { loop_index: usize, actual_nesting: usize },
    Block,
    Statement,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CollapseTag {
    NotApplicable,
    CollapseValid,
    CollapseInvalid,
}

/// One parsed `#pragma omp` line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Directive {
    pub kinds: Vec<String>,
    pub clauses: Vec<Clause>,
    pub byte_offset: usize,
    pub line: usize,
    /// Pragma text as written, without the trailing newline.
    pub text: String,
    pub ast_depth: usize,
    pub attached_construct: AttachedConstruct,
    pub collapse_tag: CollapseTag,
    /// Counters of the loops associated with this directive (collapse depth, default 1).
    pub induction_vars: BTreeSet<String>,
    /// Counters of the whole perfect nest under the attached loop, whatever the collapse depth.
    pub nest_vars: BTreeSet<String>,
    #[serde(skip)]
    pub(crate) attached_span: Option<Range<usize>>,
    /// Attached construct, or the next statement for stand-alone directives.
    #[serde(skip)]
    pub(crate) placement_span: Option<Range<usize>>,
}

const LOOP_WORDS: &[&str] = &["for", "do", "simd", "loop", "taskloop", "distribute"];

impl Directive {
    pub fn name(&self) -> String {
        self.kinds.join(" ")
    }

    pub fn collapse_n(&self) -> Option<u32> {
        self.clauses.iter().find_map(|c| c.collapse_n)
    }

    fn has_collapse(&self) -> bool {
        self.clauses
            .iter()
            .any(|c| c.kind == ClauseKind::Collapse || c.name == "collapse")
    }

    /// Loop-associated constructs: for/simd/loop/taskloop/distribute, or any directive carrying collapse.
    pub fn is_loop_related(&self) -> bool {
        self.kinds.iter().any(|k| LOOP_WORDS.contains(&k.as_str())) || self.has_collapse()
    }

    pub fn is_parallel_family(&self) -> bool {
        self.kinds.iter().any(|k| k == "parallel")
    }

    pub fn attached_loop_index(&self) -> Option<usize> {
        match self.attached_construct {
            AttachedConstruct::ForLoop { loop_index, .. } => Some(loop_index),
            _ => None,
        }
    }
}

/// Directives with no associated statement.
pub(crate) fn is_standalone(kinds: &[String], clauses: &[Clause]) -> bool {
    let Some(first) = kinds.first() else {
        return true;
    };
    let name = kinds.join(" ");
    match first.as_str() {
        "barrier" | "taskwait" | "taskyield" | "flush" | "threadprivate" | "declare" | "requires" | "cancel"
        | "cancellation" | "depobj" | "scan" | "error" | "nothing" | "interop" | "allocate" | "assumes" | "end"
        | "begin" => true,
        "target" => matches!(
            name.as_str(),
            "target update" | "target enter data" | "target exit data"
        ),
        "ordered" => clauses
            .iter()
            .any(|c| matches!(c.kind, ClauseKind::Depend | ClauseKind::Doacross)),
        _ => false,
    }
}

/// All OpenMP directives of `unit` in source order.
pub fn extract_directives(unit: &SourceUnit) -> Vec<Directive> {
    let tree = &unit.tree;
    let loop_ids: Vec<usize> = tree.for_loops().collect();
    let pragma_nodes: HashMap<usize, usize> = tree
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| matches!(n.kind, NodeKind::Pragma { .. }))
        .map(|(id, n)| (n.first, id))
        .collect();
    let mut out = Vec::new();
    for &(start, end) in &unit.omp_ranges {
        let node_id = pragma_nodes.get(&start).copied();
        let (attached, depth) = match node_id.map(|id| &tree.nodes[id]) {
            Some(n) => match n.kind {
                NodeKind::Pragma { attached } => (attached, n.depth),
                _ => (None, n.depth),
            },
            None => (None, 0),
        };
        let Some(body) = omp_body(unit.tokens(), start, end, unit.options()) else {
            continue;
        };
        let parsed = parse_pragma_body(&body);
        if parsed.kinds.is_empty() {
            continue;
        }
        let start_tok = &unit.tokens()[start];
        let text_end = unit.tokens()[end - 1].end();
        let mut d = Directive {
            kinds: parsed.kinds,
            clauses: parsed.clauses,
            byte_offset: start_tok.byte_offset,
            line: start_tok.line,
            text: unit.text()[start_tok.byte_offset..text_end].trim_end().to_string(),
            ast_depth: depth,
            attached_construct: AttachedConstruct::None,
            collapse_tag: CollapseTag::NotApplicable,
            induction_vars: BTreeSet::new(),
            nest_vars: BTreeSet::new(),
            attached_span: None,
            placement_span: None,
        };
        if let Some(a) = attached {
            d.attached_span = Some(unit.node_span(a));
            d.attached_construct = match tree.nodes[a].kind {
                NodeKind::For { .. } => {
                    let loop_index = loop_ids.iter().position(|&l| l == a).unwrap_or(0);
                    let actual_nesting = nesting_depth_of(unit, a);
                    let associated = d.collapse_n().unwrap_or(1) as usize;
                    d.induction_vars = induction_vars_of(unit, a, associated.min(actual_nesting));
                    d.nest_vars = induction_vars_of(unit, a, actual_nesting);
                    AttachedConstruct::ForLoop {
                        loop_index,
                        actual_nesting,
                    }
                }
                NodeKind::Compound => AttachedConstruct::Block,
                _ => AttachedConstruct::Statement,
            };
            d.placement_span = d.attached_span.clone();
        } else if let Some(next) = node_id.and_then(|id| tree.next_statement(id)) {
            d.placement_span = Some(unit.node_span(next));
        }
        d.collapse_tag = match (d.has_collapse(), d.attached_construct, d.collapse_n()) {
            (false, _, _) => CollapseTag::NotApplicable,
            (true, AttachedConstruct::ForLoop { actual_nesting, .. }, Some(n)) if n as usize <= actual_nesting => {
                CollapseTag::CollapseValid
            }
            _ => CollapseTag::CollapseInvalid,
        };
        out.push(d);
    }
    out
}
