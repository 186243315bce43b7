//! The OMPBLEU sub-scores. Each returns a value in `[0, 1]`.

use std::collections::{BTreeMap, BTreeSet};

use crate::similarity::{lcs_ratio, lev_similarity, SimilarityEngine, SimilarityError};
use crate::syntax::{
    normalize_directive, AttachedConstruct, ClauseComponent, ClauseKind, CollapseTag, Directive, NormalizedDirective,
    RegionBlock, SourceUnit,
};

use super::{ClauseWeightTable, Diagnostics};

fn normalized(ds: &[Directive], gt_side: bool) -> Vec<NormalizedDirective> {
    ds.iter()
        .map(|d| normalize_directive(d, gt_side, &d.induction_vars))
        .collect()
}

fn component_set(ns: &[NormalizedDirective]) -> BTreeSet<ClauseComponent> {
    ns.iter().flat_map(|n| n.components.iter().cloned()).collect()
}

/// GT components treated as present although the generated side omits them:
/// loop-counter `private` clauses, when the generated side parallelizes a
/// loop nest whose counters cover the same variables. The nest is taken
/// whole so that a generated `collapse` cannot earn forgiveness.
pub fn forgiven_components(gt: &[Directive], gen: &[Directive]) -> BTreeSet<ClauseComponent> {
    let gen_components = component_set(&normalized(gen, false));
    let mut out = BTreeSet::new();
    for d in gt {
        let norm = normalize_directive(d, true, &d.induction_vars);
        for comp in &norm.implicitly_satisfiable {
            if gen_components.contains(comp) {
                continue;
            }
            let vars: BTreeSet<String> = d
                .clauses
                .iter()
                .filter(|c| c.kind == ClauseKind::Private && c.canonical() == comp.canonical)
                .flat_map(|c| c.variables.iter().cloned())
                .collect();
            let covered = gen.iter().any(|g| {
                g.is_loop_related()
                    && matches!(g.attached_construct, AttachedConstruct::ForLoop { .. })
                    && vars.is_subset(&g.nest_vars)
            });
            if covered {
                out.insert(comp.clone());
            }
        }
    }
    out
}

pub fn weighted_clause_score(
    gt: &[Directive],
    gen: &[Directive],
    weights: &ClauseWeightTable,
    diags: &mut Diagnostics,
) -> f64 {
    let gt_c = component_set(&normalized(gt, true));
    let gen_c = component_set(&normalized(gen, false));
    if gt_c.is_empty() {
        return 1.0;
    }
    let total: f64 = gt_c.iter().map(|c| weights.weight(c)).sum();
    let matched: f64 = gt_c.intersection(&gen_c).map(|c| weights.weight(c)).sum();
    for missing in gt_c.difference(&gen_c) {
        diags.push(
            "wc",
            format!(
                "missing clause `{}` (weight {})",
                missing.canonical,
                weights.weight(missing)
            ),
        );
    }
    matched / total
}

/// Clause type key: the clause name, so unknown clauses are still told apart.
fn type_key(c: &crate::syntax::Clause) -> String {
    match c.kind {
        ClauseKind::Unknown => c.name.clone(),
        k => k.as_str().to_string(),
    }
}

fn items_by_type(ds: &[Directive]) -> BTreeMap<String, BTreeSet<String>> {
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for c in ds.iter().flat_map(|d| &d.clauses) {
        if c.kind == ClauseKind::NumThreads {
            continue;
        }
        let items = c.items();
        if !items.is_empty() || c.kind.is_data_sharing() {
            out.entry(type_key(c)).or_default().extend(items);
        }
    }
    out
}

const DATA_SHARING: [&str; 5] = ["shared", "private", "reduction", "firstprivate", "lastprivate"];

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

pub fn variable_usage_score(gt: &[Directive], gen: &[Directive], diags: &mut Diagnostics) -> f64 {
    let (g, c) = (items_by_type(gt), items_by_type(gen));
    let mut types: BTreeSet<String> = DATA_SHARING.iter().map(|s| s.to_string()).collect();
    types.extend(g.keys().cloned());
    types.extend(c.keys().cloned());
    let empty = BTreeSet::new();
    let mut sum = 0.0;
    for t in &types {
        let (a, b) = (g.get(t).unwrap_or(&empty), c.get(t).unwrap_or(&empty));
        let j = jaccard(a, b);
        if j < 1.0 {
            let fmt = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(",");
            diags.push(
                "vu",
                format!(
                    "`{t}` items differ: reference {{{}}} vs generated {{{}}}",
                    fmt(a),
                    fmt(b)
                ),
            );
        }
        sum += j;
    }
    sum / types.len() as f64
}

/// Canonical directive strings of one side, one per line.
pub fn directive_string(ds: &[Directive], gt_side: bool) -> String {
    normalized(ds, gt_side)
        .iter()
        .map(|n| n.canonical.as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn integrated_semantic_score(
    gt_code: &str,
    gen_code: &str,
    gt: &[Directive],
    gen: &[Directive],
    engine: &SimilarityEngine,
    alpha: f64,
) -> Result<f64, SimilarityError> {
    let s_emb = engine.context_cosine(gt_code, gen_code)?;
    let s_lev = lev_similarity(&directive_string(gt, true), &directive_string(gen, false));
    Ok((alpha * s_emb + (1.0 - alpha) * s_lev).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct OrderElement {
    signature: String,
    ast_depth: usize,
    collapse: CollapseTag,
}

fn order_elements(ds: &[Directive], gt_side: bool, forgiven: &BTreeSet<ClauseComponent>) -> Vec<OrderElement> {
    ds.iter()
        .zip(normalized(ds, gt_side))
        .map(|(d, n)| {
            let mut signature = d.name();
            for c in n.components.iter().filter(|c| !(gt_side && forgiven.contains(c))) {
                signature.push(' ');
                signature.push_str(&c.canonical);
            }
            OrderElement {
                signature,
                ast_depth: d.ast_depth,
                collapse: d.collapse_tag,
            }
        })
        .collect()
}

pub fn ordering_score(gt: &[Directive], gen: &[Directive], diags: &mut Diagnostics) -> f64 {
    let forgiven = forgiven_components(gt, gen);
    let a = order_elements(gt, true, &forgiven);
    let b = order_elements(gen, false, &forgiven);
    let score = lcs_ratio(&a, &b);
    if score < 1.0 {
        let show = |v: &[OrderElement]| {
            v.iter()
                .map(|e| format!("[{} @depth {}]", e.signature, e.ast_depth))
                .collect::<Vec<_>>()
                .join(" ")
        };
        diags.push("or", format!("reference order {} vs generated {}", show(&a), show(&b)));
    }
    score
}

pub fn redundancy_coverage_score(gt: &[Directive], gen: &[Directive], diags: &mut Diagnostics) -> f64 {
    let gt_c = component_set(&normalized(gt, true));
    let gen_c = component_set(&normalized(gen, false));
    match (gt_c.is_empty(), gen_c.is_empty()) {
        (true, true) => return 1.0,
        (true, false) => {
            diags.push("rc", format!("reference has no clauses, generated has {}", gen_c.len()));
            return 0.0;
        }
        // No extras to penalize; only forgiven components can still match.
        (false, true) => diags.push("rc", "generated code has no clauses".to_string()),
        _ => {}
    }
    let forgiven = forgiven_components(gt, gen);
    let matched: BTreeSet<&ClauseComponent> = gt_c.intersection(&gen_c).chain(forgiven.iter()).collect();
    for extra in gen_c.difference(&gt_c) {
        diags.push("rc", format!("extra clause `{}`", extra.canonical));
    }
    let extra_penalty = if gen_c.is_empty() {
        1.0
    } else {
        (gt_c.len() as f64 / gen_c.len() as f64).min(1.0)
    };
    (matched.len() as f64 / gt_c.len() as f64) * extra_penalty
}

pub fn cyclomatic_ratio(gt: &[RegionBlock], gen: &[RegionBlock], diags: &mut Diagnostics) -> f64 {
    let mean = |bs: &[RegionBlock]| bs.iter().map(|b| b.complexity() as f64).sum::<f64>() / bs.len() as f64;
    match (gt.is_empty(), gen.is_empty()) {
        (true, true) => 1.0,
        (false, true) | (true, false) => {
            let side = if gt.is_empty() { "reference" } else { "generated" };
            diags.push("cc", format!("{side} code has no extractable parallel region"));
            0.0
        }
        _ => {
            let (a, b) = (mean(gt), mean(gen));
            a.min(b) / a.max(b)
        }
    }
}

/// Where a directive sits, as seen by the location score.
struct Placement {
    loop_related: bool,
    kinds: Vec<String>,
    /// Attached loop text (pragma lines removed) and its index.
    loop_ctx: Option<(String, usize)>,
    context: String,
}

fn placements(unit: &SourceUnit, ds: &[Directive]) -> Vec<Placement> {
    ds.iter()
        .map(|d| {
            let loop_ctx = match (d.attached_construct, &d.attached_span) {
                (AttachedConstruct::ForLoop { loop_index, .. }, Some(span)) => {
                    Some((unit.text_without_pragmas(span.clone()), loop_index))
                }
                _ => None,
            };
            Placement {
                loop_related: d.is_loop_related(),
                kinds: d.kinds.clone(),
                loop_ctx,
                context: d
                    .placement_span
                    .clone()
                    .map(|s| unit.text_without_pragmas(s))
                    .unwrap_or_default(),
            }
        })
        .collect()
}

/// Loop-index penalty `max(0, 1 - |Δ| / 2)`.
pub fn loop_index_penalty(gt_index: usize, gen_index: usize) -> f64 {
    (1.0 - gt_index.abs_diff(gen_index) as f64 / 2.0).max(0.0)
}

pub fn pragma_location_score(
    gt_unit: &SourceUnit,
    gt: &[Directive],
    gen_unit: &SourceUnit,
    gen: &[Directive],
    engine: &SimilarityEngine,
    diags: &mut Diagnostics,
) -> Result<f64, SimilarityError> {
    if gt.is_empty() {
        if !gen.is_empty() {
            diags.push("pl", "reference has no pragmas but generated code does".to_string());
        }
        return Ok(if gen.is_empty() { 1.0 } else { 0.0 });
    }
    let (gp, cp) = (placements(gt_unit, gt), placements(gen_unit, gen));
    let mut used = vec![false; cp.len()];
    let (mut loop_scores, mut other_scores) = (Vec::new(), Vec::new());
    for (gi, g) in gp.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (ci, c) in cp.iter().enumerate() {
            if used[ci] || c.loop_related != g.loop_related {
                continue;
            }
            let value = if g.loop_related {
                match (&g.loop_ctx, &c.loop_ctx) {
                    (Some((a, ia)), Some((b, ib))) => engine.context_cosine(a, b)? * loop_index_penalty(*ia, *ib),
                    (None, None) => 1.0,
                    _ => 0.0,
                }
            } else if g.kinds == c.kinds {
                engine.context_cosine(&g.context, &c.context)?
            } else {
                continue;
            };
            if best.is_none_or(|(_, v)| value > v) {
                best = Some((ci, value));
            }
        }
        let value = match best {
            Some((ci, v)) if v > 0.0 => {
                used[ci] = true;
                v
            }
            _ => 0.0,
        };
        if value < 1.0 {
            let what = if g.loop_ctx.is_none() && g.loop_related {
                "is not attached to a loop in the reference"
            } else if best.is_none() {
                "has no generated counterpart"
            } else {
                "is placed differently"
            };
            diags.push(
                "pl",
                format!(
                    "directive #{gi} `{}` {what} (contribution {value:.4})",
                    g.kinds.join(" ")
                ),
            );
        }
        if g.loop_related {
            loop_scores.push(value);
        } else {
            other_scores.push(value);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(match (loop_scores.is_empty(), other_scores.is_empty()) {
        (false, false) => (mean(&loop_scores) + mean(&other_scores)) / 2.0,
        (false, true) => mean(&loop_scores),
        (true, false) => mean(&other_scores),
        (true, true) => unreachable!("reference has at least one directive"),
    })
}
