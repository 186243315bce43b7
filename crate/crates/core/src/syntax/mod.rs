//! Extraction of OpenMP directives, loop contexts and parallel regions from C/C++ text.

mod clause;
mod directive;
mod normalize;
mod region;
mod token;
mod tree;

use std::ops::Range;

pub use clause::{Clause, ClauseKind};
pub use directive::{extract_directives, AttachedConstruct, CollapseTag, Directive};
pub use normalize::{normalize_directive, ClauseComponent, NormalizedDirective};
pub use region::{
    collapse_validity, loop_contexts, parallel_region_blocks, strip_openmp, LoopContext, RegionBlock, RegionScan,
};
pub use token::{is_keyword, tokenize, Token, TokenKind};

pub(crate) use clause::{parse_pragma_body, squash_ws};
pub(crate) use tree::pragma_ranges;

use tree::SyntaxTree;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Accept `# pragma OMP` style spellings in addition to the strict `#pragma omp`.
    pub relaxed_pragma: bool,
}

/// A tokenized C/C++ translation unit (or fragment) with its statement tree.
#[derive(Debug, Clone)]
pub struct SourceUnit {
    text: String,
    tokens: Vec<Token>,
    line_starts: Vec<usize>,
    options: ParseOptions,
    pub(crate) tree: SyntaxTree,
    /// Token ranges of every OpenMP pragma line.
    pub(crate) omp_ranges: Vec<(usize, usize)>,
    /// `true` for tokens inside an OpenMP pragma line.
    pub(crate) in_omp_pragma: Vec<bool>,
}

impl SourceUnit {
    pub fn new(text: impl Into<String>) -> Self {
        Self::with_options(text, ParseOptions::default())
    }

    pub fn with_options(text: impl Into<String>, options: ParseOptions) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        let mut line_starts = vec![0];
        line_starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));

        let omp_ranges: Vec<(usize, usize)> = tree::pragma_ranges(&tokens)
            .into_iter()
            .filter(|&(s, e)| omp_body(&tokens, s, e, options).is_some())
            .collect();
        let mut in_omp_pragma = vec![false; tokens.len()];
        for &(s, e) in &omp_ranges {
            in_omp_pragma[s..e].iter_mut().for_each(|f| *f = true);
        }
        let associated = |s: usize, e: usize| match omp_body(&tokens, s, e, options) {
            Some(body) => {
                let parsed = clause::parse_pragma_body(&body);
                !directive::is_standalone(&parsed.kinds, &parsed.clauses)
            }
            None => false,
        };
        let tree = tree::build(&tokens, &associated);
        SourceUnit {
            text,
            tokens,
            line_starts,
            options,
            tree,
            omp_ranges,
            in_omp_pragma,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn options(&self) -> ParseOptions {
        self.options
    }

    /// Set when the statement tree hit unbalanced brackets; directives are still extracted textually.
    pub fn is_degraded(&self) -> bool {
        self.tree.degraded
    }

    /// 1-based line containing `byte_offset`.
    pub fn line_of(&self, byte_offset: usize) -> usize {
        self.line_starts.partition_point(|&s| s <= byte_offset)
    }

    /// Text after `omp` for an OpenMP pragma line `[s, e)`.
    pub(crate) fn omp_pragma_body(&self, s: usize, e: usize) -> Option<String> {
        omp_body(&self.tokens, s, e, self.options)
    }

    pub(crate) fn node_span(&self, id: tree::NodeId) -> Range<usize> {
        let n = &self.tree.nodes[id];
        self.tokens[n.first].byte_offset..self.tokens[n.last].end()
    }

    /// Source text of `span` with every OpenMP pragma line removed.
    pub(crate) fn text_without_pragmas(&self, span: Range<usize>) -> String {
        let mut out = String::new();
        let mut cursor = span.start;
        for &(s, e) in &self.omp_ranges {
            let start = self.tokens[s].byte_offset;
            let end = self.tokens[e - 1].end();
            if end <= span.start || start >= span.end {
                continue;
            }
            out.push_str(&self.text[cursor..start.max(cursor)]);
            cursor = end.min(span.end).max(cursor);
        }
        if cursor < span.end {
            out.push_str(&self.text[cursor..span.end]);
        }
        out
    }
}

/// Text after `omp` for an OpenMP pragma line, or `None` for any other pragma.
fn omp_body(tokens: &[Token], s: usize, e: usize, options: ParseOptions) -> Option<String> {
    let head = &tokens[s].lexeme;
    if !options.relaxed_pragma && head != "#pragma" {
        return None;
    }
    let mut words = tokens[s + 1..e].iter().filter(|t| !t.is_trivia());
    let first = words.next()?;
    let is_omp = if options.relaxed_pragma {
        first.lexeme.eq_ignore_ascii_case("omp")
    } else {
        first.lexeme == "omp"
    };
    if !is_omp {
        return None;
    }
    let mut body = String::new();
    let mut seen_omp = false;
    for t in &tokens[s + 1..e] {
        if !seen_omp {
            seen_omp = std::ptr::eq(t, first);
            continue;
        }
        match t.kind {
            TokenKind::Comment => body.push(' '),
            TokenKind::Whitespace => body.push(' '),
            _ => body.push_str(&t.lexeme),
        }
    }
    Some(body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn detok(unit: &SourceUnit) -> String {
        unit.tokens().iter().map(|t| t.lexeme.as_str()).collect()
    }

    #[test]
    fn line_lookup() {
        let u = SourceUnit::new("a\nb\nc");
        assert_eq!(u.line_of(0), 1);
        assert_eq!(u.line_of(2), 2);
        assert_eq!(u.line_of(4), 3);
    }

    #[test]
    fn strict_and_relaxed_detection() {
        let src = "# pragma OMP parallel\n{}\n";
        assert!(extract_directives(&SourceUnit::new(src)).is_empty());
        let relaxed = SourceUnit::with_options(src, ParseOptions { relaxed_pragma: true });
        assert_eq!(extract_directives(&relaxed).len(), 1);
    }

    proptest! {
        #[test]
        fn round_trip_any_text(s in "\\PC{0,200}") {
            let u = SourceUnit::new(s.clone());
            prop_assert_eq!(detok(&u), s);
            let offsets: Vec<usize> = u.tokens().iter().map(|t| t.byte_offset).collect();
            prop_assert!(offsets.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn round_trip_code_like(s in "[a-z#{}();=+<>*/\"' \n\\\\]{0,120}") {
            let u = SourceUnit::new(s.clone());
            prop_assert_eq!(detok(&u), s);
            prop_assert!(u.tokens().iter().all(|t| !t.lexeme.is_empty()));
        }

        #[test]
        fn strip_removes_everything(s in "(#pragma omp [a-z ]{0,12}\n|for\\(i=0;i<n;i\\+\\+\\)|\\{|\\}|x\\+=1;|\n| ){0,20}") {
            let u = SourceUnit::new(s);
            let stripped = strip_openmp(&u);
            prop_assert!(extract_directives(&stripped).is_empty());
            let twice = strip_openmp(&stripped);
            prop_assert_eq!(twice.text(), stripped.text());
        }
    }
}
