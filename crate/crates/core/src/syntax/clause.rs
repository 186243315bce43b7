//! Hand-written grammar for the argument text of `#pragma omp` lines.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Serialize, Serializer};

macro_rules! clause_kinds {
    ($($variant:ident => $name:literal),* $(,)?) => {
        /// OpenMP 5.x clause inventory.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum ClauseKind {
            $($variant,)*
            /// Argument of `critical(name)`.
            CriticalName,
            Unknown,
        }

        impl ClauseKind {
            pub fn from_name(name: &str) -> ClauseKind {
                match name {
                    $($name => ClauseKind::$variant,)*
                    _ => ClauseKind::Unknown,
                }
            }

            pub fn as_str(self) -> &'static str {
                match self {
                    $(ClauseKind::$variant => $name,)*
                    ClauseKind::CriticalName => "critical-name",
                    ClauseKind::Unknown => "unknown",
                }
            }
        }
    };
}

clause_kinds! {
    Private => "private",
    Shared => "shared",
    Firstprivate => "firstprivate",
    Lastprivate => "lastprivate",
    Reduction => "reduction",
    InReduction => "in_reduction",
    TaskReduction => "task_reduction",
    Default => "default",
    Schedule => "schedule",
    Collapse => "collapse",
    NumThreads => "num_threads",
    If => "if",
    Nowait => "nowait",
    Ordered => "ordered",
    Copyin => "copyin",
    Copyprivate => "copyprivate",
    Linear => "linear",
    Aligned => "aligned",
    Safelen => "safelen",
    Simdlen => "simdlen",
    ProcBind => "proc_bind",
    Untied => "untied",
    Mergeable => "mergeable",
    Final => "final",
    Priority => "priority",
    Grainsize => "grainsize",
    NumTasks => "num_tasks",
    Nogroup => "nogroup",
    Depend => "depend",
    Doacross => "doacross",
    Map => "map",
    Device => "device",
    ThreadLimit => "thread_limit",
    NumTeams => "num_teams",
    DistSchedule => "dist_schedule",
    IsDevicePtr => "is_device_ptr",
    UseDevicePtr => "use_device_ptr",
    UseDeviceAddr => "use_device_addr",
    HasDeviceAddr => "has_device_addr",
    Defaultmap => "defaultmap",
    Allocate => "allocate",
    Allocator => "allocator",
    UsesAllocators => "uses_allocators",
    Order => "order",
    Bind => "bind",
    Affinity => "affinity",
    Detach => "detach",
    Nontemporal => "nontemporal",
    Uniform => "uniform",
    Inbranch => "inbranch",
    Notinbranch => "notinbranch",
    Read => "read",
    Write => "write",
    Update => "update",
    Capture => "capture",
    Compare => "compare",
    Fail => "fail",
    Weak => "weak",
    SeqCst => "seq_cst",
    AcqRel => "acq_rel",
    Acquire => "acquire",
    Release => "release",
    Relaxed => "relaxed",
    Hint => "hint",
    Filter => "filter",
    To => "to",
    From => "from",
    Link => "link",
    Enter => "enter",
    DeviceType => "device_type",
    Threads => "threads",
    Simd => "simd",
    Inclusive => "inclusive",
    Exclusive => "exclusive",
    Nocontext => "nocontext",
    Novariants => "novariants",
    Partial => "partial",
    Full => "full",
    Sizes => "sizes",
    When => "when",
    At => "at",
    Severity => "severity",
    Message => "message",
    Indirect => "indirect",
    Align => "align",
    Destroy => "destroy",
    Init => "init",
    Use => "use",
}

impl fmt::Display for ClauseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for ClauseKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl ClauseKind {
    /// Clauses whose argument is a list of variables (optionally after a `modifier:` prefix).
    pub fn takes_variable_list(self) -> bool {
        use ClauseKind::*;
        matches!(
            self,
            Private
                | Shared
                | Firstprivate
                | Lastprivate
                | Reduction
                | InReduction
                | TaskReduction
                | Copyin
                | Copyprivate
                | Linear
                | Aligned
                | Nontemporal
                | Uniform
                | IsDevicePtr
                | UseDevicePtr
                | UseDeviceAddr
                | HasDeviceAddr
                | Allocate
                | Map
                | Depend
                | Affinity
                | To
                | From
                | Link
                | Enter
                | Inclusive
                | Exclusive
        )
    }

    /// The five data-sharing attribute clauses.
    pub fn is_data_sharing(self) -> bool {
        use ClauseKind::*;
        matches!(self, Shared | Private | Reduction | Firstprivate | Lastprivate)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Clause {
    pub kind: ClauseKind,
    /// Clause name as written.
    pub name: String,
    pub raw_text: String,
    pub args_ordered: Vec<String>,
    pub variables: BTreeSet<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduction_op: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collapse_n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule_kind: Option<String>,
    /// Modifiers written before a top-level `:` (e.g. `inscan`, `conditional`, `to` in map).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub modifiers: Vec<String>,
}

impl Clause {
    /// The argument items compared by variable-usage scoring: the variable
    /// set for list clauses, otherwise the ordered arguments.
    pub fn items(&self) -> BTreeSet<String> {
        if self.kind.takes_variable_list() {
            self.variables.clone()
        } else {
            self.args_ordered.iter().cloned().collect()
        }
    }

    /// Canonical, order-normalised text of this clause.
    pub fn canonical(&self) -> String {
        match self.kind {
            ClauseKind::Reduction | ClauseKind::InReduction | ClauseKind::TaskReduction => {
                let mut head = self.modifiers.join(",");
                if !head.is_empty() {
                    head.push(',');
                }
                let vars: Vec<&str> = self.variables.iter().map(String::as_str).collect();
                format!(
                    "{}({}{}:{})",
                    self.name_key(),
                    head,
                    self.reduction_op.as_deref().unwrap_or(""),
                    vars.join(",")
                )
            }
            k if k.takes_variable_list() => {
                let vars: Vec<&str> = self.variables.iter().map(String::as_str).collect();
                if self.modifiers.is_empty() {
                    format!("{}({})", self.name_key(), vars.join(","))
                } else {
                    format!("{}({}:{})", self.name_key(), self.modifiers.join(","), vars.join(","))
                }
            }
            _ if self.args_ordered.is_empty() => self.name_key(),
            _ => format!("{}({})", self.name_key(), self.args_ordered.join(",")),
        }
    }

    fn name_key(&self) -> String {
        match self.kind {
            ClauseKind::Unknown => self.name.clone(),
            k => k.as_str().to_string(),
        }
    }
}

/// Directive-name words and what may follow them inside one combined construct.
fn directive_successors(word: &str) -> Option<&'static [&'static str]> {
    Some(match word {
        "parallel" => &["for", "do", "sections", "loop", "masked", "master", "workshare"],
        "for" | "do" => &["simd"],
        "target" => &["teams", "parallel", "simd", "data", "enter", "exit", "update", "loop"],
        "enter" | "exit" => &["data"],
        "teams" => &["distribute", "loop"],
        "distribute" => &["parallel", "simd"],
        "masked" | "master" => &["taskloop"],
        "taskloop" => &["simd"],
        "declare" => &["simd", "target", "reduction", "variant", "mapper"],
        "cancellation" => &["point"],
        "begin" => &["declare", "assumes", "metadirective"],
        "end" => &[
            "parallel",
            "for",
            "do",
            "sections",
            "single",
            "critical",
            "master",
            "masked",
            "declare",
            "target",
            "taskgroup",
            "ordered",
            "assumes",
            "metadirective",
        ],
        "simd" | "sections" | "section" | "single" | "critical" | "atomic" | "barrier" | "flush" | "ordered"
        | "task" | "taskwait" | "taskyield" | "taskgroup" | "threadprivate" | "loop" | "cancel" | "scan" | "depobj"
        | "requires" | "metadirective" | "tile" | "unroll" | "scope" | "nothing" | "error" | "interop" | "dispatch"
        | "allocate" | "assume" | "assumes" | "workshare" | "data" | "update" | "reduction" | "variant" | "mapper"
        | "point" => &[],
        _ => return None,
    })
}

/// Result of parsing the text after `#pragma omp`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ParsedPragma {
    pub kinds: Vec<String>,
    pub clauses: Vec<Clause>,
}

struct Scanner<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn skip_separators(&mut self) {
        let rest = &self.s[self.pos..];
        let trimmed = rest.trim_start_matches(|c: char| c.is_whitespace() || c == ',');
        self.pos += rest.len() - trimmed.len();
    }

    fn skip_ws(&mut self) {
        let rest = &self.s[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn word(&mut self) -> Option<&'a str> {
        let rest = &self.s[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        if len == 0 {
            return None;
        }
        self.pos += len;
        Some(&rest[..len])
    }

    fn peek_char(&mut self) -> Option<char> {
        let save = self.pos;
        self.skip_ws();
        let c = self.s[self.pos..].chars().next();
        if c != Some('(') {
            self.pos = save;
        }
        c
    }

    /// Balanced parenthesised text; the scanner must sit on `(`.
    fn parens(&mut self) -> String {
        let rest = &self.s[self.pos..];
        let mut depth = 0usize;
        for (i, c) in rest.char_indices() {
            match c {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        self.pos += i + 1;
                        return rest[1..i].to_string();
                    }
                }
                _ => {}
            }
        }
        self.pos = self.s.len();
        rest.get(1..).unwrap_or("").to_string()
    }

    fn skip_garbage(&mut self) {
        let rest = &self.s[self.pos..];
        let c = rest.chars().next().map_or(0, char::len_utf8);
        self.pos += c;
    }

    fn done(&self) -> bool {
        self.pos >= self.s.len()
    }
}

/// Parse the directive words and clauses of an OpenMP pragma body (the text after `omp`).
pub(crate) fn parse_pragma_body(body: &str) -> ParsedPragma {
    let mut sc = Scanner { s: body, pos: 0 };
    let mut kinds: Vec<String> = Vec::new();
    let mut clauses = Vec::new();

    // Directive words.
    loop {
        sc.skip_ws();
        let save = sc.pos;
        let Some(word) = sc.word() else { break };
        let accepted = match kinds.last() {
            None => true,
            Some(prev) => directive_successors(prev).is_some_and(|next| next.contains(&word)),
        };
        if !accepted {
            sc.pos = save;
            break;
        }
        kinds.push(word.to_string());
        if sc.peek_char() == Some('(') {
            let arg = sc.parens();
            clauses.push(directive_argument(word, &arg));
            break;
        }
        if directive_successors(word).is_none() {
            break;
        }
    }

    // Clauses.
    while !sc.done() {
        sc.skip_separators();
        if sc.done() {
            break;
        }
        let Some(name) = sc.word() else {
            sc.skip_garbage();
            continue;
        };
        let args = if sc.peek_char() == Some('(') {
            Some(sc.parens())
        } else {
            None
        };
        clauses.push(parse_clause(name, args.as_deref()));
    }

    ParsedPragma { kinds, clauses }
}

fn directive_argument(directive: &str, arg: &str) -> Clause {
    let (kind, name) = if directive == "critical" {
        (ClauseKind::CriticalName, "critical-name".to_string())
    } else {
        (ClauseKind::Unknown, format!("{directive}-args"))
    };
    let items: Vec<String> = split_top_level(arg, ',').iter().map(|s| squash_ws(s)).collect();
    Clause {
        kind,
        name,
        raw_text: format!("{directive}({arg})"),
        variables: BTreeSet::new(),
        args_ordered: items.into_iter().filter(|s| !s.is_empty()).collect(),
        reduction_op: None,
        collapse_n: None,
        schedule_kind: None,
        modifiers: Vec::new(),
    }
}

const SCHEDULE_KINDS: &[&str] = &["static", "dynamic", "guided", "auto", "runtime"];

pub(crate) fn parse_clause(name: &str, args: Option<&str>) -> Clause {
    let raw_text = match args {
        Some(a) => format!("{name}({a})"),
        None => name.to_string(),
    };
    let mut clause = Clause {
        kind: ClauseKind::from_name(name),
        name: name.to_string(),
        raw_text,
        args_ordered: Vec::new(),
        variables: BTreeSet::new(),
        reduction_op: None,
        collapse_n: None,
        schedule_kind: None,
        modifiers: Vec::new(),
    };
    let Some(args) = args else {
        return clause;
    };

    match clause.kind {
        ClauseKind::Reduction | ClauseKind::InReduction | ClauseKind::TaskReduction => {
            match rsplit_top_level_colon(args) {
                Some((head, vars)) => {
                    let mut head: Vec<String> = split_top_level(head, ',').iter().map(|s| squash_ws(s)).collect();
                    let op = head.pop().unwrap_or_default();
                    clause.variables = variable_set(vars);
                    if op.is_empty() || clause.variables.is_empty() {
                        clause.kind = ClauseKind::Unknown;
                    }
                    clause.args_ordered = head.to_vec();
                    clause.args_ordered.push(op.clone());
                    clause.args_ordered.extend(variable_items(vars));
                    clause.modifiers = head;
                    clause.reduction_op = Some(op);
                }
                None => {
                    clause.kind = ClauseKind::Unknown;
                    clause.args_ordered = variable_items(args);
                }
            }
        }
        ClauseKind::Collapse => {
            let text = squash_ws(args);
            match text.parse::<u32>() {
                Ok(n) if n >= 1 => clause.collapse_n = Some(n),
                _ => clause.kind = ClauseKind::Unknown,
            }
            clause.args_ordered = vec![text];
        }
        ClauseKind::Schedule | ClauseKind::DistSchedule => {
            // schedule([modifier[, modifier]:]kind[, chunk])
            let (mods, rest) = match split_first_top_level_colon(args) {
                Some((m, r)) => (split_top_level(m, ',').iter().map(|s| squash_ws(s)).collect(), r),
                None => (Vec::new(), args),
            };
            let rest: Vec<String> = split_top_level(rest, ',').iter().map(|s| squash_ws(s)).collect();
            clause.schedule_kind = rest.first().filter(|k| SCHEDULE_KINDS.contains(&k.as_str())).cloned();
            clause.args_ordered = mods.iter().cloned().chain(rest).collect();
            clause.modifiers = mods;
        }
        k if k.takes_variable_list() => {
            let list = match split_first_top_level_colon(args) {
                Some((m, r)) if has_list_modifier(k) => {
                    clause.modifiers = split_top_level(m, ',').iter().map(|s| squash_ws(s)).collect();
                    r
                }
                _ => args,
            };
            // linear(x:step) and aligned(x:align) carry a trailing ':' value.
            let list = if matches!(k, ClauseKind::Linear | ClauseKind::Aligned) {
                rsplit_top_level_colon(list).map_or(list, |(vars, _)| vars)
            } else {
                list
            };
            clause.variables = variable_set(list);
            clause.args_ordered = variable_items(list);
        }
        _ => {
            clause.args_ordered = split_top_level(args, ',')
                .iter()
                .map(|s| squash_ws(s))
                .filter(|s| !s.is_empty())
                .collect();
        }
    }
    clause
}

fn has_list_modifier(kind: ClauseKind) -> bool {
    use ClauseKind::*;
    matches!(
        kind,
        Lastprivate | Map | Depend | Allocate | Affinity | To | From | Linear
    )
}

fn variable_items(list: &str) -> Vec<String> {
    split_top_level(list, ',')
        .iter()
        .map(|s| squash_ws(s))
        .filter(|s| !s.is_empty())
        .collect()
}

/// Base names of list items: `a[0:n]` contributes `a`.
fn variable_set(list: &str) -> BTreeSet<String> {
    variable_items(list)
        .into_iter()
        .map(|item| match item.find('[') {
            Some(i) if i > 0 => item[..i].trim().to_string(),
            _ => item,
        })
        .collect()
}

/// Split on `sep` outside any bracket nesting.
pub(crate) fn split_top_level(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            c if c == sep && depth == 0 => {
                out.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn top_level_colons(s: &str) -> Vec<usize> {
    let mut depth = 0i32;
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => depth -= 1,
            b':' if depth == 0 => {
                let double = bytes.get(i + 1) == Some(&b':') || (i > 0 && bytes[i - 1] == b':');
                if !double {
                    out.push(i);
                }
            }
            _ => {}
        }
    }
    out
}

fn rsplit_top_level_colon(s: &str) -> Option<(&str, &str)> {
    top_level_colons(s).last().map(|&i| (&s[..i], &s[i + 1..]))
}

fn split_first_top_level_colon(s: &str) -> Option<(&str, &str)> {
    top_level_colons(s).first().map(|&i| (&s[..i], &s[i + 1..]))
}

/// Collapse whitespace, keeping a single space only between two word characters.
pub(crate) fn squash_ws(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for c in s.trim().chars() {
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space {
            let prev_word = out.chars().last().is_some_and(|p| p.is_alphanumeric() || p == '_');
            if prev_word && (c.is_alphanumeric() || c == '_') {
                out.push(' ');
            }
            pending_space = false;
        }
        out.push(c);
    }
    out
}
