use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::Serialize;

use super::clause::ClauseKind;
use super::directive::Directive;

/// One normalized clause instance, the unit compared by WC, RC and OR.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ClauseComponent {
    pub kind: ClauseKind,
    pub canonical: String,
}

impl Ord for ClauseComponent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.canonical.cmp(&other.canonical).then(self.kind.cmp(&other.kind))
    }
}

impl PartialOrd for ClauseComponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NormalizedDirective {
    pub kinds: Vec<String>,
    /// Directive name followed by its sorted components.
    pub canonical: String,
    pub components: BTreeSet<ClauseComponent>,
    /// GT-side private clauses over loop counters only; forgiven when the
    /// generated side omits them but parallelizes the same loop.
    pub implicitly_satisfiable: BTreeSet<ClauseComponent>,
}

/// Clauses that depend on the target machine rather than the program.
fn is_hardware_dependent(kind: ClauseKind) -> bool {
    kind == ClauseKind::NumThreads
}

pub fn normalize_directive(d: &Directive, gt_side: bool, induction_vars: &BTreeSet<String>) -> NormalizedDirective {
    let mut components = BTreeSet::new();
    let mut implicitly_satisfiable = BTreeSet::new();
    for c in &d.clauses {
        if is_hardware_dependent(c.kind) {
            continue;
        }
        let comp = ClauseComponent {
            kind: c.kind,
            canonical: c.canonical(),
        };
        if gt_side && c.kind == ClauseKind::Private && !c.variables.is_empty() && c.variables.is_subset(induction_vars)
        {
            implicitly_satisfiable.insert(comp.clone());
        }
        components.insert(comp);
    }
    let mut canonical = d.name();
    for c in &components {
        canonical.push(' ');
        canonical.push_str(&c.canonical);
    }
    NormalizedDirective {
        kinds: d.kinds.clone(),
        canonical,
        components,
        implicitly_satisfiable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{extract_directives, SourceUnit};
    use proptest::prelude::*;

    fn norm(pragma: &str) -> NormalizedDirective {
        let u = SourceUnit::new(format!("#pragma omp {pragma}\n"));
        let d = &extract_directives(&u)[0];
        normalize_directive(d, true, &["i".to_string(), "j".to_string()].into())
    }

    #[test]
    fn variable_order_is_irrelevant() {
        assert_eq!(
            norm("parallel for private(j,i)").components,
            norm("parallel for private(i,j)").components
        );
    }

    #[test]
    fn num_threads_dropped() {
        let n = norm("parallel num_threads(8) shared(a)");
        assert_eq!(n.canonical, "parallel shared(a)");
        assert_eq!(n.components.len(), 1);
    }

    #[test]
    fn reduction_operator_matters() {
        assert_ne!(
            norm("for reduction(+:sum)").components,
            norm("for reduction(*:sum)").components
        );
    }

    #[test]
    fn loop_counter_private_is_satisfiable() {
        assert_eq!(norm("parallel for private(i)").implicitly_satisfiable.len(), 1);
        assert!(norm("parallel for private(i,x)").implicitly_satisfiable.is_empty());
        assert!(norm("parallel for firstprivate(i)").implicitly_satisfiable.is_empty());
        let u = SourceUnit::new("#pragma omp for private(i)\n");
        let d = &extract_directives(&u)[0];
        let gen_side = normalize_directive(d, false, &["i".to_string()].into());
        assert!(gen_side.implicitly_satisfiable.is_empty());
    }

    proptest! {
        #[test]
        fn idempotent_and_permutation_invariant(
            vars in proptest::collection::btree_set("[a-e]", 1..5),
            clause_order in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let mut list: Vec<String> = vars.into_iter().collect();
            let shuffled = {
                let mut l = list.clone();
                let n = l.len();
                l.rotate_left((seed as usize) % n);
                l
            };
            list.sort();
            let (a, b) = (
                format!("private({}) schedule(static,4)", list.join(",")),
                format!("schedule(static,4) private({})", shuffled.join(",")),
            );
            let (first, second) = if clause_order { (a, b) } else { (b, a) };
            let n1 = norm(&format!("parallel for {first}"));
            let n2 = norm(&format!("parallel for {second}"));
            prop_assert_eq!(&n1, &n2);
            let again = norm(n1.canonical.as_str());
            prop_assert_eq!(again, n1);
        }
    }
}
