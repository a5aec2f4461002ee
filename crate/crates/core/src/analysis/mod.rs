//! Binary-tree model of the recursion, interactive-consistency verdicts,
//! audits over run records and bounded adversary search.

mod ic;
mod search;
mod tree;

pub use ic::{
    audit_collusion_locality, audit_lemma1, check_ic, Condition, IcVerdict, Lemma1Violation, UnsignedDelivery, Witness,
};
pub use search::{strategy_search, SearchError, SearchFamily, Violation, WorstCaseReport, KEPT_VIOLATIONS, SEARCH_P};
pub use tree::{build_tree, earliest_safe_node, find_safe_path, tree_for_config, NodeLabel, SafePath, Step, TreeError, TreeNode};
