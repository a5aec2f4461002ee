use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("invalid parameters: n = {n}, f = {f}")]
    InvalidParameters { n: usize, f: usize },
    #[error("{honest} honest + {dishonest} dishonest backups, but the root round has {expected}")]
    InconsistentCounts { honest: usize, dishonest: usize, expected: usize },
}

/// A class of multicast rounds at one depth whose primaries are all honest
/// or all dishonest, with the honest/dishonest split of their backups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub depth: usize,
    pub honest: bool,
    pub honest_backups: usize,
    pub dishonest_backups: usize,
    /// Rounds whose primary is one of this node's honest backups.
    pub left: Option<Box<TreeNode>>,
    /// Rounds whose primary is one of this node's dishonest backups.
    pub right: Option<Box<TreeNode>>,
}

impl TreeNode {
    pub fn label(&self) -> NodeLabel {
        NodeLabel {
            depth: self.depth,
            honest: self.honest,
            honest_backups: self.honest_backups,
            dishonest_backups: self.dishonest_backups,
        }
    }

    pub fn child(&self, step: Step) -> Option<&TreeNode> {
        match step {
            Step::Left => self.left.as_deref(),
            Step::Right => self.right.as_deref(),
        }
    }

    pub fn descend(&self, steps: &[Step]) -> Option<&TreeNode> {
        steps.iter().try_fold(self, |node, &step| node.child(step))
    }
}

/// A tree node without its subtrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeLabel {
    pub depth: usize,
    pub honest: bool,
    pub honest_backups: usize,
    pub dishonest_backups: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step {
    Left,
    Right,
}

/// `honest_count` and `dishonest_count` split the root round's `n - 1`
/// backups. Children are generated down to depth `f`; a child exists only
/// when its side still has a backup to promote.
pub fn build_tree(
    n: usize,
    f: usize,
    root_honest: bool,
    honest_count: usize,
    dishonest_count: usize,
) -> Result<TreeNode, TreeError> {
    if n < 2 || f < 1 || f > n - 1 {
        return Err(TreeError::InvalidParameters { n, f });
    }
    if honest_count + dishonest_count != n - 1 {
        return Err(TreeError::InconsistentCounts { honest: honest_count, dishonest: dishonest_count, expected: n - 1 });
    }
    fn grow(depth: usize, honest: bool, h: usize, d: usize, f: usize) -> TreeNode {
        let below = depth < f;
        TreeNode {
            depth,
            honest,
            honest_backups: h,
            dishonest_backups: d,
            left: (below && h > 0).then(|| Box::new(grow(depth + 1, true, h - 1, d, f))),
            right: (below && d > 0).then(|| Box::new(grow(depth + 1, false, h, d - 1, f))),
        }
    }
    Ok(grow(1, root_honest, honest_count, dishonest_count, f))
}

/// The tree for a concrete scenario's corruption set.
pub fn tree_for_config(config: &ScenarioConfig) -> Result<TreeNode, TreeError> {
    let dishonest_backups = config.dishonest.iter().filter(|&&id| id != config.initial_primary).count();
    build_tree(
        config.n,
        config.f,
        config.is_honest(config.initial_primary),
        config.n - 1 - dishonest_backups,
        dishonest_backups,
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafePath {
    /// From the root to the safe node.
    pub to_safe_node: Vec<Step>,
    pub safe_node: NodeLabel,
    pub intermediate_node: NodeLabel,
    pub ending_node: NodeLabel,
    /// From the safe node to the ending node.
    pub steps: Vec<Step>,
}

/// A node is safe when its primaries are honest and at least half its
/// backups are honest, or when none of its backups is dishonest (no one is
/// left to collude with).
fn is_safe(node: &TreeNode) -> bool {
    (node.honest && node.honest_backups >= node.dishonest_backups) || node.dishonest_backups == 0
}

/// Earliest safe node, shallowest first and left before right within a
/// depth, with the steps leading to it.
pub fn earliest_safe_node(tree: &TreeNode) -> Option<(Vec<Step>, &TreeNode)> {
    let mut queue = VecDeque::from([(Vec::new(), tree)]);
    while let Some((path, node)) = queue.pop_front() {
        if is_safe(node) {
            return Some((path, node));
        }
        for step in [Step::Left, Step::Right] {
            if let Some(child) = node.child(step) {
                let mut next = path.clone();
                next.push(step);
                queue.push_back((next, child));
            }
        }
    }
    None
}

/// Safe node, then left children until honest and dishonest backups
/// balance (the intermediate node), then right and left children in turn,
/// right first, down to depth `f - 1`.
///
/// When the tree ends before the backups balance, the deepest node reached
/// serves as the intermediate node. The ending node is never above the
/// intermediate node. `None` when there is no safe node or the alternating
/// descent runs out of children.
pub fn find_safe_path(tree: &TreeNode, f: usize) -> Option<SafePath> {
    let (to_safe_node, safe) = earliest_safe_node(tree)?;
    let mut steps = Vec::new();
    let mut node = safe;
    while node.honest_backups != node.dishonest_backups {
        match node.left.as_deref() {
            Some(left) => {
                steps.push(Step::Left);
                node = left;
            }
            None => break,
        }
    }
    let intermediate = node;
    let target = (f.saturating_sub(1)).max(intermediate.depth);
    let mut next = Step::Right;
    while node.depth < target {
        node = node.child(next)?;
        steps.push(next);
        next = match next {
            Step::Right => Step::Left,
            Step::Left => Step::Right,
        };
    }
    Some(SafePath {
        to_safe_node,
        safe_node: safe.label(),
        intermediate_node: intermediate.label(),
        ending_node: node.label(),
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(node: &TreeNode) -> usize {
        1 + node.left.as_deref().map_or(0, count) + node.right.as_deref().map_or(0, count)
    }

    #[test]
    fn small_trees() {
        let t = build_tree(3, 1, true, 2, 0).unwrap();
        assert_eq!(count(&t), 1);
        let t = build_tree(5, 2, true, 2, 2).unwrap();
        assert_eq!((t.honest_backups, t.dishonest_backups), (2, 2));
        let left = t.left.as_deref().unwrap();
        let right = t.right.as_deref().unwrap();
        assert_eq!((left.honest, left.honest_backups, left.dishonest_backups), (true, 1, 2));
        assert_eq!((right.honest, right.honest_backups, right.dishonest_backups), (false, 2, 1));
        assert!(build_tree(5, 2, true, 2, 1).is_err());
        assert!(build_tree(3, 3, true, 2, 0).is_err());
    }

    #[test]
    fn children_sum_to_one_fewer_backup() {
        fn check(node: &TreeNode, n: usize) {
            assert_eq!(node.honest_backups + node.dishonest_backups, n - node.depth);
            for child in [node.left.as_deref(), node.right.as_deref()].into_iter().flatten() {
                assert_eq!(child.honest_backups + child.dishonest_backups, n - node.depth - 1);
                check(child, n);
            }
        }
        check(&build_tree(9, 4, false, 5, 3).unwrap(), 9);
    }

    #[test]
    fn honest_root_with_2f_plus_1_is_its_own_intermediate() {
        for f in 1..=4 {
            let n = 2 * f + 1;
            let t = build_tree(n, f, true, n - 1 - f, f).unwrap();
            let path = find_safe_path(&t, f).unwrap();
            assert!(path.to_safe_node.is_empty());
            assert_eq!(path.safe_node, path.intermediate_node);
            assert_eq!(path.ending_node.depth, (f - 1).max(1));
        }
    }
}
