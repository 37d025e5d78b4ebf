use std::mem;

use serde::{Deserialize, Serialize};

use crate::block::{BlockId, EncryptedBlock};
use crate::crypto::LabelCiphertext;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

/// A block as the server holds it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoredBlock {
    pub id: BlockId,
    pub block: EncryptedBlock,
}

/// A sorted-list entry. The block the label came from stays in a buffer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pivot {
    pub id: BlockId,
    pub label: LabelCiphertext,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Node {
    pub(crate) parent: Option<NodeId>,
    pub(crate) buffer: Vec<StoredBlock>,
    pub(crate) list: Vec<Pivot>,
    pub(crate) children: Vec<NodeId>,
}

impl Node {
    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }

    pub fn buffer(&self) -> &[StoredBlock] {
        &self.buffer
    }

    pub fn list(&self) -> &[Pivot] {
        &self.list
    }

    pub fn children(&self) -> &[NodeId] {
        &self.children
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    fn labels(&self) -> Vec<LabelCiphertext> {
        self.list.iter().map(|p| p.label).collect()
    }
}

/// Structural counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStats {
    pub internal_flushes: u64,
    pub leaf_splits: u64,
    pub rebalance_splits: u64,
    pub pivots_promoted: u64,
}

/// The server's tree: nodes live in an arena and refer to each other by id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PopeTree {
    pub(crate) nodes: Vec<Node>,
    pub(crate) root: NodeId,
    pub(crate) capacity: usize,
    pub(crate) stats: TreeStats,
}

impl PopeTree {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity < 2 {
            return Err(Error::config(format!(
                "capacity L must be at least 2, got {capacity}"
            )));
        }
        Ok(PopeTree {
            nodes: vec![Node::default()],
            root: NodeId(0),
            capacity,
            stats: TreeStats::default(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0 as usize]
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id.0 as usize]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn stats(&self) -> TreeStats {
        self.stats
    }

    pub(crate) fn alloc(&mut self, node: Node) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(node);
        id
    }

    /// Number of edges from the root to any leaf.
    pub fn height(&self) -> usize {
        let mut h = 0;
        let mut u = self.root;
        while let Some(&c) = self.node(u).children.first() {
            u = c;
            h += 1;
        }
        h
    }

    pub fn block_count(&self) -> usize {
        self.nodes.iter().map(|n| n.buffer.len()).sum()
    }

    pub fn pivot_count(&self) -> usize {
        self.nodes.iter().map(|n| n.list.len()).sum()
    }

    pub(crate) fn push_root(&mut self, block: StoredBlock) {
        let root = self.root;
        self.node_mut(root).buffer.push(block);
    }

    pub fn pivot_labels(&self, id: NodeId) -> Vec<LabelCiphertext> {
        self.node(id).labels()
    }

    /// Every stored block together with the node holding it.
    pub fn blocks(&self) -> impl Iterator<Item = (NodeId, &StoredBlock)> {
        self.nodes
            .iter()
            .enumerate()
            .flat_map(|(i, n)| n.buffer.iter().map(move |b| (NodeId(i as u32), b)))
    }

    /// Nodes reachable from the root, parents before children, children in
    /// left-to-right order.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(u) = stack.pop() {
            out.push(u);
            stack.extend(self.node(u).children.iter().rev());
        }
        out
    }

    pub fn leaves(&self) -> Vec<NodeId> {
        self.preorder()
            .into_iter()
            .filter(|&u| self.node(u).is_leaf())
            .collect()
    }

    pub fn depth(&self, mut u: NodeId) -> usize {
        let mut d = 0;
        while let Some(p) = self.node(u).parent {
            u = p;
            d += 1;
        }
        d
    }

    pub(crate) fn child_position(&self, parent: NodeId, child: NodeId) -> usize {
        self.node(parent)
            .children
            .iter()
            .position(|&c| c == child)
            .expect("child is linked under its parent")
    }

    /// Child positions from the root down to `u`.
    pub fn path(&self, mut u: NodeId) -> Vec<usize> {
        let mut path = Vec::new();
        while let Some(p) = self.node(u).parent {
            path.push(self.child_position(p, u));
            u = p;
        }
        path.reverse();
        path
    }

    /// Nearest pivots below and above everything stored in `u`'s subtree.
    pub fn bounds(&self, mut u: NodeId) -> (Option<Pivot>, Option<Pivot>) {
        let (mut lo, mut hi) = (None, None);
        while let Some(p) = self.node(u).parent {
            let i = self.child_position(p, u);
            let list = &self.node(p).list;
            if lo.is_none() && i > 0 {
                lo = Some(list[i - 1]);
            }
            if hi.is_none() && i < list.len() {
                hi = Some(list[i]);
            }
            u = p;
        }
        (lo, hi)
    }

    /// Moves a flushed internal buffer into the children named by `targets`.
    pub(crate) fn distribute(&mut self, u: NodeId, blocks: Vec<StoredBlock>, targets: &[u32]) {
        debug_assert_eq!(blocks.len(), targets.len());
        let children = self.node(u).children.clone();
        for (b, &t) in blocks.into_iter().zip(targets) {
            self.node_mut(children[t as usize]).buffer.push(b);
        }
    }

    /// Replaces leaf `u` by `pivots.len() + 1` sibling leaves. `u` itself
    /// becomes the first of them. Returns the new leaves in order.
    pub(crate) fn split_leaf(
        &mut self,
        u: NodeId,
        pivots: Vec<Pivot>,
        blocks: Vec<StoredBlock>,
        targets: &[u32],
    ) -> (NodeId, Vec<NodeId>) {
        debug_assert!(self.node(u).is_leaf() && self.node(u).buffer.is_empty());
        let parent = match self.node(u).parent {
            Some(p) => p,
            None => self.new_root(u),
        };
        let pos = self.child_position(parent, u);
        let mut leaves = vec![u];
        for _ in 0..pivots.len() {
            leaves.push(self.alloc(Node {
                parent: Some(parent),
                ..Node::default()
            }));
        }
        for (b, &t) in blocks.into_iter().zip(targets) {
            self.node_mut(leaves[t as usize]).buffer.push(b);
        }
        self.stats.leaf_splits += 1;
        self.stats.pivots_promoted += pivots.len() as u64;
        let p = self.node_mut(parent);
        p.list.splice(pos..pos, pivots);
        p.children
            .splice(pos + 1..pos + 1, leaves[1..].iter().copied());
        (parent, leaves)
    }

    fn new_root(&mut self, only_child: NodeId) -> NodeId {
        let r = self.alloc(Node {
            children: vec![only_child],
            ..Node::default()
        });
        self.node_mut(only_child).parent = Some(r);
        self.root = r;
        r
    }

    /// Positions promoted out of an oversized list of length `s`: every
    /// `(L+1)`-th element, nudged left when it would leave the last segment
    /// empty.
    pub fn promotion_points(s: usize, capacity: usize) -> Vec<usize> {
        let mut pts: Vec<usize> = (capacity..s).step_by(capacity + 1).collect();
        if let Some(last) = pts.last_mut() {
            if *last == s - 1 {
                *last = s - 2;
            }
        }
        pts
    }

    /// Splits every oversized list from `u` up to the root.
    pub fn rebalance(&mut self, mut u: NodeId) {
        loop {
            let s = self.node(u).list.len();
            if s <= self.capacity {
                return;
            }
            debug_assert!(
                self.node(u).buffer.is_empty(),
                "rebalanced nodes are flushed"
            );
            let parent = match self.node(u).parent {
                Some(p) => p,
                None => self.new_root(u),
            };
            let pts = Self::promotion_points(s, self.capacity);
            let mut list = mem::take(&mut self.node_mut(u).list);
            let mut children = mem::take(&mut self.node_mut(u).children);

            // Peel segments off the back so indices stay valid.
            let mut promoted = Vec::with_capacity(pts.len());
            let mut siblings = Vec::with_capacity(pts.len());
            for &p in pts.iter().rev() {
                let seg_list = list.split_off(p + 1);
                let seg_children = children.split_off(p + 1);
                promoted.push(list.pop().expect("promotion point inside list"));
                let w = self.alloc(Node {
                    parent: Some(parent),
                    buffer: Vec::new(),
                    list: seg_list,
                    children: seg_children.clone(),
                });
                for c in seg_children {
                    self.node_mut(c).parent = Some(w);
                }
                siblings.push(w);
            }
            promoted.reverse();
            siblings.reverse();
            let n = self.node_mut(u);
            n.list = list;
            n.children = children;

            self.stats.rebalance_splits += 1;
            let pos = self.child_position(parent, u);
            let p = self.node_mut(parent);
            p.list.splice(pos..pos, promoted);
            p.children.splice(pos + 1..pos + 1, siblings);
            u = parent;
        }
    }

    /// Blocks in the two boundary leaves, every leaf between them, and every
    /// buffer of a subtree lying strictly between the two root paths.
    pub fn range_collect(&self, left: NodeId, right: NodeId) -> Result<Vec<EncryptedBlock>> {
        for u in [left, right] {
            if !self.node(u).is_leaf() {
                return Err(Error::protocol(format!("node {} is not a leaf", u.0)));
            }
        }
        let (lp, rp) = (self.path(left), self.path(right));
        if lp > rp {
            return Err(Error::protocol("left leaf lies after right leaf"));
        }
        let mut out = Vec::new();
        self.collect_between(self.root, Some(&lp), Some(&rp), &mut out);
        Ok(out)
    }

    /// `lo`/`hi` are the remaining path suffixes when `u` lies on the left
    /// or right boundary path; `None` means unconstrained on that side.
    fn collect_between(
        &self,
        u: NodeId,
        lo: Option<&[usize]>,
        hi: Option<&[usize]>,
        out: &mut Vec<EncryptedBlock>,
    ) {
        let node = self.node(u);
        out.extend(node.buffer.iter().map(|b| b.block.clone()));
        if node.is_leaf() {
            return;
        }
        let first = lo.map_or(0, |p| p[0]);
        let last = hi.map_or(node.children.len() - 1, |p| p[0]);
        for i in first..=last {
            let sub_lo = lo.filter(|_| i == first).map(|p| &p[1..]);
            let sub_hi = hi.filter(|_| i == last).map(|p| &p[1..]);
            self.collect_between(node.children[i], sub_lo, sub_hi, out);
        }
    }

    /// Checks the structural invariants that need no key: parent links,
    /// `|children| = |list| + 1`, uniform leaf depth, and optionally the
    /// list-size bound.
    pub fn check_structure(&self, enforce_capacity: bool) -> Result<(), String> {
        let mut leaf_depth = None;
        let mut stack = vec![(self.root, 0usize)];
        if self.node(self.root).parent.is_some() {
            return Err("root has a parent".into());
        }
        let mut seen = 0;
        while let Some((u, d)) = stack.pop() {
            seen += 1;
            let n = self.node(u);
            if n.is_leaf() {
                if !n.list.is_empty() {
                    return Err(format!("leaf {} has a pivot list", u.0));
                }
                match leaf_depth {
                    None => leaf_depth = Some(d),
                    Some(ld) if ld != d => {
                        return Err(format!("leaf {} at depth {d}, expected {ld}", u.0))
                    }
                    _ => {}
                }
                continue;
            }
            if n.children.len() != n.list.len() + 1 {
                return Err(format!(
                    "node {} has {} children for {} pivots",
                    u.0,
                    n.children.len(),
                    n.list.len()
                ));
            }
            if enforce_capacity && n.list.len() > self.capacity {
                return Err(format!(
                    "node {} holds {} pivots, capacity {}",
                    u.0,
                    n.list.len(),
                    self.capacity
                ));
            }
            for &c in &n.children {
                if self.node(c).parent != Some(u) {
                    return Err(format!("child {} does not point back to {}", c.0, u.0));
                }
                stack.push((c, d + 1));
            }
        }
        let live = self.preorder().len();
        if seen != live {
            return Err("node reached twice".into());
        }
        Ok(())
    }
}
