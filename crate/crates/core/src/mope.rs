//! Interactive B-tree baseline.
//!
//! The server keeps every ciphertext in a B-tree ordered by the client. Each
//! insert and each search endpoint walks from the root to a leaf, one round
//! per level: the server sends a node's keys and the ciphertext being placed,
//! and the client answers with the gap it falls into.

use crate::block::{BlockId, EncryptedBlock};
use crate::crypto::LabelCiphertext;
use crate::error::{Error, Result};
use crate::leakage::{Fact, FactLog};
use crate::protocol::{Channel, Message, RangeServer};
use crate::server::StoredBlock;

pub const MOPE_NODE_CAPACITY: usize = 4;

#[derive(Clone, Debug, Default)]
struct BNode {
    keys: Vec<StoredBlock>,
    children: Vec<usize>,
    /// Keys stored in this subtree.
    size: usize,
}

impl BNode {
    fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug)]
pub struct MopeServer {
    nodes: Vec<BNode>,
    root: usize,
    next_id: u64,
    facts: Option<FactLog>,
}

impl Default for MopeServer {
    fn default() -> Self {
        Self::new()
    }
}

/// Where a descent ended, plus the in-order neighbours met on the way.
struct Descent {
    path: Vec<(usize, usize)>,
    rank: usize,
    pred: Option<BlockId>,
    succ: Option<BlockId>,
}

impl MopeServer {
    pub fn new() -> Self {
        MopeServer {
            nodes: vec![BNode::default()],
            root: 0,
            next_id: 0,
            facts: Some(FactLog::new()),
        }
    }

    pub fn without_leakage(mut self) -> Self {
        self.facts = None;
        self
    }

    pub fn facts(&self) -> Option<&FactLog> {
        self.facts.as_ref()
    }

    pub fn len(&self) -> usize {
        self.nodes[self.root].size
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Levels below the root.
    pub fn height(&self) -> usize {
        let mut h = 0;
        let mut u = self.root;
        while let Some(&c) = self.nodes[u].children.first() {
            u = c;
            h += 1;
        }
        h
    }

    /// Stored blocks in tree order.
    pub fn in_order(&self) -> Vec<&StoredBlock> {
        let mut out = Vec::with_capacity(self.len());
        self.collect(self.root, 0, 0, usize::MAX, &mut out);
        out
    }

    fn descend(&self, target: LabelCiphertext, ch: &mut Channel<'_>) -> Result<Descent> {
        let mut d = Descent {
            path: Vec::new(),
            rank: 0,
            pred: None,
            succ: None,
        };
        let mut u = self.root;
        loop {
            let node = &self.nodes[u];
            let keys: Vec<_> = node.keys.iter().map(|k| k.block.label).collect();
            let replies = ch.round(vec![Message::MopeNode { keys, target }])?;
            let gap = match &replies[0] {
                Message::MopeIndex { index } if (*index as usize) <= node.keys.len() => {
                    *index as usize
                }
                other => {
                    return Err(Error::protocol(format!(
                        "expected a gap index within 0..={}, got {other:?}",
                        node.keys.len()
                    )))
                }
            };
            if gap > 0 {
                d.pred = Some(node.keys[gap - 1].id);
            }
            if gap < node.keys.len() {
                d.succ = Some(node.keys[gap].id);
            }
            d.rank += gap
                + node.children[..gap.min(node.children.len())]
                    .iter()
                    .map(|&c| self.nodes[c].size)
                    .sum::<usize>();
            d.path.push((u, gap));
            if node.is_leaf() {
                return Ok(d);
            }
            u = node.children[gap];
        }
    }

    fn place(&mut self, d: Descent, key: StoredBlock) {
        let (leaf, gap) = *d.path.last().expect("descent reaches a leaf");
        self.nodes[leaf].keys.insert(gap, key);
        for &(u, _) in &d.path {
            self.nodes[u].size += 1;
        }
        // Split overflowing nodes bottom-up.
        for level in (0..d.path.len()).rev() {
            let (u, _) = d.path[level];
            if self.nodes[u].keys.len() <= MOPE_NODE_CAPACITY {
                break;
            }
            let mid = self.nodes[u].keys.len() / 2;
            let right_keys = self.nodes[u].keys.split_off(mid + 1);
            let median = self.nodes[u].keys.pop().expect("median exists");
            let right_children = if self.nodes[u].is_leaf() {
                Vec::new()
            } else {
                self.nodes[u].children.split_off(mid + 1)
            };
            let right = BNode {
                size: right_keys.len()
                    + right_children
                        .iter()
                        .map(|&c| self.nodes[c].size)
                        .sum::<usize>(),
                keys: right_keys,
                children: right_children,
            };
            self.nodes[u].size -= right.size + 1;
            let r = self.nodes.len();
            self.nodes.push(right);
            if level == 0 {
                let total = self.nodes[u].size + self.nodes[r].size + 1;
                self.nodes.push(BNode {
                    keys: vec![median],
                    children: vec![u, r],
                    size: total,
                });
                self.root = self.nodes.len() - 1;
            } else {
                let (p, pgap) = d.path[level - 1];
                self.nodes[p].keys.insert(pgap, median);
                self.nodes[p].children.insert(pgap + 1, r);
            }
        }
    }

    /// In-order keys of `u`'s subtree with rank in `[lo, hi)`; `base` is the
    /// rank of the subtree's first key.
    fn collect<'a>(
        &'a self,
        u: usize,
        base: usize,
        lo: usize,
        hi: usize,
        out: &mut Vec<&'a StoredBlock>,
    ) {
        let node = &self.nodes[u];
        if base >= hi || base + node.size <= lo {
            return;
        }
        let mut r = base;
        for (i, key) in node.keys.iter().enumerate() {
            if let Some(&c) = node.children.get(i) {
                self.collect(c, r, lo, hi, out);
                r += self.nodes[c].size;
            }
            if (lo..hi).contains(&r) {
                out.push(key);
            }
            r += 1;
        }
        if let Some(&c) = node.children.last() {
            self.collect(c, r, lo, hi, out);
        }
    }

    /// Capacity, uniform leaf depth, child counts and subtree sizes.
    pub fn check_structure(&self) -> Result<(), String> {
        let mut leaf_depth = None;
        self.check_node(self.root, 0, &mut leaf_depth).map(|_| ())
    }

    fn check_node(
        &self,
        u: usize,
        depth: usize,
        leaf_depth: &mut Option<usize>,
    ) -> Result<usize, String> {
        let n = &self.nodes[u];
        if n.keys.len() > MOPE_NODE_CAPACITY {
            return Err(format!("node {u} holds {} keys", n.keys.len()));
        }
        let mut size = n.keys.len();
        if n.is_leaf() {
            match *leaf_depth {
                None => *leaf_depth = Some(depth),
                Some(d) if d != depth => {
                    return Err(format!("leaf {u} at depth {depth}, expected {d}"))
                }
                _ => {}
            }
        } else {
            if n.children.len() != n.keys.len() + 1 {
                return Err(format!(
                    "node {u} has {} children for {} keys",
                    n.children.len(),
                    n.keys.len()
                ));
            }
            for &c in &n.children {
                size += self.check_node(c, depth + 1, leaf_depth)?;
            }
        }
        if size != n.size {
            return Err(format!("node {u} records size {} but holds {size}", n.size));
        }
        Ok(size)
    }
}

impl RangeServer for MopeServer {
    fn insert(&mut self, block: EncryptedBlock, ch: &mut Channel<'_>) -> Result<()> {
        let d = self.descend(block.label, ch)?;
        let id = BlockId(self.next_id);
        self.next_id += 1;
        if let Some(log) = self.facts.as_mut() {
            log.push(Fact::Inserted(id));
            log.push(Fact::Classified {
                item: id,
                lower: d.pred,
                upper: d.succ,
            });
            log.push(Fact::Promoted(vec![id]));
        }
        self.place(d, StoredBlock { id, block });
        Ok(())
    }

    fn search(
        &mut self,
        left: LabelCiphertext,
        right: LabelCiphertext,
        ch: &mut Channel<'_>,
    ) -> Result<Vec<EncryptedBlock>> {
        let lo = self.descend(left, ch)?.rank;
        let hi = self.descend(right, ch)?.rank;
        if lo > hi {
            return Err(Error::protocol("left endpoint ranks after right endpoint"));
        }
        let mut out = Vec::with_capacity(hi - lo);
        self.collect(self.root, 0, lo, hi, &mut out);
        Ok(out.into_iter().map(|b| b.block.clone()).collect())
    }

    fn end_op(&mut self) {
        if let Some(log) = self.facts.as_mut() {
            log.end_op();
        }
    }

    fn acknowledges_inserts(&self) -> bool {
        true
    }
}
