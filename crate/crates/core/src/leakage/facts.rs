use serde::{Deserialize, Serialize};

use crate::block::BlockId;

/// One piece of order information the server learned.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fact {
    Inserted(BlockId),
    /// `lower < item <= upper`; `None` is unbounded.
    Classified {
        item: BlockId,
        lower: Option<BlockId>,
        upper: Option<BlockId>,
    },
    /// These items, all sharing one known interval, are now totally ordered
    /// as listed.
    Promoted(Vec<BlockId>),
}

/// Facts in the order the server learned them, split by operation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactLog {
    facts: Vec<Fact>,
    op_marks: Vec<usize>,
}

impl FactLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, fact: Fact) {
        self.facts.push(fact);
    }

    pub fn end_op(&mut self) {
        self.op_marks.push(self.facts.len());
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    /// Fact count at the end of each completed operation.
    pub fn op_marks(&self) -> &[usize] {
        &self.op_marks
    }

    pub fn ops(&self) -> usize {
        self.op_marks.len()
    }

    /// Facts known after the first `ops` operations.
    pub fn after_ops(&self, ops: usize) -> &[Fact] {
        match ops {
            0 => &[],
            k => &self.facts[..self.op_marks[k.min(self.op_marks.len()) - 1]],
        }
    }
}
