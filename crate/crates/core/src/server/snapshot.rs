//! Tree checkpoint format.
//!
//! ```text
//! magic "POPT" | version u8 | capacity u32 | node*
//! node  := nbuf u32 | (id u64 | label [32] | plen u32 | payload)* |
//!          nlist u32 | (id u64 | label [32])* | nchildren u32 | node*
//! ```
//!
//! Nodes are written in preorder, all integers big-endian. The format is
//! independent of the wire protocol.

use std::io::{self, Read, Write};

use super::tree::{Node, NodeId, Pivot, PopeTree, StoredBlock, TreeStats};
use crate::block::{BlockId, EncryptedBlock};
use crate::crypto::{LabelCiphertext, PayloadCiphertext, LABEL_CT_BYTES};
use crate::error::{Error, Result};

pub const SNAPSHOT_VERSION: u8 = 1;
const MAGIC: &[u8; 4] = b"POPT";

fn corrupt(msg: &str) -> Error {
    Error::Io(io::Error::new(
        io::ErrorKind::InvalidData,
        format!("tree snapshot: {msg}"),
    ))
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b)?;
        Ok(b)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.bytes()?))
    }

    fn label(&mut self) -> Result<LabelCiphertext> {
        Ok(LabelCiphertext::from_bytes(
            &self.bytes::<LABEL_CT_BYTES>()?,
        ))
    }
}

impl PopeTree {
    pub fn write_snapshot<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&[SNAPSHOT_VERSION])?;
        w.write_all(&(self.capacity as u32).to_be_bytes())?;
        for u in self.preorder() {
            let n = self.node(u);
            w.write_all(&(n.buffer.len() as u32).to_be_bytes())?;
            for b in &n.buffer {
                w.write_all(&b.id.0.to_be_bytes())?;
                w.write_all(&b.block.label.to_bytes())?;
                w.write_all(&(b.block.payload.len() as u32).to_be_bytes())?;
                w.write_all(b.block.payload.as_bytes())?;
            }
            w.write_all(&(n.list.len() as u32).to_be_bytes())?;
            for p in &n.list {
                w.write_all(&p.id.0.to_be_bytes())?;
                w.write_all(&p.label.to_bytes())?;
            }
            w.write_all(&(n.children.len() as u32).to_be_bytes())?;
        }
        Ok(())
    }

    pub fn to_snapshot(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_snapshot(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    /// Restores a tree. Node ids are renumbered in preorder and structural
    /// counters start from zero.
    pub fn read_snapshot<R: Read>(r: R) -> Result<Self> {
        let mut rd = Reader { inner: r };
        if &rd.bytes::<4>()? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let [version] = rd.bytes::<1>()?;
        if version != SNAPSHOT_VERSION {
            return Err(corrupt(&format!("unsupported version {version}")));
        }
        let capacity = rd.u32()? as usize;
        let mut tree = PopeTree::new(capacity)?;
        tree.nodes.clear();
        // (node, children still to read)
        let mut open: Vec<(NodeId, u32)> = Vec::new();
        loop {
            let parent = open.last().map(|&(p, _)| p);
            let nbuf = rd.u32()?;
            let mut buffer = Vec::new();
            for _ in 0..nbuf {
                let id = BlockId(rd.u64()?);
                let label = rd.label()?;
                let plen = rd.u32()? as usize;
                let mut payload = Vec::new();
                (&mut rd.inner)
                    .take(plen as u64)
                    .read_to_end(&mut payload)?;
                if payload.len() != plen {
                    return Err(corrupt("truncated payload"));
                }
                buffer.push(StoredBlock {
                    id,
                    block: EncryptedBlock::new(label, PayloadCiphertext::from_bytes(payload)),
                });
            }
            let nlist = rd.u32()?;
            let mut list = Vec::new();
            for _ in 0..nlist {
                let id = BlockId(rd.u64()?);
                list.push(Pivot {
                    id,
                    label: rd.label()?,
                });
            }
            let nchildren = rd.u32()?;
            let id = tree.alloc(Node {
                parent,
                buffer,
                list,
                children: Vec::new(),
            });
            if let Some(p) = parent {
                tree.node_mut(p).children.push(id);
                open.last_mut().expect("parent is open").1 -= 1;
            }
            if nchildren > 0 {
                open.push((id, nchildren));
            }
            while open.last().is_some_and(|&(_, left)| left == 0) {
                open.pop();
            }
            if open.is_empty() {
                break;
            }
        }
        tree.root = NodeId(0);
        tree.stats = TreeStats::default();
        tree.check_structure(false).map_err(|e| corrupt(&e))?;
        Ok(tree)
    }
}
