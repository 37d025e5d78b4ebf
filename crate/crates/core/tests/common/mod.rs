#![allow(dead_code)]

use std::collections::HashMap;

use pope_core::crypto::EffectiveTuple;
use pope_core::server::NodeId;
use pope_core::{BlockId, LabelCiphertext, LabelCodec, PopeTree};

/// Sort key recomputed from the decrypted fields.
pub type Key = (u64, u8, u128);

pub fn key(codec: &LabelCodec, ct: &LabelCiphertext) -> Key {
    let t: EffectiveTuple = codec.decrypt(ct);
    (t.label, t.origin, t.tiebreak)
}

/// Checks every stored label and pivot against every ancestor interval.
/// Quadratic in depth on purpose: no reliance on bounds composing.
pub fn check_main_invariant(tree: &PopeTree, codec: &LabelCodec) -> Result<(), String> {
    let mut stack: Vec<(NodeId, Vec<(Option<Key>, Option<Key>)>)> = vec![(tree.root(), Vec::new())];
    while let Some((u, ancestors)) = stack.pop() {
        let node = tree.node(u);
        let mut here: Vec<Key> = node
            .buffer()
            .iter()
            .map(|b| key(codec, &b.block.label))
            .collect();
        let list: Vec<Key> = node.list().iter().map(|p| key(codec, &p.label)).collect();
        if list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(format!("node {} has an unsorted pivot list", u.0));
        }
        here.extend(list.iter().copied());
        for k in &here {
            for (lo, hi) in &ancestors {
                if lo.is_some_and(|lo| *k <= lo) || hi.is_some_and(|hi| *k > hi) {
                    return Err(format!(
                        "label {k:?} in node {} violates ({lo:?}, {hi:?}]",
                        u.0
                    ));
                }
            }
        }
        for (j, &c) in node.children().iter().enumerate() {
            let lo = j.checked_sub(1).map(|i| list[i]);
            let hi = list.get(j).copied();
            let mut a = ancestors.clone();
            a.push((lo, hi));
            stack.push((c, a));
        }
    }
    Ok(())
}

/// Every leaf at the same depth, and every list within capacity.
pub fn check_shape(tree: &PopeTree) -> Result<(), String> {
    let depths: Vec<usize> = tree.leaves().iter().map(|&l| tree.depth(l)).collect();
    if depths.windows(2).any(|w| w[0] != w[1]) {
        return Err(format!("leaf depths differ: {depths:?}"));
    }
    for u in tree.preorder() {
        let n = tree.node(u);
        if n.list().len() > tree.capacity() {
            return Err(format!("node {} holds {} pivots", u.0, n.list().len()));
        }
        if !n.is_leaf() && n.children().len() != n.list().len() + 1 {
            return Err(format!("node {} has mismatched children", u.0));
        }
    }
    Ok(())
}

/// Decrypted `(label, payload)` of every stored block, sorted.
pub fn stored_multiset(tree: &PopeTree, client: &pope_core::PopeClient) -> Vec<(u64, Vec<u8>)> {
    let mut out: Vec<_> = tree
        .blocks()
        .map(|(_, b)| {
            (
                client.codec().decrypt(&b.block.label).label,
                client
                    .decrypt_payload(&b.block)
                    .expect("stored payload authenticates"),
            )
        })
        .collect();
    out.sort();
    out
}

/// Sort key of every stored block, by id.
pub fn keys_by_id(tree: &PopeTree, codec: &LabelCodec) -> HashMap<BlockId, Key> {
    tree.blocks()
        .map(|(_, b)| (b.id, key(codec, &b.block.label)))
        .collect()
}

pub fn choose2(b: u64) -> u64 {
    b * b.saturating_sub(1) / 2
}

/// Least-squares fit of `y = a + b x`, returning `(a, b, r2)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - a - b * x).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    (a, b, 1.0 - ss_res / ss_tot)
}
