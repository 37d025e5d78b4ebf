//! What the server learns about the order of stored items.
//!
//! Servers log [`Fact`]s as they learn them. Replaying a log into a
//! [`PartialOrderState`] yields the incomparable-pair count and knowledge
//! snapshots at any point of a run. The simulator rebuilds a server view
//! from a profile and an order oracle alone.

mod bound;
mod facts;
mod rord;
mod simulate;
mod snapshot;
mod state;

pub use bound::{measured_bound, pair_bound, PairBound};
pub use facts::{Fact, FactLog};
pub use rord::Rord;
pub use simulate::{run_recorded, simulate_view, Profile, ProfileOp, RecordedRun, SimulatedView};
pub use snapshot::{knowledge_snapshot, Bucket, KnowledgeSnapshot};
pub use state::PartialOrderState;

/// Incomparable-pair counts after each of the given operation counts.
pub fn replay_checkpoints(
    log: &FactLog,
    checkpoints: &[usize],
) -> crate::error::Result<Vec<(usize, u64)>> {
    let mut cps: Vec<usize> = checkpoints.iter().map(|&c| c.min(log.ops())).collect();
    cps.sort_unstable();
    cps.dedup();
    let mut state = PartialOrderState::new();
    let mut applied = 0;
    let mut out = Vec::with_capacity(cps.len());
    for cp in cps {
        let upto = log.after_ops(cp).len();
        for f in &log.facts()[applied..upto] {
            state.apply(f)?;
        }
        applied = upto;
        out.push((cp, state.incomparable_pairs()));
    }
    Ok(out)
}
