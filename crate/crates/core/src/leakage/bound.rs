use serde::{Deserialize, Serialize};

fn pairs(b: u64) -> u64 {
    b * b.saturating_sub(1) / 2
}

/// Fewest incomparable pairs possible once `k` of `n` items are fully
/// ordered: the rest spread as evenly as possible over `k + 1` gaps.
pub fn measured_bound(n: u64, k: u64) -> u64 {
    if k >= n {
        return 0;
    }
    (k + 1) * pairs((n - k) / (k + 1))
}

/// Lower bound on incomparable pairs for `n` inserts and `m` searches with
/// client capacity `l`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairBound {
    /// Pivot count the bound was evaluated at.
    pub k: u64,
    /// `(k+1) * C(floor((n-k)/(k+1)), 2)` for the measured `k`.
    pub measured: u64,
    /// `m * l * log_l(n)`, the pivot count the asymptotic bound allows.
    pub closed_form_k: f64,
    /// The same bound evaluated at `closed_form_k`.
    pub closed_form: u64,
    /// `m * l < n`; outside this regime the bound is vacuous.
    pub in_regime: bool,
}

pub fn pair_bound(n: u64, m: u64, l: u64, k_measured: u64) -> PairBound {
    let closed_form_k = if n > 1 && l > 1 {
        (m * l) as f64 * (n as f64).ln() / (l as f64).ln()
    } else {
        0.0
    };
    let k_cf = closed_form_k.ceil().min(n as f64) as u64;
    PairBound {
        k: k_measured,
        measured: measured_bound(n, k_measured),
        closed_form_k,
        closed_form: measured_bound(n, k_cf),
        in_regime: m.saturating_mul(l) < n,
    }
}
