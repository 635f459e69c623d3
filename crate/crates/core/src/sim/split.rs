use crate::model::EngagementCounts;

const NON_REACTION_SHARE: f64 = 0.25;
// Of the non-reaction interactions: 0.15 / 0.25 shares, the rest comments.
const SHARE_OF_NON_REACTION: f64 = 0.6;

/// Splits a cumulative engagement total into reactions, shares and comments.
///
/// Expected proportions are 0.75 / 0.15 / 0.10. The split is a pure
/// function of `(total, split_seed)`; for a fixed seed every component is
/// non-decreasing in `total` and the components always sum to `total`.
pub fn split_counts(total: u64, split_seed: u64) -> EngagementCounts {
    let h = splitmix64(split_seed);
    let phase_a = unit(h);
    let phase_b = unit(splitmix64(h));
    let non_reaction = staircase(total, NON_REACTION_SHARE, phase_a);
    let shares = staircase(non_reaction, SHARE_OF_NON_REACTION, phase_b);
    EngagementCounts {
        reactions: total - non_reaction,
        shares,
        comments: non_reaction - shares,
    }
}

// floor(n * p + phase) with p < 1 and phase in [0, 1): starts at 0 and
// steps by at most one per unit of n.
fn staircase(n: u64, p: f64, phase: f64) -> u64 {
    ((n as f64 * p + phase).floor() as u64).min(n)
}

fn unit(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
