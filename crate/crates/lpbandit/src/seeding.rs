//! Counter-based seed derivation: every episode's seed is a pure function of
//! the master seed and its coordinates in the experiment grid, so results are
//! identical regardless of execution order or worker count.

/// One step of the splitmix64 output function.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a path of coordinates into the master seed, one splitmix64 step per
/// component. Deterministic, order-sensitive, and free of collisions across
/// the modest path spaces used here.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &component in path {
        state = splitmix64(state ^ component);
    }
    state
}

/// Stable tag for each policy name, used as the leading path component.
pub fn policy_tag(name: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64; // FNV-1a
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // First three outputs of the reference sequence seeded at 0.
        let mut s = 0u64;
        let mut out = Vec::new();
        for _ in 0..3 {
            out.push(splitmix64(s));
            s = s.wrapping_add(0x9e37_79b9_7f4a_7c15);
        }
        assert_eq!(out[0], 0xe220_a839_7b1d_cdaf);
        assert_eq!(out[1], 0x6e78_9e6a_a1b9_65f4);
        assert_eq!(out[2], 0x06c4_5d18_8009_454f);
    }

    #[test]
    fn derivation_is_deterministic_and_path_sensitive() {
        let a = derive_seed(42, &[1, 2, 3]);
        assert_eq!(a, derive_seed(42, &[1, 2, 3]));
        assert_ne!(a, derive_seed(42, &[1, 3, 2]));
        assert_ne!(a, derive_seed(42, &[1, 2]));
        assert_ne!(a, derive_seed(43, &[1, 2, 3]));
        assert_ne!(derive_seed(0, &[]), derive_seed(1, &[]));
    }

    #[test]
    fn no_collisions_over_small_grid() {
        let mut seen = std::collections::HashSet::new();
        for policy in 0..4u64 {
            for d in [2u64, 4] {
                for sign in 0..16u64 {
                    for seed in 0..64u64 {
                        assert!(seen.insert(derive_seed(7, &[policy, d, sign, seed])));
                    }
                }
            }
        }
    }

    #[test]
    fn policy_tags_distinct() {
        let names = ["uniform", "etc", "linucb", "oracle", "anti-oracle", "origin"];
        let tags: std::collections::HashSet<u64> = names.iter().map(|n| policy_tag(n)).collect();
        assert_eq!(tags.len(), names.len());
    }
}
