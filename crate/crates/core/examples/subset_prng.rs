//! Forwarding subsets from a seed, and their lexicographic ranks.

use mediated_gossip::config::{EventId, NodeId};
use mediated_gossip::subset_prng::{binomial, expand, mod_bias_bound, rank_subset, universe_without, unrank_subset, Seed};

fn main() {
    let (n, f) = (6, 2);
    let me = NodeId(3);
    let universe = universe_without(n, me);
    let count = binomial(universe.len() as u64, f as u64);
    println!("C({}, {f}) = {count} subsets for node {me}", universe.len());
    for y in 0..count {
        let s = unrank_subset(y, &universe, f as usize).unwrap();
        assert_eq!(rank_subset(&s, &universe).unwrap(), y);
        println!("  rank {y:2}: {s:?}");
    }

    let seed = Seed { owner: me, stage: 1, bits: 0xfeed };
    for id in 1..=5 {
        println!("event {id}: forward to {:?}", expand(&seed, EventId(id), me, n, f));
    }
    println!("largest deviation from uniform: {:.1e}", mod_bias_bound(n, f));
}
