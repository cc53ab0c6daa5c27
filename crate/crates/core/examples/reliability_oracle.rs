//! Exact reception probability next to a simulated estimate.

use mediated_gossip::analysis::{big_to_f64, reliability_exact, reliability_mc};
use mediated_gossip::config::SimConfig;

fn main() {
    for (n, f, d) in [(3, 1, 2), (4, 1, 3), (5, 2, 4), (6, 2, 4), (8, 3, 4)] {
        let exact = reliability_exact(n, f, d).expect("n <= 8");
        let mc = reliability_mc(&SimConfig::with_defaults(n, f, 64, d), 20_000).expect("trials > 0");
        println!(
            "n={n} f={f} expiry={d}: q = {} = {:.5}, simulated {:.5} +/- {:.5}",
            exact.q,
            big_to_f64(&exact.q),
            mc.estimate,
            mc.half_width
        );
    }
}
