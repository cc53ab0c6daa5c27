//! Average conformant utility against the frictionless value, for growing rho.

use mediated_gossip::analysis::utility_gap;
use mediated_gossip::config::SimConfig;

fn main() {
    for rho in [16, 64, 256] {
        let g = utility_gap(&SimConfig::with_defaults(6, 2, rho, 6), 200).expect("n <= 8");
        println!(
            "rho {:3}: u_bar {:.2}, measured {:.2} (+/- {:.2}), gap {:.2}, monitoring bits {:.0} <= {:.0}",
            g.rho, g.u_bar, g.average_utility, g.half_width, g.gap, g.monitoring_bits, g.monitoring_bits_bound
        );
    }
}
