//! A few conformant stages: traffic, monitoring draws and per-node utility.

use mediated_gossip::config::SimConfig;
use mediated_gossip::sim::run;
use mediated_gossip::utility::{to_f64, utility_report};

fn main() {
    let cfg = SimConfig::with_defaults(5, 2, 16, 4);
    let trace = run(&cfg, 3, None).expect("valid config");
    for st in &trace.stages {
        let bits: u64 = st.messages().map(|(_, e)| e.bits).sum();
        println!(
            "stage {}: {} messages, {bits} bits, monitored {:?}, verdicts {:?}",
            st.stage,
            st.messages().count(),
            st.monitored,
            st.verdicts.owners().collect::<Vec<_>>()
        );
    }
    for row in utility_report(&trace) {
        println!(
            "stage {} node {}: received {} events, sent {} bits, u = {:.2}",
            row.stage,
            row.node,
            row.benefit_events,
            row.bits_sent,
            to_f64(row.realized_u)
        );
    }
}
