//! Line-based trace export of one stage with a deviation in it.

use mediated_gossip::config::{NodeId, SimConfig};
use mediated_gossip::sim::{export_trace, run, DeviationKind, DeviationPlan, ShapeViolation};

fn main() {
    let cfg = SimConfig::with_defaults(4, 1, 4, 2);
    let plan = DeviationPlan {
        node: NodeId(2),
        stage: 1,
        round: cfg.r_mon() + 2,
        kind: DeviationKind::InvalidMessage { shape: ShapeViolation::DuplicateTuple, to: Some(NodeId(1)) },
    };
    let trace = run(&cfg, 2, Some(&plan)).expect("valid plan");
    print!("{}", export_trace(&trace));
}
