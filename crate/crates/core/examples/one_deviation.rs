//! Paired comparison of conforming against one skipped forwarding round.

use mediated_gossip::analysis::{one_deviation_delta, DeviationClass};
use mediated_gossip::config::SimConfig;
use mediated_gossip::sim::paired_run;
use mediated_gossip::utility::{stage_utility, to_f64};

fn main() {
    let mut cfg = SimConfig::with_defaults(6, 2, 64, 6);
    cfg.p_mon = 1.0;
    let scenario = DeviationClass::DropForward.scenario(&cfg);
    let node = scenario.plan.node;
    println!("deviation: {:?}", scenario.plan);

    let (conform, deviate) = paired_run(&cfg, 4, &scenario.plan).expect("valid plan");
    for t in 1..=4 {
        println!(
            "stage {t}: u(conform) = {:8.2}  u(deviate) = {:8.2}  verdict: {}",
            to_f64(stage_utility(&conform, t, node)),
            to_f64(stage_utility(&deviate, t, node)),
            deviate.stage(t).verdicts.contains(node)
        );
    }

    for delta in [0.0, 0.95] {
        cfg.delta_disc = delta;
        let est = one_deviation_delta(&cfg, &scenario, 200).expect("valid scenario");
        println!("delta = {delta}: gain of conforming {:.2} +/- {:.2}", est.mean, est.half_width);
    }
}
