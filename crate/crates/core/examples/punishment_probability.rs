//! Verdict frequency after dropping forwards in k sequences, against 1 - (1 - p)^k.

use mediated_gossip::analysis::{punish_probability, replicate_config};
use mediated_gossip::config::{NodeId, SimConfig};
use mediated_gossip::message::Message;
use mediated_gossip::sim::{run, run_with, DeviationKind, DeviationPlan, IdSelector, RunOptions};

fn main() {
    let mut cfg = SimConfig::with_defaults(5, 2, 16, 4);
    cfg.p_mon = 0.3;
    let node = NodeId(1);
    let trials = 2000;
    for k in 0..=3u32 {
        let mut hits = 0;
        let mut done = 0;
        let mut r = 0;
        while done < trials {
            let c = replicate_config(&cfg, r);
            r += 1;
            let Some(plans) = drops(&c, node, k) else { continue };
            let t = run_with(&c, 2, &plans, RunOptions::default()).unwrap();
            hits += usize::from(t.stage(2).verdicts.contains(node));
            done += 1;
        }
        println!(
            "k = {k}: verdicts {:.3}, formula {:.3}",
            hits as f64 / trials as f64,
            punish_probability(k, cfg.p_mon)
        );
    }
}

/// Drop the first forward of `node` in each of the first `k` sequences.
fn drops(cfg: &SimConfig, node: NodeId, k: u32) -> Option<Vec<DeviationPlan>> {
    let clean = run(cfg, 1, None).unwrap();
    let mut plans: Vec<DeviationPlan> = Vec::new();
    for (round, e) in clean.stage(1).messages() {
        let Message::Dissemination { tuples } = &e.message else { continue };
        if e.sender != node {
            continue;
        }
        for t in tuples {
            let seq = t.id.seq(cfg.per_seq);
            let used = plans.iter().any(|p| match p.kind {
                DeviationKind::DropForward(IdSelector::Id(id)) => id.seq(cfg.per_seq) == seq,
                _ => false,
            });
            if !used && (plans.len() as u32) < k {
                plans.push(DeviationPlan { node, stage: 1, round, kind: DeviationKind::DropForward(IdSelector::Id(t.id)) });
            }
        }
    }
    (plans.len() as u32 == k).then_some(plans)
}
