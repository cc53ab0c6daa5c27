//! Gain of conforming for each deviation kind, over a few discount factors.

use mediated_gossip::analysis::{equilibrium_sweep, DeviationClass};
use mediated_gossip::config::SimConfig;

fn main() {
    let grid: Vec<SimConfig> = [0.0, 0.5, 0.95]
        .into_iter()
        .map(|d| {
            let mut c = SimConfig::with_defaults(6, 2, 64, 6);
            c.delta_disc = d;
            c
        })
        .collect();
    let rows = equilibrium_sweep(&grid, &DeviationClass::ALL, 100).expect("valid grid");
    println!("{:>5}  {:<20} {:>10} {:>10}  pass", "delta", "deviation", "mean", "+/-");
    for r in rows {
        println!("{:>5}  {:<20} {:>10.2} {:>10.2}  {}", r.delta_disc, r.deviation, r.delta_mean, r.ci_halfwidth, r.pass);
    }
}
