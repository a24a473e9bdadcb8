//! Run the three-method comparison on the simulator for a few seeds.
//!
//! Usage: `cargo run --release --example compare_methods -- [key=value ...]`
//! with keys `seeds`, `iterations`, `hidden`, `lr`, `reduction` (sum|mean),
//! `features` (raw|smoothed|normalized|smoothed-normalized), `jitter`,
//! `dropout`, `neighbor`, `stray`, `gain`, `link`, `period`, `base`, `visitors`, `train`, `span`
//! (visit|matrix).

use std::time::Instant;

use roomtrace::experiment::{compare_methods, LabelSpan, ProtocolConfig};
use roomtrace::nn::StepReduction;
use roomtrace::sim::WalkerPolicy;
use roomtrace::MuseumGraph;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = MuseumGraph::borghese();
    let policy = WalkerPolicy::borghese(&g);
    let mut cfg = ProtocolConfig::default();
    let mut seeds = 3u64;
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').ok_or("expected key=value")?;
        match k {
            "seeds" => seeds = v.parse()?,
            "iterations" => cfg.train.iterations = v.parse()?,
            "hidden" => cfg.train.hidden = vec![v.parse()?],
            "lr" => cfg.train.learning_rate = v.parse()?,
            "reduction" => {
                cfg.train.reduction = if v == "mean" { StepReduction::Mean } else { StepReduction::Sum }
            }
            "features" => cfg.input.features = v.parse()?,
            "jitter" => cfg.sim.noise.jitter_sd = v.parse()?,
            "dropout" => cfg.sim.noise.dropout_p = v.parse()?,
            "neighbor" => cfg.sim.noise.neighbor_rssi = v.parse()?,
            "stray" => cfg.sim.noise.stray_p = v.parse()?,
            "gain" => cfg.sim.noise.receiver_gain_sd = v.parse()?,
            "link" => cfg.sim.noise.link_gain_sd = v.parse()?,
            "period" => cfg.sim.noise.sample_period = v.parse()?,
            "base" => cfg.sim.noise.base_rssi = v.parse()?,
            "visitors" => cfg.sim.n_visitors = v.parse()?,
            "train" => cfg.train_visitors = v.parse()?,
            "span" => {
                cfg.label_span = if v == "matrix" { LabelSpan::Matrix } else { LabelSpan::Visit }
            }
            other => return Err(format!("unknown key {other}").into()),
        }
    }
    println!("seed\tam\tma\tnn\tloss\tmonotone\tsecs");
    for seed in 0..seeds {
        cfg.sim.seed = seed;
        cfg.train.seed = seed;
        let start = Instant::now();
        let c = compare_methods(&g, &policy, &cfg)?;
        println!(
            "{seed}\t{:.3}\t{:.3}\t{:.3}\t{:.4}\t{}\t{:.1}",
            c.am,
            c.ma,
            c.nn,
            c.report.final_loss().unwrap_or(f64::NAN),
            c.report.is_monotone(),
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
