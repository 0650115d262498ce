//! A nine-node mining network under two topologies. Sparse wiring means
//! slower gossip, more simultaneous finds, and more stale blocks.

use blocksim::analysis::summarize;
use blocksim::netsim::{
    run_simulation, EventTrace, LatencyModel, MinerSpec, SimConfig, Topology, TraceEvent,
};

fn run(topology: Topology, label: &str) -> EventTrace {
    let mut cfg = SimConfig::default();
    cfg.seed = 44;
    cfg.nodes = 9;
    cfg.topology = topology;
    cfg.latency = LatencyModel::Uniform { min_ms: 100.0, max_ms: 400.0 };
    cfg.miners = vec![
        MinerSpec { node: 0, share: 0.5 },
        MinerSpec { node: 4, share: 0.3 },
        MinerSpec { node: 8, share: 0.2 },
    ];
    cfg.mean_block_interval = 5.0;
    cfg.duration = 3600.0;
    cfg.workload.users = 9;
    cfg.workload.addresses_per_user = 2;
    cfg.workload.tx_rate = 0.2;
    let trace = run_simulation(&cfg).unwrap().trace;

    let m = summarize(&trace);
    let mut block_msgs = 0u64;
    let mut tx_msgs = 0u64;
    for ev in trace.events() {
        match ev {
            TraceEvent::BlockRecv { .. } => block_msgs += 1,
            TraceEvent::TxRecv { .. } => tx_msgs += 1,
            _ => {}
        }
    }

    println!("== {label} ==");
    println!("  blocks found          {}", m.total_blocks);
    println!("  on the best chain     {}", m.chain_blocks);
    println!("  stale rate            {:.1}%", m.stale_rate * 100.0);
    println!("  mean block interval   {:.2} s", m.mean_block_interval.unwrap_or(f64::NAN));
    for node in [0usize, 4, 8] {
        println!(
            "  miner {node} found {:>4} blocks ({:.1}% of the network)",
            m.blocks_found.get(&node).copied().unwrap_or(0),
            m.found_fraction(node) * 100.0
        );
    }
    println!("  gossip deliveries     {} blocks, {} transactions", block_msgs, tx_msgs);
    let tips = trace.final_tips();
    let agreed = tips.iter().filter(|(tip, _)| *tip == tips[0].0).count();
    println!("  {agreed}/{} nodes agree on the final tip\n", tips.len());
    trace
}

fn main() {
    // Five-second blocks against sub-second gossip: fast enough that the
    // network's shape shows up in the stale rate.
    run(Topology::Complete, "complete graph: everyone peers with everyone");
    run(Topology::Ring, "ring: news crawls around the circle");
}
