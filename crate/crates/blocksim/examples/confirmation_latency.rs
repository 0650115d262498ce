//! How long a payee waits for k confirmations when blocks land every ten
//! minutes on average: about k intervals, with the full spread of Poisson
//! luck around it.

use blocksim::netsim::{run_simulation, MinerSpec, SimConfig, TraceEvent};

fn main() {
    let mut cfg = SimConfig::default();
    cfg.seed = 17;
    cfg.nodes = 1;
    cfg.miners = vec![MinerSpec { node: 0, share: 1.0 }];
    cfg.mean_block_interval = 600.0;
    cfg.duration = 400_000.0;
    cfg.max_block_txs = 10_000;
    cfg.workload.users = 6;
    cfg.workload.addresses_per_user = 4;
    cfg.workload.tx_rate = 0.005;
    cfg.workload.tx_stop_time = Some(370_000.0);
    let trace = run_simulation(&cfg).unwrap().trace;

    let arrivals: Vec<(blocksim::ledger::TxId, f64)> = trace
        .events()
        .iter()
        .filter_map(|ev| match ev {
            TraceEvent::TxArrival { t, tx, .. } => Some((*tx, *t)),
            _ => None,
        })
        .collect();
    println!("{} payments sent over {:.0} hours of simulated time", arrivals.len(), cfg.duration / 3600.0);
    println!("\n k   mean wait    expected   payments");
    for k in 1..=6u64 {
        let mut waits: Vec<f64> = Vec::new();
        for (tx, t0) in &arrivals {
            if let Some(tk) = trace.time_to_confirmations(tx, 0, k) {
                waits.push(tk - t0);
            }
        }
        let mean = waits.iter().sum::<f64>() / waits.len() as f64;
        println!(
            "{k:>2}   {:>7.1} s   {:>6.0} s   {:>8}",
            mean,
            k as f64 * cfg.mean_block_interval,
            waits.len()
        );
    }
    println!(
        "\nthe first confirmation takes one full interval on average -- the \
         block process is memoryless, so a payment never arrives \"almost at\" \
         the next block -- and each further confirmation adds another interval"
    );
}
