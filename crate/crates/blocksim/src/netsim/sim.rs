//! Discrete-event network engine.
//!
//! The world advances through one time-ordered queue of events. All
//! randomness flows from named substreams of a single master seed, so a
//! given configuration replays to a byte-identical trace.
//!
//! Mining is a Poisson process per miner: discovery times are exponential
//! draws at a rate set by the miner's hashrate share and the difficulty
//! its own node currently faces. The draw decides *when* a block appears;
//! when a clock fires, a real nonce search against the real target decides
//! the block itself, so every block in a trace carries checkable proof of
//! work. Exponential clocks are memoryless, which licenses resampling a
//! miner's pending clock whenever its rate changes (its node's tip moved,
//! or the global hashrate scale stepped) without distorting the process.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::chain::{mine_block, Block, BlockTemplate, ChainParams, ChainStore, ConnectOutcome};
use crate::ledger::{pay, sha256, Address, Transaction, ValidationError};
use crate::netsim::config::{ConfigError, LatencyModel, SimConfig, Topology};
use crate::netsim::node::{MempoolVerdict, Node};
use crate::netsim::trace::{ConnectKind, EventTrace, TraceEvent, TRACE_SCHEMA};
use crate::netsim::workload::Wallets;

/// How many parentless transactions a node keeps around.
const ORPHAN_BLOCK_LIMIT: usize = 4096;

#[derive(Clone)]
enum Payload {
    Tx(Arc<Transaction>),
    Block(Arc<Block>),
}

enum EventKind {
    TxArrival,
    Deliver { to: usize, from: usize, payload: Payload },
    BlockFound { miner: usize, generation: u64 },
    HashrateStep { idx: usize },
}

struct Scheduled {
    time: f64,
    /// Tie-breaker: among equal times, insertion order wins.
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl Eq for Scheduled {}

impl Ord for Scheduled {
    // Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct MinerClock {
    node: usize,
    /// Absolute share of total hashrate, straight from the config.
    share: f64,
    /// Bumped on every resample; a firing clock with a stale generation
    /// is ignored.
    generation: u64,
}

/// Substream of the master seed, keyed by purpose. Keeps draws for one
/// concern (key generation, latency, ...) independent of draws for
/// another, so e.g. adding a miner does not shuffle the wallet universe.
fn stream_rng(seed: u64, label: &str) -> ChaCha12Rng {
    let mut buf = Vec::with_capacity(label.len() + 8);
    buf.extend_from_slice(label.as_bytes());
    buf.extend_from_slice(&seed.to_le_bytes());
    ChaCha12Rng::from_seed(sha256(&buf))
}

/// Exponential draw with the given rate (events per second).
fn exp_sample<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    debug_assert!(rate > 0.0);
    let u: f64 = rng.gen(); // [0, 1)
    -(1.0 - u).ln() / rate
}

/// Adjacency lists for all nodes including the spy, which peers with
/// every honest node (it hears everything, says nothing).
fn build_peers(cfg: &SimConfig, rng: &mut ChaCha12Rng) -> Vec<Vec<usize>> {
    let n = cfg.nodes;
    let mut peers: Vec<Vec<usize>> = vec![Vec::new(); cfg.total_nodes()];
    let link = |peers: &mut Vec<Vec<usize>>, a: usize, b: usize| {
        peers[a].push(b);
        peers[b].push(a);
    };
    match cfg.topology {
        Topology::Complete => {
            for i in 0..n {
                for j in i + 1..n {
                    link(&mut peers, i, j);
                }
            }
        }
        Topology::Ring => {
            for i in 0..n {
                let j = (i + 1) % n;
                if i < j || (j == 0 && i > 1) {
                    link(&mut peers, i, j);
                }
            }
        }
        Topology::Star => {
            for i in 1..n {
                link(&mut peers, 0, i);
            }
        }
        Topology::Random { edge_prob } => {
            // Each pair flips a coin; a node whose coin never landed gets
            // one uniform earlier peer, which keeps the graph connected.
            for i in 1..n {
                let mut any = false;
                for j in 0..i {
                    if rng.gen_bool(edge_prob) {
                        link(&mut peers, i, j);
                        any = true;
                    }
                }
                if !any {
                    let j = rng.gen_range(0..i);
                    link(&mut peers, i, j);
                }
            }
        }
    }
    if let Some(spy) = cfg.spy_node() {
        for i in 0..n {
            link(&mut peers, i, spy);
        }
    }
    peers
}

/// Everything a finished run leaves behind: the event trace and each
/// node's final chain state, indexed by node id (spy last, if present).
pub struct SimOutput {
    pub trace: EventTrace,
    pub chains: Vec<ChainStore>,
}

/// Runs the configured network to completion.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimOutput, ConfigError> {
    cfg.validate()?;
    let mut sim = Sim::new(cfg.clone());
    sim.run();
    let chains = sim.nodes.into_iter().map(|n| n.chain).collect();
    Ok(SimOutput { trace: sim.trace, chains })
}

struct Sim {
    cfg: SimConfig,
    nodes: Vec<Node>,
    wallets: Wallets,
    miners: Vec<MinerClock>,
    queue: BinaryHeap<Scheduled>,
    next_seq: u64,
    next_record: u64,
    now: f64,
    /// Current global hashrate multiplier.
    scale: f64,
    /// No payment arrivals are scheduled past this moment.
    tx_stop: f64,
    trace: EventTrace,
    rng_mining: ChaCha12Rng,
    rng_workload: ChaCha12Rng,
    rng_arrivals: ChaCha12Rng,
    rng_latency: ChaCha12Rng,
}

impl Sim {
    fn new(cfg: SimConfig) -> Sim {
        let mut rng_keys = stream_rng(cfg.seed, "keys");
        let mut rng_topology = stream_rng(cfg.seed, "topology");
        let wallets = Wallets::generate(
            cfg.sig_scheme,
            cfg.workload.users,
            cfg.workload.addresses_per_user,
            cfg.nodes,
            &mut rng_keys,
        );
        let peers = build_peers(&cfg, &mut rng_topology);
        let params = ChainParams {
            initial_target: cfg.initial_target,
            reward: cfg.reward.clone(),
            retarget: cfg.retarget,
            max_block_txs: cfg.max_block_txs,
            orphan_limit: ORPHAN_BLOCK_LIMIT,
        };
        let spy = cfg.spy_node();
        let nodes: Vec<Node> = peers
            .into_iter()
            .enumerate()
            .map(|(i, p)| Node::new(i, ChainStore::new(params.clone()), p, Some(i) == spy))
            .collect();

        let miners = cfg
            .miners
            .iter()
            .map(|m| MinerClock { node: m.node, share: m.share, generation: 0 })
            .collect();

        let mut trace = EventTrace::new();
        trace.record(TraceEvent::Meta {
            schema: TRACE_SCHEMA,
            seed: cfg.seed,
            scheme: cfg.sig_scheme,
            nodes: cfg.nodes,
            spy,
        });

        let tx_stop = cfg.workload.tx_stop_time.unwrap_or(f64::INFINITY).min(cfg.duration);
        let mut sim = Sim {
            nodes,
            wallets,
            miners,
            queue: BinaryHeap::new(),
            next_seq: 0,
            next_record: 1,
            now: 0.0,
            scale: 1.0,
            tx_stop,
            trace,
            rng_mining: stream_rng(cfg.seed, "mining"),
            rng_workload: stream_rng(cfg.seed, "workload"),
            rng_arrivals: stream_rng(cfg.seed, "arrivals"),
            rng_latency: stream_rng(cfg.seed, "latency"),
            cfg,
        };

        // Hashrate steps first so a step at t = 0 applies before any clock
        // seeded below fires at t = 0.
        for idx in 0..sim.cfg.hashrate_schedule.len() {
            let t = sim.cfg.hashrate_schedule[idx].0;
            sim.schedule(t, EventKind::HashrateStep { idx });
        }
        if sim.cfg.workload.tx_rate > 0.0 && sim.cfg.workload.users > 0 {
            let dt = exp_sample(&mut sim.rng_arrivals, sim.cfg.workload.tx_rate);
            if dt <= sim.tx_stop {
                sim.schedule(dt, EventKind::TxArrival);
            }
        }
        for m in 0..sim.miners.len() {
            sim.resample_miner(m);
        }
        sim
    }

    fn run(&mut self) {
        while let Some(ev) = self.queue.pop() {
            if ev.time > self.cfg.duration {
                // In-flight messages still land so chains settle, but
                // nothing new happens after the horizon.
                if !matches!(ev.kind, EventKind::Deliver { .. }) {
                    continue;
                }
            }
            self.now = ev.time;
            match ev.kind {
                EventKind::TxArrival => self.handle_tx_arrival(),
                EventKind::Deliver { to, from, payload } => match payload {
                    Payload::Tx(tx) => self.handle_deliver_tx(to, from, tx),
                    Payload::Block(b) => self.handle_deliver_block(to, from, b),
                },
                EventKind::BlockFound { miner, generation } => {
                    self.handle_block_found(miner, generation)
                }
                EventKind::HashrateStep { idx } => self.handle_hashrate_step(idx),
            }
        }
        for n in 0..self.nodes.len() {
            let (tip, height) = (self.nodes[n].chain.best_tip(), self.nodes[n].chain.best_height());
            let ev = TraceEvent::NodeTip {
                t: self.cfg.duration,
                seq: self.bump_record(),
                node: n,
                tip,
                height,
            };
            self.trace.record(ev);
        }
    }

    fn schedule(&mut self, time: f64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Scheduled { time, seq, kind });
    }

    fn bump_record(&mut self) -> u64 {
        let s = self.next_record;
        self.next_record += 1;
        s
    }

    /// Fans a payload out to a node's peers. The spy only listens.
    fn relay(&mut self, sender: usize, exclude: Option<usize>, payload: Payload) {
        if self.nodes[sender].is_spy {
            return;
        }
        let peers = self.nodes[sender].peers.clone();
        for p in peers {
            if Some(p) == exclude {
                continue;
            }
            let delay_ms = match self.cfg.latency {
                LatencyModel::Constant { ms } => ms,
                LatencyModel::Uniform { min_ms, max_ms } => {
                    self.rng_latency.gen_range(min_ms..=max_ms)
                }
            };
            self.schedule(
                self.now + delay_ms / 1000.0,
                EventKind::Deliver { to: p, from: sender, payload: payload.clone() },
            );
        }
    }

    /// Discovery rate for one miner, in blocks per second. Difficulty is
    /// whatever its own node would demand of the next block, expressed
    /// relative to the starting target so retargeting feeds back into the
    /// clock: a halved target means a halved rate.
    fn miner_rate(&self, m: usize) -> f64 {
        let clock = &self.miners[m];
        let chain = &self.nodes[clock.node].chain;
        let tip = chain.best_tip();
        let next = chain.expected_target(&tip).expect("own tip is known");
        let ratio = next.ratio_to(&self.cfg.initial_target);
        clock.share / self.cfg.mean_block_interval * self.scale * ratio
    }

    fn resample_miner(&mut self, m: usize) {
        self.miners[m].generation += 1;
        let rate = self.miner_rate(m);
        if rate <= 0.0 || !rate.is_finite() {
            return; // clock parked until the next rate change
        }
        let dt = exp_sample(&mut self.rng_mining, rate);
        let generation = self.miners[m].generation;
        self.schedule(self.now + dt, EventKind::BlockFound { miner: m, generation });
    }

    fn resample_miners_at(&mut self, node: usize) {
        for m in 0..self.miners.len() {
            if self.miners[m].node == node {
                self.resample_miner(m);
            }
        }
    }

    /// Coinbase payout for blocks found at `node`: the first user homed
    /// there, so rewards circulate back into the payment workload. With
    /// no users configured, rewards go to an unspendable per-node sink.
    fn payout_address(&self, node: usize) -> Address {
        if self.wallets.user_count() > 0 {
            self.wallets.payout_address(node)
        } else {
            let mut buf = b"blocksim/sink/v1".to_vec();
            buf.extend_from_slice(&(node as u64).to_le_bytes());
            Address(sha256(&buf))
        }
    }

    fn handle_tx_arrival(&mut self) {
        // Keep the arrival stream independent of what each arrival does.
        let dt = exp_sample(&mut self.rng_arrivals, self.cfg.workload.tx_rate);
        let next = self.now + dt;
        if next <= self.tx_stop {
            self.schedule(next, EventKind::TxArrival);
        }

        let user = self.rng_workload.gen_range(0..self.cfg.workload.users);
        let home = self.wallets.user(user).home;
        let built = self.wallets.build_payment(
            user,
            self.nodes[home].chain.tip_utxo(),
            &self.cfg.workload.value,
            self.cfg.workload.fee,
            &mut self.rng_workload,
        );
        let payment = match built {
            Err(reason) => {
                let ev = TraceEvent::TxSkipped {
                    t: self.now,
                    seq: self.bump_record(),
                    node: home,
                    user,
                    reason: reason.as_str().to_string(),
                };
                self.trace.record(ev);
                return;
            }
            Ok(p) => p,
        };
        let tx = Arc::new(payment.tx);
        let id = tx.id();
        let ev = TraceEvent::TxArrival {
            t: self.now,
            seq: self.bump_record(),
            node: home,
            tx: id,
            user,
            amount: payment.amount,
            fee: payment.fee,
        };
        self.trace.record(ev);
        self.nodes[home].seen_txs.insert(id);

        let node = &mut self.nodes[home];
        let verdict = node.mempool.try_insert(tx.clone(), node.chain.tip_utxo());
        match verdict {
            MempoolVerdict::Accepted { .. } => {
                let ev = TraceEvent::TxSeen {
                    t: self.now,
                    seq: self.bump_record(),
                    node: home,
                    tx: id,
                };
                self.trace.record(ev);
                self.relay(home, None, Payload::Tx(tx));
            }
            // The wallet builds against this node's own tip and never
            // reuses an outpoint, so rejection here is a bug.
            other => unreachable!("own wallet tx rejected: {other:?}"),
        }
    }

    fn handle_deliver_tx(&mut self, to: usize, from: usize, tx: Arc<Transaction>) {
        let id = tx.id();
        if !self.nodes[to].seen_txs.insert(id) {
            return;
        }
        let ev = TraceEvent::TxRecv {
            t: self.now,
            seq: self.bump_record(),
            node: to,
            from,
            tx: id,
        };
        self.trace.record(ev);

        let node = &mut self.nodes[to];
        let verdict = node.mempool.try_insert(tx.clone(), node.chain.tip_utxo());
        match verdict {
            MempoolVerdict::Accepted { .. } => {
                let ev = TraceEvent::TxSeen {
                    t: self.now,
                    seq: self.bump_record(),
                    node: to,
                    tx: id,
                };
                self.trace.record(ev);
                self.relay(to, Some(from), Payload::Tx(tx));
            }
            MempoolVerdict::Known => {}
            MempoolVerdict::Conflict { with } => {
                let reason = format!("input already claimed by {}", with.short());
                let ev = TraceEvent::TxRejected {
                    t: self.now,
                    seq: self.bump_record(),
                    node: to,
                    tx: id,
                    reason,
                };
                self.trace.record(ev);
            }
            MempoolVerdict::Invalid(ValidationError::MissingUtxo(_)) => {
                // Likely raced ahead of the block that funds it; park it
                // and retry on the next tip change.
                self.nodes[to].backlog.push(tx);
                let ev = TraceEvent::TxRejected {
                    t: self.now,
                    seq: self.bump_record(),
                    node: to,
                    tx: id,
                    reason: "inputs not found, held for retry".to_string(),
                };
                self.trace.record(ev);
            }
            MempoolVerdict::Invalid(e) => {
                let ev = TraceEvent::TxRejected {
                    t: self.now,
                    seq: self.bump_record(),
                    node: to,
                    tx: id,
                    reason: e.to_string(),
                };
                self.trace.record(ev);
            }
        }
    }

    fn handle_deliver_block(&mut self, to: usize, from: usize, block: Arc<Block>) {
        let id = block.id();
        if !self.nodes[to].seen_blocks.insert(id) {
            return;
        }
        let ev = TraceEvent::BlockRecv {
            t: self.now,
            seq: self.bump_record(),
            node: to,
            from,
            block: id,
        };
        self.trace.record(ev);

        let before = self.nodes[to].chain.best_tip();
        let connected = match self.nodes[to].chain.connect_recursive(block.clone()) {
            Ok(list) => list,
            Err(e) => {
                // Invalid blocks are dropped and, unlike merely parentless
                // ones, not propagated.
                log::warn!("node {to}: rejected block {id}: {e}");
                return;
            }
        };
        let (tip, tip_height) =
            (self.nodes[to].chain.best_tip(), self.nodes[to].chain.best_height());
        let mut returned = Vec::new();
        for (bid, outcome) in connected {
            let (kind, depth) = match outcome {
                ConnectOutcome::ExtendedBest => (ConnectKind::ExtendedBest, None),
                ConnectOutcome::CreatedFork => (ConnectKind::CreatedFork, None),
                ConnectOutcome::Orphaned => (ConnectKind::Orphaned, None),
                ConnectOutcome::Reorganized { depth, returned_txs } => {
                    returned.extend(returned_txs);
                    (ConnectKind::Reorganized, Some(depth))
                }
            };
            let ev = TraceEvent::BlockConnect {
                t: self.now,
                seq: self.bump_record(),
                node: to,
                block: bid,
                outcome: kind,
                depth,
                tip,
                tip_height,
            };
            self.trace.record(ev);
        }
        if self.nodes[to].chain.best_tip() != before {
            self.after_tip_change(to, returned);
        }
        self.relay(to, Some(from), Payload::Block(block));
    }

    fn handle_block_found(&mut self, m: usize, generation: u64) {
        if self.miners[m].generation != generation {
            return; // clock was resampled while this one was in flight
        }
        let n = self.miners[m].node;
        let node = &self.nodes[n];
        let parent = node.chain.best_tip();
        let height = node.chain.best_height() + 1;
        let target = node.chain.expected_target(&parent).expect("own tip is known");
        let picked = node.mempool.select(self.cfg.max_block_txs);

        let mut claim = self.cfg.reward.reward(height);
        for (_, fee) in &picked {
            claim = claim.checked_add(*fee).expect("coin supply fits in u64");
        }
        let outputs =
            if claim.is_zero() { Vec::new() } else { vec![pay(self.payout_address(n), claim)] };
        let coinbase = Transaction::coinbase(height, outputs)
            .expect("subsidy plus fees is a well-formed claim");
        let coinbase_id = coinbase.id();
        let txs: Vec<Arc<Transaction>> = picked.into_iter().map(|(tx, _)| tx).collect();
        let txids = txs.iter().map(|t| t.id()).collect();

        let template = BlockTemplate {
            parent,
            height,
            target,
            timestamp_ms: (self.now * 1000.0).round() as u64,
            coinbase,
            txs,
        };
        let mined =
            mine_block(template, u64::MAX, &mut self.rng_mining).expect("unbounded search");
        let block = mined.block;
        let id = block.id();

        self.nodes[n].seen_blocks.insert(id);
        let ev = TraceEvent::BlockFound {
            t: self.now,
            seq: self.bump_record(),
            node: n,
            block: id,
            parent,
            height,
            target,
            attempts: mined.attempts,
            txs: txids,
            coinbase: coinbase_id,
        };
        self.trace.record(ev);

        let outcome = self.nodes[n].chain.connect_block(block.clone());
        debug_assert_eq!(outcome, Ok(ConnectOutcome::ExtendedBest));
        let ev = TraceEvent::BlockConnect {
            t: self.now,
            seq: self.bump_record(),
            node: n,
            block: id,
            outcome: ConnectKind::ExtendedBest,
            depth: None,
            tip: id,
            tip_height: height,
        };
        self.trace.record(ev);

        self.after_tip_change(n, Vec::new());
        self.relay(n, None, Payload::Block(block));
    }

    fn handle_hashrate_step(&mut self, idx: usize) {
        let scale = self.cfg.hashrate_schedule[idx].1;
        self.scale = scale;
        let ev = TraceEvent::HashrateScale { t: self.now, seq: self.bump_record(), scale };
        self.trace.record(ev);
        for m in 0..self.miners.len() {
            self.resample_miner(m);
        }
    }

    /// Housekeeping after a node's best tip moves: reconsider transactions
    /// that reorgs returned, retry the parked backlog, drop mempool
    /// entries the new state confirmed or invalidated, and restart the
    /// node's mining clocks against the new difficulty.
    fn after_tip_change(&mut self, n: usize, returned: Vec<Arc<Transaction>>) {
        let node = &mut self.nodes[n];
        for tx in returned {
            // Best effort: a returned tx may conflict with the new branch.
            let _ = node.mempool.try_insert(tx, node.chain.tip_utxo());
        }
        let mut announce = Vec::new();
        for tx in node.backlog.drain() {
            match node.mempool.try_insert(tx.clone(), node.chain.tip_utxo()) {
                MempoolVerdict::Accepted { .. } => announce.push(tx),
                MempoolVerdict::Invalid(ValidationError::MissingUtxo(_)) => node.backlog.push(tx),
                _ => {} // settled elsewhere or permanently dead
            }
        }
        node.mempool.revalidate(node.chain.tip_utxo());
        for tx in announce {
            let id = tx.id();
            let ev =
                TraceEvent::TxSeen { t: self.now, seq: self.bump_record(), node: n, tx: id };
            self.trace.record(ev);
            self.relay(n, None, Payload::Tx(tx));
        }
        self.resample_miners_at(n);
    }
}
