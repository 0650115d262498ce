//! Simulation configuration and its validation.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::chain::{RetargetParams, RewardSchedule, Target};
use crate::ledger::{Amount, SigScheme};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    /// Every pair of nodes is peered.
    Complete,
    /// Node i is peered with node (i + 1) mod n.
    Ring,
    /// Node 0 is peered with everyone else.
    Star,
    /// Each pair is peered independently with probability `edge_prob`.
    Random { edge_prob: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencyModel {
    Constant { ms: f64 },
    Uniform { min_ms: f64, max_ms: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueModel {
    Fixed { amount: Amount },
    Uniform { min: Amount, max: Amount },
}

/// A mining node. `share` is the node's absolute slice of total network
/// hashrate, in [0, 1]; shares across all miners sum to at most 1. A sum
/// below 1 models hashpower that simply is not there, so blocks arrive
/// proportionally slower.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinerSpec {
    pub node: usize,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub users: usize,
    pub addresses_per_user: usize,
    /// Payment arrivals per second across the whole network. Zero runs a
    /// block-only simulation.
    pub tx_rate: f64,
    pub value: ValueModel,
    pub fee: Amount,
    /// Arrivals stop here; defaults to the full duration. Stopping early
    /// leaves room for the tail of payments to confirm before the run
    /// ends.
    pub tx_stop_time: Option<f64>,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            users: 8,
            addresses_per_user: 4,
            tx_rate: 0.0,
            value: ValueModel::Fixed { amount: Amount::coins(1) },
            fee: Amount(100_000),
            tx_stop_time: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub nodes: usize,
    pub topology: Topology,
    pub latency: LatencyModel,
    pub miners: Vec<MinerSpec>,
    /// Network-wide mean seconds between blocks at the initial target and
    /// hashrate scale 1. Mining rates track the current target, so after a
    /// retarget the realized interval moves accordingly.
    pub mean_block_interval: f64,
    /// Simulated seconds. Arrivals and mining stop here; messages already
    /// in flight still drain so connected nodes converge.
    pub duration: f64,
    pub initial_target: Target,
    pub reward: RewardSchedule,
    pub retarget: RetargetParams,
    pub max_block_txs: usize,
    pub sig_scheme: SigScheme,
    pub workload: WorkloadConfig,
    /// Adds one extra node peered with every other. It never mines,
    /// originates or relays anything; it only records what it hears.
    pub spy: bool,
    /// (time_s, scale) steps applied to every miner's rate. Times must be
    /// ascending and scales positive.
    pub hashrate_schedule: Vec<(f64, f64)>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            nodes: 4,
            topology: Topology::Complete,
            latency: LatencyModel::Constant { ms: 50.0 },
            miners: vec![MinerSpec { node: 0, share: 1.0 }],
            mean_block_interval: 600.0,
            duration: 3600.0,
            initial_target: Target::pow2(248),
            reward: RewardSchedule { initial: Amount::coins(50), halving_interval: 210_000 },
            retarget: RetargetParams::OFF,
            max_block_txs: 100,
            sig_scheme: SigScheme::Simulated,
            workload: WorkloadConfig::default(),
            spy: false,
            hashrate_schedule: vec![],
        }
    }
}

/// Names the offending field so a scenario author knows what to fix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub(crate) fn new(field: &str, message: impl Into<String>) -> Self {
        ConfigError { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = ConfigError::new;
        if self.nodes == 0 {
            return Err(err("nodes", "need at least one node"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(err("duration", "must be positive and finite"));
        }
        if !(self.mean_block_interval > 0.0 && self.mean_block_interval.is_finite()) {
            return Err(err("mean_block_interval", "must be positive and finite"));
        }
        let mut share_sum = 0.0;
        let mut seen_nodes = std::collections::HashSet::new();
        for (i, m) in self.miners.iter().enumerate() {
            if m.node >= self.nodes {
                return Err(err("miners", &format!("miner {i} sits on unknown node {}", m.node)));
            }
            if !(m.share > 0.0 && m.share <= 1.0) {
                return Err(err("miners", &format!("miner {i} share must lie in (0, 1]")));
            }
            if !seen_nodes.insert(m.node) {
                return Err(err("miners", &format!("node {} listed twice", m.node)));
            }
            share_sum += m.share;
        }
        // Tolerance: thirds and the like must not trip the bound.
        if share_sum > 1.0 + 1e-9 {
            return Err(err("miners", &format!("hashrate shares sum to {share_sum}, must be <= 1")));
        }
        match self.topology {
            Topology::Random { edge_prob } => {
                if !(0.0..=1.0).contains(&edge_prob) {
                    return Err(err("topology.edge_prob", "must lie in [0, 1]"));
                }
            }
            Topology::Complete | Topology::Ring | Topology::Star => {}
        }
        match self.latency {
            LatencyModel::Constant { ms } => {
                if !(ms >= 0.0 && ms.is_finite()) {
                    return Err(err("latency.ms", "must be non-negative and finite"));
                }
            }
            LatencyModel::Uniform { min_ms, max_ms } => {
                if !(min_ms >= 0.0 && max_ms.is_finite() && min_ms <= max_ms) {
                    return Err(err("latency", "need 0 <= min_ms <= max_ms, finite"));
                }
            }
        }
        let w = &self.workload;
        // Mining-only runs may go without users; a payment workload can't.
        if w.users == 0 && w.tx_rate > 0.0 {
            return Err(err("workload.users", "need at least one user to send payments"));
        }
        if w.addresses_per_user == 0 && w.users > 0 {
            return Err(err("workload.addresses_per_user", "need at least one address"));
        }
        if !(w.tx_rate >= 0.0 && w.tx_rate.is_finite()) {
            return Err(err("workload.tx_rate", "must be non-negative and finite"));
        }
        match w.value {
            ValueModel::Fixed { amount } => {
                if amount.is_zero() {
                    return Err(err("workload.value.amount", "payments must be positive"));
                }
            }
            ValueModel::Uniform { min, max } => {
                if min.is_zero() || min > max {
                    return Err(err("workload.value", "need 0 < min <= max"));
                }
            }
        }
        if let Some(stop) = w.tx_stop_time {
            if !(stop >= 0.0 && stop.is_finite()) {
                return Err(err("workload.tx_stop_time", "must be non-negative and finite"));
            }
        }
        if self.retarget.window > 0 && self.retarget.desired_interval_ms == 0 {
            return Err(err("retarget.desired_interval_ms", "must be positive when retargeting"));
        }
        if self.reward.halving_interval == 0 {
            return Err(err("reward.halving_interval", "must be positive"));
        }
        let mut last_t = f64::NEG_INFINITY;
        for (i, &(t, scale)) in self.hashrate_schedule.iter().enumerate() {
            if !(t >= 0.0 && t.is_finite() && t >= last_t) {
                return Err(err("hashrate_schedule", &format!("step {i} times must ascend")));
            }
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(err("hashrate_schedule", &format!("step {i} scale must be positive")));
            }
            last_t = t;
        }
        Ok(())
    }

    /// Total node count including the spy, which sits at index `nodes`.
    pub fn total_nodes(&self) -> usize {
        self.nodes + usize::from(self.spy)
    }

    pub fn spy_node(&self) -> Option<usize> {
        self.spy.then_some(self.nodes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates() {
        assert_eq!(SimConfig::default().validate(), Ok(()));
    }

    #[test]
    fn validation_names_the_offending_field() {
        let mut c = SimConfig::default();
        c.nodes = 0;
        assert_eq!(c.validate().unwrap_err().field, "nodes");

        let mut c = SimConfig::default();
        c.miners = vec![MinerSpec { node: 9, share: 1.0 }];
        assert_eq!(c.validate().unwrap_err().field, "miners");

        let mut c = SimConfig::default();
        c.miners = vec![MinerSpec { node: 0, share: 0.4 }, MinerSpec { node: 0, share: 0.4 }];
        assert_eq!(c.validate().unwrap_err().field, "miners");

        // Overcommitted hashrate: 0.7 + 0.5 = 1.2 of the network.
        let mut c = SimConfig::default();
        c.nodes = 2;
        c.miners = vec![MinerSpec { node: 0, share: 0.7 }, MinerSpec { node: 1, share: 0.5 }];
        let err = c.validate().unwrap_err();
        assert_eq!(err.field, "miners");
        assert!(err.message.contains("sum"), "{}", err.message);

        // Exact thirds must pass despite float rounding.
        let mut c = SimConfig::default();
        c.nodes = 3;
        c.miners = (0..3).map(|node| MinerSpec { node, share: 1.0 / 3.0 }).collect();
        assert_eq!(c.validate(), Ok(()));

        let mut c = SimConfig::default();
        c.topology = Topology::Random { edge_prob: 1.5 };
        assert_eq!(c.validate().unwrap_err().field, "topology.edge_prob");

        let mut c = SimConfig::default();
        c.latency = LatencyModel::Uniform { min_ms: 9.0, max_ms: 1.0 };
        assert_eq!(c.validate().unwrap_err().field, "latency");

        let mut c = SimConfig::default();
        c.workload.value = ValueModel::Uniform { min: Amount(5), max: Amount(1) };
        assert_eq!(c.validate().unwrap_err().field, "workload.value");

        let mut c = SimConfig::default();
        c.hashrate_schedule = vec![(10.0, 2.0), (5.0, 1.0)];
        assert_eq!(c.validate().unwrap_err().field, "hashrate_schedule");

        let mut c = SimConfig::default();
        c.duration = f64::NAN;
        assert_eq!(c.validate().unwrap_err().field, "duration");
    }

    #[test]
    fn spy_occupies_the_extra_slot() {
        let mut c = SimConfig::default();
        assert_eq!(c.spy_node(), None);
        c.spy = true;
        assert_eq!(c.spy_node(), Some(4));
        assert_eq!(c.total_nodes(), 5);
    }
}
