//! Scenario files: one declarative document that names everything a run
//! needs. TOML for humans, JSON for machine round-trips; both reject keys
//! they do not recognize, so typos fail loudly instead of silently running
//! a different experiment.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversary::{AttackKind, AttackSpec};
use crate::chain::{RetargetParams, RewardSchedule, Target};
use crate::ledger::SigScheme;
use crate::netsim::{LatencyModel, MinerSpec, SimConfig, Topology, WorkloadConfig};

pub const SCENARIO_SCHEMA: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: unsupported extension, expected .toml or .json")]
    Extension { path: String },
    #[error("schema_version {found} unsupported (this build reads {SCENARIO_SCHEMA})")]
    Schema { found: u32 },
}

fn default_true() -> bool {
    true
}

fn default_share() -> f64 {
    0.1
}

fn default_confirmations() -> u64 {
    6
}

fn default_trials() -> u64 {
    1000
}

fn default_horizon() -> u64 {
    200
}

/// Attack settings as written in a scenario. Deliberately seedless: the
/// scenario's one seed drives everything, including attack trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackBlock {
    pub kind: AttackKind,
    #[serde(default = "default_share")]
    pub attacker_share: f64,
    #[serde(default = "default_confirmations")]
    pub confirmations_required: u64,
    #[serde(default)]
    pub premine_lead: u64,
    #[serde(default)]
    pub fork_depth: u64,
    #[serde(default = "default_trials")]
    pub trial_count: u64,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
}

impl AttackBlock {
    pub fn to_spec(&self, seed: u64) -> AttackSpec {
        AttackSpec {
            kind: self.kind,
            attacker_share: self.attacker_share,
            confirmations_required: self.confirmations_required,
            premine_lead: self.premine_lead,
            fork_depth: self.fork_depth,
            trial_count: self.trial_count,
            horizon: self.horizon,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisBlock {
    /// Request the listening spy so relay-timing inference has data to
    /// work with; forces the simulation's spy on.
    #[serde(default)]
    pub spy: bool,
    #[serde(default = "default_true")]
    pub clustering: bool,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        AnalysisBlock { spy: false, clustering: true }
    }
}

/// The file format. Simulation fields sit at the top level and default to
/// the stock configuration; `attack` and `analysis` are optional blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub seed: u64,
    pub nodes: usize,
    pub topology: Topology,
    pub latency: LatencyModel,
    pub miners: Vec<MinerSpec>,
    pub mean_block_interval: f64,
    pub duration: f64,
    pub initial_target: Target,
    pub reward: RewardSchedule,
    pub retarget: RetargetParams,
    pub max_block_txs: usize,
    pub sig_scheme: SigScheme,
    pub workload: WorkloadConfig,
    pub spy: bool,
    pub hashrate_schedule: Vec<(f64, f64)>,
    pub attack: Option<AttackBlock>,
    pub analysis: Option<AnalysisBlock>,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        ScenarioFile::from_sim(SimConfig::default())
    }
}

impl ScenarioFile {
    pub fn from_sim(sim: SimConfig) -> ScenarioFile {
        let SimConfig {
            seed,
            nodes,
            topology,
            latency,
            miners,
            mean_block_interval,
            duration,
            initial_target,
            reward,
            retarget,
            max_block_txs,
            sig_scheme,
            workload,
            spy,
            hashrate_schedule,
        } = sim;
        ScenarioFile {
            schema_version: SCENARIO_SCHEMA,
            seed,
            nodes,
            topology,
            latency,
            miners,
            mean_block_interval,
            duration,
            initial_target,
            reward,
            retarget,
            max_block_txs,
            sig_scheme,
            workload,
            spy,
            hashrate_schedule,
            attack: None,
            analysis: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ScenarioFile, ScenarioError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let name = path.display().to_string();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let scenario: ScenarioFile = match ext {
            "toml" => toml::from_str(&text)
                .map_err(|e| ScenarioError::Parse { path: name.clone(), message: e.to_string() })?,
            "json" => serde_json::from_str(&text)
                .map_err(|e| ScenarioError::Parse { path: name.clone(), message: e.to_string() })?,
            _ => return Err(ScenarioError::Extension { path: name }),
        };
        if scenario.schema_version != SCENARIO_SCHEMA {
            return Err(ScenarioError::Schema { found: scenario.schema_version });
        }
        Ok(scenario)
    }

    /// The simulation this scenario describes. An analysis block that asks
    /// for the spy turns it on here, so the trace carries what the
    /// analysis needs.
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            seed: self.seed,
            nodes: self.nodes,
            topology: self.topology,
            latency: self.latency,
            miners: self.miners.clone(),
            mean_block_interval: self.mean_block_interval,
            duration: self.duration,
            initial_target: self.initial_target,
            reward: self.reward,
            retarget: self.retarget,
            max_block_txs: self.max_block_txs,
            sig_scheme: self.sig_scheme,
            workload: self.workload.clone(),
            spy: self.spy || self.analysis.map(|a| a.spy).unwrap_or(false),
            hashrate_schedule: self.hashrate_schedule.clone(),
        }
    }

    /// Attack trials inherit the scenario seed.
    pub fn attack_spec(&self) -> Option<AttackSpec> {
        self.attack.as_ref().map(|a| a.to_spec(self.seed))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn minimal_toml_fills_in_stock_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(&dir, "min.toml", "seed = 7\nnodes = 2\n");
        let sc = ScenarioFile::load(&path).unwrap();
        let cfg = sc.sim_config();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.nodes, 2);
        let stock = SimConfig::default();
        assert_eq!(cfg.mean_block_interval, stock.mean_block_interval);
        assert_eq!(cfg.initial_target, stock.initial_target);
        assert_eq!(cfg.workload, stock.workload);
        assert!(sc.attack.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(&dir, "typo.toml", "seed = 7\nnodse = 2\n");
        let err = ScenarioFile::load(&path).unwrap_err();
        match err {
            ScenarioError::Parse { message, .. } => {
                assert!(message.contains("nodse"), "message should name the key: {message}")
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn attack_block_inherits_the_scenario_seed() {
        let dir = tempfile::tempdir().unwrap();
        let text = "seed = 42\n\n[attack]\nkind = \"double_spend\"\nattacker_share = 0.3\n";
        let path = write_temp(&dir, "attack.toml", text);
        let sc = ScenarioFile::load(&path).unwrap();
        let spec = sc.attack_spec().unwrap();
        assert_eq!(spec.seed, 42);
        assert_eq!(spec.attacker_share, 0.3);
        assert_eq!(spec.confirmations_required, 6);
        assert_eq!(spec.horizon, 200);
        spec.validate().unwrap();
    }

    #[test]
    fn analysis_spy_request_turns_the_spy_on() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(&dir, "spy.toml", "[analysis]\nspy = true\n");
        let sc = ScenarioFile::load(&path).unwrap();
        assert!(!sc.spy);
        assert!(sc.sim_config().spy);
    }

    #[test]
    fn resolved_json_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut sc = ScenarioFile::default();
        sc.seed = 99;
        sc.attack = Some(AttackBlock {
            kind: AttackKind::MajorityOvertake,
            attacker_share: 0.6,
            confirmations_required: 1,
            premine_lead: 0,
            fork_depth: 2,
            trial_count: 50,
            horizon: 30,
        });
        let path = write_temp(&dir, "resolved.json", &sc.to_json_pretty());
        let back = ScenarioFile::load(&path).unwrap();
        assert_eq!(back, sc);
    }

    #[test]
    fn future_schema_versions_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(&dir, "v9.toml", "schema_version = 9\n");
        assert!(matches!(ScenarioFile::load(&path), Err(ScenarioError::Schema { found: 9 })));
    }

    #[test]
    fn markdown_files_are_not_scenarios() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(&dir, "readme.md", "# hello\n");
        assert!(matches!(ScenarioFile::load(&path), Err(ScenarioError::Extension { .. })));
    }
}
