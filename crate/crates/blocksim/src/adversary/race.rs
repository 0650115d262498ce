//! Double-spend and overtake races, run as Monte Carlo trials over real
//! chains.
//!
//! Each trial plays the block race as a sequence of Bernoulli draws: with
//! probability `attacker_share` the next block is the attacker's,
//! otherwise the honest network's. Honest blocks extend a real merchant
//! `ChainStore`; attacker blocks build a real private branch. When the
//! attacker publishes, the branch is connected for real, so a "success"
//! is not a counter comparison but an actual reorganization in which the
//! merchant's accepted payment drops out of the best chain and the
//! conflicting spend takes its place.
//!
//! Blocks race at the easiest possible target, so proof of work costs one
//! hash per block and a hundred thousand trials stay cheap. The race
//! structure is unaffected: difficulty is already folded into the single
//! parameter `attacker_share`.

use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{
    mine_block, Block, BlockId, BlockTemplate, ChainParams, ChainStore, ConnectOutcome,
    RetargetParams, RewardSchedule, Target,
};
use crate::ledger::{pay, sha256, Amount, KeyPair, OutPoint, SigScheme, Transaction};
use crate::netsim::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    /// Pay a merchant, privately mine a conflicting spend, publish after
    /// the merchant has accepted.
    DoubleSpend,
    /// Pure branch race from a configurable deficit; no payment involved.
    MajorityOvertake,
}

/// Parameters of one attack experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Attacker's slice of total hashrate, in [0, 1].
    pub attacker_share: f64,
    /// Confirmations the merchant waits for before accepting.
    pub confirmations_required: u64,
    /// Blocks the attacker mines privately before the race starts.
    #[serde(default)]
    pub premine_lead: u64,
    /// Overtake only: how many blocks ahead the honest chain starts.
    #[serde(default)]
    pub fork_depth: u64,
    pub trial_count: u64,
    /// A trial aborts as a failure once the attacker falls this many
    /// blocks behind. Keeps hopeless races finite.
    pub horizon: u64,
    pub seed: u64,
}

impl AttackSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = ConfigError::new;
        if !(0.0..=1.0).contains(&self.attacker_share) {
            return Err(err("attack.attacker_share", "must lie in [0, 1]"));
        }
        if self.kind == AttackKind::MajorityOvertake && self.attacker_share == 0.0 {
            return Err(err("attack.attacker_share", "overtake needs a mining attacker"));
        }
        if self.confirmations_required == 0 {
            return Err(err("attack.confirmations_required", "merchant waits for at least 1"));
        }
        if self.trial_count == 0 {
            return Err(err("attack.trial_count", "need at least one trial"));
        }
        if self.horizon == 0 {
            return Err(err("attack.horizon", "must be positive"));
        }
        if self.horizon <= self.fork_depth {
            return Err(err("attack.horizon", "must exceed fork_depth or trials abort at once"));
        }
        Ok(())
    }

    pub fn run(&self) -> AttackOutcome {
        run_attack(self, 1)
    }
}

/// What happened in one trial.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrialRecord {
    pub success: bool,
    /// Blocks found by either side during the race (premine and any
    /// head-start blocks excluded).
    pub steps: u64,
    pub attacker_blocks: u64,
    pub honest_blocks: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub spec: AttackSpec,
    pub success_count: u64,
    pub trial_count: u64,
    pub trials: Vec<TrialRecord>,
}

impl AttackOutcome {
    pub fn success_rate(&self) -> f64 {
        self.success_count as f64 / self.trial_count as f64
    }

    /// Average race length of the successful trials, if any succeeded.
    pub fn mean_blocks_to_success(&self) -> Option<f64> {
        let wins: Vec<u64> =
            self.trials.iter().filter(|t| t.success).map(|t| t.steps).collect();
        if wins.is_empty() {
            return None;
        }
        Some(wins.iter().sum::<u64>() as f64 / wins.len() as f64)
    }

    /// 95% Wilson score interval for the success rate.
    pub fn confidence_interval(&self) -> (f64, f64) {
        wilson_ci(self.success_count, self.trial_count)
    }
}

/// 95% Wilson score interval for a binomial proportion. Behaves sanely at
/// 0 and 1, unlike the normal approximation.
pub fn wilson_ci(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * ((p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()) / denom;
    // The bounds are exactly 0 and 1 at the extremes; don't let float
    // rounding report otherwise.
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

pub fn run_double_spend(spec: &AttackSpec) -> AttackOutcome {
    assert_eq!(spec.kind, AttackKind::DoubleSpend);
    run_attack(spec, 1)
}

pub fn run_majority_overtake(spec: &AttackSpec) -> AttackOutcome {
    assert_eq!(spec.kind, AttackKind::MajorityOvertake);
    run_attack(spec, 1)
}

/// Runs all trials, optionally fanned out over `jobs` threads. Trials are
/// independent (each derives its own seed from the master seed and its
/// index), so the outcome is identical however they are scheduled.
pub fn run_attack(spec: &AttackSpec, jobs: usize) -> AttackOutcome {
    spec.validate().expect("attack spec validated before running");
    let n = spec.trial_count;
    let trials: Vec<TrialRecord> = if jobs <= 1 || n < 2 {
        (0..n).map(|i| run_trial(spec, i)).collect()
    } else {
        let jobs = jobs.min(n as usize);
        let mut slots: Vec<Option<TrialRecord>> = vec![None; n as usize];
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for j in 0..jobs {
                let spec = &*spec;
                handles.push(scope.spawn(move || {
                    let mut out = Vec::new();
                    let mut i = j as u64;
                    while i < n {
                        out.push((i, run_trial(spec, i)));
                        i += jobs as u64;
                    }
                    out
                }));
            }
            for h in handles {
                for (i, rec) in h.join().expect("trial worker panicked") {
                    slots[i as usize] = Some(rec);
                }
            }
        });
        slots.into_iter().map(|s| s.expect("every index filled")).collect()
    };
    let success_count = trials.iter().filter(|t| t.success).count() as u64;
    AttackOutcome { spec: spec.clone(), success_count, trial_count: n, trials }
}

/// Chain parameters for race trials: easiest target, no retargeting.
fn race_params() -> ChainParams {
    ChainParams {
        initial_target: Target::MAX,
        reward: RewardSchedule { initial: Amount::coins(50), halving_interval: u64::MAX },
        retarget: RetargetParams::OFF,
        max_block_txs: 4,
        orphan_limit: 8,
    }
}

fn trial_seed(master: u64, index: u64) -> [u8; 32] {
    let mut buf = b"blocksim/attack/trial/v1".to_vec();
    buf.extend_from_slice(&master.to_le_bytes());
    buf.extend_from_slice(&index.to_le_bytes());
    sha256(&buf)
}

/// One block on `parent`, mined for real (a single hash at this target).
fn mine_on<R: RngCore>(
    params: &ChainParams,
    parent: BlockId,
    height: u64,
    claim_to: Option<&KeyPair>,
    txs: Vec<Arc<Transaction>>,
    rng: &mut R,
) -> Arc<Block> {
    let outputs = match claim_to {
        Some(key) => vec![pay(key.public().address(), params.reward.reward(height))],
        None => Vec::new(), // claims nothing; keeps trial state minimal
    };
    let coinbase = Transaction::coinbase(height, outputs).expect("well-formed coinbase");
    let template = BlockTemplate {
        parent,
        height,
        target: params.initial_target,
        timestamp_ms: height * 1000,
        coinbase,
        txs,
    };
    mine_block(template, u64::MAX, rng).expect("every nonce beats the easiest target").block
}

struct Trial {
    params: ChainParams,
    merchant: ChainStore,
    rng: ChaCha12Rng,
    /// Private branch, oldest first, not yet shown to the merchant.
    private: Vec<Arc<Block>>,
    attacker_tip: BlockId,
    attacker_height: u64,
    fork_height: u64,
}

impl Trial {
    fn extend_honest(&mut self, txs: Vec<Arc<Transaction>>) {
        let parent = self.merchant.best_tip();
        let height = self.merchant.best_height() + 1;
        let block = mine_on(&self.params, parent, height, None, txs, &mut self.rng);
        let outcome = self.merchant.connect_block(block);
        assert_eq!(outcome, Ok(ConnectOutcome::ExtendedBest));
    }

    fn extend_private(&mut self, txs: Vec<Arc<Transaction>>) {
        let block = mine_on(
            &self.params,
            self.attacker_tip,
            self.attacker_height + 1,
            None,
            txs,
            &mut self.rng,
        );
        self.attacker_tip = block.id();
        self.attacker_height += 1;
        self.private.push(block);
    }

    /// Connects the private branch to the merchant's store and checks it
    /// actually displaced the honest chain. The branch connects block by
    /// block: side-chain entries until the attacker's cumulative work
    /// pulls ahead, one reorganization at that moment, plain extensions
    /// after it. With nothing honest above the fork there is no
    /// competitor and the whole branch simply extends.
    fn publish(&mut self) {
        let honest_above_fork = self.merchant.best_height() - self.fork_height;
        let mut reorg_depth = None;
        for block in self.private.drain(..) {
            let outcome =
                self.merchant.connect_block(block).expect("private branch is valid");
            if let ConnectOutcome::Reorganized { depth, .. } = outcome {
                assert!(reorg_depth.is_none(), "the takeover happens once");
                reorg_depth = Some(depth);
            }
        }
        if honest_above_fork > 0 {
            assert_eq!(reorg_depth, Some(honest_above_fork), "whole honest branch unwound");
        } else {
            assert_eq!(reorg_depth, None, "nothing to unwind without a competitor");
        }
        assert_eq!(self.merchant.best_tip(), self.attacker_tip);
    }
}

fn run_trial(spec: &AttackSpec, index: u64) -> TrialRecord {
    let params = race_params();
    let mut rng = ChaCha12Rng::from_seed(trial_seed(spec.seed, index));
    let mut merchant = ChainStore::new(params.clone());

    let attacker = SigScheme::Simulated.generate_keypair(&mut rng);
    let attacker_change = SigScheme::Simulated.generate_keypair(&mut rng);
    let merchant_key = SigScheme::Simulated.generate_keypair(&mut rng);

    // One funded output for the attacker to spend both ways.
    let funding = mine_on(&params, merchant.genesis_id(), 1, Some(&attacker), vec![], &mut rng);
    let fund_out = OutPoint { tx: funding.coinbase().id(), index: 0 };
    let subsidy = params.reward.reward(1);
    merchant.connect_block(funding).expect("funding block extends genesis");

    let payment = Arc::new(
        Transaction::transfer_signed(
            &[(fund_out, &attacker)],
            vec![pay(merchant_key.public().address(), subsidy)],
        )
        .expect("payment is well formed"),
    );
    let double = Arc::new(
        Transaction::transfer_signed(
            &[(fund_out, &attacker)],
            vec![pay(attacker_change.public().address(), subsidy)],
        )
        .expect("conflicting spend is well formed"),
    );
    let payment_id = payment.id();
    let double_id = double.id();

    let fork_height = merchant.best_height();
    let fork_point = merchant.best_tip();
    let mut trial = Trial {
        params,
        merchant,
        rng,
        private: Vec::new(),
        attacker_tip: fork_point,
        attacker_height: fork_height,
        fork_height,
    };

    // Overtake mode: the honest chain gets its head start above the fork
    // point before the race clock starts.
    let overtake = spec.kind == AttackKind::MajorityOvertake;
    let mut h: u64 = if overtake {
        for _ in 0..spec.fork_depth {
            trial.extend_honest(vec![]);
        }
        spec.fork_depth
    } else {
        0
    };

    // The conflicting spend rides in the first private block; premined
    // blocks exist before any honest progress.
    let mut a: u64 = 0;
    for _ in 0..spec.premine_lead {
        let txs = if a == 0 { vec![double.clone()] } else { vec![] };
        trial.extend_private(txs);
        a += 1;
    }

    // The race itself: same walk as the standalone oracle, with real
    // blocks behind the counters.
    let mut accepted = overtake; // overtake publishes on any strict lead
    let mut steps = 0u64;
    let (success, steps) = loop {
        if !accepted {
            let confs = trial.merchant.confirmations(&payment_id).unwrap_or(0);
            debug_assert_eq!(confs, h, "payment rides the first honest block");
            if confs >= spec.confirmations_required {
                accepted = true;
            }
        }
        if accepted && a > h {
            trial.publish();
            if spec.kind == AttackKind::DoubleSpend {
                assert_eq!(
                    trial.merchant.confirmations(&payment_id),
                    None,
                    "accepted payment fell out of the best chain"
                );
                assert!(
                    trial.merchant.confirmations(&double_id).is_some(),
                    "conflicting spend is now confirmed"
                );
            }
            break (true, steps);
        }
        if h.saturating_sub(a) >= spec.horizon {
            break (false, steps);
        }
        if trial.rng.gen_bool(spec.attacker_share) {
            let txs = if a == 0 { vec![double.clone()] } else { vec![] };
            trial.extend_private(txs);
            a += 1;
        } else {
            let txs = if !overtake && h == 0 { vec![payment.clone()] } else { vec![] };
            trial.extend_honest(txs);
            h += 1;
        }
        steps += 1;
    };

    TrialRecord { success, steps, attacker_blocks: a, honest_blocks: h }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds_spec(q: f64, z: u64, trials: u64) -> AttackSpec {
        AttackSpec {
            kind: AttackKind::DoubleSpend,
            attacker_share: q,
            confirmations_required: z,
            premine_lead: 0,
            fork_depth: 0,
            trial_count: trials,
            horizon: 40,
            seed: 77,
        }
    }

    #[test]
    fn no_hashrate_never_succeeds() {
        let out = run_double_spend(&ds_spec(0.0, 2, 200));
        assert_eq!(out.success_count, 0);
        assert_eq!(out.success_rate(), 0.0);
    }

    #[test]
    fn majority_attacker_nearly_always_wins() {
        let mut spec = ds_spec(0.7, 2, 200);
        spec.horizon = 100;
        let out = run_double_spend(&spec);
        assert!(out.success_rate() > 0.95, "got {}", out.success_rate());
        assert!(out.mean_blocks_to_success().unwrap() >= 3.0);
    }

    #[test]
    fn deeper_confirmation_helps_the_merchant() {
        let shallow = run_double_spend(&ds_spec(0.3, 1, 400)).success_rate();
        let deep = run_double_spend(&ds_spec(0.3, 6, 400)).success_rate();
        assert!(
            shallow > deep,
            "z=1 ({shallow}) should fall to z=6 ({deep})"
        );
    }

    #[test]
    fn overtake_from_premined_lead_is_immediate() {
        let spec = AttackSpec {
            kind: AttackKind::MajorityOvertake,
            attacker_share: 0.4,
            confirmations_required: 1,
            premine_lead: 5,
            fork_depth: 0,
            trial_count: 50,
            horizon: 5,
            seed: 9,
        };
        let out = run_majority_overtake(&spec);
        assert_eq!(out.success_count, 50);
        for t in &out.trials {
            assert_eq!(t.steps, 0, "already ahead, no race needed");
        }
    }

    #[test]
    fn trial_results_do_not_depend_on_thread_count() {
        let spec = ds_spec(0.35, 2, 64);
        let seq = run_attack(&spec, 1);
        let par = run_attack(&spec, 4);
        assert_eq!(seq.success_count, par.success_count);
        for (s, p) in seq.trials.iter().zip(&par.trials) {
            assert_eq!(s.steps, p.steps);
            assert_eq!(s.success, p.success);
        }
    }

    #[test]
    fn wilson_interval_brackets_the_point_estimate() {
        let (lo, hi) = wilson_ci(30, 100);
        assert!(lo < 0.3 && 0.3 < hi);
        assert!(lo > 0.2 && hi < 0.41);
        assert_eq!(wilson_ci(0, 50).0, 0.0);
        assert_eq!(wilson_ci(50, 50).1, 1.0);
    }

    #[test]
    fn spec_validation_names_fields() {
        let mut spec = ds_spec(1.4, 1, 1);
        assert_eq!(spec.validate().unwrap_err().field, "attack.attacker_share");
        spec.attacker_share = 0.4;
        spec.confirmations_required = 0;
        assert_eq!(spec.validate().unwrap_err().field, "attack.confirmations_required");
    }
}
