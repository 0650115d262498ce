//! Proof-of-work mining against a live chain: nonce attempts, the reward
//! halving, and the difficulty retarget reacting to block timestamps.

use blocksim::chain::{
    mine_block, BlockTemplate, ChainParams, ChainStore, RetargetParams, RewardSchedule, Target,
};
use blocksim::ledger::{pay, sha256, Address, Amount, Transaction};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() {
    let params = ChainParams {
        // One hash in 512 beats this target, so mining is visible work
        // without melting a laptop.
        initial_target: Target::pow2(247),
        reward: RewardSchedule { initial: Amount::coins(50), halving_interval: 12 },
        // Aim for 600-second blocks, reconsidering every 10 blocks.
        retarget: RetargetParams { window: 10, desired_interval_ms: 600_000 },
        max_block_txs: 100,
        orphan_limit: 32,
    };
    let mut store = ChainStore::new(params);
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    let miner = Address(sha256(b"example miner"));

    println!("height  attempts  reward     target");
    let mut total_attempts = 0u64;
    for height in 1..=30u64 {
        let parent = store.best_tip();
        let target = store.expected_target(&parent).unwrap();
        let reward = store.params().reward.reward(height);
        let coinbase = Transaction::coinbase(height, vec![pay(miner, reward)]).unwrap();
        let template = BlockTemplate {
            parent,
            height,
            target,
            // Stamp blocks five minutes apart: twice as fast as desired,
            // so each retarget should roughly halve the target.
            timestamp_ms: height * 300_000,
            coinbase,
            txs: vec![],
        };
        let mined = mine_block(template, u64::MAX, &mut rng).expect("unbounded search succeeds");
        total_attempts += mined.attempts;
        store.connect_block(mined.block).unwrap();
        println!(
            "{height:>6}  {:>8}  {:<9}  {}...",
            mined.attempts,
            format!("{:.3}", reward.0 as f64 / 1e8),
            &target.to_hex()[..8],
        );
    }

    println!("\nbest height {} after {} total hash attempts", store.best_height(), total_attempts);
    println!("cumulative work {}", store.best_work());
    println!(
        "the reward halved at heights 12 and 24; the target shrank at every \
         10-block review because the timestamps arrived twice as fast as the \
         600 s goal"
    );
}
