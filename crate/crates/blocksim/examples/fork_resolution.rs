//! Two branches fight over the tip. The heavier one wins, the loser's
//! blocks go stale, and transactions stranded on the losing branch come
//! back for re-inclusion.

use std::sync::Arc;

use blocksim::chain::{
    mine_block, BlockId, BlockTemplate, ChainParams, ChainStore, ConnectOutcome, RetargetParams,
    RewardSchedule, Target,
};
use blocksim::ledger::{pay, Amount, OutPoint, SigScheme, Transaction};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() {
    let params = ChainParams {
        initial_target: Target::MAX,
        reward: RewardSchedule { initial: Amount::coins(50), halving_interval: u64::MAX },
        retarget: RetargetParams::OFF,
        max_block_txs: 100,
        orphan_limit: 32,
    };
    let mut store = ChainStore::new(params);
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let alice = SigScheme::Simulated.generate_keypair(&mut rng);
    let bob = SigScheme::Simulated.generate_keypair(&mut rng);

    let mine = |store: &mut ChainStore,
                    parent: BlockId,
                    height: u64,
                    stamp: u64,
                    txs: Vec<Arc<Transaction>>,
                    rng: &mut ChaCha12Rng| {
        let reward = store.params().reward.reward(height);
        let coinbase = Transaction::coinbase(height, vec![pay(alice.address(), reward)]).unwrap();
        let template =
            BlockTemplate { parent, height, target: Target::MAX, timestamp_ms: stamp, coinbase, txs };
        let block = mine_block(template, u64::MAX, rng).unwrap().block;
        let outcome = store.connect_block(block.clone()).unwrap();
        (block, outcome)
    };

    // Height 1 funds alice.
    let genesis = store.best_tip();
    let (b1, o) = mine(&mut store, genesis, 1, 1000, vec![], &mut rng);
    println!("block 1 {:?}", o);
    let funds = OutPoint { tx: b1.coinbase().id(), index: 0 };

    // Branch X at height 2 carries alice's payment to bob.
    let payment = Arc::new(
        Transaction::transfer_signed(&[(funds, &alice)], vec![pay(bob.address(), Amount::coins(50))])
            .unwrap(),
    );
    let (x2, o) = mine(&mut store, b1.id(), 2, 2000, vec![payment.clone()], &mut rng);
    println!("block X2 (contains payment {}) {:?}", payment.id().short(), o);
    println!("  payment confirmations: {:?}", store.confirmations(&payment.id()));

    // A competitor mines its own height 2 without the payment: a fork
    // with equal work, so the incumbent keeps the tip.
    let (y2, o) = mine(&mut store, b1.id(), 2, 2500, vec![], &mut rng);
    println!("block Y2 {:?}", o);
    println!("  best tip is still X2: {}", store.best_tip() == x2.id());

    // The competitor finds height 3 first. Its branch is now heavier, so
    // the store rolls X2 back and the stranded payment returns.
    let (y3, o) = mine(&mut store, y2.id(), 3, 3000, vec![], &mut rng);
    match &o {
        ConnectOutcome::Reorganized { depth, returned_txs } => {
            println!("block Y3 reorganized the chain: rolled back {depth} block(s)");
            for tx in returned_txs {
                println!("  returned to circulation: {}", tx.id().short());
            }
        }
        other => println!("block Y3 {:?}", other),
    }
    println!("  X2 on best chain: {}", store.on_best_chain(&x2.id()));
    println!("  payment confirmations now: {:?}", store.confirmations(&payment.id()));

    // An honest miner picks the returned payment up again; one block
    // later it is as confirmed as it ever was.
    let (_, o) = mine(&mut store, y3.id(), 4, 4000, vec![payment.clone()], &mut rng);
    println!("block Y4 re-includes the payment: {:?}", o);
    println!("  payment confirmations after re-mining: {:?}", store.confirmations(&payment.id()));
    println!(
        "\nfinal best chain: {} blocks, tip height {}",
        store.best_chain().len() - 1,
        store.best_height()
    );
}
