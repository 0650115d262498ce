//! Zero-confirmation acceptance through a whitelist of trusted senders —
//! and what that trust costs when a whitelisted sender turns on you.

use std::sync::Arc;

use blocksim::adversary::{accept_payment, GreenAddressPolicy, PaymentDecision};
use blocksim::chain::{
    mine_block, BlockTemplate, ChainParams, ChainStore, RetargetParams, RewardSchedule, Target,
};
use blocksim::ledger::{pay, validate_transaction, Amount, OutPoint, SigScheme, Transaction};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn decision(d: PaymentDecision) -> &'static str {
    match d {
        PaymentDecision::Accept => "ACCEPT now",
        PaymentDecision::Wait => "WAIT for confirmations",
    }
}

fn main() {
    let mut rng = ChaCha12Rng::seed_from_u64(12);
    let params = ChainParams {
        initial_target: Target::MAX,
        reward: RewardSchedule { initial: Amount::coins(50), halving_interval: u64::MAX },
        retarget: RetargetParams::OFF,
        max_block_txs: 16,
        orphan_limit: 8,
    };
    let mut store = ChainStore::new(params);
    let carol = SigScheme::Simulated.generate_keypair(&mut rng); // honest regular
    let mallory = SigScheme::Simulated.generate_keypair(&mut rng); // trusted, dishonest
    let merchant = SigScheme::Simulated.generate_keypair(&mut rng);

    let mine = |store: &mut ChainStore, txs: Vec<Arc<Transaction>>, rng: &mut ChaCha12Rng, to: blocksim::ledger::Address| {
        let height = store.best_height() + 1;
        let reward = store.params().reward.reward(height);
        let coinbase = Transaction::coinbase(height, vec![pay(to, reward)]).unwrap();
        let template = BlockTemplate {
            parent: store.best_tip(),
            height,
            target: Target::MAX,
            timestamp_ms: height * 1000,
            coinbase,
            txs,
        };
        let block = mine_block(template, u64::MAX, rng).unwrap().block;
        let cb = block.coinbase().id();
        store.connect_block(block).unwrap();
        cb
    };

    // Fund both customers with one block each.
    let carol_funds = OutPoint { tx: mine(&mut store, vec![], &mut rng, carol.address()), index: 0 };
    let mallory_funds =
        OutPoint { tx: mine(&mut store, vec![], &mut rng, mallory.address()), index: 0 };

    // The merchant trusts both "green" regulars and demands 6
    // confirmations from everyone else.
    let green = GreenAddressPolicy::new([carol.address(), mallory.address()]);
    let z = 6;
    println!("merchant policy: whitelist of {} sender(s), otherwise z = {z}\n", 2);

    // Carol pays and is accepted instantly; her payment also confirms,
    // so the trust was safe in hindsight.
    let carol_pay = Transaction::transfer_signed(
        &[(carol_funds, &carol)],
        vec![pay(merchant.address(), Amount::coins(50))],
    )
    .unwrap();
    println!(
        "carol's payment at 0 confirmations: {}",
        decision(accept_payment(&green, &carol_pay, 0, z))
    );
    mine(&mut store, vec![Arc::new(carol_pay.clone())], &mut rng, carol.address());
    println!("  one block later it has {:?} confirmation(s) -- trust vindicated\n", store
        .confirmations(&carol_pay.id())
        .unwrap());

    // Mallory pays, ships the goods at zero confirmations, then confirms
    // a conflicting transfer back to herself instead.
    let mallory_pay = Transaction::transfer_signed(
        &[(mallory_funds, &mallory)],
        vec![pay(merchant.address(), Amount::coins(50))],
    )
    .unwrap();
    let d = accept_payment(&green, &mallory_pay, 0, z);
    println!("mallory's payment at 0 confirmations: {}", decision(d));
    println!("  (valid against today's tip: {:?})", validate_transaction(&mallory_pay, store.tip_utxo()).is_ok());

    let double = Transaction::transfer_signed(
        &[(mallory_funds, &mallory)],
        vec![pay(mallory.address(), Amount::coins(50))],
    )
    .unwrap();
    mine(&mut store, vec![Arc::new(double.clone())], &mut rng, mallory.address());
    println!("  mallory mines her conflicting spend instead:");
    println!("    merchant's payment confirmations: {:?}", store.confirmations(&mallory_pay.id()));
    println!("    conflicting spend confirmations:  {:?}", store.confirmations(&double.id()));
    println!(
        "    merchant's payment against the new tip -> {}",
        validate_transaction(&mallory_pay, store.tip_utxo()).unwrap_err()
    );

    // The same payment offered to a no-whitelist merchant was never
    // accepted, so nothing was lost there.
    let strict = GreenAddressPolicy::new([]);
    println!(
        "\na merchant with no whitelist had said: {}",
        decision(accept_payment(&strict, &mallory_pay, 0, z))
    );
    println!(
        "the whitelist turned a settlement question into a reputation \
         question; the chain never promised mallory's payment, the merchant's \
         trust did"
    );
}
