//! Key pairs, addresses, signed transfers — and the exact reasons the
//! validator gives for refusing bad ones.

use blocksim::ledger::{
    pay, validate_transaction, Amount, OutPoint, SigScheme, Transaction, UtxoSet,
};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() {
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let alice = SigScheme::Ed25519.generate_keypair(&mut rng);
    let bob = SigScheme::Ed25519.generate_keypair(&mut rng);
    println!("alice is {} ({})", alice.address().short(), alice.scheme().name());
    println!("bob   is {} ({})", bob.address().short(), bob.scheme().name());

    // Coins enter the world through a coinbase: no inputs, pure creation.
    let coinbase = Transaction::coinbase(1, vec![pay(alice.address(), Amount::coins(50))]).unwrap();
    let mut ledger = UtxoSet::new();
    ledger.apply(&coinbase);
    println!("\ncoinbase {} pays alice 50 coins", coinbase.id().short());
    println!("ledger now holds {} output(s), {} base units total", ledger.len(), ledger.total().0);

    // Alice signs over 30 coins to Bob and routes the rest back to
    // herself, leaving 0.001 coins unclaimed as the miner's fee.
    let funds = OutPoint { tx: coinbase.id(), index: 0 };
    let payment = Transaction::transfer_signed(
        &[(funds, &alice)],
        vec![
            pay(bob.address(), Amount::coins(30)),
            pay(alice.address(), Amount(Amount::coins(20).0 - 100_000)),
        ],
    )
    .unwrap();
    let fee = validate_transaction(&payment, &ledger).expect("a well-formed payment validates");
    println!("\npayment {} validates; implied fee {} base units", payment.id().short(), fee.0);
    ledger.apply(&payment);

    // Three ways to get refused, each with its own error.
    println!("\nwhat the validator refuses:");

    let respend =
        Transaction::transfer_signed(&[(funds, &alice)], vec![pay(bob.address(), Amount::coins(50))])
            .unwrap();
    println!(
        "  spending the consumed coinbase twice  -> {}",
        validate_transaction(&respend, &ledger).unwrap_err()
    );

    let alices_change = OutPoint { tx: payment.id(), index: 1 };
    let theft = Transaction::transfer_signed(
        &[(alices_change, &bob)],
        vec![pay(bob.address(), Amount::coins(19))],
    )
    .unwrap();
    println!(
        "  bob signing for alice's change        -> {}",
        validate_transaction(&theft, &ledger).unwrap_err()
    );

    let inflation = Transaction::transfer_signed(
        &[(alices_change, &alice)],
        vec![pay(bob.address(), Amount::coins(1000))],
    )
    .unwrap();
    println!(
        "  paying out more than comes in         -> {}",
        validate_transaction(&inflation, &ledger).unwrap_err()
    );

    let unsigned = Transaction::transfer(
        vec![(alices_change, alice.public().clone())],
        vec![pay(bob.address(), Amount::coins(1))],
    )
    .unwrap();
    println!(
        "  skipping the signature                -> {}",
        validate_transaction(&unsigned, &ledger).unwrap_err()
    );
}
