//! Zero-confirmation acceptance via trusted sender addresses.
//!
//! A merchant normally waits for `z` confirmations before treating a
//! payment as settled. A green address shortcuts that: payments whose
//! senders are all on an explicit whitelist are accepted immediately, on
//! the theory that the whitelisted party would not double-spend. The
//! policy trades the chain's guarantee for trust in the list; the
//! decision below depends only on the whitelist and the confirmation
//! count, never on anything else about chain state, which is exactly the
//! trust assumption being modeled.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ledger::{Address, Transaction};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreenAddressPolicy {
    /// Senders trusted at zero confirmations. Membership is explicit
    /// configuration; nothing is ever inferred onto the list.
    whitelist: BTreeSet<Address>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaymentDecision {
    Accept,
    Wait,
}

impl GreenAddressPolicy {
    pub fn new<I: IntoIterator<Item = Address>>(trusted: I) -> Self {
        GreenAddressPolicy { whitelist: trusted.into_iter().collect() }
    }

    pub fn trust(&mut self, addr: Address) {
        self.whitelist.insert(addr);
    }

    pub fn trusts(&self, addr: &Address) -> bool {
        self.whitelist.contains(addr)
    }

    pub fn is_empty(&self) -> bool {
        self.whitelist.is_empty()
    }

    /// Accept when the payment is buried `confirmations >= z` deep, or
    /// when every sender is whitelisted. A payment with no senders (a
    /// coinbase) never takes the fast path: trusting "nobody in
    /// particular" is not trust.
    pub fn decide(
        &self,
        senders: &[Address],
        confirmations: u64,
        z: u64,
    ) -> PaymentDecision {
        if confirmations >= z {
            return PaymentDecision::Accept;
        }
        if !senders.is_empty() && senders.iter().all(|a| self.trusts(a)) {
            return PaymentDecision::Accept;
        }
        PaymentDecision::Wait
    }
}

/// Convenience wrapper that pulls the sender addresses out of the
/// transaction's inputs.
pub fn accept_payment(
    policy: &GreenAddressPolicy,
    tx: &Transaction,
    confirmations: u64,
    z: u64,
) -> PaymentDecision {
    let senders = tx.input_addresses();
    policy.decide(&senders, confirmations, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{pay, Amount, KeyPair, OutPoint, SigScheme, TxId};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn key(n: u64) -> KeyPair {
        let mut rng = ChaCha12Rng::seed_from_u64(n);
        SigScheme::Simulated.generate_keypair(&mut rng)
    }

    fn payment_from(k: &KeyPair) -> Transaction {
        let op = OutPoint { tx: TxId([9; 32]), index: 0 };
        Transaction::transfer_signed(&[(op, k)], vec![pay(key(99).public().address(), Amount(10))])
            .unwrap()
    }

    #[test]
    fn whitelisted_sender_is_accepted_unconfirmed() {
        let k = key(1);
        let policy = GreenAddressPolicy::new([k.public().address()]);
        let tx = payment_from(&k);
        assert_eq!(accept_payment(&policy, &tx, 0, 6), PaymentDecision::Accept);
    }

    #[test]
    fn unknown_sender_waits_until_the_threshold() {
        let policy = GreenAddressPolicy::new([key(1).public().address()]);
        let tx = payment_from(&key(2));
        assert_eq!(accept_payment(&policy, &tx, 5, 6), PaymentDecision::Wait);
        assert_eq!(accept_payment(&policy, &tx, 6, 6), PaymentDecision::Accept);
        assert_eq!(accept_payment(&policy, &tx, 7, 6), PaymentDecision::Accept);
    }

    #[test]
    fn every_sender_must_be_trusted() {
        let (ka, kb) = (key(3), key(4));
        let policy = GreenAddressPolicy::new([ka.public().address()]);
        let op_a = OutPoint { tx: TxId([1; 32]), index: 0 };
        let op_b = OutPoint { tx: TxId([1; 32]), index: 1 };
        let tx = Transaction::transfer_signed(
            &[(op_a, &ka), (op_b, &kb)],
            vec![pay(key(99).public().address(), Amount(10))],
        )
        .unwrap();
        assert_eq!(accept_payment(&policy, &tx, 0, 6), PaymentDecision::Wait);
    }

    #[test]
    fn senderless_payments_never_take_the_fast_path() {
        let policy = GreenAddressPolicy::default();
        assert_eq!(policy.decide(&[], 0, 6), PaymentDecision::Wait);
        assert_eq!(policy.decide(&[], 6, 6), PaymentDecision::Accept);
    }
}
