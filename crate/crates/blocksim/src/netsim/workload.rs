//! Wallet universe and payment generation.
//!
//! Users are synthetic wallet owners. Each holds a fixed set of keypairs
//! and is homed at one node (user `u` lives at node `u % nodes`), which is
//! where their transactions enter the network. A user spends any output
//! addressed to any of their keys, so multi-input transactions routinely
//! join a user's addresses together on chain. That joining is the ground
//! truth that the clustering analysis tries to recover.

use std::collections::{HashMap, HashSet};

use rand::Rng;

use crate::ledger::{
    Address, Amount, KeyPair, OutPoint, SigScheme, Transaction, TxOutput, UtxoSet,
};
use crate::netsim::config::ValueModel;

/// One synthetic wallet owner.
pub struct UserWallet {
    /// Node where this user's transactions originate.
    pub home: usize,
    pub keys: Vec<KeyPair>,
}

impl UserWallet {
    pub fn address(&self, idx: usize) -> Address {
        self.keys[idx].public().address()
    }
}

/// Why a scheduled payment produced no transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    /// Payer controls no unlocked outputs in the current state.
    NoFunds,
    /// Payer's unlocked balance does not exceed the fee.
    BelowFee,
}

impl SkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::NoFunds => "no spendable outputs",
            SkipReason::BelowFee => "balance below fee",
        }
    }
}

/// A built payment, ready to inject at the payer's home node.
#[derive(Debug)]
pub struct Payment {
    pub tx: Transaction,
    pub payer: usize,
    pub payee: usize,
    pub amount: Amount,
    pub fee: Amount,
}

/// All user wallets plus the bookkeeping needed to generate payments.
pub struct Wallets {
    users: Vec<UserWallet>,
    owner_of: HashMap<Address, usize>,
    /// Outpoints already committed to an in-flight transaction. Never
    /// released: a generated transaction is final from the wallet's view
    /// even while the network still gossips it.
    locked: HashSet<OutPoint>,
}

impl Wallets {
    /// Draws `users * addrs_per_user` keypairs. Key draws happen in user
    /// order then address order, so one seed always yields one universe.
    pub fn generate<R: Rng>(
        scheme: SigScheme,
        users: usize,
        addrs_per_user: usize,
        nodes: usize,
        rng: &mut R,
    ) -> Self {
        let mut list = Vec::with_capacity(users);
        let mut owner_of = HashMap::new();
        for u in 0..users {
            let keys: Vec<KeyPair> =
                (0..addrs_per_user).map(|_| scheme.generate_keypair(rng)).collect();
            for k in &keys {
                owner_of.insert(k.public().address(), u);
            }
            list.push(UserWallet { home: u % nodes.max(1), keys });
        }
        Wallets { users: list, owner_of, locked: HashSet::new() }
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn user(&self, u: usize) -> &UserWallet {
        &self.users[u]
    }

    /// Which user controls `addr`, if any.
    pub fn owner(&self, addr: &Address) -> Option<usize> {
        self.owner_of.get(addr).copied()
    }

    /// Address credited when node `n` finds a block: the first user homed
    /// there, or a round-robin fallback when there are more nodes than
    /// users. Keeps block rewards inside the wallet universe so they feed
    /// later payments.
    pub fn payout_address(&self, n: usize) -> Address {
        let u = if n < self.users.len() { n } else { n % self.users.len() };
        self.users[u].address(0)
    }

    /// Builds a payment from `payer` against `state` (the payer's home
    /// node's view), or reports why none is possible. Inputs are chosen
    /// greedily, largest first, and everything beyond amount + fee comes
    /// back to a change address of the payer.
    pub fn build_payment<R: Rng>(
        &mut self,
        payer: usize,
        state: &UtxoSet,
        value_model: &ValueModel,
        fee: Amount,
        rng: &mut R,
    ) -> Result<Payment, SkipReason> {
        let mut candidates: Vec<(OutPoint, TxOutput)> = state
            .iter()
            .filter(|(op, out)| {
                !self.locked.contains(op) && self.owner(&out.address) == Some(payer)
            })
            .map(|(op, out)| (*op, out.clone()))
            .collect();
        if candidates.is_empty() {
            return Err(SkipReason::NoFunds);
        }
        // Largest first; outpoint order breaks ties deterministically.
        candidates.sort_by(|a, b| b.1.amount.cmp(&a.1.amount).then(a.0.cmp(&b.0)));

        let desired = self.sample_value(value_model, rng);
        let want = desired.checked_add(fee).unwrap_or(Amount(u64::MAX));
        let mut picked = Vec::new();
        let mut total = Amount(0);
        for (op, out) in candidates {
            total = total.checked_add(out.amount).expect("utxo total overflow");
            picked.push((op, out));
            if total >= want {
                break;
            }
        }
        if total <= fee {
            return Err(SkipReason::BelowFee);
        }
        // Pay the desired amount when funds cover it, otherwise sweep.
        let amount = desired.min(Amount(total.0 - fee.0));

        let payee = self.draw_other_user(payer, rng);
        let pay_to = self.users[payee].keys[rng.gen_range(0..self.addrs_per_user())].public().address();
        let change_to =
            self.users[payer].keys[rng.gen_range(0..self.addrs_per_user())].public().address();

        let mut outputs = vec![TxOutput { address: pay_to, amount }];
        let change = Amount(total.0 - fee.0 - amount.0);
        if !change.is_zero() {
            outputs.push(TxOutput { address: change_to, amount: change });
        }

        let spends: Vec<(OutPoint, &KeyPair)> = picked
            .iter()
            .map(|(op, out)| {
                let key = self.users[payer]
                    .keys
                    .iter()
                    .find(|k| k.public().address() == out.address)
                    .expect("owner map and key list agree");
                (*op, key)
            })
            .collect();
        let tx = Transaction::transfer_signed(&spends, outputs)
            .expect("wallet assembles matching keys and positive outputs");
        for (op, _) in &picked {
            self.locked.insert(*op);
        }
        Ok(Payment { tx, payer, payee, amount, fee })
    }

    fn addrs_per_user(&self) -> usize {
        self.users.first().map_or(1, |u| u.keys.len())
    }

    fn sample_value<R: Rng>(&self, model: &ValueModel, rng: &mut R) -> Amount {
        match *model {
            ValueModel::Fixed { amount } => amount,
            ValueModel::Uniform { min, max } => Amount(rng.gen_range(min.0..=max.0)),
        }
    }

    /// Uniform draw over users other than `payer`. A single re-roll trick
    /// keeps it one draw: sample from `users - 1` slots and shift values
    /// at or above the payer up by one.
    fn draw_other_user<R: Rng>(&self, payer: usize, rng: &mut R) -> usize {
        let n = self.users.len();
        if n <= 1 {
            return payer;
        }
        let d = rng.gen_range(0..n - 1);
        if d >= payer {
            d + 1
        } else {
            d
        }
    }
}
