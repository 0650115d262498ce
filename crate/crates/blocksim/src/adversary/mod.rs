//! Attacks on the protocol's settlement guarantees: double-spend races,
//! majority-hashrate overtakes, and the green-address trust shortcut.

mod green;
mod race;

pub use green::{accept_payment, GreenAddressPolicy, PaymentDecision};
pub use race::{
    run_attack, run_double_spend, run_majority_overtake, wilson_ci, AttackKind, AttackOutcome,
    AttackSpec, TrialRecord,
};
