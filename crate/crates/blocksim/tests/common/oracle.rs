//! Plain-integer random-walk oracle for the attacker/honest block race.
//!
//! Deliberately tiny and independent of the simulator: nothing here but
//! coin flips and two counters. Success rates measured on these walks
//! arbitrate what the full chain-backed attack driver reports.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub struct WalkOutcome {
    pub success: bool,
    /// Coin flips consumed (blocks found by either side during the race).
    pub steps: u64,
}

/// Double-spend race. The attacker starts `premine_lead` blocks into a
/// private branch; the honest side starts at the fork point. The merchant
/// accepts once the honest branch reaches `z` blocks (the payment sits in
/// the first one). From acceptance on, the attacker publishes the moment
/// it is strictly ahead; falling `horizon` blocks behind aborts the trial
/// as a failure.
pub fn double_spend_walk(
    q: f64,
    z: u64,
    premine_lead: u64,
    horizon: u64,
    rng: &mut ChaCha12Rng,
) -> WalkOutcome {
    let mut a = premine_lead;
    let mut h = 0u64;
    let mut accepted = false;
    let mut steps = 0u64;
    loop {
        if h >= z {
            accepted = true;
        }
        if accepted && a > h {
            return WalkOutcome { success: true, steps };
        }
        if h.saturating_sub(a) >= horizon {
            return WalkOutcome { success: false, steps };
        }
        if rng.gen_bool(q) {
            a += 1;
        } else {
            h += 1;
        }
        steps += 1;
    }
}

/// Overtake race. The honest branch starts `fork_depth` blocks ahead; the
/// attacker starts `premine_lead` into its own branch and publishes on any
/// strict lead. Same deficit horizon as above.
pub fn overtake_walk(
    q: f64,
    fork_depth: u64,
    premine_lead: u64,
    horizon: u64,
    rng: &mut ChaCha12Rng,
) -> WalkOutcome {
    let mut a = premine_lead;
    let mut h = fork_depth;
    let mut steps = 0u64;
    loop {
        if a > h {
            return WalkOutcome { success: true, steps };
        }
        if h.saturating_sub(a) >= horizon {
            return WalkOutcome { success: false, steps };
        }
        if rng.gen_bool(q) {
            a += 1;
        } else {
            h += 1;
        }
        steps += 1;
    }
}

/// Success rate over `trials` walks, one derived seed per trial.
pub fn walk_rate(trials: u64, seed: u64, mut walk: impl FnMut(&mut ChaCha12Rng) -> WalkOutcome) -> f64 {
    let mut wins = 0u64;
    for i in 0..trials {
        let mut material = [0u8; 32];
        material[..8].copy_from_slice(&seed.to_le_bytes());
        material[8..16].copy_from_slice(&i.to_le_bytes());
        let mut rng = ChaCha12Rng::from_seed(material);
        if walk(&mut rng).success {
            wins += 1;
        }
    }
    wins as f64 / trials as f64
}
