//! Overtaking the honest chain from six blocks behind. Below half the
//! hashrate the catch-up probability decays geometrically; at and above
//! half, the attack becomes a matter of patience, not luck.

use blocksim::adversary::{run_attack, AttackKind, AttackSpec};

fn main() {
    let deficit = 6u64;
    let horizon = 60;
    println!(
        "probability of erasing a {deficit}-block deficit \
         (giving up {horizon} blocks behind)\n"
    );
    // Trial counts vary by cell: small shares need many trials because
    // successes are rare (and each race is short), while near even odds a
    // single race can run for hundreds of blocks, so fewer trials suffice.
    let cells = [
        (0.30, 4000),
        (0.35, 4000),
        (0.40, 4000),
        (0.45, 2000),
        (0.50, 400),
        (0.55, 1000),
        (0.60, 1000),
    ];
    println!("    q   trials   observed   closed form   mean blocks when it works");
    for (i, (q, trials)) in cells.into_iter().enumerate() {
        let spec = AttackSpec {
            kind: AttackKind::MajorityOvertake,
            attacker_share: q,
            confirmations_required: 1,
            premine_lead: 0,
            fork_depth: deficit,
            trial_count: trials,
            horizon,
            seed: 70 + i as u64,
        };
        let outcome = run_attack(&spec, 1);
        // Needing a net gain of deficit + 1 with per-block win odds q:
        // the gambler's-ruin chance is (q/p)^(deficit+1) when q < p, and
        // certainty (eventually) once q >= p.
        let theory = if q < 0.5 { (q / (1.0 - q)).powi(deficit as i32 + 1) } else { 1.0 };
        let steps = outcome
            .mean_blocks_to_success()
            .map(|s| format!("{s:.0}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "  {q:.2}   {trials:>6}   {:>8.4}   {:>11.4}   {:>10}",
            outcome.success_rate(),
            theory,
            steps
        );
    }
    println!(
        "\nat q = 0.5 the closed form says \"eventually\", but eventually is \
         doing heavy lifting: the walk drifts nowhere, so a fixed give-up \
         line truncates the races that would have won after a very long \
         grind (which is why the observed rate sits below 1.0 there). Past \
         0.5 the attacker simply outproduces everyone, and wins fast: \
         hashrate concentration is the one threat confirmations cannot \
         price in."
    );
}
