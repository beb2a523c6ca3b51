//! Seeded multi-trial experiment through the harness: independent victims
//! and attacker streams per trial, deterministic report.

use l0_attack::attack::integer::IntAttackParams;
use l0_attack::family::build_family;
use l0_attack::harness::{run_experiment, AttackSpec, ExperimentConfig};
use l0_attack::victim::{GapSpec, VictimConfig};

fn main() {
    let fam = build_family(5).expect("family");
    let (n, r) = (256usize, 4usize);
    let beta = fam.beta_f64();
    let nf = n as f64;
    let gap = GapSpec::new(
        0.05 * nf,
        (nf - 4.0 * r as f64) * (1.0 - beta) - 4.0 * (nf * beta * (1.0 - beta)).sqrt(),
    )
    .unwrap();

    let mut params = IntAttackParams::new(n, r, 8.0);
    params.c_k = 0.05;
    let cfg = ExperimentConfig {
        victim: VictimConfig {
            kind: "sampling".into(),
            n,
            r: Some(r),
            levels: None,
            buckets: None,
            ring: "int".into(),
            theta_lo: gap.theta_lo,
            theta_hi: gap.theta_hi,
            seed: 0,
            answer: None,
        },
        attack: AttackSpec::Int {
            family_k: 5,
            params,
        },
        trials: 6,
        base_seed: 2024,
        min_success_rate: 0.8,
        full_transcripts: false,
        transcript_dir: None,
        report_path: None,
    };
    let report = run_experiment(&cfg).expect("experiment");
    println!(
        "success rate {:.2}, mean queries {:.0}, median {:.0}",
        report.success_rate, report.mean_queries, report.median_queries
    );
    for o in &report.outcomes {
        println!(
            "  trial {}: cert={} queries={} accused={:?} precision={:?}",
            o.trial, o.certificate, o.query_count, o.accused, o.accused_precision
        );
    }
}
