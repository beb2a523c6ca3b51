//! Real-valued attack: Bernoulli-Gaussian queries with unit per-coordinate
//! variance, arcsine-mixed sparsity, and the same accusation loop as the
//! integer case.

use l0_attack::attack::real::{run_real_attack, RealAttackParams};
use l0_attack::linalg::Ring;
use l0_attack::victim::{make_sampling_victim, GapSpec};

fn main() {
    let (n, r) = (512usize, 8usize);
    let gap = GapSpec::from_fractions(0.3, 0.7, n).unwrap();
    let mut oracle = make_sampling_victim(n, r, Ring::Real, gap, 99).unwrap();
    let hidden = oracle.analyst_hidden_set().unwrap().to_vec();

    let mut params = RealAttackParams::new(n, r, 2.0);
    // unit-row victims have every square subdeterminant in {0, 1}
    params.subdeterminants_attested = true;
    params.seed = 11;
    let t = run_real_attack(&mut oracle, &params).expect("attack run");

    println!("rounds: {} / cap {}", t.rounds_run, t.round_cap);
    println!("hidden set: {hidden:?}");
    println!("accused:    {:?}", t.accused);
    println!("queries: {}", t.query_count);
    match &t.certificate {
        Some(cert) => println!(
            "certificate: required {} but errs at rate {:.3}",
            cert.required_answer, cert.error_rate
        ),
        None => println!("no certificate"),
    }
}
