//! End-to-end integer attack against a sampling victim: the score loop
//! accuses observed coordinates, zeroes them out, and certifies a query
//! distribution the degraded victim answers wrongly at a constant rate.

use l0_attack::attack::integer::{run_integer_attack, IntAttackParams};
use l0_attack::family::build_family;
use l0_attack::linalg::Ring;
use l0_attack::victim::{make_sampling_victim, GapSpec};

fn main() {
    let fam = build_family(5).expect("family");
    let (n, r) = (512usize, 8usize);
    let beta = fam.beta_f64();
    // theta_hi sits safely below the beta endpoint's l0 concentration so both
    // endpoints require +1 and the blinded victim must eventually err
    let nf = n as f64;
    let theta_hi = (nf - 4.0 * r as f64) * (1.0 - beta) - 4.0 * (nf * beta * (1.0 - beta)).sqrt();
    let gap = GapSpec::new(0.05 * nf, theta_hi).unwrap();
    let mut oracle = make_sampling_victim(n, r, Ring::Int, gap, 42).unwrap();
    let hidden = oracle.analyst_hidden_set().unwrap().to_vec();

    let mut params = IntAttackParams::new(n, r, 8.0);
    params.c_k = 0.05; // desk-scale family order
    params.seed = 7;
    let t = run_integer_attack(&mut oracle, &fam, &params).expect("attack run");

    println!("rounds: {} / cap {}", t.rounds_run, t.round_cap);
    println!("sigma: {:.1}", t.sigma);
    println!("hidden set: {hidden:?}");
    println!("accused:    {:?}", t.accused);
    println!("queries: {}", t.query_count);
    match &t.certificate {
        Some(cert) => println!(
            "certificate: required {} but errs at rate {:.3} (ci {:.3}..{:.3})",
            cert.required_answer, cert.error_rate, cert.ci.0, cert.ci.1
        ),
        None => println!("no certificate (round budget exhausted)"),
    }
}
