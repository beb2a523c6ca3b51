//! Finite-field attack against a level-structured bucket victim over F_101:
//! grow a column-independent set by output-distribution testing, then
//! certify a failing query distribution.

use l0_attack::attack::finite_field::{run_fp_attack, FpAttackParams};
use l0_attack::linalg::Ring;
use l0_attack::victim::{make_bucket_victim, GapSpec};

fn main() {
    let p = 101u64;
    let (n, r) = (200usize, 6usize);
    let gap = GapSpec::new(1.1 * r as f64, 1.9 * r as f64).unwrap();
    let mut oracle = make_bucket_victim(n, 2, 3, Ring::Fp(p), gap, 13).unwrap();

    let mut params = FpAttackParams::new(p, n, r);
    params.seed = 3;
    params.max_samples_per_test = 450_000;
    params.max_barren_sweeps = 3;
    let t = run_fp_attack(&mut oracle, &params).expect("attack run");

    println!("independent set T = {:?}", t.independent_set);
    for ev in &t.evidence {
        println!(
            "  column {} at level {} (gap estimate {:.4}, {} samples, rank audit {:?})",
            ev.column, ev.level, ev.estimate, ev.m_used, ev.rank_audit
        );
    }
    println!(
        "distinctness tests run: {}, skipped levels: {:?}",
        t.tests.len(),
        t.skipped_levels
    );
    println!("queries: {}", t.query_count);
    match &t.certificate {
        Some(cert) => println!(
            "certificate: required {} but errs at rate {:.3}",
            cert.required_answer, cert.error_rate
        ),
        None => println!("no certificate"),
    }
}
