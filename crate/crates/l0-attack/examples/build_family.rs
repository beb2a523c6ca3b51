//! Construct the moment-matched query family and inspect its exact
//! invariants: zero-mass identity, shared moments, and the endpoint range.

use l0_attack::family::{arcsine_normalizer, build_family};
use l0_attack::linalg::rational_to_f64;

fn main() {
    for k in [1usize, 2, 3, 5] {
        let fam = build_family(k).expect("family construction");
        fam.verify().expect("exact invariants");
        println!(
            "K = {k}: R = {}, deg Q <= {}, alpha = {:.6}, beta = {:.6}",
            fam.support_radius,
            fam.q.degree,
            fam.alpha_f64(),
            fam.beta_f64()
        );
        // D_p(0) = p exactly at both endpoints
        let a = fam.pmf(&fam.alpha.clone(), 0).unwrap();
        let b = fam.pmf(&fam.beta.clone(), 0).unwrap();
        assert_eq!(a, fam.alpha);
        assert_eq!(b, fam.beta);
        // every moment up to K agrees across the whole range
        for t in 1..=k {
            let at_alpha = fam.moment(&fam.alpha.clone(), t).unwrap();
            let at_beta = fam.moment(&fam.beta.clone(), t).unwrap();
            assert_eq!(at_alpha, at_beta);
            println!("  E[X^{t}] = {:.6} (shared)", rational_to_f64(&at_alpha));
        }
        println!(
            "  arcsine normalizer C_ab = {:.6}",
            arcsine_normalizer(fam.alpha_f64(), fam.beta_f64())
        );
    }
}
