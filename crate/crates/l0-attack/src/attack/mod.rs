//! Shared attack machinery: query-distribution descriptors, required-answer
//! analysis, and the two-stage failure check that backs every certificate.

pub mod finite_field;
pub mod integer;
pub mod real;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{draw_real_round, FamilySampler, RoundValues};
use crate::harness::binomial_ci;
use crate::linalg::{Ring, RingVector};
use crate::victim::{GapSpec, SketchOracle};

/// A query distribution the attack can describe, sample, and derive a
/// required gap answer for.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Descriptor {
    /// The integer family at a pinned endpoint, with accused coordinates
    /// zeroed. Pr[coordinate = 0] = p.
    FamilyEndpoint { p: f64, mask: Vec<usize> },
    /// The real family at a pinned endpoint, with accused coordinates
    /// zeroed. Pr[coordinate = 0] = 1 - p.
    RealEndpoint { p: f64, mask: Vec<usize> },
    /// Uniform over F_p on a fixed support (coordinates may still be zero).
    FpSupport { support: Vec<usize> },
    /// Uniform over all of F_p^n.
    FpFull,
}

impl Descriptor {
    /// Mean and standard deviation of ||x||_0 under the descriptor.
    fn l0_stats(&self, n: usize, ring: Ring) -> (f64, f64) {
        let bin = |count: f64, nz: f64| (count * nz, (count * nz * (1.0 - nz)).max(0.0).sqrt());
        match self {
            Descriptor::FamilyEndpoint { p, mask } => bin((n - mask.len()) as f64, 1.0 - p),
            Descriptor::RealEndpoint { p, mask } => bin((n - mask.len()) as f64, *p),
            Descriptor::FpSupport { support } => {
                let q = match ring {
                    Ring::Fp(q) => q as f64,
                    _ => f64::INFINITY,
                };
                bin(support.len() as f64, 1.0 - 1.0 / q)
            }
            Descriptor::FpFull => {
                let q = match ring {
                    Ring::Fp(q) => q as f64,
                    _ => f64::INFINITY,
                };
                bin(n as f64, 1.0 - 1.0 / q)
            }
        }
    }

    /// Required answer when ||x||_0 concentrates outside the gap, with a
    /// z-sigma concentration margin. Support descriptors also use their
    /// deterministic upper bound.
    pub fn required_answer(
        &self,
        n: usize,
        ring: Ring,
        gap: GapSpec,
        margin_z: f64,
    ) -> Result<i8> {
        let (mean, sd) = self.l0_stats(n, ring);
        if mean + margin_z * sd <= gap.theta_lo {
            return Ok(-1);
        }
        if let Descriptor::FpSupport { support } = self {
            // deterministic: the support caps the l0 count
            if support.len() as f64 <= gap.theta_lo {
                return Ok(-1);
            }
        }
        if mean - margin_z * sd >= gap.theta_hi {
            return Ok(1);
        }
        Err(Error::NoRequiredAnswer(format!(
            "l0 ~ {mean:.1} +/- {sd:.1} lands inside the gap ({}, {})",
            gap.theta_lo, gap.theta_hi
        )))
    }

    /// Draw one query. `sampler` is required for the integer family.
    pub fn sample<R: Rng>(
        &self,
        n: usize,
        ring: Ring,
        sampler: Option<&FamilySampler>,
        rng: &mut R,
    ) -> Result<RingVector> {
        match self {
            Descriptor::FamilyEndpoint { p, mask } => {
                let s = sampler.ok_or_else(|| {
                    Error::InvalidArgument("family descriptor needs a sampler".into())
                })?;
                let mut v = s.draw_values(*p, n, rng);
                for &i in mask {
                    v[i] = 0;
                }
                Ok(RingVector::from_int(v))
            }
            Descriptor::RealEndpoint { p, mask } => {
                let round = draw_real_round(*p, n, rng)?;
                let RoundValues::Real(mut v) = round.v else {
                    unreachable!()
                };
                for &i in mask {
                    v[i] = 0.0;
                }
                Ok(RingVector::from_real(v))
            }
            Descriptor::FpSupport { support } => {
                let q = match ring {
                    Ring::Fp(q) => q,
                    _ => {
                        return Err(Error::RingMismatch {
                            expected: "fp".into(),
                            got: ring.name(),
                        })
                    }
                };
                let mut v = vec![0u64; n];
                for &i in support {
                    v[i] = rng.gen_range(0..q);
                }
                Ok(RingVector::from_fp(q, v))
            }
            Descriptor::FpFull => {
                let q = match ring {
                    Ring::Fp(q) => q,
                    _ => {
                        return Err(Error::RingMismatch {
                            expected: "fp".into(),
                            got: ring.name(),
                        })
                    }
                };
                let v = (0..n).map(|_| rng.gen_range(0..q)).collect();
                Ok(RingVector::from_fp(q, v))
            }
        }
    }
}

/// A query distribution plus statistical evidence that the victim violates
/// the gap promise on it with constant probability.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FailureCertificate {
    pub descriptor: Descriptor,
    pub required_answer: i8,
    pub errors: u64,
    pub trials: u64,
    pub error_rate: f64,
    /// Two-sided Wilson interval on the error rate.
    pub ci: (f64, f64),
    pub confidence: f64,
    /// Declared constant the lower confidence bound must reach.
    pub floor: f64,
    pub query_count_at_issuance: u64,
}

/// Knobs for [`check_failure`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FailureCheckParams {
    /// Per-round screening sample count (c in the round loop).
    pub screen_samples: usize,
    /// Screening trigger: empirical error rate at or above this.
    pub fail_threshold: f64,
    /// Fresh samples drawn by the confirmation stage.
    pub confirm_samples: usize,
    /// Wilson confidence for the confirmation interval.
    pub confidence: f64,
    /// Certificate floor: confirmed when the interval's lower end reaches it.
    pub floor: f64,
    /// Concentration margin (in sds) for required-answer analysis.
    pub margin_z: f64,
}

impl Default for FailureCheckParams {
    fn default() -> Self {
        FailureCheckParams {
            screen_samples: 4,
            fail_threshold: 1.0 / 3.0,
            confirm_samples: 200,
            confidence: 0.99,
            floor: 0.2,
            margin_z: 4.0,
        }
    }
}

/// Two-stage failure test: screen with a few samples, then confirm with
/// fresh samples and a Wilson interval. Returns a certificate only when the
/// interval's lower bound clears the floor.
pub fn check_failure<R: Rng>(
    oracle: &mut SketchOracle,
    descriptor: &Descriptor,
    params: &FailureCheckParams,
    sampler: Option<&FamilySampler>,
    rng: &mut R,
) -> Result<Option<FailureCertificate>> {
    let n = oracle.n();
    let ring = oracle.ring();
    let required = descriptor.required_answer(n, ring, oracle.gap(), params.margin_z)?;

    let mut screen_errors = 0usize;
    for _ in 0..params.screen_samples {
        let x = descriptor.sample(n, ring, sampler, rng)?;
        if oracle.query(&x)? != required {
            screen_errors += 1;
        }
    }
    if (screen_errors as f64) < params.fail_threshold * params.screen_samples as f64 {
        return Ok(None);
    }
    confirm_failure(oracle, descriptor, required, params, sampler, rng)
}

/// Confirmation stage alone (used directly for the end-of-run attempt).
pub fn confirm_failure<R: Rng>(
    oracle: &mut SketchOracle,
    descriptor: &Descriptor,
    required: i8,
    params: &FailureCheckParams,
    sampler: Option<&FamilySampler>,
    rng: &mut R,
) -> Result<Option<FailureCertificate>> {
    let n = oracle.n();
    let ring = oracle.ring();
    let mut errors = 0u64;
    for _ in 0..params.confirm_samples {
        let x = descriptor.sample(n, ring, sampler, rng)?;
        if oracle.query(&x)? != required {
            errors += 1;
        }
    }
    let trials = params.confirm_samples as u64;
    let ci = binomial_ci(errors, trials, params.confidence)?;
    if ci.0 >= params.floor {
        Ok(Some(FailureCertificate {
            descriptor: descriptor.clone(),
            required_answer: required,
            errors,
            trials,
            error_rate: errors as f64 / trials as f64,
            ci,
            confidence: params.confidence,
            floor: params.floor,
            query_count_at_issuance: oracle.query_count(),
        }))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::build_family;
    use crate::victim::{make_constant_victim, make_sampling_victim};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn family_gap(n: usize, r: usize, beta: f64) -> GapSpec {
        let nf = n as f64;
        let hi = (nf - 4.0 * r as f64) * (1.0 - beta) - 4.0 * (nf * beta * (1.0 - beta)).sqrt();
        GapSpec::new(0.05 * nf, hi).unwrap()
    }

    #[test]
    fn constant_victim_certified_immediately() {
        let fam = build_family(2).unwrap();
        let n = 256;
        let gap = family_gap(n, 8, fam.beta_f64());
        // f == -1 errs on every beta-endpoint draw (required +1 here)
        let mut oracle = make_constant_victim(n, Ring::Int, gap, -1).unwrap();
        let sampler = fam.sampler();
        let desc = Descriptor::FamilyEndpoint {
            p: fam.beta_f64(),
            mask: vec![],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cert = check_failure(
            &mut oracle,
            &desc,
            &FailureCheckParams::default(),
            Some(&sampler),
            &mut rng,
        )
        .unwrap()
        .expect("constant victim fails immediately");
        assert!(cert.error_rate > 0.95);
        assert!(cert.ci.0 >= cert.floor);
        assert_eq!(cert.query_count_at_issuance, oracle.query_count());
    }

    #[test]
    fn honest_victim_not_certified_on_unmasked_endpoints() {
        let fam = build_family(2).unwrap();
        let n = 512;
        let r = 8;
        let gap = family_gap(n, r, fam.beta_f64());
        let mut oracle = make_sampling_victim(n, r, Ring::Int, gap, 11).unwrap();
        let sampler = fam.sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in [fam.alpha_f64(), fam.beta_f64()] {
            let desc = Descriptor::FamilyEndpoint { p, mask: vec![] };
            for _ in 0..20 {
                let cert = check_failure(
                    &mut oracle,
                    &desc,
                    &FailureCheckParams::default(),
                    Some(&sampler),
                    &mut rng,
                )
                .unwrap();
                assert!(cert.is_none(), "honest victim certified at p = {p}");
            }
        }
    }

    #[test]
    fn fully_masked_victim_certified() {
        let fam = build_family(2).unwrap();
        let n = 512;
        let r = 8;
        let gap = family_gap(n, r, fam.beta_f64());
        let mut oracle = make_sampling_victim(n, r, Ring::Int, gap, 12).unwrap();
        let hidden = oracle.analyst_hidden_set().unwrap().to_vec();
        let sampler = fam.sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        // alpha side requires +1; a fully blinded victim answers -1
        let desc = Descriptor::FamilyEndpoint {
            p: fam.alpha_f64(),
            mask: hidden,
        };
        let cert = check_failure(
            &mut oracle,
            &desc,
            &FailureCheckParams::default(),
            Some(&sampler),
            &mut rng,
        )
        .unwrap()
        .expect("blinded victim must fail");
        assert!(cert.error_rate > 0.9);
    }

    #[test]
    fn descriptor_inside_gap_is_rejected() {
        let n = 100;
        let gap = GapSpec::new(10.0, 90.0).unwrap();
        let desc = Descriptor::FamilyEndpoint {
            p: 0.5,
            mask: vec![],
        };
        // l0 ~ 50 +/- 5 lands inside (10, 90)
        let err = desc.required_answer(n, Ring::Int, gap, 4.0);
        assert!(matches!(err, Err(Error::NoRequiredAnswer(_))));
    }

    #[test]
    fn fp_support_descriptor_is_deterministically_low() {
        let gap = GapSpec::new(6.6, 11.4).unwrap();
        let desc = Descriptor::FpSupport {
            support: vec![0, 1, 2],
        };
        assert_eq!(
            desc.required_answer(200, Ring::Fp(101), gap, 4.0).unwrap(),
            -1
        );
        let full = Descriptor::FpFull;
        assert_eq!(
            full.required_answer(200, Ring::Fp(101), gap, 4.0).unwrap(),
            1
        );
    }
}
