//! The real-valued attack: leverage-score column removal, the Gaussian query
//! family, the adaptive score loop, and the KL / subspace-embedding
//! verification tools.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_failure, confirm_failure, Descriptor, FailureCertificate, FailureCheckParams};
use crate::error::{Error, Result};
use crate::family::{arcsine_sample, draw_real_round, phi_unchecked, RoundValues};
use crate::harness::derive_seed;
use crate::linalg::{leverage_scores, Ring, RingMatrix, RingVector};
use crate::victim::SketchOracle;

/// Parameters for the real attack; logarithms are natural.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RealAttackParams {
    pub n: usize,
    pub r: usize,
    /// Leverage threshold reciprocal used by the analysis-side tools.
    pub s: f64,
    /// TV budget knob; desk default r rather than the proof-scale r^3.
    pub gamma: f64,
    pub c_h: f64,
    pub c_sigma: f64,
    pub c_ell: f64,
    /// Family endpoints: alpha near 0, beta near 1; Pr[x != 0] = p.
    pub alpha: f64,
    pub beta: f64,
    /// Subdeterminant floor for victim validation.
    pub kappa: f64,
    /// Skip subdeterminant enumeration (victims too large to enumerate carry
    /// an attestation instead).
    #[serde(default)]
    pub subdeterminants_attested: bool,
    #[serde(flatten)]
    pub failure: FailureCheckParams,
    pub seed: u64,
    #[serde(default)]
    pub store_rounds: bool,
}

impl RealAttackParams {
    pub fn new(n: usize, r: usize, s: f64) -> Self {
        RealAttackParams {
            n,
            r,
            s,
            gamma: r as f64,
            c_h: 1.0,
            c_sigma: 1.0,
            c_ell: 2.0,
            alpha: 0.1,
            beta: 0.9,
            kappa: 1e-6,
            subdeterminants_attested: false,
            failure: FailureCheckParams::default(),
            seed: 0,
            store_rounds: false,
        }
    }

    pub fn h(&self) -> f64 {
        self.c_h * (self.r * self.r) as f64 * self.s * (self.r as f64).ln().max(1.0)
    }

    pub fn sigma(&self) -> f64 {
        self.c_sigma * self.h() * (self.n as f64).ln()
    }

    pub fn ell(&self) -> u64 {
        (self.c_ell * self.h() * self.sigma()).ceil() as u64
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.alpha && self.alpha < self.beta && self.beta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < alpha < beta < 1, got ({}, {})",
                self.alpha, self.beta
            )));
        }
        if self.s < 1.0 {
            return Err(Error::InvalidArgument("s must be >= 1".into()));
        }
        Ok(())
    }
}

/// Ordered log of a leverage-removal pass.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RemovalReport {
    /// (column, leverage at removal), in removal order.
    pub removed: Vec<(usize, f64)>,
    /// Removals at leverage ~1, where the rank dropped.
    pub rank_drop_events: u64,
    pub final_max_leverage: f64,
    /// Set when the removal count exceeds c_T r^2 s log(nr).
    pub bound_exceeded: bool,
}

const LEVERAGE_ONE_TOL: f64 = 1e-9;

/// Zero out max-leverage columns until every column's leverage is at most
/// 1/s. Each removal either shrinks the determinant potential or drops the
/// rank, so the loop terminates.
pub fn remove_heavy_columns(a: &RingMatrix, s: f64) -> Result<(RingMatrix, RemovalReport)> {
    remove_heavy_columns_with_bound(a, s, 1.0)
}

pub fn remove_heavy_columns_with_bound(
    a: &RingMatrix,
    s: f64,
    c_t: f64,
) -> Result<(RingMatrix, RemovalReport)> {
    if a.ring() != Ring::Real {
        return Err(Error::RingMismatch {
            expected: "real".into(),
            got: a.ring().name(),
        });
    }
    if s < 1.0 {
        return Err(Error::InvalidArgument("s must be >= 1".into()));
    }
    let mut work = a.clone();
    let mut removed = Vec::new();
    let mut rank_drops = 0u64;
    let threshold = 1.0 / s;
    let mut final_max = 0.0;
    for _ in 0..=a.cols() {
        if (0..work.cols()).all(|j| work.column_is_zero(j)) {
            final_max = 0.0;
            break;
        }
        let lev = leverage_scores(&work)?;
        let (jmax, &lmax) = lev
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.partial_cmp(y.1).unwrap())
            .expect("nonempty");
        if lmax <= threshold {
            final_max = lmax;
            break;
        }
        if lmax >= 1.0 - LEVERAGE_ONE_TOL {
            rank_drops += 1;
        }
        removed.push((jmax, lmax));
        work.zero_column(jmax);
        final_max = lmax;
    }
    let r = a.rows() as f64;
    let n = a.cols() as f64;
    let bound = c_t * r * r * s * (n * r).ln().max(1.0);
    Ok((
        work,
        RemovalReport {
            rank_drop_events: rank_drops,
            bound_exceeded: (removed.len() as f64) > bound,
            removed,
            final_max_leverage: final_max,
        },
    ))
}

/// KL divergence between multivariate Gaussians N(mu1, sigma1) and
/// N(mu2, sigma2).
pub fn kl_gaussian(
    mu1: &[f64],
    sigma1: &DMatrix<f64>,
    mu2: &[f64],
    sigma2: &DMatrix<f64>,
) -> Result<f64> {
    let r = mu1.len();
    if mu2.len() != r || sigma1.nrows() != r || sigma2.nrows() != r {
        return Err(Error::DimensionMismatch("gaussian parameter shapes".into()));
    }
    let chol2 = sigma2
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularMatrix("sigma2 not positive definite".into()))?;
    let chol1 = sigma1
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularMatrix("sigma1 not positive definite".into()))?;
    let logdet = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| {
        2.0 * (0..r).map(|i| c.l()[(i, i)].ln()).sum::<f64>()
    };
    let logdet_ratio = logdet(&chol2) - logdet(&chol1);
    let inv2 = chol2.inverse();
    let trace = (&inv2 * sigma1).trace();
    let dmu = nalgebra::DVector::from_iterator(r, mu2.iter().zip(mu1).map(|(b, a)| b - a));
    let quad = (dmu.transpose() * &inv2 * &dmu)[(0, 0)];
    Ok(0.5 * (logdet_ratio - r as f64 + trace + quad))
}

/// Monte Carlo check of the column-sampling subspace embedding: keep each
/// column with probability p scaled by 1/sqrt(p) so ||x^T B||^2 estimates
/// ||x^T A||^2; a trial violates when some test direction falls outside the
/// (1 +/- 1/(gamma r)) sandwich. Returns the violating fraction of trials.
pub fn embedding_check<R: Rng>(
    a: &RingMatrix,
    p: f64,
    gamma: f64,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    if a.ring() != Ring::Real {
        return Err(Error::RingMismatch {
            expected: "real".into(),
            got: a.ring().name(),
        });
    }
    if !(0.0 < p && p <= 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} outside (0, 1]")));
    }
    let r = a.rows();
    let n = a.cols();
    let slack = 1.0 / (gamma * r as f64);
    let mut violating = 0usize;
    for _ in 0..trials {
        let kept: Vec<Option<f64>> = (0..n)
            .map(|_| {
                if rng.gen::<f64>() < p {
                    Some(1.0 / p.sqrt())
                } else {
                    None
                }
            })
            .collect();
        // test directions: canonical rows plus a few random unit vectors
        let mut dirs: Vec<Vec<f64>> = (0..r)
            .map(|i| {
                let mut e = vec![0.0; r];
                e[i] = 1.0;
                e
            })
            .collect();
        for _ in 0..8 {
            let mut x: Vec<f64> = (0..r).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                x.iter_mut().for_each(|v| *v /= norm);
                dirs.push(x);
            }
        }
        let mut bad = false;
        for x in &dirs {
            let mut na = 0.0;
            let mut nb = 0.0;
            for j in 0..n {
                let mut dot = 0.0;
                for (i, xi) in x.iter().enumerate() {
                    dot += xi * a.real_entry(i, j);
                }
                na += dot * dot;
                if let Some(scale) = kept[j] {
                    let b = dot * scale;
                    nb += b * b;
                }
            }
            let lo = (1.0 - slack) * nb;
            let hi = (1.0 + slack) * nb;
            if !(lo <= na && na <= hi) {
                bad = true;
                break;
            }
        }
        if bad {
            violating += 1;
        }
    }
    Ok(violating as f64 / trials as f64)
}

/// Enumerate all square submatrices up to 4x4 and check each determinant is
/// zero or at least kappa. Errors when the enumeration would exceed the
/// budget; large victims carry an attestation flag instead.
pub fn validate_subdeterminants(a: &RingMatrix, kappa: f64, budget: u64) -> Result<bool> {
    if a.ring() != Ring::Real {
        return Err(Error::RingMismatch {
            expected: "real".into(),
            got: a.ring().name(),
        });
    }
    let r = a.rows();
    let n = a.cols();
    let kmax = r.min(n).min(4);
    let mut total: u64 = 0;
    for k in 1..=kmax {
        total = total.saturating_add(combinations(r, k).saturating_mul(combinations(n, k)));
    }
    if total > budget {
        return Err(Error::StateSpaceTooLarge(format!(
            "{total} submatrices exceed budget {budget}"
        )));
    }
    let zero_tol = 1e-12;
    for k in 1..=kmax {
        let mut rows_sel = (0..k).collect::<Vec<_>>();
        loop {
            let mut cols_sel = (0..k).collect::<Vec<_>>();
            loop {
                let m = DMatrix::<f64>::from_fn(k, k, |i, j| {
                    a.real_entry(rows_sel[i], cols_sel[j])
                });
                let det = m.determinant().abs();
                if det > zero_tol && det < kappa {
                    return Ok(false);
                }
                if !advance(&mut cols_sel, n) {
                    break;
                }
            }
            if !advance(&mut rows_sel, r) {
                break;
            }
        }
    }
    Ok(true)
}

fn combinations(n: usize, k: usize) -> u64 {
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u64) / (i as u64 + 1);
    }
    acc
}

fn advance(sel: &mut [usize], n: usize) -> bool {
    let k = sel.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if sel[i] < n - (k - i) {
            sel[i] += 1;
            for j in i + 1..k {
                sel[j] = sel[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RealRoundRecord {
    pub j: u64,
    pub p: f64,
    pub a: i8,
    pub accused: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RealAttackTranscript {
    pub params: RealAttackParams,
    pub sigma: f64,
    pub round_cap: u64,
    pub rounds: Vec<RealRoundRecord>,
    pub certificate: Option<FailureCertificate>,
    pub accused: Vec<usize>,
    pub rounds_run: u64,
    pub query_count: u64,
    pub no_certificate: bool,
    pub skipped_checks: u64,
    #[serde(skip)]
    pub max_abs_scores: Vec<f64>,
}

/// Run the real-valued attack; same loop shape as the integer attack with
/// the Gaussian family. Pr[coordinate = 0] is 1 - p here, so scores use the
/// score function at the zero probability.
pub fn run_real_attack(
    oracle: &mut SketchOracle,
    params: &RealAttackParams,
) -> Result<RealAttackTranscript> {
    params.validate()?;
    if oracle.ring() != Ring::Real {
        return Err(Error::RingMismatch {
            expected: "real".into(),
            got: oracle.ring().name(),
        });
    }
    if oracle.n() != params.n {
        return Err(Error::DimensionMismatch(format!(
            "oracle n {} != params n {}",
            oracle.n(),
            params.n
        )));
    }
    if !params.subdeterminants_attested {
        let ok = validate_subdeterminants(oracle.analyst_matrix(), params.kappa, 2_000_000)?;
        if !ok {
            return Err(Error::InvalidArgument(
                "victim has a nonzero subdeterminant below kappa".into(),
            ));
        }
    }

    let mut rng_rounds = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, "real-rounds", 0));
    let mut rng_fail = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, "real-failcheck", 0));

    let n = params.n;
    let sigma = params.sigma();
    let round_cap = params.ell();
    let mut scores = vec![0.0f64; n];
    let mut max_abs = vec![0.0f64; n];
    let mut masked = vec![false; n];
    let mut accused: Vec<usize> = Vec::new();
    let mut rounds: Vec<RealRoundRecord> = Vec::new();
    let mut skipped_checks = 0u64;
    let mut certificate = None;
    let mut rounds_run = 0u64;

    'outer: for j in 1..=round_cap {
        rounds_run = j;
        for p_end in [params.alpha, params.beta] {
            let desc = Descriptor::RealEndpoint {
                p: p_end,
                mask: accused.clone(),
            };
            match desc.required_answer(n, Ring::Real, oracle.gap(), params.failure.margin_z) {
                Ok(_) => {
                    if let Some(cert) =
                        check_failure(oracle, &desc, &params.failure, None, &mut rng_fail)?
                    {
                        certificate = Some(cert);
                        break 'outer;
                    }
                }
                Err(Error::NoRequiredAnswer(_)) => skipped_checks += 1,
                Err(e) => return Err(e),
            }
        }

        let p = arcsine_sample(params.alpha, params.beta, &mut rng_rounds);
        let round = draw_real_round(p, n, &mut rng_rounds)?;
        let RoundValues::Real(values) = &round.v else {
            unreachable!()
        };
        let mut wire = values.clone();
        for &i in &accused {
            wire[i] = 0.0;
        }
        debug_assert!(accused.iter().all(|&i| wire[i] == 0.0));
        let a = oracle.query(&RingVector::from_real(wire))?;

        let zero_prob = 1.0 - p;
        let a_score = -(a as f64);
        let inc_plus = a_score * phi_unchecked(zero_prob, true);
        let inc_minus = a_score * phi_unchecked(zero_prob, false);
        let mut newly: Vec<usize> = Vec::new();
        for i in 0..n {
            if masked[i] {
                continue;
            }
            scores[i] += if round.c[i] { inc_plus } else { inc_minus };
            let abs = scores[i].abs();
            if abs > max_abs[i] {
                max_abs[i] = abs;
            }
            if scores[i] > sigma {
                newly.push(i);
            }
        }
        for &i in &newly {
            masked[i] = true;
            accused.push(i);
        }
        if params.store_rounds {
            rounds.push(RealRoundRecord {
                j,
                p,
                a,
                accused: newly,
            });
        }
    }

    let mut no_certificate = false;
    if certificate.is_none() {
        for p_end in [params.alpha, params.beta] {
            let desc = Descriptor::RealEndpoint {
                p: p_end,
                mask: accused.clone(),
            };
            if let Ok(required) =
                desc.required_answer(n, Ring::Real, oracle.gap(), params.failure.margin_z)
            {
                if let Some(cert) =
                    confirm_failure(oracle, &desc, required, &params.failure, None, &mut rng_fail)?
                {
                    certificate = Some(cert);
                    break;
                }
            }
        }
        no_certificate = certificate.is_none();
    }

    Ok(RealAttackTranscript {
        params: params.clone(),
        sigma,
        round_cap,
        rounds,
        certificate,
        accused,
        rounds_run,
        query_count: oracle.query_count(),
        no_certificate,
        skipped_checks,
        max_abs_scores: max_abs,
    })
}
