//! Linear-sketch gap-norm victims for the attacks to break.
//!
//! A victim is exposed through [`SketchOracle::query`] only: the estimator
//! receives nothing but the sketch Ax, so answers cannot depend on x beyond
//! it. Analyst accessors expose the hidden matrix for verification in tests
//! and audits; attack logic never needs them.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matvec, Ring, RingMatrix, RingVector};

/// Gap promise in absolute l0 counts: answer -1 is required when
/// ||x||_0 <= theta_lo, +1 when ||x||_0 >= theta_hi; no promise in between.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GapSpec {
    pub theta_lo: f64,
    pub theta_hi: f64,
}

impl GapSpec {
    pub fn new(theta_lo: f64, theta_hi: f64) -> Result<Self> {
        if !(theta_lo < theta_hi) {
            return Err(Error::InvalidArgument(format!(
                "gap thresholds must satisfy theta_lo < theta_hi, got ({theta_lo}, {theta_hi})"
            )));
        }
        Ok(GapSpec { theta_lo, theta_hi })
    }

    pub fn from_fractions(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(lo * n as f64, hi * n as f64)
    }

    /// Required answer for an exact l0 count, if the promise binds.
    pub fn required_answer(&self, l0: f64) -> Option<i8> {
        if l0 <= self.theta_lo {
            Some(-1)
        } else if l0 >= self.theta_hi {
            Some(1)
        } else {
            None
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.theta_lo + self.theta_hi)
    }
}

#[derive(Clone, Debug)]
enum Estimator {
    /// +1 iff the fraction of nonzero sketch entries reaches the midpoint of
    /// the gap fractions.
    ObservedFraction { midpoint_fraction: f64 },
    /// Level-structured l0 estimate thresholded at the gap midpoint.
    Bucket {
        levels: usize,
        buckets: usize,
        midpoint_count: f64,
    },
    Constant { answer: i8 },
}

impl Estimator {
    fn answer(&self, sketch: &RingVector) -> i8 {
        match self {
            Estimator::ObservedFraction { midpoint_fraction } => {
                let r = sketch.dim().max(1);
                let frac = sketch.l0() as f64 / r as f64;
                if frac >= *midpoint_fraction {
                    1
                } else {
                    -1
                }
            }
            Estimator::Bucket {
                levels,
                buckets,
                midpoint_count,
            } => {
                let estimate = bucket_estimate(sketch, *levels, *buckets);
                if estimate >= *midpoint_count {
                    1
                } else {
                    -1
                }
            }
            Estimator::Constant { answer } => *answer,
        }
    }
}

/// Invert the occupancy of the shallowest low-occupancy level into an l0
/// estimate; +inf when every level is at least half full.
fn bucket_estimate(sketch: &RingVector, levels: usize, buckets: usize) -> f64 {
    let count_nonzero = |level: usize| -> usize {
        let start = level * buckets;
        (start..start + buckets)
            .filter(|&i| match sketch.ring() {
                Ring::Int => sketch.int_slice()[i] != 0,
                Ring::Fp(_) => sketch.fp_slice()[i] != 0,
                Ring::Real => sketch.real_slice()[i] != 0.0,
            })
            .count()
    };
    for level in 0..levels {
        let c = count_nonzero(level);
        if (c as f64) < buckets as f64 / 2.0 {
            if c == 0 {
                return 0.0;
            }
            // occupancy inversion: distinct items k throw ~k/2^l sampled
            // columns into `buckets` cells
            let b = buckets as f64;
            let k_sampled = (1.0 - c as f64 / b).ln() / (1.0 - 1.0 / b).ln();
            return k_sampled * (1u64 << (level + 1)) as f64;
        }
    }
    f64::INFINITY
}

/// The attacker-visible victim: query answers, a public gap promise, and a
/// query counter. The sketch matrix and the estimator stay hidden.
#[derive(Clone, Debug)]
pub struct SketchOracle {
    matrix: RingMatrix,
    estimator: Estimator,
    gap: GapSpec,
    query_count: u64,
    /// For the sampling victim: the observed coordinates, analyst-only.
    hidden_set: Option<Vec<usize>>,
    /// Compact per-column structure for fast bucket application.
    bucket_cols: Option<Vec<Vec<(usize, i64)>>>,
}

impl SketchOracle {
    pub fn n(&self) -> usize {
        self.matrix.cols()
    }

    pub fn r(&self) -> usize {
        self.matrix.rows()
    }

    pub fn ring(&self) -> Ring {
        self.matrix.ring()
    }

    pub fn gap(&self) -> GapSpec {
        self.gap
    }

    pub fn query_count(&self) -> u64 {
        self.query_count
    }

    /// Answer f(A, Ax) in {-1, +1} and count the query.
    pub fn query(&mut self, x: &RingVector) -> Result<i8> {
        if x.ring() != self.ring() {
            return Err(Error::RingMismatch {
                expected: self.ring().name(),
                got: x.ring().name(),
            });
        }
        if x.dim() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "query dim {} != n {}",
                x.dim(),
                self.n()
            )));
        }
        let sketch = self.apply_sketch(x)?;
        self.query_count += 1;
        Ok(self.estimator.answer(&sketch))
    }

    /// Ax, via the structure of the victim where possible. Always equal to
    /// the dense product; tests cross-check.
    fn apply_sketch(&self, x: &RingVector) -> Result<RingVector> {
        if let Some(hidden) = &self.hidden_set {
            return Ok(match self.ring() {
                Ring::Int => {
                    RingVector::from_int(hidden.iter().map(|&j| x.int_slice()[j]).collect())
                }
                Ring::Fp(p) => {
                    RingVector::from_fp(p, hidden.iter().map(|&j| x.fp_slice()[j]).collect())
                }
                Ring::Real => {
                    RingVector::from_real(hidden.iter().map(|&j| x.real_slice()[j]).collect())
                }
            });
        }
        if let Some(cols) = &self.bucket_cols {
            let rows = self.matrix.rows();
            return Ok(match self.ring() {
                Ring::Int => {
                    let mut acc = vec![0i128; rows];
                    for (j, entries) in cols.iter().enumerate() {
                        let xj = x.int_slice()[j];
                        if xj != 0 {
                            for &(row, coeff) in entries {
                                acc[row] += coeff as i128 * xj as i128;
                            }
                        }
                    }
                    RingVector::from_int(acc.into_iter().map(|v| v as i64).collect())
                }
                Ring::Fp(p) => {
                    let mut acc = vec![0u128; rows];
                    for (j, entries) in cols.iter().enumerate() {
                        let xj = x.fp_slice()[j];
                        if xj != 0 {
                            for &(row, coeff) in entries {
                                acc[row] += coeff as u128 * xj as u128;
                            }
                        }
                    }
                    RingVector::from_fp(p, acc.into_iter().map(|v| (v % p as u128) as u64).collect())
                }
                Ring::Real => {
                    let mut acc = vec![0.0f64; rows];
                    for (j, entries) in cols.iter().enumerate() {
                        let xj = x.real_slice()[j];
                        if xj != 0.0 {
                            for &(row, coeff) in entries {
                                acc[row] += coeff as f64 * xj;
                            }
                        }
                    }
                    RingVector::from_real(acc)
                }
            });
        }
        matvec(&self.matrix, x)
    }

    /// Analyst backdoor: the hidden sketch matrix. Test and audit use only.
    pub fn analyst_matrix(&self) -> &RingMatrix {
        &self.matrix
    }

    /// Analyst backdoor: the sampling victim's observed coordinates.
    pub fn analyst_hidden_set(&self) -> Option<&[usize]> {
        self.hidden_set.as_deref()
    }
}

/// Victim whose rows are r distinct random unit vectors; the estimator
/// thresholds the fraction of nonzero observed coordinates at the midpoint
/// of the gap fractions.
pub fn make_sampling_victim(
    n: usize,
    r: usize,
    ring: Ring,
    gap: GapSpec,
    seed: u64,
) -> Result<SketchOracle> {
    if r > n {
        return Err(Error::InvalidArgument(format!("r = {r} > n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(&mut rng);
    let mut hidden: Vec<usize> = all.into_iter().take(r).collect();
    hidden.sort_unstable();

    let mut matrix = RingMatrix::zeros(ring, r, n);
    for (row, &j) in hidden.iter().enumerate() {
        matrix.set_one(row, j);
    }
    let midpoint_fraction = gap.midpoint() / n as f64;
    Ok(SketchOracle {
        matrix,
        estimator: Estimator::ObservedFraction { midpoint_fraction },
        gap,
        query_count: 0,
        hidden_set: Some(hidden),
        bucket_cols: None,
    })
}

/// Simplified level-structured l0 victim: block l subsamples each column
/// with probability 2^-l and hashes sampled columns into `buckets` rows with
/// random nonzero coefficients.
pub fn make_bucket_victim(
    n: usize,
    levels: usize,
    buckets: usize,
    ring: Ring,
    gap: GapSpec,
    seed: u64,
) -> Result<SketchOracle> {
    if levels == 0 || buckets == 0 || levels * buckets > n {
        return Err(Error::InvalidArgument(format!(
            "degenerate bucket parameters: levels {levels} x buckets {buckets} vs n {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = levels * buckets;
    let mut cols: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
    for j in 0..n {
        for level in 0..levels {
            let rate = 0.5f64.powi(level as i32 + 1);
            if rng.gen::<f64>() < rate {
                let b = rng.gen_range(0..buckets);
                let coeff: i64 = match ring {
                    Ring::Int => {
                        let c = rng.gen_range(1..=8i64);
                        if rng.gen::<bool>() {
                            c
                        } else {
                            -c
                        }
                    }
                    Ring::Fp(p) => rng.gen_range(1..p) as i64,
                    Ring::Real => {
                        let c = rng.gen_range(1..=8i64);
                        if rng.gen::<bool>() {
                            c
                        } else {
                            -c
                        }
                    }
                };
                cols[j].push((level * buckets + b, coeff));
            }
        }
    }
    let matrix = match ring {
        Ring::Int => {
            let mut data = vec![vec![0i64; n]; rows];
            for (j, entries) in cols.iter().enumerate() {
                for &(row, coeff) in entries {
                    data[row][j] = coeff;
                }
            }
            RingMatrix::from_int_rows(data)?
        }
        Ring::Fp(p) => {
            let mut data = vec![vec![0u64; n]; rows];
            for (j, entries) in cols.iter().enumerate() {
                for &(row, coeff) in entries {
                    data[row][j] = coeff as u64 % p;
                }
            }
            RingMatrix::from_fp_rows(p, data)?
        }
        Ring::Real => {
            let mut data = vec![vec![0.0f64; n]; rows];
            for (j, entries) in cols.iter().enumerate() {
                for &(row, coeff) in entries {
                    data[row][j] = coeff as f64;
                }
            }
            RingMatrix::from_real_rows(data)?
        }
    };
    Ok(SketchOracle {
        matrix,
        estimator: Estimator::Bucket {
            levels,
            buckets,
            midpoint_count: gap.midpoint(),
        },
        gap,
        query_count: 0,
        hidden_set: None,
        bucket_cols: Some(cols),
    })
}

/// Victim with an arbitrary sketch matrix answering +1 iff the sketch has at
/// least `min_nonzero` nonzero entries. Deliberately leaky; used to exercise
/// column-search machinery against a known matrix.
pub fn make_sketch_nonzero_victim(
    matrix: RingMatrix,
    gap: GapSpec,
    min_nonzero: usize,
) -> Result<SketchOracle> {
    let r = matrix.rows().max(1);
    let midpoint_fraction = (min_nonzero as f64 - 0.5) / r as f64;
    Ok(SketchOracle {
        matrix,
        estimator: Estimator::ObservedFraction { midpoint_fraction },
        gap,
        query_count: 0,
        hidden_set: None,
        bucket_cols: None,
    })
}

/// Victim that ignores the sketch entirely; negative control.
pub fn make_constant_victim(n: usize, ring: Ring, gap: GapSpec, answer: i8) -> Result<SketchOracle> {
    if answer != 1 && answer != -1 {
        return Err(Error::InvalidArgument("answer must be +/-1".into()));
    }
    Ok(SketchOracle {
        matrix: RingMatrix::zeros(ring, 1, n),
        estimator: Estimator::Constant { answer },
        gap,
        query_count: 0,
        hidden_set: None,
        bucket_cols: None,
    })
}

// --- config wire format ---

/// Victim config: {"kind", "n", "r" | {"levels","buckets"}, "ring",
/// "theta_lo", "theta_hi", "seed"}; thresholds are absolute l0 counts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VictimConfig {
    pub kind: String,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buckets: Option<usize>,
    pub ring: String,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub seed: u64,
    /// Only for kind = "constant".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer: Option<i8>,
}

impl VictimConfig {
    pub fn build(&self) -> Result<SketchOracle> {
        let ring = Ring::parse(&self.ring)?;
        let gap = GapSpec::new(self.theta_lo, self.theta_hi)?;
        match self.kind.as_str() {
            "sampling" => {
                let r = self
                    .r
                    .ok_or_else(|| Error::ConfigValidation("sampling victim needs r".into()))?;
                make_sampling_victim(self.n, r, ring, gap, self.seed)
            }
            "bucket" => {
                let levels = self.levels.ok_or_else(|| {
                    Error::ConfigValidation("bucket victim needs levels".into())
                })?;
                let buckets = self.buckets.ok_or_else(|| {
                    Error::ConfigValidation("bucket victim needs buckets".into())
                })?;
                make_bucket_victim(self.n, levels, buckets, ring, gap, self.seed)
            }
            "constant" => make_constant_victim(self.n, ring, gap, self.answer.unwrap_or(1)),
            other => Err(Error::ConfigValidation(format!("unknown victim kind {other:?}"))),
        }
    }
}
