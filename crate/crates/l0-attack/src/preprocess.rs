//! Analysis-side sketch decomposition: significant-coordinate detection via
//! fractional-part heaviness, the dense/sparse split, and exact micro-scale
//! verification of the pushforward total-variation claim.
//!
//! The attacks never call any of this at attack time; the decomposition
//! exists so the dense remainder's behaviour can be checked directly.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::MomentFamily;
use crate::linalg::{
    frac, frac_rational, rational_from_string, rational_to_string, Ring, RingMatrix,
};

/// A candidate witness direction y; rational entries get exact arithmetic,
/// real entries get floats with tolerance 1e-9.
#[derive(Clone, Debug)]
pub enum Witness {
    Rational(Vec<BigRational>),
    Real(Vec<f64>),
}

impl Witness {
    fn len(&self) -> usize {
        match self {
            Witness::Rational(v) => v.len(),
            Witness::Real(v) => v.len(),
        }
    }

    pub fn to_strings(&self) -> Vec<String> {
        match self {
            Witness::Rational(v) => v.iter().map(rational_to_string).collect(),
            Witness::Real(v) => v.iter().map(|x| format!("{x}")).collect(),
        }
    }

    pub fn from_strings(strings: &[String]) -> Result<Witness> {
        let v: Result<Vec<BigRational>> = strings.iter().map(|s| rational_from_string(s)).collect();
        Ok(Witness::Rational(v?))
    }
}

const REAL_WITNESS_TOL: f64 = 1e-9;

/// True iff |Frac((y^T A)_j)|^2 >= (1/s) ||Frac(y^T A)||^2; a zero fractional
/// vector certifies nothing.
pub fn check_witness(a: &RingMatrix, y: &Witness, j: usize, s: f64) -> Result<bool> {
    if s < 1.0 {
        return Err(Error::InvalidArgument(format!("s = {s} must be >= 1")));
    }
    if y.len() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "witness dim {} != rows {}",
            y.len(),
            a.rows()
        )));
    }
    if j >= a.cols() {
        return Err(Error::DimensionMismatch(format!(
            "column {j} out of range {}",
            a.cols()
        )));
    }
    match (a.ring(), y) {
        (Ring::Int, Witness::Rational(yv)) => {
            let s_exact = BigRational::from_f64(s)
                .ok_or_else(|| Error::InvalidArgument("non-finite s".into()))?;
            let mut target = BigRational::zero();
            let mut norm = BigRational::zero();
            for col in 0..a.cols() {
                let mut dot = BigRational::zero();
                for (row, yr) in yv.iter().enumerate() {
                    if !yr.is_zero() {
                        let e = a.int_entry(row, col);
                        if e != 0 {
                            dot += yr * BigRational::from_integer(BigInt::from(e));
                        }
                    }
                }
                let f = frac_rational(&dot);
                let fsq = &f * &f;
                if col == j {
                    target = fsq.clone();
                }
                norm += fsq;
            }
            if norm.is_zero() {
                return Ok(false);
            }
            Ok(&s_exact * &target >= norm)
        }
        (Ring::Real, Witness::Real(yv)) | (Ring::Int, Witness::Real(yv)) => {
            let mut prod = vec![0.0f64; a.cols()];
            for col in 0..a.cols() {
                let mut dot = 0.0;
                for (row, yr) in yv.iter().enumerate() {
                    let e = match a.ring() {
                        Ring::Int => a.int_entry(row, col) as f64,
                        Ring::Real => a.real_entry(row, col),
                        Ring::Fp(_) => unreachable!(),
                    };
                    dot += yr * e;
                }
                prod[col] = dot;
            }
            let f = frac(&prod)?;
            let norm = f.norm_sq();
            if norm == 0.0 {
                return Ok(false);
            }
            let target = f.entries[j] * f.entries[j];
            Ok(s * target + REAL_WITNESS_TOL >= norm)
        }
        (Ring::Real, Witness::Rational(yv)) => {
            let yf: Vec<f64> = yv
                .iter()
                .map(|q| q.to_f64().unwrap_or(f64::NAN))
                .collect();
            check_witness(a, &Witness::Real(yf), j, s)
        }
        (Ring::Fp(_), _) => Err(Error::RingMismatch {
            expected: "int or real".into(),
            got: a.ring().name(),
        }),
    }
}

/// Best-effort search for a witness certifying column `j` at heaviness 1/s.
/// Tries reciprocal-scaled single rows, random two-row rational combinations
/// with small denominators, then a scaling refinement of the best candidate.
/// Absence of a returned witness proves nothing.
pub fn search_witness<R: Rng>(
    a: &RingMatrix,
    j: usize,
    s: f64,
    budget: usize,
    rng: &mut R,
) -> Result<Option<Witness>> {
    if a.ring() != Ring::Int {
        return Err(Error::RingMismatch {
            expected: "int".into(),
            got: a.ring().name(),
        });
    }
    let rows = a.rows();
    let mut best: Option<(BigRational, Vec<BigRational>)> = None;
    let consider = |y: Vec<BigRational>,
                        best: &mut Option<(BigRational, Vec<BigRational>)>|
     -> Result<Option<Witness>> {
        let (ratio, hit) = heaviness_ratio(a, &y, j, s)?;
        if hit {
            return Ok(Some(Witness::Rational(y)));
        }
        if let Some(r) = &ratio {
            if best.as_ref().map_or(true, |(b, _)| r > b) {
                *best = Some((r.clone(), y));
            }
        }
        Ok(None)
    };

    // (a) single rows scaled by reciprocals (and half-reciprocals) of their
    // entry magnitudes
    for row in 0..rows {
        let mut mags: Vec<i64> = a.int_row(row).iter().map(|e| e.abs()).filter(|&e| e != 0).collect();
        mags.sort_unstable();
        mags.dedup();
        for m in mags {
            for den in [m, 2 * m] {
                let mut y = vec![BigRational::zero(); rows];
                y[row] = BigRational::new(BigInt::from(1), BigInt::from(den));
                if let Some(w) = consider(y, &mut best)? {
                    return Ok(Some(w));
                }
            }
        }
    }

    // (b) random rational combinations of at most two rows, denominators <= 64
    for _ in 0..budget {
        let mut y = vec![BigRational::zero(); rows];
        let k1 = rng.gen_range(0..rows);
        y[k1] = BigRational::new(
            BigInt::from(rng.gen_range(-8i64..=8).max(1)),
            BigInt::from(rng.gen_range(2i64..=64)),
        );
        if rows > 1 && rng.gen::<bool>() {
            let mut k2 = rng.gen_range(0..rows);
            if k2 == k1 {
                k2 = (k2 + 1) % rows;
            }
            y[k2] = BigRational::new(
                BigInt::from(rng.gen_range(-8i64..=8).max(1)),
                BigInt::from(rng.gen_range(2i64..=64)),
            );
        }
        if let Some(w) = consider(y, &mut best)? {
            return Ok(Some(w));
        }
    }

    // (c) scaling refinement of the best near-miss
    if let Some((_, y)) = best {
        for num in 1i64..=4 {
            for den in 2i64..=8 {
                let scale = BigRational::new(BigInt::from(num), BigInt::from(den));
                let scaled: Vec<BigRational> = y.iter().map(|q| q * &scale).collect();
                if check_witness(a, &Witness::Rational(scaled.clone()), j, s)? {
                    return Ok(Some(Witness::Rational(scaled)));
                }
            }
        }
    }
    Ok(None)
}

/// Ratio |Frac_j|^2 / ((1/s)||Frac||^2) for ranking candidates, plus whether
/// the witness already certifies.
fn heaviness_ratio(
    a: &RingMatrix,
    y: &[BigRational],
    j: usize,
    s: f64,
) -> Result<(Option<BigRational>, bool)> {
    let s_exact =
        BigRational::from_f64(s).ok_or_else(|| Error::InvalidArgument("non-finite s".into()))?;
    let mut target = BigRational::zero();
    let mut norm = BigRational::zero();
    for col in 0..a.cols() {
        let mut dot = BigRational::zero();
        for (row, yr) in y.iter().enumerate() {
            if !yr.is_zero() {
                let e = a.int_entry(row, col);
                if e != 0 {
                    dot += yr * BigRational::from_integer(BigInt::from(e));
                }
            }
        }
        let f = frac_rational(&dot);
        let fsq = &f * &f;
        if col == j {
            target = fsq.clone();
        }
        norm += fsq;
    }
    if norm.is_zero() {
        return Ok((None, false));
    }
    let lhs = &s_exact * &target;
    let hit = lhs >= norm;
    Ok((Some(lhs / norm), hit))
}

/// One column removal: the round index, the zeroed column, and the witness
/// that certified it against the intermediate matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RemovalStep {
    pub round: usize,
    pub column: usize,
    pub witness: Vec<String>,
}

/// The dense/sparse split of a sketching matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Decomposition {
    /// Dense part: the input with every significant column zeroed.
    pub dense: RingMatrix,
    /// Unit-row column indices, in removal order (the sparse part).
    pub unit_rows: Vec<usize>,
    /// Set of significant columns.
    pub significant: Vec<usize>,
    pub s_param: f64,
    pub removal_log: Vec<RemovalStep>,
    /// Set when the removal count exceeds c_T * r * s * log n * log s.
    pub bound_exceeded: bool,
}

/// How `decompose` obtains witnesses.
pub enum WitnessSource {
    /// Heuristic search with the given per-column candidate budget and seed.
    Search { budget: usize, seed: u64 },
    /// Externally supplied (column, witness) list, consumed in order.
    Supplied(Vec<(usize, Witness)>),
}

/// Iteratively zero certified-heavy columns, appending a unit row per
/// removal, until no witness is found.
pub fn decompose(a: &RingMatrix, s: f64, source: WitnessSource) -> Result<Decomposition> {
    decompose_with_bound(a, s, source, 1.0)
}

pub fn decompose_with_bound(
    a: &RingMatrix,
    s: f64,
    source: WitnessSource,
    c_t: f64,
) -> Result<Decomposition> {
    if a.ring() != Ring::Int {
        return Err(Error::RingMismatch {
            expected: "int".into(),
            got: a.ring().name(),
        });
    }
    let mut working = a.clone();
    let mut unit_rows = Vec::new();
    let mut removal_log = Vec::new();
    match source {
        WitnessSource::Search { budget, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut round = 1;
            loop {
                let mut found = None;
                for j in 0..working.cols() {
                    if working.column_is_zero(j) {
                        continue;
                    }
                    if let Some(w) = search_witness(&working, j, s, budget, &mut rng)? {
                        found = Some((j, w));
                        break;
                    }
                }
                let Some((j, w)) = found else { break };
                removal_log.push(RemovalStep {
                    round,
                    column: j,
                    witness: w.to_strings(),
                });
                unit_rows.push(j);
                working.zero_column(j);
                round += 1;
                if round > a.cols() + 1 {
                    return Err(Error::InvalidArgument(
                        "removal loop exceeded column count".into(),
                    ));
                }
            }
        }
        WitnessSource::Supplied(list) => {
            for (round, (j, w)) in list.into_iter().enumerate() {
                if !check_witness(&working, &w, j, s)? {
                    return Err(Error::InvalidArgument(format!(
                        "supplied witness for column {j} does not certify"
                    )));
                }
                removal_log.push(RemovalStep {
                    round: round + 1,
                    column: j,
                    witness: w.to_strings(),
                });
                unit_rows.push(j);
                working.zero_column(j);
            }
        }
    }
    let mut significant = unit_rows.clone();
    significant.sort_unstable();
    significant.dedup();
    let r = a.rows() as f64;
    let n = a.cols() as f64;
    let bound = c_t * r * s * n.ln().max(1.0) * s.ln().max(1.0);
    let bound_exceeded = (unit_rows.len() as f64) > bound;
    let decomp = Decomposition {
        dense: working,
        unit_rows,
        significant,
        s_param: s,
        removal_log,
        bound_exceeded,
    };
    decomp.verify(a)?;
    Ok(decomp)
}

impl Decomposition {
    /// Replay the removal log from the original matrix and re-check every
    /// logged witness against its recorded intermediate state.
    pub fn verify(&self, original: &RingMatrix) -> Result<()> {
        let mut working = original.clone();
        for step in &self.removal_log {
            let w = Witness::from_strings(&step.witness)?;
            if !check_witness(&working, &w, step.column, self.s_param)? {
                return Err(Error::InvalidArgument(format!(
                    "witness for round {} no longer certifies column {}",
                    step.round, step.column
                )));
            }
            working.zero_column(step.column);
        }
        if working != self.dense {
            return Err(Error::InvalidArgument(
                "replaying the removal log does not reproduce the dense part".into(),
            ));
        }
        // unit rows hit distinct columns, disjoint from the dense support
        let mut seen = std::collections::BTreeSet::new();
        for &j in &self.unit_rows {
            if !seen.insert(j) {
                return Err(Error::InvalidArgument(format!(
                    "column {j} removed twice"
                )));
            }
            if !self.dense.column_is_zero(j) {
                return Err(Error::InvalidArgument(format!(
                    "significant column {j} not zeroed in the dense part"
                )));
            }
        }
        Ok(())
    }
}

/// Exact pushforward total variation || D x_p - D x_q ||_tv at micro scale,
/// by column-wise convolution of the exact per-coordinate pmfs (equivalent
/// to enumerating all of {-R..R}^n, but factored through partial sums).
pub fn exact_pushforward_tv(
    d: &RingMatrix,
    fam: &MomentFamily,
    p: &BigRational,
    q: &BigRational,
) -> Result<f64> {
    exact_pushforward_tv_exact(d, fam, p, q).map(|tv| crate::linalg::rational_to_f64(&tv))
}

const PUSHFORWARD_STATE_CAP: u128 = 10_000_000;

pub fn exact_pushforward_tv_exact(
    d: &RingMatrix,
    fam: &MomentFamily,
    p: &BigRational,
    q: &BigRational,
) -> Result<BigRational> {
    if d.ring() != Ring::Int {
        return Err(Error::RingMismatch {
            expected: "int".into(),
            got: d.ring().name(),
        });
    }
    let radius = fam.support_radius as i64;
    // cost guard: the reachable partial-sum box per row
    let mut bound: u128 = 1;
    for i in 0..d.rows() {
        let row_mass: u128 = d.int_row(i).iter().map(|e| e.unsigned_abs() as u128).sum();
        bound = bound.saturating_mul(2 * row_mass * radius as u128 + 1);
        if bound > PUSHFORWARD_STATE_CAP {
            return Err(Error::StateSpaceTooLarge(format!(
                "pushforward state bound exceeds {PUSHFORWARD_STATE_CAP}"
            )));
        }
    }
    // per-point masses for both parameters over the shared support
    let mut support: Vec<(i64, BigRational, BigRational)> = Vec::new();
    for i in -radius..=radius {
        let mp = fam.pmf(p, i)?;
        let mq = fam.pmf(q, i)?;
        if !mp.is_zero() || !mq.is_zero() {
            support.push((i, mp, mq));
        }
    }
    let mut states: BTreeMap<Vec<i64>, (BigRational, BigRational)> = BTreeMap::new();
    states.insert(
        vec![0i64; d.rows()],
        (BigRational::from_integer(BigInt::from(1)), BigRational::from_integer(BigInt::from(1))),
    );
    for col in 0..d.cols() {
        let column: Vec<i64> = (0..d.rows()).map(|i| d.int_entry(i, col)).collect();
        if column.iter().all(|&e| e == 0) {
            continue;
        }
        let mut next: BTreeMap<Vec<i64>, (BigRational, BigRational)> = BTreeMap::new();
        for (state, (wp, wq)) in &states {
            for (x, mp, mq) in &support {
                let mut shifted = state.clone();
                for (si, &e) in shifted.iter_mut().zip(column.iter()) {
                    *si += e * x;
                }
                let entry = next
                    .entry(shifted)
                    .or_insert_with(|| (BigRational::zero(), BigRational::zero()));
                entry.0 += wp * mp;
                entry.1 += wq * mq;
            }
        }
        states = next;
        if states.len() as u128 > PUSHFORWARD_STATE_CAP {
            return Err(Error::StateSpaceTooLarge(format!(
                "pushforward grew past {PUSHFORWARD_STATE_CAP} states"
            )));
        }
    }
    let mut tv = BigRational::zero();
    for (wp, wq) in states.values() {
        tv += (wp - wq).abs();
    }
    Ok(tv / BigRational::from_integer(BigInt::from(2)))
}
