//! Ring-generic dense linear algebra shared by the attack and analysis modules.
//!
//! Matrices and vectors are tagged with a ring (integers, F_p for a prime p,
//! or reals). Integer arithmetic accumulates in `i128` so products of bounded
//! entries never wrap; F_p arithmetic keeps residues reduced.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default magnitude bound for integer entries.
pub const DEFAULT_INT_BOUND: i64 = 1 << 32;

/// Ring tag for matrices and vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ring {
    Int,
    /// Prime field F_p.
    Fp(u64),
    Real,
}

impl Ring {
    pub fn name(&self) -> String {
        match self {
            Ring::Int => "int".to_string(),
            Ring::Fp(p) => format!("fp:{p}"),
            Ring::Real => "real".to_string(),
        }
    }

    pub fn parse(s: &str) -> Result<Ring> {
        match s {
            "int" => Ok(Ring::Int),
            "real" => Ok(Ring::Real),
            _ => {
                if let Some(p) = s.strip_prefix("fp:") {
                    let p: u64 = p
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad ring tag {s:?}")))?;
                    if !is_prime(p) {
                        return Err(Error::InvalidArgument(format!("{p} is not prime")));
                    }
                    Ok(Ring::Fp(p))
                } else {
                    Err(Error::InvalidArgument(format!("bad ring tag {s:?}")))
                }
            }
        }
    }
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// A scalar in one of the supported rings, used for row-major storage.
#[derive(Clone, Debug, PartialEq)]
enum Storage {
    Int(Vec<i64>),
    Fp(Vec<u64>),
    Real(Vec<f64>),
}

/// Dense matrix tagged with a ring; entries stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RingMatrix {
    ring: Ring,
    rows: usize,
    cols: usize,
    data: Storage,
}

impl RingMatrix {
    pub fn zeros(ring: Ring, rows: usize, cols: usize) -> Self {
        let data = match ring {
            Ring::Int => Storage::Int(vec![0; rows * cols]),
            Ring::Fp(_) => Storage::Fp(vec![0; rows * cols]),
            Ring::Real => Storage::Real(vec![0.0; rows * cols]),
        };
        RingMatrix {
            ring,
            rows,
            cols,
            data,
        }
    }

    pub fn from_int_rows(rows: Vec<Vec<i64>>) -> Result<Self> {
        Self::from_int_rows_bounded(rows, DEFAULT_INT_BOUND)
    }

    pub fn from_int_rows_bounded(rows: Vec<Vec<i64>>, bound: i64) -> Result<Self> {
        let r = rows.len();
        let n = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch("ragged rows".into()));
            }
            for &v in row {
                if v.abs() > bound {
                    return Err(Error::InvalidArgument(format!(
                        "integer entry {v} exceeds magnitude bound {bound}"
                    )));
                }
                data.push(v);
            }
        }
        Ok(RingMatrix {
            ring: Ring::Int,
            rows: r,
            cols: n,
            data: Storage::Int(data),
        })
    }

    pub fn from_fp_rows(p: u64, rows: Vec<Vec<u64>>) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::InvalidArgument(format!("{p} is not prime")));
        }
        let r = rows.len();
        let n = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch("ragged rows".into()));
            }
            for &v in row {
                data.push(v % p);
            }
        }
        Ok(RingMatrix {
            ring: Ring::Fp(p),
            rows: r,
            cols: n,
            data: Storage::Fp(data),
        })
    }

    pub fn from_real_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let n = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch("ragged rows".into()));
            }
            data.extend_from_slice(row);
        }
        Ok(RingMatrix {
            ring: Ring::Real,
            rows: r,
            cols: n,
            data: Storage::Real(data),
        })
    }

    pub fn identity(ring: Ring, n: usize) -> Self {
        let mut m = Self::zeros(ring, n, n);
        for i in 0..n {
            m.set_one(i, i);
        }
        m
    }

    pub(crate) fn set_one(&mut self, i: usize, j: usize) {
        let idx = i * self.cols + j;
        match &mut self.data {
            Storage::Int(d) => d[idx] = 1,
            Storage::Fp(d) => d[idx] = 1,
            Storage::Real(d) => d[idx] = 1.0,
        }
    }

    pub fn ring(&self) -> Ring {
        self.ring
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn int_entry(&self, i: usize, j: usize) -> i64 {
        match &self.data {
            Storage::Int(d) => d[i * self.cols + j],
            _ => panic!("int_entry on non-int matrix"),
        }
    }

    pub fn fp_entry(&self, i: usize, j: usize) -> u64 {
        match &self.data {
            Storage::Fp(d) => d[i * self.cols + j],
            _ => panic!("fp_entry on non-fp matrix"),
        }
    }

    pub fn real_entry(&self, i: usize, j: usize) -> f64 {
        match &self.data {
            Storage::Real(d) => d[i * self.cols + j],
            _ => panic!("real_entry on non-real matrix"),
        }
    }

    pub fn int_row(&self, i: usize) -> &[i64] {
        match &self.data {
            Storage::Int(d) => &d[i * self.cols..(i + 1) * self.cols],
            _ => panic!("int_row on non-int matrix"),
        }
    }

    pub fn real_row(&self, i: usize) -> &[f64] {
        match &self.data {
            Storage::Real(d) => &d[i * self.cols..(i + 1) * self.cols],
            _ => panic!("real_row on non-real matrix"),
        }
    }

    pub fn fp_row(&self, i: usize) -> &[u64] {
        match &self.data {
            Storage::Fp(d) => &d[i * self.cols..(i + 1) * self.cols],
            _ => panic!("fp_row on non-fp matrix"),
        }
    }

    /// Zero out column `j` in place.
    pub fn zero_column(&mut self, j: usize) {
        for i in 0..self.rows {
            let idx = i * self.cols + j;
            match &mut self.data {
                Storage::Int(d) => d[idx] = 0,
                Storage::Fp(d) => d[idx] = 0,
                Storage::Real(d) => d[idx] = 0.0,
            }
        }
    }

    pub fn column_is_zero(&self, j: usize) -> bool {
        (0..self.rows).all(|i| match &self.data {
            Storage::Int(d) => d[i * self.cols + j] == 0,
            Storage::Fp(d) => d[i * self.cols + j] == 0,
            Storage::Real(d) => d[i * self.cols + j] == 0.0,
        })
    }

    /// Restriction of an F_p matrix to the given columns.
    pub fn fp_submatrix_cols(&self, cols: &[usize]) -> Result<RingMatrix> {
        let p = match self.ring {
            Ring::Fp(p) => p,
            _ => {
                return Err(Error::RingMismatch {
                    expected: "fp".into(),
                    got: self.ring.name(),
                })
            }
        };
        let mut rows = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            rows.push(cols.iter().map(|&j| self.fp_entry(i, j)).collect());
        }
        RingMatrix::from_fp_rows(p, rows)
    }
}

/// Dense vector tagged with a ring, with an optional support descriptor.
/// Entries outside the support are zero (checked at construction).
#[derive(Clone, Debug, PartialEq)]
pub struct RingVector {
    ring: Ring,
    dim: usize,
    data: Storage,
    support: Option<Vec<usize>>,
}

impl RingVector {
    pub fn from_int(v: Vec<i64>) -> Self {
        let dim = v.len();
        RingVector {
            ring: Ring::Int,
            dim,
            data: Storage::Int(v),
            support: None,
        }
    }

    pub fn from_fp(p: u64, v: Vec<u64>) -> Self {
        let dim = v.len();
        let v = v.into_iter().map(|x| x % p).collect();
        RingVector {
            ring: Ring::Fp(p),
            dim,
            data: Storage::Fp(v),
            support: None,
        }
    }

    pub fn from_real(v: Vec<f64>) -> Self {
        let dim = v.len();
        RingVector {
            ring: Ring::Real,
            dim,
            data: Storage::Real(v),
            support: None,
        }
    }

    /// Attach a support descriptor; entries off the support must be zero.
    pub fn with_support(mut self, mut support: Vec<usize>) -> Result<Self> {
        support.sort_unstable();
        support.dedup();
        let ok = (0..self.dim).all(|i| {
            support.binary_search(&i).is_ok() || {
                match &self.data {
                    Storage::Int(d) => d[i] == 0,
                    Storage::Fp(d) => d[i] == 0,
                    Storage::Real(d) => d[i] == 0.0,
                }
            }
        });
        if !ok {
            return Err(Error::InvalidArgument(
                "nonzero entry outside declared support".into(),
            ));
        }
        self.support = Some(support);
        Ok(self)
    }

    pub fn ring(&self) -> Ring {
        self.ring
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> Option<&[usize]> {
        self.support.as_deref()
    }

    pub fn int_slice(&self) -> &[i64] {
        match &self.data {
            Storage::Int(d) => d,
            _ => panic!("int_slice on non-int vector"),
        }
    }

    pub fn fp_slice(&self) -> &[u64] {
        match &self.data {
            Storage::Fp(d) => d,
            _ => panic!("fp_slice on non-fp vector"),
        }
    }

    pub fn real_slice(&self) -> &[f64] {
        match &self.data {
            Storage::Real(d) => d,
            _ => panic!("real_slice on non-real vector"),
        }
    }

    /// Number of nonzero entries.
    pub fn l0(&self) -> usize {
        match &self.data {
            Storage::Int(d) => d.iter().filter(|&&x| x != 0).count(),
            Storage::Fp(d) => d.iter().filter(|&&x| x != 0).count(),
            Storage::Real(d) => d.iter().filter(|&&x| x != 0.0).count(),
        }
    }
}

/// Fractional parts in (-1/2, 1/2]; ties at the half-integer boundary map to +1/2.
#[derive(Clone, Debug, PartialEq)]
pub struct FracVector {
    pub entries: Vec<f64>,
}

impl FracVector {
    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum()
    }
}

/// x minus its nearest integer, in (-1/2, 1/2]; halfway points round down so
/// the fractional part lands on +1/2.
pub fn frac_scalar(x: f64) -> f64 {
    let int = (x - 0.5).ceil();
    x - int
}

/// Exact fractional part of a rational, same tie rule as [`frac_scalar`].
pub fn frac_rational(x: &BigRational) -> BigRational {
    // nearest integer with ties toward -inf: ceil(x - 1/2)
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let int = (x - half).ceil();
    x - int
}

/// Entrywise fractional part of a real vector.
pub fn frac(v: &[f64]) -> Result<FracVector> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite entry".into()));
    }
    Ok(FracVector {
        entries: v.iter().map(|&x| frac_scalar(x)).collect(),
    })
}

fn mod_pow(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = ((acc as u128 * b as u128) % p as u128) as u64;
        }
        b = ((b as u128 * b as u128) % p as u128) as u64;
        e >>= 1;
    }
    acc
}

fn fp_inv(a: u64, p: u64) -> u64 {
    debug_assert!(a % p != 0);
    mod_pow(a, p - 2, p)
}

/// Exact matrix-vector product in the tagged ring.
pub fn matvec(a: &RingMatrix, x: &RingVector) -> Result<RingVector> {
    if a.ring != x.ring {
        return Err(Error::RingMismatch {
            expected: a.ring.name(),
            got: x.ring.name(),
        });
    }
    if a.cols != x.dim {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} cols, vector has dim {}",
            a.cols, x.dim
        )));
    }
    match (&a.data, &x.data) {
        (Storage::Int(_), Storage::Int(xv)) => {
            let mut out = Vec::with_capacity(a.rows);
            for i in 0..a.rows {
                let row = a.int_row(i);
                let mut acc: i128 = 0;
                match x.support() {
                    Some(sup) => {
                        for &j in sup {
                            acc = acc
                                .checked_add(row[j] as i128 * xv[j] as i128)
                                .ok_or_else(|| Error::InvalidArgument("overflow".into()))?;
                        }
                    }
                    None => {
                        for (aj, xj) in row.iter().zip(xv.iter()) {
                            acc = acc
                                .checked_add(*aj as i128 * *xj as i128)
                                .ok_or_else(|| Error::InvalidArgument("overflow".into()))?;
                        }
                    }
                }
                let v = i64::try_from(acc)
                    .map_err(|_| Error::InvalidArgument("sketch entry exceeds i64".into()))?;
                out.push(v);
            }
            Ok(RingVector::from_int(out))
        }
        (Storage::Fp(_), Storage::Fp(xv)) => {
            let p = match a.ring {
                Ring::Fp(p) => p,
                _ => unreachable!(),
            };
            let mut out = Vec::with_capacity(a.rows);
            for i in 0..a.rows {
                let row = a.fp_row(i);
                let mut acc: u128 = 0;
                match x.support() {
                    Some(sup) => {
                        for &j in sup {
                            acc += row[j] as u128 * xv[j] as u128;
                        }
                    }
                    None => {
                        for (aj, xj) in row.iter().zip(xv.iter()) {
                            acc += *aj as u128 * *xj as u128;
                        }
                    }
                }
                out.push((acc % p as u128) as u64);
            }
            Ok(RingVector::from_fp(p, out))
        }
        (Storage::Real(_), Storage::Real(xv)) => {
            let mut out = Vec::with_capacity(a.rows);
            for i in 0..a.rows {
                let row = a.real_row(i);
                let mut acc = 0.0;
                match x.support() {
                    Some(sup) => {
                        for &j in sup {
                            acc += row[j] * xv[j];
                        }
                    }
                    None => {
                        for (aj, xj) in row.iter().zip(xv.iter()) {
                            acc += aj * xj;
                        }
                    }
                }
                out.push(acc);
            }
            Ok(RingVector::from_real(out))
        }
        _ => unreachable!(),
    }
}

/// Matrix rank over F_p by exact Gaussian elimination.
pub fn rank_fp(a: &RingMatrix) -> Result<usize> {
    let p = match a.ring {
        Ring::Fp(p) => p,
        _ => {
            return Err(Error::RingMismatch {
                expected: "fp".into(),
                got: a.ring.name(),
            })
        }
    };
    let mut m: Vec<Vec<u64>> = (0..a.rows).map(|i| a.fp_row(i).to_vec()).collect();
    Ok(rank_fp_rows(&mut m, p))
}

fn rank_fp_rows(m: &mut [Vec<u64>], p: u64) -> usize {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for j in 0..cols {
        if rank == rows {
            break;
        }
        let Some(piv) = (rank..rows).find(|&i| m[i][j] != 0) else {
            continue;
        };
        m.swap(rank, piv);
        let inv = fp_inv(m[rank][j], p);
        for jj in j..cols {
            m[rank][jj] = ((m[rank][jj] as u128 * inv as u128) % p as u128) as u64;
        }
        for i in 0..rows {
            if i != rank && m[i][j] != 0 {
                let f = m[i][j];
                for jj in j..cols {
                    let sub = (f as u128 * m[rank][jj] as u128) % p as u128;
                    m[i][jj] = ((m[i][jj] as u128 + p as u128 - sub) % p as u128) as u64;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// One Gaussian-elimination kernel vector of an F_p matrix, if any exists.
pub fn kernel_vector_fp(a: &RingMatrix) -> Result<Option<RingVector>> {
    let p = match a.ring {
        Ring::Fp(p) => p,
        _ => {
            return Err(Error::RingMismatch {
                expected: "fp".into(),
                got: a.ring.name(),
            })
        }
    };
    let rows = a.rows;
    let cols = a.cols;
    let mut m: Vec<Vec<u64>> = (0..rows).map(|i| a.fp_row(i).to_vec()).collect();
    // reduced row echelon with pivot bookkeeping
    let mut pivot_col_of_row = vec![usize::MAX; rows];
    let mut rank = 0usize;
    for j in 0..cols {
        if rank == rows {
            break;
        }
        let Some(piv) = (rank..rows).find(|&i| m[i][j] != 0) else {
            continue;
        };
        m.swap(rank, piv);
        let inv = fp_inv(m[rank][j], p);
        for jj in 0..cols {
            m[rank][jj] = ((m[rank][jj] as u128 * inv as u128) % p as u128) as u64;
        }
        for i in 0..rows {
            if i != rank && m[i][j] != 0 {
                let f = m[i][j];
                for jj in 0..cols {
                    let sub = (f as u128 * m[rank][jj] as u128) % p as u128;
                    m[i][jj] = ((m[i][jj] as u128 + p as u128 - sub) % p as u128) as u64;
                }
            }
        }
        pivot_col_of_row[rank] = j;
        rank += 1;
    }
    let pivot_cols: Vec<usize> = pivot_col_of_row[..rank].to_vec();
    let Some(free_col) = (0..cols).find(|j| !pivot_cols.contains(j)) else {
        return Ok(None);
    };
    let mut v = vec![0u64; cols];
    v[free_col] = 1;
    for (row, &pc) in pivot_cols.iter().enumerate() {
        // x_pc = -m[row][free_col]
        v[pc] = (p - m[row][free_col] % p) % p;
    }
    Ok(Some(RingVector::from_fp(p, v)))
}

/// Leverage scores l_i = a_i^T (A A^T)^+ a_i of the columns of a real matrix,
/// via an eigendecomposition of the Gram matrix with relative cutoff
/// 1e-10 * ||A A^T||.
pub fn leverage_scores(a: &RingMatrix) -> Result<Vec<f64>> {
    if a.ring != Ring::Real {
        return Err(Error::RingMismatch {
            expected: "real".into(),
            got: a.ring.name(),
        });
    }
    let r = a.rows;
    let n = a.cols;
    if r == 0 || n == 0 {
        return Ok(vec![0.0; n]);
    }
    let mut gram = nalgebra::DMatrix::<f64>::zeros(r, r);
    for i in 0..r {
        for k in i..r {
            let mut acc = 0.0;
            let ri = a.real_row(i);
            let rk = a.real_row(k);
            for j in 0..n {
                acc += ri[j] * rk[j];
            }
            gram[(i, k)] = acc;
            gram[(k, i)] = acc;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(gram);
    let max_eig = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if max_eig <= 0.0 {
        return Err(Error::SingularMatrix("zero matrix has no leverage".into()));
    }
    let cutoff = 1e-10 * max_eig;
    // pinv = U diag(1/lambda) U^T over eigenvalues above the cutoff
    let kept: Vec<usize> = (0..r).filter(|&i| eig.eigenvalues[i] > cutoff).collect();
    let mut scores = Vec::with_capacity(n);
    for j in 0..n {
        let col: Vec<f64> = (0..r).map(|i| a.real_entry(i, j)).collect();
        let mut s = 0.0;
        for &k in &kept {
            let mut dot = 0.0;
            for i in 0..r {
                dot += eig.eigenvectors[(i, k)] * col[i];
            }
            s += dot * dot / eig.eigenvalues[k];
        }
        scores.push(s.clamp(0.0, 1.0));
    }
    Ok(scores)
}

/// Rank of a real matrix under the same eigenvalue cutoff as
/// [`leverage_scores`]; used to cross-check the sum rule.
pub fn real_rank(a: &RingMatrix) -> Result<usize> {
    if a.ring != Ring::Real {
        return Err(Error::RingMismatch {
            expected: "real".into(),
            got: a.ring.name(),
        });
    }
    let r = a.rows;
    let n = a.cols;
    let mut gram = nalgebra::DMatrix::<f64>::zeros(r, r);
    for i in 0..r {
        for k in i..r {
            let mut acc = 0.0;
            for j in 0..n {
                acc += a.real_entry(i, j) * a.real_entry(k, j);
            }
            gram[(i, k)] = acc;
            gram[(k, i)] = acc;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(gram);
    let max_eig = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if max_eig <= 0.0 {
        return Ok(0);
    }
    let cutoff = 1e-10 * max_eig;
    Ok(eig.eigenvalues.iter().filter(|&&l| l > cutoff).count())
}

// --- serde: {"ring": "int"|"fp:<p>"|"real", "rows": r, "cols": n, "data": [..]} ---

#[derive(Serialize, Deserialize)]
struct MatrixWire {
    ring: String,
    rows: usize,
    cols: usize,
    data: Vec<serde_json::Value>,
}

impl Serialize for RingMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let data: Vec<serde_json::Value> = match &self.data {
            Storage::Int(d) => d.iter().map(|&x| serde_json::json!(x)).collect(),
            Storage::Fp(d) => d.iter().map(|&x| serde_json::json!(x)).collect(),
            Storage::Real(d) => d.iter().map(|&x| serde_json::json!(x)).collect(),
        };
        MatrixWire {
            ring: self.ring.name(),
            rows: self.rows,
            cols: self.cols,
            data,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RingMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = MatrixWire::deserialize(d)?;
        let ring = Ring::parse(&wire.ring).map_err(D::Error::custom)?;
        if wire.data.len() != wire.rows * wire.cols {
            return Err(D::Error::custom("data length != rows*cols"));
        }
        let data = match ring {
            Ring::Int => Storage::Int(
                wire.data
                    .iter()
                    .map(|v| v.as_i64().ok_or_else(|| D::Error::custom("bad int entry")))
                    .collect::<std::result::Result<_, _>>()?,
            ),
            Ring::Fp(p) => Storage::Fp(
                wire.data
                    .iter()
                    .map(|v| {
                        v.as_u64()
                            .map(|x| x % p)
                            .ok_or_else(|| D::Error::custom("bad fp entry"))
                    })
                    .collect::<std::result::Result<_, _>>()?,
            ),
            Ring::Real => Storage::Real(
                wire.data
                    .iter()
                    .map(|v| v.as_f64().ok_or_else(|| D::Error::custom("bad real entry")))
                    .collect::<std::result::Result<_, _>>()?,
            ),
        };
        Ok(RingMatrix {
            ring,
            rows: wire.rows,
            cols: wire.cols,
            data,
        })
    }
}

/// Format a rational as a "num/den" string.
pub fn rational_to_string(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Parse a "num/den" (or bare integer) string into a rational.
pub fn rational_from_string(s: &str) -> Result<BigRational> {
    let parts: Vec<&str> = s.split('/').collect();
    let parse_int = |t: &str| -> Result<BigInt> {
        t.parse::<BigInt>()
            .map_err(|_| Error::InvalidArgument(format!("bad rational {s:?}")))
    };
    match parts.as_slice() {
        [num] => Ok(BigRational::from_integer(parse_int(num)?)),
        [num, den] => {
            let d = parse_int(den)?;
            if d.is_zero() {
                return Err(Error::InvalidArgument("zero denominator".into()));
            }
            Ok(BigRational::new(parse_int(num)?, d))
        }
        _ => Err(Error::InvalidArgument(format!("bad rational {s:?}"))),
    }
}

/// Round a rational to the nearest f64 (good enough for sampling tables).
pub fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        let n = q.numer().to_f64().unwrap_or(if q.numer().is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        });
        let d = q.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::FromPrimitive;

    #[test]
    fn matvec_identity_int() {
        let a = RingMatrix::identity(Ring::Int, 3);
        let x = RingVector::from_int(vec![5, -2, 0]);
        let y = matvec(&a, &x).unwrap();
        assert_eq!(y.int_slice(), &[5, -2, 0]);
    }

    #[test]
    fn matvec_fp_example() {
        let a = RingMatrix::from_fp_rows(3, vec![vec![1, 1], vec![0, 1]]).unwrap();
        let x = RingVector::from_fp(3, vec![2, 2]);
        let y = matvec(&a, &x).unwrap();
        assert_eq!(y.fp_slice(), &[1, 2]);
    }

    #[test]
    fn matvec_unit_vector_selects_column() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<i64>> = (0..4)
            .map(|_| (0..8).map(|_| rng.gen_range(-50..50)).collect())
            .collect();
        let a = RingMatrix::from_int_rows(rows.clone()).unwrap();
        let j = 5;
        let mut xv = vec![0i64; 8];
        xv[j] = 1;
        let x = RingVector::from_int(xv);
        let y = matvec(&a, &x).unwrap();
        let col: Vec<i64> = rows.iter().map(|r| r[j]).collect();
        assert_eq!(y.int_slice(), col.as_slice());
    }

    #[test]
    fn matvec_rejects_mismatch() {
        let a = RingMatrix::identity(Ring::Int, 3);
        let x = RingVector::from_int(vec![1, 2]);
        assert!(matvec(&a, &x).is_err());
        let x = RingVector::from_fp(5, vec![1, 2, 3]);
        assert!(matvec(&a, &x).is_err());
    }

    #[test]
    fn rank_fp_examples() {
        let id = RingMatrix::identity(Ring::Fp(5), 3);
        assert_eq!(rank_fp(&id).unwrap(), 3);
        let zero = RingMatrix::zeros(Ring::Fp(5), 3, 3);
        assert_eq!(rank_fp(&zero).unwrap(), 0);
        // row 2 = 2 * row 1
        let a = RingMatrix::from_fp_rows(7, vec![vec![1, 2], vec![2, 4]]).unwrap();
        assert_eq!(rank_fp(&a).unwrap(), 1);
    }

    #[test]
    fn rank_fp_rejects_non_fp() {
        let a = RingMatrix::identity(Ring::Int, 2);
        assert!(rank_fp(&a).is_err());
    }

    #[test]
    fn frac_examples() {
        let f = frac(&[0.3, -0.3, 2.5]).unwrap();
        assert_eq!(f.entries, vec![0.3, -0.3, 0.5]);
        let f = frac(&[1.0, -3.0, 0.0]).unwrap();
        assert_eq!(f.entries, vec![0.0, 0.0, 0.0]);
        let f = frac(&[1.75]).unwrap();
        assert_eq!(f.entries, vec![-0.25]);
        assert!(frac(&[f64::NAN]).is_err());
    }

    #[test]
    fn frac_rational_tie_rule() {
        let half = BigRational::new(BigInt::from(5), BigInt::from(2)); // 2.5
        assert_eq!(
            frac_rational(&half),
            BigRational::new(BigInt::from(1), BigInt::from(2))
        );
        let neg = BigRational::new(BigInt::from(-5), BigInt::from(2)); // -2.5
        assert_eq!(
            frac_rational(&neg),
            BigRational::new(BigInt::from(1), BigInt::from(2))
        );
        let q = BigRational::from_f64(1.75).unwrap();
        assert_eq!(frac_rational(&q), BigRational::from_f64(-0.25).unwrap());
    }

    #[test]
    fn leverage_examples() {
        let a = RingMatrix::identity(Ring::Real, 3);
        let l = leverage_scores(&a).unwrap();
        for x in l {
            assert!((x - 1.0).abs() < 1e-12);
        }
        let a = RingMatrix::from_real_rows(vec![vec![1.0, 1.0, 1.0, 1.0]]).unwrap();
        let l = leverage_scores(&a).unwrap();
        for x in l {
            assert!((x - 0.25).abs() < 1e-12);
        }
        let a = RingMatrix::from_real_rows(vec![vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let l = leverage_scores(&a).unwrap();
        assert!((l[0] - 0.5).abs() < 1e-12);
        assert!((l[1] - 0.5).abs() < 1e-12);
        assert!((l[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn leverage_sums_to_rank() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let r = rng.gen_range(1..5);
            let n = rng.gen_range(r..12);
            let rows: Vec<Vec<f64>> = (0..r)
                .map(|_| (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect())
                .collect();
            let a = RingMatrix::from_real_rows(rows).unwrap();
            let l = leverage_scores(&a).unwrap();
            let rank = real_rank(&a).unwrap();
            let sum: f64 = l.iter().sum();
            assert!(
                (sum - rank as f64).abs() <= 1e-6,
                "sum {sum} vs rank {rank}"
            );
            for x in l {
                assert!((-1e-12..=1.0 + 1e-12).contains(&x));
            }
        }
    }

    #[test]
    fn kernel_vector_is_in_kernel() {
        let a = RingMatrix::from_fp_rows(5, vec![vec![1, 2, 3], vec![0, 1, 4]]).unwrap();
        let k = kernel_vector_fp(&a).unwrap().unwrap();
        let y = matvec(&a, &k).unwrap();
        assert!(y.fp_slice().iter().all(|&x| x == 0));
        assert!(k.fp_slice().iter().any(|&x| x != 0));
    }

    #[test]
    fn matrix_json_roundtrip() {
        let a = RingMatrix::from_fp_rows(7, vec![vec![1, 2], vec![3, 4]]).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        assert!(s.contains("\"fp:7\""));
        let b: RingMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn support_descriptor_enforced() {
        let v = RingVector::from_int(vec![0, 5, 0, 1]);
        assert!(v.clone().with_support(vec![1, 3]).is_ok());
        assert!(v.with_support(vec![1]).is_err());
    }

    #[test]
    fn rank_matches_greedy_independent_set_both_orders() {
        use rand::{Rng, SeedableRng};
        let p = 7u64;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let rows = rng.gen_range(1..4);
            let cols = rng.gen_range(1..7);
            let data: Vec<Vec<u64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.gen_range(0..p)).collect())
                .collect();
            let a = RingMatrix::from_fp_rows(p, data.clone()).unwrap();
            let rank = rank_fp(&a).unwrap();
            let greedy = |order: Vec<usize>| {
                let mut kept: Vec<usize> = Vec::new();
                for j in order {
                    let mut cand = kept.clone();
                    cand.push(j);
                    let sub = a.fp_submatrix_cols(&cand).unwrap();
                    if rank_fp(&sub).unwrap() == cand.len() {
                        kept = cand;
                    }
                }
                kept.len()
            };
            let fwd = greedy((0..cols).collect());
            let rev = greedy((0..cols).rev().collect());
            assert_eq!(fwd, rank);
            assert_eq!(rev, rank);
        }
    }

    #[test]
    fn zero_matrix_has_no_leverage() {
        let a = RingMatrix::zeros(Ring::Real, 2, 3);
        assert!(leverage_scores(&a).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn matvec_is_linear_over_int(
                entries in proptest::collection::vec(-50i64..50, 12),
                xs in proptest::collection::vec(-9i64..9, 4),
                ys in proptest::collection::vec(-9i64..9, 4),
            ) {
                let rows: Vec<Vec<i64>> = entries.chunks(4).map(|c| c.to_vec()).collect();
                let a = RingMatrix::from_int_rows(rows).unwrap();
                let x = RingVector::from_int(xs.clone());
                let y = RingVector::from_int(ys.clone());
                let sum = RingVector::from_int(
                    xs.iter().zip(&ys).map(|(a, b)| a + b).collect(),
                );
                let lhs = matvec(&a, &sum).unwrap();
                let ax = matvec(&a, &x).unwrap();
                let ay = matvec(&a, &y).unwrap();
                let rhs: Vec<i64> = ax
                    .int_slice()
                    .iter()
                    .zip(ay.int_slice())
                    .map(|(u, v)| u + v)
                    .collect();
                prop_assert_eq!(lhs.int_slice(), rhs.as_slice());
            }

            #[test]
            fn matvec_is_linear_over_fp(
                entries in proptest::collection::vec(0u64..11, 12),
                xs in proptest::collection::vec(0u64..11, 4),
                ys in proptest::collection::vec(0u64..11, 4),
            ) {
                let p = 11u64;
                let rows: Vec<Vec<u64>> = entries.chunks(4).map(|c| c.to_vec()).collect();
                let a = RingMatrix::from_fp_rows(p, rows).unwrap();
                let x = RingVector::from_fp(p, xs.clone());
                let y = RingVector::from_fp(p, ys.clone());
                let sum = RingVector::from_fp(
                    p,
                    xs.iter().zip(&ys).map(|(a, b)| (a + b) % p).collect(),
                );
                let lhs = matvec(&a, &sum).unwrap();
                let ax = matvec(&a, &x).unwrap();
                let ay = matvec(&a, &y).unwrap();
                let rhs: Vec<u64> = ax
                    .fp_slice()
                    .iter()
                    .zip(ay.fp_slice())
                    .map(|(u, v)| (u + v) % p)
                    .collect();
                prop_assert_eq!(lhs.fp_slice(), rhs.as_slice());
            }

            #[test]
            fn frac_plus_nearest_integer_reconstructs(x in -1e6f64..1e6) {
                let f = frac_scalar(x);
                prop_assert!(f > -0.5 && f <= 0.5);
                let nearest = x - f;
                prop_assert_eq!(nearest.fract(), 0.0);
                let back = nearest + f;
                prop_assert!((back - x).abs() <= x.abs().max(1.0) * f64::EPSILON);
            }
        }
    }
}
