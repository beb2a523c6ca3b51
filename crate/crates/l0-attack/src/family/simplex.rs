//! Exact-rational l1 minimization for the weight vector behind the hard
//! distribution family.
//!
//! Solves  min sum_{i=1}^{R} |u_i|  subject to  sum_i u_i * i^t = b_t for
//! t = 0..=K, by revised simplex on the sign-split LP. The constraint count
//! K+2 is tiny, so basis solves stay cheap even in exact arithmetic; Bland's
//! rule guarantees termination.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// min sum |u_i| over i in 1..=r subject to sum_i u_i * i^t = rhs[t],
/// t = 0..rhs.len(). Returns the optimal u (length r, index i-1 holds u_i).
pub fn min_l1_with_moments(r: usize, rhs: &[BigRational]) -> Result<Vec<BigRational>> {
    let m = rhs.len();
    if r < m {
        return Err(Error::InvalidArgument(
            "fewer variables than moment constraints".into(),
        ));
    }
    // Column j of the constraint matrix for variable u_i (split into
    // u+ = 2(i-1), u- = 2(i-1)+1) is +/- (i^0, i^1, ..., i^{m-1}).
    let powers: Vec<Vec<BigRational>> = (1..=r)
        .map(|i| {
            let mut col = Vec::with_capacity(m);
            let mut acc = BigRational::one();
            let base = BigRational::from_integer(BigInt::from(i));
            for _ in 0..m {
                col.push(acc.clone());
                acc *= &base;
            }
            col
        })
        .collect();

    let column = |var: usize| -> Vec<BigRational> {
        let i = var / 2; // 0-based point index
        if var % 2 == 0 {
            powers[i].clone()
        } else {
            powers[i].iter().map(|x| -x).collect()
        }
    };

    // Initial basis: the m largest points, signs fixed after solving.
    let init_points: Vec<usize> = (r - m..r).collect();
    let mut mat: Vec<Vec<BigRational>> = (0..m)
        .map(|t| init_points.iter().map(|&i| powers[i][t].clone()).collect())
        .collect();
    let vals = solve_square(&mut mat, rhs)?;
    let mut basis: Vec<usize> = Vec::with_capacity(m);
    for (k, &i) in init_points.iter().enumerate() {
        if vals[k].is_negative() {
            basis.push(2 * i + 1);
        } else {
            basis.push(2 * i);
        }
    }

    let max_iters = 200 * (r + m) + 1000;
    for _ in 0..max_iters {
        // basis matrix and current basic solution
        let bcols: Vec<Vec<BigRational>> = basis.iter().map(|&v| column(v)).collect();
        let mut bmat: Vec<Vec<BigRational>> =
            (0..m).map(|t| (0..m).map(|k| bcols[k][t].clone()).collect()).collect();
        let xb = solve_square(&mut bmat.clone(), rhs)?;
        debug_assert!(xb.iter().all(|x| !x.is_negative()));

        // dual: solve B^T y = 1 (all basic costs are 1)
        let ones = vec![BigRational::one(); m];
        let mut bt: Vec<Vec<BigRational>> =
            (0..m).map(|t| (0..m).map(|k| bmat[k][t].clone()).collect()).collect();
        let y = solve_square(&mut bt, &ones)?;

        // entering variable: reduced cost 1 -/+ <y, powers[i]> < 0, Bland order
        let one = BigRational::one();
        let mut entering = None;
        'scan: for i in 0..r {
            let mut dot = BigRational::zero();
            for t in 0..m {
                dot += &y[t] * &powers[i][t];
            }
            for var in [2 * i, 2 * i + 1] {
                if basis.contains(&var) {
                    continue;
                }
                let red = if var % 2 == 0 { &one - &dot } else { &one + &dot };
                if red.is_negative() {
                    entering = Some(var);
                    break 'scan;
                }
            }
        }
        let Some(enter) = entering else {
            // optimal: read off u from the basis
            let mut u = vec![BigRational::zero(); r];
            for (k, &var) in basis.iter().enumerate() {
                let i = var / 2;
                if var % 2 == 0 {
                    u[i] = xb[k].clone();
                } else {
                    u[i] = -xb[k].clone();
                }
            }
            return Ok(u);
        };

        // direction d = B^{-1} a_enter; ratio test with Bland tie-break
        let a_enter = column(enter);
        let d = solve_square(&mut bmat, &a_enter)?;
        let mut leave: Option<(usize, BigRational)> = None;
        for k in 0..m {
            if d[k].is_positive() {
                let ratio = &xb[k] / &d[k];
                let better = match &leave {
                    None => true,
                    Some((lk, lr)) => ratio < *lr || (ratio == *lr && basis[k] < basis[*lk]),
                };
                if better {
                    leave = Some((k, ratio));
                }
            }
        }
        let Some((lk, _)) = leave else {
            return Err(Error::InvalidArgument("l1 LP unbounded".into()));
        };
        basis[lk] = enter;
    }
    Err(Error::InvalidArgument("simplex iteration cap reached".into()))
}

/// Solve an m x m rational system in place (Gaussian elimination with the
/// first nonzero pivot). Errors on a singular matrix.
fn solve_square(mat: &mut [Vec<BigRational>], rhs: &[BigRational]) -> Result<Vec<BigRational>> {
    let m = mat.len();
    let mut b = rhs.to_vec();
    for col in 0..m {
        let piv = (col..m)
            .find(|&k| !mat[k][col].is_zero())
            .ok_or_else(|| Error::SingularMatrix("singular basis".into()))?;
        mat.swap(col, piv);
        b.swap(col, piv);
        let inv = mat[col][col].recip();
        for j in col..m {
            let v = &mat[col][j] * &inv;
            mat[col][j] = v;
        }
        let bv = &b[col] * &inv;
        b[col] = bv;
        for k in 0..m {
            if k != col && !mat[k][col].is_zero() {
                let f = mat[k][col].clone();
                for j in col..m {
                    let v = &mat[k][j] - &f * &mat[col][j];
                    mat[k][j] = v;
                }
                let bv = &b[k] - &f * &b[col];
                b[k] = bv;
            }
        }
    }
    Ok(b)
}
