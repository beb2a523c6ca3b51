//! The hard query-distribution family for the integer attack, the arcsine
//! mixing density, the score function, and the Gaussian family for the real
//! attack.
//!
//! All family math is exact rational; sampling converts to f64 once, when a
//! sampler table is built. Conventions differ between the two families and
//! are kept as-is: the integer family has Pr[X = 0] = p, the real family has
//! Pr[X = 0] = 1 - p. Attack code derives the challenge sign from "v_i != 0"
//! in both cases.

mod simplex;

use num_bigint::BigInt;
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{rational_from_string, rational_to_f64, rational_to_string};

/// Polynomial behind the weight vector; coefficients are exact rationals,
/// low order first.
#[derive(Clone, Debug, PartialEq)]
pub struct QPolynomial {
    pub support_radius: usize,
    pub degree: usize,
    pub coeffs: Vec<BigRational>,
}

impl QPolynomial {
    pub fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_int(&self, x: i64) -> BigRational {
        self.eval(&BigRational::from_integer(BigInt::from(x)))
    }
}

/// The moment-matched family {D_p} on {-R,...,R}: D_p(0) = p for
/// p in [alpha, beta], all first K moments shared across the family.
#[derive(Clone, Debug)]
pub struct MomentFamily {
    pub support_radius: usize,
    pub moment_order: usize,
    pub q: QPolynomial,
    /// u(i) = (-1)^i C(R,i) Q(i) for i in 0..=R.
    pub u: Vec<BigRational>,
    /// U = sum |u(i)|.
    pub u_total: BigRational,
    pub alpha: BigRational,
    pub beta: BigRational,
    /// Base pmf; index i holds the per-point mass at +i (and at -i for i >= 1).
    pub base: Vec<BigRational>,
}

/// One round's draw: mixing parameter, query values, and the challenge signs
/// c_i = +1 iff v_i != 0.
#[derive(Clone, Debug)]
pub struct RoundSample {
    pub p: f64,
    pub v: RoundValues,
    pub c: Vec<bool>,
}

#[derive(Clone, Debug)]
pub enum RoundValues {
    Int(Vec<i64>),
    Real(Vec<f64>),
}

/// Build the family for moment order `K` with R = c_R * K^2 (doubling up to
/// three times if the extremal ratio bound fails).
pub fn build_family(k: usize) -> Result<MomentFamily> {
    build_family_with(k, None, 4)
}

pub fn build_family_with(k: usize, r: Option<usize>, c_r: usize) -> Result<MomentFamily> {
    if k < 1 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    let mut radius = r.unwrap_or_else(|| (c_r * k * k).max(k + 2));
    let mut last_r = radius;
    for _retry in 0..4 {
        last_r = radius;
        match try_build(k, radius) {
            Ok(fam) => return Ok(fam),
            Err(Error::NoFeasiblePolynomial { .. }) => {
                radius *= 2;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::NoFeasiblePolynomial {
        retries: 3,
        last_r,
    })
}

fn try_build(k: usize, radius: usize) -> Result<MomentFamily> {
    // Minimize sum_{i>=1} |u_i| subject to the K+1 moment constraints that
    // pin u(0) = 1 and annihilate i^t for t <= K.
    let mut rhs = vec![BigRational::zero(); k + 1];
    rhs[0] = -BigRational::one();
    let tail = simplex::min_l1_with_moments(radius, &rhs)?;

    let mut u = Vec::with_capacity(radius + 1);
    u.push(BigRational::one());
    u.extend(tail);
    let u_total: BigRational = u.iter().map(|x| x.abs()).sum();

    // ratio bound |Q(0)| / sum |C(R,i) Q(i)| = u(0)/U > 1/4
    let quarter = BigRational::new(BigInt::one(), BigInt::from(4));
    if &u[0] / &u_total <= quarter {
        return Err(Error::NoFeasiblePolynomial {
            retries: 0,
            last_r: radius,
        });
    }

    let q = interpolate_q(&u, radius, k)?;

    let two = BigRational::from_integer(BigInt::from(2));
    let alpha = &u[0] / (&two * &u_total);
    let beta = &two * &alpha;

    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut base = Vec::with_capacity(radius + 1);
    base.push(alpha.clone());
    for (i, ui) in u.iter().enumerate().skip(1) {
        let w = ui.abs() / (&two * &u_total);
        if i == 1 {
            base.push(&half * (&half + &w));
        } else {
            base.push(&half * &w);
        }
    }

    let fam = MomentFamily {
        support_radius: radius,
        moment_order: k,
        q,
        u,
        u_total,
        alpha,
        beta,
        base,
    };
    fam.verify()?;
    Ok(fam)
}

/// Interpolate Q through (i, (-1)^i u(i) / C(R,i)) and check the degree bound.
fn interpolate_q(u: &[BigRational], radius: usize, k: usize) -> Result<QPolynomial> {
    let n = radius + 1;
    let mut values = Vec::with_capacity(n);
    for (i, ui) in u.iter().enumerate() {
        let c = BigRational::from_integer(binomial(BigInt::from(radius), BigInt::from(i)));
        let mut v = ui / c;
        if i % 2 == 1 {
            v = -v;
        }
        values.push(v);
    }
    // Newton divided differences on nodes 0..=R
    let mut dd = values;
    for level in 1..n {
        for row in (level..n).rev() {
            let num = &dd[row] - &dd[row - 1];
            let den = BigRational::from_integer(BigInt::from(level));
            dd[row] = num / den;
        }
    }
    // expand to monomial coefficients via Horner on the Newton form
    let mut coeffs: Vec<BigRational> = vec![dd[n - 1].clone()];
    for node in (0..n - 1).rev() {
        // poly <- poly * (x - node) + dd[node]
        let x0 = BigRational::from_integer(BigInt::from(node));
        let mut next = vec![BigRational::zero(); coeffs.len() + 1];
        for (idx, c) in coeffs.iter().enumerate() {
            next[idx + 1] += c;
            let v = &next[idx] - c * &x0;
            next[idx] = v;
        }
        next[0] += &dd[node];
        coeffs = next;
    }
    while coeffs.len() > 1 && coeffs.last().map(|c| c.is_zero()) == Some(true) {
        coeffs.pop();
    }
    let degree_bound = radius - k - 1;
    if coeffs.len() > degree_bound + 1 {
        return Err(Error::InvalidArgument(format!(
            "interpolated Q has degree {} > bound {}",
            coeffs.len() - 1,
            degree_bound
        )));
    }
    Ok(QPolynomial {
        support_radius: radius,
        degree: degree_bound,
        coeffs,
    })
}

impl MomentFamily {
    /// Exact pmf of D_p at point i (|i| <= R).
    pub fn pmf(&self, p: &BigRational, i: i64) -> Result<BigRational> {
        if p < &self.alpha || p > &self.beta {
            return Err(Error::InvalidArgument(format!(
                "p = {} outside [alpha, beta]",
                p
            )));
        }
        let a = i.unsigned_abs() as usize;
        if a > self.support_radius {
            return Err(Error::InvalidArgument(format!(
                "point {i} outside support radius {}",
                self.support_radius
            )));
        }
        let scale = p / &self.alpha - BigRational::one();
        let two = BigRational::from_integer(BigInt::from(2));
        let four = BigRational::from_integer(BigInt::from(4));
        if a == 0 {
            Ok(&self.base[0] + &scale * &self.u[0] / (&two * &self.u_total))
        } else {
            Ok(&self.base[a] + &scale * &self.u[a] / (&four * &self.u_total))
        }
    }

    /// Exact k-th moment of D_p.
    pub fn moment(&self, p: &BigRational, k: usize) -> Result<BigRational> {
        let mut total = BigRational::zero();
        if k == 0 {
            total += self.pmf(p, 0)?;
        }
        for i in 1..=self.support_radius as i64 {
            let mass = self.pmf(p, i)?;
            if mass.is_zero() {
                continue;
            }
            let mut pow = BigRational::one();
            let x = BigRational::from_integer(BigInt::from(i));
            for _ in 0..k {
                pow *= &x;
            }
            if k % 2 == 0 {
                // i^k + (-i)^k = 2 i^k
                total += BigRational::from_integer(BigInt::from(2)) * &mass * pow;
            }
            // odd k: the two sides cancel exactly
        }
        Ok(total)
    }

    /// Exact total variation distance between D_p and D_q.
    pub fn tv_between(&self, p: &BigRational, q: &BigRational) -> Result<BigRational> {
        let mut total = (self.pmf(p, 0)? - self.pmf(q, 0)?).abs();
        let two = BigRational::from_integer(BigInt::from(2));
        for i in 1..=self.support_radius as i64 {
            total += &two * (self.pmf(p, i)? - self.pmf(q, i)?).abs();
        }
        Ok(total / two)
    }

    /// Evenly spaced exact grid of p values in [alpha, beta].
    pub fn grid_ps(&self, count: usize) -> Vec<BigRational> {
        assert!(count >= 2);
        let span = &self.beta - &self.alpha;
        (0..count)
            .map(|g| {
                &self.alpha
                    + &span * BigRational::new(BigInt::from(g), BigInt::from(count - 1))
            })
            .collect()
    }

    /// Re-check every exact invariant of the construction.
    pub fn verify(&self) -> Result<()> {
        let radius = self.support_radius;
        let k = self.moment_order;
        let fail = |msg: String| Err(Error::InvalidArgument(format!("family invariant: {msg}")));

        if self.u.len() != radius + 1 || self.base.len() != radius + 1 {
            return fail("u/B length".into());
        }
        // u(0) > 0 and the ratio bound
        if !self.u[0].is_positive() {
            return fail("u(0) <= 0".into());
        }
        let quarter = BigRational::new(BigInt::one(), BigInt::from(4));
        if &self.u[0] / &self.u_total <= quarter {
            return fail("ratio bound u(0)/U <= 1/4".into());
        }
        let check_total: BigRational = self.u.iter().map(|x| x.abs()).sum();
        if check_total != self.u_total {
            return fail("U != sum |u|".into());
        }
        // u(i) = (-1)^i C(R,i) Q(i), which also certifies deg Q <= R-K-1
        for i in 0..=radius {
            let c = BigRational::from_integer(binomial(BigInt::from(radius), BigInt::from(i)));
            let mut expect = c * self.q.eval_int(i as i64);
            if i % 2 == 1 {
                expect = -expect;
            }
            if expect != self.u[i] {
                return fail(format!("u({i}) inconsistent with Q"));
            }
        }
        if self.q.coeffs.len() > radius - k {
            return fail("Q degree exceeds R-K-1".into());
        }
        // moment annihilation, including sum u(i) = 0 at t = 0
        for t in 0..=k {
            let mut s = BigRational::zero();
            for (i, ui) in self.u.iter().enumerate() {
                let mut pow = BigRational::one();
                let x = BigRational::from_integer(BigInt::from(i));
                for _ in 0..t {
                    pow *= &x;
                }
                s += ui * pow;
            }
            if t == 0 {
                // 0^0 = 1 here, so the full sum including u(0) must vanish
                if !s.is_zero() {
                    return fail("sum u(i) != 0".into());
                }
            } else if !s.is_zero() {
                return fail(format!("sum u(i) i^{t} != 0"));
            }
        }
        // alpha/beta
        let two = BigRational::from_integer(BigInt::from(2));
        if self.alpha != &self.u[0] / (&two * &self.u_total) {
            return fail("alpha != u(0)/(2U)".into());
        }
        if self.beta != &two * &self.alpha {
            return fail("beta != 2 alpha".into());
        }
        if !self.alpha.is_positive() || self.beta > BigRational::one() {
            return fail("alpha/beta out of (0, 1]".into());
        }
        // B is a pmf
        let mut mass = self.base[0].clone();
        for b in &self.base[1..] {
            if b.is_negative() {
                return fail("negative base mass".into());
            }
            mass += &two * b;
        }
        if mass != BigRational::one() {
            return fail("base mass != 1".into());
        }
        // exact checks across a grid of p
        let one = BigRational::one();
        let half_bound = &quarter - self.u[1].abs() / (&two * &self.u_total);
        for p in self.grid_ps(5) {
            let mut total = self.pmf(&p, 0)?;
            for i in 1..=radius as i64 {
                let m = self.pmf(&p, i)?;
                if m.is_negative() || m > one {
                    return fail(format!("pmf out of [0,1] at p={p}, i={i}"));
                }
                if m != self.pmf(&p, -i)? {
                    return fail("pmf asymmetric".into());
                }
                total += &two * m;
            }
            if total != one {
                return fail(format!("pmf mass != 1 at p={p}"));
            }
            if self.pmf(&p, 0)? != p {
                return fail(format!("D_p(0) != p at p={p}"));
            }
            let at_one = self.pmf(&p, 1)?;
            if at_one < half_bound || !at_one.is_positive() {
                return fail("D_p(1) lower bound".into());
            }
            for t in 1..=k {
                if self.moment(&p, t)? != self.moment(&self.alpha, t)? {
                    return fail(format!("moment {t} differs across family"));
                }
            }
        }
        Ok(())
    }

    pub fn alpha_f64(&self) -> f64 {
        rational_to_f64(&self.alpha)
    }

    pub fn beta_f64(&self) -> f64 {
        rational_to_f64(&self.beta)
    }

    /// Sampler tables; build once and reuse across rounds.
    pub fn sampler(&self) -> FamilySampler {
        let base_table = make_table(&self.base);
        let beta_pmf: Vec<BigRational> = (0..=self.support_radius)
            .map(|i| self.pmf(&self.beta, i as i64).unwrap())
            .collect();
        let beta_table = make_table(&beta_pmf);
        FamilySampler {
            alpha: self.alpha_f64(),
            beta: self.beta_f64(),
            base_table,
            beta_table,
        }
    }

    /// Draw one attack round (p from the arcsine density, v from D_p^n).
    pub fn draw_round<R: Rng>(&self, n: usize, rng: &mut R) -> RoundSample {
        self.sampler().draw_round(n, rng)
    }
}

/// Cumulative sampling table over the signed support points.
#[derive(Clone, Debug)]
struct CumTable {
    values: Vec<i64>,
    cum: Vec<f64>,
}

fn make_table(per_side: &[BigRational]) -> CumTable {
    // per_side[i] is the mass at +i (and at -i for i >= 1)
    let mut values = Vec::new();
    let mut probs = Vec::new();
    for (i, m) in per_side.iter().enumerate() {
        if m.is_zero() {
            continue;
        }
        let p = rational_to_f64(m);
        if i == 0 {
            values.push(0i64);
            probs.push(p);
        } else {
            values.push(i as i64);
            probs.push(p);
            values.push(-(i as i64));
            probs.push(p);
        }
    }
    let total: f64 = probs.iter().sum();
    let mut cum = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p / total;
        cum.push(acc);
    }
    if let Some(last) = cum.last_mut() {
        *last = 1.0;
    }
    CumTable { values, cum }
}

impl CumTable {
    fn sample<R: Rng>(&self, rng: &mut R) -> i64 {
        let x: f64 = rng.gen();
        for (v, c) in self.values.iter().zip(self.cum.iter()) {
            if x <= *c {
                return *v;
            }
        }
        *self.values.last().unwrap()
    }
}

/// Prebuilt tables for drawing rounds from a [`MomentFamily`].
#[derive(Clone, Debug)]
pub struct FamilySampler {
    pub alpha: f64,
    pub beta: f64,
    base_table: CumTable,
    beta_table: CumTable,
}

impl FamilySampler {
    /// D_p is the mixture (1-lambda) B + lambda D_beta with
    /// lambda = (p - alpha)/(beta - alpha).
    pub fn draw_round<R: Rng>(&self, n: usize, rng: &mut R) -> RoundSample {
        let p = arcsine_sample(self.alpha, self.beta, rng);
        let v = self.draw_values(p, n, rng);
        let c = v.iter().map(|&x| x != 0).collect();
        RoundSample {
            p,
            v: RoundValues::Int(v),
            c,
        }
    }

    /// Draw v ~ D_p^n for a pinned p.
    pub fn draw_values<R: Rng>(&self, p: f64, n: usize, rng: &mut R) -> Vec<i64> {
        let lambda = ((p - self.alpha) / (self.beta - self.alpha)).clamp(0.0, 1.0);
        (0..n)
            .map(|_| {
                if rng.gen::<f64>() < lambda {
                    self.beta_table.sample(rng)
                } else {
                    self.base_table.sample(rng)
                }
            })
            .collect()
    }
}

/// Draw one real-attack round at a pinned p: each coordinate is 0 with
/// probability 1-p, otherwise N(0, 1/p), so E[x] = 0 and E[x^2] = 1.
pub fn draw_real_round<R: Rng>(p: f64, n: usize, rng: &mut R) -> Result<RoundSample> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} outside (0, 1]")));
    }
    let scale = (1.0 / p).sqrt();
    let mut v = Vec::with_capacity(n);
    for _ in 0..n {
        if rng.gen::<f64>() < p {
            let z: f64 = rng.sample(StandardNormal);
            v.push(z * scale);
        } else {
            v.push(0.0);
        }
    }
    let c = v.iter().map(|&x| x != 0.0).collect();
    Ok(RoundSample {
        p,
        v: RoundValues::Real(v),
        c,
    })
}

/// Score function: mean 0 and variance 1 when Pr[c = -1] = p; identically
/// zero at the endpoints.
pub fn phi(p: f64, c_plus: bool) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p = {p} outside [0, 1]")));
    }
    Ok(phi_unchecked(p, c_plus))
}

#[inline]
pub(crate) fn phi_unchecked(p: f64, c_plus: bool) -> f64 {
    if p == 0.0 || p == 1.0 {
        return 0.0;
    }
    if c_plus {
        -(p / (1.0 - p)).sqrt()
    } else {
        ((1.0 - p) / p).sqrt()
    }
}

/// Sample from the density C_{a,b} / sqrt(p(1-p)) on [a, b] by inverting the
/// closed-form CDF.
pub fn arcsine_sample<R: Rng>(a: f64, b: f64, rng: &mut R) -> f64 {
    let t: f64 = rng.gen();
    arcsine_quantile(a, b, t)
}

pub fn arcsine_quantile(a: f64, b: f64, t: f64) -> f64 {
    let ta = (2.0 * a - 1.0).asin();
    let tb = (2.0 * b - 1.0).asin();
    let p = 0.5 * (1.0 + ((1.0 - t) * ta + t * tb).sin());
    p.clamp(a, b)
}

/// CDF of the arcsine mixing density on [a, b].
pub fn arcsine_cdf(a: f64, b: f64, p: f64) -> f64 {
    let ta = (2.0 * a - 1.0).asin();
    let tb = (2.0 * b - 1.0).asin();
    (((2.0 * p - 1.0).asin() - ta) / (tb - ta)).clamp(0.0, 1.0)
}

/// Normalizing constant C_{a,b} of the arcsine density. Exposed for
/// inspection; nothing in the attack depends on its value.
pub fn arcsine_normalizer(a: f64, b: f64) -> f64 {
    1.0 / ((2.0 * b - 1.0).asin() - (2.0 * a - 1.0).asin())
}

// --- JSON wire format ---

#[derive(Serialize, Deserialize)]
struct FamilyWire {
    #[serde(rename = "R")]
    r: usize,
    #[serde(rename = "K")]
    k: usize,
    d: usize,
    #[serde(rename = "Q")]
    q: Vec<String>,
    u: Vec<String>,
    #[serde(rename = "U")]
    u_total: String,
    alpha: String,
    beta: String,
    #[serde(rename = "B")]
    base: Vec<String>,
}

impl Serialize for MomentFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FamilyWire {
            r: self.support_radius,
            k: self.moment_order,
            d: self.q.degree,
            q: self.q.coeffs.iter().map(rational_to_string).collect(),
            u: self.u.iter().map(rational_to_string).collect(),
            u_total: rational_to_string(&self.u_total),
            alpha: rational_to_string(&self.alpha),
            beta: rational_to_string(&self.beta),
            base: self.base.iter().map(rational_to_string).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MomentFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let wire = FamilyWire::deserialize(d)?;
        let parse_all = |v: &[String]| -> std::result::Result<Vec<BigRational>, D::Error> {
            v.iter()
                .map(|s| rational_from_string(s).map_err(D::Error::custom))
                .collect()
        };
        Ok(MomentFamily {
            support_radius: wire.r,
            moment_order: wire.k,
            q: QPolynomial {
                support_radius: wire.r,
                degree: wire.d,
                coeffs: parse_all(&wire.q)?,
            },
            u: parse_all(&wire.u)?,
            u_total: rational_from_string(&wire.u_total).map_err(D::Error::custom)?,
            alpha: rational_from_string(&wire.alpha).map_err(D::Error::custom)?,
            beta: rational_from_string(&wire.beta).map_err(D::Error::custom)?,
            base: parse_all(&wire.base)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn k1_family_matches_low_moments_exactly() {
        let fam = build_family(1).unwrap();
        let grid = fam.grid_ps(5);
        for p in &grid {
            assert!(fam.moment(p, 1).unwrap().is_zero());
            assert_eq!(
                fam.moment(p, 1).unwrap(),
                fam.moment(&fam.alpha, 1).unwrap()
            );
        }
        // K = 1 construction only pins E[X]; the d = R-K-1 choice gives the
        // second moment too via the t <= K annihilation plus symmetry.
        assert_eq!(
            fam.moment(&fam.alpha, 1).unwrap(),
            fam.moment(&fam.beta, 1).unwrap()
        );
    }

    #[test]
    fn k3_weights_annihilate_first_three_powers() {
        let fam = build_family_with(3, Some(36), 4).unwrap();
        for t in 1..=3usize {
            let mut s = BigRational::zero();
            for (i, ui) in fam.u.iter().enumerate() {
                let mut pow = BigRational::one();
                for _ in 0..t {
                    pow *= rat(i as i64, 1);
                }
                s += ui * pow;
            }
            assert!(s.is_zero(), "power {t}");
        }
    }

    #[test]
    fn endpoint_zero_mass_is_exact() {
        let fam = build_family(2).unwrap();
        assert_eq!(fam.pmf(&fam.alpha.clone(), 0).unwrap(), fam.alpha);
        assert_eq!(fam.pmf(&fam.beta.clone(), 0).unwrap(), fam.beta);
    }

    #[test]
    fn pmf_at_alpha_is_base() {
        let fam = build_family(2).unwrap();
        for i in 0..=fam.support_radius as i64 {
            assert_eq!(
                fam.pmf(&fam.alpha.clone(), i).unwrap(),
                fam.base[i as usize]
            );
        }
    }

    #[test]
    fn pmf_mass_is_one_at_midpoint() {
        let fam = build_family(3).unwrap();
        let mid = (&fam.alpha + &fam.beta) / rat(2, 1);
        let mut total = fam.pmf(&mid, 0).unwrap();
        for i in 1..=fam.support_radius as i64 {
            total += rat(2, 1) * fam.pmf(&mid, i).unwrap();
        }
        assert_eq!(total, BigRational::one());
    }

    #[test]
    fn pmf_rejects_out_of_range() {
        let fam = build_family(1).unwrap();
        let beyond = &fam.beta + rat(1, 100);
        assert!(fam.pmf(&beyond, 0).is_err());
        assert!(fam.pmf(&fam.alpha.clone(), fam.support_radius as i64 + 1).is_err());
    }

    #[test]
    fn first_unmatched_even_moment_differs() {
        // For even K the first even power above K is K+2; the gap there is
        // genuinely nonzero, frozen as a regression fixture.
        let fam = build_family(2).unwrap();
        let k = fam.moment_order;
        let a = fam.moment(&fam.alpha.clone(), k + 2).unwrap();
        let b = fam.moment(&fam.beta.clone(), k + 2).unwrap();
        assert_ne!(a, b);
        assert_eq!(&b - &a, rat(-5600, 9));
        // odd moments stay equal (zero) at any order
        assert_eq!(
            fam.moment(&fam.alpha.clone(), k + 1).unwrap(),
            fam.moment(&fam.beta.clone(), k + 1).unwrap()
        );
    }

    #[test]
    fn phi_examples() {
        assert!((phi(0.5, true).unwrap() + 1.0).abs() < 1e-15);
        assert!((phi(0.5, false).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(phi(0.0, true).unwrap(), 0.0);
        assert_eq!(phi(1.0, false).unwrap(), 0.0);
        assert!(phi(-0.1, true).is_err());
        assert!(phi(1.1, true).is_err());
    }

    #[test]
    fn phi_mean_zero_variance_one() {
        for &p in &[0.3, 0.1, 0.25, 0.42, 0.9] {
            let plus = phi(p, true).unwrap();
            let minus = phi(p, false).unwrap();
            let mean = p * minus + (1.0 - p) * plus;
            let var = p * minus * minus + (1.0 - p) * plus * plus;
            assert!(mean.abs() < 1e-12, "mean at {p}");
            assert!((var - 1.0).abs() < 1e-12, "variance at {p}");
        }
    }

    #[test]
    fn arcsine_sampler_matches_analytic_cdf() {
        let fam = build_family(2).unwrap();
        let (a, b) = (fam.alpha_f64(), fam.beta_f64());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut samples: Vec<f64> = (0..n).map(|_| arcsine_sample(a, b, &mut rng)).collect();
        samples.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut ks: f64 = 0.0;
        for (idx, s) in samples.iter().enumerate() {
            let emp_lo = idx as f64 / n as f64;
            let emp_hi = (idx + 1) as f64 / n as f64;
            let model = arcsine_cdf(a, b, *s);
            ks = ks.max((model - emp_lo).abs()).max((model - emp_hi).abs());
        }
        assert!(ks < 0.01, "KS statistic {ks}");
    }

    #[test]
    fn zero_fraction_at_alpha_concentrates() {
        let fam = build_family(2).unwrap();
        let sampler = fam.sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let v = sampler.draw_values(sampler.alpha, n, &mut rng);
        let zeros = v.iter().filter(|&&x| x == 0).count() as f64;
        let alpha = fam.alpha_f64();
        let sd = (n as f64 * alpha * (1.0 - alpha)).sqrt();
        assert!(
            (zeros - n as f64 * alpha).abs() < 3.0 * sd,
            "zeros {zeros} vs mean {}",
            n as f64 * alpha
        );
    }

    #[test]
    fn challenge_signs_match_values() {
        let fam = build_family(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let round = fam.draw_round(256, &mut rng);
        let RoundValues::Int(v) = &round.v else {
            panic!("int family draws int values");
        };
        for (x, c) in v.iter().zip(round.c.iter()) {
            assert_eq!(*c, *x != 0);
        }
    }

    #[test]
    fn real_round_convention_and_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let round = draw_real_round(1.0, 2000, &mut rng).unwrap();
        let RoundValues::Real(v) = &round.v else {
            panic!("real values");
        };
        let zeros = v.iter().filter(|&&x| x == 0.0).count();
        assert_eq!(zeros, 0, "p = 1 never draws zeros");

        let n = 1_000_000usize;
        let p = 0.25f64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut zeros = 0usize;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scale = (1.0 / p).sqrt();
        for _ in 0..n {
            let x = if rng.gen::<f64>() < p {
                let z: f64 = rng.sample(StandardNormal);
                z * scale
            } else {
                zeros += 1;
                0.0
            };
            sum += x;
            sumsq += x * x;
        }
        let var = sumsq / n as f64 - (sum / n as f64).powi(2);
        assert!((var - 1.0).abs() < 0.01, "variance {var}");
        let zfrac = zeros as f64 / n as f64;
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((zfrac - 0.75).abs() < 4.0 * sd, "zero fraction {zfrac}");
        assert!(draw_real_round(0.0, 4, &mut rng).is_err());
    }

    #[test]
    fn sampler_agrees_with_pmf_chi_squared() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let fam = build_family(2).unwrap();
        let sampler = fam.sampler();
        let mid = (&fam.alpha + &fam.beta) / rat(2, 1);
        let mid_f = rational_to_f64(&mid);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000usize;
        let samples = sampler.draw_values(mid_f, n, &mut rng);
        // expected mass per support point, pooling tiny bins
        let radius = fam.support_radius as i64;
        let mut expected = std::collections::BTreeMap::new();
        for i in -radius..=radius {
            let m = rational_to_f64(&fam.pmf(&mid, i).unwrap());
            if m > 0.0 {
                expected.insert(i, m * n as f64);
            }
        }
        let mut observed = std::collections::BTreeMap::new();
        for s in samples {
            *observed.entry(s).or_insert(0.0f64) += 1.0;
        }
        let mut chi2 = 0.0;
        let mut dof = 0i64;
        let mut pooled_exp = 0.0;
        let mut pooled_obs = 0.0;
        for (i, e) in &expected {
            let o = observed.get(i).copied().unwrap_or(0.0);
            if *e < 5.0 {
                pooled_exp += e;
                pooled_obs += o;
            } else {
                chi2 += (o - e) * (o - e) / e;
                dof += 1;
            }
        }
        if pooled_exp > 0.0 {
            chi2 += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
            dof += 1;
        }
        let dist = ChiSquared::new((dof - 1) as f64).unwrap();
        let p_value = 1.0 - dist.cdf(chi2);
        assert!(p_value > 0.001, "chi2 {chi2}, dof {dof}, p {p_value}");
    }

    #[test]
    fn family_json_roundtrip_and_verify() {
        let fam = build_family(3).unwrap();
        let s = serde_json::to_string(&fam).unwrap();
        let back: MomentFamily = serde_json::from_str(&s).unwrap();
        back.verify().unwrap();
        assert_eq!(back.alpha, fam.alpha);
        assert_eq!(back.u, fam.u);
    }

    #[test]
    fn rejects_k_zero() {
        assert!(build_family(0).is_err());
    }
}
