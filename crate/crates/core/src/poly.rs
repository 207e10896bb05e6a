//! Monic integer polynomials: exact arithmetic, Sturm sequences, resultants,
//! and evaluation over every scalar type used by the field layer.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::matrix::IMat;
use crate::prec::{Ball, CBall, Cplx, Real};

/// Monic polynomial with integer coefficients, ascending order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct IntPoly {
    pub coeffs: Vec<BigInt>,
}

#[derive(thiserror::Error, Debug, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("polynomial must be monic")]
    NotMonic,
    #[error("polynomial must have degree at least 1")]
    DegreeTooSmall,
}

impl IntPoly {
    pub fn new(coeffs: Vec<BigInt>) -> Result<Self, PolyError> {
        let mut c = coeffs;
        while c.len() > 1 && c.last().map(|v| v.is_zero()).unwrap_or(false) {
            c.pop();
        }
        if c.len() < 2 {
            return Err(PolyError::DegreeTooSmall);
        }
        if !c.last().unwrap().is_one() {
            return Err(PolyError::NotMonic);
        }
        Ok(IntPoly { coeffs: c })
    }

    pub fn from_i64(coeffs: &[i64]) -> Result<Self, PolyError> {
        Self::new(coeffs.iter().map(|&v| BigInt::from(v)).collect())
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Derivative; generally not monic.
    pub fn derivative(&self) -> Vec<BigInt> {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * BigInt::from(k))
            .collect()
    }

    pub fn eval_rational(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.coeffs.iter().rev() {
            acc = &acc * x + BigRational::from(c.clone());
        }
        acc
    }

    pub fn eval_real(&self, x: &Real) -> Real {
        let p = x.prec();
        let mut acc = Real::zero(p);
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * x) + &Real::from_bigint(c, p);
        }
        acc
    }

    pub fn eval_cplx(&self, z: &Cplx) -> Cplx {
        let p = z.re.prec();
        let mut acc = Cplx::zero(p);
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(z);
            acc.re = &acc.re + &Real::from_bigint(c, p);
        }
        acc
    }

    pub fn eval_ball(&self, x: &Ball) -> Ball {
        let p = x.c.prec();
        let mut acc = Ball::exact(Real::zero(p));
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(x);
            acc = acc.add(&Ball::exact(Real::from_bigint(c, p)));
        }
        acc
    }

    pub fn eval_cball(&self, z: &CBall) -> CBall {
        let p = z.c.re.prec();
        let mut acc = CBall::exact(Cplx::zero(p));
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(z);
            acc = acc.add(&CBall::exact(Cplx::real(Real::from_bigint(c, p))));
        }
        acc
    }

    pub fn eval_deriv_cplx(&self, z: &Cplx) -> Cplx {
        let p = z.re.prec();
        let d = self.derivative();
        let mut acc = Cplx::zero(p);
        for c in d.iter().rev() {
            acc = acc.mul(z);
            acc.re = &acc.re + &Real::from_bigint(c, p);
        }
        acc
    }

    /// gcd(p, p') is constant.
    pub fn is_squarefree(&self) -> bool {
        let p: Vec<BigRational> = self.coeffs.iter().map(|c| BigRational::from(c.clone())).collect();
        let q: Vec<BigRational> = self.derivative().iter().map(|c| BigRational::from(c.clone())).collect();
        qpoly_gcd(&p, &q).len() <= 1
    }

    /// Squarefree part with multiplicities: returns (factor, multiplicity)
    /// pairs whose product with multiplicity reconstitutes `self` up to sign.
    /// Used for Mahler measures of matrices with repeated eigenvalues.
    pub fn squarefree_decomposition(&self) -> Vec<(IntPoly, usize)> {
        // Yun's algorithm over Q; all factors of a monic integer polynomial
        // are integral by Gauss's lemma.
        let to_q = |v: &[BigInt]| -> Vec<BigRational> {
            v.iter().map(|c| BigRational::from(c.clone())).collect()
        };
        let p = to_q(&self.coeffs);
        let dp = to_q(&self.derivative());
        let mut out = Vec::new();
        let g = qpoly_gcd(&p, &dp);
        if g.len() <= 1 {
            return vec![(self.clone(), 1)];
        }
        let mut w = qpoly_div_exact(&p, &g);
        let mut y = qpoly_div_exact(&dp, &g);
        let mut i = 1usize;
        loop {
            let wd = qpoly_deriv(&w);
            let z = qpoly_sub(&y, &wd);
            if qpoly_is_zero(&z) {
                if w.len() > 1 {
                    out.push((qpoly_to_intpoly(&w), i));
                }
                break;
            }
            let g_i = qpoly_gcd(&w, &z);
            if g_i.len() > 1 {
                out.push((qpoly_to_intpoly(&g_i), i));
            }
            w = qpoly_div_exact(&w, &g_i);
            y = qpoly_div_exact(&z, &g_i);
            i += 1;
        }
        out
    }

    /// Exact division by a monic integer polynomial; None when not divisible.
    pub fn div_exact(&self, g: &IntPoly) -> Option<IntPoly> {
        if g.degree() > self.degree() {
            return None;
        }
        let mut rem = self.coeffs.clone();
        let n = self.degree();
        let m = g.degree();
        let mut quot = vec![BigInt::zero(); n - m + 1];
        for k in (0..=n - m).rev() {
            let c = rem[k + m].clone();
            if c.is_zero() {
                continue;
            }
            quot[k] = c.clone();
            for j in 0..=m {
                let v = &rem[k + j] - &c * &g.coeffs[j];
                rem[k + j] = v;
            }
        }
        if rem.iter().all(|v| v.is_zero()) {
            IntPoly::new(quot).ok()
        } else {
            None
        }
    }

    /// Resultant of `self` and an arbitrary integer polynomial.
    pub fn resultant(&self, other: &[BigInt]) -> BigInt {
        let n = self.degree();
        let mut o = other.to_vec();
        while o.len() > 1 && o.last().unwrap().is_zero() {
            o.pop();
        }
        let m = o.len() - 1;
        if m == 0 {
            return o[0].pow(n as u32);
        }
        let size = n + m;
        let mut s = IMat::zero(size);
        for i in 0..m {
            for (j, c) in self.coeffs.iter().enumerate() {
                s.set(i, i + (n - j), c.clone());
            }
        }
        for i in 0..n {
            for (j, c) in o.iter().enumerate() {
                s.set(m + i, i + (m - j), c.clone());
            }
        }
        s.det()
    }

    pub fn discriminant(&self) -> BigInt {
        let d = self.degree();
        let res = self.resultant(&self.derivative());
        let sign = if (d * (d - 1) / 2) % 2 == 0 { 1 } else { -1 };
        BigInt::from(sign) * res
    }

    /// Number of distinct real roots (requires squarefree input).
    pub fn count_real_roots(&self) -> usize {
        let chain = self.sturm_chain();
        let at_neg = sturm_signs_at_infinity(&chain, false);
        let at_pos = sturm_signs_at_infinity(&chain, true);
        sign_changes(&at_neg) - sign_changes(&at_pos)
    }

    fn sturm_chain(&self) -> Vec<Vec<BigRational>> {
        let mut chain: Vec<Vec<BigRational>> = Vec::new();
        chain.push(self.coeffs.iter().map(|c| BigRational::from(c.clone())).collect());
        chain.push(self.derivative().iter().map(|c| BigRational::from(c.clone())).collect());
        while chain.last().unwrap().len() > 1 {
            let k = chain.len();
            let r = qpoly_rem(&chain[k - 2], &chain[k - 1]);
            if qpoly_is_zero(&r) {
                break;
            }
            chain.push(r.iter().map(|c| -c).collect());
        }
        chain
    }

    /// Real roots counted in the half-open interval (a, b].
    pub fn count_real_roots_in(&self, a: &BigRational, b: &BigRational) -> usize {
        let chain = self.sturm_chain();
        let sa: Vec<i8> = chain.iter().map(|p| qpoly_sign_at(p, a)).collect();
        let sb: Vec<i8> = chain.iter().map(|p| qpoly_sign_at(p, b)).collect();
        sign_changes(&sa) - sign_changes(&sb)
    }

    /// Disjoint dyadic intervals (a, b], one per real root.
    pub fn isolate_real_roots(&self) -> Vec<(BigRational, BigRational)> {
        let total = self.count_real_roots();
        let mut out = Vec::new();
        if total == 0 {
            return out;
        }
        // Cauchy bound: 1 + max |c_i|.
        let bound = self
            .coeffs
            .iter()
            .map(|c| c.abs())
            .max()
            .unwrap()
            + BigInt::one();
        let b = BigRational::from(bound);
        let mut stack = vec![(-b.clone(), b.clone(), total)];
        while let Some((lo, hi, count)) = stack.pop() {
            if count == 0 {
                continue;
            }
            if count == 1 {
                out.push((lo, hi));
                continue;
            }
            let mid = (&lo + &hi) / BigRational::from(BigInt::from(2));
            let left = self.count_real_roots_in(&lo, &mid);
            stack.push((lo, mid.clone(), left));
            stack.push((mid, hi, count - left));
        }
        out.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        out
    }
}

// -- rational polynomial helpers (ascending coefficient vectors) --

fn qpoly_trim(p: &mut Vec<BigRational>) {
    while p.len() > 1 && p.last().unwrap().is_zero() {
        p.pop();
    }
    if p.is_empty() {
        p.push(BigRational::zero());
    }
}

pub fn qpoly_is_zero(p: &[BigRational]) -> bool {
    p.iter().all(|c| c.is_zero())
}

fn qpoly_deriv(p: &[BigRational]) -> Vec<BigRational> {
    if p.len() <= 1 {
        return vec![BigRational::zero()];
    }
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| c * BigRational::from(BigInt::from(k)))
        .collect()
}

fn qpoly_sub(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let n = a.len().max(b.len());
    let mut out = vec![BigRational::zero(); n];
    for (i, c) in a.iter().enumerate() {
        out[i] = out[i].clone() + c;
    }
    for (i, c) in b.iter().enumerate() {
        out[i] = out[i].clone() - c;
    }
    qpoly_trim(&mut out);
    out
}

/// Remainder of a / b.
pub fn qpoly_rem(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut r = a.to_vec();
    qpoly_trim(&mut r);
    let mut b = b.to_vec();
    qpoly_trim(&mut b);
    assert!(!qpoly_is_zero(&b), "division by zero polynomial");
    let db = b.len() - 1;
    let lead = b[db].clone();
    while r.len() - 1 >= db && !qpoly_is_zero(&r) {
        let dr = r.len() - 1;
        let f = &r[dr] / &lead;
        for j in 0..=db {
            let v = &r[dr - db + j] - &(&f * &b[j]);
            r[dr - db + j] = v;
        }
        r.pop();
        qpoly_trim(&mut r);
        if r.len() == 1 && r[0].is_zero() {
            break;
        }
    }
    r
}

/// Exact quotient a / b (panics if not exact).
pub fn qpoly_div_exact(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut r = a.to_vec();
    qpoly_trim(&mut r);
    let mut b = b.to_vec();
    qpoly_trim(&mut b);
    let db = b.len() - 1;
    let lead = b[db].clone();
    let mut q = vec![BigRational::zero(); r.len().saturating_sub(db)];
    while r.len() - 1 >= db && !qpoly_is_zero(&r) {
        let dr = r.len() - 1;
        let f = &r[dr] / &lead;
        q[dr - db] = f.clone();
        for j in 0..=db {
            let v = &r[dr - db + j] - &(&f * &b[j]);
            r[dr - db + j] = v;
        }
        r.pop();
        qpoly_trim(&mut r);
        if r.len() == 1 && r[0].is_zero() {
            break;
        }
        if dr == db {
            break;
        }
    }
    assert!(qpoly_is_zero(&r), "inexact polynomial division");
    if q.is_empty() {
        q.push(BigRational::zero());
    }
    q
}

/// Monic gcd over Q.
pub fn qpoly_gcd(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    qpoly_trim(&mut x);
    qpoly_trim(&mut y);
    while !qpoly_is_zero(&y) {
        let r = qpoly_rem(&x, &y);
        x = y;
        y = r;
    }
    let lead = x.last().unwrap().clone();
    if !lead.is_zero() {
        for c in x.iter_mut() {
            *c = &*c / &lead;
        }
    }
    x
}

fn qpoly_to_intpoly(p: &[BigRational]) -> IntPoly {
    let coeffs: Vec<BigInt> = p
        .iter()
        .map(|c| {
            assert!(c.denom().is_one(), "expected integral coefficients");
            c.numer().clone()
        })
        .collect();
    IntPoly::new(coeffs).expect("monic integral factor")
}

fn qpoly_sign_at(p: &[BigRational], x: &BigRational) -> i8 {
    let mut acc = BigRational::zero();
    for c in p.iter().rev() {
        acc = &acc * x + c;
    }
    if acc.is_zero() {
        0
    } else if acc.is_positive() {
        1
    } else {
        -1
    }
}

fn sturm_signs_at_infinity(chain: &[Vec<BigRational>], pos: bool) -> Vec<i8> {
    chain
        .iter()
        .map(|p| {
            let d = p.len() - 1;
            let lead = &p[d];
            if lead.is_zero() {
                return 0;
            }
            let mut s: i8 = if lead.is_positive() { 1 } else { -1 };
            if !pos && d % 2 == 1 {
                s = -s;
            }
            s
        })
        .collect()
}

fn sign_changes(signs: &[i8]) -> usize {
    let mut prev = 0i8;
    let mut count = 0;
    for &s in signs {
        if s == 0 {
            continue;
        }
        if prev != 0 && s != prev {
            count += 1;
        }
        prev = s;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> IntPoly {
        IntPoly::from_i64(&[-1, -2, 1, 1]).unwrap()
    }

    #[test]
    fn squarefree_detection() {
        assert!(cubic().is_squarefree());
        let sq = IntPoly::from_i64(&[1, -2, 1]).unwrap(); // (x-1)^2
        assert!(!sq.is_squarefree());
    }

    #[test]
    fn real_root_counts() {
        assert_eq!(cubic().count_real_roots(), 3);
        let p = IntPoly::from_i64(&[-2, 0, 0, 1]).unwrap(); // x^3 - 2
        assert_eq!(p.count_real_roots(), 1);
        let q = IntPoly::from_i64(&[1, 0, 1]).unwrap(); // x^2 + 1
        assert_eq!(q.count_real_roots(), 0);
    }

    #[test]
    fn isolation_brackets_all_roots() {
        let p = cubic();
        let iv = p.isolate_real_roots();
        assert_eq!(iv.len(), 3);
        for (a, b) in &iv {
            assert_eq!(p.count_real_roots_in(a, b), 1);
        }
    }

    #[test]
    fn discriminant_of_conductor_seven_cubic() {
        assert_eq!(cubic().discriminant(), BigInt::from(49));
    }

    #[test]
    fn exact_division() {
        // x^4 - 1 = (x^2+1)(x^2-1)
        let p = IntPoly::from_i64(&[-1, 0, 0, 0, 1]).unwrap();
        let g = IntPoly::from_i64(&[1, 0, 1]).unwrap();
        let q = p.div_exact(&g).unwrap();
        assert_eq!(q, IntPoly::from_i64(&[-1, 0, 1]).unwrap());
        let g2 = IntPoly::from_i64(&[2, 1]).unwrap();
        assert!(p.div_exact(&g2).is_none());
    }

    #[test]
    fn squarefree_decomposition_powers() {
        // (x-1)^2 (x+2)
        let p = IntPoly::from_i64(&[2, -3, 0, 1]).unwrap();
        let parts = p.squarefree_decomposition();
        let mut total = 0;
        for (f, m) in &parts {
            total += f.degree() * m;
        }
        assert_eq!(total, 3);
        assert!(parts.iter().any(|(_, m)| *m == 2));
    }

    #[test]
    fn resultant_matches_eval_product() {
        // Res(p, x - 2) = p(2) up to sign convention: prod over roots (2 - r) = p(2).
        let p = cubic();
        let lin = vec![BigInt::from(-2), BigInt::from(1)];
        let r = p.resultant(&lin);
        // Res(p, q) = lc(q)^deg p * prod q-roots evaluated... for monic linear
        // q = x - 2: Res(p, q) = (-1)^(3*1) q-lead^3 p(2)...; just compare magnitude.
        let val = p.eval_rational(&BigRational::from(BigInt::from(2)));
        assert_eq!(r.abs(), val.numer().abs());
    }
}
