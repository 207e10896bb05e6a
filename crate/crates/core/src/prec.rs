//! Arbitrary-precision real and complex scalars with ball arithmetic.
//!
//! Thin wrapper around `astro_float::BigFloat`. Every value carries its own
//! mantissa precision; binary operations work at the larger precision of the
//! two operands. Transcendental functions share a thread-local constants
//! cache.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constants cache"));
}

fn with_cc<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|cc| f(&mut cc.borrow_mut()))
}

/// Arbitrary-precision real number.
#[derive(Clone)]
pub struct Real(BigFloat);

impl Real {
    pub fn zero(p: usize) -> Self {
        Real(BigFloat::new(p))
    }

    pub fn from_i64(v: i64, p: usize) -> Self {
        if v == 0 {
            return Real::zero(p);
        }
        Real(BigFloat::from_i64(v, p))
    }

    pub fn from_f64(v: f64, p: usize) -> Self {
        if v == 0.0 {
            return Real::zero(p);
        }
        Real(BigFloat::from_f64(v, p))
    }

    pub fn from_bigint(v: &BigInt, p: usize) -> Self {
        if let Some(small) = v.to_i128() {
            return Real(BigFloat::from_i128(small, p));
        }
        // Large integers: exact binary expansion from the u64 digits.
        let digits: Vec<u64> = v.magnitude().to_u64_digits();
        let bits = 64 * digits.len();
        let mut acc = Real::zero(p + bits);
        for (k, d) in digits.iter().enumerate() {
            let part = Real(BigFloat::from_u64(*d, p + bits)).mul2k(64 * k as i64);
            acc = &acc + &part;
        }
        if v.is_negative() {
            acc = -&acc;
        }
        acc.round_to(p)
    }

    pub fn from_ratio(v: &BigRational, p: usize) -> Self {
        let n = Real::from_bigint(v.numer(), p + 64);
        let d = Real::from_bigint(v.denom(), p + 64);
        (&n / &d).round_to(p)
    }

    pub fn pi(p: usize) -> Self {
        Real(with_cc(|cc| cc.pi(p, RM)))
    }

    pub fn ln2(p: usize) -> Self {
        Real(with_cc(|cc| cc.ln_2(p, RM)))
    }

    /// 2^k for integer k.
    pub fn pow2(k: i64, p: usize) -> Self {
        Real::from_i64(1, p).mul2k(k)
    }

    pub fn prec(&self) -> usize {
        match self.0.mantissa_max_bit_len() {
            Some(p) if p >= 64 => p,
            _ => 64,
        }
    }

    fn join(&self, o: &Real) -> usize {
        self.prec().max(o.prec())
    }

    pub fn round_to(&self, p: usize) -> Real {
        let mut x = self.0.clone();
        x.set_precision(p, RM).expect("set precision");
        Real(x)
    }

    /// Multiply by 2^k exactly.
    pub fn mul2k(&self, k: i64) -> Real {
        if self.0.is_zero() {
            return self.clone();
        }
        let mut x = self.0.clone();
        let e = x.exponent().expect("finite") as i64 + k;
        assert!(e >= i32::MIN as i64 && e <= i32::MAX as i64, "exponent overflow");
        x.set_exponent(e as i32);
        Real(x)
    }

    pub fn abs(&self) -> Real {
        Real(self.0.abs())
    }

    pub fn neg(&self) -> Real {
        let mut x = self.0.clone();
        x.inv_sign();
        Real(x)
    }

    pub fn sqrt(&self) -> Real {
        Real(self.0.sqrt(self.prec(), RM))
    }

    pub fn ln(&self) -> Real {
        Real(with_cc(|cc| self.0.ln(self.prec(), RM, cc)))
    }

    pub fn log2(&self) -> Real {
        Real(with_cc(|cc| self.0.log2(self.prec(), RM, cc)))
    }

    pub fn exp(&self) -> Real {
        Real(with_cc(|cc| self.0.exp(self.prec(), RM, cc)))
    }

    pub fn sin(&self) -> Real {
        Real(with_cc(|cc| self.0.sin(self.prec(), RM, cc)))
    }

    pub fn cos(&self) -> Real {
        Real(with_cc(|cc| self.0.cos(self.prec(), RM, cc)))
    }

    pub fn atan(&self) -> Real {
        Real(with_cc(|cc| self.0.atan(self.prec(), RM, cc)))
    }

    /// Four-quadrant arctangent in (-pi, pi].
    pub fn atan2(y: &Real, x: &Real) -> Real {
        let p = y.join(x);
        let pi = Real::pi(p);
        if x.is_zero() && y.is_zero() {
            return Real::zero(p);
        }
        if x.is_zero() {
            let half = pi.mul2k(-1);
            return if y.is_positive() { half } else { -&half };
        }
        let base = (y / x).atan();
        if x.is_positive() {
            base
        } else if y.is_negative() {
            &base - &pi
        } else {
            &base + &pi
        }
    }

    pub fn floor(&self) -> Real {
        Real(self.0.floor())
    }

    pub fn ceil(&self) -> Real {
        Real(self.0.ceil())
    }

    pub fn ceil_i64(&self) -> i64 {
        -((&-self).floor_bigint()).to_i64().expect("ceil fits i64")
    }

    pub fn fract(&self) -> Real {
        Real(self.0.fract())
    }

    /// Nearest integer as i64. Panics when out of range.
    pub fn round_i64(&self) -> i64 {
        let half = Real::from_ratio(&BigRational::new(1.into(), 2.into()), 64);
        let shifted = self + &half;
        shifted.floor().to_f64() as i64
    }

    pub fn floor_bigint(&self) -> BigInt {
        let f = self.floor();
        // Reconstruct the integer from raw parts.
        match f.0.as_raw_parts() {
            Some((words, _bits, sign, e, _)) => {
                let mut v = BigInt::zero();
                for (k, w) in words.iter().enumerate() {
                    v += BigInt::from(*w) << (64 * k);
                }
                let shift = e as i64 - 64 * words.len() as i64;
                if shift >= 0 {
                    v <<= shift as usize;
                } else {
                    v >>= (-shift) as usize;
                }
                if sign == Sign::Neg {
                    -v
                } else {
                    v
                }
            }
            None => panic!("floor of non-finite value"),
        }
    }

    /// Integer power with sign-aware exponent.
    pub fn powi(&self, n: i64) -> Real {
        let p = self.prec();
        if n == 0 {
            return Real::from_i64(1, p);
        }
        let base = self.0.powi(n.unsigned_abs() as usize, p, RM);
        if n < 0 {
            Real(base.reciprocal(p, RM))
        } else {
            Real(base)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive() && !self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative() && !self.0.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        if self.0.is_zero() {
            return 0.0;
        }
        if self.0.is_inf_pos() {
            return f64::INFINITY;
        }
        if self.0.is_inf_neg() {
            return f64::NEG_INFINITY;
        }
        match self.0.as_raw_parts() {
            Some((words, _bits, sign, e, _)) => {
                let n = words.len();
                let top = words[n - 1] as f64;
                let next = if n >= 2 { words[n - 2] as f64 } else { 0.0 };
                let frac = top / 2f64.powi(64) + next / 2f64.powi(128);
                let mag = frac * pow2_f64(e as i64);
                if sign == Sign::Neg {
                    -mag
                } else {
                    mag
                }
            }
            None => f64::NAN,
        }
    }

    /// Binary exponent: |self| in [2^(e-1), 2^e). None for zero.
    pub fn exponent(&self) -> Option<i64> {
        if self.0.is_zero() {
            None
        } else {
            self.0.exponent().map(|e| e as i64)
        }
    }

    /// One unit in the last place at this value's magnitude.
    pub fn ulp(&self) -> f64 {
        match self.exponent() {
            Some(e) => pow2_f64(e - self.prec() as i64 + 1),
            None => pow2_f64(-(self.prec() as i64)),
        }
    }

    pub fn min(&self, o: &Real) -> Real {
        if self <= o {
            self.clone()
        } else {
            o.clone()
        }
    }

    pub fn max(&self, o: &Real) -> Real {
        if self >= o {
            self.clone()
        } else {
            o.clone()
        }
    }
}

fn pow2_f64(k: i64) -> f64 {
    if k > 1100 {
        f64::INFINITY
    } else if k < -1100 {
        0.0
    } else {
        2f64.powi(k as i32)
    }
}

macro_rules! real_binop {
    ($tr:ident, $m:ident, $bf:ident) => {
        impl std::ops::$tr<&Real> for &Real {
            type Output = Real;
            fn $m(self, rhs: &Real) -> Real {
                let p = self.join(rhs);
                Real(self.0.$bf(&rhs.0, p, RM))
            }
        }
    };
}

real_binop!(Add, add, add);
real_binop!(Sub, sub, sub);
real_binop!(Mul, mul, mul);
real_binop!(Div, div, div);

impl std::ops::Neg for &Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real::neg(self)
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.0.cmp(&other.0) == Some(0)
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.cmp(&other.0).map(|s| s.cmp(&0))
    }
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.to_f64())
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.to_f64())
    }
}

/// Complex number with `Real` components.
#[derive(Clone, Debug)]
pub struct Cplx {
    pub re: Real,
    pub im: Real,
}

impl Cplx {
    pub fn new(re: Real, im: Real) -> Self {
        Cplx { re, im }
    }

    pub fn from_f64(re: f64, im: f64, p: usize) -> Self {
        Cplx::new(Real::from_f64(re, p), Real::from_f64(im, p))
    }

    pub fn real(x: Real) -> Self {
        let p = x.prec();
        Cplx { re: x, im: Real::zero(p) }
    }

    pub fn zero(p: usize) -> Self {
        Cplx::new(Real::zero(p), Real::zero(p))
    }

    pub fn one(p: usize) -> Self {
        Cplx::new(Real::from_i64(1, p), Real::zero(p))
    }

    pub fn conj(&self) -> Cplx {
        Cplx::new(self.re.clone(), self.im.neg())
    }

    pub fn add(&self, o: &Cplx) -> Cplx {
        Cplx::new(&self.re + &o.re, &self.im + &o.im)
    }

    pub fn sub(&self, o: &Cplx) -> Cplx {
        Cplx::new(&self.re - &o.re, &self.im - &o.im)
    }

    pub fn mul(&self, o: &Cplx) -> Cplx {
        let re = &(&self.re * &o.re) - &(&self.im * &o.im);
        let im = &(&self.re * &o.im) + &(&self.im * &o.re);
        Cplx::new(re, im)
    }

    pub fn scale(&self, s: &Real) -> Cplx {
        Cplx::new(&self.re * s, &self.im * s)
    }

    pub fn div(&self, o: &Cplx) -> Cplx {
        let d = o.norm_sqr();
        let n = self.mul(&o.conj());
        Cplx::new(&n.re / &d, &n.im / &d)
    }

    pub fn norm_sqr(&self) -> Real {
        &(&self.re * &self.re) + &(&self.im * &self.im)
    }

    pub fn abs(&self) -> Real {
        self.norm_sqr().sqrt()
    }

    /// Argument in (-pi, pi].
    pub fn arg(&self) -> Real {
        Real::atan2(&self.im, &self.re)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn to_c64(&self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.to_f64(), self.im.to_f64())
    }
}

/// Real ball: certified enclosure `c ± r`.
#[derive(Clone, Debug)]
pub struct Ball {
    pub c: Real,
    pub r: f64,
}

impl Ball {
    pub fn exact(c: Real) -> Self {
        Ball { c, r: 0.0 }
    }

    pub fn new(c: Real, r: f64) -> Self {
        Ball { c, r }
    }

    fn mag(&self) -> f64 {
        self.c.to_f64().abs() + self.r
    }

    pub fn add(&self, o: &Ball) -> Ball {
        let c = &self.c + &o.c;
        let r = self.r + o.r + c.ulp();
        Ball { c, r }
    }

    pub fn sub(&self, o: &Ball) -> Ball {
        let c = &self.c - &o.c;
        let r = self.r + o.r + c.ulp();
        Ball { c, r }
    }

    pub fn mul(&self, o: &Ball) -> Ball {
        let c = &self.c * &o.c;
        let r = self.mag() * o.r + o.mag() * self.r + self.r * o.r + c.ulp();
        Ball { c, r }
    }

    pub fn contains_zero(&self) -> bool {
        self.c.to_f64().abs() <= self.r
    }
}

/// Complex ball: disk of radius `r` around `c`.
#[derive(Clone, Debug)]
pub struct CBall {
    pub c: Cplx,
    pub r: f64,
}

impl CBall {
    pub fn exact(c: Cplx) -> Self {
        CBall { c, r: 0.0 }
    }

    pub fn new(c: Cplx, r: f64) -> Self {
        CBall { c, r }
    }

    fn mag(&self) -> f64 {
        self.c.to_c64().norm() + self.r
    }

    fn ulps(&self) -> f64 {
        self.c.re.ulp() + self.c.im.ulp()
    }

    pub fn add(&self, o: &CBall) -> CBall {
        let c = self.c.add(&o.c);
        let r = self.r + o.r + self.ulps();
        CBall { c, r }
    }

    pub fn sub(&self, o: &CBall) -> CBall {
        let c = self.c.sub(&o.c);
        let r = self.r + o.r + self.ulps();
        CBall { c, r }
    }

    pub fn mul(&self, o: &CBall) -> CBall {
        let c = self.c.mul(&o.c);
        let r = self.mag() * o.r + o.mag() * self.r + self.r * o.r + 2.0 * self.ulps();
        CBall { c, r }
    }

    pub fn contains_zero(&self) -> bool {
        self.c.to_c64().norm() <= self.r
    }
}
