//! Number fields with certified embeddings.
//!
//! A field is presented by a monic irreducible integer polynomial. The
//! embeddings are certified complex balls: `r1` real roots in ascending
//! order followed by `r2` upper-half-plane roots; the conjugate of
//! embedding `r1 + j` is embedding `r1 + r2 + j`.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::poly::{qpoly_rem, IntPoly};
use crate::prec::{CBall, Cplx, Real};

#[derive(thiserror::Error, Debug, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("polynomial is not squarefree")]
    NotSquarefree,
    #[error("certification failed at maximum precision")]
    PrecisionExhausted,
    #[error("polynomial is reducible")]
    Reducible,
    #[error("element is not an algebraic integer")]
    NotIntegral,
    #[error("element is not a unit")]
    NotAUnit,
    #[error("CM test inconclusive at working precision; raise precision")]
    Inconclusive,
    #[error("degree out of supported range")]
    DegreeOutOfRange,
    #[error("division by zero element")]
    DivisionByZero,
}

/// Certified roots of a squarefree monic polynomial.
#[derive(Clone, Debug)]
pub struct RootSet {
    pub r1: usize,
    pub r2: usize,
    /// r1 real roots ascending, then r2 roots with positive imaginary part
    /// ordered by (re, im).
    pub roots: Vec<CBall>,
}

impl RootSet {
    pub fn degree(&self) -> usize {
        self.r1 + 2 * self.r2
    }

    /// Root of embedding i for 0 <= i < d, conjugates included.
    pub fn full(&self, i: usize) -> CBall {
        if i < self.r1 + self.r2 {
            self.roots[i].clone()
        } else {
            let b = &self.roots[i - self.r2];
            CBall::new(b.c.conj(), b.r)
        }
    }
}

/// Find certified roots. Real roots are isolated exactly by Sturm counts and
/// refined by bisection plus Newton; complex roots start from double-precision
/// companion-matrix eigenvalues and are polished at working precision. Each
/// root is wrapped in a ball on which the polynomial provably vanishes.
pub fn find_roots(poly: &IntPoly, precision: usize) -> Result<RootSet, FieldError> {
    if !poly.is_squarefree() {
        return Err(FieldError::NotSquarefree);
    }
    let mut p = precision;
    for _ in 0..4 {
        if let Some(rs) = try_roots(poly, p, precision) {
            return Ok(rs);
        }
        p *= 2;
    }
    Err(FieldError::PrecisionExhausted)
}

fn try_roots(poly: &IntPoly, work: usize, target: usize) -> Option<RootSet> {
    let d = poly.degree();
    let pw = 2 * work + 64;
    let r1 = poly.count_real_roots();
    assert!((d - r1) % 2 == 0);
    let r2 = (d - r1) / 2;

    let mut reals: Vec<Cplx> = Vec::new();
    for (a, b) in poly.isolate_real_roots() {
        let x = refine_real_root(poly, a, b, pw);
        reals.push(Cplx::new(x, Real::zero(pw)));
    }
    reals.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());

    let mut complexes: Vec<Cplx> = Vec::new();
    if r2 > 0 {
        let seeds = companion_eigenvalues(poly);
        for s in seeds {
            if s.im <= 1e-6 {
                continue;
            }
            let mut z = Cplx::from_f64(s.re, s.im, pw);
            for _ in 0..pw.ilog2() as usize + 24 {
                let f = poly.eval_cplx(&z);
                let df = poly.eval_deriv_cplx(&z);
                if df.is_zero() {
                    return None;
                }
                let step = f.div(&df);
                z = z.sub(&step);
            }
            if z.im.is_negative() {
                z = z.conj();
            }
            complexes.push(z);
        }
        // Deduplicate (seeds of conjugate pairs can land on the same root).
        complexes.sort_by(|a, b| {
            a.re.partial_cmp(&b.re)
                .unwrap()
                .then(a.im.partial_cmp(&b.im).unwrap())
        });
        complexes.dedup_by(|a, b| {
            let dr = (&a.re - &b.re).abs();
            let di = (&a.im - &b.im).abs();
            (&dr + &di).to_f64() < 1e-9
        });
        if complexes.len() != r2 {
            return None;
        }
    }

    let mut balls = Vec::with_capacity(r1 + r2);
    for z in reals.iter().chain(complexes.iter()) {
        let b = certify(poly, z, work, target)?;
        balls.push(b);
    }
    // Pairwise disjoint over all d roots including conjugates.
    let rs = RootSet { r1, r2, roots: balls };
    for i in 0..d {
        for j in i + 1..d {
            let a = rs.full(i);
            let b = rs.full(j);
            let dist = a.c.sub(&b.c).to_c64().norm();
            if dist <= a.r + b.r {
                return None;
            }
        }
    }
    Some(rs)
}

fn refine_real_root(poly: &IntPoly, mut a: BigRational, mut b: BigRational, pw: usize) -> Real {
    let two = BigRational::from(BigInt::from(2));
    let sa = poly.eval_rational(&a);
    if sa.is_zero() {
        return Real::from_ratio(&a, pw);
    }
    let mut fa_neg = sa.is_negative();
    for _ in 0..40 {
        let mid = (&a + &b) / &two;
        let fm = poly.eval_rational(&mid);
        if fm.is_zero() {
            return Real::from_ratio(&mid, pw);
        }
        if fm.is_negative() == fa_neg {
            a = mid;
            fa_neg = fm.is_negative();
        } else {
            b = mid;
        }
    }
    let mut x = Real::from_ratio(&(&a + &b), pw).mul2k(-1);
    for _ in 0..pw.ilog2() as usize + 8 {
        let f = poly.eval_real(&x);
        let df = eval_deriv_real(poly, &x);
        if df.is_zero() {
            break;
        }
        x = &x - &(&f / &df);
    }
    x
}

fn eval_deriv_real(poly: &IntPoly, x: &Real) -> Real {
    let p = x.prec();
    let d = poly.derivative();
    let mut acc = Real::zero(p);
    for c in d.iter().rev() {
        acc = &(&acc * x) + &Real::from_bigint(c, p);
    }
    acc
}

fn companion_eigenvalues(poly: &IntPoly) -> Vec<num_complex::Complex64> {
    let d = poly.degree();
    let mut m = nalgebra::DMatrix::<f64>::zeros(d, d);
    for i in 1..d {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..d {
        m[(i, d - 1)] = -poly.coeffs[i].to_f64().unwrap_or(f64::MAX);
    }
    m.complex_eigenvalues().iter().cloned().collect()
}

fn certify(poly: &IntPoly, z: &Cplx, work: usize, target: usize) -> Option<CBall> {
    let f = poly.eval_cplx(z);
    let df = poly.eval_deriv_cplx(z);
    let fd = f.to_c64().norm();
    let dfd = df.to_c64().norm();
    if dfd == 0.0 {
        return None;
    }
    let newton = fd / dfd;
    let floor = 2f64.powi(-(2 * work as i32).min(1000));
    let r = 4.0 * newton + floor;
    let ball = CBall::new(z.clone(), r);
    let image = poly.eval_cball(&ball);
    if !image.contains_zero() {
        return None;
    }
    if r > 2f64.powi(-(target as i32) / 2) {
        return None;
    }
    Some(ball)
}

/// A number field presented by a monic irreducible polynomial, with
/// certified embeddings at a fixed working precision.
#[derive(Clone, Debug)]
pub struct NumberField {
    pub min_poly: IntPoly,
    pub degree: usize,
    pub r1: usize,
    pub r2: usize,
    pub roots: RootSet,
    pub discriminant: BigInt,
    pub precision_bits: usize,
}

impl NumberField {
    pub fn new(min_poly: IntPoly, precision_bits: usize) -> Result<Arc<Self>, FieldError> {
        if min_poly.degree() > 8 {
            return Err(FieldError::DegreeOutOfRange);
        }
        if !is_irreducible(&min_poly, precision_bits)? {
            return Err(FieldError::Reducible);
        }
        let roots = find_roots(&min_poly, precision_bits)?;
        let discriminant = min_poly.discriminant();
        Ok(Arc::new(NumberField {
            degree: min_poly.degree(),
            r1: roots.r1,
            r2: roots.r2,
            roots,
            discriminant,
            min_poly,
            precision_bits,
        }))
    }

    pub fn signature(&self) -> (usize, usize) {
        (self.r1, self.r2)
    }

    /// Local degree of embedding i (1 real, 2 complex), 0 <= i < r1+r2.
    pub fn weight(&self, i: usize) -> usize {
        if i < self.r1 {
            1
        } else {
            2
        }
    }

    pub fn num_places(&self) -> usize {
        self.r1 + self.r2
    }

    pub fn theta(self: &Arc<Self>) -> AlgebraicNumber {
        let mut coords = vec![BigRational::zero(); self.degree];
        coords[1] = BigRational::one();
        AlgebraicNumber { field: Arc::clone(self), coords }
    }

    pub fn one(self: &Arc<Self>) -> AlgebraicNumber {
        let mut coords = vec![BigRational::zero(); self.degree];
        coords[0] = BigRational::one();
        AlgebraicNumber { field: Arc::clone(self), coords }
    }

    pub fn from_rational_coords(self: &Arc<Self>, coords: Vec<BigRational>) -> AlgebraicNumber {
        assert_eq!(coords.len(), self.degree);
        AlgebraicNumber { field: Arc::clone(self), coords }
    }
}

/// Element of a number field in the power basis 1, theta, ..., theta^(d-1).
#[derive(Clone, Debug)]
pub struct AlgebraicNumber {
    pub field: Arc<NumberField>,
    pub coords: Vec<BigRational>,
}

impl PartialEq for AlgebraicNumber {
    fn eq(&self, other: &Self) -> bool {
        self.coords == other.coords
    }
}

impl AlgebraicNumber {
    pub fn from_int_coords(field: &Arc<NumberField>, coords: &[BigInt]) -> Self {
        assert_eq!(coords.len(), field.degree);
        AlgebraicNumber {
            field: Arc::clone(field),
            coords: coords.iter().map(|c| BigRational::from(c.clone())).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        self.coords[0].is_one() && self.coords.iter().skip(1).all(|c| c.is_zero())
    }

    pub fn is_integral(&self) -> bool {
        self.coords.iter().all(|c| c.denom().is_one())
    }

    pub fn denominator(&self) -> BigInt {
        self.coords
            .iter()
            .fold(BigInt::one(), |acc, c| num_integer::lcm(acc, c.denom().clone()))
    }

    pub fn add(&self, o: &AlgebraicNumber) -> AlgebraicNumber {
        let coords = self.coords.iter().zip(&o.coords).map(|(a, b)| a + b).collect();
        AlgebraicNumber { field: Arc::clone(&self.field), coords }
    }

    pub fn sub(&self, o: &AlgebraicNumber) -> AlgebraicNumber {
        let coords = self.coords.iter().zip(&o.coords).map(|(a, b)| a - b).collect();
        AlgebraicNumber { field: Arc::clone(&self.field), coords }
    }

    pub fn neg(&self) -> AlgebraicNumber {
        let coords = self.coords.iter().map(|a| -a).collect();
        AlgebraicNumber { field: Arc::clone(&self.field), coords }
    }

    pub fn mul(&self, o: &AlgebraicNumber) -> AlgebraicNumber {
        let d = self.field.degree;
        let mut prod = vec![BigRational::zero(); 2 * d - 1];
        for (i, a) in self.coords.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.coords.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let v = &prod[i + j] + &(a * b);
                prod[i + j] = v;
            }
        }
        for k in (d..2 * d - 1).rev() {
            let c = prod[k].clone();
            if c.is_zero() {
                continue;
            }
            prod[k] = BigRational::zero();
            for (j, m) in self.field.min_poly.coeffs.iter().take(d).enumerate() {
                let v = &prod[k - d + j] - &(&c * &BigRational::from(m.clone()));
                prod[k - d + j] = v;
            }
        }
        prod.truncate(d);
        AlgebraicNumber { field: Arc::clone(&self.field), coords: prod }
    }

    pub fn inverse(&self) -> Result<AlgebraicNumber, FieldError> {
        if self.is_zero() {
            return Err(FieldError::DivisionByZero);
        }
        let d = self.field.degree;
        let modp: Vec<BigRational> = self
            .field
            .min_poly
            .coeffs
            .iter()
            .map(|c| BigRational::from(c.clone()))
            .collect();
        let (g, u) = qpoly_extgcd_first(&self.coords, &modp);
        assert!(g.len() == 1 && !g[0].is_zero(), "element of a field must be invertible");
        let scale = g[0].clone();
        let scaled: Vec<BigRational> = u.iter().map(|c| c / &scale).collect();
        let mut coords = qpoly_rem(&scaled, &modp);
        coords.resize(d, BigRational::zero());
        Ok(AlgebraicNumber { field: Arc::clone(&self.field), coords })
    }

    pub fn pow(&self, e: i64) -> Result<AlgebraicNumber, FieldError> {
        let base = if e < 0 { self.inverse()? } else { self.clone() };
        let mut e = e.unsigned_abs();
        let mut acc = self.field.one();
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&sq);
            }
            e >>= 1;
            if e > 0 {
                sq = sq.mul(&sq);
            }
        }
        Ok(acc)
    }

    /// Multiplication matrix in the power basis: row i, column j holds
    /// coordinate i of self * theta^j.
    pub fn mul_matrix(&self) -> Vec<Vec<BigRational>> {
        let d = self.field.degree;
        let mut cols = Vec::with_capacity(d);
        let mut cur = self.clone();
        cols.push(cur.coords.clone());
        let theta = self.field.theta();
        for _ in 1..d {
            cur = cur.mul(&theta);
            cols.push(cur.coords.clone());
        }
        (0..d)
            .map(|i| (0..d).map(|j| cols[j][i].clone()).collect())
            .collect()
    }

    /// Exact field norm and trace via the multiplication matrix.
    pub fn norm_trace(&self) -> (BigRational, BigRational) {
        let m = self.mul_matrix();
        let d = self.field.degree;
        let trace = (0..d).fold(BigRational::zero(), |acc, i| &acc + &m[i][i]);
        (det_rational(m), trace)
    }

    pub fn is_unit(&self) -> bool {
        if !self.is_integral() {
            return false;
        }
        let (n, _) = self.norm_trace();
        n.abs().is_one()
    }

    /// Numerical image under embedding i, 0 <= i < d (conjugates included).
    pub fn embed(&self, i: usize) -> Cplx {
        let p = self.field.precision_bits;
        let root = self.field.roots.full(i);
        let mut acc = Cplx::zero(2 * p);
        for c in self.coords.iter().rev() {
            acc = acc.mul(&root.c);
            acc.re = &acc.re + &Real::from_ratio(c, 2 * p);
        }
        acc
    }

    /// Certified image under embedding i as a ball.
    pub fn embed_ball(&self, i: usize) -> CBall {
        let p = self.field.precision_bits;
        let root = self.field.roots.full(i);
        let mut acc = CBall::exact(Cplx::zero(2 * p));
        for c in self.coords.iter().rev() {
            acc = acc.mul(&root);
            acc = acc.add(&CBall::exact(Cplx::real(Real::from_ratio(c, 2 * p))));
        }
        acc
    }
}

/// Logarithmic Mahler measure of an algebraic integer, base-2 logs:
/// the sum of log+|sigma_i(alpha)| over all d complex embeddings.
pub fn mahler_height(alpha: &AlgebraicNumber) -> Result<Real, FieldError> {
    if !alpha.is_integral() {
        return Err(FieldError::NotIntegral);
    }
    let f = &alpha.field;
    let p = f.precision_bits;
    let mut h = Real::zero(2 * p);
    let one = Real::from_i64(1, 2 * p);
    for i in 0..f.num_places() {
        let m = alpha.embed(i).abs();
        if m > one {
            let l = m.log2();
            let w = Real::from_i64(f.weight(i) as i64, 2 * p);
            h = &h + &(&l * &w);
        }
    }
    Ok(h.round_to(p))
}

/// Exact norm and trace (operation-level wrapper).
pub fn norm_trace(alpha: &AlgebraicNumber) -> (BigRational, BigRational) {
    alpha.norm_trace()
}

/// CM test: the field must be totally complex and gamma = sigma_1(theta) +
/// conj(sigma_1(theta)) must generate a totally real subfield of exact
/// degree d/2. The candidate minimal polynomial of gamma is detected
/// numerically from the embedding product and confirmed by residual
/// evaluation; reducible or non-real candidates mean "not CM".
pub fn is_cm(field: &Arc<NumberField>) -> Result<bool, FieldError> {
    if field.r1 != 0 {
        return Ok(false);
    }
    let p = field.precision_bits;
    let pw = 2 * p;
    // Candidate polynomial prod_k (x - 2 Re sigma_k(theta)).
    let mut coeffs: Vec<Real> = vec![Real::from_i64(1, pw)];
    for k in 0..field.r2 {
        let g = field.roots.roots[k].c.re.mul2k(1);
        let mut next = vec![Real::zero(pw); coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i + 1] = &next[i + 1] + c;
            next[i] = &next[i] - &(c * &g);
        }
        coeffs = next;
    }
    let tol_detect = Real::pow2(-(p as i64) / 4, pw);
    let mut int_coeffs = Vec::with_capacity(coeffs.len());
    for c in coeffs.iter() {
        let nearest = c.round_i64();
        let dev = (c - &Real::from_i64(nearest, pw)).abs();
        if dev > tol_detect {
            return Ok(false); // gamma has degree exceeding d/2
        }
        int_coeffs.push(BigInt::from(nearest));
    }
    let candidate = match IntPoly::new(int_coeffs) {
        Ok(q) => q,
        Err(_) => return Ok(false),
    };
    // Residual check at working precision.
    let gamma = field.roots.roots[0].c.re.mul2k(1);
    let resid = candidate.eval_real(&gamma).abs();
    if resid > Real::pow2(-(p as i64) / 2, pw) {
        return Err(FieldError::Inconclusive);
    }
    if !candidate.is_squarefree() {
        return Ok(false); // gamma degree < d/2
    }
    if !is_irreducible(&candidate, p)? {
        return Ok(false);
    }
    Ok(candidate.count_real_roots() == candidate.degree())
}

/// Irreducibility over Q by exhaustive root-subset testing: a proper factor
/// forces some proper subset of the certified roots to have all elementary
/// symmetric functions integral; detected candidates are confirmed by exact
/// trial division.
pub fn is_irreducible(poly: &IntPoly, precision: usize) -> Result<bool, FieldError> {
    let d = poly.degree();
    if d > 8 {
        return Err(FieldError::DegreeOutOfRange);
    }
    if !poly.is_squarefree() {
        return Err(FieldError::NotSquarefree);
    }
    if d == 1 {
        return Ok(true);
    }
    let mut p = precision;
    for _ in 0..3 {
        match irreducible_at(poly, p) {
            Some(v) => return Ok(v),
            None => p *= 2,
        }
    }
    Err(FieldError::PrecisionExhausted)
}

fn irreducible_at(poly: &IntPoly, p: usize) -> Option<bool> {
    let d = poly.degree();
    let roots = find_roots(poly, p).ok()?;
    let pw = 2 * p;
    let all: Vec<Cplx> = (0..d).map(|i| roots.full(i).c).collect();
    let tol = 2f64.powi(-(p as i32) / 4);
    for mask in 1u32..(1 << d) - 1 {
        let size = mask.count_ones() as usize;
        if size > d / 2 {
            continue; // the complement subset covers this factorization
        }
        let mut cs: Vec<Cplx> = vec![Cplx::one(pw)];
        for (i, root) in all.iter().enumerate() {
            if mask & (1 << i) == 0 {
                continue;
            }
            let mut next = vec![Cplx::zero(pw); cs.len() + 1];
            for (k, c) in cs.iter().enumerate() {
                next[k + 1] = next[k + 1].add(c);
                next[k] = next[k].sub(&c.mul(root));
            }
            cs = next;
        }
        cs.reverse();
        let mut ints = Vec::with_capacity(cs.len());
        let mut near = true;
        for c in &cs {
            let re = c.re.to_f64();
            let im = c.im.to_f64().abs();
            let nearest = re.round();
            if im > tol || (re - nearest).abs() > tol {
                near = false;
                break;
            }
            ints.push(BigInt::from(nearest as i64));
        }
        if !near {
            continue;
        }
        if let Ok(g) = IntPoly::new(ints) {
            if g.degree() < d && poly.div_exact(&g).is_some() {
                return Some(false);
            }
        }
        // Candidate looked integral but does not divide: ambiguous here.
        return None;
    }
    Some(true)
}

// -- helpers --

fn qpoly_extgcd_first(
    a: &[BigRational],
    b: &[BigRational],
) -> (Vec<BigRational>, Vec<BigRational>) {
    // Returns (gcd, u) with u*a = gcd mod b.
    let mut r0 = a.to_vec();
    let mut r1 = b.to_vec();
    let mut s0 = vec![BigRational::one()];
    let mut s1 = vec![BigRational::zero()];
    loop {
        if r1.iter().all(|c| c.is_zero()) {
            return (trim(r0), trim(s0));
        }
        let (q, r) = qpoly_divmod(&r0, &r1);
        let s = qpoly_sub_mul(&s0, &q, &s1);
        r0 = r1;
        r1 = r;
        s0 = s1;
        s1 = s;
    }
}

fn trim(mut v: Vec<BigRational>) -> Vec<BigRational> {
    while v.len() > 1 && v.last().unwrap().is_zero() {
        v.pop();
    }
    if v.is_empty() {
        v.push(BigRational::zero());
    }
    v
}

fn qpoly_divmod(a: &[BigRational], b: &[BigRational]) -> (Vec<BigRational>, Vec<BigRational>) {
    let mut r = trim(a.to_vec());
    let b = trim(b.to_vec());
    let db = b.len() - 1;
    let lead = b[db].clone();
    if r.len() - 1 < db || (r.len() == 1 && r[0].is_zero()) {
        return (vec![BigRational::zero()], r);
    }
    let mut q = vec![BigRational::zero(); r.len() - db];
    while !(r.len() == 1 && r[0].is_zero()) && r.len() - 1 >= db {
        let dr = r.len() - 1;
        if r[dr].is_zero() {
            r.pop();
            continue;
        }
        let f = &r[dr] / &lead;
        q[dr - db] = f.clone();
        for j in 0..=db {
            let v = &r[dr - db + j] - &(&f * &b[j]);
            r[dr - db + j] = v;
        }
        r.pop();
        if r.is_empty() {
            r.push(BigRational::zero());
            break;
        }
    }
    (q, trim(r))
}

fn qpoly_sub_mul(a: &[BigRational], q: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    // a - q*b
    let mut out = vec![BigRational::zero(); (q.len() + b.len()).max(a.len())];
    for (i, c) in a.iter().enumerate() {
        out[i] = out[i].clone() + c;
    }
    for (i, x) in q.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            let v = &out[i + j] - &(x * y);
            out[i + j] = v;
        }
    }
    trim(out)
}

fn det_rational(mut m: Vec<Vec<BigRational>>) -> BigRational {
    let n = m.len();
    let mut det = BigRational::one();
    for c in 0..n {
        let pivot = (c..n).find(|&i| !m[i][c].is_zero());
        let Some(pv) = pivot else {
            return BigRational::zero();
        };
        if pv != c {
            m.swap(c, pv);
            det = -det;
        }
        det = &det * &m[c][c];
        let inv = m[c][c].clone();
        for i in c + 1..n {
            if m[i][c].is_zero() {
                continue;
            }
            let f = &m[i][c] / &inv;
            for j in c..n {
                let v = &m[i][j] - &(&f * &m[c][j]);
                m[i][j] = v;
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic_field() -> Arc<NumberField> {
        let p = IntPoly::from_i64(&[-1, -2, 1, 1]).unwrap();
        NumberField::new(p, 128).unwrap()
    }

    #[test]
    fn cubic_roots_ascending_and_certified() {
        let f = cubic_field();
        assert_eq!(f.signature(), (3, 0));
        let want = [-1.8019377358048383, -0.4450418679126288, 1.246979603717467];
        for (b, w) in f.roots.roots.iter().zip(want) {
            assert!((b.c.re.to_f64() - w).abs() < 1e-12);
            assert!(b.r <= 2f64.powi(-64));
            let img = f.min_poly.eval_cball(b);
            assert!(img.contains_zero());
        }
    }

    #[test]
    fn signature_one_one() {
        let p = IntPoly::from_i64(&[-2, 0, 0, 1]).unwrap(); // x^3 - 2
        let f = NumberField::new(p, 128).unwrap();
        assert_eq!(f.signature(), (1, 1));
        assert!((f.roots.roots[0].c.re.to_f64() - 1.2599210498948732).abs() < 1e-12);
        assert!(f.roots.roots[1].c.im.to_f64() > 0.0);
    }

    #[test]
    fn not_squarefree_rejected() {
        let p = IntPoly::from_i64(&[1, -2, 1]).unwrap();
        assert_eq!(find_roots(&p, 128).unwrap_err(), FieldError::NotSquarefree);
    }

    #[test]
    fn mahler_height_values() {
        let f = cubic_field();
        let theta = f.theta();
        let h = mahler_height(&theta).unwrap().to_f64();
        assert!((h - 1.1679870289462966).abs() < 1e-12, "h = {h}");
        let h2 = mahler_height(&theta.mul(&theta)).unwrap().to_f64();
        assert!((h2 - 2.0 * 1.1679870289462966).abs() < 1e-12);
        let one = f.one();
        assert_eq!(mahler_height(&one).unwrap().to_f64(), 0.0);
    }

    #[test]
    fn power_rule_holds() {
        let f = cubic_field();
        let theta = f.theta();
        let h1 = mahler_height(&theta).unwrap().to_f64();
        for n in 2..=10i64 {
            let hn = mahler_height(&theta.pow(n).unwrap()).unwrap().to_f64();
            assert!((hn - n as f64 * h1).abs() < 2f64.powi(-32));
        }
    }

    #[test]
    fn norm_trace_exact() {
        let f = cubic_field();
        let theta = f.theta();
        let (n, t) = norm_trace(&theta);
        assert_eq!(n, BigRational::from(BigInt::from(1)));
        assert_eq!(t, BigRational::from(BigInt::from(-1)));
        let one = f.one();
        let (n1, t1) = norm_trace(&one);
        assert_eq!(n1, BigRational::one());
        assert_eq!(t1, BigRational::from(BigInt::from(3)));
        // theta - 1 has norm -p(1) = 1 by direct expansion.
        let tm1 = theta.sub(&f.one());
        let (nm, _) = norm_trace(&tm1);
        assert_eq!(nm, BigRational::from(BigInt::from(1)));
    }

    #[test]
    fn embedding_sum_is_trace() {
        let f = cubic_field();
        let theta = f.theta();
        let mut s = 0.0;
        for i in 0..3 {
            s += theta.embed(i).re.to_f64();
        }
        assert!((s + 1.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_and_unit() {
        let f = cubic_field();
        let theta = f.theta();
        let inv = theta.inverse().unwrap();
        assert!(theta.mul(&inv).is_one());
        assert!(theta.is_unit());
        let two = f.one().add(&f.one());
        assert!(!two.is_unit());
    }

    #[test]
    fn unit_log_sum_vanishes() {
        let f = cubic_field();
        let theta = f.theta();
        let mut s = 0.0;
        for i in 0..3 {
            s += theta.embed(i).abs().log2().to_f64();
        }
        assert!(s.abs() < 2f64.powi(-32));
    }

    #[test]
    fn cm_detection() {
        let f = cubic_field();
        assert!(!is_cm(&f).unwrap(), "totally real field cannot be CM");

        let cyc5 = IntPoly::from_i64(&[1, 1, 1, 1, 1]).unwrap();
        let f5 = NumberField::new(cyc5, 128).unwrap();
        assert_eq!(f5.signature(), (0, 2));
        assert!(is_cm(&f5).unwrap());

        let quartic = IntPoly::from_i64(&[-1, 0, 0, -1, 1]).unwrap(); // x^4 - x^3 - 1
        let fq = NumberField::new(quartic, 128).unwrap();
        assert_eq!(fq.signature(), (2, 1));
        assert!(!is_cm(&fq).unwrap());
    }

    #[test]
    fn irreducibility() {
        let cubic = IntPoly::from_i64(&[-1, -2, 1, 1]).unwrap();
        assert!(is_irreducible(&cubic, 128).unwrap());
        let x4m1 = IntPoly::from_i64(&[-1, 0, 0, 0, 1]).unwrap();
        assert!(!is_irreducible(&x4m1, 128).unwrap());
        let x3m2 = IntPoly::from_i64(&[-2, 0, 0, 1]).unwrap();
        assert!(is_irreducible(&x3m2, 128).unwrap());
    }
}
