//! Small dense matrices over the integers, rationals, and `Real`.
//!
//! Everything here is desk-scale (dimension at most ~10), so the algorithms
//! favor exactness over asymptotics: Bareiss fraction-free elimination for
//! determinants and ranks, cofactor adjugates for unimodular inverses, and
//! evaluation-interpolation for characteristic polynomials.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::prec::Real;

/// Dense integer matrix, row major.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct IMat {
    pub n: usize,
    pub a: Vec<BigInt>,
}

impl IMat {
    pub fn zero(n: usize) -> Self {
        IMat { n, a: vec![BigInt::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            m.a[i * n + i] = BigInt::one();
        }
        m
    }

    pub fn from_rows_i64(rows: &[Vec<i64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "square matrix required");
        let a = rows.iter().flatten().map(|&v| BigInt::from(v)).collect();
        IMat { n, a }
    }

    pub fn from_rows(rows: Vec<Vec<BigInt>>) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "square matrix required");
        IMat { n, a: rows.into_iter().flatten().collect() }
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.a[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.a[i * self.n + j] = v;
    }

    pub fn mul(&self, o: &IMat) -> IMat {
        assert_eq!(self.n, o.n);
        let n = self.n;
        let mut r = IMat::zero(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                if aik.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let v = aik * o.get(k, j);
                    r.a[i * n + j] += v;
                }
            }
        }
        r
    }

    pub fn sub(&self, o: &IMat) -> IMat {
        assert_eq!(self.n, o.n);
        let a = self.a.iter().zip(&o.a).map(|(x, y)| x - y).collect();
        IMat { n: self.n, a }
    }

    pub fn scalar(n: usize, v: BigInt) -> IMat {
        let mut m = IMat::zero(n);
        for i in 0..n {
            m.a[i * n + i] = v.clone();
        }
        m
    }

    pub fn transpose(&self) -> IMat {
        let n = self.n;
        let mut r = IMat::zero(n);
        for i in 0..n {
            for j in 0..n {
                r.a[j * n + i] = self.get(i, j).clone();
            }
        }
        r
    }

    pub fn is_identity(&self) -> bool {
        *self == IMat::identity(self.n)
    }

    pub fn matvec(&self, v: &[BigInt]) -> Vec<BigInt> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j) * &v[j]).sum())
            .collect()
    }

    /// Determinant by Bareiss fraction-free elimination.
    pub fn det(&self) -> BigInt {
        let n = self.n;
        if n == 0 {
            return BigInt::one();
        }
        let mut m = self.a.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if m[k * n + k].is_zero() {
                let swap = (k + 1..n).find(|&i| !m[i * n + k].is_zero());
                match swap {
                    Some(i) => {
                        for j in 0..n {
                            m.swap(k * n + j, i * n + j);
                        }
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (&m[i * n + j] * &m[k * n + k] - &m[i * n + k] * &m[k * n + j]) / &prev;
                    m[i * n + j] = v;
                }
                m[i * n + k] = BigInt::zero();
            }
            prev = m[k * n + k].clone();
        }
        sign * m[(n - 1) * n + (n - 1)].clone()
    }

    /// Rank via fraction-free elimination.
    pub fn rank_of_rows(rows: &[Vec<BigInt>]) -> usize {
        if rows.is_empty() {
            return 0;
        }
        let cols = rows[0].len();
        let mut m: Vec<Vec<BigRational>> = rows
            .iter()
            .map(|r| r.iter().map(|v| BigRational::from(v.clone())).collect())
            .collect();
        let mut rank = 0;
        for c in 0..cols {
            let pivot = (rank..m.len()).find(|&i| !m[i][c].is_zero());
            let Some(p) = pivot else { continue };
            m.swap(rank, p);
            let inv = m[rank][c].clone();
            for i in rank + 1..m.len() {
                if m[i][c].is_zero() {
                    continue;
                }
                let f = &m[i][c] / &inv;
                for j in c..cols {
                    let v = &m[i][j] - &(&f * &m[rank][j]);
                    m[i][j] = v;
                }
            }
            rank += 1;
            if rank == m.len() {
                break;
            }
        }
        rank
    }

    /// Inverse of a matrix with determinant ±1, exact over the integers.
    pub fn inverse_unimodular(&self) -> IMat {
        let d = self.det();
        assert!(d.abs().is_one(), "matrix is not unimodular");
        let n = self.n;
        let mut adj = IMat::zero(n);
        for i in 0..n {
            for j in 0..n {
                let minor = self.minor(i, j).det();
                let s = if (i + j) % 2 == 0 { minor } else { -minor };
                adj.a[j * n + i] = s; // transposed cofactor
            }
        }
        if d.is_negative() {
            for v in adj.a.iter_mut() {
                *v = -(v.clone());
            }
        }
        adj
    }

    fn minor(&self, row: usize, col: usize) -> IMat {
        let n = self.n;
        let mut b = IMat::zero(n - 1);
        let mut bi = 0;
        for i in 0..n {
            if i == row {
                continue;
            }
            let mut bj = 0;
            for j in 0..n {
                if j == col {
                    continue;
                }
                b.a[bi * (n - 1) + bj] = self.get(i, j).clone();
                bj += 1;
            }
            bi += 1;
        }
        b
    }

    /// Integer power; negative exponents use the unimodular inverse.
    pub fn pow(&self, e: i64) -> IMat {
        let base = if e < 0 { self.inverse_unimodular() } else { self.clone() };
        let mut e = e.unsigned_abs();
        let mut acc = IMat::identity(self.n);
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
        acc
    }

    /// Characteristic polynomial det(xI - A), monic, ascending coefficients.
    pub fn charpoly(&self) -> Vec<BigInt> {
        let n = self.n;
        // Evaluate det(kI - A) at k = 0..n and interpolate.
        let xs: Vec<BigInt> = (0..=n as i64).map(BigInt::from).collect();
        let ys: Vec<BigInt> = xs
            .iter()
            .map(|k| IMat::scalar(n, k.clone()).sub(self).det())
            .collect();
        let coeffs = lagrange_interpolate_int(&xs, &ys);
        assert_eq!(coeffs.len(), n + 1);
        assert!(coeffs[n].is_one(), "characteristic polynomial must be monic");
        coeffs
    }

    /// Entries reduced mod m as u64 (m < 2^32 recommended for mulmod headroom).
    pub fn reduce_mod(&self, m: u64) -> ModMat {
        let mm = BigInt::from(m);
        let a = self
            .a
            .iter()
            .map(|v| {
                let r = ((v % &mm) + &mm) % &mm;
                r.to_u64_digits().1.first().copied().unwrap_or(0)
            })
            .collect();
        ModMat { n: self.n, m, a }
    }
}

/// Integer matrix with entries reduced modulo `m`.
#[derive(Clone, Debug)]
pub struct ModMat {
    pub n: usize,
    pub m: u64,
    pub a: Vec<u64>,
}

impl ModMat {
    pub fn identity(n: usize, m: u64) -> Self {
        let mut a = vec![0u64; n * n];
        for i in 0..n {
            a[i * n + i] = 1 % m;
        }
        ModMat { n, m, a }
    }

    pub fn mul(&self, o: &ModMat) -> ModMat {
        assert_eq!(self.n, o.n);
        assert_eq!(self.m, o.m);
        let n = self.n;
        let m = self.m as u128;
        let mut r = vec![0u64; n * n];
        for i in 0..n {
            for k in 0..n {
                let aik = self.a[i * n + k] as u128;
                if aik == 0 {
                    continue;
                }
                for j in 0..n {
                    let v = (r[i * n + j] as u128 + aik * o.a[k * n + j] as u128) % m;
                    r[i * n + j] = v as u64;
                }
            }
        }
        ModMat { n, m: self.m, a: r }
    }

    pub fn pow(&self, e: u128) -> ModMat {
        self.pow_big(&BigInt::from(e))
    }

    /// Power with an arbitrary nonnegative exponent.
    pub fn pow_big(&self, e: &BigInt) -> ModMat {
        assert!(!e.is_negative());
        let mut acc = ModMat::identity(self.n, self.m);
        let mut sq = self.clone();
        let (_, digits) = e.to_u64_digits();
        let bits = 64 * digits.len();
        let mut processed = 0;
        for word in digits {
            for b in 0..64 {
                if processed >= bits {
                    break;
                }
                if (word >> b) & 1 == 1 {
                    acc = acc.mul(&sq);
                }
                processed += 1;
                if processed < bits {
                    sq = sq.mul(&sq);
                }
            }
        }
        acc
    }

    /// Transposed action on a vector: v^T M.
    pub fn vecmat(&self, v: &[u64]) -> Vec<u64> {
        let n = self.n;
        let m = self.m as u128;
        (0..n)
            .map(|j| {
                let mut s = 0u128;
                for i in 0..n {
                    s = (s + v[i] as u128 * self.a[i * n + j] as u128) % m;
                }
                s as u64
            })
            .collect()
    }

    pub fn matvec(&self, v: &[u64]) -> Vec<u64> {
        let n = self.n;
        let m = self.m as u128;
        (0..n)
            .map(|i| {
                let mut s = 0u128;
                for j in 0..n {
                    s = (s + self.a[i * n + j] as u128 * v[j] as u128) % m;
                }
                s as u64
            })
            .collect()
    }
}

/// Exact interpolation through integer points with integer result.
fn lagrange_interpolate_int(xs: &[BigInt], ys: &[BigInt]) -> Vec<BigInt> {
    let n = xs.len();
    let mut acc = vec![BigRational::zero(); n];
    for i in 0..n {
        // Basis polynomial prod_{j != i} (x - x_j) / (x_i - x_j).
        let mut basis = vec![BigRational::zero(); n];
        basis[0] = BigRational::one();
        let mut deg = 0;
        let mut denom = BigRational::one();
        for j in 0..n {
            if j == i {
                continue;
            }
            for k in (0..=deg).rev() {
                let shifted = basis[k].clone();
                basis[k + 1] = &basis[k + 1] + &shifted;
                basis[k] = -&shifted * BigRational::from(xs[j].clone());
            }
            deg += 1;
            denom *= BigRational::from(&xs[i] - &xs[j]);
        }
        let w = BigRational::from(ys[i].clone()) / denom;
        for k in 0..n {
            let v = &acc[k] + &(&basis[k] * &w);
            acc[k] = v;
        }
    }
    acc.into_iter()
        .map(|q| {
            assert!(q.denom().is_one(), "interpolation must be integral");
            q.numer().clone()
        })
        .collect()
}

/// Solve A x = b over the rationals. Returns None when A is singular.
pub fn solve_rational(a: &[Vec<BigRational>], b: &[BigRational]) -> Option<Vec<BigRational>> {
    let n = a.len();
    let mut m: Vec<Vec<BigRational>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    for c in 0..n {
        let pivot = (c..n).find(|&i| !m[i][c].is_zero())?;
        m.swap(c, pivot);
        let inv = m[c][c].clone();
        for j in c..=n {
            let v = &m[c][j] / &inv;
            m[c][j] = v;
        }
        for i in 0..n {
            if i == c || m[i][c].is_zero() {
                continue;
            }
            let f = m[i][c].clone();
            for j in c..=n {
                let v = &m[i][j] - &(&f * &m[c][j]);
                m[i][j] = v;
            }
        }
    }
    Some(m.into_iter().map(|row| row[n].clone()).collect())
}

/// Row-style Hermite normal form of full-rank rows: upper triangular,
/// positive diagonal, entries above each pivot reduced into [0, pivot).
pub fn hnf_rows(rows: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let n = rows.len();
    let cols = rows[0].len();
    let mut m: Vec<Vec<BigInt>> = rows.to_vec();
    let mut r = 0;
    for c in 0..cols {
        if r == n {
            break;
        }
        // Euclid over rows >= r until a single nonzero remains in column c.
        loop {
            let mut nz: Vec<usize> = (r..n).filter(|&i| !m[i][c].is_zero()).collect();
            if nz.is_empty() {
                break;
            }
            if nz.len() == 1 {
                m.swap(r, nz[0]);
                break;
            }
            nz.sort_by_key(|&i| m[i][c].abs());
            let (ia, ib) = (nz[0], nz[1]);
            let q = floor_div(&m[ib][c], &m[ia][c]);
            for j in 0..cols {
                let v = &m[ib][j] - &q * &m[ia][j];
                m[ib][j] = v;
            }
        }
        if m[r][c].is_zero() {
            continue;
        }
        if m[r][c].is_negative() {
            for j in 0..cols {
                let v = -m[r][j].clone();
                m[r][j] = v;
            }
        }
        // Reduce rows above the pivot.
        for i in 0..r {
            if m[i][c].is_zero() {
                continue;
            }
            let q = floor_div(&m[i][c], &m[r][c]);
            for j in 0..cols {
                let v = &m[i][j] - &q * &m[r][j];
                m[i][j] = v;
            }
        }
        r += 1;
    }
    m
}

/// Column-style Hermite normal form of a full-rank integer matrix whose
/// columns generate the lattice. Result is lower triangular with positive
/// diagonal; the generated lattice is unchanged.
pub fn hnf_columns(basis: &IMat) -> IMat {
    let n = basis.n;
    let rows: Vec<Vec<BigInt>> = (0..n)
        .map(|j| (0..n).map(|i| basis.get(i, j).clone()).collect())
        .collect();
    let h = hnf_rows(&rows);
    let mut out = IMat::zero(n);
    for (j, row) in h.iter().enumerate() {
        for i in 0..n {
            out.a[i * n + j] = row[i].clone();
        }
    }
    out
}

fn floor_div(a: &BigInt, b: &BigInt) -> BigInt {
    let (q, r) = num_integer::Integer::div_mod_floor(a, b);
    debug_assert!(!r.is_negative());
    q
}

/// Dense matrix over `Real`, row major.
#[derive(Clone, Debug)]
pub struct RMat {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<Real>,
}

impl RMat {
    pub fn zero(rows: usize, cols: usize, p: usize) -> Self {
        RMat { rows, cols, a: vec![Real::zero(p); rows * cols] }
    }

    pub fn get(&self, i: usize, j: usize) -> &Real {
        &self.a[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Real) {
        self.a[i * self.cols + j] = v;
    }

    pub fn matvec(&self, v: &[Real]) -> Vec<Real> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let mut s = Real::zero(v[0].prec());
                for j in 0..self.cols {
                    s = &s + &(self.get(i, j) * &v[j]);
                }
                s
            })
            .collect()
    }

    pub fn mul(&self, o: &RMat) -> RMat {
        assert_eq!(self.cols, o.rows);
        let p = self.a[0].prec().max(o.a[0].prec());
        let mut r = RMat::zero(self.rows, o.cols, p);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k).clone();
                if aik.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let v = &r.a[i * o.cols + j] + &(&aik * o.get(k, j));
                    r.a[i * o.cols + j] = v;
                }
            }
        }
        r
    }

    /// LU determinant with partial pivoting.
    pub fn det(&self) -> Real {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let p = self.a[0].prec();
        let mut m = self.a.clone();
        let mut det = Real::from_i64(1, p);
        for c in 0..n {
            let pivot = (c..n).max_by(|&i, &j| {
                m[i * n + c].abs().partial_cmp(&m[j * n + c].abs()).unwrap()
            });
            let pv = pivot.unwrap();
            if m[pv * n + c].is_zero() {
                return Real::zero(p);
            }
            if pv != c {
                for j in 0..n {
                    m.swap(c * n + j, pv * n + j);
                }
                det = -&det;
            }
            det = &det * &m[c * n + c];
            for i in c + 1..n {
                if m[i * n + c].is_zero() {
                    continue;
                }
                let f = &m[i * n + c] / &m[c * n + c];
                for j in c..n {
                    let v = &m[i * n + j] - &(&f * &m[c * n + j]);
                    m[i * n + j] = v;
                }
            }
        }
        det
    }

    /// Gauss-Jordan inverse with partial pivoting.
    pub fn inverse(&self) -> Option<RMat> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let p = self.a[0].prec();
        let mut m = self.a.clone();
        let mut inv = RMat::zero(n, n, p);
        for i in 0..n {
            inv.set(i, i, Real::from_i64(1, p));
        }
        for c in 0..n {
            let pv = (c..n).max_by(|&i, &j| {
                m[i * n + c].abs().partial_cmp(&m[j * n + c].abs()).unwrap()
            })?;
            if m[pv * n + c].is_zero() {
                return None;
            }
            if pv != c {
                for j in 0..n {
                    m.swap(c * n + j, pv * n + j);
                    inv.a.swap(c * n + j, pv * n + j);
                }
            }
            let d = m[c * n + c].clone();
            for j in 0..n {
                m[c * n + j] = &m[c * n + j] / &d;
                inv.a[c * n + j] = &inv.a[c * n + j] / &d;
            }
            for i in 0..n {
                if i == c || m[i * n + c].is_zero() {
                    continue;
                }
                let f = m[i * n + c].clone();
                for j in 0..n {
                    let v = &m[i * n + j] - &(&f * &m[c * n + j]);
                    m[i * n + j] = v;
                    let w = &inv.a[i * n + j] - &(&f * &inv.a[c * n + j]);
                    inv.a[i * n + j] = w;
                }
            }
        }
        Some(inv)
    }

    pub fn transpose(&self) -> RMat {
        let p = self.a[0].prec();
        let mut r = RMat::zero(self.cols, self.rows, p);
        for i in 0..self.rows {
            for j in 0..self.cols {
                r.set(j, i, self.get(i, j).clone());
            }
        }
        r
    }

    /// Largest singular value by power iteration on A^T A.
    pub fn operator_norm(&self) -> Real {
        let p = self.a[0].prec();
        let ata = self.transpose().mul(self);
        let n = ata.rows;
        let mut v: Vec<Real> = (0..n).map(|i| Real::from_i64(1 + (i % 3) as i64, p)).collect();
        let mut lambda = Real::zero(p);
        for _ in 0..4 * p {
            let w = ata.matvec(&v);
            let norm = w
                .iter()
                .fold(Real::zero(p), |acc, x| &acc + &(x * x))
                .sqrt();
            if norm.is_zero() {
                return Real::zero(p);
            }
            v = w.iter().map(|x| x / &norm).collect();
            lambda = norm;
        }
        lambda.sqrt()
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).to_f64()).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_and_charpoly() {
        let a = IMat::from_rows_i64(&[vec![0, 0, 1], vec![1, 0, 2], vec![0, 1, -1]]);
        assert_eq!(a.det(), BigInt::one());
        // Companion of x^3 + x^2 - 2x - 1.
        let cp = a.charpoly();
        let want: Vec<BigInt> =
            [-1i64, -2, 1, 1].iter().map(|&v| BigInt::from(v)).collect();
        assert_eq!(cp, want);
    }

    #[test]
    fn unimodular_inverse() {
        let a = IMat::from_rows_i64(&[vec![2, 1, 0], vec![1, 1, 0], vec![3, 5, 1]]);
        let inv = a.inverse_unimodular();
        assert!(a.mul(&inv).is_identity());
        assert!(inv.mul(&a).is_identity());
    }

    #[test]
    fn pow_negative() {
        let a = IMat::from_rows_i64(&[vec![0, 0, 1], vec![1, 0, 2], vec![0, 1, -1]]);
        let prod = a.pow(3).mul(&a.pow(-3));
        assert!(prod.is_identity());
    }

    #[test]
    fn modmat_pow_matches_exact() {
        let a = IMat::from_rows_i64(&[vec![0, 0, 1], vec![1, 0, 2], vec![0, 1, -1]]);
        let m = 101u64;
        let exact = a.pow(20).reduce_mod(m);
        let modular = a.reduce_mod(m).pow(20);
        assert_eq!(exact.a, modular.a);
    }

    #[test]
    fn hnf_triangular() {
        let b = IMat::from_rows_i64(&[vec![4, 2, 0], vec![2, 3, 1], vec![0, 1, 5]]);
        let h = hnf_columns(&b);
        let det_b = b.det().abs();
        let det_h = h.det().abs();
        assert_eq!(det_b, det_h);
        for i in 0..3 {
            for j in i + 1..3 {
                assert!(h.get(i, j).is_zero(), "entries above the diagonal must vanish");
            }
            assert!(h.get(i, i).is_positive());
        }
    }

    #[test]
    fn rmat_inverse_roundtrip() {
        let p = 128;
        let mut m = RMat::zero(3, 3, p);
        let vals = [[2.0, 1.0, 0.5], [0.0, 1.5, -1.0], [1.0, 0.0, 3.0]];
        for i in 0..3 {
            for j in 0..3 {
                m.set(i, j, Real::from_f64(vals[i][j], p));
            }
        }
        let inv = m.inverse().unwrap();
        let prod = m.mul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod.get(i, j).to_f64() - want).abs() < 1e-30);
            }
        }
        let norm = m.operator_norm().to_f64();
        assert!(norm > 3.0 && norm < 4.2, "norm {norm}");
    }

    #[test]
    fn rank_detects_dependence() {
        let rows = vec![
            vec![BigInt::from(1), BigInt::from(2)],
            vec![BigInt::from(2), BigInt::from(4)],
        ];
        assert_eq!(IMat::rank_of_rows(&rows), 1);
    }
}
