//! The Dirichlet log lattice of a unit family: embedding into the
//! trace-zero subspace, the weighted h0 norm and Q0 form, successive
//! minima and nearest-point search by exhaustive certified enumeration,
//! the fundamental-unit size, and the bounded search for a totally
//! irreducible group element.

use crate::conjugacy::ConjugacyData;
use crate::matrix::IMat;
use crate::numfield::{is_irreducible, AlgebraicNumber, FieldError};
use crate::poly::IntPoly;
use crate::prec::{Cplx, Real};

#[derive(thiserror::Error, Debug, Clone, PartialEq, Eq)]
pub enum UnitLogError {
    #[error("element is not a unit")]
    NotAUnit,
    #[error("enumeration radius too small to contain a full-rank witness set")]
    RadiusTooSmall,
    #[error("generator log vectors are linearly dependent")]
    DependentGenerators,
    #[error("no totally irreducible element within the search bound")]
    SearchExhausted,
    #[error("enumeration exceeded the point budget")]
    BudgetExceeded,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Image of a unit under the log embedding: one coordinate per infinite
/// place, with local-degree weights.
#[derive(Clone, Debug)]
pub struct LogVector {
    pub coords: Vec<Real>,
    pub weights: Vec<u8>,
}

impl LogVector {
    pub fn zero(places: usize, weights: Vec<u8>, p: usize) -> Self {
        LogVector { coords: vec![Real::zero(p); places], weights }
    }

    pub fn add(&self, o: &LogVector) -> LogVector {
        let coords = self.coords.iter().zip(&o.coords).map(|(a, b)| a + b).collect();
        LogVector { coords, weights: self.weights.clone() }
    }

    pub fn sub(&self, o: &LogVector) -> LogVector {
        let coords = self.coords.iter().zip(&o.coords).map(|(a, b)| a - b).collect();
        LogVector { coords, weights: self.weights.clone() }
    }

    pub fn scale_i64(&self, k: i64) -> LogVector {
        let p = self.coords[0].prec();
        let f = Real::from_i64(k, p);
        let coords = self.coords.iter().map(|c| c * &f).collect();
        LogVector { coords, weights: self.weights.clone() }
    }

    /// Weighted coordinate sum; vanishes on the trace-zero subspace.
    pub fn weighted_sum(&self) -> Real {
        let p = self.coords[0].prec();
        let mut s = Real::zero(p);
        for (c, w) in self.coords.iter().zip(&self.weights) {
            s = &s + &(c * &Real::from_i64(*w as i64, p));
        }
        s
    }
}

/// h0(w) = (1/2) sum d_j |w_j|.
pub fn h0_norm(w: &LogVector) -> Real {
    let p = w.coords[0].prec();
    let mut s = Real::zero(p);
    for (c, d) in w.coords.iter().zip(&w.weights) {
        s = &s + &(&c.abs() * &Real::from_i64(*d as i64, p));
    }
    s.mul2k(-1)
}

/// Q0(w, z) = (1/2) sum d_j w_j z_j.
pub fn q0_form(w: &LogVector, z: &LogVector) -> Real {
    let p = w.coords[0].prec();
    let mut s = Real::zero(p);
    for ((a, b), d) in w.coords.iter().zip(&z.coords).zip(&w.weights) {
        s = &s + &(&(a * b) * &Real::from_i64(*d as i64, p));
    }
    s.mul2k(-1)
}

/// Log embedding of a unit: coordinates log2 |sigma_i(t)| over the infinite
/// places. Errors unless the element is an algebraic integer of norm +-1.
pub fn log_embed(unit: &AlgebraicNumber) -> Result<LogVector, UnitLogError> {
    if !unit.is_unit() {
        return Err(UnitLogError::NotAUnit);
    }
    let f = &unit.field;
    let coords = (0..f.num_places())
        .map(|i| unit.embed(i).abs().log2())
        .collect();
    let weights = (0..f.num_places()).map(|i| f.weight(i) as u8).collect();
    Ok(LogVector { coords, weights })
}

/// Full-rank sublattice of the trace-zero subspace spanned by the log
/// vectors of the supplied units.
#[derive(Clone, Debug)]
pub struct LogLattice {
    pub basis: Vec<LogVector>,
}

impl LogLattice {
    pub fn new(basis: Vec<LogVector>) -> Result<Self, UnitLogError> {
        assert!(!basis.is_empty());
        let rows: Vec<Vec<f64>> = basis
            .iter()
            .map(|v| v.coords.iter().map(|c| c.to_f64()).collect())
            .collect();
        if f64_rank(rows, 1e-12) != basis.len() {
            return Err(UnitLogError::DependentGenerators);
        }
        Ok(LogLattice { basis })
    }

    pub fn from_conjugacy(conj: &ConjugacyData) -> Result<Self, UnitLogError> {
        let basis = conj
            .phi
            .iter()
            .map(log_embed)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(basis)
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn combine(&self, exponents: &[i64]) -> LogVector {
        let mut acc = LogVector::zero(
            self.basis[0].coords.len(),
            self.basis[0].weights.clone(),
            self.basis[0].coords[0].prec(),
        );
        for (e, b) in exponents.iter().zip(&self.basis) {
            if *e != 0 {
                acc = acc.add(&b.scale_i64(*e));
            }
        }
        acc
    }

    /// Gram matrix of the basis under Q0 as f64.
    fn gram(&self) -> Vec<Vec<f64>> {
        let r = self.rank();
        (0..r)
            .map(|i| {
                (0..r)
                    .map(|j| q0_form(&self.basis[i], &self.basis[j]).to_f64())
                    .collect()
            })
            .collect()
    }

    /// Coefficient box which provably contains every lattice point with
    /// Q0-norm at most radius (and therefore every point with h0 <= radius,
    /// since Q0 <= h0^2 on the trace-zero subspace).
    fn coefficient_bounds(&self, radius: f64) -> Option<Vec<i64>> {
        let g = self.gram();
        let ginv = f64_inverse(&g)?;
        let r = self.rank();
        Some(
            (0..r)
                .map(|i| {
                    let b = radius * ginv[i][i].max(0.0).sqrt() * 1.0000001 + 1e-9;
                    b.floor() as i64
                })
                .collect(),
        )
    }

    /// All nonzero lattice points with h0 <= radius, sorted by (h0, lex).
    pub fn enumerate_ball(
        &self,
        radius: f64,
        budget: usize,
    ) -> Result<Vec<(Vec<i64>, LogVector, Real)>, UnitLogError> {
        let bounds = self
            .coefficient_bounds(radius)
            .ok_or(UnitLogError::DependentGenerators)?;
        let count: u128 = bounds.iter().map(|&b| 2 * b as u128 + 1).product();
        if count > budget as u128 {
            return Err(UnitLogError::BudgetExceeded);
        }
        let r = self.rank();
        let p = self.basis[0].coords[0].prec();
        let rad = Real::from_f64(radius, p);
        let mut out = Vec::new();
        let mut idx: Vec<i64> = bounds.iter().map(|&b| -b).collect();
        loop {
            if idx.iter().any(|&e| e != 0) {
                let v = self.combine(&idx);
                let h = h0_norm(&v);
                if h <= rad {
                    out.push((idx.clone(), v, h));
                }
            }
            let mut pos = 0;
            loop {
                if pos == r {
                    break;
                }
                idx[pos] += 1;
                if idx[pos] > bounds[pos] {
                    idx[pos] = -bounds[pos];
                    pos += 1;
                } else {
                    break;
                }
            }
            if pos == r {
                break;
            }
        }
        out.sort_by(|a, b| {
            a.2.partial_cmp(&b.2)
                .unwrap()
                .then_with(|| a.0.cmp(&b.0))
        });
        Ok(out)
    }
}

/// Successive minima of the lattice with respect to the h0 unit ball,
/// with independent witnesses, by exhaustive enumeration up to the given
/// radius. Errors when fewer than rank independent vectors fit.
#[derive(Clone, Debug)]
pub struct MinimaResult {
    pub minima: Vec<Real>,
    pub witnesses: Vec<Vec<i64>>,
}

pub fn successive_minima(
    lattice: &LogLattice,
    radius: f64,
    budget: usize,
) -> Result<MinimaResult, UnitLogError> {
    let pts = lattice.enumerate_ball(radius, budget)?;
    let r = lattice.rank();
    let mut minima = Vec::with_capacity(r);
    let mut witnesses: Vec<Vec<i64>> = Vec::with_capacity(r);
    for (expo, _v, h) in pts {
        let mut rows: Vec<Vec<num_bigint::BigInt>> = witnesses
            .iter()
            .map(|w| w.iter().map(|&x| num_bigint::BigInt::from(x)).collect())
            .collect();
        rows.push(expo.iter().map(|&x| num_bigint::BigInt::from(x)).collect());
        if IMat::rank_of_rows(&rows) == rows.len() {
            minima.push(h);
            witnesses.push(expo);
            if witnesses.len() == r {
                return Ok(MinimaResult { minima, witnesses });
            }
        }
    }
    Err(UnitLogError::RadiusTooSmall)
}

/// Nearest lattice point to a target in h0 distance, by exhaustive
/// enumeration of a box guaranteed to contain the minimizer. Ties break
/// lexicographically on the exponent vector.
pub fn jarnik_nearest(
    lattice: &LogLattice,
    target: &LogVector,
    budget: usize,
) -> Result<(Vec<i64>, LogVector, Real), UnitLogError> {
    let r = lattice.rank();
    // A radius certainly achievable: the inhomogeneous minimum is at most
    // m* = (sum of successive minima)/2; grow until minima exist.
    let mut radius = 1.0;
    let minima = loop {
        match successive_minima(lattice, radius, budget) {
            Ok(m) => break m,
            Err(UnitLogError::RadiusTooSmall) => radius *= 2.0,
            Err(e) => return Err(e),
        }
    };
    let m_star: f64 = minima.minima.iter().map(|m| m.to_f64()).sum::<f64>() / 2.0;

    // Solve for the real coordinates of the target in the basis (least
    // squares under Q0; the target lies in the span for full-rank lattices).
    let g = lattice.gram();
    let ginv = f64_inverse(&g).ok_or(UnitLogError::DependentGenerators)?;
    let rhs: Vec<f64> = (0..r)
        .map(|i| q0_form(&lattice.basis[i], target).to_f64())
        .collect();
    let x: Vec<f64> = (0..r)
        .map(|i| (0..r).map(|j| ginv[i][j] * rhs[j]).sum())
        .collect();

    // Any point within h0 distance m* of the target satisfies
    // Q0(w - t) <= m*^2; coefficients of w - (coords x) are bounded by the
    // same ellipsoid estimate as in the homogeneous case.
    let mut best: Option<(Vec<i64>, LogVector, Real)> = None;
    let spread: Vec<i64> = (0..r)
        .map(|i| (m_star * ginv[i][i].max(0.0).sqrt() * 1.0000001 + 1.0).ceil() as i64)
        .collect();
    let count: u128 = spread.iter().map(|&b| 2 * b as u128 + 1).product();
    if count > budget as u128 {
        return Err(UnitLogError::BudgetExceeded);
    }
    let mut idx: Vec<i64> = (0..r).map(|i| x[i].round() as i64 - spread[i]).collect();
    let lo = idx.clone();
    loop {
        let v = lattice.combine(&idx);
        let dist = h0_norm(&v.sub(target));
        let better = match &best {
            None => true,
            Some((bi, _, bd)) => {
                dist < *bd || (dist == *bd && idx < *bi)
            }
        };
        if better {
            best = Some((idx.clone(), v, dist));
        }
        let mut pos = 0;
        loop {
            if pos == r {
                break;
            }
            idx[pos] += 1;
            if idx[pos] > x[pos].round() as i64 + spread[pos] {
                idx[pos] = lo[pos];
                pos += 1;
            } else {
                break;
            }
        }
        if pos == r {
            break;
        }
    }
    Ok(best.expect("box is nonempty"))
}

/// Minimal F such that the h0-ball of radius F contains rank-many
/// independent lattice vectors; equals the largest successive minimum.
#[derive(Clone, Debug)]
pub struct FundamentalSize {
    pub value: Real,
    pub minima: Vec<Real>,
    pub witnesses: Vec<Vec<i64>>,
}

pub fn fundamental_size(lattice: &LogLattice, budget: usize) -> Result<FundamentalSize, UnitLogError> {
    // The basis itself gives rank independent vectors at its max h0.
    let start = lattice
        .basis
        .iter()
        .map(|b| h0_norm(b).to_f64())
        .fold(0.0f64, f64::max)
        * 1.001
        + 1e-9;
    let mut radius = start;
    for _ in 0..8 {
        match successive_minima(lattice, radius, budget) {
            Ok(m) => {
                let value = m.minima.last().unwrap().clone();
                return Ok(FundamentalSize { value, minima: m.minima, witnesses: m.witnesses });
            }
            Err(UnitLogError::RadiusTooSmall) => radius *= 2.0,
            Err(e) => return Err(e),
        }
    }
    Err(UnitLogError::RadiusTooSmall)
}

/// Largest m with Euler phi(m) <= bound; root-of-unity orders of elements
/// of bounded degree are at most this.
pub fn max_root_of_unity_order(bound: usize) -> u64 {
    let cap = (2 * bound * bound) as u64 + 1;
    let mut best = 1;
    for m in 1..=cap {
        if euler_phi(m) <= bound as u64 {
            best = m;
        }
    }
    best
}

fn euler_phi(mut n: u64) -> u64 {
    let mut result = n;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            while n % p == 0 {
                n /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if n > 1 {
        result -= result / n;
    }
    result
}

/// A totally irreducible element found by bounded search.
#[derive(Clone, Debug)]
pub struct IrreducibleWitness {
    pub exponents: Vec<i64>,
    pub matrix: IMat,
    pub phi: AlgebraicNumber,
    pub height: Real,
    /// Whether the height is within the configured multiple of the
    /// fundamental size (reported, not enforced).
    pub within_height_budget: bool,
}

/// Search exponent vectors by increasing h0 of the log vector for an
/// element whose characteristic polynomial is irreducible and whose
/// eigenvalue ratios of equal modulus are certified not to be roots of
/// unity (checked up to the maximal possible order for the degree).
pub fn find_totally_irreducible(
    conj: &ConjugacyData,
    search_n: i64,
    height_factor: f64,
    budget: usize,
) -> Result<IrreducibleWitness, UnitLogError> {
    let lattice = LogLattice::from_conjugacy(conj)?;
    let fund = fundamental_size(&lattice, budget)?;
    let d = conj.dim();
    let p = conj.precision();
    let m_max = max_root_of_unity_order(d * d);
    let tol = Real::pow2(-(p as i64) / 4, 2 * p);

    // Candidates ordered by h0 norm.
    let k = conj.group.generators.len();
    let mut cands: Vec<(f64, Vec<i64>)> = Vec::new();
    let mut idx = vec![-search_n; k];
    loop {
        if idx.iter().any(|&e| e != 0) {
            let h = h0_norm(&lattice.combine(&idx)).to_f64();
            cands.push((h, idx.clone()));
        }
        let mut pos = 0;
        loop {
            if pos == k {
                break;
            }
            idx[pos] += 1;
            if idx[pos] > search_n {
                idx[pos] = -search_n;
                pos += 1;
            } else {
                break;
            }
        }
        if pos == k {
            break;
        }
    }
    // Ties on h0 prefer small exponent l1 norm, then the lexicographically
    // largest vector (so positive powers of early generators come first).
    cands.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then_with(|| {
                let la: i64 = a.1.iter().map(|e| e.abs()).sum();
                let lb: i64 = b.1.iter().map(|e| e.abs()).sum();
                la.cmp(&lb)
            })
            .then_with(|| b.1.cmp(&a.1))
    });

    'cand: for (_, expo) in cands {
        let m = conj.matrix_product(&expo);
        let cp = match IntPoly::new(m.charpoly()) {
            Ok(c) => c,
            Err(_) => continue,
        };
        if !matches!(is_irreducible(&cp, p), Ok(true)) {
            continue;
        }
        let phi = conj.phi_product(&expo);
        // Eigenvalue-ratio test over all distinct embedding pairs with
        // equal moduli.
        let embeds: Vec<Cplx> = (0..d).map(|i| phi.embed(i)).collect();
        for i in 0..d {
            for j in 0..d {
                if i == j {
                    continue;
                }
                let mi = embeds[i].abs();
                let mj = embeds[j].abs();
                if (&mi - &mj).abs() > tol {
                    continue; // moduli differ, ratio cannot be a root of unity
                }
                let ratio = embeds[i].div(&embeds[j]);
                let mut pw = ratio.clone();
                for _ in 1..=m_max {
                    let dev = &(&pw.re - &Real::from_i64(1, 2 * p)).abs() + &pw.im.abs();
                    if dev < tol {
                        continue 'cand; // ratio is (numerically) a root of unity
                    }
                    pw = pw.mul(&ratio);
                }
            }
        }
        let height = crate::numfield::mahler_height(&phi)?;
        let within = height.to_f64() <= height_factor * fund.value.to_f64() + 1e-12;
        return Ok(IrreducibleWitness {
            exponents: expo,
            matrix: m,
            phi,
            height,
            within_height_budget: within,
        });
    }
    Err(UnitLogError::SearchExhausted)
}

fn f64_rank(mut rows: Vec<Vec<f64>>, tol: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let cols = rows[0].len();
    let mut rank = 0;
    for c in 0..cols {
        let pivot = (rank..rows.len())
            .max_by(|&a, &b| rows[a][c].abs().partial_cmp(&rows[b][c].abs()).unwrap());
        let Some(p) = pivot else { break };
        if rows[p][c].abs() <= tol {
            continue;
        }
        rows.swap(rank, p);
        let inv = rows[rank][c];
        for i in 0..rows.len() {
            if i == rank {
                continue;
            }
            let f = rows[i][c] / inv;
            for j in 0..cols {
                rows[i][j] -= f * rows[rank][j];
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

fn f64_inverse(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().partial_cmp(&a[y][c].abs()).unwrap())?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        inv.swap(c, p);
        let d = a[c][c];
        for j in 0..n {
            a[c][j] /= d;
            inv[c][j] /= d;
        }
        for i in 0..n {
            if i == c {
                continue;
            }
            let f = a[i][c];
            for j in 0..n {
                a[i][j] -= f * a[c][j];
                inv[i][j] -= f * inv[c][j];
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::numfield::mahler_height;

    fn cubic_lattice() -> (ConjugacyData, LogLattice) {
        let conj = fixtures::cubic_conjugacy(128);
        let lat = LogLattice::from_conjugacy(&conj).unwrap();
        (conj, lat)
    }

    #[test]
    fn log_embed_values_and_trace_zero() {
        let (conj, _) = cubic_lattice();
        let theta = conj.field.theta();
        let v = log_embed(&theta).unwrap();
        let want = [0.8495491610972196, -1.1679870289462966, 0.3184378678490768];
        for (c, w) in v.coords.iter().zip(want) {
            assert!((c.to_f64() - w).abs() < 1e-12, "{} vs {}", c.to_f64(), w);
        }
        assert!(v.weighted_sum().abs().to_f64() < 2f64.powi(-32));
        // Homomorphism: log of theta^2 is twice log of theta.
        let v2 = log_embed(&theta.mul(&theta)).unwrap();
        for (a, b) in v2.coords.iter().zip(&v.coords) {
            assert!((a.to_f64() - 2.0 * b.to_f64()).abs() < 1e-12);
        }
    }

    #[test]
    fn log_embed_rejects_non_units() {
        let (conj, _) = cubic_lattice();
        let two = conj.field.one().add(&conj.field.one());
        assert!(matches!(log_embed(&two), Err(UnitLogError::NotAUnit)));
    }

    #[test]
    fn h0_matches_height_and_scales() {
        let (conj, _) = cubic_lattice();
        let theta = conj.field.theta();
        let v = log_embed(&theta).unwrap();
        let h = h0_norm(&v).to_f64();
        let hm = mahler_height(&theta).unwrap().to_f64();
        assert!((h - hm).abs() < 2f64.powi(-32));
        let h2 = h0_norm(&v.scale_i64(2)).to_f64();
        assert!((h2 - 2.0 * h).abs() < 1e-12);
        let z = LogVector::zero(3, vec![1, 1, 1], 128);
        assert_eq!(h0_norm(&z).to_f64(), 0.0);
    }

    #[test]
    fn q0_dominated_by_h0_squared() {
        let (_, lat) = cubic_lattice();
        let pts = lat.enumerate_ball(4.0, 1_000_000).unwrap();
        assert!(!pts.is_empty());
        for (_, v, h) in pts.iter().take(200) {
            let q = q0_form(v, v).to_f64();
            assert!(q <= h.to_f64().powi(2) + 1e-12);
        }
    }

    #[test]
    fn minima_of_cubic_lattice() {
        let (_, lat) = cubic_lattice();
        let m = successive_minima(&lat, 3.0, 1_000_000).unwrap();
        assert_eq!(m.minima.len(), 2);
        // Both minima equal the common generator height.
        let h = 1.1679870289462966;
        assert!((m.minima[0].to_f64() - h).abs() < 1e-12);
        assert!((m.minima[1].to_f64() - h).abs() < 1e-12);
        // Homogeneity: doubling the lattice doubles the minima.
        let doubled = LogLattice::new(
            lat.basis.iter().map(|b| b.scale_i64(2)).collect(),
        )
        .unwrap();
        let m2 = successive_minima(&doubled, 6.0, 1_000_000).unwrap();
        for (a, b) in m2.minima.iter().zip(&m.minima) {
            assert!((a.to_f64() - 2.0 * b.to_f64()).abs() < 1e-12);
        }
    }

    #[test]
    fn minima_radius_too_small() {
        let (_, lat) = cubic_lattice();
        assert!(matches!(
            successive_minima(&lat, 0.5, 1_000_000),
            Err(UnitLogError::RadiusTooSmall)
        ));
    }

    #[test]
    fn jarnik_bound_holds() {
        let (_, lat) = cubic_lattice();
        let minima = successive_minima(&lat, 3.0, 1_000_000).unwrap();
        let m_star: f64 = minima.minima.iter().map(|m| m.to_f64()).sum::<f64>() / 2.0;

        // Lattice point targets come back exactly.
        let target = lat.combine(&[2, -1]);
        let (expo, _, dist) = jarnik_nearest(&lat, &target, 1_000_000).unwrap();
        assert_eq!(expo, vec![2, -1]);
        assert!(dist.to_f64() < 1e-20);

        // Zero target.
        let zero = LogVector::zero(3, vec![1, 1, 1], 256);
        let (expo, _, dist) = jarnik_nearest(&lat, &zero, 1_000_000).unwrap();
        assert_eq!(expo, vec![0, 0]);
        assert!(dist.to_f64() < 1e-20);

        // Midpoint of two shortest vectors and a few generic targets.
        let v0 = lat.combine(&[1, 0]);
        let mid = v0.add(&lat.combine(&[0, 1])).scale_i64(1);
        let mid = LogVector {
            coords: mid.coords.iter().map(|c| c.mul2k(-1)).collect(),
            weights: mid.weights.clone(),
        };
        let (_, _, dist) = jarnik_nearest(&lat, &mid, 1_000_000).unwrap();
        assert!(dist.to_f64() <= m_star + 1e-9);

        let mut rng = crate::config::SplitMix64::new(7);
        for _ in 0..20 {
            let a = rng.next_f64() * 4.0 - 2.0;
            let b = rng.next_f64() * 4.0 - 2.0;
            let t = {
                let va = lat.combine(&[1, 0]);
                let vb = lat.combine(&[0, 1]);
                let p = va.coords[0].prec();
                let fa = Real::from_f64(a, p);
                let fb = Real::from_f64(b, p);
                LogVector {
                    coords: va
                        .coords
                        .iter()
                        .zip(&vb.coords)
                        .map(|(x, y)| &(x * &fa) + &(y * &fb))
                        .collect(),
                    weights: va.weights.clone(),
                }
            };
            let (_, _, dist) = jarnik_nearest(&lat, &t, 1_000_000).unwrap();
            assert!(dist.to_f64() <= m_star + 1e-9, "dist {} m* {}", dist.to_f64(), m_star);
        }
    }

    #[test]
    fn fundamental_size_cubic() {
        let (_, lat) = cubic_lattice();
        let f = fundamental_size(&lat, 1_000_000).unwrap();
        assert!((f.value.to_f64() - 1.1679870289462966).abs() < 1e-12);
        assert_eq!(f.witnesses.len(), 2);
        // Scaling the lattice doubles F.
        let doubled = LogLattice::new(
            lat.basis.iter().map(|b| b.scale_i64(2)).collect(),
        )
        .unwrap();
        let f2 = fundamental_size(&doubled, 1_000_000).unwrap();
        assert!((f2.value.to_f64() - 2.0 * f.value.to_f64()).abs() < 1e-12);
    }

    #[test]
    fn rank_one_lattice() {
        let (conj, _) = cubic_lattice();
        let theta = conj.field.theta();
        let lat = LogLattice::new(vec![log_embed(&theta).unwrap()]).unwrap();
        let f = fundamental_size(&lat, 1_000_000).unwrap();
        assert!((f.value.to_f64() - 1.1679870289462966).abs() < 1e-12);
    }

    #[test]
    fn totally_irreducible_witness() {
        let conj = fixtures::cubic_conjugacy(128);
        let w = find_totally_irreducible(&conj, 2, 1.0, 1_000_000).unwrap();
        // The first generator already qualifies in this fixture.
        assert_eq!(w.exponents, vec![1, 0]);
        assert!((w.height.to_f64() - 1.1679870289462966).abs() < 1e-12);
        // Certificate: powers stay irreducible.
        for n in 1..=12 {
            let m = w.matrix.pow(n);
            let cp = IntPoly::new(m.charpoly()).unwrap();
            assert!(is_irreducible(&cp, 128).unwrap(), "power {n}");
        }
    }

    #[test]
    fn root_of_unity_order_bound() {
        assert_eq!(max_root_of_unity_order(1), 2);
        assert_eq!(max_root_of_unity_order(2), 6);
        assert_eq!(max_root_of_unity_order(4), 12);
        // phi(m) <= 9 first fails beyond m = 30 for bound 9.
        assert_eq!(max_root_of_unity_order(9), 30);
    }

    #[test]
    fn voutier_floor_on_fixture_units() {
        let conj = fixtures::cubic_conjugacy(128);
        let floor = crate::config::Constants::default().height_floor(3);
        for u in &conj.phi {
            let h = mahler_height(u).unwrap().to_f64();
            assert!(h >= floor, "unit height {h} below floor {floor}");
        }
    }
}
